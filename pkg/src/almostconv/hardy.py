"""Bounded analytic functions on the right half plane and their boundary traces.

A :class:`HalfPlaneFunction` pairs a boundary signal ``y -> phi(iy)`` with
its extension ``phi(x + iy)``. Functions parsed from the ``z`` grammar carry
a closed form; functions built from an arbitrary boundary signal are
extended by the Poisson integral, which at abscissa ``x`` is exactly the
convolution with the Poisson kernel dilated by ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .aclimit import ACConfig, ACVerdict, LadderResult, Status, _classify, ac_verdict
from .convolve import HorizonPolicy, SupInfEstimate, convolve_at, sup_inf_over_translates
from .errors import PreconditionUnmet, UnboundedConstruct
from .kernels import Box, Poisson, dilate
from .sigdsl import BoundedSignal, Generic, parse_expr, parse_signal
from .sigdsl.analytic import eval_terms
from .sigdsl.nodes import Product


@dataclass(frozen=True, eq=False)
class HalfPlaneFunction:
    source: str
    boundary: BoundedSignal
    terms: tuple | None = None

    @property
    def has_closed_form(self) -> bool:
        return self.terms is not None

    @property
    def bound(self) -> float:
        """Bound on ``|phi|`` over the closed half plane (maximum principle)."""
        return self.boundary.sup_bound

    @classmethod
    def parse(cls, text: str) -> "HalfPlaneFunction":
        """Parse from the whitelist: ``exp(-a*z)`` (``a >= 0``), Moebius maps with
        poles in ``Re z < 0`` such as ``z/(c+z)``, complex constants, and sums and
        products of these."""
        node = parse_expr(text, "z")
        terms = node.analytic_terms()
        if terms is None:
            raise UnboundedConstruct(f"{text!r} is not in the bounded analytic whitelist")
        return cls(text, BoundedSignal(node), tuple(terms))

    @classmethod
    def from_boundary(cls, signal: BoundedSignal | str) -> "HalfPlaneFunction":
        """Wrap a boundary signal; a closed form is attached only if the signal is
        recognisably the trace of a bounded analytic function."""
        if isinstance(signal, str):
            signal = parse_signal(signal)
        terms = signal.expr.analytic_terms()
        return cls(signal.source, signal, None if terms is None else tuple(terms))

    def __mul__(self, other: "HalfPlaneFunction") -> "HalfPlaneFunction":
        node = Product((self.boundary.expr, other.boundary.expr))
        terms = node.analytic_terms()
        return HalfPlaneFunction(f"({self.source})*({other.source})", BoundedSignal(node),
                                 None if terms is None else tuple(terms))

    def __call__(self, z, tol: float = 1e-9):
        """``phi(z)`` for ``Re z > 0``: closed form if known, else the Poisson integral."""
        z = np.asarray(z, dtype=complex)
        if np.any(z.real <= 0):
            raise ValueError("evaluation needs Re z > 0")
        if self.terms is not None:
            out = eval_terms(self.terms, z)
        else:
            out = np.vectorize(lambda w: poisson_extend(self.boundary, w.real, w.imag, tol),
                               otypes=[complex])(z)
        return complex(out) if out.ndim == 0 else out


# Traces of the whitelisted functions differ from a periodic part by terms that
# decay like 1/|t|, so the extremes of window averages sit within a few r of 0.
TRACE_HORIZON = HorizonPolicy("relative", factor=8.0)


def _config_for(hpf: "HalfPlaneFunction", cfg: ACConfig) -> ACConfig:
    if cfg.horizon.kind == "auto" and isinstance(hpf.boundary.structure, Generic):
        return ACConfig(**{**cfg.__dict__, "horizon": TRACE_HORIZON})
    return cfg


def poisson_extend(boundary: BoundedSignal, x: float, y: float, tol: float = 1e-9) -> complex:
    """``(1/pi) int phi(t) x / (x^2 + (y - t)^2) dt``, i.e. ``(P_x * phi)(y)``."""
    if not x > 0:
        raise ValueError("poisson_extend needs x > 0")
    return convolve_at(dilate(Poisson(), x), boundary, y, tol).value


def interior_band(hpf: HalfPlaneFunction, x_ladder, horizon: HorizonPolicy | None = None,
                  tol: float = 1e-6, part: str = "re") -> list[SupInfEstimate]:
    """``sup_y`` / ``inf_y`` of ``Re phi(x + iy)`` (or ``Im``) for each ``x`` in the ladder.

    The y-horizon follows the boundary's structure: a periodic trace gives a
    periodic extension in ``y``; other traces of whitelisted functions are
    scanned on ``[-8x, 8x]`` unless a horizon is given.
    """
    if (horizon is None or horizon.kind == "auto") and isinstance(hpf.boundary.structure, Generic):
        horizon = TRACE_HORIZON
    xs = [float(x) for x in x_ladder]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("x_ladder must be increasing")
    return [sup_inf_over_translates(dilate(Poisson(), x), hpf.boundary, horizon, tol, part) for x in xs]


def _interior_verdict(hpf: HalfPlaneFunction, cfg: ACConfig):
    parts = ["re"] if hpf.boundary.is_real else ["re", "im"]
    xs = [cfg.r0 * cfg.rho ** k for k in range(cfg.K + 1)]
    ladders, comps = [], []
    for p in parts:
        rungs = interior_band(hpf, xs, cfg.horizon, cfg.tol, p)
        lad = LadderResult("interior", p, tuple(rungs))
        ladders.append(lad)
        comps.append(_classify(lad, cfg))
    if any(c.state == "wide" for c in comps):
        return Status.DIVERGENT, None, ladders, comps
    if any(c.state == "undecided" for c in comps):
        return Status.INCONCLUSIVE, None, ladders, comps
    re = comps[0].estimate.final_midpoint
    im = comps[1].estimate.final_midpoint if len(comps) > 1 else 0.0
    return Status.ALMOST_CONVERGENT, complex(re, im), ladders, comps


@dataclass(frozen=True)
class EquivalenceReport:
    function: str
    boundary: ACVerdict
    interior_status: Status
    interior_alpha: complex | None
    interior_ladders: tuple
    interior_components: tuple
    agree: bool
    band_gap: float
    note: str = ""

    def as_dict(self):
        def cx(a):
            return None if a is None else {"re": a.real, "im": a.imag}
        return {
            "function": self.function,
            "boundary": {"status": self.boundary.status.value, "alpha": cx(self.boundary.alpha)},
            "interior": {"status": self.interior_status.value, "alpha": cx(self.interior_alpha),
                         "components": [c.as_dict() for c in self.interior_components]},
            "agree": self.agree, "band_gap": self.band_gap, "note": self.note,
        }


def boundary_vs_interior(hpf: HalfPlaneFunction, config: ACConfig | None = None) -> EquivalenceReport:
    """Box-window verdict on the boundary against the limit of ``phi(x + iy)`` as ``x -> inf``.

    The two must match in status and limit; the limiting bands (not the
    per-rung bands, which belong to different kernels) are compared too.
    """
    cfg = _config_for(hpf, config or ACConfig())
    verdict = ac_verdict(hpf.boundary, [Box()], cfg)
    status, alpha, ladders, comps = _interior_verdict(hpf, cfg)
    gap = 0.0
    for c in comps:
        box = next((b for b in verdict.components if b.part == c.part), None)
        if box is not None and box.estimate is not None and c.estimate is not None:
            gap = max(gap, abs(box.estimate.F_bar_u - c.estimate.F_bar_u),
                      abs(box.estimate.F_under_u - c.estimate.F_under_u))
    agree = status == verdict.status
    if agree and status == Status.ALMOST_CONVERGENT:
        agree = abs(alpha - verdict.alpha) <= cfg.eps_agree
    note = "" if agree else "boundary and interior disagree; the two limits are equal in exact arithmetic"
    return EquivalenceReport(hpf.source, verdict, status, alpha, tuple(ladders), tuple(comps), agree, gap, note)


@dataclass(frozen=True)
class MultiplicativityReport:
    left: str
    right: str
    alpha: complex
    beta: complex
    product_status: Status
    product_alpha: complex | None
    multiplicative: bool
    in_hinf: bool
    hypothesis_violated: bool
    note: str
    counterexample: "MultiplicativityReport | None" = None

    def as_dict(self):
        def cx(a):
            return None if a is None else {"re": a.real, "im": a.imag}
        out = {
            "left": self.left, "right": self.right, "alpha": cx(self.alpha), "beta": cx(self.beta),
            "product_status": self.product_status.value, "product_alpha": cx(self.product_alpha),
            "multiplicative": self.multiplicative, "in_hinf": self.in_hinf,
            "hypothesis_violated": self.hypothesis_violated, "note": self.note,
        }
        if self.counterexample is not None:
            out["counterexample"] = self.counterexample.as_dict()
        return out


def _product_report(phi, psi, cfg, kernels):
    va = ac_verdict(phi.boundary, kernels, _config_for(phi, cfg))
    vb = ac_verdict(psi.boundary, kernels, _config_for(psi, cfg))
    for name, v in ((phi.source, va), (psi.source, vb)):
        if v.status != Status.ALMOST_CONVERGENT:
            raise PreconditionUnmet(f"{name} is not almost convergent ({v.status.value}: {v.reason})")
    prod = phi * psi
    vp = ac_verdict(prod.boundary, kernels, _config_for(prod, cfg))
    expected = va.alpha * vb.alpha
    ok = vp.status == Status.ALMOST_CONVERGENT and abs(vp.alpha - expected) <= cfg.eps_agree
    in_hinf = phi.has_closed_form and psi.has_closed_form
    violated = not in_hinf and not ok
    if in_hinf:
        note = "both factors are bounded analytic on Re z > 0"
    else:
        outside = [f.source for f in (phi, psi) if not f.has_closed_form]
        note = f"not covered: {', '.join(outside)} is not the trace of a bounded analytic function"
        if not ok:
            note += f"; product limit differs from {expected.real:.6g}{expected.imag:+.6g}i"
    return MultiplicativityReport(phi.source, psi.source, va.alpha, vb.alpha, vp.status, vp.alpha,
                                  ok, in_hinf, violated, note)


def multiplicativity_check(phi: HalfPlaneFunction, psi: HalfPlaneFunction, config: ACConfig | None = None,
                           kernels=None, include_counterexample: bool = True) -> MultiplicativityReport:
    """Check that the product of two almost convergent traces tends to ``alpha * beta``.

    Raises :class:`PreconditionUnmet` unless both factors are almost
    convergent. The report also carries the ``exp(it) * exp(-it)`` pair,
    two almost convergent bounded functions whose product is not, which
    shows the analyticity requirement cannot be dropped.
    """
    cfg = config or ACConfig()
    kernels = list(kernels) if kernels else [Box()]
    report = _product_report(phi, psi, cfg, kernels)
    if include_counterexample:
        ce = _product_report(HalfPlaneFunction.from_boundary("cis(t)"),
                             HalfPlaneFunction.from_boundary("cis(-t)"), cfg, kernels)
        report = MultiplicativityReport(**{**report.__dict__, "counterexample": ce})
    return report


@dataclass(frozen=True)
class ClusterReport:
    points: tuple
    values: tuple
    clusters: tuple  # ((center, count), ...)
    eps: float

    def as_dict(self):
        return {
            "eps": self.eps,
            "points": [{"x": x, "y": y} for x, y in self.points],
            "values": [{"re": v.real, "im": v.imag} for v in self.values],
            "clusters": [{"re": c.real, "im": c.imag, "count": n} for c, n in self.clusters],
        }


def cluster_sample(hpf: HalfPlaneFunction, xs, ys, eps: float = 1e-2, tol: float = 1e-9) -> ClusterReport:
    """Evaluate ``phi(x_n + i y_n)`` and group the values by single linkage at distance ``eps``.

    Each cluster centre is a candidate limit point along the sequence.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.broadcast_to(np.asarray(ys, dtype=float), xs.shape)
    if xs.ndim != 1 or xs.size == 0:
        raise ValueError("need a nonempty sequence")
    if np.any(np.diff(xs) <= 0) or xs[0] <= 0:
        raise ValueError("x_n must be positive and strictly increasing")
    values = np.asarray(hpf(xs + 1j * ys, tol), dtype=complex).ravel()
    n = values.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= eps:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(values[i])
    clusters = sorted(((complex(np.mean(g)), len(g)) for g in groups.values()),
                      key=lambda c: (c[0].real, c[0].imag))
    return ClusterReport(tuple(zip(xs.tolist(), ys.tolist())), tuple(complex(v) for v in values),
                         tuple(clusters), eps)
