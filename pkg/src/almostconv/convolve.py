"""Certified evaluation of ``(f_r * phi)(x)`` and its sup/inf over translates.

``convolve_many`` walks the signal's expression tree. Sums, scalings and
translations are split off linearly; each leaf then uses the cheapest exact
route that applies:

* box kernel with a primitive: ``(Phi(x + r) - Phi(x - r)) / 2r``;
* trigonometric leaves: ``sum c * chi(r w) * exp(i w x)`` with ``chi`` the
  kernel's characteristic function;
* Poisson kernel on a half-plane trace ``phi(t) = F(it)``: ``F(r + ix)``;
* piecewise-constant leaves (blocks, steps): kernel interval masses;
* everything else: adaptive quadrature, over the kernel support for compact
  kernels and in the quantile variable ``u`` (``t = Q_r(u)``) otherwise.

The sup/inf scan is a branch and bound: ``x -> (f_r * Re phi)(x)`` has
derivative at most ``osc(Re phi)/2 * TV(f)/r`` (and, for smooth kernels,
second derivative at most ``osc(Re phi)/2 * TV(f')/r^2``), so each grid cell
gets an upper bound and only cells that could beat the current maximum are
split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quad
from .errors import HorizonUnsupported
from .kernels import Box, DilatedKernel, Poisson
from .sigdsl import BlockStructured, BoundedSignal, Periodic
from .sigdsl.analytic import AnalyticTerm, eval_terms
from .sigdsl.nodes import BlockIndicator, BoundedRational, Const, Node, Piecewise, Scale, Shift, Sum

EPS = np.finfo(float).eps

# Methods in increasing order of approximation.
CLOSED_FORM = "ClosedForm"
EXACT_OVERLAP = "ExactOverlap"
QUADRATURE = "Quadrature"
_RANK = {CLOSED_FORM: 0, EXACT_OVERLAP: 1, QUADRATURE: 2}


@dataclass(frozen=True)
class ConvolutionEstimate:
    value: complex
    err: float
    method: str
    n_evals: int = 0


def _worst(*methods):
    return max(methods, key=_RANK.__getitem__)


def _is_step(node: Node) -> bool:
    return isinstance(node, BlockIndicator) or (
        isinstance(node, Piecewise) and all(isinstance(p, Const) for p in node.pieces))


def _step_intervals(node: Node, lo: float, hi: float):
    """``(starts, ends, heights)`` of the constant pieces meeting ``[lo, hi]``."""
    if isinstance(node, BlockIndicator):
        s, e = node.spec.blocks_between(lo, hi)
        return s, e, np.ones(s.size, dtype=complex)
    edges = (-math.inf,) + node.breaks + (math.inf,)
    s, e, h = [], [], []
    for a, b, piece in zip(edges[:-1], edges[1:], node.pieces):
        if piece.value != 0 and b >= lo and a <= hi:
            s.append(a)
            e.append(b)
            h.append(piece.value)
    return np.array(s, dtype=float), np.array(e, dtype=float), np.array(h, dtype=complex)


class _Engine:
    def __init__(self, dk: DilatedKernel, max_evals: int):
        self.dk = dk
        self.base = dk.base
        self.r = dk.r
        self.max_evals = max_evals
        self.n_evals = 0

    def reach(self, share: float, bound: float) -> float:
        """Radius ``M`` with ``bound * tail_mass_r(M) <= share``."""
        if math.isfinite(self.dk.support_radius):
            return self.dk.support_radius
        p = min(0.5 * share / max(bound, 1e-300), 0.25)
        return float(self.dk.quantile(1.0 - p))

    def run(self, node: Node, xs: np.ndarray, tol: float):
        if isinstance(node, Sum):
            share = tol / len(node.terms)
            parts = [self.run(c, xs, share) for c in node.terms]
            return (sum(p[0] for p in parts), sum(p[1] for p in parts),
                    _worst(*(p[2] for p in parts)))
        if isinstance(node, Scale):
            if node.factor == 0:
                return np.zeros(xs.shape, dtype=complex), np.zeros(xs.shape), CLOSED_FORM
            v, e, m = self.run(node.child, xs, tol / abs(node.factor))
            return node.factor * v, abs(node.factor) * e, m
        if isinstance(node, Shift):
            return self.run(node.child, xs + node.offset, tol)
        if isinstance(node, Const):
            return (np.full(xs.shape, node.value), np.full(xs.shape, 4 * EPS * abs(node.value)), CLOSED_FORM)
        return self.leaf(node, xs, tol)

    def leaf(self, node: Node, xs: np.ndarray, tol: float):
        r = self.r
        if isinstance(self.base, Box):
            exact = node.exact_window(xs - r, xs + r)
            if exact is not None:
                return exact[0] / (2 * r), exact[1] / (2 * r), CLOSED_FORM
        spec = node.spectrum()
        if spec is not None:
            val = np.zeros(xs.shape, dtype=complex)
            for w, c in spec.items():
                val = val + c * self.base.char(r * w) * np.exp(1j * w * xs)
            scale = sum(abs(c) for c in spec.values())
            err = 16 * EPS * scale * (1.0 + len(spec))
            return val, np.full(xs.shape, err), CLOSED_FORM
        if isinstance(self.base, Poisson):
            terms = node.analytic_terms()
            if terms is not None:
                val = eval_terms(terms, r + 1j * xs)
                err = 1e-14 * (node.bound + sum(abs(t.coef) for t in terms))
                return val, np.full(xs.shape, err), CLOSED_FORM
            if isinstance(node, BoundedRational):
                # it/(c + it) with Re c < 0 is the conjugate of the trace of z/(z - conj c).
                mirror = AnalyticTerm.ratio(-np.conj(node.c))
                val = np.conj(mirror(r + 1j * xs))
                return val, np.full(xs.shape, 1e-14 * node.bound), CLOSED_FORM
        if _is_step(node):
            return self.steps(node, xs, tol)
        return self.quadrature(node, xs, tol)

    def steps(self, node, xs, tol):
        # sum over pieces of height * mass of f_r on [x - end, x - start]
        M = self.reach(tol / 2, node.bound)
        s, e, h = _step_intervals(node, float(xs.min()) - M, float(xs.max()) + M)
        if s.size == 0:
            val = np.zeros(xs.shape, dtype=complex)
        else:
            mass = self.dk.interval_mass(xs[:, None] - e[None, :], xs[:, None] - s[None, :])
            val = mass @ h
        tail = node.bound * float(self.dk.tail_mass(M)) if math.isfinite(M) else 0.0
        err = tail + 64 * EPS * (np.abs(h).sum() if h.size else 0.0)
        return val, np.full(xs.shape, err), EXACT_OVERLAP

    def quadrature(self, node, xs, tol):
        vals = np.empty(xs.shape, dtype=complex)
        errs = np.empty(xs.shape)
        for j, x in enumerate(xs.ravel()):
            v, e = self.quad_one(node, float(x), tol)
            vals.flat[j] = v
            errs.flat[j] = e
        return vals, errs, QUADRATURE

    def quad_one(self, node, x, tol):
        dk = self.dk
        bound = node.bound
        supp = node.support()
        if supp is None:
            return 0j, 0.0
        # phi(x - t) can be nonzero only for t in [x - supp_hi, x - supp_lo].
        t_lo, t_hi = x - supp[1], x - supp[0]
        budget = dict(max_evals=self.max_evals, raise_on_budget=True)
        if math.isfinite(dk.support_radius):
            R = dk.support_radius
            a, b = max(t_lo, -R), min(t_hi, R)
            if a >= b:
                return 0j, 0.0
            pts = x - node.breakpoints(x - b, x - a)
            pts = np.concatenate([pts, [r * p for p in self.base.breakpoints() for r in (self.r, -self.r)]])
            n = int(min(4096, max(4, math.ceil((b - a) / 4.0))))

            def integrand(t):
                return node(x - t) * dk.density(t)

            v, e, n_ev = quad.integrate(integrand, a, b, tol, pts, min_panels=n, **budget)
        else:
            # t = Q_r(u) turns f_r(t) dt into du on (0, 1).
            u_lo = float(self.dk.sf(-t_lo)) if math.isfinite(t_lo) else 0.0
            u_hi = float(self.dk.sf(-t_hi)) if math.isfinite(t_hi) else 1.0
            if u_hi <= u_lo:
                return 0j, 0.0
            M = self.reach(tol / 4, bound)
            t_pts = x - node.breakpoints(x - M, x + M)
            pts = self.dk.sf(-np.asarray(t_pts, dtype=float))
            span = min(2 * M, t_hi - t_lo)
            n = int(min(4096, max(8, math.ceil(span / 8.0))))

            def integrand(u):
                return node(x - self.dk.quantile(u))

            v, e, n_ev = quad.integrate(integrand, u_lo, u_hi, tol, pts, min_panels=n, bound=bound, **budget)
        self.n_evals += n_ev
        return complex(v), float(e)


def convolve_many(dk: DilatedKernel, signal: BoundedSignal | Node, xs, tol: float = 1e-9,
                  max_evals: int = quad.DEFAULT_MAX_EVALS):
    """Vectorized ``(f_r * phi)(x)``: returns ``(values, errs, method)``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    node = signal.expr if isinstance(signal, BoundedSignal) else signal
    xs = np.asarray(xs, dtype=float)
    engine = _Engine(dk, max_evals)
    vals, errs, method = engine.run(node, xs, tol)
    return np.asarray(vals, dtype=complex), np.asarray(errs, dtype=float), method


def convolve_at(dk: DilatedKernel, signal: BoundedSignal, x: float, tol: float = 1e-9,
                max_evals: int = quad.DEFAULT_MAX_EVALS) -> ConvolutionEstimate:
    """``(f_r * phi)(x) = int phi(x - t) f_r(t) dt`` with an error bound."""
    engine = _Engine(dk, max_evals)
    node = signal.expr if isinstance(signal, BoundedSignal) else signal
    if not tol > 0:
        raise ValueError("tol must be positive")
    v, e, method = engine.run(node, np.array([float(x)]), tol)
    return ConvolutionEstimate(complex(np.asarray(v).ravel()[0]), float(np.asarray(e).ravel()[0]),
                               method, engine.n_evals)


# -- horizons ---------------------------------------------------------------

@dataclass(frozen=True)
class HorizonPolicy:
    """Where to look for the sup/inf over translates.

    ``auto`` derives windows from the signal's structure tag. ``absolute``
    scans ``[lo, hi]``; ``relative`` scans ``[-factor*r, factor*r]``. Both
    explicit forms mark results as horizon-limited.
    """

    kind: str = "auto"
    lo: float = 0.0
    hi: float = 0.0
    factor: float = 0.0
    reach: float = 1e4

    @classmethod
    def parse(cls, text: str | None) -> "HorizonPolicy":
        """``auto``, ``lo:hi`` or ``<factor>r``."""
        if text is None or text.strip() in ("", "auto"):
            return cls()
        text = text.strip()
        if text.endswith("r"):
            factor = float(text[:-1])
            if not factor > 0:
                raise ValueError("relative horizon needs a positive factor")
            return cls("relative", factor=factor)
        lo, sep, hi = text.partition(":")
        if not sep:
            raise ValueError("horizon must be 'auto', 'lo:hi' or '<factor>r'")
        lo, hi = float(lo), float(hi)
        if not hi > lo:
            raise ValueError("horizon needs lo < hi")
        return cls("absolute", lo=lo, hi=hi)

    def describe(self) -> str:
        if self.kind == "absolute":
            return f"{self.lo!r}:{self.hi!r}"
        if self.kind == "relative":
            return f"{self.factor!r}r"
        return "auto"

    def windows(self, signal: BoundedSignal, r: float):
        """``(list of (lo, hi), label, horizon_limited)``."""
        if self.kind == "absolute":
            return [(self.lo, self.hi)], f"explicit {self.lo!r}:{self.hi!r}", True
        if self.kind == "relative":
            return [(-self.factor * r, self.factor * r)], f"explicit {self.factor!r}r", True
        tag = signal.structure
        if isinstance(tag, Periodic):
            return [(0.0, tag.period)], f"period {tag.period!r}", False
        if isinstance(tag, BlockStructured):
            centers = signal.expr.probes(r, self.reach)
            half = max(r, 1.0)
            wins = [(c - half, c + half) for c in centers]
            sweep = 2.0 * r + 2.0
            wins.append((-sweep, sweep))
            return _merge(wins), f"block probes ({len(centers)} centers)", False
        raise HorizonUnsupported(
            "signal has no periodic or block structure; pass an explicit horizon such as '-100:100' or '4r'")


def _merge(wins):
    wins = sorted(wins)
    out = [list(wins[0])]
    for lo, hi in wins[1:]:
        if lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(w) for w in out]


# -- sup/inf over translates -----------------------------------------------

@dataclass(frozen=True)
class SupInfEstimate:
    """Sampled ``sup_x`` / ``inf_x`` of ``(f_r * phi)(x)`` with a two-sided slack.

    The true sup over the horizon lies in ``[F_bar - slack, F_bar + slack]``
    and likewise for the inf.
    """

    r: float
    F_bar: float
    F_under: float
    slack: float
    horizon: str
    spacing: float
    n_points: int
    horizon_limited: bool = False
    budget_exhausted: bool = False
    argmax: float = field(default=math.nan)
    argmin: float = field(default=math.nan)

    def as_dict(self):
        return {
            "r": self.r, "F_bar": self.F_bar, "F_under": self.F_under, "slack": self.slack,
            "horizon": self.horizon, "spacing": self.spacing, "n_points": self.n_points,
            "horizon_limited": self.horizon_limited, "budget_exhausted": self.budget_exhausted,
        }


def sup_inf_over_translates(dk: DilatedKernel, signal: BoundedSignal, horizon: HorizonPolicy | None = None,
                            tol: float = 1e-6, part: str = "re", max_points: int = 200_000,
                            max_evals: int = quad.DEFAULT_MAX_EVALS) -> SupInfEstimate:
    """Sup and inf over the horizon of ``x -> (f_r * Re phi)(x)`` (or ``Im``).

    Half of ``tol`` goes to pointwise evaluation and half to the grid: a
    cell is settled once its Lipschitz upper bound cannot beat the best
    sampled maximum by more than ``tol / 2`` (and symmetrically for the
    minimum). Max and min refinements are applied to the same cells, so the
    scan of ``-phi`` visits exactly the same points as the scan of ``phi``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    horizon = horizon or HorizonPolicy()
    if part not in ("re", "im"):
        raise ValueError("part must be 're' or 'im'")
    windows, label, limited = horizon.windows(signal, dk.r)
    lo_v, hi_v = signal.re_range if part == "re" else signal.im_range
    lip = 0.5 * (hi_v - lo_v) * dk.tv
    # |g''| <= osc/2 * TV(f_r') for smooth kernels, and <= TV(f_r) * Lip(phi) for any kernel.
    curvs = [dk.tv * signal.expr.lipschitz]
    if dk.tv_prime is not None:
        curvs.append(0.5 * (hi_v - lo_v) * dk.tv_prime)
    curv = min(curvs) if math.isfinite(min(curvs)) else None
    eval_tol = tol / 2
    disc_tol = tol / 2

    def evaluate(xs):
        # The kernel is real, so Re/Im commute with the convolution.
        v, e, _ = convolve_many(dk, signal, xs, eval_tol, max_evals)
        return (v.real if part == "re" else v.imag), e

    # initial grid: spacing r/8, at least 16 and at most 4096 cells per window
    xs_list = []
    for a, b in windows:
        n = int(min(4096, max(16, math.ceil((b - a) / (dk.r / 8.0)))))
        xs_list.append(np.linspace(a, b, n + 1))
    cell_lo = np.concatenate([x[:-1] for x in xs_list])
    cell_hi = np.concatenate([x[1:] for x in xs_list])
    pts = np.unique(np.concatenate(xs_list))
    vals, errs = evaluate(pts)
    known = dict(zip(pts.tolist(), zip(vals.tolist(), errs.tolist())))

    best_hi = float(np.max(vals))
    best_lo = float(np.min(vals))
    exhausted = False
    settled_hi = -math.inf   # largest upper bound among retired cells
    settled_lo = math.inf    # smallest lower bound among retired cells
    min_width = float(np.min(cell_hi - cell_lo))
    while cell_lo.size:
        g0 = np.array([known[x][0] for x in cell_lo.tolist()])
        g1 = np.array([known[x][0] for x in cell_hi.tolist()])
        h = cell_hi - cell_lo
        # Lipschitz cone bound; with |g''| <= curv also the chord bound.
        rise = 0.5 * lip * h
        ub = 0.5 * (g0 + g1) + rise
        lb = 0.5 * (g0 + g1) - rise
        if curv is not None:
            bend = 0.125 * curv * h * h
            ub = np.minimum(ub, np.maximum(g0, g1) + bend)
            lb = np.maximum(lb, np.minimum(g0, g1) - bend)
        ub = np.minimum(ub, hi_v)
        lb = np.maximum(lb, lo_v)
        active = (ub > best_hi + disc_tol) | (lb < best_lo - disc_tol)
        if active.any() and len(known) + int(active.sum()) > max_points:
            exhausted = True
            active[:] = False
        done = ~active
        if done.any():
            settled_hi = max(settled_hi, float(ub[done].max()))
            settled_lo = min(settled_lo, float(lb[done].min()))
        if not active.any():
            break
        a, b = cell_lo[active], cell_hi[active]
        mid = 0.5 * (a + b)
        v, e = evaluate(mid)
        for x, vi, ei in zip(mid.tolist(), v.tolist(), e.tolist()):
            known[x] = (vi, ei)
        best_hi = max(best_hi, float(v.max()))
        best_lo = min(best_lo, float(v.min()))
        min_width = min(min_width, float((mid - a).min()))
        cell_lo = np.concatenate([a, mid])
        cell_hi = np.concatenate([mid, b])

    all_x = np.array(list(known))
    all_v = np.array([known[x][0] for x in all_x.tolist()])
    max_err = max(known[x][1] for x in all_x.tolist())
    grid_slack = max(settled_hi - best_hi, best_lo - settled_lo, 0.0)
    return SupInfEstimate(
        r=float(dk.r), F_bar=best_hi, F_under=best_lo, slack=grid_slack + max_err,
        horizon=label, spacing=min_width, n_points=len(known), horizon_limited=limited,
        budget_exhausted=exhausted, argmax=float(all_x[np.argmax(all_v)]),
        argmin=float(all_x[np.argmin(all_v)]))
