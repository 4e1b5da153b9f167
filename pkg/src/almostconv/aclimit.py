"""Dilation ladders and the almost-convergence verdict.

For each kernel and each of ``Re phi`` / ``Im phi`` a ladder of dilations
``r_k = r0 * rho**k`` records the sup and inf over translates of
``f_r * phi``. The last three rungs estimate the limiting band
``[liminf F_under, limsup F_bar]``; a band that collapses to a point means
almost convergence to that point, a band that stays wide means divergence.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .convolve import HorizonPolicy, sup_inf_over_translates
from .errors import InadmissibleKernel, QuadratureBudgetExceeded
from .kernels import Kernel, admissible, dilate
from .sigdsl import BoundedSignal


class Status(str, enum.Enum):
    ALMOST_CONVERGENT = "AlmostConvergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ACConfig:
    r0: float = 1.0
    rho: float = 10.0
    K: int = 6
    tol: float = 1e-6
    eps_conv: float = 1e-3
    eps_agree: float = 1e-3
    eps_div: float = 1e-2
    horizon: HorizonPolicy = field(default_factory=HorizonPolicy)
    check_admissible: bool = False
    workers: int = 1

    def __post_init__(self):
        for name in ("r0", "tol", "eps_conv", "eps_agree", "eps_div"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if int(self.K) != self.K or self.K < 3:
            raise ValueError("K must be an integer >= 3")

    def as_dict(self):
        return {
            "r0": self.r0, "rho": self.rho, "K": self.K, "tol": self.tol,
            "eps_conv": self.eps_conv, "eps_agree": self.eps_agree, "eps_div": self.eps_div,
            "horizon": self.horizon.describe(), "check_admissible": self.check_admissible,
        }


@dataclass(frozen=True)
class LadderResult:
    kernel: str
    part: str
    rungs: tuple
    failed_rung: int | None = None
    failure: str | None = None

    @property
    def complete(self) -> bool:
        return self.failed_rung is None

    def as_dict(self):
        return {
            "kernel": self.kernel, "part": self.part,
            "rungs": [r.as_dict() for r in self.rungs],
            "failed_rung": self.failed_rung, "failure": self.failure,
        }


def ladder_radii(r0: float, rho: float, K: int):
    return [r0 * rho ** k for k in range(K + 1)]


def band_ladder(kernel: Kernel, signal: BoundedSignal, r0: float = 1.0, rho: float = 10.0, K: int = 6,
                horizon: HorizonPolicy | None = None, tol: float = 1e-6, part: str = "re",
                workers: int = 1) -> LadderResult:
    """Sup/inf over translates of ``f_r * phi`` at ``r = r0 * rho**k``, ``k = 0..K``.

    A rung that runs out of quadrature budget ends the ladder; the rungs
    before it are kept and the failure is recorded.
    """
    if not (r0 > 0 and rho > 1 and K >= 3):
        raise ValueError("band_ladder needs r0 > 0, rho > 1 and K >= 3")
    horizon = horizon or HorizonPolicy()
    radii = ladder_radii(r0, rho, K)

    def rung(r):
        try:
            return sup_inf_over_translates(dilate(kernel, r), signal, horizon, tol, part)
        except QuadratureBudgetExceeded as exc:
            return exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(rung, radii))
    else:
        results = [rung(r) for r in radii]
    rungs = []
    for k, res in enumerate(results):
        if isinstance(res, Exception):
            return LadderResult(kernel.spec, part, tuple(rungs), k, str(res))
        rungs.append(res)
    return LadderResult(kernel.spec, part, tuple(rungs))


@dataclass(frozen=True)
class FuEstimate:
    F_bar_u: float
    F_under_u: float
    stable: bool
    drift: float
    slack: float
    final_width: float
    final_midpoint: float

    @property
    def width(self) -> float:
        return self.F_bar_u - self.F_under_u

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.F_bar_u + self.F_under_u)

    def as_dict(self):
        return {"F_bar_u": self.F_bar_u, "F_under_u": self.F_under_u, "stable": self.stable,
                "drift": self.drift, "slack": self.slack, "final_width": self.final_width}


def estimate_Fu(ladder: LadderResult, eps_conv: float = 1e-3) -> FuEstimate:
    """Band estimate from the last three rungs.

    ``stable`` means consecutive rungs differ by at most ``eps_conv`` (plus
    the rungs' own slack) in both ``F_bar`` and ``F_under``.
    """
    if len(ladder.rungs) < 3:
        raise ValueError("estimate_Fu needs at least three rungs")
    last = ladder.rungs[-3:]
    drift = max(max(abs(a.F_bar - b.F_bar), abs(a.F_under - b.F_under)) for a, b in zip(last, last[1:]))
    slack = max(r.slack for r in last)
    return FuEstimate(
        F_bar_u=max(r.F_bar for r in last),
        F_under_u=min(r.F_under for r in last),
        stable=drift <= eps_conv + 2 * slack,
        drift=drift,
        slack=slack,
        final_width=last[-1].F_bar - last[-1].F_under,
        final_midpoint=0.5 * (last[-1].F_bar + last[-1].F_under),
    )


@dataclass(frozen=True)
class ComponentVerdict:
    kernel: str
    part: str
    state: str  # collapsed | wide | undecided
    estimate: FuEstimate | None
    reason: str = ""

    def as_dict(self):
        return {"kernel": self.kernel, "part": self.part, "state": self.state, "reason": self.reason,
                "estimate": None if self.estimate is None else self.estimate.as_dict()}


def _classify(ladder: LadderResult, cfg: ACConfig) -> ComponentVerdict:
    tag = f"{ladder.kernel}/{ladder.part}"
    if not ladder.complete and len(ladder.rungs) < 3:
        return ComponentVerdict(ladder.kernel, ladder.part, "undecided", None,
                                f"{tag}: ladder failed at rung {ladder.failed_rung} ({ladder.failure})")
    est = estimate_Fu(ladder, cfg.eps_conv)
    if not ladder.complete:
        return ComponentVerdict(ladder.kernel, ladder.part, "undecided", est,
                                f"{tag}: ladder failed at rung {ladder.failed_rung} ({ladder.failure})")
    if not est.stable:
        return ComponentVerdict(ladder.kernel, ladder.part, "undecided", est,
                                f"{tag}: last rungs drift by {est.drift:.3g} > eps_conv")
    # The width test looks at the last rung only; the three-rung window enters
    # through the drift check. Traces decaying like log(r)/r would otherwise
    # be held back by the oldest rung of the window.
    final_slack = ladder.rungs[-1].slack
    if est.final_width <= cfg.eps_conv + 2 * final_slack:
        return ComponentVerdict(ladder.kernel, ladder.part, "collapsed", est)
    if est.final_width > cfg.eps_div + 2 * final_slack:
        return ComponentVerdict(ladder.kernel, ladder.part, "wide", est)
    return ComponentVerdict(ladder.kernel, ladder.part, "undecided", est,
                            f"{tag}: band width {est.final_width:.3g} lies between eps_conv and eps_div")


@dataclass(frozen=True)
class ACVerdict:
    status: Status
    alpha: complex | None
    band: dict
    reason: str
    kernels: tuple
    config: ACConfig
    horizon: str
    horizon_limited: bool
    components: tuple
    ladders: tuple
    kernel_alphas: dict

    def as_dict(self):
        return {
            "status": self.status.value,
            "alpha": None if self.alpha is None else {"re": self.alpha.real, "im": self.alpha.imag},
            "band": {k: {"lo": v[0], "hi": v[1], "slack": v[2]} for k, v in self.band.items()},
            "reason": self.reason,
            "kernels": list(self.kernels),
            "horizon": self.horizon,
            "horizon_limited": self.horizon_limited,
            "kernel_alphas": {k: {"re": v.real, "im": v.imag} for k, v in self.kernel_alphas.items()},
            "components": [c.as_dict() for c in self.components],
        }


def ac_verdict(signal: BoundedSignal, kernels, config: ACConfig | None = None) -> ACVerdict:
    """Almost-convergence verdict from the dilation ladders of every kernel.

    ``AlmostConvergent`` needs every kernel's Re and Im bands to collapse to
    the same value within ``eps_agree``; ``Divergent`` needs some kernel
    with a stable wide band. Anything else is ``Inconclusive`` with the
    blocking condition spelled out.
    """
    cfg = config or ACConfig()
    kernels = list(kernels)
    if not kernels:
        raise ValueError("ac_verdict needs at least one kernel")
    if cfg.check_admissible:
        for k in kernels:
            adm = admissible(k)
            if not adm.ok:
                raise InadmissibleKernel(
                    f"{k.spec}: Mellin transform has modulus {adm.min_modulus:.3g} at xi = {adm.argmin_xi}")
    parts = ["re"] if signal.is_real else ["re", "im"]
    jobs = [(k, p) for k in kernels for p in parts]

    def run(job):
        k, p = job
        return band_ladder(k, signal, cfg.r0, cfg.rho, cfg.K, cfg.horizon, cfg.tol, p)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            ladders = list(pool.map(run, jobs))
    else:
        ladders = [run(j) for j in jobs]
    comps = [_classify(lad, cfg) for lad in ladders]
    horizon_label = ladders[0].rungs[0].horizon if ladders[0].rungs else cfg.horizon.describe()
    limited = any(r.horizon_limited for lad in ladders for r in lad.rungs)

    by_kernel = {}
    for (k, p), c in zip(jobs, comps):
        by_kernel.setdefault(k.spec, {})[p] = c

    band = {}
    for p in parts:
        ests = [c.estimate for c in comps if c.part == p and c.estimate is not None]
        if ests:
            band[p] = (min(e.F_under_u for e in ests), max(e.F_bar_u for e in ests), max(e.slack for e in ests))

    kernel_alphas = {}
    for spec, cs in by_kernel.items():
        if all(c.state == "collapsed" for c in cs.values()):
            re = cs["re"].estimate.final_midpoint
            im = cs["im"].estimate.final_midpoint if "im" in cs else 0.0
            kernel_alphas[spec] = complex(re, im)

    common = dict(band=band, kernels=tuple(k.spec for k in kernels), config=cfg, horizon=horizon_label,
                  horizon_limited=limited, components=tuple(comps), ladders=tuple(ladders),
                  kernel_alphas=kernel_alphas)
    wide = [c for c in comps if c.state == "wide"]
    if wide:
        names = ", ".join(f"{c.kernel}/{c.part}" for c in wide)
        reason = f"stable wide band for {names}"
        if kernel_alphas:
            reason += f"; note {', '.join(kernel_alphas)} collapsed, which contradicts kernel independence"
        return ACVerdict(Status.DIVERGENT, None, reason=reason, **common)
    undecided = [c for c in comps if c.state == "undecided"]
    if undecided:
        return ACVerdict(Status.INCONCLUSIVE, None, reason="; ".join(c.reason for c in undecided), **common)
    alphas = list(kernel_alphas.values())
    spread = max(abs(a - b) for a in alphas for b in alphas)
    if spread > cfg.eps_agree:
        return ACVerdict(Status.INCONCLUSIVE, None,
                         reason=f"KernelDisagreement: collapsed bands differ by {spread:.3g} > eps_agree",
                         **common)
    alpha = sum(alphas) / len(alphas)
    return ACVerdict(Status.ALMOST_CONVERGENT, complex(alpha), reason="", **common)


def alpha_close(a: complex | None, b: complex | None, eps: float) -> bool:
    return a is not None and b is not None and abs(a - b) <= eps and math.isfinite(abs(a - b))
