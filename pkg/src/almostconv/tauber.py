"""Kernel dilation read as a Mellin convolution, kernel transfer at a fixed point,
and small-dilation limits.

For an even density ``f`` and ``r > 0``

    (f_r * phi)(x) = int_0^inf phi_x#(t) f~(r / t) dt / t,

with ``f~(t) = f(1/t) / |t|`` and ``phi_x#(t) = phi(x - t) + phi(x + t)``.
:func:`mellin_convolution` evaluates the right-hand side on its own,
in logarithmic coordinates, so that it can be checked against
:func:`almostconv.convolve.convolve_at`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quad
from .aclimit import ACConfig
from .convolve import convolve_at
from .errors import InadmissibleKernel, NonpositiveDilation
from .hardy import poisson_extend
from .kernels import Box, Gauss, Kernel, Poisson, admissible, dilate
from .sigdsl import BoundedSignal
from .sigdsl.nodes import ComplexExp, Node, Product, Sinusoid, Sum

R_MIN = 1e-6
_MAX_POINTS = 400_000


@dataclass(frozen=True)
class MellinSignal:
    """The pair ``(f~, phi_x#)`` whose Mellin convolution at ``r`` is ``(f_r * phi)(x)``."""

    kernel: Kernel
    signal: BoundedSignal
    x: float

    def f_tilde(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        return self.kernel.density(1.0 / t) / t

    def sharp(self, t):
        t = np.asarray(t, dtype=float)
        return self.signal(self.x - t) + self.signal(self.x + t)

    @property
    def sharp_bound(self) -> float:
        return 2.0 * self.signal.sup_bound


def _decreasing_on_half_line(kernel: Kernel) -> bool:
    return isinstance(kernel, (Box, Poisson, Gauss))


def _oscillation_rate(node: Node) -> float:
    """Largest angular frequency present, added up across products."""
    if isinstance(node, (Sinusoid, ComplexExp)):
        return abs(node.frequency)
    if isinstance(node, Product):
        return sum(_oscillation_rate(c) for c in node.children)
    return max((_oscillation_rate(c) for c in node.children), default=0.0)


def _panel_edges(t_lo: float, t_hi: float, rate: float) -> np.ndarray:
    """Edges in ``t`` no wider than half a period of ``rate`` nor than half their distance from 0."""
    if rate <= 0:
        return np.empty(0)
    half_period = math.pi / rate
    knee = max(t_lo, min(t_hi, 2.0 * half_period))
    geo = np.geomspace(t_lo, knee, max(2, int(math.ceil(math.log(knee / t_lo) / math.log(1.5))) + 1))
    n_lin = int(min(_MAX_POINTS, math.ceil((t_hi - knee) / half_period)))
    lin = np.linspace(knee, t_hi, n_lin + 1) if n_lin > 0 else np.empty(0)
    return np.concatenate([geo, lin])


def mellin_convolution_estimate(kernel: Kernel, signal: BoundedSignal, x: float, r: float,
                                tol: float = 1e-9, max_evals: int = quad.DEFAULT_MAX_EVALS):
    """``(f~ *_M phi_x#)(r)`` and an error bound.

    With ``t = r e^v`` the integral becomes ``int phi_x#(r e^v) f~(e^-v) dv``.
    The range near ``t = 0`` is cut where ``2 sup|phi| f_max t / r`` drops
    below ``tol / 4``. Far out, signals with a known tail profile (a mean on
    each half-line plus an oscillating part with bounded antiderivative)
    are finished off exactly for the mean and with a second-mean-value
    bound for the oscillation; other signals are cut at a kernel quantile.
    """
    if not kernel.even:
        raise ValueError("the Mellin form needs an even kernel")
    r, x = float(r), float(x)
    if not (r > 0 and math.isfinite(r)):
        raise NonpositiveDilation(f"dilation must be a positive finite number, got {r!r}")
    if not tol > 0:
        raise ValueError("tol must be positive")
    node = signal.expr
    if (isinstance(node, Sum) and not math.isfinite(kernel.support_radius)
            and node.tail_profile() is None):
        # Linearity lets each term use its own far-range treatment.
        parts = [mellin_convolution_estimate(kernel, BoundedSignal(c), x, r, tol / len(node.terms), max_evals)
                 for c in node.terms]
        return sum(v for v, _ in parts), sum(e for _, e in parts)
    pair = MellinSignal(kernel, signal, x)
    B2 = pair.sharp_bound
    if B2 == 0:
        return 0j, 0.0

    v_lo = math.log(tol / (4.0 * B2 * kernel.f_max))
    tail, tail_err = 0j, 0.0
    dk = dilate(kernel, r)
    if math.isfinite(kernel.support_radius):
        s = r * kernel.support_radius
    else:
        prof = node.tail_profile() if _decreasing_on_half_line(kernel) else None
        if prof is not None:
            # For t >= s both x - t and x + t sit in the far half-lines.
            s = max(r, prof.T + abs(x), 1.0) + abs(x)
            osc = 2.0 * prof.W

            def far_err(s):
                # Second mean value theorem on Re and Im of the oscillation; |d(x +- t)| <= D / (t - |x|).
                return (math.sqrt(2.0) * osc * float(dk.density(s))
                        + 2.0 * prof.D / (s - abs(x)) * float(dk.sf(s)))

            while far_err(s) > tol / 4.0:
                s *= 2.0
            tail = (prof.mean_minus + prof.mean_plus) * float(dk.sf(s))
            tail_err = far_err(s)
        else:
            p = tol / (8.0 * B2)
            s = float(dk.quantile(1.0 - p))
            tail_err = B2 * p
    v_hi = math.log(s / r)
    if v_hi <= v_lo:
        return tail, tail_err + tol / 4.0

    t_lo, t_hi = r * math.exp(v_lo), s
    cuts = [np.abs(node.breakpoints(x - t_hi, x + t_hi) - x), _panel_edges(t_lo, t_hi, _oscillation_rate(node))]
    t_pts = np.concatenate(cuts + [[r * p for p in kernel.breakpoints()]])
    t_pts = t_pts[(t_pts > t_lo) & (t_pts < t_hi)]

    def integrand(v):
        return pair.sharp(r * np.exp(v)) * pair.f_tilde(np.exp(-v))

    val, err, _ = quad.integrate(integrand, v_lo, v_hi, tol / 2.0, np.log(t_pts / r),
                                 min_panels=16, max_evals=max_evals)
    return complex(val) + tail, float(err) + tail_err + tol / 4.0


def mellin_convolution(kernel: Kernel, signal: BoundedSignal, x: float, r: float, tol: float = 1e-9) -> complex:
    """``(f_r * phi)(x)`` computed as a Mellin convolution on the positive half-line."""
    return mellin_convolution_estimate(kernel, signal, x, r, tol)[0]


def tilde_mellin(kernel: Kernel, xi: float, tol: float = 1e-10) -> complex:
    """``int_0^inf f~(t) t^(i xi) dt / t``; equals ``kernel.mellin(-xi)``.

    Integrated in ``s = log t`` where the integrand is ``e^-s f(e^-s) e^(i xi s)``.
    """
    # Above t = S the integrand is at most f_max / t; below t0 the mass is sf(1 / t0).
    s_hi = math.log(4.0 * kernel.f_max / tol)
    if math.isfinite(kernel.support_radius):
        s_lo = -math.log(kernel.support_radius)
    else:
        s_lo = -math.log(float(kernel.quantile(1.0 - tol / 4.0)))
    pts = [-math.log(p) for p in kernel.breakpoints()]

    def integrand(s):
        u = np.exp(-s)
        return u * kernel.density(u) * np.exp(1j * xi * s)

    n = int(math.ceil((s_hi - s_lo) * max(1.0, abs(xi)) / 2.0))
    val, _, _ = quad.integrate(integrand, s_lo, s_hi, tol / 2.0, pts, min_panels=max(n, 4))
    return complex(val)


# -- pointwise ladders --------------------------------------------------------

def pointwise_radii(r0: float, rho: float, K: int, gamma: str) -> list:
    """``r0 * rho**k`` toward infinity, or ``r0 / rho**k`` toward 0 floored at ``R_MIN``."""
    if gamma == "inf":
        return [r0 * rho ** k for k in range(K + 1)]
    if gamma == "zero":
        out = []
        for k in range(K + 1):
            r = max(r0 / rho ** k, R_MIN)
            if out and r >= out[-1]:
                break
            out.append(r)
        return out
    raise ValueError(f"gamma must be 'inf' or 'zero', got {gamma!r}")


@dataclass(frozen=True)
class PointLadder:
    kernel: str
    x: float
    radii: tuple
    values: tuple
    errs: tuple
    limit: complex
    stable: bool
    drift: float

    def as_dict(self):
        return {
            "kernel": self.kernel, "x": self.x, "stable": self.stable, "drift": self.drift,
            "limit": {"re": self.limit.real, "im": self.limit.imag},
            "rungs": [{"r": r, "value": {"re": v.real, "im": v.imag}, "slack": e}
                      for r, v, e in zip(self.radii, self.values, self.errs)],
        }


def _settle(kernel_spec, x, radii, values, errs, eps_conv) -> PointLadder:
    last = values[-3:]
    drift = max(abs(a - b) for a, b in zip(last, last[1:]))
    slack = max(errs[-3:])
    return PointLadder(kernel_spec, x, tuple(radii), tuple(values), tuple(errs), values[-1],
                       drift <= eps_conv + 2.0 * slack, float(drift))


def point_ladder(kernel: Kernel, signal: BoundedSignal, x: float, radii, tol: float = 1e-9,
                 eps_conv: float = 1e-3) -> PointLadder:
    """``(f_r * phi)(x)`` along ``radii``; stable when the last three rungs agree within ``eps_conv``."""
    radii = list(radii)
    if len(radii) < 3:
        raise ValueError("a pointwise ladder needs at least three rungs")
    ests = [convolve_at(dilate(kernel, r), signal, x, tol) for r in radii]
    return _settle(kernel.spec, float(x), radii, [e.value for e in ests], [e.err for e in ests], eps_conv)


def fatou_ladder(kernel: Kernel, signal: BoundedSignal, x: float, r0: float = 1.0, rho: float = 10.0,
                 K: int = 6, tol: float = 1e-9, eps_conv: float = 1e-3) -> PointLadder:
    return point_ladder(kernel, signal, x, pointwise_radii(r0, rho, K, "zero"), tol, eps_conv)


def fatou_small_r(kernel: Kernel, signal: BoundedSignal, x: float, r0: float = 1.0, rho: float = 10.0,
                  K: int = 6, tol: float = 1e-9, eps_conv: float = 1e-3) -> tuple[complex, bool]:
    """``lim_{r -> 0+} (f_r * phi)(x)`` as ``(estimate, stable)``.

    At a jump of ``phi`` an even kernel converges to the midpoint of the
    one-sided limits, not to ``phi(x)``.
    """
    lad = fatou_ladder(kernel, signal, x, r0, rho, K, tol, eps_conv)
    return lad.limit, lad.stable


# -- kernel transfer ------------------------------------------------------------

@dataclass(frozen=True)
class TransferReport:
    f: PointLadder
    g: PointLadder
    gamma: str
    f_admissible: bool
    transfer_ok: bool | None
    reason: str

    def as_dict(self):
        return {"gamma": self.gamma, "f_admissible": self.f_admissible, "transfer_ok": self.transfer_ok,
                "reason": self.reason, "f": self.f.as_dict(), "g": self.g.as_dict()}


def kernel_transfer_check(f: Kernel, g: Kernel, signal: BoundedSignal, x: float, gamma: str = "inf",
                          config: ACConfig | None = None) -> TransferReport:
    """Run both kernels' ladders toward ``gamma`` at the fixed point ``x``.

    ``transfer_ok`` is ``None`` when ``f``'s ladder does not settle (nothing
    to transfer), otherwise whether ``g``'s ladder settles to the same
    value within ``eps_agree``.
    """
    cfg = config or ACConfig()
    if not (f.even and g.even):
        raise ValueError("kernel transfer needs even kernels")
    adm = admissible(f)
    if not adm.ok:
        raise InadmissibleKernel(
            f"{f.spec}: half-line Mellin transform has modulus {adm.min_modulus:.3g} at xi = {adm.argmin_xi}; "
            "use an admissible kernel such as box or poisson as f")
    radii = pointwise_radii(cfg.r0, cfg.rho, cfg.K, gamma)
    lf = point_ladder(f, signal, x, radii, cfg.tol, cfg.eps_conv)
    lg = point_ladder(g, signal, x, radii, cfg.tol, cfg.eps_conv)
    if not lf.stable:
        return TransferReport(lf, lg, gamma, True, None, f"{f.spec} ladder drifts by {lf.drift:.3g}")
    if not lg.stable:
        return TransferReport(lf, lg, gamma, True, False, f"{g.spec} ladder drifts by {lg.drift:.3g}")
    gap = abs(lf.limit - lg.limit)
    if gap > cfg.eps_agree:
        return TransferReport(lf, lg, gamma, True, False, f"limits differ by {gap:.3g} > eps_agree")
    return TransferReport(lf, lg, gamma, True, True, "")


# -- radial limits versus symmetric differences -----------------------------------

@dataclass(frozen=True)
class RadialReport:
    y: float
    radial: PointLadder
    symmetric: PointLadder
    existence_agree: bool
    value_agree: bool | None

    def as_dict(self):
        return {"y": self.y, "existence_agree": self.existence_agree, "value_agree": self.value_agree,
                "radial": self.radial.as_dict(), "symmetric": self.symmetric.as_dict()}


def radial_vs_symmetric(signal: BoundedSignal, y: float, config: ACConfig | None = None) -> RadialReport:
    """Compare ``lim_{x -> 0+}`` of the Poisson extension at ``x + iy`` with
    ``lim_{theta -> 0} (1 / 2 theta) int_{y - theta}^{y + theta} phi``."""
    cfg = config or ACConfig()
    radii = pointwise_radii(cfg.r0, cfg.rho, cfg.K, "zero")
    tol = min(cfg.tol, 1e-9)
    vals = [poisson_extend(signal, r, y, tol) for r in radii]
    # poisson_extend reports no error; its tolerance stands in for the slack.
    radial = _settle(Poisson().spec, float(y), radii, vals, [tol] * len(radii), cfg.eps_conv)
    symmetric = point_ladder(Box(), signal, y, radii, tol, cfg.eps_conv)
    exist = radial.stable == symmetric.stable
    value = abs(radial.limit - symmetric.limit) <= cfg.eps_agree if radial.stable and symmetric.stable else None
    return RadialReport(float(y), radial, symmetric, exist, value)
