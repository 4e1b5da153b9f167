"""Even probability densities on the line, their dilations and Mellin transforms.

Built-in kinds carry closed forms for everything the convolution engine
needs (survival function, characteristic function, total variation, half-line
Mellin transform). Custom kernels are compactly supported densities written
in the signal grammar and fall back to quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import loggamma, ndtr, ndtri

from . import quad
from .errors import NonpositiveDilation, NotADensity, SignalSyntaxError
from .sigdsl import BoundedSignal, parse_signal, window_integral
from .sigdsl.nodes import Scale

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _mellin_quadrature(kernel: "Kernel", xi: float, tol: float) -> complex:
    """``int_0^inf f(t) t^(i xi) dt`` after the substitution ``t = e^v``.

    The pieces near 0 and beyond the upper cut are dropped with certified
    bounds ``f_max * t0`` and ``sf(T)``, each at most ``tol / 4``.
    """
    lo_cut = min(tol / (4.0 * kernel.f_max), 0.5)
    if math.isfinite(kernel.support_radius):
        hi_cut = kernel.support_radius
    else:
        hi_cut = float(kernel.quantile(1.0 - tol / 4.0))
    v_lo, v_hi = math.log(lo_cut), math.log(hi_cut)
    pts = [math.log(p) for p in kernel.breakpoints() if lo_cut < p < hi_cut]

    def integrand(v):
        t = np.exp(v)
        return kernel.density(t) * t * np.exp(1j * xi * v)

    n = int(math.ceil((v_hi - v_lo) * max(1.0, abs(xi)) / 2.0))
    val, _, _ = quad.integrate(integrand, v_lo, v_hi, tol / 2.0, pts, min_panels=max(n, 4))
    return complex(val)


class Kernel:
    """Common interface; concrete kernels are frozen dataclasses."""

    kind: str
    even: bool = True
    support_radius: float = math.inf

    # -- to be provided ---------------------------------------------------
    def density(self, t):
        raise NotImplementedError

    def sf(self, s):
        """``int_s^inf f``."""
        raise NotImplementedError

    def quantile(self, p):
        raise NotImplementedError

    def char(self, u):
        """``int f(t) exp(i u t) dt``; real for even kernels."""
        raise NotImplementedError

    def mellin_closed_form(self, xi):
        return None

    @property
    def tv(self) -> float:
        """Total variation ``int |f'|`` (jumps included)."""
        raise NotImplementedError

    @property
    def f_max(self) -> float:
        raise NotImplementedError

    @property
    def tv_prime(self) -> float | None:
        """``int |f''|`` when ``f'`` is of bounded variation, else ``None``."""
        return None

    # -- derived ---------------------------------------------------------
    def breakpoints(self):
        return () if not math.isfinite(self.support_radius) else (self.support_radius,)

    def cdf(self, s):
        return self.sf(-np.asarray(s, dtype=float))

    def tail_mass(self, M):
        """``int_{|t| > M} f``."""
        M = np.asarray(M, dtype=float)
        if np.any(M < 0):
            raise ValueError("tail_mass needs M >= 0")
        out = np.clip(2.0 * self.sf(M), 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def interval_mass(self, a, b):
        """``int_a^b f`` without cancellation in either tail."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        right = self.sf(np.maximum(a, 0.0)) - self.sf(np.maximum(b, 0.0))
        left = self.sf(np.maximum(-b, 0.0)) - self.sf(np.maximum(-a, 0.0))
        both = 1.0 - self.sf(-a) - self.sf(b)
        out = np.where(a >= 0, right, np.where(b <= 0, left, both))
        return np.maximum(out, 0.0)

    def mellin(self, xi, tol: float = 1e-10) -> complex:
        """Half-line Mellin transform ``int_0^inf f(t) t^(i xi) dt``."""
        if not tol > 0:
            raise ValueError("tol must be positive")
        closed = self.mellin_closed_form(xi)
        if closed is not None:
            return complex(closed)
        return self.mellin_quadrature(xi, tol)

    def mellin_quadrature(self, xi: float, tol: float = 1e-10) -> complex:
        return _mellin_quadrature(self, float(xi), tol)

    def dilate(self, r: float) -> "DilatedKernel":
        return dilate(self, r)


@dataclass(frozen=True)
class Box(Kernel):
    """``1/2`` on ``[-1, 1]``: the symmetric window average."""

    kind = "box"
    support_radius = 1.0

    @property
    def spec(self):
        return "box"

    def density(self, t):
        return np.where(np.abs(np.asarray(t, dtype=float)) <= 1.0, 0.5, 0.0)

    def sf(self, s):
        return np.clip(0.5 * (1.0 - np.asarray(s, dtype=float)), 0.0, 1.0)

    def quantile(self, p):
        return 2.0 * np.asarray(p, dtype=float) - 1.0

    def char(self, u):
        return np.sinc(np.asarray(u, dtype=float) / np.pi)

    def mellin_closed_form(self, xi):
        return 0.5 / (1.0 + 1j * np.asarray(xi, dtype=float))

    tv = 1.0
    f_max = 0.5


@dataclass(frozen=True)
class Poisson(Kernel):
    """``1 / (pi (1 + t^2))``."""

    kind = "poisson"

    @property
    def spec(self):
        return "poisson"

    def density(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 / (np.pi * (1.0 + t * t))

    def sf(self, s):
        return np.arctan2(1.0, np.asarray(s, dtype=float)) / np.pi

    def quantile(self, p):
        p = np.asarray(p, dtype=float)
        # tan(pi (p - 1/2)) written as cot(pi (1 - p)) to stay accurate near p = 1.
        return np.where(p > 0.5, 1.0 / np.tan(np.pi * (1.0 - p)), -1.0 / np.tan(np.pi * p))

    def char(self, u):
        return np.exp(-np.abs(np.asarray(u, dtype=float)))

    def mellin_closed_form(self, xi):
        # int_0^inf t^(i xi) / (1 + t^2) dt = (pi/2) / cosh(pi xi / 2).
        return 0.5 / np.cosh(0.5 * np.pi * np.asarray(xi, dtype=float)) + 0j

    tv = 2.0 / math.pi
    f_max = 1.0 / math.pi
    # f' is odd with a single extremum 9 / (8 sqrt(3) pi) on each side.
    tv_prime = 4.0 * 9.0 / (8.0 * math.sqrt(3.0) * math.pi)


def poisson_mellin_gamma_product(xi):
    """``Gamma((1 - i(xi - 1))/2) Gamma((1 + i(xi + 1))/2) / (2 pi)``.

    A Gamma-product form, with indices shifted by ``xi +- 1``, proposed for
    the Poisson kernel's half-line transform. It is kept only for comparison:
    at ``xi = 0`` it is not ``1/2``, so :meth:`Poisson.mellin_closed_form`
    uses ``1 / (2 cosh(pi xi / 2))`` instead.
    """
    xi = np.asarray(xi, dtype=float)
    return np.exp(loggamma(0.5 - 0.5j * (xi - 1.0)) + loggamma(0.5 + 0.5j * (xi + 1.0))) / (2.0 * np.pi)


@dataclass(frozen=True)
class Gauss(Kernel):
    """Centred normal density with standard deviation ``sigma``."""

    sigma: float = 1.0
    kind = "gauss"

    def __post_init__(self):
        if not self.sigma > 0:
            raise NotADensity("gauss needs sigma > 0")

    @property
    def spec(self):
        return f"gauss:sigma={self.sigma!r}"

    def density(self, t):
        z = np.asarray(t, dtype=float) / self.sigma
        return _INV_SQRT_2PI / self.sigma * np.exp(-0.5 * z * z)

    def sf(self, s):
        return ndtr(-np.asarray(s, dtype=float) / self.sigma)

    def quantile(self, p):
        return self.sigma * ndtri(np.asarray(p, dtype=float))

    def char(self, u):
        u = np.asarray(u, dtype=float) * self.sigma
        return np.exp(-0.5 * u * u)

    def mellin_closed_form(self, xi):
        # (2 sigma^2)^(i xi/2) Gamma(1/2 + i xi/2) / (2 sqrt(pi))
        xi = np.asarray(xi, dtype=float)
        log_val = (0.5j * xi * math.log(2.0 * self.sigma ** 2)
                   + loggamma(0.5 + 0.5j * xi) - math.log(2.0 * math.sqrt(math.pi)))
        return np.exp(log_val)

    @property
    def tv(self):
        return 2.0 * _INV_SQRT_2PI / self.sigma

    @property
    def f_max(self):
        return _INV_SQRT_2PI / self.sigma

    @property
    def tv_prime(self):
        # f' peaks at t = sigma with |f'| = exp(-1/2) / (sqrt(2 pi) sigma^2).
        return 4.0 * math.exp(-0.5) * _INV_SQRT_2PI / self.sigma ** 2


@dataclass(frozen=True, eq=False)
class Custom(Kernel):
    """A compactly supported density written in the signal grammar."""

    expression: str
    kind = "custom"
    signal: BoundedSignal = field(init=False, repr=False)
    mass: float = field(init=False)
    support_radius: float = field(init=False)
    even: bool = field(init=False)
    _grid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        try:
            raw = parse_signal(self.expression)
        except SignalSyntaxError:
            raise
        except ValueError as exc:
            raise NotADensity(str(exc)) from None
        if raw.im_range != (0.0, 0.0):
            raise NotADensity("custom density must be real-valued")
        hull = raw.expr.support()
        if hull is None or not (math.isfinite(hull[0]) and math.isfinite(hull[1])):
            raise NotADensity("custom density must vanish outside a bounded interval")
        radius = max(abs(hull[0]), abs(hull[1]))
        grid = np.linspace(-radius, radius, 20001)
        grid = np.unique(np.concatenate([grid, raw.expr.breakpoints(-radius, radius)]))
        values = raw(grid).real
        if np.min(values) < -1e-12 * max(1.0, np.max(np.abs(values))):
            raise NotADensity("custom density takes negative values")
        mass = window_integral(raw, -radius, radius, 1e-13)[0].real
        if not abs(mass - 1.0) <= 0.01:
            raise NotADensity(f"custom density has mass {mass:.6g}, not within 1% of 1")
        sig = BoundedSignal(Scale(1.0 / mass, raw.expr))
        object.__setattr__(self, "signal", sig)
        object.__setattr__(self, "mass", float(mass))
        object.__setattr__(self, "support_radius", float(radius))
        rng = np.random.default_rng(0)
        probe = rng.uniform(-radius, radius, 512)
        object.__setattr__(self, "even", bool(np.allclose(sig(probe).real, sig(-probe).real,
                                                          rtol=1e-12, atol=1e-14)))
        object.__setattr__(self, "_grid", grid)

    @property
    def spec(self):
        return f"custom:{self.expression}"

    def density(self, t):
        return self.signal(np.asarray(t, dtype=float)).real

    def breakpoints(self):
        r = self.support_radius
        return tuple(float(p) for p in self.signal.expr.breakpoints(0.0, r) if p > 0) + (r,)

    def _mass_between(self, a, b):
        return window_integral(self.signal, a, b, 1e-13)[0].real if b > a else 0.0

    def sf(self, s):
        r = self.support_radius
        s = np.asarray(s, dtype=float)
        out = np.vectorize(lambda x: self._mass_between(min(max(x, -r), r), r), otypes=[float])(s)
        return np.clip(out, 0.0, 1.0)

    def quantile(self, p):
        r = self.support_radius

        def one(q):
            lo, hi = -r, r
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if 1.0 - self.sf(mid) < q:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)

        return np.vectorize(one, otypes=[float])(np.asarray(p, dtype=float))

    def char(self, u, tol: float = 1e-12):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        r = self.support_radius
        pts = self.signal.expr.breakpoints(-r, r)
        out = []
        for w in u:
            v, _, _ = quad.integrate(lambda t: self.density(t) * np.cos(w * t), -r, r, tol, pts,
                                     min_panels=int(max(4, abs(w) * r)))
            out.append(v)
        return np.array(out) if len(out) > 1 else out[0]

    @property
    def tv(self) -> float:
        # Grid variation plus a 10% margin for variation between grid points.
        return 1.1 * float(np.sum(np.abs(np.diff(self.density(self._grid))))) + 1e-12

    @property
    def f_max(self) -> float:
        return float(np.max(self.density(self._grid)))


@dataclass(frozen=True)
class DilatedKernel:
    """``f_r(x) = f(x/r) / r``."""

    base: Kernel
    r: float

    def __post_init__(self):
        if not (self.r > 0 and math.isfinite(self.r)):
            raise NonpositiveDilation(f"dilation must be a positive finite number, got {self.r!r}")

    def density(self, x):
        return self.base.density(np.asarray(x, dtype=float) / self.r) / self.r

    def sf(self, s):
        return self.base.sf(np.asarray(s, dtype=float) / self.r)

    def tail_mass(self, M):
        return self.base.tail_mass(np.asarray(M, dtype=float) / self.r)

    def interval_mass(self, a, b):
        return self.base.interval_mass(np.asarray(a, dtype=float) / self.r, np.asarray(b, dtype=float) / self.r)

    def quantile(self, p):
        return self.r * self.base.quantile(p)

    def char(self, u):
        return self.base.char(self.r * np.asarray(u, dtype=float))

    @property
    def tv(self):
        return self.base.tv / self.r

    @property
    def tv_prime(self):
        tp = self.base.tv_prime
        return None if tp is None else tp / self.r ** 2

    @property
    def support_radius(self):
        return self.r * self.base.support_radius


def dilate(kernel: Kernel, r: float) -> DilatedKernel:
    return DilatedKernel(kernel, float(r))


def make_kernel(kind: str, **params) -> Kernel:
    kind = kind.strip().lower()
    if kind == "box":
        return Box()
    if kind == "poisson":
        return Poisson()
    if kind == "gauss":
        return Gauss(float(params.get("sigma", 1.0)))
    if kind == "custom":
        if "expression" not in params:
            raise NotADensity("custom kernel needs an expression")
        return Custom(params["expression"])
    raise ValueError(f"unknown kernel kind {kind!r}")


def parse_kernel(spec: str) -> Kernel:
    """``box``, ``poisson``, ``gauss[:sigma=v]`` or ``custom:<expression>``."""
    head, _, rest = spec.strip().partition(":")
    head = head.strip().lower()
    if head == "custom":
        return make_kernel("custom", expression=rest)
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"kernel parameter {item!r} must look like key=value")
            params[key.strip()] = float(value)
    if head == "gauss" and set(params) - {"sigma"}:
        raise ValueError("gauss accepts only sigma=")
    if head in ("box", "poisson") and params:
        raise ValueError(f"{head} takes no parameters")
    return make_kernel(head, **params)


class Admissibility(NamedTuple):
    ok: bool
    min_modulus: float
    argmin_xi: float


def mellin_grid(xi_max: float, step: float) -> np.ndarray:
    n = int(math.floor(xi_max / step + 1e-9))
    grid = step * np.arange(n + 1)
    if xi_max - grid[-1] > 1e-9 * step:
        grid = np.append(grid, xi_max)
    return grid


def admissible(kernel: Kernel, xi_max: float = 10.0, step: float = 0.1, floor: float = 1e-8,
               tol: float = 1e-10) -> Admissibility:
    """Check that the half-line Mellin transform stays above ``floor`` on ``[-xi_max, xi_max]``.

    Only ``xi >= 0`` is evaluated: for a real even density the values at
    ``-xi`` are complex conjugates.
    """
    if not (xi_max > 0 and step > 0 and floor >= 0):
        raise ValueError("need xi_max > 0, step > 0 and floor >= 0")
    grid = mellin_grid(xi_max, step)
    mods = np.array([abs(kernel.mellin(x, tol)) for x in grid])
    k = int(np.argmin(mods))
    return Admissibility(bool(mods[k] > floor), float(mods[k]), float(grid[k]))
