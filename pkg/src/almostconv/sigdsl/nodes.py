"""AST nodes for bounded signals on the real line.

Each node knows how to evaluate itself on numpy arrays and carries sound
enclosures: ``bound`` for ``sup |phi|`` and rectangles ``re_range`` /
``im_range`` for the real and imaginary parts. Structural information used
for exact integration is exposed through optional hooks:

* ``spectrum()``: finite trigonometric expansion ``{omega: c}``.
* ``analytic_terms()``: right-half-plane closed form of the trace.
* ``exact_window(a, b)``: ``int_a^b phi`` from a closed-form primitive.

A hook returning ``None`` means "not available"; callers fall back to
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .analytic import AnalyticTerm, product_terms, window_terms

EPS = np.finfo(float).eps
_FREQ_RTOL = 1e-12


# -- small helpers -----------------------------------------------------------

def fmt_real(x: float) -> str:
    return f"({float(x)!r})"


def fmt_complex(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return fmt_real(c.real)
    return f"({c.real!r} + ({c.imag!r})*i)"


def _iadd(u, v):
    return (u[0] + v[0], u[1] + v[1])


def _imul(u, v):
    prods = (u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1])
    return (min(prods), max(prods))


def _isub(u, v):
    return (u[0] - v[1], u[1] - v[0])


def _clip(iv, bound):
    return (max(iv[0], -bound), min(iv[1], bound))


def _cmul_rect(re1, im1, re2, im2):
    """Rectangle enclosing the product of two complex rectangles."""
    return _isub(_imul(re1, re2), _imul(im1, im2)), _iadd(_imul(re1, im2), _imul(im1, re2))


def merge_spectrum(pairs) -> dict:
    out: dict[float, complex] = {}
    for w, c in pairs:
        for key in out:
            if abs(key - w) <= _FREQ_RTOL * max(1.0, abs(w)):
                out[key] += c
                break
        else:
            out[w] = complex(c)
    return {w: c for w, c in out.items() if c != 0}


def spectrum_window(spec: dict, a, b):
    """Exact ``int_a^b sum c exp(i w t) dt``, written to stay accurate far from 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    h = b - a
    m = 0.5 * (a + b)
    val = np.zeros(np.broadcast(a, b).shape, dtype=complex)
    scale = 0.0
    for w, c in spec.items():
        if w == 0:
            val = val + c * h
        else:
            val = val + c * 2.0 * np.sin(0.5 * w * h) * np.exp(1j * w * m) / w
        scale += abs(c)
    err = 8 * EPS * scale * (1.0 + np.abs(a) + np.abs(b))
    return val, err


def common_period(freqs) -> float | None:
    """Least common period of ``exp(i w t)`` for the given nonzero frequencies.

    Returns ``None`` when the frequencies are not commensurate within a
    denominator bound of 1000.
    """
    freqs = [abs(w) for w in freqs if w != 0]
    if not freqs:
        return None
    base = min(freqs)
    fracs = []
    for w in freqs:
        q = Fraction(w / base).limit_denominator(1000)
        if abs(float(q) - w / base) > 1e-9 * (w / base):
            return None
        fracs.append(q)
    num = 0
    den = 1
    for q in fracs:
        num = math.gcd(num, q.numerator)
        den = den * q.denominator // math.gcd(den, q.denominator)
    fundamental = base * num / den
    return 2 * math.pi / fundamental


@dataclass(frozen=True)
class TailProfile:
    """Behaviour of a signal far out on both half-lines.

    For ``t >= T`` the signal is ``mean_plus + o(t) + d(t)`` and for
    ``t <= -T`` it is ``mean_minus + o(t) + d(t)``, where every integral of
    ``o`` over an interval inside one of those half-lines has modulus at
    most ``W`` and ``|d(t)| <= D / |t|``.
    """

    mean_minus: complex
    mean_plus: complex
    W: float
    T: float
    D: float = 0.0


# -- nodes -------------------------------------------------------------------

class Node:
    """Base class; subclasses are immutable dataclasses."""

    children: tuple = ()

    bound: float
    re_range: tuple
    im_range: tuple
    # Lipschitz constant of t -> phi(t); infinite for signals with jumps.
    lipschitz: float = math.inf

    def __call__(self, t):
        raise NotImplementedError

    def spectrum(self):
        return None

    def analytic_terms(self):
        return None

    def exact_window(self, a, b):
        spec = self.spectrum()
        if spec is not None:
            return spectrum_window(spec, a, b)
        terms = self.analytic_terms()
        if terms is not None:
            return window_terms(terms, a, b)
        return None

    def breakpoints(self, lo: float, hi: float) -> np.ndarray:
        pts = [c.breakpoints(lo, hi) for c in self.children]
        return np.unique(np.concatenate(pts)) if pts else np.empty(0)

    def support(self):
        """Closed hull ``(lo, hi)`` outside which the signal vanishes, or ``None`` if identically 0."""
        return (-math.inf, math.inf)

    def probes(self, r: float, reach: float) -> list:
        out = []
        for c in self.children:
            out.extend(c.probes(r, reach))
        return out

    def contains_blocks(self) -> bool:
        return any(c.contains_blocks() for c in self.children)

    def tail_profile(self) -> TailProfile | None:
        spec = self.spectrum()
        if spec is None:
            return None
        mean = complex(spec.get(0.0, 0.0))
        W = sum(2 * abs(c) / abs(w) for w, c in spec.items() if w != 0)
        return TailProfile(mean, mean, float(W), 0.0)

    def source(self) -> str:
        raise NotImplementedError

    def __str__(self):
        return self.source()


@dataclass(frozen=True)
class Const(Node):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))

    @property
    def bound(self):
        return abs(self.value)

    @property
    def re_range(self):
        return (self.value.real, self.value.real)

    @property
    def im_range(self):
        return (self.value.imag, self.value.imag)

    lipschitz = 0.0

    def __call__(self, t):
        return np.full(np.shape(t), self.value, dtype=complex)

    def spectrum(self):
        return {0.0: self.value} if self.value else {}

    def analytic_terms(self):
        return [AnalyticTerm.constant(self.value)]

    def support(self):
        return None if self.value == 0 else (-math.inf, math.inf)

    def source(self):
        return fmt_complex(self.value)


@dataclass(frozen=True)
class Sinusoid(Node):
    """``amplitude * sin(frequency t + phase)`` (or ``cos``)."""

    amplitude: float
    frequency: float
    phase: float = 0.0
    kind: str = "sin"

    @property
    def bound(self):
        return abs(self.amplitude)

    @property
    def re_range(self):
        return (-abs(self.amplitude), abs(self.amplitude))

    @property
    def lipschitz(self):
        return abs(self.amplitude * self.frequency)

    @property
    def im_range(self):
        return (0.0, 0.0)

    def __call__(self, t):
        arg = self.frequency * np.asarray(t, dtype=float) + self.phase
        f = np.sin if self.kind == "sin" else np.cos
        return (self.amplitude * f(arg)).astype(complex)

    def spectrum(self):
        a, w, p = self.amplitude, self.frequency, self.phase
        e = complex(math.cos(p), math.sin(p))
        if self.kind == "sin":
            return merge_spectrum([(w, a * e / 2j), (-w, -a * e.conjugate() / 2j)])
        return merge_spectrum([(w, a * e / 2), (-w, a * e.conjugate() / 2)])

    def source(self):
        core = f"{self.kind}({fmt_real(self.frequency)}*t + {fmt_real(self.phase)})"
        return core if self.amplitude == 1 else f"{fmt_real(self.amplitude)}*{core}"


@dataclass(frozen=True)
class ComplexExp(Node):
    """``exp(i frequency t)``."""

    frequency: float

    bound = 1.0
    re_range = (-1.0, 1.0)
    im_range = (-1.0, 1.0)

    @property
    def lipschitz(self):
        return abs(self.frequency)

    def __call__(self, t):
        return np.exp(1j * self.frequency * np.asarray(t, dtype=float))

    def spectrum(self):
        return {float(self.frequency): 1.0 + 0j}

    def analytic_terms(self):
        # exp(i w t) is the trace of exp(w z): bounded on Re z > 0 iff w <= 0.
        if self.frequency > 0:
            return None
        return [AnalyticTerm.exponential(-self.frequency)]

    def source(self):
        return f"cis({fmt_real(self.frequency)}*t)"


@dataclass(frozen=True)
class BlockSpec:
    """Disjoint unit-height blocks.

    Geometric form: ``[b^k, c b^k)`` for ``k >= 0`` with ``c = 1 + width``,
    optionally mirrored onto the negative axis. Explicit form: a finite
    sorted list of disjoint intervals.
    """

    base: float = 4.0
    width: float = 1.0
    mirror: bool = False
    intervals: tuple | None = None

    def __post_init__(self):
        if self.intervals is not None:
            ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
            for a, b in ivs:
                if not b > a:
                    raise ValueError(f"empty block interval [{a}, {b})")
            for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
                if a1 < b0:
                    raise ValueError("block intervals overlap")
            object.__setattr__(self, "intervals", ivs)
        else:
            if not self.base > 1:
                raise ValueError("blocks base must exceed 1")
            if not 0 < self.width < self.base - 1:
                raise ValueError("blocks width must lie in (0, base - 1)")

    @property
    def ratio(self) -> float:
        return 1.0 + self.width

    def level(self, x):
        """Largest ``k`` with ``base**k <= x`` (for ``x >= 1``)."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = np.floor(np.log(np.maximum(x, 1.0)) / math.log(self.base))
        k = np.where(self.base ** k > x, k - 1, k)
        k = np.where(self.base ** (k + 1) <= x, k + 1, k)
        return np.maximum(k, 0)

    def _cum_pos(self, x):
        """``int_0^x 1_blocks`` for ``x >= 0`` (geometric form)."""
        b, c = self.base, self.ratio
        k = self.level(x)
        bk = b ** k
        below = (c - 1) * (bk - 1) / (b - 1)
        inside = np.clip(x - bk, 0.0, (c - 1) * bk)
        return np.where(x < 1.0, 0.0, below + inside)

    def cumulative(self, x):
        x = np.asarray(x, dtype=float)
        if self.intervals is not None:
            knots = np.array([e for iv in self.intervals for e in iv])
            lengths = np.array([b - a for a, b in self.intervals])
            cum = np.concatenate([[0.0], np.cumsum(lengths)])
            vals = np.repeat(cum, 2)[1:-1]
            return np.interp(x, knots, vals)
        pos = self._cum_pos(np.abs(x))
        if self.mirror:
            return np.sign(x) * pos
        return np.where(x > 0, pos, 0.0)

    def indicator(self, t):
        t = np.asarray(t, dtype=float)
        if self.intervals is not None:
            out = np.zeros(t.shape, dtype=bool)
            for a, b in self.intervals:
                out |= (t >= a) & (t < b)
            return out
        s = np.abs(t) if self.mirror else t
        k = self.level(s)
        return (s >= 1.0) & (s < self.ratio * self.base ** k)

    def blocks_between(self, lo: float, hi: float):
        """Arrays ``(starts, ends)`` of all blocks meeting ``[lo, hi]``."""
        if self.intervals is not None:
            ivs = [(a, b) for a, b in self.intervals if b >= lo and a <= hi]
            return np.array([a for a, _ in ivs]), np.array([b for _, b in ivs])
        starts, ends = [], []
        b, c = self.base, self.ratio

        def add_pos(plo, phi, sign):
            if phi < 1.0 or plo > phi:
                return
            k0 = int(self.level(max(plo, 1.0)))
            k1 = int(self.level(phi))
            ks = np.arange(max(k0 - 1, 0), k1 + 1, dtype=float)
            s, e = b ** ks, c * b ** ks
            keep = (e >= plo) & (s <= phi)
            if sign > 0:
                starts.append(s[keep])
                ends.append(e[keep])
            else:
                starts.append(-e[keep])
                ends.append(-s[keep])

        add_pos(max(lo, 0.0), hi, 1)
        if self.mirror and lo < 0:
            add_pos(max(-hi, 0.0), -lo, -1)
        if not starts:
            return np.empty(0), np.empty(0)
        s = np.concatenate(starts)
        e = np.concatenate(ends)
        order = np.argsort(s)
        return s[order], e[order]

    def probe_centers(self, r: float, reach: float) -> list:
        """Midpoints of blocks and gaps at every scale up to ``r * reach``."""
        if self.intervals is not None:
            pts = []
            ivs = self.intervals
            for a, b in ivs:
                pts.append(0.5 * (a + b))
            for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
                pts.append(0.5 * (b0 + a1))
            pts += [ivs[0][0] - max(r, 1.0) * reach, ivs[-1][1] + max(r, 1.0) * reach]
            return pts
        b, c = self.base, self.ratio
        k_hi = int(math.ceil(math.log(max(r, 1.0) * reach) / math.log(b))) + 1
        pts = [0.5]
        for k in range(k_hi + 1):
            bk = b ** k
            pts += [0.5 * (1 + c) * bk, 0.5 * (c + b) * bk]
            if self.mirror:
                pts += [-0.5 * (1 + c) * bk, -0.5 * (c + b) * bk]
            else:
                pts.append(-1.5 * bk)
        if self.mirror:
            pts.append(0.0)
        return pts

    def source_args(self) -> str:
        if self.intervals is not None:
            flat = ", ".join(repr(e) for iv in self.intervals for e in iv)
            return f"intervals=[{flat}]"
        return f"base={self.base!r}, width={self.width!r}, mirror={int(self.mirror)}"


@dataclass(frozen=True)
class BlockIndicator(Node):
    spec: BlockSpec

    bound = 1.0
    re_range = (0.0, 1.0)
    im_range = (0.0, 0.0)

    def __call__(self, t):
        return self.spec.indicator(t).astype(complex)

    def exact_window(self, a, b):
        ca = self.spec.cumulative(a)
        cb = self.spec.cumulative(b)
        err = 16 * EPS * (np.abs(ca) + np.abs(cb) + np.abs(np.asarray(a)) + np.abs(np.asarray(b)))
        return (cb - ca).astype(complex), err

    def breakpoints(self, lo, hi):
        s, e = self.spec.blocks_between(lo, hi)
        pts = np.concatenate([s, e])
        return np.unique(pts[(pts >= lo) & (pts <= hi)])

    def support(self):
        if self.spec.intervals is not None:
            return (self.spec.intervals[0][0], self.spec.intervals[-1][1])
        return (-math.inf if self.spec.mirror else 1.0, math.inf)

    def probes(self, r, reach):
        return self.spec.probe_centers(r, reach)

    def contains_blocks(self):
        return True

    def source(self):
        return f"blocks({self.spec.source_args()})"


@dataclass(frozen=True)
class Piecewise(Node):
    """``pieces[0]`` on ``(-inf, breaks[0])``, ``pieces[k]`` on ``[breaks[k-1], breaks[k])``."""

    breaks: tuple
    pieces: tuple

    def __post_init__(self):
        if len(self.pieces) != len(self.breaks) + 1:
            raise ValueError("piecewise needs one more piece than breakpoints")
        if any(b1 <= b0 for b0, b1 in zip(self.breaks, self.breaks[1:])):
            raise ValueError("piecewise breakpoints must be strictly increasing")
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))

    @property
    def children(self):
        return self.pieces

    @property
    def bound(self):
        return max(p.bound for p in self.pieces)

    @property
    def re_range(self):
        rs = [p.re_range for p in self.pieces]
        return (min(r[0] for r in rs), max(r[1] for r in rs))

    @property
    def im_range(self):
        rs = [p.im_range for p in self.pieces]
        return (min(r[0] for r in rs), max(r[1] for r in rs))

    def cells(self):
        edges = (-math.inf,) + self.breaks + (math.inf,)
        return list(zip(edges[:-1], edges[1:], self.pieces))

    def tail_profile(self):
        first, last = self.pieces[0].tail_profile(), self.pieces[-1].tail_profile()
        if first is None or last is None:
            return None
        T = max(first.T, last.T, abs(self.breaks[0]), abs(self.breaks[-1]))
        return TailProfile(first.mean_minus, last.mean_plus, max(first.W, last.W), T, max(first.D, last.D))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(np.array(self.breaks), t, side="right")
        out = np.zeros(t.shape, dtype=complex)
        for k, piece in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = piece(t[mask])
        return out

    def exact_window(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        val = np.zeros(np.broadcast(a, b).shape, dtype=complex)
        err = np.zeros(val.shape)
        for lo, hi, piece in self.cells():
            ca = np.clip(a, lo, hi)
            cb = np.clip(b, lo, hi)
            if np.all(ca == cb):
                continue
            part = piece.exact_window(ca, cb)
            if part is None:
                return None
            same = ca == cb
            val = val + np.where(same, 0, part[0])
            err = err + np.where(same, 0, part[1])
        return val, err

    def breakpoints(self, lo, hi):
        pts = [np.array([x for x in self.breaks if lo <= x <= hi])]
        for clo, chi, piece in self.cells():
            l, h = max(lo, clo), min(hi, chi)
            if l <= h:
                pts.append(piece.breakpoints(l, h))
        return np.unique(np.concatenate(pts))

    def support(self):
        hull = None
        for lo, hi, piece in self.cells():
            s = piece.support()
            if s is None:
                continue
            l, h = max(lo, s[0]), min(hi, s[1])
            if l > h:
                continue
            hull = (l, h) if hull is None else (min(hull[0], l), max(hull[1], h))
        return hull

    def source(self):
        parts = [self.pieces[0].source()]
        for x, piece in zip(self.breaks, self.pieces[1:]):
            parts += [fmt_real(x), piece.source()]
        return "piecewise(" + ", ".join(parts) + ")"


@dataclass(frozen=True, eq=False)
class Samples(Node):
    """Piecewise-linear interpolation of samples on a uniform grid.

    Beyond the grid the edge values continue as constants.
    """

    t0: float
    step: float
    values: tuple
    path: str | None = None
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("samples step must be positive")
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("samples need at least two values")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "_v", v)

    @property
    def knots(self):
        return self.t0 + self.step * np.arange(self._v.size)

    def tail_profile(self):
        T = max(abs(self.t0), abs(self.t0 + self.step * (self._v.size - 1)))
        return TailProfile(complex(self._v[0]), complex(self._v[-1]), 0.0, T)

    @property
    def bound(self):
        return float(np.max(np.abs(self._v)))

    @property
    def lipschitz(self):
        return float(np.max(np.abs(np.diff(self._v)))) / self.step

    @property
    def re_range(self):
        return (float(self._v.real.min()), float(self._v.real.max()))

    @property
    def im_range(self):
        return (float(self._v.imag.min()), float(self._v.imag.max()))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = self.knots
        return np.interp(t, k, self._v.real) + 1j * np.interp(t, k, self._v.imag)

    def cumulative(self, x):
        """``int_{t0}^x phi``."""
        x = np.asarray(x, dtype=float)
        v = self._v
        h = self.step
        cum = np.concatenate([[0], np.cumsum(0.5 * h * (v[:-1] + v[1:]))])
        n = v.size
        s = (x - self.t0) / h
        i = np.clip(np.floor(s), 0, n - 2).astype(int)
        u = np.clip(s - i, 0.0, 1.0)
        inside = cum[i] + h * (v[i] * u + 0.5 * (v[i + 1] - v[i]) * u * u)
        left = (x - self.t0) * v[0]
        right = cum[-1] + (x - self.knots[-1]) * v[-1]
        return np.where(s < 0, left, np.where(s > n - 1, right, inside))

    def exact_window(self, a, b):
        ca = self.cumulative(a)
        cb = self.cumulative(b)
        err = 16 * EPS * (np.abs(ca) + np.abs(cb) + self.bound * (np.abs(a) + np.abs(b)))
        return cb - ca, err

    def breakpoints(self, lo, hi):
        k = self.knots
        return k[(k > lo) & (k < hi)]

    def support(self):
        nz = np.flatnonzero(self._v)
        if nz.size == 0:
            return None
        k = self.knots
        lo = -math.inf if self._v[0] != 0 else k[max(nz[0] - 1, 0)]
        hi = math.inf if self._v[-1] != 0 else k[min(nz[-1] + 1, k.size - 1)]
        return (lo, hi)

    def source(self):
        if self.path is not None:
            return f"samples({self.path!r})".replace("'", '"')
        vals = ", ".join(fmt_complex(c) for c in self._v)
        return f"samples(t0={self.t0!r}, h={self.step!r}, values=[{vals}])"


@dataclass(frozen=True)
class Sum(Node):
    terms: tuple

    @property
    def children(self):
        return self.terms

    @property
    def bound(self):
        return sum(c.bound for c in self.terms)

    @property
    def lipschitz(self):
        return sum(c.lipschitz for c in self.terms)

    def tail_profile(self):
        profiles = [c.tail_profile() for c in self.terms]
        if any(p is None for p in profiles):
            return None
        return TailProfile(sum(p.mean_minus for p in profiles), sum(p.mean_plus for p in profiles),
                           sum(p.W for p in profiles), max(p.T for p in profiles), sum(p.D for p in profiles))

    @property
    def re_range(self):
        out = (0.0, 0.0)
        for c in self.terms:
            out = _iadd(out, c.re_range)
        return _clip(out, self.bound)

    @property
    def im_range(self):
        out = (0.0, 0.0)
        for c in self.terms:
            out = _iadd(out, c.im_range)
        return _clip(out, self.bound)

    def __call__(self, t):
        out = np.zeros(np.shape(t), dtype=complex)
        for c in self.terms:
            out = out + c(t)
        return out

    def spectrum(self):
        pairs = []
        for c in self.terms:
            s = c.spectrum()
            if s is None:
                return None
            pairs.extend(s.items())
        return merge_spectrum(pairs)

    def analytic_terms(self):
        out = []
        for c in self.terms:
            s = c.analytic_terms()
            if s is None:
                return None
            out.extend(s)
        return out

    def exact_window(self, a, b):
        parts = [c.exact_window(a, b) for c in self.terms]
        if any(p is None for p in parts):
            return None
        return sum(p[0] for p in parts), sum(p[1] for p in parts)

    def support(self):
        hull = None
        for c in self.terms:
            s = c.support()
            if s is not None:
                hull = s if hull is None else (min(hull[0], s[0]), max(hull[1], s[1]))
        return hull

    def source(self):
        return " + ".join(f"({c.source()})" for c in self.terms)


@dataclass(frozen=True)
class Product(Node):
    factors: tuple

    @property
    def children(self):
        return self.factors

    @property
    def bound(self):
        return math.prod(c.bound for c in self.factors)

    @property
    def lipschitz(self):
        bounds = [c.bound for c in self.factors]
        total = 0.0
        for i, c in enumerate(self.factors):
            if c.lipschitz == 0:
                continue
            total += c.lipschitz * math.prod(b for j, b in enumerate(bounds) if j != i)
        return total

    def _rect(self):
        re, im = (1.0, 1.0), (0.0, 0.0)
        for c in self.factors:
            re, im = _cmul_rect(re, im, c.re_range, c.im_range)
        return _clip(re, self.bound), _clip(im, self.bound)

    def tail_profile(self):
        spec = self.spectrum()
        if spec is not None:
            return Node.tail_profile(self)
        profiles = [c.tail_profile() for c in self.factors]
        if any(p is None for p in profiles):
            return None
        osc = [k for k, p in enumerate(profiles) if p.W > 0]
        if len(osc) > 1:
            # A product of two oscillations need not oscillate (cis(t) * cis(-t) = 1).
            return None
        T = max(1.0, max(p.T for p in profiles))
        # Telescoping over factors; far out each non-decaying part is below bound + D.
        bounds = [c.bound for c in self.factors]
        D = 0.0
        for k, p in enumerate(profiles):
            D += p.D * math.prod(bounds[:k]) * math.prod(b + q.D for b, q in zip(bounds[k + 1:], profiles[k + 1:]))
        m_minus = math.prod(p.mean_minus for p in profiles)
        m_plus = math.prod(p.mean_plus for p in profiles)
        W = 0.0
        if osc:
            j = osc[0]
            others = [p for k, p in enumerate(profiles) if k != j]
            W = profiles[j].W * max(abs(math.prod(p.mean_minus for p in others)),
                                    abs(math.prod(p.mean_plus for p in others)))
        return TailProfile(m_minus, m_plus, W, T, D)

    @property
    def re_range(self):
        return self._rect()[0]

    @property
    def im_range(self):
        return self._rect()[1]

    def __call__(self, t):
        out = np.ones(np.shape(t), dtype=complex)
        for c in self.factors:
            out = out * c(t)
        return out

    def spectrum(self):
        acc = {0.0: 1.0 + 0j}
        for c in self.factors:
            s = c.spectrum()
            if s is None:
                return None
            acc = merge_spectrum([(w1 + w2, c1 * c2) for w1, c1 in acc.items() for w2, c2 in s.items()])
        return acc

    def analytic_terms(self):
        acc = [AnalyticTerm.constant(1.0)]
        for c in self.factors:
            acc = product_terms(acc, c.analytic_terms())
            if acc is None:
                return None
        return acc

    def support(self):
        hull = (-math.inf, math.inf)
        for c in self.factors:
            s = c.support()
            if s is None:
                return None
            hull = (max(hull[0], s[0]), min(hull[1], s[1]))
            if hull[0] > hull[1]:
                return None
        return hull

    def source(self):
        return "*".join(f"({c.source()})" for c in self.factors)


@dataclass(frozen=True)
class Scale(Node):
    factor: complex
    child: Node

    def __post_init__(self):
        object.__setattr__(self, "factor", complex(self.factor))

    @property
    def children(self):
        return (self.child,)

    @property
    def bound(self):
        return abs(self.factor) * self.child.bound

    @property
    def lipschitz(self):
        return 0.0 if self.factor == 0 else abs(self.factor) * self.child.lipschitz

    def _rect(self):
        c = self.factor
        re, im = _cmul_rect((c.real, c.real), (c.imag, c.imag), self.child.re_range, self.child.im_range)
        return _clip(re, self.bound), _clip(im, self.bound)

    def tail_profile(self):
        p = self.child.tail_profile()
        if p is None:
            return None
        c = self.factor
        return TailProfile(c * p.mean_minus, c * p.mean_plus, abs(c) * p.W, p.T, abs(c) * p.D)

    @property
    def re_range(self):
        return self._rect()[0]

    @property
    def im_range(self):
        return self._rect()[1]

    def __call__(self, t):
        return self.factor * self.child(t)

    def spectrum(self):
        s = self.child.spectrum()
        return None if s is None else merge_spectrum((w, self.factor * c) for w, c in s.items())

    def analytic_terms(self):
        s = self.child.analytic_terms()
        return None if s is None else [term.scaled(self.factor) for term in s]

    def exact_window(self, a, b):
        part = self.child.exact_window(a, b)
        if part is None:
            return None
        return self.factor * part[0], abs(self.factor) * part[1]

    def support(self):
        return None if self.factor == 0 else self.child.support()

    def source(self):
        return f"{fmt_complex(self.factor)}*({self.child.source()})"


@dataclass(frozen=True)
class Shift(Node):
    """Translate ``t -> child(t + offset)``."""

    child: Node
    offset: float

    @property
    def children(self):
        return (self.child,)

    @property
    def bound(self):
        return self.child.bound

    def tail_profile(self):
        p = self.child.tail_profile()
        if p is None:
            return None
        # |t + s| >= |t| / 2 once |t| >= 2|s|.
        s = abs(self.offset)
        return TailProfile(p.mean_minus, p.mean_plus, p.W, max(p.T + s, 2 * s), 2 * p.D)

    @property
    def re_range(self):
        return self.child.re_range

    @property
    def lipschitz(self):
        return self.child.lipschitz

    @property
    def im_range(self):
        return self.child.im_range

    def __call__(self, t):
        return self.child(np.asarray(t, dtype=float) + self.offset)

    def spectrum(self):
        s = self.child.spectrum()
        if s is None:
            return None
        return {w: c * np.exp(1j * w * self.offset) for w, c in s.items()}

    def analytic_terms(self):
        s = self.child.analytic_terms()
        return None if s is None else [term.shifted(self.offset) for term in s]

    def exact_window(self, a, b):
        return self.child.exact_window(np.asarray(a) + self.offset, np.asarray(b) + self.offset)

    def breakpoints(self, lo, hi):
        return self.child.breakpoints(lo + self.offset, hi + self.offset) - self.offset

    def support(self):
        s = self.child.support()
        return None if s is None else (s[0] - self.offset, s[1] - self.offset)

    def probes(self, r, reach):
        return [p - self.offset for p in self.child.probes(r, reach)]

    def source(self):
        return f"shift({self.child.source()}, {fmt_real(self.offset)})"


@dataclass(frozen=True)
class BoundedRational(Node):
    """Trace ``t -> it / (c + it)`` of ``z / (z + c)``; requires ``Re c != 0``."""

    c: complex

    def __post_init__(self):
        object.__setattr__(self, "c", complex(self.c))
        if self.c.real == 0:
            raise ValueError("ratio(c) needs Re c != 0")

    @property
    def bound(self):
        return abs(self.c) / abs(self.c.real)

    @property
    def lipschitz(self):
        return abs(self.c) / self.c.real ** 2

    def _circle(self):
        # c/(c + it) runs over the circle through 0 and 1 centred at 1/2 + i beta/2.
        beta = self.c.imag / self.c.real
        rho = 0.5 * math.hypot(1.0, beta)
        return beta, rho

    def tail_profile(self):
        # it / (c + it) = 1 - c / (c + it), and |c + it| >= |t| / 2 once |t| >= 2|c|.
        return TailProfile(1.0 + 0j, 1.0 + 0j, 0.0, 2 * abs(self.c), 2 * abs(self.c))

    @property
    def re_range(self):
        beta, rho = self._circle()
        return (0.5 - rho, 0.5 + rho)

    @property
    def im_range(self):
        beta, rho = self._circle()
        return (-0.5 * beta - rho, -0.5 * beta + rho)

    def __call__(self, t):
        it = 1j * np.asarray(t, dtype=float)
        return it / (self.c + it)

    def analytic_terms(self):
        if self.c.real <= 0:
            return None
        return [AnalyticTerm.ratio(self.c)]

    def _log(self, t):
        w = self.c + 1j * np.asarray(t, dtype=float)
        return np.log(w) if self.c.real > 0 else np.log(-w)

    def exact_window(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        la, lb = self._log(a), self._log(b)
        val = (b - a) + 1j * self.c * (lb - la)
        err = 16 * EPS * (np.abs(a) + np.abs(b) + abs(self.c) * (np.abs(la) + np.abs(lb)))
        return val, err

    def source(self):
        return f"ratio({fmt_complex(self.c)})"
