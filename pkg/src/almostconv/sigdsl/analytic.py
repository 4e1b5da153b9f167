"""Closed-form terms ``c * exp(-a z) * N(z) / prod (z + p)^m`` on Re z > 0.

Every term has ``a >= 0``, all ``Re p > 0`` and ``deg N <= sum m``, so it is
bounded and analytic on the right half plane. A signal made only of such
terms is the boundary trace ``t -> F(it)`` of a bounded analytic ``F``; its
Poisson extension is ``F`` itself and its window integrals have exact
primitives (logarithms and the exponential integral E1).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.special import exp1

_MAX_TERMS = 256


def _same_pole(p: complex, q: complex) -> bool:
    return abs(p - q) <= 1e-13 * max(1.0, abs(p))


@dataclass(frozen=True)
class AnalyticTerm:
    coef: complex
    rate: float
    numer: tuple  # ascending coefficients of N
    poles: tuple  # ((p, multiplicity), ...)

    @classmethod
    def constant(cls, c: complex) -> "AnalyticTerm":
        return cls(complex(c), 0.0, (1.0 + 0j,), ())

    @classmethod
    def exponential(cls, rate: float) -> "AnalyticTerm":
        return cls(1.0 + 0j, float(rate), (1.0 + 0j,), ())

    @classmethod
    def ratio(cls, c: complex) -> "AnalyticTerm":
        """``z / (z + c)``."""
        return cls(1.0 + 0j, 0.0, (0j, 1.0 + 0j), ((complex(c), 1),))

    @property
    def degree(self) -> int:
        return sum(m for _, m in self.poles)

    def scaled(self, c: complex) -> "AnalyticTerm":
        return AnalyticTerm(self.coef * c, self.rate, self.numer, self.poles)

    def times(self, other: "AnalyticTerm") -> "AnalyticTerm":
        poles = list(self.poles)
        for q, m in other.poles:
            for j, (p, n) in enumerate(poles):
                if _same_pole(p, q):
                    poles[j] = (p, n + m)
                    break
            else:
                poles.append((q, m))
        numer = tuple(P.polymul(np.array(self.numer), np.array(other.numer)))
        return AnalyticTerm(self.coef * other.coef, self.rate + other.rate, numer, tuple(poles))

    def shifted(self, s: float) -> "AnalyticTerm":
        """Term for ``z -> F(z + i s)``, the trace translate ``t -> phi(t + s)``."""
        shift = 1j * s
        numer = np.array(self.numer)
        # N(z + is) via Horner on polynomials in z.
        out = np.array([numer[-1]])
        for c in numer[-2::-1]:
            out = P.polyadd(P.polymul(out, np.array([shift, 1.0])), np.array([c]))
        coef = self.coef * np.exp(-self.rate * shift)
        poles = tuple((p + shift, m) for p, m in self.poles)
        return AnalyticTerm(coef, self.rate, tuple(out), poles)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        val = self.coef * P.polyval(z, np.array(self.numer))
        for p, m in self.poles:
            val = val / (z + p) ** m
        if self.rate:
            val = val * np.exp(-self.rate * z)
        return val

    def _partial_fractions(self):
        """``N/D = q0 + sum A[p, k] / (z + p)^k`` as ``(q0, [(p, k, A), ...])``."""
        numer = np.array(self.numer)
        deg = self.degree
        numer = np.trim_zeros(numer, "b") if np.any(numer) else np.array([0j])
        q0 = numer[deg] if len(numer) - 1 == deg else 0j
        pieces = []
        for i, (p, m) in enumerate(self.poles):
            # Taylor coefficients of (z + p)^m N(z)/D(z) at z = -p, in w = z + p.
            shifted = np.array([numer[-1]])
            for c in numer[-2::-1]:
                shifted = P.polyadd(P.polymul(shifted, np.array([-p, 1.0])), np.array([c]))
            series = np.zeros(m, dtype=complex)
            series[: min(m, len(shifted))] = shifted[:m]
            for j, (q, n) in enumerate(self.poles):
                if j == i:
                    continue
                d = q - p
                inv = np.array([comb(n + l - 1, l) * (-1) ** l / d ** (n + l) for l in range(m)],
                               dtype=complex)
                series = np.convolve(series, inv)[:m]
            for k in range(1, m + 1):
                pieces.append((p, k, series[m - k]))
        return q0, pieces

    def primitive(self, z):
        """An antiderivative in ``z``, continuous on the closed right half plane."""
        z = np.asarray(z, dtype=complex)
        q0, pieces = self._partial_fractions()
        a = self.rate
        out = np.zeros_like(z)
        if a == 0:
            out = out + q0 * z
            for p, k, A in pieces:
                w = z + p
                out = out + (A * np.log(w) if k == 1 else A * w ** (1 - k) / (1 - k))
        else:
            out = out - q0 * np.exp(-a * z) / a
            for p, k, A in pieces:
                w = z + p
                # J_k(w) = int exp(-a w) w^{-k} dw, by the usual reduction.
                J = -exp1(a * w)
                for j in range(2, k + 1):
                    J = -np.exp(-a * w) * w ** (1 - j) / (j - 1) - a * J / (j - 1)
                out = out + A * np.exp(a * p) * J
        return self.coef * out


def product_terms(left, right):
    if left is None or right is None or len(left) * len(right) > _MAX_TERMS:
        return None
    return [u.times(v) for u in left for v in right]


def eval_terms(terms, z):
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for term in terms:
        out = out + term(z)
    return out


def window_terms(terms, a, b):
    """Exact ``int_a^b F(it) dt`` for the trace of ``F = sum terms``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    hi = np.zeros(np.broadcast(a, b).shape, dtype=complex)
    lo = np.zeros_like(hi)
    for term in terms:
        hi = hi + term.primitive(1j * b)
        lo = lo + term.primitive(1j * a)
    # dz = i dt along the imaginary axis.
    value = -1j * (hi - lo)
    err = 64 * np.finfo(float).eps * (np.abs(hi) + np.abs(lo) + 1.0)
    return value, err
