"""Parsed signals with sup-norm certificates and window integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import quad
from ..errors import QuadratureBudgetExceeded
from .nodes import Node, Scale, Shift, Sum, common_period
from .parser import parse_expr


@dataclass(frozen=True)
class Periodic:
    period: float


@dataclass(frozen=True)
class BlockStructured:
    pass


@dataclass(frozen=True)
class Generic:
    pass


def structure_of(expr: Node):
    if expr.contains_blocks():
        return BlockStructured()
    spec = expr.spectrum()
    if spec is not None:
        freqs = [w for w in spec if w != 0]
        if not freqs:
            # Constants are periodic with any period; one unit is as good as any.
            return Periodic(1.0)
        period = common_period(freqs)
        if period is not None:
            return Periodic(period)
    return Generic()


@dataclass(frozen=True)
class BoundedSignal:
    """A bounded function on the real line with certified ``sup |phi| <= sup_bound``."""

    expr: Node
    sup_bound: float = field(init=False)
    structure: object = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sup_bound", float(self.expr.bound))
        object.__setattr__(self, "structure", structure_of(self.expr))

    def __call__(self, t):
        return self.expr(t)

    @property
    def source(self) -> str:
        return self.expr.source()

    @property
    def re_range(self):
        return self.expr.re_range

    @property
    def im_range(self):
        return self.expr.im_range

    @property
    def is_real(self) -> bool:
        return self.expr.im_range == (0.0, 0.0)

    @property
    def has_primitive(self) -> bool:
        return self.expr.exact_window(0.0, 1.0) is not None

    def shifted(self, s: float) -> "BoundedSignal":
        return BoundedSignal(Shift(self.expr, float(s)))

    def scaled(self, c: complex) -> "BoundedSignal":
        return BoundedSignal(Scale(complex(c), self.expr))

    def __add__(self, other: "BoundedSignal") -> "BoundedSignal":
        return BoundedSignal(Sum((self.expr, other.expr)))

    def __neg__(self) -> "BoundedSignal":
        return self.scaled(-1.0)


def parse_signal(text: str, base_dir: str | Path | None = None) -> BoundedSignal:
    """Parse ``text`` in the signal grammar (variable ``t``)."""
    return BoundedSignal(parse_expr(text, "t", None if base_dir is None else Path(base_dir)))


def eval_signal(signal: BoundedSignal, t):
    value = signal(np.asarray(t, dtype=float))
    return complex(value) if np.ndim(value) == 0 else value


def _node_window(expr: Node, a: float, b: float, tol: float, max_evals: int):
    if isinstance(expr, Sum):
        share = tol / len(expr.terms)
        parts = [_node_window(c, a, b, share, max_evals) for c in expr.terms]
        return sum(p[0] for p in parts), sum(p[1] for p in parts)
    if isinstance(expr, Scale):
        if expr.factor == 0:
            return 0j, 0.0
        v, e = _node_window(expr.child, a, b, tol / abs(expr.factor), max_evals)
        return expr.factor * v, abs(expr.factor) * e
    if isinstance(expr, Shift):
        return _node_window(expr.child, a + expr.offset, b + expr.offset, tol, max_evals)
    exact = expr.exact_window(a, b)
    if exact is not None:
        return complex(exact[0]), float(exact[1])
    supp = expr.support()
    if supp is None:
        return 0j, 0.0
    lo, hi = max(a, supp[0]), min(b, supp[1])
    if lo >= hi:
        return 0j, 0.0
    pts = expr.breakpoints(lo, hi)
    # Oscillation and block structure want panels no longer than a few units.
    n = int(min(4096, max(1, math.ceil((hi - lo) / 4.0))))
    try:
        v, e, _ = quad.integrate(expr, lo, hi, tol, pts, min_panels=n, max_evals=max_evals)
    except QuadratureBudgetExceeded as exc:
        raise QuadratureBudgetExceeded(complex(exc.value), exc.err, tol) from None
    return complex(v), float(e)


def window_integral(signal: BoundedSignal, a: float, b: float, tol: float = 1e-10,
                    max_evals: int = quad.DEFAULT_MAX_EVALS) -> tuple[complex, float]:
    """``int_a^b phi`` and an error bound.

    Exact primitives are used wherever the expression provides them (the
    error is then a rounding estimate); remaining pieces go through
    adaptive quadrature split along known discontinuities.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if b < a:
        raise ValueError("window_integral needs a <= b")
    if a == b:
        return 0j, 0.0
    return _node_window(signal.expr, float(a), float(b), tol, max_evals)
