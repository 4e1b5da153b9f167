"""Recursive-descent parser for the signal language.

The same grammar serves two variables: ``t`` for signals on the real line
and ``z`` for bounded analytic functions on the right half plane, where the
result is the boundary trace ``t -> F(it)``. Intermediate values are plain
complex constants, affine forms ``a*v + b`` in the variable, or signal
nodes; affine forms are only legal as function arguments or inside a
Moebius quotient, which is how unbounded constructs get rejected.
"""

from __future__ import annotations

import cmath
import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import SignalSyntaxError, UnboundedConstruct
from .nodes import (
    BlockIndicator,
    BlockSpec,
    BoundedRational,
    ComplexExp,
    Const,
    Node,
    Piecewise,
    Product,
    Samples,
    Scale,
    Shift,
    Sinusoid,
    Sum,
)

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?(?P<imag>i(?![A-Za-z0-9_]))?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"[^"]*")
  | (?P<op>[-+*/^(),=\[\]])
    """,
    re.VERBOSE,
)

T_FUNCS = ("sin", "cos", "cis", "exp", "sign", "ind", "blocks", "piecewise", "shift", "ratio", "samples")
Z_FUNCS = ("exp",)
CONSTANTS = {"pi": math.pi, "i": 1j}


@dataclass
class Token:
    kind: str  # num, name, str, op, end
    text: str
    pos: int
    value: object = None


def tokenize(text: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SignalSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup if m.lastgroup != "imag" else "num"
        if m.group("num") is not None:
            kind = "num"
            raw = m.group("num")
            if m.group("imag"):
                value = 1j * float(raw[:-1])
            else:
                value = float(raw)
            out.append(Token("num", raw, pos, value))
        elif kind != "ws":
            raw = m.group(kind)
            value = raw[1:-1] if kind == "str" else None
            out.append(Token(kind, raw, pos, value))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


@dataclass(frozen=True)
class Affine:
    """``slope * v + offset`` in the active variable."""

    slope: complex
    offset: complex


@dataclass(frozen=True)
class Pending:
    """``node * (a*v + b)``: only legal if a later division cancels the growth."""

    node: Node
    factor: Affine


def _is_const(v) -> bool:
    return isinstance(v, complex)


def _as_node(v) -> Node:
    if _is_const(v):
        return Const(v)
    if isinstance(v, Affine):
        if v.slope == 0:
            return Const(v.offset)
        raise UnboundedConstruct("a polynomial term in the variable is unbounded")
    if isinstance(v, Pending):
        raise UnboundedConstruct("a polynomial factor in the variable is unbounded")
    return v


def _flatten(cls, attr, items):
    out = []
    for item in items:
        out.extend(getattr(item, attr) if isinstance(item, cls) else (item,))
    return tuple(out)


def _add(u, v):
    if _is_const(u) and _is_const(v):
        return u + v
    if isinstance(u, (Affine, complex)) and isinstance(v, (Affine, complex)):
        uu = u if isinstance(u, Affine) else Affine(0j, u)
        vv = v if isinstance(v, Affine) else Affine(0j, v)
        return Affine(uu.slope + vv.slope, uu.offset + vv.offset)
    return Sum(_flatten(Sum, "terms", (_as_node(u), _as_node(v))))


def _mul(u, v):
    if _is_const(u) and _is_const(v):
        return u * v
    if _is_const(v):
        u, v = v, u
    if _is_const(u):
        if isinstance(v, Affine):
            return Affine(u * v.slope, u * v.offset)
        if isinstance(v, Pending):
            return Pending(_mul(u, v.node), v.factor)
        if u == 1:
            return v
        if isinstance(v, Scale):
            return Scale(u * v.factor, v.child)
        return Scale(u, v)
    if isinstance(u, Affine) or isinstance(v, Affine):
        a, other = (u, v) if isinstance(u, Affine) else (v, u)
        if a.slope == 0:
            return _mul(a.offset, other)
        if isinstance(other, Node):
            return Pending(other, a)
        raise UnboundedConstruct("a polynomial term in the variable is unbounded")
    if isinstance(u, Pending) or isinstance(v, Pending):
        p, other = (u, v) if isinstance(u, Pending) else (v, u)
        if isinstance(other, Pending):
            raise UnboundedConstruct("a polynomial term in the variable is unbounded")
        return Pending(_mul(p.node, other), p.factor)
    return Product(_flatten(Product, "factors", (u, v)))


class Parser:
    def __init__(self, text: str, variable: str = "t", base_dir: Path | None = None):
        self.text = text
        self.variable = variable
        self.base_dir = base_dir
        self.tokens = tokenize(text)
        self.i = 0

    # -- token helpers ---------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, expected=()):
        raise SignalSyntaxError(message, self.tok.pos, expected)

    def expect(self, text: str) -> Token:
        if self.tok.text != text:
            self.fail(f"unexpected {self.tok.text or 'end of input'!r}", (text,))
        return self.advance()

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("op",) and self.tok.text == text:
            self.i += 1
            return True
        return False

    # -- grammar ---------------------------------------------------------
    def parse(self) -> Node:
        value = self.expr()
        if self.tok.kind != "end":
            self.fail(f"unexpected {self.tok.text!r}", ("+", "-", "*", "/", "^", "end of input"))
        if isinstance(value, (Affine, Pending)) and not (isinstance(value, Affine) and value.slope == 0):
            raise UnboundedConstruct(f"unbounded growth in {self.variable}")
        return _as_node(value)

    def expr(self):
        value = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            rhs = self.term()
            value = _add(value, rhs if op == "+" else _mul(-1 + 0j, rhs))
        return value

    def term(self):
        value = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance().text
            pos = self.tok.pos
            rhs = self.unary()
            value = _mul(value, rhs) if op == "*" else self.divide(value, rhs, pos)
        return value

    def unary(self):
        if self.accept("-"):
            return _mul(-1 + 0j, self.unary())
        if self.accept("+"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^"):
            tok = self.tok
            if tok.kind != "num" or not isinstance(tok.value, float) or tok.value != int(tok.value) or tok.value < 0:
                self.fail("exponent must be a nonnegative integer literal", ("integer",))
            self.advance()
            n = int(tok.value)
            if _is_const(base):
                return base ** n
            if n == 0:
                return 1 + 0j
            out = base
            for _ in range(n - 1):
                out = _mul(out, base)
            return out
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return complex(tok.value)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            value = self.expr()
            self.expect(")")
            return value
        if tok.kind == "name":
            self.advance()
            if tok.text == self.variable:
                return Affine(1 + 0j, 0j)
            if tok.text in CONSTANTS:
                return complex(CONSTANTS[tok.text])
            funcs = T_FUNCS if self.variable == "t" else Z_FUNCS
            if tok.text in funcs and self.tok.text == "(":
                return self.call(tok)
            self.i -= 1
            self.fail(f"unknown name {tok.text!r}", (self.variable,) + tuple(CONSTANTS) + funcs)
        self.fail(f"unexpected {tok.text or 'end of input'!r}", ("number", self.variable, "(", "function"))

    def divide(self, num, den, pos):
        if _is_const(den):
            if den == 0:
                raise SignalSyntaxError("division by zero", pos)
            return _mul(1 / den, num)
        if isinstance(num, Pending):
            if _is_const(den):
                return Pending(num.node, Affine(num.factor.slope / den, num.factor.offset / den))
            if isinstance(den, Affine):
                return _mul(num.node, self.moebius(num.factor, den, pos))
        if isinstance(den, Affine) and isinstance(num, (Affine, complex)):
            return self.moebius(num if isinstance(num, Affine) else Affine(0j, num), den, pos)
        raise UnboundedConstruct(f"division by a non-constant expression at position {pos}")

    def moebius(self, num: Affine, den: Affine, pos):
        a, b, c, d = num.slope, num.offset, den.slope, den.offset
        if c == 0:
            if d == 0:
                raise SignalSyntaxError("division by zero", pos)
            return Affine(a / d, b / d)
        q = d / c
        k = (b - a * q) / c
        if self.variable == "z":
            # k/(z+q) = (k/q)(1 - z/(z+q)); bounded on Re z > 0 iff Re q > 0.
            if not q.real > 0:
                raise UnboundedConstruct(f"pole at z = {-q} is not in the left half plane")
            rat = BoundedRational(q)
        else:
            # k/(t+q) = (k/q)(1 - it/(iq + it)); bounded on the real line iff Im q != 0.
            if q.imag == 0:
                raise UnboundedConstruct(f"real pole at t = {-q.real}")
            rat = BoundedRational(1j * q)
        return _add(a / c + k / q, _mul(-k / q, rat))

    # -- function calls --------------------------------------------------
    def args(self):
        self.expect("(")
        pos_args, kw_args = [], {}
        if self.accept(")"):
            return pos_args, kw_args
        while True:
            if self.tok.kind == "name" and self.tokens[self.i + 1].text == "=":
                key = self.advance().text
                self.advance()
                kw_args[key] = self.kw_value()
            elif self.tok.kind == "str":
                pos_args.append(self.advance().value)
            else:
                pos_args.append(self.expr())
            if self.accept(")"):
                return pos_args, kw_args
            if not self.accept(","):
                self.fail(f"unexpected {self.tok.text or 'end of input'!r}", (",", ")"))

    def kw_value(self):
        if self.accept("["):
            items = []
            if not self.accept("]"):
                while True:
                    items.append(self.const_value(self.expr()))
                    if self.accept("]"):
                        break
                    self.expect(",")
            return items
        return self.expr()

    def const_value(self, v, real=False, what="argument"):
        if isinstance(v, Affine) and v.slope == 0:
            v = v.offset
        if not _is_const(v):
            self.fail(f"{what} must be a constant", ("number",))
        if real:
            if v.imag != 0:
                self.fail(f"{what} must be real", ("real number",))
            return v.real
        return v

    def affine_arg(self, v, name, real=True) -> Affine:
        if _is_const(v):
            v = Affine(0j, v)
        if not isinstance(v, Affine):
            self.fail(f"{name}() takes an argument linear in {self.variable}", (f"a*{self.variable} + b",))
        if real and (v.slope.imag or v.offset.imag):
            self.fail(f"{name}() needs real coefficients", ("real number",))
        return v

    def call(self, name_tok: Token):
        name = name_tok.text
        start = self.tok.pos
        pos, kw = self.args()

        def need(n):
            if len(pos) != n or kw:
                raise SignalSyntaxError(f"{name}() takes {n} positional argument(s)", start)

        if name in ("sin", "cos"):
            need(1)
            a = self.affine_arg(pos[0], name)
            if a.slope == 0:
                f = math.sin if name == "sin" else math.cos
                return complex(f(a.offset.real))
            return Sinusoid(1.0, a.slope.real, a.offset.real, name)
        if name == "cis":
            need(1)
            a = self.affine_arg(pos[0], name)
            return _mul(cmath.exp(1j * a.offset), ComplexExp(a.slope.real) if a.slope else 1 + 0j)
        if name == "exp":
            need(1)
            a = self.affine_arg(pos[0], name, real=False)
            if a.slope == 0:
                return cmath.exp(a.offset)
            if self.variable == "z":
                # exp(s z) is bounded on Re z > 0 iff s is real and s <= 0.
                if a.slope.imag != 0 or a.slope.real > 0:
                    raise UnboundedConstruct("exp(s*z) needs real s <= 0")
                return _mul(cmath.exp(a.offset), ComplexExp(a.slope.real))
            if a.slope.real != 0:
                raise UnboundedConstruct("exp(s*t) needs purely imaginary s")
            return _mul(cmath.exp(a.offset), ComplexExp(a.slope.imag))
        if name == "sign":
            need(1)
            a = self.affine_arg(pos[0], name)
            if a.slope == 0:
                return complex(np.sign(a.offset.real))
            x0 = -a.offset.real / a.slope.real
            lo, hi = (Const(-1), Const(1)) if a.slope.real > 0 else (Const(1), Const(-1))
            return Piecewise((x0,), (lo, hi))
        if name == "ind":
            need(2)
            lo = self.const_value(pos[0], real=True)
            hi = self.const_value(pos[1], real=True)
            if not hi > lo:
                raise SignalSyntaxError("ind(a, b) needs a < b", start)
            return Piecewise((lo, hi), (Const(0), Const(1), Const(0)))
        if name == "shift":
            need(2)
            return Shift(_as_node(pos[0]), self.const_value(pos[1], real=True))
        if name == "ratio":
            need(1)
            c = self.const_value(pos[0])
            if c.real == 0:
                raise UnboundedConstruct("ratio(c) with Re c = 0 has a real pole")
            return BoundedRational(c)
        if name == "piecewise":
            if kw or len(pos) % 2 == 0:
                raise SignalSyntaxError("piecewise(e0, x1, e1, ..., xn, en) needs an odd argument count", start)
            breaks = tuple(self.const_value(x, real=True, what="breakpoint") for x in pos[1::2])
            pieces = tuple(_as_node(e) for e in pos[0::2])
            try:
                return Piecewise(breaks, pieces)
            except ValueError as exc:
                raise SignalSyntaxError(str(exc), start) from None
        if name == "blocks":
            return self.blocks(pos, kw, start)
        if name == "samples":
            return self.samples(pos, kw, start)
        raise AssertionError(name)

    def blocks(self, pos, kw, start):
        if pos:
            raise SignalSyntaxError("blocks() takes keyword arguments only", start)
        unknown = set(kw) - {"base", "width", "ratio", "mirror", "intervals"}
        if unknown:
            raise SignalSyntaxError(f"unknown blocks() keyword {sorted(unknown)[0]!r}", start,
                                    ("base", "width", "ratio", "mirror", "intervals"))
        try:
            if "intervals" in kw:
                if set(kw) - {"intervals"}:
                    raise ValueError("intervals= cannot be combined with other keywords")
                flat = [self.const_value(v, real=True) for v in kw["intervals"]]
                if len(flat) % 2 or not flat:
                    raise ValueError("intervals=[a1, b1, a2, b2, ...] needs pairs")
                return BlockIndicator(BlockSpec(intervals=tuple(zip(flat[0::2], flat[1::2]))))
            base = self.const_value(kw.get("base", 4 + 0j), real=True)
            if "width" in kw and "ratio" in kw:
                raise ValueError("give either width= or ratio=, not both")
            if "ratio" in kw:
                width = self.const_value(kw["ratio"], real=True) - 1.0
            else:
                width = self.const_value(kw.get("width", 1 + 0j), real=True)
            mirror = bool(self.const_value(kw.get("mirror", 0j), real=True))
            return BlockIndicator(BlockSpec(base, width, mirror))
        except ValueError as exc:
            if isinstance(exc, SignalSyntaxError):
                raise
            raise SignalSyntaxError(str(exc), start) from None

    def samples(self, pos, kw, start):
        if pos:
            if len(pos) != 1 or kw or not isinstance(pos[0], str):
                raise SignalSyntaxError('samples("file.csv") takes one quoted path', start)
            path = pos[0]
            full = Path(path) if self.base_dir is None else self.base_dir / path
            t0, h, values = load_samples_csv(full)
            return Samples(t0, h, tuple(values), path=path)
        missing = {"t0", "h", "values"} - set(kw)
        if missing or set(kw) - {"t0", "h", "values"}:
            raise SignalSyntaxError("samples() needs t0=, h= and values=[...]", start, ("t0", "h", "values"))
        try:
            return Samples(self.const_value(kw["t0"], real=True), self.const_value(kw["h"], real=True),
                           tuple(kw["values"]))
        except ValueError as exc:
            raise SignalSyntaxError(str(exc), start) from None


def load_samples_csv(path) -> tuple[float, float, np.ndarray]:
    """Read ``t,re[,im]`` rows on a uniform grid."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty sample file")
    header = [h.strip().lower() for h in rows[0]]
    if header not in (["t", "re"], ["t", "re", "im"]):
        raise ValueError(f"{path}: header must be 't,re' or 't,re,im'")
    data = np.array([[float(x) for x in row] for row in rows[1:] if row], dtype=float)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(header):
        raise ValueError(f"{path}: need at least two rows of {len(header)} columns")
    t = data[:, 0]
    steps = np.diff(t)
    h = (t[-1] - t[0]) / (t.size - 1)
    if not h > 0 or np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError(f"{path}: t must be uniformly spaced and increasing")
    values = data[:, 1] + (1j * data[:, 2] if data.shape[1] == 3 else 0)
    return float(t[0]), float(h), values


def parse_expr(text: str, variable: str = "t", base_dir=None) -> Node:
    return Parser(text, variable, base_dir).parse()
