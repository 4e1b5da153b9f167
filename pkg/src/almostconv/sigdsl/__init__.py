"""Expression language for bounded test signals."""

from .nodes import BlockSpec, Node
from .parser import parse_expr, tokenize
from .signal import (
    BlockStructured,
    BoundedSignal,
    Generic,
    Periodic,
    eval_signal,
    parse_signal,
    window_integral,
)

__all__ = [
    "BlockSpec",
    "BlockStructured",
    "BoundedSignal",
    "Generic",
    "Node",
    "Periodic",
    "eval_signal",
    "parse_expr",
    "parse_signal",
    "tokenize",
    "window_integral",
]
