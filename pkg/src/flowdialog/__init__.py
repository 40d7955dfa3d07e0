"""Dataflow dialogue toolkit.

Each user turn is parsed into an expression tree, compiled into a
computational graph, and evaluated against a calendar domain.  Prior
turns stay addressable through ``refer`` and ``revise``, and missing
information is collected through a resumable exception mechanism.
An accompanying term-rewriting layer converts between the verbose
original annotation style and a compact simplified style.
"""

from .expr import (
    AssignSeq,
    Call,
    ConstraintCall,
    Literal,
    SurfaceExpr,
    VarRef,
    parse_call,
    parse_prefix,
    print_call,
    print_prefix,
    tokenize_for_length,
)

__version__ = "0.1.0"

__all__ = [
    "AssignSeq",
    "Call",
    "ConstraintCall",
    "Literal",
    "SurfaceExpr",
    "VarRef",
    "parse_call",
    "parse_prefix",
    "print_call",
    "print_prefix",
    "tokenize_for_length",
    "__version__",
]
