"""needle: compile constructor-based rewrite systems into instrumented
evaluation strategies and compare them against a source-level reference."""

from .codegen import ObjectProgram, ObjectRule, build_program
from .core import EvaluationError, NeedleError, Node
from .deftree import (
    DefTreeError,
    DuplicateRule,
    NotInductivelySequential,
    build_all_deftrees,
    build_deftree,
)
from .frontend import SourceError, System, parse_expr, parse_system
from .oracle import oracle_eval, validate_trace
from .runtime import Counters, EvalResult, evaluate

__version__ = "0.1.0"

__all__ = [
    "Counters",
    "DefTreeError",
    "DuplicateRule",
    "EvalResult",
    "EvaluationError",
    "NeedleError",
    "Node",
    "NotInductivelySequential",
    "ObjectProgram",
    "ObjectRule",
    "SourceError",
    "System",
    "__version__",
    "build_all_deftrees",
    "build_deftree",
    "build_program",
    "evaluate",
    "oracle_eval",
    "parse_expr",
    "parse_system",
    "validate_trace",
]
