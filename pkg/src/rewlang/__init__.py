"""rewlang: an interpreter and transformation toolkit for an
imperative-style term rewriting language with shared subterms and
destructive update."""

from .ast import Program
from .checks import Diagnostic, run_checks
from .desugar import RewriteSystem, flatten_program, lower_loops
from .engine import EvalState, RunResult, Session, run_query
from .parser import ParseError, parse_program, parse_query
from .store import LabelPolicy, Snapshot, decorate, strip

__all__ = [
    "Diagnostic",
    "EvalState",
    "LabelPolicy",
    "ParseError",
    "Program",
    "RewriteSystem",
    "RunResult",
    "Session",
    "Snapshot",
    "decorate",
    "flatten_program",
    "lower_loops",
    "parse_program",
    "parse_query",
    "run_checks",
    "run_query",
    "strip",
]
