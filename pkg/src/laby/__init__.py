"""An imperative data-analytics language compiled into one cyclic
parallel dataflow job.

The compiler turns loops, branches, and mutable variables into a static
dataflow graph via SSA; the runtime executes the whole program as a single
job, coordinating control flow by tagging every produced bag with its
position on the global execution path.
"""

from .errors import (
    BudgetExceededError,
    DeadlockError,
    DiagnosticError,
    ExecutionError,
    LabyError,
    LabyParseError,
    LabyTypeError,
    ProtocolError,
)
from .oracle import run_sequential
from .pipeline import CompiledProgram, compile_source
from .runtime import (
    RandomDelay,
    RunResult,
    RunStats,
    TargetedDelay,
    ZeroDelay,
    run_parallel,
)
from .trace import BagId, ExecutionTrace, diff_traces, parse_trace, \
    serialize_trace
from .transforms import RunContext

__all__ = [
    "BagId",
    "BudgetExceededError",
    "CompiledProgram",
    "DeadlockError",
    "DiagnosticError",
    "ExecutionError",
    "ExecutionTrace",
    "LabyError",
    "LabyParseError",
    "LabyTypeError",
    "ProtocolError",
    "RandomDelay",
    "RunContext",
    "RunResult",
    "RunStats",
    "TargetedDelay",
    "ZeroDelay",
    "compile_source",
    "diff_traces",
    "parse_trace",
    "run_parallel",
    "run_sequential",
    "serialize_trace",
]

__version__ = "0.1.0"
