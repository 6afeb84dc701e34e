"""Execution engines and run traces."""

from .optimized import EquivalenceError, check_equivalent, run_optimized
from .reference import run_reference
from .trace import (
    FALL,
    INPUT,
    ONSET,
    PHASE,
    RISE,
    THETA,
    DenseTrace,
    RecordPolicy,
    TickTrace,
    events_from_dense,
    read_binary,
)

ENGINES = {"reference": run_reference, "optimized": run_optimized}


def run(state, stream, params, engine: str = "optimized", record: RecordPolicy = RecordPolicy()):
    """Dispatch to an engine by name; ``"both"`` runs the optimized engine in self-check mode."""
    if engine == "both":
        return run_optimized(state, stream, params, record, self_check=True)
    try:
        fn = ENGINES[engine]
    except KeyError:
        raise ValueError(f"unknown engine {engine!r}") from None
    return fn(state, stream, params, record)


__all__ = [
    "ENGINES", "EquivalenceError", "FALL", "INPUT", "ONSET", "PHASE", "RISE", "THETA",
    "DenseTrace", "RecordPolicy", "TickTrace", "check_equivalent", "events_from_dense",
    "read_binary", "run", "run_optimized", "run_reference",
]
