"""Ground truth by differential execution against the reference program."""
from __future__ import annotations

from ..minilang import (
    ABSENT_METHOD,
    ARITY_MISMATCH,
    DEFAULT_STEP_LIMIT,
    RuntimeFault,
    evaluate,
    outcomes_equal,
)

PASS, FAIL = "P", "F"


class LabelError(RuntimeError):
    """The reference program cannot run the test: a corpus defect."""


def label_pair(test, candidate_program, reference_program, step_limit: int = DEFAULT_STEP_LIMIT) -> str:
    expected = evaluate(reference_program, test.calls, step_limit)
    if isinstance(expected, RuntimeFault) and expected.kind in (ABSENT_METHOD, ARITY_MISMATCH):
        raise LabelError(f"reference program faults with {expected.kind} on test {test.id}")
    actual = evaluate(candidate_program, test.calls, step_limit)
    return PASS if outcomes_equal(actual, expected) else FAIL
