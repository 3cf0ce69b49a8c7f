"""Differential equivalence testing between a program and its refactoring.

Both programs run every case with ablation stripped; the verdict is PASS
only when all output digests match and neither program hits a runtime
failure.  Observable output covers impure library-call effects and frame
return values, which the v1 transforms provably do not reorder (they move
no allocation and preserve write order), so digest equality is a sound
check of the observable behavior the toolkit models.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..interp import ExecutionCase, ExecutionLog, RunConfig, run
from ..lang.checker import CheckedProgram


@dataclass
class EquivalenceVerdict:
    passed: bool
    cases_run: int
    first_divergence: Optional[str] = None
    details: dict = field(default_factory=dict)

    def to_json_data(self) -> dict:
        return {"passed": self.passed, "cases_run": self.cases_run,
                "first_divergence": self.first_divergence,
                "details": self.details}


def _strip_ablation(case: ExecutionCase) -> ExecutionCase:
    return ExecutionCase(case.case_id, case.input_sequence, set(),
                         case.replicate_count, case.frame_budget)


def check_equivalence(original: CheckedProgram, refactored: CheckedProgram,
                      cases: list[ExecutionCase],
                      config: Optional[RunConfig] = None
                      ) -> EquivalenceVerdict:
    if original.entry != refactored.entry:
        return EquivalenceVerdict(False, 0, first_divergence=None,
                                  details={"reason": "entry method differs"})
    orig_entry = original.method(original.entry)
    refa_entry = refactored.method(refactored.entry)
    if [p.ty for p in orig_entry.params] != [p.ty for p in refa_entry.params]:
        return EquivalenceVerdict(False, 0,
                                  details={"reason": "entry signature differs"})
    config = config or RunConfig()
    for i, case in enumerate(cases):
        plain = _strip_ablation(case)
        log_a: ExecutionLog = run(original, plain, config=config)
        log_b: ExecutionLog = run(refactored, plain, config=config)
        if log_a.failed or log_b.failed:
            which = "original" if log_a.failed else "refactored"
            failure = log_a.failure if log_a.failed else log_b.failure
            return EquivalenceVerdict(False, i + 1,
                                      first_divergence=case.case_id,
                                      details={"reason": f"{which} failed "
                                               f"at runtime: {failure}"})
        if log_a.output_digest != log_b.output_digest:
            return EquivalenceVerdict(False, i + 1,
                                      first_divergence=case.case_id,
                                      details={"reason": "output digests "
                                               "differ"})
    return EquivalenceVerdict(True, len(cases))
