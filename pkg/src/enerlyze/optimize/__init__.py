"""Profile-guided optimization: hot-spot identification, strategy
selection and code refactoring, with differential equivalence gating.

The driver walks the costliest blocks of an energy profile in cost order;
for each block it selects applicable strategies from the catalog (ordered
by modeled saving, estimated by replaying the reference case against the
transformed program), applies them one at a time, keeps a transformation
only when differential equivalence passes, and re-profiles after each
accepted change so the report's cumulative numbers match what the final
program would measure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from ..accounting import EnergyProfile, block_profiles
from ..blocks import build_dictionary, divide_blocks, total_op_counts
from ..interp import ExecutionCase, RunConfig, run
from ..lang.ast import Call, For
from ..lang.checker import CheckedProgram
from ..model import EnergyModel
from .equivalence import EquivalenceVerdict, check_equivalence
from .transforms import (NotApplicable, apply_constant_fold_propagate,
                         apply_cse, apply_if_combination,
                         apply_library_replacement,
                         apply_loop_invariant_motion, apply_loop_unroll,
                         apply_method_inline, resolve_loop, total_statements)

STRATEGY_NAMES = (
    "IfCombination",
    "MethodInline",
    "LoopInvariantMotion",
    "LoopUnroll",
    "ConstantFoldPropagate",
    "CommonSubexprElim",
    "LibraryReplacement",
    # catalogued but stubbed in v1: never exercised by the case studies
    "LoopUnswitching",
    "InductionVariableElimination",
)

DEFAULT_STRATEGIES = STRATEGY_NAMES[:7]


class OptimizeError(Exception):
    pass


# --- hot-spot identification -------------------------------------------------


@dataclass
class HotBlockPolicy:
    kind: str  # "top_k" | "share_threshold"
    k: int = 10
    fraction: float = 0.10

    @staticmethod
    def parse(text: str) -> "HotBlockPolicy":
        """``top:10`` or ``share:0.10``."""
        kind, _, value = text.partition(":")
        if kind == "top":
            return HotBlockPolicy("top_k", k=int(value or 10))
        if kind == "share":
            return HotBlockPolicy("share_threshold",
                                  fraction=float(value or 0.10))
        raise OptimizeError(f"bad hot-block policy {text!r}")

    def validate(self) -> None:
        if self.kind == "top_k" and self.k < 1:
            raise OptimizeError("top_k requires k >= 1")
        if self.kind == "share_threshold" and not 0 < self.fraction < 1:
            raise OptimizeError("share threshold must be in (0, 1)")


def find_costly_blocks(profile: EnergyProfile,
                       policy: HotBlockPolicy) -> list[str]:
    """Hot blocks, descending by cost with deterministic id tie-breaks."""
    policy.validate()
    ranked = profile.ranked_blocks()
    if policy.kind == "top_k":
        chosen = ranked[:policy.k]
    else:
        chosen = [b for b in ranked
                  if b.cost_J / profile.total_J > policy.fraction]
    return [b.block_id for b in chosen]


# --- strategy plans --------------------------------------------------------


@dataclass
class StrategyPlan:
    name: str
    method: str
    params: dict = field(default_factory=dict)
    est_saving_J: float = 0.0

    def key(self) -> tuple:
        return (self.name, self.method,
                tuple(sorted(self.params.items())))

    def label(self) -> str:
        extras = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.name}({self.method}{', ' + extras if extras else ''})"


@dataclass
class OptimizeConfig:
    policy: HotBlockPolicy = field(
        default_factory=lambda: HotBlockPolicy("top_k", k=10))
    strategies: tuple[str, ...] = DEFAULT_STRATEGIES
    inline_size_limit: int = 30
    unroll_factors: tuple[int, ...] = (8, 4, 2)
    control_dominance: float = 1.0 / 3.0
    arithmetic_dominance: float = 1.0 / 3.0
    run_config: RunConfig = field(default_factory=RunConfig)


def _block_location(block_id: str) -> tuple[str, list[str]]:
    """Split a block id into (method name, construct path components)."""
    head, _, rest = block_id.partition("()")
    parts = [p for p in rest.split(".") if p]
    return head, parts


def _loop_path_of(block_id: str) -> Optional[str]:
    """Construct path of the loop a block belongs to, if any."""
    _, parts = _block_location(block_id)
    # strip header selectors and continuation segments
    while parts and (parts[-1] in ("init", "bool", "update")
                     or parts[-1].startswith("seg_")):
        parts = parts[:-1]
    if parts and parts[-1].split("_")[0] in ("for", "while"):
        return ".".join(parts)
    return None


def apply_plan(checked: CheckedProgram, plan: StrategyPlan,
               model: Optional[EnergyModel] = None) -> CheckedProgram:
    name = plan.name
    if name == "IfCombination":
        return apply_if_combination(checked, plan.method)
    if name == "MethodInline":
        return apply_method_inline(checked, plan.params["caller"],
                                   plan.params["callee"],
                                   plan.params.get("size_limit", 30))
    if name == "LoopInvariantMotion":
        return apply_loop_invariant_motion(checked, plan.method,
                                           plan.params["loop"])
    if name == "LoopUnroll":
        return apply_loop_unroll(checked, plan.method, plan.params["loop"],
                                 plan.params["factor"])
    if name == "LibraryReplacement":
        return apply_library_replacement(checked, plan.method,
                                         plan.params["loop"])
    if name == "ConstantFoldPropagate":
        return apply_constant_fold_propagate(checked, plan.method)
    if name == "CommonSubexprElim":
        cost = model.cost_uJ_hat if model is not None else None
        return apply_cse(checked, plan.method, cost)
    if name in ("LoopUnswitching", "InductionVariableElimination"):
        raise NotApplicable(f"{name} is catalogued but not automated in v1")
    raise OptimizeError(f"unknown strategy {name!r}")


def modeled_case_energy_J(checked: CheckedProgram, case: ExecutionCase,
                          model: EnergyModel,
                          run_config: Optional[RunConfig] = None) -> float:
    """Model-predicted net energy of running one case (no measurement)."""
    blockmap = divide_blocks(checked)
    dictionary = build_dictionary(checked, blockmap)
    log = run(checked, case, blockmap, run_config)
    if log.failed:
        raise OptimizeError(f"case {case.case_id} failed: {log.failure}")
    return model.predict_J(total_op_counts(log.block_counts, dictionary))


# --- strategy selection ------------------------------------------------------


def select_strategies(checked: CheckedProgram, block_id: str,
                      profile: EnergyProfile, model: EnergyModel,
                      reference_case: ExecutionCase,
                      config: Optional[OptimizeConfig] = None
                      ) -> list[StrategyPlan]:
    """Rule-table strategy selection for one hot block.

    Rules (documented interpretation, thresholds configurable):
    control-dominant blocks inside a for loop propose unrolling; duplicated
    pure if-predicates in the method propose if-combination; small callees
    invoked from the block (or the block being a small method itself)
    propose inlining; loop-invariant pure work proposes code motion;
    recognized copy loops propose library replacement;
    arithmetic-dominant blocks propose folding then CSE.  Plans are ordered
    by modeled saving, estimated by replaying the reference case."""
    config = config or OptimizeConfig()
    method_name, _ = _block_location(block_id)
    if method_name not in checked.methods:
        return []
    try:
        block = profile.block(block_id)
    except KeyError:
        return []
    groups = block.group_costs()
    share = {g: (c / block.cost_J if block.cost_J > 0 else 0.0)
             for g, c in groups.items()}
    loop_path = _loop_path_of(block_id)

    candidates: list[StrategyPlan] = []

    def propose(name: str, method: str, **params) -> None:
        if name not in config.strategies:
            return
        candidates.append(StrategyPlan(name, method, params))

    if loop_path is not None:
        if share.get("Control", 0.0) > config.control_dominance:
            for factor in config.unroll_factors:
                propose("LoopUnroll", method_name, loop=loop_path,
                        factor=factor)
        propose("LibraryReplacement", method_name, loop=loop_path)
        propose("LoopInvariantMotion", method_name, loop=loop_path)

    propose("IfCombination", method_name)

    for callee in _called_methods(checked, method_name, block_id):
        decl = checked.methods.get(callee)
        if decl is not None and total_statements(decl.body) \
                <= config.inline_size_limit:
            propose("MethodInline", method_name, caller=method_name,
                    callee=callee, size_limit=config.inline_size_limit)
    # a hot block that *is* a small method: inline it into its callers
    if _is_entry_block(block_id) and total_statements(
            checked.method(method_name).body) <= config.inline_size_limit:
        for caller in _callers_of(checked, method_name):
            propose("MethodInline", caller, caller=caller,
                    callee=method_name,
                    size_limit=config.inline_size_limit)

    if share.get("Arithmetic", 0.0) > config.arithmetic_dominance:
        propose("ConstantFoldPropagate", method_name)
        propose("CommonSubexprElim", method_name)

    plans: list[StrategyPlan] = []
    seen = set()
    baseline = modeled_case_energy_J(checked, reference_case, model,
                                     config.run_config)
    for plan in candidates:
        if plan.key() in seen:
            continue
        seen.add(plan.key())
        try:
            candidate = apply_plan(checked, plan, model)
            after = modeled_case_energy_J(candidate, reference_case, model,
                                          config.run_config)
        except NotApplicable:
            continue
        except OptimizeError:
            continue
        plan.est_saving_J = baseline - after
        plans.append(plan)

    # keep only the best unroll factor per loop
    best_unroll: dict[tuple, StrategyPlan] = {}
    filtered = []
    for plan in plans:
        if plan.name != "LoopUnroll":
            filtered.append(plan)
            continue
        key = (plan.method, plan.params["loop"])
        kept = best_unroll.get(key)
        if kept is None or plan.est_saving_J > kept.est_saving_J:
            best_unroll[key] = plan
    filtered.extend(best_unroll.values())
    filtered.sort(key=lambda p: (-p.est_saving_J, p.name, p.method))
    return filtered


def _is_entry_block(block_id: str) -> bool:
    return block_id.endswith("()")


def _called_methods(checked: CheckedProgram, method_name: str,
                    block_id: str) -> list[str]:
    """User methods called anywhere in the hot block's method (the block
    itself is the trigger; the transform works methodwide)."""
    from .transforms import body_exprs, subexpressions
    names: list[str] = []
    for e in body_exprs(checked.method(method_name).body):
        for sub in subexpressions(e):
            if isinstance(sub, Call) and not sub.is_library \
                    and sub.name not in names:
                names.append(sub.name)
    return names


def _callers_of(checked: CheckedProgram, callee: str) -> list[str]:
    from .transforms import body_exprs, subexpressions
    callers = []
    for m in checked.program.methods:
        if m.name == callee:
            continue
        for e in body_exprs(m.body):
            if any(isinstance(sub, Call) and not sub.is_library
                   and sub.name == callee for sub in subexpressions(e)):
                callers.append(m.name)
                break
    return callers


# --- catalog (incl. stubbed strategies) -----------------------------------------


def loop_unswitch_applicable(checked: CheckedProgram, method: str,
                             loop_path: str) -> bool:
    """Applicability predicate for loop unswitching (transform stubbed)."""
    from .analysis import EffectAnalysis, Effects, effects_conflict
    from ..lang.ast import If as IfNode
    try:
        _, _, loop = resolve_loop(checked.method(method), loop_path)
    except NotApplicable:
        return False
    analysis = EffectAnalysis(checked)
    loop_eff = analysis.stmt(loop)
    for s in loop.body:
        if isinstance(s, IfNode):
            cond_eff = analysis.expr(s.cond)
            if not cond_eff.writes and not effects_conflict(
                    Effects(reads=cond_eff.reads),
                    Effects(writes=loop_eff.writes)):
                return True
    return False


def induction_variable_elim_applicable(checked: CheckedProgram, method: str,
                                       loop_path: str) -> bool:
    """Applicability predicate for induction-variable elimination (stubbed):
    a body assignment of the form ``j = i * c`` or ``j = i + c`` over the
    loop counter."""
    from ..lang.ast import Assign, Binary, VarRef
    from .transforms import _counted_loop_shape
    try:
        _, _, loop = resolve_loop(checked.method(method), loop_path)
    except NotApplicable:
        return False
    if not isinstance(loop, For):
        return False
    shape = _counted_loop_shape(loop, checked.method(method))
    if shape is None:
        return False
    var = shape[0]
    for s in loop.body:
        if isinstance(s, Assign) and isinstance(s.target, VarRef) \
                and isinstance(s.value, Binary) and s.value.op in ("*", "+") \
                and isinstance(s.value.left, VarRef) \
                and s.value.left.name == var:
            return True
    return False


# --- the driver (Algorithm 1) ---------------------------------------------------


@dataclass
class Application:
    block_id: str
    plan: StrategyPlan
    verdict: EquivalenceVerdict
    applied: bool
    energy_before_J: float
    energy_after_J: float
    op_count_delta: dict[str, int]

    def to_json_data(self) -> dict:
        saving = self.energy_before_J - self.energy_after_J
        return {
            "block": self.block_id,
            "strategy": self.plan.name,
            "params": {k: v for k, v in sorted(self.plan.params.items())},
            "method": self.plan.method,
            "equivalence": self.verdict.to_json_data(),
            "applied": self.applied,
            "energy_before_J": self.energy_before_J,
            "energy_after_J": self.energy_after_J,
            "saving_J": saving,
            "saving_pct": (100.0 * saving / self.energy_before_J
                           if self.energy_before_J > 0 else 0.0),
            "op_count_delta": {k: v for k, v
                               in sorted(self.op_count_delta.items()) if v},
        }


@dataclass
class OptimizationReport:
    policy: str
    hot_blocks: list[str]
    applications: list[Application]
    cumulative: list[tuple[str, float]]
    original_energy_J: float
    final_energy_J: float
    equivalence_cases: int

    def saving_pct(self) -> float:
        if self.original_energy_J <= 0:
            return 0.0
        return 100.0 * (self.original_energy_J - self.final_energy_J) \
            / self.original_energy_J

    def to_json_data(self) -> dict:
        return {
            "policy": self.policy,
            "hot_blocks": self.hot_blocks,
            "applications": [a.to_json_data() for a in self.applications],
            "cumulative": [{"label": label, "energy_J": e}
                           for label, e in self.cumulative],
            "totals": {
                "original_J": self.original_energy_J,
                "final_J": self.final_energy_J,
                "saving_pct": self.saving_pct(),
            },
            "equivalence_cases": self.equivalence_cases,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_data(), indent=2, sort_keys=True) + "\n"


@dataclass
class OptimizationResult:
    program: CheckedProgram
    report: OptimizationReport


def _case_counts(checked: CheckedProgram, case: ExecutionCase,
                 run_config: RunConfig) -> dict[str, int]:
    blockmap = divide_blocks(checked)
    dictionary = build_dictionary(checked, blockmap)
    log = run(checked, case, blockmap, run_config)
    if log.failed:
        raise OptimizeError(f"reference case failed: {log.failure}")
    return total_op_counts(log.block_counts, dictionary)


def optimize_program(checked: CheckedProgram, model: EnergyModel,
                     reference_case: ExecutionCase,
                     equivalence_cases: list[ExecutionCase],
                     config: Optional[OptimizeConfig] = None
                     ) -> OptimizationResult:
    """Hot-spot identification, strategy selection, code refactoring.

    Walks hot blocks in cost order, re-profiling after every accepted
    transformation; a transformation is accepted only when differential
    equivalence passes on the supplied cases."""
    config = config or OptimizeConfig()
    if not model.accepted:
        raise OptimizeError("model was rejected; refusing to optimize")

    def profile_of(program: CheckedProgram) -> EnergyProfile:
        blockmap = divide_blocks(program)
        dictionary = build_dictionary(program, blockmap)
        log = run(program, reference_case, blockmap, config.run_config)
        if log.failed:
            raise OptimizeError(f"reference case failed: {log.failure}")
        return block_profiles(log, dictionary, model)

    current = checked
    profile = profile_of(current)
    hot_blocks = find_costly_blocks(profile, config.policy)
    original_energy = profile.total_J
    cumulative: list[tuple[str, float]] = [("Original", original_energy)]
    applications: list[Application] = []
    applied_keys: set = set()

    for block_id in hot_blocks:
        current_profile = profile_of(current)
        if not any(b.block_id == block_id for b in current_profile.blocks):
            continue  # refactoring dissolved this block
        plans = select_strategies(current, block_id, current_profile, model,
                                  reference_case, config)
        for plan in plans:
            if plan.key() in applied_keys:
                continue
            try:
                candidate = apply_plan(current, plan, model)
            except NotApplicable:
                continue
            verdict = check_equivalence(current, candidate,
                                        equivalence_cases,
                                        config.run_config)
            before = _case_counts(current, reference_case, config.run_config)
            after = (_case_counts(candidate, reference_case,
                                  config.run_config)
                     if verdict.passed else before)
            energy_before = model.predict_J(before)
            energy_after = model.predict_J(after) if verdict.passed \
                else energy_before
            delta = {op: after.get(op, 0) - before.get(op, 0)
                     for op in set(before) | set(after)}
            applications.append(Application(
                block_id=block_id, plan=plan, verdict=verdict,
                applied=verdict.passed,
                energy_before_J=energy_before,
                energy_after_J=energy_after,
                op_count_delta=delta if verdict.passed else {},
            ))
            applied_keys.add(plan.key())
            if verdict.passed:
                current = candidate
                cumulative.append((f"+ {plan.label()}", energy_after))

    final_energy = cumulative[-1][1]
    report = OptimizationReport(
        policy=(f"top:{config.policy.k}" if config.policy.kind == "top_k"
                else f"share:{config.policy.fraction}"),
        hot_blocks=hot_blocks,
        applications=applications,
        cumulative=cumulative,
        original_energy_J=original_energy,
        final_energy_J=final_energy,
        equivalence_cases=len(equivalence_cases),
    )
    return OptimizationResult(current, report)


# --- before/after evaluation ------------------------------------------------------


def evaluate(original: CheckedProgram, refactored: CheckedProgram,
             model: EnergyModel, cases: list[ExecutionCase],
             run_config: Optional[RunConfig] = None) -> dict:
    """Modeled energy comparison over a case set (equivalence must PASS)."""
    run_config = run_config or RunConfig()
    verdict = check_equivalence(original, refactored, cases, run_config)
    if not verdict.passed:
        raise OptimizeError("refactored program is not equivalent: "
                            f"{verdict.details.get('reason', 'divergence')} "
                            f"(case {verdict.first_divergence})")
    total_before = 0.0
    total_after = 0.0
    per_case = []
    delta_ops: dict[str, int] = {}
    for case in cases:
        plain = ExecutionCase(case.case_id, case.input_sequence, set(),
                              case.replicate_count, case.frame_budget)
        before = _case_counts(original, plain, run_config)
        after = _case_counts(refactored, plain, run_config)
        e_before = model.predict_J(before)
        e_after = model.predict_J(after)
        total_before += e_before
        total_after += e_after
        for op in set(before) | set(after):
            delta_ops[op] = delta_ops.get(op, 0) \
                + after.get(op, 0) - before.get(op, 0)
        per_case.append({"case_id": case.case_id,
                         "energy_before_J": e_before,
                         "energy_after_J": e_after})
    saving = total_before - total_after
    return {
        "equivalence": verdict.to_json_data(),
        "cases": per_case,
        "totals": {
            "energy_before_J": total_before,
            "energy_after_J": total_after,
            "saving_J": saving,
            "saving_pct": (100.0 * saving / total_before
                           if total_before > 0 else 0.0),
        },
        "op_count_delta": {k: v for k, v in sorted(delta_ops.items()) if v},
    }
