"""Deterministic tree-walking interpreter with block-level instrumentation.

Runs execution cases against a checked program, recording per-block
execution counts B[i], and doubles as the per-statement step-trace oracle
for the dictionary counts.  Block ablation skips a block's own statements
(and the construct terminating it) while leaving surrounding control flow
intact; ablated blocks log zero executions.

Semantics notes:

* ``&&``/``||`` evaluate both operands (no short-circuit), so static
  occurrence counts equal dynamic operation tallies,
* int division truncates toward zero; division by zero, array index out of
  bounds, buffer overflow and call-depth overflow fail the run with the
  offending block id,
* a while loop whose iteration performs no write (e.g. its body was
  ablated) while the condition stays true is reported as non-terminating
  instead of spinning,
* the entry method is the program's first method; its parameters (int or
  float) are fed from the case's input events, one event per frame, the
  last event persisting when the budget outruns the sequence,
* observable output is the stream of impure library-call effects plus each
  frame's return value; the log stores its SHA-256 digest.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from random import Random
from typing import Optional

from .blocks import (BlockMap, ConstructLayout, Segment, divide_blocks,
                     expr_ops, header_ops, stmt_ops)
from .lang.ast import (ArrayNew, Assign, Binary, BoolLit, Break, Call,
                       Convert, Decl, Expr, ExprStmt, FieldRef, FloatLit,
                       For, If, IncDec, Index, IntLit, NullLit, ObjectNew,
                       Return, Stmt, Switch, Unary, VarRef, While)
from .lang.checker import CheckedProgram


class CaseError(Exception):
    pass


# --- runtime values --------------------------------------------------------


class ObjVal:
    __slots__ = ("fields", "oid")

    def __init__(self, oid: int):
        self.fields: dict[str, object] = {}
        self.oid = oid


class ArrayVal:
    __slots__ = ("data", "elem", "cursor", "aid")

    def __init__(self, elem: str, size: int, aid: int):
        zero = 0.0 if elem == "float" else 0
        self.data = [zero] * size
        self.elem = elem
        self.cursor = 0  # sequential write position for buffer_put
        self.aid = aid


def _render(value, visited=None) -> str:
    if isinstance(value, ObjVal):
        visited = visited or set()
        if id(value) in visited:
            return "<cycle>"
        visited.add(id(value))
        inner = ",".join(f"{k}={_render(v, visited)}"
                         for k, v in sorted(value.fields.items()))
        return f"obj{{{inner}}}"
    if isinstance(value, ArrayVal):
        return f"arr[{','.join(repr(v) for v in value.data)}]"
    if value is None:
        return "null"
    return repr(value)


# --- cases and logs --------------------------------------------------------


@dataclass
class InputEvent:
    t: float
    values: list  # one value per entry-method parameter


@dataclass
class ExecutionCase:
    case_id: str
    input_sequence: list[InputEvent]
    ablated_blocks: set[str] = field(default_factory=set)
    replicate_count: int = 10
    frame_budget: int = 1

    def to_json_data(self) -> dict:
        return {
            "case_id": self.case_id,
            "input_sequence": [{"t": e.t, "values": e.values}
                               for e in self.input_sequence],
            "ablated_blocks": sorted(self.ablated_blocks),
            "replicate_count": self.replicate_count,
            "frame_budget": self.frame_budget,
        }

    @staticmethod
    def from_json_data(data: dict) -> "ExecutionCase":
        return ExecutionCase(
            case_id=data["case_id"],
            input_sequence=[InputEvent(e["t"], list(e["values"]))
                            for e in data["input_sequence"]],
            ablated_blocks=set(data.get("ablated_blocks", ())),
            replicate_count=data.get("replicate_count", 10),
            frame_budget=data.get("frame_budget", 1),
        )


@dataclass
class ExecutionLog:
    case_id: str
    block_counts: dict[str, int]
    output_digest: str
    step_count: int
    duration_s: float
    failed: bool = False
    failure: Optional[str] = None
    failed_block: Optional[str] = None

    def to_json_data(self) -> dict:
        return {
            "case_id": self.case_id,
            "block_counts": dict(sorted(self.block_counts.items())),
            "output_digest": self.output_digest,
            "step_count": self.step_count,
            "duration_s": self.duration_s,
            "failed": self.failed,
            "failure": self.failure,
            "failed_block": self.failed_block,
        }

    @staticmethod
    def from_json_data(data: dict) -> "ExecutionLog":
        return ExecutionLog(
            case_id=data["case_id"],
            block_counts=dict(data["block_counts"]),
            output_digest=data["output_digest"],
            step_count=data["step_count"],
            duration_s=data["duration_s"],
            failed=data.get("failed", False),
            failure=data.get("failure"),
            failed_block=data.get("failed_block"),
        )


@dataclass
class RunConfig:
    seconds_per_step: float = 1e-6
    step_limit: int = 10_000_000
    call_depth_limit: int = 64


# --- interpreter -----------------------------------------------------------


class _RuntimeFailure(Exception):
    def __init__(self, reason: str, block_id: Optional[str]):
        self.reason = reason
        self.block_id = block_id
        super().__init__(reason)


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


class _BreakSignal(Exception):
    pass


class _Interp:
    def __init__(self, checked: CheckedProgram, blockmap: BlockMap,
                 case: ExecutionCase, config: RunConfig, trace_ops: bool):
        self.checked = checked
        self.blockmap = blockmap
        self.case = case
        self.config = config
        self.trace_ops = trace_ops
        self.block_counts: dict[str, int] = {
            b.block_id: 0 for b in blockmap.blocks}
        self.op_tally: dict[str, int] = {}
        self.events: list[str] = []
        self.step_count = 0
        self.write_version = 0
        self.alloc_counter = 0
        self.call_depth = 0
        self.current_block: Optional[str] = None

    # -- helpers --------------------------------------------------------

    def _emit(self, names: list[str]) -> None:
        if self.trace_ops:
            for name in names:
                self.op_tally[name] = self.op_tally.get(name, 0) + 1

    def _step(self) -> None:
        self.step_count += 1
        if self.step_count > self.config.step_limit:
            raise _RuntimeFailure("step limit exceeded", self.current_block)

    def _fail(self, reason: str):
        raise _RuntimeFailure(reason, self.current_block)

    # -- entry ------------------------------------------------------------

    def run(self) -> None:
        entry = self.checked.method(self.checked.entry)
        for p in entry.params:
            if p.ty not in ("int", "float"):
                raise CaseError(f"entry parameter {p.name!r} must be int or "
                                f"float, got {p.ty}")
        events = self.case.input_sequence
        for frame in range(self.case.frame_budget):
            event = events[min(frame, len(events) - 1)] if events else None
            args = []
            for i, p in enumerate(entry.params):
                raw = event.values[i] if event and i < len(event.values) else 0
                args.append(float(raw) if p.ty == "float" else int(raw))
            result = self._call(entry.name, args)
            self.events.append(f"ret {frame} {_render(result)}")

    def _call(self, name: str, args: list):
        self.call_depth += 1
        if self.call_depth > self.config.call_depth_limit:
            self._fail("call depth exceeded")
        m = self.checked.method(name)
        env = [{p.name: v for p, v in zip(m.params, args)}]
        try:
            self._exec_segments(self.blockmap.layout[name], env)
        except _ReturnSignal as sig:
            return sig.value
        finally:
            self.call_depth -= 1
        # fell off the end: void returns nothing; a typed method can only
        # get here when ablation removed its return -- yield a zero value
        if m.ret == "void":
            return None
        return {"int": 0, "float": 0.0, "bool": False}.get(m.ret, None)

    # -- segments ---------------------------------------------------------

    def _exec_segments(self, segments: list[Segment], env: list[dict]) -> None:
        for seg in segments:
            if seg.block_id in self.case.ablated_blocks:
                continue
            self._exec_segment(seg, env)

    def _exec_segment(self, seg: Segment, env: list[dict]) -> None:
        self.current_block = seg.block_id
        self.block_counts[seg.block_id] += 1
        if seg.lead_goto is not None:
            self._emit([seg.lead_goto])
        for s in seg.stmts:
            self.current_block = seg.block_id
            self._exec_stmt(s, env)
        if seg.terminator is not None:
            self.current_block = seg.block_id
            self._emit(header_ops(seg, self.checked))
            self._exec_construct(seg, env)

    def _exec_construct(self, seg: Segment, env: list[dict]) -> None:
        node, layout = seg.terminator, seg.layout
        if isinstance(node, If):
            cond = self._eval(node.cond, env)
            if cond:
                self._exec_arm(layout.arms[0][1], env)
            elif len(layout.arms) > 1:
                self._exec_arm(layout.arms[1][1], env)
        elif isinstance(node, For):
            self._exec_for(node, layout, env)
        elif isinstance(node, While):
            self._exec_while(node, layout, env)
        elif isinstance(node, Switch):
            subject = self._eval(node.subject, env)
            chosen = None
            default = None
            for value, arm in layout.arms:
                if value == "default":
                    default = arm
                elif value == subject:
                    chosen = arm
                    break
            arm = chosen if chosen is not None else default
            if arm is not None:
                self._exec_arm(arm, env)

    def _exec_arm(self, segments: list[Segment], env: list[dict]) -> None:
        env.append({})
        try:
            self._exec_segments(segments, env)
        finally:
            env.pop()

    def _log_header(self, block_id: str, names: list[str]) -> None:
        self.current_block = block_id
        self.block_counts[block_id] += 1
        self._emit(names)

    def _exec_for(self, node: For, layout: ConstructLayout,
                  env: list[dict]) -> None:
        env.append({})
        try:
            init_ops = (stmt_ops(node.init, self.checked)
                        if node.init is not None else [])
            cond_ops = expr_ops(node.cond, self.checked)
            update_ops = (stmt_ops(node.update, self.checked)
                          if node.update is not None else [])
            self._log_header(layout.init_id, [])
            if node.init is not None:
                self._emit(init_ops)
                self._exec_simple(node.init, env, count_step=True)
            while True:
                self._log_header(layout.bool_id, cond_ops)
                if not self._eval(node.cond, env):
                    break
                try:
                    self._exec_arm(layout.body, env)
                except _BreakSignal:
                    break
                self._log_header(layout.update_id, update_ops)
                if node.update is not None:
                    self._exec_simple(node.update, env, count_step=True)
        finally:
            env.pop()

    def _exec_while(self, node: While, layout: ConstructLayout,
                    env: list[dict]) -> None:
        cond_ops = expr_ops(node.cond, self.checked)
        last_version = None
        while True:
            self._log_header(layout.bool_id, cond_ops)
            if not self._eval(node.cond, env):
                break
            if last_version is not None and last_version == self.write_version:
                # the previous iteration (body + condition) wrote nothing,
                # so the state cannot change again: provably non-terminating
                self.current_block = layout.bool_id
                self._fail("non-terminating while loop")
            last_version = self.write_version
            try:
                self._exec_arm(layout.body, env)
            except _BreakSignal:
                break

    # -- statements ---------------------------------------------------------

    def _exec_stmt(self, s: Stmt, env: list[dict]) -> None:
        if isinstance(s, (Decl, Assign, IncDec, ExprStmt)):
            self._emit(stmt_ops(s, self.checked))
            self._exec_simple(s, env, count_step=True)
        elif isinstance(s, Return):
            self._emit(stmt_ops(s, self.checked))
            self._step()
            value = (self._eval(s.value, env)
                     if s.value is not None else None)
            raise _ReturnSignal(value)
        elif isinstance(s, Break):
            self._step()
            raise _BreakSignal()
        else:
            raise AssertionError(f"construct in straight-line position: {s}")

    def _exec_simple(self, s: Stmt, env: list[dict], count_step: bool) -> None:
        if count_step:
            self._step()
        if isinstance(s, Decl):
            value = (self._eval(s.init, env) if s.init is not None
                     else _default_value(s.decl_ty))
            env[-1][s.name] = value
            self.write_version += 1
        elif isinstance(s, Assign):
            value = self._eval(s.value, env)
            self._store(s.target, value, env)
        elif isinstance(s, IncDec):
            delta = 1 if s.op == "++" else -1
            self._store(s.target, self._load(s.target, env) + delta, env)
        elif isinstance(s, ExprStmt):
            self._eval(s.call, env)
        else:
            raise AssertionError(f"not a simple statement: {s}")

    def _lookup_env(self, name: str, env: list[dict]) -> dict:
        for frame in reversed(env):
            if name in frame:
                return frame
        self._fail(f"unbound variable {name!r}")

    def _load(self, target, env: list[dict]):
        if isinstance(target, VarRef):
            return self._lookup_env(target.name, env)[target.name]
        if isinstance(target, FieldRef):
            obj = self._eval(target.obj, env)
            if obj is None:
                self._fail(f"null object in field read .{target.fieldname}")
            return obj.fields.get(target.fieldname,
                                  _default_value(target.ty))
        raise AssertionError

    def _store(self, target, value, env: list[dict]) -> None:
        self.write_version += 1
        if isinstance(target, VarRef):
            self._lookup_env(target.name, env)[target.name] = value
        elif isinstance(target, FieldRef):
            obj = self._eval(target.obj, env)
            if obj is None:
                self._fail(f"null object in field write .{target.fieldname}")
            obj.fields[target.fieldname] = value
        elif isinstance(target, Index):
            arr = self._eval(target.arr, env)
            idx = self._eval(target.index, env)
            if arr is None:
                self._fail("null array in element write")
            if not 0 <= idx < len(arr.data):
                self._fail(f"array index {idx} out of bounds "
                           f"(size {len(arr.data)})")
            arr.data[idx] = value
        else:
            raise AssertionError

    # -- expressions ----------------------------------------------------------

    def _eval(self, e: Expr, env: list[dict]):
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, FloatLit):
            return e.value
        if isinstance(e, BoolLit):
            return e.value
        if isinstance(e, NullLit):
            return None
        if isinstance(e, VarRef):
            return self._lookup_env(e.name, env)[e.name]
        if isinstance(e, FieldRef):
            return self._load(e, env)
        if isinstance(e, Index):
            arr = self._eval(e.arr, env)
            idx = self._eval(e.index, env)
            if arr is None:
                self._fail("null array in element read")
            if not 0 <= idx < len(arr.data):
                self._fail(f"array index {idx} out of bounds "
                           f"(size {len(arr.data)})")
            return arr.data[idx]
        if isinstance(e, Unary):
            return not self._eval(e.operand, env)
        if isinstance(e, Convert):
            value = self._eval(e.operand, env)
            return float(value) if e.target == "float" else int(value)
        if isinstance(e, Binary):
            return self._eval_binary(e, env)
        if isinstance(e, Call):
            return self._eval_call(e, env)
        if isinstance(e, ObjectNew):
            self.alloc_counter += 1
            obj = ObjVal(self.alloc_counter)
            for name, value_expr in e.inits:
                obj.fields[name] = self._eval(value_expr, env)
            self.write_version += 1
            return obj
        if isinstance(e, ArrayNew):
            size = self._eval(e.size, env)
            if size < 0:
                self._fail(f"negative array size {size}")
            self.alloc_counter += 1
            self.write_version += 1
            return ArrayVal(e.elem, size, self.alloc_counter)
        raise AssertionError(f"cannot evaluate {type(e).__name__}")

    def _eval_binary(self, e: Binary, env: list[dict]):
        left = self._eval(e.left, env)
        right = self._eval(e.right, env)
        op = e.op
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                self._fail("division by zero")
            if e.ty == "int":
                q = abs(left) // abs(right)
                return q if (left < 0) == (right < 0) else -q
            return left / right
        if op == "<":
            return left < right
        if op == "<=":
            return left <= right
        if op == ">":
            return left > right
        if op == ">=":
            return left >= right
        if op == "==":
            if isinstance(left, (ObjVal, ArrayVal)) or left is None \
                    or isinstance(right, (ObjVal, ArrayVal)) or right is None:
                return left is right
            return left == right
        if op == "&&":
            return left and right
        if op == "||":
            return left or right
        if op == "&":
            return left & right
        if op == "|":
            return left | right
        if op == "<<":
            if not 0 <= right <= 63:
                self._fail(f"shift amount {right} out of range")
            return left << right
        if op == ">>":
            if not 0 <= right <= 63:
                self._fail(f"shift amount {right} out of range")
            return left >> right
        raise AssertionError(op)

    def _eval_call(self, e: Call, env: list[dict]):
        args = [self._eval(a, env) for a in e.args]
        if e.is_library:
            return self._library(e.name, args)
        return self._call(e.name, args)

    def _library(self, name: str, args: list):
        if name == "list_get":
            arr, idx = args
            if arr is None:
                self._fail("list_get on null array")
            if not 0 <= idx < len(arr.data):
                self._fail(f"list_get index {idx} out of bounds "
                           f"(size {len(arr.data)})")
            return arr.data[idx]
        if name == "list_size":
            if args[0] is None:
                self._fail("list_size on null array")
            return len(args[0].data)
        if name == "buffer_put":
            arr, value = args
            if arr is None:
                self._fail("buffer_put on null array")
            if arr.cursor >= len(arr.data):
                self._fail(f"buffer overflow at position {arr.cursor}")
            arr.data[arr.cursor] = value
            self.events.append(f"put {arr.aid} {arr.cursor} {_render(value)}")
            arr.cursor += 1
            self.write_version += 1
            return arr.cursor
        if name == "buffer_bulk_put":
            arr, src = args
            if arr is None or src is None:
                self._fail("buffer_bulk_put on null array")
            if arr.cursor + len(src.data) > len(arr.data):
                self._fail("buffer overflow in bulk put")
            for value in src.data:
                arr.data[arr.cursor] = value
                self.events.append(
                    f"put {arr.aid} {arr.cursor} {_render(value)}")
                arr.cursor += 1
            self.write_version += 1
            return arr.cursor
        if name == "math_sqrt":
            if args[0] < 0.0:
                self._fail(f"math_sqrt of negative value {args[0]!r}")
            return args[0] ** 0.5
        if name == "math_sin":
            import math
            return math.sin(args[0])
        raise AssertionError(name)


def _default_value(ty: str):
    return {"int": 0, "float": 0.0, "bool": False}.get(ty, None)


def _finish(interp: _Interp, case: ExecutionCase, config: RunConfig,
            failure: Optional[_RuntimeFailure]) -> ExecutionLog:
    digest = hashlib.sha256("\n".join(interp.events).encode()).hexdigest()
    return ExecutionLog(
        case_id=case.case_id,
        block_counts=interp.block_counts,
        output_digest=digest,
        step_count=interp.step_count,
        duration_s=interp.step_count * config.seconds_per_step,
        failed=failure is not None,
        failure=failure.reason if failure else None,
        failed_block=failure.block_id if failure else None,
    )


def _validate_case(case: ExecutionCase, blockmap: BlockMap) -> None:
    known = set(blockmap.block_ids())
    ablatable = set(blockmap.ablatable_ids())
    for bid in case.ablated_blocks:
        if bid not in known:
            raise CaseError(f"unknown block id in ablation set: {bid}")
        if bid not in ablatable:
            raise CaseError(f"block {bid} is not ablatable (only body/arm "
                            "blocks may be removed)")


def run(checked: CheckedProgram, case: ExecutionCase,
        blockmap: Optional[BlockMap] = None,
        config: Optional[RunConfig] = None) -> ExecutionLog:
    """Execute one case; deterministic given (program, case)."""
    blockmap = blockmap or divide_blocks(checked)
    config = config or RunConfig()
    _validate_case(case, blockmap)
    interp = _Interp(checked, blockmap, case, config, trace_ops=False)
    failure = None
    try:
        interp.run()
    except _RuntimeFailure as f:
        failure = f
    return _finish(interp, case, config, failure)


def step_trace(checked: CheckedProgram, case: ExecutionCase,
               blockmap: Optional[BlockMap] = None,
               config: Optional[RunConfig] = None
               ) -> tuple[ExecutionLog, dict[str, int]]:
    """As :func:`run`, but also tallies every executed operation individually.

    This is the independent oracle for ``blocks.total_op_counts``."""
    blockmap = blockmap or divide_blocks(checked)
    config = config or RunConfig()
    _validate_case(case, blockmap)
    interp = _Interp(checked, blockmap, case, config, trace_ops=True)
    failure = None
    try:
        interp.run()
    except _RuntimeFailure as f:
        failure = f
    return _finish(interp, case, config, failure), dict(interp.op_tally)


# --- case generation ---------------------------------------------------------


@dataclass
class CaseDesign:
    n_cases: int
    seed: int = 0
    ablation_policy: str = "cover-once"  # cover-once | random-k | none
    random_k: int = 2
    frame_budget: int = 1
    replicate_count: int = 10
    int_range: int = 100  # int inputs drawn from [0, int_range)


def generate_cases(checked: CheckedProgram, design: CaseDesign,
                   blockmap: Optional[BlockMap] = None) -> list[ExecutionCase]:
    """Designed execution cases: varied inputs plus block-removal sets.

    Coverage guarantee: every ablatable block appears in at least one
    ablation set and at least one case without it; case 0 never ablates.
    Deterministic given the design seed.
    """
    blockmap = blockmap or divide_blocks(checked)
    ablatable = sorted(blockmap.ablatable_ids())
    entry = checked.method(checked.entry)

    def inputs(rng: Random) -> list[InputEvent]:
        events = []
        for frame in range(design.frame_budget):
            values = []
            for p in entry.params:
                if p.ty == "float":
                    values.append(round(rng.random(), 6))
                else:
                    values.append(rng.randrange(design.int_range))
            events.append(InputEvent(round(frame * 0.1, 3), values))
        return events

    cases: list[ExecutionCase] = []
    for idx in range(design.n_cases):
        rng = Random(f"{design.seed}:{idx}")
        if design.ablation_policy == "none" or idx == 0 or not ablatable:
            ablated: set[str] = set()
        elif design.ablation_policy == "cover-once":
            if idx <= len(ablatable):
                ablated = {ablatable[idx - 1]}
            else:
                ablated = {b for b in ablatable if rng.random() < 0.4}
        elif design.ablation_policy == "random-k":
            k = min(design.random_k, len(ablatable))
            ablated = set(rng.sample(ablatable, k))
        else:
            raise CaseError(f"unknown ablation policy "
                            f"{design.ablation_policy!r}")
        cases.append(ExecutionCase(
            case_id=f"case_{idx:04d}",
            input_sequence=inputs(rng),
            ablated_blocks=ablated,
            replicate_count=design.replicate_count,
            frame_budget=design.frame_budget,
        ))

    if design.ablation_policy != "none" and ablatable:
        covered = set()
        for case in cases:
            covered |= case.ablated_blocks
        missing = [b for b in ablatable if b not in covered]
        if missing:
            raise CaseError(
                "n_cases too small to cover ablatable blocks; uncovered: "
                + ", ".join(missing))
    return cases


def cases_to_json(cases: list[ExecutionCase]) -> str:
    return json.dumps([c.to_json_data() for c in cases], indent=2,
                      sort_keys=True) + "\n"


def cases_from_json(text: str) -> list[ExecutionCase]:
    return [ExecutionCase.from_json_data(d) for d in json.loads(text)]


def logs_to_jsonl(logs: list[ExecutionLog]) -> str:
    return "".join(json.dumps(log.to_json_data(), sort_keys=True) + "\n"
                   for log in logs)


def logs_from_jsonl(text: str) -> list[ExecutionLog]:
    return [ExecutionLog.from_json_data(json.loads(line))
            for line in text.splitlines() if line.strip()]
