"""Block division, control-flow edges and the operation dictionary.

Division scheme
---------------

A block is a maximal run of straight-line statements plus, when the run is
terminated by an ``if``/``switch``, that construct's header expression.
Hierarchical ids follow the construct path: the method's first block is
``m()``, the first for-loop's body inside it is ``m().for_1``, the loop
header splits into ``m().for_1.init`` / ``.bool`` / ``.update``, an else
branch is ``m().if_2.else``, and straight-line code after a construct
continues as ``.seg_2``, ``.seg_3``, ... of the enclosing region.  Ids are
deterministic functions of the program structure.

Operation attribution:

* straight-line statement ops belong to the block holding the statement,
* boolean/comparison ops of a loop condition belong to the loop's
  ``bool`` header block (for) or ``while-header`` block, which the
  interpreter logs per evaluation (body count + 1 per loop entry),
* if-conditions and switch subjects belong to the block the construct
  terminates, which executes exactly as often as the condition,
* one ``BlockGoto_<construct>`` per body/arm block, carried by the arm's
  lead segment and thus counted once per entry,
* ``MethodInvocation`` / ``Parameter_*`` belong to the caller's block;
  ``Return_*`` to the return site; library calls count only their
  ``Library_<fn>`` operation.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

from . import ops as ops_mod
from .lang.ast import (ArrayNew, Assign, Binary, Break, Call, Convert, Decl,
                       Expr, ExprStmt, FieldRef, For, If, IncDec, Index,
                       MethodDecl, ObjectNew, Return, Stmt, Switch, Unary,
                       VarRef, While)
from .lang.checker import CheckedProgram
from .lang import library
from .ops import assign_signature, equal_signature

BODY_KINDS = ("if-body", "else-body", "loop-body", "switch-arm")

_BLOCKGOTO = {
    "if-body": "BlockGoto_if",
    "else-body": "BlockGoto_if",
    "loop-body": None,  # chosen by construct (for/while)
    "switch-arm": "BlockGoto_switch",
}


class BlockError(Exception):
    pass


# --- layout ------------------------------------------------------------


@dataclass
class Segment:
    """One block: straight statements plus an optional terminating construct."""

    block_id: str
    kind: str
    lead_goto: Optional[str]  # BlockGoto op emitted on entry (arm leads only)
    stmts: list[Stmt] = field(default_factory=list)
    terminator: Optional[Stmt] = None
    layout: Optional["ConstructLayout"] = None  # set when terminator is set


@dataclass
class ConstructLayout:
    node: Stmt
    # if / switch
    arms: list[tuple[object, list[Segment]]] = field(default_factory=list)
    # for / while header block ids
    init_id: Optional[str] = None
    bool_id: Optional[str] = None
    update_id: Optional[str] = None
    body: Optional[list[Segment]] = None


@dataclass
class BlockInfo:
    block_id: str
    kind: str
    span: Optional[tuple[int, int]]


@dataclass
class BlockMap:
    blocks: list[BlockInfo]
    edges: list[tuple[str, str, str]]
    layout: dict[str, list[Segment]]  # method name -> segments

    def block_ids(self) -> list[str]:
        return [b.block_id for b in self.blocks]

    def kinds(self) -> dict[str, str]:
        return {b.block_id: b.kind for b in self.blocks}

    def ablatable_ids(self) -> list[str]:
        return [b.block_id for b in self.blocks if b.kind in BODY_KINDS]


class _Divider:
    def __init__(self):
        self.blocks: list[BlockInfo] = []
        self.edges: list[tuple[str, str, str]] = []

    def divide_method(self, m: MethodDecl) -> list[Segment]:
        return self._divide_body(m.body, f"{m.name}()", "entry", None)

    def _register(self, seg: Segment, span) -> None:
        pos = (span.line, span.col) if span is not None else None
        self.blocks.append(BlockInfo(seg.block_id, seg.kind, pos))

    def _divide_body(self, body: list[Stmt], region_id: str, kind: str,
                     lead_goto: Optional[str]) -> list[Segment]:
        """Split one statement list (a region) into segments."""
        segments: list[Segment] = []
        counters = {"if": 0, "for": 0, "while": 0, "switch": 0}
        seg = Segment(region_id, kind, lead_goto)
        self._register(seg, body[0].span if body else None)
        segments.append(seg)
        for s in body:
            if isinstance(s, If):
                counters["if"] += 1
                cid = f"{region_id}.if_{counters['if']}"
                seg.terminator = s
                layout = ConstructLayout(s)
                layout.arms.append(
                    ("then", self._divide_body(s.then_body, cid, "if-body",
                                               "BlockGoto_if")))
                if s.else_body is not None:
                    layout.arms.append(
                        ("else", self._divide_body(s.else_body, f"{cid}.else",
                                                   "else-body", "BlockGoto_if")))
                seg.layout = layout
                seg = self._continue(segments, region_id, kind, len(segments) + 1)
            elif isinstance(s, For):
                counters["for"] += 1
                cid = f"{region_id}.for_{counters['for']}"
                seg.terminator = s
                layout = ConstructLayout(s)
                layout.init_id = f"{cid}.init"
                layout.bool_id = f"{cid}.bool"
                layout.update_id = f"{cid}.update"
                self.blocks.append(BlockInfo(layout.init_id, "for-init",
                                             _pos(s.span)))
                self.blocks.append(BlockInfo(layout.bool_id, "for-boolean",
                                             _pos(s.span)))
                self.blocks.append(BlockInfo(layout.update_id, "for-update",
                                             _pos(s.span)))
                layout.body = self._divide_body(s.body, cid, "loop-body",
                                                "BlockGoto_for")
                seg.layout = layout
                seg = self._continue(segments, region_id, kind, len(segments) + 1)
            elif isinstance(s, While):
                counters["while"] += 1
                cid = f"{region_id}.while_{counters['while']}"
                seg.terminator = s
                layout = ConstructLayout(s)
                layout.bool_id = f"{cid}.bool"
                self.blocks.append(BlockInfo(layout.bool_id, "while-header",
                                             _pos(s.span)))
                layout.body = self._divide_body(s.body, cid, "loop-body",
                                                "BlockGoto_while")
                seg.layout = layout
                seg = self._continue(segments, region_id, kind, len(segments) + 1)
            elif isinstance(s, Switch):
                counters["switch"] += 1
                cid = f"{region_id}.switch_{counters['switch']}"
                seg.terminator = s
                layout = ConstructLayout(s)
                for i, (value, arm) in enumerate(s.arms, start=1):
                    layout.arms.append(
                        (value, self._divide_body(arm, f"{cid}.case_{i}",
                                                  "switch-arm",
                                                  "BlockGoto_switch")))
                if s.default is not None:
                    layout.arms.append(
                        ("default", self._divide_body(s.default,
                                                      f"{cid}.default",
                                                      "switch-arm",
                                                      "BlockGoto_switch")))
                seg.layout = layout
                seg = self._continue(segments, region_id, kind, len(segments) + 1)
            else:
                seg.stmts.append(s)
        return segments

    def _continue(self, segments: list[Segment], region_id: str, kind: str,
                  index: int) -> Segment:
        seg = Segment(f"{region_id}.seg_{index}", kind, None)
        self._register(seg, None)
        segments.append(seg)
        return seg

    # -- edges -----------------------------------------------------------

    def build_edges(self, segments: list[Segment]) -> None:
        for i, seg in enumerate(segments):
            follow = segments[i + 1].block_id if i + 1 < len(segments) else None
            if seg.terminator is None:
                continue
            node, layout = seg.terminator, seg.layout
            if isinstance(node, If):
                then_segs = layout.arms[0][1]
                self.edges.append((seg.block_id, then_segs[0].block_id, "true"))
                self.build_edges(then_segs)
                if len(layout.arms) > 1:
                    else_segs = layout.arms[1][1]
                    self.edges.append((seg.block_id, else_segs[0].block_id,
                                       "false"))
                    self.build_edges(else_segs)
                    arms = [then_segs, else_segs]
                elif follow is not None:
                    self.edges.append((seg.block_id, follow, "false"))
                    arms = [then_segs]
                else:
                    arms = [then_segs]
                if follow is not None:
                    for arm in arms:
                        self.edges.append((arm[-1].block_id, follow,
                                           "fallthrough"))
            elif isinstance(node, For):
                self.edges.append((seg.block_id, layout.init_id, "fallthrough"))
                self.edges.append((layout.init_id, layout.bool_id,
                                   "fallthrough"))
                body = layout.body
                self.edges.append((layout.bool_id, body[0].block_id, "true"))
                self.edges.append((body[-1].block_id, layout.update_id,
                                   "fallthrough"))
                self.edges.append((layout.update_id, layout.bool_id, "back"))
                if follow is not None:
                    self.edges.append((layout.bool_id, follow, "false"))
                self.build_edges(body)
            elif isinstance(node, While):
                self.edges.append((seg.block_id, layout.bool_id, "fallthrough"))
                body = layout.body
                self.edges.append((layout.bool_id, body[0].block_id, "true"))
                self.edges.append((body[-1].block_id, layout.bool_id, "back"))
                if follow is not None:
                    self.edges.append((layout.bool_id, follow, "false"))
                self.build_edges(body)
            elif isinstance(node, Switch):
                for _, arm in layout.arms:
                    self.edges.append((seg.block_id, arm[0].block_id, "case"))
                    if follow is not None:
                        self.edges.append((arm[-1].block_id, follow,
                                           "fallthrough"))
                    self.build_edges(arm)


def _pos(span):
    return (span.line, span.col) if span is not None else None


def divide_blocks(checked: CheckedProgram) -> BlockMap:
    """Divide a checked program into blocks and build the CFG."""
    divider = _Divider()
    layout: dict[str, list[Segment]] = {}
    for m in checked.program.methods:
        segs = divider.divide_method(m)
        divider.build_edges(segs)
        layout[m.name] = segs
    blockmap = BlockMap(divider.blocks, divider.edges, layout)
    seen = set()
    for b in blockmap.blocks:
        if b.block_id in seen:
            raise BlockError(f"duplicate block id {b.block_id}")
        seen.add(b.block_id)
    return blockmap


# --- operation counting --------------------------------------------------


def expr_ops(e: Expr, checked: CheckedProgram) -> list[str]:
    """Operation names contributed by evaluating an expression (in eval order)."""
    out: list[str] = []
    _expr_ops(e, checked, out)
    return out


def _expr_ops(e: Expr, checked: CheckedProgram, out: list[str]) -> None:
    if isinstance(e, VarRef):
        return
    if isinstance(e, FieldRef):
        _expr_ops(e.obj, checked, out)
        out.append("FieldReference")
    elif isinstance(e, Index):
        _expr_ops(e.arr, checked, out)
        _expr_ops(e.index, checked, out)
        out.append("ArrayReference")
    elif isinstance(e, Unary):
        _expr_ops(e.operand, checked, out)
        out.append("Not")
    elif isinstance(e, Convert):
        _expr_ops(e.operand, checked, out)
        src = e.operand.ty
        out.append(f"Conversion_{src}_{e.target}")
    elif isinstance(e, Binary):
        _expr_ops(e.left, checked, out)
        _expr_ops(e.right, checked, out)
        out.append(_binary_op_name(e))
    elif isinstance(e, Call):
        for a in e.args:
            _expr_ops(a, checked, out)
        if e.is_library:
            out.append(f"Library_{e.name}")
        else:
            out.append("MethodInvocation")
            for p in checked.method(e.name).params:
                out.append(f"Parameter_{p.ty}")
    elif isinstance(e, ObjectNew):
        for _, value in e.inits:
            _expr_ops(value, checked, out)
            out.append("FieldReference")
            vty = "null" if value.ty == "null" else value.ty
            fty = "Object" if vty == "null" else vty
            out.append(f"Assign_{assign_signature(fty, vty)}")
    elif isinstance(e, ArrayNew):
        _expr_ops(e.size, checked, out)
    # literals contribute nothing


_ARITH_STEM = {"+": "Addition", "-": "Subtraction", "*": "Multi",
               "/": "Division"}
_CMP_STEM = {"<": "Less", "<=": "LessEq", ">": "Greater", ">=": "GreaterEq"}
_BIT_NAME = {"&": "BitAnd", "|": "BitOr", "<<": "SignedBitShiftLeft",
             ">>": "SignedBitShiftRight"}


def _binary_op_name(e: Binary) -> str:
    lt, rt = e.left.ty, e.right.ty
    if e.op in _ARITH_STEM:
        return f"{_ARITH_STEM[e.op]}_{lt}_{rt}"
    if e.op in _CMP_STEM:
        return f"{_CMP_STEM[e.op]}_{lt}_{rt}"
    if e.op == "==":
        return f"Equal_{equal_signature(lt, rt)}"
    if e.op == "&&":
        return "And"
    if e.op == "||":
        return "Or"
    return _BIT_NAME[e.op]


def stmt_ops(s: Stmt, checked: CheckedProgram) -> list[str]:
    """Operations of one straight-line statement (no control constructs)."""
    out: list[str] = []
    if isinstance(s, Decl):
        if s.init is not None:
            _expr_ops(s.init, checked, out)
        out.append(f"Declaration_{s.decl_ty}")
        if s.init is not None:
            vty = s.init.ty
            out.append(f"Assign_{assign_signature(s.decl_ty, vty)}")
    elif isinstance(s, Assign):
        # target sub-expressions evaluate, then the value, then the store
        if isinstance(s.target, FieldRef):
            _expr_ops(s.target.obj, checked, out)
            out.append("FieldReference")
        elif isinstance(s.target, Index):
            _expr_ops(s.target.arr, checked, out)
            _expr_ops(s.target.index, checked, out)
            out.append("ArrayReference")
        _expr_ops(s.value, checked, out)
        out.append(f"Assign_{assign_signature(s.target.ty, s.value.ty)}")
    elif isinstance(s, IncDec):
        if isinstance(s.target, FieldRef):
            _expr_ops(s.target.obj, checked, out)
            out.append("FieldReference")
        out.append("Increment" if s.op == "++" else "Decrement")
    elif isinstance(s, ExprStmt):
        _expr_ops(s.call, checked, out)
    elif isinstance(s, Return):
        if s.value is not None:
            _expr_ops(s.value, checked, out)
            out.append(f"Return_{s.value.ty}" if s.value.ty != "null"
                       else "Return_Object")
        else:
            out.append("Return_void")
    elif isinstance(s, Break):
        pass
    else:
        raise BlockError(f"not a straight-line statement: {type(s).__name__}")
    return out


def header_ops(seg: Segment, checked: CheckedProgram) -> list[str]:
    """Ops of the terminating construct that belong to this segment."""
    if seg.terminator is None:
        return []
    node = seg.terminator
    if isinstance(node, If):
        return expr_ops(node.cond, checked)
    if isinstance(node, Switch):
        return expr_ops(node.subject, checked)
    return []  # for/while headers live in their own blocks


# --- dictionary -----------------------------------------------------------


@dataclass
class OperationDictionary:
    op_universe: tuple[str, ...]
    counts: dict[str, dict[str, int]]  # block id -> op name -> count

    def row(self, block_id: str) -> dict[str, int]:
        return self.counts[block_id]

    def to_json_data(self) -> dict:
        return {
            "op_universe": list(self.op_universe),
            "blocks": {bid: dict(sorted(row.items()))
                       for bid, row in sorted(self.counts.items())},
        }

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["block_id"] + list(self.op_universe))
        for bid in sorted(self.counts):
            row = self.counts[bid]
            writer.writerow([bid] + [row.get(op, 0) for op in self.op_universe])
        return buf.getvalue()


def _tally(row: dict[str, int], names: list[str]) -> None:
    for name in names:
        row[name] = row.get(name, 0) + 1


def build_dictionary(checked: CheckedProgram,
                     blockmap: BlockMap) -> OperationDictionary:
    """Count operation occurrences O[i,j] per block, purely syntactically."""
    counts: dict[str, dict[str, int]] = {b.block_id: {}
                                         for b in blockmap.blocks}

    def visit_segments(segments: list[Segment]) -> None:
        for seg in segments:
            row = counts[seg.block_id]
            if seg.lead_goto is not None:
                _tally(row, [seg.lead_goto])
            for s in seg.stmts:
                _tally(row, stmt_ops(s, checked))
            _tally(row, header_ops(seg, checked))
            if seg.layout is None:
                continue
            layout = seg.layout
            node = seg.terminator
            if isinstance(node, For):
                if node.init is not None:
                    _tally(counts[layout.init_id],
                           stmt_ops(node.init, checked))
                _tally(counts[layout.bool_id], expr_ops(node.cond, checked))
                if node.update is not None:
                    _tally(counts[layout.update_id],
                           stmt_ops(node.update, checked))
                visit_segments(layout.body)
            elif isinstance(node, While):
                _tally(counts[layout.bool_id], expr_ops(node.cond, checked))
                visit_segments(layout.body)
            else:
                for _, arm in layout.arms:
                    visit_segments(arm)

    for segs in blockmap.layout.values():
        visit_segments(segs)

    for bid, row in counts.items():
        for op in row:
            if op not in ops_mod.OP_BY_NAME:
                raise BlockError(f"{bid}: unknown operation {op}")
    return OperationDictionary(ops_mod.OP_NAMES, counts)


def total_op_counts(block_counts: dict[str, int],
                    dictionary: OperationDictionary) -> dict[str, int]:
    """N_e per operation: sum over blocks of B[i] * O[i,j].

    ``block_counts`` maps block id to execution count (an ExecutionLog's
    ``block_counts``); unknown block ids are an error.
    """
    totals = {op: 0 for op in dictionary.op_universe}
    for bid, executed in block_counts.items():
        if bid not in dictionary.counts:
            raise BlockError(f"unknown block id in log: {bid}")
        for op, occurrences in dictionary.counts[bid].items():
            totals[op] += executed * occurrences
    return totals


def dictionary_to_json(dictionary: OperationDictionary) -> str:
    return json.dumps(dictionary.to_json_data(), indent=2, sort_keys=True) + "\n"
