"""Energy accounting: per-block profiles, operation ranking, shares.

A profile itemizes one executed case: block cost = sum over ops of
B[i] * O[i,j] * cost_hat[j], with per-operation and per-reporting-group
breakdowns.  Collinear operation groups from the model are only
identifiable as sums; the human-readable report renders them as a single
pseudo-operation rather than fabricating a per-member split (the JSON keeps
per-op keys, whose within-group split is arbitrary but whose block totals
are exact).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

from . import ops as ops_mod
from .blocks import OperationDictionary
from .interp import ExecutionLog
from .model import EnergyModel


class AccountingError(Exception):
    pass


@dataclass
class BlockProfile:
    block_id: str
    cost_J: float
    op_costs: dict[str, float]

    def group_costs(self) -> dict[str, float]:
        groups = {g: 0.0 for g in ops_mod.DISPLAY_GROUPS}
        for op, cost in self.op_costs.items():
            groups[ops_mod.display_group(op)] += cost
        return groups


@dataclass
class EnergyProfile:
    case_id: str
    blocks: list[BlockProfile]
    total_J: float
    model_groups: list = field(default_factory=list)

    def block(self, block_id: str) -> BlockProfile:
        for b in self.blocks:
            if b.block_id == block_id:
                return b
        raise KeyError(block_id)

    def ranked_blocks(self) -> list[BlockProfile]:
        return sorted(self.blocks, key=lambda b: (-b.cost_J, b.block_id))

    def to_json_data(self) -> dict:
        return {
            "case_id": self.case_id,
            "total_J": self.total_J,
            "blocks": [{"id": b.block_id, "cost_J": b.cost_J,
                        "op_costs": {k: v for k, v in sorted(b.op_costs.items())
                                     if v}}
                       for b in self.ranked_blocks()],
            "group_view": {b.block_id: {g: c for g, c
                                        in sorted(b.group_costs().items()) if c}
                           for b in self.blocks},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_data(), indent=2, sort_keys=True) + "\n"


def block_profiles(log: ExecutionLog, dictionary: OperationDictionary,
                   model: EnergyModel,
                   allow_unaccepted: bool = False) -> EnergyProfile:
    """Profile one executed case with a fitted (accepted) model."""
    if not model.accepted and not allow_unaccepted:
        raise AccountingError("model was rejected; refusing to account with it")
    if log.failed:
        raise AccountingError(f"cannot profile a failed log ({log.failure})")
    missing = sorted(
        {op for row in dictionary.counts.values() for op in row}
        - set(model.cost_uJ_hat))
    if missing:
        raise AccountingError("model lacks costs for operations: "
                              + ", ".join(missing))
    blocks = []
    total = 0.0
    for block_id, executed in sorted(log.block_counts.items()):
        if block_id not in dictionary.counts:
            raise AccountingError(f"unknown block id in log: {block_id}")
        op_costs = {}
        for op, occurrences in dictionary.counts[block_id].items():
            op_costs[op] = executed * occurrences * model.cost_J(op)
        cost = sum(op_costs.values())
        total += cost
        blocks.append(BlockProfile(block_id, cost, op_costs))
    return EnergyProfile(log.case_id, blocks, total,
                         model_groups=list(model.groups))


def rank_operations(model: EnergyModel) -> list[tuple[str, float]]:
    """Operations by single-execution cost, descending; ties by name."""
    if not model.accepted:
        raise AccountingError("model was rejected; refusing to rank with it")
    return sorted(model.cost_uJ_hat.items(), key=lambda kv: (-kv[1], kv[0]))


Selector = Union[str, Iterable[str], Callable[[str], bool]]


def _select(blocks: list[BlockProfile], selector: Selector
            ) -> list[BlockProfile]:
    if callable(selector):
        return [b for b in blocks if selector(b.block_id)]
    if isinstance(selector, str):
        prefix = selector
        return [b for b in blocks
                if b.block_id == prefix or b.block_id.startswith(prefix + ".")]
    wanted = set(selector)
    return [b for b in blocks if b.block_id in wanted]


def share_of_total(profile: EnergyProfile, selector: Selector) -> float:
    """Fraction of the profile total held by the selected blocks.

    ``selector`` is a block-id prefix (selecting the whole region under a
    hierarchical id), an iterable of ids, or a predicate."""
    if profile.total_J <= 0:
        raise AccountingError("share undefined for zero total energy")
    selected = _select(profile.blocks, selector)
    return sum(b.cost_J for b in selected) / profile.total_J


def region_group_shares(profile: EnergyProfile, selector: Selector
                        ) -> dict[str, float]:
    """Reporting-group percentage split of the selected region's energy."""
    selected = _select(profile.blocks, selector)
    totals = {g: 0.0 for g in ops_mod.DISPLAY_GROUPS}
    for b in selected:
        for g, c in b.group_costs().items():
            totals[g] += c
    region = sum(totals.values())
    if region <= 0:
        raise AccountingError("selected region has zero energy")
    return {g: 100.0 * c / region for g, c in totals.items()}


def markdown_report(profile: EnergyProfile, top: int = 10) -> str:
    """Human report: top blocks with per-group percentages, one decimal."""
    lines = [
        f"# Energy profile ({profile.case_id})",
        "",
        f"Total modeled energy: {profile.total_J * 1e3:.3f} mJ",
        "",
        "| Block | Cost (mJ) | " + " | ".join(ops_mod.DISPLAY_GROUPS) + " |",
        "|---" * (2 + len(ops_mod.DISPLAY_GROUPS)) + "|",
    ]
    for b in profile.ranked_blocks()[:top]:
        groups = b.group_costs()
        shares = []
        for g in ops_mod.DISPLAY_GROUPS:
            pct = 100.0 * groups[g] / b.cost_J if b.cost_J > 0 else 0.0
            shares.append(f"{pct:.1f}%")
        lines.append(f"| {b.block_id} | {b.cost_J * 1e3:.1f} | "
                     + " | ".join(shares) + " |")
    if profile.model_groups:
        lines.append("")
        lines.append("Collinear operation groups (only the sum is "
                     "identifiable; per-member splits are not available):")
        for g in profile.model_groups:
            members = "+".join(g.ops)
            if g.identifiable_sum_uJ is not None:
                lines.append(f"- {members}: {g.identifiable_sum_uJ:.3f} uJ "
                             f"per {g.reference} execution")
            else:
                lines.append(f"- {members}")
    return "\n".join(lines) + "\n"
