"""Synthetic power bench.

Converts an execution log into a sampled power trace whose integral equals
``idle_power * duration + sum(cost[op] * N_e[op])`` for a ground-truth cost
table.  Power is emitted as a constant (hence piecewise-constant) trace
aligned to sample boundaries, so the noise-free right-Riemann integral
reproduces the modeled energy exactly; realism in the time domain adds no
testable content since the cost model only constrains totals.

Multiplicative Gaussian noise (sigma relative, seeded) models sensor
variability; the default 30 Hz sample rate mirrors the hardware class the
bench stands in for and is configurable.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from random import Random
from typing import Optional

from . import ops as ops_mod
from .blocks import OperationDictionary, total_op_counts
from .interp import ExecutionLog


class SimError(Exception):
    pass


# --- ground-truth cost table -------------------------------------------------

# Anchored single-operation costs (microjoules).  MethodInvocation must stay
# the strict maximum of the table.
_FIXED_COSTS_UJ = {
    "MethodInvocation": 9.5,
    "BlockGoto_if": 6.7,
    "BlockGoto_for": 4.1,
    "BlockGoto_while": 1.1,
    "BlockGoto_switch": 2.3,
    "Declaration_Object": 2.97,
    "FieldReference": 0.35,
    "ArrayReference": 1.8,
    "Assign_int_int": 2.2,
    "Less_int_int": 1.4,
    "Addition_int_int": 1.1,
    "Library_list_get": 1.6,
    "Library_list_size": 1.4,
    "Library_buffer_put": 2.4,
    "Library_buffer_bulk_put": 5.5,
    "Library_math_sqrt": 3.2,
    "Library_math_sin": 3.4,
}

# Per-category base cost plus a small deterministic spread by position.
_CATEGORY_BASE_UJ = {
    "Arithmetic": 0.9,
    "Boolean": 0.5,
    "Comparison": 1.2,
    "Bitwise": 0.6,
    "Reference": 1.0,
    "Function": 1.3,
    "Control": 2.0,
    "Assign": 1.9,
    "Declaration": 0.9,
    "Conversion": 0.7,
    "Library": 2.0,
}


@dataclass
class CostTable:
    cost_uJ: dict[str, float]
    idle_power_W: float = 0.5

    def validate(self) -> None:
        mi = self.cost_uJ.get("MethodInvocation")
        if mi is None:
            raise SimError("cost table lacks MethodInvocation")
        for op, cost in self.cost_uJ.items():
            if cost < 0:
                raise SimError(f"negative cost for {op}")
            if op != "MethodInvocation" and cost >= mi:
                raise SimError(f"MethodInvocation must be the strict maximum "
                               f"(violated by {op} = {cost})")
        if self.idle_power_W < 0:
            raise SimError("negative idle power")

    def to_json(self) -> str:
        return json.dumps({"cost_uJ": dict(sorted(self.cost_uJ.items())),
                           "idle_power_W": self.idle_power_W},
                          indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "CostTable":
        data = json.loads(text)
        table = CostTable(dict(data["cost_uJ"]), data["idle_power_W"])
        table.validate()
        return table


def default_cost_table(idle_power_W: float = 0.5) -> CostTable:
    """Seeded ground-truth table over the full operation universe."""
    costs: dict[str, float] = {}
    per_category_index: dict[str, int] = {}
    for op in ops_mod.UNIVERSE:
        if op.name in _FIXED_COSTS_UJ:
            costs[op.name] = _FIXED_COSTS_UJ[op.name]
            continue
        i = per_category_index.get(op.category, 0)
        per_category_index[op.category] = i + 1
        costs[op.name] = round(_CATEGORY_BASE_UJ[op.category] + 0.07 * i, 4)
    table = CostTable(costs, idle_power_W)
    table.validate()
    return table


# --- traces -----------------------------------------------------------------


@dataclass
class SimConfig:
    sample_rate_Hz: float = 30.0
    noise: str = "none"  # "none" | "multiplicative-gaussian"
    sigma_rel: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.sample_rate_Hz <= 0:
            raise SimError("sample rate must be positive")
        if self.sigma_rel < 0:
            raise SimError("sigma_rel must be non-negative")
        if self.noise not in ("none", "multiplicative-gaussian"):
            raise SimError(f"unknown noise model {self.noise!r}")


@dataclass
class PowerTrace:
    samples: list[tuple[float, float]]  # (t_s, power_W), strictly increasing t

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["t_s", "power_w"])
        for t, p in self.samples:
            writer.writerow([repr(t), repr(p)])
        return buf.getvalue()

    @staticmethod
    def from_csv_text(text: str) -> "PowerTrace":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        if header[:2] != ["t_s", "power_w"]:
            raise SimError("trace CSV must start with header t_s,power_w")
        return PowerTrace([(float(t), float(p)) for t, p in reader])


def _timestamps(duration_s: float, rate_Hz: float) -> list[float]:
    """Sample times 0 = t_0 < t_1 < ... < t_n = duration."""
    n = max(2, int(round(duration_s * rate_Hz)))
    times = [0.0]
    times += [i * duration_s / n for i in range(1, n)]
    times.append(duration_s)
    return times


def _constant_trace(power_W: float, duration_s: float,
                    cfg: SimConfig) -> PowerTrace:
    cfg.validate()
    if duration_s <= 0:
        raise SimError("trace duration must be positive")
    times = _timestamps(duration_s, cfg.sample_rate_Hz)
    if cfg.noise == "none" or cfg.sigma_rel == 0.0:
        return PowerTrace([(t, power_W) for t in times])
    rng = Random(f"trace:{cfg.seed}")
    return PowerTrace([(t, max(0.0, power_W * rng.gauss(1.0, cfg.sigma_rel)))
                       for t in times])


def modeled_energy_J(op_counts: dict[str, int], table: CostTable) -> float:
    """Application energy sum(cost_uJ[op] * N_e[op]), in joules."""
    total_uJ = 0.0
    for op, n in op_counts.items():
        if n == 0:
            continue
        if op not in table.cost_uJ:
            raise SimError(f"cost table lacks operation {op}")
        total_uJ += table.cost_uJ[op] * n
    return total_uJ * 1e-6


def simulate_power(log: ExecutionLog, dictionary: OperationDictionary,
                   table: CostTable, cfg: Optional[SimConfig] = None
                   ) -> PowerTrace:
    """Power trace for one executed case.

    Noise-free, ``integrate(trace) == idle * duration + modeled energy``
    exactly (constant power, final timestamp equal to the duration)."""
    cfg = cfg or SimConfig()
    if log.failed:
        raise SimError(f"cannot simulate a failed log ({log.failure})")
    if log.duration_s <= 0:
        raise SimError("zero-duration log")
    counts = total_op_counts(log.block_counts, dictionary)
    energy_J = modeled_energy_J(counts, table)
    power = table.idle_power_W + energy_J / log.duration_s
    return _constant_trace(power, log.duration_s, cfg)


def simulate_idle(duration_s: float, table: CostTable,
                  cfg: Optional[SimConfig] = None) -> PowerTrace:
    """Baseline trace of the bench running no application."""
    cfg = cfg or SimConfig()
    return _constant_trace(table.idle_power_W, duration_s, cfg)
