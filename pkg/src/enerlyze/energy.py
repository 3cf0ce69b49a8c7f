"""Energy from power traces, replicate statistics and idle subtraction.

``integrate`` is the right-Riemann sum sum_{i=1..n} power(t_i) * (t_i -
t_{i-1}) -- deliberately not trapezoidal, for bit-compatibility with the
sampling formula the tooling is built around; the simulator emits
piecewise-constant traces aligned to sample boundaries, so no bias arises
in-toolchain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .device_sim import PowerTrace


class EnergyError(Exception):
    pass


def integrate(trace: PowerTrace) -> float:
    """Right-Riemann energy of a trace, in joules."""
    samples = trace.samples
    if len(samples) < 2:
        raise EnergyError("need at least two samples")
    total = 0.0
    prev_t = samples[0][0]
    for t, power in samples[1:]:
        if t <= prev_t:
            raise EnergyError(f"non-monotonic timestamps at t={t!r}")
        total += power * (t - prev_t)
        prev_t = t
    return total


@dataclass
class ReplicateStats:
    mean_J: float
    std_J: float
    cv: float
    n: int


def replicate_stats(energies: list[float]) -> ReplicateStats:
    """Sample statistics over replicate energies (n-1 denominator; cv = std/mean)."""
    n = len(energies)
    if n < 1:
        raise EnergyError("need at least one replicate")
    mean = sum(energies) / n
    if n == 1:
        std = 0.0
    else:
        std = math.sqrt(sum((e - mean) ** 2 for e in energies) / (n - 1))
    if mean <= 0:
        raise EnergyError("cv undefined for non-positive mean energy")
    return ReplicateStats(mean, std, std / mean, n)


@dataclass
class CaseEnergy:
    case_id: str
    gross_J: float
    idle_J: float
    net_J: float
    stats: ReplicateStats

    def to_json_data(self) -> dict:
        return {
            "case_id": self.case_id,
            "gross_J": self.gross_J,
            "idle_J": self.idle_J,
            "net_J": self.net_J,
            "cv": self.stats.cv,
            "replicates": self.stats.n,
        }


def net_energy(case_id: str, case_traces: list[PowerTrace],
               idle_traces: list[PowerTrace],
               scale_idle: bool = True,
               duration_tolerance: float = 0.01) -> CaseEnergy:
    """Net application energy: mean gross minus mean idle.

    Idle traces measured over a different duration are scaled by the
    duration ratio when ``scale_idle`` is set; otherwise the durations must
    agree within ``duration_tolerance``.
    """
    if not case_traces or not idle_traces:
        raise EnergyError("need at least one case trace and one idle trace")
    case_duration = case_traces[0].samples[-1][0]
    grosses = [integrate(t) for t in case_traces]
    idles = []
    for trace in idle_traces:
        idle_duration = trace.samples[-1][0]
        energy = integrate(trace)
        if abs(idle_duration - case_duration) > duration_tolerance * case_duration:
            if not scale_idle:
                raise EnergyError(
                    f"idle duration {idle_duration} does not match case "
                    f"duration {case_duration} and scaling is disabled")
            energy *= case_duration / idle_duration
        idles.append(energy)
    stats = replicate_stats(grosses)
    gross = stats.mean_J
    idle = sum(idles) / len(idles)
    return CaseEnergy(case_id, gross, idle, gross - idle, stats)


def case_energies_to_json(entries: list[CaseEnergy]) -> str:
    return json.dumps([e.to_json_data() for e in entries], indent=2,
                      sort_keys=True) + "\n"
