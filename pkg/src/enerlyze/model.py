"""Operation-cost model: regression over execution cases plus validation.

The cost vector solves ``min ||N c - e||^2 s.t. c >= 0`` where row i of N
holds the per-case operation execution counts and e the measured net
energies.  The solver is projected gradient descent with a fixed 1/L step
on max-scaled columns and seeded multi-restart, followed by a
non-negativity-preserving least-squares polish on the active support; costs
are physically non-negative, so the constraint is part of the model, not a
regularizer.

Validation is k-fold cross-validation (random even split, seeded) scored
with NMAE ``mean(|(pred - meas) / meas|)`` and the sample Pearson
correlation; model acceptance requires ``1 - NMAE`` (accuracy) to clear a
threshold on every fold, train and validation alike.

Operations whose count columns are almost perfectly correlated (above a
configurable threshold, default 0.97) cannot be separated by any solver;
they are reported as groups whose summed cost (weighted by the observed
count ratios) is the identifiable quantity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class ModelError(Exception):
    pass


# --- dataset ---------------------------------------------------------------


@dataclass
class DatasetRow:
    case_id: str
    op_counts: dict[str, int]
    net_J: float


@dataclass
class Dataset:
    op_universe: tuple[str, ...]
    rows: list[DatasetRow]

    def to_json(self) -> str:
        return json.dumps({
            "op_universe": list(self.op_universe),
            "rows": [{"case_id": r.case_id,
                      "op_counts": {k: v for k, v in sorted(r.op_counts.items())
                                    if v},
                      "net_J": r.net_J} for r in self.rows],
        }, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "Dataset":
        data = json.loads(text)
        universe = tuple(data["op_universe"])
        rows = [DatasetRow(r["case_id"],
                           {op: r["op_counts"].get(op, 0) for op in universe},
                           r["net_J"]) for r in data["rows"]]
        return Dataset(universe, rows)


def assemble(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix N (cases x ops) and target energies e.

    All-zero columns (operations never executed) are retained; their costs
    are unidentifiable and reported as such by :func:`detect_groups`.
    """
    if not dataset.rows:
        raise ModelError("empty dataset")
    m, l = len(dataset.rows), len(dataset.op_universe)
    N = np.zeros((m, l), dtype=float)
    e = np.zeros(m, dtype=float)
    for i, row in enumerate(dataset.rows):
        for op, count in row.op_counts.items():
            if op not in dataset.op_universe:
                raise ModelError(f"row {row.case_id}: operation {op} outside "
                                 "the dataset universe")
        for j, op in enumerate(dataset.op_universe):
            N[i, j] = row.op_counts.get(op, 0)
        if not np.isfinite(row.net_J):
            raise ModelError(f"row {row.case_id}: non-finite energy")
        e[i] = row.net_J
    return N, e


# --- solver -----------------------------------------------------------------


@dataclass
class FitConfig:
    step: Optional[float] = None  # None -> 1/L from the scaled Gram matrix
    max_iterations: int = 20000
    tolerance: float = 1e-14  # relative objective decrease per iteration
    restarts: int = 5
    seed: int = 0
    polish: bool = True


@dataclass
class FitResult:
    cost: np.ndarray  # per-op cost in the units of e per count
    iterations: int
    residual: float  # ||N c - e||
    converged: bool


def _project(c: np.ndarray) -> np.ndarray:
    return np.maximum(c, 0.0)


def _pgd(Ns: np.ndarray, e: np.ndarray, c0: np.ndarray, step: float,
         config: FitConfig) -> tuple[np.ndarray, int, bool]:
    c = _project(c0.copy())
    obj = float(np.sum((Ns @ c - e) ** 2))
    for it in range(1, config.max_iterations + 1):
        grad = 2.0 * (Ns.T @ (Ns @ c - e))
        c = _project(c - step * grad)
        new_obj = float(np.sum((Ns @ c - e) ** 2))
        if abs(obj - new_obj) <= config.tolerance * max(obj, 1e-30):
            return c, it, True
        obj = new_obj
    return c, config.max_iterations, False


def _polish(Ns: np.ndarray, e: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Least-squares refit on the positive support, dropping any entry the
    refit would drive negative.  Keeps feasibility and never worsens the
    objective (the polished iterate is only accepted when it does not)."""
    support = np.flatnonzero(c > 0)
    for _ in range(len(c) + 1):
        if support.size == 0:
            break
        sol, *_ = np.linalg.lstsq(Ns[:, support], e, rcond=None)
        if np.all(sol >= 0):
            polished = np.zeros_like(c)
            polished[support] = sol
            return polished
        support = support[sol >= 0]
    return c


def fit(N: np.ndarray, e: np.ndarray,
        config: Optional[FitConfig] = None) -> FitResult:
    """Non-negative least squares via projected gradient, multi-restart."""
    config = config or FitConfig()
    N = np.asarray(N, dtype=float)
    e = np.asarray(e, dtype=float)
    if N.ndim != 2 or N.shape[0] != e.shape[0]:
        raise ModelError("design matrix and target sizes do not match")
    if N.shape[0] < 1:
        raise ModelError("need at least one case")

    scale = N.max(axis=0)
    scale[scale == 0] = 1.0
    Ns = N / scale

    gram = Ns.T @ Ns
    lam_max = float(np.max(np.linalg.eigvalsh(gram))) if gram.size else 1.0
    step = config.step if config.step is not None else 1.0 / max(2.0 * lam_max,
                                                                 1e-12)

    rng = np.random.default_rng(config.seed)
    init_scale = float(np.abs(e).max() / max(Ns.sum(axis=1).max(), 1.0)) or 1.0
    best: Optional[tuple[float, np.ndarray, int, bool]] = None
    for restart in range(max(1, config.restarts)):
        if restart == 0:
            c0 = np.zeros(Ns.shape[1])
        else:
            c0 = rng.uniform(0.0, init_scale, size=Ns.shape[1])
        c, iters, converged = _pgd(Ns, e, c0, step, config)
        if config.polish:
            polished = _polish(Ns, e, c)
            if np.sum((Ns @ polished - e) ** 2) <= np.sum((Ns @ c - e) ** 2):
                c = polished
        obj = float(np.sum((Ns @ c - e) ** 2))
        if best is None or obj < best[0] - 1e-15 * max(best[0], 1.0):
            best = (obj, c, iters, converged)

    obj, c, iters, converged = best
    cost = c / scale
    return FitResult(cost=cost, iterations=iters,
                     residual=float(np.sqrt(obj)), converged=converged)


# --- metrics -----------------------------------------------------------------


def nmae(pred, meas) -> float:
    """Normalized mean absolute error mean(|(pred - meas) / meas|)."""
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape or pred.size == 0:
        raise ModelError("prediction and measurement sizes must match")
    if np.any(meas == 0):
        raise ModelError("NMAE undefined for zero measurements")
    return float(np.mean(np.abs((pred - meas) / meas)))


def pearson_r(pred, meas) -> float:
    """Sample Pearson correlation coefficient."""
    pred = np.asarray(pred, dtype=float)
    meas = np.asarray(meas, dtype=float)
    if pred.shape != meas.shape or pred.size < 2:
        raise ModelError("pearson_r needs two equally sized samples of n >= 2")
    dp = pred - pred.mean()
    dm = meas - meas.mean()
    denom = np.sqrt(np.sum(dp ** 2) * np.sum(dm ** 2))
    if denom == 0:
        raise ModelError("pearson_r undefined for zero variance")
    return float(np.sum(dp * dm) / denom)


# --- collinear groups ---------------------------------------------------------


@dataclass
class OpGroup:
    ops: list[str]  # sorted member names; reference op first by convention
    reference: str
    count_ratios: dict[str, float]  # member -> mean count ratio vs reference
    identifiable_sum_uJ: Optional[float] = None

    def to_json_data(self) -> dict:
        return {
            "ops": list(self.ops),
            "reference": self.reference,
            "count_ratios": dict(sorted(self.count_ratios.items())),
            "identifiable_sum_uJ": self.identifiable_sum_uJ,
        }


def detect_groups(N: np.ndarray, op_universe: tuple[str, ...],
                  threshold: float = 0.97) -> tuple[list[OpGroup], list[str]]:
    """Collinear operation groups and never-executed (unidentifiable) ops.

    Columns with pairwise Pearson correlation above ``threshold`` are
    grouped (union-find); within a group only the ratio-weighted cost sum is
    identifiable.  Zero columns are returned separately.
    """
    N = np.asarray(N, dtype=float)
    l = N.shape[1]
    zero_ops = [op_universe[j] for j in range(l) if not np.any(N[:, j])]
    active = [j for j in range(l) if np.any(N[:, j])]

    parent = list(range(l))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    cols = N[:, active]
    std = cols.std(axis=0)
    for ai in range(len(active)):
        for bi in range(ai + 1, len(active)):
            a, b = active[ai], active[bi]
            if std[ai] == 0 or std[bi] == 0:
                # constant nonzero columns are mutually indistinguishable
                if std[ai] == 0 and std[bi] == 0:
                    union(a, b)
                continue
            ca = cols[:, ai] - cols[:, ai].mean()
            cb = cols[:, bi] - cols[:, bi].mean()
            corr = float(np.dot(ca, cb) / (np.linalg.norm(ca)
                                           * np.linalg.norm(cb)))
            if corr > threshold:
                union(a, b)

    clusters: dict[int, list[int]] = {}
    for j in active:
        clusters.setdefault(find(j), []).append(j)

    groups = []
    for members in clusters.values():
        if len(members) < 2:
            continue
        sums = {j: float(N[:, j].sum()) for j in members}
        ref = max(members, key=lambda j: sums[j])
        ref_col = N[:, ref]
        ratios = {}
        for j in members:
            denom = float(ref_col @ ref_col)
            ratios[op_universe[j]] = float((N[:, j] @ ref_col) / denom)
        groups.append(OpGroup(
            ops=sorted(op_universe[j] for j in members),
            reference=op_universe[ref],
            count_ratios=ratios,
        ))
    groups.sort(key=lambda g: g.reference)
    return groups, zero_ops


# --- cross-validation ----------------------------------------------------------


@dataclass
class FoldMetrics:
    fold_index: int
    r_train: float
    r_valid: float
    nmae_train: float
    nmae_valid: float

    def to_json_data(self) -> dict:
        return {"fold_index": self.fold_index,
                "r_train": self.r_train, "r_valid": self.r_valid,
                "nmae_train": self.nmae_train, "nmae_valid": self.nmae_valid}


@dataclass
class FoldResult:
    metrics: FoldMetrics
    cost: np.ndarray


def cross_validate(dataset: Dataset, k: int = 4, seed: int = 0,
                   fit_config: Optional[FitConfig] = None) -> list[FoldResult]:
    """k rounds over a random even split; each row validates exactly once."""
    m = len(dataset.rows)
    if m < k:
        raise ModelError(f"need at least {k} cases for {k}-fold validation")
    N, e = assemble(dataset)
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    folds = [sorted(order[i::k].tolist()) for i in range(k)]

    results = []
    for fold_index, valid_idx in enumerate(folds):
        valid = np.array(valid_idx, dtype=int)
        train = np.array([i for i in range(m) if i not in set(valid_idx)],
                         dtype=int)
        cfg = fit_config or FitConfig()
        result = fit(N[train], e[train], cfg)
        pred_train = N[train] @ result.cost
        pred_valid = N[valid] @ result.cost
        metrics = FoldMetrics(
            fold_index=fold_index,
            r_train=pearson_r(pred_train, e[train]),
            r_valid=pearson_r(pred_valid, e[valid]),
            nmae_train=nmae(pred_train, e[train]),
            nmae_valid=nmae(pred_valid, e[valid]),
        )
        results.append(FoldResult(metrics, result.cost))
    return results


# --- the model ------------------------------------------------------------------


@dataclass
class EnergyModel:
    op_universe: tuple[str, ...]
    cost_uJ_hat: dict[str, float]
    accepted: bool
    folds: list[FoldMetrics] = field(default_factory=list)
    groups: list[OpGroup] = field(default_factory=list)
    unidentifiable: list[str] = field(default_factory=list)
    seed: int = 0
    threshold: float = 0.85
    fit_meta: dict = field(default_factory=dict)

    def cost_J(self, op: str) -> float:
        return self.cost_uJ_hat[op] * 1e-6

    def predict_J(self, op_counts: dict[str, int]) -> float:
        total = 0.0
        for op, count in op_counts.items():
            if count:
                total += self.cost_uJ_hat[op] * count
        return total * 1e-6

    def to_json(self) -> str:
        return json.dumps({
            "cost_uJ_hat": dict(sorted(self.cost_uJ_hat.items())),
            "accepted": self.accepted,
            "folds": [f.to_json_data() for f in self.folds],
            "groups": [g.to_json_data() for g in self.groups],
            "unidentifiable": sorted(self.unidentifiable),
            "seed": self.seed,
            "threshold": self.threshold,
            "solver": self.fit_meta,
            "op_universe": list(self.op_universe),
        }, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "EnergyModel":
        data = json.loads(text)
        return EnergyModel(
            op_universe=tuple(data["op_universe"]),
            cost_uJ_hat=dict(data["cost_uJ_hat"]),
            accepted=data["accepted"],
            folds=[FoldMetrics(**f) for f in data["folds"]],
            groups=[OpGroup(ops=g["ops"], reference=g["reference"],
                            count_ratios=g["count_ratios"],
                            identifiable_sum_uJ=g.get("identifiable_sum_uJ"))
                    for g in data["groups"]],
            unidentifiable=list(data.get("unidentifiable", ())),
            seed=data.get("seed", 0),
            threshold=data.get("threshold", 0.85),
            fit_meta=data.get("solver", {}),
        )


def accuracy(fold: FoldMetrics) -> float:
    """Worst-side accuracy of a fold: 1 - max(train, valid) NMAE."""
    return 1.0 - max(fold.nmae_train, fold.nmae_valid)


def select_model(dataset: Dataset, fold_results: list[FoldResult],
                 threshold: float = 0.85, seed: int = 0,
                 group_threshold: float = 0.97,
                 fit_config: Optional[FitConfig] = None) -> EnergyModel:
    """Accept or reject the cross-validated model.

    Accepted iff every fold's training and validation accuracy (1 - NMAE)
    reaches the threshold; the returned costs come from the fold with the
    best validation accuracy.  Rejection is a value: the model is still
    returned, with ``accepted`` False.
    """
    if not fold_results:
        raise ModelError("no folds to select from")
    folds = [fr.metrics for fr in fold_results]
    accepted = all(accuracy(f) >= threshold for f in folds)
    best = max(fold_results, key=lambda fr: (1.0 - fr.metrics.nmae_valid,
                                             -fr.metrics.fold_index))
    N, _ = assemble(dataset)
    groups, zero_ops = detect_groups(N, dataset.op_universe, group_threshold)
    cost_uJ = {op: float(best.cost[j]) * 1e6
               for j, op in enumerate(dataset.op_universe)}
    for group in groups:
        group.identifiable_sum_uJ = sum(
            group.count_ratios[op] * cost_uJ[op] for op in group.ops)
    cfg = fit_config or FitConfig()
    return EnergyModel(
        op_universe=dataset.op_universe,
        cost_uJ_hat=cost_uJ,
        accepted=accepted,
        folds=folds,
        groups=groups,
        unidentifiable=zero_ops,
        seed=seed,
        threshold=threshold,
        fit_meta={"solver": "projected-gradient+support-polish",
                  "restarts": cfg.restarts,
                  "max_iterations": cfg.max_iterations,
                  "tolerance": cfg.tolerance},
    )


def model_from_cost_table(table, op_universe: Optional[tuple[str, ...]] = None
                          ) -> EnergyModel:
    """Wrap a ground-truth cost table as an accepted model (for accounting
    against known costs and for tests)."""
    from . import ops as ops_mod
    universe = op_universe or ops_mod.OP_NAMES
    return EnergyModel(
        op_universe=tuple(universe),
        cost_uJ_hat={op: table.cost_uJ[op] for op in universe},
        accepted=True,
        fit_meta={"solver": "ground-truth"},
    )
