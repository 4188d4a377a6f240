"""Validity-based and quality-based generalization metrics and the two
evaluation tracks.

Track T1 spends a fixed query budget Q. Track T2 keeps sampling until it has
collected Q_u unique, unseen, valid strings (or runs out of draws) and scores
only those.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bitspace import TrainingSet, bits_to_codes, codes_costs, valid_codes_mask

Sampler = Callable[[int], np.ndarray]
"""``sampler(n)`` returns an ``(n, n_var)`` array of 0/1 bits."""

REPORT_KEYS = (
    "track", "epoch", "model", "seed", "E", "R", "R_norm", "F", "C", "C_norm",
    "Cq", "MV", "U", "Q", "Q_u_reached", "draws_used",
)


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class QueryBatch:
    codes: np.ndarray
    n_var: int
    model: str | None = None
    epoch: int | None = None

    @classmethod
    def from_bits(cls, bits: np.ndarray, **kw) -> "QueryBatch":
        bits = np.asarray(bits)
        return cls(bits_to_codes(bits) if len(bits) else np.zeros(0, np.int64), bits.shape[-1], **kw)

    @property
    def size(self) -> int:
        return len(self.codes)


@dataclass(frozen=True)
class PartitionedQueries:
    g_new: np.ndarray
    g_sol: np.ndarray
    g_sol_unique: np.ndarray
    q_u_reached: int | None = None


@dataclass
class MetricsReport:
    track: str
    E: float | None = None
    R: float | None = None
    R_norm: float | None = None
    F: float | None = None
    C: float | None = None
    C_norm: float | None = None
    Cq: float | None = None
    MV: int | None = None
    U: float | None = None
    Q: int | None = None
    Q_u_reached: int | None = None
    draws_used: int | None = None
    epoch: int | None = None
    model: str | None = None
    seed: int | None = None
    denominators: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for key in REPORT_KEYS:
            value = getattr(self, key)
            if isinstance(value, np.generic):
                value = value.item()
            out[key] = value
        return out


def partition(queries: QueryBatch, train: TrainingSet) -> PartitionedQueries:
    if queries.size and queries.n_var != train.n_var:
        raise ValueError(f"query length {queries.n_var} != training n_var {train.n_var}")
    codes = np.asarray(queries.codes, dtype=np.int64)
    g_new = codes[~train.contains_codes(codes)]
    g_sol = g_new[valid_codes_mask(g_new)]
    _, first = np.unique(g_sol, return_index=True)
    return PartitionedQueries(g_new, g_sol, g_sol[np.sort(first)])


def validity_metrics(p: PartitionedQueries, Q: int, epsilon: float, s_size: int):
    """Return ``(E, R, R_norm, F, C, C_norm)``; F is None when nothing is unseen."""
    if Q <= 0:
        raise ValueError("Q must be positive")
    n_new, n_sol, n_unique = len(p.g_new), len(p.g_sol), len(p.g_sol_unique)
    E = n_new / Q
    R = n_sol / Q
    R_norm = R / (1 - epsilon)
    F = n_sol / n_new if n_new else None
    unseen_valid = s_size * (1 - epsilon)
    C = n_unique / unseen_valid
    C_norm = C / (1 - (1 - 1 / unseen_valid) ** Q)
    return E, R, R_norm, F, C, C_norm


def quality_metrics(codes: np.ndarray, costs: np.ndarray, denominator: int, min_train_cost: int):
    """Return ``(Cq, MV, U)`` over a multiset of (string, cost) pairs.

    U averages the ``max(1, floor(0.05 n))`` lowest costs. Cq counts distinct
    strings cheaper than the training minimum.
    """
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    costs = np.asarray(costs)
    if costs.size == 0:
        return None, None, None
    k = max(1, int(math.floor(0.05 * costs.size)))
    lowest = np.sort(costs, kind="stable")[:k]
    below = np.unique(np.asarray(codes)[costs < min_train_cost])
    return len(below) / denominator, int(lowest[0]), float(lowest.mean())


def _draw(sampler: Sampler, n: int, n_var: int) -> np.ndarray:
    try:
        bits = np.asarray(sampler(n))
    except Exception as exc:
        raise SamplerError(f"sampler failed while drawing {n} queries: {exc}") from exc
    if bits.shape != (n, n_var):
        raise SamplerError(f"sampler returned shape {bits.shape}, expected {(n, n_var)}")
    return bits


def run_track1(sampler: Sampler, train: TrainingSet, Q: int = 10_000) -> MetricsReport:
    if Q < 1:
        raise ValueError("Q must be at least 1")
    batch = QueryBatch.from_bits(_draw(sampler, Q, train.n_var))
    return track1_report(batch, train)


def track1_report(batch: QueryBatch, train: TrainingSet) -> MetricsReport:
    p = partition(batch, train)
    Q = batch.size
    E, R, R_norm, F, C, C_norm = validity_metrics(p, Q, train.epsilon, 2 ** (train.n_var - 1))
    sol_costs = codes_costs(p.g_sol, train.n_var)
    Cq, MV, U = quality_metrics(p.g_sol, sol_costs, Q, train.min_cost)
    return MetricsReport(
        "T1", E, R, R_norm, F, C, C_norm, Cq, MV, U, Q=Q, draws_used=Q,
        model=batch.model, epoch=batch.epoch,
        denominators={"Q": Q, "G_new": len(p.g_new), "G_sol": len(p.g_sol),
                      "g_sol": len(p.g_sol_unique)},
    )


def run_track2(
    sampler: Sampler,
    train: TrainingSet,
    q_u_target: float = 100,
    draw_cap: int = 10_000,
    batch_size: int = 1_000,
) -> MetricsReport:
    """Collect unique unseen valid strings batch by batch.

    ``q_u_target`` may be ``math.inf`` to exhaust the draw cap.
    """
    if q_u_target < 1:
        raise ValueError("q_u_target must be at least 1")
    if draw_cap < batch_size:
        raise ValueError(f"draw_cap {draw_cap} is smaller than the batch size {batch_size}")
    collected: list[int] = []
    seen: set[int] = set()
    drawn = 0
    while len(collected) < q_u_target and drawn < draw_cap:
        n = min(batch_size, draw_cap - drawn)
        batch = QueryBatch.from_bits(_draw(sampler, n, train.n_var))
        drawn += n
        for code in partition(batch, train).g_sol.tolist():
            if code not in seen:
                seen.add(code)
                collected.append(code)
                if len(collected) >= q_u_target:
                    break
    return track2_report(np.asarray(collected, dtype=np.int64), train, drawn)


def track2_report(unique_codes: np.ndarray, train: TrainingSet, draws_used: int) -> MetricsReport:
    reached = len(unique_codes)
    if reached:
        Cq, MV, U = quality_metrics(unique_codes, codes_costs(unique_codes, train.n_var),
                                    reached, train.min_cost)
    else:
        Cq = MV = U = None
    return MetricsReport(
        "T2", Cq=Cq, MV=MV, U=U, Q_u_reached=reached, draws_used=draws_used,
        denominators={"Q_u_reached": reached},
    )
