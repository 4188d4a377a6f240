"""Brute-force reference implementations for cross-checking.

Everything here works on plain Python strings and sets and imports nothing from
the modules it checks, so a bug would have to be made twice to go unnoticed.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

ORACLE_CAP = 16
COUNT_CAP = 24


def naive_cost(s: str) -> int:
    inner = s.strip("0")
    return -(max(len(run) for run in inner.split("1")) + 1)


def naive_valid(s: str) -> bool:
    return s.count("1") % 2 == 0


def naive_solution_space(n_var: int) -> list[str]:
    return ["".join(t) for t in itertools.product("01", repeat=n_var) if t.count("1") % 2 == 0]


def oracle_metrics(queries: list[str], train: list[str], n_var: int, epsilon: float) -> dict:
    """Every T1 metric recomputed by direct set operations over an enumerated S."""
    if n_var > ORACLE_CAP:
        raise ValueError(f"oracle limited to n_var <= {ORACLE_CAP}")
    space = set(naive_solution_space(n_var))
    train_set = set(train)
    Q = len(queries)
    out = dict.fromkeys(["E", "R", "R_norm", "F", "C", "C_norm", "Cq", "MV", "U"])
    out.update(Q=Q, G_new=0, G_sol=0, g_sol=0)
    if Q == 0:
        return out
    g_new = [q for q in queries if q not in train_set]
    g_sol = [q for q in g_new if q in space]
    unique = set(g_sol)
    out.update(G_new=len(g_new), G_sol=len(g_sol), g_sol=len(unique))
    out["E"] = len(g_new) / Q
    out["R"] = len(g_sol) / Q
    out["R_norm"] = out["R"] / (1 - epsilon)
    out["F"] = len(g_sol) / len(g_new) if g_new else None
    unseen_valid = len(space) * (1 - epsilon)
    out["C"] = len(unique) / unseen_valid
    out["C_norm"] = out["C"] / (1 - (1 - 1 / unseen_valid) ** Q)
    if g_sol:
        threshold = min(naive_cost(t) for t in train)
        costs = sorted(naive_cost(q) for q in g_sol)
        k = max(1, (5 * len(costs)) // 100)
        out["MV"] = costs[0]
        out["U"] = sum(costs[:k]) / k
        out["Cq"] = len({q for q in unique if naive_cost(q) < threshold}) / Q
    return out


def oracle_track2(stream: list[str], train: list[str], q_u_target: int) -> dict:
    """First ``q_u_target`` unique unseen valid strings of a stream, then scored."""
    train_set = set(train)
    picked: list[str] = []
    for s in stream:
        if len(picked) == q_u_target:
            break
        if s not in train_set and naive_valid(s) and s not in picked:
            picked.append(s)
    out = {"Q_u_reached": len(picked), "Cq": None, "MV": None, "U": None}
    if picked:
        threshold = min(naive_cost(t) for t in train)
        costs = sorted(naive_cost(s) for s in picked)
        k = max(1, (5 * len(costs)) // 100)
        out.update(
            MV=costs[0],
            U=sum(costs[:k]) / k,
            Cq=sum(1 for s in picked if naive_cost(s) < threshold) / len(picked),
        )
    return out


def count_quality_states(n_var: int, threshold: int) -> int:
    """Number of valid strings with cost strictly below ``threshold``."""
    if n_var > COUNT_CAP:
        raise ValueError(f"exhaustive count limited to n_var <= {COUNT_CAP}")
    total = 0
    for code in range(2**n_var):
        s = format(code, f"0{n_var}b")
        if s.count("1") % 2 == 0 and naive_cost(s) < threshold:
            total += 1
    return total


class ExactDistribution(dict):
    """Mapping bitstring -> probability over all ``2**n_var`` strings."""

    def total(self) -> float:
        return math.fsum(self.values())

    def as_array(self) -> np.ndarray:
        return np.array([self[k] for k in sorted(self)])


def exact_model_distribution(model, n_var: int) -> ExactDistribution:
    """Enumerate a model's distribution via ``born_probabilities`` or ``log_prob``."""
    if n_var > 10:
        raise ValueError("exact enumeration limited to n_var <= 10")
    strings = ["".join(t) for t in itertools.product("01", repeat=n_var)]
    if hasattr(model, "born_probabilities"):
        probs = np.asarray(model.born_probabilities())
        return ExactDistribution(zip(strings, probs.tolist()))
    if not getattr(model, "exact_log_prob", False):
        raise TypeError(f"{type(model).__name__} has no exact probability capability")
    bits = np.array([[int(ch) for ch in s] for s in strings], dtype=np.uint8)
    return ExactDistribution(zip(strings, np.exp(model.log_prob(bits)).tolist()))


def vae_marginal_by_quadrature(model, n_points: int = 60) -> ExactDistribution:
    """Decoder marginal ``p(x) = E_z p(x|z)`` by Gauss-Hermite quadrature.

    Only latent dimensions 1 and 2 are supported (tensor-product grid).
    """
    d = model.latent_dim
    if d > 2:
        raise ValueError("quadrature oracle supports latent_dim <= 2")
    nodes, weights = np.polynomial.hermite_e.hermegauss(n_points)
    weights = weights / weights.sum()
    grid = np.array(list(itertools.product(nodes, repeat=d)))
    w = np.prod(np.array(list(itertools.product(weights, repeat=d))), axis=1)
    logits = model.decode_logits(grid)
    p_one = 1 / (1 + np.exp(-logits))
    n_var = p_one.shape[1]
    out = ExactDistribution()
    for t in itertools.product((0, 1), repeat=n_var):
        x = np.array(t)
        like = np.prod(np.where(x == 1, p_one, 1 - p_one), axis=1)
        out["".join(map(str, t))] = float(w @ like)
    return out
