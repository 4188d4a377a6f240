"""CMA-ES (rank-one plus rank-mu update, cumulative step-size adaptation).

Minimization only. No restarts and no bound handling.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


class CmaesError(RuntimeError):
    pass


def default_popsize(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(dim)))


@dataclass
class CmaesState:
    mean: np.ndarray
    sigma: float
    popsize: int
    mu: int
    weights: np.ndarray
    mu_eff: float
    c_sigma: float
    d_sigma: float
    c_c: float
    c1: float
    c_mu: float
    chi_n: float
    cov: np.ndarray
    p_sigma: np.ndarray
    p_c: np.ndarray
    generation: int = 0
    evaluations: int = 0
    best_x: np.ndarray | None = None
    best_f: float = math.inf
    best_trace: list[float] = field(default_factory=list)
    _eig_basis: np.ndarray | None = field(default=None, repr=False)
    _eig_scale: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.mean)


def cmaes_init(x0, sigma0: float = 0.1, popsize: int | None = None) -> CmaesState:
    mean = np.array(x0, dtype=np.float64)
    n = len(mean)
    if n < 1:
        raise ValueError("CMA-ES needs at least one dimension")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    lam = popsize or default_popsize(n)
    mu = lam // 2
    w = math.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
    w /= w.sum()
    mu_eff = 1.0 / np.sum(w**2)
    c_sigma = (mu_eff + 2) / (n + mu_eff + 5)
    d_sigma = 1 + 2 * max(0.0, math.sqrt((mu_eff - 1) / (n + 1)) - 1) + c_sigma
    c_c = (4 + mu_eff / n) / (n + 4 + 2 * mu_eff / n)
    c1 = 2 / ((n + 1.3) ** 2 + mu_eff)
    c_mu = min(1 - c1, 2 * (mu_eff - 2 + 1 / mu_eff) / ((n + 2) ** 2 + mu_eff))
    chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))
    return CmaesState(
        mean=mean, sigma=float(sigma0), popsize=lam, mu=mu, weights=w, mu_eff=mu_eff,
        c_sigma=c_sigma, d_sigma=d_sigma, c_c=c_c, c1=c1, c_mu=c_mu, chi_n=chi_n,
        cov=np.eye(n), p_sigma=np.zeros(n), p_c=np.zeros(n),
    )


def _decompose(state: CmaesState) -> tuple[np.ndarray, np.ndarray]:
    if state._eig_basis is None:
        for attempt in range(2):
            c = (state.cov + state.cov.T) / 2
            try:
                vals, vecs = np.linalg.eigh(c)
            except np.linalg.LinAlgError:
                vals, vecs = None, None
            if vals is not None and np.all(np.isfinite(vals)) and vals.min() > 0:
                break
            if attempt == 1:
                raise CmaesError("covariance matrix could not be repaired")
            log.warning("repairing covariance matrix at generation %d", state.generation)
            state.cov = _repair(c)
        state.cov = c
        state._eig_basis, state._eig_scale = vecs, np.sqrt(vals)
    return state._eig_basis, state._eig_scale


def _repair(c: np.ndarray) -> np.ndarray:
    c = np.nan_to_num(c, nan=0.0, posinf=0.0, neginf=0.0)
    c = (c + c.T) / 2
    vals, vecs = np.linalg.eigh(c)
    floor = max(vals.max(), 1.0) * 1e-14
    return (vecs * np.maximum(vals, floor)) @ vecs.T


def ask(state: CmaesState, rng: np.random.Generator) -> np.ndarray:
    """Draw ``popsize`` candidates ``m + sigma * C^(1/2) z`` as rows."""
    basis, scale = _decompose(state)
    z = rng.standard_normal((state.popsize, state.dim))
    y = (z * scale) @ basis.T
    return state.mean + state.sigma * y


def tell(state: CmaesState, candidates: np.ndarray, fitness) -> CmaesState:
    """Update the strategy from candidate fitnesses (lower is better)."""
    x = np.asarray(candidates, dtype=np.float64)
    f = np.asarray(fitness, dtype=np.float64)
    if x.shape != (state.popsize, state.dim) or f.shape != (state.popsize,):
        raise ValueError("tell expects one fitness per asked candidate")
    bad = ~np.isfinite(f)
    if bad.all():
        raise CmaesError(f"all fitness values are non-finite at generation {state.generation}")
    if bad.any():
        log.warning("discarding %d non-finite candidates", int(bad.sum()))
        f = np.where(bad, np.inf, f)

    order = np.argsort(f, kind="stable")
    state.evaluations += int((~bad).sum())
    if f[order[0]] < state.best_f:
        state.best_f = float(f[order[0]])
        state.best_x = x[order[0]].copy()

    n = state.dim
    basis, scale = _decompose(state)
    old_mean = state.mean
    y = (x[order[: state.mu]] - old_mean) / state.sigma
    y_w = state.weights @ y
    state.mean = old_mean + state.sigma * y_w

    inv_sqrt_c = (basis / scale) @ basis.T
    cs = state.c_sigma
    state.p_sigma = (1 - cs) * state.p_sigma + math.sqrt(cs * (2 - cs) * state.mu_eff) * (inv_sqrt_c @ y_w)
    g = state.generation + 1
    ps_norm = float(np.linalg.norm(state.p_sigma))
    h_sigma = ps_norm / math.sqrt(1 - (1 - cs) ** (2 * g)) / state.chi_n < 1.4 + 2 / (n + 1)
    cc = state.c_c
    state.p_c = (1 - cc) * state.p_c + h_sigma * math.sqrt(cc * (2 - cc) * state.mu_eff) * y_w

    c1, c_mu = state.c1, state.c_mu
    delta_h = (1 - h_sigma) * cc * (2 - cc)
    rank_one = np.outer(state.p_c, state.p_c)
    rank_mu = (y.T * state.weights) @ y
    state.cov = (1 - c1 - c_mu + c1 * delta_h) * state.cov + c1 * rank_one + c_mu * rank_mu
    state.sigma *= math.exp((cs / state.d_sigma) * (ps_norm / state.chi_n - 1))
    if not (state.sigma > 0 and math.isfinite(state.sigma)):
        raise CmaesError(f"step size degenerated to {state.sigma}")

    state._eig_basis = state._eig_scale = None
    state.generation = g
    state.best_trace.append(state.best_f)
    return state


def minimize(fun, x0, sigma0: float, rng: np.random.Generator, max_evals: int,
             popsize: int | None = None, batched: bool = False, target: float = -math.inf) -> CmaesState:
    """Run ask/tell until the evaluation budget or ``target`` is reached.

    ``fun`` maps one vector to a float, or a ``(popsize, d)`` array to a vector
    when ``batched`` is set.
    """
    state = cmaes_init(x0, sigma0, popsize)
    while state.evaluations + state.popsize <= max_evals and state.best_f > target:
        xs = ask(state, rng)
        fs = fun(xs) if batched else [fun(xi) for xi in xs]
        tell(state, xs, fs)
    return state
