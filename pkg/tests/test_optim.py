import numpy as np
import pytest

from genrace.optim import CmaesError, ask, cmaes_init, default_popsize, minimize, tell


def test_default_popsize():
    assert default_popsize(10) == 10
    assert default_popsize(236) == 4 + int(3 * np.log(236))


def test_tiny_sigma_candidates_near_mean(rng):
    state = cmaes_init(np.array([1.0, -2.0, 0.5]), sigma0=1e-12)
    assert np.allclose(ask(state, rng), [1.0, -2.0, 0.5], atol=1e-9)


def test_ask_reproducible():
    a = ask(cmaes_init(np.zeros(2), 0.3), np.random.default_rng(5))
    b = ask(cmaes_init(np.zeros(2), 0.3), np.random.default_rng(5))
    assert np.array_equal(a, b)


def test_candidate_covariance(rng):
    state = cmaes_init(np.zeros(3), 0.5, popsize=10_000)
    a = rng.standard_normal((3, 3))
    state.cov = a @ a.T + np.eye(3)
    state._eig_basis = None
    xs = ask(state, rng)
    expected = 0.25 * state.cov
    err = np.linalg.norm(np.cov(xs.T) - expected) / np.linalg.norm(expected)
    assert err < 0.1


def test_equal_fitness_keeps_best(rng):
    state = cmaes_init(np.zeros(4), 0.5)
    tell(state, ask(state, rng), np.arange(state.popsize, dtype=float))
    best = state.best_f
    xs = ask(state, rng)
    tell(state, xs, np.full(state.popsize, 100.0))
    assert state.best_f == best


def test_broken_covariance_is_repaired(rng, caplog):
    state = cmaes_init(np.zeros(3), 0.5)
    state.cov = np.array([[1.0, 0, 0], [0, -1e-3, 0], [0, 0, 1.0]])
    state._eig_basis = None
    xs = ask(state, rng)
    assert np.all(np.isfinite(xs))
    assert "repairing" in caplog.text


def test_nan_fitness_discarded_and_all_nan_aborts(rng, caplog):
    state = cmaes_init(np.zeros(3), 0.5)
    xs = ask(state, rng)
    f = np.sum(xs**2, axis=1)
    f[0] = np.nan
    tell(state, xs, f)
    assert "non-finite" in caplog.text
    assert np.isfinite(state.best_f)
    xs = ask(state, rng)
    with pytest.raises(CmaesError):
        tell(state, xs, np.full(len(xs), np.nan))


def test_sphere():
    rng = np.random.default_rng(1)
    state = minimize(lambda x: float(x @ x), rng.uniform(-1, 1, 10), 0.5, rng, max_evals=2000)
    assert state.best_f < 1e-8
    assert state.evaluations <= 2000


def test_rosenbrock():
    def rosen(x):
        return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (1 - x[:-1]) ** 2))
    rng = np.random.default_rng(0)
    state = minimize(rosen, np.zeros(5), 0.5, rng, max_evals=20_000)
    assert state.best_f < 1e-4


def test_best_trace_monotone(rng):
    state = minimize(lambda x: float(np.sum(np.abs(x))), np.ones(6), 0.3, rng, max_evals=600)
    trace = np.array(state.best_trace)
    assert np.all(np.diff(trace) <= 0)
