import numpy as np
import pytest

from genrace import oracle
from genrace.neural import RnnModel, VaeModel
from genrace.qsim import QcbmModel, line_ansatz


def test_count_small_by_hand():
    # even-parity 4-bit strings with cost <= -2: 0101, 1001, 1010
    assert oracle.count_quality_states(4, -1) == 3


def test_count_optimum_has_nothing_below():
    assert oracle.count_quality_states(20, -19) == 0


@pytest.mark.parametrize("n", [3, 4, 6, 9])
def test_count_extreme_threshold(n):
    assert oracle.count_quality_states(n, -(n - 2)) <= 1
    assert oracle.count_quality_states(n, -n) == 0


def test_count_cap():
    with pytest.raises(ValueError, match="24"):
        oracle.count_quality_states(25, -3)


def test_oracle_metrics_empty_batch():
    out = oracle.oracle_metrics([], ["0000"], 4, 0.25)
    assert all(out[k] is None for k in ("E", "R", "F", "C", "Cq", "MV", "U"))


def test_oracle_metrics_whole_unseen_space():
    space = oracle.naive_solution_space(4)
    train, rest = space[:2], space[2:]
    out = oracle.oracle_metrics(rest, train, 4, 0.25)
    assert out["E"] == 1 and out["R"] == 1 and out["C"] == pytest.approx(1.0)


def test_oracle_metrics_cap():
    with pytest.raises(ValueError):
        oracle.oracle_metrics(["0" * 17], ["0" * 17], 17, 0.1)


def test_exact_distribution_zero_rnn_uniform():
    m = RnnModel(4, hidden=3)
    m.zero_parameters()
    dist = oracle.exact_model_distribution(m, 4)
    assert np.allclose(dist.as_array(), 1 / 16)


def test_exact_distribution_identity_qcbm():
    ansatz = line_ansatz(3, 2, entangle=False)
    m = QcbmModel(3, n_layers=2, entangle=False, theta=np.zeros(ansatz.n_params))
    assert oracle.exact_model_distribution(m, 3)["000"] == pytest.approx(1.0)


def test_exact_distribution_random_rnn_sums_to_one():
    assert oracle.exact_model_distribution(RnnModel(4, hidden=5, seed=9), 4).total() == pytest.approx(1.0)


def test_exact_distribution_needs_capability():
    with pytest.raises(TypeError):
        oracle.exact_model_distribution(VaeModel(4, latent_dim=2), 4)
    with pytest.raises(ValueError):
        oracle.exact_model_distribution(RnnModel(11), 11)


def test_quadrature_latent_cap():
    with pytest.raises(ValueError):
        oracle.vae_marginal_by_quadrature(VaeModel(4, latent_dim=3))
