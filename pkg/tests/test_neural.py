import itertools
import math

import numpy as np
import pytest

from genrace import autodiff as ad
from genrace import oracle
from genrace.bitspace import TrainingSet, bits_to_codes
from genrace.neural import RnnModel, TransformerModel, VaeModel, WganModel
from genrace.neural.base import shifted_one_hot

AUTOREGRESSIVE = [lambda n, s=0: RnnModel(n, hidden=6, seed=s),
                  lambda n, s=0: TransformerModel(n, d_model=8, seed=s)]


def all_bits(n):
    return np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.uint8)


def tv_from_samples(samples, probs):
    emp = np.bincount(bits_to_codes(samples), minlength=len(probs)) / len(samples)
    return 0.5 * np.abs(emp - probs).sum()


def test_table1_parameter_counts():
    assert RnnModel(20).cell_parameter_count() == 3456
    assert TransformerModel(20).parameter_count() == 25538
    assert VaeModel(20).parameter_count() == 87828
    assert WganModel(20, prior=8).parameter_count() == 573
    assert WganModel(20, prior=128).parameter_count() == 54933


def test_shifted_inputs():
    x = shifted_one_hot(np.array([[1, 0, 1]]))
    assert x[0].tolist() == [[0, 0], [0, 1], [1, 0]]


# -- autoregressive models --------------------------------------------------------

@pytest.mark.parametrize("make", AUTOREGRESSIVE)
@pytest.mark.parametrize("n", [1, 4, 7, 10])
def test_normalisation(make, n):
    model = make(n, 3)
    assert np.exp(model.log_prob(all_bits(n))).sum() == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("make", AUTOREGRESSIVE)
def test_zero_weights_uniform(make):
    model = make(5)
    model.zero_parameters()
    lp = model.log_prob(all_bits(5))
    assert np.all(lp == 5 * math.log(0.5))


def test_zero_weight_rnn_fair_coin():
    model = RnnModel(4, hidden=5)
    model.zero_parameters()
    bits = model.sample(100_000, 0)
    sd = math.sqrt(0.25 / bits.size)
    assert abs(bits.mean() - 0.5) < 4 * sd


@pytest.mark.parametrize("make", AUTOREGRESSIVE)
def test_sampler_matches_enumeration(make):
    model = make(4, 1)
    probs = np.exp(model.log_prob(all_bits(4)))
    assert tv_from_samples(model.sample(100_000, 2), probs) < 0.02


@pytest.mark.parametrize("make", AUTOREGRESSIVE)
def test_sampling_reproducible(make):
    model = make(6, 1)
    assert np.array_equal(model.sample(40, 7), model.sample(40, 7))


def test_rnn_log_prob_is_product_of_conditionals():
    model = RnnModel(5, hidden=4, seed=2)
    bits = model.sample(20, 0)
    logits = [lg.data for lg in model.conditional_logits(bits)]
    total = np.zeros(20)
    for i, lg in enumerate(logits):
        p1 = 1 / (1 + np.exp(lg[:, 0] - lg[:, 1]))
        total += np.log(np.where(bits[:, i] == 1, p1, 1 - p1))
    assert np.allclose(model.log_prob(bits), total, atol=1e-12)


def test_tf_log_prob_is_product_of_conditionals():
    model = TransformerModel(5, d_model=8, seed=2)
    bits = model.sample(20, 0)
    p1 = model.conditionals(bits)
    assert np.allclose(model.log_prob(bits), np.log(np.where(bits == 1, p1, 1 - p1)).sum(axis=1))


def test_tf_causality():
    model = TransformerModel(6, d_model=8, seed=3)
    bits = np.random.default_rng(0).integers(0, 2, (5, 6))
    flipped = bits.copy()
    flipped[:, 3] ^= 1
    a, b = model.conditionals(bits), model.conditionals(flipped)
    assert np.array_equal(a[:, :4], b[:, :4])
    assert not np.allclose(a[:, 4:], b[:, 4:])


@pytest.mark.parametrize("make", AUTOREGRESSIVE)
def test_gibbs_inequality(make, train8):
    model = make(8, 0)
    for _ in range(5):
        loss = model.train_step(train8)
        assert loss - train8.entropy() >= 0


@pytest.mark.parametrize("cls", [RnnModel, TransformerModel])
def test_two_variable_convergence(cls):
    train = TrainingSet.from_codes([0b00, 0b11], n_var=2, epsilon=1.0)
    model = cls(2, seed=0)
    for _ in range(500):
        loss = model.train_step(train)
    assert loss - train.entropy() < 1e-2


@pytest.mark.parametrize("cls", [RnnModel, TransformerModel])
def test_nan_loss_names_step(cls, train8):
    model = cls(8, seed=0)
    model.train_step(train8)
    model.params["head.bias"].data[:] = np.nan
    with pytest.raises(FloatingPointError, match="step 2"):
        model.train_step(train8)


@pytest.mark.parametrize("make", AUTOREGRESSIVE)
def test_nll_gradcheck(make, rng):
    model = make(4, 0)
    bits = all_bits(4)
    w = rng.random(16)
    assert ad.gradcheck(lambda: model.nll(bits, w), model.params.values()) < 1e-3


@pytest.mark.parametrize("cls", [RnnModel, TransformerModel, VaeModel, WganModel])
def test_checkpoint_roundtrip(cls, tmp_path):
    a, b = cls(6, seed=1), cls(6, seed=2)
    a.save(tmp_path / "m.txt")
    b.load_state(tmp_path / "m.txt")
    for k in a.params:
        assert np.array_equal(a.params[k].data, b.params[k].data)


def test_checkpoint_rejects_wrong_model(tmp_path):
    RnnModel(6).save(tmp_path / "m.txt")
    with pytest.raises(ValueError):
        TransformerModel(6).load_state(tmp_path / "m.txt")


# -- VAE ---------------------------------------------------------------------------

def test_vae_autoencoder_limit(rng):
    model = VaeModel(4, latent_dim=3, hidden=5, kl_weight=0.0)
    x = all_bits(4)
    total, recon, _ = model.loss_terms(x, np.zeros((16, 3)))
    mean, _ = model.encode(ad.Tensor(x.astype(float)))
    logits = model.decode_logits(mean.data)
    bce = (np.logaddexp(0, logits) - logits * x).sum(axis=1).mean()
    assert total.item() == pytest.approx(bce) == pytest.approx(recon.item())


def test_vae_elbo_below_exact_likelihood():
    model = VaeModel(4, latent_dim=2, hidden=6, seed=3)
    exact = oracle.vae_marginal_by_quadrature(model, 60)
    x = all_bits(4)
    elbo = model.elbo(x, 4000, 0)
    log_p = np.log([exact["".join(map(str, r))] for r in x])
    assert np.all(elbo <= log_p)


def test_vae_zero_decoder_uniform():
    model = VaeModel(5, latent_dim=3, hidden=4)
    model.zero_parameters()
    bits = model.sample(50_000, 0)
    assert abs(bits.mean() - 0.5) < 4 * math.sqrt(0.25 / bits.size)


def test_vae_sampling_matches_quadrature():
    model = VaeModel(4, latent_dim=1, hidden=6, seed=1)
    exact = oracle.vae_marginal_by_quadrature(model, 80)
    assert exact.total() == pytest.approx(1.0)
    assert tv_from_samples(model.sample(100_000, 0), exact.as_array()) < 0.03


def test_vae_reproducible():
    assert np.array_equal(VaeModel(6, 4, seed=2).sample(30, 1), VaeModel(6, 4, seed=2).sample(30, 1))


def test_vae_gradcheck(rng):
    model = VaeModel(4, latent_dim=3, hidden=5)
    noise = rng.standard_normal((16, 3))
    assert ad.gradcheck(lambda: model.loss_terms(all_bits(4), noise)[0], model.params.values()) < 1e-3


def test_vae_training_reduces_loss(train8):
    model = VaeModel(8, latent_dim=8, batch_size=64, seed=0)
    first = np.mean([model.train_step(train8) for _ in range(5)])
    for _ in range(200):
        model.train_step(train8)
    last = np.mean([model.train_step(train8) for _ in range(5)])
    assert last < first


# -- WGAN --------------------------------------------------------------------------

def test_wgan_zero_everything_gives_zero_losses(rng):
    model = WganModel(4, prior=3, penalty=0.0)
    model.zero_parameters()
    real, fake = all_bits(4)[:6], rng.random((6, 4))
    assert model.critic_loss(real, fake, rng.random(6)).item() == 0
    assert model.generator_loss(rng.standard_normal((6, 3))).item() == 0


def test_wgan_penalty_vanishes_for_unit_linear_critic(rng):
    model = WganModel(4, prior=3, critic_hidden_layers=0)
    w = rng.standard_normal((4, 1))
    model.params["critic0.weight"].data = w / np.linalg.norm(w)
    assert model.gradient_penalty(rng.random((8, 4))).item() == pytest.approx(0.0, abs=1e-20)


def test_wgan_input_gradient_matches_differences(rng):
    model = WganModel(5, prior=4, seed=1)
    x = rng.random((3, 5))
    g = model.critic_input_gradient(x).data
    h = 1e-6
    with ad.no_grad():
        for j in range(5):
            e = np.zeros(5)
            e[j] = h
            up = model.critic(ad.Tensor(x + e)).data[:, 0]
            down = model.critic(ad.Tensor(x - e)).data[:, 0]
            assert np.allclose(g[:, j], (up - down) / (2 * h), atol=1e-8)


def test_wgan_saturated_generator_is_deterministic():
    model = WganModel(4, prior=3)
    last = model.gen_layers[-1]
    model.params[f"{last}.weight"].data[:] = 0
    model.params[f"{last}.bias"].data = np.array([1e6, -1e6, 1e6, 1e6])
    assert set(bits_to_codes(model.sample(200, 0)).tolist()) == {0b1011}


def test_wgan_zero_generator_uniform():
    model = WganModel(6, prior=4)
    model.zero_parameters()
    bits = model.sample(50_000, 1)
    assert abs(bits.mean() - 0.5) < 4 * math.sqrt(0.25 / bits.size)


def test_wgan_reproducible():
    a, b = WganModel(6, prior=4, seed=3), WganModel(6, prior=4, seed=3)
    assert np.array_equal(a.sample(30, 2), b.sample(30, 2))


def test_wgan_gradchecks(rng):
    model = WganModel(4, prior=3, seed=2)
    real, fake, alpha = all_bits(4)[:8], rng.random((8, 4)), rng.random(8)
    z = rng.standard_normal((8, 3))
    assert ad.gradcheck(lambda: model.critic_loss(real, fake, alpha), model.critic_params.values()) < 1e-3
    assert ad.gradcheck(lambda: model.generator_loss(z), model.gen_params.values()) < 1e-3


def test_wgan_critic_gap_on_replay():
    # both critic inputs drawn from the same data: the best critic cannot separate them
    train = TrainingSet.from_codes([0b00, 0b11], n_var=2, epsilon=1.0)
    model = WganModel(2, prior=4, lr=1e-2, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(300):
        real = train.sample_minibatch(64, rng)
        fake = train.sample_minibatch(64, rng)
        model.critic_adam.zero_grad()
        model.critic_loss(real, fake.astype(float), rng.random(64)).backward()
        model.critic_adam.step()
    gap = model.critic_gap(train.sample_minibatch(5000, rng), train.sample_minibatch(5000, rng))
    assert abs(gap) < 0.05


def test_wgan_train_step_records_losses(train8):
    model = WganModel(8, prior=8, seed=0)
    g = model.train_step(train8)
    assert model.last_losses[1] == g
    assert np.isfinite(model.last_losses[0])
