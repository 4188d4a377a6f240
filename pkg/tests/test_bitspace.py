import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genrace import oracle
from genrace.bitspace import (
    EnumerationCapError, SolutionSpace, TrainingSet, TrainingSetError, bits_to_codes,
    build_training_set, code_to_text, codes_to_bits, enumerate_solution_space, is_valid,
    parse_bitstring, reweight, separation_cost, separation_costs, text_to_code,
    training_set_size,
)

bitstrings = st.text(alphabet="01", min_size=1, max_size=24)


@pytest.mark.parametrize("s, cost", [
    ("11100011", -4), ("11111111", -1), ("10110011", -3), ("00000000", -1),
    ("1", -1), ("0", -1), ("0100", -1), ("101", -2), ("10000000000000000001", -19),
])
def test_separation_cost_examples(s, cost):
    assert separation_cost(s) == cost


@given(bitstrings)
def test_cost_matches_naive(s):
    assert separation_cost(s) == oracle.naive_cost(s)


@given(bitstrings)
def test_cost_range(s):
    c = separation_cost(s)
    if s.count("1") < 2:
        assert c == -1
    else:
        assert -(len(s) - 1) <= c <= -1


def test_vectorised_costs_exhaustive_n10():
    strings = ["".join(t) for t in itertools.product("01", repeat=10)]
    bits = np.array([[int(ch) for ch in s] for s in strings])
    assert separation_costs(bits).tolist() == [oracle.naive_cost(s) for s in strings]


@pytest.mark.parametrize("s, valid", [("0011", True), ("0111", False), ("0000", True)])
def test_validity(s, valid):
    assert is_valid(s) is valid


@given(bitstrings)
def test_code_roundtrip(s):
    assert code_to_text(text_to_code(s), len(s)) == s
    bits = parse_bitstring(s)[None, :]
    assert codes_to_bits(bits_to_codes(bits), len(s)).tolist() == bits.tolist()


def test_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_bitstring("01a1")
    with pytest.raises(ValueError):
        parse_bitstring("")


@pytest.mark.parametrize("n", [1, 2, 5, 8, 12])
def test_enumeration_matches_naive(n):
    codes = enumerate_solution_space(n)
    assert len(codes) == 2 ** (n - 1)
    assert sorted(code_to_text(c, n) for c in codes.tolist()) == sorted(oracle.naive_solution_space(n))


def test_enumeration_n2():
    assert sorted(code_to_text(c, 2) for c in enumerate_solution_space(2).tolist()) == ["00", "11"]


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError, match="24"):
        enumerate_solution_space(25)
    with pytest.raises(EnumerationCapError):
        enumerate_solution_space(10, cap=8)


def test_solution_space_index_bijection():
    space = SolutionSpace(9)
    codes = space.index_to_code(np.arange(space.size))
    assert len(set(codes.tolist())) == space.size == 256
    assert all(space.contains(code_to_text(c, 9)) for c in codes.tolist())
    assert SolutionSpace(20).size == 524288


def test_reweight_uniform_when_costs_equal():
    beta_hat, beta, w = reweight([-2, -2, -2])
    assert beta_hat == 0 and beta == 0
    assert np.allclose(w, 1 / 3)


def test_reweight_two_point():
    beta_hat, beta, w = reweight([-1, -3])
    assert beta_hat == pytest.approx(1.0)
    assert beta == pytest.approx(0.5)
    expected = np.exp([0.5, 1.5]) / np.exp([0.5, 1.5]).sum()
    assert np.allclose(w, expected, atol=1e-15)
    assert w == pytest.approx([0.2689414213699951, 0.7310585786300049], abs=1e-12)


@given(st.lists(st.integers(-30, -1), min_size=1, max_size=50))
def test_reweight_normalised_and_monotone(costs):
    _, beta, w = reweight(costs)
    assert math.isclose(w.sum(), 1.0, rel_tol=1e-12)
    order = np.argsort(costs, kind="stable")
    assert np.all(np.diff(w[order]) <= 1e-15)


def test_training_set_sizes():
    assert training_set_size(20, 0.01) == 5242
    assert training_set_size(20, 0.001) == 524
    assert training_set_size(8, 0.25) == 32
    assert training_set_size(4, 0.01) == 1


def test_training_set_basic(train8):
    assert train8.size == 32
    assert len(set(train8.codes.tolist())) == 32
    assert all(is_valid(s) for s in train8.strings)
    assert train8.costs.tolist() == [separation_cost(s) for s in train8.strings]
    assert train8.weights.sum() == pytest.approx(1.0)


def test_training_set_probability_outside_is_zero(train8):
    outside = next(s for s in oracle.naive_solution_space(8) if s not in set(train8.strings))
    assert train8.probability(outside) == 0.0
    assert train8.probability(train8.strings[0]) > 0


def test_training_set_is_read_only(train8):
    with pytest.raises(ValueError):
        train8.codes[0] = 3


def test_training_set_deterministic():
    a = build_training_set(10, 0.1, seed=3)
    b = build_training_set(10, 0.1, seed=3)
    assert a.codes.tolist() == b.codes.tolist()
    assert build_training_set(10, 0.1, seed=4).codes.tolist() != a.codes.tolist()


def test_target_min_cost_resamples():
    t = build_training_set(12, 0.01, seed=0, target_min_cost=-6)
    assert t.min_cost == -6
    assert t.size == 20


def test_target_min_cost_unreachable():
    with pytest.raises(TrainingSetError, match="unreachable"):
        build_training_set(6, 0.1, seed=0, target_min_cost=-40)


def test_target_min_cost_attempts_exhausted():
    with pytest.raises(TrainingSetError, match="after 2 attempts"):
        build_training_set(6, 0.1, seed=1, target_min_cost=-5, max_attempts=2)


@pytest.mark.parametrize("eps", [0.0, -0.1, 1.5])
def test_bad_epsilon(eps):
    with pytest.raises(ValueError):
        build_training_set(8, eps, seed=0)


def test_from_codes_rejects_invalid_and_duplicates():
    with pytest.raises(TrainingSetError):
        TrainingSet.from_codes([0b0001], n_var=4, epsilon=0.1)
    with pytest.raises(TrainingSetError):
        TrainingSet.from_codes([0b0011, 0b0011], n_var=4, epsilon=0.1)


def test_minibatch_follows_weights(tiny_train, rng):
    batch = tiny_train.sample_minibatch(40000, rng)
    freq = (bits_to_codes(batch) == 0b1001).mean()
    assert abs(freq - tiny_train.weights[list(tiny_train.codes).index(0b1001)]) < 0.01


def test_save_load_roundtrip(train8, tmp_path):
    path = tmp_path / "d.txt"
    train8.save(path)
    back = TrainingSet.load(path)
    assert back.codes.tolist() == train8.codes.tolist()
    assert np.array_equal(back.weights, train8.weights)
    assert back.epsilon == train8.epsilon and back.seed == train8.seed


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 12), st.floats(0.01, 1.0), st.integers(0, 1000))
def test_training_set_properties(n, eps, seed):
    t = build_training_set(n, eps, seed=seed)
    assert t.size == training_set_size(n, eps)
    assert len(set(t.codes.tolist())) == t.size
    assert all(oracle.naive_valid(s) for s in t.strings)
