import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genrace import oracle
from genrace.bitspace import (
    SolutionSpace, TrainingSet, bits_to_codes, code_to_text, codes_to_bits, parse_bitstring,
)
from genrace.metrics import (
    REPORT_KEYS, QueryBatch, SamplerError, partition, quality_metrics, run_track1, run_track2,
    track1_report,
)

INT_KEYS = ("G_new", "G_sol", "g_sol", "MV")
FLOAT_KEYS = ("E", "R", "R_norm", "F", "C", "C_norm", "Cq", "U")


def texts(codes, n):
    return [code_to_text(c, n) for c in np.asarray(codes).tolist()]


def uniform_valid_sampler(n_var, rng):
    space = SolutionSpace(n_var)
    return lambda n: codes_to_bits(space.index_to_code(rng.integers(0, space.size, n)), n_var)


def compare_to_oracle(codes, train):
    rep = track1_report(QueryBatch(np.asarray(codes, dtype=np.int64), train.n_var), train)
    ref = oracle.oracle_metrics(texts(codes, train.n_var), train.strings, train.n_var, train.epsilon)
    got = {k: getattr(rep, k) for k in FLOAT_KEYS + ("MV",)}
    got.update(G_new=rep.denominators["G_new"], G_sol=rep.denominators["G_sol"],
               g_sol=rep.denominators["g_sol"])
    for k in INT_KEYS:
        assert got[k] == ref[k], k
    for k in FLOAT_KEYS:
        if ref[k] is None:
            assert got[k] is None, k
        else:
            assert got[k] == pytest.approx(ref[k], abs=1e-12), k


def test_all_seen_queries(train8):
    p = partition(QueryBatch(train8.codes.copy(), 8), train8)
    assert len(p.g_new) == 0


def test_seen_plus_all_ones(train8):
    ones = 0b11111111
    if ones in set(train8.codes.tolist()):
        pytest.skip("all-ones string was drawn into the training set")
    p = partition(QueryBatch(np.append(train8.codes, ones), 8), train8)
    assert p.g_sol_unique.tolist() == [ones]


def test_partition_random_vs_bruteforce(train8, rng):
    codes = rng.integers(0, 256, 200)
    p = partition(QueryBatch(codes, 8), train8)
    seen = set(train8.strings)
    q = texts(codes, 8)
    assert texts(p.g_new, 8) == [s for s in q if s not in seen]
    assert texts(p.g_sol, 8) == [s for s in q if s not in seen and oracle.naive_valid(s)]


def test_length_mismatch(train8):
    with pytest.raises(ValueError, match="length"):
        partition(QueryBatch(np.array([1, 2]), 6), train8)


def test_fresh_distinct_valid_batch(train8):
    space = SolutionSpace(8)
    unseen = [c for c in space.index_to_code(np.arange(space.size)).tolist()
              if c not in set(train8.codes.tolist())][:10]
    rep = track1_report(QueryBatch(np.array(unseen), 8), train8)
    assert rep.E == 1 and rep.F == 1 and rep.R == 1
    assert rep.C_norm == pytest.approx(10 / 10, rel=0.05)


def test_entire_unseen_space(train8):
    space = SolutionSpace(8)
    seen = set(train8.codes.tolist())
    unseen = [c for c in space.index_to_code(np.arange(space.size)).tolist() if c not in seen]
    rep = track1_report(QueryBatch(np.array(unseen), 8), train8)
    assert rep.E == 1 and rep.R == 1 and rep.C == pytest.approx(1.0)


def test_no_unseen_queries(train8):
    rep = track1_report(QueryBatch(np.repeat(train8.codes[:1], 5), 8), train8)
    assert rep.E == 0 and rep.R == 0 and rep.F is None
    assert rep.MV is None and rep.U is None and rep.Cq is None


def test_constructed_batch_vs_oracle(train8, rng):
    compare_to_oracle(rng.integers(0, 256, 64), train8)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=0, max_size=120))
def test_random_batches_vs_oracle(train8, codes):
    if not codes:
        with pytest.raises(ValueError):
            track1_report(QueryBatch(np.array(codes, dtype=np.int64), 8), train8)
        return
    compare_to_oracle(codes, train8)


def test_quality_metrics_utility_example():
    costs = np.array([-19, -18, -18, -17, -17] + [-3] * 95)
    Cq, MV, U = quality_metrics(np.arange(100), costs, 100, min_train_cost=-12)
    assert MV == -19
    assert U == pytest.approx(-17.8)
    assert Cq == pytest.approx(0.05)


def test_quality_metrics_nothing_cheaper():
    Cq, _, _ = quality_metrics(np.arange(3), np.array([-5, -4, -6]), 3, min_train_cost=-6)
    assert Cq == 0


def test_quality_metrics_empty():
    assert quality_metrics(np.array([]), np.array([]), 5, -3) == (None, None, None)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 255), min_size=1, max_size=200))
def test_metric_ranges(train8, codes):
    rep = track1_report(QueryBatch(np.array(codes), 8), train8)
    for k in ("E", "R", "F", "C", "C_norm", "Cq"):
        v = getattr(rep, k)
        assert v is None or 0 <= v <= 1 + 1e-12
    assert rep.R <= rep.E
    assert rep.denominators["g_sol"] <= rep.denominators["G_new"]


def test_track1_fixed_seen_sampler(train8):
    seen = codes_to_bits(train8.codes[:1], 8)
    rep = run_track1(lambda n: np.repeat(seen, n, axis=0), train8, Q=100)
    assert rep.E == 0 and rep.Cq is None and rep.MV is None


def test_track1_uniform_sampler_vs_oracle(train8, rng):
    sampler = uniform_valid_sampler(8, rng)
    bits = sampler(10_000)
    rep = track1_report(QueryBatch.from_bits(bits), train8)
    assert rep.E == pytest.approx(1 - 32 / 128, abs=0.02)
    compare_to_oracle(bits_to_codes(bits), train8)


def test_track1_sampler_failure_has_context(train8):
    def broken(n):
        raise RuntimeError("boom")
    with pytest.raises(SamplerError, match="boom"):
        run_track1(broken, train8, Q=10)
    with pytest.raises(SamplerError, match="shape"):
        run_track1(lambda n: np.zeros((n, 3)), train8, Q=10)


def test_report_keys(train8, rng):
    rep = run_track1(uniform_valid_sampler(8, rng), train8, Q=50)
    assert tuple(rep.to_dict()) == REPORT_KEYS


def test_track2_mode_collapse(train8):
    target = next(c for c in SolutionSpace(8).index_to_code(np.arange(128)).tolist()
                  if c not in set(train8.codes.tolist()))
    bits = codes_to_bits(np.array([target]), 8)
    rep = run_track2(lambda n: np.repeat(bits, n, axis=0), train8, 100, 10_000, 1_000)
    assert rep.Q_u_reached == 1
    assert rep.draws_used == 10_000
    cost = oracle.naive_cost(code_to_text(target, 8))
    assert rep.MV == cost and rep.U == cost
    assert rep.Cq in (0.0, 1.0)


def test_track2_uniform_reaches_target_early(train12, rng):
    rep = run_track2(uniform_valid_sampler(12, rng), train12, 100, 10_000, 1_000)
    assert rep.Q_u_reached == 100
    assert rep.draws_used == 1_000


def test_track2_vs_oracle_stream(train8, rng):
    stream = rng.integers(0, 256, 3000)
    it = iter(np.array_split(stream, 30))
    rep = run_track2(lambda n: codes_to_bits(next(it), 8), train8, 40, 3000, 100)
    ref = oracle.oracle_track2(texts(stream, 8), train8.strings, 40)
    assert rep.Q_u_reached == ref["Q_u_reached"]
    assert rep.MV == ref["MV"]
    assert rep.U == pytest.approx(ref["U"], abs=1e-12)
    assert rep.Cq == pytest.approx(ref["Cq"], abs=1e-12)


def test_track2_argument_errors(train8, rng):
    s = uniform_valid_sampler(8, rng)
    with pytest.raises(ValueError):
        run_track2(s, train8, 0)
    with pytest.raises(ValueError, match="batch"):
        run_track2(s, train8, 10, draw_cap=100, batch_size=1000)


def test_track2_infinite_target_uses_cap(train8, rng):
    rep = run_track2(uniform_valid_sampler(8, rng), train8, math.inf, 3000, 1000)
    assert rep.draws_used == 3000
    assert rep.Q_u_reached == 128 - 32
