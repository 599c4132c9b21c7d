import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from fpp_lab import distributions as dists


def test_inverse_cdf_examples():
    assert dists.inverse_cdf(dists.uniform(), 0.3) == pytest.approx(0.3, abs=0)
    tp = dists.two_point(1, 2, 0.5)
    assert dists.inverse_cdf(tp, 0.3) == 1.0
    assert dists.inverse_cdf(tp, 0.7) == 2.0
    assert dists.inverse_cdf(dists.exponential(1.0), 0.5) == pytest.approx(math.log(2), rel=1e-15)


@pytest.mark.parametrize("u", [-0.1, 1.0, 1.5, float("nan")])
def test_inverse_cdf_domain(u):
    with pytest.raises(ValueError):
        dists.inverse_cdf(dists.uniform(), u)


def test_inverse_cdf_atom_boundary_is_left_closed():
    tp = dists.two_point(1, 2, 0.5)
    # inf{x : F(x) >= 1/2} = 1
    assert dists.inverse_cdf(tp, 0.5) == 1.0
    assert dists.inverse_cdf(tp, 0.0) == 1.0


@pytest.mark.parametrize("dist", [dists.uniform(), dists.exponential(2.0), dists.two_point(0.5, 3, 0.3),
                                  dists.bernoulli(0.2), dists.piecewise_linear([0, 1, 3], [0.2, 0.5, 1.0])])
def test_right_continuous_inverse_contract(dist, rng):
    us = rng.uniform(0, 1, 400)
    xs = np.concatenate([rng.uniform(-0.5, 4, 400), [0.0, 0.5, 1.0, 2.0, 3.0]])
    inv = dist.inverse_cdf(us)
    F = dist.cdf(xs)
    lhs = inv[:, None] <= xs[None, :]
    rhs = us[:, None] <= F[None, :]
    assert np.array_equal(lhs, rhs)
    assert dist.atom_at_zero == pytest.approx(float(dist.cdf(0.0)))
    assert np.all(dist.cdf(np.array([-1.0, -1e-9])) == 0)


def test_encode_uniform_examples():
    assert dists.encode_uniform((1, 0, 1), 3) == 0.625
    assert dists.encode_uniform((0,) * 8, 8) == 0.0
    assert dists.encode_uniform((1, 1, 1, 1), 4) == 0.9375
    with pytest.raises(ValueError):
        dists.encode_uniform((1, 0), 3)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=53))
def test_encoding_range_and_roundtrip(bits):
    J = len(bits)
    u = dists.encode_uniform(bits, J)
    assert 0.0 <= u <= 1 - 2.0 ** -J
    word = dists.bits_word(bits)
    assert dists.word_bits(word, J) == tuple(bits)
    assert float(dists.word_to_uniform([word], J)[0]) == u


@settings(max_examples=200)
@given(st.lists(st.integers(0, 1), min_size=12, max_size=12), st.integers(0, 11))
def test_bit_flip_monotone(bits, j):
    lo = list(bits)
    hi = list(bits)
    lo[j], hi[j] = 0, 1
    for dist in (dists.uniform(), dists.exponential(1.0), dists.two_point(1, 2, 0.4)):
        a = dist.inverse_cdf(dists.encode_uniform(lo, 12))
        b = dist.inverse_cdf(dists.encode_uniform(hi, 12))
        assert a <= b


def test_sample_weight_composition():
    w, enc = dists.sample_weight(dists.uniform(), np.random.default_rng(0), 3)
    assert w == dists.encode_uniform(enc.bits(0), 3)
    tp = dists.two_point(1, 2)
    # any bit string starting with 0 encodes u < 1/2
    assert dists.inverse_cdf(tp, dists.encode_uniform((0, 1, 1, 1), 4)) == 1.0
    w, enc = dists.sample_weight(dists.exponential(1.0), np.random.default_rng(7), 32)
    u = dists.encode_uniform(enc.bits(0), 32)
    assert w == -math.log1p(-u)  # bit-exact recomputation


def test_sample_weights_deterministic():
    a, ea = dists.sample_weights(dists.uniform(), np.random.default_rng(3), 50)
    b, eb = dists.sample_weights(dists.uniform(), np.random.default_rng(3), 50)
    assert np.array_equal(a, b) and np.array_equal(ea.words, eb.words)


@pytest.mark.parametrize("dist", [dists.uniform(), dists.exponential(1.0)])
def test_ks_distance(dist):
    w, _ = dists.sample_weights(dist, np.random.default_rng(11), 100_000, 32)
    assert stats.kstest(w, lambda t: dist.cdf(t)).statistic < 0.01


def test_truncation_error_non_increasing():
    # uniform and exponential restricted to [0, 1/2] have Lipschitz inverses
    rng = np.random.default_rng(5)
    for dist in (dists.uniform(), dists.exponential(1.0)):
        for _ in range(50):
            bits = rng.integers(0, 2, 53)
            bits[0] = 0
            exact = dist.inverse_cdf(dists.encode_uniform(bits, 53))
            errs = [abs(dist.inverse_cdf(dists.encode_uniform(bits, J)) - exact) for J in range(1, 53)]
            assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_animal_weight_examples():
    assert dists.animal_weight(dists.uniform(), 1.0) == 1.0
    assert dists.animal_weight(dists.uniform(), math.exp(-1)) == pytest.approx(2.0, rel=1e-15)
    assert dists.animal_weight(dists.two_point(1, 2), 1.0) == pytest.approx(1 + math.log(2), rel=1e-15)
    with pytest.raises(dists.InfiniteWeightError):
        dists.animal_weight(dists.uniform(), 0.0)
    with pytest.raises(dists.InfiniteWeightError):
        dists.animal_weight(dists.two_point(1, 2), 0.5)


def test_validate_subcritical():
    assert dists.validate_subcritical(dists.two_point(0, 1, 0.4), 2)
    assert not dists.validate_subcritical(dists.bernoulli(0.5), 2)
    assert dists.validate_subcritical(dists.uniform(), 3)
    assert not dists.validate_subcritical(dists.bernoulli(0.25), 3)
    with pytest.raises(dists.UnsupportedDimensionError):
        dists.validate_subcritical(dists.uniform(), 9)
    with pytest.raises(dists.UnsupportedDimensionError):
        dists.critical_probability(1)


def test_from_spec_and_csv(tmp_path):
    assert dists.from_spec("uniform").name == "uniform"
    e = dists.from_spec({"kind": "exponential", "rate": 2.0})
    assert e.inverse_cdf(0.5) == pytest.approx(math.log(2) / 2)
    with pytest.raises(ValueError):
        dists.from_spec({"kind": "exponential", "rte": 2.0})
    with pytest.raises(ValueError):
        dists.from_spec({"kind": "cauchy"})
    p = tmp_path / "cdf.csv"
    p.write_text("t,F\n0,0\n1,0.25\n2,1\n")
    d = dists.from_spec({"kind": "piecewise", "csv": str(p)})
    assert d.cdf(1.0) == 0.25
    assert d.inverse_cdf(0.625) == pytest.approx(1.5)
    assert dists.from_spec(d.spec()).cdf(1.5) == pytest.approx(0.625)
    with pytest.raises(ValueError):
        dists.piecewise_linear([0, 0, 1], [0, 0.5, 1])


def test_piecewise_support_infimum():
    assert dists.piecewise_linear([0, 1, 2], [0, 0, 1]).support_infimum == 1.0
    assert dists.piecewise_linear([0.5, 1], [0.3, 1]).support_infimum == 0.5
    assert dists.piecewise_linear([0, 1], [0, 1]).support_infimum == 0.0


@pytest.mark.parametrize("dist", [dists.uniform(), dists.exponential(1.0)])
def test_animal_weight_tail(dist):
    w, _ = dists.sample_weights(dist, np.random.default_rng(2), 100_000)
    aw = dists.animal_weight(dist, w)
    n = len(aw)
    for r in range(1, 9):
        p = np.mean(aw >= r)
        se = math.sqrt(max(p * (1 - p), 1 / n) / n)
        assert p <= math.exp(1 - r) + 3 * se
