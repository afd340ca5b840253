"""Tests for probability-vector primitives."""

import math
import warnings

import numpy as np
import pytest

from hybridlm.dist import (
    DistributionError,
    ProbVec,
    sample,
    softmax,
    sort_desc,
    tvd,
)


class TestProbVec:
    def test_valid_construction(self):
        p = ProbVec(np.array([0.25, 0.75]))
        np.testing.assert_allclose(p.probs, [0.25, 0.75])

    def test_negative_entry_rejected(self):
        with pytest.raises(DistributionError):
            ProbVec(np.array([0.5, 0.6, -0.1]))

    def test_bad_sum_rejected(self):
        with pytest.raises(DistributionError):
            ProbVec(np.array([0.5, 0.4]))

    def test_small_drift_renormalized_with_warning(self):
        p = np.array([0.5, 0.5 + 3e-7])
        with pytest.warns(UserWarning, match="renormalizing"):
            v = ProbVec(p)
        assert abs(v.probs.sum() - 1.0) < 1e-15

    def test_tiny_drift_accepted_silently(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ProbVec(np.array([0.5, 0.5 + 1e-12]))

    def test_immutable(self):
        v = ProbVec(np.array([0.5, 0.5]))
        with pytest.raises(ValueError):
            v.probs[0] = 0.9

    def test_tiny_negative_clamped(self):
        v = ProbVec(np.array([1.0 + 1e-13, -1e-13]))
        assert v.probs[1] == 0.0


class TestSoftmax:
    def test_constant_logits_uniform(self):
        for c in (0.0, -3.5, 1e4):
            p = softmax(np.full(4, c))
            np.testing.assert_allclose(p.probs, 0.25, atol=1e-15)

    def test_closed_form_two_tokens(self):
        # exp(ln 3) = 3 gives the 1:3 split exactly.
        p = softmax(np.array([0.0, math.log(3.0)]))
        np.testing.assert_allclose(p.probs, [0.25, 0.75], atol=1e-14)

    def test_high_temperature_flattens(self):
        p = softmax(np.array([0.0, 10.0]), temperature=1e6)
        # Independent evaluation of the definition at this temperature.
        e = np.exp(np.array([0.0, 10.0]) / 1e6)
        expected = e / e.sum()
        np.testing.assert_allclose(p.probs, expected, atol=1e-15)
        np.testing.assert_allclose(p.probs, [0.5, 0.5], atol=1e-5)

    def test_overflow_safety(self):
        p = softmax(np.array([1000.0, 999.0, 0.0]))
        assert np.all(np.isfinite(p.probs))
        assert abs(p.probs.sum() - 1.0) < 1e-12

    def test_temperature_validation(self):
        z = np.array([0.0, 1.0])
        for bad in (0.0, -1.0, 1e-7):
            with pytest.raises(ValueError):
                softmax(z, temperature=bad)

    def test_nonfinite_logits_rejected(self):
        with pytest.raises(ValueError):
            softmax(np.array([0.0, np.inf]))
        with pytest.raises(ValueError):
            softmax(np.array([0.0, np.nan]))

    def test_sums_to_one_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 200))
            z = rng.normal(scale=10.0, size=n)
            theta = float(rng.uniform(0.01, 5.0))
            p = softmax(z, theta)
            assert abs(p.probs.sum() - 1.0) < 1e-12

    def test_shift_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            z = rng.normal(size=16)
            c = float(rng.uniform(-100, 100))
            a = softmax(z, 0.7)
            b = softmax(z + c, 0.7)
            np.testing.assert_allclose(a.probs, b.probs, atol=1e-12)


class TestSample:
    def test_one_hot_degenerate(self):
        p = ProbVec.one_hot(7, 10)
        for seed in range(5):
            assert sample(p, np.random.default_rng(seed)) == 7

    def test_cdf_boundary(self):
        class FixedRng:
            def __init__(self, u):
                self.u = u

            def random(self):
                return self.u

        p = ProbVec(np.array([0.2, 0.3, 0.5]))
        assert sample(p, FixedRng(0.45)) == 1
        assert sample(p, FixedRng(0.1)) == 0
        assert sample(p, FixedRng(0.99)) == 2

    def test_law_of_large_numbers(self):
        rng = np.random.default_rng(123)
        p = ProbVec(np.array([0.5, 0.5]))
        draws = np.array([sample(p, rng) for _ in range(100_000)])
        freq0 = np.mean(draws == 0)
        assert 0.49 <= freq0 <= 0.51

    def test_deterministic_given_seed(self):
        p = ProbVec(np.array([0.1, 0.2, 0.3, 0.4]))
        a = [sample(p, np.random.default_rng(42)) for _ in range(10)]
        b = [sample(p, np.random.default_rng(42)) for _ in range(10)]
        assert a == b


class TestTvd:
    def test_identity(self):
        p = ProbVec(np.array([0.3, 0.7]))
        assert tvd(p, p) == 0.0

    def test_disjoint_support(self):
        assert tvd(ProbVec.one_hot(0, 2), ProbVec.one_hot(1, 2)) == 1.0

    def test_direct_sum(self):
        p = ProbVec(np.array([0.5, 0.5]))
        q = ProbVec.one_hot(0, 2)
        assert tvd(p, q) == pytest.approx(0.5)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            tvd(ProbVec.uniform(2), ProbVec.uniform(3))

    def test_symmetry_triangle_and_mass_conservation(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(2, 40))
            p = ProbVec(rng.dirichlet(np.ones(n)))
            q = ProbVec(rng.dirichlet(np.ones(n)))
            r = ProbVec(rng.dirichlet(np.ones(n)))
            assert tvd(p, q) == pytest.approx(tvd(q, p), abs=1e-15)
            assert tvd(p, r) <= tvd(p, q) + tvd(q, r) + 1e-12
            # Half-l1 equals the one-sided positive mass.
            pos = np.maximum(q.probs - p.probs, 0.0).sum()
            assert tvd(p, q) == pytest.approx(pos, abs=1e-12)
            assert 0.0 <= tvd(p, q) <= 1.0 + 1e-12


class TestSortDesc:
    def test_direct_ordering(self):
        s = sort_desc(ProbVec(np.array([0.1, 0.7, 0.2])))
        np.testing.assert_allclose(s.probs, [0.7, 0.2, 0.1])
        np.testing.assert_array_equal(s.perm, [1, 2, 0])

    def test_tie_broken_by_index(self):
        s = sort_desc(ProbVec(np.array([0.25, 0.25, 0.5])))
        np.testing.assert_array_equal(s.perm, [2, 0, 1])

    def test_sorted_input_identity_perm(self):
        s = sort_desc(ProbVec(np.array([0.5, 0.3, 0.2])))
        np.testing.assert_array_equal(s.perm, [0, 1, 2])

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(2, 64))
            p = ProbVec(rng.dirichlet(np.ones(n) * 0.5))
            s = sort_desc(p)
            back = s.to_probvec()
            np.testing.assert_allclose(back.probs, p.probs, atol=1e-15)
            assert np.all(np.diff(s.probs) <= 0)

    def test_prefix_sums(self):
        s = sort_desc(ProbVec(np.array([0.1, 0.7, 0.2])))
        np.testing.assert_allclose(s.prefix, [0.0, 0.7, 0.9, 1.0])

    def test_rank_of(self):
        s = sort_desc(ProbVec(np.array([0.1, 0.7, 0.2])))
        assert s.rank_of(1) == 0
        assert s.rank_of(0) == 2
        with pytest.raises(ValueError):
            s.rank_of(3)
