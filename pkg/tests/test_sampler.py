import itertools
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy.stats import chi2

from gwtrees import (
    conditioned_increments,
    cycle_shift,
    enumerate_conditioned,
    sample_conditioned,
    sample_gw,
    step_law,
)
from gwtrees.sampler import SamplerError, analytic_sampler_law, derive_rng


def catalan(k):
    return math.comb(2 * k, k) // (k + 1)


class TestSampleGw:
    def test_cap_one_is_single_node_or_signal(self, geometric):
        hits = 0
        for seed in range(4000):
            t = sample_gw(geometric, 1, rng_seed=seed)
            if t is not None:
                assert t.zeta == 1
                hits += 1
        # P[zeta = 1] = mu(0) = 1/2, binomial 3 sigma
        assert abs(hits / 4000 - 0.5) < 3 * math.sqrt(0.25 / 4000)

    def test_small_size_frequencies(self, geometric):
        counts = Counter()
        n_draws = 20_000
        for seed in range(n_draws):
            t = sample_gw(geometric, 500, rng_seed=seed)
            if t is not None:
                counts[t.zeta] += 1
        for n, want in ((1, 0.5), (3, catalan(2) * 2.0**-5)):
            se = math.sqrt(want * (1 - want) / n_draws)
            assert abs(counts[n] / n_draws - want) < 3 * se

    def test_supercritical_rejected(self):
        from gwtrees import make_geometric

        with pytest.raises(SamplerError):
            sample_gw(make_geometric(0.7), 10, rng_seed=0)

    def test_deterministic(self, geometric):
        a = sample_gw(geometric, 1000, rng_seed=99)
        b = sample_gw(geometric, 1000, rng_seed=99)
        assert (a is None and b is None) or a == b


class TestConditionedIncrements:
    def test_n1(self, geometric):
        assert conditioned_increments(step_law(geometric), 1, rng_seed=0).tolist() == [-1]

    def test_n3_uniform_over_admissible(self, geometric):
        # the 6 admissible triples all have nu-probability 2^-5
        admissible = sorted(
            seq
            for seq in itertools.product((-1, 0, 1), repeat=3)
            if sum(seq) == -1
        )
        assert len(admissible) == 6
        rng = derive_rng(314)
        counts = Counter()
        n_draws = 60_000
        for _ in range(n_draws):
            counts[tuple(conditioned_increments(step_law(geometric), 3, rng=rng))] += 1
        assert sorted(counts) == admissible
        for seq in admissible:
            se = math.sqrt((1 / 6) * (5 / 6) / n_draws)
            assert abs(counts[seq] / n_draws - 1 / 6) < 4 * se

    def test_methods_agree_in_distribution(self, geometric):
        # total-variation distance of the two empirical laws at n = 4
        step = step_law(geometric)
        rng_a, rng_b = derive_rng(21), derive_rng(22)
        n_draws = 100_000
        ca, cb = Counter(), Counter()
        for _ in range(n_draws):
            ca[tuple(conditioned_increments(step, 4, "rejection", rng=rng_a))] += 1
        for _ in range(n_draws):
            cb[tuple(conditioned_increments(step, 4, "dp_exact", rng=rng_b))] += 1
        tv = 0.5 * sum(abs(ca[k] - cb[k]) for k in set(ca) | set(cb)) / n_draws
        assert tv < 0.01

    def test_dp_budget_guard(self, geometric):
        from gwtrees.exactlaw import ExactLawError

        with pytest.raises(ExactLawError):
            conditioned_increments(step_law(geometric), 4096, "dp_exact",
                                   rng_seed=0, dp_budget_floats=1e4)

    def test_sum_and_steps(self, stable15):
        seq = conditioned_increments(step_law(stable15), 64, rng_seed=5)
        assert seq.sum() == -1 and seq.min() >= -1 and seq.size == 64


class TestCycleShift:
    def test_examples(self):
        assert cycle_shift(np.array([-1, 1, -1])).values.tolist() == [0, 1, 0, -1]
        assert cycle_shift(np.array([0, -1, 1, -1])).values.tolist() == [0, 1, 0, 0, -1]
        assert cycle_shift(np.array([1, -1, -1])).values.tolist() == [0, 1, 0, -1]

    def test_uniqueness_exhaustive(self):
        # every step block (steps in {-1..3}, sum -1, n <= 6) has exactly one
        # rotation that is a first-passage path, and cycle_shift returns it
        def is_excursion(seq):
            w = np.concatenate([[0], np.cumsum(seq)])
            return w[-1] == -1 and (w[1:-1] >= 0).all()

        for n in range(1, 7):
            for seq in itertools.product(range(-1, 4), repeat=n):
                if sum(seq) != -1:
                    continue
                arr = np.array(seq)
                rotations = [
                    tuple(np.roll(arr, -r)) for r in range(n)
                ]
                good = [r for r in rotations if is_excursion(np.array(r))]
                assert len(good) == 1
                got = cycle_shift(arr)
                assert tuple(np.diff(got.values)) == good[0]

    def test_bad_input(self):
        with pytest.raises(SamplerError):
            cycle_shift(np.array([1, -1]))  # sums to 0
        with pytest.raises(SamplerError):
            cycle_shift(np.array([-2, 1]))  # step below -1


class TestSampleConditioned:
    def test_n2_unique_tree(self, geometric):
        for seed in range(50):
            t = sample_conditioned(geometric, 2, rng_seed=seed)
            assert t.child_counts.tolist() == [1, 0]

    def test_n3_even_split(self, geometric):
        counts = Counter()
        rng = derive_rng(8)
        for _ in range(20_000):
            counts[tuple(sample_conditioned(geometric, 3, rng=rng).child_counts)] += 1
        for key in ((1, 1, 0), (2, 0, 0)):
            assert abs(counts[key] / 20_000 - 0.5) < 3 * math.sqrt(0.25 / 20_000)

    def test_n5_chi_square_against_enumeration(self, geometric):
        expected = {t: p for t, p in enumerate_conditioned(geometric, 5)}
        rng = derive_rng(1234)
        n_draws = 100_000
        counts = Counter()
        for _ in range(n_draws):
            counts[sample_conditioned(geometric, 5, rng=rng)] += 1
        assert set(counts) <= set(expected)
        stat = sum(
            (counts[t] - n_draws * p) ** 2 / (n_draws * p) for t, p in expected.items()
        )
        # 14 trees -> 13 degrees of freedom at the 99% level
        assert stat < chi2.ppf(0.99, len(expected) - 1)

    def test_sizes_exact(self, geometric, stable15):
        for law, n in ((geometric, 137), (stable15, 137), (geometric, 2048)):
            assert sample_conditioned(law, n, rng_seed=3).zeta == n

    def test_zero_probability_size(self, stable15):
        # the stable family has mu(1) = 0, so no tree with exactly 2 vertices
        with pytest.raises(SamplerError):
            sample_conditioned(stable15, 2, rng_seed=0)

    def test_same_seed_same_tree_and_thread_independence(self, geometric):
        serial = [sample_conditioned(geometric, 64, rng=derive_rng(7, i)) for i in range(8)]
        with ThreadPoolExecutor(max_workers=4) as pool:
            threaded = list(
                pool.map(lambda i: sample_conditioned(geometric, 64, rng=derive_rng(7, i)),
                         range(8))
            )
        assert all(a == b for a, b in zip(serial, threaded))
        again = [sample_conditioned(geometric, 64, rng=derive_rng(7, i)) for i in range(8)]
        assert all(a == b for a, b in zip(serial, again))

    def test_dp_exact_end_to_end(self, geometric):
        t = sample_conditioned(geometric, 50, method="dp_exact", rng_seed=11)
        assert t.zeta == 50


class TestAnalyticSamplerLaw:
    def test_matches_enumeration(self, geometric):
        for n in range(2, 7):
            sampler_law = analytic_sampler_law(geometric, n)
            enum_law = enumerate_conditioned(geometric, n)
            for (t1, p1), (t2, p2) in zip(sampler_law, enum_law):
                assert t1 == t2
                assert abs(p1 - p2) <= 1e-12

    def test_heavy_tail_law(self, stable15):
        sampler_law = analytic_sampler_law(stable15, 5)
        total = sum(p for _, p in sampler_law)
        assert abs(total - 1.0) < 1e-12
