import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from gwtrees import stable as stb

G2 = stb.StableLaw(2.0)
S13 = stb.StableLaw(1.3)
S15 = stb.StableLaw(1.5)
S18 = stb.StableLaw(1.8)
HEAVY = (S13, S15, S18)


def gaussian_p1(x):
    return np.exp(-np.asarray(x) ** 2 / 4.0) / (2 * math.sqrt(math.pi))


class TestDensityP1:
    def test_theta2_closed_values(self):
        assert stb.density_p1(G2, 0.0) == pytest.approx(1 / (2 * math.sqrt(math.pi)), abs=0)
        assert stb.density_p1(G2, 2.0) == pytest.approx(math.exp(-1) / (2 * math.sqrt(math.pi)), abs=0)

    def test_theta2_quadrature_vs_gaussian(self):
        # run the inversion integral explicitly and compare on [-6, 6]
        xs = np.linspace(-6, 6, 241)
        got = stb._p1_quadrature(G2, xs)
        assert np.max(np.abs(got - gaussian_p1(xs))) <= 1e-8

    @pytest.mark.parametrize("law", HEAVY, ids=lambda l: f"theta={l.theta}")
    def test_zero_value_closed_form(self, law):
        want = gamma_fn(1 / law.theta) * math.sin(math.pi / law.theta) / (math.pi * law.theta)
        assert abs(stb.density_p1(law, 0.0) - want) <= 1e-7

    @pytest.mark.parametrize("law", HEAVY + (G2,), ids=lambda l: f"theta={l.theta}")
    def test_normalization(self, law):
        # quadrature over the body plus the analytic regularly-varying tail
        # int_X^inf p1 ~ X^-theta / (theta Gamma(-theta)) for theta < 2
        th = law.theta
        if th == 2.0:
            total, _ = quad(lambda x: stb.density_p1(law, x), -12, 12)
        else:
            X = 1000.0
            body, _ = quad(lambda x: stb.density_p1(law, x), -12, X, limit=400)
            gamma_minus_theta = gamma_fn(2 - th) / (th * (th - 1))
            total = body + X ** (-th) / (th * gamma_minus_theta)
        assert abs(total - 1.0) <= 1e-6

    def test_nonnegative_everywhere(self):
        xs = np.linspace(-30, 60, 500)
        for law in HEAVY:
            assert np.all(np.asarray(stb.density_p1(law, xs)) >= 0.0)

    def test_vector_scalar_consistency(self):
        # panel counts adapt to the batch, so agreement is at the abs_tol level
        xs = np.array([-2.0, 0.3, 5.0])
        vec = stb.density_p1(S15, xs)
        for x, v in zip(xs, vec):
            assert stb.density_p1(S15, float(x)) == pytest.approx(v, abs=2 * S15.abs_tol)


class TestDensityPt:
    def test_t1_identity(self):
        xs = np.linspace(-3, 3, 11)
        assert np.allclose(stb.density_pt(S15, 1.0, xs), stb.density_p1(S15, xs))

    def test_theta2_scaling_value(self):
        assert stb.density_pt(G2, 4.0, 0.0) == pytest.approx(0.5 / (2 * math.sqrt(math.pi)))

    @pytest.mark.parametrize("t", [0.5, 2.0])
    def test_normalization(self, t):
        for law in (S15, G2):
            if law.theta == 2.0:
                total, _ = quad(lambda x: stb.density_pt(law, t, x), -20, 20)
            else:
                X = 500.0
                body, _ = quad(lambda x: stb.density_pt(law, t, x), -15, X, limit=400)
                th = law.theta
                tail = t * X ** (-th) / (th * gamma_fn(2 - th) / (th * (th - 1)))
                total = body + tail
            assert abs(total - 1.0) <= 1e-6

    def test_t_positive(self):
        with pytest.raises(ValueError):
            stb.density_pt(S15, 0.0, 1.0)


class TestFirstPassage:
    def test_theta2_value(self):
        assert stb.first_passage_density(G2, 1.0, 1.0) == pytest.approx(
            math.exp(-0.25) / (2 * math.sqrt(math.pi))
        )

    def test_linear_at_zero(self):
        small = np.array([1e-4, 1e-3])
        vals = np.asarray(stb.first_passage_density(G2, 1.0, small))
        assert vals[1] == pytest.approx(10 * vals[0], rel=1e-4)
        assert vals[0] < 1e-4

    def test_scaling_consistency(self):
        s, x = 2.0, 1.0
        lhs = stb.first_passage_density(S15, s, x)
        rhs = s ** (-1 - 1 / 1.5) * x * stb.density_p1(S15, -x * s ** (-1 / 1.5))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_positive_x_required(self):
        with pytest.raises(ValueError):
            stb.first_passage_density(S15, 1.0, 0.0)


class TestPassageIntegral:
    @pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
    @pytest.mark.parametrize("law", [S15, G2], ids=lambda l: f"theta={l.theta}")
    def test_total_mass_one(self, law, x):
        assert abs(stb.passage_integral(law, 0.0, x) - 1.0) <= 1e-5

    def test_vanishes_at_infinity(self):
        assert stb.passage_integral(S15, 1e9, 1.0) < 1e-4
        assert stb.passage_integral(G2, 1e9, 1.0) < 1e-4

    def test_theta2_against_direct_quadrature(self):
        got = stb.passage_integral(G2, 0.5, 1.0)
        direct, _ = quad(lambda s: stb.first_passage_density(G2, s, 1.0), 0.5, np.inf,
                         limit=300)
        assert got == pytest.approx(direct, abs=1e-9)

    def test_theta15_against_direct_quadrature(self):
        got = stb.passage_integral(S15, 0.5, 1.0)
        body, _ = quad(lambda s: stb.first_passage_density(S15, s, 1.0), 0.5, 400.0,
                       limit=400)
        tail = stb.passage_integral(S15, 400.0, 1.0)
        assert got == pytest.approx(body + tail, abs=1e-7)

    def test_monotone_in_lower(self):
        vals = [stb.passage_integral(S15, lo, 1.0) for lo in (0.0, 0.25, 1.0, 4.0)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestGammaA:
    def test_nonnegative_grid(self):
        xs = np.geomspace(1e-3, 1e3, 50)
        for law in (S15, G2):
            for a in (0.25, 0.5, 0.75):
                assert np.all(np.asarray(stb.gamma_a(law, a, xs)) >= 0.0)

    def test_theta2_pinned_by_two_routes(self):
        got = stb.gamma_a(G2, 0.5, 1.0)
        num = 2 * stb.first_passage_density(G2, 0.5, 1.0)
        den, _ = quad(lambda s: stb.first_passage_density(G2, s, 1.0), 0.5, np.inf,
                      limit=300)
        assert got == pytest.approx(num / den, abs=1e-9)
        assert got == pytest.approx(1.4177498104544135, abs=1e-12)  # regression pin

    def test_theta15_two_routes(self):
        x = 2.0
        got = stb.gamma_a(S15, 0.5, x)
        num = 1.5 * stb.first_passage_density(S15, 0.5, x)
        body, _ = quad(lambda s: stb.first_passage_density(S15, s, x), 0.5, 400.0,
                       limit=400)
        den = body + stb.passage_integral(S15, 400.0, x)
        assert got == pytest.approx(num / den, rel=1e-6)

    def test_small_x_limit(self):
        # Gamma_a(0+) = 1/(1-a)
        for law in (S15, G2):
            for a in (0.25, 0.5):
                assert stb.gamma_a(law, a, 1e-3) == pytest.approx(1 / (1 - a), rel=5e-3)

    def test_domain_guard(self):
        for bad in (1e-4, 2e3):
            with pytest.raises(stb.GammaDomainError):
                stb.gamma_a(S15, 0.5, bad)

    def test_continuity_on_compacts(self):
        xs = np.linspace(0.5, 3.0, 200)
        vals = np.asarray(stb.gamma_a(S15, 0.5, xs))
        assert np.max(np.abs(np.diff(vals))) < 0.05


class TestZetaTail:
    def test_theta2(self):
        assert stb.zeta_tail(G2, 1.0) == pytest.approx(1 / math.sqrt(math.pi), abs=1e-15)

    def test_theta15(self):
        assert stb.zeta_tail(S15, 1.0) == pytest.approx(1 / gamma_fn(1 / 3), abs=1e-15)

    def test_power_scaling(self):
        for law in (S13, S15, G2):
            t0 = 3.7
            ratio = stb.zeta_tail(law, 2**law.theta * t0) / stb.zeta_tail(law, t0)
            assert ratio == pytest.approx(0.5, abs=1e-12)


class TestExcursionMarginal:
    @pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
    def test_normalized(self, t):
        total, _ = quad(lambda y: stb.excursion_marginal_theta2(t, y), 0, 25)
        assert abs(total - 1.0) <= 1e-8

    def test_mean_at_half(self):
        mean, _ = quad(lambda y: y * stb.excursion_marginal_theta2(0.5, y), 0, 25)
        assert mean == pytest.approx(2 / math.sqrt(math.pi), abs=1e-9)
        assert stb.excursion_height_mean(0.5) == pytest.approx(2 / math.sqrt(math.pi))

    def test_time_symmetry(self):
        ys = np.linspace(0.05, 5, 60)
        a = np.asarray(stb.excursion_marginal_theta2(0.3, ys))
        b = np.asarray(stb.excursion_marginal_theta2(0.7, ys))
        assert np.max(np.abs(a - b)) < 1e-14

    def test_cdf_matches_density(self):
        for y in (0.4, 1.0, 2.2):
            want, _ = quad(lambda z: stb.excursion_marginal_theta2(0.5, z), 0, y)
            assert stb.excursion_marginal_theta2_cdf(0.5, y) == pytest.approx(want, abs=1e-10)

    @pytest.mark.parametrize("t", [0.0, 1.0, -0.5])
    def test_domain(self, t):
        with pytest.raises(ValueError):
            stb.excursion_marginal_theta2(t, 1.0)


class TestMonteCarloConsistency:
    def test_walk_histogram_vs_density(self, geometric):
        # 1e5 samples of W_n / B_n at n = 4096 against the Gaussian limit CDF
        from gwtrees import calibrate_bn, step_law
        from gwtrees.sampler import derive_rng

        n, draws = 4096, 100_000
        step = step_law(geometric)
        cap = geometric.support_cap(1e-15)
        pvals = np.maximum(np.append(step.probabilities(cap - 1), geometric.tail_mass(cap)), 0)
        pvals /= pvals.sum()
        vals = np.arange(-1, cap + 1)  # tail bucket mapped to its smallest value
        rng = derive_rng(2718)
        counts = rng.multinomial(n, pvals, size=draws)
        w = counts @ vals
        sample = np.sort(w / calibrate_bn(geometric, n))
        cdf = np.asarray(stb.density_p1_cdf(G2, sample))
        i = np.arange(draws)
        ks = max(np.max(np.abs(cdf - i / draws)), np.max(np.abs(cdf - (i + 1) / draws)))
        assert ks < 0.02

    def test_cdf_only_for_theta2(self):
        with pytest.raises(stb.StableNumericsError):
            stb.density_p1_cdf(S15, 0.0)
