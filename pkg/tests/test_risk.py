from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from ptex.distribution import PteParams, RngStream, pmf
from ptex.errors import DomainError, TruncationBudgetExceeded
from ptex.risk import (
    CompoundDistribution,
    DiscreteSeverity,
    Erlang2Severity,
    ExponentialSeverity,
    compound_cdf,
    compound_density_erlang2,
    compound_density_exp,
    compound_pmf_discrete,
    discretize,
    simulate_aggregate,
    stop_loss_premium,
)

FREQS = [PteParams(0, 1), PteParams(0.4, 0.8), PteParams(-0.701, 0.873), PteParams(1, 0.3), PteParams(-1, 2.5)]


def _convolution_oracle(freq: PteParams, h: np.ndarray, s_max: int) -> np.ndarray:
    """Σ_x p(x)·h^{*x}(s); claims are >= 1 so x <= s_max suffices."""
    out = np.zeros(s_max + 1)
    power = np.zeros(s_max + 1)
    power[0] = 1.0
    for x in range(s_max + 1):
        out += float(pmf(freq, x)) * power
        power = np.convolve(power, h)[: s_max + 1]
    return out


class TestClosedFormDensities:
    def test_exponential_at_origin(self):
        freq = PteParams(0, 1)
        assert compound_density_exp(freq, 1.0, 0.0) == pytest.approx(0.25, rel=1e-14)
        assert CompoundDistribution(freq, ExponentialSeverity(1.0)).atom0 == 0.5

    def test_exponential_value(self):
        # α = 0 leaves a single exponential branch with rate θλ/(1+θ)
        assert compound_density_exp(PteParams(0, 1), 1.0, 0.5) == pytest.approx(
            0.25 * math.exp(-0.25), rel=1e-14
        )

    def test_erlang2_value(self):
        expected = math.exp(-1) * math.sinh(1 / math.sqrt(2)) / 2**1.5
        got = compound_density_erlang2(PteParams(0, 1), 1.0, 1.0)
        assert got == pytest.approx(expected, rel=1e-13)
        assert got == pytest.approx(0.0999, abs=1e-4)

    def test_erlang2_vanishes_at_origin(self):
        assert compound_density_erlang2(PteParams(-0.5, 1.5), 1.0, 0.0) == 0.0

    def test_erlang2_large_losses_stay_finite(self):
        out = compound_density_erlang2(PteParams(0.3, 0.5), 2.0, np.array([500.0, 5000.0]))
        assert np.all(np.isfinite(out)) and np.all(out >= 0.0)

    @pytest.mark.parametrize("freq", FREQS)
    def test_exponential_normalization(self, freq):
        a, t = freq.alpha, freq.theta
        assert pmf(freq, 0) + (1 - a) / (1 + t) + a / (1 + 2 * t) == pytest.approx(1.0, abs=1e-14)
        mass, _ = integrate.quad(
            lambda y: compound_density_exp(freq, 1.7, y), 0, np.inf, epsabs=1e-13, epsrel=1e-12
        )
        assert pmf(freq, 0) + mass == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("freq", FREQS)
    def test_erlang2_normalization(self, freq):
        mass, _ = integrate.quad(
            lambda y: compound_density_erlang2(freq, 0.6, y), 0, np.inf, epsabs=1e-12, limit=200
        )
        assert pmf(freq, 0) + mass == pytest.approx(1.0, abs=1e-8)

    def test_negative_loss_rejected(self):
        with pytest.raises(ValueError):
            compound_density_exp(PteParams(0, 1), 1.0, -0.1)
        with pytest.raises(DomainError):
            compound_density_exp(PteParams(0, 1), 0.0, 1.0)

    def test_lattice_severity_has_no_density(self):
        dist = CompoundDistribution(PteParams(0, 1), DiscreteSeverity(np.array([0.0, 1.0])))
        with pytest.raises(TypeError):
            dist.density(1.0)

    def test_mixture_decomposition(self):
        ys = np.linspace(0.0, 8.0, 33)
        for density in (compound_density_exp, compound_density_erlang2):
            whole = density(PteParams(0.35, 1.1), 1.3, ys)
            parts = 0.65 * density(PteParams(0, 1.1), 1.3, ys) + 0.35 * density(PteParams(1, 1.1), 1.3, ys)
            np.testing.assert_allclose(whole, parts, rtol=1e-10, atol=1e-15)


class TestLatticeRecursion:
    def test_unit_claims_reproduce_counts(self):
        freq = PteParams(-0.701, 0.873)
        got = compound_pmf_discrete(freq, DiscreteSeverity(np.array([0.0, 1.0])), 40)
        np.testing.assert_allclose(got, pmf(freq, np.arange(41)), rtol=1e-12)

    def test_matches_convolution(self):
        h = np.array([0.0, 0.5, 0.5])
        got = compound_pmf_discrete(PteParams(0, 1), DiscreteSeverity(h), 10)
        np.testing.assert_allclose(got, _convolution_oracle(PteParams(0, 1), h, 10), atol=1e-10)

    @pytest.mark.parametrize("seed", range(6))
    def test_random_instances_match_convolution(self, seed):
        gen = np.random.default_rng(seed)
        freq = PteParams(gen.uniform(-1, 1), gen.uniform(0.2, 3.0))
        support = int(gen.integers(1, 6))
        h = np.zeros(support + 1)
        h[1:] = gen.dirichlet(np.ones(support))
        s_max = int(gen.integers(5, 31))
        got = compound_pmf_discrete(freq, DiscreteSeverity(h), s_max)
        np.testing.assert_allclose(got, _convolution_oracle(freq, h, s_max), atol=1e-10)
        assert np.all(got >= 0.0)
        assert got[0] == pytest.approx(float(pmf(freq, 0)), rel=1e-15)

    @pytest.mark.parametrize("s_max", [0, 1, 7, 39, 40, 41])
    def test_support_longer_or_shorter_than_range(self, s_max):
        # claim sizes 1..40 against totals on both sides of 40
        h = np.zeros(41)
        h[1:] = np.random.default_rng(5).dirichlet(np.ones(40))
        freq = PteParams(0.6, 0.4)
        got = compound_pmf_discrete(freq, DiscreteSeverity(h), s_max)
        np.testing.assert_allclose(got, _convolution_oracle(freq, h, s_max), atol=1e-10)

    def test_mass_approaches_one(self):
        freq = PteParams(0.2, 1.5)
        masses = compound_pmf_discrete(freq, DiscreteSeverity(np.array([0.0, 0.3, 0.7])), 400)
        assert math.fsum(masses) == pytest.approx(1.0, abs=1e-12)

    def test_mixture_decomposition(self):
        sev = DiscreteSeverity(np.array([0.0, 0.2, 0.5, 0.3]))
        whole = compound_pmf_discrete(PteParams(-0.4, 0.9), sev, 25)
        parts = 1.4 * compound_pmf_discrete(PteParams(0, 0.9), sev, 25) - 0.4 * compound_pmf_discrete(
            PteParams(1, 0.9), sev, 25
        )
        np.testing.assert_allclose(whole, parts, atol=1e-10)

    def test_budget(self):
        sev = DiscreteSeverity(np.array([0.0, 1.0]))
        with pytest.raises(TruncationBudgetExceeded):
            compound_pmf_discrete(PteParams(0, 1), sev, 10, max_rows=5)
        with pytest.raises(ValueError):
            compound_pmf_discrete(PteParams(0, 1), sev, -1)

    @pytest.mark.slow
    def test_discretized_exponential_matches_density(self):
        freq, lam, width = PteParams(0.4, 0.8), 2.0, 1e-2
        thinned, sev = discretize(freq, ExponentialSeverity(lam), width, 2000)
        masses = compound_pmf_discrete(thinned, sev, 400)
        ks = np.arange(1, 401)
        reference = width * compound_density_exp(freq, lam, ks * width)
        keep = reference > 1e-4
        np.testing.assert_allclose(masses[1:][keep], reference[keep], rtol=1e-2)
        assert masses[0] == pytest.approx(pmf(freq, 0), abs=5e-3)


class TestSeverities:
    def test_discrete_validation(self):
        with pytest.raises(DomainError):
            DiscreteSeverity(np.array([0.1, 0.9]))
        with pytest.raises(DomainError):
            DiscreteSeverity(np.array([0.0, 0.5, 0.4]))
        with pytest.raises(DomainError):
            DiscreteSeverity.from_pairs([(0, 0.5), (1, 0.5)])

    def test_discrete_trims_trailing_zeros(self):
        sev = DiscreteSeverity.from_pairs([(1, 0.25), (3, 0.75), (5, 0.0)])
        assert sev.max_value == 3
        assert sev.mean == pytest.approx(2.5)

    def test_continuous_means(self):
        assert ExponentialSeverity(4.0).mean == 0.25
        assert Erlang2Severity(4.0).mean == 0.5

    def test_discretize_thins_counts(self):
        freq = PteParams(0.3, 1.0)
        thinned, sev = discretize(freq, ExponentialSeverity(1.0), 0.5, 100)
        kept = math.exp(-0.25)
        assert thinned.alpha == 0.3
        assert thinned.theta == pytest.approx(1.0 / kept, rel=1e-12)
        assert math.fsum(sev.probs) == pytest.approx(1.0, abs=1e-12)

    def test_discretize_rejects_width_that_swallows_all_claims(self):
        with pytest.raises(ValueError, match="rounds every claim"):
            discretize(PteParams(0.3, 1.0), ExponentialSeverity(1.0), 1e6, 10)


class TestDerivedQuantities:
    @pytest.mark.parametrize(
        "severity",
        [ExponentialSeverity(1.5), Erlang2Severity(2.0), DiscreteSeverity(np.array([0.0, 0.6, 0.4]))],
    )
    def test_stop_loss_at_zero_is_mean(self, severity):
        dist = CompoundDistribution(PteParams(-0.3, 0.9), severity)
        assert stop_loss_premium(dist, 0.0) == pytest.approx(dist.mean, rel=1e-7)

    def test_stop_loss_decreases(self):
        dist = CompoundDistribution(PteParams(0.5, 0.7), ExponentialSeverity(1.0))
        values = [stop_loss_premium(dist, d) for d in (0.0, 1.0, 2.5, 5.0)]
        assert all(a > b for a, b in zip(values, values[1:]))
        with pytest.raises(ValueError):
            stop_loss_premium(dist, -1.0)

    def test_cdf(self):
        dist = CompoundDistribution(PteParams(0, 1), ExponentialSeverity(1.0))
        assert compound_cdf(dist, -1.0) == 0.0
        assert compound_cdf(dist, 0.0) == pytest.approx(0.5)
        # α = 0: S > 0 is exponential with rate 1/2 and weight 1/2
        assert compound_cdf(dist, 2.0) == pytest.approx(1.0 - 0.5 * math.exp(-1.0), rel=1e-10)
        lattice = CompoundDistribution(PteParams(0, 1), DiscreteSeverity(np.array([0.0, 1.0])))
        assert compound_cdf(lattice, 1.5) == pytest.approx(0.75)


class TestSimulation:
    def test_empty(self, rng):
        assert simulate_aggregate(PteParams(0, 1), ExponentialSeverity(1.0), 0, rng).size == 0

    def test_reproducible(self):
        sev = DiscreteSeverity(np.array([0.0, 0.5, 0.5]))
        a = simulate_aggregate(PteParams(0.2, 1.0), sev, 500, RngStream(1))
        b = simulate_aggregate(PteParams(0.2, 1.0), sev, 500, RngStream(1))
        np.testing.assert_array_equal(a, b)

    @pytest.mark.slow
    def test_atom_and_mean(self, rng):
        draws = simulate_aggregate(PteParams(0, 1), ExponentialSeverity(1.0), 100_000, rng)
        assert np.mean(draws == 0.0) == pytest.approx(0.5, abs=0.005)
        # Var S = E[X]Var[Y] + Var[X]E[Y]^2 = 3
        assert abs(draws.mean() - 1.0) < 4 * math.sqrt(3 / 100_000)

    @pytest.mark.slow
    def test_lattice_simulation_matches_recursion(self, rng):
        freq, sev = PteParams(-0.5, 0.6), DiscreteSeverity(np.array([0.0, 0.3, 0.5, 0.2]))
        draws = simulate_aggregate(freq, sev, 100_000, rng).astype(np.int64)
        exact = compound_pmf_discrete(freq, sev, 6)
        observed = np.bincount(draws, minlength=7)[:7] / draws.size
        np.testing.assert_allclose(observed, exact, atol=0.006)

    @pytest.mark.slow
    def test_exponential_density_by_histogram(self, rng):
        freq, lam = PteParams(0.4, 0.8), 2.0
        draws = simulate_aggregate(freq, ExponentialSeverity(lam), 200_000, rng)
        frac = np.mean((draws > 1.25) & (draws <= 1.75))
        mass, _ = integrate.quad(lambda y: compound_density_exp(freq, lam, y), 1.25, 1.75)
        assert abs(frac - mass) < 4 * math.sqrt(mass * (1 - mass) / draws.size)
