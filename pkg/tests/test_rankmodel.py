from fractions import Fraction

import numpy as np
import pytest

from srd import (
    BetaBinomialModel,
    FitConfig,
    FitConvergenceError,
    FitError,
    RankDistribution,
    betabinom_pmf,
    fit,
    log_likelihood,
    penalized_loss,
    synth_rank_samples,
)
from srd.rankmodel import CONSTRAINT_FORM

from oracles import exact_betabinom_pmf


class TestBetabinomPmf:
    def test_uniform_parameters_give_exact_chance(self):
        gamma = betabinom_pmf(1.0, 1.0, 40)
        assert np.all(gamma == 1.0 / 40.0)

    def test_two_reference_closed_form(self):
        # N=2, alpha=1, beta=2: gamma = (2/3, 1/3)
        gamma = betabinom_pmf(1.0, 2.0, 2)
        np.testing.assert_allclose(gamma, [2 / 3, 1 / 3], rtol=0, atol=1e-12)

    def test_agrees_with_exact_rational_arithmetic(self):
        values = [Fraction(1, 2), Fraction(1), Fraction(2), Fraction(5)]
        for n_refs in range(2, 13):
            for alpha in values:
                for beta in values:
                    got = betabinom_pmf(float(alpha), float(beta), n_refs)
                    want = [float(g) for g in exact_betabinom_pmf(alpha, beta, n_refs)]
                    np.testing.assert_allclose(got, want, rtol=0, atol=1e-10)

    def test_sums_to_one_across_parameter_box(self):
        for alpha in (1e-3, 0.04, 1.0, 37.0, 1e3):
            for beta in (1e-3, 0.5, 1.0, 250.0, 1e3):
                gamma = betabinom_pmf(alpha, beta, 40)
                assert abs(gamma.sum() - 1.0) <= 1e-9
                assert np.all(gamma > 0.0)

    def test_monotone_decreasing_when_alpha_below_one_below_beta(self):
        gamma = betabinom_pmf(0.7, 4.0, 25)
        assert np.all(np.diff(gamma) < 0.0)

    def test_symmetry_under_parameter_swap(self):
        forward = betabinom_pmf(2.0, 7.0, 15)
        backward = betabinom_pmf(7.0, 2.0, 15)
        np.testing.assert_allclose(forward, backward[::-1], rtol=0, atol=1e-14)

    def test_invalid_parameters_rejected(self):
        for alpha, beta in ((0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (np.nan, 1.0)):
            with pytest.raises(FitError):
                betabinom_pmf(alpha, beta, 10)
        with pytest.raises(FitError):
            betabinom_pmf(1.0, 1.0, 1)


class TestLogLikelihood:
    def test_single_observation_uniform_model(self):
        # one rank-1 observation among 4 references: ln(1/4)
        dist = RankDistribution.from_ranks([1], 4)
        assert log_likelihood(dist, 1.0, 1.0) == pytest.approx(np.log(0.25), abs=1e-12)

    def test_scales_linearly_with_counts(self):
        single = RankDistribution.from_counts([3, 2, 1, 0, 4])
        double = RankDistribution.from_counts([6, 4, 2, 0, 8])
        assert log_likelihood(double, 2.0, 3.0) == pytest.approx(
            2.0 * log_likelihood(single, 2.0, 3.0), rel=1e-12
        )

    def test_never_positive(self):
        dist = RankDistribution.from_counts([5, 3, 2])
        assert log_likelihood(dist, 0.8, 1.7) < 0.0


class TestFit:
    def test_exactly_uniform_counts_recover_chance(self):
        dist = RankDistribution.from_counts(np.full(40, 25))
        model = fit(dist)
        assert np.abs(model.gamma - 1.0 / 40.0).max() <= 1e-3

    def test_recovers_generating_parameters(self):
        dist = synth_rank_samples(2.0, 5.0, 40, 10_000, seed=1234)
        model = fit(dist)
        assert abs(model.alpha - 2.0) / 2.0 < 0.10
        assert abs(model.beta - 5.0) / 5.0 < 0.10

    def test_rank1_probability_anchored(self):
        dist = synth_rank_samples(0.8, 3.0, 30, 4_000, seed=77)
        model = fit(dist)
        assert abs(model.gamma[0] - dist.probabilities[0]) <= 5e-3

    def test_loss_not_above_starting_point(self):
        dist = synth_rank_samples(1.5, 2.0, 20, 500, seed=3)
        config = FitConfig(initializer="fixed")
        model = fit(dist, config)
        start_loss = penalized_loss(dist, 1.0, 1.0, config.rank1_penalty_weight)
        assert model.loss <= start_loss + 1e-12

    def test_unpenalised_fit_tightens_with_more_data(self):
        # total-variation distance to the generating pmf shrinks as counts grow
        truth = betabinom_pmf(1.8, 4.0, 25)
        config = FitConfig(rank1_penalty_weight=0.0)
        tv = {}
        for n_samples in (100, 10_000):
            dist = synth_rank_samples(1.8, 4.0, 25, n_samples, seed=42)
            model = fit(dist, config)
            tv[n_samples] = 0.5 * np.abs(model.gamma - truth).sum()
        assert tv[10_000] < tv[100]

    def test_deterministic(self):
        dist = synth_rank_samples(2.5, 1.5, 15, 2_000, seed=9)
        first = fit(dist)
        second = fit(dist)
        assert first.alpha == second.alpha and first.beta == second.beta

    def test_multistart_no_worse_than_single_start(self):
        dist = synth_rank_samples(0.4, 0.9, 25, 3_000, seed=21)
        single = fit(dist, FitConfig())
        multi = fit(dist, FitConfig(multistart=True))
        assert multi.loss <= single.loss + 1e-9

    def test_parameters_stay_inside_box(self):
        # a point mass at rank 1 pushes alpha toward 0; the box clamps it
        dist = RankDistribution.from_counts([50] + [0] * 19)
        model = fit(dist)
        assert 1e-3 <= model.alpha <= 1e3
        assert 1e-3 <= model.beta <= 1e3
        assert np.all(model.gamma > 0.0)

    def test_iteration_budget_exhaustion_raises_with_iterate(self):
        dist = synth_rank_samples(2.0, 5.0, 40, 1_000, seed=5)
        with pytest.raises(FitConvergenceError) as excinfo:
            fit(dist, FitConfig(max_iterations=2))
        err = excinfo.value
        assert err.iterations <= 2
        assert np.isfinite(err.loss)
        assert err.alpha > 0.0 and err.beta > 0.0

    def test_config_validation(self):
        with pytest.raises(FitError):
            FitConfig(rank1_penalty_weight=-1.0)
        with pytest.raises(FitError):
            FitConfig(tolerance=0.0)
        with pytest.raises(FitError):
            FitConfig(max_iterations=0)
        with pytest.raises(FitError):
            FitConfig(initializer="random")


class TestBetaBinomialModel:
    def test_json_round_trip_and_metadata(self):
        dist = synth_rank_samples(1.2, 3.4, 12, 600, seed=2)
        model = fit(dist)
        payload = model.to_json_dict()
        assert payload["constraint_form"] == CONSTRAINT_FORM
        assert payload["n_references"] == 12
        assert len(payload["gamma"]) == 12
        clone = BetaBinomialModel.from_json_dict(payload)
        assert clone.alpha == model.alpha
        assert clone.iterations == model.iterations

    def test_from_parameters(self):
        model = BetaBinomialModel.from_parameters(2.0, 2.0, 10)
        assert model.loss is None
        np.testing.assert_allclose(model.gamma, betabinom_pmf(2.0, 2.0, 10))

    def test_validation(self):
        good = betabinom_pmf(1.0, 1.0, 5)
        with pytest.raises(FitError):
            BetaBinomialModel(1e-4, 1.0, 5, good)  # below the box
        with pytest.raises(FitError):
            BetaBinomialModel(1.0, 1.0, 5, good * 2.0)  # wrong sum
        with pytest.raises(FitError):
            BetaBinomialModel(1.0, 1.0, 4, good)  # wrong length

    def test_corrupt_json_rejected(self):
        with pytest.raises(FitError, match="missing key"):
            BetaBinomialModel.from_json_dict({"alpha": 1.0})
        payload = BetaBinomialModel.from_parameters(1.0, 1.0, 4).to_json_dict()
        payload["gamma"] = [0.9, 0.9, 0.9, 0.9]
        with pytest.raises(FitError, match="sums to"):
            BetaBinomialModel.from_json_dict(payload)
