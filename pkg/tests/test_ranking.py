import numpy as np
import pytest

from srd import (
    Cohort,
    COSINE,
    FeatureVector,
    NEG_EUCLIDEAN,
    RankDistribution,
    RankingError,
    UtteranceRecord,
    rank_cohort,
    rank_histogram,
    rank_of_match,
    ranks_from_score_matrix,
    rng,
    score_matrix,
    similarity,
)

from oracles import brute_force_ranks


def _cohort_1d(input_positions, reference_positions, input_speakers=None):
    """1-d embeddings under negative_euclidean let tests place scores exactly."""
    references = tuple(
        (spk, FeatureVector([float(pos), 0.0])) for spk, pos in reference_positions
    )
    speakers = input_speakers or [spk for spk, _ in reference_positions]
    inputs = tuple(
        UtteranceRecord(f"in{i}", spk, FeatureVector([float(pos), 0.0]))
        for i, (spk, pos) in enumerate(zip(speakers, input_positions))
    )
    return Cohort(inputs=inputs, references=references, n_references=len(references))


def _random_cohort(seed, n_speakers, inputs_per_speaker, dim, kind="embedding"):
    u = rng.uniforms(seed, n_speakers * (1 + inputs_per_speaker) * dim)
    u = u.reshape(n_speakers, 1 + inputs_per_speaker, dim) + 0.1
    references = []
    inputs = []
    for s in range(n_speakers):
        spk = f"s{s:02d}"
        vectors = u[s]
        if kind == "histogram":
            vectors = vectors / vectors.sum(axis=1, keepdims=True)
        references.append((spk, FeatureVector(vectors[0], kind)))
        for j in range(inputs_per_speaker):
            inputs.append(
                UtteranceRecord(f"{spk}_u{j}", spk, FeatureVector(vectors[1 + j], kind))
            )
    return Cohort(inputs=tuple(inputs), references=tuple(references), n_references=n_speakers)


class TestSimilarity:
    def test_cosine_hand_value(self):
        # (1,2,2).(2,1,2) = 8, norms 3 and 3 -> 8/9
        a = FeatureVector([1.0, 2.0, 2.0])
        b = FeatureVector([2.0, 1.0, 2.0])
        assert similarity(a, b, COSINE) == pytest.approx(8 / 9, abs=1e-12)

    def test_cosine_self_similarity_is_one(self):
        a = FeatureVector([0.3, -1.2, 4.0])
        assert similarity(a, a, COSINE) == pytest.approx(1.0, abs=1e-12)

    def test_cosine_scale_invariant(self):
        a = FeatureVector([1.0, 2.0, 2.0])
        b = FeatureVector([2.0, 1.0, 2.0])
        b_scaled = FeatureVector(7.5 * b.values)
        assert similarity(a, b, COSINE) == pytest.approx(
            similarity(a, b_scaled, COSINE), abs=1e-12
        )

    def test_negative_euclidean_identity_and_sign(self):
        a = FeatureVector([1.0, 1.0])
        b = FeatureVector([4.0, 5.0])
        assert similarity(a, a, NEG_EUCLIDEAN) == 0.0
        assert similarity(a, b, NEG_EUCLIDEAN) == pytest.approx(-5.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(RankingError, match="dimension"):
            similarity(FeatureVector([1.0]), FeatureVector([1.0, 2.0]), COSINE)

    def test_zero_vector_rejected_for_cosine_only(self):
        zero = FeatureVector([0.0, 0.0])
        one = FeatureVector([1.0, 0.0])
        with pytest.raises(RankingError, match="zero"):
            similarity(zero, one, COSINE)
        assert similarity(zero, one, NEG_EUCLIDEAN) == -1.0

    def test_unknown_measure(self):
        with pytest.raises(RankingError, match="measure"):
            similarity(FeatureVector([1.0]), FeatureVector([1.0]), "manhattan")


class TestScoreMatrix:
    def test_matches_scalar_similarity(self):
        X = rng.normals(1, 5 * 4).reshape(5, 4)
        Y = rng.normals(2, 3 * 4).reshape(3, 4)
        for measure in (COSINE, NEG_EUCLIDEAN):
            S = score_matrix(X, Y, measure)
            for i in range(5):
                for j in range(3):
                    expected = similarity(
                        FeatureVector(X[i]), FeatureVector(Y[j]), measure
                    )
                    assert S[i, j] == pytest.approx(expected, abs=1e-12)

    def test_zero_rows_named(self):
        X = np.array([[1.0, 0.0], [0.0, 0.0]])
        Y = np.array([[1.0, 1.0]])
        with pytest.raises(RankingError, match="input row 1"):
            score_matrix(X, Y, COSINE)
        with pytest.raises(RankingError, match="reference row 0"):
            score_matrix(X[:1], np.zeros((1, 2)), COSINE)


class TestRankOfMatch:
    def test_input_equal_to_reference_ranks_first(self):
        cohort = _cohort_1d([0.0, 5.0, 9.0], [("a", 0.0), ("b", 5.0), ("c", 9.0)])
        for record in cohort.inputs:
            assert rank_of_match(record, cohort, NEG_EUCLIDEAN).rank == 1

    def test_two_better_references_give_rank_three(self):
        # input at 0; own reference at 0.8, others at 0.1 and 0.5
        cohort = _cohort_1d([0.0], [("a", 0.1), ("b", 0.5), ("c", 0.8)], ["c"])
        obs = rank_of_match(cohort.inputs[0], cohort, NEG_EUCLIDEAN)
        assert obs.rank == 3
        assert obs.utterance_id == "in0"

    def test_tie_goes_to_lexically_smaller_speaker(self):
        # equidistant references; the match's id "b" sorts after "a"
        cohort = _cohort_1d([0.0], [("a", -1.0), ("b", 1.0)], ["b"])
        assert rank_of_match(cohort.inputs[0], cohort, NEG_EUCLIDEAN).rank == 2
        # and the match wins the tie when its id is the smaller one
        cohort2 = _cohort_1d([0.0], [("b", -1.0), ("a", 1.0)], ["a"])
        assert rank_of_match(cohort2.inputs[0], cohort2, NEG_EUCLIDEAN).rank == 1

    def test_missing_speaker_names_utterance(self):
        cohort = _cohort_1d([0.0, 1.0], [("a", 0.0), ("b", 1.0)])
        stranger = UtteranceRecord("ux", "zz", FeatureVector([1.0, 0.0]))
        with pytest.raises(RankingError, match="'ux'.*'zz'"):
            rank_of_match(stranger, cohort, NEG_EUCLIDEAN)

    def test_zero_vector_input_names_utterance(self):
        cohort = _cohort_1d([1.0, 2.0], [("a", 1.0), ("b", 2.0)])
        zero = UtteranceRecord("uz", "a", FeatureVector([0.0, 0.0]))
        with pytest.raises(RankingError, match="'uz'"):
            rank_of_match(zero, cohort, COSINE)


class TestRankCohort:
    def test_identical_input_and_reference_features_rank_one(self):
        cohort = _random_cohort(seed=5, n_speakers=6, inputs_per_speaker=1, dim=4)
        same = Cohort(
            inputs=tuple(
                UtteranceRecord(f"i{k}", spk, fv)
                for k, (spk, fv) in enumerate(cohort.references)
            ),
            references=cohort.references,
            n_references=cohort.n_references,
        )
        dist = rank_histogram(same, COSINE)
        assert dist.probabilities[0] == 1.0

    def test_counts_sum_to_inputs(self):
        cohort = _random_cohort(seed=8, n_speakers=7, inputs_per_speaker=3, dim=5)
        result = rank_cohort(cohort, COSINE)
        assert result.distribution.total == cohort.n_inputs
        assert len(result.observations) == cohort.n_inputs

    @pytest.mark.parametrize("measure", [COSINE, NEG_EUCLIDEAN])
    def test_agrees_with_stable_sort_oracle(self, measure):
        for seed in range(30):
            cohort = _random_cohort(
                seed=seed,
                n_speakers=2 + seed % 6,
                inputs_per_speaker=1 + seed % 4,
                dim=2 + seed % 4,
            )
            got = [obs.rank for obs in rank_cohort(cohort, measure).observations]
            assert got == brute_force_ranks(cohort, measure), f"seed {seed}"

    def test_exact_tie_counted_and_ranked_deterministically(self):
        # both non-match references sit exactly as far as the match
        cohort = _cohort_1d(
            [0.0], [("a", -1.0), ("b", 1.0), ("c", 0.5)], ["b"]
        )
        result = rank_cohort(cohort, NEG_EUCLIDEAN)
        assert result.tie_count == 1
        assert result.observations[0].rank == 3  # c closer, a wins the tie

    def test_no_ties_on_generic_data(self):
        cohort = _random_cohort(seed=4, n_speakers=8, inputs_per_speaker=2, dim=6)
        assert rank_cohort(cohort, COSINE).tie_count == 0

    def test_scores_exposed_per_observation(self):
        cohort = _cohort_1d([0.0], [("a", 0.1), ("b", 0.5), ("c", 0.8)], ["c"])
        result = rank_cohort(cohort, NEG_EUCLIDEAN)
        rows = list(result.observation_rows())
        assert rows[0]["score_at_rank1"] == pytest.approx(-0.1)
        assert rows[0]["score_of_match"] == pytest.approx(-0.8)
        assert rows[0]["rank"] == 3

    def test_monotone_score_transform_preserves_ranks(self):
        cohort = _random_cohort(seed=21, n_speakers=9, inputs_per_speaker=2, dim=4)
        S = score_matrix(cohort.input_matrix(), cohort.reference_matrix(), COSINE)
        ref_ids = cohort.reference_speakers()
        in_ids = [r.speaker_id for r in cohort.inputs]
        base = ranks_from_score_matrix(S, ref_ids, in_ids)
        for transform in (lambda s: 3.0 * s + 7.0, np.exp, np.tanh):
            assert np.array_equal(
                ranks_from_score_matrix(transform(S), ref_ids, in_ids), base
            )

    def test_coordinate_permutation_preserves_ranks(self):
        cohort = _random_cohort(seed=13, n_speakers=6, inputs_per_speaker=3, dim=8)
        perm = rng.permutation(2, 8)
        permuted = Cohort(
            inputs=tuple(
                UtteranceRecord(r.utterance_id, r.speaker_id, FeatureVector(r.feature.values[perm]))
                for r in cohort.inputs
            ),
            references=tuple(
                (spk, FeatureVector(fv.values[perm])) for spk, fv in cohort.references
            ),
            n_references=cohort.n_references,
        )
        for measure in (COSINE, NEG_EUCLIDEAN):
            before = [o.rank for o in rank_cohort(cohort, measure).observations]
            after = [o.rank for o in rank_cohort(permuted, measure).observations]
            assert before == after

    def test_speaker_agnostic_features_give_near_uniform_histogram(self):
        # inputs carry no identity signal, so every rank is equally likely
        n_refs, n_inputs, dim = 40, 4000, 6
        ref_vectors = rng.normals(100, n_refs * dim).reshape(n_refs, dim)
        in_vectors = rng.normals(200, n_inputs * dim).reshape(n_inputs, dim)
        references = tuple(
            (f"s{j:02d}", FeatureVector(ref_vectors[j])) for j in range(n_refs)
        )
        inputs = tuple(
            UtteranceRecord(f"u{i}", f"s{i % n_refs:02d}", FeatureVector(in_vectors[i]))
            for i in range(n_inputs)
        )
        cohort = Cohort(inputs=inputs, references=references, n_references=n_refs)
        dist = rank_histogram(cohort, COSINE)
        assert np.abs(dist.probabilities - 1 / 40).max() < 0.015

    def test_empty_cohort_inputs_rejected(self):
        cohort = _random_cohort(seed=3, n_speakers=4, inputs_per_speaker=1, dim=3)
        empty = Cohort(
            inputs=(), references=cohort.references, n_references=cohort.n_references
        )
        with pytest.raises(RankingError, match="no inputs"):
            rank_cohort(empty, COSINE)


class TestRankDistribution:
    def test_from_ranks_counts(self):
        dist = RankDistribution.from_ranks([1, 1, 2, 4], 4)
        assert dist.counts.tolist() == [2, 1, 0, 1]
        np.testing.assert_allclose(dist.probabilities, [0.5, 0.25, 0.0, 0.25])
        assert dist.total == 4

    def test_rank_bounds_enforced(self):
        with pytest.raises(RankingError):
            RankDistribution.from_ranks([0], 4)
        with pytest.raises(RankingError):
            RankDistribution.from_ranks([5], 4)

    def test_rejects_empty_negative_or_inconsistent(self):
        with pytest.raises(RankingError):
            RankDistribution.from_counts([0, 0, 0])
        with pytest.raises(RankingError):
            RankDistribution.from_counts([-1, 2])
        with pytest.raises(RankingError):
            RankDistribution(2, np.array([1, 1]), np.array([0.9, 0.1]))
        with pytest.raises(RankingError):
            RankDistribution.from_counts([1.5, 2.5])

    def test_json_round_trip(self):
        dist = RankDistribution.from_ranks([1, 2, 2, 3], 5)
        clone = RankDistribution.from_json_dict(dist.to_json_dict())
        assert np.array_equal(clone.counts, dist.counts)
        assert clone.n_references == 5
