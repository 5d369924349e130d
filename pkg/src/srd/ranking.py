"""Similarity scoring and matching-reference ranking.

Each input is scored against every reference; the rank of its own speaker's
reference under descending score is the per-trial outcome. Ties are broken by
ascending reference ``speaker_id`` so results never depend on memory layout or
sort stability, and ranks are computed by counting rather than sorting:

    rank = 1 + #{better scores} + #{equal scores from lexically smaller ids}
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .corpus import Cohort, CorpusError, FeatureVector, UtteranceRecord

COSINE = "cosine_similarity"
NEG_EUCLIDEAN = "negative_euclidean"
MEASURES = (COSINE, NEG_EUCLIDEAN)

_BLOCK = 1024  # input rows scored per pass


class RankingError(ValueError):
    """Invalid scoring request or a cohort the ranker cannot handle."""


def _check_measure(measure: str) -> None:
    if measure not in MEASURES:
        raise RankingError(f"unknown similarity measure {measure!r}")


def similarity(x: FeatureVector, y: FeatureVector, measure: str) -> float:
    """Score two feature vectors; higher always means more similar."""
    _check_measure(measure)
    a, b = x.values, y.values
    if a.size != b.size:
        raise RankingError(f"dimension mismatch: {a.size} vs {b.size}")
    if measure == COSINE:
        na = float(np.linalg.norm(a))
        nb = float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            raise RankingError("cosine similarity is undefined for zero vectors")
        return float(np.dot(a, b) / (na * nb))
    return float(-np.linalg.norm(a - b))


def score_matrix(
    input_vectors: np.ndarray, reference_vectors: np.ndarray, measure: str
) -> np.ndarray:
    """``(n_inputs, n_references)`` similarity scores, blocked over inputs."""
    _check_measure(measure)
    X = np.atleast_2d(np.asarray(input_vectors, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(reference_vectors, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise RankingError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    out = np.empty((X.shape[0], Y.shape[0]))
    if measure == COSINE:
        y_norms = np.linalg.norm(Y, axis=1)
        if np.any(y_norms == 0.0):
            bad = int(np.flatnonzero(y_norms == 0.0)[0])
            raise RankingError(f"reference row {bad} is a zero vector")
        Yn = Y / y_norms[:, None]
        for lo in range(0, X.shape[0], _BLOCK):
            block = X[lo : lo + _BLOCK]
            x_norms = np.linalg.norm(block, axis=1)
            if np.any(x_norms == 0.0):
                bad = lo + int(np.flatnonzero(x_norms == 0.0)[0])
                raise RankingError(f"input row {bad} is a zero vector")
            out[lo : lo + _BLOCK] = (block / x_norms[:, None]) @ Yn.T
    else:
        for lo in range(0, X.shape[0], _BLOCK):
            out[lo : lo + _BLOCK] = -cdist(X[lo : lo + _BLOCK], Y)
    return out


@dataclass(frozen=True)
class RankObservation:
    """Rank of one input's matching reference, with its identifiers."""

    utterance_id: str
    speaker_id: str
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise RankingError("ranks are 1-based")


@dataclass(frozen=True)
class RankDistribution:
    """Distribution of matching-reference ranks over 1..n_references."""

    n_references: int
    counts: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if not np.issubdtype(counts.dtype, np.integer):
            if not np.all(counts == np.round(counts)):
                raise RankingError("rank counts must be integers")
            counts = counts.astype(np.int64)
        else:
            counts = counts.astype(np.int64)
        if self.n_references < 1 or counts.shape != (self.n_references,):
            raise RankingError(
                f"need one count per rank 1..{self.n_references}, "
                f"got shape {counts.shape}"
            )
        if np.any(counts < 0):
            raise RankingError("rank counts must be non-negative")
        total = int(counts.sum())
        if total < 1:
            raise RankingError("rank distribution needs at least one observation")
        probabilities = np.asarray(self.probabilities, dtype=np.float64)
        if probabilities.shape != counts.shape or not np.allclose(
            probabilities, counts / total, rtol=0.0, atol=1e-12
        ):
            raise RankingError("probabilities must equal counts / total")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "probabilities", counts / total)

    @classmethod
    def from_counts(cls, counts: Sequence[int], n_references: int | None = None):
        counts = np.asarray(counts)
        if n_references is None:
            n_references = int(counts.size)
        total = counts.sum()
        if total < 1:
            raise RankingError("rank distribution needs at least one observation")
        return cls(n_references, counts, counts / total)

    @classmethod
    def from_ranks(cls, ranks: Sequence[int], n_references: int):
        ranks = np.asarray(ranks, dtype=np.int64)
        if ranks.size == 0:
            raise RankingError("rank distribution needs at least one observation")
        if np.any(ranks < 1) or np.any(ranks > n_references):
            raise RankingError(f"ranks must lie in 1..{n_references}")
        counts = np.bincount(ranks - 1, minlength=n_references)
        return cls.from_counts(counts, n_references)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json_dict(self) -> dict:
        return {
            "n_references": self.n_references,
            "counts": [int(c) for c in self.counts],
            "probabilities": [float(p) for p in self.probabilities],
        }

    @classmethod
    def from_json_dict(cls, data: dict):
        try:
            return cls.from_counts(
                np.asarray(data["counts"]), int(data["n_references"])
            )
        except KeyError as exc:
            raise RankingError(f"rank distribution JSON missing key {exc}") from None


@dataclass(frozen=True)
class RankingResult:
    """All per-input rank observations for a cohort, plus tie bookkeeping.

    ``tie_count`` totals the non-matching references whose score exactly
    equals the matching reference's score; a non-zero value usually signals
    quantised or duplicated features and is worth surfacing in diagnostics.
    """

    observations: tuple[RankObservation, ...]
    distribution: RankDistribution
    tie_count: int
    score_at_rank1: np.ndarray
    score_of_match: np.ndarray

    def observation_rows(self) -> Iterator[dict]:
        """Rows for the observation-dump CSV, one per input."""
        for i, obs in enumerate(self.observations):
            yield {
                "utterance_id": obs.utterance_id,
                "speaker_id": obs.speaker_id,
                "rank": obs.rank,
                "score_at_rank1": float(self.score_at_rank1[i]),
                "score_of_match": float(self.score_of_match[i]),
            }


def ranks_from_score_matrix(
    scores: np.ndarray,
    reference_speakers: Sequence[str],
    input_speakers: Sequence[str],
) -> np.ndarray:
    """Matching-reference rank per score-matrix row.

    Depends only on score order, so any strictly increasing rescoring leaves
    the ranks unchanged.
    """
    S = np.asarray(scores, dtype=np.float64)
    ref_ids = np.asarray(reference_speakers)
    in_ids = np.asarray(input_speakers)
    if S.shape != (in_ids.size, ref_ids.size):
        raise RankingError(
            f"score matrix shape {S.shape} does not match "
            f"{in_ids.size} inputs x {ref_ids.size} references"
        )
    col_of = {spk: j for j, spk in enumerate(ref_ids)}
    try:
        match_col = np.array([col_of[spk] for spk in in_ids])
    except KeyError as exc:
        raise RankingError(f"speaker {exc} has no reference") from None
    match_score = S[np.arange(S.shape[0]), match_col]
    better = (S > match_score[:, None]).sum(axis=1)
    equal = S == match_score[:, None]
    smaller_id = ref_ids[None, :] < in_ids[:, None]
    return 1 + better + (equal & smaller_id).sum(axis=1)


def rank_cohort(cohort: Cohort, measure: str) -> RankingResult:
    """Rank every input's matching reference within ``cohort``."""
    if not cohort.inputs:
        raise RankingError("cohort has no inputs to rank")
    _check_measure(measure)
    ref_ids = cohort.reference_speakers()
    in_ids = [record.speaker_id for record in cohort.inputs]
    try:
        S = score_matrix(cohort.input_matrix(), cohort.reference_matrix(), measure)
    except RankingError as exc:
        raise _name_offender(str(exc), cohort) from None
    ranks = ranks_from_score_matrix(S, ref_ids, in_ids)
    match_col = {spk: j for j, spk in enumerate(ref_ids)}
    cols = np.array([match_col[spk] for spk in in_ids])
    match_score = S[np.arange(S.shape[0]), cols]
    tie_count = int(((S == match_score[:, None]).sum(axis=1) - 1).sum())
    observations = tuple(
        RankObservation(record.utterance_id, record.speaker_id, int(rank))
        for record, rank in zip(cohort.inputs, ranks)
    )
    return RankingResult(
        observations=observations,
        distribution=RankDistribution.from_ranks(ranks, cohort.n_references),
        tie_count=tie_count,
        score_at_rank1=S.max(axis=1),
        score_of_match=match_score,
    )


def _name_offender(message: str, cohort: Cohort) -> RankingError:
    # map score_matrix's row indices back to utterance / speaker names
    for prefix, names in (
        ("input row ", [r.utterance_id for r in cohort.inputs]),
        ("reference row ", cohort.reference_speakers()),
    ):
        if message.startswith(prefix):
            idx = int(message[len(prefix) :].split()[0])
            kind = "input utterance" if prefix.startswith("input") else "reference for speaker"
            return RankingError(f"{kind} {names[idx]!r} is a zero vector")
    return RankingError(message)


def rank_of_match(
    input_record: UtteranceRecord, cohort: Cohort, measure: str
) -> RankObservation:
    """Rank of ``input_record``'s own-speaker reference among all references."""
    _check_measure(measure)
    ref_ids = cohort.reference_speakers()
    if input_record.speaker_id not in ref_ids:
        raise RankingError(
            f"input utterance {input_record.utterance_id!r}: speaker "
            f"{input_record.speaker_id!r} has no reference in the cohort"
        )
    if input_record.feature.dim != cohort.references[0][1].dim:
        raise RankingError(
            f"input utterance {input_record.utterance_id!r}: dimension "
            f"{input_record.feature.dim} vs cohort {cohort.references[0][1].dim}"
        )
    try:
        S = score_matrix(
            input_record.feature.values[None, :], cohort.reference_matrix(), measure
        )
    except RankingError as exc:
        raise RankingError(
            f"input utterance {input_record.utterance_id!r}: {exc}"
        ) from None
    rank = ranks_from_score_matrix(S, ref_ids, [input_record.speaker_id])[0]
    return RankObservation(input_record.utterance_id, input_record.speaker_id, int(rank))


def rank_histogram(cohort: Cohort, measure: str) -> RankDistribution:
    """Empirical rank distribution for a cohort (see :func:`rank_cohort`)."""
    return rank_cohort(cohort, measure).distribution
