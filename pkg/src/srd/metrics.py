"""Disclosure metrics over rank distributions, plus a score-based EER.

Disclosure at rank ``j`` is ``log2(N * gamma_j)`` bits: how much more likely
the matching reference is to land at rank ``j`` than chance (1/N). Positive
means leakage, zero means chance, negative means below chance. (The additive
inverse, ``-log2 gamma_j - log2 N``, measures the same quantity as residual
uncertainty with the sign flipped; everything here reports disclosure, so a
56.63% rank-1 probability among 40 references reads +4.50 bits, not -4.50.)

Summary metrics over a distribution:

* MaxD: worst-case disclosure over ranks (observed ranks in empirical mode,
  all ranks in model mode, where smoothing gives mass to unobserved tails).
* MeanD: expected disclosure under the empirical rank weights (signed, so
  below-chance ranks subtract; a ``model_weighting="model"`` switch uses the
  model's own weights instead).
* IdR: rank-1 probability in percent; always empirical, whatever the source.
* Rank spread: percentage of ranks strictly above chance, ``gamma_j > 1/N``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Cohort
from .ranking import RankDistribution, score_matrix
from .rankmodel import BetaBinomialModel

EMPIRICAL = "empirical"
BETABINOMIAL = "betabinomial"
GAMMA_SOURCES = (EMPIRICAL, BETABINOMIAL)

EMPIRICAL_WEIGHTS = "empirical"
MODEL_WEIGHTS = "model"

# slack on ordering invariants; wide enough to survive the 6-significant-digit
# rounding applied when summaries round-trip through report JSON
def _slack(x: float) -> float:
    return 5e-6 * (1.0 + abs(x))


class MetricError(ValueError):
    """Invalid metric inputs."""


def disclosure(gamma_j: float, n_references: int) -> float:
    """Rank disclosure in bits: ``log2(n_references * gamma_j)``."""
    if n_references < 2:
        raise MetricError("n_references must be >= 2")
    if not 0.0 < gamma_j <= 1.0:
        raise MetricError(
            f"gamma_j must lie in (0, 1], got {gamma_j!r}; zero-probability "
            f"ranks have no finite disclosure"
        )
    return float(np.log2(n_references * gamma_j))


@dataclass(frozen=True)
class DisclosureSummary:
    """MaxD / MeanD / IdR / rank spread for one gamma source."""

    max_disclosure: float
    mean_disclosure: float
    identification_rate: float
    rank_spread: float
    gamma_source: str
    n_references: int
    n_inputs: int
    eer_percent: float | None = None

    def __post_init__(self):
        if self.gamma_source not in GAMMA_SOURCES:
            raise MetricError(f"unknown gamma source {self.gamma_source!r}")
        ceiling = float(np.log2(self.n_references))
        if self.max_disclosure > ceiling + _slack(ceiling):
            raise MetricError("max disclosure cannot exceed log2(n_references)")
        if self.mean_disclosure > self.max_disclosure + _slack(self.max_disclosure):
            raise MetricError("mean disclosure cannot exceed max disclosure")
        for name, value in (
            ("identification_rate", self.identification_rate),
            ("rank_spread", self.rank_spread),
        ):
            if not 0.0 <= value <= 100.0:
                raise MetricError(f"{name} must lie in [0, 100], got {value!r}")
        if self.eer_percent is not None and not 0.0 <= self.eer_percent <= 100.0:
            raise MetricError("eer_percent must lie in [0, 100]")

    def to_json_dict(self) -> dict:
        return {
            "gamma_source": self.gamma_source,
            "max_d_bits": float(self.max_disclosure),
            "mean_d_bits": float(self.mean_disclosure),
            "idr_percent": float(self.identification_rate),
            "rank_spread_percent": float(self.rank_spread),
            "eer_percent": None if self.eer_percent is None else float(self.eer_percent),
            "n_references": int(self.n_references),
            "n_inputs": int(self.n_inputs),
        }


def summarize(
    dist: RankDistribution,
    model: BetaBinomialModel | None = None,
    *,
    model_weighting: str = EMPIRICAL_WEIGHTS,
    eer_percent: float | None = None,
) -> DisclosureSummary:
    """Summarise a rank distribution, optionally through a fitted model.

    Without ``model``, gamma is the empirical histogram and MaxD/MeanD run
    over observed ranks only (unobserved ranks have no finite disclosure).
    With ``model``, gamma is the smoothed pmf: MaxD runs over all ranks,
    MeanD keeps the empirical weights unless ``model_weighting="model"``.
    IdR is the empirical rank-1 rate in both cases.
    """
    if model_weighting not in (EMPIRICAL_WEIGHTS, MODEL_WEIGHTS):
        raise MetricError(f"unknown model_weighting {model_weighting!r}")
    N = dist.n_references
    if N < 2:
        raise MetricError("n_references must be >= 2")
    p = dist.probabilities
    observed = dist.counts > 0
    chance = 1.0 / N

    if model is None:
        gamma = p
        source = EMPIRICAL
        eps_observed = np.log2(N * p[observed])
        max_d = float(eps_observed.max())
        mean_d = float(np.sum(p[observed] * eps_observed))
    else:
        if model.n_references != N:
            raise MetricError(
                f"model covers {model.n_references} references, "
                f"distribution covers {N}"
            )
        gamma = model.gamma
        source = BETABINOMIAL
        eps_all = np.log2(N * gamma)
        max_d = float(eps_all.max())
        if model_weighting == MODEL_WEIGHTS:
            mean_d = float(np.sum(gamma * eps_all))
        else:
            mean_d = float(np.sum(p[observed] * eps_all[observed]))

    return DisclosureSummary(
        max_disclosure=max_d,
        mean_disclosure=mean_d,
        identification_rate=float(100.0 * p[0]),
        rank_spread=float(100.0 * np.count_nonzero(gamma > chance) / N),
        gamma_source=source,
        n_references=N,
        n_inputs=dist.total,
        eer_percent=eer_percent,
    )


@dataclass(frozen=True)
class ScoreSet:
    """Verification trial scores: target (same speaker) and non-target."""

    target_scores: np.ndarray
    nontarget_scores: np.ndarray

    def __post_init__(self):
        targets = np.sort(np.asarray(self.target_scores, dtype=np.float64))
        nontargets = np.sort(np.asarray(self.nontarget_scores, dtype=np.float64))
        if targets.size == 0 or nontargets.size == 0:
            raise MetricError("both target and nontarget scores must be non-empty")
        if not (np.all(np.isfinite(targets)) and np.all(np.isfinite(nontargets))):
            raise MetricError("scores must all be finite")
        object.__setattr__(self, "target_scores", targets)
        object.__setattr__(self, "nontarget_scores", nontargets)

    def is_degenerate(self) -> bool:
        """True when every score (target and nontarget) is identical."""
        return bool(
            self.target_scores[0]
            == self.target_scores[-1]
            == self.nontarget_scores[0]
            == self.nontarget_scores[-1]
        )


def eer(scores: ScoreSet) -> float:
    """Equal error rate in percent.

    Sweeps every distinct score as an accept threshold (``score >= t``
    accepts): ``FRR(t)`` is the fraction of targets below ``t``, ``FAR(t)``
    the fraction of nontargets at or above ``t``. Virtual endpoints below and
    above all scores pin ``(FRR, FAR)`` at (0, 1) and (1, 0), so the
    difference always changes sign; the crossing is located by linear
    interpolation. The result depends only on score order, making it exactly
    invariant under strictly increasing rescoring.
    """
    targets = scores.target_scores
    nontargets = scores.nontarget_scores
    thresholds = np.unique(np.concatenate([targets, nontargets]))
    frr = np.searchsorted(targets, thresholds, side="left") / targets.size
    far = 1.0 - np.searchsorted(nontargets, thresholds, side="left") / nontargets.size
    frr = np.concatenate([[0.0], frr, [1.0]])
    far = np.concatenate([[1.0], far, [0.0]])
    diff = frr - far
    i = int(np.argmax(diff >= 0.0))  # diff[0] = -1, diff[-1] = +1
    if diff[i] == 0.0:
        value = frr[i]
    else:
        s = diff[i - 1] / (diff[i - 1] - diff[i])
        value = frr[i - 1] + s * (frr[i] - frr[i - 1])
    return float(100.0 * value)


def score_cohort_trials(cohort: Cohort, measure: str) -> ScoreSet:
    """All input-vs-reference scores of a cohort, split into trial sets.

    Every (input, reference) pair is one trial: same speaker gives a target
    trial, otherwise a non-target trial, so there are ``n_inputs`` targets
    and ``n_inputs * (n_references - 1)`` nontargets. Both lists come back
    sorted; pairing order carries no information.
    """
    if not cohort.inputs:
        raise MetricError("cohort has no inputs to score")
    S = score_matrix(cohort.input_matrix(), cohort.reference_matrix(), measure)
    ref_ids = np.asarray(cohort.reference_speakers())
    in_ids = np.asarray([record.speaker_id for record in cohort.inputs])
    mask = in_ids[:, None] == ref_ids[None, :]
    return ScoreSet(S[mask], S[~mask])
