"""Synthetic speaker cohorts with controllable identity leakage.

Every utterance embedding is drawn as

    x = (1 - s) * speaker_centroid + s * decoy_centroid + noise

where centroids are isotropic Gaussians with the between-speaker scale, the
decoy centroid is redrawn per utterance, noise has the within-speaker scale,
and ``s`` is the anonymisation strength. At ``s = 0`` utterances cluster
tightly around their speaker; at ``s = 1`` the speaker centroid is gone and
each utterance carries an unrelated pseudo-identity, which drives the rank
histogram to uniform and disclosure to zero.

All draws come from the counter-based generator in :mod:`srd.rng`, one
substream per speaker, so output is reproducible across platforms and
independent of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .corpus import EMBEDDING, FeatureVector, UtteranceRecord
from .ranking import RankDistribution
from .rankmodel import betabinom_pmf


class SimulatorError(ValueError):
    """Invalid synthesis configuration."""


@dataclass(frozen=True)
class SynthConfig:
    """Parameters for one synthetic cohort."""

    n_speakers: int
    utterances_per_speaker: int
    dim: int = 16
    between_speaker_std: float = 1.0
    within_speaker_std: float = 0.1
    anonymisation_strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_speakers < 2:
            raise SimulatorError("n_speakers must be >= 2")
        if self.utterances_per_speaker < 1:
            raise SimulatorError("utterances_per_speaker must be >= 1")
        if self.dim < 1:
            raise SimulatorError("dim must be >= 1")
        if not self.between_speaker_std > 0.0 or not self.within_speaker_std >= 0.0:
            raise SimulatorError("noise scales must be positive (within may be 0)")
        if not 0.0 <= self.anonymisation_strength <= 1.0:
            raise SimulatorError("anonymisation_strength must lie in [0, 1]")


def synth_records(config: SynthConfig) -> list[UtteranceRecord]:
    """Generate ``n_speakers * utterances_per_speaker`` embedding records.

    Identifiers follow ``spk{i:03d}`` / ``spk{i:03d}_utt{j:03d}``. The output
    is a pure function of ``config``; records for one speaker do not depend
    on how many other speakers exist.
    """
    s = config.anonymisation_strength
    dim = config.dim
    per_utt = 2 * dim  # decoy + noise draws
    records: list[UtteranceRecord] = []
    for i in range(config.n_speakers):
        speaker_id = f"spk{i:03d}"
        stream = rng.substream(config.seed, speaker_id)
        draws = rng.normals(stream, dim + per_utt * config.utterances_per_speaker)
        centroid = config.between_speaker_std * draws[:dim]
        for j in range(config.utterances_per_speaker):
            offset = dim + j * per_utt
            decoy = config.between_speaker_std * draws[offset : offset + dim]
            noise = config.within_speaker_std * draws[offset + dim : offset + per_utt]
            values = (1.0 - s) * centroid + s * decoy + noise
            records.append(
                UtteranceRecord(
                    utterance_id=f"{speaker_id}_utt{j:03d}",
                    speaker_id=speaker_id,
                    feature=FeatureVector(values, kind=EMBEDDING),
                )
            )
    return records


def synth_rank_samples(
    alpha: float, beta: float, n_references: int, n_samples: int, seed: int
) -> RankDistribution:
    """Draw ranks from a beta-binomial pmf by inverse-CDF sampling.

    Useful as ground truth for fit-recovery checks: the sampling path shares
    no code with the fitting path beyond the pmf definition itself.
    """
    if n_samples < 1:
        raise SimulatorError("n_samples must be >= 1")
    pmf = betabinom_pmf(alpha, beta, n_references)
    cdf = np.cumsum(pmf)
    u = rng.uniforms(seed, n_samples)
    ranks = np.searchsorted(cdf, u, side="right") + 1
    np.clip(ranks, 1, n_references, out=ranks)
    return RankDistribution.from_ranks(ranks, n_references)
