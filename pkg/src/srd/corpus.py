"""Feature loading, F0 histograms, and evaluation-cohort construction.

A cohort splits a pool of utterances into an input side and a reference side:
each speaker donates a few reserved utterances that are aggregated into one
reference vector, and every remaining utterance becomes an input to be ranked
against all references. Input and reference sides are utterance-disjoint by
construction, so no input is ever scored against itself.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import rng

EMBEDDING = "embedding"
HISTOGRAM = "histogram"
FEATURE_KINDS = (EMBEDDING, HISTOGRAM)

MEAN = "mean"
MEDOID = "medoid"
AGGREGATIONS = (MEAN, MEDOID)

CSV_FORMAT = "csv"
JSON_MANIFEST_FORMAT = "json-manifest"
FEATURE_FORMATS = (CSV_FORMAT, JSON_MANIFEST_FORMAT)

# stored histograms must sum to 1 within this
HISTOGRAM_SUM_TOL = 1e-6
# loaders renormalise histogram rows whose sum is within this of 1
HISTOGRAM_LOAD_TOL = 1e-3
# aggregation skips renormalisation when already unit within this, so the
# aggregate of identical normalised vectors is bit-exact
_RENORM_SKIP_TOL = 1e-12

F0_DEFAULT_MIN_HZ = 65.0
F0_DEFAULT_MAX_HZ = 450.0
F0_DEFAULT_BINS = 107


class CorpusError(ValueError):
    """Malformed feature data or an unsatisfiable cohort request."""


class EmptyF0EvidenceError(CorpusError):
    """No voiced, in-range F0 frame was available for an utterance."""


@dataclass(frozen=True)
class FeatureVector:
    """Fixed-length real feature representation of one utterance.

    ``kind`` is ``"embedding"`` (arbitrary real vector, typically compared by
    cosine similarity) or ``"histogram"`` (non-negative, sums to one,
    typically compared by euclidean distance).
    """

    values: np.ndarray
    kind: str = EMBEDDING

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise CorpusError("feature values must form a non-empty 1-d vector")
        if not np.all(np.isfinite(values)):
            raise CorpusError("feature values must all be finite")
        if self.kind not in FEATURE_KINDS:
            raise CorpusError(f"unknown feature kind {self.kind!r}")
        if self.kind == HISTOGRAM:
            if np.any(values < 0.0):
                raise CorpusError("histogram entries must be non-negative")
            total = float(values.sum())
            if abs(total - 1.0) > HISTOGRAM_SUM_TOL:
                raise CorpusError(
                    f"histogram sums to {total:.6g}, expected 1 within "
                    f"{HISTOGRAM_SUM_TOL:g}"
                )
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: identifiers plus its feature vector."""

    utterance_id: str
    speaker_id: str
    feature: FeatureVector

    def __post_init__(self):
        if not self.utterance_id or not self.speaker_id:
            raise CorpusError("utterance_id and speaker_id must be non-empty")


@dataclass(frozen=True)
class CohortPolicy:
    """How utterances are allocated to the reference and input sides.

    Per speaker, ``references_per_speaker`` utterances are reserved (chosen by
    a seeded shuffle, so the pick does not correlate with file order) and
    aggregated into that speaker's single reference; all remaining utterances
    become inputs.
    """

    references_per_speaker: int = 1
    aggregation: str = MEAN
    min_inputs_per_speaker: int = 1
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.references_per_speaker < 1:
            raise CorpusError("references_per_speaker must be >= 1")
        if self.min_inputs_per_speaker < 0:
            raise CorpusError("min_inputs_per_speaker must be >= 0")
        if self.aggregation not in AGGREGATIONS:
            raise CorpusError(f"unknown aggregation {self.aggregation!r}")


@dataclass(frozen=True)
class Cohort:
    """Utterance-disjoint input records and per-speaker reference vectors."""

    inputs: tuple[UtteranceRecord, ...]
    references: tuple[tuple[str, FeatureVector], ...]
    n_references: int
    # utterance ids consumed to build the references; kept so the
    # input/reference disjointness invariant stays checkable
    reference_utterance_ids: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "references", tuple(self.references))
        object.__setattr__(
            self, "reference_utterance_ids", tuple(self.reference_utterance_ids)
        )
        if not self.references:
            raise CorpusError("cohort needs at least one reference")
        speakers = [spk for spk, _ in self.references]
        if len(set(speakers)) != len(speakers):
            raise CorpusError("reference speaker_ids must be distinct")
        if self.n_references != len(self.references):
            raise CorpusError("n_references does not match the reference list")
        ref_speakers = set(speakers)
        input_ids = [record.utterance_id for record in self.inputs]
        if len(set(input_ids)) != len(input_ids):
            raise CorpusError("input utterance_ids must be unique")
        for record in self.inputs:
            if record.speaker_id not in ref_speakers:
                raise CorpusError(
                    f"input {record.utterance_id!r}: speaker "
                    f"{record.speaker_id!r} has no reference"
                )
        overlap = set(input_ids) & set(self.reference_utterance_ids)
        if overlap:
            raise CorpusError(
                f"inputs overlap reference material: {sorted(overlap)[:3]}"
            )
        dims = {fv.dim for _, fv in self.references}
        kinds = {fv.kind for _, fv in self.references}
        dims |= {record.feature.dim for record in self.inputs}
        kinds |= {record.feature.kind for record in self.inputs}
        if len(dims) > 1:
            raise CorpusError(f"mixed feature dimensions in cohort: {sorted(dims)}")
        if len(kinds) > 1:
            raise CorpusError(f"mixed feature kinds in cohort: {sorted(kinds)}")

    @property
    def n_inputs(self) -> int:
        return len(self.inputs)

    @property
    def kind(self) -> str:
        return self.references[0][1].kind

    def reference_speakers(self) -> list[str]:
        return [spk for spk, _ in self.references]

    def reference_matrix(self) -> np.ndarray:
        return np.stack([fv.values for _, fv in self.references])

    def input_matrix(self) -> np.ndarray:
        if not self.inputs:
            raise CorpusError("cohort has no inputs")
        return np.stack([record.feature.values for record in self.inputs])


@dataclass(frozen=True)
class CohortDiagnostics:
    """Side-channel facts about how a cohort was assembled."""

    per_speaker_utterances: dict[str, int]
    reference_sources: dict[str, list[str]]
    n_inputs: int
    n_references: int

    def to_json_dict(self) -> dict:
        return {
            "per_speaker_utterances": dict(sorted(self.per_speaker_utterances.items())),
            "reference_sources": {
                spk: list(ids) for spk, ids in sorted(self.reference_sources.items())
            },
            "n_inputs": self.n_inputs,
            "n_references": self.n_references,
        }


@dataclass(frozen=True)
class F0Diagnostics:
    """Frame bookkeeping for one F0 histogram."""

    n_frames: int
    n_unvoiced: int
    n_out_of_range: int
    n_used: int

    def to_json_dict(self) -> dict:
        return {
            "n_frames": self.n_frames,
            "n_unvoiced": self.n_unvoiced,
            "n_out_of_range": self.n_out_of_range,
            "n_used": self.n_used,
        }


def default_f0_bin_edges() -> np.ndarray:
    """107 uniform bins spanning the 65-450 Hz voiced-pitch range."""
    return np.linspace(F0_DEFAULT_MIN_HZ, F0_DEFAULT_MAX_HZ, F0_DEFAULT_BINS + 1)


def f0_histogram(
    frames: Iterable[tuple[float, bool]],
    bin_edges: Sequence[float] | None = None,
    *,
    return_diagnostics: bool = False,
):
    """Normalised pitch histogram from ``(f0_hz, voiced)`` frame pairs.

    Unvoiced frames are discarded. Voiced frames outside
    ``[bin_edges[0], bin_edges[-1]]`` (or non-finite ones) are dropped and
    tallied in the diagnostics; the final bin is closed on the right. Raises
    :class:`EmptyF0EvidenceError` when nothing usable remains, so callers can
    exclude the utterance instead of propagating a zero histogram.
    """
    if bin_edges is None:
        edges = default_f0_bin_edges()
    else:
        edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or not np.all(np.diff(edges) > 0):
        raise CorpusError("bin_edges must be strictly increasing with >= 2 edges")

    frame_list = list(frames)
    f0 = np.array([float(f) for f, _ in frame_list], dtype=np.float64)
    voiced = np.array([bool(v) for _, v in frame_list], dtype=bool)
    voiced_f0 = f0[voiced]
    in_range = (
        np.isfinite(voiced_f0) & (voiced_f0 >= edges[0]) & (voiced_f0 <= edges[-1])
    )
    used = voiced_f0[in_range]
    diagnostics = F0Diagnostics(
        n_frames=len(frame_list),
        n_unvoiced=int((~voiced).sum()),
        n_out_of_range=int((~in_range).sum()),
        n_used=int(used.size),
    )
    if used.size == 0:
        raise EmptyF0EvidenceError(
            f"empty F0 evidence: no voiced frame inside "
            f"[{edges[0]:g}, {edges[-1]:g}] Hz"
        )
    counts, _ = np.histogram(used, bins=edges)
    feature = FeatureVector(counts / counts.sum(), kind=HISTOGRAM)
    if return_diagnostics:
        return feature, diagnostics
    return feature


def _finish_values(values, *, kind: str, where: str) -> np.ndarray:
    """Validate a parsed row and renormalise histogram rows near unit sum."""
    arr = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise CorpusError(f"{where}: non-finite value in feature column {bad}")
    if kind == HISTOGRAM:
        if np.any(arr < 0.0):
            raise CorpusError(f"{where}: histogram entries must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > HISTOGRAM_LOAD_TOL:
            raise CorpusError(
                f"{where}: histogram sums to {total:.6g}, outside the "
                f"{HISTOGRAM_LOAD_TOL:g} renormalisation tolerance"
            )
        arr = arr / total
    return arr


def _load_csv(path: Path, kind: str) -> list[UtteranceRecord]:
    with open(path, newline="", encoding="utf-8-sig") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty file") from None
        if len(header) < 3 or header[0] != "utterance_id" or header[1] != "speaker_id":
            raise CorpusError(
                f"{path}: malformed header, expected "
                f"'utterance_id,speaker_id,f0,...', got {','.join(header)!r}"
            )
        width = len(header)
        records: list[UtteranceRecord] = []
        seen: dict[str, int] = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise CorpusError(
                    f"{path}:{lineno}: expected {width} fields, got {len(row)}"
                )
            utterance_id, speaker_id = row[0], row[1]
            if utterance_id in seen:
                raise CorpusError(
                    f"{path}:{lineno}: duplicate utterance_id {utterance_id!r} "
                    f"(first seen at line {seen[utterance_id]})"
                )
            seen[utterance_id] = lineno
            values = np.empty(width - 2)
            for col, cell in enumerate(row[2:], start=2):
                try:
                    values[col - 2] = float(cell)
                except ValueError:
                    raise CorpusError(
                        f"{path}:{lineno}: non-numeric value {cell!r} for "
                        f"utterance {utterance_id!r} in column {header[col]!r}"
                    ) from None
            if not np.all(np.isfinite(values)):
                bad = int(np.flatnonzero(~np.isfinite(values))[0]) + 2
                raise CorpusError(
                    f"{path}:{lineno}: non-finite value for utterance "
                    f"{utterance_id!r} in column {header[bad]!r}"
                )
            arr = _finish_values(
                values, kind=kind, where=f"{path}:{lineno} utterance {utterance_id!r}"
            )
            records.append(
                UtteranceRecord(utterance_id, speaker_id, FeatureVector(arr, kind))
            )
    if not records:
        raise CorpusError(f"{path}: no data rows")
    return records


def _load_json_manifest(path: Path) -> list[UtteranceRecord]:
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, list) or not data:
        raise CorpusError(f"{path}: manifest must be a non-empty JSON array")
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    for index, entry in enumerate(data):
        where = f"{path}: entry {index}"
        if not isinstance(entry, dict):
            raise CorpusError(f"{where}: expected an object")
        missing = {"utterance_id", "speaker_id", "kind", "values"} - entry.keys()
        if missing:
            raise CorpusError(f"{where}: missing keys {sorted(missing)}")
        utterance_id = entry["utterance_id"]
        if not isinstance(utterance_id, str) or not isinstance(entry["speaker_id"], str):
            raise CorpusError(f"{where}: utterance_id and speaker_id must be strings")
        where = f"{path}: entry {index} (utterance {utterance_id!r})"
        if utterance_id in seen:
            raise CorpusError(f"{where}: duplicate utterance_id")
        seen.add(utterance_id)
        kind = entry["kind"]
        if kind not in FEATURE_KINDS:
            raise CorpusError(f"{where}: unknown kind {kind!r}")
        values = entry["values"]
        if (
            not isinstance(values, list)
            or not values
            or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
            )
        ):
            raise CorpusError(f"{where}: values must be a non-empty numeric array")
        if not all(math.isfinite(v) for v in values):
            raise CorpusError(f"{where}: values must all be finite")
        arr = _finish_values(values, kind=kind, where=where)
        records.append(
            UtteranceRecord(utterance_id, entry["speaker_id"], FeatureVector(arr, kind))
        )
    return records


def load_features(
    path: str | Path, format: str, *, kind: str = EMBEDDING
) -> list[UtteranceRecord]:
    """Read utterance features from ``path``.

    ``format="csv"`` expects a header ``utterance_id,speaker_id,f0,...,f{d-1}``
    and one utterance per row; the file format carries no kind column, so
    ``kind`` applies to every row. ``format="json-manifest"`` expects an array
    of ``{"utterance_id", "speaker_id", "kind", "values"}`` objects and takes
    the kind per record.

    Histogram-kind vectors whose entries sum to within 1e-3 of one are
    renormalised; anything further off is rejected with the utterance named.
    """
    if format not in FEATURE_FORMATS:
        raise CorpusError(f"unknown feature format {format!r}")
    if kind not in FEATURE_KINDS:
        raise CorpusError(f"unknown feature kind {kind!r}")
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"feature file not found: {path}")
    if format == CSV_FORMAT:
        return _load_csv(path, kind)
    return _load_json_manifest(path)


def write_feature_csv(records: Sequence[UtteranceRecord], path: str | Path) -> None:
    """Write records in the same CSV format that ``load_features`` reads.

    Floats are written with ``repr`` so a load round-trips bit-exactly.
    """
    if not records:
        raise CorpusError("no records to write")
    dims = {record.feature.dim for record in records}
    if len(dims) != 1:
        raise CorpusError(f"mixed feature dimensions: {sorted(dims)}")
    dim = dims.pop()
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["utterance_id", "speaker_id"] + [f"f{i}" for i in range(dim)])
        for record in records:
            writer.writerow(
                [record.utterance_id, record.speaker_id]
                + [repr(float(v)) for v in record.feature.values]
            )


def _aggregate_mean(vectors: np.ndarray, kind: str) -> np.ndarray:
    mean = vectors.mean(axis=0)
    if kind == HISTOGRAM:
        total = float(mean.sum())
        if total <= 0.0:
            raise CorpusError("mean histogram reference collapsed to zero mass")
        if abs(total - 1.0) > _RENORM_SKIP_TOL:
            mean = mean / total
        return mean
    norm = float(np.linalg.norm(mean))
    if norm == 0.0:
        raise CorpusError("mean embedding reference collapsed to the zero vector")
    if abs(norm - 1.0) > _RENORM_SKIP_TOL:
        mean = mean / norm
    return mean


def _medoid_index(vectors: np.ndarray) -> int:
    # summed euclidean distance to the other reserved utterances; ties keep
    # the earliest reserved position, which is deterministic under the policy
    diff = vectors[:, None, :] - vectors[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    return int(np.argmin(dist.sum(axis=1)))


def build_cohort(
    records: Sequence[UtteranceRecord],
    policy: CohortPolicy | None = None,
    *,
    return_diagnostics: bool = False,
):
    """Split ``records`` into a :class:`Cohort` under ``policy``.

    Deterministic for a given policy even when ``records`` arrive permuted:
    utterances are sorted per speaker before the seeded shuffle, inputs are
    ordered by ``(speaker_id, utterance_id)`` and references by speaker.
    Raises when any speaker has fewer than
    ``references_per_speaker + min_inputs_per_speaker`` utterances.
    """
    if policy is None:
        policy = CohortPolicy()
    if not records:
        raise CorpusError("no records to build a cohort from")
    ids = [record.utterance_id for record in records]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise CorpusError(f"duplicate utterance_ids: {dupes[:3]}")
    dims = {record.feature.dim for record in records}
    kinds = {record.feature.kind for record in records}
    if len(dims) > 1:
        raise CorpusError(f"mixed feature dimensions: {sorted(dims)}")
    if len(kinds) > 1:
        raise CorpusError(f"mixed feature kinds: {sorted(kinds)}")
    kind = kinds.pop()

    by_speaker: dict[str, list[UtteranceRecord]] = {}
    for record in records:
        by_speaker.setdefault(record.speaker_id, []).append(record)

    need = policy.references_per_speaker + policy.min_inputs_per_speaker
    references: list[tuple[str, FeatureVector]] = []
    reference_ids: list[str] = []
    inputs: list[UtteranceRecord] = []
    sources: dict[str, list[str]] = {}
    for speaker in sorted(by_speaker):
        utterances = sorted(by_speaker[speaker], key=lambda r: r.utterance_id)
        if len(utterances) < need:
            raise CorpusError(
                f"speaker {speaker!r} has {len(utterances)} utterances, "
                f"needs >= {need} under this policy"
            )
        order = rng.permutation(rng.substream(policy.shuffle_seed, speaker), len(utterances))
        shuffled = [utterances[i] for i in order]
        reserved = shuffled[: policy.references_per_speaker]
        vectors = np.stack([r.feature.values for r in reserved])
        if policy.aggregation == MEAN:
            aggregate = _aggregate_mean(vectors, kind)
        else:
            aggregate = reserved[_medoid_index(vectors)].feature.values.copy()
        references.append((speaker, FeatureVector(aggregate, kind)))
        reference_ids.extend(r.utterance_id for r in reserved)
        sources[speaker] = sorted(r.utterance_id for r in reserved)
        inputs.extend(shuffled[policy.references_per_speaker :])

    inputs.sort(key=lambda r: (r.speaker_id, r.utterance_id))
    cohort = Cohort(
        inputs=tuple(inputs),
        references=tuple(references),
        n_references=len(references),
        reference_utterance_ids=tuple(sorted(reference_ids)),
    )
    if not return_diagnostics:
        return cohort
    diagnostics = CohortDiagnostics(
        per_speaker_utterances={spk: len(v) for spk, v in by_speaker.items()},
        reference_sources=sources,
        n_inputs=cohort.n_inputs,
        n_references=cohort.n_references,
    )
    return cohort, diagnostics
