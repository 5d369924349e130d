"""Evaluation orchestration and canonical report serialisation.

Reports are written canonically so that re-running an evaluation on identical
inputs produces byte-identical files: keys are sorted, floats are rounded to
six significant digits, arrays keep their semantic order, and writes go
through a temp file followed by an atomic rename (a crashed run never leaves
a partial report behind).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
import jsonschema

from .corpus import (
    Cohort,
    CohortDiagnostics,
    CohortPolicy,
    EMBEDDING,
    build_cohort,
    load_features,
)
from .metrics import (
    BETABINOMIAL,
    DisclosureSummary,
    EMPIRICAL,
    eer,
    score_cohort_trials,
    summarize,
)
from .ranking import RankDistribution, RankingResult, rank_cohort
from .rankmodel import BetaBinomialModel, FitConfig, fit

EVAL_MODES = (EMPIRICAL, BETABINOMIAL, "both")
SCHEMA_VERSION = 1
FLOAT_SIG_DIGITS = 6

_SCHEMA_CACHE: dict | None = None


class ReportError(ValueError):
    """Malformed report data or an inconsistent set of runs."""


def report_schema() -> dict:
    """The JSON schema that evaluation reports are validated against."""
    global _SCHEMA_CACHE
    if _SCHEMA_CACHE is None:
        text = (
            resources.files("srd").joinpath("schemas/report.schema.json").read_text()
        )
        _SCHEMA_CACHE = json.loads(text)
    return _SCHEMA_CACHE


def validate_report(report: dict) -> None:
    """Raise :class:`ReportError` when ``report`` violates the schema."""
    try:
        jsonschema.validate(report, report_schema())
    except jsonschema.ValidationError as exc:
        raise ReportError(f"report schema violation: {exc.message}") from None


def _round_floats(obj):
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ReportError(f"non-finite value {obj!r} in report")
        return float(f"{obj:.{FLOAT_SIG_DIGITS}g}")
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {key: _round_floats(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(value) for value in obj]
    return obj


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, 6-significant-digit floats."""
    return (
        json.dumps(_round_floats(obj), sort_keys=True, indent=2, ensure_ascii=False)
        + "\n"
    )


def write_bytes_atomic(path: str | Path, payload: bytes) -> Path:
    """Write ``payload`` to ``path`` via a temp file and atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def write_json_atomic(path: str | Path, obj) -> Path:
    return write_bytes_atomic(path, canonical_json(obj).encode("utf-8"))


def fingerprint_cohort(cohort: Cohort) -> str:
    """Content hash of a cohort; stable across processes and re-builds."""
    h = hashlib.sha256()
    h.update(b"references\0")
    for speaker, fv in cohort.references:
        h.update(speaker.encode("utf-8") + b"\0")
        h.update(fv.kind.encode("ascii") + b"\0")
        h.update(np.ascontiguousarray(fv.values, dtype="<f8").tobytes())
    h.update(b"inputs\0")
    for record in cohort.inputs:
        h.update(record.utterance_id.encode("utf-8") + b"\0")
        h.update(record.speaker_id.encode("utf-8") + b"\0")
        h.update(np.ascontiguousarray(record.feature.values, dtype="<f8").tobytes())
    return "sha256:" + h.hexdigest()


@dataclass(frozen=True)
class EvaluationRun:
    """One evaluated (system, representation, gamma source) combination."""

    system_label: str
    representation_label: str
    measure: str
    cohort_fingerprint: str
    summary: DisclosureSummary
    rank_distribution: RankDistribution
    model: BetaBinomialModel | None = None

    def summary_json_dict(self) -> dict:
        row = {"system": self.system_label, "representation": self.representation_label}
        row.update(self.summary.to_json_dict())
        return row


@dataclass(frozen=True)
class EvaluationResult:
    """Everything one evaluation produced: runs, ranking, EER, diagnostics."""

    runs: tuple[EvaluationRun, ...]
    ranking: RankingResult
    mode: str
    eer_percent: float | None
    eer_degenerate: bool
    cohort_diagnostics: CohortDiagnostics | None = None

    @property
    def primary(self) -> EvaluationRun:
        return self.runs[0]

    def report_dict(self) -> dict:
        run = self.primary
        model = next((r.model for r in self.runs if r.model is not None), None)
        return {
            "schema_version": SCHEMA_VERSION,
            "system": run.system_label,
            "representation": run.representation_label,
            "measure": run.measure,
            "mode": self.mode,
            "cohort_fingerprint": run.cohort_fingerprint,
            "n_references": run.rank_distribution.n_references,
            "n_inputs": run.rank_distribution.total,
            "tie_count": self.ranking.tie_count,
            "eer_percent": self.eer_percent,
            "rank_distribution": run.rank_distribution.to_json_dict(),
            "summaries": [r.summary_json_dict() for r in self.runs],
            "model": None if model is None else model.to_json_dict(),
        }

    def diagnostics_dict(self) -> dict:
        out = {
            "tie_count": self.ranking.tie_count,
            "eer_degenerate": self.eer_degenerate,
        }
        if self.cohort_diagnostics is not None:
            out["cohort"] = self.cohort_diagnostics.to_json_dict()
        return out


def evaluate_cohort(
    cohort: Cohort,
    *,
    measure: str,
    mode: str = "both",
    fit_config: FitConfig | None = None,
    system_label: str = "unlabelled",
    representation_label: str = "features",
    compute_eer: bool = True,
    model_weighting: str = "empirical",
    diagnostics: CohortDiagnostics | None = None,
) -> EvaluationResult:
    """Rank a cohort and summarise disclosure under the requested mode.

    ``mode`` picks the gamma sources: ``"empirical"``, ``"betabinomial"``,
    or ``"both"`` (empirical first). The beta-binomial modes fit the model
    with ``fit_config``.
    """
    if mode not in EVAL_MODES:
        raise ReportError(f"unknown evaluation mode {mode!r}")
    ranking = rank_cohort(cohort, measure)
    dist = ranking.distribution
    fingerprint = fingerprint_cohort(cohort)

    eer_value: float | None = None
    degenerate = False
    if compute_eer:
        trial_scores = score_cohort_trials(cohort, measure)
        eer_value = eer(trial_scores)
        degenerate = trial_scores.is_degenerate()

    model: BetaBinomialModel | None = None
    if mode in (BETABINOMIAL, "both"):
        model = fit(dist, fit_config)

    runs: list[EvaluationRun] = []
    if mode in (EMPIRICAL, "both"):
        runs.append(
            EvaluationRun(
                system_label=system_label,
                representation_label=representation_label,
                measure=measure,
                cohort_fingerprint=fingerprint,
                summary=summarize(dist, eer_percent=eer_value),
                rank_distribution=dist,
            )
        )
    if model is not None:
        runs.append(
            EvaluationRun(
                system_label=system_label,
                representation_label=representation_label,
                measure=measure,
                cohort_fingerprint=fingerprint,
                summary=summarize(
                    dist, model, model_weighting=model_weighting, eer_percent=eer_value
                ),
                rank_distribution=dist,
                model=model,
            )
        )
    return EvaluationResult(
        runs=tuple(runs),
        ranking=ranking,
        mode=mode,
        eer_percent=eer_value,
        eer_degenerate=degenerate,
        cohort_diagnostics=diagnostics,
    )


def run_evaluation(
    features_path: str | Path,
    *,
    format: str = "csv",
    kind: str = EMBEDDING,
    policy: CohortPolicy | None = None,
    measure: str,
    mode: str = "both",
    fit_config: FitConfig | None = None,
    system_label: str = "unlabelled",
    representation_label: str = "features",
    model_weighting: str = "empirical",
) -> EvaluationResult:
    """End-to-end evaluation: load features, build the cohort, evaluate."""
    records = load_features(features_path, format, kind=kind)
    cohort, diagnostics = build_cohort(records, policy, return_diagnostics=True)
    return evaluate_cohort(
        cohort,
        measure=measure,
        mode=mode,
        fit_config=fit_config,
        system_label=system_label,
        representation_label=representation_label,
        diagnostics=diagnostics,
    )


_COMPARE_COLUMNS = (
    ("max_d_bits", "MaxD(bits)", "v"),
    ("mean_d_bits", "MeanD(bits)", "v"),
    ("idr_percent", "IdR(%)", "v"),
    ("rank_spread_percent", "RS(%)", "^"),
    ("eer_percent", "EER(%)", "^"),
)


@dataclass(frozen=True)
class ComparisonTable:
    """Side-by-side disclosure summary for several evaluated systems.

    Lower is better for MaxD, MeanD, and IdR (marked ``v``); higher is
    better for rank spread and EER (marked ``^``).
    """

    rows: tuple[dict, ...]

    def to_csv(self) -> str:
        header = ["system", "representation", "gamma_source"] + [
            key for key, _, _ in _COMPARE_COLUMNS
        ]
        lines = [",".join(header)]
        for row in self.rows:
            cells = [row["system"], row["representation"], row["gamma_source"]]
            for key, _, _ in _COMPARE_COLUMNS:
                value = row[key]
                cells.append("" if value is None else f"{value:.6g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def to_text(self) -> str:
        header = ["system", "representation", "gamma_source"] + [
            f"{label}{mark}" for _, label, mark in _COMPARE_COLUMNS
        ]
        body = []
        for row in self.rows:
            cells = [row["system"], row["representation"], row["gamma_source"]]
            for key, _, _ in _COMPARE_COLUMNS:
                value = row[key]
                cells.append("--" if value is None else f"{value:.2f}")
            body.append(cells)
        widths = [
            max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
            for i in range(len(header))
        ]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        lines = [fmt.format(*header)]
        lines.append("  ".join("-" * w for w in widths))
        lines.extend(fmt.format(*r) for r in body)
        return "\n".join(lines) + "\n"


def compare(runs: Sequence[EvaluationRun]) -> ComparisonTable:
    """Tabulate several runs; order is preserved. All runs must share N."""
    if not runs:
        raise ReportError("nothing to compare")
    sizes = {run.summary.n_references for run in runs}
    if len(sizes) > 1:
        raise ReportError(f"runs mix reference-set sizes: {sorted(sizes)}")
    return ComparisonTable(rows=tuple(run.summary_json_dict() for run in runs))


def load_report(path: str | Path) -> dict:
    """Read and schema-validate a report JSON file."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise ReportError(f"cannot read report {path}: {exc}") from None
    validate_report(data)
    return data


def runs_from_report(report: dict) -> list[EvaluationRun]:
    """Rebuild :class:`EvaluationRun` objects from a report dictionary."""
    validate_report(report)
    dist = RankDistribution.from_json_dict(report["rank_distribution"])
    model = (
        None
        if report["model"] is None
        else BetaBinomialModel.from_json_dict(report["model"])
    )
    runs = []
    for entry in report["summaries"]:
        source_is_model = entry["gamma_source"] == BETABINOMIAL
        summary = DisclosureSummary(
            max_disclosure=entry["max_d_bits"],
            mean_disclosure=entry["mean_d_bits"],
            identification_rate=entry["idr_percent"],
            rank_spread=entry["rank_spread_percent"],
            gamma_source=entry["gamma_source"],
            n_references=entry["n_references"],
            n_inputs=entry["n_inputs"],
            eer_percent=entry["eer_percent"],
        )
        runs.append(
            EvaluationRun(
                system_label=entry["system"],
                representation_label=entry["representation"],
                measure=report["measure"],
                cohort_fingerprint=report["cohort_fingerprint"],
                summary=summary,
                rank_distribution=dist,
                model=model if source_is_model else None,
            )
        )
    return runs
