"""Similarity-rank disclosure analysis for speaker representations.

Quantifies how much speaker identity a (possibly anonymised) feature
representation still leaks: each input utterance is ranked against a set of
per-speaker references, the rank histogram is optionally smoothed with a
rank-1-anchored beta-binomial model, and the histogram is condensed into
bit-valued disclosure metrics (MaxD, MeanD), an identification rate, a rank
spread, and a conventional EER baseline.
"""

from .corpus import (
    Cohort,
    CohortDiagnostics,
    CohortPolicy,
    CorpusError,
    EMBEDDING,
    EmptyF0EvidenceError,
    F0Diagnostics,
    FeatureVector,
    HISTOGRAM,
    UtteranceRecord,
    build_cohort,
    default_f0_bin_edges,
    f0_histogram,
    load_features,
    write_feature_csv,
)
from .metrics import (
    BETABINOMIAL,
    DisclosureSummary,
    EMPIRICAL,
    MetricError,
    ScoreSet,
    disclosure,
    eer,
    score_cohort_trials,
    summarize,
)
from .ranking import (
    COSINE,
    MEASURES,
    NEG_EUCLIDEAN,
    RankDistribution,
    RankObservation,
    RankingError,
    RankingResult,
    rank_cohort,
    rank_histogram,
    rank_of_match,
    ranks_from_score_matrix,
    score_matrix,
    similarity,
)
from .rankmodel import (
    BetaBinomialModel,
    FitConfig,
    FitConvergenceError,
    FitError,
    betabinom_pmf,
    fit,
    log_likelihood,
    penalized_loss,
)
from .report import (
    ComparisonTable,
    EvaluationResult,
    EvaluationRun,
    ReportError,
    canonical_json,
    compare,
    evaluate_cohort,
    fingerprint_cohort,
    load_report,
    run_evaluation,
    runs_from_report,
    validate_report,
    write_json_atomic,
)
from .plots import PlotError, plot_rank_histogram, render_rank_histogram_svg
from .simulator import (
    SimulatorError,
    SynthConfig,
    synth_rank_samples,
    synth_records,
)

__version__ = "0.1.0"

__all__ = [
    "BETABINOMIAL",
    "BetaBinomialModel",
    "Cohort",
    "CohortDiagnostics",
    "CohortPolicy",
    "ComparisonTable",
    "CorpusError",
    "COSINE",
    "DisclosureSummary",
    "EMBEDDING",
    "EMPIRICAL",
    "EmptyF0EvidenceError",
    "EvaluationResult",
    "EvaluationRun",
    "F0Diagnostics",
    "FeatureVector",
    "FitConfig",
    "FitConvergenceError",
    "FitError",
    "HISTOGRAM",
    "MEASURES",
    "MetricError",
    "NEG_EUCLIDEAN",
    "PlotError",
    "RankDistribution",
    "RankingError",
    "RankingResult",
    "RankObservation",
    "ReportError",
    "ScoreSet",
    "SimulatorError",
    "SynthConfig",
    "UtteranceRecord",
    "betabinom_pmf",
    "build_cohort",
    "canonical_json",
    "compare",
    "default_f0_bin_edges",
    "disclosure",
    "eer",
    "evaluate_cohort",
    "f0_histogram",
    "fingerprint_cohort",
    "fit",
    "load_features",
    "load_report",
    "log_likelihood",
    "penalized_loss",
    "plot_rank_histogram",
    "rank_cohort",
    "rank_histogram",
    "rank_of_match",
    "ranks_from_score_matrix",
    "render_rank_histogram_svg",
    "run_evaluation",
    "runs_from_report",
    "score_cohort_trials",
    "score_matrix",
    "similarity",
    "summarize",
    "synth_rank_samples",
    "synth_records",
    "validate_report",
    "write_feature_csv",
    "write_json_atomic",
]
