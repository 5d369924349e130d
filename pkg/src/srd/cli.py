"""Command line interface.

Global flags (``--seed``, ``--measure``, ``--mode``, ``--out-dir``,
``--policy-file``) sit on the ``srd`` group and precede the subcommand::

    srd --seed 7 --out-dir runs/a eval --features pool.csv --system orig

Every output file is written atomically and canonically, so re-running a
command on identical inputs reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import click

from . import corpus, metrics, plots, ranking, rankmodel, report
from .simulator import SimulatorError, SynthConfig, synth_records

_PIPELINE_ERRORS = (
    (corpus.CorpusError, "corpus"),
    (ranking.RankingError, "ranking"),
    (rankmodel.FitError, "rankmodel"),
    (metrics.MetricError, "metrics"),
    (SimulatorError, "simulator"),
    (plots.PlotError, "plots"),
    (report.ReportError, "report"),
)


def _fail(exc: Exception) -> click.ClickException:
    for exc_type, module in _PIPELINE_ERRORS:
        if isinstance(exc, exc_type):
            return click.ClickException(f"{module}: {exc}")
    return click.ClickException(str(exc))


def _load_policy_file(path: Path | None) -> tuple[dict, dict]:
    if path is None:
        return {}, {}
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read policy file {path}: {exc}")
    if not isinstance(data, dict):
        raise click.ClickException(f"policy file {path} must hold a JSON object")
    unknown = set(data) - {"policy", "fit"}
    if unknown:
        raise click.ClickException(
            f"policy file {path}: unknown sections {sorted(unknown)}"
        )
    return data.get("policy", {}), data.get("fit", {})


def _build_policy(policy_kwargs: dict, seed: int | None) -> corpus.CohortPolicy:
    if seed is not None:
        policy_kwargs = dict(policy_kwargs, shuffle_seed=seed)
    try:
        return corpus.CohortPolicy(**policy_kwargs)
    except TypeError as exc:
        raise click.ClickException(f"bad policy section: {exc}")
    except corpus.CorpusError as exc:
        raise _fail(exc)


def _build_fit_config(fit_kwargs: dict) -> rankmodel.FitConfig:
    try:
        return rankmodel.FitConfig(**fit_kwargs)
    except TypeError as exc:
        raise click.ClickException(f"bad fit section: {exc}")
    except rankmodel.FitError as exc:
        raise _fail(exc)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--seed", type=int, default=None, help="Cohort shuffle / synthesis seed.")
@click.option(
    "--measure",
    type=click.Choice(ranking.MEASURES),
    default=ranking.COSINE,
    show_default=True,
    help="Similarity measure (embeddings: cosine; histograms: negative euclidean).",
)
@click.option(
    "--mode",
    type=click.Choice(report.EVAL_MODES),
    default="both",
    show_default=True,
    help="Gamma source(s) to summarise.",
)
@click.option(
    "--out-dir",
    type=click.Path(path_type=Path, file_okay=False),
    default=Path("srd_out"),
    show_default=True,
)
@click.option(
    "--policy-file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help='JSON object with optional "policy" and "fit" sections.',
)
@click.pass_context
def main(ctx, seed, measure, mode, out_dir, policy_file):
    """Similarity-rank disclosure analysis for speaker representations."""
    policy_kwargs, fit_kwargs = _load_policy_file(policy_file)
    ctx.obj = {
        "seed": seed,
        "measure": measure,
        "mode": mode,
        "out_dir": out_dir,
        "policy": _build_policy(policy_kwargs, seed),
        "fit_config": _build_fit_config(fit_kwargs),
    }


@main.command("eval")
@click.option(
    "--features",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Feature file to evaluate.",
)
@click.option(
    "--format",
    "fmt",
    type=click.Choice(corpus.FEATURE_FORMATS),
    default=corpus.CSV_FORMAT,
    show_default=True,
)
@click.option(
    "--kind",
    type=click.Choice(corpus.FEATURE_KINDS),
    default=corpus.EMBEDDING,
    show_default=True,
    help="Feature kind for CSV input (JSON manifests carry their own).",
)
@click.option("--system", default="unlabelled", show_default=True)
@click.option("--representation", default="features", show_default=True)
@click.option(
    "--dump-observations",
    is_flag=True,
    help="Also write per-input ranks to observations.csv.",
)
@click.pass_obj
def eval_command(obj, features, fmt, kind, system, representation, dump_observations):
    """Evaluate one feature file: rank, fit, summarise, report, plot."""
    try:
        result = report.run_evaluation(
            features,
            format=fmt,
            kind=kind,
            policy=obj["policy"],
            measure=obj["measure"],
            mode=obj["mode"],
            fit_config=obj["fit_config"],
            system_label=system,
            representation_label=representation,
        )
        report_dict = result.report_dict()
        report.validate_report(report_dict)
        dist = result.primary.rank_distribution
        model = next((r.model for r in result.runs if r.model is not None), None)
        svg = plots.render_rank_histogram_svg(
            dist,
            labels=(f"{system} / {representation}", "overlay"),
            model_curve=None if model is None else model.gamma,
            title=f"{system}: rank histogram (N={dist.n_references})",
        )
    except Exception as exc:  # noqa: BLE001 - surfaced as exit status
        raise _fail(exc)

    out_dir = obj["out_dir"]
    report.write_json_atomic(out_dir / "report.json", report_dict)
    report.write_json_atomic(out_dir / "diagnostics.json", result.diagnostics_dict())
    report.write_bytes_atomic(out_dir / "rank_histogram.svg", svg)
    if dump_observations:
        buffer = io.StringIO()
        writer = csv.DictWriter(
            buffer,
            fieldnames=[
                "utterance_id",
                "speaker_id",
                "rank",
                "score_at_rank1",
                "score_of_match",
            ],
            lineterminator="\n",
        )
        writer.writeheader()
        for row in result.ranking.observation_rows():
            row["score_at_rank1"] = repr(row["score_at_rank1"])
            row["score_of_match"] = repr(row["score_of_match"])
            writer.writerow(row)
        report.write_bytes_atomic(
            out_dir / "observations.csv", buffer.getvalue().encode("utf-8")
        )

    for run in result.runs:
        s = run.summary
        click.echo(
            f"[{s.gamma_source}] MaxD {s.max_disclosure:.2f} bits, "
            f"MeanD {s.mean_disclosure:.2f} bits, IdR {s.identification_rate:.2f}%, "
            f"RS {s.rank_spread:.2f}%"
            + ("" if s.eer_percent is None else f", EER {s.eer_percent:.2f}%")
        )
    click.echo(f"report: {out_dir / 'report.json'}")


@main.command("compare")
@click.argument(
    "reports",
    nargs=-1,
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.option(
    "--gamma-source",
    type=click.Choice(metrics.GAMMA_SOURCES),
    default=metrics.EMPIRICAL,
    show_default=True,
    help="Which summary to take from each report.",
)
@click.pass_obj
def compare_command(obj, reports, gamma_source):
    """Tabulate several report.json files side by side."""
    runs = []
    try:
        for path in reports:
            data = report.load_report(path)
            matching = [
                run
                for run in report.runs_from_report(data)
                if run.summary.gamma_source == gamma_source
            ]
            if not matching:
                raise report.ReportError(
                    f"{path} has no {gamma_source!r} summary "
                    f"(mode was {data['mode']!r})"
                )
            runs.append(matching[0])
        table = report.compare(runs)
    except Exception as exc:  # noqa: BLE001
        raise _fail(exc)
    out_dir = obj["out_dir"]
    report.write_bytes_atomic(out_dir / "comparison.csv", table.to_csv().encode("utf-8"))
    report.write_bytes_atomic(out_dir / "comparison.txt", table.to_text().encode("utf-8"))
    click.echo(table.to_text(), nl=False)


def _load_distribution(path: Path) -> ranking.RankDistribution:
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise click.ClickException(f"cannot read {path}: {exc}")
    if isinstance(data, dict) and "rank_distribution" in data:
        data = data["rank_distribution"]
    if not isinstance(data, dict):
        raise click.ClickException(
            f"{path}: expected a report or a rank-distribution object"
        )
    try:
        return ranking.RankDistribution.from_json_dict(data)
    except ranking.RankingError as exc:
        raise _fail(exc)


@main.command("plot")
@click.option(
    "--dist",
    "dist_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="report.json or a bare rank-distribution JSON.",
)
@click.option(
    "--overlay",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Second distribution to superimpose.",
)
@click.option("--label", default="primary", show_default=True)
@click.option("--overlay-label", default="overlay", show_default=True)
@click.option("--chance-line/--no-chance-line", default=True, show_default=True)
@click.option("--out", "out_name", default="rank_histogram.svg", show_default=True)
@click.pass_obj
def plot_command(obj, dist_path, overlay, label, overlay_label, chance_line, out_name):
    """Render a rank histogram (optionally two, superimposed) to SVG."""
    dist = _load_distribution(dist_path)
    over = None if overlay is None else _load_distribution(overlay)
    try:
        svg = plots.render_rank_histogram_svg(
            dist,
            over,
            chance_line=chance_line,
            labels=(label, overlay_label),
        )
    except plots.PlotError as exc:
        raise _fail(exc)
    path = report.write_bytes_atomic(obj["out_dir"] / out_name, svg)
    click.echo(f"plot: {path}")


@main.command("synth")
@click.option("--n-speakers", default=40, show_default=True)
@click.option("--utterances-per-speaker", default=20, show_default=True)
@click.option("--dim", default=16, show_default=True)
@click.option("--between-std", default=1.0, show_default=True)
@click.option("--within-std", default=0.1, show_default=True)
@click.option(
    "--strength",
    default=0.0,
    show_default=True,
    help="Anonymisation strength in [0, 1]; 1 removes all speaker identity.",
)
@click.option("--out", "out_name", default="synth_features.csv", show_default=True)
@click.pass_obj
def synth_command(
    obj, n_speakers, utterances_per_speaker, dim, between_std, within_std, strength, out_name
):
    """Generate a synthetic feature CSV with controllable leakage."""
    try:
        config = SynthConfig(
            n_speakers=n_speakers,
            utterances_per_speaker=utterances_per_speaker,
            dim=dim,
            between_speaker_std=between_std,
            within_speaker_std=within_std,
            anonymisation_strength=strength,
            seed=obj["seed"] if obj["seed"] is not None else 0,
        )
        records = synth_records(config)
    except SimulatorError as exc:
        raise _fail(exc)
    out_path = obj["out_dir"] / out_name
    out_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = out_path.with_name(out_path.name + ".tmp")
    corpus.write_feature_csv(records, tmp)
    tmp.replace(out_path)
    click.echo(
        f"wrote {len(records)} records "
        f"({n_speakers} speakers x {utterances_per_speaker} utterances) to {out_path}"
    )


@main.command("fit")
@click.option(
    "--dist",
    "dist_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="report.json or a bare rank-distribution JSON.",
)
@click.option("--penalty-weight", default=1e4, show_default=True)
@click.option("--tolerance", default=1e-8, show_default=True)
@click.option("--max-iterations", default=1000, show_default=True)
@click.option(
    "--initializer",
    type=click.Choice(rankmodel.INITIALIZERS),
    default=rankmodel.MOMENTS_INIT,
    show_default=True,
)
@click.option("--multistart", is_flag=True, help="Also try a 3x3 log-grid of starts.")
@click.option("--out", "out_name", default="model.json", show_default=True)
@click.pass_obj
def fit_command(
    obj, dist_path, penalty_weight, tolerance, max_iterations, initializer, multistart, out_name
):
    """Fit the rank-1-anchored beta-binomial model to a rank distribution."""
    dist = _load_distribution(dist_path)
    try:
        config = rankmodel.FitConfig(
            rank1_penalty_weight=penalty_weight,
            tolerance=tolerance,
            max_iterations=max_iterations,
            initializer=initializer,
            multistart=multistart,
        )
        model = rankmodel.fit(dist, config)
    except rankmodel.FitError as exc:
        raise _fail(exc)
    path = report.write_json_atomic(obj["out_dir"] / out_name, model.to_json_dict())
    click.echo(
        f"alpha {model.alpha:.6g}, beta {model.beta:.6g}, "
        f"loss {model.loss:.6g} after {model.iterations} iterations"
    )
    click.echo(f"model: {path}")


if __name__ == "__main__":
    main()
