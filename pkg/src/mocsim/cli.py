"""Command line interface.

Exit codes: 0 on success, 1 when a run or verification fails, 2 for usage
and I/O problems.
"""
from __future__ import annotations

import sys
from pathlib import Path

import click

from . import assets
from .engine import DeviceConfig, TrajectoryLog
from .errors import MocsimError
from .harness import DESK_CONFIG, EvalReport, load_dataset, run_eval
from .mcscript import parse, preprocess, validate
from .pipeline.generators import RemoteGenerator, ReplayGenerator, TemplateGenerator
from .pipeline.retrieval import (
    RetrievalConfig,
    SearchIndex,
    chunk_corpus,
    hybrid_search,
    load_index,
    save_index,
)
from .runner import execute_program
from .verify import DEFAULT_TOLERANCE, dtw_pass, emit_plots, match_endpoints

EXIT_FAIL = 1
EXIT_USAGE = 2


def _fail_usage(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _parse_axes(text: str) -> tuple[int, ...]:
    try:
        axes = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        _fail_usage(f"bad axis list {text!r}")
    if not axes:
        _fail_usage("axis list is empty")
    return axes


@click.group()
def main():
    """Soft-motion simulation, trajectory verification, and evaluation."""


# --- sim ----------------------------------------------------------------


@main.group()
def sim():
    """Run MCScript programs."""


@sim.command("run")
@click.argument("program", type=click.Path(path_type=Path))
@click.option("--log", "log_path", type=click.Path(path_type=Path),
              help="Write the trajectory log CSV here.")
@click.option("--plots", "plots_dir", type=click.Path(path_type=Path),
              help="Render SVG plots of the log into this directory.")
@click.option("--axes", default="1,2,3,4,5,6,7,8", show_default=True,
              help="Device axes used when the program has no CreateDevice.")
@click.option("--inputs", default=16, show_default=True, type=int)
@click.option("--outputs", default=16, show_default=True, type=int)
def sim_run(program, log_path, plots_dir, axes, inputs, outputs):
    """Parse, validate, and simulate PROGRAM."""
    try:
        text = program.read_text(encoding="utf-8")
    except OSError as e:
        _fail_usage(f"cannot read {program}: {e}")
    config = DeviceConfig(axes=_parse_axes(axes), input_bits=inputs,
                          output_bits=outputs)
    parsed = parse(text)
    diags = list(parsed.diagnostics)
    wrapped = None
    if not diags:
        wrapped = preprocess(parsed.program, config)
        diags = validate(wrapped, config)
    if diags:
        for d in diags:
            click.echo(str(d), err=True)
        sys.exit(EXIT_FAIL)
    try:
        result = execute_program(wrapped)
    except MocsimError as e:
        _fail_usage(str(e))
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    if not result.outcome.success:
        loc = result.outcome.location
        prefix = f"line {loc[0]}: " if loc else ""
        click.echo(f"{prefix}{result.outcome.code}: {result.outcome.message}",
                   err=True)
        sys.exit(EXIT_FAIL)
    log = result.log
    if log is None or log.is_empty():
        click.echo("run succeeded; no log rows recorded")
        return
    try:
        if log_path is not None:
            log.write_csv(log_path)
            click.echo(f"wrote {log.n_rows} rows to {log_path}")
        else:
            click.echo(log.to_csv(), nl=False)
        if plots_dir is not None:
            written = emit_plots(log, plots_dir)
            click.echo(f"wrote {len(written)} plots to {plots_dir}")
    except MocsimError as e:
        _fail_usage(str(e))


# --- verify ----------------------------------------------------------------


def _load_log(path: Path) -> TrajectoryLog:
    try:
        return TrajectoryLog.read_csv(path)
    except MocsimError as e:
        _fail_usage(str(e))


@main.group()
def verify():
    """Compare two trajectory logs."""


def _report_outcome(report, label: str):
    for axis, delta in sorted(report.per_axis_deltas.items()):
        click.echo(f"axis {axis}: endpoint delta {delta:.9g}")
    if report.dtw_distance is not None:
        click.echo(f"dtw distance per point: {report.dtw_distance:.9g}")
    click.echo(f"{label}: {'PASS' if report.passed else 'FAIL'} "
               f"(tolerance {report.tolerance:g})")
    sys.exit(0 if report.passed else EXIT_FAIL)


@verify.command("endpoints")
@click.argument("canonical", type=click.Path(path_type=Path))
@click.argument("candidate", type=click.Path(path_type=Path))
@click.option("--tol", default=DEFAULT_TOLERANCE, show_default=True, type=float)
def verify_endpoints(canonical, candidate, tol):
    """Endpoint comparison of CANDIDATE against CANONICAL."""
    try:
        report = match_endpoints(_load_log(canonical), _load_log(candidate), tol)
    except MocsimError as e:
        _fail_usage(str(e))
    _report_outcome(report, "endpoints")


@verify.command("dtw")
@click.argument("canonical", type=click.Path(path_type=Path))
@click.argument("candidate", type=click.Path(path_type=Path))
@click.option("--tol", default=DEFAULT_TOLERANCE, show_default=True, type=float)
def verify_dtw(canonical, candidate, tol):
    """DTW comparison of CANDIDATE against CANONICAL."""
    try:
        report = dtw_pass(_load_log(canonical), _load_log(candidate), tol)
    except MocsimError as e:
        _fail_usage(str(e))
    _report_outcome(report, "dtw")


# --- index / retrieve ----------------------------------------------------------


@main.group()
def index():
    """Build and inspect retrieval indexes."""


@index.command("build")
@click.argument("docs", type=click.Path(path_type=Path))
@click.argument("samples", type=click.Path(path_type=Path))
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
def index_build(docs, samples, out_path):
    """Chunk DOCS and SAMPLES directories and write a binary index."""
    if not docs.is_dir() or not samples.is_dir():
        _fail_usage("DOCS and SAMPLES must be directories")
    doc_files = sorted(docs.glob("*.md")) + sorted(docs.glob("*.txt"))
    sample_files = sorted(samples.glob("*.mcs"))
    try:
        chunks = chunk_corpus(doc_files, sample_files)
        idx = SearchIndex.build(chunks)
        save_index(idx, out_path)
    except MocsimError as e:
        _fail_usage(str(e))
    click.echo(f"indexed {len(chunks)} chunks "
               f"({len(doc_files)} doc files, {len(sample_files)} samples) "
               f"to {out_path}")


@main.command("retrieve")
@click.argument("index_path", metavar="INDEX", type=click.Path(path_type=Path))
@click.argument("query")
@click.option("--k", default=6, show_default=True, type=int)
def retrieve(index_path, query, k):
    """Hybrid search over a built index."""
    try:
        idx = load_index(index_path)
        cfg = RetrievalConfig(top_k=k)
        results = hybrid_search(idx, query, cfg)
    except MocsimError as e:
        _fail_usage(str(e))
    if not results:
        click.echo("(no matches)")
        return
    for rank, chunk in enumerate(results, 1):
        first = chunk.text.strip().splitlines()[0] if chunk.text.strip() else ""
        click.echo(f"{rank:2d}. {chunk.id} [{chunk.kind.value}] {first[:60]}")


# --- eval ----------------------------------------------------------------


@main.group(name="eval")
def eval_group():
    """Run generator evaluations over a task dataset."""


def _make_generator(kind: str, fixtures_path: Path | None,
                    endpoint: str | None, model: str | None, tasks):
    if kind == "replay":
        # Without a fixtures file, replay echoes each task's canonical code.
        if fixtures_path is None:
            return ReplayGenerator({t.task_id: t.canonical_code for t in tasks})
        import json as _json
        try:
            fixtures = _json.loads(fixtures_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            _fail_usage(f"cannot load fixtures {fixtures_path}: {e}")
        return ReplayGenerator(fixtures)
    if kind == "template":
        return TemplateGenerator()
    if kind == "remote":
        if not endpoint or not model:
            _fail_usage("--generator remote needs --endpoint and --model")
        return RemoteGenerator(endpoint, model,
                               prompt_template=assets.default_prompt_template())
    _fail_usage(f"unknown generator {kind!r}")


@eval_group.command("run")
@click.argument("dataset", type=click.Path(path_type=Path))
@click.option("--generator", "generator_kind", default="replay", show_default=True,
              type=click.Choice(["replay", "template", "remote"]))
@click.option("--fixtures", "fixtures_path", type=click.Path(path_type=Path),
              help="JSON mapping of task_id to program text (replay generator).")
@click.option("--endpoint", help="Chat-completion endpoint (remote generator).")
@click.option("--model", help="Model name (remote generator).")
@click.option("--max-retries", default=3, show_default=True, type=int)
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--tol-endpoints", default=DEFAULT_TOLERANCE, show_default=True,
              type=float)
@click.option("--tol-dtw", default=DEFAULT_TOLERANCE, show_default=True, type=float)
@click.option("--report", "report_path", type=click.Path(path_type=Path),
              help="Write the JSON report here.")
@click.option("--use-retrieval/--no-retrieval", default=True, show_default=True,
              help="Retrieve bundled documentation chunks for each attempt.")
def eval_run(dataset, generator_kind, fixtures_path, endpoint, model, max_retries,
             jobs, tol_endpoints, tol_dtw, report_path, use_retrieval):
    """Evaluate a generator against DATASET and print the report table."""
    retriever = None
    if use_retrieval:
        docs, samples = assets.bundled_corpus_paths()
        idx = SearchIndex.build(chunk_corpus(docs, samples))
        retriever = lambda query: hybrid_search(idx, query)  # noqa: E731
    try:
        tasks = load_dataset(dataset)
    except MocsimError as e:
        _fail_usage(str(e))
    generator = _make_generator(generator_kind, fixtures_path, endpoint,
                                model, tasks)
    try:
        report = run_eval(tasks, generator, retriever=retriever,
                          max_retries=max_retries, jobs=jobs,
                          tol_endpoints=tol_endpoints, tol_dtw=tol_dtw)
    except MocsimError as e:
        _fail_usage(str(e))
    click.echo(report.to_text(), nl=False)
    if report_path is not None:
        try:
            report_path.write_text(report.to_json() + "\n", encoding="utf-8")
        except OSError as e:
            _fail_usage(f"cannot write report {report_path}: {e}")
        click.echo(f"wrote report to {report_path}")


if __name__ == "__main__":
    main()
