import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import typer

try:  # newer typer releases vendor click as typer._click
    from typer import _click as click
except ImportError:
    import click
from rich.progress import Progress
from rich.table import Table

from causalcpd import __version__
from causalcpd.core.constants import MANIFEST_NAME
from causalcpd.core.dataset import ColumnSchema, Dataset, load_csv, save_csv, sidecar_path
from causalcpd.core.detector import DetectionReport, detect
from causalcpd.core.evaluation import Method, MetricsReport, TrialBatchConfig, run_sweep
from causalcpd.core.export import (
    atomic_write_text,
    detection_table,
    dump_segments,
    metrics_frame,
    metrics_table,
    read_json,
    render_detection_table,
    write_json,
    write_metrics_csv,
    write_pe_series_csv,
    write_records_jsonl,
    write_report_json,
)
from causalcpd.core.manifest import RunManifest
from causalcpd.core.pcmci import discover_superset
from causalcpd.core.plotting import plot_accuracy_svg, plot_pe_series_svg
from causalcpd.core.rulsif import pe_series
from causalcpd.core.scm_gen import ScmSpec, random_spec, simulate
from causalcpd.core.segments import build_segments, load_segment_dump
from causalcpd.core.types import (
    ChangeKind,
    DetectorConfig,
    DiscoveryConfig,
    Domain,
    GeneratorSettings,
    KernelParams,
    ParentGraph,
    PeParams,
)
from causalcpd.utils.config import Configuration, resolve_threads
from causalcpd.utils.console import get_console, get_error_console
from causalcpd.utils.error_handler import (
    EXIT_OK,
    EXIT_USAGE,
    CausalCpdError,
    ConfigurationError,
    DataError,
    exit_code_for,
)
from causalcpd.utils.logging import configure_logging, get_logger
from causalcpd.utils.progress import ProgressReporter

PROG_NAME = "causal-cpd"

app = typer.Typer(
    help="Change point detection in the causal mechanisms of discrete multivariate time series.",
    add_completion=False,
)
console = get_console()
logger = get_logger(__name__)


@dataclass(frozen=True)
class CliOptions:
    threads: int = 1
    json_output: bool = False
    manifest: Optional[Path] = None


class ResolvedRun:
    """
    Values one command actually used, with where each came from.

    A flag given on the command line is written into the configuration
    with source ``flag``; anything else falls back to the loaded config
    file, the environment and the built-in defaults in that order.
    """

    def __init__(self, command: str, options: CliOptions):
        self.command = command
        self.options = options
        self.settings = Configuration.get_instance()
        self.values: Dict[str, Any] = {"threads": options.threads}
        self.inputs: List[Path] = []
        self.outputs: List[Path] = []
        self.seeds: Dict[str, int] = {}

    def get(self, key: str, flag: Any = None, default: Any = None) -> Any:
        if flag is not None:
            self.settings.set(key, str(flag) if isinstance(flag, Path) else flag, source="flag")
        value = self.settings.get(key, default)
        self.values[key] = str(value) if isinstance(value, Path) else value
        return value

    def path(self, key: str, flag: Optional[Path] = None, default: Any = None) -> Optional[Path]:
        value = self.get(key, flag, default)
        return Path(value).expanduser() if value not in (None, "") else None

    def wrote(self, *paths: Path) -> None:
        self.outputs.extend(paths)

    def finish(self, primary: Optional[Path]) -> Path:
        """Write the run manifest next to ``primary`` (a file or directory) or to ``--manifest``."""
        manifest = RunManifest.build(
            self.command,
            self.values,
            sources={key: self.settings.source(key) for key in self.values},
            seeds=self.seeds,
            inputs=self.inputs,
        )
        for p in self.outputs:
            manifest.add_output(p)
        target = self.options.manifest
        if target is None:
            base = Path.cwd() if primary is None else (primary if primary.is_dir() else primary.parent)
            target = base / f"{self.command}-{MANIFEST_NAME}"
        written = manifest.finish().save(target)
        logger.info(f"Manifest written to {written}")
        return written


def _options(ctx: typer.Context) -> CliOptions:
    return ctx.obj if isinstance(ctx.obj, CliOptions) else CliOptions()


def _int_list(key: str, value: Any) -> List[int]:
    """Parse an int or a comma-separated list of ints."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return [int(value)]
    try:
        values = [int(v) for v in str(value).split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"--{key.replace('_', '-')} expects integers, got {value!r}") from e
    if not values:
        raise ConfigurationError(f"--{key.replace('_', '-')} is empty")
    return values


def _single_int(key: str, value: Any) -> int:
    values = _int_list(key, value)
    if len(values) != 1:
        raise ConfigurationError(f"--{key.replace('_', '-')} takes a single integer, got {value!r}")
    return values[0]


def _optional_int(key: str, value: Any) -> Optional[int]:
    return None if value is None else _single_int(key, value)


def _domain(value: Any) -> Domain:
    try:
        return Domain.of(_int_list("domain", value))
    except ValueError as e:
        raise ConfigurationError(f"invalid --domain {value!r}: {e}") from e


def _score(value: Optional[float]) -> Any:
    if value is None or math.isfinite(value):
        return value
    return "inf" if value > 0 else "-inf"


def _echo_json(payload: Any) -> None:
    typer.echo(json.dumps(payload, indent=2))


# ---------------------------------------------------------------------------
# Shared option groups
# ---------------------------------------------------------------------------
def _load_dataset(
    run: ResolvedRun,
    in_path: Optional[Path],
    time_labels: Optional[bool],
    header: Optional[bool],
    threshold: Optional[float],
) -> Dataset:
    path = run.path("in", in_path)
    if path is None:
        raise ConfigurationError("--in is required")
    time_labels = run.get("time_labels", time_labels)
    header = run.get("header", header)
    threshold = run.get("threshold", threshold)
    schema = None
    if time_labels is not None or header is not None or threshold is not None:
        schema = ColumnSchema(
            header=True if header is None else bool(header),
            time_label_column=bool(time_labels),
            threshold=None if threshold is None else float(threshold),
        )
    ds = load_csv(path, schema)
    run.inputs.append(path)
    return ds


def _discovery_config(
    run: ResolvedRun,
    tau_ub: Optional[int],
    alpha_level: Optional[float],
    n_intervals: Optional[int],
    pc_max_conds: Optional[int],
) -> DiscoveryConfig:
    return DiscoveryConfig(
        tau_ub=_single_int("tau_ub", run.get("tau_ub", tau_ub)),
        alpha_level=float(run.get("alpha_level", alpha_level)),
        n_intervals=_single_int("n_intervals", run.get("n_intervals", n_intervals)),
        pc_max_conds=_single_int("pc_max_conds", run.get("pc_max_conds", pc_max_conds)),
        min_samples_factor=_single_int("min_samples_factor", run.get("min_samples_factor")),
    )


def _pe_params(
    run: ResolvedRun,
    n_w: int,
    alpha: Optional[float],
    nst: Optional[int],
    estimator: Optional[str],
    sigma: Optional[float],
    ridge: Optional[float],
    cross_validate: Optional[bool],
) -> PeParams:
    sigma = run.get("sigma", sigma)
    kernel = KernelParams(
        sigma=None if sigma is None else float(sigma),
        ridge=float(run.get("ridge", ridge)),
        max_centers=_single_int("max_centers", run.get("max_centers")),
        sigma_floor=float(run.get("sigma_floor")),
        cross_validate=bool(run.get("cross_validate", cross_validate)),
    )
    return PeParams(
        alpha=float(run.get("alpha", alpha)),
        n_w=n_w,
        n_st=_single_int("nst", run.get("nst", nst)),
        estimator=str(run.get("estimator", estimator)),
        kernel=kernel,
    )


def _load_spa(path: Path, ds: Dataset) -> ParentGraph:
    """Parent graph from a discover output, a detection report or a generator spec."""
    doc = read_json(path)
    try:
        if isinstance(doc, dict) and "edge_array" in doc:
            graph = ScmSpec.from_json(doc).spa
        else:
            if isinstance(doc, dict) and "spa_hat" in doc:
                doc = doc["spa_hat"]
            graph = ParentGraph.from_named(doc, ds.component_names)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"{path} holds no usable parent graph: {e}") from e
    if graph.n != ds.n:
        raise DataError(f"{path} describes {graph.n} components, the dataset has {ds.n}")
    return graph


def _parents_table(title: str, graph: ParentGraph, names: Sequence[str]) -> Table:
    table = Table(title=title)
    table.add_column("X")
    table.add_column("parents")
    for j, parents in enumerate(graph.parents):
        table.add_row(names[j], parents.describe(names))
    return table


# ---------------------------------------------------------------------------
# Global options
# ---------------------------------------------------------------------------
@app.callback(invoke_without_command=True)
def main_setup(
    ctx: typer.Context,
    debug: bool = typer.Option(False, "--debug", help="Enable debug logging"),
    log_level: str = typer.Option("INFO", "--log-level", help="Set log level (DEBUG, INFO, WARNING, ERROR)"),
    threads: Optional[int] = typer.Option(
        None, "--threads", help="Worker processes (falls back to CAUSAL_CPD_THREADS, then 1)"
    ),
    config: Optional[Path] = typer.Option(
        None, "--config", help="JSON config file, one key per flag; a run manifest also works"
    ),
    json_output: bool = typer.Option(False, "--json", help="Print JSON instead of tables"),
    manifest: Optional[Path] = typer.Option(
        None, "--manifest", help="Where to write the run manifest (defaults next to the outputs)"
    ),
    version: bool = typer.Option(False, "--version", help="Print the version and exit"),
):
    """
    Set up logging, configuration and worker count for every subcommand.
    """
    configure_logging(level=log_level, debug=debug)
    if version:
        typer.echo(__version__)
        raise typer.Exit(EXIT_OK)
    if ctx.invoked_subcommand is None:
        commands = ", ".join(sorted(getattr(ctx.command, "commands", {})))
        typer.echo(ctx.get_usage(), err=True)
        typer.echo(f"Commands: {commands}", err=True)
        typer.echo(f"Try '{PROG_NAME} --help' for help.", err=True)
        raise typer.Exit(EXIT_USAGE)

    Configuration.reset()
    settings = Configuration.get_instance()
    if config is not None:
        settings.load_file(config)
        logger.info(f"Loaded configuration from {config}")
    ctx.obj = CliOptions(threads=resolve_threads(threads), json_output=json_output, manifest=manifest)
    logger.debug(f"Running {ctx.invoked_subcommand} with {ctx.obj.threads} worker(s)")


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------
@app.command()
def generate(
    ctx: typer.Context,
    n: Optional[int] = typer.Option(None, "--n", help="Number of components"),
    t: Optional[int] = typer.Option(None, "--t", help="Series length T"),
    tau_max: Optional[int] = typer.Option(None, "--tau-max", help="Largest lag of any true parent"),
    spa: Optional[int] = typer.Option(None, "--spa", help="|SPA| per component, self-lag included"),
    kind: Optional[str] = typer.Option(None, "--kind", help="Change kind: soft, hard or none"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed for the spec and the simulation"),
    domain: Optional[str] = typer.Option(None, "--domain", help="Comma-separated symbols, e.g. 0,1"),
    min_divergence: Optional[float] = typer.Option(
        None, "--min-divergence", help="Minimum pre/post divergence of a drawn mechanism change"
    ),
    margin: Optional[int] = typer.Option(None, "--margin", help="Distance of change points from both ends"),
    change_points: Optional[str] = typer.Option(
        None, "--change-points", help="Pin the change points, one per component, comma-separated"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory, or a .csv file path"),
    spec_out: Optional[Path] = typer.Option(None, "--spec-out", help="Spec JSON (defaults to spec.json next to the data)"),
):
    """
    Draw a random Mechanism-Shift SCM and simulate a dataset from it.
    """
    run = ResolvedRun("generate", _options(ctx))
    out_path = run.path("out", out, default="data")
    data_path = out_path if out_path.suffix.lower() == ".csv" else out_path / "data.csv"
    spec_path = run.path("spec_out", spec_out, default=str(data_path.parent / "spec.json"))

    try:
        change_kind = ChangeKind(run.get("kind", kind))
    except ValueError as e:
        raise ConfigurationError(f"--kind must be soft, hard or none: {e}") from e
    pinned = run.get("change_points", change_points)
    seed_value = _single_int("seed", run.get("seed", seed))
    run.seeds["seed"] = seed_value

    spec = random_spec(
        n=_single_int("n", run.get("n", n)),
        T=_single_int("t", run.get("t", t)),
        tau_max=_single_int("tau_max", run.get("tau_max", tau_max)),
        domain=_domain(run.get("domain", domain)),
        spa_size=_single_int("spa", run.get("spa", spa)),
        change_kind=change_kind,
        margin=_optional_int("margin", run.get("margin", margin)),
        min_divergence=float(run.get("min_divergence", min_divergence)),
        seed=seed_value,
        change_points=_int_list("change_points", pinned) if pinned is not None else None,
    )
    ds, truth = simulate(spec)

    save_csv(ds, data_path)
    write_json(spec_path, spec.to_json())
    truth_path = write_json(data_path.parent / "truth.json", truth.to_json(ds.component_names))
    run.wrote(data_path, sidecar_path(data_path), spec_path, truth_path)
    run.finish(data_path)

    if run.options.json_output:
        _echo_json({"data": str(data_path), "spec": str(spec_path), "truth": truth.to_json(ds.component_names)})
        return
    table = Table(title=f"Simulated {ds.n} x {ds.T} series ({change_kind.value} change)")
    table.add_column("X")
    table.add_column("T_c", justify="right")
    table.add_column("parents before")
    table.add_column("parents after")
    names = ds.component_names
    for j in range(ds.n):
        table.add_row(
            names[j],
            str(truth.change_points[j]),
            truth.parents_pre[j].describe(names),
            truth.parents_post[j].describe(names),
        )
    console.print(table)
    console.print(f"[green]Data written to {data_path}, spec to {spec_path}[/green]")


# ---------------------------------------------------------------------------
# discover
# ---------------------------------------------------------------------------
@app.command()
def discover(
    ctx: typer.Context,
    in_path: Optional[Path] = typer.Option(None, "--in", help="Input CSV"),
    tau_ub: Optional[int] = typer.Option(None, "--tau-ub", help="Maximum lag scanned"),
    alpha_level: Optional[float] = typer.Option(
        None, "--alpha-level", "--alpha", help="Significance level of the conditional-independence tests"
    ),
    n_intervals: Optional[int] = typer.Option(None, "--n-intervals", help="Consecutive intervals whose graphs are united"),
    pc_max_conds: Optional[int] = typer.Option(None, "--pc-max-conds", help="Largest conditioning set in condition selection"),
    out: Optional[Path] = typer.Option(None, "--out", help="Parent graph JSON"),
    time_labels: Optional[bool] = typer.Option(
        None, "--time-labels/--no-time-labels", help="First CSV column holds time labels"
    ),
    header: Optional[bool] = typer.Option(None, "--header/--no-header", help="First CSV row holds component names"),
    threshold: Optional[float] = typer.Option(
        None, "--threshold", help="Read numeric columns as indicators of value > threshold"
    ),
):
    """
    Estimate the union parent set (SPA) of every component.
    """
    run = ResolvedRun("discover", _options(ctx))
    ds = _load_dataset(run, in_path, time_labels, header, threshold)
    cfg = _discovery_config(run, tau_ub, alpha_level, n_intervals, pc_max_conds)
    out_path = run.path("out", out)

    graph = discover_superset(ds, cfg, run.options.threads)
    payload = graph.to_named(ds.component_names)
    if out_path is not None:
        run.wrote(write_json(out_path, payload))
    run.finish(out_path)

    if run.options.json_output:
        _echo_json(payload)
    else:
        console.print(_parents_table("Estimated union parent sets", graph, ds.component_names))


# ---------------------------------------------------------------------------
# detect
# ---------------------------------------------------------------------------
def _dump_report_segments(ds: Dataset, report: DetectionReport, out_dir: Path) -> List[Path]:
    segments = []
    parent_sets = {}
    for comp in report.components:
        segments.extend(build_segments(ds, comp.spa, comp.component))
        parent_sets[comp.component] = comp.spa.to_named(ds.component_names)
    return dump_segments(segments, out_dir, ds.domain.symbols, ds.component_names, parent_sets)


def _plot_report(report: DetectionReport, plot_dir: Path) -> List[Path]:
    written = []
    for comp in report.components:
        series = comp.winning_series
        if series is None:
            continue
        stem = f"pe_{comp.name}_l{comp.winning_lambda}"
        written.append(write_pe_series_csv(plot_dir / f"{stem}.csv", series))
        title = f"{comp.name}: configuration {comp.winning_lambda} {list(comp.winning_config or ())}"
        written.append(plot_pe_series_svg(series, plot_dir / f"{stem}.svg", title=title, window_index=comp.window_index))
    return written


@app.command("detect")
def detect_changes(
    ctx: typer.Context,
    in_path: Optional[Path] = typer.Option(None, "--in", help="Input CSV"),
    tau_ub: Optional[int] = typer.Option(None, "--tau-ub", help="Maximum lag scanned by discovery"),
    alpha_level: Optional[float] = typer.Option(None, "--alpha-level", help="CI-test significance level"),
    n_intervals: Optional[int] = typer.Option(None, "--n-intervals", help="Consecutive intervals whose graphs are united"),
    pc_max_conds: Optional[int] = typer.Option(None, "--pc-max-conds", help="Largest conditioning set in condition selection"),
    nw: Optional[int] = typer.Option(None, "--nw", help="Samples per half window"),
    nst: Optional[int] = typer.Option(None, "--nst", help="Window stride"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Relative divergence mixing parameter"),
    estimator: Optional[str] = typer.Option(None, "--estimator", help="plugin or kernel"),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="Kernel width (median heuristic when omitted)"),
    ridge: Optional[float] = typer.Option(None, "--ridge", help="Kernel ridge regularization"),
    cross_validate: Optional[bool] = typer.Option(
        None, "--cross-validate/--no-cross-validate", help="Pick kernel width and ridge by cross-validation"
    ),
    refine: Optional[bool] = typer.Option(
        None, "--refine/--no-refine", help="Prune parent sets before and after each change point"
    ),
    spa_file: Optional[Path] = typer.Option(
        None, "--spa-file", help="Known parent graph (discover output, report or generator spec); skips discovery"
    ),
    score_threshold: Optional[float] = typer.Option(
        None, "--score-threshold", help="Report no change when the peak score is below this"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Detection report JSON"),
    table: Optional[Path] = typer.Option(None, "--table", help="Plain-text detection table"),
    dump_dir: Optional[Path] = typer.Option(None, "--dump-segments", help="Write every segment as CSV into this directory"),
    plot_dir: Optional[Path] = typer.Option(None, "--plot-dir", help="Write the winning divergence series as CSV and SVG"),
    time_labels: Optional[bool] = typer.Option(
        None, "--time-labels/--no-time-labels", help="First CSV column holds time labels"
    ),
    header: Optional[bool] = typer.Option(None, "--header/--no-header", help="First CSV row holds component names"),
    threshold: Optional[float] = typer.Option(
        None, "--threshold", help="Read numeric columns as indicators of value > threshold"
    ),
):
    """
    Locate one change point per component and report the parent sets around it.
    """
    run = ResolvedRun("detect", _options(ctx))
    ds = _load_dataset(run, in_path, time_labels, header, threshold)
    cfg = DetectorConfig(
        discovery=_discovery_config(run, tau_ub, alpha_level, n_intervals, pc_max_conds),
        pe=_pe_params(run, _single_int("nw", run.get("nw", nw)), alpha, nst, estimator, sigma, ridge, cross_validate),
        refine=bool(run.get("refine", refine)),
        score_threshold=run.get("score_threshold", score_threshold),
    )
    spa_path = run.path("spa_file", spa_file)
    spa = None
    if spa_path is not None:
        spa = _load_spa(spa_path, ds)
        run.inputs.append(spa_path)
    out_path = run.path("out", out)
    table_path = run.path("table", table)
    dump_path = run.path("dump_segments", dump_dir)
    plot_path = run.path("plot_dir", plot_dir)

    report = detect(ds, cfg, threads=run.options.threads, spa=spa)

    if out_path is not None:
        run.wrote(write_report_json(out_path, report))
    if table_path is not None:
        run.wrote(atomic_write_text(table_path, render_detection_table(report)))
    if dump_path is not None:
        run.wrote(*_dump_report_segments(ds, report, dump_path))
    if plot_path is not None:
        run.wrote(*_plot_report(report, plot_path))
    run.finish(out_path or table_path or dump_path or plot_path)

    if run.options.json_output:
        _echo_json(report.to_json())
    else:
        console.print(detection_table(report))


# ---------------------------------------------------------------------------
# pe
# ---------------------------------------------------------------------------
@app.command("pe")
def pe_scan(
    ctx: typer.Context,
    segment_dump: Optional[Path] = typer.Option(None, "--segment-dump", help="Directory written by detect --dump-segments"),
    nw: Optional[int] = typer.Option(None, "--nw", help="Samples per half window"),
    nst: Optional[int] = typer.Option(None, "--nst", help="Window stride"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Relative divergence mixing parameter"),
    estimator: Optional[str] = typer.Option(None, "--estimator", help="plugin or kernel"),
    sigma: Optional[float] = typer.Option(None, "--sigma", help="Kernel width (median heuristic when omitted)"),
    ridge: Optional[float] = typer.Option(None, "--ridge", help="Kernel ridge regularization"),
    cross_validate: Optional[bool] = typer.Option(
        None, "--cross-validate/--no-cross-validate", help="Pick kernel width and ridge by cross-validation"
    ),
    out: Optional[Path] = typer.Option(None, "--out", help="Output directory (defaults to <segment-dump>/pe)"),
    plot: Optional[bool] = typer.Option(None, "--plot/--no-plot", help="Also write one SVG per series"),
):
    """
    Compute the sliding-window divergence series of dumped segments.
    """
    run = ResolvedRun("pe", _options(ctx))
    dump_path = run.path("segment_dump", segment_dump)
    if dump_path is None:
        raise ConfigurationError("--segment-dump is required")
    params = _pe_params(run, _single_int("nw", run.get("nw", nw)), alpha, nst, estimator, sigma, ridge, cross_validate)
    out_dir = run.path("out", out, default=str(dump_path / "pe"))
    with_plots = bool(run.get("plot", plot, default=True))

    segments, index = load_segment_dump(dump_path)
    run.inputs.append(dump_path)
    names = list(index.get("components") or [])

    rows = []
    for seg in segments:
        name = names[seg.component] if seg.component < len(names) else f"X{seg.component + 1}"
        series = pe_series(seg, params)
        stem = f"pe_c{seg.component}_l{seg.config_index}"
        run.wrote(write_pe_series_csv(out_dir / f"{stem}.csv", series))
        row = {
            "component": name,
            "config_index": seg.config_index,
            "config": list(seg.config),
            "length": seg.length,
            "windows": len(series),
            "peak_window": None,
            "peak_score": None,
            "t_mid": None,
            "flag": series.flag,
        }
        if not series.is_empty:
            i = int(np.argmax(series.scores))
            row.update(peak_window=i, peak_score=_score(float(series.scores[i])), t_mid=float(series.midpoints()[i]))
            if with_plots:
                title = f"{name}: configuration {seg.config_index} {list(seg.config)}"
                run.wrote(plot_pe_series_svg(series, out_dir / f"{stem}.svg", title=title, window_index=i))
        rows.append(row)
    run.wrote(write_json(out_dir / "pe_summary.json", rows))
    run.finish(out_dir)

    if run.options.json_output:
        _echo_json(rows)
        return
    table = Table(title=f"Divergence series (n_w={params.n_w}, n_st={params.n_st}, alpha={params.alpha})")
    for column, justify in (("X", "left"), ("Λ", "right"), ("config", "left"), ("length", "right"),
                            ("windows", "right"), ("peak PE", "right"), ("t_mid", "right"), ("flag", "left")):
        table.add_column(column, justify=justify)
    for row in rows:
        peak = row["peak_score"]
        table.add_row(
            row["component"],
            str(row["config_index"]),
            str(row["config"]),
            str(row["length"]),
            str(row["windows"]),
            "-" if peak is None else (peak if isinstance(peak, str) else f"{peak:.4f}"),
            "-" if row["t_mid"] is None else f"{row['t_mid']:.1f}",
            row["flag"] or "",
        )
    console.print(table)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------
def _methods(value: Any) -> Tuple[Method, ...]:
    try:
        return tuple(Method(m.strip()) for m in str(value).split(",") if m.strip())
    except ValueError as e:
        choices = ", ".join(m.value for m in Method)
        raise ConfigurationError(f"--methods takes a comma list of {choices}: {e}") from e


def _metrics_payload(report: MetricsReport) -> Dict[str, Any]:
    return {
        "metrics": metrics_frame(report).to_dict(orient="records"),
        "failures": [f.model_dump(mode="json") for f in report.failures],
    }


@app.command()
def evaluate(
    ctx: typer.Context,
    trials: Optional[int] = typer.Option(None, "--trials", help="Monte-Carlo trials per setting"),
    t: Optional[str] = typer.Option(None, "--t", help="Series length T, or a comma list to sweep"),
    spa: Optional[str] = typer.Option(None, "--spa", help="|SPA| per component, or a comma list to sweep"),
    nw: Optional[str] = typer.Option(None, "--nw", help="Samples per half window, or a comma list to sweep"),
    n: Optional[int] = typer.Option(None, "--n", help="Number of components"),
    tau_max: Optional[int] = typer.Option(None, "--tau-max", help="Largest lag of any true parent"),
    kind: Optional[str] = typer.Option(None, "--kind", help="Change kind: soft, hard or none"),
    domain: Optional[str] = typer.Option(None, "--domain", help="Comma-separated symbols, e.g. 0,1"),
    min_divergence: Optional[float] = typer.Option(None, "--min-divergence", help="Minimum divergence of drawn changes"),
    q: Optional[str] = typer.Option(None, "--q", help="Tolerances Q of accuracy(Q), comma-separated"),
    methods: Optional[str] = typer.Option(
        None, "--methods", help="Comma list of causal-rulsif, mean-change, rulsif, oracle"
    ),
    oracle_spa: Optional[bool] = typer.Option(
        None, "--oracle-spa/--discover-spa", help="Give the detector the true union parent sets"
    ),
    seed: Optional[int] = typer.Option(None, "--seed", help="Base seed; trial seeds are derived from it"),
    tau_ub: Optional[int] = typer.Option(None, "--tau-ub", help="Maximum lag scanned by discovery"),
    alpha_level: Optional[float] = typer.Option(None, "--alpha-level", help="CI-test significance level"),
    n_intervals: Optional[int] = typer.Option(None, "--n-intervals", help="Consecutive intervals whose graphs are united"),
    pc_max_conds: Optional[int] = typer.Option(None, "--pc-max-conds", help="Largest conditioning set in condition selection"),
    nst: Optional[int] = typer.Option(None, "--nst", help="Window stride"),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Relative divergence mixing parameter"),
    estimator: Optional[str] = typer.Option(None, "--estimator", help="plugin or kernel"),
    out: Optional[Path] = typer.Option(None, "--out", help="Results directory"),
):
    """
    Score detectors against ground truth over simulated datasets.
    """
    run = ResolvedRun("evaluate", _options(ctx))
    t_values = _int_list("t", run.get("t", t))
    spa_values = _int_list("spa", run.get("spa", spa))
    nw_values = _int_list("nw", run.get("nw", nw))
    try:
        change_kind = ChangeKind(run.get("kind", kind))
    except ValueError as e:
        raise ConfigurationError(f"--kind must be soft, hard or none: {e}") from e
    seed_value = _single_int("seed", run.get("seed", seed))
    run.seeds["seed"] = seed_value

    template = GeneratorSettings(
        n=_single_int("n", run.get("n", n)),
        T=t_values[0],
        tau_max=_single_int("tau_max", run.get("tau_max", tau_max)),
        domain=_domain(run.get("domain", domain)),
        spa_size=spa_values[0],
        change_kind=change_kind,
        min_divergence=float(run.get("min_divergence", min_divergence)),
    )
    detector = DetectorConfig(
        discovery=_discovery_config(run, tau_ub, alpha_level, n_intervals, pc_max_conds),
        pe=_pe_params(run, nw_values[0], alpha, nst, estimator, None, None, None),
        refine=bool(run.get("refine")),
    )
    cfg = TrialBatchConfig(
        spec_template=template,
        detector=detector,
        n_trials=_single_int("trials", run.get("trials", trials)),
        seed=seed_value,
        q_grid=tuple(_int_list("q", run.get("q", q))),
        methods=_methods(run.get("methods", methods)),
        oracle_spa=bool(run.get("oracle_spa", oracle_spa)),
    )
    out_dir = run.path("out", out, default="results")

    total = cfg.n_trials * len(t_values) * len(spa_values) * len(nw_values)
    with Progress(console=get_error_console(), expand=True, transient=True, disable=run.options.json_output) as progress:
        reporter = ProgressReporter(progress_bar=progress, description="Monte-Carlo trials", total=total)
        report = run_sweep(cfg, t_values, spa_values, nw_values, threads=run.options.threads, progress=reporter)
        reporter.complete()

    run.wrote(
        write_metrics_csv(out_dir / "metrics.csv", report),
        write_records_jsonl(out_dir / "records.jsonl", report.records),
        plot_accuracy_svg(report, out_dir / "accuracy.svg"),
    )
    if report.failures:
        run.wrote(write_records_jsonl(out_dir / "failures.jsonl", report.failures))
    run.finish(out_dir)

    if run.options.json_output:
        _echo_json(_metrics_payload(report))
        return
    console.print(metrics_table(report))
    if report.failures:
        console.print(f"[yellow]{len(report.failures)} trial failure(s), see {out_dir / 'failures.jsonl'}[/yellow]")
    console.print(f"[green]Results written to {out_dir}[/green]")


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------
def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run the CLI and return its exit code.

    0 on success, 1 on a usage or configuration error, 2 on a data error,
    3 on anything unexpected.
    """
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        result = app(args=args, prog_name=PROG_NAME, standalone_mode=False)
    except click.exceptions.UsageError as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        get_error_console().print("[red]Aborted[/red]")
        return EXIT_USAGE
    except CausalCpdError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)
    except Exception as e:  # noqa: BLE001
        code = exit_code_for(e)
        logger.error(f"{type(e).__name__}: {e}", exc_info=code != EXIT_USAGE)
        return code
    return result if isinstance(result, int) else EXIT_OK


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
