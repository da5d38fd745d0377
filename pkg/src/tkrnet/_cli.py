"""Command-line entry point of tkrnet."""

from __future__ import annotations

import argparse
import logging
import re
from collections.abc import Sequence
from pathlib import Path
from typing import Any, ClassVar

import numpy as np
from pydantic import ConfigDict, BaseModel, ValidationError
from rich.console import Console
from rich.table import Table

from tkrnet._config import EvaluationConfig, ExperimentConfig
from tkrnet._csv import read_rows, write_matrix, write_rows
from tkrnet._errors import CheckpointError, TKRnetError
from tkrnet._eval import (
    DensityRow,
    KLBoundRow,
    MetricsRow,
    MomentRow,
    density_grid_export,
    evaluate,
    kl_bound_diagnostic,
    moment_table,
    reference_ensemble,
)
from tkrnet._flow import (
    DensityModel,
    read_checkpoint,
    restore_model,
    save_checkpoint,
)
from tkrnet._logging import configure_logging
from tkrnet._odeint import CharacteristicEnsemble
from tkrnet._systems import SystemSpec, get_system
from tkrnet._train import SeedStreams, TrainingEvent, TrainingLog, train
from tkrnet._validators import load_config, load_preset, preset_names

__all__ = ["ReportRow", "build_parser", "main", "report", "run"]

logger = logging.getLogger(__name__)

_TIME_TOL = 1e-12
_ITERATION_FILE = re.compile(r"errors_(?:i(?P<i>\d+)_)?k(?P<k>\d+)\.csv")


class _UsageError(Exception):
    pass


class ReportRow(BaseModel):
    model_config: ClassVar[ConfigDict] = {"extra": "forbid"}

    series: str
    t: float
    rel_err: float
    kl: float


def _label(interval: int | None, k: int) -> str:
    return f"k{k}" if interval is None else f"i{interval}_k{k}"


def _within(times: Sequence[float], t_end: float) -> list[float]:
    return [t for t in times if t <= t_end + _TIME_TOL]


def _write_evaluation(
    model: DensityModel,
    system: SystemSpec,
    ensemble: CharacteristicEnsemble,
    times: Sequence[float],
    config: EvaluationConfig,
    out: Path,
    rng: np.random.Generator,
) -> None:
    """Write ``errors.csv``, ``moments.csv`` and (optionally) ``kl_bound.csv``."""
    table = evaluate(model, system, ensemble, times)
    write_rows(out / "errors.csv", MetricsRow, table.rows)
    moments = moment_table(model, ensemble, times, config.moment_samples, rng)
    write_rows(out / "moments.csv", MomentRow, moments)
    if config.kl_bound:
        bound = kl_bound_diagnostic(model, system, ensemble, times)
        write_rows(out / "kl_bound.csv", KLBoundRow, bound)


def _write_density_grids(
    model: DensityModel, system: SystemSpec, config: EvaluationConfig, out: Path
) -> None:
    grid = config.grid
    a, b = grid.axes
    if max(a, b) >= system.dim or a == b:
        raise TKRnetError(f"grid axes {grid.axes} do not fit a {system.dim}-d system")
    box = grid.box or (
        (float(system.box_low[a]), float(system.box_low[b])),
        (float(system.box_high[a]), float(system.box_high[b])),
    )
    slice_at = system.initial.mean if system.dim > 2 else None
    for t in grid.times:
        dg = density_grid_export(
            model, t, box, grid.resolution, axes=grid.axes, slice_at=slice_at
        )
        write_rows(out / f"density_t{t:g}.csv", DensityRow, dg.rows())


def run(config: ExperimentConfig, *, threads: int = 1) -> Path:
    """Train, checkpoint and evaluate one experiment.

    Returns the artifact directory ``config.output.directory``.
    """
    out = Path(config.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(config.model_dump_json(indent=2))

    system = get_system(config.system)
    seeds = SeedStreams(config.seed)
    ev = config.evaluation
    times = ev.metric_times(config.t_final)
    ensemble = reference_ensemble(
        system,
        ev.samples,
        times,
        seeds.evaluation,
        ev.integrator,
        threads=threads,
        chunk_size=ev.chunk_size,
    )

    def on_iteration(event: TrainingEvent) -> None:
        label = _label(event.interval, event.adapt_iter)
        if config.output.checkpoint_every_iteration:
            save_checkpoint(
                event.composite,
                out / "checkpoints" / f"{label}.json",
                seed=config.seed,
                system=config.system,
            )
        table = evaluate(
            event.composite, system, ensemble, _within(times, event.t_end)
        )
        write_rows(out / f"errors_{label}.csv", MetricsRow, table.rows)

    log = TrainingLog()
    try:
        result = train(system, config, seeds=seeds, callback=on_iteration, log=log)
    finally:
        log.write(out / "metrics.csv")
    save_checkpoint(
        result.model, out / "checkpoint.json", seed=config.seed, system=config.system
    )
    _write_evaluation(
        result.model, system, ensemble, times, ev, out, seeds.evaluation
    )
    _write_density_grids(result.model, system, ev, out)
    logger.info("artifacts written to %s", out)
    return out


def report(run_dir: str | Path, out: str | Path | None = None) -> list[ReportRow]:
    """Collect the per-iteration error tables of a run into ``report.csv``."""
    run_dir = Path(run_dir)
    found = []
    for path in run_dir.iterdir():
        if m := _ITERATION_FILE.fullmatch(path.name):
            interval = None if m["i"] is None else int(m["i"])
            k = int(m["k"])
            found.append(((interval or 0, k), _label(interval, k), path))
    if not found:
        raise TKRnetError(f"no per-iteration error tables in {run_dir}")
    rows: list[ReportRow] = []
    for _, series, path in sorted(found):
        rows.extend(
            ReportRow(series=series, t=r.t, rel_err=r.rel_err, kl=r.kl)
            for r in read_rows(path, MetricsRow)
        )
    write_rows(Path(out or run_dir) / "report.csv", ReportRow, rows)
    return rows


def _print_report(rows: list[ReportRow]) -> None:
    table = Table(title="Errors per adaptivity iteration")
    for name in ("series", "times", "mean rel_err", "mean KL", "final rel_err"):
        table.add_column(name, justify="left" if name == "series" else "right")
    for series in dict.fromkeys(r.series for r in rows):
        part = [r for r in rows if r.series == series]
        table.add_row(
            series,
            str(len(part)),
            f"{np.mean([r.rel_err for r in part]):.4e}",
            f"{np.mean([r.kl for r in part]):.4e}",
            f"{part[-1].rel_err:.4e}",
        )
    Console().print(table)


def _experiment(args: argparse.Namespace) -> ExperimentConfig:
    if args.preset is not None:
        try:
            config = load_preset(args.preset)
        except KeyError as e:
            raise _UsageError(e.args[0]) from e
    elif args.config is not None:
        try:
            config = load_config(args.config)
        except OSError as e:
            raise _UsageError(f"cannot read config {args.config}: {e}") from e
    else:
        raise _UsageError("one of --config or --preset is required")
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "out", None) is not None:
        config.output.directory = Path(args.out)
    return config


def _threads(args: argparse.Namespace) -> int:
    return 1 if args.deterministic else max(1, args.threads)


def _cmd_train(args: argparse.Namespace) -> None:
    run(_experiment(args), threads=_threads(args))


def _checkpoint_model(args: argparse.Namespace) -> tuple[Any, Any]:
    ckpt = read_checkpoint(args.checkpoint)
    return ckpt, restore_model(ckpt)


def _cmd_evaluate(args: argparse.Namespace) -> None:
    ckpt, model = _checkpoint_model(args)
    if args.config is not None or args.preset is not None:
        config = _experiment(args)
        system_cfg, ev, seed = config.system, config.evaluation, config.seed
    else:
        if ckpt.system is None:
            raise CheckpointError(
                f"{args.checkpoint} does not record its system; pass --config"
            )
        system_cfg, ev, seed = ckpt.system, EvaluationConfig(), ckpt.seed or 0
        if args.seed is not None:
            seed = args.seed
    if args.samples is not None:
        ev = ev.model_copy(update={"samples": args.samples})
    times = args.times if args.times is not None else ev.metric_times(model.t_end)
    times = sorted(_within(times, model.t_end))
    if not times:
        raise TKRnetError(f"no evaluation times within [0, {model.t_end}]")
    system = get_system(system_cfg)
    seeds = SeedStreams(seed)
    ensemble = reference_ensemble(
        system,
        ev.samples,
        times,
        seeds.evaluation,
        ev.integrator,
        threads=_threads(args),
        chunk_size=ev.chunk_size,
    )
    path = Path(args.checkpoint)
    out = Path(args.out) if args.out else path.parent / f"{path.stem}_eval"
    _write_evaluation(model, system, ensemble, times, ev, out, seeds.evaluation)
    logger.info("evaluation written to %s", out)


def _cmd_sample(args: argparse.Namespace) -> None:
    ckpt, model = _checkpoint_model(args)
    if args.n < 0:
        raise _UsageError("-n must be non-negative")
    seed = args.seed if args.seed is not None else ckpt.seed or 0
    if args.n == 0:
        x = np.empty((0, model.dim))
    else:
        x = model.sample(args.t, args.n, SeedStreams(seed).evaluation)
    out = Path(args.out) if args.out else Path(f"samples_t{args.t:g}.csv")
    write_matrix(out, [f"x{i + 1}" for i in range(model.dim)], x)
    logger.info("wrote %d samples to %s", x.shape[0], out)


def _cmd_reference(args: argparse.Namespace) -> None:
    config = _experiment(args)
    ev = config.evaluation
    if args.samples is not None:
        ev = ev.model_copy(update={"samples": args.samples})
    times = args.times if args.times is not None else ev.metric_times(config.t_final)
    ensemble = reference_ensemble(
        get_system(config.system),
        ev.samples,
        times,
        SeedStreams(config.seed).evaluation,
        ev.integrator,
        threads=_threads(args),
        chunk_size=ev.chunk_size,
    )
    n, n_t, d = ensemble.states.shape
    traj = np.repeat(np.arange(n), n_t)[:, None]
    t = np.tile(ensemble.times, n)[:, None]
    data = np.hstack(
        [
            traj,
            t,
            ensemble.states.reshape(n * n_t, d),
            ensemble.log_density.reshape(-1, 1),
        ]
    )
    columns = ["trajectory", "t", *(f"x{i + 1}" for i in range(d)), "log_p"]
    out = Path(args.out) if args.out else Path(config.output.directory)
    path = write_matrix(out / "reference.csv", columns, data)
    logger.info("wrote %d characteristics to %s", n, path)


def _cmd_report(args: argparse.Namespace) -> None:
    _print_report(report(args.run_dir, args.out))


def _add_config_args(parser: argparse.ArgumentParser, required: bool) -> None:
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("--config", type=Path, help="JSON experiment configuration")
    group.add_argument(
        "--preset",
        choices=preset_names(aliases=True),
        help="bundled experiment configuration",
    )


def _add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="root seed override")
    parser.add_argument(
        "--threads", type=int, default=1, help="workers for reference integration"
    )
    parser.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=False,
        help="pin execution to a single worker",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tkrnet",
        description="Time-dependent KRnet density solver for Liouville equations.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="log per-batch detail"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", aliases=["run"], help="train and evaluate a model")
    _add_config_args(p, required=True)
    _add_common_args(p)
    p.add_argument("--out", type=Path, help="artifact directory override")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="recompute metrics from a checkpoint")
    p.add_argument("checkpoint", type=Path)
    _add_config_args(p, required=False)
    _add_common_args(p)
    p.add_argument("--times", type=float, nargs="+", help="metric times")
    p.add_argument("--samples", type=int, help="reference trajectories")
    p.add_argument("--out", type=Path, help="output directory")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sample", help="draw points from a checkpoint")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("-t", type=float, required=True, help="time of the draws")
    p.add_argument("-n", type=int, default=1000, help="number of draws")
    p.add_argument("--seed", type=int, default=None, help="root seed override")
    p.add_argument("--out", type=Path, help="output CSV file")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("reference", help="integrate the characteristics ensemble")
    _add_config_args(p, required=True)
    _add_common_args(p)
    p.add_argument("--times", type=float, nargs="+", help="output times")
    p.add_argument("--samples", type=int, help="number of trajectories")
    p.add_argument("--out", type=Path, help="output directory")
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("report", help="tabulate errors across adaptivity iterations")
    p.add_argument("run_dir", type=Path)
    p.add_argument("--out", type=Path, help="directory for report.csv")
    p.set_defaults(func=_cmd_report)
    return parser


def _describe(error: ValidationError) -> str:
    return "; ".join(
        f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}"
        for e in error.errors()
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        args.func(args)
    except _UsageError as e:
        parser.error(str(e))
    except ValidationError as e:
        logger.error("invalid configuration: %s", _describe(e))
        return 2
    except TKRnetError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 1
    return 0
