"""Command-line front end.

One command per analysis stage, scriptable exit codes (0 success, 1 usage
error, 2 data error), deterministic outputs for fixed inputs and seeds.
Options can also come from a flat key=value config file; flags win.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import IO, Iterator

import numpy as np

from .distributions import (
    band_census,
    fit_truncated_power_law,
    format_fit_report,
    linear_binned_histogram,
    log_binned_histogram,
    population_jump_sizes,
    population_waiting_times,
    rg_distribution,
    write_band_csv,
    write_histogram_csv,
)
from .errors import (
    DegenerateTrajectory,
    EmptyInput,
    EmptyPopulation,
    MobitraceError,
    UsageError,
)
from .fmt import sig9
from .ingest import (
    CdrRecord,
    GeoPoint,
    Position,
    ingest_csv,
    parse_timestamp,
    write_rejects_csv,
)
from .kernel import (
    summarize,
    to_intrinsic_frame,
    write_intrinsic_csv,
    write_summary_csv,
)
from .selftest import run_selftest
from .store import (
    PLANAR_HEADER,
    Trajectory,
    build_trajectories,
    load_trajectories_csv,
    write_trajectories_csv,
)
from .svg import render_curve, render_scatter
from .synth import PopulationSpec, TruncatedPowerLawSampler, gen_population

logger = logging.getLogger("mobitrace.cli")

COMMANDS = (
    "ingest",
    "summarize",
    "rescale",
    "jumps",
    "waits",
    "rgdist",
    "fit",
    "classify",
    "synth",
    "selftest",
)

# documented defaults; every one can be overridden by flag or config key
DEFAULT_LOG_BINS = (2.0, 0.1, 12)  # km-scale values: jumps, gyration radii
DEFAULT_WAIT_BINS = (2.0, 1.0, 22)  # seconds, 1 s .. ~48 days
DEFAULT_FIT_RANGE = (1.0, 300.0)
DEFAULT_USERS = 1000
DEFAULT_SEED = 0
SYNTH_BETA = 1.5
SYNTH_KAPPA_KM = 50.0
SYNTH_RG_RANGE_KM = (0.1, 40.0)
SYNTH_EVENTS_PER_USER = (50, 150)
SYNTH_WINDOW = ("2024-06-01T00:00:00Z", "2024-07-01T00:00:00Z")
SYNTH_REF = GeoPoint(49.49, 0.12)

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract reserves 2 for data errors
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


@dataclass
class RunConfig:
    """Fully resolved options for one command invocation."""

    command: str
    inputs: list[str] = field(default_factory=list)
    out: str | None = None
    ref: GeoPoint | None = None  # None means derive from the data
    window: tuple[int | None, int | None] = (None, None)
    log_bins: tuple[float, float, int] | None = None
    lin_bins: tuple[float, float, int] | None = None
    fit_range: tuple[float, float] = DEFAULT_FIT_RANGE
    r0_mode: str = "fixed"
    users: int = DEFAULT_USERS
    seed: int = DEFAULT_SEED
    svg: str | None = None
    rejects: str | None = None
    quiet: bool = False


# -- flag and config-file value parsing --------------------------------------


def _parse_ref(text: str) -> GeoPoint | None:
    if text == "auto":
        return None
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"--ref expects 'auto' or 'LAT,LON', got {text!r}")
    try:
        lat, lon = float(parts[0]), float(parts[1])
    except ValueError:
        raise UsageError(f"--ref expects numeric LAT,LON, got {text!r}") from None
    if not (math.isfinite(lat) and math.isfinite(lon) and abs(lat) <= 90 and abs(lon) <= 180):
        raise UsageError(f"--ref coordinates out of range: {text!r}")
    return GeoPoint(lat, lon)


def _parse_instant(text: str, flag: str) -> int:
    try:
        return parse_timestamp(text)
    except MobitraceError as err:
        raise UsageError(f"{flag} expects YYYY-MM-DDThh:mm:ssZ: {err}") from None


def _parse_log_bins(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--log-bins expects BASE:START:NBINS, got {text!r}")
    try:
        base, start, n_bins = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--log-bins expects numbers, got {text!r}") from None
    if not (base > 1.0 and start > 0.0 and n_bins >= 1):
        raise UsageError(f"--log-bins needs BASE > 1, START > 0, NBINS >= 1, got {text!r}")
    return base, start, n_bins


def _parse_lin_bins(text: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--lin-bins expects LO:HI:NBINS, got {text!r}")
    try:
        lo, hi, n_bins = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"--lin-bins expects numbers, got {text!r}") from None
    if not (lo < hi and n_bins >= 1):
        raise UsageError(f"--lin-bins needs LO < HI and NBINS >= 1, got {text!r}")
    return lo, hi, n_bins


def _parse_fit_range(text: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        raise UsageError(f"--fit-range expects MIN:MAX, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise UsageError(f"--fit-range expects numbers, got {text!r}") from None
    if not (0.0 < lo < hi):
        raise UsageError(f"--fit-range needs 0 < MIN < MAX, got {text!r}")
    return lo, hi


def _parse_bool(text: str, key: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"config key {key!r} expects a boolean, got {text!r}")


def _parse_count(text: str, flag: str, minimum: int) -> int:
    try:
        value = int(text)
    except ValueError:
        raise UsageError(f"{flag} expects an integer, got {text!r}") from None
    if value < minimum:
        raise UsageError(f"{flag} must be >= {minimum}, got {value}")
    return value


def _read_config_file(path: str) -> dict[str, list[str]]:
    values: dict[str, list[str]] = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            for line_no, raw in enumerate(handle, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                key, sep, value = line.partition("=")
                if not sep:
                    raise UsageError(f"{path}:{line_no}: expected key=value")
                values.setdefault(key.strip(), []).append(value.strip())
    except OSError as err:
        raise UsageError(f"cannot read config file {path}: {err}") from None
    return values


def _build_parser() -> _Parser:
    parser = _Parser(prog="mobitrace", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name: str, help_text: str, *, inputs: bool, out: bool, svg: bool = False) -> _Parser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", metavar="PATH", help="key=value option file; flags override")
        p.add_argument("--quiet", action="store_true", default=None, help="log errors only")
        if inputs:
            p.add_argument(
                "--input",
                action="append",
                metavar="PATH",
                help="input CSV (repeatable); raw rows or a planar dump, told apart by header",
            )
            p.add_argument(
                "--ref",
                metavar="auto|LAT,LON",
                help="projection reference point (default auto: mean of accepted rows)",
            )
            p.add_argument(
                "--from",
                dest="window_from",
                metavar="ISO8601",
                help="drop records before this UTC instant (inclusive bound)",
            )
            p.add_argument(
                "--to",
                dest="window_to",
                metavar="ISO8601",
                help="drop records after this UTC instant (inclusive bound)",
            )
        if out:
            p.add_argument("--out", metavar="PATH", help="output path (default standard output)")
        if svg:
            p.add_argument("--svg", metavar="PATH", help="also render a minimal SVG plot here")
        return p

    p = add("ingest", "parse raw rows, report counts, optionally dump planar form", inputs=True, out=True)
    p.add_argument("--rejects", metavar="PATH", help="write line_no,reason rows for refused input")

    add("summarize", "per-user mobility summary table", inputs=True, out=True)
    add("rescale", "per-user trajectories in the intrinsic frame", inputs=True, out=True, svg=True)

    for name, help_text in (
        ("jumps", "histogram of distances between consecutive events"),
        ("waits", "histogram of seconds between consecutive events"),
    ):
        p = add(name, help_text, inputs=True, out=True)
        p.add_argument("--log-bins", metavar="BASE:START:NBINS", help="geometric bin edges")
        p.add_argument("--lin-bins", metavar="LO:HI:NBINS", help="uniform bin edges")

    p = add("rgdist", "histogram of per-user gyration radii", inputs=True, out=True, svg=True)
    p.add_argument("--log-bins", metavar="BASE:START:NBINS", help="geometric bin edges (default 2:0.1:12)")
    p.add_argument("--lin-bins", metavar="LO:HI:NBINS", help="uniform bin edges")

    p = add("fit", "truncated power-law fit of the gyration-radius distribution", inputs=True, out=True)
    p.add_argument("--fit-range", metavar="MIN:MAX", help="km range of samples to fit (default 1:300)")
    p.add_argument("--r0", dest="r0_mode", choices=("fixed", "free"), help="offset handling (default fixed)")

    add("classify", "LOW/MID/HIGH gyration-radius band census", inputs=True, out=True)

    p = add("synth", "generate a synthetic population in raw CSV form", inputs=False, out=True)
    p.add_argument("--users", type=int, metavar="N", help=f"population size (default {DEFAULT_USERS})")
    p.add_argument("--seed", type=int, metavar="N", help=f"master seed (default {DEFAULT_SEED})")

    add("selftest", "run the built-in invariant suite", inputs=False, out=False)
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    """Merge flags over config-file values over built-in defaults."""
    file_values = _read_config_file(args.config) if args.config else {}

    def pick(key: str) -> str | None:
        got = file_values.get(key)
        return got[-1] if got else None

    config = RunConfig(command=args.command)

    if hasattr(args, "input"):
        config.inputs = list(args.input) if args.input else list(file_values.get("input", []))
        ref_text = args.ref if args.ref is not None else pick("ref")
        config.ref = _parse_ref(ref_text) if ref_text is not None else None
        from_text = args.window_from if args.window_from is not None else pick("from")
        to_text = args.window_to if args.window_to is not None else pick("to")
        config.window = (
            _parse_instant(from_text, "--from") if from_text is not None else None,
            _parse_instant(to_text, "--to") if to_text is not None else None,
        )
        if not config.inputs:
            raise UsageError("--input is required")

    if hasattr(args, "out"):
        config.out = args.out if args.out is not None else pick("out")
    if hasattr(args, "svg"):
        config.svg = args.svg if args.svg is not None else pick("svg")
    if hasattr(args, "rejects"):
        config.rejects = args.rejects if args.rejects is not None else pick("rejects")

    if hasattr(args, "log_bins"):
        log_text = args.log_bins if args.log_bins is not None else pick("log-bins")
        lin_text = args.lin_bins if args.lin_bins is not None else pick("lin-bins")
        if log_text is not None and lin_text is not None:
            raise UsageError("--log-bins and --lin-bins are mutually exclusive")
        config.log_bins = _parse_log_bins(log_text) if log_text is not None else None
        config.lin_bins = _parse_lin_bins(lin_text) if lin_text is not None else None

    if hasattr(args, "fit_range"):
        range_text = args.fit_range if args.fit_range is not None else pick("fit-range")
        config.fit_range = _parse_fit_range(range_text) if range_text is not None else DEFAULT_FIT_RANGE
        r0_text = args.r0_mode if args.r0_mode is not None else pick("r0")
        if r0_text is not None and r0_text not in ("fixed", "free"):
            raise UsageError(f"--r0 expects fixed or free, got {r0_text!r}")
        config.r0_mode = r0_text if r0_text is not None else "fixed"

    if hasattr(args, "users"):
        users_text = pick("users")
        if args.users is not None:
            config.users = args.users
        elif users_text is not None:
            config.users = _parse_count(users_text, "users", 1)
        if config.users < 1:
            raise UsageError(f"--users must be >= 1, got {config.users}")
        seed_text = pick("seed")
        if args.seed is not None:
            config.seed = args.seed
        elif seed_text is not None:
            config.seed = _parse_count(seed_text, "seed", 0)
        if config.seed < 0:
            raise UsageError(f"--seed must be >= 0, got {config.seed}")

    if args.quiet is not None:
        config.quiet = args.quiet
    else:
        quiet_text = pick("quiet")
        config.quiet = _parse_bool(quiet_text, "quiet") if quiet_text is not None else False

    return config


# -- shared plumbing ---------------------------------------------------------


@contextmanager
def _open_out(path: str | None) -> Iterator[IO[str]]:
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            yield handle


def _sniff_planar(path: str) -> bool:
    with open(path, "r", encoding="utf-8") as handle:
        first = handle.readline().rstrip("\r\n")
    return first == PLANAR_HEADER


def _window_filter(
    trajectories: dict[str, Trajectory], window: tuple[int | None, int | None]
) -> dict[str, Trajectory]:
    t_lo, t_hi = window
    if t_lo is None and t_hi is None:
        return trajectories
    out: dict[str, Trajectory] = {}
    for user_id, traj in trajectories.items():
        mask = np.ones(traj.n, dtype=bool)
        if t_lo is not None:
            mask &= traj.times >= t_lo
        if t_hi is not None:
            mask &= traj.times <= t_hi
        if mask.any():
            out[user_id] = Trajectory(user_id, traj.times[mask], traj.xy[mask])
    if not out:
        raise EmptyInput("the time window excluded every record")
    return out


def _load_trajectories(config: RunConfig) -> dict[str, Trajectory]:
    """Read the inputs as one population; raw and planar files cannot mix."""
    planar_flags = {path: _sniff_planar(path) for path in config.inputs}
    if len(set(planar_flags.values())) > 1:
        raise UsageError("cannot mix raw and planar input files")
    if all(planar_flags.values()):
        if config.ref is not None:
            logger.warning("ignoring --ref: planar input is already projected")
        records = []
        for path in config.inputs:
            for traj in load_trajectories_csv(path).values():
                xs = traj.xy[:, 0].tolist()
                ys = traj.xy[:, 1].tolist()
                for i, t in enumerate(traj.times.tolist()):
                    records.append(CdrRecord(traj.user_id, t, Position(xs[i], ys[i])))
        return _window_filter(build_trajectories(records), config.window)
    records, _ = ingest_csv(config.inputs, ref=config.ref, window=config.window)
    return build_trajectories(records)


def _population_rgs(trajectories: dict[str, Trajectory]) -> tuple[list, np.ndarray]:
    summaries = [summarize(traj) for traj in trajectories.values()]
    return summaries, np.asarray([s.rg for s in summaries], dtype=np.float64)


def _bin_centers(edges: np.ndarray, logarithmic: bool) -> np.ndarray:
    if logarithmic:
        return np.sqrt(edges[:-1] * edges[1:])
    return 0.5 * (edges[:-1] + edges[1:])


# -- command handlers --------------------------------------------------------


def _cmd_ingest(config: RunConfig) -> int:
    for path in config.inputs:
        if _sniff_planar(path):
            raise UsageError(f"{path} is already planar; ingest reads raw rows only")
    records, stats = ingest_csv(config.inputs, ref=config.ref, window=config.window)
    if config.out is not None:
        with _open_out(config.out) as out:
            write_trajectories_csv(build_trajectories(records), out)
    if config.rejects is not None:
        with _open_out(config.rejects) as out:
            write_rejects_csv(stats, out)
    print(f"lines_read={stats.lines_read}")
    print(f"records_ok={stats.records_ok}")
    print(f"records_rejected={stats.records_rejected}")
    for reason in sorted(stats.reject_reasons):
        print(f"reject_{reason}={stats.reject_reasons[reason]}")
    print(f"ref_lat={sig9(stats.ref_point.lat)}")
    print(f"ref_lon={sig9(stats.ref_point.lon)}")
    print(f"users={len({rec.user_id for rec in records})}")
    return 0


def _cmd_summarize(config: RunConfig) -> int:
    trajectories = _load_trajectories(config)
    with _open_out(config.out) as out:
        write_summary_csv((summarize(t) for t in trajectories.values()), out)
    return 0


def _cmd_rescale(config: RunConfig) -> int:
    trajectories = _load_trajectories(config)
    intrinsics = []
    skipped = 0
    for traj in trajectories.values():
        try:
            intrinsics.append(to_intrinsic_frame(traj))
        except DegenerateTrajectory:
            skipped += 1
            logger.warning("skipping %s: all events at one position", traj.user_id)
    if not intrinsics:
        raise EmptyInput("every user is degenerate; nothing to rescale")
    if skipped:
        logger.info("rescaled %d users, skipped %d degenerate", len(intrinsics), skipped)
    with _open_out(config.out) as out:
        write_intrinsic_csv(intrinsics, out)
    if config.svg is not None:
        pooled = np.concatenate([item.uv for item in intrinsics], axis=0)
        with _open_out(config.svg) as out:
            render_scatter(pooled, out, title="intrinsic frame", axis_labels=("u", "v"))
    return 0


def _emit_histogram(config: RunConfig, hist, what: str) -> int:
    with _open_out(config.out) as out:
        write_histogram_csv(hist, out)
    if config.svg is not None:
        logarithmic = hist.kind == "logarithmic"
        with _open_out(config.svg) as out:
            render_curve(
                _bin_centers(hist.edges, logarithmic),
                hist.density,
                out,
                log_x=logarithmic,
                log_y=logarithmic,
                title=what,
                axis_labels=(what, "density"),
            )
    return 0


def _consecutive_histogram(config: RunConfig, values: np.ndarray, default_bins, what: str) -> int:
    if values.size == 0:
        raise EmptyPopulation(f"no {what} available: no user has two events")
    if config.lin_bins is not None:
        hist = linear_binned_histogram(values, *config.lin_bins)
    else:
        hist = log_binned_histogram(values, *(config.log_bins or default_bins))
    return _emit_histogram(config, hist, what)


def _cmd_jumps(config: RunConfig) -> int:
    trajectories = _load_trajectories(config)
    return _consecutive_histogram(
        config, population_jump_sizes(trajectories), DEFAULT_LOG_BINS, "jump size (km)"
    )


def _cmd_waits(config: RunConfig) -> int:
    trajectories = _load_trajectories(config)
    values = population_waiting_times(trajectories).astype(np.float64)
    return _consecutive_histogram(config, values, DEFAULT_WAIT_BINS, "waiting time (s)")


def _cmd_rgdist(config: RunConfig) -> int:
    trajectories = _load_trajectories(config)
    summaries, _ = _population_rgs(trajectories)
    hist = rg_distribution(summaries, log_bins=config.log_bins, lin_bins=config.lin_bins)
    return _emit_histogram(config, hist, "gyration radius (km)")


def _cmd_fit(config: RunConfig) -> int:
    trajectories = _load_trajectories(config)
    _, rgs = _population_rgs(trajectories)
    fit = fit_truncated_power_law(rgs, r0_mode=config.r0_mode, fit_range=config.fit_range)
    with _open_out(config.out) as out:
        out.write(format_fit_report(fit) + "\n")
    return 0


def _cmd_classify(config: RunConfig) -> int:
    trajectories = _load_trajectories(config)
    summaries, _ = _population_rgs(trajectories)
    with _open_out(config.out) as out:
        write_band_csv(band_census(summaries), out)
    return 0


def _cmd_synth(config: RunConfig) -> int:
    sampler = TruncatedPowerLawSampler(
        SYNTH_BETA, SYNTH_KAPPA_KM, SYNTH_RG_RANGE_KM[0], SYNTH_RG_RANGE_KM[1]
    )
    spec = PopulationSpec(
        n_users=config.users,
        rg_target_sampler=sampler,
        events_per_user=SYNTH_EVENTS_PER_USER,
        window=(parse_timestamp(SYNTH_WINDOW[0]), parse_timestamp(SYNTH_WINDOW[1])),
        master_seed=config.seed,
    )
    population = gen_population(spec, geo_ref=SYNTH_REF)
    with _open_out(config.out) as out:
        population.write_csv(out)
    logger.info("generated %d users with seed %d", config.users, config.seed)
    return 0


def _cmd_selftest(config: RunConfig) -> int:
    report = run_selftest()
    print(report.format())
    return 0 if report.ok else 2


_HANDLERS = {
    "ingest": _cmd_ingest,
    "summarize": _cmd_summarize,
    "rescale": _cmd_rescale,
    "jumps": _cmd_jumps,
    "waits": _cmd_waits,
    "rgdist": _cmd_rgdist,
    "fit": _cmd_fit,
    "classify": _cmd_classify,
    "synth": _cmd_synth,
    "selftest": _cmd_selftest,
}


def _configure_logging(quiet: bool) -> None:
    level_name = os.environ.get("MOBITRACE_LOG", "warn").lower()
    root = logging.getLogger("mobitrace")
    if not root.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    level = _LOG_LEVELS.get(level_name, logging.WARNING)
    root.setLevel(logging.ERROR if quiet else level)
    if level_name not in _LOG_LEVELS:
        logger.warning("unknown MOBITRACE_LOG value %r, using warn", level_name)


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _resolve(args)
        _configure_logging(config.quiet)
        return _HANDLERS[config.command](config)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except MobitraceError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
