"""Command-line entry point: ingest -> estimate -> classify -> summarise.

Every command writes plain files into one output directory (``--out``,
else ``$HIVETEMP_OUT``, else ``./hivetemp-out``) and prints a one-line
summary. Exit codes: 0 ok, 2 configuration error, 3 data error, 4 internal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .classify import StatusThresholds, build_timeline, timeline_summary, timeline_to_csv
from .collapse_stats import (
    CORR_THRESHOLD,
    DEFAULT_STEP,
    ERROR_WINDOWS,
    OPTIMAL_BAND,
    collapse_onset_statistical,
    error_curve_csv,
    rolling_stats_csv,
)
from .errors import ConfigError, DataError
from .estimators import (
    DEFAULT_T_D,
    MAX_LAG,
    WINDOW_DAYS,
    LagGrid,
    Method,
    calibrate_t_d,
    estimates_to_csv,
    estimates_to_jsonl,
    parse_estimates,
    rolling_estimates_detailed,
)
from .gridmap import GridSpec, accumulate, grid_json, grid_to_csv, zone_record, zone_summary
from .ingest import (
    DEFAULT_MAX_GAP,
    Hemisphere,
    format_instant,
    load_dataset,
    load_manifest,
    parse_instant,
    to_minutes,
)
from . import synth as synth_mod

OUT_ENV = "HIVETEMP_OUT"
DEFAULT_OUT = "hivetemp-out"
RUN_MANIFEST = "run_manifest.json"
EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INTERNAL = 0, 2, 3, 4


@dataclass(frozen=True)
class RunConfig:
    """Validated analysis settings; the hash of this record names a run."""

    manifest: str
    methods: tuple[str, ...] = ("extremes", "crosscorr")
    window_days: float = WINDOW_DAYS
    step: int | None = None
    t_d: float = DEFAULT_T_D
    t_d_calibration: tuple[str, str] | None = None
    lags: tuple[int, ...] | None = None
    max_gap: int = DEFAULT_MAX_GAP
    fmt: str = "csv"
    jobs: int | None = None

    def __post_init__(self):
        if not self.methods or any(m not in ("extremes", "crosscorr") for m in self.methods):
            raise ConfigError("method must be extremes, crosscorr or both")
        if not 1.0 <= self.window_days <= 60.0:
            raise ConfigError("window must be between 1 and 60 days")
        if self.step is not None and self.step <= 0:
            raise ConfigError("step must be positive")
        if not 20.0 <= self.t_d <= 45.0:
            raise ConfigError("t_d must be a plausible hive temperature (20-45 degC)")
        if self.max_gap < 0:
            raise ConfigError("max gap must be non-negative")
        if self.fmt not in ("csv", "jsonl"):
            raise ConfigError("format must be csv or jsonl")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if self.lags is not None:
            LagGrid(self.lags)
        if self.t_d_calibration is not None:
            a, b = (to_minutes(_instant(x)) for x in self.t_d_calibration)
            if b <= a:
                raise ConfigError("calibration period must end after it starts")

    def digest(self) -> str:
        rec = asdict(self)
        rec.pop("jobs")  # parallelism does not change results
        return hashlib.sha256(json.dumps(rec, sort_keys=True).encode()).hexdigest()


def _instant(text: str):
    try:
        return parse_instant(text)
    except ValueError as exc:
        raise ConfigError(f"bad instant {text!r}: {exc}") from None


class Outputs:
    """Files written by one command; removed again if the command fails."""

    def __init__(self, root: Path):
        self.root = root
        self.created_root = not root.exists()
        self.written: list[Path] = []

    def write(self, name: str, text: str) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        p = self.root / name
        p.write_text(text, encoding="utf-8")
        self.written.append(p)
        return p

    def discard(self) -> None:
        for p in self.written:
            p.unlink(missing_ok=True)
        if self.created_root and self.root.exists() and not any(self.root.iterdir()):
            self.root.rmdir()


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _json(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _estimate_name(hive_id: str, method: str, fmt: str) -> str:
    return f"estimates_{hive_id}_{method}.{fmt}"


def _thresholds(args) -> StatusThresholds:
    return StatusThresholds(
        pi_warn=args.pi_warn, delta_t_warn=args.delta_t_warn, pi_collapse=args.pi_collapse,
        winter_pi_warn=args.winter_pi_warn, confirm_days=args.confirm_days,
        warn_combinator=args.warn_combinator,
    )


# -- analyze ------------------------------------------------------------------

def _analyze_hive(ds, hive_id: str, cfg: RunConfig):
    t_d = cfg.t_d
    if cfg.t_d_calibration is not None:
        a, b = (to_minutes(_instant(x)) for x in cfg.t_d_calibration)
        t_d = calibrate_t_d(ds.hives[hive_id], a, b)
    grid = LagGrid(cfg.lags) if cfg.lags is not None else None
    runs = {}
    for method in cfg.methods:
        runs[method] = rolling_estimates_detailed(
            ds, hive_id, Method(method), cfg.window_days, cfg.step, t_d, grid, cfg.max_gap
        )
    return t_d, runs


def cmd_analyze(args, out: Outputs) -> str:
    cal = tuple(args.t_d_calibrate.split("/")) if args.t_d_calibrate else None
    if cal is not None and len(cal) != 2:
        raise ConfigError("--t-d-calibrate takes START/END")
    lags = None
    if args.lags:
        try:
            lags = tuple(int(x) for x in args.lags.split(","))
        except ValueError:
            raise ConfigError(f"bad lag list {args.lags!r}") from None
    methods = ("extremes", "crosscorr") if args.method == "both" else (args.method,)
    cfg = RunConfig(args.manifest, methods, args.window_days, args.step, args.t_d, cal, lags,
                    args.max_gap, args.format, args.jobs)
    manifest = load_manifest(cfg.manifest)
    ds = load_dataset(manifest)
    hive_ids = list(manifest.hives)
    jobs = min(cfg.jobs or len(hive_ids), max(len(hive_ids), 1))
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda h: _analyze_hive(ds, h, cfg), hive_ids))

    files, skipped, hives_doc = [], {}, {}
    n_est = 0
    for hive_id, (t_d, runs) in zip(hive_ids, results):
        hives_doc[hive_id] = {"t_d": round(t_d, 6), "files": {}}
        for method in cfg.methods:
            res = runs[method]
            name = _estimate_name(hive_id, method, cfg.fmt)
            text = estimates_to_csv(res.estimates) if cfg.fmt == "csv" else estimates_to_jsonl(res.estimates)
            out.write(name, text)
            files.append(name)
            n_est += len(res.estimates)
            hives_doc[hive_id]["files"][method] = name
            hives_doc[hive_id].setdefault("interpolated_samples", res.n_interpolated)
            hives_doc[hive_id].setdefault("gap_splits", res.n_splits)
            skipped[f"{hive_id}/{method}"] = dict(sorted(res.skipped.items()))
    run = {
        "tool": "hivetemp",
        "version": __version__,
        "config_hash": cfg.digest(),
        "config": {k: v for k, v in asdict(cfg).items() if k != "jobs"},
        "dataset": {
            "label": manifest.label,
            "hemisphere": manifest.hemisphere.value,
            "hive_labels": manifest.hive_labels,
            "collapse_onsets": manifest.collapse_onsets,
        },
        "gap_policy": {"interpolate_up_to_min": cfg.max_gap, "longer_gaps": "split"},
        "hives": hives_doc,
        "skipped_windows": skipped,
    }
    out.write(RUN_MANIFEST, _json(run))
    n_skip = sum(sum(v.values()) for v in skipped.values())
    return f"{len(hive_ids)} hives x {len(cfg.methods)} methods: {n_est} estimates, {n_skip} skipped windows"


# -- consumers of an analysis run ---------------------------------------------

@dataclass
class Run:
    root: Path
    doc: dict
    estimates: dict[str, list] = field(default_factory=dict)


def _load_run(path: str, method: str) -> Run:
    root = Path(path)
    try:
        doc = json.loads((root / RUN_MANIFEST).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"no {RUN_MANIFEST} in {root}; run 'analyze' first") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"unreadable {RUN_MANIFEST}: {exc}") from None
    run = Run(root, doc)
    for hive_id, info in doc["hives"].items():
        name = info["files"].get(method)
        if name is None:
            raise ConfigError(f"run has no {method} estimates for hive {hive_id!r}")
        try:
            run.estimates[hive_id] = parse_estimates((root / name).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise DataError(f"estimate file {name} is missing") from None
    return run


def _timelines(run: Run, th: StatusThresholds):
    hemi = Hemisphere(run.doc["dataset"]["hemisphere"])
    return [build_timeline(h, run.estimates[h], hemi, th) for h in run.estimates]


def _status_line(timelines) -> str:
    n_warn = sum(len(tl.warning_episodes) for tl in timelines)
    n_col = sum(tl.collapse_onset is not None for tl in timelines)
    return f"{n_warn} warning{'s' if n_warn != 1 else ''}, {n_col} collapse{'s' if n_col != 1 else ''}"


def cmd_classify(args, out: Outputs) -> str:
    th = _thresholds(args)
    run = _load_run(args.run, args.method)
    tls = _timelines(run, th)
    out.write(f"timeline_{args.method}.csv", timeline_to_csv(tls))
    out.write(f"timeline_{args.method}.json", _json([timeline_summary(tl) for tl in tls]))
    return _status_line(tls)


def _onsets(run: Run) -> dict[str, int]:
    return {h: to_minutes(_instant(t)) for h, t in run.doc["dataset"]["collapse_onsets"].items()}


def _labels(run: Run) -> dict[str, str]:
    return run.doc["dataset"]["hive_labels"]


def cmd_grid(args, out: Outputs) -> str:
    th = _thresholds(args)
    run = _load_run(args.run, args.method)
    hemi = Hemisphere(run.doc["dataset"]["hemisphere"])
    grid = accumulate(run.estimates, _labels(run), _onsets(run), GridSpec(), hemi)
    zones = zone_summary(run.estimates, _labels(run), th)
    out.write(f"grid_{args.method}.csv", grid_to_csv(grid))
    out.write(f"grid_{args.method}.json", grid_json(grid, zones))
    return (f"{len(grid.cells)} cells, {grid.n_binned} binned, {grid.n_clamped} clamped, "
            f"{grid.n_skipped} skipped")


def cmd_report(args, out: Outputs) -> str:
    th = _thresholds(args)
    run = _load_run(args.run, args.method)
    tls = _timelines(run, th)
    doc = {
        "version": __version__,
        "config_hash": run.doc.get("config_hash"),
        "method": args.method,
        "thresholds": asdict(th),
        "timelines": [timeline_summary(tl) for tl in tls],
        "zones": [zone_record(z) for z in zone_summary(run.estimates, _labels(run), th)],
    }
    out.write(f"report_{args.method}.json", _json(doc))
    return _status_line(tls)


def cmd_collapse_stats(args, out: Outputs) -> str:
    manifest = load_manifest(args.manifest)
    ds = load_dataset(manifest)
    hive_ids = args.hive or list(ds.hives)
    for h in hive_ids:
        if h not in ds.hives:
            raise ConfigError(f"unknown hive {h!r}")
    windows = tuple(float(w) for w in args.windows.split(",")) if args.windows else ERROR_WINDOWS
    summary, onsets = {}, []
    for h in hive_ids:
        res = collapse_onset_statistical(
            ds.env, ds.hives[h], (args.band_lo, args.band_hi), windows, args.onset_window,
            args.step, args.corr_threshold, max_gap=args.max_gap,
        )
        out.write(f"rolling_{h}.csv", rolling_stats_csv({"env": res.env_stats, "hive": res.hive_stats}))
        out.write(f"error_{h}.csv", error_curve_csv(res.error))
        when = None if res.onset is None else format_instant(res.onset, ds.env.utc_offset)
        summary[h] = {"onset": when, "n_error_points": len(res.error.t)}
        onsets.append(f"{h}={when or 'none'}")
    out.write("collapse_stats.json", _json(summary))
    return "onsets: " + ", ".join(onsets)


def cmd_synth(args, out: Outputs) -> str:
    env = synth_mod.EnvModel(noise_sigma=args.env_noise, span=args.span, seed=args.seed,
                             weather_sigma=args.weather_sigma, amp_jitter=args.amp_jitter,
                             weather_days=args.weather_days)
    if args.scenario == "constant":
        sd = synth_mod.constant_scenario(args.m, args.delta_t, env, tau=args.tau,
                                         noise_sigma=args.noise, seed=args.seed + 1)
    elif args.scenario == "degradation":
        sd = synth_mod.degradation_scenario(drift_days=args.span, delta_t=args.delta_t, tau=args.tau,
                                            noise_sigma=args.noise, env_model=env, seed=args.seed)
    else:
        sd = synth_mod.fleet_scenario(args.hives, args.span, noise_sigma=args.noise, env_model=env,
                                      seed=args.seed)
    out.root.mkdir(parents=True, exist_ok=True)
    paths = synth_mod.write_synth(sd, out.root)
    out.written.extend(paths)
    h = hashlib.sha256()
    for p in sorted(paths):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"wrote {len(paths)} files for {len(sd.dataset.hives)} hives, sha256 {h.hexdigest()[:16]}"


# -- argument parsing ---------------------------------------------------------

def _add_thresholds(p):
    d = StatusThresholds()
    p.add_argument("--pi-warn", type=float, default=d.pi_warn)
    p.add_argument("--delta-t-warn", type=float, default=d.delta_t_warn)
    p.add_argument("--pi-collapse", type=float, default=d.pi_collapse)
    p.add_argument("--winter-pi-warn", type=float, default=d.winter_pi_warn)
    p.add_argument("--confirm-days", type=float, default=d.confirm_days)
    p.add_argument("--warn-combinator", choices=("any", "all"), default=d.warn_combinator)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hivetemp", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"hivetemp {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        p.set_defaults(func=func)
        return p

    p = command("analyze", cmd_analyze, "rolling (m, pi, delta_t) estimates per hive")
    p.add_argument("manifest")
    p.add_argument("--method", choices=("extremes", "crosscorr", "both"), default="both")
    p.add_argument("--window-days", type=float, default=WINDOW_DAYS)
    p.add_argument("--step", type=int, help="window step in minutes")
    p.add_argument("--t-d", type=float, default=DEFAULT_T_D)
    p.add_argument("--t-d-calibrate", metavar="START/END",
                   help="take t_d as the hive mean over this period instead")
    p.add_argument("--lags", help=f"comma-separated lag grid in minutes (default 0..{MAX_LAG})")
    p.add_argument("--max-gap", type=int, default=DEFAULT_MAX_GAP)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.add_argument("--jobs", type=int)

    for name, func, text in (
        ("classify", cmd_classify, "status timelines from an analysis run"),
        ("grid", cmd_grid, "(pi, delta_t) grid summary from an analysis run"),
        ("report", cmd_report, "one JSON with timelines and zone summaries"),
    ):
        p = command(name, func, text)
        p.add_argument("run", help="directory written by 'analyze'")
        p.add_argument("--method", choices=("extremes", "crosscorr"), default="crosscorr")
        _add_thresholds(p)

    p = command("collapse-stats", cmd_collapse_stats, "rolling moments, error curve and onset")
    p.add_argument("manifest")
    p.add_argument("--hive", action="append")
    p.add_argument("--windows", help="comma-separated window lengths in days")
    p.add_argument("--onset-window", type=float, default=7.0)
    p.add_argument("--step", type=int, default=DEFAULT_STEP)
    p.add_argument("--band-lo", type=float, default=OPTIMAL_BAND[0])
    p.add_argument("--band-hi", type=float, default=OPTIMAL_BAND[1])
    p.add_argument("--corr-threshold", type=float, default=CORR_THRESHOLD)
    p.add_argument("--max-gap", type=int, default=DEFAULT_MAX_GAP)

    p = command("synth", cmd_synth, "write a seeded synthetic dataset")
    p.add_argument("--scenario", choices=("constant", "degradation", "fleet"), default="degradation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--span", type=float, default=30.0)
    p.add_argument("--m", type=float, default=0.3)
    p.add_argument("--delta-t", type=float, default=10.0)
    p.add_argument("--tau", type=int, default=60)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--env-noise", type=float, default=0.1)
    p.add_argument("--weather-sigma", type=float, default=0.0)
    p.add_argument("--amp-jitter", type=float, default=0.0)
    p.add_argument("--weather-days", type=int, default=1)
    p.add_argument("--hives", type=int, default=16)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Outputs(_out_dir(args))
    try:
        line = args.func(args, out)
    except ConfigError as exc:
        code, msg = EXIT_CONFIG, f"configuration error: {exc}"
    except DataError as exc:
        code, msg = EXIT_DATA, f"data error: {exc}"
    except ValueError as exc:  # constructor checks in the library modules
        code, msg = EXIT_CONFIG, f"configuration error: {exc}"
    except Exception as exc:  # noqa: BLE001
        code, msg = EXIT_INTERNAL, f"internal error: {type(exc).__name__}: {exc}"
    else:
        print(line)
        return EXIT_OK
    out.discard()
    print(f"hivetemp: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
