"""Command-line front end: ``varshift detect | simulate | critvals | preprocess``."""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._version import __version__
from .csvio import OutputSet, format_series, read_series
from .errors import InputError, ParameterError, VarshiftError
from .icss import (
    DEFAULT_ALPHAS,
    DEFAULT_LENGTHS,
    DEFAULT_SEED,
    DSTAR_POLICIES,
    TABLE_ENV_VAR,
    CriticalValueTable,
    default_table,
    icss_detect,
)
from .montecarlo import BUNDLED_SUITES, COUNT_WINDOWS, bundled_scenarios, load_scenarios, run_experiment, summary_text
from .preprocess import (
    TimeSeries,
    ar1_coefficient,
    first_differences,
    lowess_detrend,
    monthly_anomalies,
    prewhiten,
    remove_stepwise_mean,
    running_std,
)
from .srsd import DetectorConfig, detect

STEP_NAMES = ("diff", "lowess", "prewhiten", "anomalies", "stepmean", "runstd")


@dataclass(frozen=True)
class Step:
    name: str
    args: tuple[str, ...] = ()

    def __str__(self) -> str:
        return ":".join((self.name,) + self.args)


def parse_steps(text: str) -> list[Step]:
    """Parse ``diff,lowess:0.1,prewhiten:auto`` into steps (applied in order)."""
    steps = []
    for k, item in enumerate(t.strip() for t in text.split(",")):
        if not item:
            continue
        name, *args = item.split(":")
        if name not in STEP_NAMES:
            raise InputError(f"step {k + 1}: unknown step {name!r}; choose from {', '.join(STEP_NAMES)}")
        steps.append(Step(name, tuple(args)))
    return steps


def _apply_step(series: TimeSeries, step: Step) -> tuple[TimeSeries, str]:
    a = step.args
    if step.name == "diff":
        return first_differences(series), "first differences"
    if step.name == "lowess":
        frac = float(a[0]) if a else 0.1
        iters = int(a[1]) if len(a) > 1 else 0
        _, resid = lowess_detrend(series, frac, iters)
        return resid, f"LOWESS residuals fraction={frac:g} iterations={iters}"
    if step.name == "prewhiten":
        if not a or a[0] == "auto":
            phi = ar1_coefficient(series)
            return prewhiten(series, phi), f"prewhiten phi={phi:.6f} (auto, lag-1 OLS)"
        phi = float(a[0])
        return prewhiten(series, phi), f"prewhiten phi={phi:g}"
    if step.name == "anomalies":
        return monthly_anomalies(series), "monthly anomalies (per-month mean and n-1 std)"
    if step.name == "stepmean":
        cps = [int(v) - 1 for v in a]
        return remove_stepwise_mean(series, cps), f"stepwise mean removed, segments start at {','.join(a) or 'none'}"
    if step.name == "runstd":
        w = int(a[0]) if a else 13
        return running_std(series, w), f"running std window={w}"
    raise InputError(f"unknown step {step.name!r}")


def apply_steps(series: TimeSeries, steps: list[Step]) -> tuple[TimeSeries, list[str]]:
    log = []
    for k, step in enumerate(steps, start=1):
        try:
            series, desc = _apply_step(series, step)
        except (VarshiftError, ValueError, IndexError) as exc:
            raise InputError(f"step {k} ({step}): {exc}") from None
        log.append(f"step {k}: {desc}")
    return series, log


def _mean_warning(values: np.ndarray) -> str | None:
    if values.size < 2:
        return None
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    if abs(mean) > 0.1 * sd:
        return (f"series mean {mean:.4g} exceeds 0.1 of its standard deviation {sd:.4g}; "
                "variances are taken about zero, consider removing the mean first")
    return None


def _fmt(v: float, spec: str = ".6g") -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else format(v, spec)


def _table_for(args) -> CriticalValueTable:
    if getattr(args, "critvals", None):
        return CriticalValueTable.load(args.critvals)
    return default_table()


def cmd_detect(args, outputs: OutputSet) -> int:
    series = read_series(args.input)
    steps = parse_steps(args.steps or "")
    series, log = apply_steps(series, steps)
    x = series.values
    if not np.all(np.isfinite(x)):
        raise InputError("preprocessed series contains undefined values; runstd output cannot be analysed")
    warning = _mean_warning(x)
    if warning:
        print(f"varshift: warning: {warning}", file=sys.stderr)
    methods = ("srsd", "icss") if args.method == "both" else (args.method,)
    header = [
        f"varshift {__version__} detect",
        f"input: {args.input} (n={x.size})",
        f"steps: {','.join(map(str, steps)) or 'none'}",
        *log,
        f"methods: {','.join(methods)}",
    ]
    if warning:
        header.append(f"warning: {warning}")

    regimes, cps, pend = [], [], []
    sd_cols: dict[str, np.ndarray] = {}
    if "srsd" in methods:
        cfg = DetectorConfig(args.p, args.cutoff, args.huber)
        header.append(f"srsd: p={cfg.p:g} l={cfg.l} h={cfg.h:g} F_cr={cfg.f_critical:.6f}")
        res = detect(series, cfg)
        col = np.empty(x.size)
        for r in res.regimes:
            regimes.append(("srsd", r.start, r.end, r.variance, r.weighted_variance))
            col[r.start : r.end + 1] = r.variance
        sd_cols["srsd"] = col
        for cp in res.change_points:
            cps.append(("srsd", cp.index, cp.direction.value, cp.observed_p))
        if res.pending is not None:
            p = res.pending
            pend.append(("srsd", p.candidate_index, p.direction.value, p.points_seen, p.rssi_partial, res.pending_p))
    if "icss" in methods:
        table = _table_for(args)
        header.append(f"icss: alpha={args.alpha:g} dstar_policy={args.dstar_policy} "
                      f"table={table.provenance}(reps={table.reps}, seed={table.seed})")
        res = icss_detect(x, args.alpha, table, args.dstar_policy)
        col = np.empty(x.size)
        for s in res.segments:
            regimes.append(("icss", s.start, s.end, s.variance, math.nan))
            col[s.start : s.end + 1] = s.variance
        sd_cols["icss"] = col
        for c, d, pv in zip(res.change_points, res.directions, res.p_values):
            cps.append(("icss", c, d, pv))

    lab = series.label
    lines = [f"# {h}" for h in header]
    lines.append("## regimes")
    lines.append("method\tstart\tend\tstart_label\tend_label\tlength\tvariance\tweighted_variance")
    for m, a, b, v, wv in regimes:
        lines.append(f"{m}\t{a + 1}\t{b + 1}\t{lab(a)}\t{lab(b)}\t{b - a + 1}\t{_fmt(v)}\t{_fmt(wv)}")
    lines.append("## change_points")
    lines.append("method\tposition\tlabel\tdirection\tp_value")
    for m, c, d, pv in cps:
        lines.append(f"{m}\t{c + 1}\t{lab(c)}\t{d}\t{_fmt(pv, '.4g')}")
    lines.append("## pending")
    lines.append("method\tposition\tlabel\tdirection\tpoints_seen\trssi\tp_value")
    for m, c, d, k, r, pv in pend:
        lines.append(f"{m}\t{c + 1}\t{lab(c)}\t{d}\t{k}\t{_fmt(r)}\t{_fmt(pv, '.4g')}")
    report = "\n".join(lines) + "\n"

    if args.output:
        outputs.add(args.output, report)
    if args.plot_data:
        cols = list(sd_cols)
        rows = [f"# {h}" for h in header]
        rows.append("position\tlabel\tvalue\t" + "\t".join(f"{m}_regime_variance" for m in cols))
        for i in range(x.size):
            rows.append(f"{i + 1}\t{lab(i)}\t{x[i]:.10g}\t" + "\t".join(_fmt(sd_cols[m][i]) for m in cols))
        outputs.add(args.plot_data, "\n".join(rows) + "\n")

    print(f"{'method':<6} {'position':>8} {'label':>10} {'direction':>9} {'p-value':>10}")
    for m, c, d, pv in cps:
        print(f"{m:<6} {c + 1:>8} {lab(c):>10} {d:>9} {_fmt(pv, '.3g'):>10}")
    if not cps:
        print("(no change points)")
    for m, c, d, k, r, pv in pend:
        print(f"{m}: unresolved {d} candidate at {c + 1} ({lab(c)}) after {k} of {args.cutoff} points, "
              f"p-value so far {_fmt(pv, '.3g')}")
    return 0


def cmd_simulate(args, outputs: OutputSet) -> int:
    specs = []
    for name in args.suite or []:
        specs += bundled_scenarios(name)
    if args.config:
        specs += load_scenarios(args.config)
    if not specs:
        raise InputError("nothing to simulate: give a config file or --suite")
    overrides = {}
    if args.reps is not None:
        overrides["reps"] = args.reps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.count_window is not None:
        overrides["count_window"] = args.count_window
    try:
        specs = [replace(s, **overrides) for s in specs]
    except ParameterError as exc:
        raise InputError(f"invalid override: {exc}") from None
    out = Path(args.output_dir)
    reports = []
    for spec in specs:
        report = run_experiment(spec, workers=args.workers)
        reports.append(report)
        outputs.add(out / f"{spec.name}.tsv", report.to_text())
        outputs.add(out / f"{spec.name}.hist.tsv", report.histogram_text())
        for m, d in report.detectors.items():
            pct = " ".join(f"{v:5.1f}" for v in d.count_percentages)
            hits = " ".join(f"{c + 1}:{v:.1f}" for c, v in zip(d.true_points, d.hit_percentages))
            extra = f" failures={d.failures}" if d.failures else ""
            print(f"{spec.name:<24} {m:<5} 0/1/2/3+: {pct}  hits {hits or '-'}{extra}")
    outputs.add(out / "summary.tsv", summary_text(reports))
    return 0


def cmd_critvals(args, outputs: OutputSet) -> int:
    table = CriticalValueTable.generate(args.lengths, args.alphas, args.reps, args.seed)
    outputs.add(args.output, table.to_text())
    for a in sorted(args.alphas):
        vals = " ".join(f"{n}:{table.values[(n, a)]:.4f}" for n in args.lengths)
        print(f"alpha={a:g}  {vals}")
    return 0


def cmd_preprocess(args, outputs: OutputSet) -> int:
    series = read_series(args.input)
    steps = parse_steps(args.steps or "")
    result, log = apply_steps(series, steps)
    header = [
        f"varshift {__version__} preprocess",
        f"input: {args.input} (n={len(series)})",
        f"steps: {','.join(map(str, steps)) or 'none'}",
        *log,
    ]
    text = format_series(result, header)
    if args.output:
        outputs.add(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def _csv_floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _csv_ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varshift", description="Detect abrupt shifts in the variance of time series.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="cmd", required=True)

    steps_help = ("comma-separated preprocessing chain, e.g. 'anomalies,lowess:0.1,prewhiten:auto'; "
                  "steps: diff, lowess[:fraction[:iterations]], prewhiten[:auto|phi], anomalies, "
                  "stepmean:pos[:pos...], runstd[:window]")

    d = sub.add_parser("detect", help="find variance change points in a CSV series")
    d.add_argument("input")
    d.add_argument("--method", choices=("srsd", "icss", "both"), default="srsd")
    d.add_argument("--p", type=float, default=0.1, help="SRSD target probability (default 0.1)")
    d.add_argument("--cutoff", "-l", type=int, default=30, help="SRSD cut-off length (default 30)")
    d.add_argument("--huber", type=float, default=2.0, help="SRSD Huber constant (default 2)")
    d.add_argument("--alpha", type=float, default=0.05, help="ICSS significance level (default 0.05)")
    d.add_argument("--dstar-policy", choices=DSTAR_POLICIES, default="series")
    d.add_argument("--critvals", help=f"critical value table (default: ${TABLE_ENV_VAR} or the shipped table)")
    d.add_argument("--steps", default="", help=steps_help)
    d.add_argument("--output", "-o", help="write the change-point report here")
    d.add_argument("--plot-data", help="write per-observation values and regime variances here")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", help="run Monte Carlo scenarios")
    s.add_argument("config", nargs="?", help="scenario file (INI sections)")
    s.add_argument("--suite", action="append", choices=BUNDLED_SUITES, help="bundled scenario suite (repeatable)")
    s.add_argument("--reps", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--count-window", choices=COUNT_WINDOWS)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--output-dir", "-o", default="reports")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("critvals", help="regenerate the ICSS critical value table")
    c.add_argument("--lengths", type=_csv_ints, default=list(DEFAULT_LENGTHS))
    c.add_argument("--alphas", type=_csv_floats, default=list(DEFAULT_ALPHAS))
    c.add_argument("--reps", type=int, default=100_000)
    c.add_argument("--seed", type=int, default=DEFAULT_SEED)
    c.add_argument("--output", "-o", required=True)
    c.set_defaults(func=cmd_critvals)

    p = sub.add_parser("preprocess", help="apply a preprocessing chain to a CSV series")
    p.add_argument("input")
    p.add_argument("--steps", default="", help=steps_help)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_preprocess)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outputs = OutputSet()
    try:
        status = args.func(args, outputs)
        outputs.commit()
        return status
    except (VarshiftError, ValueError, OSError) as exc:
        print(f"varshift: error: {exc}", file=sys.stderr)
        for q in outputs.quarantine():
            print(f"varshift: partial output written to {q}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
