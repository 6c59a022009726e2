"""Monte Carlo comparison of SRSD and ICSS on simulated piecewise-variance series.

A :class:`ScenarioSpec` describes zero-mean Gaussian series whose variance is
constant between given change points, optionally with one observation
replaced by a fixed outlier value. :func:`run_experiment` draws ``reps``
replicates, runs the selected detectors on each, and tallies how many change
points were found, how often each true change point was hit exactly, and
where detections landed.

Replicate ``i`` is always drawn from the stream keyed on ``(seed, i)``, so a
report does not depend on how many worker processes produced it.

Positions in the Python API are 0-based. Config files and written reports use
1-based positions.
"""

from __future__ import annotations

import configparser
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._version import __version__
from .errors import InputError, ParameterError, VarshiftError
from .icss import DSTAR_POLICIES, default_table, icss
from .kernels import RNG_ALGORITHM, replicate_rng
from .srsd import DetectorConfig, confirmed_indices

METHODS = ("srsd", "icss")
COUNT_WINDOWS = ("native", "common")
REPORT_VERSION = 1
MAX_FAILURE_EXAMPLES = 5
BUNDLED_SUITES = ("table1", "table2", "table3", "table4", "table5", "fig2")


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulated experiment.

    ``change_points`` are 0-based first indices of each new regime and
    ``outlier`` is an optional ``(index, value)`` replacement.

    ``count_window`` chooses which detections are tallied. ``"native"`` counts
    every confirmed SRSD point (all of them start at or before ``n - l``) and
    every ICSS point. ``"common"`` counts both detectors over ``0 .. n-l-1``.
    Points outside the window go to a separate histogram.
    """

    name: str
    n: int
    regime_variances: tuple[float, ...]
    change_points: tuple[int, ...] = ()
    outlier: tuple[int, float] | None = None
    reps: int = 10_000
    seed: int = 1
    methods: tuple[str, ...] = METHODS
    srsd: DetectorConfig = field(default_factory=DetectorConfig)
    alpha: float = 0.05
    dstar_policy: str = "series"
    count_window: str = "native"

    def __post_init__(self):
        object.__setattr__(self, "regime_variances", tuple(float(v) for v in self.regime_variances))
        object.__setattr__(self, "change_points", tuple(int(c) for c in self.change_points))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.n < 2:
            raise ParameterError(f"series length must be at least 2, got {self.n}")
        if len(self.regime_variances) != len(self.change_points) + 1:
            raise ParameterError(
                f"{len(self.change_points)} change points need {len(self.change_points) + 1} regime variances, "
                f"got {len(self.regime_variances)}"
            )
        if any(v < 0 for v in self.regime_variances):
            raise ParameterError("regime variances must be nonnegative")
        prev = 0
        for c in self.change_points:
            if not prev < c < self.n:
                raise ParameterError(f"change points must be strictly increasing within 1..{self.n - 1}, got {list(self.change_points)}")
            prev = c
        if self.outlier is not None:
            idx, val = self.outlier
            if not 0 <= int(idx) < self.n:
                raise ParameterError(f"outlier index {idx} outside 0..{self.n - 1}")
            object.__setattr__(self, "outlier", (int(idx), float(val)))
        if self.reps < 1:
            raise ParameterError(f"reps must be at least 1, got {self.reps}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ParameterError(f"methods must be a nonempty subset of {METHODS}, got {self.methods}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.dstar_policy not in DSTAR_POLICIES:
            raise ParameterError(f"dstar_policy must be one of {DSTAR_POLICIES}, got {self.dstar_policy!r}")
        if self.count_window not in COUNT_WINDOWS:
            raise ParameterError(f"count_window must be one of {COUNT_WINDOWS}, got {self.count_window!r}")
        if "srsd" in self.methods and self.n < self.srsd.l + 1:
            raise ParameterError(f"n={self.n} is too short for SRSD with l={self.srsd.l}")

    def sd_profile(self) -> np.ndarray:
        sd = np.empty(self.n)
        edges = (0,) + self.change_points + (self.n,)
        for j, var in enumerate(self.regime_variances):
            sd[edges[j] : edges[j + 1]] = math.sqrt(var)
        return sd

    def window(self, method: str) -> tuple[int, int]:
        """Inclusive 0-based range of positions that are counted for ``method``."""
        l = self.srsd.l
        if self.count_window == "common":
            return 0, self.n - l - 1
        if method == "srsd":
            return 0, self.n - l
        return 0, self.n - 1


def generate_replicate(spec: ScenarioSpec, index: int) -> np.ndarray:
    """Replicate ``index`` of ``spec``: independent normals scaled per regime."""
    rng = replicate_rng(spec.seed, index)
    x = rng.standard_normal(spec.n) * spec.sd_profile()
    if spec.outlier is not None:
        x[spec.outlier[0]] = spec.outlier[1]
    return x


@dataclass
class DetectorSummary:
    """Aggregated outcome of one detector over all replicates of a scenario."""

    method: str
    n: int
    true_points: tuple[int, ...]
    window: tuple[int, int]
    counts: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.int64))
    hits: np.ndarray | None = None
    histogram: np.ndarray | None = None
    excluded: np.ndarray | None = None
    failures: int = 0
    failure_examples: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.hits is None:
            self.hits = np.zeros(len(self.true_points), dtype=np.int64)
        if self.histogram is None:
            self.histogram = np.zeros(self.n, dtype=np.int64)
        if self.excluded is None:
            self.excluded = np.zeros(self.n, dtype=np.int64)

    @property
    def replicates(self) -> int:
        """Replicates that completed (failures excluded)."""
        return int(self.counts.sum())

    def add(self, points: Sequence[int]) -> None:
        lo, hi = self.window
        kept = [p for p in points if lo <= p <= hi]
        for p in points:
            if lo <= p <= hi:
                self.histogram[p] += 1
            else:
                self.excluded[p] += 1
        self.counts[min(len(kept), 3)] += 1
        for j, c in enumerate(self.true_points):
            if c in kept:
                self.hits[j] += 1

    def fail(self, index: int, message: str) -> None:
        self.failures += 1
        if len(self.failure_examples) < MAX_FAILURE_EXAMPLES:
            self.failure_examples.append((index, message))

    def _pct(self, values: np.ndarray) -> np.ndarray:
        total = self.replicates
        if total == 0:
            return np.full(values.shape, math.nan)
        return 100.0 * values / total

    @property
    def count_percentages(self) -> np.ndarray:
        """Percent of replicates with 0, 1, 2 and 3+ counted detections."""
        return self._pct(self.counts)

    def collapsed_percentages(self, top: int) -> np.ndarray:
        """Count distribution with the last bin ``>= top`` (``top`` in 1..3)."""
        if not 1 <= top <= 3:
            raise ParameterError("top bin must be 1, 2 or 3")
        c = self.counts[: top + 1].copy()
        c[top] = self.counts[top:].sum()
        return self._pct(c)

    @property
    def hit_percentages(self) -> np.ndarray:
        return self._pct(self.hits)

    @property
    def histogram_percentages(self) -> np.ndarray:
        return self._pct(self.histogram)


@dataclass
class ExperimentReport:
    spec: ScenarioSpec
    detectors: dict[str, DetectorSummary]
    metadata: dict[str, str]

    def __getitem__(self, method: str) -> DetectorSummary:
        return self.detectors[method]

    def header_lines(self) -> list[str]:
        return [f"# {k}: {v}" for k, v in self.metadata.items()]

    def to_text(self) -> str:
        """Outcome cells as tab-separated text, one row per cell."""
        buf = io.StringIO()
        buf.write(f"# varshift experiment report, format version {REPORT_VERSION}\n")
        for line in self.header_lines():
            buf.write(line + "\n")
        buf.write("detector\tcell\tcount\tpercent\n")
        for m, d in self.detectors.items():
            pct = d.count_percentages
            for k, label in enumerate(("0", "1", "2", "3+")):
                buf.write(f"{m}\tdetected_{label}\t{d.counts[k]}\t{pct[k]:.2f}\n")
            hp = d.hit_percentages
            for j, c in enumerate(d.true_points):
                buf.write(f"{m}\thit_{c + 1}\t{d.hits[j]}\t{hp[j]:.2f}\n")
            buf.write(f"{m}\texcluded_detections\t{int(d.excluded.sum())}\t\n")
            buf.write(f"{m}\tfailures\t{d.failures}\t\n")
        return buf.getvalue()

    def histogram_text(self) -> str:
        """Per-position detection counts (1-based) for plotting."""
        buf = io.StringIO()
        buf.write(f"# varshift detection histogram, format version {REPORT_VERSION}\n")
        for line in self.header_lines():
            buf.write(line + "\n")
        cols = []
        for m in self.detectors:
            cols += [m, f"{m}_excluded"]
        buf.write("position\t" + "\t".join(cols) + "\n")
        for i in range(self.spec.n):
            row = []
            for d in self.detectors.values():
                row += [str(d.histogram[i]), str(d.excluded[i])]
            buf.write(f"{i + 1}\t" + "\t".join(row) + "\n")
        return buf.getvalue()

    def write(self, directory: str | Path) -> tuple[Path, Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        report = directory / f"{self.spec.name}.tsv"
        hist = directory / f"{self.spec.name}.hist.tsv"
        report.write_text(self.to_text(), encoding="utf-8")
        hist.write_text(self.histogram_text(), encoding="utf-8")
        return report, hist


def _detect_replicate(spec: ScenarioSpec, index: int) -> dict[str, list[int] | str]:
    x = generate_replicate(spec, index)
    out: dict[str, list[int] | str] = {}
    for m in spec.methods:
        try:
            if m == "srsd":
                out[m] = confirmed_indices(x.tolist(), spec.srsd)
            else:
                out[m] = icss(x, spec.alpha, dstar_policy=spec.dstar_policy)
        except VarshiftError as exc:
            out[m] = f"{type(exc).__name__}: {exc}"
    return out


def _run_chunk(spec: ScenarioSpec, start: int, stop: int) -> list[dict[str, list[int] | str]]:
    return [_detect_replicate(spec, i) for i in range(start, stop)]


def _metadata(spec: ScenarioSpec) -> dict[str, str]:
    meta = {
        "tool": f"varshift {__version__}",
        "scenario": spec.name,
        "n": str(spec.n),
        "regime_variances": ",".join(f"{v:g}" for v in spec.regime_variances),
        "change_points": ",".join(str(c + 1) for c in spec.change_points) or "none",
        "outlier": f"{spec.outlier[0] + 1}:{spec.outlier[1]:g}" if spec.outlier else "none",
        "reps": str(spec.reps),
        "seed": str(spec.seed),
        "rng": RNG_ALGORITHM,
        "methods": ",".join(spec.methods),
        "count_window": spec.count_window,
    }
    if "srsd" in spec.methods:
        c = spec.srsd
        meta["srsd"] = f"p={c.p:g} l={c.l} h={c.h:g}"
    if "icss" in spec.methods:
        t = default_table()
        meta["icss"] = f"alpha={spec.alpha:g} dstar_policy={spec.dstar_policy} table={t.provenance}(reps={t.reps}, seed={t.seed})"
    for m in spec.methods:
        lo, hi = spec.window(m)
        meta[f"window_{m}"] = f"{lo + 1}..{hi + 1}"
    return meta


def run_experiment(spec: ScenarioSpec, workers: int = 1, chunk_size: int = 500) -> ExperimentReport:
    """Simulate ``spec.reps`` replicates and aggregate both detectors' outcomes.

    With ``workers > 1`` replicates are processed in chunks by a process pool;
    aggregation always runs in replicate order, so the report is identical for
    any worker count. A replicate on which a detector raises is counted in that
    detector's ``failures`` and left out of its percentages.
    """
    if workers < 1:
        raise ParameterError(f"workers must be at least 1, got {workers}")
    summaries = {m: DetectorSummary(m, spec.n, spec.change_points, spec.window(m)) for m in spec.methods}
    chunks = [(s, min(s + chunk_size, spec.reps)) for s in range(0, spec.reps, chunk_size)]
    if workers == 1 or len(chunks) == 1:
        results = (_run_chunk(spec, a, b) for a, b in chunks)
    else:
        pool = ProcessPoolExecutor(max_workers=workers)
        results = pool.map(_run_chunk, [spec] * len(chunks), [a for a, _ in chunks], [b for _, b in chunks])
    try:
        for (start, _), chunk in zip(chunks, results):
            for offset, outcome in enumerate(chunk):
                for m, value in outcome.items():
                    if isinstance(value, str):
                        summaries[m].fail(start + offset, value)
                    else:
                        summaries[m].add(value)
    finally:
        if workers > 1 and len(chunks) > 1:
            pool.shutdown()
    return ExperimentReport(spec, summaries, _metadata(spec))


def _split_list(text: str) -> list[str]:
    text = text.strip()
    if not text or text.lower() == "none":
        return []
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


_REQUIRED = object()


def _field(section: configparser.SectionProxy, key: str, convert, default=_REQUIRED):
    if key not in section:
        if default is _REQUIRED:
            raise InputError(f"[{section.name}] missing required field '{key}'")
        return default
    raw = section[key]
    try:
        return convert(raw)
    except (ValueError, TypeError) as exc:
        raise InputError(f"[{section.name}] {key} = {raw!r}: {exc}") from None


def _parse_outlier(text: str) -> tuple[int, float] | None:
    text = text.strip()
    if not text or text.lower() == "none":
        return None
    pos, sep, value = text.partition(":")
    if not sep:
        raise ValueError("expected position:value")
    return int(pos) - 1, float(value)


def spec_from_section(section: configparser.SectionProxy) -> ScenarioSpec:
    """Build a spec from one config section (1-based positions)."""
    methods = tuple(_field(section, "methods", _split_list, ["srsd", "icss"]))
    cfg = DetectorConfig(
        p=_field(section, "p", float, 0.1),
        l=_field(section, "l", int, 30),
        h=_field(section, "h", float, 2.0),
    ) if "srsd" in methods else DetectorConfig()
    try:
        return ScenarioSpec(
            name=section.name,
            n=_field(section, "n", int),
            regime_variances=tuple(float(v) for v in _field(section, "variances", _split_list)),
            change_points=tuple(int(c) - 1 for c in _field(section, "change_points", _split_list, [])),
            outlier=_field(section, "outlier", _parse_outlier, None),
            reps=_field(section, "reps", int, 10_000),
            seed=_field(section, "seed", int, 1),
            methods=methods,
            srsd=cfg,
            alpha=_field(section, "alpha", float, 0.05),
            dstar_policy=_field(section, "dstar_policy", str, "series"),
            count_window=_field(section, "count_window", str, "native"),
        )
    except (ParameterError, ValueError) as exc:
        raise InputError(f"[{section.name}] {exc}") from None


def parse_scenarios(text: str, source: str = "<config>") -> list[ScenarioSpec]:
    """Parse an INI-style scenario file; one section per experiment."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise InputError(f"{source}: {exc}") from None
    specs = [spec_from_section(parser[name]) for name in parser.sections()]
    if not specs:
        raise InputError(f"{source}: no scenario sections found")
    return specs


def load_scenarios(path: str | Path) -> list[ScenarioSpec]:
    path = Path(path)
    return parse_scenarios(path.read_text(encoding="utf-8"), str(path))


def bundled_scenarios(suite: str) -> list[ScenarioSpec]:
    """Scenarios from a bundled suite (``table1`` ... ``table5``, ``fig2``)."""
    if suite not in BUNDLED_SUITES:
        raise ParameterError(f"unknown suite {suite!r}; choose from {BUNDLED_SUITES}")
    text = resources.files("varshift").joinpath(f"data/{suite}.cfg").read_text(encoding="utf-8")
    return parse_scenarios(text, f"{suite}.cfg")


def bundled_config_path(suite: str) -> Path:
    if suite not in BUNDLED_SUITES:
        raise ParameterError(f"unknown suite {suite!r}; choose from {BUNDLED_SUITES}")
    return Path(str(resources.files("varshift").joinpath(f"data/{suite}.cfg")))


def summary_text(reports: Iterable[ExperimentReport]) -> str:
    """One line per scenario and detector: count percentages and hit percentages."""
    buf = io.StringIO()
    buf.write("scenario\tdetector\tpct_0\tpct_1\tpct_2\tpct_3plus\thits\tfailures\n")
    for r in reports:
        for m, d in r.detectors.items():
            pct = "\t".join(f"{v:.2f}" for v in d.count_percentages)
            hits = ",".join(f"{c + 1}:{v:.2f}" for c, v in zip(d.true_points, d.hit_percentages)) or "-"
            buf.write(f"{r.spec.name}\t{m}\t{pct}\t{hits}\t{d.failures}\n")
    return buf.getvalue()


def reproduce_paper_suite(output_dir: str | Path, suites: Sequence[str] = BUNDLED_SUITES, reps: int | None = None,
                          seed: int | None = None, workers: int = 1) -> dict[str, ExperimentReport]:
    """Run the bundled comparison suites and write one report pair per scenario.

    ``reps`` and ``seed`` override the values in the bundled configs. A
    ``summary.tsv`` with every scenario is written alongside.
    """
    out = Path(output_dir)
    reports: dict[str, ExperimentReport] = {}
    for suite in suites:
        for spec in bundled_scenarios(suite):
            if reps is not None:
                spec = replace(spec, reps=reps)
            if seed is not None:
                spec = replace(spec, seed=seed)
            report = run_experiment(spec, workers=workers)
            report.write(out)
            reports[spec.name] = report
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.tsv").write_text(summary_text(reports.values()), encoding="utf-8")
    return reports


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)
