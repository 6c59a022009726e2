"""CSV ingestion and provenance-headed output files.

Accepted input: comma-separated, decimal point, optional header row, either
one value column or a time column (``YYYY`` or ``YYYY-MM``) followed by a value
column. Blank lines and lines starting with ``#`` are skipped, so files written
by this package can be read back.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InputError
from .preprocess import TimeSeries, _ordinal, parse_time_label


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_series(lines: Iterable[str]) -> TimeSeries:
    """Parse CSV text lines into a :class:`TimeSeries`; errors carry 1-based line numbers."""
    values: list[float] = []
    labels: list[str] = []
    ncols = None
    seen_data = False
    prev_ord = None
    prev_kind = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            row = next(csv.reader([line]))
        except csv.Error as exc:
            raise InputError(str(exc), lineno) from None
        row = [c.strip() for c in row]
        if ncols is None:
            if len(row) not in (1, 2):
                raise InputError(f"expected 1 or 2 columns (value, or time,value), got {len(row)}", lineno)
            ncols = len(row)
            if not _is_number(row[-1]):
                continue  # header row
        if len(row) != ncols:
            raise InputError(f"expected {ncols} columns, got {len(row)}", lineno)
        text = row[-1]
        if text == "":
            raise InputError("missing value (gaps are not supported)", lineno)
        try:
            v = float(text)
        except ValueError:
            raise InputError(f"cannot parse value {text!r} as a number", lineno) from None
        if not math.isfinite(v):
            raise InputError(f"non-finite value {text!r}", lineno)
        if ncols == 2:
            try:
                parsed = parse_time_label(row[0])
            except InputError as exc:
                raise InputError(str(exc), lineno) from None
            kind = parsed[1] is None
            if prev_kind is not None and kind != prev_kind:
                raise InputError(f"time label {row[0]!r} mixes annual and monthly formats", lineno)
            ordinal = _ordinal(parsed)
            if prev_ord is not None and ordinal <= prev_ord:
                raise InputError(f"time label {row[0]!r} is not after the previous one", lineno)
            prev_ord, prev_kind = ordinal, kind
            labels.append(row[0])
        values.append(v)
        seen_data = True
    if not seen_data:
        raise InputError("no data rows found")
    return TimeSeries(np.asarray(values), tuple(labels) if ncols == 2 else None)


def read_series(path: str | Path) -> TimeSeries:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_series(text.splitlines())
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def format_series(series: TimeSeries, header: Iterable[str] = ()) -> str:
    """CSV text with ``#`` provenance lines, a header row and one row per observation."""
    out = [f"# {h}" for h in header]
    if series.labels is not None:
        out.append("time,value")
        out += [f"{t},{v:.10g}" for t, v in zip(series.labels, series.values)]
    else:
        out.append("value")
        out += [f"{v:.10g}" for v in series.values]
    return "\n".join(out) + "\n"


class OutputSet:
    """Output files staged in memory and written only when the run succeeds.

    On failure :meth:`quarantine` writes whatever was staged next to each
    target with a ``.quarantine`` suffix, leaving target paths untouched.
    """

    def __init__(self):
        self._staged: dict[Path, str] = {}

    def add(self, path: str | Path, text: str) -> None:
        self._staged[Path(path)] = text

    def commit(self) -> list[Path]:
        # Write every temporary file before touching any target, so a failure
        # part way through leaves all targets as they were.
        temps = []
        try:
            for path, text in self._staged.items():
                if path.is_dir():
                    raise IsADirectoryError(f"output path {path} is a directory")
                path.parent.mkdir(parents=True, exist_ok=True)
                tmp = path.with_name(path.name + ".partial")
                tmp.write_text(text, encoding="utf-8")
                temps.append((tmp, path))
        except OSError:
            for tmp, _ in temps:
                tmp.unlink(missing_ok=True)
            raise
        for tmp, path in temps:
            tmp.replace(path)
        return [path for _, path in temps]

    def quarantine(self) -> list[Path]:
        written = []
        for path, text in self._staged.items():
            q = quarantine_path(path)
            q.parent.mkdir(parents=True, exist_ok=True)
            q.write_text(text, encoding="utf-8")
            written.append(q)
        return written


def quarantine_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".quarantine")
