"""CSV design tables, parameter samples and atomic file writes."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import ApproximateDesign, ExactDesign
from .errors import ConfigError

NUMBER_FORMAT = "%.10g"


def fmt(value: float) -> str:
    return NUMBER_FORMAT % value


def atomic_write_text(path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_design(path, design, names: Sequence[str]) -> None:
    """Design table: one column per factor, then ``weight`` or ``count``."""
    if isinstance(design, ExactDesign):
        rows = [[*map(float, x), int(c)] for x, c in zip(design.points, design.counts)]
        header = [*names, "count"]
    else:
        rows = [[*map(float, x), float(w)] for x, w in zip(design.points, design.weights)]
        header = [*names, "weight"]
    atomic_write_text(path, rows_to_csv(header, rows))


def read_design(path, names: Sequence[str] | None = None):
    """Read a design table written by :func:`write_design`.

    Returns an :class:`ApproximateDesign` (last column ``weight``, weights
    renormalized) or an :class:`ExactDesign` (last column ``count``).
    """
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read design file: {exc}") from exc
    if len(rows) < 2:
        raise ConfigError(f"{path}: design file needs a header and at least one row")
    header = [c.strip() for c in rows[0]]
    kind = header[-1]
    if kind not in ("weight", "count"):
        raise ConfigError(f"{path}:1: last column must be 'weight' or 'count', got {kind!r}")
    if names is not None and header[:-1] != list(names):
        raise ConfigError(f"{path}:1: factor columns {header[:-1]} do not match {list(names)}")
    data = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(r)}")
        try:
            data.append([float(c) for c in r])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    arr = np.array(data)
    try:
        if kind == "count":
            if np.any(arr[:, -1] != np.round(arr[:, -1])):
                raise ValueError("counts must be integers")
            return ExactDesign(arr[:, :-1], arr[:, -1].astype(int))
        return ApproximateDesign.normalized(arr[:, :-1], arr[:, -1])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def read_thetas(path, p: int | None = None) -> np.ndarray:
    """Parameter samples: one vector per row, optional header line."""
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read parameter file: {exc}") from exc
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise ConfigError(f"{path}: no parameter rows")
    out = []
    for lineno, r in enumerate(rows, start=1):
        try:
            out.append([float(c) for c in r])
        except ValueError as exc:
            raise ConfigError(f"{path}: row {lineno}: {exc}") from exc
    widths = {len(r) for r in out}
    if len(widths) != 1:
        raise ConfigError(f"{path}: rows have differing lengths {sorted(widths)}")
    arr = np.array(out)
    if p is not None and arr.shape[1] != p:
        raise ConfigError(f"{path}: {arr.shape[1]} columns but the model has p = {p}")
    return arr


def write_jsonl(path, records: Iterable[dict]) -> None:
    atomic_write_text(path, "".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")
