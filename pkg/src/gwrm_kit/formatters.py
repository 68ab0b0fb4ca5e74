"""Writers for sampled series, JSON reports and comparison tables."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

import numpy as np

from .base import DomainError, ShapeError


def sample_times(
    start: float,
    end: float,
    count: int,
    spacing: str = "linear",
    origin: Optional[float] = None,
) -> np.ndarray:
    """
    Build an output grid over ``[start, end]``.

    Args:
        start (float): First time of the run.
        end (float): Last time reached by the run.
        count (int): Number of samples.
        spacing (str, optional): ``linear`` or ``log``. Defaults to ``linear``.
        origin (float, optional): First sample of a log grid when ``start``
            is not positive.

    Returns:
        ndarray: Increasing sample times ending exactly at ``end``.
    """
    if count < 2:
        raise DomainError(f"At least 2 samples are required, got {count}.")

    if spacing == "linear":
        grid = np.linspace(start, end, count)
    elif spacing == "log":
        first = start if start > 0 else origin
        if first is None or not 0 < first < end:
            raise DomainError(
                f"Log spacing needs a positive first sample below {end}, got {first}."
            )
        grid = np.geomspace(first, end, count)
    else:
        raise DomainError(f"Unknown spacing {spacing!r}; expected linear or log.")

    grid[-1] = end
    return grid


def series_columns(
    labels: Sequence[str],
    values: np.ndarray,
    scaled: Optional[Mapping[str, float]] = None,
) -> tuple[list[str], np.ndarray]:
    """
    Append ``<label>_scaled`` columns for the variables named in ``scaled``.

    Args:
        labels (Sequence[str]): One label per row of ``values``.
        values (ndarray): ``N x M`` samples.
        scaled (Mapping[str, float], optional): Magnification per label.

    Returns:
        tuple: ``(labels, values)`` with the extra rows appended.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] != len(labels):
        raise ShapeError(f"Got {len(labels)} labels for {values.shape[0]} rows.")

    names = list(labels)
    rows = [values]
    for label, factor in (scaled or {}).items():
        if label in labels:
            names.append(f"{label}_scaled")
            rows.append(factor * values[labels.index(label)][np.newaxis, :])
    return names, np.vstack(rows)


def write_series_csv(
    path: Path,
    times: np.ndarray,
    values: np.ndarray,
    labels: Sequence[str],
    scaled: Optional[Mapping[str, float]] = None,
) -> Path:
    """Write ``t,<labels...>`` rows with full double precision."""

    names, rows = series_columns(list(labels), values, scaled)
    table = np.column_stack([np.asarray(times, dtype=float), rows.T])
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, table, delimiter=",", header=",".join(["t", *names]), comments="", fmt="%.17g")
    return path


def read_series_csv(path: Path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """
    Read a file written by ``write_series_csv``.

    Returns:
        tuple: ``(labels, times, values)`` with ``values`` shaped ``N x M``.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
    table = np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=1))
    if table.shape[1] != len(header) or header[0] != "t":
        raise ShapeError(f"{path} does not look like a t,<labels...> series file.")
    return header[1:], table[:, 0], table[:, 1:].T


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps_json(payload: Any) -> str:
    """Deterministic JSON: sorted keys, two-space indent, numpy values converted."""

    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default)


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(payload) + "\n", encoding="utf-8")
    return path


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "-"
    return str(value)


def format_table(rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> str:
    """
    Render rows as a left-aligned text table.

    Args:
        rows (Iterable[Mapping]): One mapping per row.
        columns (Sequence[str]): Column order; missing values print as ``-``.

    Returns:
        str: Header, separator and one line per row.
    """
    cells = [[_cell(row.get(column)) for column in columns] for row in rows]
    widths = [
        max([len(column)] + [len(line[index]) for line in cells])
        for index, column in enumerate(columns)
    ]

    def render(values: Sequence[str]) -> str:
        return "  ".join(value.ljust(width) for value, width in zip(values, widths)).rstrip()

    lines = [render(columns), render(["-" * width for width in widths])]
    lines.extend(render(line) for line in cells)
    return "\n".join(lines)


def write_table_csv(path: Path, rows: Iterable[Mapping[str, Any]], columns: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: row.get(column) for column in columns})
    return path
