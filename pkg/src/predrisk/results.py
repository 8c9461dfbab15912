"""Result tables and their on-disk round trip (CSV plus JSON sidecar).

Cells are written at full precision (``repr`` of the float), so a table
read back compares equal field-for-field; significant-digit rounding is a
presentation concern left to consumers.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import scipy


@dataclass(frozen=True)
class ResultCell:
    predictor: str
    n: int
    status: str                      # "ok" or "undefined"
    mean: float | None = None
    std_err: float | None = None
    n_samples: int | None = None
    n_undefined: int | None = None


@dataclass(frozen=True)
class ResultTable:
    cells: tuple
    metadata: dict


_COLUMNS = ("predictor", "n", "status", "mean", "std_err", "n_samples", "n_undefined")


def library_versions() -> dict:
    from . import __version__

    return {
        "predrisk": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
    }


def write_table(table: ResultTable, csv_path, meta_path=None) -> None:
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for cell in table.cells:
            writer.writerow([
                cell.predictor,
                cell.n,
                cell.status,
                "" if cell.mean is None else repr(float(cell.mean)),
                "" if cell.std_err is None else repr(float(cell.std_err)),
                "" if cell.n_samples is None else cell.n_samples,
                "" if cell.n_undefined is None else cell.n_undefined,
            ])
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(table.metadata, indent=2, sort_keys=True) + "\n")


def read_table(csv_path, meta_path=None) -> ResultTable:
    csv_path = Path(csv_path)
    cells = []
    with csv_path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != _COLUMNS:
            raise ValueError(f"{csv_path}: unexpected header {reader.fieldnames}")
        for row in reader:
            cells.append(ResultCell(
                predictor=row["predictor"],
                n=int(row["n"]),
                status=row["status"],
                mean=float(row["mean"]) if row["mean"] else None,
                std_err=float(row["std_err"]) if row["std_err"] else None,
                n_samples=int(row["n_samples"]) if row["n_samples"] else None,
                n_undefined=int(row["n_undefined"]) if row["n_undefined"] else None,
            ))
    meta_path = Path(meta_path) if meta_path else csv_path.with_suffix(".meta.json")
    metadata = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return ResultTable(cells=tuple(cells), metadata=metadata)


def cells_from_estimates(estimates: dict) -> tuple:
    """Build ordered cells from an ``estimate_risk_table`` result dict."""
    cells = []
    for (predictor, n), est in estimates.items():
        if est is None:
            cells.append(ResultCell(predictor=predictor, n=n, status="undefined"))
        else:
            cells.append(ResultCell(
                predictor=predictor, n=n, status="ok",
                mean=est.mean, std_err=est.std_err,
                n_samples=est.n_samples, n_undefined=est.n_undefined))
    return tuple(cells)


def cell_dicts(table: ResultTable):
    return [asdict(c) for c in table.cells]
