"""CSV ingestion for real datasets."""

from __future__ import annotations

import csv

import numpy as np

from .errors import EmptyFile, IoFailure, MissingColumn, NonNumericCell
from .signals import Dataset


def load_dataset_csv(path: str, target_column: str, standardize: bool = True) -> Dataset:
    """Read a headered numeric CSV into a Dataset.

    The named target column becomes y; every other column is a feature.
    Features are standardized to zero mean and unit variance by default
    (constant columns are left centered only).  The noise variance is
    unknown for real data, so ``noise_var`` stays unset.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            rows = [row for row in reader if row and any(cell.strip() for cell in row)]
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise EmptyFile(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    if target_column not in header:
        raise MissingColumn(f"column {target_column!r} not in header {header}")
    if len(rows) < 2:
        raise EmptyFile(f"{path} has a header but no data rows")
    target_idx = header.index(target_column)
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise NonNumericCell(i, header[min(len(row), len(header)) - 1], "<missing>")
        for j, cell in enumerate(row):
            try:
                data[i - 1, j] = float(cell)
            except ValueError:
                raise NonNumericCell(i, header[j], cell) from None
    y = data[:, target_idx]
    X = np.delete(data, target_idx, axis=1)
    if standardize and X.size:
        X = X - X.mean(axis=0)
        sd = X.std(axis=0, ddof=0)
        X = X / np.where(sd > 0, sd, 1.0)
    return Dataset(X=X, y=y)
