"""Plain-text dataset and truth files.

Dataset file::

    m q p model
    y z_1 ... z_p X_11 X_12 ... X_mq      (one line per sample, X row-major)

Truth sidecar::

    m q p
    gamma_1 ... gamma_p
    C_11 C_12 ... C_mq

Numbers are written with 17 significant digits so doubles survive a round trip.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .linalg import Coefficients
from .models import Dataset, LossKind, LossModel

__all__ = ["DatasetFormatError", "write_dataset", "read_dataset", "write_truth", "read_truth",
           "format_values"]


class DatasetFormatError(ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


def format_values(values):
    return " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=float).ravel())


def write_dataset(path, data):
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "w") as fh:
        fh.write(f"{data.m} {data.q} {data.p} {data.model.kind.value}\n")
        rows = np.hstack([data.y[:, None], data.Z, data.Xflat])
        for row in rows:
            fh.write(format_values(row))
            fh.write("\n")
    tmp.replace(path)


def _parse_header(path, line, n_fields):
    parts = line.split()
    if len(parts) != n_fields:
        raise DatasetFormatError(path, 1, f"expected {n_fields} header fields, got {len(parts)}")
    try:
        dims = [int(v) for v in parts[:3]]
    except ValueError:
        raise DatasetFormatError(path, 1, "dimensions must be integers") from None
    if dims[0] < 1 or dims[1] < 1 or dims[2] < 0:
        raise DatasetFormatError(path, 1, f"invalid dimensions {dims}")
    return dims, parts[3:]


def _parse_row(path, lineno, line, width):
    parts = line.split()
    if len(parts) != width:
        raise DatasetFormatError(path, lineno, f"expected {width} fields, got {len(parts)}")
    try:
        row = np.array([float(v) for v in parts])
    except ValueError as exc:
        raise DatasetFormatError(path, lineno, str(exc)) from None
    if not np.all(np.isfinite(row)):
        raise DatasetFormatError(path, lineno, "non-finite value")
    return row


def read_dataset(path, alpha=None):
    """Parse a dataset file. ``alpha`` sets the Huber threshold for robust files."""
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(path, 1, "empty file")
    (m, q, p), rest = _parse_header(path, lines[0], 4)
    try:
        kind = LossKind(rest[0].lower())
    except ValueError:
        raise DatasetFormatError(path, 1, f"unknown model {rest[0]!r}") from None
    model = LossModel(kind) if alpha is None else LossModel(kind, float(alpha))
    width = 1 + p + m * q
    rows = [_parse_row(path, i, line, width)
            for i, line in enumerate(lines[1:], start=2) if line.strip()]
    if not rows:
        raise DatasetFormatError(path, 2, "no samples")
    arr = np.vstack(rows)
    y = arr[:, 0]
    if kind is LossKind.LOGISTIC:
        bad = np.flatnonzero((y != 0) & (y != 1))
        if bad.size:
            raise DatasetFormatError(path, int(bad[0]) + 2, "logistic response must be 0 or 1")
    return Dataset(arr[:, 1 + p:].reshape(-1, m, q), arr[:, 1:1 + p], y, model)


def write_truth(path, coeff):
    m, q = coeff.C.shape
    with open(path, "w") as fh:
        fh.write(f"{m} {q} {coeff.gamma.size}\n")
        fh.write(format_values(coeff.gamma) + "\n")
        fh.write(format_values(coeff.C) + "\n")


def read_truth(path):
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise DatasetFormatError(path, len(lines) + 1, "truth file needs 3 lines")
    (m, q, p), _ = _parse_header(path, lines[0], 3)
    gamma = _parse_row(path, 2, lines[1], p) if p else np.zeros(0)
    C = _parse_row(path, 3, lines[2], m * q).reshape(m, q)
    return Coefficients(C, gamma)
