"""Dataset files: CSV tables plus a JSON metadata sidecar.

CSV schema: header row, column `y`, columns `x1..xp`, optional integer
column `group` (present when the grouping is label-based).  UTF-8, comma
separated, '.' decimal, floats at 17 significant digits so binary64 values
survive a round trip exactly.

Metadata JSON carries everything the CSV cannot: the grouping, generator
identification, ground-truth coefficients, the population covariance, and
the noiseless common signal where one exists.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .groups import RNG_ALGORITHM, STRATEGY_KNOWN, Grouping
from .simulate import PER_GROUP, PER_SAMPLE, SimOutput

FLOAT_DIGITS = 17


def format_float(x: float) -> str:
    return f"{float(x):.{FLOAT_DIGITS}g}"


def dataset_paths(prefix: str | Path) -> tuple[Path, Path]:
    """(csv_path, metadata_path) for an output prefix."""
    base = str(prefix)
    if base.endswith(".csv"):
        base = base[: -len(".csv")]
    return Path(base + ".csv"), Path(base + ".meta.json")


def _group_labels(grouping: Grouping) -> np.ndarray | None:
    """Per-sample labels when the grouping is a label partition, else None."""
    if grouping.strategy != STRATEGY_KNOWN:
        return None
    labels = np.empty(grouping.n, dtype=np.int64)
    for g, idx in enumerate(grouping.groups):
        labels[idx] = g
    return labels


def save_dataset(out: SimOutput, prefix: str | Path) -> tuple[Path, Path]:
    """Write `<prefix>.csv` and `<prefix>.meta.json`; returns both paths."""
    csv_path, meta_path = dataset_paths(prefix)
    labels = _group_labels(out.grouping)
    header = ["y"] + [f"x{j + 1}" for j in range(out.p)]
    if labels is not None:
        header.append("group")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(out.n):
            row = [format_float(out.Y[i])] + [format_float(v) for v in out.X[i]]
            if labels is not None:
                row.append(str(int(labels[i])))
            writer.writerow(row)
    meta = {
        "n": int(out.n),
        "p": int(out.p),
        "seed": int(out.config.get("seed", 0)),
        "scenario": out.config.get("scenario"),
        "config": out.config,
        "rng": RNG_ALGORITHM,
        "grouping": out.grouping.to_json_dict(),
        "true_B": {
            "per": out.true_b_per,
            "values": [[float(v) for v in row] for row in np.atleast_2d(out.true_B)],
        },
        "sigma": [[float(v) for v in row] for row in out.sigma_true],
        "common_signal": (
            None if out.common_signal is None
            else [float(v) for v in out.common_signal]
        ),
    }
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return csv_path, meta_path


def load_table(path: str | Path) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Read a dataset CSV; returns (X, Y, labels-or-None).

    Raises InputError with a line number for any schema or parse problem.
    """
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot open {path}: {e}") from e
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: line 1: empty file") from None
        header = [h.strip() for h in header]
        has_group = header[-1] == "group" if header else False
        x_cols = header[1 : len(header) - 1 if has_group else len(header)]
        expected = [f"x{j + 1}" for j in range(len(x_cols))]
        if not header or header[0] != "y" or x_cols != expected or len(x_cols) == 0:
            raise InputError(
                f"{path}: line 1: header must be y,x1..xp[,group]; got "
                f"{','.join(header)}"
            )
        p = len(x_cols)
        ys: list[float] = []
        xs: list[list[float]] = []
        labels: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(
                    f"{path}: line {lineno}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            try:
                ys.append(float(row[0]))
                xs.append([float(v) for v in row[1 : p + 1]])
                if has_group:
                    labels.append(int(row[p + 1]))
            except ValueError as e:
                raise InputError(f"{path}: line {lineno}: {e}") from e
        if not ys:
            raise InputError(f"{path}: no data rows")
    X = np.asarray(xs, dtype=float)
    Y = np.asarray(ys, dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise InputError(f"{path}: non-finite values in the data")
    return X, Y, (np.asarray(labels, dtype=np.int64) if has_group else None)


def load_metadata(path: str | Path) -> dict:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise InputError(f"cannot open {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON: {e}") from e


def load_dataset(prefix_or_csv: str | Path, meta_path: str | Path | None = None):
    """Read CSV + metadata back into a SimOutput.

    `prefix_or_csv` may be the prefix used by save_dataset or the CSV path
    itself; the metadata path defaults to the matching `.meta.json`.
    """
    csv_path, default_meta = dataset_paths(prefix_or_csv)
    meta_path = Path(meta_path) if meta_path is not None else default_meta
    X, Y, _labels = load_table(csv_path)
    meta = load_metadata(meta_path)
    for key in ("grouping", "sigma", "true_B"):
        if key not in meta:
            raise InputError(f"{meta_path}: missing {key!r}")
    grouping = Grouping.from_json_dict(meta["grouping"])
    if grouping.n != X.shape[0]:
        raise InputError(
            f"{meta_path}: grouping covers {grouping.n} samples, CSV has "
            f"{X.shape[0]} rows"
        )
    true_b = meta["true_B"]
    per = true_b.get("per")
    if per not in (PER_SAMPLE, PER_GROUP):
        raise InputError(f"{meta_path}: true_B.per must be sample or group")
    common = meta.get("common_signal")
    return SimOutput(
        X=X,
        Y=Y,
        grouping=grouping,
        true_B=np.asarray(true_b["values"], dtype=float),
        true_b_per=per,
        sigma_true=np.asarray(meta["sigma"], dtype=float),
        common_signal=None if common is None else np.asarray(common, dtype=float),
        config=meta.get("config", {}),
    )


def load_matrix(path: str | Path, expected_cols: int | None = None) -> np.ndarray:
    """Read a headerless numeric CSV matrix (support points, covariance)."""
    path = Path(path)
    rows: list[list[float]] = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot open {path}: {e}") from e
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as e:
                raise InputError(f"{path}: line {lineno}: {e}") from e
            if len(rows[-1]) != len(rows[0]):
                raise InputError(f"{path}: line {lineno}: ragged row")
    if not rows:
        raise InputError(f"{path}: empty matrix")
    M = np.asarray(rows, dtype=float)
    if expected_cols is not None and M.shape[1] != expected_cols:
        raise InputError(
            f"{path}: expected {expected_cols} columns, got {M.shape[1]}"
        )
    return M


def add_intercept_column(X: np.ndarray) -> np.ndarray:
    """Append a constant-one column (interceptless estimators then fit one)."""
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((X.shape[0], 1))])


def scale_columns(X: np.ndarray) -> np.ndarray:
    """Divide each column by its sample standard deviation.

    No centering, so the interceptless model is preserved; constant columns
    are left untouched.
    """
    X = np.asarray(X, dtype=float).copy()
    sd = X.std(axis=0, ddof=1) if X.shape[0] > 1 else np.ones(X.shape[1])
    keep = sd > 0
    X[:, keep] /= sd[keep]
    return X
