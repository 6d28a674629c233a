"""Deterministic JSON/CSV serialization and the dataset file schema.

All floating-point output is written at 17 significant digits, which
round-trips IEEE doubles exactly, so re-running a command with the same
resolved configuration reproduces its output files byte for byte.  JSON
objects are written with sorted keys; NaNs become null.

Dataset CSV schema (one row per observation, alternatives j = 0..J)::

    id,choice,x_e_0,z_0_1,...,z_0_dz[,v_true_0],x_e_1,...

``x_e_j`` is the raw endogenous regressor, ``z_j_*`` that alternative's
instrument columns, and ``v_true_j`` the true first-stage error (present for
synthetic data only).
"""

from __future__ import annotations

import math
import re

import numpy as np

from .datasets import ChoiceDataset

__all__ = [
    "fmt_float",
    "dumps_json",
    "write_csv",
    "dataset_to_csv",
    "parse_dataset_csv",
    "SchemaError",
]


class SchemaError(ValueError):
    """A configuration or data file violates the expected schema."""


def fmt_float(x):
    """Render a float at 17 significant digits (exact double round-trip)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return "%.17g" % x


def _json_value(obj, parts, indent, level):
    pad = " " * (indent * level)
    pad_in = " " * (indent * (level + 1))
    if obj is None:
        parts.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        parts.append("null" if math.isnan(x) or math.isinf(x) else fmt_float(x))
    elif isinstance(obj, str):
        parts.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, np.ndarray):
        _json_value(obj.tolist(), parts, indent, level)
    elif isinstance(obj, dict):
        if not obj:
            parts.append("{}")
            return
        parts.append("{\n")
        keys = sorted(obj, key=str)
        for i, k in enumerate(keys):
            parts.append(pad_in + '"' + str(k) + '": ')
            _json_value(obj[k], parts, indent, level + 1)
            parts.append(",\n" if i < len(keys) - 1 else "\n")
        parts.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            parts.append("[]")
            return
        parts.append("[\n")
        for i, v in enumerate(obj):
            parts.append(pad_in)
            _json_value(v, parts, indent, level + 1)
            parts.append(",\n" if i < len(obj) - 1 else "\n")
        parts.append(pad + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent=2):
    """Deterministic JSON text: sorted keys, 17-significant-digit floats."""
    parts = []
    _json_value(obj, parts, indent, 0)
    parts.append("\n")
    return "".join(parts)


def write_csv(path, header, rows):
    """Write rows of already-formatted strings with a header line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _cell(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return fmt_float(value)


def dataset_to_csv(path, dataset: ChoiceDataset):
    """Serialize a dataset in the documented schema."""
    n_alt = dataset.n_alternatives + 1
    d_z = dataset.instruments.shape[2]
    header = ["id", "choice"]
    for j in range(n_alt):
        header.append(f"x_e_{j}")
        header.extend(f"z_{j}_{k + 1}" for k in range(d_z))
        if dataset.v_true is not None:
            header.append(f"v_true_{j}")

    def rows():
        for i in range(dataset.n):
            row = [str(i), str(int(dataset.choices[i]))]
            for j in range(n_alt):
                row.append(fmt_float(dataset.x_endog[i, j]))
                row.extend(fmt_float(dataset.instruments[i, j, k]) for k in range(d_z))
                if dataset.v_true is not None:
                    row.append(fmt_float(dataset.v_true[i, j]))
            yield row

    write_csv(path, header, rows())


def parse_dataset_csv(path) -> ChoiceDataset:
    """Parse the dataset schema back; errors carry row/column diagnostics."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise SchemaError(f"{path}: empty file")
    header = lines[0].split(",")
    if header[:2] != ["id", "choice"]:
        raise SchemaError(f"{path}: header must start with id,choice")

    x_cols, z_cols, v_cols = {}, {}, {}
    for pos, name in enumerate(header[2:], start=2):
        m = re.fullmatch(r"x_e_(\d+)", name)
        if m:
            x_cols[int(m.group(1))] = pos
            continue
        m = re.fullmatch(r"z_(\d+)_(\d+)", name)
        if m:
            z_cols.setdefault(int(m.group(1)), {})[int(m.group(2))] = pos
            continue
        m = re.fullmatch(r"v_true_(\d+)", name)
        if m:
            v_cols[int(m.group(1))] = pos
            continue
        raise SchemaError(f"{path}: unrecognized column {name!r}")

    n_alt = len(x_cols)
    if sorted(x_cols) != list(range(n_alt)) or n_alt < 2:
        raise SchemaError(f"{path}: need x_e_0..x_e_J columns, found {sorted(x_cols)}")
    if sorted(z_cols) != list(range(n_alt)):
        raise SchemaError(f"{path}: need z_j_* columns for every alternative")
    d_z = len(z_cols[0])
    for j, cols in z_cols.items():
        if sorted(cols) != list(range(1, d_z + 1)):
            raise SchemaError(f"{path}: alternative {j} has inconsistent instrument columns")
    has_v = len(v_cols) == n_alt
    if v_cols and not has_v:
        raise SchemaError(f"{path}: v_true_* present for only some alternatives")

    n = len(lines) - 1
    choices = np.empty(n, dtype=int)
    x = np.empty((n, n_alt))
    z = np.empty((n, n_alt, d_z))
    v = np.empty((n, n_alt)) if has_v else None

    def parse(value, row, col, conv):
        try:
            return conv(value)
        except ValueError:
            raise SchemaError(
                f"{path}: row {row}, column {col!r}: invalid value {value!r}"
            ) from None

    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != len(header):
            raise SchemaError(f"{path}: row {i}: expected {len(header)} fields, got {len(cells)}")
        choices[i] = parse(cells[1], i, "choice", int)
        for j in range(n_alt):
            x[i, j] = parse(cells[x_cols[j]], i, f"x_e_{j}", float)
            for k in range(d_z):
                z[i, j, k] = parse(cells[z_cols[j][k + 1]], i, f"z_{j}_{k + 1}", float)
            if has_v:
                v[i, j] = parse(cells[v_cols[j]], i, f"v_true_{j}", float)
    try:
        return ChoiceDataset(choices, x, z, v_true=v)
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None
