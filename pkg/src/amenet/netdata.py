"""Network and covariate data model, file ingestion, and the design array.

File conventions: comma-separated with a header line, "NA" for missing,
UTF-8 node labels.  Adjacency files are square with labels in the header row
and first column.  Nodal covariate files are wide tables keyed by label;
dyadic covariate files are long tables with one row per ordered pair.
Covariates themselves may never be missing; only network outcomes may.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

MISSING = float("nan")

_COLLINEARITY_TOL = 1e-10


@dataclass(frozen=True)
class Network:
    """Directed relational matrix; rows send, columns receive, diagonal undefined."""

    labels: tuple
    cells: np.ndarray
    family: str  # "binary" or "gaussian"

    def __post_init__(self):
        check_network(self)

    @property
    def n(self) -> int:
        return len(self.labels)

    def observed_mask(self) -> np.ndarray:
        return np.isfinite(self.cells)

    def with_cells(self, cells: np.ndarray) -> "Network":
        return Network(self.labels, cells, self.family)


@dataclass(frozen=True)
class NodalCovariates:
    labels: tuple
    names: tuple
    values: np.ndarray  # n x p_n

    def __post_init__(self):
        if self.values.shape != (len(self.labels), len(self.names)):
            raise DataError("nodal covariate dimensions do not match labels/names")
        if not np.all(np.isfinite(self.values)):
            raise DataError("nodal covariates may not contain missing values")


@dataclass(frozen=True)
class DyadicCovariates:
    names: tuple
    values: np.ndarray  # n x n x p_d, diagonal slices missing

    def __post_init__(self):
        n = self.values.shape[0]
        if self.values.shape[:2] != (n, n) or self.values.shape[2] != len(self.names):
            raise DataError("dyadic covariate array must be n x n x p_d")
        off = ~np.eye(n, dtype=bool)
        if not np.all(np.isfinite(self.values[off])):
            raise DataError("dyadic covariates may not contain missing off-diagonal values")


@dataclass(frozen=True)
class DesignArray:
    """Stacked regression slabs: intercept, expanded nodal, then dyadic."""

    names: tuple
    slabs: np.ndarray  # n x n x (p+1)

    def __post_init__(self):
        if self.names[0] != "intercept":
            raise DataError("first design slab must be the intercept")
        if self.slabs.shape[2] != len(self.names):
            raise DataError("slab count does not match names")

    @property
    def n(self) -> int:
        return self.slabs.shape[0]

    @property
    def p(self) -> int:
        return self.slabs.shape[2]


def check_network(net: Network) -> None:
    """Validation helper enforcing the Network invariants."""
    cells = net.cells
    n = len(net.labels)
    if cells.shape != (n, n):
        raise DataError(f"adjacency must be {n}x{n}, got {cells.shape}")
    if n < 3:
        raise DataError("networks need at least 3 nodes (triadic statistics undefined below)")
    if len(set(net.labels)) != n:
        raise DataError("duplicate node labels")
    if net.family not in ("binary", "gaussian"):
        raise DataError(f"unknown family {net.family!r}")
    if np.any(np.isfinite(np.diag(cells))):
        raise DataError("diagonal cells must be missing")
    if net.family == "binary":
        obs = cells[np.isfinite(cells)]
        if obs.size and not np.all(np.isin(obs, (0.0, 1.0))):
            bad = obs[~np.isin(obs, (0.0, 1.0))][0]
            raise DataError(f"binary network contains cell value {bad!r}")


def check_design(net: Network, design: DesignArray) -> None:
    """Validation helper for pairing a network with a design array."""
    if design.slabs.shape[:2] != net.cells.shape:
        raise DataError(
            f"design array is {design.slabs.shape[:2]}, network is {net.cells.shape}"
        )


def _parse_cell(text: str, where: str) -> float:
    text = text.strip()
    if text == "NA" or text == "":
        return MISSING
    try:
        return float(text)
    except ValueError:
        raise DataError(f"non-numeric cell {text!r} at {where}") from None


def read_adjacency(path, family: str) -> Network:
    """Read a square labelled adjacency CSV; the diagonal is forced missing."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [c.strip() for c in rows[0][1:]]
    n = len(header)
    if len(rows) - 1 != n:
        raise DataError(f"{path}: non-square matrix ({len(rows) - 1} rows, {n} columns)")
    labels = []
    cells = np.empty((n, n))
    for i, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise DataError(f"{path}: row {i + 2} has {len(row)} fields, expected {n + 1}")
        labels.append(row[0].strip())
        for j, text in enumerate(row[1:]):
            cells[i, j] = _parse_cell(text, f"row {labels[i]}, column {header[j]}")
    if labels != header:
        raise DataError(f"{path}: row labels do not match column labels")
    np.fill_diagonal(cells, MISSING)
    return Network(tuple(labels), cells, family)


def write_adjacency(net: Network, path) -> None:
    """Write a Network in the same CSV format read_adjacency accepts."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["", *net.labels])
        for i, lab in enumerate(net.labels):
            row = [lab]
            for v in net.cells[i]:
                row.append("NA" if not np.isfinite(v) else _format_num(v))
            w.writerow(row)


def _format_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def read_nodal_covariates(path, labels) -> NodalCovariates:
    """Read a wide per-node covariate table and align rows to ``labels``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    names = tuple(c.strip() for c in rows[0][1:])
    table = {}
    for i, row in enumerate(rows[1:]):
        lab = row[0].strip()
        if lab in table:
            raise DataError(f"{path}: duplicate node row {lab!r}")
        table[lab] = [
            _parse_nonmissing(cell, f"node {lab}, column {names[j]}")
            for j, cell in enumerate(row[1:])
        ]
    values = np.empty((len(labels), len(names)))
    for i, lab in enumerate(labels):
        if lab not in table:
            raise DataError(f"{path}: node {lab!r} present in network but absent in file")
        values[i] = table[lab]
    _warn_if_collinear(values, names)
    return NodalCovariates(tuple(labels), names, values)


def _parse_nonmissing(text: str, where: str) -> float:
    v = _parse_cell(text, where)
    if not np.isfinite(v):
        raise DataError(f"covariates may not be missing ({where})")
    return v


def _warn_if_collinear(values: np.ndarray, names) -> None:
    # Gram determinant of [1, X] after column scaling; near-zero means some
    # covariate is (nearly) a linear combination of the others + intercept.
    m = np.column_stack([np.ones(values.shape[0]), values])
    norms = np.sqrt((m * m).sum(axis=0))
    norms[norms == 0] = 1.0
    g = (m / norms).T @ (m / norms)
    if np.linalg.det(g) < _COLLINEARITY_TOL:
        warnings.warn(
            f"covariates {list(names)} are collinear with the intercept; "
            "estimates for them will not be identified",
            stacklevel=3,
        )


def read_dyadic_covariates(path, labels) -> DyadicCovariates:
    """Read a long sender,receiver,var... table covering all ordered pairs."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 3:
        raise DataError(f"{path}: expected sender,receiver,var... columns")
    names = tuple(header[2:])
    n = len(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    values = np.full((n, n, len(names)), MISSING)
    seen = np.zeros((n, n), dtype=bool)
    for r, row in enumerate(rows[1:]):
        s, t = row[0].strip(), row[1].strip()
        if s not in index or t not in index:
            raise DataError(f"{path}: row {r + 2} references unknown node ({s!r}, {t!r})")
        i, j = index[s], index[t]
        if i == j:
            raise DataError(f"{path}: self-pair row for node {s!r}")
        if seen[i, j]:
            raise DataError(f"{path}: duplicate pair ({s!r}, {t!r})")
        seen[i, j] = True
        for k, cell in enumerate(row[2:]):
            values[i, j, k] = _parse_nonmissing(cell, f"pair ({s}, {t}), column {names[k]}")
    missing = np.argwhere(~seen & ~np.eye(n, dtype=bool))
    if missing.size:
        i, j = missing[0]
        raise DataError(f"{path}: pair ({labels[i]!r}, {labels[j]!r}) is missing")
    return DyadicCovariates(names, values)


def build_design_array(
    nodal: NodalCovariates | None = None,
    roles: dict | None = None,
    dyadic: DyadicCovariates | None = None,
    n: int | None = None,
) -> DesignArray:
    """Stack intercept, role-expanded nodal, and dyadic covariates into slabs.

    ``roles`` maps each nodal variable name to "sender", "receiver", or
    "both"; a sender variable s fills slab[i, j] = s[i], a receiver variable
    r fills slab[i, j] = r[j], and "both" contributes one slab of each.
    """
    if nodal is not None:
        n = len(nodal.labels)
    elif dyadic is not None:
        n = dyadic.values.shape[0]
    elif n is None:
        raise DataError("need nodal, dyadic, or an explicit node count")

    off = ~np.eye(n, dtype=bool)
    names = ["intercept"]
    slabs = [np.where(off, 1.0, MISSING)]

    if nodal is not None:
        roles = roles or {}
        unknown = set(roles) - set(nodal.names)
        if unknown:
            raise DataError(f"roles given for unknown covariates: {sorted(unknown)}")
        for k, name in enumerate(nodal.names):
            role = roles.get(name, "both")
            if role not in ("sender", "receiver", "both"):
                raise DataError(f"unknown role {role!r} for covariate {name!r}")
            col = nodal.values[:, k]
            if role in ("sender", "both"):
                names.append(f"{name}.sender")
                slabs.append(np.where(off, col[:, None] * np.ones((1, n)), MISSING))
            if role in ("receiver", "both"):
                names.append(f"{name}.receiver")
                slabs.append(np.where(off, np.ones((n, 1)) * col[None, :], MISSING))

    if dyadic is not None:
        if dyadic.values.shape[0] != n:
            raise DataError("dyadic covariate dimensions do not match nodal labels")
        for k, name in enumerate(dyadic.names):
            names.append(name)
            slabs.append(np.where(off, dyadic.values[:, :, k], MISSING))

    if len(set(names)) != len(names):
        dupes = sorted({x for x in names if names.count(x) > 1})
        raise DataError(f"design slab name collision after expansion: {dupes}")
    return DesignArray(tuple(names), np.stack(slabs, axis=2))


def intercept_design(n: int) -> DesignArray:
    return build_design_array(n=n)
