"""Panel CSV ingestion, validation, and model-spec configuration files.

The on-disk format is a UTF-8 CSV with a header row, comma delimiter and `.`
decimals. Every file needs a `unit` column (product identifier) and an integer
`period` column; all other columns are numeric. Empty cells are treated as
missing and excluded per estimation (listwise), never imputed.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import demand
from .errors import (
    DomainViolationError,
    DuplicateKeyError,
    MissingRequiredError,
    ParseError,
    UnknownColumnError,
    UnknownKeyError,
)

#: Columns validated as 0/1 dummies unless the caller overrides.
DEFAULT_DUMMY_COLUMNS = ("Alone", "Subscribe")

DEPENDENT_COLUMN = "log_share_diff"

_ESTIMATORS = ("ols", "two_way_fe", "tsls")
_COVARIANCES = ("classical", "robust_hc0")


@dataclass(frozen=True)
class PanelDataset:
    """Long-format panel: one row per (unit, period), numeric columns, NaN = missing."""

    units: tuple
    periods: tuple
    columns: dict
    column_kinds: dict
    source_lines: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(str(u) for u in self.units))
        object.__setattr__(self, "periods", tuple(int(t) for t in self.periods))
        cols = {}
        for name, values in self.columns.items():
            arr = np.asarray(values, dtype=float).reshape(-1)
            if arr.shape[0] != self.n_rows:
                raise ValueError(f"column {name!r} has {arr.shape[0]} rows, expected {self.n_rows}")
            arr = arr.copy()
            arr.flags.writeable = False
            cols[name] = arr
        object.__setattr__(self, "columns", cols)
        kinds = dict(self.column_kinds)
        for name in cols:
            kinds.setdefault(name, "continuous")
        object.__setattr__(self, "column_kinds", kinds)
        if len(self.units) != len(self.periods):
            raise ValueError("units and periods must align")
        _validate_dataset(self)

    @property
    def n_rows(self) -> int:
        return len(self.units)

    def has_column(self, name) -> bool:
        return name in self.columns

    def column(self, name) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"no column {name!r}")
        return self.columns[name]

    def row_key(self, i):
        return self.units[i], self.periods[i]

    def row_label(self, i) -> str:
        if self.source_lines is not None:
            return f"line {self.source_lines[i]}"
        return f"row {i} (unit {self.units[i]!r}, period {self.periods[i]})"

    def complete_rows(self, names) -> np.ndarray:
        """Mask of rows with no missing value in any of the named columns."""
        mask = np.ones(self.n_rows, dtype=bool)
        for name in names:
            mask &= ~np.isnan(self.column(name))
        return mask

    def with_column(self, name, values, kind="continuous") -> "PanelDataset":
        cols = dict(self.columns)
        cols[name] = np.asarray(values, dtype=float)
        kinds = dict(self.column_kinds)
        kinds[name] = kind
        return PanelDataset(self.units, self.periods, cols, kinds, self.source_lines)

    def subset(self, mask) -> "PanelDataset":
        mask = np.asarray(mask, dtype=bool)
        units = tuple(u for u, m in zip(self.units, mask) if m)
        periods = tuple(t for t, m in zip(self.periods, mask) if m)
        cols = {name: arr[mask] for name, arr in self.columns.items()}
        lines = None
        if self.source_lines is not None:
            lines = tuple(ln for ln, m in zip(self.source_lines, mask) if m)
        return PanelDataset(units, periods, cols, dict(self.column_kinds), lines)


def _validate_dataset(data: PanelDataset):
    seen = {}
    for i in range(data.n_rows):
        key = (data.units[i], data.periods[i])
        if key in seen:
            raise DuplicateKeyError(*key)
        seen[key] = i

    for name, kind in data.column_kinds.items():
        if kind != "dummy" or name not in data.columns:
            continue
        arr = data.columns[name]
        bad = ~np.isnan(arr) & (arr != 0.0) & (arr != 1.0)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DomainViolationError(name, data.row_label(i), f"dummy value {arr[i]:g} is not 0 or 1")

    for name in ("quantity", "market_size"):
        if name not in data.columns:
            continue
        arr = data.columns[name]
        bad = ~np.isnan(arr) & (arr <= 0.0)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise DomainViolationError(name, data.row_label(i), f"value {arr[i]:g} must be positive")

    if "quantity" in data.columns and "market_size" in data.columns:
        q = data.columns["quantity"]
        n = data.columns["market_size"]
        for t in sorted(set(data.periods)):
            idx = [i for i in range(data.n_rows) if data.periods[i] == t]
            sizes = {n[i] for i in idx if not np.isnan(n[i])}
            if len(sizes) > 1:
                raise DomainViolationError(
                    "market_size", data.row_label(idx[0]),
                    f"period {t} carries conflicting market sizes {sorted(sizes)}",
                )
            if not sizes:
                continue
            total = float(np.nansum([q[i] for i in idx]))
            size = sizes.pop()
            if total >= size:
                raise DomainViolationError(
                    "quantity", data.row_label(idx[0]),
                    f"period {t}: total quantity {total:g} >= market size {size:g}",
                )


def load_panel(path, unit_column="unit", period_column="period",
               dummy_columns=DEFAULT_DUMMY_COLUMNS) -> PanelDataset:
    """Load and validate a panel CSV; rows come back sorted by (unit, period)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "", "file is empty") from None
        header = [h.strip() for h in header]
        if unit_column not in header:
            raise ParseError(1, unit_column, "missing unit column")
        if period_column not in header:
            raise ParseError(1, period_column, "missing period column")
        u_pos = header.index(unit_column)
        t_pos = header.index(period_column)
        value_names = [h for k, h in enumerate(header) if k not in (u_pos, t_pos)]
        if len(set(header)) != len(header):
            dupe = next(h for h in header if header.count(h) > 1)
            raise ParseError(1, dupe, "duplicated column name")

        rows = []
        for line_no, record in enumerate(reader, start=2):
            if not record or all(cell.strip() == "" for cell in record):
                continue
            if len(record) != len(header):
                raise ParseError(line_no, "", f"expected {len(header)} fields, got {len(record)}")
            unit = record[u_pos].strip()
            if not unit:
                raise ParseError(line_no, unit_column, "empty unit identifier")
            try:
                period = int(record[t_pos].strip())
            except ValueError:
                raise ParseError(
                    line_no, period_column, f"period {record[t_pos]!r} is not an integer"
                ) from None
            values = []
            for k, h in enumerate(header):
                if k in (u_pos, t_pos):
                    continue
                cell = record[k].strip()
                if cell == "":
                    values.append(float("nan"))
                    continue
                try:
                    x = float(cell)
                except ValueError:
                    raise ParseError(line_no, h, f"cannot parse {cell!r} as a number") from None
                if x != x or x in (float("inf"), float("-inf")):
                    raise ParseError(line_no, h, f"non-finite value {cell!r}")
                values.append(x)
            rows.append((unit, period, line_no, values))

    rows.sort(key=lambda r: (r[0], r[1]))
    units = tuple(r[0] for r in rows)
    periods = tuple(r[1] for r in rows)
    lines = tuple(r[2] for r in rows)
    columns = {
        name: np.array([r[3][j] for r in rows], dtype=float)
        for j, name in enumerate(value_names)
    }
    kinds = {name: ("dummy" if name in dummy_columns else "continuous") for name in value_names}
    kinds[unit_column] = "identifier"
    kinds[period_column] = "identifier"
    return PanelDataset(units, periods, columns, kinds, lines)


def write_panel_csv(data: PanelDataset, path):
    """Serialize a dataset back to the CSV schema; values round-trip bitwise."""
    names = list(data.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["unit", "period", *names])
        for i in range(data.n_rows):
            cells = [data.units[i], str(data.periods[i])]
            for name in names:
                v = data.columns[name][i]
                cells.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(cells)


def _period_groups(data: PanelDataset):
    groups = {}
    for i in range(data.n_rows):
        groups.setdefault(data.periods[i], []).append(i)
    return groups


def compute_dependent(data: PanelDataset) -> PanelDataset:
    """Add the log-share-difference column from quantities or a share column."""
    if data.has_column(DEPENDENT_COLUMN):
        warnings.warn(f"column {DEPENDENT_COLUMN!r} already present; leaving it unchanged")
        return data

    from_quantities = data.has_column("quantity") and data.has_column("market_size")
    if not from_quantities and not data.has_column("share"):
        raise DomainViolationError(
            "quantity", "dataset",
            "need quantity and market_size columns (or a share column) to build the dependent",
        )

    out = np.full(data.n_rows, np.nan)
    for t, idx in sorted(_period_groups(data).items()):
        products = tuple(data.units[i] for i in idx)
        if from_quantities:
            q = np.array([data.column("quantity")[i] for i in idx])
            n = np.array([data.column("market_size")[i] for i in idx])
            missing = np.isnan(q) | np.isnan(n)
            if np.any(missing):
                i = idx[int(np.argmax(missing))]
                raise DomainViolationError(
                    "quantity", data.row_label(i),
                    f"period {t}: missing quantity or market size for unit {data.units[i]!r}",
                )
            market = demand.MarketPeriod(
                period=t, products=products, quantities=q, market_size=float(n[0])
            )
            table = demand.shares_from_quantities(market)
        else:
            s = np.array([data.column("share")[i] for i in idx])
            if np.any(np.isnan(s)):
                i = idx[int(np.argmax(np.isnan(s)))]
                raise DomainViolationError(
                    "share", data.row_label(i), f"period {t}: missing share"
                )
            outside = 1.0 - float(s.sum())
            if outside <= 0.0:
                raise DomainViolationError(
                    "share", data.row_label(idx[0]),
                    f"period {t}: inside shares sum to {s.sum():g}, outside share must be positive",
                )
            table = demand.ShareTable({t: demand.PeriodShares(products, s, outside)})
        utilities = demand.invert_shares(table)
        _, delta = utilities.periods[t]
        for i, d in zip(idx, delta):
            out[i] = d
    return data.with_column(DEPENDENT_COLUMN, out)


def outside_shares(data: PanelDataset) -> dict:
    """Per-period outside share implied by quantity and market_size."""
    result = {}
    for t, idx in sorted(_period_groups(data).items()):
        q = np.array([data.column("quantity")[i] for i in idx])
        n = np.array([data.column("market_size")[i] for i in idx])
        if np.any(np.isnan(q)) or np.any(np.isnan(n)):
            continue
        result[t] = 1.0 - float(q.sum() / n[0])
    return result


# --- model-spec files -------------------------------------------------------

_SPEC_KEYS = {
    "dataset", "dependent", "exogenous", "endogenous",
    "instruments", "estimator", "covariance", "intercept",
}


@dataclass(frozen=True)
class SpecFile:
    """Parsed estimation spec: which columns play which role, and how to fit."""

    dataset_path: Path
    dependent: str
    exogenous: tuple
    endogenous: tuple
    instruments: tuple
    estimator: str
    covariance: str
    include_intercept: bool
    source_path: Path | None = None

    def required_columns(self):
        return (self.dependent, *self.exogenous, *self.endogenous, *self.instruments)

    def to_model_spec(self):
        from .estimators import ModelSpec

        return ModelSpec(
            dependent=self.dependent,
            exogenous_regressors=self.exogenous,
            endogenous_regressors=self.endogenous,
            instruments=self.instruments,
            include_intercept=self.include_intercept,
            estimator=self.estimator,
            covariance=self.covariance,
        )


def _require_str_list(raw, key):
    if not isinstance(raw, list) or not all(isinstance(v, str) for v in raw):
        raise ValueError(f"spec field {key!r} must be a list of column names")
    return tuple(raw)


def parse_spec(path, dataset: PanelDataset | None = None) -> SpecFile:
    """Parse and validate a JSON model spec.

    When a dataset is supplied, every referenced column must exist in it; the
    dependent may alternatively be derivable (quantity/market_size or share
    columns present).
    """
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.lineno, "", f"invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ParseError(1, "", "spec must be a JSON object")

    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        raise UnknownKeyError(f"unknown spec keys: {sorted(unknown)}")
    for required in ("dataset", "dependent", "estimator"):
        if required not in raw:
            raise MissingRequiredError(required)

    estimator = raw["estimator"]
    if estimator not in _ESTIMATORS:
        raise ValueError(f"estimator must be one of {_ESTIMATORS}, got {estimator!r}")
    covariance = raw.get("covariance", "robust_hc0" if estimator == "tsls" else "classical")
    if covariance not in _COVARIANCES:
        raise ValueError(f"covariance must be one of {_COVARIANCES}, got {covariance!r}")
    intercept = raw.get("intercept", estimator != "two_way_fe")
    if not isinstance(intercept, bool):
        raise ValueError("spec field 'intercept' must be a boolean")

    spec = SpecFile(
        dataset_path=(path.parent / raw["dataset"]).resolve()
        if not Path(raw["dataset"]).is_absolute() else Path(raw["dataset"]),
        dependent=str(raw["dependent"]),
        exogenous=_require_str_list(raw.get("exogenous", []), "exogenous"),
        endogenous=_require_str_list(raw.get("endogenous", []), "endogenous"),
        instruments=_require_str_list(raw.get("instruments", []), "instruments"),
        estimator=estimator,
        covariance=covariance,
        include_intercept=intercept,
        source_path=path,
    )

    if dataset is not None:
        derivable = (
            dataset.has_column("quantity") and dataset.has_column("market_size")
        ) or dataset.has_column("share")
        for name in spec.required_columns():
            if dataset.has_column(name):
                continue
            if name == spec.dependent and name == DEPENDENT_COLUMN and derivable:
                continue
            raise UnknownColumnError(name)
    return spec


def write_results_csv(result, path):
    """One coefficient per row: name, estimate, std_error, t_value (full precision)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["name", "estimate", "std_error", "t_value"])
        for row in result.coefficient_rows():
            writer.writerow([row[0], *(format(v, ".17g") for v in row[1:])])
