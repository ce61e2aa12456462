"""Demand-equation estimators: pooled OLS, two-way fixed effects, and 2SLS.

All three regress the inverted mean utility on product characteristics and
price. Fixed effects are estimated as explicit dummies (LSDV) so unbalanced
panels are handled by row presence; 2SLS residuals always use the actual
endogenous regressors, never the first-stage fitted values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import (
    CollinearWithFixedEffectsError,
    InsufficientObservationsError,
    OrderConditionViolatedError,
    RankDeficientError,
)
from .matrix import as_matrix, as_vector, solve_least_squares

if TYPE_CHECKING:
    from .dataio import PanelDataset

INTERCEPT_NAME = "const"

_ESTIMATORS = ("ols", "two_way_fe", "tsls")
_COVARIANCES = ("classical", "robust_hc0")


@dataclass(frozen=True)
class ModelSpec:
    """Column roles and estimator options for one regression."""

    dependent: str
    exogenous_regressors: tuple = ()
    endogenous_regressors: tuple = ()
    instruments: tuple = ()
    include_intercept: bool = True
    estimator: str = "ols"
    covariance: str = "classical"

    def __post_init__(self):
        object.__setattr__(self, "exogenous_regressors", tuple(self.exogenous_regressors))
        object.__setattr__(self, "endogenous_regressors", tuple(self.endogenous_regressors))
        object.__setattr__(self, "instruments", tuple(self.instruments))
        if not self.dependent:
            raise ValueError("dependent column name is required")
        if self.estimator not in _ESTIMATORS:
            raise ValueError(f"estimator must be one of {_ESTIMATORS}")
        if self.covariance not in _COVARIANCES:
            raise ValueError(f"covariance must be one of {_COVARIANCES}")
        roles = (self.exogenous_regressors, self.endogenous_regressors, self.instruments)
        for group in roles:
            if len(set(group)) != len(group):
                raise ValueError("duplicate column within a role")
        flat = [c for group in roles for c in group]
        if len(set(flat)) != len(flat):
            raise ValueError("a column may appear in only one of exogenous/endogenous/instruments")
        if self.estimator == "tsls" and len(self.instruments) < len(self.endogenous_regressors):
            raise OrderConditionViolatedError(
                f"{len(self.instruments)} instruments cannot identify "
                f"{len(self.endogenous_regressors)} endogenous regressors"
            )
        if self.estimator == "two_way_fe" and self.include_intercept:
            raise ValueError("two-way fixed effects absorb the intercept; set include_intercept=False")

    @property
    def regressors(self):
        return (*self.exogenous_regressors, *self.endogenous_regressors)

    def required_columns(self):
        cols = (self.dependent, *self.regressors)
        if self.estimator == "tsls":
            cols = (*cols, *self.instruments)
        return cols


@dataclass(frozen=True)
class EstimateResult:
    """Coefficients, covariance and fit statistics from one estimation."""

    names: tuple
    coefficients: np.ndarray
    standard_errors: np.ndarray
    covariance_matrix: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    row_indices: np.ndarray
    n_observations: int
    df_residual: int
    r_squared: float
    adjusted_r_squared: float
    residual_std_error: float
    estimator_tag: str
    covariance_tag: str
    fixed_effect_values: dict | None = field(default=None)

    def coefficient(self, name) -> float:
        return float(self.coefficients[self.names.index(name)])

    def standard_error(self, name) -> float:
        return float(self.standard_errors[self.names.index(name)])

    def coefficient_rows(self):
        rows = []
        for name, est, se in zip(self.names, self.coefficients, self.standard_errors):
            t = est / se if se > 0 else float("nan")
            rows.append((name, float(est), float(se), float(t)))
        return rows


def robust_covariance(x, residuals, bread) -> np.ndarray:
    """HC0 sandwich (X'X)^-1 X' diag(u^2) X (X'X)^-1."""
    x = as_matrix(x, "X")
    u = as_vector(residuals, "residuals")
    bread = as_matrix(bread, "bread")
    if x.shape[0] != u.shape[0] or bread.shape != (x.shape[1], x.shape[1]):
        raise ValueError("dimension mismatch between design, residuals and bread")
    xu = x * u[:, None]
    meat = xu.T @ xu
    cov = bread @ meat @ bread
    return 0.5 * (cov + cov.T)


def _solve_named(x, y, names):
    try:
        return solve_least_squares(x, y)
    except RankDeficientError as exc:
        named = [names[c] for c in exc.columns]
        raise RankDeficientError(exc.columns, f"design is rank deficient in columns {named}") from None


def _select_rows(data: "PanelDataset", spec: ModelSpec):
    mask = data.complete_rows(spec.required_columns())
    return np.flatnonzero(mask)


def _stack(data, rows, column_names, intercept):
    cols, names = [], []
    if intercept:
        cols.append(np.ones(rows.shape[0]))
        names.append(INTERCEPT_NAME)
    for name in column_names:
        cols.append(data.column(name)[rows])
        names.append(name)
    x = np.column_stack(cols) if cols else np.empty((rows.shape[0], 0))
    return x, tuple(names)


def _fit_stats(y, residuals, n, p, centered):
    rss = float(residuals @ residuals)
    if centered:
        dev = y - y.mean()
        tss = float(dev @ dev)
        adj_den = n - 1
    else:
        tss = float(y @ y)
        adj_den = n
    r2 = 1.0 - rss / tss if tss > 0 else float("nan")
    adj = 1.0 - (1.0 - r2) * adj_den / (n - p) if tss > 0 else float("nan")
    rse = math.sqrt(rss / (n - p))
    return rss, r2, adj, rse


def _finish(spec, names, beta, cov, residuals, fitted, rows, n, p, y, centered,
            estimator_tag, fe_values=None):
    _, r2, adj, rse = _fit_stats(y, residuals, n, p, centered)
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return EstimateResult(
        names=names,
        coefficients=beta,
        standard_errors=se,
        covariance_matrix=cov,
        residuals=residuals,
        fitted=fitted,
        row_indices=rows,
        n_observations=n,
        df_residual=n - p,
        r_squared=r2,
        adjusted_r_squared=adj,
        residual_std_error=rse,
        estimator_tag=estimator_tag,
        covariance_tag=spec.covariance,
        fixed_effect_values=fe_values,
    )


def estimate_ols(spec: ModelSpec, data: "PanelDataset") -> EstimateResult:
    """Least-squares fit of the dependent on intercept, exogenous and endogenous columns.

    Endogenous regressors are treated as exogenous here; this is the
    (inconsistent under price endogeneity) baseline the other estimators are
    compared against.
    """
    if spec.estimator != "ols":
        raise ValueError(f"spec.estimator is {spec.estimator!r}, expected 'ols'")
    rows = _select_rows(data, spec)
    x, names = _stack(data, rows, spec.regressors, spec.include_intercept)
    y = data.column(spec.dependent)[rows]
    n, p = x.shape
    if n <= p:
        raise InsufficientObservationsError(f"{n} rows cannot support {p} coefficients")
    sol = _solve_named(x, y, names)
    if spec.covariance == "robust_hc0":
        cov = robust_covariance(x, sol.residuals, sol.xtx_inverse)
    else:
        sigma2 = float(sol.residuals @ sol.residuals) / (n - p)
        cov = sigma2 * sol.xtx_inverse
    return _finish(
        spec, names, sol.coefficients, cov, sol.residuals, sol.fitted, rows,
        n, p, y, spec.include_intercept, "ols",
    )


def _dummy_design(units, periods):
    unit_levels = sorted(set(units))
    period_levels = sorted(set(periods))
    n = len(units)
    cols, names = [], []
    for u in unit_levels:
        cols.append(np.array([1.0 if w == u else 0.0 for w in units]))
        names.append(f"unit[{u}]")
    for t in period_levels[1:]:
        cols.append(np.array([1.0 if s == t else 0.0 for s in periods]))
        names.append(f"period[{t}]")
    return np.column_stack(cols), names, unit_levels, period_levels


def estimate_two_way_fe(spec: ModelSpec, data: "PanelDataset") -> EstimateResult:
    """LSDV two-way fixed effects: slopes plus explicit unit and period dummies.

    Unit dummies carry the levels (no intercept column); the first period is
    the base category. The reported R-squared is the within R-squared, i.e.
    computed against the variation left after projecting out both dummy sets.
    """
    if spec.estimator != "two_way_fe":
        raise ValueError(f"spec.estimator is {spec.estimator!r}, expected 'two_way_fe'")
    rows = _select_rows(data, spec)
    units = [data.units[i] for i in rows]
    periods = [data.periods[i] for i in rows]
    if len(set(units)) < 2 or len(set(periods)) < 2:
        raise InsufficientObservationsError("two-way fixed effects need >= 2 units and >= 2 periods")

    slope_x, slope_names = _stack(data, rows, spec.regressors, intercept=False)
    dummies, dummy_names, unit_levels, period_levels = _dummy_design(units, periods)
    x = np.column_stack([slope_x, dummies]) if slope_x.size else dummies
    names = (*slope_names, *dummy_names)
    y = data.column(spec.dependent)[rows]
    n, p = x.shape
    if n <= p:
        raise InsufficientObservationsError(f"{n} rows cannot support {p} coefficients")

    try:
        sol = solve_least_squares(x, y)
    except RankDeficientError as exc:
        offending = [names[c] for c in exc.columns]
        slopes = [c for c in offending if c in slope_names]
        culprit = slopes[0] if slopes else offending[0]
        raise CollinearWithFixedEffectsError(
            culprit, f"columns {offending} are absorbed by the fixed-effect dummies"
        ) from None

    k = len(slope_names)
    if spec.covariance == "robust_hc0":
        cov_full = robust_covariance(x, sol.residuals, sol.xtx_inverse)
    else:
        sigma2 = float(sol.residuals @ sol.residuals) / (n - p)
        cov_full = sigma2 * sol.xtx_inverse
    cov = cov_full[:k, :k]

    # Within TSS: what the dummies alone leave unexplained in y.
    dummies_only = solve_least_squares(dummies, y)
    tss_within = float(dummies_only.residuals @ dummies_only.residuals)
    rss = float(sol.residuals @ sol.residuals)
    r2 = 1.0 - rss / tss_within if tss_within > 0 else float("nan")
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - p) if tss_within > 0 else float("nan")

    fe_unit = {u: float(sol.coefficients[k + j]) for j, u in enumerate(unit_levels)}
    fe_period = {period_levels[0]: 0.0}
    for j, t in enumerate(period_levels[1:]):
        fe_period[t] = float(sol.coefficients[k + len(unit_levels) + j])

    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return EstimateResult(
        names=slope_names,
        coefficients=sol.coefficients[:k].copy(),
        standard_errors=se,
        covariance_matrix=cov,
        residuals=sol.residuals,
        fitted=sol.fitted,
        row_indices=rows,
        n_observations=n,
        df_residual=n - p,
        r_squared=r2,
        adjusted_r_squared=adj,
        residual_std_error=math.sqrt(rss / (n - p)),
        estimator_tag="two_way_fe",
        covariance_tag=spec.covariance,
        fixed_effect_values={"unit": fe_unit, "period": fe_period},
    )


def estimate_tsls(spec: ModelSpec, data: "PanelDataset") -> EstimateResult:
    """Two-stage least squares with cost-shifter style instruments.

    Stage 1 regresses each endogenous column on the intercept, exogenous
    regressors and instruments; stage 2 replaces endogenous columns by their
    fitted values. Residuals are y - X b with the ACTUAL endogenous columns,
    and feed both the classical and the HC0 covariance (HC0 is the default,
    with the stage-2 design as the bread).
    """
    if spec.estimator != "tsls":
        raise ValueError(f"spec.estimator is {spec.estimator!r}, expected 'tsls'")
    if len(spec.instruments) < len(spec.endogenous_regressors):
        raise OrderConditionViolatedError(
            f"{len(spec.instruments)} instruments for {len(spec.endogenous_regressors)} endogenous"
        )
    rows = _select_rows(data, spec)
    y = data.column(spec.dependent)[rows]

    z1, z1_names = _stack(
        data, rows, (*spec.exogenous_regressors, *spec.instruments), spec.include_intercept
    )
    n, p1 = z1.shape
    if n <= p1:
        raise InsufficientObservationsError(f"{n} rows cannot support the {p1}-column first stage")

    fitted_endog = []
    for name in spec.endogenous_regressors:
        e = data.column(name)[rows]
        first = _solve_named(z1, e, z1_names)
        fitted_endog.append(first.fitted)

    x_exog, _ = _stack(data, rows, spec.exogenous_regressors, spec.include_intercept)
    names = (
        (INTERCEPT_NAME,) if spec.include_intercept else ()
    ) + spec.exogenous_regressors + spec.endogenous_regressors
    x_hat = np.column_stack([x_exog, *[f[:, None] for f in fitted_endog]]) if fitted_endog else x_exog
    x_actual, _ = _stack(data, rows, spec.regressors, spec.include_intercept)

    p = x_hat.shape[1]
    if n <= p:
        raise InsufficientObservationsError(f"{n} rows cannot support {p} coefficients")
    second = _solve_named(x_hat, y, names)
    beta = second.coefficients
    residuals = y - x_actual @ beta
    fitted = x_actual @ beta

    if spec.covariance == "robust_hc0":
        cov = robust_covariance(x_hat, residuals, second.xtx_inverse)
    else:
        sigma2 = float(residuals @ residuals) / (n - p)
        cov = sigma2 * second.xtx_inverse
    return _finish(
        spec, names, beta, cov, residuals, fitted, rows,
        n, p, y, spec.include_intercept, "tsls",
    )


def estimate(spec: ModelSpec, data: "PanelDataset") -> EstimateResult:
    """Dispatch on spec.estimator."""
    if spec.estimator == "ols":
        return estimate_ols(spec, data)
    if spec.estimator == "two_way_fe":
        return estimate_two_way_fe(spec, data)
    return estimate_tsls(spec, data)
