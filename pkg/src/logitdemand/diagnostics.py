"""Instrument-validity diagnostics: first-stage F and the Sargan J test.

The first-stage F compares restricted and unrestricted first-stage sums of
squares, so the two residual degrees of freedom can be reported directly. The
J statistic is m times the overall F of the regression of the 2SLS residuals
on the instruments and exogenous regressors; the conventional n*R^2 variant
and the instrument-block-only F are carried along as cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import special

from .errors import (
    ExactlyIdentifiedError,
    InsufficientObservationsError,
    MultipleEndogenousError,
)
from .estimators import EstimateResult, ModelSpec, _solve_named, _stack

if TYPE_CHECKING:
    from .dataio import PanelDataset

#: Weak-instrument rule of thumb: first-stage F at or above this passes.
F_RULE_OF_THUMB = 10.0


@dataclass(frozen=True)
class FTestReport:
    """Joint F test that all instrument coefficients in the first stage are zero."""

    f_statistic: float
    df_numerator: int
    df_denominator: int
    p_value: float
    passes_rule_of_thumb: bool
    restricted_df: int
    unrestricted_df: int


@dataclass(frozen=True)
class JTestReport:
    """Over-identification test; J = m * F of the residual regression."""

    j_statistic: float
    m: int
    k: int
    df: int
    p_value: float
    reject_at_5pct: bool
    residual_regression_f: float
    instrument_block_f: float
    n_r_squared: float


def f_upper_tail(x: float, df1: int, df2: int) -> float:
    """P(F(df1, df2) > x) via the regularized incomplete beta function."""
    if x < 0:
        raise ValueError("F statistic must be non-negative")
    if df1 < 1 or df2 < 1:
        raise ValueError("degrees of freedom must be at least 1")
    return float(special.betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * x)))


def chi_square_upper_tail(x: float, df: int) -> float:
    """P(chi2(df) > x) via the regularized upper incomplete gamma function."""
    if x < 0:
        raise ValueError("chi-square statistic must be non-negative")
    if df < 1:
        raise ValueError("degrees of freedom must be at least 1")
    return float(special.gammaincc(df / 2.0, x / 2.0))


def _rss(x, y, names):
    sol = _solve_named(x, y, names)
    return float(sol.residuals @ sol.residuals), x.shape[1]


def first_stage_f(spec: ModelSpec, data: "PanelDataset") -> FTestReport:
    """Conditional F test for instrument relevance.

    Unrestricted: endogenous ~ intercept + exogenous + instruments.
    Restricted:   endogenous ~ intercept + exogenous.
    F = [(RSS_r - RSS_u) / m] / [RSS_u / df_u], evaluated on the same rows the
    2SLS estimation uses.
    """
    if len(spec.endogenous_regressors) != 1:
        raise MultipleEndogenousError(
            f"first-stage F supports exactly one endogenous regressor, "
            f"got {len(spec.endogenous_regressors)}"
        )
    if not spec.instruments:
        raise ValueError("spec has no instruments")

    mask = data.complete_rows(
        (spec.dependent, *spec.regressors, *spec.instruments)
    )
    rows = np.flatnonzero(mask)
    endog = data.column(spec.endogenous_regressors[0])[rows]

    xu, names_u = _stack(
        data, rows, (*spec.exogenous_regressors, *spec.instruments), spec.include_intercept
    )
    xr, names_r = _stack(data, rows, spec.exogenous_regressors, spec.include_intercept)
    n = rows.shape[0]
    m = len(spec.instruments)
    if n <= xu.shape[1]:
        raise InsufficientObservationsError(f"{n} rows cannot support the unrestricted first stage")

    rss_u, p_u = _rss(xu, endog, names_u)
    rss_r, p_r = _rss(xr, endog, names_r)
    df_u = n - p_u
    df_r = n - p_r
    f = ((rss_r - rss_u) / m) / (rss_u / df_u)
    f = max(f, 0.0)
    return FTestReport(
        f_statistic=f,
        df_numerator=m,
        df_denominator=df_u,
        p_value=f_upper_tail(f, m, df_u),
        passes_rule_of_thumb=f >= F_RULE_OF_THUMB,
        restricted_df=df_r,
        unrestricted_df=df_u,
    )


def sargan_j(tsls_result: EstimateResult, spec: ModelSpec, data: "PanelDataset") -> JTestReport:
    """Sargan over-identification test from the 2SLS residual regression.

    Regresses the 2SLS residuals on an intercept, the instruments and the
    exogenous regressors, takes that regression's overall F, and sets
    J = m * F with J ~ chi2(m - k) under instrument exogeneity. Requires
    m > k; the 5% decision uses the upper-tail chi-square critical value
    (equivalently, p_value < 0.05).
    """
    m = len(spec.instruments)
    k = len(spec.endogenous_regressors)
    if m <= k:
        raise ExactlyIdentifiedError(
            f"need more instruments than endogenous regressors, got m={m}, k={k}"
        )
    if tsls_result.estimator_tag != "tsls":
        raise ValueError("sargan_j needs a 2SLS result")

    rows = tsls_result.row_indices
    u = tsls_result.residuals
    n = rows.shape[0]

    x_full, names_full = _stack(
        data, rows, (*spec.instruments, *spec.exogenous_regressors), intercept=True
    )
    x_exog, names_exog = _stack(data, rows, spec.exogenous_regressors, intercept=True)
    if n <= x_full.shape[1]:
        raise InsufficientObservationsError(f"{n} rows cannot support the residual regression")

    rss_full, p_full = _rss(x_full, u, names_full)
    # Overall F: all non-constant regressors jointly zero.
    dev = u - u.mean()
    tss = float(dev @ dev)
    q = p_full - 1
    df2 = n - p_full
    r2 = 1.0 - rss_full / tss if tss > 0 else 0.0
    overall_f = (r2 / q) / ((1.0 - r2) / df2) if tss > 0 else 0.0
    overall_f = max(overall_f, 0.0)

    # Instrument-block F: the m instrument coefficients jointly zero.
    rss_exog, _ = _rss(x_exog, u, names_exog)
    block_f = max(((rss_exog - rss_full) / m) / (rss_full / df2), 0.0)

    j = m * overall_f
    df = m - k
    p_value = chi_square_upper_tail(j, df)
    return JTestReport(
        j_statistic=j,
        m=m,
        k=k,
        df=df,
        p_value=p_value,
        reject_at_5pct=p_value < 0.05,
        residual_regression_f=overall_f,
        instrument_block_f=block_f,
        n_r_squared=n * r2,
    )
