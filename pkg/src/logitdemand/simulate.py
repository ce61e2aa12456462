"""Synthetic logit markets with endogenous prices, and a Monte Carlo harness.

The data-generating process mirrors the estimation model: mean utility is
x'beta - alpha * price + xi, with xi = unit effect + period effect + noise.
Price loads on cost shifters (the instruments) and, through the endogeneity
weight, on xi itself, so OLS is inconsistent while 2SLS is not. Everything is
driven by a single seed; per-replication substreams are seed + replication.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import dataio, demand, diagnostics, estimators
from .errors import DegenerateSharesError, ExactlyIdentifiedError, LogitDemandError

_MIN_SHARE = 1e-12
_MAX_REDRAWS = 100
_CHOICE_BLOCK = 200_000


@dataclass(frozen=True)
class DgpParams:
    """Knobs of the synthetic market generator.

    `alpha` enters utility as -alpha * price. With `consumers` unset the
    generator emits exact logit shares (market_size 1.0); with it set,
    quantities are sampled for that many consumers per period.
    """

    n_products: int
    n_periods: int
    n_characteristics: int = 1
    beta: tuple = (1.0,)
    alpha: float = 1.0
    xi_scale: float = 0.0
    unit_effects: tuple | None = None
    time_effects: tuple | None = None
    price_endogeneity: float = 0.0
    instrument_strength: float = 1.0
    n_instruments: int = 2
    consumers: int | None = None
    seed: int = 0
    characteristic_loc: float = 0.0
    characteristic_scale: float = 1.0
    cost_loc: float = 0.0
    cost_scale: float = 1.0
    price_intercept: float = 0.0
    price_noise_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if self.n_products < 1 or self.n_periods < 1:
            raise ValueError("need at least one product and one period")
        if self.n_characteristics < 0 or len(self.beta) != self.n_characteristics:
            raise ValueError("beta must have one entry per characteristic")
        if self.n_instruments < 1:
            raise ValueError("need at least one cost shifter")
        for name in ("xi_scale", "instrument_strength", "characteristic_scale",
                     "cost_scale", "price_noise_scale"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative (it enters utility as -alpha * price)")
        if self.consumers is not None and self.consumers < 1:
            raise ValueError("consumers must be at least 1 when set")
        for name, length in (("unit_effects", self.n_products), ("time_effects", self.n_periods)):
            eff = getattr(self, name)
            if eff is not None:
                eff = tuple(float(v) for v in eff)
                object.__setattr__(self, name, eff)
                if len(eff) != length:
                    raise ValueError(f"{name} must have length {length}")

    def characteristic_names(self):
        return tuple(f"x{i + 1}" for i in range(self.n_characteristics))

    def instrument_names(self):
        return tuple(f"cost{i + 1}" for i in range(self.n_instruments))

    def true_coefficients(self):
        """True values of the estimating equation's coefficients.

        The intercept's truth is zero: xi is zero-mean noise (plus any fixed
        effects, which bias the intercept but not the slopes), and the price
        intercept acts through the price coefficient.
        """
        truths = {estimators.INTERCEPT_NAME: 0.0}
        for name, b in zip(self.characteristic_names(), self.beta):
            truths[name] = b
        truths["price"] = -self.alpha
        return truths


@dataclass(frozen=True)
class TrueMarket:
    """Ground truth behind a generated dataset, aligned to its rows."""

    params: DgpParams
    delta: np.ndarray
    xi: np.ndarray
    inside_shares: np.ndarray
    outside_shares: dict

    def true_coefficients(self):
        return self.params.true_coefficients()


@dataclass(frozen=True)
class McSummary:
    """Aggregated Monte Carlo results; deterministic for a fixed (params, R)."""

    replications: int
    completed: int
    failed: int
    coefficient_names: tuple
    true_values: dict
    mean_bias: dict
    mean_bias_se: dict
    rmse: dict
    ci_coverage_95: dict
    mean_first_stage_f: float
    sargan_rejection_rate: float


def _gumbel(rng, shape):
    # Inverse-CDF Gumbel draws: exact, portable, reproducible.
    u = np.maximum(rng.random(shape), 1e-300)
    return -np.log(-np.log(u))


def sample_choices(delta, consumers, rng=None):
    """Simulate discrete choices for `consumers` individuals.

    Each consumer picks the option maximizing delta_j + Gumbel noise, with the
    outside option's utility fixed at zero. Returns (inside_counts,
    outside_count); frequencies converge to the closed-form logit shares.
    """
    d = np.asarray(delta, dtype=float).reshape(-1)
    if not np.all(np.isfinite(d)):
        raise ValueError("mean utilities must be finite")
    if consumers < 1:
        raise ValueError("need at least one consumer")
    if rng is None:
        rng = np.random.default_rng()

    base = np.concatenate([[0.0], d])
    counts = np.zeros(base.shape[0], dtype=np.int64)
    remaining = int(consumers)
    while remaining > 0:
        block = min(remaining, _CHOICE_BLOCK)
        noise = _gumbel(rng, (block, base.shape[0]))
        picks = np.argmax(base[None, :] + noise, axis=1)
        counts += np.bincount(picks, minlength=base.shape[0])
        remaining -= block
    return counts[1:].copy(), int(counts[0])


def generate_market(params: DgpParams):
    """Draw one synthetic panel; returns (PanelDataset, TrueMarket).

    Output is identical for identical seeds. Draws whose inside or outside
    share falls below 1e-12 (or whose sampled quantities hit zero) are
    re-drawn up to a bounded retry count.
    """
    rng = np.random.default_rng(params.seed)
    j, t, k = params.n_products, params.n_periods, params.n_characteristics
    n = j * t
    width = max(2, len(str(j)))
    units = [f"P{i + 1:0{width}d}" for i in range(j)]
    unit_eff = np.array(params.unit_effects) if params.unit_effects else np.zeros(j)
    time_eff = np.array(params.time_effects) if params.time_effects else np.zeros(t)

    for _ in range(_MAX_REDRAWS):
        x = rng.normal(params.characteristic_loc, params.characteristic_scale, (n, k)) \
            if k else np.zeros((n, 0))
        costs = rng.normal(params.cost_loc, params.cost_scale, (n, params.n_instruments))
        dxi = rng.normal(0.0, params.xi_scale, n) if params.xi_scale > 0 else np.zeros(n)
        noise = rng.normal(0.0, params.price_noise_scale, n) \
            if params.price_noise_scale > 0 else np.zeros(n)

        # Row order: unit-major, periods inside, matching the loader's sort.
        unit_idx = np.repeat(np.arange(j), t)
        time_idx = np.tile(np.arange(t), j)
        xi = unit_eff[unit_idx] + time_eff[time_idx] + dxi
        price = (
            params.price_intercept
            + params.instrument_strength * costs.sum(axis=1)
            + params.price_endogeneity * xi
            + noise
        )
        delta = (x @ np.array(params.beta) if k else np.zeros(n)) - params.alpha * price + xi

        inside = np.empty(n)
        outside = {}
        quantity = np.empty(n)
        market_size = np.empty(n)
        ok = True
        for ti in range(t):
            rows = np.flatnonzero(time_idx == ti)
            products = tuple(units[unit_idx[i]] for i in rows)
            table = demand.predict_shares(
                demand.MeanUtilityTable({ti: (products, delta[rows])}), ti
            )
            block = table.periods[ti]
            if block.outside < _MIN_SHARE or float(np.min(block.inside)) < _MIN_SHARE:
                ok = False
                break
            inside[rows] = block.inside
            outside[2001 + ti] = block.outside
            if params.consumers is None:
                quantity[rows] = block.inside
                market_size[rows] = 1.0
            else:
                probs = np.concatenate([block.inside, [block.outside]])
                counts = rng.multinomial(params.consumers, probs / probs.sum())
                if np.any(counts[:-1] == 0) or counts[-1] == 0:
                    ok = False
                    break
                quantity[rows] = counts[:-1]
                market_size[rows] = params.consumers
        if not ok:
            continue

        columns = {name: x[:, i] for i, name in enumerate(params.characteristic_names())}
        columns["price"] = price
        for i, name in enumerate(params.instrument_names()):
            columns[name] = costs[:, i]
        columns["quantity"] = quantity
        columns["market_size"] = market_size
        data = dataio.PanelDataset(
            units=tuple(units[i] for i in unit_idx),
            periods=tuple(2001 + ti for ti in time_idx),
            columns=columns,
            column_kinds={},
        )
        truth = TrueMarket(
            params=params, delta=delta, xi=xi, inside_shares=inside, outside_shares=outside
        )
        return data, truth

    raise DegenerateSharesError(
        f"no draw produced shares above {_MIN_SHARE:g} within {_MAX_REDRAWS} attempts"
    )


def default_model_spec(params: DgpParams, estimator="tsls", covariance=None) -> estimators.ModelSpec:
    """The estimating equation implied by the generator's column names."""
    if covariance is None:
        covariance = "robust_hc0" if estimator == "tsls" else "classical"
    return estimators.ModelSpec(
        dependent=dataio.DEPENDENT_COLUMN,
        exogenous_regressors=params.characteristic_names(),
        endogenous_regressors=("price",),
        instruments=params.instrument_names() if estimator == "tsls" else (),
        include_intercept=estimator != "two_way_fe",
        estimator=estimator,
        covariance=covariance,
    )


def run_monte_carlo(params: DgpParams, spec: estimators.ModelSpec | None = None,
                    replications: int = 100) -> McSummary:
    """Generate, estimate and test `replications` markets; aggregate the results.

    Per-replication estimator failures are counted, not fatal. Coverage uses
    the +-1.96 * SE interval per coefficient.
    """
    if replications < 1:
        raise ValueError("need at least one replication")
    if spec is None:
        spec = default_model_spec(params)

    estimates = []
    ses = []
    f_stats = []
    sargan_rejects = []
    failed = 0
    names = None
    for r in range(replications):
        rep_params = dataclasses.replace(params, seed=params.seed + r)
        try:
            data, _ = generate_market(rep_params)
            data = dataio.compute_dependent(data)
            result = estimators.estimate(spec, data)
            if spec.instruments and len(spec.endogenous_regressors) == 1:
                f_stats.append(diagnostics.first_stage_f(spec, data).f_statistic)
                if result.estimator_tag == "tsls":
                    try:
                        j_report = diagnostics.sargan_j(result, spec, data)
                        sargan_rejects.append(j_report.reject_at_5pct)
                    except ExactlyIdentifiedError:
                        pass
        except LogitDemandError:
            failed += 1
            continue
        names = result.names
        estimates.append(result.coefficients)
        ses.append(result.standard_errors)

    completed = len(estimates)
    if completed == 0:
        raise DegenerateSharesError("every replication failed; nothing to summarize")

    est = np.vstack(estimates)
    se = np.vstack(ses)
    truths = params.true_coefficients()
    true_values = {name: truths.get(name, float("nan")) for name in names}
    truth_vec = np.array([true_values[name] for name in names])

    bias = est.mean(axis=0) - truth_vec
    spread = est.std(axis=0, ddof=1) if completed > 1 else np.zeros(len(names))
    rmse = np.sqrt(np.mean((est - truth_vec) ** 2, axis=0))
    covered = np.abs(est - truth_vec) <= 1.96 * se
    coverage = covered.mean(axis=0)

    return McSummary(
        replications=replications,
        completed=completed,
        failed=failed,
        coefficient_names=tuple(names),
        true_values=true_values,
        mean_bias={n: float(b) for n, b in zip(names, bias)},
        mean_bias_se={n: float(s / np.sqrt(completed)) for n, s in zip(names, spread)},
        rmse={n: float(v) for n, v in zip(names, rmse)},
        ci_coverage_95={n: float(c) for n, c in zip(names, coverage)},
        mean_first_stage_f=float(np.mean(f_stats)) if f_stats else float("nan"),
        sargan_rejection_rate=float(np.mean(sargan_rejects)) if sargan_rejects else float("nan"),
    )
