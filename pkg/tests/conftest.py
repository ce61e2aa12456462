import numpy as np
import pytest

from logitdemand.dataio import PanelDataset, compute_dependent
from logitdemand.simulate import DgpParams, default_model_spec, generate_market


@pytest.fixture
def make_panel():
    """Build a PanelDataset from raw column arrays; one unit per row by default."""

    def build(columns, units=None, periods=None, kinds=None):
        n = len(next(iter(columns.values())))
        if units is None:
            units = [f"u{i:03d}" for i in range(n)]
        if periods is None:
            periods = [2001] * n
        return PanelDataset(
            units=tuple(units),
            periods=tuple(periods),
            columns={k: np.asarray(v, dtype=float) for k, v in columns.items()},
            column_kinds=kinds or {},
        )

    return build


@pytest.fixture
def simulated_market():
    """Generate a clean simulated panel with the dependent column attached."""

    def build(seed=7, estimator="tsls", **overrides):
        defaults = dict(
            n_products=6,
            n_periods=8,
            n_characteristics=2,
            beta=(1.0, -0.5),
            alpha=1.0,
            xi_scale=0.3,
            price_endogeneity=0.0,
            instrument_strength=1.0,
            price_noise_scale=0.5,
            seed=seed,
        )
        defaults.update(overrides)
        params = DgpParams(**defaults)
        data, truth = generate_market(params)
        data = compute_dependent(data)
        return default_model_spec(params, estimator=estimator), data, truth

    return build
