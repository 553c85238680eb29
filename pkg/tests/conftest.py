"""Shared, session-scoped caches for the expensive pipeline stages.

The Green-function solves dominate the suite's runtime, and many tests look
at the same handful of models, so trajectories, rate tables, scenario runs
and Born-Markov comparisons are computed once per session and reused.
"""

from types import SimpleNamespace
from typing import Optional

import pytest

from dfsim import (SpectralModel, bm_compare, default_grid, preset,
                   rates_from_uv, run_scenario, solve_green_functions)


@pytest.fixture(scope="session")
def store():
    greens, rate_cache, scen_cache, bm_cache = {}, {}, {}, {}

    def model_for(d: Optional[float], mu: float) -> SpectralModel:
        if d is None:
            return SpectralModel.wide_band(1.0, mu=mu)
        return SpectralModel.lorentzian(1.0, d, mu=mu)

    def green(d, mu, dt=1e-3, horizon=None):
        key = (d, mu, dt, horizon)
        if key not in greens:
            model = model_for(d, mu)
            grid = default_grid(model, dt=dt, horizon=horizon)
            greens[key] = solve_green_functions(model, grid)
        return greens[key]

    def rates(d, mu, dt=1e-3, horizon=None):
        key = (d, mu, dt, horizon)
        if key not in rate_cache:
            rate_cache[key] = rates_from_uv(green(d, mu, dt, horizon))
        return rate_cache[key]

    def scenario(name):
        if name not in scen_cache:
            scen_cache[name] = [(label, run_scenario(cfg))
                                for label, cfg in preset(name)]
        return scen_cache[name]

    def bm100(label):
        if not bm_cache:
            for lab, cfg in preset("bm100"):
                bm_cache[lab] = bm_compare(cfg)
        return bm_cache[label]

    return SimpleNamespace(green=green, rates=rates, scenario=scenario,
                           bm100=bm100)
