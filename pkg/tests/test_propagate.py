"""Closed-form map vs direct integration, plus propagation invariants."""

import numpy as np
import pytest

from dfsim import (DensityVector, Method, SpectralModel, StateBasis,
                   integrate_ode, propagate_exact, purity_and_fidelity,
                   rates_from_uv)
from dfsim.greens import GreenTrajectory, TimeGrid

EPS_MINUS = 0.2


def random_states(rng, k):
    """Physical 6-component states: random populations, bounded coherence."""
    pops = rng.random((4, k))
    pops /= pops.sum(axis=0)
    mag = rng.random(k) * np.sqrt(pops[1] * pops[2])
    phase = np.exp(2j * np.pi * rng.random(k))
    comp = np.zeros((6, k), dtype=complex)
    comp[0], comp[1], comp[4], comp[5] = pops[0], pops[1], pops[2], pops[3]
    comp[2] = mag * phase
    comp[3] = np.conj(comp[2])
    return comp


def test_exact_map_population_identities(store):
    gt = store.green(10.0, 10.0, horizon=10.0)
    res = propagate_exact(DensityVector.pure("v"), gt, EPS_MINUS)
    assert res.method is Method.EXACT_MAP
    # an initially empty level fills exactly with v(t)
    assert np.max(np.abs(res.components[0] - (1.0 - gt.v))) == 0.0
    assert np.max(np.abs(res.components[1] - gt.v)) == 0.0
    # the lower-sector components never populate
    for i in (2, 3, 4, 5):
        assert np.max(np.abs(res.components[i])) == 0.0
    assert res.trace_drift < 1e-14

    res_d = propagate_exact(DensityVector.pure("d"), gt, EPS_MINUS)
    n_tot = gt.v + np.abs(gt.u) ** 2
    assert np.max(np.abs(res_d.components[5] - n_tot)) < 1e-15
    assert np.max(np.abs(res_d.components[4] - (1.0 - n_tot))) < 1e-15


def test_exact_map_coherence_is_u_over_two(store):
    gt = store.green(10.0, 10.0, horizon=10.0)
    sup = DensityVector.superposition(np.sqrt(0.5), np.sqrt(0.5))
    res = propagate_exact(sup, gt, EPS_MINUS)
    assert np.max(np.abs(np.abs(res.components[2]) - 0.5 * np.abs(gt.u))) < 1e-15


def test_ode_matches_map_on_smooth_rates(store):
    for d, mu, bound in ((10.0, 10.0, 2e-7), (10.0, -10.0, 2e-7),
                         (2.0, 0.0, 1e-7)):
        gt = store.green(d, mu, horizon=10.0)
        rt = store.rates(d, mu, horizon=10.0)
        exact = propagate_exact(DensityVector.pure("v"), gt, EPS_MINUS)
        ode = integrate_ode(DensityVector.pure("v"), rt, EPS_MINUS)
        dev = np.max(np.abs(exact.components - ode.components))
        assert dev < bound, (d, mu, dev)
        assert ode.trace_drift < 1e-12


def test_ode_cubic_interpolation_also_converges(store):
    gt = store.green(10.0, 10.0, horizon=10.0)
    rt = store.rates(10.0, 10.0, horizon=10.0)
    exact = propagate_exact(DensityVector.pure("v"), gt, EPS_MINUS)
    ode = integrate_ode(DensityVector.pure("v"), rt, EPS_MINUS, interp="cubic")
    assert np.max(np.abs(exact.components - ode.components)) < 1e-6
    with pytest.raises(ValueError):
        integrate_ode(DensityVector.pure("v"), rt, EPS_MINUS, interp="spline")


def test_batched_ode_equals_member_runs(store):
    rt = store.rates(10.0, 10.0, horizon=10.0)
    rng = np.random.default_rng(3)
    batch = random_states(rng, 5)
    joint = integrate_ode(batch, rt, EPS_MINUS)
    assert joint.batched
    for k in range(5):
        single = integrate_ode(batch[:, k], rt, EPS_MINUS)
        assert np.max(np.abs(joint.components[:, :, k] - single.components)) \
            < 1e-13
    # state_at exposes individual members
    member = joint.state_at(100, member=2)
    assert member.trace == pytest.approx(1.0, abs=1e-10)


def test_batched_exact_map(store):
    gt = store.green(10.0, 0.0, horizon=10.0)
    rng = np.random.default_rng(4)
    batch = random_states(rng, 7)
    res = propagate_exact(batch, gt, EPS_MINUS)
    one = propagate_exact(batch[:, 3], gt, EPS_MINUS)
    assert np.max(np.abs(res.components[:, :, 3] - one.components)) == 0.0


def test_state_basis_roundtrip():
    rng = np.random.default_rng(5)
    for phi in (0.0, 0.7, -2.3):
        basis = StateBasis(phi)
        u_mat = basis.unitary
        assert np.max(np.abs(u_mat.conj().T @ u_mat - np.eye(2))) < 1e-15
        amp = rng.normal(size=2) + 1j * rng.normal(size=2)
        back = basis.to_site(basis.to_effective(amp))
        assert np.max(np.abs(back - amp)) < 1e-14
    # at phi = 0 the coupled state is the symmetric combination
    plus_site = StateBasis(0.0).to_site(np.array([1.0, 0.0]))
    assert np.max(np.abs(plus_site - np.array([1.0, 1.0]) / np.sqrt(2))) < 1e-15


def test_purity_and_fidelity_identities(store):
    gt = store.green(10.0, 10.0, horizon=10.0)
    res = propagate_exact(DensityVector.pure("v"), gt, EPS_MINUS)
    purity, fidelity = purity_and_fidelity(res.final, DensityVector.pure("+"))
    # for a diagonal final state the fidelity with |+> is its population
    assert fidelity == pytest.approx(float(res.components[1, -1].real), abs=1e-12)
    assert fidelity == pytest.approx(0.9962, abs=2e-3)
    assert purity == pytest.approx(float(np.sum(np.real(
        res.components[[0, 1, 4, 5], -1]) ** 2)), abs=1e-12)
    with pytest.raises(ValueError):
        purity_and_fidelity(res.final, res.final)  # final state is mixed


def test_unphysical_initial_state_rejected(store):
    rt = store.rates(10.0, 0.0, horizon=10.0)
    bad = np.array([2.0, 0, 0, 0, 0, 0], dtype=complex)
    with pytest.raises(ValueError):
        integrate_ode(bad, rt, EPS_MINUS)
    gt = store.green(10.0, 0.0, horizon=10.0)
    with pytest.raises(ValueError):
        propagate_exact(bad, gt, EPS_MINUS)


def test_truncated_rates_limit_integration():
    grid = TimeGrid.from_horizon(1e-3, 3.0)
    t = grid.times
    u = np.exp(-(20.0 + 0.2j) * t)
    model = SpectralModel.lorentzian(1.0, 10.0)
    gt = GreenTrajectory(model=model, grid=grid, u=u,
                         u_dot=np.gradient(u, grid.dt, edge_order=2),
                         v=np.zeros_like(t), v_dot=np.zeros_like(t))
    rt = rates_from_uv(gt)
    assert rt.truncated
    res = integrate_ode(DensityVector.pure("+"), rt, EPS_MINUS)
    assert res.truncated
    assert res.n_valid == rt.n_valid
    assert np.all(np.isnan(res.components[0, res.n_valid:]))
    assert np.all(np.isfinite(res.components[:, : res.n_valid]))
    with pytest.raises(IndexError):
        res.state_at(res.n_valid)
