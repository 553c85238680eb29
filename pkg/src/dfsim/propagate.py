"""Density-matrix evolution: exact solution map and direct ODE integration.

Two independent routes to rho(t). The exact map writes each component in
closed form through u(t) and v(t): populations mix pairwise inside the
{vac, +} and {-, d} blocks with weights (1-v, 1-v-|u|^2; v, v+|u|^2), and the
single coherence picks up u(t) e^{+i eps_minus t}. The ODE route steps the
time-local generator (renormalized level + dissipator built from the
extracted rates) with classical RK4 on the same grid. The map solves the
master equation exactly, so the two must agree to integration error; the
comparison isolates that error because both routes consume one Green
trajectory.
"""

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .greens import GreenTrajectory, TimeGrid
from .liouville import DensityVector
from .rates import RateTrajectory

_PURE_TOL = 1e-8


class Method(enum.Enum):
    EXACT_MAP = "exact-map"
    DIRECT_ODE = "direct-ode"


@dataclass(frozen=True)
class StateBasis:
    """Unitary between the site basis {|1>, |2>} and the coupled pair |+->.

    |+> = (|1> + e^{-i phi}|2>)/sqrt(2),  |-> = (-e^{i phi}|1> + |2>)/sqrt(2),
    with phi the relative phase between the two site couplings.
    """

    phi: float = 0.0

    @property
    def unitary(self) -> np.ndarray:
        """Columns are |+> and |-> expressed in the site basis."""
        ph = np.exp(1j * self.phi)
        return np.array([[1.0, -ph], [np.conj(ph), 1.0]]) / np.sqrt(2.0)

    def to_effective(self, site_amplitudes: np.ndarray) -> np.ndarray:
        return self.unitary.conj().T @ np.asarray(site_amplitudes, dtype=complex)

    def to_site(self, effective_amplitudes: np.ndarray) -> np.ndarray:
        return self.unitary @ np.asarray(effective_amplitudes, dtype=complex)


@dataclass(frozen=True)
class PropagationResult:
    """Component series rho(t); shape (6, n) or (6, n, K) for K initial states."""

    grid: TimeGrid
    method: Method
    components: np.ndarray
    trace_drift: float
    positivity_margin: float
    truncated: bool
    n_valid: int

    @property
    def batched(self) -> bool:
        return self.components.ndim == 3

    def state_at(self, i: int, member: int = 0) -> DensityVector:
        if i >= self.n_valid:
            raise IndexError(f"node {i} is beyond the valid range {self.n_valid}")
        c = self.components[:, i, member] if self.batched else self.components[:, i]
        return DensityVector(c)

    @property
    def final(self) -> DensityVector:
        return self.state_at(self.n_valid - 1)


def _coerce_initial(rho0: Union[DensityVector, np.ndarray]) -> np.ndarray:
    """Validate and reshape to (6, K); remembers nothing about K = 1."""
    if isinstance(rho0, DensityVector):
        rho0.validate()
        return rho0.components[:, None]
    arr = np.asarray(rho0, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != 6:
        raise ValueError(f"initial state must have 6 components, got {arr.shape}")
    for k in range(arr.shape[1]):
        DensityVector(arr[:, k]).validate()
    return arr


def _diagnostics(comp: np.ndarray, n_valid: int):
    c = comp[:, :n_valid]
    trace = np.real(c[0] + c[1] + c[4] + c[5])
    drift = float(np.max(np.abs(trace - 1.0)))
    diag_min = np.min(np.real(c[[0, 1, 4, 5]]))
    # eigenvalues of the 2x2 single-particle block
    half = 0.5 * np.real(c[1] + c[4])
    disc = np.hypot(0.5 * np.real(c[1] - c[4]), np.abs(c[2]))
    margin = float(min(diag_min, np.min(half - disc)))
    return drift, margin


def propagate_exact(rho0: Union[DensityVector, np.ndarray],
                    traj: GreenTrajectory, eps_minus: float) -> PropagationResult:
    """Apply the closed-form solution map at every grid node."""
    r0 = _coerce_initial(rho0)
    single = isinstance(rho0, DensityVector) or np.asarray(rho0).ndim == 1
    t = traj.grid.times
    u2 = np.abs(traj.u) ** 2
    stay = 1.0 - traj.v
    leak = 1.0 - traj.v - u2
    gain = traj.v + u2
    phase = traj.u * np.exp(1j * eps_minus * t)

    n = t.size
    comp = np.empty((6, n, r0.shape[1]), dtype=complex)
    comp[0] = stay[:, None] * r0[0] + leak[:, None] * r0[1]
    comp[1] = traj.v[:, None] * r0[0] + gain[:, None] * r0[1]
    comp[2] = phase[:, None] * r0[2]
    comp[3] = np.conj(comp[2])
    comp[4] = stay[:, None] * r0[4] + leak[:, None] * r0[5]
    comp[5] = traj.v[:, None] * r0[4] + gain[:, None] * r0[5]
    if single:
        comp = comp[:, :, 0]
    drift, margin = _diagnostics(comp, n)
    return PropagationResult(grid=traj.grid, method=Method.EXACT_MAP,
                             components=comp, trace_drift=drift,
                             positivity_margin=margin, truncated=False,
                             n_valid=n)


def _rate_samples(rates: RateTrajectory, n: int, interp: str):
    """Rate triples at the n grid nodes and the n-1 midpoints."""
    t = rates.grid.times[:n]
    cols = (rates.eps_tilde[:n], rates.kappa[:n], rates.kappa_tilde[:n])
    if interp == "cubic":
        tm = 0.5 * (t[:-1] + t[1:])
        mids = tuple(CubicSpline(t, c)(tm) for c in cols)
    elif interp == "linear":
        mids = tuple(0.5 * (c[:-1] + c[1:]) for c in cols)
    else:
        raise ValueError(f"unknown rate interpolation {interp!r}")
    return cols, mids


def _generator_stack(eps_t, kappa, kappa_t, eps_minus):
    """6x6 time-local generators for a whole batch of times at once."""
    m = eps_t.size
    g = np.zeros((m, 6, 6), dtype=complex)
    g[:, 0, 0] = -2.0 * kappa_t
    g[:, 0, 1] = 2.0 * kappa
    g[:, 1, 0] = 2.0 * kappa_t
    g[:, 1, 1] = -2.0 * kappa
    g[:, 4, 4] = -2.0 * kappa_t
    g[:, 4, 5] = 2.0 * kappa
    g[:, 5, 4] = 2.0 * kappa_t
    g[:, 5, 5] = -2.0 * kappa
    damp = kappa + kappa_t
    g[:, 2, 2] = -1j * (eps_t - eps_minus) - damp
    g[:, 3, 3] = +1j * (eps_t - eps_minus) - damp
    return g


def integrate_ode(rho0: Union[DensityVector, np.ndarray], rates: RateTrajectory,
                  eps_minus: float, interp: str = "linear") -> PropagationResult:
    """Step the time-local master equation with classical RK4.

    The step equals the grid step; midpoint rate values come from linear
    interpolation (default; a cubic spline is available but rings on the
    fast initial transient). When the rate series was truncated (|u| reached
    its floor) integration stops at the last valid node and the result is
    flagged.
    """
    r0 = _coerce_initial(rho0)
    single = isinstance(rho0, DensityVector) or np.asarray(rho0).ndim == 1
    n = rates.n_valid
    h = rates.grid.dt
    (eps_n, k_n, kt_n), (eps_m, k_m, kt_m) = _rate_samples(rates, n, interp)
    g_node = _generator_stack(eps_n, k_n, kt_n, eps_minus)
    g_mid = _generator_stack(eps_m, k_m, kt_m, eps_minus)

    total = rates.grid.n_steps + 1
    comp = np.full((6, total, r0.shape[1]), np.nan, dtype=complex)
    y = r0.astype(complex)
    comp[:, 0] = y
    for i in range(n - 1):
        k1 = g_node[i] @ y
        k2 = g_mid[i] @ (y + 0.5 * h * k1)
        k3 = g_mid[i] @ (y + 0.5 * h * k2)
        k4 = g_node[i + 1] @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        comp[:, i + 1] = y
    if single:
        comp = comp[:, :, 0]
    drift, margin = _diagnostics(comp, n)
    return PropagationResult(grid=rates.grid, method=Method.DIRECT_ODE,
                             components=comp, trace_drift=drift,
                             positivity_margin=margin,
                             truncated=rates.truncated, n_valid=n)


def purity_and_fidelity(rho: DensityVector, target: DensityVector):
    """(tr rho^2, <target|rho|target>) for a pure target state."""
    rho.validate()
    target.validate()
    c = target.components
    target_purity = float(np.sum(np.real(c[[0, 1, 4, 5]]) ** 2) + 2.0 * abs(c[2]) ** 2)
    if abs(target_purity - 1.0) > _PURE_TOL:
        raise ValueError(f"fidelity target must be pure; tr(sigma^2) = "
                         f"{target_purity:.6f}")
    r = rho.components
    purity = float(np.sum(np.real(r[[0, 1, 4, 5]]) ** 2) + 2.0 * abs(r[2]) ** 2)
    m = rho.as_matrix()
    vals, vecs = np.linalg.eigh(target.as_matrix())
    psi = vecs[:, -1]
    fidelity = float(np.real(np.vdot(psi, m @ psi)))
    return purity, fidelity
