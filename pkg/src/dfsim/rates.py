"""Time-local master-equation coefficients and switch-off detection.

The exact generator is parametrised by a renormalised level eps_tilde(t) and
two decoherence rates kappa(t) (loss channel) and kappa_tilde(t) (gain
channel), all carried by u and v:

    eps_tilde = -Im[du/dt / u],     gamma       = -Re[du/dt / u],
    gamma_tilde = dv/dt + 2 v gamma,
    kappa = gamma - gamma_tilde / 2,   kappa_tilde = gamma_tilde / 2.

In the strongly non-Markovian regime the rates can turn negative and even
diverge at isolated zeros of |u|; everything downstream must tolerate that.
Dynamical stabilisation shows up as one of the rates switching off (staying
below tolerance for the rest of the horizon), which `detect_switch_off`
classifies.
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .greens import GreenTrajectory, TimeGrid
from .spectral import SpectralModel, fermi, spectral_density

# |u| below this is treated as total decay; the rate quotient is singular.
U_FLOOR = 1e-12


class SwitchOffKind(enum.Enum):
    KAPPA_OFF = "kappa-off"
    KAPPA_TILDE_OFF = "kappa-tilde-off"
    NEITHER_OFF = "neither-off"
    BOTH_OFF = "both-off"


@dataclass(frozen=True)
class RateTrajectory:
    """Master-equation coefficients on a grid.

    Nodes past ``n_valid`` (only present when ``truncated``) hold NaN: there
    |u| fell below the floor and the quotient is undefined.
    """

    grid: TimeGrid
    eps_tilde: np.ndarray
    gamma: np.ndarray
    gamma_tilde: np.ndarray
    kappa: np.ndarray
    kappa_tilde: np.ndarray
    truncated: bool
    n_valid: int


@dataclass(frozen=True)
class SwitchOffReport:
    which: SwitchOffKind
    t_s: Optional[float]
    tolerance: float
    window: float


def _rate_arrays(traj: GreenTrajectory, u_floor: float):
    absu = np.abs(traj.u)
    below = np.flatnonzero(absu <= u_floor)
    n = traj.u.size
    n_valid = int(below[0]) if below.size else n
    if n_valid == 0:
        raise ValueError("|u(0)| is below the floor; nothing to compute")
    sl = slice(0, n_valid)
    ratio = traj.u_dot[sl] / traj.u[sl]
    shape = np.full(n, np.nan)
    out = []
    for _ in range(5):
        out.append(shape.copy())
    eps_t, gamma, gamma_t, kappa, kappa_t = out
    eps_t[sl] = -ratio.imag
    gamma[sl] = -ratio.real
    return eps_t, gamma, gamma_t, kappa, kappa_t, n_valid, sl


def rates_from_uv(traj: GreenTrajectory, u_floor: float = U_FLOOR) -> RateTrajectory:
    """Extract the exact generator coefficients from a Green trajectory.

    If |u| reaches ``u_floor`` the series is truncated at the last valid
    node (``truncated`` flag set, NaN beyond); the quotient du/dt / u is
    genuinely singular at total decay.
    """
    eps_t, gamma, gamma_t, kappa, kappa_t, n_valid, sl = _rate_arrays(traj, u_floor)
    gamma_t[sl] = traj.v_dot[sl] + 2.0 * traj.v[sl] * gamma[sl]
    kappa[sl] = gamma[sl] - 0.5 * gamma_t[sl]
    kappa_t[sl] = 0.5 * gamma_t[sl]
    return RateTrajectory(grid=traj.grid, eps_tilde=eps_t, gamma=gamma,
                          gamma_tilde=gamma_t, kappa=kappa, kappa_tilde=kappa_t,
                          truncated=n_valid < traj.u.size, n_valid=n_valid)


def rates_simplified(traj: GreenTrajectory, u_floor: float = U_FLOOR) -> RateTrajectory:
    """Same coefficients through the total-derivative forms.

    kappa = (|u|^2 / 2) d/dt[(1 - v) / |u|^2] and kappa_tilde =
    (|u|^2 / 2) d/dt[v / |u|^2], expanded analytically with the stored
    derivatives. Algebraically identical to :func:`rates_from_uv`; kept as an
    independent assembly for cross-checking.
    """
    eps_t, gamma, gamma_t, kappa, kappa_t, n_valid, sl = _rate_arrays(traj, u_floor)
    u2 = np.abs(traj.u[sl]) ** 2
    # d|u|^2/dt from the stored u_dot, then the product rule on v/|u|^2
    du2 = 2.0 * np.real(np.conj(traj.u[sl]) * traj.u_dot[sl])
    v, vdot = traj.v[sl], traj.v_dot[sl]
    kappa[sl] = 0.5 * (-vdot - (1.0 - v) * du2 / u2)
    kappa_t[sl] = 0.5 * (vdot - v * du2 / u2)
    gamma_t[sl] = 2.0 * kappa_t[sl]
    return RateTrajectory(grid=traj.grid, eps_tilde=eps_t, gamma=gamma,
                          gamma_tilde=gamma_t, kappa=kappa, kappa_tilde=kappa_t,
                          truncated=n_valid < traj.u.size, n_valid=n_valid)


def bm_rates(model: SpectralModel):
    """Born-Markov constants (kappa_BM, kappa_tilde_BM).

    kappa_BM = J(eps_plus) (1 - f(eps_plus)) / 2 and kappa_tilde_BM =
    J(eps_plus) f(eps_plus) / 2; their sum is J(eps_plus)/2 identically.
    """
    j0 = spectral_density(model, model.eps_plus)
    f0 = fermi(model.eps_plus, model.mu, model.temperature)
    return 0.5 * j0 * (1.0 - f0), 0.5 * j0 * f0


def _sustained_off_time(t: np.ndarray, rate: np.ndarray, tol: float,
                        window: float) -> Optional[float]:
    # earliest node from which |rate| stays below tol through the end of the
    # series, provided the remaining span is at least one window long
    ok = np.abs(rate) < tol
    if not ok[-1]:
        return None
    # first index of the trailing all-True run
    bad = np.flatnonzero(~ok)
    start = int(bad[-1]) + 1 if bad.size else 0
    if t[-1] - t[start] < window:
        return None
    return float(t[start])


def detect_switch_off(rates: RateTrajectory, tolerance: float = 1e-3,
                      window: float = 2.0) -> SwitchOffReport:
    """Classify which decoherence rate (if any) has switched off.

    A rate counts as off at the earliest time t_s after which its magnitude
    stays below ``tolerance`` for the whole remaining horizon, and the
    remaining span is at least ``window`` long. Truncated series classify on
    their valid part.
    """
    if tolerance <= 0.0 or window <= 0.0:
        raise ValueError(
            f"tolerance and window must be > 0, got {tolerance:.3g} "
            f"and {window:.3g}")
    n = rates.n_valid
    t = rates.grid.times[:n]
    if t[-1] - t[0] < window:
        raise ValueError(
            f"rate series spans {t[-1] - t[0]:.3g}, shorter than the "
            f"detection window {window:.3g}")
    t_k = _sustained_off_time(t, rates.kappa[:n], tolerance, window)
    t_kt = _sustained_off_time(t, rates.kappa_tilde[:n], tolerance, window)
    if t_k is not None and t_kt is not None:
        return SwitchOffReport(SwitchOffKind.BOTH_OFF, max(t_k, t_kt),
                               tolerance, window)
    if t_k is not None:
        return SwitchOffReport(SwitchOffKind.KAPPA_OFF, t_k, tolerance, window)
    if t_kt is not None:
        return SwitchOffReport(SwitchOffKind.KAPPA_TILDE_OFF, t_kt,
                               tolerance, window)
    return SwitchOffReport(SwitchOffKind.NEITHER_OFF, None, tolerance, window)
