"""Nonequilibrium Green functions of the resonant level.

Two scalar functions carry the entire reduced dynamics: the retarded
amplitude u(t), solving the Volterra equation

    du/dt + i*eps_plus*u + Int_0^t g(t - s) u(s) ds = 0,   u(0) = 1,

and the occupation function

    v(t) = Int_0^t Int_0^t u(s1) gt(s2 - s1) u*(s2) ds1 ds2.

u is solved by product integration: trapezoidal weights with Gregory end
corrections (exact through cubics) and the implicit trapezoidal step solved
exactly, which keeps the scheme second order with a small error constant.
v is accumulated in a single pass from the semi-analytic derivative
vdot(t) = 2 Re[u*(t) Int_0^t gt(t - s) u(s) ds] and spot-checked against the
full double integral at eight grid times.

The wide-band limit is handled in closed form: the delta memory kernel
contracts to a friction Gamma/2, so u is a damped exponential, and v reduces
to a frequency integral expressible through the occupation kernel of an
auxiliary Lorentzian of half-width Gamma/2.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.linalg import matmul_toeplitz
from scipy.signal import fftconvolve

from .spectral import (SpectralKind, SpectralModel, fermi, memory_kernel_table,
                       noise_kernel_table, spectral_density)

# Gregory end weights of order 2 (3/8, 7/6, 23/24, 1, 1, ...), stored as
# corrections to the all-ones open sum; exact for cubics.
_GREGORY_CORR = (-5.0 / 8.0, 1.0 / 6.0, -1.0 / 24.0)
_GREGORY_END = 3.0 / 8.0
_AUDIT_IMAG = 1e-10
# Loose runtime guard on the physical bounds; the tight 1e-9 statement is
# asserted on the preset grids in the test suite.
_BOUND_SLACK = 1e-6


class SolverBlowupError(Exception):
    """Volterra recursion produced a non-finite value (dt too large or a
    pathological kernel); carries the failing step index."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


class AuditError(Exception):
    """An internal cross-check of the Green functions failed."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k*dt, k = 0 .. n_steps."""

    dt: float
    n_steps: int

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 2:
            raise ValueError(f"need at least 2 steps, got {self.n_steps}")

    @classmethod
    def from_horizon(cls, dt: float, horizon: float) -> "TimeGrid":
        return cls(dt, int(round(horizon / dt)))

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class GreenTrajectory:
    """u, v and their derivatives on a common grid, plus the model they
    belong to. u_dot comes from the equation of motion itself and v_dot from
    the differentiated double integral, not from finite differences."""

    model: SpectralModel
    grid: TimeGrid
    u: np.ndarray
    u_dot: np.ndarray
    v: np.ndarray
    v_dot: np.ndarray


def u_lorentz_analytic(model: SpectralModel, t) -> np.ndarray:
    """Closed-form u(t) for the Lorentzian band.

    With d_g = sqrt(d**2 - 2*gamma*d) (principal branch; imaginary for
    d < 2*gamma, where |u| oscillates),

        u(t) = exp(-i*eps_plus*t) / (2*d_g)
               * ((d + d_g) exp(-(d - d_g) t / 2) - (d - d_g) exp(-(d + d_g) t / 2)),

    and the degenerate d = 2*gamma case is the limit (1 + d*t/2)
    * exp(-(i*eps_plus + d/2) t). Near-degenerate bands within 1e-8*gamma
    route to the limit branch to dodge the 1/d_g cancellation.
    """
    if model.kind is not SpectralKind.LORENTZIAN:
        raise ValueError("analytic u exists for the Lorentzian band only")
    t = np.asarray(t, dtype=float)
    g0, d, eps = model.gamma, model.d, model.eps_plus
    if abs(d - 2.0 * g0) < 1e-8 * g0:
        out = (1.0 + 0.5 * d * t) * np.exp(-(1j * eps + 0.5 * d) * t)
    else:
        dg = np.sqrt(complex(d * d - 2.0 * g0 * d))
        out = np.exp(-1j * eps * t) / (2.0 * dg) * (
            (d + dg) * np.exp(-0.5 * (d - dg) * t)
            - (d - dg) * np.exp(-0.5 * (d + dg) * t))
    return out if t.ndim else complex(out)


def _solve_u_lorentzian(model: SpectralModel,
                        grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    dt = grid.dt
    n = grid.n_steps
    g = memory_kernel_table(model, grid.times)
    grev = g[::-1].copy()  # contiguous for the per-step BLAS dot
    b0, b1, b2 = _GREGORY_CORR
    ieps = 1j * model.eps_plus
    g0 = g[0]

    u = np.empty(n + 1, dtype=complex)
    udot = np.empty(n + 1, dtype=complex)
    u[0] = 1.0
    udot[0] = -ieps
    for k in range(1, n + 1):
        # memory sum over the history u[0:k]; the u[k] endpoint is implicit
        h = np.dot(grev[n - k:n], u[:k])
        if k >= 5:
            h += (b0 * g[k] * u[0] + b1 * g[k - 1] * u[1] + b2 * g[k - 2] * u[2]
                  + b1 * g[1] * u[k - 1] + b2 * g[2] * u[k - 2])
            w_end = _GREGORY_END
        else:
            h += -0.5 * g[k] * u[0]
            w_end = 0.5
        a = ieps + dt * w_end * g0
        u[k] = (u[k - 1] + 0.5 * dt * udot[k - 1] - 0.5 * dt * dt * h) \
            / (1.0 + 0.5 * dt * a)
        udot[k] = -a * u[k] - dt * h
        if not (np.isfinite(u[k]) and np.isfinite(udot[k])):
            raise SolverBlowupError(
                f"u solver produced a non-finite value at step {k} "
                f"(t = {k * dt:.6g}); reduce dt or check the kernel", step=k)
    return u, udot


def solve_u_numeric(model: SpectralModel,
                    grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Solve the memory equation for u on the grid; returns (u, u_dot).

    Lorentzian models run the product-integration Volterra recursion; the
    wide-band delta kernel contracts exactly to du/dt = -(i*eps_plus +
    gamma/2) u, so that branch returns the closed-form exponential.
    """
    if model.kind is SpectralKind.WIDE_BAND:
        t = grid.times
        rate = 1j * model.eps_plus + 0.5 * model.gamma
        u = np.exp(-rate * t)
        return u, -rate * u
    return _solve_u_lorentzian(model, grid)


def _memory_convolution(kern: np.ndarray, f: np.ndarray,
                        dt: float) -> np.ndarray:
    # I[k] = Int_0^{t_k} kern(t_k - s) f(s) ds with Gregory-corrected
    # trapezoidal weights (plain trapezoid below 5 nodes).
    m = f.size
    out = fftconvolve(kern, f)[:m]
    b = _GREGORY_CORR
    if m > 5:
        for j in range(3):
            out[5:] += b[j] * (kern[5 - j:m - j] * f[j]
                               + kern[j] * f[5 - j:m - j])
    small = np.arange(1, min(5, m))
    out[small] -= 0.5 * (kern[small] * f[0] + kern[0] * f[small])
    out[0] = 0.0
    return dt * out


def _audit_v(gt: np.ndarray, u: np.ndarray, v: np.ndarray,
             grid: TimeGrid, d: float) -> None:
    # Full double-integral evaluation at eight grid times via Toeplitz
    # matvecs; catches kernel Hermiticity or accumulation bugs. The audit
    # side is plain trapezoidal, so the two routes agree only to the
    # product-quadrature resolution O((d*dt)^2) of the kernel ridge
    # (measured: 4.2e-4 at d*dt = 0.1, 4.4e-6 at d*dt = 0.01).
    tol = 1e-6 + 0.25 * (d * grid.dt) ** 2
    n = grid.n_steps
    idx = np.unique(np.round(np.linspace(n / 8, n, 8)).astype(int))
    for m in idx:
        w = np.full(m + 1, grid.dt)
        w[0] = w[-1] = 0.5 * grid.dt
        a = w * u[:m + 1]
        col = gt[:m + 1]
        ta = matmul_toeplitz((col, np.conj(col)), a)
        val = np.vdot(a, ta)
        if abs(val.imag) > _AUDIT_IMAG:
            raise AuditError(
                f"v double integral has imaginary residue {val.imag:.3e} at "
                f"t = {m * grid.dt:.6g} (kernel Hermiticity broken?)")
        if abs(val.real - v[m]) > tol:
            raise AuditError(
                f"v accumulation disagrees with the double integral at "
                f"t = {m * grid.dt:.6g}: {v[m]:.9g} vs {val.real:.9g}")


def compute_v(model: SpectralModel, grid: TimeGrid, u: np.ndarray,
              noise_tol: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Occupation function v(t) and its derivative on the grid.

    Accumulates v through vdot(t) = 2 Re[u*(t) I(t)] with the history
    integral I(t) = Int_0^t gt(t - s) u(s) ds evaluated by one FFT
    convolution plus Gregory end corrections, then audits the result against
    the full double integral at eight times (AuditError on mismatch).
    """
    gt = noise_kernel_table(model, grid.times, tol=noise_tol)
    hist = _memory_convolution(gt, u, grid.dt)
    vdot = 2.0 * np.real(np.conj(u) * hist)
    v = cumulative_trapezoid(vdot, dx=grid.dt, initial=0.0)
    _audit_v(gt, u, v, grid, model.d)
    return v, vdot


def _wideband_v(model: SpectralModel,
                grid: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    # Closed frequency-domain form: |u_hat_t(w)|^2 is a Lorentzian of
    # half-width gamma/2 times (1 + e^{-gamma t} - 2 e^{-gamma t/2}
    # cos((w - eps_plus) t)), so v reduces to the occupation kernel Q of an
    # auxiliary unit-strength Lorentzian band evaluated at 0 and t.
    if model.gamma == 0.0:
        z = np.zeros(grid.n_steps + 1)
        return z, z.copy()
    aux = SpectralModel.lorentzian(1.0, 0.5 * model.gamma,
                                   eps_plus=model.eps_plus, mu=model.mu,
                                   temperature=model.temperature)
    t = grid.times
    q = noise_kernel_table(aux, t)
    damp = np.exp(-model.gamma * t)
    half = np.exp(-0.5 * model.gamma * t)
    v = (4.0 / model.gamma) * ((1.0 + damp) * q[0].real
                               - 2.0 * half * np.real(np.exp(1j * model.eps_plus * t) * q))
    # the semi-analytic vdot identity needs the (distributional) memory
    # kernel here, so fall back to second-order differences
    vdot = np.gradient(v, grid.dt, edge_order=2)
    return v, vdot


def solve_green_functions(model: SpectralModel, grid: TimeGrid,
                          noise_tol: Optional[float] = None) -> GreenTrajectory:
    """Full u, v computation for either band shape; the main entry point."""
    u, udot = solve_u_numeric(model, grid)
    if model.kind is SpectralKind.WIDE_BAND:
        v, vdot = _wideband_v(model, grid)
    else:
        v, vdot = compute_v(model, grid, u, noise_tol)
    absu = np.abs(u)
    if absu.max() > 1.0 + _BOUND_SLACK:
        raise AuditError(f"|u| exceeded 1 by {absu.max() - 1.0:.3e}")
    n_tot = v + absu ** 2
    if v.min() < -_BOUND_SLACK or n_tot.max() > 1.0 + _BOUND_SLACK:
        raise AuditError(
            f"occupation bounds violated: min v = {v.min():.3e}, "
            f"max v + |u|^2 = {n_tot.max():.9g}")
    return GreenTrajectory(model=model, grid=grid, u=u, u_dot=udot,
                           v=v, v_dot=vdot)


def _bm_lamb_shift(model: SpectralModel) -> float:
    # Second-order level shift: principal value of J(w)/(eps_plus - w) / 2pi.
    # Identically zero for a band symmetric about eps_plus (our Lorentzian),
    # but computed rather than assumed; the symmetric window makes the
    # truncated tails cancel exactly.
    if model.gamma == 0.0:
        return 0.0
    half = 50.0 * model.d
    val, _ = quad(lambda w: spectral_density(model, w),
                  model.eps_plus - half, model.eps_plus + half,
                  weight="cauchy", wvar=model.eps_plus, limit=200)
    return -val / (2.0 * np.pi)


def bm_green(model: SpectralModel, t) -> Tuple[np.ndarray, np.ndarray]:
    """Born-Markov reference pair (u_BM, v_BM) on times ``t``.

    u_BM(t) = exp(-i*(eps_plus + shift)*t - J(eps_plus)*t/2) and
    v_BM(t) = (1 - exp(-J(eps_plus)*t)) * f(eps_plus); the Lamb shift is zero
    for the wide band and evaluates to zero (by symmetry) for the Lorentzian.
    """
    t = np.asarray(t, dtype=float)
    j0 = spectral_density(model, model.eps_plus)
    f0 = fermi(model.eps_plus, model.mu, model.temperature)
    shift = 0.0 if model.kind is SpectralKind.WIDE_BAND else _bm_lamb_shift(model)
    u_bm = np.exp(-(1j * (model.eps_plus + shift) + 0.5 * j0) * t)
    v_bm = (1.0 - np.exp(-j0 * t)) * f0
    return u_bm, v_bm
