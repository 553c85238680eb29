"""Reservoir spectral models and the memory kernels they induce.

Everything is expressed in natural units (hbar = k_B = 1); energies are quoted
in units of the resonant coupling Gamma and times in 1/Gamma.

Two reservoir kernels drive the reduced dynamics: the retarded memory kernel

    g(tau) = (1/2*pi) Int J(w) exp(-i*w*tau) dw,

which for a Lorentzian band has the closed form
(Gamma*d/2) * exp(-(i*eps_plus + d)*tau) at tau >= 0 (conjugate for tau < 0),
and the occupation (noise) kernel

    gt(tau) = (1/2*pi) Int J(w) f(w) exp(-i*w*tau) dw,

which has no closed form at finite temperature. It is evaluated here as
g - (transform of the unoccupied band), with the Fermi window integrated by
quadrature and the pure-Lorentzian tails beyond the window integrated exactly
via the exponential integral E1. The wide-band limit turns g into a delta
kernel that only exists under an integral sign; pointwise kernel evaluation
refuses it and the propagation layer contracts it analytically instead.
"""

import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import integrate, special

ArrayLike = Union[float, np.ndarray]

# Fermi exponent clamp; exp(700) is near the float64 overflow edge.
_EXP_CLAMP = 700.0
# Half-width of the Fermi window in units of T. Outside mu +- 30 T the Fermi
# factor is within exp(-30) ~ 1e-13 of its asymptote.
_BAND_HALFWIDTH = 30.0
# |Re u| beyond which exp(u) * exp1(u) cannot be formed from its factors.
_EXP1_CF_SWITCH = 600.0


class KernelContractionError(Exception):
    """A pointwise kernel was requested where only its contraction exists.

    The wide-band memory kernel is delta correlated and the matching noise
    integrand is not absolutely integrable, so neither kernel has pointwise
    values; the propagation layer handles that limit in closed form.
    """


class QuadratureError(Exception):
    """A kernel quadrature could not meet the requested tolerance.

    The accumulated error estimate is carried in the ``estimate`` attribute.
    """

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


class SpectralKind(enum.Enum):
    LORENTZIAN = "lorentzian"
    WIDE_BAND = "wide-band"


@dataclass(frozen=True)
class SpectralModel:
    """Coupling-weighted reservoir density of states and its occupation.

    Parameters
    ----------
    kind:
        Band shape, Lorentzian or wide (flat) band.
    gamma:
        Resonant coupling strength; J(eps_plus) = gamma for both kinds.
        gamma = 0 describes a decoupled system and is allowed.
    eps_plus:
        Energy of the reservoir-coupled level; the Lorentzian band is
        centred on it.
    mu:
        Reservoir chemical potential.
    temperature:
        Reservoir temperature, strictly positive.
    d:
        Lorentzian half-width. Required for the Lorentzian kind, must be
        omitted for the wide band.
    """

    kind: SpectralKind
    gamma: float
    eps_plus: float
    mu: float
    temperature: float
    d: Optional[float] = None

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError(f"coupling gamma must be >= 0, got {self.gamma}")
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.kind is SpectralKind.LORENTZIAN:
            if self.d is None or self.d <= 0.0:
                raise ValueError("a Lorentzian band needs a half-width d > 0")
        elif self.d is not None:
            raise ValueError("the wide band takes no half-width d")

    @classmethod
    def lorentzian(cls, gamma: float, d: float, eps_plus: float = 0.2,
                   mu: float = 0.0, temperature: float = 0.3) -> "SpectralModel":
        return cls(SpectralKind.LORENTZIAN, gamma, eps_plus, mu, temperature, d)

    @classmethod
    def wide_band(cls, gamma: float, eps_plus: float = 0.2,
                  mu: float = 0.0, temperature: float = 0.3) -> "SpectralModel":
        return cls(SpectralKind.WIDE_BAND, gamma, eps_plus, mu, temperature, None)


def spectral_density(model: SpectralModel, omega: ArrayLike) -> ArrayLike:
    """Evaluate J(omega) for the given model.

    The Lorentzian form is gamma * d**2 / ((omega - eps_plus)**2 + d**2); the
    wide band is the constant gamma.
    """
    w = np.asarray(omega, dtype=float)
    if model.kind is SpectralKind.WIDE_BAND:
        out = np.full(w.shape, model.gamma)
    else:
        out = model.gamma * model.d ** 2 / ((w - model.eps_plus) ** 2 + model.d ** 2)
    return out if w.ndim else float(out)


def fermi(omega: ArrayLike, mu: float, temperature: float) -> ArrayLike:
    """Fermi-Dirac occupation 1 / (exp((omega - mu)/T) + 1), overflow safe."""
    w = np.asarray(omega, dtype=float)
    x = np.clip((w - mu) / temperature, -_EXP_CLAMP, _EXP_CLAMP)
    out = 1.0 / (np.exp(x) + 1.0)
    return out if w.ndim else float(out)


def _require_lorentzian(model: SpectralModel, what: str) -> None:
    if model.kind is not SpectralKind.LORENTZIAN:
        raise KernelContractionError(
            f"the wide-band {what} is delta correlated and has no pointwise "
            "values; the propagation layer contracts that limit analytically")


def memory_kernel(model: SpectralModel, tau: ArrayLike) -> ArrayLike:
    """Retarded memory kernel g(tau), closed form for the Lorentzian band."""
    _require_lorentzian(model, "memory kernel")
    t = np.asarray(tau, dtype=float)
    a = np.abs(t)
    val = 0.5 * model.gamma * model.d * np.exp(-(1j * model.eps_plus + model.d) * a)
    out = np.where(t < 0.0, np.conj(val), val)
    return out if t.ndim else complex(out)


def memory_kernel_table(model: SpectralModel, t: np.ndarray) -> np.ndarray:
    """Memory kernel sampled on a whole time grid (closed form, cheap)."""
    return memory_kernel(model, np.asarray(t, dtype=float))


# ---------------------------------------------------------------------------
# scaled exponential integral, exp(u) * E1(u)


def _exp1_scaled_cf(u: np.ndarray) -> np.ndarray:
    # Modified Lentz on the standard continued fraction
    # exp(u) E1(u) = 1/(u+1 - 1/(u+3 - 4/(u+5 - 9/(...)))), Re u large positive.
    tiny = 1e-300
    b = u + 1.0
    c = np.full(u.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 200):
        a = -float(i * i)
        b = b + 2.0
        d = 1.0 / (a * d + b)
        c = b + a / c
        delta = c * d
        h *= delta
        if np.all(np.abs(delta - 1.0) < 1e-16):
            break
    return h

def _exp1_scaled_asymptotic(u: np.ndarray) -> np.ndarray:
    # exp(u) E1(u) ~ (1/u) sum_k (-1)^k k! / u^k; eight terms suffice for
    # |u| >= 600 (next term below 1e-17 relative).
    r = 1.0 / u
    s = 1.0 + r * (-1.0 + r * (2.0 + r * (-6.0 + r * (24.0 + r * (
        -120.0 + r * (720.0 + r * (-5040.0)))))))
    return r * s

def _exp1_scaled(u: np.ndarray) -> np.ndarray:
    """exp(u) * E1(u) on the principal branch, stable for any |Re u|."""
    u = np.asarray(u, dtype=complex)
    flat = u.ravel()
    out = np.empty(flat.shape, dtype=complex)
    lo = flat.real < -_EXP1_CF_SWITCH
    hi = flat.real > _EXP1_CF_SWITCH
    mid = ~(lo | hi)
    if np.any(mid):
        um = flat[mid]
        out[mid] = np.exp(um) * special.exp1(um)
    if np.any(hi):
        out[hi] = _exp1_scaled_cf(flat[hi])
    if np.any(lo):
        out[lo] = _exp1_scaled_asymptotic(flat[lo])
    return out.reshape(u.shape)


def _nudged_edge(x: float, model: SpectralModel) -> float:
    # Keep the tail start strictly off the band centre; the closed-form tail
    # has a branch point there.
    gap = 1e-8 * max(model.d, 1.0)
    if abs(x - model.eps_plus) < gap:
        return model.eps_plus + gap
    return x


def _tail_transform(model: SpectralModel, start: float, tau: np.ndarray) -> np.ndarray:
    """(1/2*pi) Int_start^inf J(w) exp(-i*w*tau) dw for tau >= 0, closed form.

    Partial fractions put each Lorentzian pole term on the incomplete-gamma
    form exp(-i*start*tau) * exp(u) * E1(u) with u = i*(start - pole)*tau; when
    the integration ray passes below a pole (start left of the band centre)
    the principal branch of E1 needs a -2*pi*i*exp(u) correction.
    """
    g0, d, eps = model.gamma, model.d, model.eps_plus
    tau = np.asarray(tau, dtype=float)
    out = np.empty(tau.shape, dtype=complex)
    zero = tau == 0.0
    if np.any(zero):
        out[zero] = g0 * d / (2.0 * np.pi) * (
            0.5 * np.pi - np.arctan((start - eps) / d))
    pos = ~zero
    if np.any(pos):
        tp = tau[pos]
        phi = []
        for z in (eps + 1j * d, eps - 1j * d):
            u = 1j * (start - z) * tp
            val = _exp1_scaled(u)
            cut = (u.real < 0.0) & (u.imag < 0.0)
            if np.any(cut):
                corr = np.zeros(val.shape, dtype=complex)
                corr[cut] = np.exp(u[cut])
                val = val - 2j * np.pi * corr
            phi.append(val)
        pref = g0 * d / (4j * np.pi) * np.exp(-1j * start * tp)
        out[pos] = pref * (phi[0] - phi[1])
    return out


# ---------------------------------------------------------------------------
# occupation (noise) kernel


def _default_tol(model: SpectralModel, tol: Optional[float]) -> float:
    return 1e-10 * model.gamma ** 2 if tol is None else float(tol)


def noise_kernel(model: SpectralModel, tau: float,
                 tol: Optional[float] = None) -> complex:
    """Occupation kernel gt(tau) at a single time, by adaptive quadrature.

    The Fermi window mu +- 30 T is integrated with oscillatory-weighted
    adaptive quadrature (split at the band centre and at mu) and the
    unoccupied band beyond the window is added in closed form.

    Parameters
    ----------
    model:
        Lorentzian reservoir; the wide-band kernel has no pointwise values.
    tau:
        Time argument, any sign.
    tol:
        Absolute tolerance on the result; default 1e-10 * gamma**2.

    Raises
    ------
    QuadratureError
        If the accumulated error estimate exceeds ``tol``.
    KernelContractionError
        For the wide-band model.
    """
    _require_lorentzian(model, "noise kernel")
    if model.gamma == 0.0:
        return 0j
    tol = _default_tol(model, tol)
    t = float(tau)
    a = abs(t)
    T = model.temperature
    w1 = model.mu - _BAND_HALFWIDTH * T
    w2 = _nudged_edge(model.mu + _BAND_HALFWIDTH * T, model)

    def hole(w):
        # weight of the unoccupied part of the band
        return (spectral_density(model, w)
                * (1.0 - fermi(w, model.mu, T)) / (2.0 * np.pi))

    pts = sorted(p for p in (model.eps_plus, model.mu) if w1 < p < w2)
    edges = [w1, *pts, w2]
    nseg = len(edges) - 1
    band = 0j
    err = 0.0
    if a == 0.0:
        res = integrate.quad(hole, w1, w2, points=pts or None,
                             epsabs=0.25 * tol, epsrel=1e-13,
                             limit=400, full_output=1)
        band = res[0] + 0j
        err = res[1]
    else:
        for lo, hi in zip(edges[:-1], edges[1:]):
            kw = dict(wvar=a, epsabs=0.25 * tol / nseg, epsrel=1e-13,
                      limit=400, maxp1=120, full_output=1)
            re = integrate.quad(hole, lo, hi, weight="cos", **kw)
            im = integrate.quad(hole, lo, hi, weight="sin", **kw)
            band += re[0] - 1j * im[0]
            err += re[1] + im[1]
    split = model.gamma * model.d * np.exp(-_BAND_HALFWIDTH)
    if err + split > tol:
        raise QuadratureError(
            f"noise kernel at tau={tau!r}: error estimate {err + split:.3e} "
            f"exceeds tol={tol:.3e}", estimate=err + split)
    val = (memory_kernel(model, a) - band
           - _tail_transform(model, w2, np.asarray([a]))[0])
    return complex(np.conj(val)) if t < 0.0 else complex(val)


def _band_nodes(model: SpectralModel, w1: float, w2: float,
                tau_max: float, tol: float) -> tuple:
    # Panelled Gauss-Legendre over the Fermi window. Panel width resolves the
    # sharper of the Fermi edge (pi T) and the band width d; the per-panel
    # node count tracks the largest phase swing h * tau_max.
    h = 0.7 * min(np.pi * model.temperature, model.d)
    p = max(20, int(np.ceil(0.6 * h * tau_max)) + 12)
    if tol < 1e-10 * model.gamma ** 2:
        h *= 0.75
        p += 8
    cuts = sorted({w1, w2, *(c for c in (model.eps_plus, model.mu)
                             if w1 < c < w2)})
    xi, eta = np.polynomial.legendre.leggauss(p)
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        n = max(1, int(np.ceil((hi - lo) / h)))
        edges = np.linspace(lo, hi, n + 1)
        half = 0.5 * np.diff(edges)
        mid = 0.5 * (edges[:-1] + edges[1:])
        xs.append((mid[:, None] + half[:, None] * xi[None, :]).ravel())
        ws.append((half[:, None] * eta[None, :]).ravel())
    return np.concatenate(xs), np.concatenate(ws)


def _oscillatory_sum(tau: np.ndarray, x: np.ndarray,
                     coef: np.ndarray) -> np.ndarray:
    # sum_j coef_j exp(-i x_j tau), chunked to bound the phase matrix at
    # roughly 64 MB.
    out = np.empty(tau.shape, dtype=complex)
    flat = tau.ravel()
    res = out.ravel()
    step = max(1, int(4e6) // max(x.size, 1))
    for i in range(0, flat.size, step):
        blk = flat[i:i + step]
        res[i:i + step] = np.exp(-1j * np.outer(blk, x)) @ coef
    return out


def noise_kernel_table(model: SpectralModel, t: np.ndarray,
                       tol: Optional[float] = None) -> np.ndarray:
    """Occupation kernel gt sampled on a whole time grid.

    Same decomposition as :func:`noise_kernel` but with the Fermi window
    integrated on panelled Gauss-Legendre nodes shared by all times, which
    keeps the cost at one vectorised phase matrix instead of one adaptive
    quadrature per grid point. Cross-validated against the pointwise route
    in the test suite.
    """
    _require_lorentzian(model, "noise kernel")
    t = np.asarray(t, dtype=float)
    if model.gamma == 0.0:
        return np.zeros(t.shape, dtype=complex)
    tol = _default_tol(model, tol)
    split = model.gamma * model.d * np.exp(-_BAND_HALFWIDTH)
    if split > tol:
        raise QuadratureError(
            f"band window truncation alone contributes {split:.3e}, above "
            f"tol={tol:.3e}; the window half-width is fixed at 30 T",
            estimate=split)
    a = np.abs(t)
    T = model.temperature
    w1 = model.mu - _BAND_HALFWIDTH * T
    w2 = _nudged_edge(model.mu + _BAND_HALFWIDTH * T, model)
    x, wts = _band_nodes(model, w1, w2, float(a.max(initial=0.0)), tol)
    coef = (spectral_density(model, x) * (1.0 - fermi(x, model.mu, T))
            * wts / (2.0 * np.pi))
    val = (memory_kernel(model, a) - _oscillatory_sum(a, x, coef)
           - _tail_transform(model, w2, a))
    neg = t < 0.0
    if np.any(neg):
        val[neg] = np.conj(val[neg])
    return val


@dataclass(frozen=True)
class KernelSample:
    """Both reservoir kernels sampled on a common time grid."""

    t: np.ndarray
    memory: np.ndarray
    noise: np.ndarray


def sample_kernels(model: SpectralModel, t: np.ndarray,
                   tol: Optional[float] = None) -> KernelSample:
    """Sample g and gt on the grid ``t`` (Lorentzian models only)."""
    t = np.asarray(t, dtype=float)
    return KernelSample(t, memory_kernel_table(model, t),
                        noise_kernel_table(model, t, tol=tol))
