"""Liouville-space generator, its spectrum, and decoherence-free state search.

The reduced density matrix lives in a 6-dimensional operator basis fixed by
particle-number superselection:

    index 0: |v><v|   1: |+><+|   2: |+><-|   3: |-><+|   4: |-><-|   5: |d><d|

where |v> is the vacuum, |d> the doubly occupied state and |+-> the symmetric
and antisymmetric single-particle superpositions. The dissipator couples the
populations pairwise ({v,+} and {-,d} blocks) and damps the coherences with
-(kappa + kappa_tilde); its spectrum is available in closed form, which the
numeric eigensolver cross-checks. A state is decoherence-free when the
dissipator annihilates it; which states qualify depends only on which of the
two rates is active (and their signs), so the classification is a small case
ladder over (kappa, kappa_tilde).
"""

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

TRACE_TOL = 1e-10
POSITIVITY_TOL = 1e-10
# |eigenvalue| below 1e-10 * rate scale counts as zero
_ZERO_REL = 1e-10
_ZERO_FLOOR = 1e-30

PURE_LABELS = ("v", "+", "-", "d")


def _rate_zero_tol(kappa: float, kappa_tilde: float) -> float:
    return _ZERO_REL * max(abs(kappa), abs(kappa_tilde), _ZERO_FLOOR)


@dataclass(frozen=True)
class DensityVector:
    """Density matrix in the 6-component superselected basis."""

    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=complex)
        if c.shape != (6,):
            raise ValueError(f"expected 6 components, got shape {c.shape}")
        object.__setattr__(self, "components", c)

    @classmethod
    def pure(cls, label: str) -> "DensityVector":
        if label not in PURE_LABELS:
            raise ValueError(f"unknown basis label {label!r}; use one of {PURE_LABELS}")
        c = np.zeros(6, dtype=complex)
        c[{"v": 0, "+": 1, "-": 4, "d": 5}[label]] = 1.0
        return cls(c)

    @classmethod
    def superposition(cls, alpha: complex, beta: complex) -> "DensityVector":
        """Projector onto alpha|+> + beta|->; coefficients are normalized."""
        norm = abs(alpha) ** 2 + abs(beta) ** 2
        if norm <= 0.0:
            raise ValueError("superposition coefficients are both zero")
        alpha, beta = alpha / np.sqrt(norm), beta / np.sqrt(norm)
        c = np.zeros(6, dtype=complex)
        c[1] = abs(alpha) ** 2
        c[2] = alpha * np.conj(beta)
        c[3] = np.conj(c[2])
        c[4] = abs(beta) ** 2
        return cls(c)

    @property
    def trace(self) -> float:
        return float(np.real(self.components[[0, 1, 4, 5]].sum()))

    def as_matrix(self) -> np.ndarray:
        """4x4 density matrix in the ordered basis (|v>, |+>, |->, |d>)."""
        c = self.components
        m = np.zeros((4, 4), dtype=complex)
        m[0, 0], m[1, 1], m[2, 2], m[3, 3] = c[0], c[1], c[4], c[5]
        m[1, 2], m[2, 1] = c[2], c[3]
        return m

    def physicality_violation(self, trace_tol: float = TRACE_TOL,
                              pos_tol: float = POSITIVITY_TOL) -> Optional[str]:
        """Name of the first violated density-matrix invariant, or None."""
        c = self.components
        diag = c[[0, 1, 4, 5]]
        if np.max(np.abs(diag.imag)) > trace_tol:
            return "diagonal components are not real"
        if abs(c[3] - np.conj(c[2])) > trace_tol:
            return "rho_-+ is not the conjugate of rho_+-"
        if abs(self.trace - 1.0) > trace_tol:
            return f"trace is {self.trace:.12g}, not 1"
        if np.min(diag.real) < -pos_tol:
            return "a population is negative"
        # single-particle 2x2 block must be positive semidefinite
        half = 0.5 * (c[1].real + c[4].real)
        disc = np.hypot(0.5 * (c[1].real - c[4].real), abs(c[2]))
        if half - disc < -pos_tol:
            return "the single-particle block has a negative eigenvalue"
        return None

    def validate(self, trace_tol: float = TRACE_TOL,
                 pos_tol: float = POSITIVITY_TOL) -> "DensityVector":
        why = self.physicality_violation(trace_tol, pos_tol)
        if why is not None:
            raise ValueError(f"not a physical density matrix: {why}")
        return self

    def is_physical(self, trace_tol: float = TRACE_TOL,
                    pos_tol: float = POSITIVITY_TOL) -> bool:
        return self.physicality_violation(trace_tol, pos_tol) is None


@dataclass(frozen=True)
class LiouvilleMatrix:
    kappa: float
    kappa_tilde: float
    entries: np.ndarray


def build_Lt(kappa: float, kappa_tilde: float) -> LiouvilleMatrix:
    """Dissipator matrix at one instant; negative rates are allowed."""
    k, kt = float(kappa), float(kappa_tilde)
    m = np.zeros((6, 6))
    block = np.array([[-2.0 * kt, 2.0 * k], [2.0 * kt, -2.0 * k]])
    m[0:2, 0:2] = block
    m[4:6, 4:6] = block
    m[2, 2] = m[3, 3] = -(k + kt)
    return LiouvilleMatrix(kappa=k, kappa_tilde=kt, entries=m)


@dataclass(frozen=True)
class LiouvilleSpectrum:
    """Closed-form eigensystem of the dissipator.

    Eigenvalues come ordered as (0, -2s, -s, -s, -2s, 0) with s = kappa +
    kappa_tilde; eigenvectors are the columns of ``eigenvectors``. In the
    defective case (s = 0 with a nonzero rate) the population blocks are
    Jordan blocks and only four independent eigenvectors exist; the stored
    columns then span that four-dimensional eigenspace (columns 1 and 5
    duplicate columns 0 and 4).
    """

    kappa: float
    kappa_tilde: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    physical: Tuple[bool, ...]
    defective: bool
    whole_space: bool
    eigenvector_dimension: int


def spectrum(L: LiouvilleMatrix) -> LiouvilleSpectrum:
    """Analytic eigenpairs of the dissipator, cross-checked numerically."""
    k, kt = L.kappa, L.kappa_tilde
    s = k + kt
    tol = _rate_zero_tol(k, kt)
    degenerate = abs(s) <= tol
    whole = abs(k) <= tol and abs(kt) <= tol
    defective = degenerate and not whole

    vals = np.array([0.0, -2.0 * s, -s, -s, -2.0 * s, 0.0])
    vecs = np.zeros((6, 6), dtype=complex)
    r2 = 1.0 / np.sqrt(2.0)
    if degenerate:
        # population blocks are Jordan blocks; only (1,-1) survives in each
        vecs[0:2, 0] = (r2, -r2)
        vecs[4:6, 4] = (r2, -r2)
        vecs[:, 1] = vecs[:, 0]
        vecs[:, 5] = vecs[:, 4]
    else:
        vecs[0:2, 0] = (k / s, kt / s)
        vecs[0:2, 1] = (-r2, r2)
        vecs[4:6, 4] = (-r2, r2)
        vecs[4:6, 5] = (k / s, kt / s)
    vecs[2, 2] = 1.0
    vecs[3, 3] = 1.0

    # generic numeric eigensolver must reproduce the closed-form values
    numeric = np.sort(np.linalg.eigvals(L.entries).real)
    check_tol = 1e-10 * max(1.0, abs(k), abs(kt))
    if np.max(np.abs(numeric - np.sort(vals))) > check_tol:
        raise RuntimeError("closed-form spectrum disagrees with the numeric "
                           "eigensolver; dissipator matrix is malformed")
    resid = L.entries @ vecs - vecs * vals
    if np.max(np.abs(resid)) > check_tol:
        raise RuntimeError("closed-form eigenvectors fail the residual check")

    physical = tuple(DensityVector(vecs[:, i]).is_physical() for i in range(6))
    dim = 6 if whole else (4 if defective else 6)
    return LiouvilleSpectrum(kappa=k, kappa_tilde=kt, eigenvalues=vals,
                             eigenvectors=vecs, physical=physical,
                             defective=defective, whole_space=whole,
                             eigenvector_dimension=dim)


class DFClass(enum.Enum):
    PURE = "pure"
    MIXED = "mixed"
    NONE = "none"
    WHOLE_SPACE = "whole-space"


@dataclass(frozen=True)
class DFReport:
    kind: DFClass
    pure_labels: Tuple[str, ...]
    stationary: Tuple[DensityVector, ...]

    def describe(self) -> str:
        if self.kind is DFClass.WHOLE_SPACE:
            return "whole space (all states decoherence-free)"
        if self.kind is DFClass.NONE:
            return "none"
        if self.kind is DFClass.PURE:
            inner = ", ".join(f"|{n}>" for n in self.pure_labels)
            return f"pure {{{inner}}}"
        return "mixed stationary states only"


def classify_df_states(spec: LiouvilleSpectrum, kappa: float,
                       kappa_tilde: float) -> DFReport:
    """Physical states annihilated by the dissipator at these rates.

    Case ladder: both rates zero -> whole space; exactly one rate active ->
    the two pure states annihilated by the surviving jump operator; both
    active with both positive -> only the mixed stationary combinations of
    the zero-eigenvectors; both active otherwise (one negative, including
    the defective s = 0 case) -> nothing physical.
    """
    tol = _rate_zero_tol(kappa, kappa_tilde)
    k_off = abs(kappa) <= tol
    kt_off = abs(kappa_tilde) <= tol
    if k_off and kt_off:
        states = tuple(DensityVector.pure(n) for n in PURE_LABELS)
        return DFReport(DFClass.WHOLE_SPACE, PURE_LABELS, states)
    if k_off:
        # only the gain channel survives; its jump operator annihilates
        # |+> and |d>
        labels = ("+", "d")
    elif kt_off:
        # only the loss channel survives, annihilating |v> and |->
        labels = ("v", "-")
    else:
        # both channels active: the only candidates are the stationary
        # mixtures along the zero-eigenvectors, physical iff both rates
        # are positive
        zero = np.abs(spec.eigenvalues) <= tol
        cands = [DensityVector(spec.eigenvectors[:, i])
                 for i in np.flatnonzero(zero)]
        phys = tuple(c for c in cands if c.is_physical())
        if spec.defective or not phys:
            return DFReport(DFClass.NONE, (), ())
        return DFReport(DFClass.MIXED, (), phys)
    states = tuple(DensityVector.pure(n) for n in labels)
    return DFReport(DFClass.PURE, labels, states)


# jump operator in the ordered 4-basis (|v>, |+>, |->, |d>): the loss channel
# maps |+> -> |v> and |d> -> |->; its adjoint is the gain channel
_A_PLUS = np.zeros((4, 4))
_A_PLUS[0, 1] = 1.0
_A_PLUS[2, 3] = 1.0
# distinct sentinel weights make the degeneracy condition generic
_SENTINEL_WEIGHTS = (1.3, 0.7)
_EIG_TOL = 1e-10


def _pure_state_vector(state: DensityVector) -> np.ndarray:
    m = state.as_matrix()
    vals, vecs = np.linalg.eigh(m)
    if vals[-1] < 1.0 - 1e-8 or np.sum(vals > 1e-8) > 1:
        raise ValueError("state is mixed; the eigenstate criterion applies "
                         "to pure states only")
    return vecs[:, -1]


def markovian_criterion_check(state: DensityVector, kappa: float,
                              kappa_tilde: float) -> bool:
    """Degenerate-eigenstate test against the active jump operators.

    True iff the pure state is an eigenstate of every active operator (the
    loss channel when kappa is nonzero, the gain channel when kappa_tilde
    is) and, with distinct generic weights a_alpha, sum a_alpha F^dag F maps
    it onto sum a_alpha |c_alpha|^2 times itself. Must agree with
    classify_df_states on all pure states.
    """
    state.validate()
    psi = _pure_state_vector(state)
    tol = _rate_zero_tol(kappa, kappa_tilde)
    ops = []
    if abs(kappa) > tol:
        ops.append(_A_PLUS)
    if abs(kappa_tilde) > tol:
        ops.append(_A_PLUS.T)
    if not ops:
        return True
    eigvals = []
    for op in ops:
        image = op @ psi
        c = np.vdot(psi, image)
        if np.linalg.norm(image - c * psi) > _EIG_TOL:
            return False
        eigvals.append(c)
    weighted = np.zeros((4, 4), dtype=complex)
    target = 0.0
    for op, c, a in zip(ops, eigvals, _SENTINEL_WEIGHTS):
        weighted += a * (op.T @ op)
        target += a * abs(c) ** 2
    return bool(np.linalg.norm(weighted @ psi - target * psi) <= _EIG_TOL)
