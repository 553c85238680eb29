"""Dissipator spectrum, DF-state classification and the Markovian criterion."""

import numpy as np
import pytest

from dfsim import (DensityVector, DFClass, build_Lt, classify_df_states,
                   markovian_criterion_check, spectrum)
from dfsim.liouville import PURE_LABELS


def test_spectrum_reference_point():
    spec = spectrum(build_Lt(0.3, 0.1))
    want = np.array([0.0, -0.8, -0.4, -0.4, -0.8, 0.0])
    assert np.max(np.abs(np.sort(spec.eigenvalues) - np.sort(want))) < 1e-14
    # the stationary population eigenvector is the (kappa, kappa_tilde) mixture
    l1 = spec.eigenvectors[:, 0]
    assert np.max(np.abs(l1 - np.array([0.75, 0.25, 0, 0, 0, 0]))) < 1e-14
    assert spec.physical == (True, False, False, False, False, True)
    assert not spec.defective
    assert spec.eigenvector_dimension == 6


def test_spectrum_defective_case():
    spec = spectrum(build_Lt(1.0, -1.0))
    assert spec.defective
    assert not spec.whole_space
    assert spec.eigenvector_dimension == 4
    assert np.max(np.abs(spec.eigenvalues)) < 1e-14
    report = classify_df_states(spec, 1.0, -1.0)
    assert report.kind is DFClass.NONE


def test_spectrum_whole_space():
    spec = spectrum(build_Lt(0.0, 0.0))
    assert spec.whole_space
    assert not spec.defective
    report = classify_df_states(spec, 0.0, 0.0)
    assert report.kind is DFClass.WHOLE_SPACE
    assert report.pure_labels == PURE_LABELS


def test_classification_ladder():
    cases = (
        (0.0, 0.5, DFClass.PURE, ("+", "d")),
        (0.5, 0.0, DFClass.PURE, ("v", "-")),
        (0.0, -0.5, DFClass.PURE, ("+", "d")),  # single negative rate still cancels
        (0.3, 0.1, DFClass.MIXED, ()),
        (0.3, -0.1, DFClass.NONE, ()),
        (-0.3, 0.1, DFClass.NONE, ()),
    )
    for kappa, kappa_tilde, kind, labels in cases:
        spec = spectrum(build_Lt(kappa, kappa_tilde))
        report = classify_df_states(spec, kappa, kappa_tilde)
        assert report.kind is kind, (kappa, kappa_tilde, report.kind)
        assert report.pure_labels == labels
        if kind is DFClass.MIXED:
            assert len(report.stationary) >= 1
            for state in report.stationary:
                assert state.is_physical()
                resid = build_Lt(kappa, kappa_tilde).entries @ state.components
                assert np.max(np.abs(resid)) < 1e-12


def test_mixed_stationary_state_is_rate_ratio():
    report = classify_df_states(spectrum(build_Lt(0.3, 0.1)), 0.3, 0.1)
    assert report.kind is DFClass.MIXED
    pops = np.real(report.stationary[0].components)
    assert pops[0] == pytest.approx(0.75)
    assert pops[1] == pytest.approx(0.25)


def test_random_pairs_match_numeric_eigensolver():
    rng = np.random.default_rng(42)
    mags = 10.0 ** rng.uniform(-3, 3, size=(500, 2))
    signs = rng.choice([-1.0, 1.0], size=(500, 2))
    for (mk, mkt), (sk, skt) in zip(mags, signs):
        kappa, kappa_tilde = sk * mk, skt * mkt
        # spectrum() raises if its closed form disagrees with numpy's solver
        spec = spectrum(build_Lt(kappa, kappa_tilde))
        numeric = np.sort(np.linalg.eigvals(build_Lt(kappa, kappa_tilde).entries).real)
        assert np.max(np.abs(numeric - np.sort(spec.eigenvalues))) \
            <= 1e-10 * max(1.0, abs(kappa), abs(kappa_tilde))


def test_markovian_criterion_agrees_with_classification():
    rng = np.random.default_rng(11)
    for _ in range(200):
        kappa, kappa_tilde = rng.uniform(-1, 1, size=2)
        if rng.random() < 0.3:
            kappa = 0.0
        if rng.random() < 0.3:
            kappa_tilde = 0.0
        spec = spectrum(build_Lt(kappa, kappa_tilde))
        report = classify_df_states(spec, kappa, kappa_tilde)
        df_labels = (PURE_LABELS if report.kind is DFClass.WHOLE_SPACE
                     else report.pure_labels)
        for label in PURE_LABELS:
            state = DensityVector.pure(label)
            assert markovian_criterion_check(state, kappa, kappa_tilde) \
                == (label in df_labels), (kappa, kappa_tilde, label)


def test_markovian_criterion_rejects_superpositions():
    state = DensityVector.superposition(np.sqrt(0.5), np.sqrt(0.5))
    assert not markovian_criterion_check(state, 0.5, 0.0)
    assert not markovian_criterion_check(state, 0.0, 0.5)
    # but it passes when nothing dissipates at all
    assert markovian_criterion_check(state, 0.0, 0.0)


def test_markovian_criterion_needs_pure_state():
    mixed = DensityVector(np.array([0.5, 0.5, 0, 0, 0, 0], dtype=complex))
    with pytest.raises(ValueError):
        markovian_criterion_check(mixed, 0.3, 0.1)


def test_density_vector_basics():
    for label in PURE_LABELS:
        state = DensityVector.pure(label)
        assert state.trace == pytest.approx(1.0)
        assert state.is_physical()
        mat = state.as_matrix()
        assert mat.shape == (4, 4)
        assert np.trace(mat).real == pytest.approx(1.0)
    sup = DensityVector.superposition(0.6, 0.8j)
    assert sup.is_physical()
    assert abs(sup.components[2] - 0.6 * np.conj(0.8j)) < 1e-12
    # unnormalized amplitudes are normalized on entry
    sup2 = DensityVector.superposition(3.0, 4.0)
    assert sup2.components[1].real == pytest.approx(0.36)


def test_density_vector_violations():
    bad_trace = DensityVector(np.array([0.5, 0.2, 0, 0, 0.1, 0.1], dtype=complex))
    assert "trace" in bad_trace.physicality_violation()
    neg_pop = DensityVector(np.array([1.2, -0.2, 0, 0, 0, 0], dtype=complex))
    assert neg_pop.physicality_violation() is not None
    # coherence larger than the populations allow breaks block positivity
    big_coh = DensityVector(np.array([0, 0.5, 0.6, 0.6, 0.5, 0], dtype=complex))
    assert big_coh.physicality_violation() is not None
    herm = DensityVector(np.array([0, 0.5, 0.1j, 0.1j, 0.5, 0], dtype=complex))
    assert herm.physicality_violation() is not None
    with pytest.raises(ValueError):
        bad_trace.validate()


def test_generator_preserves_trace_and_matches_hand_values():
    L = build_Lt(0.3, 0.1).entries
    # the trace reads off the population rows; their columns must cancel
    pop_rows = L[[0, 1, 4, 5], :]
    assert np.max(np.abs(pop_rows.sum(axis=0))) < 1e-15
    # loss channel empties the coupled level into the vacancy slot
    rho = DensityVector.pure("+").components
    flow = L @ rho
    assert flow[0] == pytest.approx(2.0 * 0.3)
    assert flow[1] == pytest.approx(-2.0 * 0.3)
    # coherence decays at kappa + kappa_tilde
    spec = spectrum(build_Lt(0.3, 0.1))
    assert L[2, 2] == pytest.approx(-0.4)
    assert spec.eigenvalues[2] == pytest.approx(-0.4)
