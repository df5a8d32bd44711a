"""Frequency-resolved operator splitting against spectral projectors."""

from __future__ import annotations

import numpy as np
import pytest

from gibbslab.bohr import (
    BohrSpectrum,
    adjoint_pairing_residual,
    bohr_spectrum,
    decompose,
)
from gibbslab.errors import ValidationError
from gibbslab.models import (
    benchmark_models,
    oscillator_model,
    qubit_model,
    random_model,
    torus_model,
)
from gibbslab.operator_core import commutator, dagger

import oracles


def test_qubit_split_is_raising_and_lowering():
    model = qubit_model()
    dec = decompose(model.jumps[0], model.eigensystem())
    assert list(dec.frequencies) == [-1.0, 1.0]
    # the flip operator splits into the two off-diagonal units
    lowering = dec.component(-1.0)
    raising = dec.component(1.0)
    assert np.linalg.norm(lowering + raising - model.jumps[0]) < 1e-14
    assert np.linalg.norm(lowering @ lowering) < 1e-14
    assert np.linalg.norm(raising @ raising) < 1e-14


def test_spectrum_contains_zero_and_negation_closed():
    for model in benchmark_models():
        spec = bohr_spectrum(model.eigensystem())
        freqs = spec.frequencies
        assert 0.0 in freqs
        assert np.allclose(freqs, -freqs[::-1], atol=1e-12)
        perm = spec.negation_index()
        assert np.allclose(freqs[perm], -freqs, atol=1e-12)


@pytest.mark.parametrize("model", benchmark_models(), ids=lambda m: m.model_id)
def test_completeness_and_eigenoperator_identity(model):
    system = model.eigensystem()
    p = model.hamiltonian
    for jump in model.jumps:
        dec = decompose(jump, system)
        scale = np.linalg.norm(jump)
        # cluster representatives are means, so the commutator identity holds
        # up to the cluster diameter on wide spectra
        slack = 10.0 * dec.spectrum.cluster_tol + 1e-11
        assert np.linalg.norm(dec.total() - jump) < 1e-11 * scale
        for nu, comp in zip(dec.frequencies, dec.components):
            defect = np.linalg.norm(commutator(p, comp) - nu * comp)
            assert defect < slack * scale


@pytest.mark.parametrize("model", benchmark_models(), ids=lambda m: m.model_id)
def test_components_match_projector_oracle(model):
    system = model.eigensystem()
    jump = model.jumps[0]
    dec = decompose(jump, system)
    slack = 10.0 * dec.spectrum.cluster_tol + 1e-10
    # merge the oracle's raw differences with the same diameter the package
    # used, so near-degenerate pairs land in the same bucket on both sides
    reference = oracles.bohr_components_projectors(
        jump, model.hamiltonian, tol=max(dec.spectrum.cluster_tol, 1e-9)
    )
    for nu, comp in zip(dec.frequencies, dec.components):
        closest = min(reference, key=lambda k: abs(k - nu))
        assert abs(closest - nu) < slack
        assert np.linalg.norm(comp - reference[closest]) < 1e-10


def test_degenerate_blocks_are_resolved_covariantly():
    """Components over a degenerate spectrum equal whole-block projections."""
    model = torus_model(6)  # paired momenta give genuinely degenerate levels
    energies = np.linalg.eigvalsh(model.hamiltonian)
    gaps = np.diff(energies)
    assert np.min(gaps) < 1e-12, "test premise: the spectrum must be degenerate"
    reference = oracles.bohr_components_projectors(model.jumps[0], model.hamiltonian)
    dec = decompose(model.jumps[0], model.eigensystem())
    for nu, comp in zip(dec.frequencies, dec.components):
        closest = min(reference, key=lambda k: abs(k - nu))
        assert np.linalg.norm(comp - reference[closest]) < 1e-10


def test_adjoint_components_live_at_negated_frequencies():
    for model in benchmark_models():
        system = model.eigensystem()
        for jump in model.jumps:
            residual = adjoint_pairing_residual(jump, system)
            assert residual < 1e-12 * max(1.0, np.linalg.norm(jump))


def test_adjoint_pairing_componentwise():
    model = random_model(5, seed=21)
    system = model.eigensystem()
    jump = model.jumps[0]
    dec = decompose(jump, system)
    dec_dag = decompose(dagger(jump), system)
    for nu, comp in zip(dec.frequencies, dec.components):
        assert np.linalg.norm(dagger(comp) - dec_dag.component(-nu)) < 1e-11


def test_cluster_tolerance_merges_near_degenerate_frequencies():
    h = np.diag([0.0, 1.0, 2.0 + 3e-7])
    wide = bohr_spectrum(h, cluster_tol=1e-6)
    fine = bohr_spectrum(h, cluster_tol=1e-9)
    assert wide.size < fine.size
    assert wide.max_cluster_diameter <= 1e-6
    assert wide.max_cluster_diameter >= 2e-7


def test_component_lookup_and_dropping():
    model = oscillator_model(4)
    system = model.eigensystem()
    dec = decompose(model.jumps[0], system)  # pure lowering-type jump
    spec = dec.spectrum
    assert dec.size < spec.size  # most frequencies carry nothing
    present = set(np.round(dec.frequencies, 12))
    for freq in spec.frequencies:
        comp = dec.component(float(freq))
        if np.round(freq, 12) not in present:
            assert np.linalg.norm(comp) == 0.0
    dense = dec.dense_components()
    assert dense.shape == (spec.size, 4, 4)
    assert np.linalg.norm(dense.sum(axis=0) - model.jumps[0]) < 1e-11


def test_unknown_frequency_is_rejected():
    spec = bohr_spectrum(np.diag([0.0, 1.0]))
    with pytest.raises(ValidationError):
        spec.index_of(0.37)


def test_spectrum_pair_index_consistency():
    model = random_model(4, seed=13)
    spec = bohr_spectrum(model.eigensystem())
    energies = spec.eigenvalues
    for i in range(4):
        for j in range(4):
            nu = spec.frequencies[spec.pair_index[i, j]]
            assert abs((energies[i] - energies[j]) - nu) <= max(
                spec.cluster_tol, 1e-12
            )


def test_negative_cluster_tol_rejected():
    with pytest.raises(ValidationError):
        bohr_spectrum(np.diag([0.0, 1.0]), cluster_tol=-1.0)
