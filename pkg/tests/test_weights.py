"""Weight functions, smoothing quadrature, and the coherent-term kernels.

Frozen constants in this file were computed with the QUADPACK oracles in
``oracles.py`` and pinned; the tests assert both that the package matches
the live oracle and that neither side has drifted from the pinned value.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gibbslab.errors import ValidationError
from gibbslab.weights import (
    COHERENT_L1_LIMIT,
    FILTER_SQUARED_MASS,
    MAX_SPECTRAL_WIDTH,
    PHI_LIBRARY,
    GaussianFilter,
    TIME_KERNEL_ENVELOPE_SCALE,
    WeightFunction,
    balanced_gamma,
    coherent_pair_coefficient,
    coherent_sum_factor,
    coherent_time_envelope,
    coherent_time_kernel,
    coherent_time_kernel_l1,
    delocalised_limit_gamma,
    dissipator_gibbs_coefficient,
    kms_defect,
    kms_gamma,
    smoothed_weight,
    stationarity_identity_residual,
    tilt_balance_residual,
    unshifted_gamma,
)

import oracles

# ---------------------------------------------------------------------------
# Frozen oracle values (QUADPACK; see oracles.py for the integral forms)
# ---------------------------------------------------------------------------

SMOOTHED_AT_0P9 = {
    ("gaussian", -3.0): 0.038719586882804809,
    ("gaussian", 0.0): 1.2472810280607953,
    ("gaussian", 1.3): 0.25595960169591669,
    ("gaussian", 7.5): 9.346289561847868e-16,
    ("sech", -3.0): 3.2923135204550755,
    ("sech", 0.0): 1.6021036229621937,
    ("sech", 1.3): 0.70517636339410061,
    ("sech", 7.5): 0.0019509732135325273,
    ("exp_abs", -3.0): 0.45846303093182689,
    ("exp_abs", 0.0): 1.0777272527259762,
    ("exp_abs", 1.3): 0.28352498467413673,
    ("exp_abs", 7.5): 2.6726083141301835e-05,
}

PAIR_COEFFICIENT_AT_0P9 = {
    (1.0, -1.0): -0.16514020287520412j,
    (2.3, 1.1): -0.01986206667688525j,
    (-4.0, -3.2): 0.00093510123668170541j,
}

TIME_KERNEL_AT = (0.4, 0.9, 0.026149028951795081)

ENVELOPE_AT = (0.3, 0.9, 2.1751769049652379 - 0.60551204398646519j)

L1_TABLE = {
    4.0: 0.040937880408518063,
    2.0: 0.049162588531839281,
    1.0: 0.053361667821107676,
    0.5: 0.054832589342810073,
    0.25: 0.055246271532054803,
    0.125: 0.055353206359833346,
    0.0625: 0.055380172951430773,
}


# ---------------------------------------------------------------------------
# Weight families
# ---------------------------------------------------------------------------


@given(st.lists(st.floats(-60.0, 60.0), min_size=1, max_size=30))
def test_kms_weights_satisfy_detailed_balance(omegas):
    grid = np.asarray(omegas)
    for kind in ("glauber", "metropolis"):
        assert kms_defect(kms_gamma(kind), grid) < 1e-12


@given(st.lists(st.floats(-40.0, 40.0), min_size=1, max_size=30))
def test_delocalised_limit_weight_satisfies_detailed_balance(omegas):
    grid = np.asarray(omegas)
    for phi in PHI_LIBRARY:
        assert kms_defect(delocalised_limit_gamma(phi), grid) < 1e-12


def test_delocalised_limit_value():
    for phi in PHI_LIBRARY:
        w = delocalised_limit_gamma(phi)
        profile = PHI_LIBRARY[phi]
        for omega in (-2.0, 0.0, 0.7, 3.5):
            want = math.pi * math.exp(-0.5 * omega) * float(profile.fn(np.array([omega]))[0])
            assert float(w(omega)) == pytest.approx(want, rel=1e-14)


@given(st.floats(-30.0, 30.0), st.sampled_from(["gaussian", "sech", "exp_abs"]))
def test_balanced_weight_is_shifted_tilted_profile(omega, phi):
    sigma = 0.8
    w = balanced_gamma(phi, sigma)
    profile = PHI_LIBRARY[phi]
    want = math.exp(-0.5 * omega) * float(
        profile.fn(np.array([omega + sigma * sigma / 4.0]))[0]
    )
    assert float(w(omega)) == pytest.approx(want, rel=1e-12, abs=1e-300)


def test_weights_are_nonnegative_and_vectorized():
    grid = np.linspace(-20, 20, 101)
    for maker in (
        lambda: kms_gamma("glauber"),
        lambda: balanced_gamma("sech", 1.2),
        lambda: unshifted_gamma("gaussian", 0.7),
        lambda: delocalised_limit_gamma("exp_abs"),
    ):
        values = maker()(grid)
        assert values.shape == grid.shape
        assert np.all(values >= 0.0)
        assert np.all(np.isfinite(values))


def test_phi_profiles_are_even():
    grid = np.linspace(0.0, 15.0, 61)
    for profile in PHI_LIBRARY.values():
        assert np.allclose(profile.fn(grid), profile.fn(-grid), rtol=1e-13)


def test_unknown_names_rejected():
    with pytest.raises(ValidationError):
        kms_gamma("arrhenius")
    with pytest.raises(ValidationError):
        balanced_gamma("lorentzian", 1.0)


def test_bad_bandwidth_rejected():
    for bad in (0.0, -1.0, float("nan"), float("inf")):
        with pytest.raises(ValidationError):
            balanced_gamma("gaussian", bad)


# ---------------------------------------------------------------------------
# Smoothing quadrature
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("phi", ["gaussian", "sech", "exp_abs"])
def test_smoothed_weight_matches_quadpack(phi):
    w = balanced_gamma(phi, 0.9)
    for center in (-3.0, 0.0, 1.3, 7.5):
        frozen = SMOOTHED_AT_0P9[(phi, center)]
        live = oracles.smoothed_weight_quad(center, 0.9, w)
        assert live == pytest.approx(frozen, rel=1e-10)
        assert smoothed_weight(center, 0.9, w) == pytest.approx(frozen, rel=1e-10)


def test_smoothed_weight_balance_identity():
    """The tilted profile turns Gaussian smoothing into an exact symmetry."""
    w = balanced_gamma("gaussian", 1.1)
    for tau in (0.3, 1.0, 2.7, 6.0):
        h_plus = smoothed_weight(tau, 1.1, w)
        h_minus = smoothed_weight(-tau, 1.1, w)
        assert h_plus == pytest.approx(math.exp(-tau) * h_minus, rel=1e-11)


def test_tilt_balance_residual_flags_broken_weight():
    sigma = 1.0
    balanced = balanced_gamma("gaussian", sigma)
    broken = unshifted_gamma("gaussian", sigma)
    for zeta in (0.5, 1.5, 3.0):
        assert tilt_balance_residual(zeta, sigma, balanced) < 1e-11
        assert tilt_balance_residual(zeta, sigma, broken) > 1e-3


def test_spectral_width_guard():
    w = balanced_gamma("gaussian", 1.0)
    with pytest.raises(ValidationError):
        coherent_sum_factor(2.0 * MAX_SPECTRAL_WIDTH + 1.0, 1.0, w)


# ---------------------------------------------------------------------------
# Coherent pair coefficients
# ---------------------------------------------------------------------------


def test_pair_coefficient_matches_quadpack():
    w = balanced_gamma("gaussian", 0.9)
    for (nu, nup), frozen in PAIR_COEFFICIENT_AT_0P9.items():
        live = oracles.pair_coefficient_quad(nu, nup, 0.9, w)
        assert abs(live - frozen) < 1e-10 * abs(frozen)
        got = complex(coherent_pair_coefficient(nu, nup, 0.9, w))
        assert abs(got - frozen) < 1e-10 * abs(frozen)


def test_pair_coefficient_hermitian_symmetry():
    w = balanced_gamma("sech", 0.7)
    for nu, nup in ((1.3, -0.4), (2.0, 2.0), (-1.1, 0.6)):
        b = complex(coherent_pair_coefficient(nu, nup, 0.7, w))
        b_swapped = complex(coherent_pair_coefficient(nup, nu, 0.7, w))
        assert abs(b - b_swapped.conjugate()) < 1e-13 * max(abs(b), 1e-300)


def test_pair_coefficient_vanishes_on_diagonal():
    w = balanced_gamma("gaussian", 1.0)
    for nu in (-2.0, 0.0, 1.7):
        assert abs(complex(coherent_pair_coefficient(nu, nu, 1.0, w))) == 0.0


def test_dissipator_gibbs_coefficient_two_methods_agree():
    w = balanced_gamma("gaussian", 1.0)
    for tau, tau_prime in ((0.5, -0.5), (1.0, 0.25), (-2.0, 1.0)):
        closed = dissipator_gibbs_coefficient(tau, tau_prime, 1.0, w, method="closed_form")
        direct = dissipator_gibbs_coefficient(tau, tau_prime, 1.0, w, method="quadrature")
        assert closed == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_stationarity_identity_residual_balanced_vs_broken():
    sigma = 1.0
    balanced = balanced_gamma("gaussian", sigma)
    broken = unshifted_gamma("gaussian", sigma)
    worst_balanced = max(
        stationarity_identity_residual(t, tp, sigma, balanced)
        for t in (-1.0, 0.5, 2.0)
        for tp in (-0.5, 1.5)
    )
    assert worst_balanced < 1e-9
    worst_broken = max(
        stationarity_identity_residual(t, tp, sigma, broken)
        for t in (-1.0, 0.5, 2.0)
        for tp in (-0.5, 1.5)
        if t != tp
    )
    assert worst_broken > 1e-4


# ---------------------------------------------------------------------------
# Time-domain kernels
# ---------------------------------------------------------------------------


def test_time_kernel_matches_fourier_oracle():
    t, sigma, frozen = TIME_KERNEL_AT
    assert oracles.time_kernel_quad(t, sigma) == pytest.approx(frozen, rel=1e-12)
    assert float(coherent_time_kernel(t, sigma)) == pytest.approx(frozen, rel=1e-12)


def test_time_kernel_is_odd_and_positive_for_positive_times():
    grid = np.array([0.1, 0.4, 1.0, 2.5])
    plus = np.asarray(coherent_time_kernel(grid, 0.8))
    minus = np.asarray(coherent_time_kernel(-grid, 0.8))
    assert np.all(plus > 0.0)
    assert np.allclose(plus, -minus, rtol=1e-13)


def test_envelope_matches_tilted_fourier_oracle():
    s, sigma, frozen = ENVELOPE_AT
    w = balanced_gamma("gaussian", sigma)
    live = oracles.tilted_envelope_quad(s, sigma, w)
    assert abs(live - frozen) < 1e-10 * abs(frozen)
    got = complex(np.asarray(coherent_time_envelope(s, sigma, w)).ravel()[0])
    assert abs(got - frozen) < 1e-10 * abs(frozen)


def test_envelope_rejects_untiltable_weight():
    # e^{omega} gamma(omega) tends to a constant for the sech profile, so the
    # tilted transform does not exist and must be refused loudly
    w = balanced_gamma("sech", 0.9)
    with pytest.raises(ValidationError):
        coherent_time_envelope(0.3, 0.9, w)


def test_l1_table_and_limit():
    for sigma, frozen in L1_TABLE.items():
        live = oracles.time_kernel_l1_quad(sigma, TIME_KERNEL_ENVELOPE_SCALE)
        assert live == pytest.approx(frozen, rel=1e-10)
        assert coherent_time_kernel_l1(sigma) == pytest.approx(frozen, rel=1e-10)
    values = [L1_TABLE[s] for s in sorted(L1_TABLE, reverse=True)]
    assert all(b > a for a, b in zip(values[:-1], values[1:]))
    assert all(v < COHERENT_L1_LIMIT for v in values)
    assert COHERENT_L1_LIMIT == pytest.approx(math.sqrt(math.pi) / 32.0, rel=1e-15)


# ---------------------------------------------------------------------------
# Gaussian filter
# ---------------------------------------------------------------------------


def test_filter_squared_mass_is_pi():
    filt = GaussianFilter(0.7)
    grid = np.linspace(-60, 60, 400001)
    mass = np.trapezoid(filt.frequency_profile(grid) ** 2, grid)
    assert mass == pytest.approx(FILTER_SQUARED_MASS, rel=1e-12)
    assert FILTER_SQUARED_MASS == pytest.approx(math.pi, rel=1e-15)
    assert filt.frequency_profile_squared_mass() == pytest.approx(math.pi, rel=1e-12)


def test_filter_rejects_bad_bandwidth():
    for bad in (0.0, -2.0, float("nan")):
        with pytest.raises(ValidationError):
            GaussianFilter(bad)


def test_custom_weight_function_is_usable():
    w = WeightFunction(
        kind="unshifted_control",
        evaluate=lambda om: np.exp(-np.abs(np.asarray(om))),
        sigma=1.0,
    )
    assert float(w(0.0)) == 1.0
    assert float(w(2.0)) == pytest.approx(math.exp(-2.0), rel=1e-14)
