"""Operator Fourier transforms and the frequency-overlap coupling table.

The Gaussian-filtered jump operator at probe frequency ``omega`` is the
frequency-profile-weighted sum of Bohr components,

    A_f(omega) = sum_nu fhat_sigma(omega - nu) A_nu,

equivalently the time integral ``(2 pi)^{-1/2} integral f_sigma(t)
e^{iPt} A e^{-iPt} e^{-i omega t} dt``, which this module also evaluates
directly on a truncated time grid as an independent cross-check.

The overlap table collects the couplings

    G(nu, nu') = integral gamma(omega) fhat(omega - nu) fhat(omega - nu') domega
               = (sqrt(pi)/sigma) e^{-(nu - nu')^2/(4 sigma^2)} H((nu + nu')/2),

where ``H`` is the Gaussian-smoothed weight.  The table is real symmetric and
positive semidefinite (it is the Gram matrix of the functions
``sqrt(gamma) fhat(. - nu)``); its diagonal converges to
``pi * gamma(nu)`` as ``sigma -> 0`` -- the factor ``pi`` being the squared
mass of the frequency profile -- while off-diagonal entries die off at the
Gaussian rate ``e^{-gap^2/(4 sigma^2)}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bohr import BohrDecomposition, BohrSpectrum
from .errors import ValidationError
from .weights import (
    DEFAULT_RULE,
    GaussianFilter,
    MAX_SPECTRAL_WIDTH,
    ORACLE_RULE,
    QuadratureRule,
    WeightFunction,
    smoothed_weight_table,
)

__all__ = [
    "OftEvaluation",
    "OverlapTable",
    "oft_eval",
    "oft_eval_time_quadrature",
    "overlap_table",
    "delocalisation_profile",
]

# Exponent cap for the Gaussian pair factor: pairs with
# (gap/(2 sigma))^2 above this contribute below 1e-87 relatively and are
# skipped outright.
_PAIR_EXPONENT_CAP = 200.0

# Number of table entries re-derived by direct definitional quadrature at
# construction time (a standing regression check).
_CROSS_CHECK_SAMPLES = 12
_CROSS_CHECK_TOL = 1e-8


@dataclass(frozen=True)
class OftEvaluation:
    """A filtered jump operator at one probe frequency.

    Attributes:
        omega: probe frequency.
        sigma: filter bandwidth.
        matrix: the filtered operator in the original basis.
        source: the Bohr decomposition it was assembled from.
    """

    omega: float
    sigma: float
    matrix: np.ndarray
    source: BohrDecomposition

    def recomputation_defect(self) -> float:
        """Frobenius distance to a fresh reassembly from the same components."""
        fresh = oft_eval(self.source, self.omega, self.sigma)
        return float(np.linalg.norm(self.matrix - fresh.matrix))


def oft_eval(source: BohrDecomposition, omega: float, sigma: float) -> OftEvaluation:
    """Assemble the filtered operator ``sum_nu fhat(omega - nu) A_nu``."""
    if not (np.isfinite(omega)):
        raise ValidationError(f"probe frequency must be finite, got {omega!r}")
    filt = GaussianFilter(sigma)
    weights = filt.frequency_profile(omega - source.frequencies)
    matrix = np.tensordot(weights, source.components, axes=(0, 0))
    return OftEvaluation(omega=float(omega), sigma=float(sigma), matrix=matrix, source=source)


def oft_eval_time_quadrature(
    hamiltonian_eigensystem,
    operator: np.ndarray,
    omega: float,
    sigma: float,
    *,
    time_span_factor: float = 12.0,
    n_nodes: int = 4096,
) -> np.ndarray:
    """Filtered operator via the time-domain definition, as a cross-check.

    Evaluates ``(2 pi)^{-1/2} integral f_sigma(t) e^{iPt} A e^{-iPt}
    e^{-i omega t} dt`` by trapezoid on ``|t| <= time_span_factor / sigma``.
    The Heisenberg phases are applied in the eigenbasis, where they are
    elementwise ``e^{i (E_a - E_b) t}`` factors.
    """
    if n_nodes < 512:
        raise ValidationError(f"time grid needs at least 512 nodes, got {n_nodes}")
    system = hamiltonian_eigensystem
    filt = GaussianFilter(sigma)
    a_eig = system.to_eigenbasis(np.asarray(operator, dtype=np.complex128))
    energies = system.eigenvalues
    diff = energies[:, None] - energies[None, :]
    span = time_span_factor / sigma
    ts = np.linspace(-span, span, int(n_nodes))
    envelope = filt.time_profile(ts) * np.exp(-1j * float(omega) * ts)
    # Accumulate sum_t w_t envelope(t) * exp(i diff t) elementwise; the phase
    # matrix is rank-one in exponent so it factors through an outer product.
    phase = np.exp(1j * np.multiply.outer(ts, diff))
    trapezoid_w = np.full(ts.size, ts[1] - ts[0])
    trapezoid_w[0] *= 0.5
    trapezoid_w[-1] *= 0.5
    kernel = np.tensordot(trapezoid_w * envelope, phase, axes=(0, 0))
    out_eig = kernel * a_eig / math.sqrt(2.0 * math.pi)
    return system.from_eigenbasis(out_eig)


@dataclass(frozen=True)
class OverlapTable:
    """Symmetric coupling table ``G(nu, nu')`` over a Bohr spectrum.

    Attributes:
        spectrum: the Bohr spectrum indexing rows and columns.
        values: real symmetric ``(m, m)`` array of couplings.
        sigma: filter bandwidth.
        weight: the weight function integrated against.
        cross_check_defect: worst relative disagreement of the sampled
            entries against direct definitional quadrature (recorded at
            construction).
    """

    spectrum: BohrSpectrum
    values: np.ndarray
    sigma: float
    weight: WeightFunction
    cross_check_defect: float = 0.0

    def entry(self, nu: float, nu_prime: float) -> float:
        i = self.spectrum.index_of(nu)
        j = self.spectrum.index_of(nu_prime)
        return float(self.values[i, j])

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.T)))

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the symmetrised table (PSD diagnostic)."""
        sym = 0.5 * (self.values + self.values.T)
        return float(np.linalg.eigvalsh(sym)[0])

    def recomputation_defect(self, *, rule: QuadratureRule = DEFAULT_RULE) -> float:
        """Max absolute deviation from a freshly built table."""
        fresh = overlap_table(
            self.spectrum, self.weight, self.sigma, rule=rule, cross_check=False
        )
        return float(np.max(np.abs(self.values - fresh.values)))


def _definitional_entry(
    nu: float,
    nu_prime: float,
    weight: WeightFunction,
    sigma: float,
) -> float:
    """One coupling by direct adaptive quadrature of the definition.

    Uses QUADPACK (a different algorithm and code path from the table's
    Gauss-Hermite/panel evaluation), on a window wide enough to hold both
    the filter pair's hull and the weight's own body -- tilted weights can
    pull the product's mass well outside the filter hull.  Anchor points at
    the frequencies, the midpoint, the origin, and the weight's breakpoints
    keep the adaptive subdivision from overlooking a narrow peak.
    """
    from scipy.integrate import quad

    filt = GaussianFilter(sigma)

    def integrand(w: float) -> float:
        arg = np.array([w, w - nu, w - nu_prime])
        return float(
            weight(arg[:1])[0]
            * filt.frequency_profile(arg[1:2])[0]
            * filt.frequency_profile(arg[2:3])[0]
        )

    pad = ORACLE_RULE.window_radius * sigma + 60.0
    lo = min(nu, nu_prime, 0.0) - pad
    hi = max(nu, nu_prime, 0.0) + pad
    anchors = {nu, nu_prime, 0.5 * (nu + nu_prime), 0.0}
    anchors.update(float(b) for b in weight.breakpoints)
    points = sorted(a for a in anchors if lo < a < hi)
    value, _, info, *tail = quad(
        integrand,
        lo,
        hi,
        points=points,
        limit=400,
        epsabs=1e-300,
        epsrel=1e-12,
        full_output=True,
    )
    if tail:  # non-empty only when QUADPACK reports a failure message
        raise ValidationError(
            f"definitional quadrature failed for pair ({nu:g}, {nu_prime:g}): {tail[0]}"
        )
    return float(value)


def overlap_table(
    spectrum: BohrSpectrum,
    weight: WeightFunction,
    sigma: float,
    *,
    rule: QuadratureRule = DEFAULT_RULE,
    cross_check: bool = True,
) -> OverlapTable:
    """Build the full coupling table over a Bohr spectrum.

    Entries are assembled from the smoothed weight,
    ``(sqrt(pi)/sigma) e^{-gap^2/(4 sigma^2)} H(midpoint)``; pairs whose
    Gaussian factor is below ``e^{-200}`` are left at zero.  A deterministic
    sample of entries (extreme and central pairs) is re-derived by direct
    definitional quadrature; disagreement beyond ``1e-8`` relative raises,
    signalling a regression in either path.
    """
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise ValidationError(f"bandwidth must be a finite positive number, got {sigma!r}")
    freqs = spectrum.frequencies
    m = freqs.size
    # The representability constraint is on exponentials of single
    # frequencies, e^{+-nu/2}; the largest |nu| equals the Hamiltonian's
    # spectral width (the frequency list is symmetric about zero).
    width = float(max(abs(freqs[0]), abs(freqs[-1]))) if m else 0.0
    if width > MAX_SPECTRAL_WIDTH:
        raise ValidationError(
            f"largest Bohr frequency {width:.3g} exceeds the supported "
            f"range {MAX_SPECTRAL_WIDTH:g}"
        )

    gaps = freqs[:, None] - freqs[None, :]
    exponents = np.square(gaps) / (4.0 * sigma * sigma)
    live = exponents <= _PAIR_EXPONENT_CAP
    mids = 0.5 * (freqs[:, None] + freqs[None, :])

    # Upper triangle (including diagonal) of live pairs; mirror afterwards.
    iu, ju = np.nonzero(np.triu(live))
    centers = mids[iu, ju]
    uniq_centers, inverse = np.unique(centers, return_inverse=True)
    h_vals = smoothed_weight_table(weight, sigma, uniq_centers, rule=rule)

    values = np.zeros((m, m))
    front = math.sqrt(math.pi) / sigma
    values[iu, ju] = front * np.exp(-exponents[iu, ju]) * h_vals[inverse]
    lower = np.tril_indices(m, k=-1)
    values[lower] = values.T[lower]

    defect = 0.0
    if cross_check and m:
        vmax = float(np.max(np.abs(values)))
        flat_vals = np.abs(values.ravel())
        eligible = np.nonzero(flat_vals >= max(vmax, 1e-300) * 1e-30)[0]
        order = eligible[np.argsort(flat_vals[eligible], kind="stable")]
        take = np.unique(
            np.linspace(0, order.size - 1, min(_CROSS_CHECK_SAMPLES, order.size)).astype(int)
        )
        pairs = {divmod(int(order[t]), m) for t in take}
        pairs |= {(i, i) for i in (0, m // 2, m - 1)}
        for i, j in sorted(pairs):
            direct = _definitional_entry(float(freqs[i]), float(freqs[j]), weight, sigma)
            scale = max(abs(values[i, j]), abs(direct), 1e-300)
            rel = abs(values[i, j] - direct) / scale
            if max(abs(direct), abs(values[i, j])) < max(vmax, 1e-300) * 1e-30:
                rel = 0.0  # both sides negligible relative to the table scale
            defect = max(defect, rel)
        if defect > _CROSS_CHECK_TOL:
            raise ValidationError(
                f"overlap table disagrees with definitional quadrature by "
                f"{defect:.3e} relative (above {_CROSS_CHECK_TOL:g}); "
                "one of the evaluation paths has regressed"
            )

    return OverlapTable(
        spectrum=spectrum,
        values=values,
        sigma=float(sigma),
        weight=weight,
        cross_check_defect=defect,
    )


def delocalisation_profile(
    spectrum: BohrSpectrum,
    phi,
    sigmas,
    *,
    rule: QuadratureRule = DEFAULT_RULE,
) -> dict:
    """Track the coupling table's approach to its small-bandwidth limit.

    Rebuilds the balanced weight at every bandwidth (its argument shift is
    bandwidth-dependent) and records, per bandwidth, the worst relative
    deviation of diagonal entries from the delocalised-limit weight
    ``pi e^{-nu/2} phi(nu)`` and the largest off-diagonal entry.
    """
    from .weights import balanced_gamma, delocalised_limit_gamma

    limit_weight = delocalised_limit_gamma(phi)
    freqs = spectrum.frequencies
    target = limit_weight(freqs)
    rows = []
    for s in sigmas:
        w = balanced_gamma(phi, float(s))
        table = overlap_table(spectrum, w, float(s), rule=rule, cross_check=False)
        diag = np.diag(table.values)
        rel = np.abs(diag - target) / np.maximum(np.abs(target), 1e-300)
        off = table.values - np.diag(diag)
        rows.append(
            {
                "sigma": float(s),
                "max_diagonal_deviation": float(np.max(rel)),
                "max_off_diagonal": float(np.max(np.abs(off))) if freqs.size > 1 else 0.0,
            }
        )
    return {"rows": rows}
