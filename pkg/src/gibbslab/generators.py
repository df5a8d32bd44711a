"""Generator assembly: unfiltered detailed-balance generators and the
Gaussian-filtered balanced construction.

Both generator kinds act on density matrices as

    L(T) = -i [P + B, T]
           + sum_A sum_{nu, nu'} C(nu, nu') ( A_nu T A_nu'^dag
                                              - (1/2) { A_nu^dag A_nu', T } ),

differing in the coupling ``C`` and the coherent matrix ``B``:

* the unfiltered (``davies``) generator couples only equal frequencies,
  ``C(nu, nu') = gamma(nu) delta(nu, nu')`` with ``gamma`` satisfying
  detailed balance, and has ``B = 0``;

* the filtered (``localised``) generator uses the full overlap table
  ``C = G`` of a balanced weight together with the coherent matrix

      B = sum_A sum_{nu, nu'} b(nu, nu') A_nu^dag A_nu',

  where ``b`` is the coherent pair coefficient.  The orientation of the
  coefficient's odd factor (argument ``nu - nu'``) is the one that makes
  ``L(e^{-P}) = 0``; it is fixed here once and verified against an
  independent time-domain assembly by the calibration report.

The filtered dissipator supports two assembly paths: ``bohr_sum`` contracts
the precomputed overlap table against Bohr components, while
``omega_quadrature`` builds explicit jump operators ``sqrt(gamma(w_k) w_k)
A_f(w_k)`` on quadrature nodes (manifestly completely positive) and sums
their contributions.  Agreement of the two paths is a standing consistency
check; a deliberate fault hook can flip one overlap sign after construction
so self-tests can demonstrate the check has teeth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bohr import BohrSpectrum, bohr_spectrum
from .errors import ValidationError
from .models import Model, gibbs_state
from .oft import OverlapTable, overlap_table
from .operator_core import (
    EigenSystem,
    dagger,
    devectorize,
    schatten_norm,
    vectorize,
)
from .weights import (
    DEFAULT_RULE,
    GaussianFilter,
    QuadratureRule,
    WeightFunction,
    coherent_difference_factor,
    coherent_time_envelope,
    coherent_time_kernel,
    kms_defect,
    smoothed_weight_table,
)

__all__ = [
    "GeneratorBundle",
    "StationarityReport",
    "coherent_calibration_report",
    "coherent_matrix_bohr",
    "coherent_matrix_time_quadrature",
    "davies_generator",
    "davies_limit_report",
    "dual_path_residual",
    "drift_dissipativity_defect",
    "effective_drift_abscissa",
    "generator_action",
    "gibbs_action_identity_defect",
    "hermiticity_preservation_defect",
    "localised_generator",
    "stationarity_report",
    "trace_functional_defect",
]

_KMS_GRID_TOL = 1e-12
_B_HERMITICITY_TOL = 1e-10
_ADJOINT_FAMILY_TOL = 1e-12
# Pairs whose difference Gaussian exponent exceeds this are dropped from the
# coherent table (relative contribution below e^-200).
_PAIR_EXPONENT_CAP = 200.0


@dataclass(frozen=True)
class GeneratorBundle:
    """An assembled generator with its parts and assembly provenance.

    The superoperator acts on column-stacked operators,
    ``vec(L(T)) = superoperator @ vec(T)``, in the model's original basis.
    ``hamiltonian_part`` is ``-i[P + B, .]`` and ``dissipator_part`` the
    rest; they sum to ``superoperator`` exactly.
    """

    kind: str  # "davies" | "localised"
    assembly_path: str  # "bohr_sum" | "omega_quadrature"
    model: Model
    weight: WeightFunction
    sigma: float | None
    superoperator: np.ndarray
    hamiltonian_part: np.ndarray
    dissipator_part: np.ndarray
    coherent_matrix: np.ndarray
    effective_drift: np.ndarray
    spectrum: BohrSpectrum
    diagnostics: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.model.dim

    def apply(self, operator: np.ndarray) -> np.ndarray:
        """Act on an operator: ``L(T)``."""
        return generator_action(self.superoperator, operator)

    def apply_part(self, part: str, operator: np.ndarray) -> np.ndarray:
        """Act with one part only (``"hamiltonian"`` or ``"dissipator"``)."""
        if part == "hamiltonian":
            return generator_action(self.hamiltonian_part, operator)
        if part == "dissipator":
            return generator_action(self.dissipator_part, operator)
        raise ValidationError(f"unknown generator part {part!r}")


def generator_action(superoperator: np.ndarray, operator: np.ndarray) -> np.ndarray:
    """Apply a column-stacked superoperator to an operator."""
    op = np.asarray(operator, dtype=np.complex128)
    return devectorize(np.asarray(superoperator) @ vectorize(op), op.shape[0])


def _validate_jump_family(model: Model) -> dict:
    defect = model.adjoint_closure_defect()
    if defect > _ADJOINT_FAMILY_TOL:
        raise ValidationError(
            f"jump family of {model.model_id!r} is not closed under the adjoint "
            f"(worst distance {defect:.3e})"
        )
    return {
        "adjoint_closure_defect": defect,
        "jump_norm_squared_sum": model.jump_norm_squared_sum(),
    }


def _hamiltonian_superop(h_eff: np.ndarray) -> np.ndarray:
    """Superoperator of ``T -> -i (h_eff T - T h_eff)``."""
    d = h_eff.shape[0]
    eye = np.eye(d)
    return -1j * (np.kron(eye, h_eff) - np.kron(h_eff.T, eye))


def _dissipator_from_coupling(
    jumps_eig: list[np.ndarray], coupling_big: np.ndarray, d: int
) -> tuple[np.ndarray, np.ndarray]:
    """Dissipator superoperator (eigenbasis) from a 4-index coupling tensor.

    ``coupling_big[i, k, j, l]`` multiplies ``A_{ik} conj(A_{jl})`` in the
    sandwich term.  Returns ``(S_diss, M)`` where ``M = sum_A sum C A^dag A``
    is the anticommutator kernel.
    """
    d2 = d * d
    s_sandwich = np.zeros((d2, d2), dtype=np.complex128)
    m_kernel = np.zeros((d, d), dtype=np.complex128)
    diag_view = np.einsum("pipk->pik", coupling_big)
    for a in jumps_eig:
        t1 = a[:, :, None, None] * a.conj()[None, None, :, :] * coupling_big
        s_sandwich += t1.transpose(2, 0, 3, 1).reshape(d2, d2)
        m_kernel += np.einsum("pi,pk,pik->ik", a.conj(), a, diag_view, optimize=True)
    eye = np.eye(d)
    s_diss = s_sandwich - 0.5 * (np.kron(eye, m_kernel) + np.kron(m_kernel.T, eye))
    return s_diss, m_kernel


def _rotate_superop(system: EigenSystem, s_eig: np.ndarray) -> np.ndarray:
    """Rotate a superoperator from the eigenbasis to the original basis."""
    w = np.kron(system.eigenvectors.conj(), system.eigenvectors)
    return w @ s_eig @ dagger(w)


def davies_generator(
    model: Model,
    weight: WeightFunction,
    *,
    cluster_tol: float | None = None,
) -> GeneratorBundle:
    """Unfiltered detailed-balance generator with diagonal frequency coupling.

    The weight must satisfy detailed balance on the model's Bohr grid to
    within ``1e-12`` (checked; violations are rejected).  The Hamiltonian
    part ``-i[P, .]`` is included.
    """
    diag = _validate_jump_family(model)
    system = model.eigensystem()
    spectrum = bohr_spectrum(system, cluster_tol)
    grid_defect = kms_defect(weight, spectrum.frequencies)
    if grid_defect > _KMS_GRID_TOL:
        raise ValidationError(
            f"weight {weight.kind!r} violates detailed balance on the Bohr grid: "
            f"defect {grid_defect:.3e} exceeds {_KMS_GRID_TOL:g}"
        )
    d = model.dim
    idx = spectrum.pair_index
    gamma_vals = weight(spectrum.frequencies)
    same_cluster = idx[:, :, None, None] == idx[None, None, :, :]
    coupling_big = gamma_vals[idx][:, :, None, None] * same_cluster

    jumps_eig = [system.to_eigenbasis(a) for a in model.jumps]
    s_diss_eig, m_kernel_eig = _dissipator_from_coupling(jumps_eig, coupling_big, d)
    s_diss = _rotate_superop(system, s_diss_eig)
    s_ham = _hamiltonian_superop(model.hamiltonian)
    b_zero = np.zeros((d, d), dtype=np.complex128)
    m_kernel = system.from_eigenbasis(m_kernel_eig)
    drift = 1j * model.hamiltonian - 0.5 * m_kernel
    diag.update({"kms_grid_defect": grid_defect, "n_frequencies": spectrum.size})
    return GeneratorBundle(
        kind="davies",
        assembly_path="bohr_sum",
        model=model,
        weight=weight,
        sigma=None,
        superoperator=s_ham + s_diss,
        hamiltonian_part=s_ham,
        dissipator_part=s_diss,
        coherent_matrix=b_zero,
        effective_drift=drift,
        spectrum=spectrum,
        diagnostics=diag,
    )


def _coherent_table(
    spectrum: BohrSpectrum,
    weight: WeightFunction,
    sigma: float,
    *,
    rule: QuadratureRule,
) -> np.ndarray:
    """Pair-coefficient table ``b(nu, nu')`` over the Bohr spectrum."""
    freqs = spectrum.frequencies
    xi = freqs[:, None] - freqs[None, :]
    zeta = freqs[:, None] + freqs[None, :]
    live = np.square(xi) / (4.0 * sigma * sigma) <= _PAIR_EXPONENT_CAP
    table = np.zeros(xi.shape, dtype=np.complex128)
    if not np.any(live):
        return table
    mids = -0.5 * zeta[live]
    uniq, inverse = np.unique(mids, return_inverse=True)
    h_vals = smoothed_weight_table(weight, sigma, uniq, rule=rule)
    with np.errstate(over="ignore", under="ignore"):
        sum_factor = np.exp(-0.5 * zeta[live]) * h_vals[inverse]
    diff_factor = coherent_difference_factor(xi[live], sigma)
    table[live] = 2.0 * math.pi * diff_factor * sum_factor
    if not np.all(np.isfinite(table[live])):
        raise ValidationError(
            "coherent pair table has non-finite entries; the spectral width "
            "likely exceeds the supported range"
        )
    return table


def coherent_matrix_bohr(
    model: Model,
    weight: WeightFunction,
    sigma: float,
    *,
    rule: QuadratureRule = DEFAULT_RULE,
    system: EigenSystem | None = None,
    spectrum: BohrSpectrum | None = None,
) -> tuple[np.ndarray, dict]:
    """Coherent matrix ``B`` assembled from the frequency-pair table.

    Returns ``(B, diagnostics)`` with ``B`` in the original basis.  ``B`` is
    Hermitian by the pairing symmetry of the table; the realised hermiticity
    defect is recorded and must stay below ``1e-10`` relative.
    """
    if system is None:
        system = model.eigensystem()
    if spectrum is None:
        spectrum = bohr_spectrum(system)
    d = model.dim
    btable = _coherent_table(spectrum, weight, sigma, rule=rule)
    idx = spectrum.pair_index
    b4 = btable[idx[:, :, None], idx[:, None, :]]
    b_eig = np.zeros((d, d), dtype=np.complex128)
    for a in (system.to_eigenbasis(j) for j in model.jumps):
        b_eig += np.einsum("pi,pk,pik->ik", a.conj(), a, b4, optimize=True)
    b_mat = system.from_eigenbasis(b_eig)
    defect = float(np.linalg.norm(b_mat - dagger(b_mat))) / max(
        1.0, float(np.linalg.norm(b_mat))
    )
    if defect > _B_HERMITICITY_TOL:
        raise ValidationError(
            f"coherent matrix is not Hermitian: relative defect {defect:.3e}"
        )
    b_mat = 0.5 * (b_mat + dagger(b_mat))
    return b_mat, {"coherent_hermiticity_defect": defect, "coherent_norm": float(np.linalg.norm(b_mat))}


def _omega_quadrature_nodes(
    weight: WeightFunction,
    sigma: float,
    freqs: np.ndarray,
    rule: QuadratureRule,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes/weights covering the live support of the weight.

    The window is where ``gamma`` is at least ``1e-24`` of its peak, dilated
    by the filter's window radius, intersected with the reach of the Bohr
    frequencies; panels are aligned to the weight's breakpoints.
    """
    lo_f = float(freqs[0]) - rule.window_radius * sigma
    hi_f = float(freqs[-1]) + rule.window_radius * sigma
    probe = np.linspace(lo_f, hi_f, 4001)
    gvals = weight(probe)
    peak = float(np.max(gvals))
    if peak <= 0.0:
        raise ValidationError("weight vanishes identically on the probe window")
    live = probe[gvals >= peak * 1e-24]
    lo = max(lo_f, float(live[0]) - (rule.window_radius + 2.0) * sigma)
    hi = min(hi_f, float(live[-1]) + (rule.window_radius + 2.0) * sigma)
    panel_width = sigma * rule.panel_width_fraction
    bps = [float(b) for b in weight.breakpoints if lo < float(b) < hi]
    anchor = bps[0] if bps else lo
    k0 = math.floor((lo - anchor) / panel_width)
    k1 = math.ceil((hi - anchor) / panel_width)
    edges = anchor + panel_width * np.arange(k0, k1 + 1)
    if bps:
        edges = np.unique(np.concatenate([edges, np.asarray(bps)]))
    from .weights import _panel_quadrature  # same panel helper as the tables

    return _panel_quadrature(edges, rule.panel_order)


def localised_generator(
    model: Model,
    weight: WeightFunction,
    sigma: float,
    *,
    path: str = "bohr_sum",
    rule: QuadratureRule = DEFAULT_RULE,
    cluster_tol: float | None = None,
    cross_check: bool = True,
    _corrupt_overlap_sign: bool = False,
) -> GeneratorBundle:
    """Gaussian-filtered generator for a balanced weight.

    Args:
        model: Hamiltonian and adjoint-closed jump family.
        weight: a balanced weight built for the same bandwidth ``sigma``
            (an intentionally unbalanced control weight carrying the right
            bandwidth is also accepted, for negative tests).
        sigma: filter bandwidth; must equal ``weight.sigma``.
        path: ``"bohr_sum"`` contracts the overlap table against Bohr
            components; ``"omega_quadrature"`` sums explicit node jumps.
        rule: quadrature recipe for the smoothed-weight evaluations.
        cluster_tol: Bohr clustering tolerance override.
        cross_check: sample-check the overlap table against definitional
            quadrature (a standing regression check; on by default).
        _corrupt_overlap_sign: fault hook for self-tests -- flips the sign of
            every off-diagonal overlap entry *after* the cross-check, so
            downstream path-consistency checks must detect the corruption.

    The coherent matrix is assembled identically on both paths (it has no
    frequency-integral form), so path disagreement isolates the dissipator.
    """
    if not (np.isfinite(sigma) and sigma > 0.0):
        raise ValidationError(f"bandwidth must be a finite positive number, got {sigma!r}")
    if weight.sigma is None or abs(weight.sigma - float(sigma)) > 0.0:
        raise ValidationError(
            f"weight was built for bandwidth {weight.sigma!r} but the filter uses "
            f"{sigma!r}; rebuild the weight for the filter bandwidth"
        )
    if weight.kind not in ("balanced_from_phi", "unshifted_control"):
        raise ValidationError(
            f"filtered generator needs a balanced-family weight, got kind {weight.kind!r}"
        )
    if path not in ("bohr_sum", "omega_quadrature"):
        raise ValidationError(f"unknown assembly path {path!r}")

    diag = _validate_jump_family(model)
    system = model.eigensystem()
    spectrum = bohr_spectrum(system, cluster_tol)
    d = model.dim
    idx = spectrum.pair_index
    freqs = spectrum.frequencies
    jumps_eig = [system.to_eigenbasis(a) for a in model.jumps]

    table = overlap_table(spectrum, weight, sigma, rule=rule, cross_check=cross_check)
    g_values = table.values
    if _corrupt_overlap_sign:
        diagonal = np.diag(np.diag(g_values))
        g_values = 2.0 * diagonal - g_values  # flip every off-diagonal sign
        diag["fault_injected"] = "all off-diagonal overlap signs flipped"

    if path == "bohr_sum":
        coupling_big = g_values[idx[:, :, None, None], idx[None, None, :, :]]
        s_diss_eig, m_kernel_eig = _dissipator_from_coupling(jumps_eig, coupling_big, d)
    else:
        nodes, wts = _omega_quadrature_nodes(weight, sigma, freqs, rule)
        gw = weight(nodes) * wts
        keep = gw > 0.0
        nodes, gw = nodes[keep], gw[keep]
        filt = GaussianFilter(sigma)
        profile = filt.frequency_profile(nodes[:, None] - freqs[None, :])
        d2 = d * d
        s_sandwich = np.zeros((d2, d2), dtype=np.complex128)
        m_kernel_eig = np.zeros((d, d), dtype=np.complex128)
        for a in jumps_eig:
            filtered = profile[:, idx] * a[None, :, :]  # (n, d, d)
            flat = filtered.transpose(0, 2, 1).reshape(nodes.size, d2)  # vec layout
            outer = (flat * gw[:, None]).T @ flat.conj()
            o4 = outer.reshape(d, d, d, d)
            s_sandwich += o4.transpose(3, 1, 2, 0).reshape(d2, d2)
            m_kernel_eig += np.einsum(
                "n,nip,nik->pk", gw, filtered.conj(), filtered, optimize=True
            )
        eye = np.eye(d)
        s_diss_eig = s_sandwich - 0.5 * (
            np.kron(eye, m_kernel_eig) + np.kron(m_kernel_eig.T, eye)
        )
        diag["omega_nodes"] = int(nodes.size)

    b_mat, b_diag = coherent_matrix_bohr(
        model, weight, sigma, rule=rule, system=system, spectrum=spectrum
    )
    diag.update(b_diag)
    diag.update(
        {
            "overlap_cross_check_defect": table.cross_check_defect,
            "overlap_min_eigenvalue": table.min_eigenvalue(),
            "n_frequencies": spectrum.size,
            "max_cluster_diameter": spectrum.max_cluster_diameter,
        }
    )

    s_diss = _rotate_superop(system, s_diss_eig)
    h_eff = model.hamiltonian + b_mat
    s_ham = _hamiltonian_superop(h_eff)
    m_kernel = system.from_eigenbasis(m_kernel_eig)
    drift = 1j * h_eff - 0.5 * m_kernel
    return GeneratorBundle(
        kind="localised",
        assembly_path=path,
        model=model,
        weight=weight,
        sigma=float(sigma),
        superoperator=s_ham + s_diss,
        hamiltonian_part=s_ham,
        dissipator_part=s_diss,
        coherent_matrix=b_mat,
        effective_drift=drift,
        spectrum=spectrum,
        diagnostics=diag,
    )


# ---------------------------------------------------------------------------
# Reports and consistency checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StationarityReport:
    """How close the Gibbs density is to being a fixed point.

    All residuals are relative to the norm of the Gibbs density.
    ``recombination_defect`` is the distance between the full action and the
    sum of the two part actions (exactly zero up to float association).
    """

    residual_fro: float
    residual_trace_norm: float
    dissipator_part_fro: float
    hamiltonian_part_fro: float
    recombination_defect: float


def stationarity_report(bundle: GeneratorBundle) -> StationarityReport:
    """Evaluate ``L`` on the normalised Gibbs density of the bundle's model."""
    rho = gibbs_state(bundle.model)
    full = bundle.apply(rho)
    part_d = bundle.apply_part("dissipator", rho)
    part_h = bundle.apply_part("hamiltonian", rho)
    scale_f = float(np.linalg.norm(rho))
    scale_t = schatten_norm(rho, 1)
    return StationarityReport(
        residual_fro=float(np.linalg.norm(full)) / scale_f,
        residual_trace_norm=schatten_norm(full, 1) / scale_t,
        dissipator_part_fro=float(np.linalg.norm(part_d)) / scale_f,
        hamiltonian_part_fro=float(np.linalg.norm(part_h)) / scale_f,
        recombination_defect=float(np.linalg.norm(full - part_d - part_h)),
    )


def gibbs_action_identity_defect(bundle: GeneratorBundle) -> float:
    """Defect of ``D(rho_G) = i [B, rho_G]`` for a filtered bundle.

    The dissipator's action on the Gibbs density must be exactly the
    commutator action that the coherent matrix was built to cancel.
    Returns the Frobenius defect relative to the Gibbs norm.
    """
    rho = gibbs_state(bundle.model)
    lhs = bundle.apply_part("dissipator", rho)
    b = bundle.coherent_matrix
    rhs = 1j * (b @ rho - rho @ b)
    return float(np.linalg.norm(lhs - rhs)) / float(np.linalg.norm(rho))


def trace_functional_defect(bundle: GeneratorBundle) -> float:
    """Norm of ``vec(I)^dag S`` -- zero for trace-preserving generators."""
    d = bundle.dim
    left = vectorize(np.eye(d)).conj() @ bundle.superoperator
    return float(np.linalg.norm(left))


def hermiticity_preservation_defect(bundle: GeneratorBundle, n_samples: int = 10, seed: int = 0) -> float:
    """Worst ``||L(T^dag) - L(T)^dag||_F / ||T||_F`` over random operators."""
    rng = np.random.default_rng(seed)
    d = bundle.dim
    worst = 0.0
    for _ in range(n_samples):
        t = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        lhs = bundle.apply(dagger(t))
        rhs = dagger(bundle.apply(t))
        worst = max(worst, float(np.linalg.norm(lhs - rhs)) / float(np.linalg.norm(t)))
    return worst


def effective_drift_abscissa(bundle: GeneratorBundle) -> float:
    """Spectral abscissa (largest real part of an eigenvalue) of the drift
    matrix ``Y = i(P + B) - (1/2) sum_A sum C(nu,nu') A_nu^dag A_nu'``."""
    return float(np.max(np.linalg.eigvals(bundle.effective_drift).real))


def drift_dissipativity_defect(bundle: GeneratorBundle, n_samples: int = 50, seed: int = 7) -> float:
    """Worst ``Re <Y u, u>`` over random unit vectors (should be <= 0).

    The drift is dissipative: its numerical range lies in the closed left
    half-plane, so the returned value is at most a small positive roundoff.
    """
    rng = np.random.default_rng(seed)
    y = bundle.effective_drift
    worst = -np.inf
    for _ in range(n_samples):
        u = rng.normal(size=bundle.dim) + 1j * rng.normal(size=bundle.dim)
        u /= np.linalg.norm(u)
        worst = max(worst, float((u.conj() @ (y @ u)).real))
    return worst


def dual_path_residual(
    model: Model,
    weight: WeightFunction,
    sigma: float,
    *,
    rule: QuadratureRule = DEFAULT_RULE,
) -> float:
    """Relative Frobenius distance between the two assembly paths."""
    s_bohr = localised_generator(
        model, weight, sigma, path="bohr_sum", rule=rule, cross_check=False
    ).superoperator
    s_omega = localised_generator(
        model, weight, sigma, path="omega_quadrature", rule=rule, cross_check=False
    ).superoperator
    scale = max(float(np.linalg.norm(s_bohr)), float(np.linalg.norm(s_omega)), 1e-300)
    return float(np.linalg.norm(s_bohr - s_omega)) / scale


def davies_limit_report(
    model: Model,
    phi,
    sigmas,
    *,
    n_test_ops: int = 5,
    seed: int = 2024,
    p: float = 1.0,
    rule: QuadratureRule = DEFAULT_RULE,
) -> dict:
    """Distance of the filtered generator from its delocalised limit.

    For each bandwidth, builds the filtered generator with the balanced
    weight and compares its action against the unfiltered generator built
    with the delocalised-limit weight ``pi e^{-omega/2} phi(omega)`` (the
    factor ``pi`` is the squared filter mass; without it the limit would not
    close).  Distances are Schatten-``p`` norms of the action difference on
    seeded unit-Frobenius Hermitian test operators.
    """
    from .weights import balanced_gamma, delocalised_limit_gamma

    rng = np.random.default_rng(seed)
    d = model.dim
    test_ops = []
    for _ in range(n_test_ops):
        z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        t = 0.5 * (z + dagger(z))
        test_ops.append(t / np.linalg.norm(t))

    limit_bundle = davies_generator(model, delocalised_limit_gamma(phi))
    rows = []
    for s in sigmas:
        w = balanced_gamma(phi, float(s))
        bundle = localised_generator(model, w, float(s), rule=rule)
        distances = []
        for t in test_ops:
            delta = bundle.apply(t) - limit_bundle.apply(t)
            distances.append(schatten_norm(delta, p))
        rows.append(
            {
                "sigma": float(s),
                "distances": distances,
                "max_distance": max(distances),
                "coherent_norm": float(np.linalg.norm(bundle.coherent_matrix)),
                "stationarity_residual": stationarity_report(bundle).residual_fro,
            }
        )
    return {"rows": rows, "p": p, "n_test_ops": n_test_ops, "seed": seed}


# ---------------------------------------------------------------------------
# Time-domain coherent-term oracle
# ---------------------------------------------------------------------------


def _time_quadrature_inner(
    model: Model,
    weight: WeightFunction,
    sigma: float,
    n_time_nodes: int,
    n_envelope_nodes: int,
):
    """Shared pieces of the time-domain assembly.

    Returns ``(system, ts, wt_k1, inner)`` where ``inner`` is the
    orientation-independent envelope integral
    ``sum_A integral ds b2(s) e^{iPs} A^dag e^{-2iPs} A e^{iPs}``
    in the eigenbasis and ``wt_k1`` the weighted kernel samples.
    """
    if model.dim > 6:
        raise ValidationError(
            f"time-domain oracle is for small models (dim <= 6), got dim {model.dim}"
        )
    system = model.eigensystem()
    energies = system.eigenvalues
    d = model.dim

    t_span = 12.0 + 2.0 / sigma
    ts = np.linspace(-t_span, t_span, int(n_time_nodes))
    wt = np.full(ts.size, ts[1] - ts[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    wt_k1 = wt * coherent_time_kernel(ts, sigma)

    s_span = 10.0 / sigma + 1.0
    ss = np.linspace(-s_span, s_span, int(n_envelope_nodes))
    ws = np.full(ss.size, ss[1] - ss[0])
    ws[0] *= 0.5
    ws[-1] *= 0.5
    b2 = coherent_time_envelope(ss, sigma, weight)

    inner = np.zeros((d, d), dtype=np.complex128)
    for a in (system.to_eigenbasis(j) for j in model.jumps):
        ad = dagger(a)
        for s_val, w_val, b2_val in zip(ss, ws, b2):
            ph = np.exp(1j * energies * s_val)
            core = ad @ (np.exp(-2j * energies * s_val)[:, None] * a)
            inner += (w_val * b2_val) * (ph[:, None] * core * ph[None, :])
    return system, ts, wt_k1, inner


def _time_quadrature_close(system: EigenSystem, ts, wt_k1, inner, orientation: str):
    sign = 1.0 if orientation == "outward" else -1.0
    energies = system.eigenvalues
    diff = energies[:, None] - energies[None, :]
    outer_kernel = np.tensordot(
        wt_k1, np.exp(1j * sign * np.multiply.outer(ts, diff)), axes=(0, 0)
    )
    return system.from_eigenbasis(outer_kernel * inner)


def coherent_matrix_time_quadrature(
    model: Model,
    weight: WeightFunction,
    sigma: float,
    *,
    orientation: str = "outward",
    n_time_nodes: int = 2048,
    n_envelope_nodes: int = 2048,
) -> np.ndarray:
    """Coherent matrix by double time quadrature (independent oracle).

    Evaluates ``sum_A integral dt k1(t) U(t) [ integral ds b2(s)
    e^{iPs} A^dag e^{-2iPs} A e^{iPs} ] U(t)^dag`` with trapezoid grids,
    where ``k1`` is the coherent time kernel (spectral normalisation) and
    ``b2`` the coherent time envelope.  ``orientation="outward"`` uses
    ``U(t) = e^{+iPt}``, which matches the frequency-domain assembly;
    ``"literal"`` uses ``e^{-iPt}`` and lands on the negated matrix.  Only
    practical for small dimensions; the envelope requires an exponentially
    tilted integrable weight.
    """
    if orientation not in ("outward", "literal"):
        raise ValidationError(f"unknown orientation {orientation!r}")
    system, ts, wt_k1, inner = _time_quadrature_inner(
        model, weight, sigma, n_time_nodes, n_envelope_nodes
    )
    return _time_quadrature_close(system, ts, wt_k1, inner, orientation)


def coherent_calibration_report(
    model: Model,
    weight: WeightFunction,
    sigma: float,
    *,
    rule: QuadratureRule = DEFAULT_RULE,
    n_time_nodes: int = 2048,
    n_envelope_nodes: int = 2048,
) -> dict:
    """Compare the frequency-domain coherent matrix against the time oracle.

    Reports the distance for both conjugation orientations of the time
    assembly.  The production orientation is the one matching the
    frequency-domain matrix; the literal one lands on the negated matrix
    (distance close to twice the norm) -- surfaced here as numbers, never
    silently absorbed.  Relative distances are taken against the coherent
    norm when it is meaningfully nonzero, else against 1.
    """
    b_freq, diag = coherent_matrix_bohr(model, weight, sigma, rule=rule)
    report = {"coherent_norm": float(np.linalg.norm(b_freq)), **diag}
    system, ts, wt_k1, inner = _time_quadrature_inner(
        model, weight, sigma, n_time_nodes, n_envelope_nodes
    )
    for orientation in ("outward", "literal"):
        b_time = _time_quadrature_close(system, ts, wt_k1, inner, orientation)
        report[f"distance_{orientation}"] = float(np.linalg.norm(b_time - b_freq))
    scale = report["coherent_norm"] if report["coherent_norm"] > 1e-12 else 1.0
    report["relative_distance_outward"] = report["distance_outward"] / scale
    report["relative_distance_literal"] = report["distance_literal"] / scale
    return report
