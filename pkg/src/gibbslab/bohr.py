"""Bohr frequencies and frequency decompositions of operators.

For a Hermitian ``P`` with eigenvalues ``E_1 <= ... <= E_d``, the Bohr
frequencies are the distinct differences ``E_i - E_j``.  Every operator ``A``
splits into frequency components

    A = sum_nu A_nu,      A_nu = sum_{E_i - E_j = nu} 1_{E_i} A 1_{E_j},

where ``1_E`` projects onto the eigenspace of ``E``.  The components satisfy

    [P, A_nu] = nu * A_nu,
    exp(sP) A_nu exp(-sP) = exp(s nu) A_nu,
    (A^dag)_(-nu) = (A_nu)^dag.

Floating-point spectra never repeat differences exactly, so nearby differences
are merged by greedy single-linkage clustering of the absolute differences
sorted ascending: a new cluster starts whenever the gap to the current
cluster's smallest member exceeds ``cluster_tol`` (a diameter cap).  Clustering
magnitudes rather than signed values makes the representative set exactly
closed under negation; the cluster containing the diagonal differences is
pinned to frequency zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .operator_core import EigenSystem, dagger, eig_hermitian

__all__ = [
    "BohrDecomposition",
    "BohrSpectrum",
    "COMPONENT_DROP_SCALE",
    "DEFAULT_CLUSTER_SCALE",
    "adjoint_pairing_residual",
    "bohr_spectrum",
    "decompose",
]

# Default cluster_tol = DEFAULT_CLUSTER_SCALE * (E_max - E_min).
DEFAULT_CLUSTER_SCALE = 1e-9


@dataclass(frozen=True)
class BohrSpectrum:
    """Clustered Bohr frequencies of a Hermitian matrix.

    Attributes:
        frequencies: representative frequencies, ascending, exactly closed
            under negation, always containing 0.
        pair_index: integer array of shape ``(d, d)``; ``pair_index[i, j]`` is
            the index into ``frequencies`` of the cluster that the difference
            ``E_i - E_j`` belongs to.
        eigenvalues: the ascending eigenvalues the spectrum was built from.
        cluster_tol: diameter cap used while clustering.
        max_cluster_diameter: largest spread of raw differences mapped to a
            single representative (a clustering-quality diagnostic).
    """

    frequencies: np.ndarray
    pair_index: np.ndarray
    eigenvalues: np.ndarray
    cluster_tol: float
    max_cluster_diameter: float = field(default=0.0)

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def size(self) -> int:
        return self.frequencies.shape[0]

    @property
    def zero_index(self) -> int:
        return int(np.searchsorted(self.frequencies, 0.0))

    def index_of(self, frequency: float) -> int:
        """Index of the representative closest to ``frequency``.

        Raises:
            ValidationError: if the closest representative is farther away
                than the clustering tolerance allows.
        """
        idx = int(np.argmin(np.abs(self.frequencies - frequency)))
        gap = abs(float(self.frequencies[idx]) - frequency)
        if gap > max(self.cluster_tol, 1e-12 * max(1.0, abs(frequency))):
            raise ValidationError(
                f"{frequency!r} is not a Bohr frequency of this spectrum "
                f"(closest representative {self.frequencies[idx]!r}, gap {gap:.3e})"
            )
        return idx

    def negation_index(self) -> np.ndarray:
        """Permutation ``perm`` with ``frequencies[perm[k]] == -frequencies[k]``."""
        return np.arange(self.size)[::-1]


def _cluster_sorted_magnitudes(values: np.ndarray, tol: float) -> list[slice]:
    """Greedy single-linkage clusters of an ascending array with diameter cap ``tol``."""
    slices: list[slice] = []
    start = 0
    for k in range(1, values.size):
        if values[k] - values[start] > tol:
            slices.append(slice(start, k))
            start = k
    if values.size:
        slices.append(slice(start, values.size))
    return slices


def bohr_spectrum(
    source: np.ndarray | EigenSystem, cluster_tol: float | None = None
) -> BohrSpectrum:
    """Cluster the pairwise eigenvalue differences of a Hermitian matrix.

    Args:
        source: Hermitian matrix or a precomputed :class:`EigenSystem`.
        cluster_tol: diameter cap for merging nearby differences.  Defaults to
            ``1e-9`` times the spectral width ``E_max - E_min``.

    Returns:
        BohrSpectrum with negation-closed representatives and the pair map.
    """
    system = source if isinstance(source, EigenSystem) else eig_hermitian(source)
    energies = system.eigenvalues
    d = energies.shape[0]
    width = float(energies[-1] - energies[0])
    if cluster_tol is None:
        cluster_tol = DEFAULT_CLUSTER_SCALE * width
    if cluster_tol < 0:
        raise ValidationError(f"cluster_tol must be nonnegative, got {cluster_tol!r}")

    diff = energies[:, None] - energies[None, :]
    magnitudes = np.abs(diff).reshape(-1)
    order = np.argsort(magnitudes, kind="stable")
    sorted_mags = magnitudes[order]

    slices = _cluster_sorted_magnitudes(sorted_mags, cluster_tol)
    n_clusters = len(slices)

    # Cluster id per flattened |difference|, then representatives as means.
    cluster_of_flat = np.empty(d * d, dtype=np.intp)
    reps = np.empty(n_clusters)
    max_diameter = 0.0
    for cid, sl in enumerate(slices):
        cluster_of_flat[order[sl]] = cid
        members = sorted_mags[sl]
        reps[cid] = float(members.mean())
        max_diameter = max(max_diameter, float(members[-1] - members[0]))
    # The diagonal differences are exactly zero and always land in cluster 0;
    # near-degenerate transitions merged with them are treated as degenerate.
    reps[0] = 0.0

    # Build the signed representative list: frequencies ascending, closed
    # under negation by construction.
    positive = reps[1:]
    frequencies = np.concatenate([-positive[::-1], [0.0], positive])

    zero_index = positive.size
    magnitude_cluster = cluster_of_flat.reshape(d, d)
    sign = np.sign(diff).astype(np.intp)
    # magnitude cluster c > 0 maps to zero_index + c for positive differences
    # and zero_index - c for negative ones; cluster 0 maps to zero_index.
    pair_index = zero_index + sign * magnitude_cluster

    return BohrSpectrum(
        frequencies=frequencies,
        pair_index=pair_index,
        eigenvalues=energies.copy(),
        cluster_tol=float(cluster_tol),
        max_cluster_diameter=max_diameter,
    )


# Components whose Frobenius norm falls below this fraction of ||A||_F are
# dropped from a decomposition: they are numerical dust from the basis
# rotation, not genuine transition amplitudes.
COMPONENT_DROP_SCALE = 1e-14


@dataclass(frozen=True)
class BohrDecomposition:
    """Frequency components of one operator.

    Only components above the drop threshold are retained.

    Attributes:
        spectrum: the Bohr spectrum used for the split.
        frequency_indices: indices into ``spectrum.frequencies`` of the
            retained components, ascending.
        components: array of shape ``(k, d, d)``; ``components[i]`` is the
            component at ``spectrum.frequencies[frequency_indices[i]]``,
            expressed in the same basis as the original operator.
    """

    spectrum: BohrSpectrum
    frequency_indices: np.ndarray
    components: np.ndarray

    @property
    def frequencies(self) -> np.ndarray:
        """Frequencies of the retained components, ascending."""
        return self.spectrum.frequencies[self.frequency_indices]

    @property
    def size(self) -> int:
        return self.components.shape[0]

    def component(self, frequency: float) -> np.ndarray:
        """Component at a Bohr frequency (zero matrix if it was dropped)."""
        idx = self.spectrum.index_of(frequency)
        pos = np.searchsorted(self.frequency_indices, idx)
        if pos < self.frequency_indices.size and self.frequency_indices[pos] == idx:
            return self.components[pos]
        d = self.spectrum.dim
        return np.zeros((d, d), dtype=np.complex128)

    def total(self) -> np.ndarray:
        """Sum of the retained components (equals the original operator up to
        the drop threshold)."""
        if self.size == 0:
            d = self.spectrum.dim
            return np.zeros((d, d), dtype=np.complex128)
        return self.components.sum(axis=0)

    def dense_components(self) -> np.ndarray:
        """Components scattered into a full ``(m, d, d)`` array over the
        whole spectrum, zeros where nothing was retained."""
        d = self.spectrum.dim
        out = np.zeros((self.spectrum.size, d, d), dtype=np.complex128)
        out[self.frequency_indices] = self.components
        return out


def decompose(
    operator: np.ndarray,
    system: EigenSystem,
    spectrum: BohrSpectrum | None = None,
) -> BohrDecomposition:
    """Split an operator into Bohr-frequency components.

    Args:
        operator: square matrix in the same basis as the matrix behind
            ``system``.
        system: eigendecomposition of the Hermitian reference matrix.
        spectrum: optional precomputed spectrum (built from ``system`` if
            omitted).

    Returns:
        BohrDecomposition whose retained components sum to ``operator`` up to
        the drop threshold (the masks partition the matrix entries; pieces
        below ``1e-14 * ||A||_F`` are discarded).
    """
    if spectrum is None:
        spectrum = bohr_spectrum(system)
    arr = np.asarray(operator, dtype=np.complex128)
    d = spectrum.dim
    if arr.shape != (d, d):
        raise ValidationError(f"operator shape {arr.shape} does not match dimension {d}")
    in_basis = system.to_eigenbasis(arr)
    components = np.zeros((spectrum.size, d, d), dtype=np.complex128)
    flat_index = spectrum.pair_index.reshape(-1)
    rows, cols = np.divmod(np.arange(d * d), d)
    components[flat_index, rows, cols] = in_basis[rows, cols]
    u = system.eigenvectors
    components = np.einsum("ab,kbc,cd->kad", u, components, dagger(u), optimize=True)
    norms = np.linalg.norm(components, axis=(1, 2))
    keep = np.nonzero(norms >= COMPONENT_DROP_SCALE * float(np.linalg.norm(arr)))[0]
    return BohrDecomposition(
        spectrum=spectrum,
        frequency_indices=keep,
        components=components[keep],
    )


def adjoint_pairing_residual(
    operator: np.ndarray,
    system: EigenSystem,
    spectrum: BohrSpectrum | None = None,
) -> float:
    """Largest deviation in ``(A^dag)_(-nu) = (A_nu)^dag`` over all frequencies.

    Returns the raw maximum Frobenius norm of the mismatch.
    """
    if spectrum is None:
        spectrum = bohr_spectrum(system)
    direct = decompose(operator, system, spectrum).dense_components()
    adjoint = decompose(dagger(operator), system, spectrum).dense_components()
    flip = spectrum.negation_index()
    mismatch = adjoint[flip] - np.conj(np.transpose(direct, (0, 2, 1)))
    return float(np.max(np.linalg.norm(mismatch, axis=(1, 2))))
