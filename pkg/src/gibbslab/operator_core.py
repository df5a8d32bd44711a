"""Dense linear-algebra primitives for finite-dimensional operator calculations.

Conventions used throughout the package:

* Operators are dense complex ``numpy`` arrays of shape ``(d, d)``.
* Vectorization is column-stacking, ``vec(X)[i + d*j] = X[i, j]``
  (``X.reshape(-1, order="F")``).  Under this convention

      vec(A X B) = (B^T kron A) vec(X),

  so a left multiplication is ``kron(I, A)`` and a right multiplication is
  ``kron(B^T, I)``.
* Hermitian eigendecompositions return eigenvalues in ascending order with
  orthonormal eigenvector columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ValidationError

__all__ = [
    "EigenSystem",
    "anticommutator",
    "commutator",
    "dagger",
    "devectorize",
    "eig_hermitian",
    "is_hermitian",
    "matrix_function",
    "schatten_norm",
    "superop_conjugation",
    "superop_left",
    "superop_right",
    "trace_distance",
    "vectorize",
]

HERMITICITY_TOL = 1e-12
RECONSTRUCTION_TOL = 1e-10


def _as_square_array(matrix: np.ndarray, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be a square 2-D array, got shape {arr.shape}")
    out = arr.astype(np.complex128, copy=False)
    if not np.all(np.isfinite(out.real)) or not np.all(np.isfinite(out.imag)):
        raise ValidationError(f"{name} contains non-finite entries")
    return out


def dagger(matrix: np.ndarray) -> np.ndarray:
    """Conjugate transpose."""
    return np.asarray(matrix).conj().T


def is_hermitian(matrix: np.ndarray, tol: float = HERMITICITY_TOL) -> bool:
    """Whether ``matrix`` equals its conjugate transpose within a relative tolerance.

    The comparison is ``||A - A^dag||_F <= tol * max(1, ||A||_F)``.
    """
    arr = _as_square_array(matrix)
    scale = max(1.0, float(np.linalg.norm(arr)))
    return float(np.linalg.norm(arr - dagger(arr))) <= tol * scale


def _check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if np.shape(a) != np.shape(b):
        raise ValidationError(
            f"operands must have matching shapes, got {np.shape(a)} and {np.shape(b)}"
        )


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b)
    return a @ b - b @ a


def anticommutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _check_same_shape(a, b)
    return a @ b + b @ a


@dataclass(frozen=True)
class EigenSystem:
    """Eigendecomposition of a Hermitian matrix.

    Attributes:
        eigenvalues: real eigenvalues in ascending order, shape ``(d,)``.
        eigenvectors: unitary matrix whose columns are the eigenvectors,
            shape ``(d, d)``; column ``k`` belongs to ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def spectral_width(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    def reconstruct(self) -> np.ndarray:
        """Return ``U diag(E) U^dag``."""
        u = self.eigenvectors
        return (u * self.eigenvalues) @ dagger(u)

    def function_of(self, fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Apply a scalar function to the matrix through its spectrum.

        Raises:
            ValidationError: if ``fn`` is non-finite at any eigenvalue; the
                message names the offending eigenvalue.
        """
        u = self.eigenvectors
        values = np.asarray(fn(self.eigenvalues))
        finite = np.isfinite(values)
        if not np.all(finite):
            bad = self.eigenvalues[~finite]
            raise ValidationError(
                f"scalar function is non-finite at eigenvalue {bad[0]!r}"
                + (f" (and {bad.size - 1} more)" if bad.size > 1 else "")
            )
        return (u * values) @ dagger(u)

    def to_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        """Rotate an operator into the eigenbasis: ``U^dag A U``."""
        u = self.eigenvectors
        return dagger(u) @ np.asarray(matrix, dtype=np.complex128) @ u

    def from_eigenbasis(self, matrix: np.ndarray) -> np.ndarray:
        """Rotate an eigenbasis operator back: ``U A U^dag``."""
        u = self.eigenvectors
        return u @ np.asarray(matrix, dtype=np.complex128) @ dagger(u)


def eig_hermitian(matrix: np.ndarray, tol: float = HERMITICITY_TOL) -> EigenSystem:
    """Eigendecomposition of a Hermitian matrix with validation.

    Args:
        matrix: square Hermitian array.
        tol: relative tolerance for the hermiticity check.

    Returns:
        EigenSystem with ascending eigenvalues and orthonormal eigenvectors.

    Raises:
        ValidationError: if the input is not square or not Hermitian within
            ``tol``, or if the reconstruction error is unexpectedly large.
    """
    arr = _as_square_array(matrix)
    scale = max(1.0, float(np.linalg.norm(arr)))
    defect = float(np.linalg.norm(arr - dagger(arr)))
    if defect > tol * scale:
        raise ValidationError(
            f"matrix is not Hermitian: ||A - A^dag||_F = {defect:.3e} "
            f"exceeds {tol:.1e} * max(1, ||A||_F) = {tol * scale:.3e}"
        )
    sym = 0.5 * (arr + dagger(arr))
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    system = EigenSystem(eigenvalues=eigenvalues, eigenvectors=eigenvectors)
    recon = float(np.linalg.norm(system.reconstruct() - sym))
    if recon > RECONSTRUCTION_TOL * scale:
        raise ValidationError(
            f"eigendecomposition reconstruction error {recon:.3e} exceeds "
            f"{RECONSTRUCTION_TOL:.1e} * max(1, ||A||_F)"
        )
    return system


def matrix_function(
    matrix: np.ndarray | EigenSystem, fn: Callable[[np.ndarray], np.ndarray]
) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its spectrum."""
    system = matrix if isinstance(matrix, EigenSystem) else eig_hermitian(matrix)
    return system.function_of(fn)


def schatten_norm(matrix: np.ndarray, p: float) -> float:
    """Schatten p-norm via singular values.

    ``p = 1`` is the trace norm, ``p = 2`` the Frobenius norm (computed
    directly without an SVD), and ``p = inf`` the operator norm.
    """
    arr = _as_square_array(matrix)
    if p == 2:
        return float(np.linalg.norm(arr))
    if not (p >= 1.0):  # also rejects NaN
        raise ValidationError(f"Schatten norm requires p >= 1, got {p!r}")
    singular = np.linalg.svd(arr, compute_uv=False)
    if np.isinf(p):
        return float(singular[0]) if singular.size else 0.0
    return float(np.sum(singular**p) ** (1.0 / p))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Trace distance ``0.5 * ||a - b||_1``."""
    return 0.5 * schatten_norm(np.asarray(a) - np.asarray(b), 1)


def vectorize(matrix: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization: ``vec(X)[i + d*j] = X[i, j]``."""
    arr = _as_square_array(matrix)
    return arr.reshape(-1, order="F")


def devectorize(vector: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize`."""
    vec = np.asarray(vector).reshape(-1)
    if dim is None:
        dim = int(round(np.sqrt(vec.size)))
    if dim * dim != vec.size:
        raise ValidationError(f"vector of length {vec.size} is not a flattened square matrix")
    return vec.reshape((dim, dim), order="F")


def superop_left(matrix: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X`` acting on column-stacked vectors."""
    arr = _as_square_array(matrix)
    return np.kron(np.eye(arr.shape[0]), arr)


def superop_right(matrix: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> X B`` acting on column-stacked vectors."""
    arr = _as_square_array(matrix)
    return np.kron(arr.T, np.eye(arr.shape[0]))


def superop_conjugation(matrix: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> A X A^dag`` acting on column-stacked vectors."""
    arr = _as_square_array(matrix)
    return np.kron(arr.conj(), arr)
