"""
Complex dense matrix kernels shared by every other module.

SVD with deterministic column phases, Hermitian PSD square roots, unitary
checks and projections, and phase-invariant subspace distances. All functions
are pure; stacks of matrices use the last two axes as (rows, cols).
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from config import HERMITIAN_TOL, PSD_CLAMP, UNITARY_TOL
from errors import InvalidInput, NotPSD

CMat = npt.NDArray[np.complex128]


@dataclass(frozen=True)
class SvdResult:
    """A = U @ diag(S) @ V^H with S descending and canonical column phases in V."""

    U: CMat
    S: npt.NDArray[np.float64]
    V: CMat


def as_cmat(A, what: str = "matrix") -> CMat:
    """Coerce to a finite complex128 array with at least two dimensions."""
    arr = np.asarray(A, dtype=np.complex128)
    if arr.ndim < 2:
        raise InvalidInput(f"{what} must be a matrix, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{what} contains NaN or Inf entries.")
    return arr


def _as_square(A, what: str) -> CMat:
    arr = as_cmat(A, what)
    if arr.shape[-1] != arr.shape[-2]:
        raise InvalidInput(f"{what} must be square, got shape {arr.shape}.")
    return arr


def _canonicalize_columns(U: CMat, V: CMat) -> tuple[CMat, CMat]:
    # Largest-magnitude entry of each V column made real and >= 0; argmax keeps
    # the lowest row index on ties. U columns get the same phase so U S V^H holds.
    idx = np.argmax(np.abs(V), axis=-2)[..., None, :]
    pivot = np.take_along_axis(V, idx, axis=-2)
    magnitude = np.abs(pivot)
    phase = np.where(magnitude > 0, pivot / np.where(magnitude > 0, magnitude, 1.0), 1.0)
    V = V * np.conj(phase)
    U = U * np.conj(phase)
    np.put_along_axis(V, idx, magnitude.astype(np.complex128), axis=-2)
    return U, V


def svd(A) -> SvdResult:
    """
    Full SVD of a square complex matrix with canonical column phases.

    The phase rule removes the per-column ambiguity of the decomposition so
    right singular vectors are comparable across subcarriers and time. Inside a
    block of repeated singular values the basis is still arbitrary.
    """
    A = _as_square(A, "svd input")
    if A.ndim != 2:
        raise InvalidInput(f"svd expects a single matrix, got shape {A.shape}; use svd_grid.")
    U, S, Vh = np.linalg.svd(A)
    U, V = _canonicalize_columns(U, Vh.conj().T)
    return SvdResult(U=U, S=S, V=V)


def svd_grid(A) -> SvdResult:
    """Stacked version of svd() over the leading axes."""
    A = _as_square(A, "svd input")
    U, S, Vh = np.linalg.svd(A)
    U, V = _canonicalize_columns(U, np.conj(np.swapaxes(Vh, -1, -2)))
    return SvdResult(U=U, S=S, V=V)


def hermitian(A) -> CMat:
    return np.conj(np.swapaxes(A, -1, -2))


def sqrtm_psd(A) -> CMat:
    """Principal square root of a Hermitian positive semidefinite matrix."""
    A = _as_square(A, "sqrtm_psd input")
    scale = max(1.0, float(np.linalg.norm(A)))
    if np.linalg.norm(A - hermitian(A)) > HERMITIAN_TOL * scale:
        raise NotPSD("Matrix is not Hermitian; cannot take a PSD square root.")
    w, Q = np.linalg.eigh(0.5 * (A + hermitian(A)))
    if w.min() < -PSD_CLAMP * scale:
        raise NotPSD(f"Matrix is indefinite (smallest eigenvalue {w.min():.3e}).")
    w = np.clip(w, 0.0, None)
    B = (Q * np.sqrt(w)[..., None, :]) @ hermitian(Q)
    return 0.5 * (B + hermitian(B))


def unitarity_error(V) -> float:
    V = np.asarray(V, dtype=np.complex128)
    eye = np.eye(V.shape[-1])
    return float(np.max(np.linalg.norm(hermitian(V) @ V - eye, axis=(-2, -1))))


def is_unitary(V, tol: float = UNITARY_TOL) -> bool:
    V = np.asarray(V)
    if V.ndim < 2 or V.shape[-1] != V.shape[-2] or not np.all(np.isfinite(V)):
        return False
    return unitarity_error(V) <= tol


def assert_unitary(V, tol: float = UNITARY_TOL, what: str = "matrix") -> CMat:
    V = _as_square(V, what)
    err = unitarity_error(V)
    if err > tol:
        raise InvalidInput(f"{what} is not unitary (||V^H V - I|| = {err:.3e}).")
    return V


def unitary_project(A) -> CMat:
    """Nearest unitary matrix in Frobenius norm (the polar factor), stack-aware."""
    A = _as_square(A, "unitary_project input")
    U, _, Vh = np.linalg.svd(A)
    return U @ Vh


def phase_align(V_ref, V) -> CMat:
    """Rotate each column of V by the phase that best matches the same column of V_ref."""
    V_ref = np.asarray(V_ref, dtype=np.complex128)
    V = np.asarray(V, dtype=np.complex128)
    inner = np.sum(np.conj(V_ref) * V, axis=-2)
    magnitude = np.abs(inner)
    phase = np.where(magnitude > 0, inner / np.where(magnitude > 0, magnitude, 1.0), 1.0)
    return V * np.conj(phase)[..., None, :]


def aligned_frobenius(V_ref, V) -> npt.NDArray[np.float64] | float:
    diff = np.asarray(V_ref) - phase_align(V_ref, V)
    out = np.linalg.norm(diff, axis=(-2, -1))
    return float(out) if np.ndim(out) == 0 else out


def _column_distance(V1, V2):
    inner = np.sum(np.conj(V1) * V2, axis=-2)
    gaps = np.clip(1.0 - np.abs(inner) ** 2, 0.0, None)
    return np.sqrt(np.sum(gaps, axis=-1))


def flag_distance(V1, V2, require_unitary: bool = True) -> float:
    """
    Per-column chordal distance sqrt(sum_k 1 - |v1_k^H v2_k|^2).

    Invariant to the phase of any column of either argument. With
    require_unitary=False the columns are normalized first, which lets
    non-unitary reconstructions be scored.
    """
    V1 = _as_square(V1, "flag_distance argument")
    V2 = _as_square(V2, "flag_distance argument")
    if V1.shape != V2.shape:
        raise InvalidInput(f"Shape mismatch {V1.shape} vs {V2.shape}.")
    if require_unitary:
        assert_unitary(V1, what="flag_distance argument")
        assert_unitary(V2, what="flag_distance argument")
    else:
        V1 = _normalize_columns(V1)
        V2 = _normalize_columns(V2)
    return float(_column_distance(V1, V2)) if V1.ndim == 2 else _column_distance(V1, V2)


def _normalize_columns(V: CMat) -> CMat:
    norms = np.linalg.norm(V, axis=-2, keepdims=True)
    return V / np.where(norms > 0, norms, 1.0)
