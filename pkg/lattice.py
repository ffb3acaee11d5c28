"""
Matrix lattice realisation of para-unitary (all-pass) precoder filters.

A filter of length M is a cascade of M-1 two-port stages, each fixed by one
reflection matrix K, closed at the innermost port by a constant unitary
residue R. Stage k's transmission matrix

    T = [[K,                 (I - K K^H)^(1/2)],
         [(I - K^H K)^(1/2), -K^H             ]]

is unitary whenever K is strictly contractive, so every cascade of such
stages is all-pass at every frequency. kappas[0] is the outermost stage
(the value of the whole filter at z = infinity); the residue sits innermost.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from config import COND_LIMIT, CONTRACTIVE_MARGIN, PSD_CLAMP, UNITARY_TOL
from errors import InvalidInput, NotContractive, NumericalInstability, UnstableInput
from matcore import CMat, as_cmat, hermitian, is_unitary, sqrtm_psd

if TYPE_CHECKING:
    from allpass import RationalAllPass

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LatticeParams:
    """Reflection matrices K_0..K_{M-2} (stack, possibly empty) and residue R."""

    kappas: CMat
    residue: CMat

    def __post_init__(self):
        R = as_cmat(self.residue, "lattice residue")
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise InvalidInput(f"Residue must be a square matrix, got shape {R.shape}.")
        K = np.asarray(self.kappas, dtype=np.complex128).reshape(-1, *R.shape)
        if not np.all(np.isfinite(K)):
            raise InvalidInput("Reflection matrices contain NaN or Inf.")
        object.__setattr__(self, "kappas", K)
        object.__setattr__(self, "residue", R)

    @property
    def m(self) -> int:
        return self.residue.shape[0]

    @property
    def order(self) -> int:
        """Filter length M: number of reflection matrices plus the residue."""
        return self.kappas.shape[0] + 1

    def matrices(self) -> list[CMat]:
        return [*self.kappas, self.residue]

    @classmethod
    def from_matrices(cls, mats) -> "LatticeParams":
        mats = list(mats)
        m = np.asarray(mats[-1]).shape[0]
        kappas = np.array(mats[:-1], dtype=np.complex128).reshape(-1, m, m)
        return cls(kappas=kappas, residue=np.asarray(mats[-1], dtype=np.complex128))


@dataclass(frozen=True)
class TStage:
    T11: CMat
    T12: CMat
    T21: CMat
    T22: CMat

    @property
    def matrix(self) -> CMat:
        return np.block([[self.T11, self.T12], [self.T21, self.T22]])


def spectral_norm(K) -> float:
    return float(np.linalg.norm(K, 2))


def clip_contractive(K, margin: float) -> CMat:
    """Scale K so its largest singular value is at most 1 - margin; direction is kept."""
    K = np.asarray(K, dtype=np.complex128)
    s = spectral_norm(K)
    limit = 1.0 - margin
    if s >= limit:
        K = K * (limit / s)
    return K


def t_matrix(K) -> TStage:
    K = as_cmat(K, "reflection matrix")
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise InvalidInput(f"Reflection matrix must be square, got shape {K.shape}.")
    s = spectral_norm(K)
    if s > 1.0 - CONTRACTIVE_MARGIN:
        raise NotContractive(f"Reflection matrix has largest singular value {s:.12f} >= 1.")
    eye = np.eye(K.shape[0])
    return TStage(
        T11=K,
        T12=sqrtm_psd(eye - K @ hermitian(K)),
        T21=sqrtm_psd(eye - hermitian(K) @ K),
        T22=-hermitian(K),
    )


def stage_response(T: TStage, G_inner, z_inv) -> CMat:
    """
    Close port 2 of one stage through z^-1 G_inner:
    G = T11 + T12 zG (I - T22 zG)^-1 T21, with zG = z^-1 G_inner.
    """
    zG = np.asarray(z_inv)[..., None, None] * G_inner
    eye = np.eye(G_inner.shape[-1])
    loop = eye - T.T22 @ zG
    if np.max(np.linalg.cond(loop)) > COND_LIMIT:
        raise NumericalInstability("Lattice feedback loop is singular at some frequency.")
    closed = np.linalg.solve(loop, np.broadcast_to(T.T21, loop.shape))
    return T.T11 + T.T12 @ zG @ closed


def frequency_response_grid(params: LatticeParams, omegas) -> CMat:
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    z_inv = np.exp(-1j * omegas)
    G = np.broadcast_to(params.residue, (len(omegas), params.m, params.m)).copy()
    for K in params.kappas[::-1]:
        G = stage_response(t_matrix(K), G, z_inv)
    return G


def frequency_response(params: LatticeParams, omega: float) -> CMat:
    return frequency_response_grid(params, [omega])[0]


def stability_check(params: LatticeParams) -> bool:
    """True iff every I - K^H K and I - K K^H is positive definite and R is unitary."""
    eye = np.eye(params.m)
    for K in params.kappas:
        if not np.all(np.isfinite(K)):
            return False
        if np.linalg.eigvalsh(eye - hermitian(K) @ K).min() <= PSD_CLAMP:
            return False
        if np.linalg.eigvalsh(eye - K @ hermitian(K)).min() <= PSD_CLAMP:
            return False
    return is_unitary(params.residue, UNITARY_TOL)


def n_parameters(params: LatticeParams) -> int:
    """Complex parameters stored by the lattice: M * m^2 (Direct Form II needs 2 M m^2)."""
    return params.order * params.m * params.m


def _right_normalize(N: CMat, D: CMat) -> tuple[CMat, CMat]:
    # Right-multiplying both polynomials by D_0^-1 leaves N D^-1 unchanged.
    D0_inv = np.linalg.inv(D[0])
    return N @ D0_inv, D @ D0_inv


def lccde_to_lattice(G: RationalAllPass, drop_tol: float = 1e-6) -> LatticeParams:
    """
    Peel reflection matrices off a Direct Form II all-pass filter, one stage per pass.

    Each pass normalizes D_0 = I, reads K = N_0 (the filter's value at infinity),
    and removes that stage to get an all-pass filter one coefficient shorter.
    What remains after M-1 passes is the residue R.
    """
    N = np.array(G.num.coeffs, dtype=np.complex128)
    D = np.array(G.den.coeffs, dtype=np.complex128)
    kappas = []
    while N.shape[0] > 1:
        N, D = _right_normalize(N, D)
        K = N[0]
        try:
            T = t_matrix(K)
        except NotContractive as exc:
            raise UnstableInput(
                f"Stage {len(kappas)} reflection matrix is not contractive; "
                "the filter is unstable or not all-pass."
            ) from exc
        Kh = hermitian(K)
        D_hat = np.linalg.solve(np.broadcast_to(hermitian(T.T21) @ T.T21, D.shape), D - Kh @ N)
        N_hat = N - K @ D_hat
        D_next = T.T21 @ D_hat
        N_next = np.linalg.solve(np.broadcast_to(T.T12 + K @ np.linalg.solve(T.T21, Kh), N.shape), N_hat)
        scale = max(1.0, float(np.linalg.norm(D)))
        if np.linalg.norm(D_next[-1]) > drop_tol * scale or np.linalg.norm(N_next[0]) > drop_tol * scale:
            raise UnstableInput(
                f"Stage {len(kappas)} deflation left a nonzero edge coefficient; "
                "the filter is not all-pass."
            )
        kappas.append(K)
        D = D_next[:-1]
        N = N_next[1:]
    N, D = _right_normalize(N, D)
    R = N[0]
    if not is_unitary(R, 1e-6):
        raise UnstableInput("Residue after deflation is not unitary; the filter is not all-pass.")
    m = R.shape[0]
    return LatticeParams(kappas=np.array(kappas, dtype=np.complex128).reshape(-1, m, m), residue=R)
