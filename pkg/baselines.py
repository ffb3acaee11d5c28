"""
Comparison feedback schemes: geodesic interpolation between pilot precoders,
Givens-rotation parameters interpolated after phase unwrapping, and the
angle-delay (truncated time-domain) precoder.
"""

import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg

from errors import BranchCut, InvalidInput
from matcore import CMat, as_cmat, assert_unitary, hermitian, phase_align

logger = logging.getLogger(__name__)

# Eigenvalues of Va^H Vb closer than this to -1 have no principal logarithm.
BRANCH_TOL = 1e-8


# --- Givens parameterization ----------------------------------------------------


@dataclass(frozen=True)
class GivensParams:
    """
    Phases phi (m(m+1)/2, column by column) and rotation angles theta (m(m-1)/2).

    V = prod_k D_k prod_l G_l^T, where D_k puts phases on rows k..m-1 and G_l
    rotates rows (l-1, l) by theta.
    """

    phis: npt.NDArray[np.float64]
    thetas: npt.NDArray[np.float64]

    def __post_init__(self):
        phis = np.asarray(self.phis, dtype=float).ravel()
        thetas = np.asarray(self.thetas, dtype=float).ravel()
        m = _size_from_phase_count(phis.size)
        if thetas.size != m * (m - 1) // 2:
            raise InvalidInput(f"{phis.size} phases need {m * (m - 1) // 2} angles, got {thetas.size}.")
        object.__setattr__(self, "phis", phis)
        object.__setattr__(self, "thetas", thetas)

    @property
    def m(self) -> int:
        return _size_from_phase_count(self.phis.size)


def _size_from_phase_count(n: int) -> int:
    m = int(round((np.sqrt(8 * n + 1) - 1) / 2))
    if m < 1 or m * (m + 1) // 2 != n:
        raise InvalidInput(f"{n} phases do not correspond to any matrix size.")
    return m


def _rotation(m: int, l: int, theta: float) -> npt.NDArray[np.float64]:
    G = np.eye(m)
    c, s = np.cos(theta), np.sin(theta)
    G[l - 1, l - 1] = c
    G[l - 1, l] = s
    G[l, l - 1] = -s
    G[l, l] = c
    return G


def givens_decompose(V) -> GivensParams:
    V = assert_unitary(V, what="Givens input")
    if V.ndim != 2:
        raise InvalidInput(f"givens_decompose expects one matrix, got shape {V.shape}.")
    m = V.shape[0]
    A = V.copy()
    phis, thetas = [], []
    for k in range(m):
        phi = np.angle(A[k:, k])
        phis.extend(phi)
        A[k:] = A[k:] * np.exp(-1j * phi)[:, None]
        for l in range(m - 1, k, -1):
            a, b = A[l - 1, k].real, A[l, k].real
            theta = float(np.arctan2(max(b, 0.0), max(a, 0.0)))
            thetas.append(theta)
            A = _rotation(m, l, theta) @ A
            A[l, k] = 0.0
    return GivensParams(phis=np.array(phis), thetas=np.array(thetas))


def givens_reconstruct(p: GivensParams) -> CMat:
    m = p.m
    V = np.eye(m, dtype=np.complex128)
    pos_phi = pos_theta = 0
    for k in range(m):
        phases = np.ones(m, dtype=np.complex128)
        phases[k:] = np.exp(1j * p.phis[pos_phi:pos_phi + m - k])
        pos_phi += m - k
        V = V * phases[None, :]
        for l in range(m - 1, k, -1):
            V = V @ _rotation(m, l, p.thetas[pos_theta]).T
            pos_theta += 1
    return V


def givens_to_vector(p: GivensParams) -> npt.NDArray[np.float64]:
    return np.concatenate([p.phis, p.thetas])


def vector_to_givens(vec, m: int) -> GivensParams:
    vec = np.asarray(vec, dtype=float).ravel()
    if vec.size != m * m:
        raise InvalidInput(f"A {m}x{m} Givens vector has {m * m} entries, got {vec.size}.")
    n_phi = m * (m + 1) // 2
    return GivensParams(phis=vec[:n_phi], thetas=vec[n_phi:])


def wrap_phase(x):
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=float), 2.0 * np.pi)


def givens_track_target(truth_vec, estimate_vec, m: int) -> npt.NDArray[np.float64]:
    """Move each truth phase by a multiple of 2*pi so it sits within pi of the estimate."""
    truth_vec = np.asarray(truth_vec, dtype=float).copy()
    n_phi = m * (m + 1) // 2
    est = np.asarray(estimate_vec, dtype=float)[:n_phi]
    truth_vec[:n_phi] = est + wrap_phase(truth_vec[:n_phi] - est)
    return truth_vec


def _check_pilots(pilot_indices, n_items: int, n_fft: int | None = None) -> npt.NDArray[np.float64]:
    idx = np.asarray(pilot_indices, dtype=float)
    if idx.size < 2:
        raise InvalidInput(f"Interpolation needs at least 2 pilots, got {idx.size}.")
    if idx.size != n_items:
        raise InvalidInput(f"Got {idx.size} pilot indices but {n_items} pilot values.")
    if np.any(np.diff(idx) <= 0):
        raise InvalidInput("Pilot indices must be strictly increasing.")
    if n_fft is not None and (idx[0] < 0 or idx[-1] > n_fft - 1):
        raise InvalidInput(f"Pilot indices must lie in [0, {n_fft - 1}].")
    return idx


def givens_interpolate(pilot_indices, params, targets) -> list[GivensParams]:
    """
    Linear interpolation of every phase and angle over subcarrier index.

    Phases are unwrapped along the pilot axis first, so a pair like (3.0, -3.0)
    is read as (3.0, 2*pi - 3.0) and interpolates through pi, not 0. Targets
    outside the pilot span take the nearest pilot's parameters.
    """
    params = list(params)
    idx = _check_pilots(pilot_indices, len(params))
    m = params[0].m
    phis = np.unwrap(np.array([p.phis for p in params]), axis=0)
    thetas = np.array([p.thetas for p in params])
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    out_phis = np.column_stack([np.interp(targets, idx, col) for col in phis.T])
    out_thetas = (
        np.column_stack([np.interp(targets, idx, col) for col in thetas.T])
        if m > 1
        else np.zeros((targets.size, 0))
    )
    return [GivensParams(phis=ph, thetas=th) for ph, th in zip(out_phis, out_thetas)]


def givens_interpolate_grid(pilot_indices, params, n_fft: int) -> CMat:
    params = list(params)
    _check_pilots(pilot_indices, len(params), n_fft)
    interp = givens_interpolate(pilot_indices, params, np.arange(n_fft))
    return np.array([givens_reconstruct(p) for p in interp])


# --- Geodesic interpolation -----------------------------------------------------


def _geodesic_frame(Va: CMat, Vb: CMat) -> tuple[CMat, npt.NDArray[np.float64]]:
    # Va^H Vb is normal, so its complex Schur form is diagonal up to rounding.
    T, Z = scipy.linalg.schur(hermitian(Va) @ Vb, output="complex")
    lam = np.diag(T)
    if np.min(np.abs(lam + 1.0)) < BRANCH_TOL:
        raise BranchCut("Va^H Vb has an eigenvalue at -1; the geodesic is not unique.")
    return Z, np.angle(lam)


def _geodesic_segment(Va: CMat, Vb: CMat) -> tuple[CMat, npt.NDArray[np.float64]]:
    try:
        return _geodesic_frame(Va, Vb)
    except BranchCut:
        logger.warning("Geodesic hit the branch cut; retrying with column phases aligned.")
        return _geodesic_frame(Va, phase_align(Va, Vb))


def _geodesic_points(Va: CMat, Z: CMat, angles, ts) -> CMat:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    rot = np.exp(1j * ts[:, None] * angles[None, :])
    return Va @ (Z[None] * rot[:, None, :]) @ hermitian(Z)


def geodesic_interpolate(Va, Vb, t: float) -> CMat:
    """Va expm(t logm(Va^H Vb)): the point a fraction t along the unitary geodesic."""
    Va = assert_unitary(Va, what="geodesic start")
    Vb = assert_unitary(Vb, what="geodesic end")
    if not 0.0 <= t <= 1.0:
        raise InvalidInput(f"Geodesic fraction must lie in [0, 1], got {t}.")
    Z, angles = _geodesic_segment(Va, Vb)
    return _geodesic_points(Va, Z, angles, [t])[0]


def geodesic_interpolate_grid(pilot_indices, pilot_mats, n_fft: int) -> CMat:
    """Piecewise geodesic between neighbouring pilots; constant outside the pilot span."""
    pilot_mats = as_cmat(pilot_mats, "pilot precoders")
    idx = _check_pilots(pilot_indices, len(pilot_mats), n_fft)
    k = np.arange(n_fft, dtype=float)
    grid = np.empty((n_fft, *pilot_mats.shape[1:]), dtype=np.complex128)
    grid[k < idx[0]] = pilot_mats[0]
    grid[k > idx[-1]] = pilot_mats[-1]
    for j in range(len(idx) - 1):
        lo, hi = idx[j], idx[j + 1]
        inside = (k >= lo) & (k <= hi)
        Z, angles = _geodesic_segment(pilot_mats[j], pilot_mats[j + 1])
        grid[inside] = _geodesic_points(pilot_mats[j], Z, angles, (k[inside] - lo) / (hi - lo))
    return grid


# --- Angle-delay truncation -----------------------------------------------------


@dataclass(frozen=True)
class AngleDelayPrecoder:
    taps: CMat
    n_fft: int

    def __post_init__(self):
        if self.taps.ndim != 3 or self.taps.shape[0] > self.n_fft:
            raise InvalidInput(f"Need at most n_fft={self.n_fft} square taps, got {self.taps.shape}.")

    @property
    def n_taps(self) -> int:
        return self.taps.shape[0]


def angle_delay_truncate(grid, n_taps: int) -> AngleDelayPrecoder:
    mats = as_cmat(getattr(grid, "mats", grid), "precoder grid")
    n_fft = mats.shape[0]
    if not 1 <= n_taps <= n_fft:
        raise InvalidInput(f"Tap count must lie in [1, {n_fft}], got {n_taps}.")
    taps = np.fft.ifft(mats, axis=0)[:n_taps]
    return AngleDelayPrecoder(taps=taps, n_fft=n_fft)


def angle_delay_reconstruct(ad: AngleDelayPrecoder) -> CMat:
    """Forward DFT of the zero-padded taps. Not unitary in general."""
    return np.fft.fft(ad.taps, n=ad.n_fft, axis=0)


def normalize_power(P) -> CMat:
    """Scale each subcarrier's matrix to squared Frobenius norm m."""
    P = as_cmat(P, "precoder")
    m = P.shape[-1]
    norms = np.linalg.norm(P, axis=(-2, -1), keepdims=True)
    return P * (np.sqrt(m) / np.where(norms > 0, norms, 1.0))
