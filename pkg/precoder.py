"""
Per-subcarrier SVD precoders and zero-forcing achievable rates.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from channel import TappedChannel, freq_response_grid, subcarrier_omegas
from config import COND_LIMIT, UNITARY_TOL
from errors import InvalidInput, RankDeficient
from matcore import CMat, as_cmat, svd_grid, unitarity_error

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrecoderGrid:
    """One unitary m x m precoder per subcarrier, stacked as (n_fft, m, m)."""

    mats: CMat

    def __post_init__(self):
        if self.mats.ndim != 3:
            raise InvalidInput(f"Precoder grid must be (n_fft, m, m), got {self.mats.shape}.")
        err = unitarity_error(self.mats)
        if err > UNITARY_TOL:
            raise InvalidInput(f"Precoder grid holds a non-unitary entry (error {err:.3e}).")

    @property
    def n_fft(self) -> int:
        return self.mats.shape[0]


@dataclass(frozen=True)
class RateConfig:
    gamma: float
    n_streams: int | None = None

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise InvalidInput(f"SNR gamma must be finite and positive, got {self.gamma}.")

    @classmethod
    def from_db(cls, snr_db: float, n_streams: int | None = None) -> "RateConfig":
        return cls(gamma=10.0 ** (snr_db / 10.0), n_streams=n_streams)


def optimal_precoders(H) -> PrecoderGrid:
    """Right singular vectors of every H[k], with canonical column phases."""
    H = as_cmat(H, "channel grid")
    if H.ndim == 2:
        H = H[None]
    return PrecoderGrid(mats=svd_grid(H).V)


def optimal_precoders_from_channel(ch: TappedChannel, n_fft: int) -> tuple[CMat, PrecoderGrid]:
    H = freq_response_grid(ch, subcarrier_omegas(n_fft))
    return H, optimal_precoders(H)


def _zf_gram(H, P, n_streams):
    Heq = H @ P[..., :, :n_streams]
    return np.conj(np.swapaxes(Heq, -1, -2)) @ Heq


def zf_rate(H, P, cfg: RateConfig) -> float:
    """sum_k log2(1 + 1/F_kk) with F = (gamma * Heq^H Heq)^-1 and Heq = H P."""
    H = as_cmat(H, "channel")
    P = as_cmat(P, "precoder")
    n = cfg.n_streams or P.shape[-1]
    gram = cfg.gamma * _zf_gram(H, P, n)
    if np.linalg.cond(gram) > COND_LIMIT:
        raise RankDeficient("Equivalent channel H P is rank deficient over the used streams.")
    F = np.linalg.inv(gram)
    return float(np.sum(np.log2(1.0 + 1.0 / np.real(np.diag(F)))))


def grid_rates(H_grid, P_grid, cfg: RateConfig) -> npt.NDArray[np.float64]:
    """Per-subcarrier ZF rates; rank-deficient subcarriers score 0."""
    H_grid = as_cmat(H_grid, "channel grid")
    P_grid = as_cmat(P_grid.mats if isinstance(P_grid, PrecoderGrid) else P_grid, "precoder grid")
    if H_grid.shape[0] != P_grid.shape[0]:
        raise InvalidInput(
            f"Channel grid has {H_grid.shape[0]} subcarriers but precoder grid has {P_grid.shape[0]}."
        )
    n = cfg.n_streams or P_grid.shape[-1]
    gram = cfg.gamma * _zf_gram(H_grid, P_grid, n)
    cond = np.linalg.cond(gram)
    ok = cond <= COND_LIMIT
    rates = np.zeros(H_grid.shape[0])
    if np.any(ok):
        F = np.linalg.inv(gram[ok])
        diag = np.real(np.diagonal(F, axis1=-2, axis2=-1))
        rates[ok] = np.sum(np.log2(1.0 + 1.0 / diag), axis=-1)
    bad = int(np.count_nonzero(~ok))
    if bad:
        logger.warning("%d subcarrier(s) rank deficient; scored as rate 0.", bad)
    return rates


def grid_rate(H_grid, P_grid, cfg: RateConfig) -> float:
    """Mean ZF rate over subcarriers, summed in fixed subcarrier order."""
    rates = grid_rates(H_grid, P_grid, cfg)
    return math.fsum(rates) / len(rates)
