"""
Tapped-delay MIMO channel for the 28 GHz mmW scenario.

Builds matrix taps from a power-delay profile, evolves them with a
Doppler-driven AR(1) process and evaluates the frequency response on the
subcarrier grid. Randomized functions accept an int seed or a
numpy Generator, so a trajectory can share one generator across steps.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import numpy.typing as npt

from config import (
    BESSEL_J0_FIRST_ZERO,
    SPEED_OF_LIGHT,
    PROFILE_DELAYS_NS,
    PROFILE_POWERS_DB,
)
from errors import AlphaOutOfRange, InvalidInput
from matcore import CMat


@dataclass(frozen=True)
class PowerDelayProfile:
    powers_db: list[float] = field(default_factory=lambda: list(PROFILE_POWERS_DB))
    delays_ns: list[float] = field(default_factory=lambda: list(PROFILE_DELAYS_NS))

    def __post_init__(self):
        if len(self.powers_db) == 0 or len(self.delays_ns) == 0:
            raise InvalidInput("Power-delay profile must have at least one component.")
        if len(self.powers_db) != len(self.delays_ns):
            raise InvalidInput(
                f"Power-delay profile has {len(self.powers_db)} powers "
                f"but {len(self.delays_ns)} delays."
            )
        if self.delays_ns[0] != 0 or self.powers_db[0] != 0:
            raise InvalidInput("First profile component must be 0 dB at 0 ns.")
        if any(b <= a for a, b in zip(self.delays_ns, self.delays_ns[1:])):
            raise InvalidInput("Profile delays must be strictly increasing.")


@dataclass(frozen=True)
class TappedChannel:
    """Matrix taps H[l] (stack L+1 x m x m) at real-valued sample delays."""

    taps: CMat
    delays: npt.NDArray[np.float64]
    time_index: int = 0
    # Per-tap amplitude the taps were drawn with; scales AR(1) innovations.
    gains: npt.NDArray[np.float64] | None = None

    def __post_init__(self):
        if self.taps.ndim != 3 or self.taps.shape[1] != self.taps.shape[2]:
            raise InvalidInput(f"Taps must be a stack of square matrices, got {self.taps.shape}.")
        if len(self.delays) != self.taps.shape[0]:
            raise InvalidInput("Need exactly one delay per tap.")
        if not np.all(np.isfinite(self.taps)):
            raise InvalidInput("Channel taps contain NaN or Inf.")
        if self.delays[0] != 0 or np.any(np.asarray(self.delays) < 0):
            raise InvalidInput("Tap delays must be nonnegative with the first at 0.")

    @property
    def m(self) -> int:
        return self.taps.shape[1]

    @property
    def tap_gains(self) -> npt.NDArray[np.float64]:
        if self.gains is None:
            return np.ones(self.taps.shape[0])
        return np.asarray(self.gains, dtype=float)


@dataclass(frozen=True)
class DopplerParams:
    speed_kmh: float
    carrier_hz: float
    symbol_s: float

    def __post_init__(self):
        if self.speed_kmh < 0 or self.carrier_hz < 0 or self.symbol_s < 0:
            raise InvalidInput("Speed, carrier frequency and symbol time must be nonnegative.")


def _rng(rng_seed) -> np.random.Generator:
    return np.random.default_rng(rng_seed)


def complex_gaussian(rng: np.random.Generator, shape) -> CMat:
    """Circular complex Gaussian with unit total variance (1/2 per real part)."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def tap_amplitudes(pdp: PowerDelayProfile) -> npt.NDArray[np.float64]:
    return 10.0 ** (np.asarray(pdp.powers_db, dtype=float) / 20.0)


def pdp_to_taps(pdp: PowerDelayProfile, m: int, bandwidth_hz: float, rng_seed=None) -> TappedChannel:
    if m < 1:
        raise InvalidInput(f"MIMO size must be at least 1, got {m}.")
    if bandwidth_hz <= 0:
        raise InvalidInput(f"Bandwidth must be positive, got {bandwidth_hz}.")
    rng = _rng(rng_seed)
    gains = tap_amplitudes(pdp)
    taps = complex_gaussian(rng, (len(gains), m, m)) * gains[:, None, None]
    delays = np.asarray(pdp.delays_ns, dtype=float) * 1e-9 * bandwidth_hz
    return TappedChannel(taps=taps, delays=delays, time_index=0, gains=gains)


def subcarrier_omegas(n_fft: int, indices=None) -> npt.NDArray[np.float64]:
    """omega_k = 2*pi*k/N wrapped into (-pi, pi]."""
    k = np.arange(n_fft) if indices is None else np.asarray(indices)
    omega = 2.0 * np.pi * k / n_fft
    return np.where(omega > np.pi, omega - 2.0 * np.pi, omega)


def freq_response(ch: TappedChannel, omega: float) -> CMat:
    phases = np.exp(-1j * omega * ch.delays)
    return np.tensordot(phases, ch.taps, axes=(0, 0))


def freq_response_grid(ch: TappedChannel, omegas) -> CMat:
    phases = np.exp(-1j * np.outer(np.asarray(omegas, dtype=float), ch.delays))
    return np.einsum("wl,lij->wij", phases, ch.taps)


def bessel_j0(x: float, tol: float = 1e-15) -> float:
    """J0 by its power series sum_k (-1)^k (x^2/4)^k / (k!)^2."""
    q = -(x * x) / 4.0
    term = 1.0
    total = 1.0
    k = 0
    while abs(term) > tol * max(1.0, abs(total)) or k < 10:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def doppler_frequency(p: DopplerParams) -> float:
    return (p.speed_kmh / 3.6) / SPEED_OF_LIGHT * p.carrier_hz


def doppler_alpha(p: DopplerParams) -> float:
    arg = 2.0 * math.pi * doppler_frequency(p) * p.symbol_s
    if arg >= BESSEL_J0_FIRST_ZERO:
        raise AlphaOutOfRange(
            f"Doppler argument {arg:.4f} is past the first zero of J0; "
            f"speed {p.speed_kmh} km/h is too fast for the AR(1) model."
        )
    return bessel_j0(arg)


def evolve_ar1(ch: TappedChannel, alpha, rng_seed=None) -> TappedChannel:
    """h_t = alpha*h_{t-1} + sqrt(1-alpha^2)*w, innovations scaled by each tap's gain."""
    a = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a < 0) or np.any(a > 1):
        raise InvalidInput(f"AR(1) coefficient must lie in [0, 1], got {alpha}.")
    a = np.broadcast_to(a, ch.taps.shape) if a.ndim else a
    rng = _rng(rng_seed)
    w = complex_gaussian(rng, ch.taps.shape) * ch.tap_gains[:, None, None]
    taps = a * ch.taps + np.sqrt(1.0 - a * a) * w
    return replace(ch, taps=taps, time_index=ch.time_index + 1)
