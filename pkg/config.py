"""
Configuration and constants for the lattice precoder feedback toolkit.
Loads environment variables and defines all shared settings.
"""

import logging
import os

from dotenv import load_dotenv

load_dotenv()

# --- Runtime Settings ---
LOG_LEVEL = os.getenv("PRECODER_LOG_LEVEL", "INFO")
WORKERS = int(os.getenv("PRECODER_WORKERS", "1"))
RESULTS_DIR = os.getenv("PRECODER_RESULTS_DIR", "./results")

# --- Channel Settings ---
# Sampling rate used to turn nanosecond delays into (fractional) samples.
BANDWIDTH_HZ = float(os.getenv("PRECODER_BANDWIDTH_HZ", "400e6"))
SPEED_OF_LIGHT = 3e8
DEFAULT_CARRIER_HZ = 28e9
DEFAULT_SYMBOL_S = 75e-6

# 28 GHz mmW power-delay profile, powers relative to the LOS component
PROFILE_POWERS_DB = [0.0, -112.0, -132.0, -142.0, -153.0]
PROFILE_DELAYS_NS = [0.0, 381.0, 407.0, 1433.0, 1500.0]

# First positive zero of J0; the AR(1) model needs alpha in (0, 1]
BESSEL_J0_FIRST_ZERO = 2.404825557695773

# --- Grid Sizes ---
FULL_SCALE_N_FFT = 4096
DESK_N_FFT = 256

# --- Numerical Tolerances ---
UNITARY_TOL = 1e-8
PSD_CLAMP = 1e-12
HERMITIAN_TOL = 1e-10
CONTRACTIVE_MARGIN = 1e-9
COND_LIMIT = 1e12

# --- Feedback Defaults ---
SIGMA = 1.5
INITIAL_STEP = 0.05
CLIP_MARGIN = 1e-3

# --- Lattice Design Defaults ---
DESIGN_TOL = 1e-3
DESIGN_MAX_ITER = 2000
DESIGN_RESTARTS = 4
# Ridge weight on reflection matrices when tracking targets are redesigned
DESIGN_KAPPA_PENALTY = 1e-2

# --- Reference feedback budgets, keyed by MIMO size ---
BUDGET_TABLE = {
    "4x4": {"m": 4, "n_pilots": 4, "lattice_order": 3,
            "geodesic_bits": 128, "givens_bits": 64, "lattice_bits": 96},
    "8x8": {"m": 8, "n_pilots": 4, "lattice_order": 5,
            "geodesic_bits": 512, "givens_bits": 256, "lattice_bits": 640},
    "12x12": {"m": 12, "n_pilots": 8, "lattice_order": 7,
              "geodesic_bits": 2304, "givens_bits": 1152, "lattice_bits": 2016},
    "15x15": {"m": 15, "n_pilots": 8, "lattice_order": 7,
              "geodesic_bits": 3600, "givens_bits": 1800, "lattice_bits": 3150},
}

SCHEMES = ("perfect", "lattice", "geodesic", "givens", "angle_delay")

# --- CSV Output ---
RATES_HEADER = [
    "scheme", "speed_kmh", "snr_db", "seed", "frame",
    "rate_bps_hz", "bits", "frob_err", "flag_err_mean",
]
KAPPA_HEADER = ["scheme", "speed_kmh", "seed", "frame", "kappa_err", "residue_err"]
FLAG_PROFILE_HEADER = ["scheme", "speed_kmh", "seed", "subcarrier", "flag_dist"]
FAILURES_HEADER = ["scheme", "speed_kmh", "seed", "error"]
SUMMARY_HEADER = ["scheme", "speed_kmh", "snr_db", "n_seeds", "rate_mean", "ci_low", "ci_high"]

_logging_configured = False


def configure_logging(level: str | None = None) -> None:
    """Set up root logging once. Raises ValueError on an unknown level name."""
    global _logging_configured
    name = (level or LOG_LEVEL).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise ValueError(
            f"Unknown log level '{name}'. "
            "Set PRECODER_LOG_LEVEL to one of DEBUG, INFO, WARNING, ERROR."
        )
    if not _logging_configured:
        logging.basicConfig(
            level=numeric,
            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        )
        _logging_configured = True
    logging.getLogger().setLevel(numeric)
