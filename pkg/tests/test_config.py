"""Tests for config.py: profile tables, budgets and the logging setup."""

import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import pytest

from config import (
    BESSEL_J0_FIRST_ZERO,
    RATES_HEADER,
    SCHEMES,
    PROFILE_DELAYS_NS,
    PROFILE_POWERS_DB,
    BUDGET_TABLE,
    configure_logging,
)


def test_profile_has_five_components():
    assert len(PROFILE_POWERS_DB) == 5
    assert len(PROFILE_DELAYS_NS) == 5


def test_profile_starts_with_los_component():
    assert PROFILE_POWERS_DB[0] == 0
    assert PROFILE_DELAYS_NS[0] == 0


def test_profile_delays_increase():
    assert all(b > a for a, b in zip(PROFILE_DELAYS_NS, PROFILE_DELAYS_NS[1:]))


def test_budget_table_has_four_mimo_sizes():
    assert set(BUDGET_TABLE) == {"4x4", "8x8", "12x12", "15x15"}


def test_budget_table_lattice_bits_follow_order():
    for label, row in BUDGET_TABLE.items():
        assert row["lattice_bits"] == 2 * row["m"] ** 2 * row["lattice_order"], label


def test_budget_table_givens_is_half_geodesic():
    for label, row in BUDGET_TABLE.items():
        assert 2 * row["givens_bits"] == row["geodesic_bits"], label


def test_schemes_include_perfect_and_lattice():
    assert "perfect" in SCHEMES
    assert "lattice" in SCHEMES


def test_rates_header_is_exact():
    assert ",".join(RATES_HEADER) == (
        "scheme,speed_kmh,snr_db,seed,frame,rate_bps_hz,bits,frob_err,flag_err_mean"
    )


def test_bessel_zero_constant():
    assert BESSEL_J0_FIRST_ZERO == pytest.approx(2.404825557695773)


def test_configure_logging_rejects_unknown_level():
    with pytest.raises(ValueError):
        configure_logging("LOUD")


def test_configure_logging_accepts_lowercase():
    import logging

    configure_logging("debug")
    assert logging.getLogger().level == logging.DEBUG
    configure_logging("INFO")
    assert logging.getLogger().level == logging.INFO


def test_env_override_for_bandwidth():
    original = os.environ.get("PRECODER_BANDWIDTH_HZ")
    try:
        os.environ["PRECODER_BANDWIDTH_HZ"] = "200e6"
        # Reload config to pick up the override
        import importlib
        import config
        importlib.reload(config)
        assert config.BANDWIDTH_HZ == 200e6
    finally:
        if original is None:
            os.environ.pop("PRECODER_BANDWIDTH_HZ", None)
        else:
            os.environ["PRECODER_BANDWIDTH_HZ"] = original
        import importlib
        import config
        importlib.reload(config)
