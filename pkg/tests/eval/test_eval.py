"""
Evaluation tests: parametrized over bit budgets, Doppler points and
closed-form zero-forcing rates.

Every expected value comes from a hand calculation, not from running the code.
"""

import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", ".."))

from channel import DopplerParams, doppler_alpha
from feedback import bit_budget
from precoder import RateConfig, zf_rate


# Load eval cases
EVAL_DIR = os.path.dirname(__file__)
EVAL_CASES_PATH = os.path.join(EVAL_DIR, "eval_cases.json")

with open(EVAL_CASES_PATH, "r", encoding="utf-8") as f:
    EVAL_CASES = json.load(f)


def _cases(kind):
    return [c for c in EVAL_CASES if c["kind"] == kind]


BUDGET_CASES = _cases("budget")
DOPPLER_CASES = _cases("doppler")
ZF_CASES = _cases("zf_rate")


def test_every_case_has_a_known_kind():
    assert len(BUDGET_CASES) + len(DOPPLER_CASES) + len(ZF_CASES) == len(EVAL_CASES)


@pytest.mark.parametrize("case", BUDGET_CASES, ids=[c["id"] for c in BUDGET_CASES])
def test_feedback_budget(case):
    for scheme, expected in case["expected_bits"].items():
        n = case["lattice_order"] if scheme == "lattice" else case["n_pilots"]
        got = bit_budget(scheme, case["m"], n)
        assert got == expected, f"[{case['id']}] {scheme}: expected {expected} bits, got {got}"


@pytest.mark.parametrize("case", BUDGET_CASES, ids=[c["id"] for c in BUDGET_CASES])
def test_lattice_saves_bits_over_geodesic(case):
    """Smaller systems use fewer lattice bits; 8x8 is the one published exception."""
    lattice = bit_budget("lattice", case["m"], case["lattice_order"])
    geodesic = bit_budget("geodesic", case["m"], case["n_pilots"])
    if case["id"] == "budget_8x8":
        assert lattice > geodesic
    else:
        assert lattice < geodesic


@pytest.mark.parametrize("case", DOPPLER_CASES, ids=[c["id"] for c in DOPPLER_CASES])
def test_doppler_alpha(case):
    alpha = doppler_alpha(DopplerParams(case["speed_kmh"], case["carrier_hz"], case["symbol_s"]))
    assert alpha == pytest.approx(case["expected_alpha"], abs=case["tolerance"]), (
        f"[{case['id']}] {case['description']}: alpha {alpha}"
    )


@pytest.mark.parametrize("case", ZF_CASES, ids=[c["id"] for c in ZF_CASES])
def test_zf_rate_closed_form(case):
    s = np.array(case["singular_values"])
    rate = zf_rate(np.diag(s), np.eye(len(s)), RateConfig(gamma=case["gamma"]))
    assert rate == pytest.approx(case["expected_rate"], abs=1e-9), (
        f"[{case['id']}] {case['description']}: rate {rate}"
    )
