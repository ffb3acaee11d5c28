"""Tests for baselines.py: Givens parameters, geodesic interpolation and angle-delay truncation."""

import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest

from baselines import (
    GivensParams,
    angle_delay_reconstruct,
    angle_delay_truncate,
    geodesic_interpolate,
    geodesic_interpolate_grid,
    givens_decompose,
    givens_interpolate,
    givens_interpolate_grid,
    givens_reconstruct,
    givens_to_vector,
    givens_track_target,
    normalize_power,
    vector_to_givens,
    wrap_phase,
)
from errors import InvalidInput
from matcore import flag_distance, is_unitary
from precoder import PrecoderGrid


# --- Givens ---

def test_givens_identity_is_all_zero():
    p = givens_decompose(np.eye(3))
    assert np.allclose(p.phis, 0.0)
    assert np.allclose(p.thetas, 0.0)
    assert p.phis.size == 6
    assert p.thetas.size == 3


def test_givens_diagonal_phases():
    V = np.diag(np.exp(1j * np.array([np.pi / 3, 0.0, -np.pi / 4])))
    p = givens_decompose(V)
    assert p.phis[0] == pytest.approx(np.pi / 3)
    assert p.phis[-1] == pytest.approx(-np.pi / 4)
    assert np.allclose(p.thetas, 0.0)
    assert np.allclose(givens_reconstruct(p), V, atol=1e-12)


@pytest.mark.parametrize("m", [1, 2, 4, 8])
def test_givens_round_trip(random_unitary, m):
    V = random_unitary(m)
    p = givens_decompose(V)
    assert givens_to_vector(p).size == m * m
    assert np.allclose(givens_reconstruct(p), V, atol=1e-10)


@pytest.mark.parametrize("m", [2, 4, 8])
def test_givens_round_trip_many(random_unitary, m):
    for _ in range(1000):
        V = random_unitary(m)
        assert np.linalg.norm(givens_reconstruct(givens_decompose(V)) - V) <= 1e-10


def test_givens_vector_round_trip(random_unitary):
    p = givens_decompose(random_unitary(3))
    again = vector_to_givens(givens_to_vector(p), 3)
    assert np.array_equal(again.phis, p.phis)
    assert np.array_equal(again.thetas, p.thetas)


def test_givens_params_reject_bad_counts():
    with pytest.raises(InvalidInput):
        GivensParams(phis=np.zeros(4), thetas=np.zeros(0))
    with pytest.raises(InvalidInput):
        GivensParams(phis=np.zeros(3), thetas=np.zeros(2))
    with pytest.raises(InvalidInput):
        vector_to_givens(np.zeros(5), 2)


def test_givens_rejects_non_unitary():
    with pytest.raises(InvalidInput):
        givens_decompose(2 * np.eye(2))


def test_wrap_phase():
    assert wrap_phase(np.pi) == pytest.approx(np.pi)
    assert wrap_phase(-np.pi) == pytest.approx(np.pi)
    assert wrap_phase(1.5 * np.pi) == pytest.approx(-0.5 * np.pi)


def test_track_target_moves_phases_near_estimate():
    m = 1
    target = givens_track_target(np.array([3.0]), np.array([-3.0]), m)
    assert target[0] == pytest.approx(3.0 - 2 * np.pi)


def test_track_target_leaves_angles():
    truth = np.array([0.1, 0.2, 6.0, 0.7])
    target = givens_track_target(truth, np.zeros(4), 2)
    assert target[3] == 0.7
    assert target[2] == pytest.approx(6.0 - 2 * np.pi)


# --- Givens interpolation ---

def test_unwrapped_midpoint_goes_through_pi():
    params = [GivensParams(phis=[3.0], thetas=[]), GivensParams(phis=[-3.0], thetas=[])]
    mid = givens_interpolate([0, 2], params, [1])[0]
    assert mid.phis[0] == pytest.approx(np.pi)


def test_constant_params_interpolate_to_constant(random_unitary):
    V = random_unitary(3)
    p = givens_decompose(V)
    grid = givens_interpolate_grid([0, 5, 9], [p, p, p], 10)
    assert grid.shape == (10, 3, 3)
    assert np.allclose(grid, V, atol=1e-10)


def test_givens_grid_hits_pilots(random_unitary):
    mats = [random_unitary(2) for _ in range(3)]
    params = [givens_decompose(V) for V in mats]
    grid = givens_interpolate_grid([0, 4, 7], params, 8)
    for k, V in zip([0, 4, 7], mats):
        assert flag_distance(grid[k], V) == pytest.approx(0.0, abs=1e-6)
    assert is_unitary(grid)


def test_givens_interpolate_rejects_bad_pilots():
    p = GivensParams(phis=[0.0], thetas=[])
    with pytest.raises(InvalidInput):
        givens_interpolate([0], [p], [0])
    with pytest.raises(InvalidInput):
        givens_interpolate([3, 1], [p, p], [2])
    with pytest.raises(InvalidInput):
        givens_interpolate_grid([0, 9], [p, p], 8)


# --- Geodesic ---

def test_geodesic_endpoints(random_unitary):
    Va, Vb = random_unitary(3), random_unitary(3)
    assert np.allclose(geodesic_interpolate(Va, Vb, 0.0), Va, atol=1e-10)
    assert np.allclose(geodesic_interpolate(Va, Vb, 1.0), Vb, atol=1e-10)


def test_geodesic_midpoint_of_diagonal():
    mid = geodesic_interpolate(np.eye(2), np.diag([1j, -1j]), 0.5)
    assert np.allclose(mid, np.diag(np.exp(1j * np.array([np.pi / 4, -np.pi / 4]))), atol=1e-12)


def test_geodesic_stays_unitary(random_unitary):
    Va, Vb = random_unitary(4), random_unitary(4)
    for t in (0.1, 0.37, 0.8):
        assert is_unitary(geodesic_interpolate(Va, Vb, t))


def test_geodesic_branch_cut_retries_with_aligned_phases():
    Vb = np.diag([-1.0, 1.0]).astype(complex)
    mid = geodesic_interpolate(np.eye(2), Vb, 0.5)
    assert is_unitary(mid)
    assert flag_distance(mid, Vb) == pytest.approx(0.0, abs=1e-7)


def test_geodesic_rejects_fraction_out_of_range(random_unitary):
    with pytest.raises(InvalidInput):
        geodesic_interpolate(random_unitary(2), random_unitary(2), 1.5)


def test_geodesic_grid(random_unitary):
    mats = np.array([random_unitary(2) for _ in range(3)])
    grid = geodesic_interpolate_grid([1, 4, 7], mats, 10)
    assert np.allclose(grid[0], mats[0])
    assert np.allclose(grid[1], mats[0], atol=1e-10)
    assert np.allclose(grid[4], mats[1], atol=1e-10)
    assert np.allclose(grid[7], mats[2], atol=1e-10)
    assert np.allclose(grid[9], mats[2])
    assert is_unitary(grid)


# --- Angle-delay ---

def test_angle_delay_constant_grid_is_exact(random_unitary):
    V = random_unitary(3)
    grid = np.broadcast_to(V, (16, 3, 3)).copy()
    ad = angle_delay_truncate(PrecoderGrid(mats=grid), 1)
    assert ad.n_taps == 1
    assert np.allclose(angle_delay_reconstruct(ad), grid, atol=1e-12)


def test_angle_delay_short_filter_is_exact(rng):
    taps = rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2))
    grid = np.fft.fft(taps, n=16, axis=0)
    ad = angle_delay_truncate(grid, 4)
    assert np.allclose(ad.taps[:3], taps, atol=1e-12)
    assert np.allclose(angle_delay_reconstruct(ad), grid, atol=1e-12)


def test_angle_delay_rejects_tap_count(random_unitary):
    grid = np.broadcast_to(random_unitary(2), (8, 2, 2)).copy()
    with pytest.raises(InvalidInput):
        angle_delay_truncate(grid, 0)
    with pytest.raises(InvalidInput):
        angle_delay_truncate(grid, 9)


def test_normalize_power(rng):
    P = rng.standard_normal((5, 3, 3)) + 1j * rng.standard_normal((5, 3, 3))
    P[2] = 0.0
    out = normalize_power(P)
    norms = np.linalg.norm(out, axis=(-2, -1)) ** 2
    assert np.allclose(np.delete(norms, 2), 3.0)
    assert norms[2] == 0.0
