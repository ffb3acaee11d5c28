"""Tests for lattice.py: stage unitarity, all-pass responses and Direct Form II conversion."""

import sys
import os

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest

from allpass import MatrixPolynomial, RationalAllPass, evaluate_grid, lattice_to_lccde
from errors import InvalidInput, NotContractive, UnstableInput
from lattice import (
    LatticeParams,
    clip_contractive,
    frequency_response,
    frequency_response_grid,
    lccde_to_lattice,
    n_parameters,
    spectral_norm,
    stability_check,
    t_matrix,
)
from matcore import is_unitary


# --- Stage matrix ---

def test_t_matrix_is_unitary(random_contractive):
    T = t_matrix(random_contractive(3, 0.9)).matrix
    assert T.shape == (6, 6)
    assert is_unitary(T)


@pytest.mark.parametrize("m", [1, 2, 4, 8])
def test_t_matrix_unitary_over_many_draws(rng, random_contractive, m):
    for _ in range(1000):
        T = t_matrix(random_contractive(m, rng.uniform(0.0, 0.99))).matrix
        assert np.linalg.norm(np.conj(T.T) @ T - np.eye(2 * m)) <= 1e-10


def test_t_matrix_of_zero_is_swap():
    T = t_matrix(np.zeros((2, 2)))
    assert np.allclose(T.T12, np.eye(2))
    assert np.allclose(T.T21, np.eye(2))
    assert np.allclose(T.T11, 0.0)


def test_t_matrix_rejects_non_contractive():
    with pytest.raises(NotContractive):
        t_matrix(np.eye(2))


def test_t_matrix_rejects_rectangular():
    with pytest.raises(InvalidInput):
        t_matrix(np.zeros((2, 3)))


def test_clip_contractive_scales_to_margin(rng):
    K = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    K *= 2.0 / spectral_norm(K)
    clipped = clip_contractive(K, 1e-3)
    assert spectral_norm(clipped) == pytest.approx(1.0 - 1e-3)
    # direction kept
    assert np.allclose(clipped / spectral_norm(clipped), K / spectral_norm(K))


def test_clip_contractive_leaves_small_matrices(random_contractive):
    K = random_contractive(3, 0.5)
    assert np.array_equal(clip_contractive(K, 1e-3), K)


# --- Parameters ---

def test_params_reject_non_square_residue():
    with pytest.raises(InvalidInput):
        LatticeParams(kappas=np.zeros((0, 2, 2)), residue=np.zeros((2, 3)))


def test_params_order_and_count(random_lattice):
    params = random_lattice(4, 3)
    assert params.order == 3
    assert params.m == 4
    assert n_parameters(params) == 48
    assert len(params.matrices()) == 3


def test_from_matrices_round_trip(random_lattice):
    params = random_lattice(2, 4)
    again = LatticeParams.from_matrices(params.matrices())
    assert np.array_equal(again.kappas, params.kappas)
    assert np.array_equal(again.residue, params.residue)


def test_stability_check(random_lattice):
    params = random_lattice(3, 3)
    assert stability_check(params)
    bad_kappa = LatticeParams(kappas=np.eye(3)[None], residue=params.residue)
    assert not stability_check(bad_kappa)
    bad_residue = LatticeParams(kappas=params.kappas, residue=2 * params.residue)
    assert not stability_check(bad_residue)


# --- Frequency response ---

def test_response_is_all_pass(random_lattice):
    params = random_lattice(3, 4, 0.95)
    omegas = np.linspace(-np.pi, np.pi, 512, endpoint=False)
    G = frequency_response_grid(params, omegas)
    err = np.linalg.norm(np.conj(np.swapaxes(G, -1, -2)) @ G - np.eye(3), axis=(-2, -1))
    assert np.max(err) <= 1e-8


@pytest.mark.parametrize("order", range(1, 9))
@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_response_all_pass_sweep(random_lattice, m, order):
    params = random_lattice(m, order, 0.95)
    G = frequency_response_grid(params, np.linspace(-np.pi, np.pi, 512, endpoint=False))
    err = np.linalg.norm(np.conj(np.swapaxes(G, -1, -2)) @ G - np.eye(m), axis=(-2, -1))
    assert np.max(err) <= 1e-8


def test_zero_reflections_give_pure_delay(random_unitary):
    R = random_unitary(2)
    params = LatticeParams(kappas=np.zeros((2, 2, 2)), residue=R)
    w = 0.4
    assert np.allclose(frequency_response(params, w), np.exp(-2j * w) * R)


def test_order_one_is_constant(random_unitary):
    R = random_unitary(3)
    params = LatticeParams(kappas=np.zeros((0, 3, 3)), residue=R)
    G = frequency_response_grid(params, [-1.0, 0.0, 2.0])
    assert np.allclose(G, R)


def test_scalar_first_order_section():
    params = LatticeParams(kappas=np.array([[[-0.5]]]), residue=np.array([[1.0]]))
    w = 0.9
    z_inv = np.exp(-1j * w)
    expected = (-0.5 + z_inv) / (1.0 - 0.5 * z_inv)
    assert frequency_response(params, w)[0, 0] == pytest.approx(expected)


# --- Direct Form II conversion ---

def test_scalar_lccde_coefficients():
    params = LatticeParams(kappas=np.array([[[-0.5]]]), residue=np.array([[1.0]]))
    G = lattice_to_lccde(params)
    assert np.allclose(G.num.coeffs[:, 0, 0], [-0.5, 1.0])
    assert np.allclose(G.den.coeffs[:, 0, 0], [1.0, -0.5])


def test_lccde_matches_lattice_response(random_lattice):
    params = random_lattice(3, 3)
    omegas = np.linspace(-np.pi, np.pi, 64, endpoint=False)
    assert np.allclose(
        evaluate_grid(lattice_to_lccde(params), omegas),
        frequency_response_grid(params, omegas),
        atol=1e-10,
    )


@pytest.mark.parametrize("m,order", [(1, 2), (2, 3), (3, 4)])
def test_lattice_lccde_round_trip(random_lattice, m, order):
    params = random_lattice(m, order)
    again = lccde_to_lattice(lattice_to_lccde(params))
    assert again.order == order
    assert np.allclose(again.kappas, params.kappas, atol=1e-8)
    assert np.allclose(again.residue, params.residue, atol=1e-8)


def test_lattice_lccde_round_trip_many(random_lattice):
    omegas = np.linspace(-np.pi, np.pi, 64, endpoint=False)
    for i in range(100):
        m, order = 1 + (i // 6) % 3, 1 + i % 6
        params = random_lattice(m, order)
        again = lccde_to_lattice(lattice_to_lccde(params))
        assert again.order == order
        assert np.max(np.abs(again.kappas - params.kappas), initial=0.0) <= 1e-8
        assert np.max(np.abs(again.residue - params.residue)) <= 1e-8
        diff = frequency_response_grid(again, omegas) - frequency_response_grid(params, omegas)
        assert np.max(np.abs(diff)) <= 1e-8


def test_lccde_to_lattice_rejects_unstable():
    G = RationalAllPass(
        num=MatrixPolynomial(np.array([[[2.0]], [[1.0]]])),
        den=MatrixPolynomial(np.array([[[1.0]], [[0.0]]])),
    )
    with pytest.raises(UnstableInput):
        lccde_to_lattice(G)
