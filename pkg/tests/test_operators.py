from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from ramanpass import operators as ops


def test_su2_commutation_relations():
    # [K_a, K_b] = i eps_abc K_c
    assert np.allclose(ops.commutator(ops.KX, ops.KY), 1j * ops.KZ)
    assert np.allclose(ops.commutator(ops.KY, ops.KZ), 1j * ops.KX)
    assert np.allclose(ops.commutator(ops.KZ, ops.KX), 1j * ops.KY)


def test_generators_are_hermitian():
    for k in ops.K:
        assert np.array_equal(k, k.conj().T)


def test_hamiltonian_structure():
    h = ops.hamiltonian(0.7, 1.3)
    assert np.array_equal(h, h.conj().T)
    assert np.all(np.diag(h) == 0)
    assert h[0, 2] == 0 and h[2, 0] == 0
    assert h[0, 1] == 0.7 and h[1, 2] == 1.3


def test_basis():
    assert np.array_equal(ops.basis(1), [1, 0, 0])
    assert np.array_equal(ops.basis(3), [0, 0, 1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(-3, 3))
def test_expi_matches_scipy(pulses, h):
    g = h * ops.hamiltonian(*pulses)
    np.testing.assert_allclose(ops.expi(g), expm(-1j * g), atol=1e-12)


def test_expi_batched_and_unitary():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(20, 3, 3)) + 1j * rng.normal(size=(20, 3, 3))
    g = a + a.conj().transpose(0, 2, 1)
    u = ops.expi(g)
    eye = np.broadcast_to(np.eye(3), u.shape)
    np.testing.assert_allclose(u @ u.conj().transpose(0, 2, 1), eye, atol=1e-12)
    for gk, uk in zip(g, u):
        np.testing.assert_allclose(uk, expm(-1j * gk), atol=1e-11)


@pytest.mark.parametrize("chi", [(0, 0, 1), (1, 0, 0), (0.5, -0.5, np.sqrt(0.5))])
def test_from_components(chi):
    m = ops.from_components(chi)
    assert np.allclose(m, chi[0] * ops.KX + chi[1] * ops.KY + chi[2] * ops.KZ)
