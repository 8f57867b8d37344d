"""Three-level operator basis and small Hermitian exponentials."""

import numpy as np

KX = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex)
KY = np.array([[0, 0, 1j], [0, 0, 0], [-1j, 0, 0]], dtype=complex)
KZ = np.array([[0, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=complex)
K = np.stack([KX, KY, KZ])


def basis(level: int) -> np.ndarray:
    """Basis ket |level> for level in {1, 2, 3}."""
    psi = np.zeros(3, dtype=complex)
    psi[level - 1] = 1.0
    return psi


def hamiltonian(omega_p: float, omega_s: float) -> np.ndarray:
    """Interaction-picture H = omega_p K_x + omega_s K_z."""
    return omega_p * KX + omega_s * KZ


def from_components(chi) -> np.ndarray:
    """chi . (K_x, K_y, K_z) for one vector or a stack of vectors."""
    return np.tensordot(np.asarray(chi), K, axes=([-1], [0]))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def expi(g: np.ndarray) -> np.ndarray:
    """exp(-i G) for Hermitian G (or a stack of them) by spectral decomposition."""
    w, v = np.linalg.eigh(g)
    return (v * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
