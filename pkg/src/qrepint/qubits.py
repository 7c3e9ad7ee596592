"""Qubit operators in the (|0>, |1>) basis with |1> the excited state.

With this ordering sigma_z = |1><1| - |0><0| = diag(-1, +1), so the
thermal magnetization Tr[sigma_z omega_beta] equals 1 - 2 r with r the
ground-state population, and sigma_plus = (sigma_x + i sigma_y)/2 = |1><0|
raises.
"""

import numpy as np

from .core import FactorLayout, Operator

sx = np.array([[0, 1], [1, 0]], dtype=complex)
sy = np.array([[0, 1j], [-1j, 0]], dtype=complex)
sz = np.array([[-1, 0], [0, 1]], dtype=complex)
sp = np.array([[0, 0], [1, 0]], dtype=complex)   # |1><0|
sm = np.array([[0, 1], [0, 0]], dtype=complex)   # |0><1|
n_excited = np.array([[0, 0], [0, 1]], dtype=complex)
id2 = np.eye(2, dtype=complex)

QUBIT = FactorLayout((2,))


def qubit_hamiltonian(energy: float) -> Operator:
    """H = E |1><1| for a single qubit."""
    return Operator(energy * n_excited, QUBIT)
