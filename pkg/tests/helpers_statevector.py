"""Dense statevector oracle for cross-checking the tableau simulator.

Same conventions as the package: qubits 1..n, qubit 1 = most significant bit
of the basis index.
"""

import numpy as np

from remit.stabilizer import CLIFFORD_1Q_WORDS, CliffordCircuit

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

PAULI_1Q = {"I": np.eye(2, dtype=complex), "X": _X, "Y": _Y, "Z": _Z}


def _apply_1q(psi: np.ndarray, n: int, j: int, u: np.ndarray) -> np.ndarray:
    psi = psi.reshape([2] * n)
    psi = np.tensordot(u, psi, axes=([1], [j - 1]))
    psi = np.moveaxis(psi, 0, j - 1)
    return psi.reshape(-1)

def _apply_cz(psi: np.ndarray, n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    mask = (((idx >> (n - a)) & 1) == 1) & (((idx >> (n - b)) & 1) == 1)
    psi = psi.copy()
    psi[mask] *= -1
    return psi

def _apply_cnot(psi: np.ndarray, n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    flipped = np.where(((idx >> (n - a)) & 1) == 1, idx ^ (1 << (n - b)), idx)
    out = np.empty_like(psi)
    out[flipped] = psi[idx]
    return out

def run_statevector(circuit: CliffordCircuit) -> np.ndarray:
    n = circuit.n
    psi = np.zeros(1 << n, dtype=complex)
    psi[0] = 1.0
    for g in circuit.gates:
        if g.g == "H":
            psi = _apply_1q(psi, n, g.q[0], _H)
        elif g.g == "S":
            psi = _apply_1q(psi, n, g.q[0], _S)
        elif g.g == "X":
            psi = _apply_1q(psi, n, g.q[0], _X)
        elif g.g == "Z":
            psi = _apply_1q(psi, n, g.q[0], _Z)
        elif g.g == "CZ":
            psi = _apply_cz(psi, n, g.q[0], g.q[1])
        elif g.g == "CNOT":
            psi = _apply_cnot(psi, n, g.q[0], g.q[1])
        elif g.g == "C1":
            for letter in CLIFFORD_1Q_WORDS[g.idx]:
                psi = _apply_1q(psi, n, g.q[0], _H if letter == "H" else _S)
        else:
            raise ValueError(g.g)
    return psi

def pauli_matrix(letters: str, phase: int = 1) -> np.ndarray:
    out = np.array([[phase]], dtype=complex)
    for c in letters:
        out = np.kron(out, PAULI_1Q[c])
    return out

def statevector_distribution(circuit: CliffordCircuit) -> np.ndarray:
    psi = run_statevector(circuit)
    return np.abs(psi) ** 2
