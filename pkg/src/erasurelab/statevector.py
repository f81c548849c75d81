"""Dense statevector simulator used as an independent oracle.

Kept deliberately separate from the tableau code path: gates are built
from explicit matrices and measurements from Born-rule projections, so
agreement between the two engines is a meaningful cross-check.  Random
measurements consume one uniform draw with the same outcome convention as
the tableau (outcome 1 iff u < p1), which makes shot-for-shot comparison
under a shared stream possible.
"""

from __future__ import annotations

import numpy as np

_DET_TOL = 1e-9


def _rot(axis: str, angle: float) -> np.ndarray:
    c = np.cos(angle / 2)
    s = np.sin(angle / 2)
    if axis == "x":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == "y":
        return np.array([[c, -s], [s, c]])
    return np.array([[np.exp(-1j * angle / 2), 0], [0, np.exp(1j * angle / 2)]])


def gate_matrix(gate: str, angle: float | None = None) -> np.ndarray:
    if gate == "H":
        return np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    if gate == "X":
        return np.array([[0, 1], [1, 0]], dtype=complex)
    if gate == "Y":
        return np.array([[0, -1j], [1j, 0]])
    if gate == "Z":
        return np.array([[1, 0], [0, -1]], dtype=complex)
    if gate == "RX":
        return _rot("x", angle)
    if gate == "RY":
        return _rot("y", angle)
    if gate == "RZ":
        return _rot("z", angle)
    if gate == "CZ":
        return np.diag([1, 1, 1, -1]).astype(complex)
    raise ValueError(f"unknown gate {gate!r}")


class StateVector:
    def __init__(self, n_qubits: int):
        self.n = n_qubits
        self.psi = np.zeros(2**n_qubits, dtype=complex)
        self.psi[0] = 1.0

    def copy(self) -> "StateVector":
        sv = StateVector(self.n)
        sv.psi = self.psi.copy()
        return sv

    def _apply_matrix(self, mat: np.ndarray, targets: tuple[int, ...]) -> None:
        n = self.n
        k = len(targets)
        axes = list(targets)  # qubit q <-> axis q: qubit 0 is the most significant bit
        psi = self.psi.reshape([2] * n)
        psi = np.moveaxis(psi, axes, range(k))
        shape = psi.shape
        psi = psi.reshape(2**k, -1)
        psi = mat @ psi
        psi = psi.reshape(shape)
        psi = np.moveaxis(psi, range(k), axes)
        self.psi = psi.reshape(-1)

    def apply_gate(self, gate: str, targets, angle: float | None = None) -> None:
        targets = tuple(targets)
        self._apply_matrix(gate_matrix(gate, angle), targets)

    def prob_one(self, q: int) -> float:
        psi = self.psi.reshape([2] * self.n)
        psi = np.moveaxis(psi, q, 0)
        return float(np.sum(np.abs(psi[1]) ** 2))

    def measure_z(self, q: int, rng: np.random.Generator) -> int:
        """Projective Z measurement; returns the bit (0 for |0>)."""
        p1 = self.prob_one(q)
        if p1 < _DET_TOL:
            bit = 0
        elif p1 > 1 - _DET_TOL:
            bit = 1
        else:
            bit = 1 if rng.random() < p1 else 0
        psi = self.psi.reshape([2] * self.n)
        psi = np.moveaxis(psi, q, 0).copy()
        psi[1 - bit] = 0.0
        norm = np.linalg.norm(psi)
        psi /= norm
        self.psi = np.moveaxis(psi, 0, q).reshape(-1)
        return bit

    def probabilities(self) -> np.ndarray:
        """Probability of each basis outcome, indexed with qubit 0 as MSB."""
        return np.abs(self.psi) ** 2

    def reduced_density(self, keep: list[int]) -> np.ndarray:
        """Density matrix of the kept qubits (in the order given)."""
        n = self.n
        keep_axes = list(keep)
        other = [a for a in range(n) if a not in keep_axes]
        psi = self.psi.reshape([2] * n)
        psi = np.transpose(psi, keep_axes + other)
        psi = psi.reshape(2 ** len(keep), -1)
        return psi @ psi.conj().T
