"""Stabilizer tableau simulator with per-qubit leakage and erasure tracking.

The tableau is the standard binary-symplectic representation: 2n rows of
(x | z | sign) bits, rows 0..n-1 holding destabilizers and rows n..2n-1
holding stabilizers.  Rows are bit-packed into uint64 words (one word per
row for up to 64 qubits), which keeps the phase bookkeeping of row
products at popcount cost.  On top of the usual Clifford/measurement
machinery, each qubit carries a status flag so that atoms which have
decayed out of the metastable computational manifold (or been lost
outright) stop participating in the dynamics and read out dark.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

BRIGHT = 0
DARK = 1

# Angles are matched against multiples of pi/2 to this absolute tolerance.
_ANGLE_TOL = 1e-9

_U64 = np.uint64


class QubitStatus(enum.Enum):
    ACTIVE = "active"
    LEAKED_DETECTABLE = "leaked_detectable"
    LEAKED_SILENT = "leaked_silent"
    ERASURE_FLAGGED = "erasure_flagged"


class GateError(ValueError):
    """Raised for out-of-range targets or non-Clifford rotation angles."""


def shot_rng(master_seed: int, shot_index: int) -> np.random.Generator:
    """Counter-based per-shot stream: independent of execution order."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((master_seed, shot_index))))


def _quarter_turns(angle: float) -> int:
    k = round(angle / (np.pi / 2))
    if abs(angle - k * np.pi / 2) > _ANGLE_TOL:
        raise GateError(f"non-Clifford rotation angle {angle!r}")
    return k % 4


# Single-qubit gates compiled to words over the H/S primitives (circuit
# order, i.e. first element acts first).  Verified against the dense
# statevector implementation in the test suite.
_WORDS_1Q = {
    ("H", 0): ("h",),
    ("X", 0): ("h", "s", "s", "h"),
    ("Y", 0): ("s", "s", "h", "s", "s", "h"),
    ("Z", 0): ("s", "s"),
    ("RX", 0): (),
    ("RX", 1): ("h", "s", "h"),
    ("RX", 2): ("h", "s", "s", "h"),
    ("RX", 3): ("h", "s", "s", "s", "h"),
    ("RY", 0): (),
    ("RY", 1): ("s", "s", "h"),
    ("RY", 2): ("s", "s", "h", "s", "s", "h"),
    ("RY", 3): ("h", "s", "s"),
    ("RZ", 0): (),
    ("RZ", 1): ("s",),
    ("RZ", 2): ("s", "s"),
    ("RZ", 3): ("s", "s", "s"),
}

ONE_QUBIT_GATES = {"H", "X", "Y", "Z", "RX", "RY", "RZ"}
TWO_QUBIT_GATES = {"CZ"}


def _phase_from_masks(x1: int, z1: int, x2: int, z2: int) -> int:
    """Sum over qubits of the CHP g function for row (x1,z1) multiplying
    into row (x2,z2), as (plus - minus) popcounts."""
    y1 = x1 & z1
    xo = x1 & ~z1
    zo = ~x1 & z1
    plus = (y1 & z2 & ~x2) | (xo & z2 & x2) | (zo & x2 & ~z2)
    minus = (y1 & x2 & ~z2) | (xo & z2 & ~x2) | (zo & x2 & z2)
    return plus.bit_count() - minus.bit_count()


@dataclass
class TableauState:
    """Stabilizer state of ``n`` qubits plus classical status bookkeeping.

    ``x``/``z`` are (2n,) uint64 arrays (bit q of row word = qubit q),
    ``r`` the per-row sign bit.
    """

    n: int
    x: np.ndarray
    z: np.ndarray
    r: np.ndarray
    status: list[QubitStatus]
    leak_time: list[float | None]
    rng: np.random.Generator

    @classmethod
    def zeros(cls, n_qubits: int, rng: np.random.Generator | None = None) -> "TableauState":
        """All-|0> state: destabilizers X_i, stabilizers Z_i."""
        if not 1 <= n_qubits <= 64:
            raise GateError("supported qubit count is 1..64")
        x = np.zeros(2 * n_qubits, dtype=_U64)
        z = np.zeros(2 * n_qubits, dtype=_U64)
        r = np.zeros(2 * n_qubits, dtype=np.uint8)
        for i in range(n_qubits):
            x[i] = _U64(1) << _U64(i)
            z[n_qubits + i] = _U64(1) << _U64(i)
        if rng is None:
            rng = np.random.default_rng()
        return cls(n=n_qubits, x=x, z=z, r=r,
                   status=[QubitStatus.ACTIVE] * n_qubits,
                   leak_time=[None] * n_qubits, rng=rng)

    def copy(self) -> "TableauState":
        return TableauState(n=self.n, x=self.x.copy(), z=self.z.copy(), r=self.r.copy(),
                            status=list(self.status), leak_time=list(self.leak_time),
                            rng=self.rng)

    def is_active(self, q: int) -> bool:
        return self.status[q] is QubitStatus.ACTIVE

    # ---- primitive symplectic updates (all rows at once) ----

    def _h(self, q: int) -> None:
        m = _U64(1) << _U64(q)
        qq = _U64(q)
        xb = self.x & m
        zb = self.z & m
        self.r ^= ((xb >> qq) & (zb >> qq)).astype(np.uint8)
        diff = xb ^ zb
        self.x ^= diff
        self.z ^= diff

    def _s(self, q: int) -> None:
        m = _U64(1) << _U64(q)
        qq = _U64(q)
        xb = self.x & m
        self.r ^= ((xb >> qq) & ((self.z & m) >> qq)).astype(np.uint8)
        self.z ^= xb

    def _cnot(self, c: int, t: int) -> None:
        cc, tt = _U64(c), _U64(t)
        one = _U64(1)
        xc = (self.x >> cc) & one
        zt = (self.z >> tt) & one
        xt = (self.x >> tt) & one
        zc = (self.z >> cc) & one
        self.r ^= (xc & zt & (xt ^ zc ^ one)).astype(np.uint8)
        self.x ^= xc << tt
        self.z ^= zt << cc

    # ---- public gate interface ----

    def _check_targets(self, targets: tuple[int, ...]) -> None:
        if len(set(targets)) != len(targets):
            raise GateError(f"duplicate targets {targets}")
        for q in targets:
            if not 0 <= q < self.n:
                raise GateError(f"target {q} out of range for {self.n} qubits")

    def apply_gate(self, gate: str, targets, angle: float | None = None) -> None:
        """Conjugate the tableau by a named Clifford gate.

        Non-active targets are skipped: a leaked atom is outside the
        computational subspace, so single-qubit drive does nothing to its
        frozen record and a CZ with a leaked partner imparts no phase.
        """
        targets = tuple(targets)
        self._check_targets(targets)
        if gate in ONE_QUBIT_GATES:
            if len(targets) != 1:
                raise GateError(f"{gate} takes one target, got {targets}")
            (q,) = targets
            if not self.is_active(q):
                return
            k = _quarter_turns(angle) if gate in ("RX", "RY", "RZ") else 0
            for prim in _WORDS_1Q[(gate, k)]:
                if prim == "h":
                    self._h(q)
                else:
                    self._s(q)
        elif gate == "CZ":
            if len(targets) != 2:
                raise GateError(f"CZ takes two targets, got {targets}")
            a, b = targets
            if not (self.is_active(a) and self.is_active(b)):
                return
            self._h(b)
            self._cnot(a, b)
            self._h(b)
        else:
            raise GateError(f"unsupported gate {gate!r}")

    # ---- measurement ----

    def _rowsum(self, h: int, i: int) -> None:
        """Row h <- row h * row i."""
        phase = (2 * int(self.r[h]) + 2 * int(self.r[i]) + _phase_from_masks(
            int(self.x[i]), int(self.z[i]), int(self.x[h]), int(self.z[h]))) % 4
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]
        self.r[h] = phase // 2

    def measure_z(self, q: int) -> int:
        """Z-basis readout: |0> -> BRIGHT, |1> -> DARK; leaked/lost -> DARK.

        Active qubits get the standard projective update; the random
        branch consumes exactly one uniform draw from the shot stream.
        """
        if not 0 <= q < self.n:
            raise GateError(f"qubit {q} out of range")
        if not self.is_active(q):
            return DARK
        return DARK if self._measure_z_bit(q) else BRIGHT

    def _measure_z_bit(self, q: int) -> int:
        n = self.n
        m = _U64(1) << _U64(q)
        hit = np.nonzero(self.x[n:] & m)[0]
        if hit.size:
            p = n + int(hit[0])
            rows = np.nonzero(self.x & m)[0]
            for i in rows:
                if i != p:
                    self._rowsum(int(i), p)
            self.x[p - n] = self.x[p]
            self.z[p - n] = self.z[p]
            self.r[p - n] = self.r[p]
            self.x[p] = 0
            self.z[p] = m
            bit = 1 if self.rng.random() < 0.5 else 0
            self.r[p] = bit
            return bit
        # deterministic: accumulate the stabilizer rows indexed by the
        # destabilizers that contain X_q
        sx = sz = 0
        sr = 0
        for i in np.nonzero(self.x[:n] & m)[0]:
            j = n + int(i)
            phase = (2 * sr + 2 * int(self.r[j]) + _phase_from_masks(
                int(self.x[j]), int(self.z[j]), sx, sz)) % 4
            sx ^= int(self.x[j])
            sz ^= int(self.z[j])
            sr = phase // 2
        return sr

    # ---- leakage / erasure ----

    def mark_leaked(self, q: int, detectable: bool, timestamp: float) -> None:
        """Take qubit q out of the computational subspace.

        The qubit is projected out of the stabilizer group by an internal
        (discarded) Z measurement, which leaves the remaining qubits in a
        valid stabilizer description of the post-leak mixed state; the
        qubit's tableau columns are frozen from here on.
        """
        if not self.is_active(q):
            raise RuntimeError(f"qubit {q} leaked twice (noise sequencing bug)")
        self._measure_z_bit(q)
        self.status[q] = (
            QubitStatus.LEAKED_DETECTABLE if detectable else QubitStatus.LEAKED_SILENT
        )
        self.leak_time[q] = timestamp

    def erasure_check(self, qubits, fp_rate: float, fn_rate: float) -> list[int]:
        """Ground-state imaging: report detectable leaks, with false rates.

        Detected atoms are heated out of the trap by the imaging light, so
        a qubit reported once transitions to ERASURE_FLAGGED and is not
        reported by later checks.  False positives on active qubits are a
        record-keeping event only.
        """
        if not (0.0 <= fp_rate <= 1.0 and 0.0 <= fn_rate <= 1.0):
            raise ValueError("erasure check rates must lie in [0, 1]")
        reported = []
        for q in sorted(qubits):
            st = self.status[q]
            if st is QubitStatus.LEAKED_DETECTABLE:
                if fn_rate == 0.0 or self.rng.random() >= fn_rate:
                    reported.append(q)
                    self.status[q] = QubitStatus.ERASURE_FLAGGED
            elif st is QubitStatus.ACTIVE:
                if fp_rate > 0.0 and self.rng.random() < fp_rate:
                    reported.append(q)
        return reported

    # ---- diagnostics (used by tests and the selftest gate) ----

    def _symplectic_product(self, i: int, j: int) -> int:
        a = (int(self.x[i]) & int(self.z[j])).bit_count()
        b = (int(self.z[i]) & int(self.x[j])).bit_count()
        return (a + b) % 2

    def validate(self) -> None:
        """Check the defining symplectic invariants; raises on violation."""
        n = self.n
        for i in range(n):
            for j in range(n):
                want = 1 if i == j else 0
                got = self._symplectic_product(i, n + j)
                if got != want:
                    raise AssertionError(f"destab {i} vs stab {j}: product {got}, want {want}")
                if self._symplectic_product(n + i, n + j) != 0:
                    raise AssertionError(f"stabilizers {i},{j} do not commute")
                if self._symplectic_product(i, j) != 0:
                    raise AssertionError(f"destabilizers {i},{j} do not commute")
        rows = [(int(self.x[n + i]) << self.n) | int(self.z[n + i]) for i in range(n)]
        if _gf2_rank_words(rows) != n:
            raise AssertionError("stabilizer block is rank deficient")

    def pauli_expectation(self, xs: np.ndarray, zs: np.ndarray) -> int:
        """Expectation of a Pauli string: +1/-1 if (anti)stabilized, else 0.

        Per-qubit encoding follows the row convention: (x,z) = (1,0) is X,
        (0,1) is Z, and (1,1) is the Hermitian Y.
        """
        xw = _pack_bits(xs)
        zw = _pack_bits(zs)
        n = self.n
        for j in range(n):
            anti = ((xw & int(self.z[n + j])).bit_count()
                    + (zw & int(self.x[n + j])).bit_count()) % 2
            if anti:
                return 0
        sx = sz = 0
        sr = 0
        for i in range(n):
            anti = ((xw & int(self.z[i])).bit_count()
                    + (zw & int(self.x[i])).bit_count()) % 2
            if anti:
                j = n + i
                phase = (2 * sr + 2 * int(self.r[j]) + _phase_from_masks(
                    int(self.x[j]), int(self.z[j]), sx, sz)) % 4
                sx ^= int(self.x[j])
                sz ^= int(self.z[j])
                sr = phase // 2
        if sx != xw or sz != zw:
            return 0
        return -1 if sr else 1


def _pack_bits(bits) -> int:
    word = 0
    for q, b in enumerate(np.asarray(bits).astype(int)):
        if b:
            word |= 1 << q
    return word


def _gf2_rank_words(rows: list[int]) -> int:
    basis: dict[int, int] = {}
    for row in rows:
        while row:
            lead = row.bit_length() - 1
            if lead in basis:
                row ^= basis[lead]
            else:
                basis[lead] = row
                break
    return len(basis)


def apply_clifford(state: TableauState, gate: str, targets, angle: float | None = None) -> TableauState:
    """Functional wrapper over TableauState.apply_gate (mutates and returns)."""
    state.apply_gate(gate, targets, angle)
    return state
