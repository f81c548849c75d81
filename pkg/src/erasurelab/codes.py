"""[[4,2,2]] code: algebra, circuit builders, and the decoder family.

The code encodes two logical qubits in four physical qubits with
stabilizers Z1Z2Z3Z4 and X1X2X3X4 (qubits numbered 1-4 in the math,
0-3 in code).  Logical representatives:

    X_L1 = X1 X3    X_L2 = X1 X2
    Z_L1 = Z1 Z2    Z_L2 = Z1 Z3

Encoded basis states are GHZ states, prepared by a five-CZ circuit with
one flag qubit.  The preparation builds the star graph state on the data
qubits (center qubit 1) and closes it back into the computational frame;
the flag verifies the Z1Z4 correlation of the finished GHZ state through
two CZ couplings, so any single bit-flip-type fault that would leave an
undetected logical error darkens the flag instead.  The exact gate order
is pinned by the exhaustive single-fault enumeration in the test suite
and by a golden file.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tableau import BRIGHT, DARK

HALF_PI = float(np.pi / 2)

# Logical operator supports (0-indexed data qubits) per measurement basis:
# Z basis reads Z_L1 = (0,1), Z_L2 = (0,2); X basis reads X_L1 = (0,2),
# X_L2 = (0,1).
LOGICAL_PAIRS = {"Z": ((0, 1), (0, 2)), "X": ((0, 2), (0, 1))}

# Qubits deliberately flipped before terminal readout so that an all-lost
# (all-dark) block cannot masquerade as a valid codeword.
FLIP_QUBITS = (0, 1)

POSTSELECT_MODES = ("parity", "parity+flag", "parity+flag+erasure")


@dataclass(frozen=True)
class Code422:
    """Stabilizers and logicals as (x-mask, z-mask) bit vectors."""

    n: int = 4

    @property
    def stabilizers(self):
        zzzz = (np.zeros(4, np.uint8), np.ones(4, np.uint8))
        xxxx = (np.ones(4, np.uint8), np.zeros(4, np.uint8))
        return [zzzz, xxxx]

    @property
    def logical_x(self):
        x1 = np.array([1, 0, 1, 0], np.uint8)
        x2 = np.array([1, 1, 0, 0], np.uint8)
        return [(x1, np.zeros(4, np.uint8)), (x2, np.zeros(4, np.uint8))]

    @property
    def logical_z(self):
        z1 = np.array([1, 1, 0, 0], np.uint8)
        z2 = np.array([1, 0, 1, 0], np.uint8)
        return [(np.zeros(4, np.uint8), z1), (np.zeros(4, np.uint8), z2)]

    @staticmethod
    def _commute(a, b) -> bool:
        ax, az = a
        bx, bz = b
        return int((ax & bz).sum() + (az & bx).sum()) % 2 == 0

    def verify(self) -> None:
        s = self.stabilizers
        assert self._commute(s[0], s[1]), "stabilizers must commute"
        for lx in self.logical_x:
            for st in s:
                assert self._commute(lx, st)
        for lz in self.logical_z:
            for st in s:
                assert self._commute(lz, st)
        for i, lx in enumerate(self.logical_x):
            for j, lz in enumerate(self.logical_z):
                same = not self._commute(lx, lz)
                assert same == (i == j), "logical algebra broken"


# ---------------------------------------------------------------------------
# Circuit representation
# ---------------------------------------------------------------------------

# Targets are physical qubit indices, or ("A", k) / ("B", k) slot
# references resolved after ancilla-block selection in teleportation.
SlotRef = tuple


@dataclass
class CircuitOp:
    kind: str  # prepare | gate | move | idle | erasure_check | select_blocks | measure
    targets: tuple = ()
    gate: str | None = None
    angle: float | None = None
    zone: str = "storage"
    duration: float = 0.0
    n_trips: int = 0
    sensitive: bool = False
    echoed: bool = False
    noise_class: str | None = None  # sq | rydberg | None
    label: str = ""

    def export_line(self) -> str:
        def tname(t):
            return t if isinstance(t, int) else f"{t[0]}{t[1]}"

        opcode = self.gate.lower() if self.kind == "gate" else self.kind
        tgt = ",".join(str(tname(t)) for t in self.targets) or "-"
        ang = f"{self.angle:.10g}" if self.angle is not None else "-"
        cols = [opcode, tgt, ang, self.zone, f"{self.duration:.10g}"]
        extras = []
        if self.kind == "move":
            extras.append(f"trips={self.n_trips}")
        if self.kind == "idle":
            extras.append(f"sensitive={int(self.sensitive)}")
            extras.append(f"echoed={int(self.echoed)}")
        if self.label:
            extras.append(f"label={self.label}")
        return " ".join(cols + extras)


@dataclass
class Circuit:
    name: str
    n_qubits: int
    ops: list = field(default_factory=list)
    data_qubits: tuple = ()
    flag_qubit: int | None = None
    basis: str = "Z"
    blocks: dict = field(default_factory=dict)  # name -> (data tuple, flag)
    input_block: str | None = None
    n_ancilla_blocks: int = 0
    adaptive: bool = False
    meta: dict = field(default_factory=dict)

    def export_text(self) -> str:
        header = f"# circuit {self.name} qubits={self.n_qubits} basis={self.basis}\n"
        return header + "\n".join(op.export_line() for op in self.ops) + "\n"

    def durations_ok(self) -> bool:
        return all(op.duration >= 0 for op in self.ops)


@dataclass
class ShotRecord:
    """Everything a shot produces.  Decoders may read outcomes, the flag,
    erasure reports and the block selection; the fault ledger is
    diagnostics only.  ``final_reports`` is the subset of the erasure
    record from the pre-measurement check (an atom detected and heated
    away by an earlier check does not reappear there)."""

    outcomes: dict  # qubit -> 0 (bright) / 1 (dark)
    erasure_reports: list  # (time, qubit), all checks
    final_reports: list = field(default_factory=list)
    selected_blocks: list | None = None
    fault_ledger: list = field(default_factory=list)
    aborted: bool = False


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

TRIP_TIME = 2.5e-3  # one-way storage<->gate transport, seconds
T_PREP_SENSITIVE = 0.030  # equator time accumulated across one block's circuit
T_1Q_GATE = 1.13e-3
# Spin readout visits the gate zone for the blow-out; with the encode
# schedule below this brings the array-averaged moving loss to the
# benchmarked ~2.6% per qubit.
READOUT_TRIPS = 3


def _g(gate, targets, angle=None, zone="storage", noise="sq", duration=T_1Q_GATE, label=""):
    return CircuitOp(kind="gate", gate=gate, targets=tuple(targets), angle=angle,
                     zone=zone, duration=duration, noise_class=noise, label=label)


def _cz(a, b):
    """Native entangling cycle: the CZ plus the per-atom local phase
    corrections that cancel the single-qubit phase the gate pulse leaves
    behind.  The corrected cycle is an exact CZ, so the corrections enter
    the simulation as identity gates carrying Rydberg-class noise (they
    are driven by the same beam as the entangling pulse)."""
    return [
        CircuitOp(kind="gate", gate="CZ", targets=(a, b), zone="gate",
                  duration=0.0, noise_class="rydberg"),
        CircuitOp(kind="gate", gate="RZ", targets=(a,), angle=0.0, zone="gate",
                  duration=0.0, noise_class="rydberg", label="phase_correction"),
    ]


def _move(targets, trips=1):
    return CircuitOp(kind="move", targets=tuple(targets), n_trips=trips,
                     duration=TRIP_TIME * trips)


def _idle(targets, duration, sensitive, echoed=False, label=""):
    return CircuitOp(kind="idle", targets=tuple(targets), duration=duration,
                     sensitive=sensitive, echoed=echoed, label=label)


def encoding_ops(data, flag, include_idle=True, t_prep=T_PREP_SENSITIVE):
    """Flagged GHZ preparation on ``data`` (4 qubits) plus ``flag``.

    The three star-edge CZ gates entangle the data in the graph frame;
    after the closing rotations return the data to the computational
    frame, the flag (held on the superposition equator) picks up the
    Z_{d0} Z_{d1} correlation of the finished GHZ state through two more
    CZ gates, so it closes back to bright only on valid codewords.  The
    flag pair must overlap {d0, d3} on exactly one qubit: the one
    dangerous single fault is a bit flip on the star center between its
    second and third CZ, which lands on the data as the {d0, d3} pattern
    and must darken the flag.  Five CZ gates total, executed one at a
    time in the gate zone; one sensitive idle window accounts for the
    accumulated transport and equator time of the whole block.
    """
    d0, d1, d2, d3 = data
    f = flag
    ops = [
        _g("RY", [d0], -HALF_PI),
        _g("RY", [d1], HALF_PI),
        _g("RY", [d2], HALF_PI),
        _g("RY", [d3], HALF_PI),
        _g("RY", [f], HALF_PI),
        _move([d0, d1]),
        *_cz(d0, d1),
        _move([d1]),
        _move([d2]),
        *_cz(d0, d2),
        _move([d2]),
        _move([d3]),
        *_cz(d0, d3),
    ]
    if include_idle:
        ops.append(_idle([d0, d1, d2, d3, f], t_prep, sensitive=True, label="prep_window"))
    ops += [
        _g("RY", [d1], -HALF_PI),
        _g("RY", [d2], -HALF_PI),
        _g("RY", [d3], -HALF_PI),
        _move([d3]),
        _move([f]),
        *_cz(f, d0),
        _move([d0]),
        _move([d1]),
        *_cz(f, d1),
        _move([d1, f]),
        _g("RY", [f], -HALF_PI),
    ]
    return ops


def build_encoding(target: str = "ZZ", include_idle: bool = False) -> Circuit:
    """Standalone encoding circuit (no wait, no readout), for inspection
    and the fault-tolerance enumeration.  target XX appends the
    transversal RY(pi/2) that maps |00>_L to |++>_L."""
    if target not in ("ZZ", "XX"):
        raise ValueError(f"target must be ZZ or XX, got {target!r}")
    data = (0, 1, 2, 3)
    flag = 4
    ops = [CircuitOp(kind="prepare", targets=(0, 1, 2, 3, 4))]
    ops += encoding_ops(data, flag, include_idle=include_idle)
    if target == "XX":
        ops += [_g("RY", [q], HALF_PI) for q in data]
    circ = Circuit(name=f"encode_{target.lower()}", n_qubits=5, ops=ops,
                   data_qubits=data, flag_qubit=flag, basis="Z" if target == "ZZ" else "X")
    return circ


def build_memory_experiment(target: str = "ZZ", t_wait: float = 0.0,
                            basis: str | None = None) -> Circuit:
    """Encode-hold-decode circuit with mid-hold echo and erasure check.

    The hold is echoed (global pi pulse at the midpoint) so dephasing
    follows the exponential echo-limited law.  Before terminal readout
    the first two data qubits are deliberately flipped; the expected
    no-error patterns are dark-dark-bright-bright or its complement.
    """
    if t_wait < 0:
        raise ValueError("t_wait must be nonnegative")
    if basis is None:
        basis = "Z" if target == "ZZ" else "X"
    if basis not in ("Z", "X"):
        raise ValueError(f"basis must be Z or X, got {basis!r}")
    data = (0, 1, 2, 3)
    flag = 4
    everyone = (0, 1, 2, 3, 4)
    ops = [CircuitOp(kind="prepare", targets=everyone)]
    ops += encoding_ops(data, flag)
    if target == "XX":
        ops += [_g("RY", [q], HALF_PI, label="state_rotation") for q in data]
    ops.append(_idle(everyone, t_wait / 2, sensitive=True, echoed=True, label="hold"))
    ops += [_g("RX", [q], np.pi, label="echo") for q in data]
    ops.append(_idle(everyone, t_wait / 2, sensitive=True, echoed=True, label="hold"))
    ops.append(CircuitOp(kind="erasure_check", targets=everyone, label="final"))
    if basis == "X":
        ops += [_g("RY", [q], HALF_PI, label="readout_rotation") for q in data]
    ops += [_g("X", [q], label="flip_trick") for q in FLIP_QUBITS]
    ops.append(_move(everyone, trips=READOUT_TRIPS))
    ops.append(CircuitOp(kind="measure", targets=everyone))
    return Circuit(name=f"memory_{target.lower()}_{basis.lower()}", n_qubits=5, ops=ops,
                   data_qubits=data, flag_qubit=flag, basis=basis,
                   meta={"target": target, "t_wait": t_wait})


# Echoed cross-block span of the teleportation sequence: five blocks
# encoded one at a time through the gate zone, the Bell-pair and
# Bell-measurement stages, and the adaptive-control latency.
T_SEQUENCING = 0.285


def build_teleportation(adaptive: bool, n_ancilla_blocks: int = 4,
                        input_state: str = "ZZ",
                        t_sequencing: float = T_SEQUENCING) -> Circuit:
    """Logical teleportation between code blocks with ancilla selection.

    n ancilla blocks are flag-encoded in |00>_L; a mid-circuit erasure
    check drives the selection of two blocks (first-two-clean with a
    fewest-erasures fallback when adaptive, a uniform draw otherwise).
    Slot A is rotated to |++>_L and fused to slot B by transversal CNOT,
    the input block is Bell-measured against slot A (transversal CNOT,
    X-basis readout of the input, Z-basis readout of A), and the output
    block B carries the state up to a recorded Pauli frame.  All blocks
    are imaged together at the end; frame corrections are classical.
    """
    if n_ancilla_blocks < 2:
        raise ValueError("need at least two ancilla blocks")
    if input_state not in ("ZZ", "XX"):
        raise ValueError(f"input_state must be ZZ or XX, got {input_state!r}")
    basis = "Z" if input_state == "ZZ" else "X"
    blocks = {"I": (tuple(range(0, 4)), 4)}
    for i in range(n_ancilla_blocks):
        base = 5 * (i + 1)
        blocks[f"anc{i}"] = (tuple(range(base, base + 4)), base + 4)
    n_qubits = 5 * (n_ancilla_blocks + 1)
    everyone = tuple(range(n_qubits))

    idata, iflag = blocks["I"]
    a_ref = [("A", k) for k in range(4)]
    b_ref = [("B", k) for k in range(4)]

    ops = [CircuitOp(kind="prepare", targets=everyone)]
    ops += encoding_ops(idata, iflag)
    if input_state == "XX":
        ops += [_g("RY", [q], HALF_PI, label="state_rotation") for q in idata]
    for i in range(n_ancilla_blocks):
        bdata, bflag = blocks[f"anc{i}"]
        ops += encoding_ops(bdata, bflag)
    ops.append(CircuitOp(kind="erasure_check", targets=everyone, label="selection"))
    ops.append(CircuitOp(kind="select_blocks", label="adaptive" if adaptive else "random"))
    # form the logical Bell pair between the selected blocks
    ops += [_g("RY", [a_ref[k]], HALF_PI, label="bell_rotation") for k in range(4)]
    for k in range(4):
        ops.append(_move([a_ref[k], b_ref[k]]))
        ops.append(_g("RY", [b_ref[k]], -HALF_PI))
        ops.extend(_cz(a_ref[k], b_ref[k]))
        ops.append(_g("RY", [b_ref[k]], HALF_PI))
        ops.append(_move([a_ref[k], b_ref[k]]))
    ops += [_g("RX", [q], np.pi, label="echo") for q in everyone]
    # transversal Bell measurement couplings: CNOT input -> A
    for k in range(4):
        ops.append(_move([idata[k], a_ref[k]]))
        ops.append(_g("RY", [a_ref[k]], -HALF_PI))
        ops.extend(_cz(idata[k], a_ref[k]))
        ops.append(_g("RY", [a_ref[k]], HALF_PI))
        ops.append(_move([idata[k], a_ref[k]]))
    ops += [_g("RX", [q], np.pi, label="echo") for q in everyone]
    ops.append(_idle(everyone, t_sequencing, sensitive=True, echoed=True, label="sequencing"))
    ops.append(CircuitOp(kind="erasure_check", targets=everyone, label="final"))
    # readout rotations: input block in X; output block in the input basis
    ops += [_g("RY", [q], HALF_PI, label="bell_readout") for q in idata]
    if basis == "X":
        ops += [_g("RY", [b_ref[k]], HALF_PI, label="readout_rotation") for k in range(4)]
    for blk in ("I", "A", "B"):
        for k in FLIP_QUBITS:
            tgt = idata[k] if blk == "I" else (blk, k)
            ops.append(_g("X", [tgt], label="flip_trick"))
    ops.append(_move(everyone, trips=READOUT_TRIPS))
    ops.append(CircuitOp(kind="measure", targets=everyone))
    return Circuit(name=f"teleport_{input_state.lower()}_{'adaptive' if adaptive else 'random'}",
                   n_qubits=n_qubits, ops=ops, data_qubits=idata, flag_qubit=iflag,
                   basis=basis, blocks=blocks, input_block="I",
                   n_ancilla_blocks=n_ancilla_blocks, adaptive=adaptive,
                   meta={"input_state": input_state, "t_sequencing": t_sequencing})


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def undo_flip(bits4) -> np.ndarray:
    b = np.asarray(bits4, dtype=np.int64).copy()
    for q in FLIP_QUBITS:
        b[q] ^= 1
    return b


def block_values(bits4, basis: str):
    """(parity, L1, L2) of a measured block after undoing the flip trick."""
    b = undo_flip(bits4)
    parity = int(b.sum() % 2)
    (p1, p2) = LOGICAL_PAIRS[basis]
    l1 = int(b[p1[0]] ^ b[p1[1]])
    l2 = int(b[p2[0]] ^ b[p2[1]])
    return parity, l1, l2


def _erased_data_qubits(record: ShotRecord, data_qubits) -> set:
    dset = set(data_qubits)
    return {q for (_, q) in record.erasure_reports if q in dset}


def correct_single_erasure(bits4, data_qubits, record: ShotRecord):
    """The located-erasure rule: even parity leaves the block alone; odd
    parity with exactly one reported data qubit flips that qubit's bit.
    Odd parity otherwise carries no usable information and decodes raw."""
    b = np.asarray(bits4, dtype=np.int64).copy()
    parity = int(undo_flip(b).sum() % 2)
    if parity == 1:
        erased = _erased_data_qubits(record, data_qubits)
        if len(erased) == 1:
            (q,) = erased
            b[list(data_qubits).index(q)] ^= 1
    return b


class EmptyPostselection(RuntimeError):
    """All shots were rejected; no success value can be reported."""


def _memory_bits(record: ShotRecord, circuit: Circuit):
    data = [record.outcomes[q] for q in circuit.data_qubits]
    flag = record.outcomes[circuit.flag_qubit]
    return np.array(data, dtype=np.int64), flag


def decode_postselect(records, circuit: Circuit, mode: str, basis: str | None = None):
    """Post-selected decoding of memory-experiment shots.

    Returns (success_per_logical, acceptance, n_correct, n_logical,
    n_accepted): success is the mean over the two encoded qubits of the
    accepted shots.  Raises EmptyPostselection when nothing survives.
    """
    if mode not in POSTSELECT_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    basis = basis or circuit.basis
    n_acc = 0
    n_correct = 0
    for rec in records:
        bits, flag = _memory_bits(rec, circuit)
        parity, l1, l2 = block_values(bits, basis)
        if parity != 0:
            continue
        if mode in ("parity+flag", "parity+flag+erasure") and flag != BRIGHT:
            continue
        if mode == "parity+flag+erasure" and rec.erasure_reports:
            continue
        n_acc += 1
        n_correct += (l1 == 0) + (l2 == 0)
    if n_acc == 0:
        raise EmptyPostselection(f"no shots accepted under mode {mode!r}")
    success = n_correct / (2 * n_acc)
    acceptance = n_acc / len(records)
    return success, acceptance, n_correct, 2 * n_acc, n_acc


def decode_correct(records, circuit: Circuit, use_erasure: bool, basis: str | None = None):
    """Unconditional decoding; optionally applies the located-erasure
    correction.  No shot is discarded."""
    basis = basis or circuit.basis
    n_correct = 0
    for rec in records:
        bits, _ = _memory_bits(rec, circuit)
        if use_erasure:
            bits = correct_single_erasure(bits, circuit.data_qubits, rec)
        _, l1, l2 = block_values(bits, basis)
        n_correct += (l1 == 0) + (l2 == 0)
    return n_correct / (2 * len(records)), n_correct, 2 * len(records)


def _teleport_block_bits(record: ShotRecord, circuit: Circuit, name: str):
    if name in ("A", "B"):
        idx = 0 if name == "A" else 1
        name = record.selected_blocks[idx]
    data, flag = circuit.blocks[name]
    bits = np.array([record.outcomes[q] for q in data], dtype=np.int64)
    return bits, record.outcomes[flag], data, flag


def decode_teleportation(records, circuit: Circuit, mode: str):
    """Decode teleportation shots under a post-selection mode, or
    unconditionally with erasure correction (mode 'erasure_corrected' /
    'raw').

    The Pauli frame comes from the Bell measurement: the input block's
    X-basis logical values and slot A's Z-basis logical values; output
    values are XORed with the matching frame bit.
    """
    basis = circuit.basis
    unconditional = mode in ("raw", "erasure_corrected")
    if not unconditional and mode not in POSTSELECT_MODES:
        raise ValueError(f"unknown mode {mode!r}")
    n_acc = 0
    n_correct = 0
    n_shots = 0
    for rec in records:
        n_shots += 1
        if rec.aborted:
            continue
        per_block = {}
        consumed_qubits = []
        flags = []
        for name in ("I", "A", "B"):
            bits, flag_outcome, data, flag_qubit = _teleport_block_bits(rec, circuit, name)
            if unconditional and mode == "erasure_corrected":
                bits = correct_single_erasure(bits, data, rec)
            per_block[name] = bits
            flags.append(flag_outcome)
            consumed_qubits.extend(list(data) + [flag_qubit])
        p_i, a1, a2 = block_values(per_block["I"], "X")
        p_a, c1, c2 = block_values(per_block["A"], "Z")
        p_b, v1, v2 = block_values(per_block["B"], basis)
        if not unconditional:
            if p_i or p_a or p_b:
                continue
            if mode in ("parity+flag", "parity+flag+erasure") and any(f != BRIGHT for f in flags):
                continue
            if mode == "parity+flag+erasure":
                # erasure filter reads the pre-measurement check only; the
                # preparation-stage check exists to drive block selection
                touched = {q for (_, q) in rec.final_reports if q in set(consumed_qubits)}
                if touched:
                    continue
        n_acc += 1
        f1, f2 = (c1, c2) if basis == "Z" else (a1, a2)
        n_correct += ((v1 ^ f1) == 0) + ((v2 ^ f2) == 0)
    if n_acc == 0:
        raise EmptyPostselection(f"no teleportation shots accepted under {mode!r}")
    return n_correct / (2 * n_acc), n_acc / n_shots, n_correct, 2 * n_acc, n_acc
