"""Exhaustive single-fault verification of the flagged preparation.

Every random measurement branch of a noiseless shot is explored exactly
by replaying the circuit with a scripted coin stream, so the
fault-tolerance statements are checked without sampling error: for each
single-location Pauli or detectable-leak fault, every branch must either
be rejected by the {parity, flag, erasure} filters or decode to the
prepared logical state.
"""

from __future__ import annotations

from dataclasses import dataclass

from .codes import Circuit, block_values, correct_single_erasure
from .montecarlo import run_shot
from .noise import ErrorModel
from .tableau import BRIGHT

FAULT_KINDS = ("X", "Y", "Z", "leak")


class ScriptedRng:
    """random() yields scripted coin bits (0 -> 0.25, 1 -> 0.75), padding
    with zeros beyond the script and recording the trace."""

    def __init__(self, forced=()):
        self.forced = list(forced)
        self.i = 0
        self.trace: list[int] = []

    def random(self) -> float:
        bit = self.forced[self.i] if self.i < len(self.forced) else 0
        self.trace.append(bit)
        self.i += 1
        return 0.75 if bit else 0.25

    def integers(self, *a, **k):  # pragma: no cover - nothing random left
        raise RuntimeError("noiseless branch enumeration must not sample faults")


def for_all_branches(run):
    """Call ``run(rng)`` once per distinct measurement-branch path."""
    results = []
    work = [()]
    while work:
        prefix = work.pop()
        rng = ScriptedRng(prefix)
        results.append(run(rng))
        for j in range(len(prefix), len(rng.trace)):
            work.append(tuple(rng.trace[:j]) + (1,))
    return results


@dataclass(frozen=True)
class FaultLocation:
    op_index: int
    qubit: int
    kind: str  # X | Y | Z | leak


def fault_locations(circuit: Circuit) -> list[FaultLocation]:
    """One location per (op, touched qubit, fault kind), skipping the
    terminal measurement op (nothing acts after it)."""
    locs = []
    for i, op in enumerate(circuit.ops):
        if op.kind == "measure":
            continue
        for q in op.targets:
            if not isinstance(q, int):
                raise ValueError("fault enumeration requires resolved targets")
            for kind in FAULT_KINDS:
                locs.append(FaultLocation(i, q, kind))
    return locs


def run_with_fault(circuit: Circuit, loc: FaultLocation, rng) -> "object":
    zero = ErrorModel.zeroed()

    def inject(op_index, state, t):
        if op_index != loc.op_index:
            return
        if loc.kind == "leak":
            if state.is_active(loc.qubit):
                state.mark_leaked(loc.qubit, detectable=True, timestamp=t)
        else:
            state.apply_gate(loc.kind, (loc.qubit,))

    return run_shot(circuit, zero, 0, 0, rng_override=rng, inject=inject)


@dataclass
class FaultOutcome:
    location: FaultLocation
    n_branches: int
    n_rejected: int
    n_correct: int
    ok: bool


def check_fault_tolerance(circuit: Circuit) -> list[FaultOutcome]:
    """Enumerate all single-fault locations over all branches.

    A branch passes if the {parity, flag, erasure} post-selection rejects
    it or it decodes to the prepared state (logical values (0,0)).
    """
    outcomes = []
    for loc in fault_locations(circuit):
        records = for_all_branches(lambda rng: run_with_fault(circuit, loc, rng))
        n_rej = n_ok = 0
        good = True
        for rec in records:
            bits = [rec.outcomes[q] for q in circuit.data_qubits]
            parity, l1, l2 = block_values(bits, circuit.basis)
            flag = rec.outcomes[circuit.flag_qubit]
            rejected = parity != 0 or flag != BRIGHT or bool(rec.erasure_reports)
            if rejected:
                n_rej += 1
            elif (l1, l2) == (0, 0):
                n_ok += 1
            else:
                good = False
        outcomes.append(FaultOutcome(loc, len(records), n_rej, n_ok, good))
    return outcomes


def check_single_erasure_correction(circuit: Circuit) -> list[tuple]:
    """Every single detectable data-qubit leak after encoding must decode
    correctly on both logical qubits under the located-erasure rule, in
    every branch.  Returns a list of (qubit, branch_count, all_ok)."""
    # inject right after the last encoding op: find the final erasure check
    check_idx = max(i for i, op in enumerate(circuit.ops) if op.kind == "erasure_check")
    results = []
    for q in circuit.data_qubits:
        loc = FaultLocation(op_index=check_idx - 1, qubit=q, kind="leak")
        records = for_all_branches(lambda rng: run_with_fault(circuit, loc, rng))
        ok = True
        for rec in records:
            bits = [rec.outcomes[qq] for qq in circuit.data_qubits]
            bits = correct_single_erasure(bits, circuit.data_qubits, rec)
            _, l1, l2 = block_values(bits, circuit.basis)
            if (l1, l2) != (0, 0):
                ok = False
        results.append((q, len(records), ok))
    return results
