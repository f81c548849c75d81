"""Tableau engine vs the dense statevector oracle, plus leak semantics."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erasurelab.statevector import StateVector, gate_matrix
from erasurelab.tableau import (BRIGHT, DARK, GateError, QubitStatus,
                                TableauState, shot_rng)

GATE_POOL = [
    ("H", 1, None), ("X", 1, None), ("Y", 1, None), ("Z", 1, None),
    ("RX", 1, np.pi / 2), ("RX", 1, -np.pi / 2), ("RX", 1, np.pi),
    ("RY", 1, np.pi / 2), ("RY", 1, -np.pi / 2), ("RY", 1, np.pi),
    ("RZ", 1, np.pi / 2), ("RZ", 1, np.pi), ("RZ", 1, -np.pi / 2),
    ("CZ", 2, None),
]

PAULI_1Q = {(0, 0): np.eye(2, dtype=complex), (1, 0): gate_matrix("X"),
            (0, 1): gate_matrix("Z"), (1, 1): gate_matrix("Y")}


def random_ops(rng, n, depth):
    ops = []
    for _ in range(depth):
        g, k, a = GATE_POOL[rng.integers(len(GATE_POOL))]
        if k > n:
            continue
        t = tuple(rng.choice(n, size=k, replace=False).tolist())
        ops.append((g, t, a))
    return ops


def sv_pauli_expectation(sv, xs, zs):
    P = np.eye(1)
    for q in range(sv.n):
        P = np.kron(P, PAULI_1Q[(xs[q], zs[q])])
    return complex(np.vdot(sv.psi, P @ sv.psi))


def test_h_then_x_basis_deterministic():
    # X-basis readout of |+> = RY(-pi/2) then Z measurement
    st_ = TableauState.zeros(1, shot_rng(0, 0))
    st_.apply_gate("H", (0,))
    st_.apply_gate("RY", (0,), -np.pi / 2)
    assert st_.measure_z(0) == BRIGHT


def test_plus_state_fair_coin():
    n_shots = 10000
    bright = 0
    for k in range(n_shots):
        st_ = TableauState.zeros(1, shot_rng(7, k))
        st_.apply_gate("H", (0,))
        bright += st_.measure_z(0) == BRIGHT
    assert abs(bright / n_shots - 0.5) < 0.02


def test_random_circuits_match_statevector_stabilizers(rng):
    for trial in range(200):
        n = int(rng.integers(1, 5))
        st_ = TableauState.zeros(n, shot_rng(0, trial))
        sv = StateVector(n)
        for g, t, a in random_ops(rng, n, 12):
            st_.apply_gate(g, t, a)
            sv.apply_gate(g, t, a)
        st_.validate()
        for xs in itertools.product([0, 1], repeat=n):
            for zs in itertools.product([0, 1], repeat=n):
                te = st_.pauli_expectation(np.array(xs), np.array(zs))
                se = sv_pauli_expectation(sv, xs, zs)
                assert abs(se - te) < 1e-6, (xs, zs, te, se)


def test_shot_for_shot_measurement_match(rng):
    """Under a shared stream, tableau and statevector sample identical
    measurement records, random branches included."""
    for trial in range(150):
        n = int(rng.integers(1, 6))
        ops = random_ops(rng, n, 10)
        st_ = TableauState.zeros(n, shot_rng(42, trial))
        sv = StateVector(n)
        sv_rng = shot_rng(42, trial)
        for g, t, a in ops:
            st_.apply_gate(g, t, a)
            sv.apply_gate(g, t, a)
        for q in range(n):
            mt = st_.measure_z(q)
            ms = sv.measure_z(q, sv_rng)
            assert mt == ms, (trial, q)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, len(GATE_POOL) - 1), min_size=1, max_size=20),
       st.integers(2, 5), st.integers(0, 2**31))
def test_symplectic_validity_is_preserved(idx, n, seed):
    rng = np.random.default_rng(seed)
    st_ = TableauState.zeros(n, shot_rng(seed, 0))
    for i in idx:
        g, k, a = GATE_POOL[i]
        t = tuple(rng.choice(n, size=k, replace=False).tolist())
        st_.apply_gate(g, t, a)
    st_.validate()


def _ghz(n, rng):
    st_ = TableauState.zeros(n, rng)
    st_.apply_gate("H", (0,))
    for q in range(1, n):
        st_.apply_gate("RY", (q,), -np.pi / 2)
        st_.apply_gate("CZ", (0, q))
        st_.apply_gate("RY", (q,), np.pi / 2)
    return st_


def test_ghz_leak_projects_to_mixed_stabilizers():
    """Leaking one GHZ qubit keeps the Z-type pair correlations of the
    remaining qubits and destroys the X-type stabilizer, matching the
    reduced density matrix."""
    # density-matrix oracle: outcomes of the remaining qubits are 000/111
    sv = StateVector(4)
    sv.apply_gate("H", (0,))
    for q in range(1, 4):
        sv.apply_gate("RY", (q,), -np.pi / 2)
        sv.apply_gate("CZ", (0, q))
        sv.apply_gate("RY", (q,), np.pi / 2)
    rho = sv.reduced_density([0, 2, 3])
    diag = np.real(np.diag(rho))
    assert abs(diag[0] - 0.5) < 1e-12 and abs(diag[7] - 0.5) < 1e-12

    counts = {}
    for k in range(400):
        st_ = _ghz(4, shot_rng(3, k))
        st_.mark_leaked(1, detectable=True, timestamp=0.0)
        # Z-type pair correlations are deterministic in every branch
        zz = np.zeros(4, np.uint8)
        xs = np.zeros(4, np.uint8)
        zz[0], zz[2] = 1, 1
        assert st_.pauli_expectation(xs, zz) == 1
        zz2 = np.zeros(4, np.uint8)
        zz2[2], zz2[3] = 1, 1
        assert st_.pauli_expectation(xs, zz2) == 1
        # X-type correlation destroyed
        xq = np.zeros(4, np.uint8)
        xq[0], xq[2], xq[3] = 1, 1, 1
        assert st_.pauli_expectation(xq, np.zeros(4, np.uint8)) == 0
        key = tuple(st_.measure_z(q) for q in (0, 2, 3))
        counts[key] = counts.get(key, 0) + 1
    assert set(counts) == {(0, 0, 0), (1, 1, 1)}
    assert abs(counts[(0, 0, 0)] / 400 - 0.5) < 0.15


def test_leak_product_state_leaves_others_unchanged():
    st_ = TableauState.zeros(3, shot_rng(5, 0))
    st_.apply_gate("X", (2,))
    st_.mark_leaked(0, detectable=False, timestamp=1.0)
    assert st_.measure_z(1) == BRIGHT
    assert st_.measure_z(2) == DARK


def test_leak_then_perfect_check_reports_iff_detectable():
    for detectable in (True, False):
        st_ = TableauState.zeros(2, shot_rng(6, int(detectable)))
        st_.mark_leaked(0, detectable=detectable, timestamp=0.0)
        rep = st_.erasure_check([0, 1], fp_rate=0.0, fn_rate=0.0)
        assert rep == ([0] if detectable else [])
        if detectable:
            assert st_.status[0] is QubitStatus.ERASURE_FLAGGED
            # a detected atom is gone; later checks stay silent
            assert st_.erasure_check([0, 1], 0.0, 0.0) == []


def test_double_leak_raises():
    st_ = TableauState.zeros(1, shot_rng(0, 0))
    st_.mark_leaked(0, True, 0.0)
    with pytest.raises(RuntimeError):
        st_.mark_leaked(0, True, 1.0)


def test_erasure_check_false_positive_rate():
    n_shots = 100000
    total = 0
    st0 = TableauState.zeros(4, shot_rng(0, 0))
    for k in range(n_shots):
        st0.rng = shot_rng(11, k)
        total += len(st0.erasure_check([0, 1, 2, 3], fp_rate=0.014, fn_rate=0.0))
    mean = total / n_shots
    assert abs(mean - 0.056) < 0.003


def test_erasure_check_false_negative_rate():
    n_shots = 50000
    reported = 0
    for k in range(n_shots):
        st_ = TableauState.zeros(1, shot_rng(12, k))
        st_.status[0] = QubitStatus.LEAKED_DETECTABLE
        reported += bool(st_.erasure_check([0], 0.0, 0.014))
    assert abs(reported / n_shots - 0.986) < 0.002


def test_non_active_always_dark():
    for status in (QubitStatus.LEAKED_DETECTABLE, QubitStatus.LEAKED_SILENT,
                   QubitStatus.ERASURE_FLAGGED):
        st_ = TableauState.zeros(1, shot_rng(0, 0))
        st_.apply_gate("H", (0,))
        st_.status[0] = status
        assert all(st_.measure_z(0) == DARK for _ in range(5))


def test_gates_skip_non_active_columns():
    st_ = TableauState.zeros(2, shot_rng(0, 1))
    st_.mark_leaked(0, True, 0.0)
    x, z, r = st_.x.copy(), st_.z.copy(), st_.r.copy()
    st_.apply_gate("H", (0,))
    st_.apply_gate("CZ", (0, 1))
    assert np.array_equal(st_.x, x) and np.array_equal(st_.z, z) and np.array_equal(st_.r, r)


def test_gate_errors():
    st_ = TableauState.zeros(2, shot_rng(0, 0))
    with pytest.raises(GateError):
        st_.apply_gate("H", (5,))
    with pytest.raises(GateError):
        st_.apply_gate("RX", (0,), 0.3)
    with pytest.raises(GateError):
        st_.apply_gate("CZ", (0, 0))
    with pytest.raises(GateError):
        st_.apply_gate("SWAP", (0, 1))
