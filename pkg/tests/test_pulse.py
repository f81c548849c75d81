"""Pulse dynamics, fidelity algebra, gradients, and a small optimizer run.

The full-size (400-piece) optimization and sweep live in the acceptance
suite; here a reduced problem exercises the same code paths quickly.
"""

import numpy as np
import pytest

from erasurelab import pulse as P


def test_zero_drive_is_identity():
    pr = P.PulseProfile(omega0=0.0, phases=np.zeros(8), edge_time=0.0, total_t=10.0)
    ev = P.evolve(pr)
    for q in P.SUBSPACES:
        assert abs(ev.psi0[q][0] - 1.0) < 1e-12
        assert np.linalg.norm(ev.psi1[q]) < 1e-12
    assert ev.norm_drift < 1e-9


def test_blockaded_rabi_enhancement():
    """Resonant flat pulse: the 11 subspace oscillates at sqrt(2)*Omega."""
    T = 3.0
    pr = P.PulseProfile(omega0=1.0, total_t=T, edge_time=1e-9, phases=np.zeros(64))
    fin = P.evolve_plain(pr, eps=0.0)
    expected = np.cos(np.sqrt(2) * T / 2) ** 2
    assert abs(abs(fin["11"][0]) ** 2 - expected) < 1e-6


def test_norm_conservation():
    pr = P.PulseProfile(phases=np.sin(np.linspace(0, 6, 120)))
    ev = P.evolve(pr)
    assert ev.norm_drift < 1e-9


def test_symmetric_excited_amplitudes_in_11_subspace():
    pr = P.PulseProfile(phases=np.linspace(-0.5, 1.0, 80))
    fin = P.evolve_plain(pr, eps=0.03)
    assert abs(fin["11"][1] - fin["11"][2]) < 1e-9


def test_first_order_sensitivity_matches_finite_difference():
    pr = P.PulseProfile(phases=(np.linspace(0, 1.5, 50) ** 2) % (2 * np.pi))
    ev = P.evolve(pr)
    h = 1e-4
    for q in P.SUBSPACES:
        fd = (P.evolve_plain(pr, eps=h)[q] - P.evolve_plain(pr, eps=-h)[q]) / (2 * h)
        rel = np.linalg.norm(fd - ev.psi1[q]) / np.linalg.norm(ev.psi1[q])
        assert rel < 1e-5, (q, rel)


def test_fidelity_exact_cz_phases():
    f, _ = P.gate_fidelity(1.0, 1.0, -1.0)
    assert abs(f - 1.0) < 1e-12
    # random consistent CZ phase family: theta11 = 2 theta01 - theta00 + pi
    rng = np.random.default_rng(5)
    for _ in range(20):
        th00, th01 = rng.uniform(-np.pi, np.pi, 2)
        th11 = 2 * th01 - th00 + np.pi
        f, _ = P.gate_fidelity(np.exp(1j * th00), np.exp(1j * th01), np.exp(1j * th11))
        assert abs(f - 1.0) < 1e-9


def test_fidelity_missing_pi_gives_point_six():
    th00, th01 = 0.3, 0.7
    th11 = 2 * th01 - th00
    f, _ = P.gate_fidelity(np.exp(1j * th00), np.exp(1j * th01), np.exp(1j * th11))
    assert abs(f - 0.6) < 1e-9


def test_objective_structure():
    pr = P.PulseProfile(phases=np.zeros(40))
    ev = P.evolve(pr)
    J, fid, deficit = P.cz_objective(ev, alpha=0.0, lambda_reg=0.0, phases=pr.phases)
    assert J == pytest.approx((1 - fid) + deficit)
    J2, _, _ = P.cz_objective(ev, alpha=0.0, lambda_reg=1.0,
                              phases=np.arange(40, dtype=float))
    assert J2 == pytest.approx(J + 39.0)  # sum of unit squared steps


def test_analytic_gradient_matches_finite_difference(rng):
    pr = P.PulseProfile(phases=np.zeros(48))
    x = np.concatenate([rng.uniform(-0.6, 0.6, 48), [0.15]])
    cache = P.PieceCache(pr, eps=0.0, augmented=True)
    _, g = P._cost_and_grad(x, pr, cache, 1e-3, True)
    for idx in rng.choice(49, size=20, replace=False):
        h = 1e-6
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        Jp, _ = P._cost_and_grad(xp, pr, cache, 1e-3, True)
        Jm, _ = P._cost_and_grad(xm, pr, cache, 1e-3, True)
        fd = (Jp - Jm) / (2 * h)
        assert abs(fd - g[idx]) / max(abs(fd), 1e-9) < 1e-4


def test_optimizer_reduces_cost_small_problem():
    init = P.PulseProfile(phases=np.zeros(60))
    res = P.optimize(init, max_iterations=300, lambda_reg=1e-3, robust=True, seed=1)
    assert res.infidelity < 1e-2
    assert res.trace[-1] < res.trace[0]


def test_regularizer_dominance_flattens_phases():
    init = P.PulseProfile(phases=np.zeros(60))
    free = P.optimize(init, max_iterations=250, lambda_reg=1e-3, robust=False, seed=2)
    stiff = P.optimize(init, max_iterations=250, lambda_reg=1e6, robust=False, seed=2)
    assert np.sum(np.diff(stiff.pulse.phases) ** 2) < np.sum(np.diff(free.pulse.phases) ** 2)
    assert stiff.infidelity > free.infidelity


def test_sweep_zero_matches_evolve():
    pr = P.PulseProfile(phases=np.linspace(0, 0.8, 64))
    res = P.sweep_epsilon(pr, np.linspace(-0.1, 0.1, 9))
    ev = P.evolve(pr)
    f0, _ = P.gate_fidelity(*(ev.psi0[q][0] for q in P.SUBSPACES))
    i = np.argmin(np.abs(res.eps))
    assert res.eps[i] == 0.0
    assert abs(res.infidelity[i] - (1 - f0)) < 1e-12
    assert abs(res.floor - (1 - f0)) < 1e-12


def test_sweep_intensity_mapping():
    pr = P.PulseProfile(phases=np.zeros(16))
    res = P.sweep_epsilon(pr, [-0.05, 0.05])
    dii = res.delta_i_over_i()
    assert np.allclose(dii, (1 + res.eps) ** 2 - 1)


def test_pulse_validation_and_serialization(tmp_path):
    with pytest.raises(ValueError):
        P.PulseProfile(phases=np.zeros(1))
    with pytest.raises(ValueError):
        P.PulseProfile(total_t=1.0, edge_time=2.0, phases=np.zeros(8))
    pr = P.PulseProfile(phases=np.linspace(0, 1, 32), alpha=1.2)
    path = tmp_path / "p.json"
    pr.save(path, extra={"infidelity": 1e-4})
    back = P.PulseProfile.load(path)
    assert np.allclose(back.phases, pr.phases)
    assert back.alpha == pr.alpha
    table = pr.export_table(n_samples=100)
    assert table.startswith("# t omega phi")
    assert len(table.strip().splitlines()) == 101


def test_amplitude_profile_edges():
    pr = P.PulseProfile(phases=np.zeros(8))
    assert pr.amplitude(0.0) == 0.0
    assert pr.amplitude(pr.duration) < 1e-12
    assert pr.amplitude(pr.duration / 2) == pr.omega0
    te = pr.edge_time
    assert abs(pr.amplitude(te / 2) - pr.omega0 * np.sin(np.pi / 4)) < 1e-12
