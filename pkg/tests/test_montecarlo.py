"""Harness invariants: determinism, statistics, fits, serialization."""

import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erasurelab import montecarlo
from erasurelab.montecarlo import (ConfigError, DecayFit, ExperimentConfig,
                                   FitError, ResultRow, ResultTable, fit_decay,
                                   run)
from erasurelab.noise import ErrorModel
from erasurelab.stats import wilson_interval

ZERO = ErrorModel.zeroed()


def _cfg(**kw):
    base = dict(experiment="memory", targets=("ZZ",), t_wait_grid=(0.0,),
                n_shots=300, master_seed=9, error_model=ZERO)
    base.update(kw)
    return ExperimentConfig(**base)


def test_zero_noise_success_exactly_one():
    table = run(_cfg(targets=("ZZ", "XX")))
    for r in table.rows:
        assert r.success == 1.0
        assert r.acceptance == 1.0


def test_worker_count_does_not_change_results():
    cfg1 = _cfg(error_model=ErrorModel(), n_shots=2000)
    cfg8 = dataclasses.replace(cfg1, workers=4)
    t1 = run(cfg1)
    t8 = run(cfg8)
    assert t1.to_csv() == t8.to_csv()


def test_seed_changes_results_and_reruns_reproduce():
    cfg = _cfg(error_model=ErrorModel(), n_shots=1500)
    a = run(cfg).to_csv()
    b = run(cfg).to_csv()
    c = run(dataclasses.replace(cfg, master_seed=10)).to_csv()
    assert a == b
    assert a != c


def test_acceptance_times_shots_is_integer_count():
    cfg = _cfg(error_model=ErrorModel(), n_shots=1700)
    table = run(cfg)
    for r in table.select(basis="Z"):
        n_acc = r.acceptance * r.n_shots
        assert abs(n_acc - round(n_acc)) < 1e-9
        assert r.n_accepted == round(n_acc)


def test_config_validation_reports_field_paths():
    with pytest.raises(ConfigError, match="n_shots"):
        _cfg(n_shots=0).validate()
    with pytest.raises(ConfigError, match="t_wait_grid"):
        _cfg(t_wait_grid=(0.3, 0.1)).validate()
    with pytest.raises(ConfigError, match="targets"):
        _cfg(targets=("QQ",)).validate()
    with pytest.raises(ConfigError, match="experiment"):
        _cfg(experiment="bogus").validate()


def test_csv_round_trip():
    cfg = _cfg(error_model=ErrorModel(), n_shots=500, targets=("ZZ", "XX"))
    table = run(cfg)
    text = table.to_csv()
    back = ResultTable.from_csv(text)
    assert back.to_csv() == text


def test_wilson_interval_values_and_bounds():
    lo, hi = wilson_interval(0, 100)
    assert lo < 1e-12 and 0 < hi < 0.05
    lo, hi = wilson_interval(100, 100)
    assert hi > 1 - 1e-12 and lo > 0.95
    with pytest.raises(ValueError):
        wilson_interval(5, 0)


def test_wilson_coverage_on_bernoulli_streams():
    """Nominal 95% coverage within 2% over 1000 replications."""
    rng = np.random.default_rng(77)
    p_true = 0.3
    n = 400
    covered = 0
    reps = 1000
    for _ in range(reps):
        k = rng.binomial(n, p_true)
        lo, hi = wilson_interval(k, n)
        covered += lo <= p_true <= hi
    assert abs(covered / reps - 0.95) < 0.02


def test_fit_decay_exact_quadratic():
    rows = []
    for t in (0.0, 0.1, 0.2, 0.35, 0.5):
        err = 0.01 + 0.5 * t * t
        rows.append(ResultRow("memory", "both", t, "parity", 1 - err, (1 - err, 1 - err),
                              1.0, (1.0, 1.0), 1000))
    fit = fit_decay(ResultTable(rows), "parity", weighted=False)
    assert abs(fit.coeff - 0.5) < 1e-9
    assert abs(fit.offset - 0.01) < 1e-9


def test_fit_decay_linear_plus_quadratic():
    rows = []
    for t in (0.0, 0.1, 0.2, 0.35, 0.5):
        err = 0.02 + 0.3 * t + 0.8 * t * t
        rows.append(ResultRow("memory", "both", t, "raw", 1 - err, (1 - err, 1 - err),
                              1.0, (1.0, 1.0), 1000))
    fit = fit_decay(ResultTable(rows), "raw", weighted=False)
    assert abs(fit.linear - 0.3) < 1e-9
    assert abs(fit.coeff - 0.8) < 1e-9


def test_fit_decay_errors():
    rows = [ResultRow("memory", "both", 0.0, "parity", 0.9, (0.9, 0.9), 1.0, (1, 1), 10),
            ResultRow("memory", "both", 0.1, "parity", 0.9, (0.9, 0.9), 1.0, (1, 1), 10)]
    with pytest.raises(FitError):
        fit_decay(ResultTable(rows), "parity")
    rows = [ResultRow("memory", "both", 0.0, "parity", 0.9, (0.9, 0.9), 1.0, (1, 1), 10)
            for _ in range(4)]
    with pytest.raises(FitError):
        fit_decay(ResultTable(rows), "parity")


def test_fit_self_consistency_across_shot_counts():
    """Quadratic coefficients from smaller and larger runs agree within
    their combined uncertainty."""
    model = ErrorModel()
    grid = (0.0, 0.15, 0.3)
    fits = []
    for n in (1500, 6000):
        cfg = ExperimentConfig(experiment="memory", targets=("ZZ",), t_wait_grid=grid,
                               n_shots=n, master_seed=21, error_model=model, workers=4)
        table = run(cfg)
        fits.append(fit_decay(table, "parity", basis="Z", weighted=False))
    a, b = fits
    sigma = np.hypot(a.coeff_err, b.coeff_err)
    assert abs(a.coeff - b.coeff) < max(2.5 * sigma, 0.05)


def test_compare_selection_zero_noise_gap_zero():
    cfg = ExperimentConfig(experiment="teleport", targets=("ZZ",), n_shots=150,
                           master_seed=3, error_model=ZERO, n_ancilla_blocks=4)
    s_r, s_a, (gap, sigma) = montecarlo.compare_selection(cfg)
    assert s_r == 1.0 and s_a == 1.0 and gap == 0.0


def test_decoder_paths_agree_with_list_api():
    """The per-shot worker summaries match the list-level decoders."""
    from erasurelab import codes

    circ = codes.build_memory_experiment("ZZ", 0.0)
    model = ErrorModel()
    recs = [montecarlo.run_shot(circ, model, 31, k) for k in range(400)]
    totals = {m: [0, 0] for m in montecarlo.MEMORY_MODES}
    for rec in recs:
        for m, (a, c) in montecarlo.memory_shot_counts(rec, circ).items():
            totals[m][0] += a
            totals[m][1] += c
    for mode in codes.POSTSELECT_MODES:
        s, acc, n_corr, n_log, n_acc = codes.decode_postselect(recs, circ, mode)
        assert totals[mode] == [n_acc, n_corr]
    s, n_corr, _ = codes.decode_correct(recs, circ, use_erasure=True)
    assert totals["erasure_corrected"][1] == n_corr


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 500), st.integers(1, 500))
def test_wilson_interval_contains_point_estimate(k, n):
    k = min(k, n)
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0
