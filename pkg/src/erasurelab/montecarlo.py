"""Experiment harness: runs circuits against the error model at scale.

Shots are the unit of parallelism.  Each shot draws from a counter-based
stream keyed by (master_seed, shot_index), and aggregation reduces
integer counts, so results are bitwise independent of the worker count.
"""

from __future__ import annotations

import dataclasses
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import codes
from .codes import Circuit, ShotRecord, block_values, correct_single_erasure
from .noise import (ErrorModel, apply_cz_noise, apply_idle, apply_move_noise,
                    apply_spam_prepare, apply_spam_readout_leak, apply_sq_noise,
                    flip_terminal_outcome)
from .stats import wald_sigma, wilson_interval
from .tableau import BRIGHT, TableauState, shot_rng

_SELECT_STREAM_TAG = 0x5E1EC7


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Single-shot execution
# ---------------------------------------------------------------------------


def _choose_blocks(circuit: Circuit, reports, adaptive: bool,
                   sel_rng: np.random.Generator) -> list[str]:
    names = [f"anc{i}" for i in range(circuit.n_ancilla_blocks)]
    if adaptive:
        counts = {b: 0 for b in names}
        for (_, q) in reports:
            for b in names:
                data, flag = circuit.blocks[b]
                if q in data or q == flag:
                    counts[b] += 1
        clean = [b for b in names if counts[b] == 0]
        if len(clean) >= 2:
            return clean[:2]
        ranked = sorted(names, key=lambda b: (counts[b], names.index(b)))
        return ranked[:2]
    idx = sel_rng.permutation(len(names))[:2]
    return [names[int(i)] for i in idx]


def run_shot(circuit: Circuit, model: ErrorModel, master_seed: int,
             shot_index: int, keep_ledger: bool = False,
             rng_override=None, inject=None) -> ShotRecord:
    """Execute one shot.  ``rng_override`` and ``inject`` (a callback
    ``inject(op_index, state, time)`` run after each op) exist for the
    deterministic fault-enumeration harness."""
    rng = rng_override if rng_override is not None else shot_rng(master_seed, shot_index)
    state = TableauState.zeros(circuit.n_qubits, rng)
    ledger: list = [] if keep_ledger else None
    reports: list = []
    selection_reports: list = []
    final_reports: list = []
    outcomes: dict = {}
    selected: list | None = None
    slot_map: dict = {}
    t = 0.0

    def resolve(tgt):
        if isinstance(tgt, int):
            return tgt
        slot, k = tgt
        return circuit.blocks[slot_map[slot]][0][k]

    for op_index, op in enumerate(circuit.ops):
        targets = tuple(resolve(x) for x in op.targets)
        if op.kind == "prepare":
            apply_spam_prepare(state, model, targets, t, ledger)
        elif op.kind == "gate":
            state.apply_gate(op.gate, targets, op.angle)
            if op.noise_class == "sq":
                apply_sq_noise(state, model, targets, t, ledger)
            elif op.noise_class == "rydberg":
                apply_cz_noise(state, model, targets, t, ledger)
        elif op.kind == "move":
            apply_move_noise(state, model, targets, op.n_trips, t, ledger)
        elif op.kind == "idle":
            apply_idle(state, model, targets, op.duration, op.sensitive, op.echoed, t, ledger)
        elif op.kind == "erasure_check":
            found = state.erasure_check(targets, model.ed_fp, model.ed_fn)
            stamped = [(t, q) for q in found]
            reports.extend(stamped)
            if op.label == "selection":
                selection_reports.extend(stamped)
            elif op.label == "final":
                final_reports.extend(stamped)
        elif op.kind == "select_blocks":
            sel_rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((master_seed, shot_index, _SELECT_STREAM_TAG))))
            selected = _choose_blocks(circuit, selection_reports, circuit.adaptive, sel_rng)
            slot_map = {"A": selected[0], "B": selected[1]}
        elif op.kind == "measure":
            apply_spam_readout_leak(state, model, targets, t, ledger)
            for q in sorted(targets):
                raw = state.measure_z(q)
                outcomes[q] = flip_terminal_outcome(model, rng, raw, t, q, ledger)
        else:
            raise ConfigError(f"unknown op kind {op.kind!r}")
        if inject is not None:
            inject(op_index, state, t)
        t += op.duration
    return ShotRecord(outcomes=outcomes, erasure_reports=reports,
                      final_reports=final_reports, selected_blocks=selected,
                      fault_ledger=ledger if keep_ledger else [])


# ---------------------------------------------------------------------------
# Per-shot decode summaries (compact worker output)
# ---------------------------------------------------------------------------

MEMORY_MODES = ("raw", "erasure_corrected", "parity", "parity+flag", "parity+flag+erasure")


def memory_shot_counts(rec: ShotRecord, circuit: Circuit) -> dict:
    """mode -> (accepted 0/1, correct-logical count 0..2)."""
    bits = np.array([rec.outcomes[q] for q in circuit.data_qubits], dtype=np.int64)
    flag = rec.outcomes[circuit.flag_qubit]
    basis = circuit.basis
    parity, l1, l2 = block_values(bits, basis)
    cb = correct_single_erasure(bits, circuit.data_qubits, rec)
    _, cl1, cl2 = block_values(cb, basis)
    out = {
        "raw": (1, (l1 == 0) + (l2 == 0)),
        "erasure_corrected": (1, (cl1 == 0) + (cl2 == 0)),
    }
    acc_parity = parity == 0
    acc_flag = acc_parity and flag == BRIGHT
    acc_erase = acc_flag and not rec.erasure_reports
    correct = (l1 == 0) + (l2 == 0)
    out["parity"] = (int(acc_parity), correct if acc_parity else 0)
    out["parity+flag"] = (int(acc_flag), correct if acc_flag else 0)
    out["parity+flag+erasure"] = (int(acc_erase), correct if acc_erase else 0)
    return out


def teleport_shot_counts(rec: ShotRecord, circuit: Circuit) -> dict:
    out = {}
    for mode in MEMORY_MODES:
        try:
            s, a, n_corr, n_log, n_acc = codes.decode_teleportation([rec], circuit, mode)
            out[mode] = (n_acc, n_corr)
        except codes.EmptyPostselection:
            out[mode] = (0, 0)
    return out


def _worker(args):
    circuit, model_dict, master_seed, start, stop, kind = args
    model = ErrorModel.from_dict(model_dict)
    totals = None
    for k in range(start, stop):
        rec = run_shot(circuit, model, master_seed, k)
        counts = (memory_shot_counts if kind == "memory" else teleport_shot_counts)(rec, circuit)
        if totals is None:
            totals = {m: [0, 0] for m in counts}
        for m, (a, c) in counts.items():
            totals[m][0] += a
            totals[m][1] += c
    return totals


def simulate_counts(circuit: Circuit, model: ErrorModel, n_shots: int, master_seed: int,
                    workers: int = 1, kind: str = "memory") -> dict:
    """mode -> (n_accepted, n_correct_logicals) integer totals."""
    if n_shots < 1:
        raise ConfigError("n_shots must be >= 1")
    if workers <= 1:
        return _worker((circuit, model.to_dict(), master_seed, 0, n_shots, kind))
    bounds = np.linspace(0, n_shots, workers + 1).astype(int)
    jobs = [(circuit, model.to_dict(), master_seed, int(a), int(b), kind)
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    totals = None
    with ProcessPoolExecutor(max_workers=workers) as ex:
        for part in ex.map(_worker, jobs):
            if totals is None:
                totals = {m: [0, 0] for m in part}
            for m, (a, c) in part.items():
                totals[m][0] += a
                totals[m][1] += c
    return totals


# ---------------------------------------------------------------------------
# Experiment configuration and result table
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    experiment: str = "memory"  # memory | teleport
    targets: tuple = ("ZZ", "XX")
    t_wait_grid: tuple = (0.0,)
    adaptive: bool = False
    n_ancilla_blocks: int = 4
    n_shots: int = 10000
    master_seed: int = 0
    workers: int = 1
    error_model: ErrorModel = field(default_factory=ErrorModel)
    teleport_t_sequencing: float | None = None

    def validate(self) -> None:
        errs = []
        if self.experiment not in ("memory", "teleport"):
            errs.append(f"experiment: unknown value {self.experiment!r}")
        for tg in self.targets:
            if tg not in ("ZZ", "XX"):
                errs.append(f"targets: unknown target {tg!r}")
        if self.n_shots < 1:
            errs.append("n_shots: must be >= 1")
        grid = list(self.t_wait_grid)
        if any(x < 0 for x in grid) or grid != sorted(grid):
            errs.append("t_wait_grid: must be nonnegative ascending")
        if self.experiment == "teleport" and self.n_ancilla_blocks < 2:
            errs.append("n_ancilla_blocks: must be >= 2")
        if self.workers < 1:
            errs.append("workers: must be >= 1")
        if errs:
            raise ConfigError("; ".join(errs))


@dataclass
class ResultRow:
    experiment: str
    basis: str
    t_wait: float
    mode: str
    success: float | None
    success_ci: tuple | None
    acceptance: float
    acceptance_ci: tuple
    n_shots: int
    n_accepted: int = 0
    n_correct: int = 0

    def success_value(self) -> float:
        if self.success is None:
            raise ValueError("empty post-selection row has no success value")
        return self.success


CSV_COLUMNS = ("experiment", "basis", "t_wait", "mode", "success", "success_CI",
               "acceptance", "acceptance_CI", "n_shots")


@dataclass
class ResultTable:
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rows:
            succ = "" if r.success is None else f"{r.success:.10g}"
            sci = "" if r.success_ci is None else f"{r.success_ci[0]:.10g}:{r.success_ci[1]:.10g}"
            aci = f"{r.acceptance_ci[0]:.10g}:{r.acceptance_ci[1]:.10g}"
            buf.write(",".join([
                r.experiment, r.basis, f"{r.t_wait:.10g}", r.mode, succ, sci,
                f"{r.acceptance:.10g}", aci, str(r.n_shots)]) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        lines = [ln for ln in text.strip().splitlines() if ln]
        header = lines[0].split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV columns {header}")
        rows = []
        for ln in lines[1:]:
            parts = ln.split(",")
            d = dict(zip(CSV_COLUMNS, parts))
            succ = None if d["success"] == "" else float(d["success"])
            sci = None if d["success_CI"] == "" else tuple(float(x) for x in d["success_CI"].split(":"))
            aci = tuple(float(x) for x in d["acceptance_CI"].split(":"))
            rows.append(ResultRow(d["experiment"], d["basis"], float(d["t_wait"]), d["mode"],
                                  succ, sci, float(d["acceptance"]), aci, int(d["n_shots"])))
        return cls(rows)

    def select(self, **kv) -> list:
        out = []
        for r in self.rows:
            if all(getattr(r, k) == v for k, v in kv.items()):
                out.append(r)
        return out


def _rows_from_counts(experiment, basis, t_wait, totals, n_shots) -> list:
    rows = []
    for mode, (n_acc, n_corr) in totals.items():
        if n_acc == 0:
            rows.append(ResultRow(experiment, basis, t_wait, mode, None, None,
                                  0.0, wilson_interval(0, n_shots), n_shots, 0, 0))
            continue
        success = n_corr / (2 * n_acc)
        rows.append(ResultRow(
            experiment, basis, t_wait, mode,
            success, wilson_interval(n_corr, 2 * n_acc),
            n_acc / n_shots, wilson_interval(n_acc, n_shots),
            n_shots, n_acc, n_corr))
    return rows


def _pooled_rows(experiment, t_wait, per_target_totals, n_shots_each) -> list:
    pooled = {}
    for totals in per_target_totals:
        for m, (a, c) in totals.items():
            acc, corr = pooled.get(m, (0, 0))
            pooled[m] = (acc + a, corr + c)
    n_total = n_shots_each * len(per_target_totals)
    return _rows_from_counts(experiment, "both", t_wait, pooled, n_total)


def run(config: ExperimentConfig) -> ResultTable:
    """Run the configured experiment; deterministic given master_seed."""
    config.validate()
    model = config.error_model
    table = ResultTable()
    if config.experiment == "memory":
        for t in config.t_wait_grid:
            per_target = []
            for target in config.targets:
                circ = codes.build_memory_experiment(target, t_wait=t)
                totals = simulate_counts(circ, model, config.n_shots, config.master_seed,
                                         config.workers, kind="memory")
                basis = "Z" if target == "ZZ" else "X"
                table.rows += _rows_from_counts("memory", basis, t, totals, config.n_shots)
                per_target.append(totals)
            table.rows += _pooled_rows("memory", t, per_target, config.n_shots)
    else:
        label = "teleport_adaptive" if config.adaptive else "teleport_random"
        per_target = []
        for target in config.targets:
            kw = {}
            if config.teleport_t_sequencing is not None:
                kw["t_sequencing"] = config.teleport_t_sequencing
            circ = codes.build_teleportation(config.adaptive, config.n_ancilla_blocks,
                                             input_state=target, **kw)
            totals = simulate_counts(circ, model, config.n_shots, config.master_seed,
                                     config.workers, kind="teleport")
            basis = "Z" if target == "ZZ" else "X"
            table.rows += _rows_from_counts(label, basis, 0.0, totals, config.n_shots)
            per_target.append(totals)
        table.rows += _pooled_rows(label, 0.0, per_target, config.n_shots)
    return table


# ---------------------------------------------------------------------------
# Fits and comparisons
# ---------------------------------------------------------------------------


class FitError(RuntimeError):
    pass


@dataclass
class DecayFit:
    coeff: float  # quadratic-growth coefficient c
    coeff_err: float
    linear: float | None = None  # b for the linear-plus-quadratic variant
    linear_err: float | None = None
    offset: float = 0.0


def fit_decay(table: ResultTable, mode: str, experiment: str = "memory",
              basis: str = "both", with_linear: bool | None = None,
              weighted: bool = True) -> DecayFit:
    """Least-squares fit of error(t) = e0 + c t^2, optionally + b t.

    Post-selected modes default to the pure quadratic model, the
    unconditional modes to linear-plus-quadratic.  Points are weighted by
    their inverse binomial variance (from the Wilson interval half-width)
    unless weighted=False.
    """
    rows = [r for r in table.select(experiment=experiment, basis=basis, mode=mode)
            if r.success is not None]
    rows.sort(key=lambda r: r.t_wait)
    if len(rows) < 3:
        raise FitError(f"need >=3 time points for mode {mode!r}, have {len(rows)}")
    t = np.array([r.t_wait for r in rows])
    err = np.array([1.0 - r.success for r in rows])
    if weighted and all(r.success_ci is not None for r in rows):
        sig = np.array([max((r.success_ci[1] - r.success_ci[0]) / (2 * 1.96), 1e-6)
                        for r in rows])
    else:
        sig = np.ones_like(t)
    if with_linear is None:
        with_linear = mode in ("raw", "erasure_corrected")
    cols = [np.ones_like(t), t**2] if not with_linear else [np.ones_like(t), t, t**2]
    A = np.stack(cols, axis=1)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise FitError("singular design matrix (degenerate time grid)")
    w = 1.0 / sig
    Aw = A * w[:, None]
    yw = err * w
    beta, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    resid = yw - Aw @ beta
    dof = max(len(t) - A.shape[1], 1)
    scale = max(float(resid @ resid) / dof, 1.0) if weighted else float(resid @ resid) / dof
    cov = scale * np.linalg.inv(Aw.T @ Aw)
    if with_linear:
        return DecayFit(coeff=float(beta[2]), coeff_err=float(np.sqrt(cov[2, 2])),
                        linear=float(beta[1]), linear_err=float(np.sqrt(cov[1, 1])),
                        offset=float(beta[0]))
    return DecayFit(coeff=float(beta[1]), coeff_err=float(np.sqrt(cov[1, 1])),
                    offset=float(beta[0]))


def compare_selection(config: ExperimentConfig, mode: str = "parity+flag"):
    """Teleportation success under random vs adaptive ancilla selection.

    Both arms share per-shot random streams (the selection draw runs on a
    separate derived stream), so the comparison is paired wherever the
    executed circuits coincide.  Returns (success_random,
    success_adaptive, (gap, gap_sigma)).
    """
    config.validate()
    if config.experiment != "teleport":
        raise ConfigError("compare_selection requires a teleport experiment")
    results = {}
    for adaptive in (False, True):
        cfg = dataclasses.replace(config, adaptive=adaptive)
        per_target = []
        for target in cfg.targets:
            kw = {}
            if cfg.teleport_t_sequencing is not None:
                kw["t_sequencing"] = cfg.teleport_t_sequencing
            circ = codes.build_teleportation(cfg.adaptive, cfg.n_ancilla_blocks,
                                             input_state=target, **kw)
            per_target.append(simulate_counts(circ, cfg.error_model, cfg.n_shots,
                                              cfg.master_seed, cfg.workers, kind="teleport"))
        acc = sum(t[mode][0] for t in per_target)
        corr = sum(t[mode][1] for t in per_target)
        if acc == 0:
            raise FitError("empty post-selection in compare_selection")
        results[adaptive] = (corr / (2 * acc), acc)
    (s_r, n_r), (s_a, n_a) = results[False], results[True]
    gap = s_a - s_r
    sigma = float(np.hypot(wald_sigma(s_a, 2 * n_a), wald_sigma(s_r, 2 * n_r)))
    return s_r, s_a, (gap, sigma)
