"""Command-line entry point: every experiment as a subcommand.

Each run loads a declarative TOML config (flag overrides win), executes,
and writes its data products plus a JSON run manifest.  Data files are
byte-identical across reruns and worker counts at a fixed seed; only the
manifest carries timestamps.  Exit codes: 0 success, 1 config/usage
error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from importlib import resources

import numpy as np
import tomli

from . import __version__, codes, montecarlo, pulse, transport
from .montecarlo import ConfigError, ExperimentConfig
from .noise import ErrorModel

SUBCOMMANDS = ("qec-memory", "qec-teleport", "pulse-optimize", "pulse-sweep",
               "transport-sim", "waveform-compile", "selftest")


def default_error_model_path() -> str:
    return str(resources.files("erasurelab") / "configs" / "baseline.toml")


def _load_toml(path) -> dict:
    with open(path, "rb") as fh:
        return tomli.load(fh)


def _config_hash(resolved: dict) -> str:
    canon = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


class _Run:
    """Output-directory bookkeeping: atomic manifest, cleanup on failure."""

    def __init__(self, subcommand: str, out_dir: str, resolved_config: dict, seed: int):
        self.subcommand = subcommand
        self.out_dir = out_dir
        self.resolved = resolved_config
        self.seed = seed
        self.outputs: list[str] = []
        self.started = time.time()
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name: str) -> str:
        p = os.path.join(self.out_dir, name)
        self.outputs.append(p)
        return p

    def write_text(self, name: str, text: str) -> str:
        p = self.path(name)
        with open(p, "w") as fh:
            fh.write(text)
        return p

    def finish(self) -> None:
        manifest = {
            "subcommand": self.subcommand,
            "config_hash": _config_hash(self.resolved),
            "master_seed": self.seed,
            "code_version": __version__,
            "started_at": self.started,
            "finished_at": time.time(),
            "outputs": [os.path.basename(p) for p in self.outputs],
            "resolved_config": self.resolved,
        }
        tmp = os.path.join(self.out_dir, ".manifest.tmp")
        with open(tmp, "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
        os.replace(tmp, os.path.join(self.out_dir, "manifest.json"))

    def abort(self) -> None:
        for p in self.outputs:
            if os.path.exists(p):
                os.remove(p)


def _resolve_error_model(cfg: dict) -> ErrorModel:
    if "error_model" in cfg:
        return ErrorModel.from_dict(cfg["error_model"])
    path = cfg.get("error_model_path", default_error_model_path())
    return ErrorModel.from_toml(path)


def _experiment_config(cfg: dict, args, experiment: str) -> ExperimentConfig:
    model = _resolve_error_model(cfg)
    ec = ExperimentConfig(
        experiment=experiment,
        targets=tuple(cfg.get("targets", ["ZZ", "XX"])),
        t_wait_grid=tuple(cfg.get("t_wait_grid", [0.0])),
        adaptive=bool(cfg.get("adaptive", False)),
        n_ancilla_blocks=int(cfg.get("n_ancilla_blocks", 4)),
        n_shots=int(args.shots if args.shots is not None else cfg.get("n_shots", 10000)),
        master_seed=int(args.seed if args.seed is not None else cfg.get("master_seed", 0)),
        workers=int(args.workers if args.workers is not None else cfg.get("workers", 1)),
        error_model=model,
    )
    ec.validate()
    return ec


def _resolved_dict(ec: ExperimentConfig) -> dict:
    d = dataclasses.asdict(ec)
    d["error_model"] = ec.error_model.to_dict()
    d["targets"] = list(ec.targets)
    d["t_wait_grid"] = list(ec.t_wait_grid)
    return d


def _cmd_qec_memory(args) -> int:
    cfg = _load_toml(args.config) if args.config else {}
    ec = _experiment_config(cfg, args, "memory")
    run = _Run("qec-memory", args.out_dir, _resolved_dict(ec), ec.master_seed)
    try:
        table = montecarlo.run(ec)
        run.write_text("memory_results.csv", table.to_csv())
        run.finish()
        return 0
    except Exception:
        run.abort()
        raise


def _cmd_qec_teleport(args) -> int:
    cfg = _load_toml(args.config) if args.config else {}
    ec = _experiment_config(cfg, args, "teleport")
    run = _Run("qec-teleport", args.out_dir, _resolved_dict(ec), ec.master_seed)
    try:
        if args.compare:
            rows = []
            for adaptive in (False, True):
                sub = dataclasses.replace(ec, adaptive=adaptive)
                rows += montecarlo.run(sub).rows
            table = montecarlo.ResultTable(rows)
            s_r, s_a, (gap, sigma) = montecarlo.compare_selection(ec)
            run.write_text("teleport_results.csv", table.to_csv())
            run.write_text("selection_comparison.json", json.dumps({
                "success_random": s_r, "success_adaptive": s_a,
                "gap": gap, "gap_sigma": sigma}, indent=1, sort_keys=True))
        else:
            table = montecarlo.run(ec)
            run.write_text("teleport_results.csv", table.to_csv())
        run.finish()
        return 0
    except Exception:
        run.abort()
        raise


def _cmd_pulse_optimize(args) -> int:
    cfg = _load_toml(args.config) if args.config else {}
    seed = int(args.seed if args.seed is not None else cfg.get("master_seed", 42))
    profile = pulse.PulseProfile(
        omega0=float(cfg.get("omega0", 1.0)),
        total_t=float(cfg.get("total_t", 20.4)),
        edge_time=float(cfg.get("edge_time", 3.0 * 2 * np.pi / cfg.get("delta_r", 6.4))),
        delta_r=float(cfg.get("delta_r", 6.4)),
        phases=np.zeros(int(cfg.get("n_pieces", 400))),
        duration_includes_edges=bool(cfg.get("duration_includes_edges", True)),
    )
    robust = bool(cfg.get("robust", True)) if args.baseline is False else False
    resolved = {"pulse": profile.to_manifest(), "seed": seed,
                "max_iterations": int(cfg.get("max_iterations", 2000)),
                "lambda_reg": float(cfg.get("lambda_reg", 1e-3)), "robust": robust}
    run = _Run("pulse-optimize", args.out_dir, resolved, seed)
    try:
        res = pulse.optimize(profile, max_iterations=resolved["max_iterations"],
                             lambda_reg=resolved["lambda_reg"], robust=robust, seed=seed)
        ev = pulse.evolve(res.pulse)
        name = "to" if not robust else "ar"
        p = run.path(f"pulse_{name}.json")
        res.pulse.save(p, extra={
            "infidelity": res.infidelity, "deficit": res.deficit,
            "rydberg_time": ev.rydberg_time, "converged": res.converged,
            "n_iterations": res.n_iterations})
        run.write_text(f"pulse_{name}_waveform.txt", res.pulse.export_table())
        run.finish()
        print(f"1-F = {res.infidelity:.3e}  deficit = {res.deficit:.3e}")
        return 0
    except Exception:
        run.abort()
        raise


def _parse_grid(text: str) -> np.ndarray:
    lo, hi, n = text.split(":")
    return np.linspace(float(lo), float(hi), int(n))


def _cmd_pulse_sweep(args) -> int:
    if not args.pulse:
        raise ConfigError("pulse-sweep requires --pulse <pulse.json>")
    profile = pulse.PulseProfile.load(args.pulse)
    grid = _parse_grid(args.eps)
    resolved = {"pulse": profile.to_manifest(), "eps": args.eps}
    run = _Run("pulse-sweep", args.out_dir, resolved, 0)
    try:
        res = pulse.sweep_epsilon(profile, grid)
        run.write_text("sweep.csv", pulse.sweep_to_csv(res, args.series))
        run.finish()
        print(f"exponent = {res.exponent:.3f}  floor = {res.floor:.3e}")
        return 0
    except Exception:
        run.abort()
        raise


def _cmd_transport_sim(args) -> int:
    cfg = _load_toml(args.config) if args.config else {}
    seed = int(args.seed if args.seed is not None else cfg.get("master_seed", 0))
    params = transport.TweezerParams(
        waist=float(cfg.get("waist", 0.55e-6)),
        rayleigh=float(cfg.get("rayleigh", np.pi * 0.55e-6**2 / 487e-9)),
        depth=float(cfg.get("depth_uK", 300.0)) * transport.KB * 1e-6,
        tau_aod=float(cfg.get("tau_aod", 1.0e-6)),
        mass=float(cfg.get("mass_amu", 171.0)) * transport.AMU,
        temperature=float(cfg.get("temperature_uK", 5.0)) * 1e-6,
        ramp_time=float(cfg.get("ramp_time", 0.78e-3)),
        move_time=float(cfg.get("move_time", 0.89e-3)),
    )
    warn = params.check_consistency()
    if warn:
        print(f"warning: {warn}", file=sys.stderr)
    length = float(cfg.get("length", 100e-6))
    gammas = [float(g) for g in cfg.get("gammas",
                                        [transport.GAMMA_ZERO_JERK, transport.GAMMA_MIN_JERK])]
    t_grid = cfg.get("t_grid_ms", None)
    if t_grid is None:
        t_grid = np.geomspace(0.15, 1.0, int(cfg.get("n_t_points", 12)))
    t_grid = np.asarray([float(t) for t in t_grid])
    n_atoms = int(args.shots if args.shots is not None else cfg.get("n_atoms", 400))
    lensing = cfg.get("lensing", [True, False])
    ramps_on = bool(cfg.get("ramps_on", True))
    resolved = {"length": length, "gammas": gammas, "t_grid_ms": list(map(float, t_grid)),
                "n_atoms": n_atoms, "lensing": list(map(bool, lensing)),
                "ramps_on": ramps_on, "seed": seed,
                "depth_uK": params.depth / transport.KB * 1e6,
                "temperature_uK": params.temperature * 1e6,
                "waist": params.waist, "rayleigh": params.rayleigh,
                "tau_aod": params.tau_aod}
    run = _Run("transport-sim", args.out_dir, resolved, seed)
    try:
        lines = ["T,gamma,lensing_on,survival,ci_low,ci_high,n"]
        for lens in lensing:
            for g in gammas:
                for t_ms in t_grid:
                    spec = transport.TrajectorySpec(length, float(t_ms) * 1e-3, g)
                    r = transport.simulate_transport(spec, params, n_atoms, seed,
                                                     lensing_on=bool(lens),
                                                     ramps_on=ramps_on)
                    lines.append(f"{t_ms*1e-3:.10g},{g:.10g},{int(bool(lens))},"
                                 f"{r.survival:.10g},{r.ci_low:.10g},{r.ci_high:.10g},{r.n_atoms}")
        run.write_text("survival.csv", "\n".join(lines) + "\n")
        run.finish()
        return 0
    except Exception:
        run.abort()
        raise


def _cmd_waveform_compile(args) -> int:
    cfg = _load_toml(args.config) if args.config else {}
    spec = transport.TrajectorySpec(
        length=float(cfg.get("length", 100e-6)),
        duration=float(cfg.get("duration", 0.89e-3)),
        gamma=float(cfg.get("gamma", transport.GAMMA_ZERO_JERK)),
    )
    center = float(cfg.get("center_freq", 100e6))
    scale = float(cfg.get("scale_hz_per_m", 0.5e6 / 1e-6))
    ramp = float(cfg.get("ramp_time", 0.78e-3))
    resolved = {"length": spec.length, "duration": spec.duration, "gamma": spec.gamma,
                "center_freq": center, "scale_hz_per_m": scale, "ramp_time": ramp}
    run = _Run("waveform-compile", args.out_dir, resolved, 0)
    try:
        segs = transport.compile_trajectory(spec, center, scale, ramp_time=ramp)
        run.write_text("waveform.json", transport.segments_to_json(segs) + "\n")
        run.finish()
        return 0
    except Exception:
        run.abort()
        raise


def _cmd_selftest(args) -> int:
    """Oracle-equivalence and integrator qualification gates."""
    from .statevector import StateVector
    from .tableau import TableauState, shot_rng

    rng = np.random.default_rng(2025)
    gate_pool = [("H", 1, None), ("X", 1, None), ("Z", 1, None),
                 ("RX", 1, np.pi / 2), ("RY", 1, np.pi / 2), ("RY", 1, -np.pi / 2),
                 ("RZ", 1, np.pi / 2), ("CZ", 2, None)]
    n_circuits = int(args.shots) if args.shots is not None else 60
    worst_tvd = 0.0
    det_mismatch = 0
    for trial in range(n_circuits):
        n = int(rng.integers(2, 5))
        ops = []
        for _ in range(10):
            g, k, a = gate_pool[rng.integers(len(gate_pool))]
            if k > n:
                continue
            t = tuple(rng.choice(n, size=k, replace=False).tolist())
            ops.append((g, t, a))
        sv = StateVector(n)
        st = TableauState.zeros(n, shot_rng(9, trial))
        for g, t, a in ops:
            sv.apply_gate(g, t, a)
            st.apply_gate(g, t, a)
        probs = sv.probabilities()
        n_shots = 2000
        counts = np.zeros(2**n)
        for k in range(n_shots):
            s2 = st.copy()
            s2.rng = shot_rng(trial, k)
            idx = 0
            for q in range(n):
                idx = (idx << 1) | (1 if s2.measure_z(q) else 0)
            counts[idx] += 1
        tvd = 0.5 * float(np.abs(counts / n_shots - probs).sum())
        worst_tvd = max(worst_tvd, tvd)
        det = probs > 1 - 1e-9
        for idx in np.nonzero(det)[0]:
            if counts[idx] != n_shots:
                det_mismatch += 1
    drift = transport.energy_drift_selftest(transport.TweezerParams(), duration=2e-3,
                                            n_atoms=8)
    codes.Code422().verify()
    ok = worst_tvd < 0.05 and det_mismatch == 0 and drift < 1e-6
    report = {"worst_tvd": worst_tvd, "deterministic_mismatches": det_mismatch,
              "energy_drift": drift, "passed": bool(ok)}
    run = _Run("selftest", args.out_dir, {"n_circuits": n_circuits}, 0)
    run.write_text("selftest.json", json.dumps(report, indent=1, sort_keys=True))
    run.finish()
    print(json.dumps(report, indent=1, sort_keys=True))
    return 0 if ok else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="erasurelab",
                                 description="Erasure-biased logical qubit simulation lab")
    sub = ap.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--shots", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out-dir", default=os.environ.get("ERASURELAB_OUT_DIR", "."))
        if name == "qec-teleport":
            p.add_argument("--compare", action="store_true")
        if name == "pulse-optimize":
            p.add_argument("--baseline", action="store_true", default=False,
                           help="drop the robustness term (non-robust reference pulse)")
        if name == "pulse-sweep":
            p.add_argument("--pulse", default=None)
            p.add_argument("--eps", default="-0.15:0.15:31")
            p.add_argument("--series", default="AR")
    return ap


_DISPATCH = {
    "qec-memory": _cmd_qec_memory,
    "qec-teleport": _cmd_qec_teleport,
    "pulse-optimize": _cmd_pulse_optimize,
    "pulse-sweep": _cmd_pulse_sweep,
    "transport-sim": _cmd_transport_sim,
    "waveform-compile": _cmd_waveform_compile,
    "selftest": _cmd_selftest,
}


def cli_dispatch(argv) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if not args.subcommand:
        ap.print_usage()
        return 1
    try:
        return _DISPATCH[args.subcommand](args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
