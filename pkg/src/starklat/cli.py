"""Command-line entry point: config loading, task orchestration, persistence."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, dynamics, localization, model, resolvent, spectra
from .model import ModelParams, PairPotential, Window

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ASSERT = 2

TASKS = (
    "spectrum",
    "cluster-spectrum",
    "localization",
    "evolve",
    "resolvent-check",
    "selftest",
)

_SCHEMA = {
    "": {"model", "window", "task", "output_dir", "seed", "basis",
         "probes", "dynamics", "resolvent"},
    "model": {"g", "h", "N", "potential", "statistics"},
    "potential": {"kind", "strength", "decay", "table"},
    "window": {"L", "interior_margin"},
    "probes": {"theta_list", "shell_stat", "fit_range", "rate_halfwidth"},
    "dynamics": {"t_max", "samples", "radii", "initial_sites", "symmetrized"},
    "resolvent": {"z_grid"},
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    params: ModelParams
    window: Window
    task: str
    output_dir: str
    basis: str = "stark"
    seed: int = 0
    probes: dict = field(default_factory=dict)
    dynamics: dict = field(default_factory=dict)
    resolvent: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _check_keys(section: str, data: dict) -> None:
    unknown = set(data) - _SCHEMA[section]
    if unknown:
        where = section or "top level"
        raise ConfigError(f"unknown keys {sorted(unknown)} in {where}")


def load_config(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _check_keys("", raw)
    for sec in ("model", "window", "probes", "dynamics", "resolvent"):
        if sec in raw:
            if not isinstance(raw[sec], dict):
                raise ConfigError(f"{sec} must be an object")
            _check_keys(sec, raw[sec])
    m = raw.get("model")
    w = raw.get("window")
    task = raw.get("task")
    if m is None or w is None or task is None:
        raise ConfigError("config needs model, window, and task")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}")
    basis = raw.get("basis", "stark")
    if basis not in ("position", "stark"):
        raise ConfigError(f"unknown basis {basis!r}")
    pot_raw = m.get("potential", {})
    _check_keys("potential", pot_raw)
    try:
        table = pot_raw.get("table")
        if table is not None:
            table = {int(k): float(v) for k, v in table.items()}
        pot = PairPotential(
            pot_raw.get("kind", "nearest_neighbor"),
            float(pot_raw.get("strength", 1.0)),
            float(pot_raw.get("decay", 1.0)),
            table,
        )
        params = ModelParams(
            float(m["g"]), float(m["h"]), int(m["N"]), pot,
            m.get("statistics", "distinguishable"),
        )
        window = Window(int(w["L"]), int(w["interior_margin"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model/window: {exc}") from exc
    return RunConfig(
        params, window, task,
        raw.get("output_dir", "."), basis, int(raw.get("seed", 0)),
        raw.get("probes", {}), raw.get("dynamics", {}), raw.get("resolvent", {}),
        raw,
    )


def _fmt(x) -> str:
    return f"{x:.17g}"


def write_csv(path: str, header: list, rows) -> None:
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(
                ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in row)
                + "\n"
            )


def _config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _task_spectrum(cfg: RunConfig, out: str, checks: dict, export: bool) -> None:
    op = model.build_hamiltonian(cfg.params, cfg.window, cfg.basis)
    if export:
        op.export_coo_csv(os.path.join(out, "hamiltonian_coo.csv"))
    res = spectra.eigh(op)
    mask = spectra.interior_mask(res, cfg.params)
    write_csv(
        os.path.join(out, "eigenvalues.csv"),
        ["index", "eigenvalue", "interior"],
        [(i, float(res.eigenvalues[i]), int(mask[i])) for i in range(res.eigenvalues.size)],
    )
    checks["diagonalization_residual"] = res.residual_max <= 1e-8
    checks["interior_nonempty"] = bool(mask.any())


def _task_cluster_spectrum(cfg: RunConfig, out: str, checks: dict) -> None:
    sig = spectra.cluster_spectrum(cfg.params, cfg.window)
    write_csv(
        os.path.join(out, "cluster_spectrum.csv"),
        ["value", "partition"],
        [(float(v), "+".join(map(str, g))) for v, g in zip(sig.points, sig.generators)],
    )
    checks["cluster_points_found"] = sig.points.size > 0


def _decay_probe(cfg: RunConfig) -> localization.DecayProbe:
    p = cfg.probes
    return localization.DecayProbe(
        tuple(p.get("theta_list", (0.5, 1.0))),
        p.get("shell_stat", "max"),
        tuple(p.get("fit_range", (6, 18))),
        int(p.get("rate_halfwidth", 4)),
    )


def _task_localization(cfg: RunConfig, out: str, checks: dict) -> None:
    probe = _decay_probe(cfg)
    res = spectra.eigh(model.build_hamiltonian(cfg.params, cfg.window, "stark"))
    mask = spectra.interior_mask(res, cfg.params)
    sig = spectra.cluster_spectrum(cfg.params, cfg.window) if cfg.params.N >= 2 else None
    profile_rows, shell_rows, report = [], [], []
    all_pass = True
    for i in np.where(mask)[0]:
        lam = float(res.eigenvalues[i])
        psi = res.eigenvectors[:, i]
        prof = localization.com_profile(psi, lam, cfg.params, cfg.window, cfg.params.N)
        com_rep = localization.com_decay_check(prof, max(probe.theta_list))
        for a, nv in zip(prof.sectors, prof.norms):
            if nv > localization.AMPLITUDE_FLOOR:
                profile_rows.append((lam, float(prof.com_center), int(a), float(nv)))
        isolated = sig is None or spectra.dist_to_cluster(lam, sig) >= 0.05
        entry = {
            "eigenvalue": lam,
            "com_center": prof.com_center,
            "com_slope": com_rep.tail_slope,
            "com_C": com_rep.c_fit,
            "isolated": bool(isolated),
        }
        if isolated:
            center = localization.localization_center(lam, cfg.params)
            rep = localization.superexp_shell_fit(
                psi, cfg.window, cfg.params.N, probe, center
            )
            for r, s in zip(rep.radii, rep.amplitudes):
                if s > localization.AMPLITUDE_FLOOR:
                    rate = rep.rates[r] if rep.rates.size > r else float("nan")
                    shell_rows.append((lam, int(r), float(s), float(rate)))
            entry["shell_passed"] = rep.passed
            entry["final_rate"] = rep.final_rate
            all_pass &= rep.passed and com_rep.passed
        report.append(entry)
    write_csv(
        os.path.join(out, "com_profile.csv"),
        ["eigenvalue", "com_center", "a", "norm"],
        profile_rows,
    )
    write_csv(
        os.path.join(out, "shell_decay.csv"),
        ["eigenvalue", "r", "amplitude", "rate"],
        shell_rows,
    )
    with open(os.path.join(out, "decay_report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    checks["decay_checks"] = all_pass and len(report) > 0


def _task_evolve(cfg: RunConfig, out: str, checks: dict) -> None:
    d = cfg.dynamics
    op = model.build_hamiltonian(cfg.params, cfg.window, "position")
    sites = tuple(d.get("initial_sites", (0,) * cfg.params.N))
    if len(sites) != cfg.params.N:
        raise ConfigError("initial_sites length must equal N")
    if d.get("symmetrized") and cfg.params.N == 2:
        psi0 = dynamics.symmetrized_pair(cfg.window, *sites)
    else:
        psi0 = dynamics.product_state(cfg.window, sites)
    pcfg = dynamics.PropagatorConfig(float(d.get("t_max", 50.0)), int(d.get("samples", 200)))
    radii = [int(r) for r in d.get("radii", [2, 4, 6])]
    trace = dynamics.tail_trace(op, psi0, pcfg, radii)
    x = np.arange(-cfg.window.L, cfg.window.L + 1)
    rows = [
        (float(t), int(xx), float(trace.densities[k, j]))
        for k, t in enumerate(trace.times)
        for j, xx in enumerate(x)
        if trace.densities[k, j] > 1e-16
    ]
    write_csv(os.path.join(out, "density_trace.csv"), ["t", "x", "rho"], rows)
    write_csv(
        os.path.join(out, "tail_summary.csv"),
        ["r", "sup_tail"],
        [(int(r), float(s)) for r, s in zip(trace.radii, trace.sup_tails)],
    )
    checks["norm_drift"] = trace.norm_drift_max <= 1e-10
    checks["truncation_safe"] = trace.truncation_safe


def _task_resolvent(cfg: RunConfig, out: str, checks: dict) -> None:
    ws = resolvent.ResolventWorkspace(cfg.params, cfg.window)
    z_grid = [complex(a, b) for a, b in cfg.resolvent.get("z_grid", [[0.0, 8.0]])]
    entries = []
    ok = True
    for z in z_grid:
        res = resolvent.functional_equation_residual(z, cfg.params, cfg.window, ws)
        i_mat = resolvent.build_I(z, ws)
        entries.append(
            {
                "z": [z.real, z.imag],
                "residual": res,
                "norm_I": resolvent.operator_norm(i_mat),
                "norm_D": resolvent.operator_norm(resolvent.build_D(z, ws)),
            }
        )
        ok &= res <= 1e-6
    with open(os.path.join(out, "functional_eq.json"), "w", encoding="utf-8") as fh:
        json.dump(entries, fh, indent=1, sort_keys=True)
        fh.write("\n")
    rep = resolvent.compactness_proxy(resolvent.build_I(z_grid[0], ws))
    write_csv(
        os.path.join(out, "iz_singular_values.csv"),
        ["index", "singular_value"],
        [(i, float(s)) for i, s in enumerate(rep.singular_values)],
    )
    checks["functional_equation"] = ok
    checks["compactness_proxy"] = rep.passed


def _task_selftest(cfg: RunConfig, out: str, checks: dict) -> None:
    from . import specfun

    checks["bessel_trivial"] = specfun.bessel_j(0, 0.0) == 1.0
    checks["bessel_reflection"] = (
        specfun.bessel_j(-3, 2.5) == -specfun.bessel_j(3, 2.5)
    )
    checks["bessel_bound"] = specfun.check_upper_bound(30, 2.0).passed
    p1 = ModelParams(1.0, 0.5, 1)
    w1 = Window(12, 4)
    res = spectra.eigh(model.build_hamiltonian(p1, w1, "position"))
    interior = res.eigenvalues[spectra.interior_mask(res, p1)]
    checks["ladder"] = bool(
        np.abs(interior - np.round(interior)).max() <= 1e-8
    )
    checks["bell_3"] = len(spectra.enumerate_set_partitions(3)) == 5
    checks["chains_n3"] = (
        len(resolvent.enumerate_chains(3, "connected_only")) == 4
        and len(resolvent.enumerate_chains(3, "all")) == 8
    )
    w2 = Window(5, 2)
    psi = dynamics.product_state(w2, (1, -2))
    rho = dynamics.density(psi, w2, 2)
    checks["density_delta"] = rho.sum() == 2.0


def run(config_path: str, out_override=None, export_matrices=False, expect_task=None) -> int:
    try:
        cfg = load_config(config_path)
        if expect_task is not None and cfg.task != expect_task:
            raise ConfigError(
                f"config task {cfg.task!r} does not match subcommand {expect_task!r}"
            )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = out_override or cfg.output_dir
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output dir: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    checks: dict = {}
    timings: dict = {}
    manifest = {
        "config": cfg.raw,
        "config_sha256": _config_hash(cfg.raw),
        "version": __version__,
        "complete": False,
    }
    t0 = time.monotonic()
    try:
        task_fn = {
            "spectrum": lambda: _task_spectrum(cfg, out, checks, export_matrices),
            "cluster-spectrum": lambda: _task_cluster_spectrum(cfg, out, checks),
            "localization": lambda: _task_localization(cfg, out, checks),
            "evolve": lambda: _task_evolve(cfg, out, checks),
            "resolvent-check": lambda: _task_resolvent(cfg, out, checks),
            "selftest": lambda: _task_selftest(cfg, out, checks),
        }[cfg.task]
        task_fn()
        manifest["complete"] = True
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        _write_manifest(out, manifest, checks, timings)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and mark incomplete
        print(f"run failed: {exc}", file=sys.stderr)
        checks["run_completed"] = False
        _write_manifest(out, manifest, checks, timings)
        return EXIT_ASSERT
    timings[cfg.task] = time.monotonic() - t0
    _write_manifest(out, manifest, checks, timings)
    if not all(checks.values()):
        failed = sorted(k for k, v in checks.items() if not v)
        print(f"checks failed: {failed}", file=sys.stderr)
        return EXIT_ASSERT
    for name, verdict in sorted(checks.items()):
        print(f"{name}: {'pass' if verdict else 'FAIL'}")
    return EXIT_OK


def _write_manifest(out: str, manifest: dict, checks: dict, timings: dict) -> None:
    manifest = dict(manifest, checks={k: bool(v) for k, v in checks.items()}, timings=timings)
    tmp = os.path.join(out, "manifest.json.tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, os.path.join(out, "manifest.json"))


def _read_csv(path: str) -> list:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return [dict(zip(header, row)) for row in rows]


def plot_data(run_dir: str) -> int:
    """Reshape run outputs into tidy log-scale tables for plotting."""
    wrote = 0
    shell = os.path.join(run_dir, "shell_decay.csv")
    if os.path.exists(shell):
        rows = [
            (int(r["r"]), float(np.log10(float(r["amplitude"]))), float(r["rate"]))
            for r in _read_csv(shell)
            if float(r["amplitude"]) > 0
        ]
        write_csv(os.path.join(run_dir, "shell_decay_plot.csv"),
                  ["r", "log10_amplitude", "rate"], rows)
        wrote += 1
    prof = os.path.join(run_dir, "com_profile.csv")
    if os.path.exists(prof):
        rows = []
        for r in _read_csv(prof):
            center = float(r["com_center"])
            rows.append(
                (float(int(r["a"]) - center), float(np.log10(float(r["norm"]))))
            )
        write_csv(os.path.join(run_dir, "com_profile_plot.csv"),
                  ["a_minus_center", "log10_norm"], rows)
        wrote += 1
    tail = os.path.join(run_dir, "tail_summary.csv")
    if os.path.exists(tail):
        rows = [
            (int(r["r"]), float(np.log10(max(float(r["sup_tail"]), 1e-300))))
            for r in _read_csv(tail)
        ]
        write_csv(os.path.join(run_dir, "tail_summary_plot.csv"),
                  ["r", "log10_sup_tail"], rows)
        wrote += 1
    if wrote == 0:
        print(f"no plottable outputs under {run_dir}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="starklat",
        description="Truncated N-particle tilted-lattice numerics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in TASKS + ("plot-data",):
        sp = sub.add_parser(name)
        if name == "plot-data":
            sp.add_argument("--out", required=True, help="completed run directory")
        else:
            sp.add_argument("--config", required=True)
            sp.add_argument("--out", default=None)
            sp.add_argument("--workers", type=int, default=1)
            sp.add_argument("--export-matrices", action="store_true")
    args = parser.parse_args(argv)
    if args.command == "plot-data":
        return plot_data(args.out)
    return run(
        args.config, args.out, getattr(args, "export_matrices", False), args.command
    )


if __name__ == "__main__":
    sys.exit(main())
