"""Command-line entry point: single-stage commands plus the certify pipeline.

Every command reads one JSON config (see config.py), writes machine-readable
artifacts and a report.json into the output directory, and exits 0 on
success, 2 on validation errors, 3 on numerical failures.  Reports carry a
sha256 over their deterministic body; timestamps and timings live only in
the provenance section, so identical configs give bit-identical bodies.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .chains import build_graph, certify, check_connected, coupling_path, spanning_chain
from .config import ConfigValidationError, RunConfig, load_config
from .coupling import QuadratureConfig, assemble_coupling_matrix
from .dynamics import (
    ControlSignal,
    NonlinearConfig,
    alpha_scaling_study,
    galerkin_mode_state,
    grid_mode_state,
    propagate_bilinear,
    propagate_nonlinear,
    synthesize_chain_transfer,
    transfer_fidelity,
)
from .errors import NumericalError
from .poisson import (
    GateProfile,
    GateSegment,
    StaggeredGrid,
    gate_convergence_sweep,
    solve_full_gate,
    solve_partial_gate_fd,
)
from .spectral import (
    BoundaryDisplacement,
    check_simplicity,
    check_weak_nonresonance,
    eigenvalue_shape_derivative,
    enumerate_modes,
    shifted_spectrum,
)

COMMANDS = (
    "spectrum", "potential", "coupling", "chain", "resonance",
    "shape-derivative", "evolve", "control", "nonlinear", "gate-sweep", "certify",
)

CSV_DOC = """\
artifact CSV columns per command:
  spectrum          spectrum.csv: j1,j2,lambda
  potential         potential.csv: x1,x2,value (row-major lattice)
  coupling          coupling.csv: a1,a2,b1,b2,value; coupling.json: modes + triplets
  chain             chain.json: connectivity, components, witness paths
  resonance         shifted_spectrum.csv: position,lambda
  evolve/control    trajectory.csv: time,norm,h1_seminorm,
                    population_1..K,control_value
  control           control.csv: duration,value
  nonlinear         alpha_study.csv: alpha,deviation,max_norm_drift,max_h1
                    nonlinear_trajectory.csv: time,norm,h1_seminorm,
                    gate_expectation,population_1..K,control_value
  gate-sweep        gate_sweep.csv: fraction,a_snapped,b_snapped,l2_error,h1_error
  certify           chain.json (full certificate)
All floats use 17 significant digits.  GATEDQDOT_OUT overrides --out.
"""


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def _gate_field(config: RunConfig):
    """Gate potential for the configured profile; FD solve for segment gates."""
    gate = config.gate
    if gate.kind == "fourier_mode":
        return solve_full_gate(GateProfile.fourier_mode(gate.n, config.L))
    if gate.kind == "sine_series":
        return solve_full_gate(GateProfile.sine_series(gate.coefficients, config.L))
    segment = GateSegment(gate.a, gate.b)
    ia, ib = segment.snap(config.grid.nx)
    x1 = np.linspace(0.0, math.pi, config.grid.nx + 1)
    trace = GateProfile.fourier_mode(gate.trace_mode, config.L).trace(x1[ia : ib + 1])
    trace[0] = 0.0
    trace[-1] = 0.0
    return solve_partial_gate_fd(segment, trace, config.L, config.grid.nx, config.grid.ny)


def _quad(config: RunConfig, field) -> QuadratureConfig:
    tol = config.tolerances.quadrature_self_check
    if config.gate.kind == "segment":
        # bilinear grid interpolation caps attainable quadrature agreement
        tol = max(tol, 1e-5)
    return QuadratureConfig(
        panels=config.quadrature.panels, nodes=config.quadrature.nodes, self_check_tol=tol
    )


def _coupling_stage(config: RunConfig, spectrum, field):
    return assemble_coupling_matrix(
        field, spectrum, config.truncation, config.tolerances.zero_tol, _quad(config, field)
    )


def _write_rows_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{x:.17g}" if isinstance(x, float) else str(x) for x in row) + "\n")


def _simplicity_results(spectrum, tol):
    collisions = check_simplicity(spectrum, tol)
    return {
        "tol": tol,
        "simple": not collisions,
        "collisions": [[list(a), list(b), gap] for a, b, gap in collisions],
    }


def _cmd_spectrum(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    _write_rows_csv(
        outdir / "spectrum.csv",
        "j1,j2,lambda",
        [(p.index.j1, p.index.j2, p.lam) for p in spectrum.pairs],
    )
    results = {
        "truncation": config.truncation,
        "L": config.L,
        "lambda_min": float(spectrum.eigenvalues[0]),
        "lambda_max": float(spectrum.eigenvalues[-1]),
        "simplicity": _simplicity_results(spectrum, config.tolerances.simplicity),
    }
    return results, ["spectrum.csv"]


def _cmd_potential(config: RunConfig, outdir: Path):
    field = _gate_field(config)
    if hasattr(field, "rasterize"):
        grid_field = field.rasterize(config.grid.nx, config.grid.ny)
        results = {"representation": "spectral", "terms": [[m, c] for m, c in field.terms]}
    else:
        grid_field = field
        results = {"representation": "grid", **_jsonable(field.meta)}
    grid_field.to_csv(outdir / "potential.csv")
    return results, ["potential.csv"]


def _cmd_coupling(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    field = _gate_field(config)
    matrix = _coupling_stage(config, spectrum, field)
    matrix.to_csv(outdir / "coupling.csv")
    matrix.to_json(outdir / "coupling.json")
    entries = list(matrix.entries.values())
    results = {
        "truncation": config.truncation,
        "stored": len(entries),
        "dropped": matrix.dropped,
        "zero_tol": matrix.zero_tol,
        "max_entry": max((abs(v) for v in entries), default=0.0),
    }
    return results, ["coupling.csv", "coupling.json"]


def _cmd_chain(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    field = _gate_field(config)
    matrix = _coupling_stage(config, spectrum, field)
    graph = build_graph(matrix, config.truncation)
    connected, components = check_connected(graph)
    witness = {}
    for comp in components:
        root = comp[0]
        for node in comp[1:]:
            path = coupling_path(graph, root, node)
            witness[(graph.modes[root], graph.modes[node])] = [graph.modes[p] for p in path]
    doc = {
        "connected": connected,
        "components": [[list(graph.modes[i]) for i in comp] for comp in components],
        "witness_paths": [
            {"from": list(a), "to": list(b), "path": [list(m) for m in p]}
            for (a, b), p in sorted(witness.items())
        ],
        "truncation": config.truncation,
        "zero_tol": matrix.zero_tol,
    }
    with open(outdir / "chain.json", "w") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    results = {
        "connected": connected,
        "component_count": len(components),
        "component_sizes": [len(c) for c in components],
        "edges": len(graph.edges),
        "truncation": config.truncation,
    }
    return results, ["chain.json"]


def _cmd_resonance(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    field = _gate_field(config)
    matrix = _coupling_stage(config, spectrum, field)
    rho = config.effective_rho()
    shifted = shifted_spectrum(spectrum, matrix, rho, config.truncation)
    tol = config.resonance_tol(shifted.eigenvalues)
    violations = check_weak_nonresonance(shifted.eigenvalues, tol)
    _write_rows_csv(
        outdir / "shifted_spectrum.csv",
        "position,lambda",
        [(i, float(v)) for i, v in enumerate(shifted.eigenvalues)],
    )
    results = {
        "rho": rho,
        "tol": tol,
        "truncation": config.truncation,
        "violation_count": len(violations),
        "violations": [
            {
                "pair_s": [list(spectrum.modes[s[0]]), list(spectrum.modes[s[1]])],
                "pair_t": [list(spectrum.modes[t[0]]), list(spectrum.modes[t[1]])],
                "gap": gap,
            }
            for s, t, gap in violations[:200]
        ],
        "weakly_nonresonant": not violations,
    }
    return results, ["shifted_spectrum.csv"]


def _cmd_shape_derivative(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    mode = config.shape.mode
    wall = config.shape.wall
    value = eigenvalue_shape_derivative(spectrum, mode, BoundaryDisplacement(wall=wall))
    j1, j2 = mode
    if wall in ("left", "right"):
        exact = -2.0 * j1**2 / math.pi
        lam = lambda t: j1**2 * math.pi**2 / (math.pi + t) ** 2 + j2**2 * math.pi**2 / config.L**2
    else:
        exact = -2.0 * math.pi**2 * j2**2 / config.L**3
        lam = lambda t: j1**2 + j2**2 * math.pi**2 / (config.L + t) ** 2
    h = 1e-5
    oracle = (lam(h) - lam(-h)) / (2 * h)
    results = {
        "mode": list(mode),
        "wall": wall,
        "value": value,
        "widened_rectangle_oracle": oracle,
        "exact": exact,
        "abs_error_vs_exact": abs(value - exact),
    }
    return results, []


def _control_from_config(config: RunConfig) -> ControlSignal:
    if config.control is None:
        raise ValueError("this command needs a control section in the config")
    return ControlSignal(samples=config.control, delta=config.delta)


def _write_galerkin_trajectory(path, traj, k, eigenvalues, control):
    controls = [value for _, value in control.samples] + [0.0]
    with open(path, "w") as fh:
        cols = ["time", "norm", "h1_seminorm"] + [
            f"population_{i + 1}" for i in range(k)
        ] + ["control_value"]
        fh.write(",".join(cols) + "\n")
        for idx, state in enumerate(traj):
            h1 = math.sqrt(float(np.sum(eigenvalues * np.abs(state.values) ** 2)))
            pops = [state.population(i) for i in range(k)]
            row = [state.time, state.norm, h1] + pops + [controls[min(idx, len(controls) - 1)]]
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def _cmd_evolve(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    field = _gate_field(config)
    matrix = _coupling_stage(config, spectrum, field)
    control = _control_from_config(config)
    initial = galerkin_mode_state(spectrum, config.dynamics.path[0], config.truncation)
    traj = propagate_bilinear(spectrum, matrix, control, initial, config.truncation)
    k = min(config.dynamics.log_populations or 1, config.truncation)
    _write_galerkin_trajectory(
        outdir / "trajectory.csv", traj, k, spectrum.eigenvalues[: config.truncation], control
    )
    final = traj[-1]
    results = {
        "total_duration": control.total_duration,
        "final_norm": final.norm,
        "final_populations": {
            str(tuple(spectrum.modes[i])): final.population(i) for i in range(k)
        },
    }
    return results, ["trajectory.csv"]


def _cmd_control(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    field = _gate_field(config)
    matrix = _coupling_stage(config, spectrum, field)
    path = config.dynamics.path
    control = synthesize_chain_transfer(
        path,
        spectrum,
        matrix,
        config.delta,
        config.dynamics.amplitude_fraction,
        truncation=config.truncation,
        samples_per_period=config.dynamics.samples_per_period,
        duration_cap=config.dynamics.duration_cap,
    )
    control.to_csv(outdir / "control.csv")
    artifacts = ["control.csv"]
    results = {
        "path": [list(p) for p in path],
        "samples": len(control.samples),
        "total_duration": control.total_duration,
    }
    if control.samples:
        initial = galerkin_mode_state(spectrum, path[0], config.truncation)
        traj = propagate_bilinear(spectrum, matrix, control, initial, config.truncation)
        k = min(config.dynamics.log_populations or 1, config.truncation)
        _write_galerkin_trajectory(
            outdir / "trajectory.csv", traj, k, spectrum.eigenvalues[: config.truncation], control
        )
        artifacts.append("trajectory.csv")
        results["fidelity"] = transfer_fidelity(traj[-1], path[-1])
        results["final_norm"] = traj[-1].norm
    return results, artifacts


def _cmd_nonlinear(config: RunConfig, outdir: Path):
    field = _gate_field(config)
    dyn = config.dynamics
    grid = StaggeredGrid(L=config.L, nx=dyn.nonlinear_nx, ny=dyn.nonlinear_ny)
    initial = grid_mode_state(grid, dyn.path[0], config.L)
    if config.control is not None:
        control = ControlSignal(samples=config.control, delta=config.delta)
    else:
        control = ControlSignal.constant(dyn.T, 0.5 * config.delta, config.delta)
    base = NonlinearConfig(
        alpha=0.0, dt=dyn.dt, nx=dyn.nonlinear_nx, ny=dyn.nonlinear_ny, log_populations=0
    )
    study = alpha_scaling_study(dyn.alphas, control, dyn.T, base, field, initial)
    _write_rows_csv(
        outdir / "alpha_study.csv",
        "alpha,deviation,max_norm_drift,max_h1",
        [
            (r["alpha"], r["deviation"], r["max_norm_drift"], r["max_h1"])
            for r in study["rows"]
        ],
    )
    log_cfg = NonlinearConfig(
        alpha=dyn.alphas[-1], dt=dyn.dt, nx=dyn.nonlinear_nx, ny=dyn.nonlinear_ny,
        log_populations=dyn.log_populations,
    )
    logged = propagate_nonlinear(initial, control.clipped(dyn.T), log_cfg, field)
    logged.to_csv(outdir / "nonlinear_trajectory.csv")
    results = {
        "alphas": list(dyn.alphas),
        "deviations": [r["deviation"] for r in study["rows"]],
        "slope": study["slope"],
        "max_norm_drift": max(r["max_norm_drift"] for r in study["rows"]),
        "max_h1_seminorm": max(r["max_h1"] for r in study["rows"]),
        "dt_lambda_max": logged.dt_lambda_max,
        "T": dyn.T,
    }
    return results, ["alpha_study.csv", "nonlinear_trajectory.csv"]


def _cmd_gate_sweep(config: RunConfig, outdir: Path):
    if config.gate.kind != "fourier_mode":
        raise ValueError("gate-sweep requires a fourier_mode gate profile")
    rows = gate_convergence_sweep(
        config.gate_sweep_fractions, config.gate.n, config.L, config.grid.nx, config.grid.ny
    )
    _write_rows_csv(
        outdir / "gate_sweep.csv",
        "fraction,a_snapped,b_snapped,l2_error,h1_error",
        [(r["fraction"], r["a_snapped"], r["b_snapped"], r["l2_error"], r["h1_error"]) for r in rows],
    )
    errors = [r["l2_error"] for r in rows]
    results = {
        "rows": rows,
        "strictly_decreasing_l2": all(b < a for a, b in zip(errors[:-1], errors[1:])),
    }
    return results, ["gate_sweep.csv"]


def _cmd_certify(config: RunConfig, outdir: Path):
    spectrum = enumerate_modes(config.L, config.truncation)
    simplicity = _simplicity_results(spectrum, config.tolerances.simplicity)
    field = _gate_field(config)
    matrix = _coupling_stage(config, spectrum, field)
    rho = config.effective_rho()
    shifted = shifted_spectrum(spectrum, matrix, rho, config.truncation)
    tol = config.resonance_tol(shifted.eigenvalues)
    cert = certify(matrix, shifted.eigenvalues, config.truncation, tol)
    cert.to_json(outdir / "chain.json")
    weak = check_weak_nonresonance(shifted.eigenvalues, tol)
    verdict = {
        "hypothesis": "non-resonant connectedness chain at finite truncation",
        "truncation": config.truncation,
        "rho": rho,
        "tolerances": {"resonance": tol, "simplicity": config.tolerances.simplicity,
                       "zero": matrix.zero_tol},
        "simplicity": simplicity,
        "chain": {
            "connected": cert.connected,
            "component_count": len(cert.components),
            "chain_edges": len(spanning_chain(build_graph(matrix, config.truncation))),
        },
        "resonance_violations": len(cert.violations),
        "weak_nonresonance_violations": len(weak),
        "certified": bool(simplicity["simple"] and cert.certified),
    }
    return verdict, ["chain.json"]


_DISPATCH = {
    "spectrum": _cmd_spectrum,
    "potential": _cmd_potential,
    "coupling": _cmd_coupling,
    "chain": _cmd_chain,
    "resonance": _cmd_resonance,
    "shape-derivative": _cmd_shape_derivative,
    "evolve": _cmd_evolve,
    "control": _cmd_control,
    "nonlinear": _cmd_nonlinear,
    "gate-sweep": _cmd_gate_sweep,
    "certify": _cmd_certify,
}


def run(command: str, config_path, out_dir=None, threads: int = 1, verbose: bool = False) -> int:
    """Execute one command; returns the process exit code."""
    if command not in _DISPATCH:
        print(f"unknown command: {command}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        config = load_config(config_path)
    except ConfigValidationError as exc:
        for err in exc.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2

    out = os.environ.get("GATEDQDOT_OUT") or out_dir or "gatedqdot-out"
    outdir = Path(out)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        if verbose:
            print(f"[gatedqdot] {command} -> {outdir}", file=sys.stderr)
        results, artifacts = _DISPATCH[command](config, outdir)
    except (ConfigValidationError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    body = _jsonable(
        {"command": command, "config": config.to_dict(), "results": results, "artifacts": artifacts}
    )
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    report = dict(body)
    report["provenance"] = {
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "timestamp_utc": datetime.now(timezone.utc).isoformat(),
        "elapsed_seconds": time.perf_counter() - t0,
        "threads": threads,
        "body_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
    }
    with open(outdir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if command == "certify":
        print(json.dumps(body["results"], indent=2, sort_keys=True))
    if verbose:
        print(f"[gatedqdot] wrote report.json and {len(artifacts)} artifact(s)", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gatedqdot",
        description="Spectral simulator and controllability certifier for a gated 2-D quantum device.",
        epilog=CSV_DOC,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON run configuration")
    parser.add_argument("--out", default=None, help="output directory (default: ./gatedqdot-out)")
    parser.add_argument("--threads", type=int, default=1, help="worker hint recorded in provenance")
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    return run(args.command, args.config, args.out, args.threads, args.verbose)


if __name__ == "__main__":
    sys.exit(main())
