"""Command-line front end: analysis subcommands, CSV/JSON artifacts.

Every run writes a JSON report (resolved parameters, verdicts, residuals)
and CSV data files with full round-trip precision. Numeric output is
deterministic for a fixed configuration and seed. Exit codes: 0 success,
2 argument/validation failure, 3 numerical failure (diagnostic inside the
report when one can be written).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import mfg as mfg_mod
from .config import ModelConfig
from .equilibrium import mfg_equilibrium, ordered_equilibrium
from .errors import CzirokMFGError
from .forward import critical_sigma, forward_spectrum
from .solver import (Grid, SpectralKineticSolver, picard_solve,
                     simulate_forward)

SCHEMA_VERSION = 1
OUTDIR_ENV = "CZIROK_MFG_OUTDIR"


def _fmt(x) -> str:
    """Full round-trip decimal formatting for CSV cells."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def write_report(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _spectrum_rows(spec):
    return [(spec.k, ev.real, ev.imag) for ev in spec.eigenvalues]


def _config_from_args(args) -> ModelConfig:
    return ModelConfig(l=args.l, h=args.h, sigma=args.sigma, r=args.r,
                       P=args.P, K=args.K,
                       quad_nodes=args.quad_nodes)


def _resolved_params(args) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _outdir(args) -> Path:
    out = os.environ.get(OUTDIR_ENV) or args.outdir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ----- subcommand bodies ----------------------------------------------------------


def cmd_forward_spectrum(args) -> int:
    cfg = _config_from_args(args)
    eq = ordered_equilibrium(cfg)
    out = _outdir(args)
    rows, leading = [], {}
    for k in range(0, cfg.K + 1):
        spec = forward_spectrum(cfg, eq, k)
        rows.extend(_spectrum_rows(spec))
        leading[str(k)] = {"leading": complex(spec.leading), "stable": spec.stable}
    write_csv(out / "forward_spectrum.csv", ["k", "re", "im"], rows)
    write_report(out / "forward_spectrum.json", {
        "subcommand": "forward-spectrum", "params": _resolved_params(args),
        "mean_speed": eq.xi, "modes": leading,
    })
    return 0


def cmd_forward_sigma_c(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    sigma_c = critical_sigma(cfg, args.k, args.sigma_lo, args.sigma_hi)
    write_report(out / "forward_sigma_c.json", {
        "subcommand": "forward-sigma-c", "params": _resolved_params(args),
        "sigma_c": sigma_c,
    })
    write_csv(out / "forward_sigma_c.csv", ["k", "sigma_c"], [(args.k, sigma_c)])
    return 0


def cmd_forward_simulate(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    grid = Grid(Nx=args.Nx, Nu=args.Nu)
    solver = SpectralKineticSolver(cfg.l, cfg.h, cfg.sigma, grid=grid, variant="forward")
    rho0 = solver.equilibrium_rho()
    rng = np.random.default_rng(args.seed)
    phase = np.exp(2j * np.pi * rng.random())
    rho0[1, :] += args.perturbation * phase * rho0[0, :] * cfg.l
    run = simulate_forward(solver, rho0, args.T)
    traj = run.trajectory
    xs = solver.x_nodes()
    rows = []
    stride = max(1, len(traj.times) // args.max_frames)
    for i in range(0, len(traj.times), stride):
        prof = np.fft.irfft(traj.marginal_hat[i], n=solver.Nx) * solver.Nx
        rows.extend((traj.times[i], x, p) for x, p in zip(xs, prof.real))
    write_csv(out / "forward_marginals.csv", ["t", "x", "value"], rows)
    payload = {
        "subcommand": "forward-simulate", "params": _resolved_params(args),
        "mass_drift": run.mass_drift, "wave_note": run.wave_note,
        "wave": None,
    }
    if run.wave is not None:
        payload["wave"] = {"omega": run.wave.omega, "residual": run.wave.residual}
    write_report(out / "forward_simulate.json", payload)
    return 0


def cmd_mfg_spectrum(args) -> int:
    cfg = _config_from_args(args)
    eq = mfg_equilibrium(cfg)
    out = _outdir(args)
    blocks = mfg_mod.assemble_blocks(cfg, eq, args.k)
    spec = mfg_mod.mfg_spectrum(cfg, eq, args.k, blocks)
    verdict = mfg_mod.stability_verdict(cfg, eq, args.k, blocks)
    write_csv(out / "mfg_spectrum.csv", ["k", "re", "im"], _spectrum_rows(spec))
    write_report(out / "mfg_spectrum.json", {
        "subcommand": "mfg-spectrum", "params": _resolved_params(args),
        "chi": eq.chi, "mean_speed": eq.xi,
        "verdict": verdict.verdict, "reason": verdict.reason,
        "axis_distance": verdict.axis_distance,
        "axis_tolerance": verdict.axis_tolerance,
        "cond_init": verdict.cond_init,
        "b1_asymmetry": blocks.b1_asym, "b1_route_dev": blocks.b1_route_dev,
    })
    return 0


def cmd_mfg_rc(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    r_c = mfg_mod.critical_r(cfg, args.k, args.r_lo, args.r_hi)
    write_report(out / "mfg_rc.json", {
        "subcommand": "mfg-rc", "params": _resolved_params(args), "r_c": r_c,
    })
    write_csv(out / "mfg_rc.csv", ["k", "r_c"], [(args.k, r_c)])
    return 0


def cmd_mfg_rc_sweep(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    sigmas = [float(s) for s in args.sigmas.split(",")]
    rows = mfg_mod.rc_sweep(cfg, sigmas, args.k)
    csv_rows = [(row["sigma"], row["r_c"] if row["r_c"] is not None else float("nan"))
                for row in rows]
    write_csv(out / "mfg_rc_sweep.csv", ["sigma", "r_c"], csv_rows)
    write_report(out / "mfg_rc_sweep.json", {
        "subcommand": "mfg-rc-sweep", "params": _resolved_params(args),
        "table": rows,
    })
    failures = [row for row in rows if row["error"] is not None]
    return 3 if len(failures) == len(rows) else 0


def cmd_mfg_bvp(args) -> int:
    cfg = _config_from_args(args)
    eq = mfg_equilibrium(cfg)
    out = _outdir(args)
    blocks = mfg_mod.assemble_blocks(cfg, eq, args.k)
    sol = mfg_mod.stabilizing_solution(blocks)
    lam_max = float(np.linalg.eigvals(sol.A_c).real.max())
    T = args.T if args.T is not None else 10.0 / abs(lam_max)
    times = np.linspace(0.0, T, args.nt)
    rng = np.random.default_rng(args.seed)
    Y10 = rng.standard_normal(cfg.P) + 1j * rng.standard_normal(cfg.P)
    Y10 /= np.linalg.norm(Y10)
    traj = mfg_mod.bvp_solve(blocks, sol, Y10, times)
    n1 = np.linalg.norm(traj.Y1, axis=1)
    n2 = np.linalg.norm(traj.Y2, axis=1)
    write_csv(out / "mfg_bvp.csv", ["t", "norm1", "norm2"],
              list(zip(times, n1, n2)))
    write_report(out / "mfg_bvp.json", {
        "subcommand": "mfg-bvp", "params": _resolved_params(args),
        "care_residual": sol.care_residual,
        "x_herm_deviation": sol.herm_deviation,
        "ac_max_real": lam_max,
        "cond_init": sol.cond_init,
        "cond_V11": sol.cond_V11,
        "psim_residual": sol.psim_residual,
        "horizon": T,
        "decay_Y1": float(n1[-1] / n1[0]),
        "decay_Y2": float(n2[-1] / n1[0]),
        "z2_max": float(np.abs(traj.Z2).max()),
    })
    return 0


def cmd_mfg_picard(args) -> int:
    cfg = _config_from_args(args)
    out = _outdir(args)
    grid = Grid(Nx=args.Nx, Nu=args.Nu)
    solver = SpectralKineticSolver(cfg.l, cfg.h, cfg.sigma, cfg.r,
                                   grid=grid, variant="mfg")
    rho0 = solver.equilibrium_rho()
    rng = np.random.default_rng(args.seed)
    phase = np.exp(2j * np.pi * rng.random())
    rho0[1, :] += args.perturbation * phase * rho0[0, :] * cfg.l
    T = args.T if args.T is not None else 40.0 / np.sqrt(cfg.r)
    run = picard_solve(solver, rho0, T, damping=args.damping,
                       max_iters=args.max_iters)
    traj = run.trajectory
    xs = solver.x_nodes()
    rows = []
    stride = max(1, len(traj.times) // args.max_frames)
    for i in range(0, len(traj.times), stride):
        prof = np.fft.irfft(traj.marginal_hat[i], n=solver.Nx) * solver.Nx
        rows.extend((traj.times[i], x, p) for x, p in zip(xs, prof.real))
    write_csv(out / "mfg_picard_marginals.csv", ["t", "x", "value"], rows)
    payload = {
        "subcommand": "mfg-picard", "params": _resolved_params(args),
        "horizon": T, "converged": run.converged,
        "iterations": len(run.residual_history),
        "residual_history": run.residual_history,
        "mass_drift": run.mass_drift,
        "wave_note": run.wave_note, "wave": None,
    }
    if run.wave is not None:
        payload["wave"] = {"omega": run.wave.omega, "residual": run.wave.residual}
    write_report(out / "mfg_picard.json", payload)
    return 0


# ----- argument plumbing ----------------------------------------------------------


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--l", type=float, default=10.0, help="domain length")
    p.add_argument("--h", type=float, default=5.0, help="interaction strength")
    p.add_argument("--sigma", type=float, default=2.0, help="noise intensity")
    p.add_argument("--r", type=float, default=1.0, help="unit control cost")
    p.add_argument("--P", type=int, default=20, help="velocity modes per Fourier mode")
    p.add_argument("--K", type=int, default=4, help="max Fourier mode index")
    p.add_argument("--quad-nodes", dest="quad_nodes", type=int, default=0,
                   help="Gauss-Hermite nodes (0 = automatic)")
    p.add_argument("--outdir", default="out", help=f"output directory (env {OUTDIR_ENV} overrides)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="czirok-mfg",
        description="Stability analysis and travelling waves of a kinetic "
                    "mean-field game of inertial self-propelled agents")
    ap.add_argument("--config", help="key=value file supplying argument defaults")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("forward-spectrum", help="eigenvalues of the kinetic model's modes")
    _add_model_args(p)
    p.set_defaults(func=cmd_forward_spectrum)

    p = sub.add_parser("forward-sigma-c", help="critical noise by bisection")
    _add_model_args(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--sigma-lo", dest="sigma_lo", type=float, default=0.2)
    p.add_argument("--sigma-hi", dest="sigma_hi", type=float, default=2.5)
    p.set_defaults(func=cmd_forward_sigma_c)

    p = sub.add_parser("forward-simulate", help="nonlinear kinetic run + wave fit")
    _add_model_args(p)
    p.add_argument("--T", type=float, default=80.0)
    p.add_argument("--Nx", type=int, default=64)
    p.add_argument("--Nu", type=int, default=48)
    p.add_argument("--perturbation", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-frames", dest="max_frames", type=int, default=200)
    p.set_defaults(func=cmd_forward_simulate)

    p = sub.add_parser("mfg-spectrum", help="eigenvalues of the coupled mode matrix")
    _add_model_args(p)
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=cmd_mfg_spectrum)

    p = sub.add_parser("mfg-rc", help="critical control cost by bisection")
    _add_model_args(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--r-lo", dest="r_lo", type=float, required=True)
    p.add_argument("--r-hi", dest="r_hi", type=float, required=True)
    p.set_defaults(func=cmd_mfg_rc)

    p = sub.add_parser("mfg-rc-sweep", help="critical cost across noise intensities")
    _add_model_args(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--sigmas", required=True, help="comma-separated noise values")
    p.set_defaults(func=cmd_mfg_rc_sweep)

    p = sub.add_parser("mfg-bvp", help="decaying two-point solution via the Riccati route")
    _add_model_args(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--T", type=float, default=None, help="horizon (default 10 slow e-folds)")
    p.add_argument("--nt", type=int, default=201)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mfg_bvp)

    p = sub.add_parser("mfg-picard", help="forward-backward fixed point at one r")
    _add_model_args(p)
    p.add_argument("--T", type=float, default=None, help="horizon (default 40/sqrt(r))")
    p.add_argument("--Nx", type=int, default=32)
    p.add_argument("--Nu", type=int, default=32)
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=500)
    p.add_argument("--perturbation", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-frames", dest="max_frames", type=int, default=200)
    p.set_defaults(func=cmd_mfg_picard)
    return ap


def _apply_config_file(argv: list[str]) -> list[str]:
    """Fold --config key=value defaults in front of the explicit flags."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    path = argv[i + 1]
    pre = argv[: i]
    post = argv[i + 2 :]
    extra: list[str] = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        extra.extend([f"--{key.strip().replace('_', '-')}", val.strip()])
    # subcommand must stay first; defaults go right after it, explicit flags last
    if pre and not pre[0].startswith("-"):
        return pre[:1] + extra + pre[1:] + post
    return post[:1] + extra + post[1:] + pre if post else extra + pre


def run(argv: list[str]) -> int:
    """Parse arguments, dispatch, and map failures to exit codes."""
    try:
        argv = _apply_config_file(list(argv))
        parser = build_parser()
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError,) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except CzirokMFGError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        try:
            out = _outdir(args)
            write_report(out / f"{args.subcommand.replace('-', '_')}_failure.json", {
                "subcommand": args.subcommand, "params": _resolved_params(args),
                "failure": f"{type(exc).__name__}: {exc}",
            })
        except OSError:
            pass
        return 3


def main() -> None:
    raise SystemExit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
