"""Command-line experiment runner.

Subcommands: run, presets, soliton, flow, blowdown, decay.  Configuration
precedence is preset defaults < config file < command-line overrides, and
all outputs are byte-deterministic (timestamps live in run_meta.json only).

Exit codes: 0 all verdicts pass, 1 verdict failure, 2 configuration error,
3 numerical failure (singularity, divergence, no convergence).
"""

import argparse
import json
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import decay, flow, models, presets, rescaling, series
from .errors import ConfigInvalid, KRFlowError, NoConvergence, Singularity
from .io import atomic_write_text, write_json

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("null", "none", "auto"):
        return None
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_overrides(cfg: dict, pairs) -> dict:
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigInvalid("--set", f"expected key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        parts = key.split(".")
        node = cfg
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigInvalid(key, "unknown configuration path")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigInvalid(key, "unknown configuration field")
        node[parts[-1]] = _parse_scalar(raw)
    return cfg


def load_config(preset: str | None, config_path: str | None, sets,
                output_dir: str | None) -> dict:
    if config_path:
        with open(config_path) as f:
            file_cfg = json.load(f)
        preset = preset or file_cfg.get("preset")
        cfg = presets.default_config(preset)
        cfg = presets.merge_config(cfg, {k: v for k, v in file_cfg.items()
                                         if k != "preset"})
        cfg["preset"] = preset
    else:
        cfg = presets.default_config(preset)
    cfg = _apply_overrides(cfg, sets)
    if output_dir:
        cfg["output_dir"] = output_dir
    return cfg


def cmd_run(args) -> int:
    cfg = load_config(args.preset, args.config, args.set, args.output_dir)
    if args.order is not None:
        cfg["analysis"]["order"] = args.order
    t0 = time.time()
    verdicts, summary = presets.run_scenario(cfg)
    write_json(os.path.join(cfg["output_dir"], "run_meta.json"),
               {"elapsed_seconds": time.time() - t0,
                "finished_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())})
    for v in verdicts:
        status = "PASS" if v.passed else "FAIL"
        print(f"[{status}] {v.name}: measured={v.measured} "
              f"expected={v.expected} tol={v.tolerance}")
    n_fail = sum(1 for v in verdicts if not v.passed)
    print(f"{summary['scenario']}: {len(verdicts) - n_fail}/{len(verdicts)} "
          f"verdicts passed")
    return EXIT_OK if n_fail == 0 else EXIT_VERDICT


def cmd_presets(_args) -> int:
    print(f"{'preset':<22} claim exercised")
    print("-" * 78)
    for name in presets.PRESET_NAMES:
        print(f"{name:<22} {presets.PRESET_CLAIMS[name]}")
    return EXIT_OK


def cmd_soliton(args) -> int:
    cfg = load_config(args.preset or "conical-soliton", args.config, args.set,
                      args.output_dir)
    base = presets._base_from(cfg)
    order = args.order or int(cfg["analysis"].get("order", 3))
    exp = series.soliton_expand(base.n, Fraction(base.lam), order)
    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    exp.to_csv(os.path.join(outdir, "soliton_series.csv"))
    atomic_write_text(os.path.join(outdir, "soliton_series.txt"),
                      exp.pretty("u") + "\n")
    print(exp.pretty("u"))
    sol = flow.soliton_profile_solve(
        base, 1.0, (float(cfg["grid"]["rho_min"]), float(cfg["grid"]["rho_max"])),
        points=int(cfg["grid"]["points"]))
    sol.profile.to_csv(os.path.join(outdir, "soliton_profile.csv"))
    models.save_b_table(os.path.join(outdir, "b_table.csv"), sol.b_table)
    print(f"profile residual {sol.max_residual:.3e}, B(0) = {sol.b_table[0, 1]:.6g}")
    return EXIT_OK


def cmd_flow(args) -> int:
    cfg = load_config(args.preset, args.config, args.set, args.output_dir)
    base = presets._base_from(cfg)
    rho = presets._grid_from(cfg)
    prof = presets._initial_profile(cfg, base, rho)
    traj = flow.evolve(prof, base, float(cfg["flow"]["horizon"]),
                       presets._controls_from(cfg))
    traj.to_csv_dir(os.path.join(cfg["output_dir"], "trajectory"))
    print(f"evolved to t={traj.times[-1]:.6g} "
          f"({len(traj.dt_history)} steps); trajectory written to "
          f"{os.path.join(cfg['output_dir'], 'trajectory')}")
    return EXIT_OK


def cmd_blowdown(args) -> int:
    cfg = load_config(args.preset or "conical-preserve", args.config, args.set,
                      args.output_dir)
    base = presets._base_from(cfg)
    rho = presets._grid_from(cfg)
    prof = presets._initial_profile(cfg, base, rho)
    s = args.scale
    horizon = s * s * args.t_hat_max
    traj = flow.evolve(prof, base, horizon, presets._controls_from(
        cfg, output_times=np.linspace(0.0, horizon, 5)))
    window = (float(rho[0]) - 2.0 * np.log(s) + 0.1,
              float(rho[-1]) - 2.0 * np.log(s) - 0.1)
    spec = rescaling.RescalingSpec(regime=rescaling.RescaleRegime.CONICAL,
                                   scale=s, rho_window=window,
                                   t_window=(0.0, args.t_hat_max))
    samples = rescaling.conical_blowdown(traj, spec)
    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    rows = ["t_hat,rho_hat,phi_hat,psi_hat\n"]
    for i, t in enumerate(samples.t_hat):
        for j, r in enumerate(samples.rho_hat):
            rows.append(f"{t:.17g},{r:.17g},{samples.phi_hat[i, j]:.17g},"
                        f"{samples.psi_hat[i, j]:.17g}\n")
    atomic_write_text(os.path.join(outdir, "blowdown_samples.csv"), "".join(rows))
    print(f"blowdown at scale {s} written ({len(samples.t_hat)} time slices)")
    return EXIT_OK


def cmd_decay(args) -> int:
    cfg = load_config(args.preset, args.config, args.set, args.output_dir)
    base = presets._base_from(cfg)
    rho = presets._grid_from(cfg)
    prof = presets._initial_profile(cfg, base, rho)
    traj = flow.evolve(prof, base, float(cfg["flow"]["horizon"]),
                       presets._controls_from(cfg, n_outputs=3))
    from .fd import MARGIN
    from .geometry import radial_distance
    lo = rho[0] + 2.0 * (rho[-1] - rho[0]) / 3.0
    hi = rho[-1] - 4 * prof.dx
    d_window = (radial_distance(prof, rho[0] + prof.dx * MARGIN, lo),
                radial_distance(prof, rho[0] + prof.dx * MARGIN, hi))
    q = decay.Quantity(decay.QuantityKind[args.quantity])
    reports = [decay.fit_decay_exponent(traj, q, t, d_window)
               for t in traj.times]
    outdir = cfg["output_dir"]
    os.makedirs(outdir, exist_ok=True)
    decay.write_decay_reports(os.path.join(outdir, "decay.csv"), reports)
    for rep in reports:
        label = "flat" if rep.flat else f"{rep.exponent:+.4f} (r2={rep.r2:.4f})"
        print(f"t={rep.time:<8.4g} {rep.quantity}: {label}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="krflow",
        description="Radial-ansatz Kahler-Ricci flow laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--preset", choices=presets.PRESET_NAMES, default=None)
        p.add_argument("--config", help="JSON config file", default=None)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config field, e.g. grid.points=512")
        p.add_argument("--output-dir", default=None)

    p_run = sub.add_parser("run", help="run a preset scenario end to end")
    add_common(p_run)
    p_run.add_argument("--order", type=int, default=None,
                       help="series order for soliton scenarios")
    p_run.set_defaults(func=cmd_run)

    p_presets = sub.add_parser("presets", help="list available presets")
    p_presets.set_defaults(func=cmd_presets)

    p_sol = sub.add_parser("soliton", help="soliton series and profile solve")
    add_common(p_sol)
    p_sol.add_argument("--order", type=int, default=None)
    p_sol.set_defaults(func=cmd_soliton)

    p_flow = sub.add_parser("flow", help="evolve configured initial data")
    add_common(p_flow)
    p_flow.set_defaults(func=cmd_flow)

    p_bd = sub.add_parser("blowdown", help="parabolic blowdown of a flow")
    add_common(p_bd)
    p_bd.add_argument("--scale", type=float, default=4.0)
    p_bd.add_argument("--t-hat-max", type=float, default=1.0)
    p_bd.set_defaults(func=cmd_blowdown)

    p_dec = sub.add_parser("decay", help="fit decay exponents along a flow")
    add_common(p_dec)
    p_dec.add_argument("--quantity", default="RM_NORM",
                       choices=[q.name for q in decay.QuantityKind])
    p_dec.set_defaults(func=cmd_decay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Singularity, NoConvergence) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KRFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
