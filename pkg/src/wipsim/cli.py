"""Command line entry point: design | simulate | train | eval | sweep | teleop.

Every run writes machine-readable outputs next to a human summary, plus a
resolved_config.json capturing defaults and overrides so the run can be
reproduced exactly. Exit codes: 0 success (a fall is a result, not a
failure), 1 validation/usage error, 2 runtime failure.

The WIPSIM_CONFIG_DIR environment variable, when set, is searched for
link-config and scenario files given as bare names.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import DEFAULT_TIMESTEP, discretize, linearize
from .errors import WipsimError
from .harness import (
    POSE_PRESETS,
    Scenario,
    default_weights,
    dof_sweep,
    load_scenario,
    lock_mask,
    run_scenario,
    scenario_presets,
)
from .legmodel import JointLimits, LinkParams, load_link_config, nominal_link_config, reduce_to_pendulum
from .lqr import LqrWeights, design_controller
from .ppo import BalanceEnv, EnvConfig, PpoConfig, RewardSpec, train
from .teleop.server import teleop_serve

ENV_CONFIG_DIR = "WIPSIM_CONFIG_DIR"

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

DEFAULT_SWEEP_MASKS = (
    "none",
    "hip_yaw",
    "hip_roll",
    "hip_roll+hip_yaw",
    "all",
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _search_path(name: str) -> str:
    """Resolve a bare file name against the config directory if set."""
    if Path(name).exists():
        return name
    config_dir = os.environ.get(ENV_CONFIG_DIR)
    if config_dir:
        candidate = Path(config_dir) / name
        if candidate.exists():
            return str(candidate)
    return name


def _load_links(spec: str) -> tuple[LinkParams, JointLimits]:
    if spec == "nominal":
        return nominal_link_config()
    return load_link_config(_search_path(spec))


def _weights_from_args(args) -> LqrWeights:
    if args.q is not None or args.r is not None:
        q = args.q if args.q is not None else [1.0, 1.0, 10.0, 1.0]
        r = args.r if args.r is not None else 0.1
        return LqrWeights.from_diagonal(q, r)
    return default_weights()


def _write_resolved_config(out_dir: Path, command: str, payload: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {"tool": "wipsim", "version": __version__, "command": command, **payload}
    (out_dir / "resolved_config.json").write_text(json.dumps(doc, indent=2, sort_keys=True))


def _scenario_payload(scenario: Scenario) -> dict:
    doc = dataclasses.asdict(scenario)
    doc["initial_state"] = dataclasses.asdict(scenario.initial_state)
    doc["noise"] = dataclasses.asdict(scenario.noise)
    return doc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_design(args) -> int:
    links, limits = _load_links(args.links)
    weights = _weights_from_args(args)
    if args.pose not in POSE_PRESETS:
        print(f"error: unknown pose preset '{args.pose}' "
              f"(have {sorted(POSE_PRESETS)})", file=sys.stderr)
        return EXIT_USAGE
    config = POSE_PRESETS[args.pose]
    params = reduce_to_pendulum(config, links, limits)
    model = discretize(linearize(params), args.dt)
    design = design_controller(model, weights)
    moduli = sorted(
        float(m) for m in np.abs(np.linalg.eigvals(design.a_mat - design.b_mat @ design.gain))
    )
    doc = {
        "pose": args.pose,
        "dt": args.dt,
        "pendulum": dataclasses.asdict(params),
        "weights": {
            "state_cost_diag": np.diag(design.weights.state_cost).tolist(),
            "input_cost": float(design.weights.input_cost[0, 0]),
        },
        "gain": design.gain.tolist(),
        "riccati": design.riccati.tolist(),
        "eigenvalue_moduli": moduli,
        "spectral_radius": design.spectral_radius,
        "dare_residual": design.residual,
    }
    text = json.dumps(doc, indent=2)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "design.json").write_text(text)
        _write_resolved_config(out, "design", {"links": args.links, **doc})
        print(f"design written to {out / 'design.json'}")
    else:
        print(text)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    links, limits = _load_links(args.links)
    scenario = load_scenario(_search_path(args.scenario))
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    out_dir = Path(args.out) if args.out else Path("runs") / f"{scenario.name}-seed{scenario.seed}"
    weights = _weights_from_args(args)
    result = run_scenario(
        scenario, links=links, limits=limits, weights=weights,
        dt=args.dt, out_dir=out_dir,
    )
    _write_resolved_config(
        out_dir, "simulate",
        {
            "links": args.links,
            "dt": args.dt,
            "weights": {
                "state_cost": weights.state_cost.tolist(),
                "input_cost": float(weights.input_cost[0, 0]),
            },
            "scenario": _scenario_payload(scenario),
        },
    )
    r = result.report
    print(
        f"{scenario.name}: rms_theta={r.rms_theta:.3e} rad, "
        f"rms_thetadot={r.rms_thetadot:.3e} rad/s, fall={r.fall}, "
        f"settling={r.settling_s}, cost={r.cost:.4g}  -> {out_dir}"
    )
    return EXIT_OK


def _cmd_train(args) -> int:
    links, limits = _load_links(args.links)
    params = reduce_to_pendulum(POSE_PRESETS[args.pose], links, limits)
    ppo_config = PpoConfig(
        total_steps=args.steps,
        horizon=args.horizon,
        learning_rate=args.lr,
    )
    env = BalanceEnv(params, RewardSpec(), EnvConfig())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    def progress(rec):
        if args.verbose:
            print(
                f"iter {rec.iteration:3d}  steps {rec.steps:7d}  "
                f"return {rec.mean_return:9.2f}  entropy {rec.entropy:6.3f}"
            )

    result = train(env, ppo_config, seed=args.seed, on_iteration=progress)
    result.policy.save(out_dir / "policy.json")
    result.write_curve(out_dir / "training_curve.csv")
    _write_resolved_config(
        out_dir, "train",
        {
            "links": args.links,
            "pose": args.pose,
            "seed": args.seed,
            "ppo": dataclasses.asdict(ppo_config),
            "env": dataclasses.asdict(env.config),
            "reward": dataclasses.asdict(env.reward_spec),
        },
    )
    print(
        f"trained {result.records[-1].steps} steps, final mean return "
        f"{result.final_mean_return:.2f}  -> {out_dir / 'policy.json'}"
    )
    return EXIT_OK


def _cmd_eval(args) -> int:
    links, limits = _load_links(args.links)
    scenario = load_scenario(_search_path(args.scenario))
    scenario = dataclasses.replace(
        scenario, controller="policy", policy_file=_search_path(args.policy)
    )
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    out_dir = Path(args.out) if args.out else Path("runs") / f"{scenario.name}-policy"
    result = run_scenario(scenario, links=links, limits=limits, out_dir=out_dir)
    _write_resolved_config(
        out_dir, "eval",
        {"links": args.links, "policy": args.policy,
         "scenario": _scenario_payload(scenario)},
    )
    r = result.report
    print(
        f"{scenario.name} under policy: rms_theta={r.rms_theta:.3e} rad, "
        f"fall={r.fall}, cost={r.cost:.4g}  -> {out_dir}"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    links, limits = _load_links(args.links)
    base = load_scenario(_search_path(args.scenario))
    masks = [lock_mask(m) for m in args.masks]
    out_dir = Path(args.out)
    seeds = range(base.seed, base.seed + args.seeds)
    all_rows = []
    for seed in seeds:
        seeded = dataclasses.replace(base, seed=seed)
        rows = dof_sweep(seeded, masks, links=links, limits=limits)
        all_rows.append((seed, rows))
    # per-mask table for the first seed, plus a per-seed JSON digest
    from .harness.runner import write_sweep_outputs

    write_sweep_outputs(all_rows[0][1], out_dir)
    digest = {
        str(seed): [
            {"mask": name, "error": err,
             "metrics": None if rep is None else json.loads(rep.to_json())}
            for name, rep, err in rows
        ]
        for seed, rows in all_rows
    }
    (out_dir / "sweep_by_seed.json").write_text(json.dumps(digest, indent=2))
    _write_resolved_config(
        out_dir, "sweep",
        {"links": args.links, "masks": list(args.masks), "seeds": args.seeds,
         "scenario": _scenario_payload(base)},
    )
    for name, report, err in all_rows[0][1]:
        if report is None:
            print(f"{name:24s}  FAILED: {err}")
        else:
            print(
                f"{name:24s}  rms_theta={report.rms_theta:.4e}  "
                f"rms_joint={report.rms_joint:.4e}  fall={report.fall}"
            )
    print(f"sweep table -> {out_dir / 'sweep.csv'}")
    return EXIT_OK


def _cmd_teleop(args) -> int:
    scenario = load_scenario(_search_path(args.scenario)) if args.scenario else None
    print(f"teleop server listening on ws://{args.host}:{args.port} (ctrl-c to stop)")
    teleop_serve(
        port=args.port,
        host=args.host,
        scenario=scenario,
        policy_file=args.policy,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wipsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--links", default="nominal",
                       help="link config YAML path, or 'nominal'")

    p = sub.add_parser("design", help="print the LQR design for a pose")
    add_common(p)
    p.add_argument("--pose", default="straight", help=f"pose preset {sorted(POSE_PRESETS)}")
    p.add_argument("--dt", type=float, default=DEFAULT_TIMESTEP)
    p.add_argument("--q", type=float, nargs=4, default=None, metavar=("QX", "QXD", "QTH", "QTHD"))
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--out", default=None, help="directory for design.json (default: stdout)")
    p.set_defaults(func=_cmd_design)

    p = sub.add_parser("simulate", help="run a scenario")
    add_common(p)
    p.add_argument("--scenario", required=True,
                   help=f"scenario YAML path or preset {scenario_presets()}")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dt", type=float, default=DEFAULT_TIMESTEP)
    p.add_argument("--q", type=float, nargs=4, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train the balance policy")
    add_common(p)
    p.add_argument("--pose", default="straight")
    p.add_argument("--steps", type=int, default=200_000)
    p.add_argument("--horizon", type=int, default=2048)
    p.add_argument("--lr", type=float, default=3e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/train")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="run a scenario under a trained policy")
    add_common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="DOF-lock comparison table")
    add_common(p)
    p.add_argument("--scenario", default="pose_play")
    p.add_argument("--masks", nargs="+", default=list(DEFAULT_SWEEP_MASKS),
                   help="lock masks, e.g. none hip_roll left.hip_yaw+right.hip_yaw all")
    p.add_argument("--seeds", type=int, default=10, help="seeds per mask")
    p.add_argument("--out", default="runs/sweep")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("teleop", help="serve the teleop session")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--scenario", default=None)
    p.add_argument("--policy", default=None)
    p.set_defaults(func=_cmd_teleop)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except WipsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
