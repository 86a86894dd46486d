"""Command-line entry point: ``bimanual-cmp <command> [options]``.

Commands:
  demonstrate  solve the scripted task path for joint references
  learn        stiff execution; writes cmp_robot1.json / cmp_robot2.json
  replay       compliant run of one controller variant
  compare      all four variants under the same push, plus the ordering checks
  validate     fast property checks (kinematics, dynamics, encoding)

The exit status is 0 only if every check the command performs passes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from ..controllers import ControllerVariant
from ..kinematics import forward_kinematics
from ..primitives import Cmp, evaluate_torques
from ..task_space import task_coordinates
from . import scenario as sc
from .config import ConfigError, load_scenario
from .logs import format_table, metrics_from_log, read_csv, write_csv
from .plots import write_run_plots
from .validation import Check, run_all

__all__ = ["main", "build_parser"]

DEMO_TOLERANCE = 1e-4
LEARN_TORQUE_TOLERANCE = 0.02
CMP_FILES = ("cmp_robot1.json", "cmp_robot2.json")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS,
                        help="scenario file (default: the bundled default scenario)")
    common.add_argument("--variant", default=argparse.SUPPRESS,
                        help="RecOnly, RecPlusBiman, RecMinusVft or Entire (replay)")
    common.add_argument("--out", type=Path, default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="noise seed (u64)")
    common.add_argument("--no-plots", action="store_true", default=argparse.SUPPRESS,
                        help="skip the SVG charts")
    parser = argparse.ArgumentParser(prog="bimanual-cmp", parents=[common],
                                     description="Bimanual compliant movement primitive workbench.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("demonstrate", "solve joint references for the scripted task path"),
                       ("learn", "learn CMPs from a stiff execution"),
                       ("replay", "compliant replay of one controller variant"),
                       ("compare", "run all four controller variants and check their ordering"),
                       ("validate", "fast property checks")):
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def _options(ns):
    get = vars(ns).get
    return get("config"), get("variant"), get("out"), get("seed"), bool(get("no_plots", False))


def _report(checks) -> bool:
    for c in checks:
        print(c.line())
    return all(c.passed for c in checks)


def _seed(value: int) -> int:
    if not 0 <= value < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return value


def _demo(config):
    demo = sc.demonstrate(config)
    n = config.robots[0].joint_count
    worst = 0.0
    for k in range(demo.t.size):
        p1 = forward_kinematics(config.robots[0], demo.q[k, :n])
        p2 = forward_kinematics(config.robots[1], demo.q[k, n:])
        c, r = task_coordinates(p1, p2), demo.refs[k]
        worst = max(worst, np.linalg.norm(c.p_abs - r.p_absd), np.linalg.norm(c.p_rel_abs - r.p_reld_abs))
    return demo, Check("demonstration FK reconstruction", worst <= DEMO_TOLERANCE,
                       f"max position error {worst:.2e} m")


def _learn(config, demo, out: Path):
    result = sc.learn(config, demo)
    out.mkdir(parents=True, exist_ok=True)
    n = config.robots[0].joint_count
    checks = [Check("stiff tracking", result.tracking_error <= config.learn_tol,
                    f"{result.tracking_error:.2e} rad after {result.iterations} run(s)")]
    for i, cmp in enumerate(result.cmps):
        cmp.save(out / CMP_FILES[i])
        rec = result.tau_f[:, i * n:(i + 1) * n]
        enc = evaluate_torques(cmp.torque, result.reference.x)
        # span of the most active joint; the offsets between joints are not signal
        p2p = max(float(np.ptp(rec, axis=0).max()), 1e-12)
        rmse = float(np.sqrt(np.mean((enc - rec) ** 2)))
        checks.append(Check(f"torque encoding robot {i + 1}", rmse <= LEARN_TORQUE_TOLERANCE * p2p,
                            f"RMSE {rmse:.3g} Nm = {100 * rmse / p2p:.2f} % of peak-to-peak"))
    return result.cmps, checks


def _load_or_learn(config, demo, out: Path):
    paths = [out / f for f in CMP_FILES]
    if all(p.exists() for p in paths):
        print(f"using CMPs from {out}")
        return tuple(Cmp.load(p) for p in paths), []
    print("no stored CMPs; learning first")
    return _learn(config, demo, out)


def _write_run(out: Path, stem: str, run, plots: bool) -> list:
    path = out / f"{stem}.csv"
    write_csv(path, run.columns, run.text)
    (out / f"{stem}_metrics.json").write_text(json.dumps(run.metrics.as_dict(), indent=2) + "\n")
    cols, data = read_csv(path)
    same = metrics_from_log(cols, data) == run.metrics
    raw = run.raw
    decomposition = float(np.abs(raw["ff"] - (raw["rec"] + raw["biman"] - raw["vft"])).max())
    if plots:
        write_run_plots(out, stem, run.columns, run.data)
    return [Check(f"{stem}: metrics reproduced from CSV", same, str(path)),
            Check(f"{stem}: tau_ff = tau_rec + tau_biman - tau_vft", decomposition <= 1e-12,
                  f"max deviation {decomposition:.1e} Nm")]


def _cmd_demonstrate(config, out: Path, plots: bool):
    demo, check = _demo(config)
    out.mkdir(parents=True, exist_ok=True)
    n = config.robots[0].joint_count
    cols = ["t"] + [f"q{a}_{j}" for a in (1, 2) for j in range(1, n + 1)]
    write_csv(out / "demonstration.csv", cols, format_table(np.column_stack([demo.t, demo.q])))
    print(f"wrote {out / 'demonstration.csv'}")
    return [check]


def _cmd_learn(config, out: Path, plots: bool):
    demo, check = _demo(config)
    _, checks = _learn(config, demo, out)
    print(f"wrote {', '.join(str(out / f) for f in CMP_FILES)}")
    return [check] + checks


def _cmd_replay(config, out: Path, plots: bool):
    demo, check = _demo(config)
    cmps, checks = _load_or_learn(config, demo, out)
    run = sc.replay(config, cmps, demo, config.variant)
    m = run.metrics
    print(f"{config.variant}: max abs error {m.max_abs_error:.4g} m, max rel error {m.max_rel_error:.4g} m, "
          f"peak perturbation {m.peak_perturbation:.4g} N, {run.elapsed:.1f} s")
    return [check] + checks + _write_run(out, f"replay_{config.variant.value}", run, plots)


def _cmd_compare(config, out: Path, plots: bool):
    demo, check = _demo(config)
    cmps, checks = _load_or_learn(config, demo, out)
    comp = sc.compare_variants(config, cmps, demo, workers=_workers())
    for v, run in comp.results.items():
        checks += _write_run(out, f"compare_{v.value}", run, plots)
    table = comp.table()
    (out / "comparison.md").write_text(table + "\n")
    print(table)
    return [check] + checks + [Check(label, ok, detail) for label, ok, detail in comp.checks()]


def _workers() -> int:
    cpus = len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1
    return max(1, min(4, cpus))


def _cmd_validate(config, out: Path, plots: bool):
    return run_all()


COMMANDS = {
    "demonstrate": _cmd_demonstrate,
    "learn": _cmd_learn,
    "replay": _cmd_replay,
    "compare": _cmd_compare,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config_path, variant, out, seed, no_plots = _options(args)
    try:
        config = load_scenario(config_path)
        changes = {}
        if variant is not None:
            changes["variant"] = ControllerVariant.parse(variant)
        if seed is not None:
            changes["seed"] = _seed(seed)
        if changes:
            config = config.replace(**changes)
        out = out if out is not None else config.output_dir
        ok = _report(COMMANDS[args.command](config, Path(out), not no_plots))
    except (ConfigError, ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
