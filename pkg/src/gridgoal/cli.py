"""Command-line entry point.

Subcommands: train, eval, ablate, plot, serve. Every run writes a manifest
with the fully resolved configuration (timestamp isolated to one field).
Config files are JSON with flat dotted keys ("train.episodes": 2000); command
line flags override file values. GRIDGOAL_OUT_ROOT sets the default output
root. Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from gridgoal.grid import LayoutError
from gridgoal.layouts import resolve_env
from gridgoal.probes import goal_reach_probe, quadrant_goals, random_pairs
from gridgoal.scenario import (
    compare_shaping,
    export_artifacts,
    load_scenarios,
    make_suite,
    run_scenario,
    save_scenarios,
    scenario_env,
)
from gridgoal.training import (
    ABLATION_PROFILE,
    TrainConfig,
    Trainer,
    default_config,
    load_checkpoint,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; usage is 1 here
        raise UsageError(message)


def _out_dir(args, default_name: str) -> Path:
    if args.out:
        return Path(args.out)
    root = os.environ.get("GRIDGOAL_OUT_ROOT", "runs")
    return Path(root) / default_name


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise UsageError("config file must be a JSON object with dotted keys")
    return obj


def _config_from_args(args) -> TrainConfig:
    file_cfg = _load_config_file(args.config)
    overrides = {}
    for key, value in file_cfg.items():
        section, _, field = key.partition(".")
        if section != "train" or not field:
            raise UsageError(f"unknown config key {key!r} (expected train.<field>)")
        overrides[field] = value
    for field in ("episodes", "horizon", "seed", "minibatch", "k_goals"):
        val = getattr(args, field, None)
        if val is not None:
            overrides[field] = val
    if args.no_shaping:
        overrides["shaping"] = False
    if args.forward_only:
        overrides["forward_only"] = True
    if args.no_editing:
        overrides["no_editing"] = True
    if args.contaminate_policy:
        overrides["contaminate_policy"] = True
    if args.posthoc:
        overrides["subgoal_schedule"] = "posthoc"
    if args.verbose:
        overrides["log_every"] = 500
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    unknown = set(overrides) - known
    if unknown:
        raise UsageError(f"unknown train config fields: {sorted(unknown)}")
    try:
        return default_config(args.env, **overrides)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _write_manifest(out: Path, command: str, resolved: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "config": resolved, "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S")}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    out = _out_dir(args, f"train_{cfg.env}_s{cfg.seed}")
    _write_manifest(out, "train", dataclasses.asdict(cfg))
    trainer = Trainer(cfg)
    summary = trainer.run(out / "metrics.jsonl")
    trainer.save_checkpoint(out)
    # keep summary.json free of wall-clock noise so fixed-seed runs are byte-stable
    stable = {k: v for k, v in summary.items() if k != "wall_time_s"}
    (out / "summary.json").write_text(json.dumps(stable, indent=2, sort_keys=True))
    _write_reports(trainer, out)
    print(json.dumps({"out": str(out), **stable}, sort_keys=True))
    return 0


def _write_reports(trainer: Trainer, out: Path) -> None:
    from gridgoal.probes import quadrant_report

    report = {"reach_rate_by_quadrant": quadrant_report(trainer.subgoal_agent, trainer.env),
              "replay_size": len(trainer.replay_subgoal),
              "shaping_skipped": trainer.shaping_skipped}
    (out / "subgoal_report.json").write_text(json.dumps(report, indent=2, sort_keys=True))

    # inverse accuracy vs the geometric inverse on uniform sampled moves
    env = trainer.env
    rng = np.random.default_rng(1234)
    ok = total = 0
    layout = env.stages[0]
    from gridgoal.grid import Action, EnvState, encode_state
    for _ in range(400):
        x = int(rng.integers(env.width))
        y = int(rng.integers(env.height))
        a = Action(int(rng.integers(4)))
        dx, dy = a.delta
        nx, ny = x + dx, y + dy
        if not layout.in_bounds((nx, ny)) or (nx, ny) in layout.walls or (x, y) in layout.walls:
            continue
        s = encode_state(EnvState(pos=(x, y)), layout, family=env.family)
        s2 = encode_state(EnvState(pos=(nx, ny)), layout, family=env.family)
        ok += trainer.inverse.predict_inverse(s2, s) == a.inverse
        total += 1
    (out / "inverse_report.json").write_text(json.dumps(
        {"geometric_inverse_accuracy": round(ok / max(total, 1), 4),
         "train_steps": trainer.inverse.train_steps, "samples": total},
        indent=2, sort_keys=True))


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    scenarios = load_scenarios(args.scenarios)
    out = _out_dir(args, "eval")
    _write_manifest(out, "eval", {"checkpoint": args.checkpoint, "scenarios": args.scenarios,
                                  "seeds": args.seeds, "greedy": args.greedy})
    results = []
    for sc in scenarios:
        env = scenario_env(sc)
        for seed in args.seeds:
            results.append(run_scenario(ckpt.subgoal_agent, sc, seed=seed, env=env,
                                        greedy=args.greedy))
    export_artifacts(results, out)
    n_ok = sum(r.success for r in results)
    print(json.dumps({"out": str(out), "runs": len(results), "successes": n_ok}, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    out = _out_dir(args, f"ablate_{args.which}")
    if args.which == "shaping":
        cfg_a = default_config(args.env, seed=args.seed)
        cfg_b = default_config(args.env, seed=args.seed, shaping=False)
    elif args.which == "direction":
        cfg_a = default_config(args.env, seed=args.seed, **ABLATION_PROFILE)
        cfg_b = default_config(args.env, seed=args.seed, forward_only=True, **ABLATION_PROFILE)
    elif args.which == "contamination":
        cfg_a = default_config(args.env, seed=args.seed, **ABLATION_PROFILE)
        cfg_b = default_config(args.env, seed=args.seed, contaminate_policy=True, **ABLATION_PROFILE)
    elif args.which == "no-editing":
        cfg_a = default_config(args.env, seed=args.seed)
        cfg_b = default_config(args.env, seed=args.seed, no_editing=True)
    else:
        raise UsageError(f"unknown ablation {args.which!r}")
    if args.episodes:
        cfg_a.episodes = cfg_b.episodes = args.episodes
    _write_manifest(out, "ablate", {"which": args.which,
                                    "a": dataclasses.asdict(cfg_a), "b": dataclasses.asdict(cfg_b)})
    tr_a = Trainer(cfg_a)
    tr_a.run()
    tr_b = Trainer(cfg_b)
    tr_b.run()
    report: dict = {"which": args.which, "seed": args.seed}

    if args.which == "shaping":
        suite = make_suite(tr_a.env, n=20, seed=2024, layout_name=args.env)
        env_sc = scenario_env(suite[0])
        cmp = compare_shaping(tr_a.subgoal_agent, tr_b.subgoal_agent, suite,
                              seeds=list(range(5)), env=env_sc)
        report.update({k: v for k, v in cmp.items() if k != "rows"})
        rows = cmp["rows"]
        lines = ["scenario,seed,steps_shaped,steps_unshaped,success_shaped,success_unshaped"]
        lines += [f"{r['scenario']},{r['seed']},{r['steps_shaped']},{r['steps_unshaped']},"
                  f"{int(r['success_shaped'])},{int(r['success_unshaped'])}" for r in rows]
        (out / "shaping_table.csv").write_text("\n".join(lines) + "\n")
    elif args.which == "direction":
        center = (tr_a.env.width // 2, tr_a.env.height // 2)
        pairs = quadrant_goals(tr_a.env, center, dx_sign=1, dy_sign=1, n=60, seed=11, min_dist=5)
        band = [((sx, sy), (sx + d, sy + d + off))
                for sx, sy in [(4, 4), (6, 6), (8, 8), (10, 10), (12, 12)]
                for d in range(4, 12) for off in (-1, 0, 1)
                if sx + d < tr_a.env.width and 0 <= sy + d + off < tr_a.env.height]
        r_bi = goal_reach_probe(tr_a.subgoal_agent, tr_a.env, band, factor=2.0, greedy=False, seed=5)
        r_fw = goal_reach_probe(tr_b.subgoal_agent, tr_b.env, band, factor=2.0, greedy=False, seed=5)
        report.update({"bi_reach_rate": r_bi.reach_rate, "forward_only_reach_rate": r_fw.reach_rate,
                       "gap_pp": (r_bi.reach_rate - r_fw.reach_rate) * 100})
    elif args.which == "contamination":
        report.update({"clean_success_last500": tr_a.success_rate(500),
                       "contaminated_success_last500": tr_b.success_rate(500),
                       "gap_pp": (tr_a.success_rate(500) - tr_b.success_rate(500)) * 100})
    else:  # no-editing
        pairs = random_pairs(tr_a.env, 100, seed=99, min_dist=2)
        r_full = goal_reach_probe(tr_a.subgoal_agent, tr_a.env, pairs, factor=2.0, greedy=False, seed=5)
        report.update({"edited_success_last500": tr_a.success_rate(500),
                       "no_editing_success_last500": tr_b.success_rate(500),
                       "edited_controllability": r_full.reach_rate,
                       "no_editing_subgoal_size": len(tr_b.replay_subgoal)})
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    print(json.dumps(report, sort_keys=True))
    return 0


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    src = Path(args.results)
    out = _out_dir(args, "plots")
    out.mkdir(parents=True, exist_ok=True)
    made = []
    for csv in sorted(src.glob("*_heatmap.csv")) + sorted(src.glob("visits.csv")):
        grid = np.loadtxt(csv, delimiter=",", dtype=np.int64, ndmin=2)
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.imshow(grid, cmap="coolwarm")
        ax.set_title(csv.stem)
        fig.savefig(out / f"{csv.stem}.png", dpi=120)
        plt.close(fig)
        made.append(csv.stem)
    for trace in sorted(src.glob("*_trace.json")):
        obj = json.loads(trace.read_text())
        xy = np.asarray(obj["trace"])
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.plot(xy[:, 0], xy[:, 1], "-", linewidth=1.0)
        ax.plot(*xy[0], "go", label="start")
        ax.plot(*xy[-1], "r^", label="end")
        ax.invert_yaxis()
        ax.set_title(trace.stem)
        ax.legend()
        fig.savefig(out / f"{trace.stem}.png", dpi=120)
        plt.close(fig)
        made.append(trace.stem)
    print(json.dumps({"out": str(out), "plots": made}, sort_keys=True))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from gridgoal.service import create_app

    app = create_app(checkpoint_root=args.checkpoint_root)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_make_scenarios(args) -> int:
    env = resolve_env(args.env)
    suite = make_suite(env, n=args.count, seed=args.seed, layout_name=args.env)
    save_scenarios(args.out_file, suite, layout=args.env)
    print(json.dumps({"out": args.out_file, "count": len(suite)}, sort_keys=True))
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="gridgoal", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run the full training loop")
    p_train.add_argument("--env", default="simple20")
    p_train.add_argument("--episodes", type=int)
    p_train.add_argument("--horizon", type=int)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--minibatch", type=int)
    p_train.add_argument("--k-goals", dest="k_goals", type=int)
    p_train.add_argument("--no-shaping", action="store_true")
    p_train.add_argument("--forward-only", action="store_true")
    p_train.add_argument("--no-editing", action="store_true")
    p_train.add_argument("--contaminate-policy", action="store_true")
    p_train.add_argument("--posthoc", action="store_true",
                         help="train the subgoal network after the episode loop")
    p_train.add_argument("--config", help="JSON config file with train.<field> keys")
    p_train.add_argument("--out")
    p_train.add_argument("--verbose", action="store_true")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="run scenario suites against a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--scenarios", required=True)
    p_eval.add_argument("--seeds", type=int, nargs="+", default=[0])
    p_eval.add_argument("--greedy", action="store_true")
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_eval)

    p_abl = sub.add_parser("ablate", help="train paired variants and compare")
    p_abl.add_argument("--which", required=True,
                       choices=["shaping", "direction", "contamination", "no-editing"])
    p_abl.add_argument("--env", default="simple20")
    p_abl.add_argument("--seed", type=int, default=0)
    p_abl.add_argument("--episodes", type=int)
    p_abl.add_argument("--out")
    p_abl.set_defaults(func=cmd_ablate)

    p_plot = sub.add_parser("plot", help="render heatmaps and path plots from run artifacts")
    p_plot.add_argument("--results", required=True)
    p_plot.add_argument("--out")
    p_plot.set_defaults(func=cmd_plot)

    p_serve = sub.add_parser("serve", help="launch the live control service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8321)
    p_serve.add_argument("--checkpoint-root", default=None)
    p_serve.set_defaults(func=cmd_serve)

    p_ms = sub.add_parser("make-scenarios", help="generate a scenario suite file")
    p_ms.add_argument("--env", default="simple20")
    p_ms.add_argument("--count", type=int, default=20)
    p_ms.add_argument("--seed", type=int, default=2024)
    p_ms.add_argument("--out-file", required=True)
    p_ms.set_defaults(func=cmd_make_scenarios)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (LayoutError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
