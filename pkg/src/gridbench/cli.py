"""Command-line benchmark driver.

Subcommands: run (episodes with a configured agent), rank (survival-rate
action ranking), train (linear Q-learning), evaluate (agent comparison
table), audit (recompute rewards/costs from trajectory logs).

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import agents as agents_mod
from .action_space import (enumerate_topology_actions, rank_actions,
                           save_ranking)
from .config import (AGENT_KINDS, AgentConfig, BenchConfig, ConfigError,
                     build_action_space, build_chronics, build_env_config,
                     load_config, load_scenario)
from .engine import Environment
from .heuristics import HeuristicConfig, HeuristicWrapper
from .rewards import CostAccumulator
from .trajectory import audit_records, load_log, save_log

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _policy(kind: str, agent_cfg: AgentConfig, env: Environment,
            rng: np.random.Generator):
    """A callable (observation) -> action for one agent kind."""
    if kind == "idle":
        return lambda obs: agents_mod.act_idle()
    if kind == "random":
        n = len(env.action_space)
        return lambda obs: agents_mod.act_random(n, rng)
    if kind == "greedy":
        return lambda obs: agents_mod.act_greedy(env, env.action_space)
    if kind == "dc_optim":
        return lambda obs: agents_mod.act_dc_optim(env, env.action_space)
    # linear_q: saved weights when given, otherwise a zero-weight agent
    if agent_cfg.weights:
        agent = agents_mod.LinearQAgent.load(agent_cfg.weights)
    else:
        agent = agents_mod.LinearQAgent.create(
            n_actions=len(env.action_space), n_features=env.space_spec.length)
    return lambda obs: agent.act(agent.features(obs), epsilon=0.0, rng=rng)


def run_episode(env: Environment, policy, heuristic: HeuristicConfig | None,
                seed: int) -> dict:
    """One episode; returns summary stats. Trajectory stays in env.log."""
    stepper = env if heuristic is None else HeuristicWrapper(env, heuristic)
    obs = stepper.reset(seed)
    costs = CostAccumulator()
    total_reward = 0.0
    decisions = 0
    done = False
    info = {}
    while not done:
        result = stepper.step(policy(obs))
        obs = result.observation
        total_reward += result.reward
        costs.add(result.costs[0], result.costs[1])
        decisions += 1
        done = result.done
        info = result.info
    return {
        "seed": seed,
        "steps": env.state.t,
        "survival": info.get("survival", env.state.t / env.config.episode_length),
        "reward": total_reward,
        "c_lsi": costs.total_lsi,
        "c_tlo": costs.total_tlo,
        "decisions": decisions,
    }


def _heuristic(cfg: BenchConfig) -> HeuristicConfig | None:
    if cfg.heuristic == "off":
        return None
    return HeuristicConfig(mode=cfg.heuristic, threshold=cfg.threshold)


def _build_env(cfg: BenchConfig) -> Environment:
    grid = load_scenario(cfg)
    chronics = build_chronics(cfg, grid)
    env_cfg = build_env_config(cfg, grid, chronics)
    return Environment(env_cfg, action_space=build_action_space(cfg, grid))


def _write_summary(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_run(cfg: BenchConfig) -> int:
    env = _build_env(cfg)
    heuristic = _heuristic(cfg)
    rng = np.random.default_rng(cfg.seed)
    policy = _policy(cfg.agent.kind, cfg.agent, env, rng)
    out = Path(cfg.out_dir)
    episodes = []
    for ep in range(cfg.episodes):
        seed = cfg.seed + ep
        stats = run_episode(env, policy, heuristic, seed)
        save_log(env.log, out / f"episode_{seed}.csv")
        episodes.append(stats)
        print(f"episode seed={seed} steps={stats['steps']} "
              f"survival={stats['survival']:.3f} reward={stats['reward']:.4f} "
              f"c_lsi={stats['c_lsi']} c_tlo={stats['c_tlo']}")
    survivals = [e["survival"] for e in episodes]
    ci95 = 0.0
    if len(survivals) > 1:
        ci95 = float(1.96 * np.std(survivals, ddof=1) / np.sqrt(len(survivals)))
    summary = {
        "agent": cfg.agent.kind,
        "scenario": cfg.scenario,
        "task": cfg.task,
        "heuristic": cfg.heuristic,
        "episodes": episodes,
        "mean_survival": float(np.mean(survivals)),
        "ci95_survival": ci95,
        "mean_reward": float(np.mean([e["reward"] for e in episodes])),
        "space_spec": json.loads(env.space_spec.to_json()),
    }
    _write_summary(out / "summary.json", summary)
    print(f"mean survival {summary['mean_survival']:.3f} over "
          f"{cfg.episodes} episodes -> {out / 'summary.json'}")
    return EXIT_OK


def cmd_rank(cfg: BenchConfig, budget: int, out_path: str,
             episode_steps: int) -> int:
    grid = load_scenario(cfg)
    if cfg.task != "topology":
        raise ConfigError("ranking applies to the topology task only")
    if budget < 1:
        raise ConfigError(f"ranking budget must be >= 1, got {budget}")
    env_cfg = build_env_config(cfg, grid)
    catalog = enumerate_topology_actions(grid)
    ranked = rank_actions(env_cfg, catalog, budget=budget, seed=cfg.seed,
                          episode_steps=episode_steps)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_ranking(ranked, out, meta={"scenario": cfg.scenario,
                                    "budget": budget, "seed": cfg.seed,
                                    "episode_steps": episode_steps})
    curve = out.with_suffix(".curve.csv")
    with open(curve, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", "action", "survival", "count"])
        for i, a in enumerate(ranked.actions):
            s = ranked.survival[i]
            w.writerow([i, a.encode(),
                        "" if np.isnan(s) else repr(float(s)),
                        int(ranked.counts[i])])
    sampled = int(np.sum(ranked.counts > 0))
    print(f"ranked {len(ranked.actions)} actions ({sampled} sampled) "
          f"-> {out}")
    return EXIT_OK


def cmd_train(cfg: BenchConfig, out_path: str) -> int:
    env = _build_env(cfg)
    heuristic = _heuristic(cfg)
    a = cfg.agent
    agent = agents_mod.LinearQAgent.create(
        n_actions=len(env.action_space), n_features=env.space_spec.length,
        learning_rate=a.learning_rate, gamma=a.gamma,
        schedule=agents_mod.EpsilonSchedule(initial=a.epsilon_initial,
                                            final=a.epsilon_final,
                                            decay_fraction=a.decay_fraction))
    rng = np.random.default_rng(cfg.seed)
    stepper = env if heuristic is None else HeuristicWrapper(env, heuristic)
    returns = []
    for ep in range(a.train_episodes):
        epsilon = agent.schedule.value(ep, a.train_episodes)
        obs = stepper.reset(cfg.seed + ep)
        feats = agent.features(obs, update_stats=True)
        total = 0.0
        done = False
        while not done:
            action = agent.act(feats, epsilon, rng)
            result = stepper.step(action)
            next_feats = agent.features(result.observation, update_stats=True)
            agents_mod.q_update(agent, feats, action, result.reward,
                                next_feats, result.done)
            feats = next_feats
            total += result.reward
            done = result.done
        returns.append(total)
        print(f"train episode {ep} epsilon={epsilon:.3f} return={total:.4f} "
              f"steps={env.state.t}")
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    agent.save(out)
    _write_summary(out.with_suffix(".train.json"),
                   {"episodes": a.train_episodes, "returns": returns,
                    "agent": "linear_q", "seed": cfg.seed})
    print(f"saved weights -> {out}")
    return EXIT_OK


def cmd_evaluate(cfg: BenchConfig, kinds: list[str], out_path: str) -> int:
    if not kinds:
        raise ConfigError("no agents to evaluate")
    for kind in kinds:
        if kind not in AGENT_KINDS:
            raise ConfigError(f"unknown agent kind {kind!r}")
    env = _build_env(cfg)
    heuristic = _heuristic(cfg)
    rows = []
    for kind in kinds:
        rng = np.random.default_rng(cfg.seed)
        policy = _policy(kind, cfg.agent, env, rng)
        stats = [run_episode(env, policy, heuristic, cfg.seed + ep)
                 for ep in range(cfg.episodes)]
        rows.append({
            "agent": kind,
            "mean_survival": float(np.mean([s["survival"] for s in stats])),
            "mean_reward": float(np.mean([s["reward"] for s in stats])),
            "mean_c_lsi": float(np.mean([s["c_lsi"] for s in stats])),
            "mean_c_tlo": float(np.mean([s["c_tlo"] for s in stats])),
        })
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent", "mean_survival", "mean_reward",
                    "mean_c_lsi", "mean_c_tlo"])
        for r in rows:
            w.writerow([r["agent"], repr(r["mean_survival"]),
                        repr(r["mean_reward"]), repr(r["mean_c_lsi"]),
                        repr(r["mean_c_tlo"])])
    header = f"{'agent':<10} {'survival':>9} {'reward':>9} {'C_LSI':>7} {'C_TLO':>7}"
    print(header)
    for r in rows:
        print(f"{r['agent']:<10} {r['mean_survival']:>9.3f} "
              f"{r['mean_reward']:>9.4f} {r['mean_c_lsi']:>7.2f} "
              f"{r['mean_c_tlo']:>7.2f}")
    print(f"table -> {out}")
    return EXIT_OK


def cmd_audit(cfg: BenchConfig, log_paths: list[str]) -> int:
    grid = load_scenario(cfg)
    limits = np.array([l.thermal_limit for l in grid.lines])
    paths: list[Path] = []
    for raw in log_paths:
        p = Path(raw)
        if p.is_dir():
            paths.extend(sorted(p.glob("episode_*.csv")))
        else:
            paths.append(p)
    if not paths:
        raise ConfigError("no trajectory logs to audit")
    failed = 0
    for p in paths:
        problems = audit_records(load_log(p), limits, cfg.reward)
        if problems:
            failed += 1
            print(f"FAIL {p}")
            for note in problems[:10]:
                print(f"  {note}")
            if len(problems) > 10:
                print(f"  ... {len(problems) - 10} more")
        else:
            print(f"ok   {p}")
    if failed:
        print(f"{failed}/{len(paths)} logs failed the audit")
        return EXIT_RUNTIME
    print(f"all {len(paths)} logs bit-identical under recompute")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridbench",
                                description="power-grid control benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI configuration file")
        sp.add_argument("--set", action="append", default=[],
                        metavar="SECTION.KEY=VALUE",
                        help="override one config value")

    sp = sub.add_parser("run", help="run benchmark episodes")
    common(sp)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--agent", choices=AGENT_KINDS)
    sp.add_argument("--out")

    sp = sub.add_parser("rank", help="rank topology actions by survival")
    common(sp)
    sp.add_argument("--budget", type=int, required=True,
                    help="number of ranking episodes")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--episode-steps", type=int, default=2016)
    sp.add_argument("--out", required=True, help="ranking artifact path")

    sp = sub.add_parser("train", help="train the linear Q-learning agent")
    common(sp)
    sp.add_argument("--episodes", type=int, help="training episodes")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True, help="weights file path (.npz)")

    sp = sub.add_parser("evaluate", help="compare agents on one setup")
    common(sp)
    sp.add_argument("--agents", default="idle,greedy",
                    help="comma-separated agent kinds")
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", default="evaluation.csv")

    sp = sub.add_parser("audit", help="recompute rewards from logs")
    common(sp)
    sp.add_argument("logs", nargs="+", help="log files or directories")
    return p


def _overrides(args) -> dict[str, str]:
    out = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"override must be SECTION.KEY=VALUE, got {item!r}")
        out[key.strip()] = value.strip()
    if getattr(args, "seed", None) is not None:
        out["run.seed"] = str(args.seed)
    if args.command in ("run", "evaluate") and getattr(args, "episodes", None) is not None:
        out["run.episodes"] = str(args.episodes)
    if args.command == "train" and getattr(args, "episodes", None) is not None:
        out["agent.train_episodes"] = str(args.episodes)
    if args.command == "run":
        if args.agent:
            out["agent.kind"] = args.agent
        if args.out:
            out["run.out_dir"] = args.out
    return out


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        if args.command == "run":
            return cmd_run(cfg)
        if args.command == "rank":
            return cmd_rank(cfg, args.budget, args.out, args.episode_steps)
        if args.command == "train":
            return cmd_train(cfg, args.out)
        if args.command == "evaluate":
            kinds = [k.strip() for k in args.agents.split(",") if k.strip()]
            return cmd_evaluate(cfg, kinds, args.out)
        return cmd_audit(cfg, args.logs)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # runtime failure, distinct exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
