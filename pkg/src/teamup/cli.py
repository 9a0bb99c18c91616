"""Command line entry point: ``teamup {match,tournament,summary,replay}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import arena
from .games import GameError, game_from_dict, lemonade
from .zoo import AgentSpec, default_roster

DEFAULT_MATCH = ["teamup", "ideal_follower:target=0", "uniform_random"]


class UsageError(Exception):
    pass


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    return data


def parse_agents(items, teamup_overrides: dict) -> list[AgentSpec]:
    specs = []
    for item in items:
        spec = AgentSpec.parse(item) if isinstance(item, str) else AgentSpec.from_dict(item)
        if spec.kind == "teamup" and teamup_overrides:
            spec = AgentSpec(**{**spec.to_dict(), "config": {**teamup_overrides, **spec.config}})
        specs.append(spec)
    return specs


def pick(args, config: dict, key: str, default):
    value = getattr(args, key, None)
    if value is not None:
        return value
    return config.get(key, default)


def game_of(config: dict):
    return game_from_dict(config["game"]) if "game" in config else lemonade()


def write_json(path: Path, data) -> None:
    try:
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def out_dir(args, config: dict) -> Path:
    path = Path(pick(args, config, "out", "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_match(args, config):
    items = args.agents or config.get("agents") or DEFAULT_MATCH
    specs = parse_agents(items, config.get("teamup", {}))
    match = arena.MatchConfig(
        specs,
        stages=int(pick(args, config, "stages", 100)),
        seed=int(pick(args, config, "seed", 0)),
        game=game_of(config),
    )
    result = arena.run_match(match)
    path = arena.write_trace(result, out_dir(args, config) / "trace.jsonl")
    means = result.mean_utilities()
    for label, m in zip(result.labels, means):
        print(f"{label}\t{m:.6f}")
    print(f"wrote {path}")


def cmd_tournament(args, config):
    items = args.roster or config.get("roster")
    roster = parse_agents(items, config.get("teamup", {})) if items else default_roster()
    if config.get("teamup") and not items:
        roster = parse_agents([s.to_dict() for s in roster], config["teamup"])
    out = out_dir(args, config)
    keep = bool(args.traces or config.get("traces", False))
    got = arena.run_tournament(
        roster,
        repeats=int(pick(args, config, "repeats", arena.DEFAULT_REPEATS)),
        seed=int(pick(args, config, "seed", 0)),
        stages=int(pick(args, config, "stages", 100)),
        workers=int(pick(args, config, "workers", 1)),
        keep_results=keep,
    )
    table, results = got if keep else (got, [])
    path = arena.write_table_csv(table, out / "table.csv")
    if results:
        traces = out / "traces"
        traces.mkdir(exist_ok=True)
        for (ci, rep), result in results:
            arena.write_trace(result, traces / f"match_{ci:03d}_{rep:03d}.jsonl")
    print(f"{'rank':>4}  {'strategy':<20} {'avg_utility':>11} {'std_err':>9}")
    for rank, (name, avg, se, _) in enumerate(table.rows, start=1):
        print(f"{rank:>4}  {name:<20} {avg:>11.4f} {se:>9.4f}")
    print(f"wrote {path}")


def cmd_summary(args, config):
    result = arena.read_trace(args.trace)
    planner = args.planner if args.planner is not None else result.planner
    if planner is None:
        planner = 0
    if not 0 <= planner < result.actions.shape[1]:
        raise UsageError(f"planner seat {planner} out of range")
    summary = arena.state_visit_summary(
        result, planner, first=args.first, last=args.last, game=game_of(config)
    )
    data = {
        "trace": Path(args.trace).name,
        "planner": planner,
        "first": args.first,
        "last": args.last if args.last is not None else result.stages,
        "stages": summary.stages,
        "optimal": round(summary.optimal, 9),
        "worst": round(summary.worst, 9),
        "other": round(summary.other, 9),
    }
    for key in ("optimal", "worst", "other"):
        print(f"{key}\t{data[key]:.4f}")
    if pick(args, config, "out", None) is not None:
        path = out_dir(args, config) / "summary.json"
        write_json(path, data)
        print(f"wrote {path}")


def cmd_replay(args, config):
    problems = arena.replay_trace(args.trace, game_of(config))
    if problems:
        for p in problems[:20]:
            print(p, file=sys.stderr)
        if len(problems) > 20:
            print(f"... and {len(problems) - 20} more", file=sys.stderr)
        return 1
    print(f"ok: {args.trace}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teamup", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stages=True):
        p.add_argument("--config", help="JSON file with defaults for any of these options")
        p.add_argument("--out", help="output directory")
        if stages:
            p.add_argument("--seed", type=int)
            p.add_argument("--stages", type=int)

    p = sub.add_parser("match", help="play one match and write its trace")
    common(p)
    p.add_argument("agents", nargs="*", help="agent specs such as ideal_follower:target=0")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("tournament", help="round robin over every triplet of a roster")
    common(p)
    p.add_argument("--repeats", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--traces", action="store_true", help="also write every match trace")
    p.add_argument("roster", nargs="*", help="agent specs (default: the built-in zoo)")
    p.set_defaults(func=cmd_tournament)

    p = sub.add_parser("summary", help="optimal/worst/other breakdown of a trace")
    common(p, stages=False)
    p.add_argument("trace")
    p.add_argument("--planner", type=int)
    p.add_argument("--first", type=int, default=1)
    p.add_argument("--last", type=int)
    p.set_defaults(func=cmd_summary)

    p = sub.add_parser("replay", help="re-score a trace and check it")
    common(p, stages=False)
    p.add_argument("trace")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config) or 0
    except (UsageError, ValueError, GameError, arena.MatchError, OSError, KeyError) as exc:
        print(f"teamup {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
