"""Seeded matches, round-robin tournaments, and their summaries and files."""

from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .abstraction import AbstractionParams, Feature, classify, parse_state
from .agent import ProtocolError
from .games import GameError, NormalFormGame, lemonade
from .planner import OPTIMAL, OTHER_CLASS, WORST, state_class
from .zoo import AgentSpec

REFERENCE_PARAMS = AbstractionParams(gamma=0.05, rho=0.5, delta=0.3)
DEFAULT_REPEATS = 30


class MatchError(RuntimeError):
    """An agent broke the stage protocol; the message names the stage."""


@dataclass
class MatchConfig:
    agents: Sequence[AgentSpec]
    stages: int = 100
    seed: int = 0
    game: NormalFormGame | None = None
    features: bool = True
    params: AbstractionParams = REFERENCE_PARAMS

    def __post_init__(self):
        if self.game is None:
            self.game = lemonade()
        if self.stages < 1:
            raise ValueError("a match needs at least one stage")
        if len(self.agents) != self.game.n_players:
            raise ValueError(
                f"{self.game.name} needs {self.game.n_players} agents, got {len(self.agents)}"
            )


@dataclass
class MatchResult:
    labels: list[str]
    actions: np.ndarray  # (stages, n) concrete actions
    utilities: np.ndarray  # (stages, n)
    seed: int = 0
    features: list[list[str]] | None = None  # per stage, per player
    diagnostics: dict[int, list[dict]] = field(default_factory=dict)

    @property
    def stages(self) -> int:
        return len(self.actions)

    @property
    def planner(self) -> int | None:
        """Seat of the first agent that reported planner diagnostics."""
        return min(self.diagnostics) if self.diagnostics else None

    def mean_utilities(self, first: int = 1, last: int | None = None) -> np.ndarray:
        """Per-player mean utility over 1-based stages ``first..last`` inclusive."""
        return self.utilities[first - 1 : last].mean(axis=0)


def agent_rng(match_seed: int, seat: int, spec: AgentSpec) -> np.random.Generator:
    if spec.seed is not None:
        return np.random.default_rng(spec.seed)
    return np.random.default_rng(np.random.SeedSequence(match_seed, spawn_key=(seat,)))


def run_match(config: MatchConfig) -> MatchResult:
    game = config.game
    n = game.n_players
    agents = [spec.build() for spec in config.agents]
    for seat, (agent, spec) in enumerate(zip(agents, config.agents)):
        agent.reset(game, seat, agent_rng(config.seed, seat, spec))

    actions = np.zeros((config.stages, n), dtype=int)
    utilities = np.zeros((config.stages, n))
    joint, rewards = None, [None] * n
    for t in range(config.stages):
        chosen = []
        for seat, agent in enumerate(agents):
            try:
                chosen.append(agent.step(joint, rewards[seat]))
            except (ProtocolError, GameError) as exc:
                raise MatchError(f"stage {t + 1}, seat {seat}: {exc}") from exc
        joint = tuple(chosen)
        rewards = [float(r) for r in game.payoff(joint)]
        actions[t] = joint
        utilities[t] = rewards

    diagnostics = {}
    for seat, agent in enumerate(agents):
        trace = agent.diagnostics()
        if trace is not None:
            diagnostics[seat] = trace
    result = MatchResult(
        labels=[spec.label for spec in config.agents],
        actions=actions,
        utilities=utilities,
        seed=config.seed,
        diagnostics=diagnostics,
    )
    if config.features:
        result.features = feature_trace(result, game, config.params)
    return result


def feature_trace(
    result: MatchResult, game: NormalFormGame, params: AbstractionParams = REFERENCE_PARAMS
) -> list[list[str]]:
    """Each player's behavioural feature at every stage, from the history before it."""
    planner = result.planner
    out = []
    for t in range(result.stages):
        columns = result.actions[:t].T
        out.append([str(classify(i, columns, params, game, planner)) for i in range(game.n_players)])
    return out


# ---------------------------------------------------------------------------
# state-visit breakdown


@dataclass(frozen=True)
class StateVisitSummary:
    optimal: float
    worst: float
    other: float
    stages: int


def planner_states(
    result: MatchResult,
    planner: int,
    game: NormalFormGame | None = None,
    params: AbstractionParams = REFERENCE_PARAMS,
) -> list:
    """The planner-relative abstract state at every stage (None before any history).

    The planner's own slot is its recorded high-level action from the previous
    stage when it is a TeamUP agent, otherwise its own classified feature.
    """
    game = game or lemonade()
    n = game.n_players
    others = [p for p in range(n) if p != planner]
    rel = {planner: 0, **{p: k + 1 for k, p in enumerate(others)}}
    trace = result.diagnostics.get(planner)

    def relabel(f: Feature) -> Feature:
        return Feature("F", rel[f.target]) if f.kind == "F" else f

    states = []
    for t in range(result.stages):
        if t == 0:
            states.append(None)
            continue
        columns = result.actions[:t].T
        opps = [relabel(classify(p, columns, params, game, planner)) for p in others]
        if trace is not None:
            own = Feature.parse(trace[t - 1]["action"])
        else:
            own = relabel(classify(planner, columns, params, game, planner))
        states.append((own, *opps))
    return states


def state_visit_summary(
    result: MatchResult,
    planner: int,
    params: AbstractionParams = REFERENCE_PARAMS,
    first: int = 1,
    last: int | None = None,
    game: NormalFormGame | None = None,
) -> StateVisitSummary:
    """Fractions of stages ``first..last`` (1-based, inclusive) spent in each state class.

    Stages without enough history to classify count as "other".
    """
    states = planner_states(result, planner, game, params)[first - 1 : last]
    if not states:
        raise ValueError("empty stage window")
    tally = {OPTIMAL: 0, WORST: 0, OTHER_CLASS: 0}
    for t, s in enumerate(states, start=first):
        warm = s is None or t < 3
        tally[OTHER_CLASS if warm else state_class(s)] += 1
    k = len(states)
    return StateVisitSummary(tally[OPTIMAL] / k, tally[WORST] / k, tally[OTHER_CLASS] / k, k)


# ---------------------------------------------------------------------------
# tournaments


@dataclass
class TournamentTable:
    """Per-strategy mean of per-match mean utilities, best first.

    ``std_err`` is the sample standard deviation of the per-match means divided
    by the square root of the number of matches.
    """

    rows: list[tuple[str, float, float, int]] = field(default_factory=list)
    match_means: dict[str, list[float]] = field(default_factory=dict)

    @classmethod
    def from_match_means(cls, match_means: dict[str, list[float]]) -> "TournamentTable":
        rows = []
        for name, means in match_means.items():
            arr = np.asarray(means, dtype=float)
            avg = float(arr.mean())
            se = float(arr.std(ddof=1) / math.sqrt(len(arr))) if len(arr) > 1 else float("nan")
            rows.append((name, avg, se, len(arr)))
        rows.sort(key=lambda r: (-r[1], r[0]))
        return cls(rows, match_means)

    def ranking(self) -> list[str]:
        return [r[0] for r in self.rows]


def tournament_jobs(roster: Sequence[AgentSpec], repeats: int, seed: int):
    """(triplet index, repeat, seating) for every match, in a fixed order.

    Seatings rotate through all orderings of each triplet so that seat-relative
    behaviour (e.g. which neighbour a follower chases) is balanced.
    """
    size = len(roster)
    for ci, combo in enumerate(itertools.combinations(range(size), 3)):
        seatings = list(itertools.permutations(combo))
        for rep in range(repeats):
            ss = np.random.SeedSequence(seed, spawn_key=(ci, rep))
            yield ci, rep, seatings[rep % len(seatings)], int(ss.generate_state(1)[0])


def _play(args):
    specs, stages, match_seed, with_features = args
    config = MatchConfig(list(specs), stages=stages, seed=match_seed, features=with_features)
    return run_match(config)


def run_tournament(
    roster: Sequence[AgentSpec],
    repeats: int = DEFAULT_REPEATS,
    seed: int = 0,
    stages: int = 100,
    workers: int = 1,
    keep_results: bool = False,
):
    """Round robin over every unordered triplet of the roster.

    Returns the table, plus the list of ``((triplet, repeat), MatchResult)``
    when ``keep_results`` is set.
    """
    labels = [spec.label for spec in roster]
    if len(set(labels)) != len(labels):
        raise ValueError(f"roster labels must be unique: {labels}")
    if len(roster) < 3:
        raise ValueError("a round robin of triplets needs at least 3 strategies")
    jobs = list(tournament_jobs(roster, repeats, seed))
    payload = [
        (tuple(roster[k] for k in seating), stages, match_seed, keep_results)
        for _, _, seating, match_seed in jobs
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_play, payload, chunksize=max(1, len(payload) // (4 * workers))))
    else:
        results = [_play(p) for p in payload]

    match_means: dict[str, list[float]] = {label: [] for label in labels}
    for result in results:
        for label, mean in zip(result.labels, result.mean_utilities()):
            match_means[label].append(float(mean))
    table = TournamentTable.from_match_means(match_means)
    if keep_results:
        return table, [((ci, rep), r) for (ci, rep, _, _), r in zip(jobs, results)]
    return table


# ---------------------------------------------------------------------------
# files

TABLE_COLUMNS = ["rank", "strategy", "avg_utility", "std_err"]


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def write_table_csv(table: TournamentTable, path: str | Path) -> Path:
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TABLE_COLUMNS)
            for rank, (name, avg, se, _) in enumerate(table.rows, start=1):
                writer.writerow([rank, name, _fmt(avg), _fmt(se)])
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc
    return path


def trace_records(result: MatchResult) -> list[dict]:
    planner = result.planner
    diag = result.diagnostics.get(planner) if planner is not None else None
    records = []
    for t in range(result.stages):
        rec = {
            "stage": t + 1,
            "actions": [int(a) for a in result.actions[t]],
            "utilities": [float(u) for u in result.utilities[t]],
            "features": result.features[t] if result.features is not None else None,
            "planner_state": diag[t]["state"] if diag else None,
            "planner_action": diag[t]["action"] if diag else None,
            "replanned": diag[t]["replanned"] if diag else None,
        }
        records.append(rec)
    return records


def write_trace(result: MatchResult, path: str | Path) -> Path:
    """One JSON record per stage, plus ``<path>.meta.json`` naming the players."""
    path = Path(path)
    try:
        with open(path, "w") as fh:
            for rec in trace_records(result):
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        meta = {"labels": result.labels, "seed": result.seed, "planner": result.planner}
        with open(meta_path(path), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    return path


def meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def read_trace(path: str | Path) -> MatchResult:
    path = Path(path)
    with open(path) as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    meta = {}
    if meta_path(path).exists():
        meta = json.loads(meta_path(path).read_text())
    n = len(records[0]["actions"]) if records else 3
    result = MatchResult(
        labels=meta.get("labels", [f"player{i}" for i in range(n)]),
        actions=np.array([r["actions"] for r in records], dtype=int).reshape(-1, n),
        utilities=np.array([r["utilities"] for r in records], dtype=float).reshape(-1, n),
        seed=meta.get("seed", 0),
    )
    if records and all(r.get("features") is not None for r in records):
        result.features = [r["features"] for r in records]
    planner = meta.get("planner")
    if planner is not None and records and records[0].get("planner_action") is not None:
        result.diagnostics[planner] = [
            {"state": r["planner_state"], "action": r["planner_action"], "replanned": r["replanned"]}
            for r in records
        ]
    return result


def replay_trace(path: str | Path, game: NormalFormGame | None = None) -> list[str]:
    """Re-score a trace; returns a list of problems (empty when it checks out)."""
    game = game or lemonade()
    problems = []
    with open(path) as fh:
        records = [json.loads(line) for line in fh if line.strip()]
    for k, rec in enumerate(records, start=1):
        if rec.get("stage") != k:
            problems.append(f"record {k}: stage field is {rec.get('stage')}")
        try:
            expected = [float(u) for u in game.payoff(rec["actions"])]
        except (GameError, KeyError, TypeError) as exc:
            problems.append(f"stage {k}: bad actions: {exc}")
            continue
        got = rec.get("utilities")
        if got is None or list(map(float, got)) != expected:
            problems.append(f"stage {k}: utilities {got} != payoff {expected}")
        if game.constant_sum is not None and got is not None and sum(got) != game.constant_sum:
            problems.append(f"stage {k}: utilities sum to {sum(got)}, not {game.constant_sum}")
        state = rec.get("planner_state")
        if state is not None:
            try:
                parse_state(state)
            except ValueError as exc:
                problems.append(f"stage {k}: {exc}")
    return problems
