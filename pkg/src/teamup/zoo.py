"""Scripted and lightly adaptive opponents for the Lemonade Stand arena.

These are behavioural stand-ins described by how they move, not
reimplementations of any particular tournament entrant.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .abstraction import AbstractionParams, follow_index, lead_index
from .agent import Agent
from .planner import TeamUpAgent, TeamUpConfig


class ConstantLead(Agent):
    """Picks a spot and never moves."""

    name = "constant_lead"

    def __init__(self, start: int | None = None):
        self.start = start

    def choose(self):
        if self.last_action is None:
            return self.random_action() if self.start is None else self.start
        return self.last_action


class IdealFollower(Agent):
    """Best-responds to the target's previous action (opposite it, in the LSG).

    With ``target=None`` it follows the next seat round the table.
    """

    name = "ideal_follower"

    def __init__(self, target: int | None = None, start: int | None = None):
        self.target = target
        self.start = start

    def reset(self, game, seat, rng):
        super().reset(game, seat, rng)
        target = (seat + 1) % game.n_players if self.target is None else self.target
        if target == seat or not 0 <= target < game.n_players:
            raise ValueError(f"follower in seat {seat} cannot target player {target}")
        self.followed = target

    def choose(self):
        if self.last_action is None:
            return self.random_action() if self.start is None else self.start
        return self.follow_action(self.followed)


class UniformRandom(Agent):
    name = "uniform_random"

    def choose(self):
        return self.random_action()


class NoisyLead(Agent):
    """Holds a home spot but, with probability ``p``, plays one step to either side."""

    name = "noisy_lead"

    def __init__(self, p: float = 0.1, start: int | None = None):
        if not 0 <= p <= 1:
            raise ValueError("p must lie in [0, 1]")
        self.p = p
        self.start = start

    def choose(self):
        if self.last_action is None:
            self.home = self.random_action() if self.start is None else self.start
            return self.home
        if self.rng.random() < self.p:
            step = 1 if self.rng.integers(2) else -1
            return (self.home + step) % self.game.action_counts[self.seat]
        return self.home


class SatisficingCycler(Agent):
    """Cycles lead -> follow first opponent -> follow second opponent.

    It keeps its mode while the last stage paid at least ``threshold``.
    """

    name = "satisficing_cycler"

    def __init__(self, threshold: float = 7.0, start: int | None = None):
        if not 0 < threshold < 24:
            raise ValueError("threshold must lie in (0, 24)")
        self.threshold = threshold
        self.start = start

    def reset(self, game, seat, rng):
        super().reset(game, seat, rng)
        self.mode = 0

    def choose(self):
        if self.last_action is None:
            return self.random_action() if self.start is None else self.start
        if self.rewards[-1] < self.threshold:
            self.mode = (self.mode + 1) % game_modes(self.game.n_players)
        if self.mode == 0:
            return self.last_action
        return self.follow_action(self.opponents[self.mode - 1])


def game_modes(n_players: int) -> int:
    return n_players  # lead, plus one follow mode per opponent


class MyopicPartner(Agent):
    """Stays put while satisfied; otherwise teams up with the most predictable opponent.

    An opponent's appeal is the larger of its lead index and its follow index
    towards this agent. The agent then plays the best response to that
    opponent's last move.
    """

    name = "myopic_partner"

    def __init__(
        self,
        threshold: float = 8.0,
        start: int | None = None,
        params: AbstractionParams = AbstractionParams(),
    ):
        if not 0 < threshold < 24:
            raise ValueError("threshold must lie in (0, 24)")
        self.threshold = threshold
        self.start = start
        self.params = params

    def choose(self):
        if self.last_action is None:
            return self.random_action() if self.start is None else self.start
        if len(self.rewards) < 2 or self.rewards[-1] >= self.threshold:
            return self.last_action
        game, me = self.game, self.seat
        appeal = {}
        for j in self.opponents:
            lead = lead_index(self.columns[j], self.params, game.distance_matrix(j))
            chase = follow_index(
                self.columns[j], self.columns[me], self.params, game.follow_distances(j, me)
            )
            appeal[j] = max(lead, chase)
        partner = max(self.opponents, key=lambda j: appeal[j])
        return self.follow_action(partner)


KINDS = {
    "teamup": TeamUpAgent,
    "constant_lead": ConstantLead,
    "ideal_follower": IdealFollower,
    "uniform_random": UniformRandom,
    "noisy_lead": NoisyLead,
    "satisficing_cycler": SatisficingCycler,
    "myopic_partner": MyopicPartner,
}


@dataclass(frozen=True)
class AgentSpec:
    """Roster entry. ``seed`` overrides the stream the arena would derive."""

    kind: str
    name: str | None = None
    target: int | None = None
    p: float | None = None
    threshold: float | None = None
    start: int | None = None
    seed: int | None = None
    config: dict = field(default_factory=dict)  # TeamUP overrides

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}; choose from {sorted(KINDS)}")
        if self.p is not None and not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if self.threshold is not None and not 0 < self.threshold < 24:
            raise ValueError("threshold must lie in (0, 24)")

    @property
    def label(self) -> str:
        return self.name or self.kind

    def build(self) -> Agent:
        kind = self.kind
        if kind == "teamup":
            overrides = dict(self.config)
            if self.start is not None:
                overrides.setdefault("start", self.start)
            return TeamUpAgent(TeamUpConfig.from_dict(overrides))
        if kind == "uniform_random":
            return UniformRandom()
        kwargs = {"start": self.start}
        if kind == "ideal_follower":
            kwargs["target"] = self.target
        if kind == "noisy_lead" and self.p is not None:
            kwargs["p"] = self.p
        if kind in ("satisficing_cycler", "myopic_partner") and self.threshold is not None:
            kwargs["threshold"] = self.threshold
        return KINDS[kind](**kwargs)

    def to_dict(self) -> dict:
        return {k: v for k, v in dataclasses.asdict(self).items() if v not in (None, {})}

    @classmethod
    def from_dict(cls, data: dict) -> "AgentSpec":
        return cls(**data)

    @classmethod
    def parse(cls, text: str) -> "AgentSpec":
        """Parse ``kind`` or ``kind:key=value,key=value`` (e.g. ``noisy_lead:p=0.2``)."""
        kind, _, rest = text.partition(":")
        data: dict = {"kind": kind.strip()}
        config = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"expected key=value in {text!r}")
            key = key.strip()
            if key == "name":
                data["name"] = value
            elif key in ("target", "start", "seed"):
                data[key] = int(value)
            elif key in ("p", "threshold"):
                data[key] = float(value)
            else:
                config[key] = _number(value)
        if config:
            data["config"] = config
        return cls(**data)


def _number(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def default_roster() -> list[AgentSpec]:
    return [AgentSpec(kind) for kind in KINDS]
