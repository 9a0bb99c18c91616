"""Lead/follow indices and the behavioural state abstraction.

A player's *lead index* measures how far its recent moves are from standing
still; its *follow index* towards j measures how far its moves are from
best-responding to j's previous action. Both are discounted, normalised and
negated, so 0 means an exact ideal type and more negative means further away.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .games import NormalFormGame


class InsufficientHistory(ValueError):
    """Indices need at least two observed stages."""


@dataclass(frozen=True)
class AbstractionParams:
    gamma: float = 0.05  # response rate
    rho: float = 0.5  # distance exponent
    delta: float = 0.3  # tolerance

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not 0 <= self.delta <= 1:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True, order=True)
class Feature:
    """``L`` (leads), ``F<j>`` (follows player j) or ``O`` (neither)."""

    kind: str
    target: int | None = None

    def __post_init__(self):
        if self.kind not in ("L", "F", "O"):
            raise ValueError(f"unknown feature kind {self.kind!r}")
        if (self.kind == "F") != (self.target is not None):
            raise ValueError("only follow features carry a target")

    def __str__(self):
        return f"F{self.target}" if self.kind == "F" else self.kind

    @classmethod
    def parse(cls, text: str) -> "Feature":
        text = text.strip()
        if text in ("L", "O"):
            return cls(text)
        if text.startswith("F") and text[1:].isdigit():
            return cls("F", int(text[1:]))
        raise ValueError(f"cannot parse feature {text!r}")


LEAD = Feature("L")
OTHER = Feature("O")


def follow(j: int) -> Feature:
    return Feature("F", j)


@dataclass(frozen=True)
class IndexReport:
    lead: float
    follow: dict[int, float] = field(default_factory=dict)
    normalizer: float = 1.0
    f_min: float = 0.0
    bound: float = 0.0


def _weights(length: int, gamma: float) -> tuple[np.ndarray, float]:
    if length < 2:
        raise InsufficientHistory(f"need at least 2 observed stages, have {length}")
    return _normalised_weights(length, gamma)


@functools.lru_cache(maxsize=4096)
def _normalised_weights(length, gamma):
    # history a^1..a^{t-1}; terms k = 2..t-1 carry gamma**(t-1-k)
    raw = gamma ** np.arange(length - 2, -1, -1, dtype=float)
    norm = float(raw.sum())
    w = raw / norm
    w.setflags(write=False)
    return w, norm


def lead_index(history: Sequence[int], params: AbstractionParams, distances: np.ndarray) -> float:
    """Discounted distance of a player's moves from standing still.

    ``distances`` is the player's action metric as a matrix.
    """
    h = np.asarray(history, dtype=int)
    w, _ = _weights(len(h), params.gamma)
    d = distances[h[1:], h[:-1]]
    return 0.0 - float(w @ d**params.rho)


def follow_index(
    history_i: Sequence[int],
    history_j: Sequence[int],
    params: AbstractionParams,
    follow_distances: np.ndarray,
) -> float:
    """Discounted distance of i's moves from best-responding to j's previous move.

    ``follow_distances[a_i, a_j]`` is the distance from ``a_i`` to the nearest
    member of i's pairwise best response to ``a_j``
    (see :meth:`NormalFormGame.follow_distances`).
    """
    hi = np.asarray(history_i, dtype=int)
    hj = np.asarray(history_j, dtype=int)
    if len(hi) != len(hj):
        raise ValueError("histories must have equal length")
    w, _ = _weights(len(hi), params.gamma)
    d = follow_distances[hi[1:], hj[:-1]]
    return 0.0 - float(w @ d**params.rho)


def feature_floor(params: AbstractionParams, distances: np.ndarray) -> tuple[float, float]:
    """Lowest attainable index and the classification threshold derived from it."""
    f_min = -float(np.max(distances)) ** params.rho
    return f_min, f_min * params.delta


def index_report(
    i: int, histories: Sequence[Sequence[int]], params: AbstractionParams, game: NormalFormGame
) -> IndexReport:
    length = len(histories[i])
    _, norm = _weights(length, params.gamma)
    f_min, bound = feature_floor(params, game.distance_matrix(i))
    lead = lead_index(histories[i], params, game.distance_matrix(i))
    follows = {
        j: follow_index(histories[i], histories[j], params, game.follow_distances(i, j))
        for j in range(game.n_players)
        if j != i
    }
    return IndexReport(lead, follows, norm, f_min, bound)


def classify(
    i: int,
    histories: Sequence[Sequence[int]],
    params: AbstractionParams,
    game: NormalFormGame,
    planner: int | None = 0,
) -> Feature:
    """Behavioural feature of player i given everyone's action history.

    Follow beats lead when the best follow index is at least the lead index.
    Among equally good follow targets the planner wins, then the lowest index.
    """
    if len(histories[i]) < 2:
        return OTHER
    report = index_report(i, histories, params, game)
    order = sorted(report.follow, key=lambda j: (j != planner, j))
    target = max(order, key=lambda j: report.follow[j])  # first maximum wins
    best = report.follow[target]
    if best >= report.bound and best >= report.lead:
        return follow(target)
    if report.lead >= report.bound:
        return LEAD
    return OTHER


# ---------------------------------------------------------------------------
# abstract states

S0 = "s0"


def planner_actions(n_players: int) -> list[Feature]:
    """High-level actions: lead, or follow one of the opponents."""
    return [LEAD] + [follow(j) for j in range(1, n_players)]


def opponent_features(i: int, n_players: int) -> list[Feature]:
    return [LEAD] + [follow(j) for j in range(n_players) if j != i] + [OTHER]


def build_state(last_action: Feature, features: Sequence[Feature]) -> tuple[Feature, ...]:
    """Planner-relative state: own last high-level action, then one feature per opponent."""
    n = len(features) + 1
    if last_action not in planner_actions(n):
        raise ValueError(f"planner slot must be L or F1..F{n - 1}, got {last_action}")
    for i, f in enumerate(features, start=1):
        if f.kind == "F" and (f.target == i or not 0 <= f.target < n):
            raise ValueError(f"opponent {i} cannot carry feature {f}")
    return (last_action, *features)


def state_space(n_players: int = 3) -> list[tuple[Feature, ...]]:
    slots = [planner_actions(n_players)] + [
        opponent_features(i, n_players) for i in range(1, n_players)
    ]
    return [tuple(s) for s in itertools.product(*slots)]


def format_state(state) -> str:
    if state == S0:
        return S0
    return "(" + ",".join(str(f) for f in state) + ")"


def parse_state(text: str):
    text = text.strip()
    if text == S0:
        return S0
    return tuple(Feature.parse(p) for p in text.strip("()").split(","))
