"""Normal-form stage games, best responses and pure equilibria.

Payoffs are held as a dense tensor of shape ``(*action_counts, n_players)``.
The Lemonade Stand Game is built in; other games can be loaded from JSON.
"""

from __future__ import annotations

import functools
import itertools
import json
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

DEFAULT_NE_CAP = 10**6


class GameError(ValueError):
    """Invalid game description or out-of-range action."""


class NormalFormGame:
    """An n-player simultaneous-move game with a dense payoff table.

    Args:
        payoffs: array of shape ``(m_0, ..., m_{n-1}, n)``.
        constant_sum: if given, every joint action must pay out exactly this total.
        distances: optional per-player action metric, a list of ``m_i x m_i``
            matrices. Defaults to the discrete metric (0 if equal, else 1).
        pairwise_br: optional oracle ``(i, j, a_j) -> iterable of actions``
            giving i's best response to opponent j playing ``a_j``.
    """

    def __init__(
        self,
        payoffs,
        constant_sum: float | None = None,
        distances: Sequence[np.ndarray] | None = None,
        pairwise_br: Callable[[int, int, int], Iterable[int]] | None = None,
        name: str = "game",
    ):
        payoffs = np.asarray(payoffs, dtype=float)
        if payoffs.ndim < 2 or payoffs.shape[-1] != payoffs.ndim - 1:
            raise GameError(
                f"payoff table must have shape (*action_counts, n); got {payoffs.shape}"
            )
        if min(payoffs.shape[:-1]) < 1:
            raise GameError("every player needs at least one action")
        self.payoffs = payoffs
        self.payoffs.setflags(write=False)
        self.name = name
        self.n_players = payoffs.ndim - 1
        self.action_counts = tuple(payoffs.shape[:-1])
        self.constant_sum = constant_sum
        if constant_sum is not None:
            totals = payoffs.sum(axis=-1)
            if not np.allclose(totals, constant_sum, rtol=0, atol=1e-9):
                raise GameError(f"payoffs do not sum to {constant_sum} everywhere")

        if distances is None:
            distances = [1.0 - np.eye(m) for m in self.action_counts]
        self._distances = [np.asarray(d, dtype=float) for d in distances]
        for m, d in zip(self.action_counts, self._distances):
            if d.shape != (m, m):
                raise GameError(f"distance matrix shape {d.shape} does not match {m} actions")
        self._pairwise_br = pairwise_br
        self._br_cache: dict[tuple[int, int, int], frozenset[int]] = {}
        self._follow_cache: dict[tuple[int, int], np.ndarray] = {}

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r}, action_counts={self.action_counts})"

    # validation helpers

    def check_action(self, i: int, a: int) -> int:
        if not 0 <= i < self.n_players:
            raise GameError(f"player {i} out of range for {self.n_players} players")
        a = int(a)
        if not 0 <= a < self.action_counts[i]:
            raise GameError(f"action {a} out of range for player {i}")
        return a

    def check_joint(self, joint: Sequence[int]) -> tuple[int, ...]:
        if len(joint) != self.n_players:
            raise GameError(f"expected {self.n_players} actions, got {len(joint)}")
        return tuple(self.check_action(i, a) for i, a in enumerate(joint))

    # oracles

    def payoff(self, joint: Sequence[int]) -> np.ndarray:
        return self.payoffs[self.check_joint(joint)]

    def distance_matrix(self, i: int) -> np.ndarray:
        return self._distances[i]

    def metric(self, i: int, x: int, y: int) -> float:
        return float(self._distances[i][x, y])

    def pairwise_br(self, i: int, j: int, a_j: int) -> frozenset[int]:
        """Player i's best response to opponent j's single action ``a_j``."""
        if i == j:
            raise GameError("pairwise best response needs two distinct players")
        a_j = self.check_action(j, a_j)
        key = (i, j, a_j)
        if key not in self._br_cache:
            if self._pairwise_br is not None:
                br = frozenset(int(a) for a in self._pairwise_br(i, j, a_j))
            else:
                br = self._default_pairwise_br(i, j, a_j)
            if not br:
                raise GameError(f"pairwise best response for {key} is empty")
            self._br_cache[key] = br
        return self._br_cache[key]

    def _default_pairwise_br(self, i, j, a_j):
        # i's payoff with j fixed, averaged uniformly over everyone else
        table = np.take(self.payoffs[..., i], a_j, axis=j)
        axis_i = i if i < j else i - 1
        other_axes = tuple(ax for ax in range(table.ndim) if ax != axis_i)
        values = table.mean(axis=other_axes) if other_axes else table
        return frozenset(np.flatnonzero(values == values.max()).tolist())

    def follow_distances(self, i: int, j: int) -> np.ndarray:
        """Matrix ``D[a_i, a_j]`` = distance from ``a_i`` to i's pairwise BR to ``a_j``."""
        key = (i, j)
        if key not in self._follow_cache:
            d = self._distances[i]
            out = np.empty((self.action_counts[i], self.action_counts[j]))
            for a_j in range(self.action_counts[j]):
                br = sorted(self.pairwise_br(i, j, a_j))
                out[:, a_j] = d[:, br].min(axis=1)
            out.setflags(write=False)
            self._follow_cache[key] = out
        return self._follow_cache[key]


def ring_distances(m: int) -> np.ndarray:
    x = np.arange(m)
    diff = np.abs(x[:, None] - x[None, :])
    return np.minimum(diff, m - diff).astype(float)


def lemonade_payoff(positions: Sequence[int], size: int = 12) -> tuple[float, ...]:
    """Stage utilities for lemonade stands placed on a ring of ``size`` spots."""
    n = len(positions)
    counts = {p: positions.count(p) for p in positions}
    total = 2.0 * size
    if len(counts) == 1:
        return (total / n,) * n
    if n == 3 and len(counts) == 2:
        # two share a spot: each of them gets a quarter, the loner gets half
        return tuple(total / 4 if counts[p] == 2 else total / 2 for p in positions)
    spots = sorted(counts)
    out = []
    for p in positions:
        k = spots.index(p)
        cw = (spots[(k + 1) % len(spots)] - p) % size
        ccw = (p - spots[k - 1]) % size
        out.append(float(cw + ccw) / counts[p])
    return tuple(out)


class LemonadeStandGame(NormalFormGame):
    """Three stands on a 12-spot island; utilities always total 24."""

    SIZE = 12

    def __init__(self):
        m = self.SIZE
        table = np.empty((m, m, m, 3))
        for joint in itertools.product(range(m), repeat=3):
            table[joint] = lemonade_payoff(list(joint), m)
        super().__init__(
            table,
            constant_sum=2.0 * m,
            distances=[ring_distances(m)] * 3,
            name="lemonade",
        )

    def _default_pairwise_br(self, i, j, a_j):
        # the spot directly across the island
        return frozenset({(a_j + self.SIZE // 2) % self.SIZE})


@functools.lru_cache(maxsize=None)
def lemonade() -> LemonadeStandGame:
    """Shared LSG instance; games are immutable so one copy serves every match."""
    return LemonadeStandGame()


# ---------------------------------------------------------------------------
# best-response machinery


def _others_profile(game: NormalFormGame, i: int, others: Sequence[int]) -> list:
    if len(others) != game.n_players - 1:
        raise GameError(f"expected {game.n_players - 1} opponent actions, got {len(others)}")
    profile = list(others[:i]) + [slice(None)] + list(others[i:])
    for p, a in enumerate(profile):
        if p != i:
            game.check_action(p, a)
    return profile


def _with_action(others: Sequence[int], i: int, a: int) -> tuple[int, ...]:
    return tuple(others[:i]) + (a,) + tuple(others[i:])


def best_response_set(game: NormalFormGame, i: int, others: Sequence[int]) -> frozenset[int]:
    """All actions of player i maximising its payoff against ``others``.

    ``others`` lists the actions of every player except i, in seat order.
    """
    game.check_action(i, 0)
    profile = _others_profile(game, i, others)
    values = game.payoffs[tuple(profile) + (i,)]
    return frozenset(np.flatnonzero(values == values.max()).tolist())


def considered_best_response(
    game: NormalFormGame, i: int, j: int, others: Sequence[int]
) -> frozenset[int]:
    """Members of i's best-response set that are most generous to player j."""
    if i == j:
        raise GameError("considered best response needs j != i")
    game.check_action(j, 0)
    br = sorted(best_response_set(game, i, others))
    values = np.array([game.payoffs[_with_action(others, i, a) + (j,)] for a in br])
    return frozenset(a for a, v in zip(br, values) if v == values.max())


def reciprocal_best_response(
    game: NormalFormGame, i: int, j: int, rest: Sequence[int], a_j: int
) -> frozenset[int]:
    """i's j-considered best responses under which ``a_j`` stays a best response for j.

    ``rest`` holds the actions of the players other than i and j, in seat order.
    An empty result means no reciprocal best response exists at this profile.
    """
    if i == j:
        raise GameError("reciprocal best response needs j != i")
    a_j = game.check_action(j, a_j)
    if len(rest) != game.n_players - 2:
        raise GameError(f"expected {game.n_players - 2} remaining actions, got {len(rest)}")
    seats = [p for p in range(game.n_players) if p not in (i, j)]
    full = dict(zip(seats, rest))
    full[j] = a_j
    others_i = [full[p] for p in range(game.n_players) if p != i]
    out = set()
    for a_i in considered_best_response(game, i, j, others_i):
        others_j = [a_i if p == i else full[p] for p in range(game.n_players) if p != j]
        if a_j in best_response_set(game, j, others_j):
            out.add(a_i)
    return frozenset(out)


def pure_nash_equilibria(game: NormalFormGame, cap: int = DEFAULT_NE_CAP) -> frozenset:
    """Every joint action from which no player gains by deviating alone."""
    size = int(np.prod(game.action_counts, dtype=object))
    if size > cap:
        raise GameError(f"game has {size} joint actions, above the enumeration cap {cap}")
    stable = np.ones(game.action_counts, dtype=bool)
    for i in range(game.n_players):
        r = game.payoffs[..., i]
        stable &= r >= r.max(axis=i, keepdims=True)
    return frozenset(tuple(int(a) for a in idx) for idx in np.argwhere(stable))


def distance_to_set(game: NormalFormGame, i: int, a: int, targets: Iterable[int]) -> float:
    targets = list(targets)
    if not targets:
        raise GameError("distance to an empty action set is undefined")
    d = game.distance_matrix(i)
    return float(min(d[a, s] for s in targets))


# ---------------------------------------------------------------------------
# small library games and loading


def matching_pennies() -> NormalFormGame:
    table = [[[1, -1], [-1, 1]], [[-1, 1], [1, -1]]]
    return NormalFormGame(table, constant_sum=0.0, name="matching_pennies")


def coordination_game() -> NormalFormGame:
    table = [[[1, 1], [0, 0]], [[0, 0], [1, 1]]]
    return NormalFormGame(table, name="coordination")


def game_from_dict(spec: dict) -> NormalFormGame:
    """Build a game from ``{"actions": [...], "payoffs": nested list, ...}``.

    ``payoffs`` is indexed by each player's action in seat order and ends in a
    list of per-player utilities. ``"game": "lemonade"`` returns the built-in LSG.
    """
    if spec.get("game") == "lemonade":
        return LemonadeStandGame()
    try:
        counts = tuple(int(m) for m in spec["actions"])
        payoffs = np.asarray(spec["payoffs"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise GameError(f"malformed game description: {exc}") from exc
    if payoffs.shape != counts + (len(counts),):
        raise GameError(
            f"payoff table shape {payoffs.shape} does not match actions {list(counts)}"
        )
    if "players" in spec and int(spec["players"]) != len(counts):
        raise GameError("player count disagrees with the action list")
    metric = spec.get("metric", "discrete")
    if metric == "ring":
        distances = [ring_distances(m) for m in counts]
    elif metric == "discrete":
        distances = None
    else:
        raise GameError(f"unknown metric {metric!r}")
    return NormalFormGame(
        payoffs,
        constant_sum=spec.get("constant_sum"),
        distances=distances,
        name=spec.get("name", "game"),
    )


def load_game(path: str | Path) -> NormalFormGame:
    with open(path) as fh:
        return game_from_dict(json.load(fh))
