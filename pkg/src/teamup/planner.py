"""The TeamUP agent: a counted model over behavioural states, planned with value iteration.

Every (state, high-level action) pair starts out "unknown": it leads straight
to an absorbing fictitious state and pays the shaping potential of its source
state. Once a pair has been tried ``known_threshold`` times its empirical
transitions and mean reward replace the fiction. The planner replans each
time some pair's visit count reaches a multiple of that threshold.

With ``online_shaping`` (the default) each experienced stage reward also
carries the potential difference ``discount * phi(s') - phi(s)``; switch it
off to use the shaping potentials for initialisation only.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .abstraction import (
    LEAD,
    S0,
    AbstractionParams,
    Feature,
    build_state,
    classify,
    format_state,
    planner_actions,
    state_space,
)
from .agent import Agent

OPTIMAL, WORST, OTHER_CLASS = "optimal", "worst", "other"


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class TeamUpConfig:
    gamma: float = 0.05
    rho: float = 0.5
    delta: float = 0.3
    epsilon: float = 4.0
    discount: float = 0.95
    known_threshold: int = 15
    tol: float = 1e-6
    r_max: float = 12.0
    r_min: float = 6.0
    horizon: int = 100
    start: int | None = None  # None: drawn from the agent's seeded stream
    online_shaping: bool = True
    max_iter: int = 100_000

    def __post_init__(self):
        self.abstraction  # validates gamma, rho, delta
        self.potentials
        if int(self.known_threshold) != self.known_threshold or self.known_threshold < 1:
            raise ValueError("known_threshold must be a positive integer")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @property
    def abstraction(self) -> AbstractionParams:
        return AbstractionParams(self.gamma, self.rho, self.delta)

    @property
    def potentials(self) -> "ShapingPotentials":
        return ShapingPotentials(self.r_max, self.r_min, self.epsilon, self.discount)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TeamUpConfig":
        data = dict(data)
        if "K" in data:
            data["known_threshold"] = data.pop("K")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown TeamUP config keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class ShapingPotentials:
    r_max: float
    r_min: float
    epsilon: float
    discount: float

    def __post_init__(self):
        if not 0 < self.discount < 1:
            raise ValueError(f"planning discount must lie in (0, 1), got {self.discount}")
        if not self.r_max > self.r_min:
            raise ValueError("r_max must exceed r_min")
        if not 0 < self.epsilon < self.r_max - self.r_min:
            raise ValueError(f"epsilon must lie in (0, {self.r_max - self.r_min})")

    def of_class(self, cls: str) -> float:
        numerator = {
            OPTIMAL: self.r_max,
            WORST: self.r_min,
            OTHER_CLASS: self.r_max - self.epsilon,
        }[cls]
        return numerator / (1.0 - self.discount)

    def __call__(self, state) -> float:
        return self.of_class(state_class(state))


def state_class(state) -> str:
    """Whether a planner-relative state is optimal, worst or neither.

    Optimal: someone follows the planner and the planner either leads or
    follows that same player back. Worst: two opponents collude without the
    planner, i.e. one follows another who leads or follows it back.
    """
    if state == S0:
        raise ValueError("the fictitious state has no class")
    own, opps = state[0], state[1:]
    followers = [i for i, f in enumerate(opps, start=1) if f == Feature("F", 0)]
    if followers:
        if own == LEAD:
            return OPTIMAL
        if own.kind == "F" and own.target in followers:
            return OPTIMAL
    for i, f in enumerate(opps, start=1):
        if f.kind == "F" and f.target != 0:
            partner = opps[f.target - 1]
            if partner == LEAD or partner == Feature("F", i):
                return WORST
    return OTHER_CLASS


@dataclass
class ValueTable:
    values: np.ndarray
    q: np.ndarray
    policy: np.ndarray
    iterations: int


def value_iteration(
    transitions: np.ndarray,
    rewards: np.ndarray,
    discount: float,
    tol: float = 1e-6,
    max_iter: int = 100_000,
) -> ValueTable:
    """Solve ``V = max_a R + discount * T V`` by successive approximation.

    ``transitions`` has shape (S, A, S) and ``rewards`` shape (S, A). Iteration
    stops once the sup-norm change is small enough that V is within ``tol`` of
    the fixed point. The greedy policy takes the lowest action index on ties.
    """
    if not 0 <= discount < 1:
        raise ValueError("discount must lie in [0, 1)")
    stop = tol * min(1.0, (1.0 - discount) / discount) if discount > 0 else tol
    v = np.zeros(transitions.shape[0])
    for it in range(1, max_iter + 1):
        q = rewards + discount * (transitions @ v)
        v_new = q.max(axis=1)
        residual = np.max(np.abs(v_new - v))
        v = v_new
        if residual <= stop:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} sweeps (residual {residual:g})")
    q = rewards + discount * (transitions @ v)
    return ValueTable(values=v, q=q, policy=q.argmax(axis=1), iterations=it)


class PlannerModel:
    """Visit counts and reward sums over (state, high-level action, next state).

    The last state index is the absorbing fictitious state.
    """

    def __init__(self, states, n_actions: int, potentials: ShapingPotentials, known_threshold: int):
        self.states = list(states) + [S0]
        self.index = {s: k for k, s in enumerate(self.states)}
        self.n_actions = n_actions
        self.potentials = potentials
        self.known_threshold = int(known_threshold)
        n = len(self.states)
        self.counts = np.zeros((n, n_actions, n), dtype=np.int64)
        self.reward_sum = np.zeros((n, n_actions))
        self.phi = np.array([potentials(s) for s in self.states[:-1]] + [0.0])

    @property
    def fictitious(self) -> int:
        return len(self.states) - 1

    def visits(self, s: int, a: int) -> int:
        return int(self.counts[s, a].sum())

    def mean_reward(self, s: int, a: int) -> float:
        n = self.visits(s, a)
        return self.reward_sum[s, a] / n if n else float("nan")

    def observe(self, s: int, a: int, s_next: int, reward: float) -> bool:
        """Record one experience; True when the pair's count hits a multiple of the threshold."""
        self.counts[s, a, s_next] += 1
        self.reward_sum[s, a] += reward
        return self.visits(s, a) % self.known_threshold == 0

    def known(self) -> np.ndarray:
        return self.counts.sum(axis=2) >= self.known_threshold

    def transitions(self) -> tuple[np.ndarray, np.ndarray]:
        """Planning model: empirical for known pairs, fictitious for the rest."""
        n, f = len(self.states), self.fictitious
        totals = self.counts.sum(axis=2)
        known = totals >= self.known_threshold
        known[f] = False
        T = np.zeros((n, self.n_actions, n))
        R = np.zeros((n, self.n_actions))
        safe = np.where(known, totals, 1)
        T[known] = self.counts[known] / safe[known][:, None]
        R[known] = self.reward_sum[known] / safe[known]
        unknown = ~known
        unknown[f] = False
        T[unknown, f] = 1.0
        R[unknown] = np.broadcast_to(self.phi[:, None], R.shape)[unknown]
        T[f, :, f] = 1.0
        return T, R

    def plan(self, discount: float, tol: float, max_iter: int = 100_000) -> ValueTable:
        T, R = self.transitions()
        return value_iteration(T, R, discount, tol, max_iter)


def init_model(config: TeamUpConfig, n_players: int = 3) -> tuple[PlannerModel, ValueTable]:
    model = PlannerModel(
        state_space(n_players),
        n_players,  # L plus one follow action per opponent
        config.potentials,
        config.known_threshold,
    )
    return model, model.plan(config.discount, config.tol, config.max_iter)


class TeamUpAgent(Agent):
    """Plans over lead/follow behaviour of its opponents to find an ally."""

    name = "teamup"

    def __init__(self, config: TeamUpConfig | None = None):
        self.config = config or TeamUpConfig()

    def reset(self, game, seat, rng):
        super().reset(game, seat, rng)
        self.actions = planner_actions(game.n_players)
        self.model, table = init_model(self.config, game.n_players)
        self.policy = table.policy
        self.high_level = LEAD
        self.state = None
        self._warm_prev = True
        self._trace: list[dict] = []

    def relative(self, seat: int) -> int:
        """Planner-relative index of an absolute seat (the planner itself is 0)."""
        return 0 if seat == self.seat else self.opponents.index(seat) + 1

    def observed_state(self):
        params = self.config.abstraction
        features = []
        for opp in self.opponents:
            f = classify(opp, self.columns, params, self.game, planner=self.seat)
            if f.kind == "F":
                f = Feature("F", self.relative(f.target))
            features.append(f)
        return build_state(self.high_level, features)

    def choose(self) -> int:
        t = self.stage
        replanned = False
        snapshot = None
        if t == 1:
            start = self.config.start
            self.high_level = LEAD
            self._trace.append(dict(state=None, action=str(LEAD), replanned=False, values=None))
            return self.random_action() if start is None else int(start)

        state = self.observed_state()
        warmup = len(self.columns[self.seat]) < 2
        if self.state is not None and not self._warm_prev:
            idx = self.model.index
            reward = self.rewards[-1]
            if self.config.online_shaping:
                pot = self.model.potentials
                reward += self.config.discount * pot(state) - pot(self.state)
            a = self.actions.index(self.high_level)
            if self.model.observe(idx[self.state], a, idx[state], reward):
                table = self.model.plan(self.config.discount, self.config.tol, self.config.max_iter)
                self.policy = table.policy
                replanned = True
                snapshot = [round(float(v), 9) for v in table.values]
        self.state, self._warm_prev = state, warmup
        self.high_level = LEAD if warmup else self.actions[self.policy[self.model.index[state]]]
        self._trace.append(
            dict(
                state=format_state(state),
                action=str(self.high_level),
                replanned=replanned,
                values=snapshot,
            )
        )
        return self.ground(self.high_level)

    def ground(self, action: Feature) -> int:
        if action == LEAD:
            return self.last_action
        return self.follow_action(self.opponents[action.target - 1])

    def diagnostics(self) -> list[dict]:
        return list(self._trace)


def ground_action(game, seat: int, action: Feature, own_last: int, last_joint) -> int:
    """Concrete action for a high-level action, in planner-relative opponent indexing."""
    if action == LEAD:
        return int(own_last)
    opponents = [p for p in range(game.n_players) if p != seat]
    target = opponents[action.target - 1]
    br = game.pairwise_br(seat, target, last_joint[target])
    d = game.distance_matrix(seat)
    return min(sorted(br), key=lambda a: (d[a, own_last], a))
