"""Common protocol for agents playing a repeated stage game."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .games import NormalFormGame


class ProtocolError(RuntimeError):
    """An agent was driven out of order or fed an inconsistent observation."""


class Agent:
    """Base class: the arena calls :meth:`reset` once, then :meth:`step` every stage.

    ``step`` receives the previous stage's joint action and this agent's reward
    from it (both ``None`` at stage 1) and returns the next concrete action.
    Subclasses implement :meth:`choose`, reading ``self.columns`` and
    ``self.rewards``.
    """

    name = "agent"

    def reset(self, game: NormalFormGame, seat: int, rng: np.random.Generator) -> None:
        self.game = game
        self.seat = seat
        self.rng = rng
        self.columns: list[list[int]] = [[] for _ in range(game.n_players)]
        self.rewards: list[float] = []
        self.last_action: int | None = None

    @property
    def stage(self) -> int:
        """1-based index of the stage about to be played."""
        return len(self.rewards) + 1

    @property
    def opponents(self) -> list[int]:
        return [p for p in range(self.game.n_players) if p != self.seat]

    def step(self, last_joint: Sequence[int] | None = None, last_reward: float | None = None) -> int:
        if not hasattr(self, "columns"):
            raise ProtocolError("step() called before reset()")
        if self.last_action is None:
            if last_joint is not None or last_reward is not None:
                raise ProtocolError("first stage must not carry an observation")
        else:
            if last_joint is None or last_reward is None:
                raise ProtocolError(f"stage {self.stage} is missing the previous observation")
            joint = self.game.check_joint(last_joint)
            if joint[self.seat] != self.last_action:
                raise ProtocolError(
                    f"observed own action {joint[self.seat]} but played {self.last_action}"
                )
            for p, a in enumerate(joint):
                self.columns[p].append(a)
            self.rewards.append(float(last_reward))
        action = self.game.check_action(self.seat, self.choose())
        self.last_action = action
        return action

    def choose(self) -> int:
        raise NotImplementedError

    def random_action(self) -> int:
        return int(self.rng.integers(self.game.action_counts[self.seat]))

    def closest(self, candidates, anchor: int | None) -> int:
        """Pick from ``candidates`` the action nearest ``anchor``; lowest index on ties."""
        candidates = sorted(candidates)
        if anchor is None:
            return candidates[0]
        d = self.game.distance_matrix(self.seat)
        return min(candidates, key=lambda a: (d[a, anchor], a))

    def follow_action(self, target: int) -> int:
        """Pairwise best response to ``target``'s most recent action."""
        br = self.game.pairwise_br(self.seat, target, self.columns[target][-1])
        return self.closest(br, self.last_action)

    def diagnostics(self) -> list[dict] | None:
        return None
