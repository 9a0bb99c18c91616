import itertools

import numpy as np
import pytest

from teamup.games import lemonade


@pytest.fixture(scope="session")
def lsg():
    return lemonade()


def walk_arcs(positions, size=12):
    """Independent payoff oracle: step round the ring to each neighbour.

    Only valid when all positions are distinct.
    """
    out = []
    for k, x in enumerate(positions):
        others = {p for j, p in enumerate(positions) if j != k}
        cw = next(d for d in range(1, size + 1) if (x + d) % size in others)
        ccw = next(d for d in range(1, size + 1) if (x - d) % size in others)
        out.append(float(cw + ccw))
    return out


def brute_force_ne(game):
    """Literal check of 'no profitable unilateral deviation' over every profile."""
    found = set()
    for profile in itertools.product(*(range(m) for m in game.action_counts)):
        stable = True
        for i in range(game.n_players):
            here = game.payoffs[profile][i]
            for dev in range(game.action_counts[i]):
                alt = profile[:i] + (dev,) + profile[i + 1 :]
                if here - game.payoffs[alt][i] < 0:
                    stable = False
                    break
            if not stable:
                break
        if stable:
            found.add(profile)
    return found


def random_game(rng, n, m_max=4, constant_sum=False, integer=True):
    from teamup.games import NormalFormGame

    counts = tuple(int(rng.integers(1, m_max + 1)) for _ in range(n))
    if integer:
        table = rng.integers(0, 4, size=counts + (n,)).astype(float)
    else:
        table = rng.normal(size=counts + (n,))
    if constant_sum:
        table[..., -1] = 10.0 - table[..., :-1].sum(axis=-1)
    return NormalFormGame(table, constant_sum=10.0 if constant_sum else None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def report(name, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
