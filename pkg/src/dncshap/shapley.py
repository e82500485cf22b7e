"""Exact Shapley values for small cooperative games.

This is the exponential reference the divide-and-conquer attribution is
checked against, not something to run on real inputs: enumeration is capped
at :data:`MAX_PLAYERS` players.
"""

from __future__ import annotations

import math
from typing import Callable, FrozenSet, Iterable

import numpy as np

MAX_PLAYERS = 20


class EnumerationLimitError(ValueError):
    pass


class CoalitionGame:
    """``n`` players labelled ``0..n-1`` and a value function on subsets.

    The value function receives a ``frozenset`` of player indices and is
    called at most once per subset.
    """

    def __init__(self, n: int, value: Callable[[FrozenSet[int]], float]):
        if n < 0:
            raise ValueError("player count must be non-negative")
        self.n = n
        self._value = value
        self._memo: dict[FrozenSet[int], float] = {}

    def v(self, coalition: Iterable[int]) -> float:
        key = frozenset(coalition)
        if key not in self._memo:
            bad = [p for p in key if not 0 <= p < self.n]
            if bad:
                raise ValueError(f"players {sorted(bad)} outside 0..{self.n - 1}")
            value = float(self._value(key))
            if not math.isfinite(value):
                raise ValueError(f"value of coalition {sorted(key)} is not finite")
            self._memo[key] = value
        return self._memo[key]

    @property
    def evaluations(self) -> int:
        return len(self._memo)

    @classmethod
    def from_table(cls, n, table):
        """Game from a length ``2**n`` array indexed by player bitmask."""
        table = np.asarray(table, dtype=np.float64)
        if table.shape != (2 ** n,):
            raise ValueError(f"table needs {2 ** n} entries, got {table.shape}")
        return cls(n, lambda s: table[sum(1 << p for p in s)])

    @classmethod
    def additive(cls, increments, base=0.0):
        inc = [float(a) for a in increments]
        return cls(len(inc), lambda s: base + sum(inc[p] for p in s))


def marginal_contribution(game: CoalitionGame, player: int, coalition: Iterable[int]) -> float:
    """``v(coalition) - v(coalition without player)``; ``player`` must be in it."""
    coalition = frozenset(coalition)
    if player not in coalition:
        raise ValueError(f"player {player} is not in coalition {sorted(coalition)}")
    return game.v(coalition) - game.v(coalition - {player})


def two_player_shapley(v_empty, v_a, v_b, v_ab):
    """Closed-form Shapley pair for a two-player game.

    Each player gets the average of its marginal contribution joining alone
    and joining the other player; the two values add up to
    ``v_ab - v_empty`` (up to floating-point rounding).
    """
    s_a = 0.5 * (v_a - v_empty) + 0.5 * (v_ab - v_b)
    s_b = 0.5 * (v_b - v_empty) + 0.5 * (v_ab - v_a)
    return s_a, s_b


def exact_shapley(game: CoalitionGame) -> np.ndarray:
    """Shapley vector by full subset enumeration.

    ``phi_i = sum_S |S|! (n-|S|-1)! / n! * (v(S + i) - v(S))`` over subsets
    ``S`` not containing ``i``, visited in increasing bitmask order. For
    ``n == 2`` this performs the same floating-point operations as
    :func:`two_player_shapley`.
    """
    n = game.n
    if n > MAX_PLAYERS:
        raise EnumerationLimitError(f"refusing to enumerate 2**{n} coalitions (limit {MAX_PLAYERS} players)")
    if n == 0:
        return np.zeros(0)
    fact = math.factorial
    weights = [fact(s) * fact(n - s - 1) / fact(n) for s in range(n)]
    table = np.empty(2 ** n)
    for mask in range(2 ** n):
        table[mask] = game.v(p for p in range(n) if mask >> p & 1)
    sizes = [bin(mask).count("1") for mask in range(2 ** n)]
    phi = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        acc = 0.0
        for mask in range(2 ** n):
            if mask & bit:
                continue
            acc += weights[sizes[mask]] * (table[mask | bit] - table[mask])
        phi[i] = acc
    return phi
