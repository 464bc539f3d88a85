# lattice.py

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from .errors import BadParams
from .market_geometry import MoveSet


@dataclass(frozen=True, eq=False)
class StateLattice:
    """
    Reachable partial sums S_n = x_1 + ... + x_n for n = 0..N.

    States are stored as integer vectors over the move set's common
    denominator, so deduplication is exact. ``children[n][i, j]`` is the
    position in layer n+1 of state i of layer n moved by move j.
    """

    move_set: MoveSet
    layers: Tuple[np.ndarray, ...]
    children: Tuple[np.ndarray, ...]

    @classmethod
    def build(cls, m: MoveSet, n_rounds: int) -> "StateLattice":
        if n_rounds < 0:
            raise BadParams("the number of rounds must be nonnegative")
        moves = m.integer_points
        layers: List[np.ndarray] = [np.zeros((1, m.dim), dtype=np.int64)]
        children: List[np.ndarray] = []
        for _ in range(n_rounds):
            prev = layers[-1]
            sums = (prev[:, None, :] + moves[None, :, :]).reshape(-1, m.dim)
            states, inverse = np.unique(sums, axis=0, return_inverse=True)
            layers.append(states)
            children.append(np.asarray(inverse).reshape(len(prev), len(moves)))
        return cls(move_set=m, layers=tuple(layers), children=tuple(children))

    @property
    def n_rounds(self) -> int:
        return len(self.layers) - 1

    def size(self, n: int) -> int:
        return len(self.layers[n])

    def states(self, n: int) -> np.ndarray:
        return self.layers[n] / float(self.move_set.scale)

    def exact_state(self, n: int, i: int) -> Tuple[Fraction, ...]:
        return tuple(Fraction(int(c), self.move_set.scale) for c in self.layers[n][i])

    def prefix(self, n_rounds: int) -> "StateLattice":
        if n_rounds > self.n_rounds:
            raise BadParams(f"lattice has {self.n_rounds} rounds, asked for {n_rounds}")
        return StateLattice(self.move_set, self.layers[: n_rounds + 1], self.children[:n_rounds])
