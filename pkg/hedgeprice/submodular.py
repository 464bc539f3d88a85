"""
Set functions on hypercube cells, the Lovasz extension and the closures.

Subsets of {0, ..., d-1} are bitmasks: bit k set means coordinate k takes
its high value. ``CubeEmbedding`` maps the unit cube affinely onto one cell
of a lattice-binomial move set, so a payoff restricted to a cell becomes a
``SetFunction`` and the chain simplexes below become closed-form maximizers.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Callable, Dict, Mapping, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .config import EPS_MOD
from .errors import BadParams, EvaluationFailure, LpNumericalFailure, NotLatticeBinomial
from .market_geometry import MoveSet, Simplex
from .utils.rational import batched_det

logger = logging.getLogger(__name__)

SUBMODULAR = "submodular"
SUPERMODULAR = "supermodular"
MODULAR = "modular"
NEITHER = "neither"

PROBE_SUBMODULAR = "consistent-submodular"
PROBE_SUPERMODULAR = "consistent-supermodular"
PROBE_MODULAR = "consistent-modular"
PROBE_MIXED = "mixed"

Evaluator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SetFunction:
    d: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if len(self.values) != 1 << self.d:
            raise BadParams(f"a set function of arity {self.d} needs {1 << self.d} values, got {len(self.values)}")
        if not self.exact and not np.all(np.isfinite(self.values)):
            raise BadParams("set function values must be finite")

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    def __call__(self, mask: int):
        return self.values[mask]

    def __neg__(self) -> "SetFunction":
        return SetFunction(self.d, -self.values)

    def combine(self, alpha: float, other: "SetFunction", beta: float) -> "SetFunction":
        return SetFunction(self.d, alpha * self.values + beta * other.values)

    @classmethod
    def from_mapping(cls, d: int, mapping: Mapping) -> "SetFunction":
        """Build from the JSON form {bitmask: value}."""
        table = [None] * (1 << d)
        for key, val in mapping.items():
            table[int(key)] = val
        if any(v is None for v in table):
            raise BadParams("set function table is incomplete")
        if all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in table):
            return cls(d, np.array([Fraction(v) for v in table], dtype=object))
        return cls(d, np.array(table, dtype=float))

    def to_mapping(self) -> Dict[str, float]:
        return {str(mask): (str(v) if self.exact else float(v)) for mask, v in enumerate(self.values)}

    @classmethod
    def modular(cls, weights: Sequence[float], offset: float = 0.0) -> "SetFunction":
        d = len(weights)
        return cls(d, np.array([offset + sum(w for k, w in enumerate(weights) if mask >> k & 1) for mask in range(1 << d)], dtype=float))


# === Modularity ===

@lru_cache(maxsize=None)
def _pair_index(d: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    base, with_i, with_j, with_ij = [], [], [], []
    for mask in range(1 << d):
        for i, j in combinations(range(d), 2):
            if mask >> i & 1 or mask >> j & 1:
                continue
            base.append(mask)
            with_i.append(mask | 1 << i)
            with_j.append(mask | 1 << j)
            with_ij.append(mask | 1 << i | 1 << j)
    return tuple(np.array(a, dtype=np.intp) for a in (base, with_i, with_j, with_ij))


def modularity_deltas(values: np.ndarray) -> np.ndarray:
    """f(A+i) + f(A+j) - f(A) - f(A+i+j) for every A and pair i, j outside A (last axis)."""
    values = np.asarray(values)
    d = int(values.shape[-1]).bit_length() - 1
    base, with_i, with_j, with_ij = _pair_index(d)
    return values[..., with_i] + values[..., with_j] - values[..., base] - values[..., with_ij]


def modularity_flags(values: np.ndarray, eps: float = EPS_MOD) -> Tuple[np.ndarray, np.ndarray]:
    """(is_submodular, is_supermodular) along the leading axes of a stack of tables."""
    deltas = modularity_deltas(values)
    return np.all(deltas >= -eps, axis=-1), np.all(deltas <= eps, axis=-1)


def label_of(is_sub: bool, is_super: bool) -> str:
    if is_sub and is_super:
        return MODULAR
    if is_sub:
        return SUBMODULAR
    if is_super:
        return SUPERMODULAR
    return NEITHER


def classify_modularity(f: SetFunction, eps: float = EPS_MOD) -> str:
    # Rational tables are compared exactly.
    tol = 0 if f.exact else eps
    is_sub, is_super = modularity_flags(f.values, tol)
    return label_of(bool(is_sub), bool(is_super))


# === Lovasz chain and extension ===

@dataclass(frozen=True)
class LovaszChain:
    sets: Tuple[int, ...]
    weights: Tuple
    order: Tuple[int, ...]

    def point(self) -> Tuple:
        d = len(self.order)
        return tuple(sum((w for w, a in zip(self.weights, self.sets) if a >> k & 1), 0 * self.weights[0]) for k in range(d))


def lovasz_chain(s: Sequence) -> LovaszChain:
    """Chain of the sorted coordinates of ``s`` in [0, 1]^d; ties go to the lower index."""
    d = len(s)
    if any(x < 0 or x > 1 for x in s):
        raise BadParams(f"chain point {tuple(s)} is outside the unit cube")
    order = tuple(sorted(range(d), key=lambda k: (-s[k], k)))
    ranked = [s[k] for k in order]
    sets = [0]
    for k in order:
        sets.append(sets[-1] | 1 << k)
    weights = [1 - ranked[0]] + [ranked[j] - ranked[j + 1] for j in range(d - 1)] + [ranked[-1]]
    return LovaszChain(sets=tuple(sets), weights=tuple(weights), order=order)


def lovasz_extension(f: SetFunction, s: Sequence) -> float:
    chain = lovasz_chain(s)
    return sum((w * f(a) for w, a in zip(chain.weights, chain.sets)), 0 * chain.weights[0])


# === Closures ===

@lru_cache(maxsize=None)
def _closure_bases(d: int) -> Tuple[np.ndarray, np.ndarray]:
    # Nonsingular (d+1)-subsets of cube vertices with their inverse systems.
    n = 1 << d
    columns = np.array([[1] + [mask >> k & 1 for k in range(d)] for mask in range(n)], dtype=np.int64)
    subsets = np.array(list(combinations(range(n), d + 1)), dtype=np.intp)
    mats = np.transpose(columns[subsets], (0, 2, 1))
    keep = batched_det(mats) != 0
    subsets, mats = subsets[keep], mats[keep].astype(float)
    return subsets, np.linalg.inv(mats)


def _concave_closure_enumerate(values: np.ndarray, s: np.ndarray) -> float:
    subsets, inverses = _closure_bases(len(s))
    rhs = np.concatenate([[1.0], s])
    alpha = inverses @ rhs
    feasible = np.all(alpha >= -1e-12, axis=1)
    totals = np.einsum("bj,bj->b", alpha[feasible], values[subsets[feasible]])
    return float(totals.max())


def _concave_closure_lp(values: np.ndarray, s: np.ndarray) -> float:
    d = len(s)
    n = 1 << d
    a_eq = np.array([[1.0] * n] + [[float(mask >> k & 1) for mask in range(n)] for k in range(d)])
    b_eq = np.concatenate([[1.0], s])
    res = linprog(-values, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise LpNumericalFailure(f"closure LP failed: {res.message}")
    return float(-res.fun)


def concave_closure_value(f: SetFunction, s: Sequence, method: str = "auto") -> float:
    """
    Value of the concave closure of ``f`` at ``s``.

    ``method`` is "enumerate" (all basic feasible solutions, the default up to
    d = 4), "linprog", or "auto".
    """
    point = np.array([float(x) for x in s])
    if np.any(point < 0) or np.any(point > 1):
        raise BadParams(f"closure point {tuple(s)} is outside the unit cube")
    values = np.array([float(v) for v in f.values])
    if method == "auto":
        method = "enumerate" if f.d <= 4 else "linprog"
    if method == "enumerate":
        return _concave_closure_enumerate(values, point)
    if method == "linprog":
        return _concave_closure_lp(values, point)
    raise BadParams(f"unknown closure method {method!r}")


def convex_closure_value(f: SetFunction, s: Sequence, method: str = "auto") -> float:
    return -concave_closure_value(-f, s, method=method)


# === Cube embedding and chain simplexes ===

@dataclass(frozen=True)
class CubeEmbedding:
    lows: Tuple[Fraction, ...]
    highs: Tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.lows) != len(self.highs):
            raise BadParams("lows and highs differ in length")
        if not all(lo < 0 < hi for lo, hi in zip(self.lows, self.highs)):
            raise BadParams("a cube embedding needs lows < 0 < highs in every coordinate")

    @property
    def d(self) -> int:
        return len(self.lows)

    @classmethod
    def from_move_set(cls, m: MoveSet) -> "CubeEmbedding":
        if not m.is_lattice_binomial:
            raise NotLatticeBinomial("the move set is not a 2^d product of two-point axes")
        return cls(lows=tuple(a[0] for a in m.axes), highs=tuple(a[1] for a in m.axes))

    def g(self, s: Sequence) -> Tuple:
        return tuple((1 - x) * lo + x * hi for x, lo, hi in zip(s, self.lows, self.highs))

    def corner(self, mask: int) -> Tuple[Fraction, ...]:
        """g0: the cell corner whose high coordinates are the bits of ``mask``."""
        return tuple(hi if mask >> k & 1 else lo for k, (lo, hi) in enumerate(zip(self.lows, self.highs)))

    def corner_array(self) -> np.ndarray:
        return np.array([[float(c) for c in self.corner(mask)] for mask in range(1 << self.d)])

    def origin_preimage(self) -> Tuple[Fraction, ...]:
        return tuple(-lo / (hi - lo) for lo, hi in zip(self.lows, self.highs))

    def move_indices(self, m: MoveSet) -> np.ndarray:
        """Move index of every corner, indexed by bitmask."""
        return np.array([m.index_of(self.corner(mask)) for mask in range(1 << self.d)], dtype=np.intp)


def _check_embedding(embedding: CubeEmbedding, m: MoveSet) -> None:
    if not m.is_lattice_binomial:
        raise NotLatticeBinomial("chain simplexes need a lattice-binomial move set")
    if tuple(a[0] for a in m.axes) != embedding.lows or tuple(a[1] for a in m.axes) != embedding.highs:
        raise NotLatticeBinomial("the embedding does not match the move set axes")


def _chain_simplex(embedding: CubeEmbedding, m: MoveSet, flip: int) -> Simplex:
    s = tuple(1 - x if flip >> k & 1 else x for k, x in enumerate(embedding.origin_preimage()))
    chain = lovasz_chain(s)
    indices = sorted(m.index_of(embedding.corner(a ^ flip)) for a in chain.sets)
    return Simplex(tuple(indices))


def chi_L(embedding: CubeEmbedding, m: MoveSet) -> Simplex:
    """Lovasz-chain simplex through g^-1(0); maximizes supermodular payoffs."""
    _check_embedding(embedding, m)
    return _chain_simplex(embedding, m, 0)


def chi_plus(embedding: CubeEmbedding, m: MoveSet) -> Simplex:
    if embedding.d != 2:
        raise BadParams("the correlation simplexes are defined for two assets")
    return chi_L(embedding, m)


def chi_minus(embedding: CubeEmbedding, m: MoveSet) -> Simplex:
    """Negative-correlation simplex: the chain taken on the cube reflected in the second coordinate."""
    if embedding.d != 2:
        raise BadParams("the correlation simplexes are defined for two assets")
    _check_embedding(embedding, m)
    return _chain_simplex(embedding, m, 0b10)


def cell_set_function(F: Evaluator, base: Sequence, embedding: CubeEmbedding) -> SetFunction:
    corners = np.asarray([float(b) for b in base]) + embedding.corner_array()
    values = np.asarray(F(corners), dtype=float)
    if not np.all(np.isfinite(values)):
        raise EvaluationFailure(f"payoff is not finite on the cell at {tuple(base)}")
    return SetFunction(embedding.d, values)


# === Smooth-payoff mixed partials ===

def mixed_partials(F: Evaluator, samples: np.ndarray, h: float) -> np.ndarray:
    """Central-difference estimates of every off-diagonal second derivative, shape (n, pairs)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    d = samples.shape[1]
    out = []
    for i, j in combinations(range(d), 2):
        ei = np.zeros(d)
        ej = np.zeros(d)
        ei[i] = h
        ej[j] = h
        stencil = F(samples + ei + ej) - F(samples + ei - ej) - F(samples - ei + ej) + F(samples - ei - ej)
        out.append(np.asarray(stencil, dtype=float) / (4 * h * h))
    return np.stack(out, axis=-1) if out else np.zeros((len(samples), 0))


def mixed_partial_probe(F: Evaluator, samples: np.ndarray, h: float = 1e-3, tol: float = 1e-6) -> str:
    # Advisory only: pricing never gates a fast path on this.
    est = mixed_partials(F, samples, h)
    neg = bool(np.any(est < -tol))
    pos = bool(np.any(est > tol))
    if neg and pos:
        return PROBE_MIXED
    if neg:
        return PROBE_SUBMODULAR
    if pos:
        return PROBE_SUPERMODULAR
    return PROBE_MODULAR
