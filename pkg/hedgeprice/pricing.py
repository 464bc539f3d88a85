"""
Upper and lower hedging prices.

Single-round prices maximize (minimize) the risk-neutral expectation over
the simplex family; N-round prices back those up over the exact state
lattice. On lattice-binomial move sets, nodes whose cell set function is
certified sub- or supermodular use the closed-form chain simplex instead of
searching the family.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog

from .config import EPS_LP, EPS_TIE, MAX_VERIFY_PATHS
from .errors import (
    BadParams,
    ConvexityCheckFailed,
    EvaluationFailure,
    LpNumericalFailure,
    NegativeProbability,
    NotProductAcrossBlocks,
    StructureCertificationFailed,
)
from .lattice import StateLattice
from .market_geometry import MoveSet, Simplex, SimplexFamily, build_move_set, enumerate_simplexes, hull_vertices, move_set_preset
from .payoffs import CONVEX, Payoff, SeparablePartition, evaluate, separable_decompose
from .submodular import MODULAR, SUBMODULAR, SUPERMODULAR, CubeEmbedding, chi_L, chi_minus, label_of, modularity_flags

logger = logging.getLogger(__name__)

UPPER = "upper"
LOWER = "lower"
SIDES = (UPPER, LOWER)

FAST_AUTO = "auto"
FAST_OFF = "off"


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise BadParams(f"side must be one of {SIDES}, got {side!r}")


def _expectations(family: SimplexFamily, values: np.ndarray) -> np.ndarray:
    """I(simplex, f) for every family member; ``values`` has the moves on its last axis."""
    return np.einsum("...gj,gj->...g", values[..., family.vertex_array], family.prob_array)


def _pick(expect: np.ndarray, side: str) -> np.ndarray:
    # argmax/argmin return the first optimum, i.e. the lexicographically smallest simplex.
    return np.argmax(expect, axis=-1) if side == UPPER else np.argmin(expect, axis=-1)


# === Single round ===

@dataclass(frozen=True)
class SingleRoundPrice:
    price: float
    simplex: Simplex
    position: int
    near_ties: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SingleRoundHedge:
    alpha: float
    holdings: np.ndarray
    measure: np.ndarray


def _values_on_moves(m: MoveSet, f) -> np.ndarray:
    values = np.asarray(f, dtype=float)
    if values.shape != (len(m),):
        raise BadParams(f"expected {len(m)} values on the moves, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise EvaluationFailure("payoff values on the moves must be finite")
    return values


def single_round_price(m: MoveSet, f, side: str = UPPER, family: Optional[SimplexFamily] = None) -> SingleRoundPrice:
    """Best risk-neutral expectation of ``f`` (one value per move) over the simplex family."""
    _check_side(side)
    values = _values_on_moves(m, f)
    family = family if family is not None else enumerate_simplexes(m)
    expect = _expectations(family, values)
    k = int(_pick(expect, side))
    best = float(expect[k])
    ties = tuple(int(i) for i in np.flatnonzero(np.abs(expect - best) <= EPS_TIE))
    return SingleRoundPrice(price=best, simplex=family[k].simplex, position=k, near_ties=ties)


def _refit(points: np.ndarray, values: np.ndarray, rows: np.ndarray, side: str) -> Optional[np.ndarray]:
    if not rows.any():
        return None
    system = np.hstack([np.ones((int(rows.sum()), 1)), points[rows]])
    refined, *_ = np.linalg.lstsq(system, values[rows], rcond=None)
    pred = refined[0] + points @ refined[1:]
    slack = pred - values if side == UPPER else values - pred
    return refined if slack.min() >= -1e-12 else None


def _polish(points: np.ndarray, values: np.ndarray, x: np.ndarray, measure: np.ndarray, side: str) -> np.ndarray:
    # Re-solve on the dual support, then on the near-active rows, to remove solver tolerance from alpha.
    pred = x[0] + points @ x[1:]
    slack = pred - values if side == UPPER else values - pred
    for rows in (measure > 1e-12, slack <= 1e-7):
        refined = _refit(points, values, rows, side)
        if refined is not None:
            return refined
    return x


def _lp_hedge(points: np.ndarray, values: np.ndarray, side: str) -> Tuple[np.ndarray, np.ndarray]:
    l, d = points.shape
    c = np.zeros(d + 1)
    system = np.hstack([np.ones((l, 1)), points])
    if side == UPPER:
        c[0] = 1.0
        res = linprog(c, A_ub=-system, b_ub=-values, bounds=[(None, None)] * (d + 1), method="highs")
    else:
        c[0] = -1.0
        res = linprog(c, A_ub=system, b_ub=values, bounds=[(None, None)] * (d + 1), method="highs")
    if res.status != 0:
        raise LpNumericalFailure(f"hedging LP failed: {res.message}")
    measure = np.abs(np.asarray(res.ineqlin.marginals, dtype=float))
    return _polish(points, values, np.asarray(res.x, dtype=float), measure, side), measure


def superreplicating_strategy(m: MoveSet, f, side: str = UPPER) -> SingleRoundHedge:
    """
    Cheapest (alpha, M) with alpha + M.a >= f(a) on every move a.

    The LP dual is returned as ``measure``: an optimal risk-neutral measure.
    With ``side="lower"`` the hedge subreplicates instead.
    """
    _check_side(side)
    values = _values_on_moves(m, f)
    x, measure = _lp_hedge(m.array, values, side)
    return SingleRoundHedge(alpha=float(x[0]), holdings=x[1:], measure=measure)


# === Backward induction ===

@dataclass(frozen=True, eq=False)
class ValueTable:
    values: Tuple[np.ndarray, ...]
    chosen: Tuple[np.ndarray, ...]


@dataclass(frozen=True, eq=False)
class Strategy:
    side: str
    lattice: StateLattice
    alpha: Tuple[np.ndarray, ...]
    holdings: Tuple[np.ndarray, ...]

    @property
    def n_rounds(self) -> int:
        return len(self.alpha)

    @property
    def initial_capital(self) -> float:
        return float(self.alpha[0][0])

    def bump(self, delta: float) -> "Strategy":
        alpha = (self.alpha[0] + delta,) + self.alpha[1:]
        return replace(self, alpha=alpha)


@dataclass(frozen=True, eq=False)
class InductionResult:
    value: float
    side: str
    table: ValueTable
    strategy: Optional[Strategy]
    fast_path_used: bool
    fast_nodes: int
    searched_nodes: int
    near_ties: Tuple[Tuple[int, int, Tuple[int, ...]], ...]
    layer_structure: Tuple[str, ...]
    certification_failures: Tuple[str, ...]

    @property
    def root_simplex(self) -> int:
        return int(self.table.chosen[0][0]) if self.table.chosen else -1

    @property
    def near_tie_nodes(self) -> int:
        return len(self.near_ties)


@dataclass
class _FastPath:
    corner_index: np.ndarray
    chain_position: int
    minus_position: Optional[int]
    d: int


def _prepare_fast_path(m: MoveSet, family: SimplexFamily) -> Optional[_FastPath]:
    if not m.is_lattice_binomial:
        return None
    emb = CubeEmbedding.from_move_set(m)
    minus = family.position(chi_minus(emb, m)) if m.dim == 2 else None
    return _FastPath(
        corner_index=emb.move_indices(m),
        chain_position=family.position(chi_L(emb, m)),
        minus_position=minus,
        d=m.dim,
    )


def _fixed_simplexes(fast: _FastPath, is_sub: np.ndarray, is_super: np.ndarray, side: str) -> np.ndarray:
    # Upper: supermodular -> chain, submodular (d = 2) -> negative correlation.
    # Lower mirrors it through f -> -f.
    chain_ok, minus_ok = (is_super, is_sub) if side == UPPER else (is_sub, is_super)
    fixed = np.full(len(is_sub), -1, dtype=np.intp)
    if fast.minus_position is not None:
        fixed[minus_ok] = fast.minus_position
    fixed[chain_ok] = fast.chain_position
    return fixed


def _certify(declared: Optional[str], is_sub: np.ndarray, is_super: np.ndarray, layer: int) -> Optional[str]:
    if declared is None:
        return None
    holds = {SUBMODULAR: is_sub, SUPERMODULAR: is_super, MODULAR: is_sub & is_super}[declared]
    if np.all(holds):
        return None
    bad = int((~holds).sum())
    return str(StructureCertificationFailed(f"declared {declared} structure fails on {bad} cell(s) of layer {layer}; those cells use the full search"))


def _layer_hedge(
    family: SimplexFamily,
    points: np.ndarray,
    next_values: np.ndarray,
    node_values: np.ndarray,
    chosen: np.ndarray,
    side: str,
) -> np.ndarray:
    """(alpha, M) per node from the tight system of the chosen simplex, repaired where infeasible."""
    n_nodes, _ = next_values.shape
    d = points.shape[1]
    systems = np.concatenate([np.ones((len(family), d + 1, 1)), points[family.vertex_array]], axis=2)
    inverses = np.linalg.inv(systems)
    vertex_values = np.take_along_axis(next_values, family.vertex_array[chosen], axis=1)
    x = np.einsum("nij,nj->ni", inverses[chosen], vertex_values)

    def slack_of(sol: np.ndarray, v: np.ndarray) -> np.ndarray:
        pred = sol[..., :1] + sol[..., 1:] @ points.T
        return pred - v if side == UPPER else v - pred

    bad = np.flatnonzero(slack_of(x, next_values).min(axis=1) < -EPS_LP)
    lp_nodes = 0
    for i in bad:
        v = next_values[i]
        expect = _expectations(family, v)
        repaired = None
        for k in np.flatnonzero(np.abs(expect - node_values[i]) <= EPS_TIE * (1.0 + abs(node_values[i]))):
            cand = inverses[k] @ v[family.vertex_array[k]]
            if slack_of(cand, v).min() >= -EPS_LP:
                repaired = cand
                break
        if repaired is None:
            repaired, _ = _lp_hedge(points, v, side)
            lp_nodes += 1
        x[i] = repaired
    if lp_nodes:
        logger.info("strategy extraction fell back to the LP on %d node(s)", lp_nodes)
    return x


def backward_induction(
    m: MoveSet,
    p: Payoff,
    N: int,
    side: str = UPPER,
    fast_path: str = FAST_AUTO,
    family: Optional[SimplexFamily] = None,
    lattice: Optional[StateLattice] = None,
    with_strategy: bool = True,
) -> InductionResult:
    """
    N-round hedging price of the European payoff ``p``.

    Args:
        m: validated move set.
        p: payoff evaluated at the terminal sums (with its own scaling).
        N: number of rounds.
        side: "upper" or "lower".
        fast_path: "auto" uses certified chain simplexes on lattice-binomial sets; "off" always searches.
        family: precomputed simplex family of ``m``.
        lattice: precomputed lattice of at least N rounds.
        with_strategy: also extract the per-node hedge.

    Returns:
        InductionResult with the price, value table, strategy and the fast-path trace.
    """
    _check_side(side)
    if N < 1:
        raise BadParams("backward induction needs N >= 1")
    if fast_path not in (FAST_AUTO, FAST_OFF):
        raise BadParams(f"fast_path must be 'auto' or 'off', got {fast_path!r}")
    family = family if family is not None else enumerate_simplexes(m)
    lattice = lattice.prefix(N) if lattice is not None else StateLattice.build(m, N)
    fast = _prepare_fast_path(m, family) if fast_path == FAST_AUTO else None
    declared = p.declared_modularity

    values: List[np.ndarray] = [None] * (N + 1)
    chosen: List[np.ndarray] = [None] * N
    hedges: List[np.ndarray] = [None] * N
    values[N] = np.asarray(evaluate(p, lattice.states(N), N), dtype=float)
    layer_structure: List[str] = [""] * N
    failures: List[str] = []
    fast_nodes = searched_nodes = 0
    # (layer, node, tied family positions) wherever the search optimum is not unique.
    near_ties: List[Tuple[int, int, Tuple[int, ...]]] = []

    for n in range(N - 1, -1, -1):
        nxt = values[n + 1][lattice.children[n]]
        fixed = np.full(len(nxt), -1, dtype=np.intp)
        if fast is not None:
            is_sub, is_super = modularity_flags(nxt[:, fast.corner_index])
            layer_structure[n] = label_of(bool(is_sub.all()), bool(is_super.all()))
            msg = _certify(declared, is_sub, is_super, n)
            if msg:
                failures.append(msg)
                logger.warning(msg)
            fixed = _fixed_simplexes(fast, is_sub, is_super, side)

        layer_values = np.empty(len(nxt))
        use_fixed = fixed >= 0
        if use_fixed.any():
            k = fixed[use_fixed]
            vertex_values = np.take_along_axis(nxt[use_fixed], family.vertex_array[k], axis=1)
            layer_values[use_fixed] = np.einsum("nj,nj->n", vertex_values, family.prob_array[k])
        search = ~use_fixed
        if search.any():
            expect = _expectations(family, nxt[search])
            picked = _pick(expect, side)
            best = np.take_along_axis(expect, picked[:, None], axis=1)[:, 0]
            layer_values[search] = best
            fixed[search] = picked
            tied = np.abs(expect - best[:, None]) <= EPS_TIE
            nodes = np.flatnonzero(search)
            for r in np.flatnonzero(tied.sum(axis=1) > 1):
                near_ties.append((n, int(nodes[r]), tuple(int(k) for k in np.flatnonzero(tied[r]))))
        fast_nodes += int(use_fixed.sum())
        searched_nodes += int(search.sum())
        values[n] = layer_values
        chosen[n] = fixed
        if with_strategy:
            hedges[n] = _layer_hedge(family, m.array, nxt, layer_values, fixed, side)

    strategy = None
    if with_strategy:
        strategy = Strategy(
            side=side,
            lattice=lattice,
            alpha=tuple(h[:, 0] for h in hedges),
            holdings=tuple(h[:, 1:] for h in hedges),
        )
    return InductionResult(
        value=float(values[0][0]),
        side=side,
        table=ValueTable(values=tuple(values), chosen=tuple(chosen)),
        strategy=strategy,
        fast_path_used=fast_nodes > 0,
        fast_nodes=fast_nodes,
        searched_nodes=searched_nodes,
        near_ties=tuple(near_ties),
        layer_structure=tuple(layer_structure),
        certification_failures=tuple(failures),
    )


@dataclass
class PriceReport:
    upper: float
    lower: float
    fast_path_used: bool
    n_rounds: int
    upper_root_simplex: Tuple[int, ...] = ()
    lower_root_simplex: Tuple[int, ...] = ()
    near_tie_nodes: int = 0
    layer_structure: Dict[str, List[str]] = field(default_factory=dict)
    certification_failures: List[str] = field(default_factory=list)
    per_round: Optional[List[Dict[str, Any]]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "upper": self.upper,
            "lower": self.lower,
            "n_rounds": self.n_rounds,
            "fast_path_used": self.fast_path_used,
            "upper_root_simplex": list(self.upper_root_simplex),
            "lower_root_simplex": list(self.lower_root_simplex),
            "near_tie_nodes": self.near_tie_nodes,
            "layer_structure": self.layer_structure,
            "certification_failures": self.certification_failures,
            "per_round": self.per_round,
        }


def price(m: MoveSet, p: Payoff, N: int, fast_path: str = FAST_AUTO, with_strategy: bool = False) -> PriceReport:
    """Upper and lower prices of ``p`` in one report."""
    family = enumerate_simplexes(m)
    lattice = StateLattice.build(m, N)
    up = backward_induction(m, p, N, UPPER, fast_path, family, lattice, with_strategy)
    lo = backward_induction(m, p, N, LOWER, fast_path, family, lattice, with_strategy)
    return PriceReport(
        upper=up.value,
        lower=lo.value,
        fast_path_used=up.fast_path_used or lo.fast_path_used,
        n_rounds=N,
        upper_root_simplex=family[up.root_simplex].simplex.vertex_indices,
        lower_root_simplex=family[lo.root_simplex].simplex.vertex_indices,
        near_tie_nodes=up.near_tie_nodes + lo.near_tie_nodes,
        layer_structure={UPPER: list(up.layer_structure), LOWER: list(lo.layer_structure)},
        certification_failures=list(up.certification_failures + lo.certification_failures),
    )


def convergence_series(m: MoveSet, p: Payoff, n_values: Sequence[int], fast_path: str = FAST_AUTO) -> List[Dict[str, Any]]:
    """Upper and lower price for every N, reusing one lattice."""
    if not n_values:
        raise BadParams("the convergence series needs at least one N")
    family = enumerate_simplexes(m)
    lattice = StateLattice.build(m, max(n_values))
    rows = []
    for N in n_values:
        up = backward_induction(m, p, N, UPPER, fast_path, family, lattice, with_strategy=False)
        lo = backward_induction(m, p, N, LOWER, fast_path, family, lattice, with_strategy=False)
        rows.append({"N": N, "upper": up.value, "lower": lo.value, "fast_path_used": up.fast_path_used or lo.fast_path_used})
        logger.debug("N=%d upper=%.10f lower=%.10f", N, up.value, lo.value)
    return rows


# === Verification ===

def verify_superreplication(s: Strategy, p: Payoff, N: int) -> float:
    """Worst slack of the strategy over every path (>= -eps_lp means it hedges)."""
    if N != s.n_rounds:
        raise BadParams(f"strategy covers {s.n_rounds} rounds, not {N}")
    lattice = s.lattice
    moves = lattice.move_set.array
    l = len(moves)
    if l ** N > MAX_VERIFY_PATHS:
        raise BadParams(f"{l}^{N} paths exceed the exhaustive verification limit {MAX_VERIFY_PATHS}")
    node = np.zeros(1, dtype=np.intp)
    capital = np.array([s.alpha[0][0]])
    for n in range(N):
        gains = s.holdings[n][node] @ moves.T
        capital = (capital[:, None] + gains).ravel()
        node = lattice.children[n][node].ravel()
    payoff = np.asarray(evaluate(p, lattice.states(N)[node], N), dtype=float)
    slack = capital - payoff if s.side == UPPER else payoff - capital
    return float(slack.min())


# === Reductions ===

def _block_projection(m: MoveSet, blocks: Sequence[Sequence[int]]) -> List[MoveSet]:
    projections = []
    for b in blocks:
        seen = []
        for pt in m.points:
            key = tuple(pt[k] for k in b)
            if key not in seen:
                seen.append(key)
        projections.append(seen)
    if math.prod(len(x) for x in projections) != len(m):
        raise NotProductAcrossBlocks("the move set is not a direct product across the partition blocks")
    points = set(m.points)
    for combo in product(*projections):
        pt = [None] * m.dim
        for b, part in zip(blocks, combo):
            for k, v in zip(b, part):
                pt[k] = v
        if tuple(pt) not in points:
            raise NotProductAcrossBlocks("the move set is not a direct product across the partition blocks")
    return [build_move_set(x) for x in projections]


def separable_price(
    m: MoveSet,
    partition: Union[SeparablePartition, Payoff],
    N: int,
    side: str = UPPER,
    scaling: Optional[str] = None,
) -> float:
    """Sum of the block prices of a separable payoff."""
    _check_side(side)
    if isinstance(partition, Payoff):
        scaling = scaling or partition.scaling
        partition = separable_decompose(partition)
    scaling = scaling or "none"
    block_sets = _block_projection(m, partition.blocks)
    total = 0.0
    for bm, comp in zip(block_sets, partition.components):
        total += backward_induction(bm, comp.with_scaling(scaling), N, side, with_strategy=False).value
    return total


def _check_convex(m: MoveSet, p: Payoff, N: int, samples: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    lo = N * m.array.min(axis=0)
    hi = N * m.array.max(axis=0)
    a = rng.uniform(lo, hi, size=(samples, m.dim))
    b = rng.uniform(lo, hi, size=(samples, m.dim))
    fa, fb, fmid = (np.asarray(evaluate(p, x, N)) for x in (a, b, 0.5 * (a + b)))
    excess = fmid - 0.5 * (fa + fb)
    if np.any(excess > 1e-9 * (1.0 + np.abs(fa) + np.abs(fb))):
        k = int(np.argmax(excess))
        raise ConvexityCheckFailed(f"payoff {p.kind} is not convex between {a[k].tolist()} and {b[k].tolist()}")


def convex_reduction(m: MoveSet, p: Payoff, N: int, side: str = UPPER, samples: int = 256, seed: int = 0) -> float:
    """
    Upper price of a convex payoff computed on the hull vertices of the move set.

    With ``side="lower"`` the payoff must be concave: its lower price is
    minus the upper price of the convex -p.
    """
    _check_side(side)
    if side == LOWER:
        return -convex_reduction(m, p.negated(), N, UPPER, samples, seed)
    if CONVEX not in p.structure:
        logger.info("payoff %s is not declared convex; relying on midpoint sampling", p.kind)
    _check_convex(m, p, N, samples, seed)
    return backward_induction(hull_vertices(m), p, N, UPPER, with_strategy=False).value


# === Correlation completion ===

def boyle_measure(rho: float, m: MoveSet) -> np.ndarray:
    """Probabilities on a {-c, c}^2 move set with zero means and correlation ``rho``."""
    if m.dim != 2 or not m.is_lattice_binomial:
        raise BadParams("correlation pricing needs a two-asset binomial move set")
    lows = [a[0] for a in m.axes]
    highs = [a[1] for a in m.axes]
    if any(lo != -hi for lo, hi in zip(lows, highs)) or highs[0] != highs[1]:
        raise BadParams("correlation pricing needs the symmetric move set {-c, c}^2")
    c = float(highs[0])
    x = m.array / c
    basis = np.vstack([np.ones(len(m)), x[:, 0], x[:, 1], x[:, 0] * x[:, 1]])
    probs = np.linalg.solve(basis, np.array([1.0, 0.0, 0.0, rho]))
    if np.any(probs < -1e-12):
        raise NegativeProbability(f"correlation {rho} gives negative probabilities {probs.tolist()}")
    return np.clip(probs, 0.0, None)


def boyle_price(rho: float, p: Payoff, N: int, m: Optional[MoveSet] = None, lattice: Optional[StateLattice] = None) -> float:
    """Expectation of ``p`` under the i.i.d. product of the correlation-``rho`` measure."""
    m = m if m is not None else move_set_preset("chi1")
    probs = boyle_measure(rho, m)
    lattice = lattice.prefix(N) if lattice is not None else StateLattice.build(m, N)
    values = np.asarray(evaluate(p, lattice.states(N), N), dtype=float)
    for n in range(N - 1, -1, -1):
        values = values[lattice.children[n]] @ probs
    return float(values[0])


def boyle_sweep(rhos: Sequence[float], p: Payoff, N: int, m: Optional[MoveSet] = None) -> List[Dict[str, float]]:
    m = m if m is not None else move_set_preset("chi1")
    lattice = StateLattice.build(m, N)
    return [{"rho": float(r), "price": boyle_price(r, p, N, m, lattice)} for r in rhos]
