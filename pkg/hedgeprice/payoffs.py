"""
European payoff catalog.

Evaluators take an (n, d) array of terminal sums and return n values. A
payoff optionally carries the structure proved for its kind; pricing only
relies on that structure after certifying it on every lattice cell it
touches.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import BadParams, EvaluationFailure, NotSeparable, ValidationFailed
from .submodular import MODULAR, SUBMODULAR, SUPERMODULAR

logger = logging.getLogger(__name__)

SCALING_NONE = "none"
SCALING_SQRT_N = "sqrt_n"
SCALINGS = (SCALING_NONE, SCALING_SQRT_N)

CONVEX = "convex"
SEPARABLE = "separable"
STRUCTURES = frozenset({SUBMODULAR, SUPERMODULAR, MODULAR, CONVEX, SEPARABLE})

RawFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class SeparablePartition:
    blocks: Tuple[Tuple[int, ...], ...]
    components: Tuple["Payoff", ...]

    def __post_init__(self) -> None:
        if len(self.blocks) != len(self.components):
            raise BadParams("one component payoff is needed per block")
        flat = [k for b in self.blocks for k in b]
        if any(len(b) == 0 for b in self.blocks) or len(set(flat)) != len(flat):
            raise BadParams("partition blocks must be nonempty and disjoint")
        if sorted(flat) != list(range(len(flat))):
            raise BadParams(f"partition blocks must cover coordinates 0..{len(flat) - 1}")

    @property
    def d(self) -> int:
        return sum(len(b) for b in self.blocks)

    def evaluate(self, S: np.ndarray) -> np.ndarray:
        S = np.atleast_2d(S)
        return sum(c.fn(S[:, list(b)]) for b, c in zip(self.blocks, self.components))


@dataclass(frozen=True, eq=False)
class Payoff:
    kind: str
    fn: RawFn
    params: Dict[str, Any] = field(default_factory=dict)
    scaling: str = SCALING_NONE
    structure: FrozenSet[str] = frozenset()
    partition: Optional[SeparablePartition] = None
    dim: Optional[int] = None

    def __call__(self, S, N: Optional[int] = None):
        return evaluate(self, S, N)

    @property
    def declared_modularity(self) -> Optional[str]:
        if MODULAR in self.structure:
            return MODULAR
        if SUBMODULAR in self.structure:
            return SUBMODULAR
        if SUPERMODULAR in self.structure:
            return SUPERMODULAR
        return None

    def with_scaling(self, scaling: str) -> "Payoff":
        if scaling not in SCALINGS:
            raise BadParams(f"scaling must be one of {SCALINGS}")
        return replace(self, scaling=scaling)

    def negated(self) -> "Payoff":
        flipped = {SUBMODULAR: SUPERMODULAR, SUPERMODULAR: SUBMODULAR}
        structure = frozenset(flipped.get(s, s) for s in self.structure if s != CONVEX)
        partition = None
        if self.partition is not None:
            partition = SeparablePartition(self.partition.blocks, tuple(c.negated() for c in self.partition.components))
        fn = self.fn
        return replace(self, kind=f"-{self.kind}", fn=lambda S: -fn(S), structure=structure, partition=partition)

    def shifted(self, c: float) -> "Payoff":
        fn = self.fn
        return replace(self, kind=f"{self.kind}+c", fn=lambda S: fn(S) + c, partition=None,
                       structure=self.structure - {SEPARABLE})

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "params": self.params,
            "scaling": self.scaling,
            "declared_structure": sorted(self.structure),
        }


def evaluate(p: Payoff, S, N: Optional[int] = None):
    """F(S), or F(S / sqrt(N)) under the sqrt_n scaling."""
    arr = np.asarray(S, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if p.scaling == SCALING_SQRT_N:
        if N is None or N < 1:
            raise BadParams("sqrt_n scaling needs a round count N >= 1")
        arr = arr / math.sqrt(N)
    out = np.asarray(p.fn(arr), dtype=float)
    if not np.all(np.isfinite(out)):
        raise EvaluationFailure(f"payoff {p.kind} produced non-finite values")
    return float(out[0]) if single else out


# === Catalog ===

def _real(params: Dict[str, Any], key: str, default: Optional[float] = None) -> float:
    val = params.get(key, default)
    if val is None:
        raise BadParams(f"missing parameter {key!r}")
    try:
        val = float(val)
    except (TypeError, ValueError):
        raise BadParams(f"parameter {key!r} must be a real number") from None
    if not math.isfinite(val):
        raise BadParams(f"parameter {key!r} must be finite")
    return val


def _vector(params: Dict[str, Any], key: str) -> np.ndarray:
    val = params.get(key)
    if val is None:
        raise BadParams(f"missing parameter {key!r}")
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError):
        raise BadParams(f"parameter {key!r} must be numeric") from None
    if not np.all(np.isfinite(arr)):
        raise BadParams(f"parameter {key!r} must be finite")
    return arr


def _max_option(params):
    K = _real(params, "K", 0.0)
    return (lambda S: np.maximum(S.max(axis=1) - K, 0.0)), {SUBMODULAR, CONVEX}, None, None


def _min_option(params):
    K = _real(params, "K", 0.0)
    return (lambda S: np.maximum(S.min(axis=1) - K, 0.0)), {SUPERMODULAR}, None, None


def _call(params):
    K = _real(params, "K", 0.0)
    return (lambda S: np.maximum(S[:, 0] - K, 0.0)), {CONVEX, MODULAR}, None, 1


def _tent(breakpoints: Sequence[float]) -> Callable[[np.ndarray], np.ndarray]:
    a, b, c = breakpoints
    down = (c - a) / (c - b)
    back = (b - a) / (c - b)
    return lambda x: np.maximum(x - a, 0.0) - down * np.maximum(x - b, 0.0) + back * np.maximum(x - c, 0.0)


def _breakpoints(params) -> Tuple[float, float, float]:
    bp = _vector({"breakpoints": params.get("breakpoints", [-0.5, 0.5, 1.5])}, "breakpoints")
    if bp.shape != (3,) or not (bp[0] < bp[1] < bp[2]):
        raise BadParams("butterfly breakpoints must be three increasing numbers")
    return tuple(float(x) for x in bp)


def _butterfly(params):
    g = _tent(_breakpoints(params))
    return (lambda S: g(S[:, 0])), {MODULAR}, None, 1


def _double_butterfly(params):
    bp = _breakpoints(params)
    g = _tent(bp)
    component = make_payoff("butterfly", {"breakpoints": list(bp)})
    partition = SeparablePartition(blocks=((0,), (1,)), components=(component, component))
    return (lambda S: g(S[:, 0]) + g(S[:, 1])), {SEPARABLE, MODULAR}, partition, 2


def _cone(params):
    center = _real(params, "center", 0.5)
    height = _real(params, "height", 1.0)
    if height <= 0:
        raise BadParams("cone height must be positive")
    # Ridge rising from S1 = center - height + |S2| to its peak at (center, 0).
    return (lambda S: np.maximum(height - np.abs(S[:, 0] - center) - np.abs(S[:, 1]), 0.0)), set(), None, 2


def _linear(params):
    w = _vector(params, "weights")
    offset = _real(params, "offset", 0.0)
    return (lambda S: S @ w + offset), {MODULAR, CONVEX}, None, len(w)


def _quadratic(params):
    q = _vector(params, "matrix")
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise BadParams("quadratic payoff needs a square matrix")
    q = 0.5 * (q + q.T)
    structure = set()
    off = q[~np.eye(len(q), dtype=bool)]
    if np.all(off >= 0):
        structure.add(SUPERMODULAR)
    if np.all(off <= 0):
        structure.add(SUBMODULAR)
    if np.all(np.linalg.eigvalsh(q) >= -1e-12):
        structure.add(CONVEX)
    return (lambda S: np.einsum("ni,ij,nj->n", S, q, S)), structure, None, len(q)


def _abs_sum(params):
    d = int(params.get("d", 2))
    if d < 1:
        raise BadParams("abs_sum needs d >= 1")
    partition = None
    if d > 1:
        one = make_payoff("abs_sum", {"d": 1})
        partition = SeparablePartition(blocks=tuple((k,) for k in range(d)), components=(one,) * d)
    return (lambda S: np.abs(S).sum(axis=1)), {CONVEX, SEPARABLE, MODULAR}, partition, d


def _ridge(params):
    w = _vector(params, "weights")
    K = _real(params, "K", 0.0)
    c = _real(params, "scale", 1.0)
    products = [w[i] * w[j] for i in range(len(w)) for j in range(i + 1, len(w))]
    structure = set()
    if all(x >= 0 for x in products):
        structure.add(SUPERMODULAR if c >= 0 else SUBMODULAR)
    if all(x <= 0 for x in products):
        structure.add(SUBMODULAR if c >= 0 else SUPERMODULAR)
    if c >= 0:
        structure.add(CONVEX)
    return (lambda S: c * np.maximum(S @ w - K, 0.0)), structure, None, len(w)


def _components(params) -> List["Payoff"]:
    raw = params.get("components")
    if not raw:
        raise BadParams("missing parameter 'components'")
    out = []
    for spec in raw:
        if isinstance(spec, Payoff):
            out.append(spec)
            continue
        spec = dict(spec)
        kind = spec.pop("kind", None)
        if kind is None:
            raise BadParams("every component needs a kind")
        out.append(make_payoff(kind, spec))
    return out


def _sum(params):
    parts = _components(params)
    dims = {p.dim for p in parts if p.dim is not None}
    if len(dims) > 1:
        raise BadParams("summed payoffs must share one dimension")
    common = frozenset.intersection(*(p.structure for p in parts)) & {SUBMODULAR, SUPERMODULAR, MODULAR, CONVEX}
    fns = [p.fn for p in parts]
    return (lambda S: sum(f(S) for f in fns)), set(common), None, (dims.pop() if dims else None)


def _separable(params):
    parts = _components(params)
    blocks = params.get("blocks")
    if blocks is None:
        raise BadParams("missing parameter 'blocks'")
    partition = SeparablePartition(blocks=tuple(tuple(int(k) for k in b) for b in blocks), components=tuple(parts))
    for b, p in zip(partition.blocks, partition.components):
        if p.dim is not None and p.dim != len(b):
            raise BadParams(f"component {p.kind} has dimension {p.dim}, block {b} has {len(b)}")
    structure = {SEPARABLE}
    if all(len(b) == 1 for b in partition.blocks):
        structure.add(MODULAR)
    if all(CONVEX in p.structure for p in parts):
        structure.add(CONVEX)
    return partition.evaluate, structure, partition, partition.d


def _table(params):
    axes = params.get("axes")
    values = params.get("values")
    if axes is None or values is None:
        raise BadParams("a table payoff needs 'axes' and 'values'")
    grid = tuple(np.asarray(a, dtype=float) for a in axes)
    table = np.asarray(values, dtype=float)
    if any(np.any(np.diff(a) <= 0) for a in grid):
        raise BadParams("table axes must be strictly increasing")
    if table.shape != tuple(len(a) for a in grid):
        raise BadParams(f"table values have shape {table.shape}, axes need {tuple(len(a) for a in grid)}")
    interp = RegularGridInterpolator(grid, table, method="linear", bounds_error=False, fill_value=None)
    return (lambda S: interp(S)), set(), None, len(grid)


CATALOG: Dict[str, Callable] = {
    "max_option": _max_option,
    "min_option": _min_option,
    "call": _call,
    "butterfly": _butterfly,
    "double_butterfly": _double_butterfly,
    "cone": _cone,
    "linear": _linear,
    "quadratic": _quadratic,
    "abs_sum": _abs_sum,
    "ridge": _ridge,
    "sum": _sum,
    "separable": _separable,
    "table": _table,
}


def make_payoff(
    kind: str,
    params: Optional[Dict[str, Any]] = None,
    scaling: str = SCALING_NONE,
    declared_structure: Optional[Iterable[str]] = None,
    partition: Optional[SeparablePartition] = None,
) -> Payoff:
    """
    Build a catalog payoff.

    Args:
        kind: key of ``CATALOG``.
        params: kind parameters (strike ``K``, ``weights``, ``breakpoints``, ``components``, ...).
        scaling: "none" or "sqrt_n".
        declared_structure: replaces the catalog structure (user claim, certified during pricing).
        partition: replaces the catalog separable partition.

    Raises:
        BadParams: unknown kind or invalid parameters.
    """
    params = dict(params or {})
    if kind not in CATALOG:
        raise BadParams(f"unknown payoff kind {kind!r}; choose from {sorted(CATALOG)}")
    if scaling not in SCALINGS:
        raise BadParams(f"scaling must be one of {SCALINGS}")
    fn, structure, cat_partition, dim = CATALOG[kind](params)
    if declared_structure is not None:
        structure = set(declared_structure)
        unknown = structure - STRUCTURES
        if unknown:
            raise BadParams(f"unknown structure tags {sorted(unknown)}")
    echo = {k: (v.describe() if isinstance(v, Payoff) else v) for k, v in params.items()}
    if "components" in echo:
        echo["components"] = [c.describe() if isinstance(c, Payoff) else c for c in echo["components"]]
    return Payoff(
        kind=kind,
        fn=fn,
        params=echo,
        scaling=scaling,
        structure=frozenset(structure),
        partition=partition if partition is not None else cat_partition,
        dim=dim,
    )


def separable_decompose(p: Payoff, samples: int = 32, seed: int = 0) -> SeparablePartition:
    """
    Return the declared separable partition after spot-checking it.

    Raises:
        NotSeparable: the payoff carries no separable declaration.
        ValidationFailed: the partition disagrees with the evaluator somewhere.
    """
    if SEPARABLE not in p.structure or p.partition is None:
        raise NotSeparable(f"payoff {p.kind} is not declared separable")
    d = p.partition.d
    rng = np.random.default_rng(seed)
    S = rng.uniform(-3.0, 3.0, size=(samples, d))
    direct = np.asarray(p.fn(S), dtype=float)
    blocks = p.partition.evaluate(S)
    bad = np.abs(direct - blocks) > 1e-9 * (1.0 + np.abs(direct))
    if np.any(bad):
        k = int(np.argmax(bad))
        raise ValidationFailed(f"separable decomposition of {p.kind} disagrees at {S[k].tolist()}: {direct[k]} vs {blocks[k]}")
    return p.partition
