"""
Move sets, the simplex family and risk-neutral vertex measures.

A move set is the finite set of per-round price-change vectors Market may
announce. Every geometric predicate (affine rank, origin containment, hull
membership) is decided in exact rational arithmetic; floats only appear in
the probability vectors and covariance matrices handed to pricing.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product
from math import comb
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from .errors import (
    BadParams,
    DimensionDeficient,
    NotContaining,
    OriginNotInterior,
    SingularSystem,
    TooFewPoints,
)
from .utils.rational import (
    Rational,
    affine_rank,
    barycentric,
    common_denominator,
    dot,
    format_fraction,
    hyperplane_normal,
    to_fraction_vector,
)

logger = logging.getLogger(__name__)

Point = Tuple[Fraction, ...]

PRESETS: Dict[str, List[List[int]]] = {
    "chi1": [[1, 1], [1, -1], [-1, 1], [-1, -1]],
    "chi2": [[1, 0], [-1, 0], [0, 1], [0, -1]],
    "three_asset": [list(p) for p in product((-1, 2), (-2, 1), (-1, 1))],
}


@dataclass(frozen=True)
class MoveSet:
    """Validated move set; build it with ``build_move_set``."""

    points: Tuple[Point, ...]
    dim: int
    axes: Optional[Tuple[Tuple[Fraction, ...], ...]] = None
    contains_origin: bool = False

    def __len__(self) -> int:
        return len(self.points)

    @property
    def is_product(self) -> bool:
        return self.axes is not None

    @property
    def is_lattice_binomial(self) -> bool:
        return self.axes is not None and all(len(a) == 2 for a in self.axes)

    @cached_property
    def array(self) -> np.ndarray:
        return np.array([[float(c) for c in p] for p in self.points], dtype=float)

    @cached_property
    def scale(self) -> int:
        """Common denominator of every coordinate."""
        return common_denominator(c for p in self.points for c in p)

    @cached_property
    def integer_points(self) -> np.ndarray:
        s = self.scale
        return np.array([[int(c * s) for c in p] for p in self.points], dtype=np.int64)

    def index_of(self, point: Sequence[Rational]) -> int:
        key = to_fraction_vector(point)
        try:
            return self.points.index(key)
        except ValueError:
            raise KeyError(f"{point!r} is not a move of this set") from None

    def canonical(self) -> "MoveSet":
        """Same move set with points in lexicographic order."""
        return build_move_set(sorted(self.points))

    def to_json(self) -> List[List[str]]:
        return [[format_fraction(c) for c in p] for p in self.points]


@dataclass(frozen=True)
class Simplex:
    vertex_indices: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class RiskNeutralVertex:
    simplex: Simplex
    p_exact: Tuple[Fraction, ...]
    p: np.ndarray
    sigma: np.ndarray

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(i for i, w in zip(self.simplex.vertex_indices, self.p_exact) if w != 0)

    def measure_key(self) -> Tuple[Tuple[int, Fraction], ...]:
        return tuple((i, w) for i, w in zip(self.simplex.vertex_indices, self.p_exact) if w != 0)


@dataclass(frozen=True, eq=False)
class SimplexFamily:
    move_set: MoveSet
    simplexes: Tuple[RiskNeutralVertex, ...]

    def __len__(self) -> int:
        return len(self.simplexes)

    def __iter__(self) -> Iterator[RiskNeutralVertex]:
        return iter(self.simplexes)

    def __getitem__(self, k: int) -> RiskNeutralVertex:
        return self.simplexes[k]

    @cached_property
    def vertex_array(self) -> np.ndarray:
        """(|Gamma|, d+1) move indices."""
        return np.array([v.simplex.vertex_indices for v in self.simplexes], dtype=np.intp)

    @cached_property
    def prob_array(self) -> np.ndarray:
        return np.array([v.p for v in self.simplexes], dtype=float)

    def position(self, simplex: Simplex) -> int:
        for k, v in enumerate(self.simplexes):
            if v.simplex == simplex:
                return k
        raise KeyError(f"{simplex} is not in the family")

    def distinct_measures(self) -> List[List[int]]:
        """Positions grouped by the measure they carry (boundary simplexes collapse)."""
        groups: Dict[Tuple, List[int]] = {}
        for k, v in enumerate(self.simplexes):
            groups.setdefault(v.measure_key(), []).append(k)
        return list(groups.values())


def parse_points(raw: Sequence[Sequence[Rational]]) -> List[Point]:
    return [to_fraction_vector(p) for p in raw]


def _origin_interior(points: Sequence[Point], d: int) -> bool:
    # The cone spanned by the moves is all of R^d unless some hyperplane
    # through the origin spanned by d-1 moves keeps every move on one side.
    zero = (Fraction(0),) * d
    nonzero = [p for p in points if p != zero]
    for subset in combinations(nonzero, d - 1):
        normal = hyperplane_normal(subset, d)
        if all(c == 0 for c in normal):
            continue
        signs = [dot(normal, p) for p in nonzero]
        if not any(s > 0 for s in signs) or not any(s < 0 for s in signs):
            return False
    return True


def _detect_axes(points: Sequence[Point], d: int) -> Optional[Tuple[Tuple[Fraction, ...], ...]]:
    axes = tuple(tuple(sorted({p[k] for p in points})) for k in range(d))
    expected = 1
    for a in axes:
        expected *= len(a)
    if expected != len(points):
        return None
    if set(product(*axes)) != set(points):
        return None
    return axes


def build_move_set(points: Sequence[Sequence[Rational]]) -> MoveSet:
    """
    Validate a list of rational price-change vectors.

    Raises:
        TooFewPoints: fewer than d+1 moves.
        DimensionDeficient: the hull is lower dimensional.
        OriginNotInterior: the origin is not an interior point of the hull.
    """
    if not points:
        raise TooFewPoints("a move set needs at least one point")
    pts = parse_points(points)
    d = len(pts[0])
    if d == 0 or any(len(p) != d for p in pts):
        raise BadParams("all moves must share one positive dimension")
    if len(set(pts)) != len(pts):
        raise BadParams("duplicate moves in the move set")
    if len(pts) < d + 1:
        raise TooFewPoints(f"{len(pts)} moves cannot span dimension {d}; need at least {d + 1}")
    if affine_rank(pts) != d:
        raise DimensionDeficient(f"hull of the moves has dimension {affine_rank(pts)} < {d}")
    if not _origin_interior(pts, d):
        raise OriginNotInterior("the origin must lie in the interior of the hull of the moves")
    zero = (Fraction(0),) * d
    has_zero = zero in pts
    if has_zero:
        logger.warning("move set contains the zero move; large-N limits assume it does not")
    return MoveSet(points=tuple(pts), dim=d, axes=_detect_axes(pts, d), contains_origin=has_zero)


def move_set_preset(name: str) -> MoveSet:
    try:
        return build_move_set(PRESETS[name])
    except KeyError:
        raise BadParams(f"unknown move-set preset {name!r}; choose from {sorted(PRESETS)}") from None


def risk_neutral_vertex(m: MoveSet, s: Simplex) -> RiskNeutralVertex:
    """
    Zero-mean probability vector on the simplex and its covariance.

    Raises:
        SingularSystem: the vertices are affinely dependent.
        NotContaining: the origin lies outside their hull.
    """
    verts = [m.points[i] for i in s.vertex_indices]
    p = barycentric(verts, (Fraction(0),) * m.dim)
    if p is None:
        raise SingularSystem(f"vertices {s.vertex_indices} are affinely dependent")
    if any(w < 0 for w in p):
        raise NotContaining(f"origin lies outside the hull of {s.vertex_indices}")
    d = m.dim
    sigma = [[sum((w * v[i] * v[j] for w, v in zip(p, verts)), Fraction(0)) for j in range(d)] for i in range(d)]
    return RiskNeutralVertex(
        simplex=s,
        p_exact=tuple(p),
        p=np.array([float(w) for w in p]),
        sigma=np.array([[float(x) for x in row] for row in sigma]),
    )


def enumerate_simplexes(m: MoveSet) -> SimplexFamily:
    """All (d+1)-subsets of the moves that are full dimensional and contain the origin."""
    found: List[RiskNeutralVertex] = []
    for combo in combinations(range(len(m)), m.dim + 1):
        try:
            found.append(risk_neutral_vertex(m, Simplex(combo)))
        except (SingularSystem, NotContaining):
            continue
    logger.debug("enumerated %d simplexes out of %d subsets", len(found), comb(len(m), m.dim + 1))
    return SimplexFamily(move_set=m, simplexes=tuple(found))


def _in_hull_by_enumeration(others: Sequence[Point], target: Point, d: int) -> bool:
    for k in range(1, min(d + 1, len(others)) + 1):
        for subset in combinations(others, k):
            w = barycentric(subset, target)
            if w is not None and all(x >= 0 for x in w):
                return True
    return False


def _in_hull(others: Sequence[Point], target: Point, d: int) -> bool:
    # Float LP proposes, exact arithmetic certifies; enumeration settles the rest.
    arr = np.array([[float(c) for c in p] for p in others])
    tgt = np.array([float(c) for c in target])
    a_eq = np.vstack([np.ones(len(others)), arr.T])
    b_eq = np.concatenate([[1.0], tgt])
    res = linprog(np.zeros(len(others)), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 0:
        support = [others[i] for i in np.flatnonzero(res.x > 1e-12)]
        w = barycentric(support, target) if support else None
        if w is not None and all(x >= 0 for x in w):
            return True
    elif res.status == 2:
        # Separating direction: maximize t with v.(target - a) >= t, |v| <= 1.
        c = np.zeros(d + 1)
        c[-1] = -1.0
        a_ub = np.hstack([arr - tgt, np.ones((len(others), 1))])
        sep = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(others)), bounds=[(-1, 1)] * d + [(None, 1)], method="highs")
        if sep.status == 0 and -sep.fun > 0:
            v = [Fraction(float(x)).limit_denominator(10**6) for x in sep.x[:d]]
            if all(dot(v, [t - a for t, a in zip(target, p)]) > 0 for p in others):
                return False
    return _in_hull_by_enumeration(others, target, d)


def hull_vertices(m: MoveSet) -> MoveSet:
    """Extreme points of conv(m), in their original order."""
    keep = []
    for i, p in enumerate(m.points):
        others = m.points[:i] + m.points[i + 1:]
        if not _in_hull(others, p, m.dim):
            keep.append(p)
    return build_move_set(keep)
