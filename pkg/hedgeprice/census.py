"""
Census of 0/1 simplexes of the unit hypercube.

Vertices of {0,1}^d are bitmasks (bit k is coordinate k). The census lists
every (d+1)-subset of vertices with a full-dimensional hull; the point
queries count how many of them contain a given point, exactly.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, islice, product
from math import comb, gcd
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .config import CENSUS_CHUNK, CENSUS_MAX_DIM, DEFAULT_THREADS
from .errors import BadParams, NotInHalfCube, ValidationFailed
from .utils.rational import Rational, barycentric, batched_det, common_denominator, to_fraction_vector

logger = logging.getLogger(__name__)

Vertex = Tuple[int, ...]

# Squared-edge multisets of the four tetrahedron classes of the 3-cube.
TYPE_CORNER = "corner"
TYPE_REGULAR = "regular"
TYPE_3 = "type3"
TYPE_4 = "type4"
_EDGE_TYPES: Dict[Tuple[int, ...], str] = {
    (1, 1, 1, 2, 2, 2): TYPE_CORNER,
    (2, 2, 2, 2, 2, 2): TYPE_REGULAR,
    (1, 1, 1, 2, 2, 3): TYPE_3,
    (1, 1, 2, 2, 2, 3): TYPE_4,
}

REGION_BOTH = "T1∩T2"
REGION_T1 = "T1 only"
REGION_T2 = "T2 only"
REGION_NEITHER = "neither"
REGION_BOUNDARY = "boundary"
REGION_COUNTS = {REGION_BOTH: 14, REGION_T1: 11, REGION_T2: 11, REGION_NEITHER: 8}


def _vertex_array(d: int) -> np.ndarray:
    return np.array([[mask >> k & 1 for k in range(d)] for mask in range(1 << d)], dtype=np.int64)


def _chunks(it: Iterable, size: int) -> Iterator[list]:
    it = iter(it)
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield block


def _run_chunks(fn: Callable, chunks: Iterable, threads: int) -> list:
    # Ordered map keeps the merge deterministic.
    if threads <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def _systems(vertices: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """(B, d+1, d+1) matrices whose columns are (1, z) for the subset vertices."""
    z = vertices[subsets]
    ones = np.ones(z.shape[:2] + (1,), dtype=np.int64)
    return np.transpose(np.concatenate([ones, z], axis=2), (0, 2, 1))


# === Enumeration ===

@dataclass(frozen=True, eq=False)
class CubeSimplexCensus:
    d: int
    simplexes: np.ndarray
    type_tags: Optional[Tuple[str, ...]] = None

    def __len__(self) -> int:
        return len(self.simplexes)

    def vertices(self, k: int) -> Tuple[Vertex, ...]:
        return tuple(tuple(int(m) >> j & 1 for j in range(self.d)) for m in self.simplexes[k])

    def counts_by_type(self) -> Dict[str, int]:
        if self.type_tags is None:
            return {}
        out: Dict[str, int] = {}
        for t in self.type_tags:
            out[t] = out.get(t, 0) + 1
        return out

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "count": len(self),
            "counts_by_type": self.counts_by_type(),
            "simplexes": [
                {"vertices": [list(v) for v in self.vertices(k)], "type": self.type_tags[k] if self.type_tags else None}
                for k in range(len(self))
            ],
        }


def _edge_type(vertices: np.ndarray, subset: np.ndarray) -> str:
    pts = vertices[subset]
    sq = sorted(int(((a - b) ** 2).sum()) for a, b in combinations(pts, 2))
    return _EDGE_TYPES[tuple(sq)]


_CENSUS_CACHE: Dict[int, CubeSimplexCensus] = {}


def enumerate_cube_simplexes(d: int, threads: int = DEFAULT_THREADS) -> CubeSimplexCensus:
    """All full-dimensional (d+1)-subsets of {0,1}^d, in lexicographic bitmask order."""
    if d < 1 or d > CENSUS_MAX_DIM:
        raise BadParams(f"census dimension must be in 1..{CENSUS_MAX_DIM}, got {d}")
    if d in _CENSUS_CACHE:
        return _CENSUS_CACHE[d]
    vertices = _vertex_array(d)
    total = comb(1 << d, d + 1)
    logger.debug("census d=%d: %d subsets in chunks of %d on %d thread(s)", d, total, CENSUS_CHUNK, threads)

    def full_dimensional(block: list) -> np.ndarray:
        subsets = np.array(block, dtype=np.intp)
        return subsets[batched_det(_systems(vertices, subsets)) != 0]

    parts = _run_chunks(full_dimensional, _chunks(combinations(range(1 << d), d + 1), CENSUS_CHUNK), threads)
    simplexes = np.concatenate(parts) if parts else np.zeros((0, d + 1), dtype=np.intp)
    tags = tuple(_edge_type(vertices, s) for s in simplexes) if d == 3 else None
    census = CubeSimplexCensus(d=d, simplexes=simplexes, type_tags=tags)
    _CENSUS_CACHE[d] = census
    return census


# === Point containment ===

def _integer_point(x: Sequence[Rational]) -> Tuple[int, np.ndarray]:
    fx = to_fraction_vector(x)
    if any(c < 0 or c > 1 for c in fx):
        raise BadParams(f"point {tuple(str(c) for c in fx)} is outside [0, 1]^d")
    den = common_denominator(fx)
    return den, np.array([int(c * den) for c in fx], dtype=np.int64)


def containing_simplexes(x: Sequence[Rational], census: CubeSimplexCensus, threads: int = DEFAULT_THREADS) -> np.ndarray:
    """Positions in ``census`` of the closed simplexes containing x."""
    den, num = _integer_point(x)
    if len(num) != census.d:
        raise BadParams(f"point has dimension {len(num)}, census has {census.d}")
    vertices = _vertex_array(census.d)
    rhs = np.concatenate([[den], num])
    n = census.d + 1

    def contained(block: np.ndarray) -> np.ndarray:
        base = _systems(vertices, block)
        # Cramer: x is inside iff every column swap keeps the sign of det or gives zero.
        swapped = np.repeat(base[:, None], n, axis=1)
        for j in range(n):
            swapped[:, j, :, j] = rhs
        dets = batched_det(base)
        cols = batched_det(swapped.reshape(-1, n, n)).reshape(-1, n)
        sign = np.sign(dets.astype(float))[:, None]
        return np.all(np.sign(cols.astype(float)) * sign >= 0, axis=1)

    blocks = [census.simplexes[i:i + CENSUS_CHUNK] for i in range(0, len(census), CENSUS_CHUNK)]
    hits = _run_chunks(contained, blocks, threads)
    mask = np.concatenate(hits) if hits else np.zeros(0, dtype=bool)
    return np.flatnonzero(mask)


def count_containing(x: Sequence[Rational], d: Optional[int] = None, threads: int = DEFAULT_THREADS) -> int:
    """|N(x)|: census simplexes of [0,1]^d whose closed hull contains x."""
    d = d if d is not None else len(x)
    if d != len(x):
        raise BadParams(f"point has dimension {len(x)}, asked for d={d}")
    return int(len(containing_simplexes(x, enumerate_cube_simplexes(d, threads), threads)))


# === Three-dimensional regions ===

def _normalize_plane(normal: Sequence[int], offset: int) -> Tuple[Tuple[int, ...], int]:
    g = 0
    for c in list(normal) + [offset]:
        g = gcd(g, abs(c))
    normal = [c // g for c in normal]
    offset //= g
    first = next(c for c in normal if c != 0)
    if first < 0:
        normal = [-c for c in normal]
        offset = -offset
    return tuple(normal), offset


def cutting_planes_3d() -> List[Tuple[Tuple[int, ...], int]]:
    """Planes n.z = c through three cube vertices with cube vertices strictly on both sides."""
    vertices = _vertex_array(3)
    found = []
    for a, b, c in combinations(vertices, 3):
        normal = np.cross(b - a, c - a)
        if not normal.any():
            continue
        plane = _normalize_plane([int(v) for v in normal], int(normal @ a))
        side = vertices @ np.array(plane[0]) - plane[1]
        if (side > 0).any() and (side < 0).any() and plane not in found:
            found.append(plane)
    return sorted(found)


def _t1_interior(x: Sequence[Fraction]) -> bool:
    a, b, c = x
    return -a + b + c > 0 and a - b + c > 0 and a + b - c > 0 and a + b + c < 2


def _t2_interior(x: Sequence[Fraction]) -> bool:
    a, b, c = x
    return a + b + c > 1 and a + b - c < 1 and a - b + c < 1 and -a + b + c < 1


def classify_point_3d(x: Sequence[Rational]) -> str:
    """Region of x against the two regular tetrahedra, or "boundary" on any cutting plane."""
    fx = to_fraction_vector(x)
    if len(fx) != 3:
        raise BadParams("classify_point_3d takes a point of [0, 1]^3")
    if any(c < 0 or c > 1 for c in fx):
        raise BadParams("point is outside [0, 1]^3")
    for normal, offset in cutting_planes_3d():
        if sum(n * v for n, v in zip(normal, fx)) == offset:
            return REGION_BOUNDARY
    in1, in2 = _t1_interior(fx), _t2_interior(fx)
    if in1 and in2:
        return REGION_BOTH
    if in1:
        return REGION_T1
    if in2:
        return REGION_T2
    return REGION_NEITHER


# === Lower-bound construction ===

@dataclass(frozen=True)
class ChainConstruction:
    x: Tuple[Fraction, ...]
    i_star: int
    c: Fraction
    base_chain: Tuple[Vertex, ...]
    epsilons: Tuple[Vertex, ...]
    simplexes: Tuple[Tuple[Vertex, ...], ...]


def _contains(simplex: Sequence[Vertex], x: Sequence[Fraction]) -> bool:
    w = barycentric([to_fraction_vector(v) for v in simplex], x)
    return w is not None and all(t >= 0 for t in w)


def _chain_vertex(d: int, i: int) -> Vertex:
    # e_i: coordinates i..d (1-based) are one; e_{d+1} is the zero vector.
    return tuple(1 if j >= i else 0 for j in range(1, d + 1))


def lower_bound_family(x: Sequence[Rational]) -> ChainConstruction:
    """
    2^(d-2) simplexes containing a sorted point of the half cube.

    Args:
        x: point with 0 <= x_1 <= ... <= x_d < 1/2, d >= 2.

    Returns:
        ChainConstruction whose simplexes swap the chain vertex e_{i*} for
        every epsilon with epsilon_{i*} = 1 and epsilon_{i*-1} = 0; the
        first one is the base chain itself.

    Raises:
        NotInHalfCube: x is not sorted inside [0, 1/2).
        ValidationFailed: a constructed simplex misses x.
    """
    fx = to_fraction_vector(x)
    d = len(fx)
    if d < 2:
        raise BadParams("the lower-bound construction needs d >= 2")
    if fx[0] < 0 or any(a > b for a, b in zip(fx, fx[1:])) or fx[-1] >= Fraction(1, 2):
        raise NotInHalfCube("point must satisfy 0 <= x_1 <= ... <= x_d < 1/2; normalize it first")
    gaps = [fx[0]] + [fx[i] - fx[i - 1] for i in range(1, d)]
    c = min(gaps)
    i_star = gaps.index(c) + 1
    base = tuple(_chain_vertex(d, i) for i in range(1, d + 2))

    # Free coordinates of epsilon: all but i* and i*-1 (or i* and i*+1 when i* = 1).
    fixed = {i_star - 1: 1, i_star - 2: 0} if i_star >= 2 else {0: 1, 1: 1}
    free = [k for k in range(d) if k not in fixed]
    epsilons = []
    base_eps = base[i_star - 1]
    for bits in product((0, 1), repeat=len(free)):
        z = [0] * d
        for k, v in fixed.items():
            z[k] = v
        for k, v in zip(free, bits):
            z[k] = v
        epsilons.append(tuple(z))
    epsilons.sort(key=lambda e: e != base_eps)

    simplexes = []
    for eps in epsilons:
        s = base[: i_star - 1] + (eps,) + base[i_star:]
        if not _contains(s, fx):
            raise ValidationFailed(f"simplex {s} does not contain {tuple(str(v) for v in fx)}")
        simplexes.append(s)
    return ChainConstruction(
        x=fx,
        i_star=i_star,
        c=c,
        base_chain=base,
        epsilons=tuple(epsilons),
        simplexes=tuple(simplexes),
    )


@dataclass(frozen=True)
class HalfCubeTransform:
    """y = sorted reflection of x: y[i] = r(x)[permutation[i]], r flips the ``reflected`` coordinates."""

    permutation: Tuple[int, ...]
    reflected: Tuple[bool, ...]

    def pull_back(self, vertex: Vertex) -> Vertex:
        out = [0] * len(vertex)
        for i, k in enumerate(self.permutation):
            out[k] = vertex[i]
        return tuple(1 - v if r else v for v, r in zip(out, self.reflected))


def normalize_to_half_cube(x: Sequence[Rational]) -> Tuple[Tuple[Fraction, ...], HalfCubeTransform]:
    """Map x into the sorted half cube with a cube symmetry."""
    fx = to_fraction_vector(x)
    if any(c < 0 or c > 1 for c in fx):
        raise BadParams("point is outside the unit cube")
    half = Fraction(1, 2)
    reflected = tuple(c > half for c in fx)
    r = [1 - c if f else c for c, f in zip(fx, reflected)]
    perm = tuple(sorted(range(len(r)), key=lambda k: (r[k], k)))
    y = tuple(r[k] for k in perm)
    if y and y[-1] >= half:
        raise NotInHalfCube("a coordinate equal to 1/2 has no half-cube image")
    return y, HalfCubeTransform(permutation=perm, reflected=reflected)


def lower_bound_family_general(x: Sequence[Rational]) -> List[Tuple[Vertex, ...]]:
    """The lower-bound family for any point of (0,1)^d, pulled back from the half cube."""
    fx = to_fraction_vector(x)
    y, transform = normalize_to_half_cube(fx)
    out = []
    for s in lower_bound_family(y).simplexes:
        pulled = tuple(transform.pull_back(v) for v in s)
        if not _contains(pulled, fx):
            raise ValidationFailed(f"pulled-back simplex {pulled} misses the point")
        out.append(pulled)
    return out
