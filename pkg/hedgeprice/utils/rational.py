# rational.py

from fractions import Fraction
from math import lcm
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

Rational = Union[Fraction, int, str, float]


def to_fraction(value: Rational) -> Fraction:
    """
    Parse one coordinate into an exact rational.

    Accepts Fractions, integers, strings such as "-1/2" or "0.25", and floats
    (read through their shortest decimal repr, so 0.1 becomes 1/10).
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not coordinates")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not np.isfinite(value):
            raise ValueError(f"non-finite coordinate {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        return Fraction(value.strip().replace("−", "-"))
    raise TypeError(f"cannot read {type(value).__name__} as a rational")


def to_fraction_vector(values: Sequence[Rational]) -> Tuple[Fraction, ...]:
    return tuple(to_fraction(v) for v in values)


def format_fraction(value: Fraction) -> str:
    return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def common_denominator(values) -> int:
    den = 1
    for v in values:
        den = lcm(den, Fraction(v).denominator)
    return den


def _row_reduce(rows: List[List[Fraction]]) -> Tuple[List[List[Fraction]], List[int]]:
    # Gauss-Jordan in place; returns the reduced rows and pivot columns.
    m = [list(r) for r in rows]
    n_rows = len(m)
    n_cols = len(m[0]) if m else 0
    pivots: List[int] = []
    r = 0
    for c in range(n_cols):
        if r >= n_rows:
            break
        pivot = next((i for i in range(r, n_rows) if m[i][c] != 0), None)
        if pivot is None:
            continue
        m[r], m[pivot] = m[pivot], m[r]
        inv = 1 / Fraction(m[r][c])
        m[r] = [x * inv for x in m[r]]
        for i in range(n_rows):
            if i != r and m[i][c] != 0:
                factor = m[i][c]
                m[i] = [a - factor * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(rows: Sequence[Sequence[Fraction]]) -> int:
    if not rows:
        return 0
    return len(_row_reduce([list(map(Fraction, r)) for r in rows])[1])


def affine_rank(points: Sequence[Sequence[Fraction]]) -> int:
    """Dimension of the affine hull of ``points``."""
    if len(points) <= 1:
        return 0
    base = points[0]
    return rank([[a - b for a, b in zip(p, base)] for p in points[1:]])


def det(matrix: Sequence[Sequence[Fraction]]) -> Fraction:
    m = [list(map(Fraction, r)) for r in matrix]
    n = len(m)
    if n == 0:
        return Fraction(1)
    sign = 1
    result = Fraction(1)
    for c in range(n):
        pivot = next((i for i in range(c, n) if m[i][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            m[c], m[pivot] = m[pivot], m[c]
            sign = -sign
        result *= m[c][c]
        for i in range(c + 1, n):
            if m[i][c] != 0:
                factor = m[i][c] / m[c][c]
                m[i] = [a - factor * b for a, b in zip(m[i], m[c])]
    return sign * result


def solve_exact(a: Sequence[Sequence[Fraction]], b: Sequence[Fraction]) -> Optional[List[Fraction]]:
    """
    Solve ``a x = b`` exactly.

    Returns the unique solution, or None when the system is inconsistent or
    its solution is not unique.
    """
    n_unknowns = len(a[0])
    aug = [list(map(Fraction, row)) + [Fraction(bi)] for row, bi in zip(a, b)]
    reduced, pivots = _row_reduce(aug)
    if n_unknowns in pivots or len(pivots) < n_unknowns:
        return None
    x = [Fraction(0)] * n_unknowns
    for row, col in zip(reduced, pivots):
        x[col] = row[-1]
    return x


def barycentric(vertices: Sequence[Sequence[Fraction]], point: Sequence[Fraction]) -> Optional[List[Fraction]]:
    """Exact weights lambda with sum 1 and sum lambda_j v_j = point, or None."""
    rows = [[Fraction(1)] * len(vertices)]
    for k in range(len(point)):
        rows.append([Fraction(v[k]) for v in vertices])
    rhs = [Fraction(1)] + [Fraction(x) for x in point]
    return solve_exact(rows, rhs)


def hyperplane_normal(vectors: Sequence[Sequence[Fraction]], dim: int) -> Tuple[Fraction, ...]:
    """Cofactor normal of ``dim - 1`` vectors in Q^dim (zero when they are dependent)."""
    if dim == 1:
        return (Fraction(1),)
    normal = []
    for k in range(dim):
        minor = [[row[j] for j in range(dim) if j != k] for row in vectors]
        normal.append((-1) ** k * det(minor))
    return tuple(normal)


def dot(u: Sequence[Fraction], v: Sequence[Fraction]) -> Fraction:
    return sum((a * b for a, b in zip(u, v)), Fraction(0))


# === Batched integer determinants ===
# Bareiss elimination keeps every intermediate an integer minor, so the
# division is exact and int64 suffices for 0/1 simplexes up to d = 5 with
# moderate denominators on the query column.
INT64_SAFE_ENTRY = 10**6


def batched_det(mats: np.ndarray) -> np.ndarray:
    """Exact determinants of a stack of square integer matrices, shape (B, n, n)."""
    mats = np.asarray(mats)
    if mats.dtype != object:
        if np.abs(mats).max(initial=0) > INT64_SAFE_ENTRY:
            mats = mats.astype(object)
        else:
            mats = mats.astype(np.int64)
    m = mats.copy()
    b, n, _ = m.shape
    if n == 0:
        return np.ones(b, dtype=m.dtype)
    rows = np.arange(b)
    sign = np.ones(b, dtype=np.int64)
    singular = np.zeros(b, dtype=bool)
    prev = np.ones(b, dtype=m.dtype)
    for k in range(n - 1):
        nz = m[:, k:, k] != 0
        has = nz.any(axis=1)
        singular |= ~has
        piv = k + np.argmax(nz, axis=1)
        swap = piv != k
        if swap.any():
            top = m[rows, k].copy()
            m[rows, k] = m[rows, piv]
            m[rows, piv] = top
            sign[swap] *= -1
        pk = m[:, k, k].copy()
        pk[~has] = 1
        block = m[:, k + 1:, k + 1:] * pk[:, None, None] - m[:, k + 1:, k:k + 1] * m[:, k:k + 1, k + 1:]
        m[:, k + 1:, k + 1:] = block // prev[:, None, None]
        prev = pk
    out = m[:, n - 1, n - 1] * sign
    out[singular] = 0
    return out
