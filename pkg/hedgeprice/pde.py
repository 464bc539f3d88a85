"""
Large-N limits.

``solve_bsb`` integrates the Black-Scholes-Barenblatt equation
u_t = 1/2 opt_Sigma Tr(Sigma D^2 u) with an explicit Euler scheme on a
square grid, the optimum taken over the covariance matrices of the simplex
family. ``gaussian_price`` evaluates E[F(s)], s ~ N(0, Sigma), for the
cases where one matrix attains the optimum everywhere.

Two Hessian stencils are available. "cross" takes second differences on
the axes and the 4-point cross difference for the mixed term. "directional"
writes each Sigma as a nonnegative combination of e1 e1^T, e2 e2^T,
(1,1)(1,1)^T and (1,-1)(1,-1)^T and takes second differences along those
lattice directions; it needs diagonally dominant matrices, is monotone, and
is exact on the rank-one correlated matrices of {-1, 1}^2.
"""

import logging
import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import quad

from .config import (
    DEFAULT_DELTA_S,
    DEFAULT_K_STEPS,
    DEFAULT_M_CELLS,
    DEFAULT_MC_SAMPLES,
    MC_BATCH,
    QUADRATURE_ORDER_FALLBACK,
    QUADRATURE_ORDERS,
)
from .errors import BadParams, EvaluationFailure, NonFiniteField, NonPSD, StabilityViolation
from .market_geometry import MoveSet, SimplexFamily, enumerate_simplexes
from .payoffs import SCALING_NONE, Payoff, evaluate

logger = logging.getLogger(__name__)

SIDE_MAX = "max"
SIDE_MIN = "min"

STENCIL_AUTO = "auto"
STENCIL_CROSS = "cross"
STENCIL_DIRECTIONAL = "directional"
STENCILS = (STENCIL_AUTO, STENCIL_CROSS, STENCIL_DIRECTIONAL)

Terminal = Union[Payoff, Callable[[np.ndarray], np.ndarray]]


def _terminal_fn(F: Terminal) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(F, Payoff):
        unscaled = F.with_scaling(SCALING_NONE)
        return lambda S: np.asarray(evaluate(unscaled, S), dtype=float)
    return lambda S: np.asarray(F(S), dtype=float)


# === Grid and covariance family ===

@dataclass(frozen=True)
class Grid:
    """Square grid [-M ds, M ds]^2 with K explicit steps up to t = 1."""

    delta_s: float = DEFAULT_DELTA_S
    k_steps: int = DEFAULT_K_STEPS
    m_cells: int = DEFAULT_M_CELLS
    d: int = 2

    def __post_init__(self) -> None:
        if self.d != 2:
            raise BadParams("the finite-difference solver supports two assets")
        if self.delta_s <= 0 or self.k_steps < 1 or self.m_cells < 2:
            raise BadParams("grid needs delta_s > 0, k_steps >= 1 and m_cells >= 2")
        if self.ratio > 0.5:
            raise StabilityViolation(
                f"delta_t / delta_s^2 = {self.ratio:.4f} exceeds 1/2; raise k_steps or delta_s"
            )

    @property
    def delta_t(self) -> float:
        return 1.0 / self.k_steps

    @property
    def ratio(self) -> float:
        return self.delta_t / self.delta_s ** 2

    @property
    def axis(self) -> np.ndarray:
        return self.delta_s * np.arange(-self.m_cells, self.m_cells + 1)

    @property
    def center(self) -> Tuple[int, int]:
        return self.m_cells, self.m_cells

    def mesh(self) -> np.ndarray:
        """Grid points as an (n*n, 2) array in row-major order."""
        x, y = np.meshgrid(self.axis, self.axis, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])


@dataclass(frozen=True, eq=False)
class CovarianceFamily:
    matrices: Tuple[np.ndarray, ...]
    provenance: Tuple[Tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        if not self.matrices:
            raise BadParams("a covariance family needs at least one matrix")
        for s in self.matrices:
            if s.ndim != 2 or s.shape[0] != s.shape[1] or not np.allclose(s, s.T):
                raise BadParams("covariance matrices must be square and symmetric")
            if np.linalg.eigvalsh(s).min() < -1e-9 * max(1.0, float(np.abs(s).max())):
                raise NonPSD("covariance matrices must be positive semidefinite")

    def __len__(self) -> int:
        return len(self.matrices)

    @property
    def d(self) -> int:
        return self.matrices[0].shape[0]

    @classmethod
    def from_simplex_family(cls, family: SimplexFamily) -> "CovarianceFamily":
        # Boundary simplexes repeat the covariance of their support.
        kept: List[np.ndarray] = []
        prov: List[Tuple[int, ...]] = []
        for v in family:
            if any(np.allclose(v.sigma, k, atol=1e-14) for k in kept):
                continue
            kept.append(v.sigma)
            prov.append(v.simplex.vertex_indices)
        return cls(matrices=tuple(kept), provenance=tuple(prov))

    @classmethod
    def from_move_set(cls, m: MoveSet) -> "CovarianceFamily":
        return cls.from_simplex_family(enumerate_simplexes(m))


# === Barenblatt solver ===

@dataclass(frozen=True, eq=False)
class BSBSolution:
    value: float
    side: str
    grid: Grid
    field: np.ndarray
    snapshots: Tuple[Tuple[int, np.ndarray], ...] = ()
    stencil: str = STENCIL_CROSS


def _cross_weights(sig: np.ndarray) -> np.ndarray:
    # Coefficients of (h11, h22, h12) per matrix.
    return np.stack([sig[:, 0, 0], sig[:, 1, 1], 2.0 * sig[:, 0, 1]], axis=1)


def _cross_terms(u: np.ndarray, h2: float) -> np.ndarray:
    c = u[1:-1, 1:-1]
    h11 = (u[2:, 1:-1] - 2.0 * c + u[:-2, 1:-1]) / h2
    h22 = (u[1:-1, 2:] - 2.0 * c + u[1:-1, :-2]) / h2
    h12 = (u[2:, 2:] - u[2:, :-2] - u[:-2, 2:] + u[:-2, :-2]) / (4.0 * h2)
    return np.stack([h11, h22, h12])


def direction_weights(sig: np.ndarray) -> Optional[np.ndarray]:
    """
    Weights of (e1, e2, e1 + e2, e1 - e2) second differences per matrix.

    Returns None when some matrix is not diagonally dominant, i.e. has no
    nonnegative decomposition over those four directions.
    """
    sig = np.asarray(sig, dtype=float)
    pos = np.maximum(sig[:, 0, 1], 0.0)
    neg = np.maximum(-sig[:, 0, 1], 0.0)
    w = np.stack([sig[:, 0, 0] - pos - neg, sig[:, 1, 1] - pos - neg, pos, neg], axis=1)
    if np.any(w < -1e-12 * max(1.0, float(np.abs(sig).max()))):
        return None
    return np.clip(w, 0.0, None)


def _directional_terms(u: np.ndarray, h2: float) -> np.ndarray:
    c = u[1:-1, 1:-1]
    d11 = (u[2:, 1:-1] - 2.0 * c + u[:-2, 1:-1]) / h2
    d22 = (u[1:-1, 2:] - 2.0 * c + u[1:-1, :-2]) / h2
    dpp = (u[2:, 2:] - 2.0 * c + u[:-2, :-2]) / h2
    dpm = (u[2:, :-2] - 2.0 * c + u[:-2, 2:]) / h2
    return np.stack([d11, d22, dpp, dpm])


def _pick_stencil(sig: np.ndarray, stencil: str) -> Tuple[str, np.ndarray]:
    if stencil not in STENCILS:
        raise BadParams(f"stencil must be one of {STENCILS}, got {stencil!r}")
    if stencil == STENCIL_CROSS:
        return STENCIL_CROSS, _cross_weights(sig)
    weights = direction_weights(sig)
    if weights is not None:
        return STENCIL_DIRECTIONAL, weights
    if stencil == STENCIL_DIRECTIONAL:
        raise BadParams("the directional stencil needs diagonally dominant covariance matrices")
    logger.debug("covariance family is not diagonally dominant; using the cross stencil")
    return STENCIL_CROSS, _cross_weights(sig)


def solve_bsb(
    fam: CovarianceFamily,
    F: Terminal,
    g: Optional[Grid] = None,
    side: str = SIDE_MAX,
    record_every: int = 0,
    stencil: str = STENCIL_AUTO,
) -> BSBSolution:
    """
    Explicit Euler solution of the Barenblatt equation started from F.

    Args:
        fam: covariance matrices to optimize over.
        F: terminal payoff (its sqrt_n scaling is ignored; the limit is unscaled).
        g: grid; defaults to delta_s = 0.1, 300 steps, [-7, 7]^2.
        side: "max" for the upper limit, "min" for the lower.
        record_every: keep a copy of the field every this many steps (0 keeps none).
        stencil: "cross", "directional", or "auto" (directional whenever every
            matrix is diagonally dominant, cross otherwise).

    Returns:
        BSBSolution with u at the origin after the last step, the final field
        and the stencil actually used.

    Raises:
        StabilityViolation: delta_t / delta_s^2 > 1/2.
        NonFiniteField: the iteration overflowed.
    """
    if side not in (SIDE_MAX, SIDE_MIN):
        raise BadParams(f"side must be 'max' or 'min', got {side!r}")
    g = g if g is not None else Grid()
    if fam.d != g.d:
        raise BadParams(f"covariance family has dimension {fam.d}, grid has {g.d}")
    used, weights = _pick_stencil(np.array(fam.matrices), stencil)
    terms_of = _directional_terms if used == STENCIL_DIRECTIONAL else _cross_terms
    fn = _terminal_fn(F)
    n = 2 * g.m_cells + 1
    u = fn(g.mesh()).reshape(n, n)
    if not np.all(np.isfinite(u)):
        raise EvaluationFailure("terminal payoff is not finite on the grid")

    h2 = g.delta_s * g.delta_s
    opt = np.max if side == SIDE_MAX else np.min
    snapshots = []
    logger.debug("solving BSB (%s, %s stencil) on %dx%d grid, %d steps, %d matrices", side, used, n, n, g.k_steps, len(fam))
    for k in range(1, g.k_steps + 1):
        traces = np.tensordot(weights, terms_of(u, h2), axes=(1, 0))
        # Boundary rows and columns keep the initial condition.
        u[1:-1, 1:-1] += 0.5 * g.delta_t * opt(traces, axis=0)
        if not np.all(np.isfinite(u)):
            raise NonFiniteField(f"field became non-finite at step {k}")
        if record_every and k % record_every == 0:
            snapshots.append((k, u.copy()))
    i, j = g.center
    return BSBSolution(value=float(u[i, j]), side=side, grid=g, field=u, snapshots=tuple(snapshots), stencil=used)


def limit_prices(
    m: MoveSet,
    F: Terminal,
    g: Optional[Grid] = None,
    stencil: str = STENCIL_AUTO,
) -> Tuple[BSBSolution, BSBSolution]:
    """(upper, lower) large-N limits of the hedging prices on move set m."""
    fam = CovarianceFamily.from_move_set(m)
    return solve_bsb(fam, F, g, SIDE_MAX, stencil=stencil), solve_bsb(fam, F, g, SIDE_MIN, stencil=stencil)


# === Gaussian expectations ===

@dataclass(frozen=True)
class GaussianFactor:
    loading: np.ndarray
    rank: int


def factor_covariance(sigma) -> GaussianFactor:
    """sigma = L L^T with L of shape (d, rank), via the eigendecomposition."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    if sigma.shape[0] != sigma.shape[1] or not np.allclose(sigma, sigma.T):
        raise NonPSD("covariance must be a symmetric square matrix")
    lam, vec = np.linalg.eigh(sigma)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    if lam.min(initial=0.0) < -1e-9 * scale:
        raise NonPSD(f"covariance has negative eigenvalue {lam.min():.3e}")
    keep = lam > 1e-12 * scale
    return GaussianFactor(loading=vec[:, keep] * np.sqrt(lam[keep]), rank=int(keep.sum()))


def _quadrature(fn, factor: GaussianFactor, d: int, order: Optional[int]) -> float:
    L = factor.loading
    if factor.rank == 0:
        return float(fn(np.zeros((1, d)))[0])
    if factor.rank == 1 and order is None:
        col = L[:, 0]
        dens = 1.0 / math.sqrt(2.0 * math.pi)

        def integrand(z: float) -> float:
            return float(fn((z * col)[None, :])[0]) * dens * math.exp(-0.5 * z * z)

        # Kinks of option payoffs sit inside [-10, 10]; the tails beyond are below double precision.
        value, err = quad(integrand, -10.0, 10.0, limit=400, epsabs=1e-13, epsrel=1e-12)
        logger.debug("rank-one Gaussian integral %.12f (+/- %.1e)", value, err)
        return float(value)
    q = order or QUADRATURE_ORDERS.get(factor.rank, QUADRATURE_ORDER_FALLBACK)
    x, w = hermgauss(q)
    nodes = x * math.sqrt(2.0)
    weights = w / math.sqrt(math.pi)
    z = np.array(list(product(nodes, repeat=factor.rank)))
    wz = np.prod(np.array(list(product(weights, repeat=factor.rank))), axis=1)
    return float(np.dot(wz, fn(z @ L.T)))


def monte_carlo_estimate(
    sigma,
    F: Terminal,
    n_samples: int = DEFAULT_MC_SAMPLES,
    seed: int = 0,
) -> Tuple[float, float]:
    """(mean, standard error) of F(s) over n_samples seeded draws of N(0, sigma)."""
    if n_samples < 2:
        raise BadParams("Monte Carlo needs at least two samples")
    factor = factor_covariance(sigma)
    fn = _terminal_fn(F)
    d = factor.loading.shape[0]
    rng = np.random.default_rng(seed)
    total = total_sq = 0.0
    done = 0
    while done < n_samples:
        b = min(MC_BATCH, n_samples - done)
        if factor.rank == 0:
            vals = fn(np.zeros((b, d)))
        else:
            vals = fn(rng.standard_normal((b, factor.rank)) @ factor.loading.T)
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
        done += b
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return mean, math.sqrt(var / n_samples)


def gaussian_price(
    sigma,
    F: Terminal,
    method: str = "quadrature",
    seed: int = 0,
    n_samples: int = DEFAULT_MC_SAMPLES,
    order: Optional[int] = None,
) -> float:
    """
    E[F(s)] for s ~ N(0, sigma), sigma possibly singular.

    The expectation is taken over the column space of sigma: rank one is
    integrated adaptively, higher ranks by tensor Gauss-Hermite, and
    ``method="monte_carlo"`` samples with a seeded generator.
    """
    if method == "monte_carlo":
        return monte_carlo_estimate(sigma, F, n_samples, seed)[0]
    if method != "quadrature":
        raise BadParams(f"unknown method {method!r}; use 'quadrature' or 'monte_carlo'")
    factor = factor_covariance(sigma)
    return _quadrature(_terminal_fn(F), factor, factor.loading.shape[0], order)


def gaussian_limits(m: MoveSet, F: Terminal, simplexes: Sequence[int] = ()) -> List[dict]:
    """Gaussian expectation of F under the covariance of each listed simplex (all distinct ones by default)."""
    family = enumerate_simplexes(m)
    fam = CovarianceFamily.from_simplex_family(family)
    rows = []
    if simplexes:
        chosen = [(family[k].simplex.vertex_indices, family[k].sigma) for k in simplexes]
    else:
        chosen = list(zip(fam.provenance, fam.matrices))
    for verts, sigma in chosen:
        rows.append({"simplex": list(verts), "sigma": sigma.tolist(), "price": gaussian_price(sigma, F)})
    return rows
