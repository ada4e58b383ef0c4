"""Quadratic local costs and the constants that govern convergence.

Each agent's cost is a quadratic  q(x) = 0.5 x'Ax - b'x + c  with a
symmetric PSD Hessian, so the analytic gradient Ax - b, the aggregate
minimizer, and the smoothness/convexity constants are all exactly
computable. That is what makes the convergence guarantees checkable at
desk scale without a second optimizer.

Constants derived from an ensemble of honest costs over a box X:

    mu    = max over honest i of lambda_max(A_i)         (gradient Lipschitz)
    lam   = lambda_min(mean of honest A_i)               (strong convexity)
    zeta  = (n - f) * max_i max_{x in X} ||A_i x - b_i|| (filtered-gradient bound)
    alpha = lam / (lam + 2 sqrt(d) mu) - f / n           (fault-tolerance margin)

For a quadratic, ||Ax - b|| is convex, so its maximum over the box is
attained at a vertex; zeta is exact by vertex enumeration up to
ZETA_VERTEX_DIM_LIMIT dimensions and an analytic upper bound above that.
"""

from dataclasses import dataclass

import numpy as np

from .filters import Hypercube, Point, as_point

# Numeric thresholds used throughout this module (and nowhere else):
SYMMETRY_ATOL = 1e-9       # max allowed per-entry asymmetry of a Hessian
PSD_SLACK = 1e-9           # eigenvalues may undershoot zero by this much
STATIONARITY_TOL = 1e-8    # gradient norm that counts as "vanishes"
SINGULARITY_TOL = 1e-12    # smallest eigenvalue that counts as "invertible"
ZETA_VERTEX_DIM_LIMIT = 20  # above this, 2^d vertex sweeps are off the table


@dataclass(frozen=True)
class QuadraticCost:
    """One agent's local cost 0.5 x'Ax - b'x + c."""

    A: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        b = as_point(self.b)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"Hessian must be square, got shape {A.shape}")
        if A.shape[0] != b.size:
            raise ValueError(f"Hessian is {A.shape[0]}x{A.shape[0]} but b has dimension {b.size}")
        if not np.isfinite(A).all() or not np.isfinite(self.c):
            raise ValueError("cost parameters must be finite")
        if np.abs(A - A.T).max() > SYMMETRY_ATOL:
            raise ValueError("Hessian is not symmetric")
        if np.linalg.eigvalsh(A).min() < -PSD_SLACK:
            raise ValueError("Hessian is not positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return self.b.size

    def __call__(self, x: Point) -> float:
        x = as_point(x, self.dim)
        return float(0.5 * x @ self.A @ x - self.b @ x + self.c)

    def gradient(self, x: Point) -> Point:
        """Analytic gradient Ax - b."""
        x = as_point(x, self.dim)
        return self.A @ x - self.b

    def eig_bounds(self) -> tuple[float, float]:
        """(smallest, largest) eigenvalue of the Hessian."""
        w = np.linalg.eigvalsh(self.A)
        return float(w[0]), float(w[-1])


@dataclass(frozen=True)
class CostEnsemble:
    """All n agents' costs plus the designation of who is honest."""

    costs: tuple[QuadraticCost, ...]
    honest_set: frozenset[int]

    def __post_init__(self):
        costs = tuple(self.costs)
        honest = frozenset(int(i) for i in self.honest_set)
        if not costs:
            raise ValueError("ensemble needs at least one cost")
        d = costs[0].dim
        if any(c.dim != d for c in costs):
            raise ValueError("all costs must share one dimension")
        if not honest:
            raise ValueError("honest set must be nonempty")
        if not honest <= set(range(len(costs))):
            raise ValueError(f"honest ids must lie in 0..{len(costs) - 1}")
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "honest_set", honest)

    @property
    def n(self) -> int:
        return len(self.costs)

    @property
    def d(self) -> int:
        return self.costs[0].dim

    def honest_ids(self) -> list[int]:
        return sorted(self.honest_set)

    def honest_costs(self) -> list[QuadraticCost]:
        return [self.costs[i] for i in self.honest_ids()]


@dataclass(frozen=True)
class SpectralConstants:
    """mu, lam, zeta, alpha for one ensemble; see the module docstring."""

    mu: float
    lam: float
    zeta: float
    alpha: float
    zeta_exact: bool  # False when zeta is the analytic bound, not the vertex max


def aggregate_minimizer(ensemble: CostEnsemble) -> Point:
    """Solve for the unique minimizer of the honest agents' summed cost.

    Requires the summed honest Hessian to be positive definite. The result
    satisfies || sum of honest gradients at x* || <= STATIONARITY_TOL.
    """
    honest = ensemble.honest_costs()
    a_sum = sum(c.A for c in honest)
    b_sum = sum(c.b for c in honest)
    if np.linalg.eigvalsh(a_sum).min() <= SINGULARITY_TOL:
        raise ValueError("aggregate not strongly convex")
    x_star = np.linalg.solve(a_sum, b_sum)
    residual = float(np.linalg.norm(a_sum @ x_star - b_sum))
    if residual > STATIONARITY_TOL:
        raise ValueError(f"minimizer solve left gradient norm {residual:.3e}")
    return x_star


def make_redundant_ensemble(
    n: int,
    f: int,
    d: int,
    x_star,
    seed: int,
    eig_min: float,
    eig_max: float,
) -> CostEnsemble:
    """Generate n strictly convex quadratics that all bottom out at `x_star`.

    Hessians draw their spectra uniformly from [eig_min, eig_max] with a
    random orthogonal eigenbasis; taking b_i = A_i x_star pins every
    agent's unique minimizer to x_star, so any subset aggregate is also
    minimized exactly there and redundancy holds by construction. Output
    is bit-reproducible for a fixed seed.
    """
    if n < 2 * f + 1:
        raise ValueError(f"need n >= 2f+1, got n={n}, f={f}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if not (0.0 < eig_min <= eig_max < np.inf):
        raise ValueError(f"need 0 < eig_min <= eig_max, got [{eig_min}, {eig_max}]")
    x_star = as_point(x_star, d)
    rng = np.random.default_rng(seed)
    costs = []
    for _ in range(n):
        if eig_min == eig_max:
            A = eig_min * np.eye(d)
        else:
            eigs = rng.uniform(eig_min, eig_max, size=d)
            q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            A = (q * eigs) @ q.T
            A = 0.5 * (A + A.T)
        costs.append(QuadraticCost(A=A, b=A @ x_star, c=0.0))
    return CostEnsemble(costs=tuple(costs), honest_set=frozenset(range(n)))


def check_redundancy_sufficient(ensemble: CostEnsemble, f: int) -> bool:
    """True iff every honest gradient vanishes at the honest aggregate minimizer.

    For strictly convex costs, a common stationary point means every subset
    aggregate is minimized at exactly the same point, which is the
    redundancy property the convergence guarantee needs. f = 0 is trivially
    redundant (the subset and the whole coincide).
    """
    if f < 0:
        raise ValueError(f"fault count must be non-negative, got {f}")
    if f == 0:
        return True
    for cost in ensemble.honest_costs():
        if cost.eig_bounds()[0] <= SINGULARITY_TOL:
            raise ValueError("redundancy check requires strictly convex honest costs")
    x_star = aggregate_minimizer(ensemble)
    return all(
        float(np.linalg.norm(cost.gradient(x_star))) <= STATIONARITY_TOL
        for cost in ensemble.honest_costs()
    )


def _max_gradient_norm_on_box(cost: QuadraticCost, xi: float, chunk: int = 1 << 16) -> float:
    """Exact max of ||Ax - b|| over the box, swept vertex by vertex."""
    d = cost.dim
    total = 1 << d
    shifts = np.arange(d, dtype=np.uint64)
    best = 0.0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.uint64)[:, None]
        signs = ((idx >> shifts) & np.uint64(1)).astype(np.float64)
        vertices = xi * (2.0 * signs - 1.0)
        grads = vertices @ cost.A.T - cost.b
        best = max(best, float(np.sqrt((grads * grads).sum(axis=1)).max()))
    return best


def spectral_constants(ensemble: CostEnsemble, f: int, box: Hypercube) -> SpectralConstants:
    """Compute (mu, lam, zeta, alpha) for an ensemble over a box.

    zeta is exact (vertex enumeration) for d <= ZETA_VERTEX_DIM_LIMIT and
    falls back to (n-f) * max_i (lambda_max(A_i) sqrt(d) xi + ||b_i||)
    above that, flagged via `zeta_exact = False`.
    """
    if box.d != ensemble.d:
        raise ValueError(f"box dimension {box.d} does not match ensemble dimension {ensemble.d}")
    n = ensemble.n
    if not (0 <= f < n):
        raise ValueError(f"fault count must satisfy 0 <= f < n, got f={f}, n={n}")
    honest = ensemble.honest_costs()
    bounds = [c.eig_bounds() for c in honest]
    mu = max(w_max for _, w_max in bounds)
    mean_hessian = sum(c.A for c in honest) / len(honest)
    lam = float(np.linalg.eigvalsh(mean_hessian).min())
    d = ensemble.d
    if d <= ZETA_VERTEX_DIM_LIMIT:
        zeta = (n - f) * max(_max_gradient_norm_on_box(c, box.xi) for c in honest)
        zeta_exact = True
    else:
        zeta = (n - f) * max(
            w_max * np.sqrt(d) * box.xi + float(np.linalg.norm(c.b))
            for c, (_, w_max) in zip(honest, bounds)
        )
        zeta_exact = False
    alpha = lam / (lam + 2.0 * np.sqrt(d) * mu) - f / n
    return SpectralConstants(mu=float(mu), lam=lam, zeta=float(zeta), alpha=float(alpha), zeta_exact=zeta_exact)
