"""Generalized-gradient calculus for max-of-smooth functionals.

The subdifferential at a point is the convex hull of the active selection
gradients.  Everything downstream needs only three queries on that polytope:
the support value in a direction, the minimum-norm element, and a descent
direction certified through the min-norm element's variational inequality
<g, g*> >= |g*|^2 for every generator g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import CertificateError, UsageError
from .functionals import Expr, active_pieces, as_point

# certificate slack quoted to callers; internal solves aim well below it
CERT_SLACK = 1e-9


@dataclass(frozen=True)
class SubdiffPolytope:
    """conv(generators) at base_point; generators stacked in rows."""

    generators: np.ndarray
    base_point: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if g.shape[0] < 1:
            raise UsageError("polytope needs at least one generator")
        if not np.all(np.isfinite(g)):
            raise UsageError("polytope generators must be finite")
        p = as_point(self.base_point)
        if g.shape[1] != p.size:
            raise UsageError(
                f"generators have dimension {g.shape[1]}, point has {p.size}")
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "base_point", p)

    @property
    def m(self) -> int:
        return self.generators.shape[0]

    @property
    def dim(self) -> int:
        return self.generators.shape[1]


@dataclass(frozen=True)
class DescentResult:
    """Either a certified descent direction or a near-critical marker.

    When ``direction`` is set, |direction| = 1 + |x| and ``slope_bound`` is a
    certified upper bound on the generalized directional derivative along it.
    """

    near_critical: bool
    min_norm: float
    direction: np.ndarray | None = None
    slope_bound: float | None = None


def subdifferential(f: Expr, x, activity_tol: float | None = None) -> SubdiffPolytope:
    """Active-piece hull of ``f`` at ``x``; exact for max/min/abs of smooth."""
    p = as_point(x)
    return SubdiffPolytope(active_pieces(f, p, activity_tol), p)


def gen_dir_derivative(poly: SubdiffPolytope, v) -> float:
    """Support value max over generators of <g, v>.

    The maximizing generator, when needed, is the lowest-index one among ties
    (np.argmax's convention), so repeated queries are deterministic.
    """
    w = as_point(v)
    if w.size != poly.dim:
        raise UsageError(f"direction has dimension {w.size}, polytope {poly.dim}")
    return float(np.max(poly.generators @ w))


def support_argmax(poly: SubdiffPolytope, v) -> int:
    """Index of the generator attaining the support value (lowest on ties)."""
    w = as_point(v)
    if w.size != poly.dim:
        raise UsageError(f"direction has dimension {w.size}, polytope {poly.dim}")
    return int(np.argmax(poly.generators @ w))


def _affine_min_norm(S: np.ndarray) -> np.ndarray:
    """Weights of the min-norm point in the affine hull of the rows of S."""
    k = S.shape[0]
    K = S @ S.T
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = K
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return sol[:k]


def _wolfe_min_norm(G: np.ndarray, max_iter: int = 200):
    """Nearest point to the origin in conv(rows of G).

    Corral iteration: pull in the generator most violating the optimality
    inequality, re-solve the affine subproblem, and walk back to the simplex
    boundary dropping dead vertices when the affine solution leaves it.
    """
    m = G.shape[0]
    scale = float(np.max(np.sum(G * G, axis=1)))
    if scale == 0.0:
        return G[0] * 0.0, np.zeros(m)
    tol = 1e-12 * (1.0 + scale)

    start = int(np.argmin(np.sum(G * G, axis=1)))
    idx = [start]
    lam = np.array([1.0])
    x = G[start].copy()

    for _ in range(max_iter):
        scores = G @ x
        j = int(np.argmin(scores))
        if scores[j] >= float(x @ x) - tol:
            break
        if j in idx:
            break
        idx.append(j)
        lam = np.append(lam, 0.0)
        for _ in range(max_iter):
            S = G[idx]
            nu = _affine_min_norm(S)
            if np.all(nu > 1e-14):
                lam = nu
                break
            # walk from lam toward nu until the first weight hits zero
            neg = nu <= 1e-14
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(lam[neg] - nu[neg] > 0,
                                  lam[neg] / (lam[neg] - nu[neg]), np.inf)
            theta = float(min(1.0, np.min(ratios))) if ratios.size else 1.0
            lam = (1.0 - theta) * lam + theta * nu
            lam[lam < 1e-14] = 0.0
            keep = lam > 0.0
            if not np.any(keep):
                keep[int(np.argmax(nu))] = True
                lam[keep] = 1.0
            idx = [i for i, k in zip(idx, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
        x = lam @ G[idx]

    weights = np.zeros(m)
    for i, l in zip(idx, lam):
        weights[i] += l
    return x, weights


def _simplex_qp_polish(G: np.ndarray, w0: np.ndarray):
    """Fallback solve of min |w G|^2 over the simplex, warm-started at w0."""
    m = G.shape[0]

    def fun(w):
        y = w @ G
        return float(y @ y), 2.0 * (G @ y)

    res = optimize.minimize(
        fun, w0, jac=True, method="SLSQP",
        bounds=[(0.0, 1.0)] * m,
        constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0,
                      "jac": lambda w: np.ones_like(w)}],
        options={"maxiter": 200, "ftol": 1e-16})
    w = np.clip(res.x, 0.0, None)
    w = w / w.sum()
    return w @ G, w


def min_norm_element(poly: SubdiffPolytope):
    """Minimum-norm point of the polytope and its norm.

    The returned point satisfies <g, g*> >= |g*|^2 - 1e-9 for every
    generator; a violation raises rather than silently returning a point
    that cannot back a descent certificate.
    """
    G = poly.generators
    if poly.m == 1:
        g = G[0].copy()
        return g, float(np.linalg.norm(g))
    x, w = _wolfe_min_norm(G)
    gap = float(np.min(G @ x) - x @ x)
    if gap < -CERT_SLACK:
        x, w = _simplex_qp_polish(G, w)
        gap = float(np.min(G @ x) - x @ x)
        if gap < -CERT_SLACK:
            raise CertificateError(
                f"min-norm solve failed its optimality certificate "
                f"(violation {-gap:.3e} at base point {poly.base_point})")
    return x, float(np.linalg.norm(x))


def descent_direction(poly: SubdiffPolytope, margin: float) -> DescentResult:
    """Direction along which the functional must fall at certified rate.

    With g* the min-norm element and s = 1 + |x|, the direction -s g*/|g*|
    has generalized slope at most -s|g*|; it is returned only when that bound
    beats -margin.  Otherwise the point is declared near-critical, which for
    margin ~ eps is the stopping signal of the outer iteration.
    """
    if margin <= 0.0:
        raise UsageError("margin must be positive")
    g_star, val = min_norm_element(poly)
    s = 1.0 + float(np.linalg.norm(poly.base_point))
    if s * val <= margin:
        return DescentResult(near_critical=True, min_norm=val)
    h = -s / val * g_star
    # support value along h; by the variational inequality this is <= -s*val
    slope = gen_dir_derivative(poly, h)
    return DescentResult(near_critical=False, min_norm=val, direction=h,
                         slope_bound=min(slope, -s * val))
