"""Path-length geometry used by the solver.

Curve lengths are measured with the weight 1/(1 + |c|): moving far from the
origin is cheap, moving near it costs full Euclidean rate.  The induced
distance ``delta`` is estimated from above by locally optimizing polylines,
which is the safe direction for every inequality the solver checks; the only
lower bounds used are closed-form ones (see :func:`delta_lower_bound`).

Also defined here: separating sets given by an implicit function, their
level-restricted versions, the distance-to-set estimator, the proximity
penalty, and the crossing-window extraction on paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .errors import PreconditionError, SetEmptyError, TopologyError, UsageError
from .functionals import Expr, active_pieces, as_point, coord, const, evaluate, sum_of

SURFACE_TOL_SCALE = 1e-8
LEVEL_TOL_SCALE = 1e-8


@dataclass(frozen=True)
class Curve:
    """Polyline with nodes stacked in rows; evaluation is linear interpolation."""

    nodes: np.ndarray

    def __post_init__(self):
        nd = np.asarray(self.nodes, dtype=float)
        if nd.ndim != 2 or nd.shape[0] < 2:
            raise UsageError(f"curve needs at least two nodes, got shape {nd.shape}")
        if not np.all(np.isfinite(nd)):
            raise UsageError("curve has non-finite nodes")
        object.__setattr__(self, "nodes", nd)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]


def _as_nodes(curve) -> np.ndarray:
    if isinstance(curve, Curve):
        return curve.nodes
    return Curve(np.asarray(curve, dtype=float)).nodes


def _simpson_weights(quad: int) -> np.ndarray:
    omega = np.empty(2 * quad + 1)
    omega[0::2], omega[1::2] = 2.0, 4.0
    omega[0] = omega[-1] = 1.0
    return omega / (6.0 * quad)


def _segment_weighted_lengths(starts: np.ndarray, d: np.ndarray, quad: int):
    """Weighted length of each straight segment start -> start + d.

    Each segment's integral is split at the parameter closest to the origin:
    |p(s)| has a kink there whenever the segment grazes the origin, and an
    interior kink would degrade composite Simpson from O(h^4) to O(h^2).  With
    the split the kink sits at a subinterval boundary and through-origin
    segments are integrated essentially exactly.
    """
    if quad < 2:
        raise UsageError("quad_points_per_segment must be >= 2")
    seg_len = np.linalg.norm(d, axis=1)             # (k,)
    sq = np.maximum(seg_len ** 2, 1e-300)
    tau = np.clip(-np.sum(starts * d, axis=1) / sq, 0.0, 1.0)
    s = np.linspace(0.0, 1.0, 2 * quad + 1)
    omega = _simpson_weights(quad)
    total = np.zeros_like(seg_len)
    for lo, width in ((np.zeros_like(tau), tau), (tau, 1.0 - tau)):
        params = lo[:, None] + width[:, None] * s[None, :]
        pts = starts[:, None, :] + params[:, :, None] * d[:, None, :]
        w = 1.0 / (1.0 + np.linalg.norm(pts, axis=2))
        total += width * (w @ omega)
    return seg_len * total


def _segment_quadrature(nodes: np.ndarray, quad: int):
    """Per-segment weighted lengths of a polyline."""
    d = np.diff(nodes, axis=0)
    return _segment_weighted_lengths(nodes[:-1], d, quad)


def curve_length(curve, quad_points_per_segment: int = 16) -> float:
    """Weighted length of a polyline; zero iff all nodes coincide."""
    nodes = _as_nodes(curve)
    return float(np.sum(_segment_quadrature(nodes, quad_points_per_segment)))


def straight_lengths(x: np.ndarray, ys: np.ndarray, quad: int = 16) -> np.ndarray:
    """Weighted lengths of the straight segments from ``x`` to each row of ``ys``."""
    x = as_point(x)
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    d = ys - x[None, :]
    return _segment_weighted_lengths(np.broadcast_to(x, ys.shape), d, quad)


# ------------------------------------------------------------- delta metric

def _nodes_length_grad(nodes: np.ndarray, quad: int):
    """Length of a polyline and its gradient in all node positions.

    Uses the unsplit Simpson rule: the split points of
    :func:`_segment_weighted_lengths` move with the nodes and would make the
    objective nonsmooth.  Reported values are always recomputed with
    :func:`curve_length`.
    """
    d = np.diff(nodes, axis=0)                      # (k+1, n)
    seg_len = np.linalg.norm(d, axis=1)
    s = np.linspace(0.0, 1.0, 2 * quad + 1)
    omega = _simpson_weights(quad)

    pts = nodes[:-1, None, :] + s[None, :, None] * d[:, None, :]
    r = np.linalg.norm(pts, axis=2)
    w = 1.0 / (1.0 + r)
    t = w @ omega                                   # (k+1,)
    value = float(np.sum(seg_len * t))

    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r > 1e-300, 1.0 / (r * (1.0 + r) ** 2), 0.0)
    dw = -pts * scale[:, :, None]                   # dW/dc, (k+1, 2q+1, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        dhat = np.where(seg_len[:, None] > 1e-300, d / np.maximum(seg_len, 1e-300)[:, None], 0.0)

    wo = omega[None, :, None] * dw
    g_start = seg_len[:, None] * np.sum((1.0 - s)[None, :, None] * wo, axis=1) - dhat * t[:, None]
    g_end = seg_len[:, None] * np.sum(s[None, :, None] * wo, axis=1) + dhat * t[:, None]

    grad = np.zeros_like(nodes)
    grad[:-1] += g_start
    grad[1:] += g_end
    return value, grad


def _transverse_objective(w: np.ndarray, stations: np.ndarray, basis: np.ndarray,
                          k: int, quad: int):
    """Polyline length as a function of offsets perpendicular to the chord.

    Restricting nodes to transverse offsets removes the reparametrization
    directions along the curve, which otherwise leave the length nearly flat
    and stall the quasi-Newton iteration.
    """
    nodes = stations.copy()
    nodes[1:-1] += w.reshape(k, -1) @ basis.T
    value, grad = _nodes_length_grad(nodes, quad)
    return value, (grad[1:-1] @ basis).ravel()


def _free_objective(flat: np.ndarray, a: np.ndarray, b: np.ndarray, k: int,
                    quad: int):
    """Polyline length over unconstrained interior nodes."""
    nodes = np.vstack([a, flat.reshape(k, a.size), b])
    value, grad = _nodes_length_grad(nodes, quad)
    return value, grad[1:-1].ravel()


def _interp_offsets(w: np.ndarray, k_new: int) -> np.ndarray:
    """Resample transverse offsets (with implicit zero ends) at k_new stations.

    The resampled polyline traces the same curve, so refinement never starts
    from a worse value than the coarse level found.
    """
    k_old = w.shape[0]
    t_old = np.linspace(0.0, 1.0, k_old + 2)
    t_new = np.linspace(0.0, 1.0, k_new + 2)[1:-1]
    full = np.vstack([np.zeros((1, w.shape[1])), w, np.zeros((1, w.shape[1]))])
    out = np.empty((k_new, w.shape[1]))
    for j in range(w.shape[1]):
        out[:, j] = np.interp(t_new, t_old, full[:, j])
    return out


def _chord_origin_gap(a: np.ndarray, b: np.ndarray) -> float:
    chord = b - a
    clen = np.linalg.norm(chord)
    if clen == 0.0:
        return float(np.linalg.norm(a))
    tau = np.clip(-np.dot(a, chord) / clen ** 2, 0.0, 1.0)
    return float(np.linalg.norm(a + tau * chord))


def _bow_offsets(a: np.ndarray, b: np.ndarray, k: int, basis: np.ndarray,
                 with_bows: bool) -> list:
    """Transverse-offset starts: zero plus outward bows when worthwhile.

    Geodesics of the weight bow away from the origin, so the bows follow the
    direction from the chord's closest-to-origin point.
    """
    inits = [np.zeros((k, basis.shape[1]))]
    chord = b - a
    clen = np.linalg.norm(chord)
    if clen == 0.0 or not with_bows:
        return inits
    # closest point of the chord to the origin fixes the bow direction
    tau = np.clip(-np.dot(a, chord) / clen ** 2, 0.0, 1.0)
    q = a + tau * chord
    if np.linalg.norm(q) > 1e-9 * clen:
        out_dir = q / np.linalg.norm(q)
    else:
        out_dir = np.eye(a.size)[int(np.argmin(np.abs(chord)))]
    w_dir = basis.T @ out_dir
    nd = np.linalg.norm(w_dir)
    if nd < 1e-12:
        return inits
    w_dir /= nd
    t = np.linspace(0.0, 1.0, k + 2)[1:-1]
    bump = np.sin(np.pi * t) * clen
    for amp in (0.35, 1.0):
        inits.append(amp * bump[:, None] * w_dir[None, :])
    return inits


def delta_distance(x1, x2, interior_nodes: int = 8, iters: int = 200,
                   quad_points_per_segment: int = 16) -> float:
    """Upper estimate of the weighted-metric distance between two points.

    Polylines are optimized hierarchically (2, 4, ... interior nodes), each
    level seeded from the refined best of the previous one, so enlarging
    ``interior_nodes`` never worsens the result.  With zero interior nodes the
    straight segment is measured directly.  The value is symmetric in its
    arguments by canonical ordering.
    """
    a, b = as_point(x1), as_point(x2)
    if a.size != b.size:
        raise UsageError("points have different dimensions")
    if np.array_equal(a, b):
        return 0.0
    if tuple(b) < tuple(a):
        a, b = b, a

    quad = quad_points_per_segment
    straight_val = curve_length(np.vstack([a, b]), quad)
    if interior_nodes == 0:
        return straight_val
    if interior_nodes < 0:
        raise UsageError("interior_nodes must be >= 0")

    # Curving can undercut the chord only by a relative O((len/(1+gap))^2)
    # amount, so very short chords are measured directly.
    chord = b - a
    clen = float(np.linalg.norm(chord))
    gap = _chord_origin_gap(a, b)
    if a.size == 1 or clen <= 0.02 * (1.0 + gap):
        return straight_val
    with_bows = clen > 0.5 * (1.0 + gap)

    # Nodes move only perpendicular to the chord; sliding along the curve is
    # a flat direction of the length and would stall the optimizer.
    _, _, vt = np.linalg.svd(chord[None, :] / clen)
    basis = vt[1:].T

    levels, k = [], 4
    while k < interior_nodes:
        levels.append(k)
        k *= 2
    levels.append(interior_nodes)

    # Every level runs the same recipe so that a deeper hierarchy reproduces
    # the shallower one's candidate values bit for bit; the returned minimum
    # can then only improve as interior_nodes grows.
    # Search directions tolerate a coarser rule than reported values do.
    quad_obj = max(4, quad // 2)

    global_best = straight_val
    prev_w = None
    for li, k in enumerate(levels):
        t = np.linspace(0.0, 1.0, k + 2)[:, None]
        stations = a[None, :] + t * chord[None, :]
        inits = (_bow_offsets(a, b, k, basis, with_bows) if li == 0
                 else [_interp_offsets(prev_w, k)])
        level_val, level_w = np.inf, None
        for init in inits:
            res = optimize.minimize(
                _transverse_objective, init.ravel(),
                args=(stations, basis, k, quad_obj), jac=True,
                method="L-BFGS-B",
                options={"maxiter": min(iters, 60), "ftol": 1e-14,
                         "gtol": 1e-10})
            w = res.x.reshape(k, basis.shape[1])
            nodes = stations.copy()
            nodes[1:-1] += w @ basis.T
            val = curve_length(nodes, quad)
            if val < level_val:
                level_val, level_w = val, w
        prev_w = level_w
        global_best = min(global_best, level_val)
        if with_bows and k >= 8:
            # polish with fully free nodes, which may cluster along the chord
            # where curvature concentrates; value-only branch, the transverse
            # chain stays the refinement seed.  Short chords and coarse levels
            # skip this: their gain is below quadrature accuracy while the
            # free directions let the optimizer wander.
            nodes = stations.copy()
            nodes[1:-1] += level_w @ basis.T
            res = optimize.minimize(
                _free_objective, nodes[1:-1].ravel(), args=(a, b, k, quad_obj),
                jac=True, method="L-BFGS-B",
                options={"maxiter": min(iters, 30), "ftol": 1e-12,
                         "gtol": 1e-8})
            polished = np.vstack([a, res.x.reshape(k, a.size), b])
            global_best = min(global_best, curve_length(polished, quad))
    return global_best


def delta_lower_bound(x, norm_dist: float) -> float:
    """Closed-form lower bound on the delta distance from ``x`` to any set at
    Euclidean distance ``norm_dist``: a curve of weighted length L starting at
    x stays within Euclidean reach (1+|x|)(e^L - 1)."""
    p = as_point(x)
    return float(np.log1p(max(norm_dist, 0.0) / (1.0 + np.linalg.norm(p))))


# --------------------------------------------------------- separating sets

@dataclass(frozen=True)
class SeparatingSet:
    """Hypersurface F = {s = 0} splitting space into s<0 and s>0 sides.

    ``point_sampler(rng, center, count)`` may supply points of F near a query
    point; ``exact_norm_distance`` the exact Euclidean distance to F.  Both are
    optional accelerators: without them points of F are found by projecting
    along descent/random directions.
    """

    implicit_fn: Expr
    bounded: bool = False
    point_sampler: Callable | None = None
    exact_norm_distance: Callable | None = None
    name: str = ""

    def value(self, x):
        return evaluate(self.implicit_fn, x)

    def side(self, x) -> int:
        return int(np.sign(self.value(as_point(x))))

    def separates(self, z0, z1) -> bool:
        return self.value(as_point(z0)) < 0.0 < self.value(as_point(z1))

    def surface_tol(self, x) -> float:
        return SURFACE_TOL_SCALE * (1.0 + float(np.linalg.norm(as_point(x))))


def hyperplane_separator(axis: int = 0, offset: float = 0.0, dim: int = 2) -> SeparatingSet:
    """The plane {x_axis = offset}, with exact distance and a native sampler."""
    expr = sum_of(coord(axis), const(-offset)) if offset else coord(axis)

    def sampler(rng, center, count):
        c = as_point(center)
        proj = c.copy()
        proj[axis] = offset
        pts = [proj, np.where(np.arange(c.size) == axis, offset, 0.0)]
        scale = max(1.0, float(np.linalg.norm(c)))
        for s in (0.1, 0.35, 1.0, 2.5):
            noise = rng.normal(size=(max(count // 4, 1), c.size)) * s * scale
            noise[:, axis] = 0.0
            pts.append(proj[None, :] + noise)
        return np.vstack([np.atleast_2d(p) for p in pts])[: max(count, 2)]

    return SeparatingSet(
        implicit_fn=expr, bounded=False, point_sampler=sampler,
        exact_norm_distance=lambda x: abs(float(as_point(x)[axis]) - offset),
        name=f"plane(x{axis}={offset})")


def sphere_separator(radius: float, center=None, dim: int = 2) -> SeparatingSet:
    """The sphere of given radius (bounded separator), inside is the s<0 side."""
    c = np.zeros(dim) if center is None else as_point(center)
    expr = sum_of(*[(coord(i) + const(-c[i])) ** 2 if c[i] else coord(i) ** 2
                    for i in range(dim)], const(-radius ** 2))

    def sampler(rng, center_pt, count):
        p = as_point(center_pt)
        v = p - c
        nv = np.linalg.norm(v)
        base = c + radius * (v / nv if nv > 1e-12 else np.eye(dim)[0])
        pts = [base]
        for s in (0.1, 0.35, 1.0):
            raw = base[None, :] + rng.normal(size=(max(count // 3, 1), dim)) * s * radius
            w = raw - c[None, :]
            w *= radius / np.maximum(np.linalg.norm(w, axis=1), 1e-12)[:, None]
            pts.append(c[None, :] + w)
        return np.vstack([np.atleast_2d(q) for q in pts])[: max(count, 2)]

    return SeparatingSet(
        implicit_fn=expr, bounded=True, point_sampler=sampler,
        exact_norm_distance=lambda x: abs(float(np.linalg.norm(as_point(x) - c)) - radius),
        name=f"sphere(r={radius})")


@dataclass(frozen=True)
class LevelRestrictedSet:
    """F_level = F intersected with the super-level set {phi >= level}."""

    base: SeparatingSet
    phi: Expr
    level: float

    @property
    def level_tol(self) -> float:
        return LEVEL_TOL_SCALE * (1.0 + abs(self.level))

    def admissible(self, ys: np.ndarray) -> np.ndarray:
        """Level filter for candidate points already lying on F."""
        ys = np.atleast_2d(ys)
        return np.asarray(evaluate(self.phi, ys)) >= self.level - self.level_tol

    def contains(self, y) -> bool:
        p = as_point(y)
        on_surface = abs(self.base.value(p)) <= self.base.surface_tol(p)
        return bool(on_surface and self.admissible(p[None, :])[0])


def _rng_for(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def _project_newton(sep: SeparatingSet, x: np.ndarray, max_iter: int = 40):
    """Newton steps for s(y) = 0 starting at x; None if it fails to settle."""
    y = x.copy()
    for _ in range(max_iter):
        v = float(sep.value(y))
        if abs(v) <= 0.1 * sep.surface_tol(y):
            return y
        grads = active_pieces(sep.implicit_fn, y)
        g = grads[0]
        gn = float(g @ g)
        if gn < 1e-300 or not np.isfinite(gn):
            return None
        y = y - v * g / gn
        if not np.all(np.isfinite(y)):
            return None
    return y if abs(float(sep.value(y))) <= sep.surface_tol(y) else None


def _project_bisection(sep: SeparatingSet, x: np.ndarray, direction: np.ndarray):
    """Bracket a sign change of s along a ray from x, then refine it."""
    s0 = float(sep.value(x))
    scale = 1.0 + np.linalg.norm(x)
    lo = 0.0
    for t in scale * np.array([0.25, 0.5, 1.0, 2.0, 4.0, 8.0]):
        if s0 * float(sep.value(x + t * direction)) < 0.0:
            f = lambda u: float(sep.value(x + u * direction))
            root = optimize.brentq(f, lo, t, xtol=1e-14)
            return x + root * direction
        lo = t
    return None


def sample_set_points(F: LevelRestrictedSet, x, sample_budget: int = 64,
                      rng=None) -> np.ndarray:
    """Admissible points of F_level near ``x``; raises if none can be found."""
    p = as_point(x)
    gen = _rng_for(rng)
    cands = []
    if sample_budget > 0:
        if F.base.point_sampler is not None:
            cands.append(np.atleast_2d(F.base.point_sampler(gen, p, sample_budget)))
        y0 = _project_newton(F.base, p)
        if y0 is not None:
            cands.append(y0[None, :])
        n_dirs = max(2, sample_budget // 8) if F.base.point_sampler is None else 2
        dirs = [(-p / np.linalg.norm(p)) if np.linalg.norm(p) > 1e-12 else None]
        dirs += [gen.normal(size=p.size) for _ in range(n_dirs)]
        for d in dirs:
            if d is None:
                continue
            d = d / np.linalg.norm(d)
            y = _project_bisection(F.base, p, d)
            if y is not None:
                cands.append(y[None, :])
    if not cands:
        raise SetEmptyError("no candidate points of the separating set were found "
                            f"(sample_budget={sample_budget})")
    ys = np.vstack(cands)
    keep = F.admissible(ys)
    ys = ys[keep]
    if ys.shape[0] == 0:
        raise SetEmptyError("no sampled point of the separating set passed the level filter")
    return ys


def dist_delta_to_set(x, F: LevelRestrictedSet, sample_budget: int = 64,
                      rng=None, mode: str = "fast",
                      quad_points_per_segment: int = 16) -> float:
    """Upper estimate of the delta distance from ``x`` to F_level.

    ``fast`` measures straight segments to sampled points of the set;
    ``accurate`` additionally runs the polyline optimizer to the closest few.
    For a point of the set itself the distance is reported as exactly 0.
    """
    p = as_point(x)
    if mode not in ("fast", "accurate"):
        raise UsageError(f"unknown mode {mode!r}")
    if F.contains(p):
        return 0.0
    ys = sample_set_points(F, p, sample_budget, rng)
    lens = straight_lengths(p, ys, quad_points_per_segment)
    best = float(np.min(lens))
    if mode == "accurate":
        order = np.argsort(lens)[:3]
        for i in order:
            best = min(best, delta_distance(p, ys[i], interior_nodes=4, iters=80,
                                            quad_points_per_segment=quad_points_per_segment))
    return best


def dist_norm_to_set(x, F: LevelRestrictedSet, sample_budget: int = 64, rng=None) -> float:
    """Euclidean analogue of :func:`dist_delta_to_set` (upper estimate)."""
    p = as_point(x)
    if F.contains(p):
        return 0.0
    best = np.inf
    if F.base.exact_norm_distance is not None:
        # exact only when the level filter is inactive at the foot point; the
        # sampled fallback below keeps the estimate honest otherwise
        y0 = _project_newton(F.base, p)
        if y0 is not None and F.admissible(y0[None, :])[0]:
            return float(np.linalg.norm(p - y0))
    ys = sample_set_points(F, p, sample_budget, rng)
    best = float(np.min(np.linalg.norm(ys - p[None, :], axis=1)))
    return best


def dist_delta_batch(points: np.ndarray, F: LevelRestrictedSet, threshold: float,
                     rng_seed: int = 0, sample_budget: int = 32,
                     mode: str = "fast") -> np.ndarray:
    """Delta distances for many points, short-circuited above ``threshold``.

    Entries whose closed-form lower bound already exceeds the threshold are
    returned as +inf (their exact value cannot matter to a penalty with that
    cutoff); the rest get the full estimator with a per-point child seed.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.full(pts.shape[0], np.inf)
    norms = np.linalg.norm(pts, axis=1)
    if F.base.exact_norm_distance is not None:
        nd = np.array([F.base.exact_norm_distance(q) for q in pts])
        lower = np.log1p(nd / (1.0 + norms))
        needs = lower < threshold
    else:
        needs = np.ones(pts.shape[0], dtype=bool)
    for i in np.flatnonzero(needs):
        out[i] = dist_delta_to_set(pts[i], F, sample_budget,
                                   rng=np.random.default_rng([rng_seed, i]), mode=mode)
    return out


# ------------------------------------------------------------------ penalty

def psi_from_dist(dist, eps: float):
    """Penalty value from a known distance: max(0, eps^2 - eps*dist)."""
    d = np.asarray(dist, dtype=float)
    val = np.maximum(0.0, eps * eps - eps * np.where(np.isfinite(d), d, np.inf))
    return float(val) if np.isscalar(dist) or d.ndim == 0 else val


def psi_penalty(x, F: LevelRestrictedSet, eps: float, sample_budget: int = 64,
                rng=None, mode: str = "fast") -> float:
    """Proximity penalty: eps^2 on F_level, decaying to 0 at delta-distance eps.

    Lipschitz with constant eps in the distance argument, values in [0, eps^2].
    """
    if eps <= 0.0:
        raise UsageError("eps must be positive")
    d = dist_delta_to_set(x, F, sample_budget, rng, mode)
    return psi_from_dist(d, eps)


# ---------------------------------------------------------- crossing window

def crossing_window(path, F: LevelRestrictedSet, eps: float,
                    sample_budget: int = 64, rng=None,
                    dist_profile: np.ndarray | None = None) -> tuple:
    """Last departure from the far side and first far arrival beyond it.

    Scans the path's evaluation grid for the predicates "in the s<0 region at
    delta-distance >= eps from F_level" (giving t0 as the last such parameter)
    and the mirrored predicate on the s>0 side after t0 (giving t1), each
    refined by bisection between grid neighbours.  Between t0 and t1 the path
    stays within eps of F_level.

    ``dist_profile`` may carry precomputed grid distances for repeated calls
    on the same path.
    """
    params = path.eval_params()
    pts = path.at(params)
    sides = np.asarray(evaluate(F.base.implicit_fn, pts))

    if not (sides[0] < 0.0 < sides[-1]):
        raise TopologyError(
            "path endpoints do not lie on opposite sides of the separator "
            f"(s(start)={sides[0]:.3g}, s(end)={sides[-1]:.3g})")

    d0 = dist_delta_to_set(path.at(0.0), F, sample_budget, rng, "accurate")
    d1 = dist_delta_to_set(path.at(1.0), F, sample_budget, rng, "accurate")
    bound = 0.5 * min(1.0, d0, d1)
    if not eps < bound:
        raise PreconditionError(
            f"eps={eps:.6g} is not below half of min(1, endpoint distances "
            f"{d0:.6g}, {d1:.6g}) = {bound:.6g}")

    if dist_profile is None:
        dist_profile = dist_delta_batch(pts, F, threshold=1.05 * eps,
                                        sample_budget=sample_budget)
    far = dist_profile >= eps

    def dist_at(t):
        return dist_delta_to_set(path.at(float(t)), F, sample_budget,
                                 rng=np.random.default_rng([17, int(1e9 * t)]))

    flag0 = (sides < 0.0) & far
    if not np.any(flag0):
        raise TopologyError("path has no point in the s<0 region at distance >= eps; "
                            "cannot anchor a crossing window")
    i0 = int(np.flatnonzero(flag0)[-1])
    if i0 == len(params) - 1:
        raise TopologyError("path never leaves the far s<0 region")

    def pred0(t):
        x = path.at(float(t))
        return float(F.base.value(x)) < 0.0 and dist_at(t) >= eps

    lo, hi = params[i0], params[i0 + 1]
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if pred0(mid):
            lo = mid
        else:
            hi = mid
    t0 = float(lo)

    def pred1(t):
        x = path.at(float(t))
        return float(F.base.value(x)) > 0.0 and dist_at(t) >= eps

    flag1 = (sides > 0.0) & far & (params >= t0)
    if not np.any(flag1):
        raise TopologyError("path never reaches the s>0 region at distance >= eps "
                            "after the crossing window opens")
    i1 = int(np.flatnonzero(flag1)[0])
    lo, hi = params[max(i1 - 1, 0)], params[i1]
    if pred1(lo):
        t1 = float(lo)
    else:
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            if pred1(mid):
                hi = mid
            else:
                lo = mid
        t1 = float(hi)

    if not (0.0 < t0 < t1 < 1.0):
        raise TopologyError(f"degenerate crossing window [{t0}, {t1}]")
    return t0, t1
