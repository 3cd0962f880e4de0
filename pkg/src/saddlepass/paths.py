"""Discretized path space with locked endpoints.

Paths are polylines evaluated by linear interpolation on a uniform parameter
grid; competitor subpaths live on a window [t0, t1] with their endpoints
pinned to the parent path's values there.  This module supplies the penalized
max along a subpath with its near-max parameter set, the sup metric ``rho``
between subpaths, node-wise deformation, arclength-balanced resampling, and
splicing a reworked window back into the parent path.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import UsageError
from .functionals import Expr, as_point, evaluate
from .geometry import (LevelRestrictedSet, _segment_quadrature,
                       _segment_weighted_lengths, dist_delta_batch,
                       psi_from_dist)


def _check_nodes(nodes) -> np.ndarray:
    nd = np.asarray(nodes, dtype=float)
    if nd.ndim != 2 or nd.shape[0] < 3:
        raise UsageError(
            f"path needs at least 3 nodes (2 segments), got shape {nd.shape}")
    if not np.all(np.isfinite(nd)):
        raise UsageError("path nodes must be finite")
    return nd


def _interp(grid: np.ndarray, nodes: np.ndarray, t):
    """Piecewise-linear evaluation; scalar t gives a point, array gives rows."""
    tq = np.atleast_1d(np.asarray(t, dtype=float))
    lo, hi = grid[0], grid[-1]
    span = hi - lo
    if np.any(tq < lo - 1e-9 * (1 + span)) or np.any(tq > hi + 1e-9 * (1 + span)):
        raise UsageError(
            f"parameter out of range [{lo}, {hi}]: {tq.min()}..{tq.max()}")
    tq = np.clip(tq, lo, hi)
    idx = np.clip(np.searchsorted(grid, tq, side="right") - 1, 0, len(grid) - 2)
    denom = grid[idx + 1] - grid[idx]
    w = np.where(denom > 0, (tq - grid[idx]) / np.where(denom > 0, denom, 1.0), 0.0)
    out = nodes[idx] + w[:, None] * (nodes[idx + 1] - nodes[idx])
    if np.ndim(t) == 0:
        return out[0]
    return out


@dataclass(frozen=True)
class Path:
    """Polyline c: [0,1] -> R^n on the uniform grid t_j = j/m, endpoints locked."""

    nodes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _check_nodes(self.nodes))

    @property
    def m(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def params(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.m + 1)

    def eval_params(self) -> np.ndarray:
        return self.params

    def at(self, t):
        return _interp(self.params, self.nodes, t)

    def with_nodes(self, nodes: np.ndarray) -> "Path":
        nd = _check_nodes(nodes)
        if not (np.array_equal(nd[0], self.nodes[0])
                and np.array_equal(nd[-1], self.nodes[-1])):
            raise UsageError("path endpoints are locked")
        return Path(nd)


def straight_path(z0, z1, m: int = 64) -> Path:
    """The straight polyline from z0 to z1 on m segments."""
    a, b = as_point(z0), as_point(z1)
    if a.size != b.size:
        raise UsageError("endpoints have different dimensions")
    t = np.linspace(0.0, 1.0, m + 1)[:, None]
    return Path(a[None, :] + t * (b - a)[None, :])


@dataclass(frozen=True)
class SubPath:
    """Competitor on the window [t0, t1]; endpoints pinned to the parent values."""

    nodes: np.ndarray
    t0: float
    t1: float

    def __post_init__(self):
        object.__setattr__(self, "nodes", _check_nodes(self.nodes))
        if not self.t0 < self.t1:
            raise UsageError(f"empty window [{self.t0}, {self.t1}]")

    @classmethod
    def from_path(cls, parent: Path, t0: float, t1: float, m: int) -> "SubPath":
        if m < 2:
            raise UsageError("subpath needs at least 2 segments")
        ts = np.linspace(t0, t1, m + 1)
        return cls(parent.at(ts), float(t0), float(t1))

    @property
    def m(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    @property
    def params(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.m + 1)

    def eval_params(self) -> np.ndarray:
        return self.params

    def at(self, t):
        return _interp(self.params, self.nodes, t)


@dataclass(frozen=True)
class MaxSet:
    """Achieved penalized max and the parameters coming within near_tol of it."""

    level: float
    members: np.ndarray
    indices: np.ndarray

    def touches(self, index: int) -> bool:
        return bool(np.any(self.indices == index))


def path_max(f: SubPath, phi: Expr, F: LevelRestrictedSet, eps: float,
             near_tol: float, sample_budget: int = 32, rng_seed: int = 0,
             mode: str = "fast", dist_values: np.ndarray | None = None):
    """Penalized max of the functional along the subpath's grid.

    Returns the value of max_j (Phi + Psi)(f(t_j)) together with the near-max
    set {t_j : (Phi+Psi)(f(t_j)) >= value - near_tol}.  ``dist_values`` may
    carry precomputed separator distances for the grid to avoid re-estimation.
    """
    if near_tol < 0.0:
        raise UsageError("near_tol must be >= 0")
    phi_vals = np.asarray(evaluate(phi, f.nodes), dtype=float)
    if dist_values is None:
        dist_values = dist_delta_batch(f.nodes, F, threshold=eps,
                                       rng_seed=rng_seed,
                                       sample_budget=sample_budget, mode=mode)
    total = phi_vals + psi_from_dist(dist_values, eps)
    value = float(np.max(total))
    idx = np.flatnonzero(total >= value - near_tol)
    return value, MaxSet(level=value, members=f.params[idx], indices=idx)


def rho(f1: SubPath, f2: SubPath, quad_points_per_segment: int = 16) -> float:
    """Sup over the shared grid of the node-wise delta estimate.

    Node pairs are measured by their straight chord, an upper estimate
    consistent with every other delta use; for the radial single-node case
    that chord value is exact.
    """
    if abs(f1.t0 - f2.t0) > 1e-12 or abs(f1.t1 - f2.t1) > 1e-12:
        raise UsageError(
            f"subpaths live on different windows [{f1.t0},{f1.t1}] vs "
            f"[{f2.t0},{f2.t1}]")
    if f1.nodes.shape != f2.nodes.shape:
        raise UsageError(
            f"subpath grids differ: {f1.nodes.shape} vs {f2.nodes.shape}")
    d = f2.nodes - f1.nodes
    if not np.any(d):
        return 0.0
    lens = _segment_weighted_lengths(f1.nodes, d, quad_points_per_segment)
    return float(np.max(lens))


def deform(f: SubPath, v_field: np.ndarray, h: float) -> SubPath:
    """Move every node by h times its field vector; window endpoints must rest."""
    v = np.asarray(v_field, dtype=float)
    if v.shape != f.nodes.shape:
        raise UsageError(
            f"field shape {v.shape} does not match the node grid {f.nodes.shape}")
    if np.any(v[0] != 0.0) or np.any(v[-1] != 0.0):
        raise UsageError("deformation field must vanish at the window endpoints")
    if not np.isfinite(h):
        raise UsageError("step must be finite")
    return replace(f, nodes=f.nodes + h * v)


def reparametrize(p: Path, target_m: int,
                  quad_points_per_segment: int = 16) -> Path:
    """Resample to target_m segments at uniform delta-arclength spacing.

    The polyline trace is preserved up to linear interpolation; endpoints are
    carried over exactly.  Applying the operation twice moves nodes only by
    the remeasurement error of the segment lengths (~1e-9 relative).
    """
    if target_m < 2:
        raise UsageError("target_m must be >= 2")
    # arclength grows nonlinearly inside a segment (the weight varies along
    # it), so the cumulative map is measured on a refined subdivision before
    # being inverted
    refine = 16
    dense_t = np.linspace(0.0, 1.0, p.m * refine + 1)
    dense_nodes = p.at(dense_t)
    seg = _segment_quadrature(dense_nodes, quad_points_per_segment)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= 0.0:
        raise UsageError("cannot reparametrize a zero-length path")
    targets = np.linspace(0.0, cum[-1], target_m + 1)
    src = np.interp(targets, cum, dense_t)
    nodes = p.at(src)
    nodes[0], nodes[-1] = p.nodes[0], p.nodes[-1]
    return Path(nodes)


def spliced(parent: Path, sub: SubPath, m: int | None = None) -> Path:
    """Replace the parent's trace over [t0, t1] by the subpath, then resample
    back onto the uniform grid (parent's m by default)."""
    m_out = parent.m if m is None else m
    pp = parent.params
    left = pp < sub.t0 - 1e-12
    right = pp > sub.t1 + 1e-12
    params = np.concatenate([pp[left], sub.params, pp[right]])
    nodes = np.vstack([parent.nodes[left], sub.nodes, parent.nodes[right]])
    out = _interp(params, nodes, np.linspace(0.0, 1.0, m_out + 1))
    out[0], out[-1] = parent.nodes[0], parent.nodes[-1]
    return Path(out)


def path_node_table(f, phi: Expr, F: LevelRestrictedSet, eps: float,
                    sample_budget: int = 32, rng_seed: int = 0,
                    mode: str = "fast",
                    dist_values: np.ndarray | None = None) -> dict:
    """Per-node columns (t, coordinates, Phi, Psi, total) for dumps and plots."""
    params = f.eval_params()
    phi_vals = np.asarray(evaluate(phi, f.nodes), dtype=float)
    if dist_values is None:
        dist_values = dist_delta_batch(f.nodes, F, threshold=eps,
                                       rng_seed=rng_seed,
                                       sample_budget=sample_budget, mode=mode)
    psi_vals = psi_from_dist(dist_values, eps)
    return {
        "t": params,
        "nodes": f.nodes,
        "phi": phi_vals,
        "psi": psi_vals,
        "total": phi_vals + psi_vals,
    }
