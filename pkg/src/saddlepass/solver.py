"""Min-max search with per-iterate certificates.

The pipeline estimates the pass level by lowering the max of the functional
along an endpoint-locked path, extracts the separator-crossing window, and
works in the window's competitor space: an Ekeland-style selection stabilizes
the penalized witness, then partition-of-unity deformation fields either push
the near-max set down or expose a near-critical point, which is returned with
a certificate recording the scaled subgradient norm, the level gap, and the
distance to the crossing set.  Driving the tolerance eps to zero along
eps_n = 1/n yields the certified sequence; a Cauchy tail of its points is the
numerical critical point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .clarke import descent_direction, gen_dir_derivative, min_norm_element, subdifferential
from .errors import (CertificateError, PreconditionError, SlopeParadoxError,
                     TopologyError, UsageError, WindowError)
from .functionals import Expr, evaluate
from .geometry import (LevelRestrictedSet, crossing_window, delta_lower_bound,
                       dist_delta_to_set, dist_norm_to_set, psi_from_dist)
from .paths import MaxSet, Path, SubPath, deform, path_max, rho, straight_path
from .problems import MinMaxProblem


@dataclass(frozen=True)
class SolverParams:
    """Tunables for the whole pipeline; defaults follow the documented study."""

    grid_m: int = 64
    n_max: int = 50
    h0: float = 1.0
    beta: float = 0.5
    h_min: float = 1e-10
    move_budget: int = 200
    max_sweeps: int = 40
    max_outer: int = 200
    max_rounds: int = 60
    max_grid_refinements: int = 3
    sample_budget: int = 32
    conv_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise UsageError("beta must lie in (0, 1)")
        if self.grid_m < 4:
            raise UsageError("grid_m must be >= 4")
        if min(self.move_budget, self.max_sweeps, self.max_outer,
               self.max_rounds, self.sample_budget) < 1:
            raise UsageError("budgets must be >= 1")
        if self.n_max < 1:
            raise UsageError("n_max must be >= 1")
        if not 0.0 < self.h_min < self.h0:
            raise UsageError("need 0 < h_min < h0")


def near_tol_for(eps: float) -> float:
    """Width of the near-max band: eps^2/8 absorbs grid noise while staying
    well inside the eps^2/4 selection slack."""
    return eps * eps / 8.0


def cert_tol_for(gamma_est: float) -> float:
    return 1e-6 * (1.0 + abs(gamma_est))


# ------------------------------------------------------- level estimation

@dataclass(frozen=True)
class GammaEstimate:
    """Upper bound for the pass level with the path that witnesses it."""

    value: float
    witness: Path
    history: tuple
    converged: bool
    iterations: int
    message: str = ""


def _phi_nodes(phi: Expr, nodes: np.ndarray) -> np.ndarray:
    return np.asarray(evaluate(phi, nodes), dtype=float)


def minimize_max_over_paths(problem: MinMaxProblem,
                            params: SolverParams = SolverParams()) -> GammaEstimate:
    """Lower the max of the functional along an endpoint-locked path.

    Near-max nodes are moved along certified descent directions (hat-shaped,
    one node at a time, then the whole near-max cluster at once) with a
    backtracking step; the achieved max is nonincreasing by construction and
    its final value is the level estimate.  A path through an exact saddle is
    already optimal and is returned unchanged.
    """
    problem.validate()
    path = straight_path(problem.z0, problem.z1, params.grid_m)
    phi = problem.phi
    vals = _phi_nodes(phi, path.nodes)
    current = float(np.max(vals))
    if not (vals[0] < current and vals[-1] < current):
        raise PreconditionError(
            f"endpoints are not below the initial path max "
            f"(phi(z0)={vals[0]:.6g}, phi(z1)={vals[-1]:.6g}, max={current:.6g})")

    history = [current]
    converged = False
    message = ""
    for it in range(params.max_outer):
        cluster_tol = 1e-7 * (1.0 + abs(current))
        cluster = np.flatnonzero(vals >= current - cluster_tol)
        cluster = cluster[(cluster > 0) & (cluster < path.m)]
        if cluster.size == 0:
            # max sits at an endpoint, nothing movable
            converged, message = True, "max pinned at an endpoint"
            break

        moves = []
        for j in cluster:
            res = descent_direction(subdifferential(phi, path.nodes[j]),
                                    margin=1e-9 * (1.0 + abs(current)))
            moves.append((int(j), res))
        if all(r.near_critical for _, r in moves):
            converged, message = True, "near-max cluster is critical"
            break

        def try_nodes(indices_dirs):
            nonlocal path, vals, current
            h = params.h0
            while h >= params.h_min:
                nodes = path.nodes.copy()
                for j, d in indices_dirs:
                    nodes[j] = nodes[j] + h * d
                cand = _phi_nodes(phi, nodes)
                cand_max = float(np.max(cand))
                if cand_max < current - 1e-14 * (1.0 + abs(current)):
                    path = Path(nodes)
                    vals, current = cand, cand_max
                    return True
                h *= params.beta
            return False

        improved = False
        for j, res in moves:
            if res.near_critical:
                continue
            if try_nodes([(j, res.direction)]):
                improved = True
                break
        if not improved and len(moves) > 1:
            bundle = [(j, r.direction) for j, r in moves if not r.near_critical]
            if bundle:
                improved = try_nodes(bundle)
        if not improved:
            converged, message = True, "no descending step at the near-max cluster"
            break
        history.append(current)
        if len(history) >= 2:
            rel = (history[-2] - history[-1]) / (1.0 + abs(history[-1]))
            if rel < 1e-10:
                converged, message = True, "relative improvement below 1e-10"
                break
    else:
        message = "iteration budget exhausted; value is still a valid upper bound"

    return GammaEstimate(value=current, witness=path, history=tuple(history),
                         converged=converged, iterations=len(history) - 1,
                         message=message)


# ----------------------------------------------------------- path objective

class PathObjective:
    """Penalized max along subpaths with point-keyed distance caching.

    The separator distance is the expensive part of the objective; keyed by
    node coordinates it is shared between candidate paths that differ in a
    few nodes, and the per-point seed keeps every estimate reproducible
    regardless of evaluation order.
    """

    def __init__(self, phi: Expr, F: LevelRestrictedSet, eps: float,
                 sample_budget: int = 32, seed: int = 0):
        if eps <= 0.0:
            raise UsageError("eps must be positive")
        self.phi = phi
        self.F = F
        self.eps = eps
        self.sample_budget = sample_budget
        self.seed = seed
        self._dist = {}

    def node_dist(self, x: np.ndarray) -> float:
        key = x.tobytes()
        hit = self._dist.get(key)
        if hit is not None:
            return hit
        if self.F.base.exact_norm_distance is not None:
            lower = delta_lower_bound(x, self.F.base.exact_norm_distance(x))
            if lower >= self.eps:
                self._dist[key] = np.inf
                return np.inf
        d = dist_delta_to_set(x, self.F, self.sample_budget,
                              rng=np.random.default_rng((self.seed, 9173)))
        self._dist[key] = d
        return d

    def dists(self, nodes: np.ndarray) -> np.ndarray:
        return np.array([self.node_dist(x) for x in nodes])

    def totals(self, f: SubPath) -> np.ndarray:
        phi_vals = _phi_nodes(self.phi, f.nodes)
        return phi_vals + psi_from_dist(self.dists(f.nodes), self.eps)

    def value(self, f: SubPath) -> float:
        return float(np.max(self.totals(f)))

    def max_set(self, f: SubPath, near_tol: float):
        return path_max(f, self.phi, self.F, self.eps, near_tol,
                        dist_values=self.dists(f.nodes))


# -------------------------------------------------------- Ekeland selection

@dataclass(frozen=True)
class EkelandResult:
    path: SubPath
    value: float
    start_value: float
    rho_to_start: float
    accepted_moves: int
    sweeps: int


def ekeland_move_set(f: SubPath, objective: PathObjective, eps: float,
                     params: SolverParams = SolverParams()):
    """Finite candidate moves at the current path, deterministically ordered.

    Per near-max node: steps along its certified descent direction at a few
    eps-scaled lengths.  Then whole-field moves from the current deformation
    field (when one exists) at a geometric ladder of steps.  Near-critical
    nodes generate nothing, which makes exact saddles fixed points of the
    selection.
    """
    totals = objective.totals(f)
    value = float(np.max(totals))
    tol = near_tol_for(eps)
    idx = np.flatnonzero(totals >= value - tol)
    moves = []

    for j in idx:
        if j == 0 or j == f.m:
            continue
        res = descent_direction(subdifferential(objective.phi, f.nodes[j]),
                                margin=1.5 * eps)
        if res.near_critical:
            continue
        for sigma in (0.5 * eps, 0.1 * eps, 0.02 * eps):
            v = np.zeros_like(f.nodes)
            v[j] = res.direction
            moves.append((f"node[{j}]*{sigma:.3g}", deform(f, v, sigma)))

    outcome = build_deformation_field(f, MaxSet(value, f.params[idx], idx), eps,
                                      objective, allow_endpoint_check=False)
    if isinstance(outcome, DeformationField):
        h = params.h0
        for _ in range(7):
            moves.append((f"field*{h:.3g}", deform(f, outcome.node_vectors, h)))
            h *= params.beta
    return moves


def ekeland_select(c_hat: SubPath, objective: PathObjective, eps: float,
                   params: SolverParams = SolverParams()) -> EkelandResult:
    """Stabilize a near-optimal witness subpath.

    Accepts a candidate move only on strict improvement: the penalized max
    must drop by more than (eps/2) times the move's path distance, and the
    result must stay within eps/2 of the start.  On return (i) the value has
    not increased, (ii) the selected path is within eps/2 of the start, and
    (iii) no candidate in the move set still offers such an improvement.
    """
    start_value = objective.value(c_hat)
    f = c_hat
    value = start_value
    accepted = 0
    sweeps = 0
    for sweeps in range(1, params.max_sweeps + 1):
        moved = False
        for label, cand in ekeland_move_set(f, objective, eps, params):
            step = rho(cand, f)
            cand_value = objective.value(cand)
            slack = 1e-14 * (1.0 + abs(value))
            if cand_value >= value - 0.5 * eps * step - slack:
                continue
            if rho(cand, c_hat) > 0.5 * eps:
                continue
            f, value = cand, cand_value
            accepted += 1
            moved = True
            if accepted >= params.move_budget:
                break
        if not moved or accepted >= params.move_budget:
            break
    return EkelandResult(path=f, value=value, start_value=start_value,
                         rho_to_start=rho(f, c_hat), accepted_moves=accepted,
                         sweeps=sweeps)


# ------------------------------------------------------- deformation fields

@dataclass(frozen=True)
class DeformationField:
    """Node-wise velocities blended from per-center descent directions."""

    node_vectors: np.ndarray
    center_indices: np.ndarray
    center_directions: np.ndarray
    center_slopes: np.ndarray


@dataclass(frozen=True)
class NearCritical:
    """A near-max parameter whose scaled min-norm already meets the target."""

    index: int
    param: float
    point: np.ndarray
    min_norm: float
    scaled_min_norm: float


def build_deformation_field(f: SubPath, M: MaxSet, eps: float,
                            objective: PathObjective,
                            allow_endpoint_check: bool = True):
    """Either a descent field on the near-max set or a near-critical point.

    Every near-max node is a cover center: its min-norm subgradient supplies
    the direction, hat weights (1 at the center, 0 at the adjacent grid
    nodes) blend the directions, and the blended vectors are clipped to the
    norm bound 1 + |f(t_j)|.  If any center's scaled min-norm is at most
    (3/2) eps the construction stops and reports that candidate instead.
    """
    if M.indices.size == 0:
        raise UsageError("near-max set is empty")
    if allow_endpoint_check and (M.touches(0) or M.touches(f.m)):
        raise WindowError(
            "near-max set touches the window endpoints; the crossing window "
            "must be re-derived before deforming")

    totals = None
    centers, dirs, slopes = [], [], []
    best_near = None
    order = np.argsort(-M.members) if False else M.indices  # ascending index
    for j in order:
        j = int(j)
        if j == 0 or j == f.m:
            continue
        x = f.nodes[j]
        res = descent_direction(subdifferential(objective.phi, x),
                                margin=1.5 * eps)
        scaled = (1.0 + float(np.linalg.norm(x))) * res.min_norm
        if res.near_critical:
            if totals is None:
                totals = objective.totals(f)
            cand = NearCritical(index=j, param=float(f.params[j]), point=x.copy(),
                                min_norm=res.min_norm, scaled_min_norm=scaled)
            if best_near is None or totals[j] > totals[best_near.index]:
                best_near = cand
            continue
        centers.append(j)
        dirs.append(res.direction)
        slopes.append(res.slope_bound)
    if best_near is not None:
        return best_near
    if not centers:
        raise UsageError("near-max set contains only window endpoints")

    centers = np.asarray(centers)
    dirs = np.asarray(dirs)
    slopes = np.asarray(slopes)

    v = np.zeros_like(f.nodes)
    v[centers] = dirs
    # hat support is one grid cell per side, so distinct centers never mix on
    # the grid and each center keeps its certified slope exactly
    caps = 1.0 + np.linalg.norm(f.nodes, axis=1)
    norms = np.linalg.norm(v, axis=1)
    over = norms > caps
    if np.any(over):
        v[over] *= (caps[over] / norms[over])[:, None]
    v[0] = 0.0
    v[-1] = 0.0

    field = DeformationField(node_vectors=v, center_indices=centers,
                             center_directions=dirs, center_slopes=slopes)
    _validate_field(field, f, eps, objective)
    return field


def _validate_field(field: DeformationField, f: SubPath, eps: float,
                    objective: PathObjective) -> None:
    v = field.node_vectors
    if np.any(v[0] != 0.0) or np.any(v[-1] != 0.0):
        raise CertificateError("deformation field moves a window endpoint")
    caps = 1.0 + np.linalg.norm(f.nodes, axis=1)
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms > caps * (1.0 + 1e-12)):
        raise CertificateError("deformation field exceeds its norm bound")
    for j, u in zip(field.center_indices, field.center_directions):
        slope = gen_dir_derivative(subdifferential(objective.phi, f.nodes[int(j)]), u)
        if not slope < -1.5 * eps + 1e-9 * (1.0 + abs(slope)):
            raise CertificateError(
                f"certified slope failed at node {j}: {slope:.6g} vs {-1.5 * eps:.6g}")


def deformation_round(f: SubPath, field: DeformationField, eps: float,
                      objective: PathObjective,
                      params: SolverParams = SolverParams()) -> SubPath:
    """Backtracking step along the field; accepts a strict Ekeland violation.

    The accepted step decreases the penalized max by more than (eps/2) times
    the path distance moved.  If no step down to h_min qualifies, the grid is
    too coarse to realize the certified slopes and a slope paradox is raised
    for the caller to refine.
    """
    base = objective.value(f)
    h = params.h0
    while h >= params.h_min:
        cand = deform(f, field.node_vectors, h)
        step = rho(cand, f)
        if objective.value(cand) < base - 0.5 * eps * step - 1e-14 * (1.0 + abs(base)):
            return cand
        h *= params.beta
    raise SlopeParadoxError(
        f"no step of the deformation field down to h_min={params.h_min:g} "
        f"beats the Ekeland threshold at value {base:.9g} "
        f"(grid m={f.m}; refine and retry)", h_last=h / params.beta)


# ------------------------------------------------------------ certificates

@dataclass(frozen=True)
class CpsCertificate:
    """Per-eps record of the three certified quantities and their context."""

    n: int
    eps: float
    x: np.ndarray
    phi_val: float
    min_norm: float
    scaled_min_norm: float
    dist_delta_F: float
    dist_norm_F: float
    gamma_est: float
    path_value: float
    rho_selection: float
    window: tuple
    sub_m: int

    def check(self) -> None:
        tol = cert_tol_for(self.gamma_est)
        if self.scaled_min_norm > 1.5 * self.eps + tol:
            raise CertificateError(
                f"scaled min-norm {self.scaled_min_norm:.6g} exceeds "
                f"1.5*eps = {1.5 * self.eps:.6g} (n={self.n})")
        lo, hi = self.gamma_est - tol, self.gamma_est + 1.25 * self.eps ** 2 + tol
        if not lo <= self.phi_val <= hi:
            raise CertificateError(
                f"phi value {self.phi_val:.9g} outside [{lo:.9g}, {hi:.9g}] "
                f"(n={self.n})")
        if self.dist_delta_F > 1.5 * self.eps + tol:
            raise CertificateError(
                f"distance to the crossing set {self.dist_delta_F:.6g} exceeds "
                f"1.5*eps = {1.5 * self.eps:.6g} (n={self.n})")


def refine_subpath(f: SubPath, new_m: int) -> SubPath:
    """Same trace on a finer window grid."""
    ts = np.linspace(f.t0, f.t1, new_m + 1)
    return SubPath(f.at(ts), f.t0, f.t1)


def cps_step(problem: MinMaxProblem, gamma: GammaEstimate, eps: float,
             params: SolverParams = SolverParams(),
             caches: dict | None = None) -> CpsCertificate:
    """One certified iterate at tolerance eps.

    Window extraction, selection, and deformation rounds run until a
    near-critical near-max point appears; its certificate is validated before
    being returned.  A slope paradox refines the window grid (up to the
    configured number of doublings) and retries.
    """
    caches = caches if caches is not None else {}
    F = caches.get("F")
    if F is None:
        F = LevelRestrictedSet(base=problem.separator, phi=problem.phi,
                               level=gamma.value)
        caches["F"] = F

    witness = gamma.witness
    profile = caches.get("profile")
    if profile is None or caches.get("profile_eps", 0.0) < eps:
        from .geometry import dist_delta_batch
        profile = dist_delta_batch(witness.nodes, F, threshold=1.05 * eps,
                                   rng_seed=params.seed,
                                   sample_budget=params.sample_budget)
        caches["profile"] = profile
        caches["profile_eps"] = eps

    t0, t1 = crossing_window(witness, F, eps,
                             sample_budget=params.sample_budget,
                             rng=np.random.default_rng((params.seed, 11)),
                             dist_profile=profile)

    objective = PathObjective(problem.phi, F, eps,
                              sample_budget=params.sample_budget,
                              seed=params.seed)
    sub_m = params.grid_m
    c_hat = SubPath.from_path(witness, t0, t1, sub_m)

    pre_tol = cert_tol_for(gamma.value)
    start_value = objective.value(c_hat)
    if start_value > gamma.value + 1.25 * eps * eps + pre_tol:
        raise PreconditionError(
            f"witness subpath value {start_value:.9g} exceeds the selection "
            f"band {gamma.value + 1.25 * eps * eps:.9g}; the level estimate "
            f"is stale")

    refinements = 0
    selection = ekeland_select(c_hat, objective, eps, params)
    f_hat = selection.path
    for _ in range(params.max_rounds):
        value, M = objective.max_set(f_hat, near_tol_for(eps))
        outcome = build_deformation_field(f_hat, M, eps, objective)
        if isinstance(outcome, NearCritical):
            x = outcome.point
            cert = CpsCertificate(
                n=caches.get("n", 0), eps=eps, x=x,
                phi_val=float(evaluate(problem.phi, x)),
                min_norm=outcome.min_norm,
                scaled_min_norm=outcome.scaled_min_norm,
                dist_delta_F=dist_delta_to_set(
                    x, F, params.sample_budget,
                    rng=np.random.default_rng((params.seed, 29)),
                    mode="accurate"),
                dist_norm_F=dist_norm_to_set(
                    x, F, params.sample_budget,
                    rng=np.random.default_rng((params.seed, 31))),
                gamma_est=gamma.value, path_value=value,
                rho_selection=selection.rho_to_start,
                window=(t0, t1), sub_m=f_hat.m)
            cert.check()
            return cert
        try:
            f_hat = deformation_round(f_hat, outcome, eps, objective, params)
        except SlopeParadoxError:
            if refinements >= params.max_grid_refinements:
                raise
            refinements += 1
            sub_m *= 2
            f_hat = refine_subpath(f_hat, sub_m)
            selection = ekeland_select(f_hat, objective, eps, params)
            f_hat = selection.path
    raise CertificateError(
        f"deformation rounds exhausted at eps={eps:.6g} without reaching a "
        f"near-critical point")


@dataclass(frozen=True)
class CpsSequenceResult:
    certificates: tuple
    failures: tuple
    gamma: GammaEstimate
    n_min: int
    n_max: int
    message: str = ""


def smallest_admissible_n(d0: float, d1: float) -> int:
    """Least n with 1/n strictly below half of min(1, endpoint distances)."""
    bound = 0.5 * min(1.0, d0, d1)
    if bound <= 0.0:
        raise PreconditionError("endpoint lies on the crossing set")
    n = int(np.floor(1.0 / bound)) + 1
    while 1.0 / n >= bound:
        n += 1
    return n


def cps_sequence(problem: MinMaxProblem,
                 params: SolverParams = SolverParams()) -> CpsSequenceResult:
    """Certificates along eps_n = 1/n from the first admissible n to n_max."""
    problem.validate()
    gamma = minimize_max_over_paths(problem, params)
    F = LevelRestrictedSet(base=problem.separator, phi=problem.phi,
                           level=gamma.value)
    rng = np.random.default_rng((params.seed, 5))
    d0 = dist_delta_to_set(problem.z0, F, params.sample_budget, rng, "accurate")
    d1 = dist_delta_to_set(problem.z1, F, params.sample_budget, rng, "accurate")
    n_min = smallest_admissible_n(d0, d1)
    if params.n_max < n_min:
        return CpsSequenceResult(
            certificates=(), failures=(), gamma=gamma, n_min=n_min,
            n_max=params.n_max,
            message=(f"no admissible tolerances: eps must be below "
                     f"{0.5 * min(1.0, d0, d1):.6g}, so n >= {n_min}, but "
                     f"n_max={params.n_max}"))

    caches: dict = {"F": F, "endpoint_dists": (d0, d1)}
    certs, failures = [], []
    for n in range(n_min, params.n_max + 1):
        caches["n"] = n
        try:
            certs.append(cps_step(problem, gamma, 1.0 / n, params, caches))
        except (CertificateError, PreconditionError, SlopeParadoxError,
                TopologyError, WindowError) as exc:
            failures.append((n, f"{type(exc).__name__}: {exc}"))
    return CpsSequenceResult(certificates=tuple(certs), failures=tuple(failures),
                             gamma=gamma, n_min=n_min, n_max=params.n_max)


# --------------------------------------------------- critical point / (CPS)

@dataclass(frozen=True)
class CriticalPointResult:
    converged: bool
    x: np.ndarray | None
    gamma: float
    sequence: CpsSequenceResult
    tail_spread: float
    final_min_norm: float | None
    clusters: tuple
    message: str


def _cluster_points(points: np.ndarray, radius: float):
    """Greedy radius clustering, densest first; enough for a failure report."""
    remaining = list(range(len(points)))
    clusters = []
    while remaining:
        counts = [sum(1 for j in remaining
                      if np.linalg.norm(points[i] - points[j]) <= radius)
                  for i in remaining]
        k = remaining[int(np.argmax(counts))]
        members = [j for j in remaining
                   if np.linalg.norm(points[k] - points[j]) <= radius]
        center = points[members].mean(axis=0)
        clusters.append((center, len(members)))
        remaining = [j for j in remaining if j not in members]
    return tuple(clusters)


def find_critical_point(problem: MinMaxProblem,
                        params: SolverParams = SolverParams()) -> CriticalPointResult:
    """Run the certified sequence and test its tail for convergence.

    Convergence is declared when the last five iterates are mutually within
    conv_tol; the last iterate is then returned after checking its level and
    subgradient norm.  Otherwise the certificate table and a clustering of
    the iterates are reported.
    """
    seq = cps_sequence(problem, params)
    certs = seq.certificates
    if len(certs) == 0:
        return CriticalPointResult(
            converged=False, x=None, gamma=seq.gamma.value, sequence=seq,
            tail_spread=np.inf, final_min_norm=None, clusters=(),
            message=seq.message or "no certificates produced")

    pts = np.array([c.x for c in certs])
    tail = pts[-min(5, len(pts)):]
    spread = 0.0
    for i in range(len(tail)):
        for j in range(i + 1, len(tail)):
            spread = max(spread, float(np.linalg.norm(tail[i] - tail[j])))
    x_bar = tail[-1]
    mn = min_norm_element(subdifferential(problem.phi, x_bar))[1]

    if len(tail) < 2 or spread >= params.conv_tol:
        return CriticalPointResult(
            converged=False, x=None, gamma=seq.gamma.value, sequence=seq,
            tail_spread=spread, final_min_norm=mn,
            clusters=_cluster_points(pts, 10.0 * params.conv_tol),
            message=(f"iterate tail is not Cauchy (spread {spread:.3g} >= "
                     f"conv_tol {params.conv_tol:g}); candidate cluster "
                     f"points reported"))

    problems = []
    phi_bar = float(evaluate(problem.phi, x_bar))
    if abs(phi_bar - seq.gamma.value) > params.conv_tol:
        problems.append(
            f"final level {phi_bar:.9g} is outside gamma_est +- conv_tol")
    if mn >= params.conv_tol:
        problems.append(
            f"final subgradient min-norm {mn:.3g} is not below conv_tol")
    if problems:
        return CriticalPointResult(
            converged=False, x=None, gamma=seq.gamma.value, sequence=seq,
            tail_spread=spread, final_min_norm=mn,
            clusters=_cluster_points(pts, 10.0 * params.conv_tol),
            message="; ".join(problems))

    return CriticalPointResult(
        converged=True, x=x_bar, gamma=seq.gamma.value, sequence=seq,
        tail_spread=spread, final_min_norm=mn, clusters=((x_bar, len(tail)),),
        message=f"tail of {len(tail)} iterates within {params.conv_tol:g}")


# ------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class CpsCheckReport:
    mode: str
    n_values: tuple
    dist_values: tuple
    level_gaps: tuple
    scaled_min_norms: tuple
    dist_envelope_ok: bool
    level_envelope_ok: bool
    min_norm_envelope_ok: bool
    fitted_constants: dict
    bounded_ratio: dict | None
    notes: tuple

    def lines(self):
        out = [f"(CPS) check, {self.mode} distance, {len(self.n_values)} certificates"]
        heads = (("dist -> 0", self.dist_values, self.dist_envelope_ok),
                 ("phi - gamma -> 0", self.level_gaps, self.level_envelope_ok),
                 ("scaled min-norm -> 0", self.scaled_min_norms,
                  self.min_norm_envelope_ok))
        for name, vals, ok in heads:
            tag = "ok" if ok else "FAILED"
            out.append(f"  {name}: first {vals[0]:.3e}, last {vals[-1]:.3e}, "
                       f"envelope {tag}")
        for k, v in self.fitted_constants.items():
            out.append(f"  fitted {k}: {v:.4g}")
        if self.bounded_ratio is not None:
            r = self.bounded_ratio
            out.append(f"  bounded separator: delta/norm distance ratio in "
                       f"[{r['min']:.4g}, {r['max']:.4g}], mean {r['mean']:.4g}")
        for n in self.notes:
            out.append(f"  note: {n}")
        return out


def check_cps(certs, problem: MinMaxProblem, mode: str = "delta") -> CpsCheckReport:
    """Report the three convergence conditions over a certificate table.

    ``mode`` picks which distance notion feeds condition (1): the weighted
    metric, or the Euclidean one, which is meaningful when the separator is
    norm-bounded; an unbounded separator in norm mode is flagged in the
    notes rather than rejected.
    """
    if mode not in ("norm", "delta"):
        raise UsageError(f"unknown mode {mode!r}")
    certs = list(certs)
    if len(certs) < 2:
        raise UsageError("need at least 2 certificates to judge a trend")

    ns = tuple(c.n for c in certs)
    eps = np.array([c.eps for c in certs])
    dist = np.array([c.dist_delta_F if mode == "delta" else c.dist_norm_F
                     for c in certs])
    gaps = np.array([abs(c.phi_val - c.gamma_est) for c in certs])
    smn = np.array([c.scaled_min_norm for c in certs])
    tol = cert_tol_for(certs[0].gamma_est)

    dist_ok = bool(np.all(dist <= 1.5 * eps + tol)) if mode == "delta" else \
        bool(np.all(dist <= np.max(dist[0]) + tol) and dist[-1] <= dist[0] + tol)
    level_ok = bool(np.all(gaps <= 1.25 * eps ** 2 + tol))
    smn_ok = bool(np.all(smn <= 1.5 * eps + tol))

    def fit(vals, powers):
        denom = float(np.sum(powers * powers))
        return float(np.sum(vals * powers) / denom) if denom > 0 else np.nan

    fitted = {
        "dist ~ c*eps": fit(dist[np.isfinite(dist)], eps[np.isfinite(dist)]),
        "level gap ~ c*eps^2": fit(gaps, eps ** 2),
        "scaled min-norm ~ c*eps": fit(smn, eps),
    }

    notes = []
    bounded = None
    if problem.separator.bounded:
        dn = np.array([c.dist_norm_F for c in certs])
        dd = np.array([c.dist_delta_F for c in certs])
        mask = dn > 1e-12
        if np.any(mask):
            ratio = dd[mask] / dn[mask]
            bounded = {"min": float(ratio.min()), "max": float(ratio.max()),
                       "mean": float(ratio.mean())}
        else:
            notes.append("all iterates lie on the crossing set; the "
                         "delta/norm ratio is undefined")
    elif mode == "norm":
        notes.append("separator is not norm-bounded: Euclidean distances "
                     "need not converge even when the weighted ones do")

    if mode == "norm" and not problem.separator.bounded:
        # trend judgement only; no envelope is available in this mode
        dist_ok = bool(dist[-1] <= dist[0] + tol)

    return CpsCheckReport(
        mode=mode, n_values=ns, dist_values=tuple(float(d) for d in dist),
        level_gaps=tuple(float(g) for g in gaps),
        scaled_min_norms=tuple(float(s) for s in smn),
        dist_envelope_ok=dist_ok, level_envelope_ok=level_ok,
        min_norm_envelope_ok=smn_ok, fitted_constants=fitted,
        bounded_ratio=bounded, notes=tuple(notes))
