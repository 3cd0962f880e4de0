"""Benchmark problem library.

Each problem bundles a functional, two endpoints in wells below the pass
level, and a separating hypersurface every admissible path must cross.  Where
a closed-form saddle is known the reference level and point are attached so
tests and reports can measure solver error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TopologyError, UsageError
from .functionals import (Expr, abs_of, arity, as_point, const, coord,
                          evaluate, min_of, product_of, sum_of)
from .geometry import SeparatingSet, hyperplane_separator, sphere_separator


@dataclass(frozen=True)
class MinMaxProblem:
    """A min-max search instance: functional, endpoints, separator, references."""

    name: str
    phi: Expr
    z0: np.ndarray
    z1: np.ndarray
    separator: SeparatingSet
    gamma_ref: float | None = None
    saddle_ref: np.ndarray | None = None
    description: str = ""

    def __post_init__(self):
        object.__setattr__(self, "z0", as_point(self.z0))
        object.__setattr__(self, "z1", as_point(self.z1))
        if self.saddle_ref is not None:
            object.__setattr__(self, "saddle_ref", as_point(self.saddle_ref))

    @property
    def dim(self) -> int:
        return self.z0.size

    def validate(self) -> None:
        """Check the search is well posed; raises before any solver work starts."""
        if self.z0.size != self.z1.size:
            raise UsageError(
                f"{self.name}: endpoints have dimensions "
                f"{self.z0.size} and {self.z1.size}")
        if np.array_equal(self.z0, self.z1):
            raise UsageError(f"{self.name}: endpoints coincide")
        if arity(self.phi) > self.dim:
            raise UsageError(
                f"{self.name}: functional uses coordinate x{arity(self.phi) - 1} "
                f"but points have dimension {self.dim}")
        for label, z in (("z0", self.z0), ("z1", self.z1)):
            v = evaluate(self.phi, z)
            if not np.isfinite(v):
                raise UsageError(f"{self.name}: phi({label}) is not finite")
        if not self.separator.separates(self.z0, self.z1):
            s0 = float(self.separator.value(self.z0))
            s1 = float(self.separator.value(self.z1))
            raise TopologyError(
                f"{self.name}: separator {self.separator.name or 's'} does not "
                f"place the endpoints on opposite sides "
                f"(s(z0)={s0:.6g}, s(z1)={s1:.6g}; need s(z0)<0<s(z1))")


def _sq_dist(shift: float, dim: int) -> Expr:
    """(x0 - shift)^2 + x1^2 + ... as an expression tree."""
    first = (coord(0) + const(-shift)) ** 2 if shift else coord(0) ** 2
    return sum_of(first, *[coord(i) ** 2 for i in range(1, dim)])


def _smooth_well(dim: int) -> Expr:
    """(x0^2 - 1)^2 plus a parabolic bowl in the remaining coordinates."""
    ridge = (coord(0) ** 2 + const(-1.0)) ** 2
    if dim == 1:
        return ridge
    return sum_of(ridge, *[coord(i) ** 2 for i in range(1, dim)])


def _build_library() -> dict[str, MinMaxProblem]:
    lib: dict[str, MinMaxProblem] = {}

    def add(p: MinMaxProblem):
        lib[p.name] = p

    add(MinMaxProblem(
        name="smooth_double_well",
        phi=_smooth_well(2),
        z0=np.array([-1.0, 0.0]),
        z1=np.array([1.0, 0.0]),
        separator=hyperplane_separator(axis=0, offset=0.0, dim=2),
        gamma_ref=1.0,
        saddle_ref=np.array([0.0, 0.0]),
        description="(x0^2-1)^2 + x1^2; smooth saddle at the origin, level 1."))

    # Two paraboloid wells glued along the plane x0 = 0.  On that plane both
    # pieces equal 1 + x1^2, so every crossing costs at least 1, and the
    # generator hull at the origin is conv{(-2,0),(2,0)} which contains 0.
    add(MinMaxProblem(
        name="nonsmooth_twin_paraboloid",
        phi=min_of(_sq_dist(1.0, 2), _sq_dist(-1.0, 2)),
        z0=np.array([-1.0, 0.0]),
        z1=np.array([1.0, 0.0]),
        separator=hyperplane_separator(axis=0, offset=0.0, dim=2),
        gamma_ref=1.0,
        saddle_ref=np.array([0.0, 0.0]),
        description="min of two paraboloids; nonsmooth ridge on x0 = 0."))

    # | |x0| - 1 | keeps wells at x0 = +-1 while the linear tilt -x0/2 makes
    # the wells sit at different depths; the crossing ridge at x0 = 0 has
    # generator interval [-3/2, 1/2] in x0, which contains 0.
    add(MinMaxProblem(
        name="tilted_abs_well",
        phi=sum_of(abs_of(sum_of(abs_of(coord(0)), const(-1.0))),
                   coord(1) ** 2,
                   product_of(const(-0.5), coord(0))),
        z0=np.array([-1.0, 0.0]),
        z1=np.array([1.0, 0.0]),
        separator=hyperplane_separator(axis=0, offset=0.0, dim=2),
        gamma_ref=1.0,
        saddle_ref=np.array([0.0, 0.0]),
        description="||x0|-1| + x1^2 - x0/2; kinked wells of unequal depth."))

    for n in range(2, 11):
        z0 = np.zeros(n); z0[0] = -1.0
        z1 = np.zeros(n); z1[0] = 1.0
        add(MinMaxProblem(
            name=f"smooth_well_{n}d",
            phi=_smooth_well(n),
            z0=z0,
            z1=z1,
            separator=hyperplane_separator(axis=0, offset=0.0, dim=n),
            gamma_ref=1.0,
            saddle_ref=np.zeros(n),
            description=f"{n}-dimensional double well, saddle at the origin."))

    # Radially symmetric crater: u(u-2)^2 with u = |x|^2 has a rim of maxima
    # at u = 2/3 (level 32/27) and a circular valley at u = 2.  The separator
    # is the rim sphere itself, a bounded set; every pass point is a rim
    # point, so only the level is referenced.
    u = sum_of(coord(0) ** 2, coord(1) ** 2)
    add(MinMaxProblem(
        name="crater_rim",
        phi=product_of(u, (u + const(-2.0)) ** 2),
        z0=np.array([0.0, 0.0]),
        z1=np.array([np.sqrt(2.0), 0.0]),
        separator=sphere_separator(radius=np.sqrt(2.0 / 3.0), dim=2),
        gamma_ref=32.0 / 27.0,
        saddle_ref=None,
        description="crater wall between the center and the valley circle; "
                    "bounded separator."))

    # Negative fixture: the plane x0 = 5 leaves both endpoints on one side.
    # Solvers must refuse it with a topology error instead of producing
    # certificates.
    add(MinMaxProblem(
        name="nonseparating",
        phi=_smooth_well(2),
        z0=np.array([-1.0, 0.0]),
        z1=np.array([1.0, 0.0]),
        separator=hyperplane_separator(axis=0, offset=5.0, dim=2),
        gamma_ref=None,
        saddle_ref=None,
        description="ill-posed on purpose: separator misses both endpoints."))

    return lib


_LIBRARY = _build_library()


def problem_names() -> list[str]:
    return sorted(_LIBRARY)


def problem_library(name: str) -> MinMaxProblem:
    """Look up a registered benchmark by name."""
    try:
        return _LIBRARY[name]
    except KeyError:
        known = ", ".join(problem_names())
        raise UsageError(f"unknown problem {name!r}; known problems: {known}") from None
