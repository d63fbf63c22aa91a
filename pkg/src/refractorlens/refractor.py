"""The piecewise-ellipsoid refractor and its discrete pushforward measure.

A refractor is the pointwise minimum of N semi-ellipsoids with axes m_i and
coefficients b_i.  On a discretized source domain the tracing map sends each
grid direction to the index of the winning (smallest-radius) ellipsoid; the
measure of a target direction is the accumulated weight of the grid points it
captures.  Ties at exactly-equal radii always go to the smallest index, which
makes the incremental single-coefficient update below reproduce a full retrace
bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainViolation, StaleCache
from .geometry import as_kappa, normalize


@dataclass(frozen=True)
class TargetSpec:
    """Prescribed output: N distinct unit directions with positive intensities."""

    directions: np.ndarray  # (N, 3)
    intensities: np.ndarray  # (N,)

    def __post_init__(self):
        dirs = normalize(np.atleast_2d(np.asarray(self.directions, dtype=float)))
        f = np.asarray(self.intensities, dtype=float)
        if dirs.shape[0] != f.shape[0]:
            raise ValueError("directions/intensities length mismatch")
        if dirs.shape[0] < 1:
            raise ValueError("need at least one target direction")
        if np.any(f <= 0):
            raise ValueError("all target intensities must be positive")
        if dirs.shape[0] >= 2:
            dots = np.clip(dirs @ dirs.T, -1.0, 1.0)
            np.fill_diagonal(dots, -1.0)
            if np.arccos(dots.max()) <= 1e-9:
                raise ValueError("target directions must be pairwise distinct")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "intensities", f)

    @property
    def n_targets(self) -> int:
        return self.directions.shape[0]

    @classmethod
    def uniform(cls, directions):
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        n = directions.shape[0]
        return cls(directions, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class SourceGrid:
    """Discretized source domain: K unit directions with quadrature weights.

    Weights are renormalized to sum to one (the total source energy).
    """

    points: np.ndarray  # (K, 3)
    weights: np.ndarray  # (K,)
    M: int | None = None

    def __post_init__(self):
        pts = normalize(np.atleast_2d(np.asarray(self.points, dtype=float)))
        w = np.asarray(self.weights, dtype=float)
        if w.shape[0] != pts.shape[0]:
            raise ValueError("points/weights length mismatch")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = w.sum()
        if total <= 0:
            raise ValueError("total grid mass must be positive")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w / total)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def sup_density(self) -> float:
        """max weight x K: the discrete analogue of sup g for unit total mass."""
        return float(self.weights.max() * self.size)

    @classmethod
    def uniform(cls, points, M=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = points.shape[0]
        return cls(points, np.full(k, 1.0 / k), M=M)

    @classmethod
    def from_density(cls, points, density, M=None):
        """Build a grid with per-point weights from a density callback g(x)."""
        points = normalize(np.atleast_2d(np.asarray(points, dtype=float)))
        w = np.asarray([density(p) for p in points], dtype=float)
        return cls(points, w, M=M)


@dataclass(frozen=True)
class Assignment:
    """Cached tracing map: per-point winning index plus accumulated weights.

    ``coeffs`` is the coefficient snapshot the cache was computed for;
    ``denoms`` caches the (K, N) matrix 1 - kappa (gamma . m_i) so that a
    single-coefficient update touches only O(K) numbers.
    """

    winner: np.ndarray  # (K,) int
    counts: np.ndarray  # (N,)
    coeffs: np.ndarray  # (N,)
    denoms: np.ndarray = field(repr=False, compare=False, default=None)

    def matches(self, b) -> bool:
        return np.array_equal(self.coeffs, np.asarray(b, dtype=float))


def _denominators(targets: TargetSpec, grid: SourceGrid, kappa: float) -> np.ndarray:
    return 1.0 - kappa * (grid.points @ targets.directions.T)


def _check_cone(targets: TargetSpec, grid: SourceGrid, kappa: float):
    dots = grid.points @ targets.directions.T
    if dots.min() < kappa:
        raise DomainViolation(
            "a grid point falls outside the refracting cap of some target "
            f"(min m.x = {dots.min():.6g} < kappa = {kappa})"
        )


def refractor_radius(b, targets: TargetSpec, x, kappa):
    """Refractor polar radius min_i b_i/(1 - kappa m_i.x) and winning index."""
    kappa = as_kappa(kappa)
    b = np.asarray(b, dtype=float)
    x = normalize(x)
    dots = targets.directions @ x
    if dots.min() < kappa:
        raise DomainViolation("x outside the refracting cap of some target")
    radii = b / (1.0 - kappa * dots)
    idx = int(np.argmin(radii))
    return float(radii[idx]), idx


def trace_all(b, targets: TargetSpec, grid: SourceGrid, kappa) -> Assignment:
    """Assign every grid point to its winning ellipsoid (smallest index on ties)."""
    kappa = as_kappa(kappa)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != targets.n_targets:
        raise ValueError("coefficient vector length must equal target count")
    if np.any(b <= 0):
        raise ValueError("coefficients must be positive")
    _check_cone(targets, grid, kappa)
    denoms = _denominators(targets, grid, kappa)
    radii = b / denoms
    winner = np.argmin(radii, axis=1)  # first occurrence = smallest index
    counts = np.bincount(winner, weights=grid.weights, minlength=targets.n_targets)
    return Assignment(winner=winner, counts=counts, coeffs=b.copy(), denoms=denoms)


def measure(b, targets: TargetSpec, grid: SourceGrid, kappa) -> np.ndarray:
    """Discrete refractor measure: weight captured per target direction."""
    return trace_all(b, targets, grid, kappa).counts


def update_component(a: Assignment, b, targets: TargetSpec, grid: SourceGrid,
                     kappa, j0: int, new_b_j0: float):
    """Retrace after changing only coefficient j0, reusing the cached winners.

    For a decrease each point only compares its incumbent winner against the
    modified ellipsoid; for an increase the points currently won by j0 are
    re-minimized in full.  Either way the result equals a fresh trace_all on
    the modified vector, winners included, bit for bit.

    Returns (new Assignment, new measure values).
    """
    kappa = as_kappa(kappa)
    b = np.asarray(b, dtype=float)
    if not a.matches(b):
        raise StaleCache("assignment cache was built for a different vector")
    if new_b_j0 <= 0:
        raise ValueError("new coefficient must be positive")
    n = targets.n_targets
    if not 0 <= j0 < n:
        raise ValueError(f"index {j0} out of range for {n} targets")

    new_b = b.copy()
    new_b[j0] = new_b_j0
    if new_b_j0 == b[j0]:
        out = Assignment(winner=a.winner.copy(), counts=a.counts.copy(),
                         coeffs=new_b, denoms=a.denoms)
        return out, out.counts

    denoms = a.denoms
    if denoms is None:
        denoms = _denominators(targets, grid, kappa)
    winner = a.winner.copy()
    rows = np.arange(grid.size)
    r_j0 = new_b_j0 / denoms[:, j0]

    if new_b_j0 < b[j0]:
        # j0's surface moved inward: it can only gain points.
        other = winner != j0
        r_w = b[winner[other]] / denoms[rows[other], winner[other]]
        take = (r_j0[other] < r_w) | ((r_j0[other] == r_w) & (j0 < winner[other]))
        idx = rows[other][take]
        winner[idx] = j0
    else:
        # j0's surface moved outward: only its own points can defect.
        mine = rows[winner == j0]
        if mine.size:
            winner[mine] = np.argmin(new_b / denoms[mine], axis=1)

    counts = np.bincount(winner, weights=grid.weights, minlength=n)
    out = Assignment(winner=winner, counts=counts, coeffs=new_b, denoms=denoms)
    return out, counts


def degenerate_region_membership(b, kappa, i: int) -> bool:
    """True iff coefficient i sits in the flat region F_i where its measure is
    locally constant (all-or-nothing capture)."""
    kappa = as_kappa(kappa)
    b = np.asarray(b, dtype=float)
    others = np.delete(b, i)
    if others.size == 0:
        return True
    m = others.min()
    return bool(b[i] >= (1.0 + kappa) * m or b[i] <= m / (1.0 + kappa))
