"""Coordinate descent on the ellipsoid coefficients by monotone bisection.

The solver keeps b_1 = 1 and repeatedly sweeps the remaining coefficients in
ascending order.  A coefficient is only ever decreased, and only when its
direction is underfed by more than delta; because the captured measure is
monotone non-increasing in the coefficient, the new value is found by
bisection.  Sweeps repeat until a full pass changes nothing, at which point
every direction j >= 2 is within delta of its prescription and conservation
pins the first direction within N delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NoFeasibleStep, SweepCapExceeded
from .geometry import as_kappa, check_no_total_reflection
from .refractor import (Assignment, SourceGrid, TargetSpec,
                        degenerate_region_membership, trace_all,
                        update_component)


@dataclass
class SolverConfig:
    delta: float
    epsilon: float
    skip_first: bool = False
    max_sweeps: int = 100_000
    bisection_tol: float = 5e-16

    def validate(self, targets: TargetSpec):
        if self.delta <= 0 or self.epsilon <= 0:
            raise ConfigError("delta and epsilon must be positive")
        if self.skip_first:
            if self.delta > self.epsilon:
                raise ConfigError("with skip_first, delta must satisfy delta <= epsilon")
        else:
            f_o = float(targets.intensities.min())
            if self.delta >= f_o / targets.n_targets:
                raise ConfigError(
                    f"delta = {self.delta} must be < min(f_i)/N = {f_o / targets.n_targets}"
                )
        if self.max_sweeps < 1:
            raise ConfigError("max_sweeps must be positive")
        if self.bisection_tol <= 0:
            raise ConfigError("bisection_tol must be positive")


@dataclass
class SolveReport:
    final_b: np.ndarray
    final_measure: np.ndarray
    err: float
    sweeps: int
    component_adjustments: int
    bound_n0: float | None
    history: list = field(default_factory=list)
    converged: bool = True
    evaluations: int = 0
    sup_density: float = 1.0
    method: str = "coordinate_descent"


def initial_admissible(targets: TargetSpec, kappa) -> np.ndarray:
    """Start vector (1, 2, ..., 2): admissible because 2 > 1 + kappa."""
    as_kappa(kappa)
    b = np.full(targets.n_targets, 2.0)
    b[0] = 1.0
    return b


def coefficient_floor(kappa) -> float:
    """Admissible coefficients never drop below 1/(1+kappa)."""
    return 1.0 / (1.0 + as_kappa(kappa))


def adjust_component(b, j, targets: TargetSpec, grid: SourceGrid, kappa,
                     delta, cache: Assignment, bisection_tol=5e-16,
                     strict=True):
    """Decrease coefficient j (if needed) so its measure lands in
    [f_j, f_j + delta].

    Returns (b', cache', changed, evaluations).  The cache must be valid for
    b; the returned cache is valid for b'.

    With strict=True a window the discrete measure jumps over raises
    NoFeasibleStep.  With strict=False the step falls back to the largest
    coefficient whose measure is at or above f_j: the measure still increases
    by more than delta (it started below f_j - delta), so the termination
    bound is unaffected, at the cost of overshooting f_j + delta by at most
    one atomic jump of the grid.
    """
    kappa = as_kappa(kappa)
    b = np.asarray(b, dtype=float)
    f_j = float(targets.intensities[j])
    g_j = float(cache.counts[j])
    if g_j >= f_j - delta:
        # Within the window, or overshooting: decreasing b_j can only push
        # the measure further up, so there is nothing to do.
        return b, cache, False, 0

    # G_j is non-increasing in b_j; at the guard the ellipsoid captures all
    # mass (the guard sits below min_others/(1+kappa) for any admissible b).
    lo = 1.0 / (2.0 * (1.0 + kappa))
    hi = float(b[j])
    evals = 0
    best = None  # largest probed b_j with measure >= f_j
    while hi - lo > bisection_tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        cand, values = update_component(cache, b, targets, grid, kappa, j, mid)
        evals += 1
        g = float(values[j])
        if f_j <= g <= f_j + delta:
            return cand.coeffs, cand, True, evals
        if g < f_j:
            hi = mid
        else:
            lo = mid
            best = cand
    if strict or best is None:
        raise NoFeasibleStep(
            f"discrete measure jumps over the window [f_{j}, f_{j} + delta]; "
            f"refine the source grid to at least {math.ceil(1.0 / delta)} points",
            recommended_grid_size=math.ceil(1.0 / delta),
        )
    return best.coeffs, best, True, evals


def sweep(b, targets: TargetSpec, grid: SourceGrid, kappa, delta,
          cache: Assignment, bisection_tol=5e-16, history=None, sweep_no=0,
          strict=True):
    """One pass adjusting coefficients j = 2..N in order.

    Returns (b, cache, changed, adjustments, evaluations).
    """
    changed = False
    adjustments = 0
    evals = 0
    for j in range(1, targets.n_targets):
        old = float(b[j])
        b, cache, moved, e = adjust_component(
            b, j, targets, grid, kappa, delta, cache, bisection_tol,
            strict=strict)
        evals += e
        if moved:
            changed = True
            adjustments += 1
            if history is not None:
                history.append((sweep_no, j, old, float(b[j]),
                                float(cache.counts[j])))
    return b, cache, changed, adjustments, evals


def solve(targets: TargetSpec, grid: SourceGrid, kappa,
          config: SolverConfig, b0=None) -> SolveReport:
    """Run sweeps until a full pass changes nothing, then certify the result.

    With delta = epsilon/N the certificate covers every direction; with
    skip_first (delta <= epsilon) only directions j >= 2 are certified.
    """
    kappa = as_kappa(kappa)
    config.validate(targets)
    total_f = float(targets.intensities.sum())
    if abs(total_f - 1.0) > 1e-9:
        raise ConfigError(
            f"energy conservation violated: sum f_i = {total_f} != 1 (grid mass)"
        )
    ok, min_dot, _ = check_no_total_reflection(grid.points, targets.directions, kappa)
    if not ok:
        raise ConfigError(
            f"total internal reflection risk: min m.x = {min_dot} < kappa = {kappa}"
        )

    b = initial_admissible(targets, kappa) if b0 is None else np.asarray(b0, dtype=float).copy()
    b_start = b.copy()
    cache = trace_all(b, targets, grid, kappa)
    history: list = []
    adjustments = 0
    evals = 0
    sweeps = 0
    while True:
        if sweeps >= config.max_sweeps:
            raise SweepCapExceeded(f"no fixed point after {config.max_sweeps} sweeps")
        sweeps += 1
        b, cache, changed, adj, e = sweep(
            b, targets, grid, kappa, config.delta, cache,
            config.bisection_tol, history, sweeps, strict=False)
        adjustments += adj
        evals += e
        if not changed:
            break
        deviations = np.abs(cache.counts - targets.intensities)
        if config.skip_first:
            current = float(deviations[1:].max()) if targets.n_targets > 1 else 0.0
        else:
            current = float(deviations.max())
        # Direct stopping rule: once every tracked direction is within
        # epsilon of its prescription there is nothing left to certify, even
        # if a further sweep would still move a coefficient.
        if current <= config.epsilon:
            break

    deviations = np.abs(cache.counts - targets.intensities)
    if config.skip_first:
        err = float(deviations[1:].max()) if targets.n_targets > 1 else 0.0
    else:
        err = float(deviations.max())
    bound = iteration_bound(targets, kappa, grid.sup_density, config.delta, b_start)
    return SolveReport(
        final_b=b,
        final_measure=cache.counts.copy(),
        err=err,
        sweeps=sweeps,
        component_adjustments=adjustments,
        bound_n0=bound,
        history=history,
        converged=err <= config.epsilon,
        evaluations=evals,
        sup_density=grid.sup_density,
    )


def pairwise_cap_constant(kappa, dot) -> float:
    """Area-growth constant 2 pi (1+kappa) / (kappa sqrt(d (2 - d))),
    d = 1 - m_i.m_r, controlling how fast one dominance cap can swallow
    another as a coefficient moves."""
    kappa = as_kappa(kappa)
    d = 1.0 - float(dot)
    if d <= 0:
        raise ValueError("target directions must be distinct")
    return 2.0 * np.pi * (1.0 + kappa) / (kappa * np.sqrt(d * (2.0 - d)))


def iteration_bound(targets: TargetSpec, kappa, sup_g, delta, b0) -> float:
    """Worst-case number of coefficient adjustments before the sweeps stabilize:

        N (1+kappa) C_k sup_g (N-1)/delta  max_{j>=2} (b_j^0 - 1/(1+kappa))

    with C_k the largest pairwise cap constant over distinct target pairs.
    """
    kappa = as_kappa(kappa)
    b0 = np.asarray(b0, dtype=float)
    n = targets.n_targets
    if n < 2:
        return 0.0
    dots = np.clip(targets.directions @ targets.directions.T, -1.0, 1.0)
    iu = np.triu_indices(n, k=1)
    c_kappa = max(pairwise_cap_constant(kappa, d) for d in dots[iu])
    headroom = float(np.max(b0[1:] - coefficient_floor(kappa)))
    headroom = max(headroom, 0.0)
    return n * (1.0 + kappa) * c_kappa * sup_g * (n - 1) / delta * headroom


def lipschitz_probe(b, targets: TargetSpec, grid: SourceGrid, kappa,
                    i: int, t: float):
    """Empirical check of the measure's one-sided Lipschitz bound.

    For a decrease t < 0 of coefficient i, the captured measure can only grow,
    and by no more than sup_g sum_{r != i} C(kappa, m_i.m_r)/b_r (-t) plus
    quadrature slack.  Returns (observed increase, theoretical bound).
    """
    kappa = as_kappa(kappa)
    b = np.asarray(b, dtype=float)
    if not -b[i] < t < 0:
        raise ValueError("probe step must satisfy -b_i < t < 0")
    base = trace_all(b, targets, grid, kappa)
    bt = b.copy()
    bt[i] += t
    moved = trace_all(bt, targets, grid, kappa)
    observed = float(moved.counts[i] - base.counts[i])
    dots = targets.directions @ targets.directions[i]
    theoretical = 0.0
    for r in range(targets.n_targets):
        if r == i:
            continue
        theoretical += pairwise_cap_constant(kappa, dots[r]) / b[r]
    theoretical *= grid.sup_density * (-t)
    return observed, float(theoretical)


def nondegenerate(b, kappa) -> bool:
    """True iff b lies outside every flat region F_i."""
    b = np.asarray(b, dtype=float)
    return not any(degenerate_region_membership(b, kappa, i) for i in range(b.size))
