"""Derivative-free quasi-Newton refinement of the coefficient vector.

The residual system maps (b_2..b_N), with b_1 pinned to 1, to the intensity
mismatches (G_2 - f_2, ..., G_N - f_N).  The measure is piecewise constant on
coefficient space, so the Jacobian is taken by forward differences with a step
well above the grid quantization, steps are chosen by a Powell-style dogleg
inside a trust region, and the Jacobian is kept current between full
re-evaluations by rank-one secant (Broyden) updates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import DegenerateStart, DimensionMismatch, StageError
from .geometry import as_kappa
from .refractor import SourceGrid, TargetSpec, trace_all, update_component
from .solver import (SolveReport, SolverConfig, coefficient_floor,
                     nondegenerate, solve)


@dataclass
class RefineConfig:
    tolerance: float = 1e-3
    max_evaluations: int = 5000
    trust_radius: float = 0.1
    fd_step: float | None = None  # default 10/K, set from the grid

    def validate(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")
        if self.trust_radius <= 0:
            raise ValueError("trust_radius must be positive")
        if self.fd_step is not None and self.fd_step <= 0:
            raise ValueError("fd_step must be positive")


class ResidualSystem:
    """Evaluator for the reduced system (b_2..b_N) -> (G_2 - f_2, ...).

    Keeps the last full assignment so Jacobian columns cost one incremental
    retrace each; counts every measure evaluation.
    """

    def __init__(self, targets: TargetSpec, grid: SourceGrid, kappa):
        self.targets = targets
        self.grid = grid
        self.kappa = as_kappa(kappa)
        self.evaluations = 0
        self._assignment = None

    @property
    def dimension(self) -> int:
        return self.targets.n_targets - 1

    def full_vector(self, z) -> np.ndarray:
        return np.concatenate(([1.0], np.asarray(z, dtype=float)))

    def residual(self, z) -> np.ndarray:
        """Fresh full retrace; also refreshes the cached assignment."""
        b = self.full_vector(z)
        self._assignment = trace_all(b, self.targets, self.grid, self.kappa)
        self.evaluations += 1
        return self._assignment.counts[1:] - self.targets.intensities[1:]

    def residual_shifted(self, j: int, new_bj: float) -> np.ndarray:
        """Residual with coordinate j (>=1, full indexing) changed, via the
        incremental cache of the last full evaluation."""
        a = self._assignment
        _, values = update_component(a, a.coeffs, self.targets, self.grid,
                                     self.kappa, j, new_bj)
        self.evaluations += 1
        return values[1:] - self.targets.intensities[1:]

    def jacobian(self, z, f0, step) -> np.ndarray:
        """Forward-difference Jacobian of the residual at z."""
        if self._assignment is None or not self._assignment.matches(self.full_vector(z)):
            f0 = self.residual(z)
        dim = self.dimension
        jac = np.empty((dim, dim))
        for c in range(dim):
            fc = self.residual_shifted(c + 1, float(z[c]) + step)
            jac[:, c] = (fc - f0) / step
        return jac

    def measure_at(self, z) -> np.ndarray:
        if self._assignment is None or not self._assignment.matches(self.full_vector(z)):
            self.residual(z)
        return self._assignment.counts.copy()


def broyden_update(jac, s, y) -> np.ndarray:
    """Rank-one secant update: the returned J satisfies J s = y exactly."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    ss = float(s @ s)
    if ss == 0.0:
        return jac
    return jac + np.outer(y - jac @ s, s) / ss


def dogleg_step(jac, f, radius):
    """Powell dogleg: blend the Gauss-Newton and steepest-descent steps so the
    result stays inside the trust region."""
    grad = jac.T @ f
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        return np.zeros_like(f)
    try:
        newton = np.linalg.solve(jac, -f)
    except np.linalg.LinAlgError:
        newton = np.linalg.lstsq(jac, -f, rcond=None)[0]
    if np.linalg.norm(newton) <= radius and np.all(np.isfinite(newton)):
        return newton
    jg = jac @ grad
    denom = float(jg @ jg)
    if denom == 0.0 or not np.all(np.isfinite(newton)):
        return -grad * (radius / gnorm)
    cauchy = -grad * (gnorm**2 / denom)
    cnorm = float(np.linalg.norm(cauchy))
    if cnorm >= radius:
        return -grad * (radius / gnorm)
    # point on the segment cauchy -> newton with norm == radius
    d = newton - cauchy
    a = float(d @ d)
    bq = 2.0 * float(cauchy @ d)
    c = cnorm**2 - radius**2
    t = (-bq + np.sqrt(bq**2 - 4.0 * a * c)) / (2.0 * a)
    return cauchy + t * d


def quasi_newton_solve(start, targets: TargetSpec, grid: SourceGrid, kappa,
                       config: RefineConfig) -> SolveReport:
    """Refine a coordinate-descent pivot until every direction, the first
    included, matches its prescription within the configured tolerance.

    The start must lie outside every flat region; inside one the Jacobian has
    a zero row/column and Newton-type steps stall.
    """
    kappa = as_kappa(kappa)
    config.validate()
    start = np.asarray(start, dtype=float)
    if not nondegenerate(start, kappa):
        raise DegenerateStart("starting vector lies inside a flat region F_i")

    system = ResidualSystem(targets, grid, kappa)
    step = config.fd_step if config.fd_step is not None else 10.0 / grid.size
    floor = 0.5 * coefficient_floor(kappa)
    history = []

    def full_deviation(f):
        # conservation pins the first direction: G_1 - f_1 = -sum(residual)
        return max(float(np.abs(f).max()), abs(float(f.sum())))

    z = start[1:].copy()
    f = system.residual(z)
    best_z, best_f = z.copy(), f.copy()
    if full_deviation(f) <= config.tolerance:
        measure = system.measure_at(z)
        err = float(np.abs(measure - targets.intensities).max())
        return SolveReport(final_b=system.full_vector(z), final_measure=measure,
                           err=err, sweeps=0, component_adjustments=0,
                           bound_n0=None, history=history, converged=True,
                           evaluations=system.evaluations,
                           sup_density=grid.sup_density, method="quasi_newton")

    jac = system.jacobian(z, f, step)
    jac = _desingularize(jac, grid)
    radius = config.trust_radius
    iterations = 0
    rejects = 0
    while system.evaluations < config.max_evaluations:
        p = dogleg_step(jac, f, radius)
        z_new = np.maximum(z + p, floor)
        s = z_new - z
        if float(np.linalg.norm(s)) < 1e-15:
            jac = _desingularize(system.jacobian(z, f, step), grid)
            radius = config.trust_radius
            rejects = 0
            continue
        f_new = system.residual(z_new)
        iterations += 1
        history.append((iterations, float(np.abs(f_new).max()), system.evaluations))
        if np.linalg.norm(f_new) < np.linalg.norm(f):
            jac = broyden_update(jac, s, f_new - f)
            z, f = z_new, f_new
            rejects = 0
            radius = min(max(radius, 2.0 * float(np.linalg.norm(s))), 10.0)
            if full_deviation(f) < full_deviation(best_f):
                best_z, best_f = z.copy(), f.copy()
            if full_deviation(f) <= config.tolerance:
                break
        else:
            radius = 0.5 * float(np.linalg.norm(s))
            rejects += 1
            if rejects >= 3 or radius < 0.1 * step:
                jac = _desingularize(system.jacobian(z, f, step), grid)
                radius = config.trust_radius
                rejects = 0

    # Certify on a fresh full retrace of the best iterate, never the cache.
    final = trace_all(system.full_vector(best_z), targets, grid, kappa)
    err = float(np.abs(final.counts - targets.intensities).max())
    return SolveReport(final_b=final.coeffs, final_measure=final.counts.copy(),
                       err=err, sweeps=iterations, component_adjustments=iterations,
                       bound_n0=None, history=history,
                       converged=err <= config.tolerance,
                       evaluations=system.evaluations,
                       sup_density=grid.sup_density, method="quasi_newton")


def _desingularize(jac, grid: SourceGrid) -> np.ndarray:
    """Replace numerically zero Jacobian columns (flat plateaus) with a small
    negative diagonal entry so the Newton direction still descends in that
    coordinate (the measure is non-increasing in its own coefficient)."""
    jac = jac.copy()
    scale = 1.0 / grid.size
    for c in range(jac.shape[1]):
        if np.abs(jac[:, c]).max() == 0.0:
            jac[c, c] = -scale
    return jac


def lattice_axis(n: int) -> np.ndarray:
    """Normalized lattice coordinates r/(5n) for r = -n, -n+2, ..., n."""
    return np.arange(-n, n + 1, 2) / (5.0 * n)


def interpolate_coefficients(coarse_n: int, b_coarse, fine_n: int, kappa) -> np.ndarray:
    """Carry a coefficient vector from one target lattice to a finer one.

    The coefficients are read as a function on the (coarse_n+1)^2 lattice
    points inside [-1/5, 1/5]^2, interpolated with a bicubic spline (degree
    reduced near the coarse end), clamped to the admissible floor and
    renormalized so the first coefficient is 1 (the corner directions of all
    lattices coincide).
    """
    kappa = as_kappa(kappa)
    b_coarse = np.asarray(b_coarse, dtype=float)
    n_coarse = (coarse_n + 1) ** 2
    if b_coarse.shape[0] != n_coarse:
        raise DimensionMismatch(
            f"expected {(coarse_n + 1)**2} coefficients for n = {coarse_n}, "
            f"got {b_coarse.shape[0]}"
        )
    if fine_n < coarse_n:
        raise ValueError("fine lattice must not be coarser")
    if fine_n == coarse_n:
        return b_coarse.copy()
    u = lattice_axis(coarse_n)
    v = lattice_axis(fine_n)
    values = b_coarse.reshape(coarse_n + 1, coarse_n + 1)
    k = min(3, coarse_n)
    spline = RectBivariateSpline(u, u, values, kx=k, ky=k)
    fine = spline(v, v).ravel()
    fine = np.maximum(fine, coefficient_floor(kappa))
    fine = fine / fine[0]
    return fine


def multires_schedule(targets_for, n_schedule, kappa, grid: SourceGrid,
                      config: RefineConfig, pivot_config: SolverConfig | None = None,
                      stage_tolerance=None) -> SolveReport:
    """Solve on an increasing schedule of target lattices.

    ``targets_for(n)`` must return the TargetSpec on the n-lattice.  Stage 1
    builds a pivot by skip-first coordinate descent followed by quasi-Newton
    refinement; every later stage interpolates the previous coefficients onto
    the next lattice and refines.  ``stage_tolerance(n, targets)``, when
    given, overrides config.tolerance per stage.  Errors carry the failing
    stage index.
    """
    n_schedule = list(n_schedule)
    if not n_schedule:
        raise ValueError("schedule must be nonempty")
    if any(b <= a for a, b in zip(n_schedule, n_schedule[1:])):
        raise ValueError("schedule must be strictly increasing")

    reports = []
    b_prev = None
    report = None
    for stage, n in enumerate(n_schedule):
        try:
            targets = targets_for(n)
            tol = config.tolerance if stage_tolerance is None else stage_tolerance(n, targets)
            stage_cfg = RefineConfig(tolerance=tol,
                                     max_evaluations=config.max_evaluations,
                                     trust_radius=config.trust_radius,
                                     fd_step=config.fd_step)
            if stage == 0:
                if pivot_config is None:
                    eps = 1.0 / (10.0 * targets.n_targets)
                    pivot_config = SolverConfig(delta=eps, epsilon=eps, skip_first=True)
                pivot = solve(targets, grid, kappa, pivot_config)
                start = pivot.final_b
            else:
                start = interpolate_coefficients(n_schedule[stage - 1], b_prev, n, kappa)
            report = quasi_newton_solve(start, targets, grid, kappa, stage_cfg)
            b_prev = report.final_b
            reports.append(report)
        except Exception as exc:  # noqa: BLE001 - re-raise with stage context
            if isinstance(exc, StageError):
                raise
            raise StageError(stage, exc) from exc
    report.history = [(i, r.err, r.evaluations) for i, r in enumerate(reports)]
    report.method = "multiresolution"
    return report
