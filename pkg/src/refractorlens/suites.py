"""Randomized property suites for the measure-theoretic laws the solver
relies on.  Each suite returns (ok, failures, trials); the CLI ``verify``
subcommand and the acceptance tests both run them.

All randomness flows from a caller-supplied seed, so runs are reproducible.
"""

from __future__ import annotations

import numpy as np

from .geometry import classify_dominance_disk, normalize
from .refractor import SourceGrid, TargetSpec, trace_all, update_component
from .solver import lipschitz_probe


def _random_cone_directions(rng, count, spread):
    """Distinct unit directions near +z, within a cone of the given spread."""
    while True:
        xy = rng.uniform(-spread, spread, size=(count, 2))
        raw = np.column_stack([xy, np.ones(count)])
        dirs = normalize(raw)
        dots = np.clip(dirs @ dirs.T, -1, 1)
        np.fill_diagonal(dots, -1.0)
        if dots.max() < 1.0 - 1e-12:
            return dirs


def random_instance(rng, n_targets=None, m_grid=20, kappa=None):
    """A random admissible (b, targets, grid, kappa) configuration.

    Targets and grid both sit near +z so the no-total-reflection condition
    holds for any kappa <= 0.6.
    """
    if n_targets is None:
        n_targets = int(rng.integers(3, 8))
    if kappa is None:
        kappa = float(rng.uniform(0.25, 0.6))
    targets = TargetSpec.uniform(_random_cone_directions(rng, n_targets, 0.2))
    rs = np.arange(-m_grid, m_grid + 1)
    r, rp = np.meshgrid(rs, rs, indexing="ij")
    pts = np.column_stack([r.ravel(), rp.ravel(), np.full(r.size, 2 * m_grid)])
    grid = SourceGrid.uniform(pts.astype(float) * [0.5, 0.5, 1.0], M=m_grid)
    b = rng.uniform(0.8, 1.6, size=n_targets)
    b[0] = 1.0
    return b, targets, grid, kappa


def run_lemma31(trials=100, seed=0, m_grid=20):
    """Threshold laws: a coefficient pushed past (1+k) min others captures
    nothing; pushed below min/(1+k) it captures everything.  Exact at grid
    level."""
    rng = np.random.default_rng(seed)
    failures = []
    for trial in range(trials):
        b, targets, grid, kappa = random_instance(rng, m_grid=m_grid)
        i = int(rng.integers(0, targets.n_targets))
        others = np.delete(b, i)
        hi = b.copy()
        hi[i] = (1.0 + kappa) * others.min() * (1.0 + 1e-9)
        a = trace_all(hi, targets, grid, kappa)
        if a.counts[i] != 0.0:
            failures.append((trial, "upper", float(a.counts[i])))
        lo = b.copy()
        lo[i] = others.min() / (1.0 + kappa) * (1.0 - 1e-9)
        a = trace_all(lo, targets, grid, kappa)
        if not np.all(a.winner == i):
            failures.append((trial, "lower", float(a.counts[i])))
    return len(failures) == 0, failures, trials


def run_lemma33(trials=100, seed=0, m_grid=20):
    """Monotonicity: decreasing one coefficient never loses it mass and never
    gains mass for any other index, exactly at grid level."""
    rng = np.random.default_rng(seed)
    failures = []
    for trial in range(trials):
        b, targets, grid, kappa = random_instance(rng, m_grid=m_grid)
        l = int(rng.integers(0, targets.n_targets))
        before = trace_all(b, targets, grid, kappa)
        b2 = b.copy()
        b2[l] *= float(rng.uniform(0.5, 0.999))
        after = trace_all(b2, targets, grid, kappa)
        if after.counts[l] < before.counts[l]:
            failures.append((trial, "own", l))
        others = np.delete(np.arange(targets.n_targets), l)
        if np.any(after.counts[others] > before.counts[others]):
            failures.append((trial, "other", l))
    return len(failures) == 0, failures, trials


def run_lemma36(trials=100, seed=0, points_per_trial=10_000, band=1e-12):
    """Geodesic-disk oracle: cap membership must equal the raw radius
    inequality outside a thin boundary band."""
    rng = np.random.default_rng(seed)
    failures = []
    for trial in range(trials):
        kappa = float(rng.uniform(0.1, 0.9))
        m_i = normalize(rng.normal(size=3))
        m_j = normalize(rng.normal(size=3))
        if np.linalg.norm(m_i - m_j) < 1e-6:
            m_j = normalize(m_j + [0.1, 0.0, 0.0])
        b_i = float(rng.uniform(0.2, 3.0))
        b_j = float(rng.uniform(0.2, 3.0))
        region = classify_dominance_disk(b_i, m_i, b_j, m_j, kappa)
        xs = normalize(rng.normal(size=(points_per_trial, 3)))
        raw = b_i / (1.0 - kappa * (xs @ m_i)) <= b_j / (1.0 - kappa * (xs @ m_j))
        member = region.contains(xs)
        interior = np.abs(region.boundary_margin(xs)) > band
        mismatches = int(np.sum((member != raw) & interior))
        if mismatches:
            failures.append((trial, mismatches))
    return len(failures) == 0, failures, trials


def run_cache_equivalence(trials=50, seed=0, m_grid=20):
    """Incremental single-coefficient updates must equal a full retrace,
    winners bitwise included."""
    rng = np.random.default_rng(seed)
    failures = []
    for trial in range(trials):
        b, targets, grid, kappa = random_instance(rng, m_grid=m_grid)
        a = trace_all(b, targets, grid, kappa)
        j0 = int(rng.integers(0, targets.n_targets))
        factor = float(rng.uniform(0.5, 1.5))
        new_bj = max(b[j0] * factor, 1e-3)
        updated, values = update_component(a, b, targets, grid, kappa, j0, new_bj)
        b2 = b.copy()
        b2[j0] = new_bj
        fresh = trace_all(b2, targets, grid, kappa)
        if not np.array_equal(updated.winner, fresh.winner):
            failures.append((trial, "winners"))
        elif not np.array_equal(values, fresh.counts):
            failures.append((trial, "counts"))
    return len(failures) == 0, failures, trials


def run_lipschitz(trials=50, seed=0, m_grid=200):
    """One-sided Lipschitz law: a decrease can only add mass, and no faster
    than the geometric bound plus quadrature slack 5/sqrt(K)."""
    rng = np.random.default_rng(seed)
    failures = []
    slack = None
    for trial in range(trials):
        b, targets, grid, kappa = random_instance(rng, n_targets=int(rng.integers(3, 6)),
                                                  m_grid=m_grid)
        if slack is None:
            slack = 5.0 / np.sqrt(grid.size)
        i = int(rng.integers(0, targets.n_targets))
        t = -0.05 * float(b[i])
        observed, theoretical = lipschitz_probe(b, targets, grid, kappa, i, t)
        if observed < 0.0:
            failures.append((trial, "negative", observed))
        if observed > theoretical + slack:
            failures.append((trial, "bound", observed, theoretical))
    return len(failures) == 0, failures, trials


SUITES = {
    "lemma31": run_lemma31,
    "lemma33": run_lemma33,
    "lemma36": run_lemma36,
    "cache": run_cache_equivalence,
    "lipschitz": run_lipschitz,
}
