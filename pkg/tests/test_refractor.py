import numpy as np
import pytest

from refractorlens import (DomainViolation, SourceGrid, StaleCache, TargetSpec,
                           classify_dominance_disk, degenerate_region_membership,
                           measure, normalize, refractor_radius, trace_all,
                           update_component)
from refractorlens.suites import random_instance

from conftest import KAPPA, cone_grid


class TestTargetSpec:
    def test_uniform(self, fig1_targets):
        assert fig1_targets.n_targets == 3
        np.testing.assert_allclose(fig1_targets.intensities, 1.0 / 3.0)

    def test_rejects_duplicate_directions(self):
        with pytest.raises(ValueError):
            TargetSpec.uniform([[0, 0, 1], [0, 0, 1]])

    def test_rejects_nonpositive_intensity(self):
        with pytest.raises(ValueError):
            TargetSpec([[0, 0, 1], [1, 0, 1]], [0.5, 0.0])

    def test_single_target_allowed(self):
        spec = TargetSpec.uniform([[0, 0, 1]])
        assert spec.n_targets == 1


class TestSourceGrid:
    def test_weights_normalized(self):
        g = SourceGrid([[0, 0, 1], [0, 1, 5]], [2.0, 2.0])
        np.testing.assert_allclose(g.weights, [0.5, 0.5])
        assert g.sup_density == pytest.approx(1.0)

    def test_from_density(self):
        g = SourceGrid.from_density([[0, 0, 1], [0, 1, 5]],
                                    lambda p: 1.0 + p[2])
        assert g.weights[0] > g.weights[1]
        assert g.sup_density > 1.0

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            SourceGrid([[0, 0, 1]], [-1.0])


class TestRefractorRadius:
    def test_single_ellipsoid(self):
        spec = TargetSpec.uniform([[0, 0, 1]])
        r, idx = refractor_radius([1.0], spec, [0, 0, 1], 0.5)
        assert r == pytest.approx(2.0)
        assert idx == 0

    def test_tie_break_smallest_index(self):
        spec = TargetSpec.uniform(normalize([[1.0, 0, 5.0], [-1.0, 0, 5.0]]))
        r, idx = refractor_radius([1.0, 1.0], spec, [0, 0, 1], 0.5)
        assert idx == 0

    def test_three_direction_values(self, fig1_targets):
        # at the z axis: 2 for the axial ellipsoid, 2/(1 - k 5/sqrt(26)) for
        # the tilted pair, so the axial one wins
        r, idx = refractor_radius([1.0, 2.0, 2.0], fig1_targets, [0, 0, 1],
                                  KAPPA)
        assert idx == 0
        assert r == pytest.approx(2.0)
        tilted = 2.0 / (1.0 - KAPPA * 5.0 / np.sqrt(26.0))
        assert tilted == pytest.approx(3.9238, abs=5e-4)

    def test_outside_every_cap_raises(self, fig1_targets):
        with pytest.raises(DomainViolation):
            refractor_radius([1.0, 1.0, 1.0], fig1_targets, [1, 0, 0], KAPPA)


class TestTraceAll:
    def test_single_target(self, small_grid):
        spec = TargetSpec.uniform([[0, 0, 1]])
        a = trace_all([1.0], spec, small_grid, KAPPA)
        assert np.all(a.winner == 0)
        np.testing.assert_allclose(a.counts, [1.0])

    def test_conservation(self, fig1_targets, small_grid):
        a = trace_all([1.0, 1.1, 0.9], fig1_targets, small_grid, KAPPA)
        assert a.counts.sum() == pytest.approx(1.0, abs=1e-12)

    def test_threshold_zero(self, fig1_targets, small_grid):
        b = np.array([1.0, (1 + KAPPA) * 1.0 + 1e-9, 1.0])
        a = trace_all(b, fig1_targets, small_grid, KAPPA)
        assert a.counts[1] == 0.0

    def test_threshold_full(self, fig1_targets, small_grid):
        b = np.array([1.0, 1.0 / (1 + KAPPA) - 1e-9, 1.0])
        a = trace_all(b, fig1_targets, small_grid, KAPPA)
        assert np.all(a.winner == 1)
        assert a.counts[1] == pytest.approx(1.0, abs=1e-12)

    def test_dilation_invariance(self, fig1_targets, small_grid):
        b = np.array([1.0, 1.2, 0.8])
        a = trace_all(b, fig1_targets, small_grid, KAPPA)
        for c in (0.5, 2.0, 7.0):
            scaled = trace_all(c * b, fig1_targets, small_grid, KAPPA)
            assert np.array_equal(a.winner, scaled.winner)

    def test_symmetric_pair_splits_evenly(self):
        spec = TargetSpec.uniform(normalize([[1.0, 0, 5.0], [-1.0, 0, 5.0]]))
        grid = cone_grid(10)
        vals = measure([1.0, 1.0], spec, grid, KAPPA)
        # the tie line goes entirely to index 0, at most one grid line of slack
        line = (2 * 10 + 1) / grid.size
        assert abs(vals[0] - 0.5) <= line
        assert abs(vals[1] - 0.5) <= line

    def test_monotonicity(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            b, targets, grid, kappa = random_instance(rng, m_grid=10)
            l = int(rng.integers(0, targets.n_targets))
            before = trace_all(b, targets, grid, kappa)
            b2 = b.copy()
            b2[l] *= 0.9
            after = trace_all(b2, targets, grid, kappa)
            assert after.counts[l] >= before.counts[l]
            others = np.delete(np.arange(targets.n_targets), l)
            assert np.all(after.counts[others] <= before.counts[others])

    def test_tracing_set_identity(self):
        # every strictly-winning grid point lies inside the dominance disk of
        # its winner against every other target
        rng = np.random.default_rng(7)
        b, targets, grid, kappa = random_instance(rng, n_targets=4, m_grid=8)
        a = trace_all(b, targets, grid, kappa)
        radii = b / (1.0 - kappa * (grid.points @ targets.directions.T))
        sorted_r = np.sort(radii, axis=1)
        strict = sorted_r[:, 1] - sorted_r[:, 0] > 1e-12
        for i in range(targets.n_targets):
            pts = grid.points[(a.winner == i) & strict]
            if pts.size == 0:
                continue
            for j in range(targets.n_targets):
                if j == i:
                    continue
                region = classify_dominance_disk(
                    b[i], targets.directions[i], b[j], targets.directions[j],
                    kappa)
                assert np.all(region.contains(pts))

    def test_surface_lipschitz(self):
        # |rho(x) - rho(y)| <= 2 kappa/(1-kappa)^2 min(rho) |x - y|
        rng = np.random.default_rng(9)
        b, targets, grid, kappa = random_instance(rng, n_targets=5, m_grid=12)
        radii = np.min(
            b / (1.0 - kappa * (grid.points @ targets.directions.T)), axis=1)
        c = 2.0 * kappa / (1.0 - kappa) ** 2
        idx = rng.integers(0, grid.size, size=(500, 2))
        d = np.linalg.norm(grid.points[idx[:, 0]] - grid.points[idx[:, 1]],
                           axis=1)
        dr = np.abs(radii[idx[:, 0]] - radii[idx[:, 1]])
        assert np.all(dr <= c * radii.min() * d + 1e-12)


class TestUpdateComponent:
    def test_noop(self, fig1_targets, small_grid):
        b = np.array([1.0, 1.3, 1.1])
        a = trace_all(b, fig1_targets, small_grid, KAPPA)
        updated, vals = update_component(a, b, fig1_targets, small_grid,
                                         KAPPA, 1, 1.3)
        assert np.array_equal(updated.winner, a.winner)
        np.testing.assert_array_equal(vals, a.counts)

    def test_stale_cache_rejected(self, fig1_targets, small_grid):
        b = np.array([1.0, 1.3, 1.1])
        a = trace_all(b, fig1_targets, small_grid, KAPPA)
        with pytest.raises(StaleCache):
            update_component(a, np.array([1.0, 1.2, 1.1]), fig1_targets,
                             small_grid, KAPPA, 1, 1.0)

    def test_bitwise_equals_full_retrace(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            b, targets, grid, kappa = random_instance(rng, m_grid=10)
            a = trace_all(b, targets, grid, kappa)
            j0 = int(rng.integers(0, targets.n_targets))
            new_bj = max(float(b[j0] * rng.uniform(0.5, 1.5)), 1e-3)
            updated, vals = update_component(a, b, targets, grid, kappa,
                                             j0, new_bj)
            b2 = b.copy()
            b2[j0] = new_bj
            fresh = trace_all(b2, targets, grid, kappa)
            assert np.array_equal(updated.winner, fresh.winner)
            assert np.array_equal(vals, fresh.counts)

    def test_decrease_monotone(self, fig1_targets, small_grid):
        b = np.array([1.0, 1.3, 1.1])
        a = trace_all(b, fig1_targets, small_grid, KAPPA)
        updated, vals = update_component(a, b, fig1_targets, small_grid,
                                         KAPPA, 1, 1.05)
        assert vals[1] >= a.counts[1]
        assert vals[0] <= a.counts[0]
        assert vals[2] <= a.counts[2]


class TestDegenerateRegion:
    def test_start_vector_is_degenerate(self):
        # b = (1, 2, 2), kappa = 1/2: 2 >= 1.5 * 1
        assert degenerate_region_membership([1.0, 2.0, 2.0], 0.5, 1)

    def test_equal_vector_not_degenerate(self):
        for kappa in (0.1, 0.5, 0.9):
            for i in range(3):
                assert not degenerate_region_membership([1.0, 1.0, 1.0],
                                                        kappa, i)

    def test_floor_branch(self):
        kappa = 0.5
        b = [1.0, 1.0 / (2 * (1 + kappa)), 1.0]
        assert degenerate_region_membership(b, kappa, 1)
