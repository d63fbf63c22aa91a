"""Scikit-learn style front end for the lens solver.

``FarFieldRefractor`` is fit on prescribed target intensities over the
standard lattice and afterwards predicts surface radii (or traced target
indices) for arbitrary source directions, so the solver composes with
sklearn pipelines and parameter search utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .geometry import normalize
from .pipeline import build_lattices
from .refine import RefineConfig, quasi_newton_solve
from .refractor import TargetSpec, refractor_radius, trace_all
from .solver import SolverConfig, solve


class FarFieldRefractor(BaseEstimator):
    """Fit a piecewise-ellipsoid lens that sends a point source to prescribed
    far-field intensities.

    Parameters
    ----------
    kappa : float, refractive-index ratio n2/n1 in (0, 1).
    n : int, target lattice parameter; the lens serves (n+1)^2 directions.
    M : int, source lattice parameter; (2M+1)^2 rays are traced.
    epsilon : float or None, certified max intensity error (default 1/(10 N)).
    skip_first : bool, certify only directions 2..N during the sweep stage.
    refine : bool, follow coordinate descent with quasi-Newton refinement.
    max_sweeps : int, safety cap on coordinate-descent sweeps.
    """

    def __init__(self, kappa=0.5, n=1, M=50, epsilon=None, skip_first=False,
                 refine=False, max_sweeps=100_000):
        self.kappa = kappa
        self.n = n
        self.M = M
        self.epsilon = epsilon
        self.skip_first = skip_first
        self.refine = refine
        self.max_sweeps = max_sweeps

    def fit(self, X, y=None):
        """Fit the lens coefficients.

        X may be None (uniform intensities), a flat array of (n+1)^2 positive
        intensities over the lattice, or an (n+1, n+1) array in lattice (r, r')
        order.  The intensities are normalized to unit total energy.
        """
        lattice, source = build_lattices(self.n, self.M, self.kappa)
        n_targets = lattice.size
        if X is None:
            f = np.full(n_targets, 1.0 / n_targets)
        else:
            f = check_array(X, ensure_2d=False, dtype=float).ravel()
            if f.size != n_targets:
                raise ValueError(
                    f"expected {n_targets} intensities for n = {self.n}, got {f.size}")
            if np.any(f <= 0):
                raise ValueError("intensities must be positive")
            f = f / f.sum()
        targets = TargetSpec(lattice.directions, f)
        grid = source.as_grid()
        eps = self.epsilon if self.epsilon is not None else 1.0 / (10.0 * n_targets)
        delta = eps if self.skip_first else eps / n_targets
        cfg = SolverConfig(delta=delta, epsilon=eps, skip_first=self.skip_first,
                           max_sweeps=self.max_sweeps)
        report = solve(targets, grid, self.kappa, cfg)
        if self.refine:
            report = quasi_newton_solve(report.final_b, targets, grid, self.kappa,
                                        RefineConfig(tolerance=eps))
        self.coefficients_ = report.final_b
        self.measure_ = report.final_measure
        self.report_ = report
        self.targets_ = targets
        self.target_lattice_ = lattice
        self.source_grid_ = grid
        self.n_targets_ = n_targets
        return self

    def predict(self, X):
        """Surface polar radius for each query direction (rows of X)."""
        check_is_fitted(self, "coefficients_")
        X = normalize(check_array(X, dtype=float))
        return np.array([
            refractor_radius(self.coefficients_, self.targets_, x, self.kappa)[0]
            for x in X
        ])

    def transform(self, X):
        """Traced target index for each query direction."""
        check_is_fitted(self, "coefficients_")
        X = normalize(check_array(X, dtype=float))
        return np.array([
            refractor_radius(self.coefficients_, self.targets_, x, self.kappa)[1]
            for x in X
        ], dtype=int)

    def score(self, X=None, y=None):
        """Negative max intensity deviation on a fresh retrace (higher is better)."""
        check_is_fitted(self, "coefficients_")
        a = trace_all(self.coefficients_, self.targets_, self.source_grid_, self.kappa)
        return -float(np.abs(a.counts - self.targets_.intensities).max())
