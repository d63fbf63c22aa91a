import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from refractorlens import FarFieldRefractor

from conftest import KAPPA


@pytest.fixture(scope="module")
def fitted():
    est = FarFieldRefractor(kappa=KAPPA, n=1, M=20)
    est.fit(None)
    return est


class TestParams:
    def test_get_set_params(self):
        est = FarFieldRefractor(kappa=0.4, n=2, M=15)
        params = est.get_params()
        assert params["kappa"] == 0.4 and params["n"] == 2
        est.set_params(M=25)
        assert est.M == 25

    def test_clone(self):
        est = FarFieldRefractor(kappa=0.4, n=2)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_unfitted_predict_raises(self):
        with pytest.raises(NotFittedError):
            FarFieldRefractor().predict([[0, 0, 1]])


class TestFit:
    def test_uniform_fit(self, fitted):
        assert fitted.coefficients_.shape == (4,)
        assert fitted.coefficients_[0] == 1.0
        assert fitted.report_.converged
        assert np.abs(fitted.measure_ - 0.25).max() <= 1.0 / 40.0

    def test_explicit_intensities(self):
        est = FarFieldRefractor(kappa=KAPPA, n=1, M=20)
        est.fit([1.0, 1.0, 2.0, 2.0])
        np.testing.assert_allclose(est.targets_.intensities,
                                   [1 / 6, 1 / 6, 1 / 3, 1 / 3])

    def test_square_layout_accepted(self):
        est = FarFieldRefractor(kappa=KAPPA, n=1, M=20)
        est.fit(np.ones((2, 2)))
        assert est.n_targets_ == 4

    def test_wrong_count_rejected(self):
        est = FarFieldRefractor(kappa=KAPPA, n=1, M=20)
        with pytest.raises(ValueError):
            est.fit([1.0, 2.0, 3.0])

    def test_nonpositive_rejected(self):
        est = FarFieldRefractor(kappa=KAPPA, n=1, M=20)
        with pytest.raises(ValueError):
            est.fit([1.0, 0.0, 1.0, 1.0])

    def test_refine_flag(self):
        est = FarFieldRefractor(kappa=KAPPA, n=1, M=20, refine=True,
                                skip_first=True)
        est.fit(None)
        assert est.report_.method == "quasi_newton"
        assert est.report_.converged


class TestPredictTransform:
    def test_predict_radii_positive(self, fitted):
        x = fitted.source_grid_.points[::50]
        radii = fitted.predict(x)
        assert np.all(radii > 0)
        # the refractor radius is the min over component ellipsoids
        dots = x @ fitted.targets_.directions.T
        all_radii = fitted.coefficients_ / (1.0 - KAPPA * dots)
        np.testing.assert_allclose(radii, all_radii.min(axis=1), atol=1e-12)

    def test_transform_indices(self, fitted):
        x = fitted.source_grid_.points[::50]
        idx = fitted.transform(x)
        assert idx.dtype.kind == "i"
        assert idx.min() >= 0 and idx.max() < fitted.n_targets_

    def test_score_matches_report(self, fitted):
        assert -fitted.score() == pytest.approx(fitted.report_.err, abs=1e-15)
