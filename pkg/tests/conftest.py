import numpy as np
import pytest

from refractorlens import SourceGrid, TargetSpec, normalize

KAPPA = 0.5

# Three-direction instance: axes [0:0:1], [0:1:5], [1:0:5], uniform thirds.
FIG1_DIRECTIONS = normalize(np.array([
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 5.0],
    [1.0, 0.0, 5.0],
]))


@pytest.fixture
def fig1_targets():
    return TargetSpec.uniform(FIG1_DIRECTIONS)


def cone_grid(m: int) -> SourceGrid:
    """Uniform grid of (2m+1)^2 directions [r/2 : r'/2 : 2m], well inside the
    refracting caps of any near-axis target for kappa <= 0.6."""
    rs = np.arange(-m, m + 1)
    r, rp = np.meshgrid(rs, rs, indexing="ij")
    pts = np.column_stack([0.5 * r.ravel(), 0.5 * rp.ravel(),
                           np.full(r.size, 2.0 * m)])
    return SourceGrid.uniform(pts, M=m)


@pytest.fixture
def small_grid():
    return cone_grid(10)


def random_unit(rng, size=None):
    v = rng.normal(size=(size, 3) if size else 3)
    return normalize(v)
