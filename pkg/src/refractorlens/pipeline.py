"""End-to-end machinery: source/target lattices, image-derived intensities,
forward intensity rendering, and lens surface export.

The source domain is the cone over the square (+-1, +-1, 2); discretized as
the (2M+1)^2 directions [r : r' : 2M].  The target lattice is the (n+1)^2
directions [r : r' : 5n] with r, r' stepping by 2 through -n..n, inside the
cone over (+-1, +-1, 5).  The image convention: lattice coordinate r runs
along image columns (left to right) and the top image row maps to r' = +n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllDark, TotalReflectionRisk, UnsupportedFormat
from .geometry import as_kappa, check_no_total_reflection, normalize
from .pgm import IntensityImage
from .refractor import SourceGrid, TargetSpec, trace_all


@dataclass(frozen=True)
class TargetLattice:
    """The (n+1)^2 refracted directions, row-major in (r, r')."""

    n: int
    directions: np.ndarray

    @classmethod
    def build(cls, n: int):
        if n < 1:
            raise ValueError("n must be >= 1")
        rs = np.arange(-n, n + 1, 2)
        r, rp = np.meshgrid(rs, rs, indexing="ij")
        raw = np.stack([r.ravel(), rp.ravel(), np.full(r.size, 5 * n)], axis=1)
        return cls(n=n, directions=normalize(raw.astype(float)))

    @property
    def size(self) -> int:
        return (self.n + 1) ** 2

    def flat_index(self, a: int, c: int) -> int:
        """Index of (r_a, r'_c) in the row-major enumeration."""
        return a * (self.n + 1) + c


@dataclass(frozen=True)
class SourceLattice:
    """The (2M+1)^2 source directions with uniform weights."""

    M: int
    directions: np.ndarray

    @classmethod
    def build(cls, M: int):
        if M < 1:
            raise ValueError("M must be >= 1")
        rs = np.arange(-M, M + 1)
        r, rp = np.meshgrid(rs, rs, indexing="ij")
        raw = np.stack([r.ravel(), rp.ravel(), np.full(r.size, 2 * M)], axis=1)
        return cls(M=M, directions=normalize(raw.astype(float)))

    @property
    def size(self) -> int:
        return (2 * self.M + 1) ** 2

    def as_grid(self) -> SourceGrid:
        return SourceGrid.uniform(self.directions, M=self.M)


def build_lattices(n: int, M: int, kappa):
    """Build both lattices and verify the no-total-reflection condition."""
    kappa = as_kappa(kappa)
    tl = TargetLattice.build(n)
    sl = SourceLattice.build(M)
    ok, min_dot, pair = check_no_total_reflection(sl.directions, tl.directions, kappa)
    if not ok:
        raise TotalReflectionRisk(
            f"min pairwise dot {min_dot:.6g} < kappa {kappa}; worst pair {pair}"
        )
    return tl, sl


def _box_resample_1d(a: np.ndarray, out: int) -> np.ndarray:
    """Exact area-average resampling along axis 0."""
    length = a.shape[0]
    if length == out:
        return a.astype(float)
    cumulative = np.zeros((length + 1,) + a.shape[1:], dtype=float)
    np.cumsum(a, axis=0, out=cumulative[1:])

    def integral(pos):
        lo = np.floor(pos).astype(int)
        frac = pos - lo
        lo = np.clip(lo, 0, length)
        hi = np.clip(lo + 1, 0, length)
        return cumulative[lo] + frac[(...,) + (None,) * (a.ndim - 1)] * (
            cumulative[hi] - cumulative[lo])

    edges = np.linspace(0.0, float(length), out + 1)
    sums = integral(edges[1:]) - integral(edges[:-1])
    return sums * (out / length)


def box_resample(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Area-average resampling of a 2-D array to (out_h, out_w)."""
    tmp = _box_resample_1d(np.asarray(img, dtype=float), out_h)
    return _box_resample_1d(tmp.T, out_w).T


def image_to_targets(img: IntensityImage, lattice: TargetLattice,
                     dark_floor_fraction: float = 0.05,
                     coverage_fraction: float = 0.30,
                     gamma: float = 1.0):
    """Turn a grayscale image into target intensities plus a certification mask.

    The image is box-filtered to (n+1) x (n+1); luminance maps linearly to
    intensity (optional gamma).  Values below dark_floor_fraction of the mean
    are raised to that floor so every intensity stays positive, then the
    vector is normalized to unit total.  The mask marks the brightest
    coverage_fraction of directions: the set over which image-reproduction
    error is enforced (the eye does not resolve nuances of black).

    Returns (TargetSpec, mask) with mask a boolean array over the lattice.
    """
    if not 0.0 < coverage_fraction <= 1.0:
        raise ValueError("coverage_fraction must be in (0, 1]")
    if not 0.0 < dark_floor_fraction < 1.0:
        raise ValueError("dark_floor_fraction must be in (0, 1)")
    px = img.pixels
    if px.max() == 0.0:
        raise AllDark("every pixel is zero; target intensities are undefined")
    side = lattice.n + 1
    res = box_resample(px**gamma if gamma != 1.0 else px, side, side)
    # res[row, col]: row 0 is the image top, mapping to r' = +n.
    f = np.empty(lattice.size)
    for a in range(side):
        for c in range(side):
            f[lattice.flat_index(a, c)] = res[side - 1 - c, a]
    floor = dark_floor_fraction * f.mean()
    f = np.maximum(f, floor)
    f = f / f.sum()
    k = max(int(np.floor(coverage_fraction * lattice.size)), 1)
    threshold = np.sort(f)[::-1][k - 1]
    mask = f >= threshold
    return TargetSpec(lattice.directions, f), mask


def forward_render(b, targets: TargetSpec, lattice: TargetLattice,
                   grid, kappa):
    """Ray-trace the solved refractor and image the achieved intensities.

    Pixel (r, r') holds the measure captured by the lattice direction there,
    max-normalized to [0, 1].  Also returns a table of per-direction relative
    errors |G_i - f_i| / f_i with summary quantiles.  ``grid`` may be a
    SourceGrid or a SourceLattice.
    """
    if isinstance(grid, SourceLattice):
        grid = grid.as_grid()
    assignment = trace_all(b, targets, grid, kappa)
    g = assignment.counts
    side = lattice.n + 1
    px = np.empty((side, side))
    for a in range(side):
        for c in range(side):
            px[side - 1 - c, a] = g[lattice.flat_index(a, c)]
    peak = px.max()
    image = IntensityImage(px / peak if peak > 0 else px)
    rel = np.abs(g - targets.intensities) / targets.intensities
    table = {
        "relative_errors": rel,
        "achieved": g,
        "prescribed": targets.intensities.copy(),
        "median": float(np.quantile(rel, 0.5)),
        "q90": float(np.quantile(rel, 0.9)),
        "max": float(rel.max()),
    }
    return image, table


def surface_vertices(b, targets: TargetSpec, lattice: SourceLattice, kappa) -> np.ndarray:
    """Refractor surface points rho(gamma) gamma over the source lattice."""
    grid = lattice.as_grid()
    assignment = trace_all(b, targets, grid, kappa)
    b = np.asarray(b, dtype=float)
    radii = b[assignment.winner] / assignment.denoms[
        np.arange(grid.size), assignment.winner]
    return radii[:, None] * grid.points


def lattice_triangles(M: int) -> np.ndarray:
    """Two triangles per cell of the (2M+1)^2 lattice, as vertex index triples."""
    side = 2 * M + 1
    tris = []
    for i in range(side - 1):
        for j in range(side - 1):
            v00 = i * side + j
            v01 = v00 + 1
            v10 = v00 + side
            v11 = v10 + 1
            tris.append((v00, v10, v11))
            tris.append((v00, v11, v01))
    return np.asarray(tris, dtype=int)


def export_mesh(b, targets: TargetSpec, lattice: SourceLattice, kappa,
                fmt: str, path):
    """Write the lens surface as a triangulated mesh (units of b_1).

    Supported formats: "obj" (v/f lines, 1-based) and "stl" (ASCII, facet
    normals from triangle geometry).
    """
    fmt = fmt.lower()
    if fmt not in ("obj", "stl"):
        raise UnsupportedFormat(f"unknown mesh format {fmt!r}")
    verts = surface_vertices(b, targets, lattice, kappa)
    tris = lattice_triangles(lattice.M)
    with open(path, "w") as fh:
        if fmt == "obj":
            for v in verts:
                fh.write(f"v {v[0]:.9f} {v[1]:.9f} {v[2]:.9f}\n")
            for t in tris:
                fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")
        else:
            fh.write("solid refractor\n")
            for t in tris:
                p0, p1, p2 = verts[t]
                nrm = np.cross(p1 - p0, p2 - p0)
                norm = np.linalg.norm(nrm)
                nrm = nrm / norm if norm > 0 else nrm
                fh.write(f"  facet normal {nrm[0]:.9e} {nrm[1]:.9e} {nrm[2]:.9e}\n")
                fh.write("    outer loop\n")
                for p in (p0, p1, p2):
                    fh.write(f"      vertex {p[0]:.9e} {p[1]:.9e} {p[2]:.9e}\n")
                fh.write("    endloop\n")
                fh.write("  endfacet\n")
            fh.write("endsolid refractor\n")
    return path
