"""Exact geometry on the unit sphere and on semi-ellipsoids of revolution.

All functions here are pure and operate on plain numpy arrays.  A "direction"
is a unit 3-vector; constructors normalize and reject zero vectors.  The
refraction constant kappa = n2/n1 must lie in (0, 1): the dense-to-rare
(ellipsoid) regime is the only one supported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateAxes, DomainViolation, TotalInternalReflection

# Snap tolerance before arccos at the cap boundary.
_Q_SNAP = 1e-14


@dataclass(frozen=True)
class RefractionConstant:
    """Refractive-index ratio kappa = n2/n1, optionally derived from n1, n2."""

    kappa: float
    n1: float | None = None
    n2: float | None = None

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must be in (0, 1), got {self.kappa}")

    @classmethod
    def from_indices(cls, n1, n2):
        if n1 <= 0 or n2 <= 0:
            raise ValueError("refractive indices must be positive")
        return cls(kappa=n2 / n1, n1=float(n1), n2=float(n2))

    def __float__(self):
        return self.kappa


def as_kappa(kappa) -> float:
    """Coerce a RefractionConstant or plain number to a validated float."""
    k = float(kappa)
    if not 0.0 < k < 1.0:
        raise ValueError(f"kappa must be in (0, 1), got {k}")
    return k


def normalize(v) -> np.ndarray:
    """Return v / |v|, raising on (near-)zero input."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n < 1e-300):
        raise ValueError("cannot normalize a zero vector")
    return v / n


def geodesic_distance(a, b) -> float:
    """Great-circle distance between two unit vectors, in radians."""
    d = float(np.clip(np.dot(a, b), -1.0, 1.0))
    return float(np.arccos(d))


def polar_radius(axis, coeff, x, kappa) -> float:
    """Polar radius coeff / (1 - kappa axis.x) of the semi-ellipsoid at x.

    Valid only on the refracting cap axis.x >= kappa; outside it the
    ellipsoid does not refract the ray and DomainViolation is raised.
    """
    kappa = as_kappa(kappa)
    if coeff <= 0:
        raise ValueError("ellipsoid coefficient must be positive")
    d = float(np.dot(axis, x))
    if d < kappa:
        raise DomainViolation(
            f"direction outside refracting cap: axis.x = {d} < kappa = {kappa}"
        )
    return coeff / (1.0 - kappa * d)


def second_focus(axis, coeff, kappa) -> np.ndarray:
    """The non-origin focus 2 kappa b / (1 - kappa^2) axis of the ellipsoid."""
    kappa = as_kappa(kappa)
    return (2.0 * kappa * coeff / (1.0 - kappa**2)) * np.asarray(axis, dtype=float)


@dataclass(frozen=True)
class RefractionEvent:
    """One refraction: incident x, surface normal nu, refracted m, multiplier lam.

    Satisfies x - kappa m = lam nu and the cross-product form of Snell's law.
    """

    incident: np.ndarray
    normal: np.ndarray
    refracted: np.ndarray
    multiplier: float


def refract(x, nu, kappa) -> RefractionEvent:
    """Refract incident unit direction x at a surface with unit normal nu.

    Requires x.nu >= sqrt(1 - kappa^2); below that the ray is totally
    internally reflected and TotalInternalReflection is raised.
    """
    kappa = as_kappa(kappa)
    x = normalize(x)
    nu = normalize(nu)
    c = float(np.dot(x, nu))
    critical = np.sqrt(1.0 - kappa**2)
    if c < critical - 1e-15:
        raise TotalInternalReflection(
            f"x.nu = {c} below critical cosine {critical} for kappa = {kappa}"
        )
    inner = max(1.0 - (1.0 - c**2) / kappa**2, 0.0)
    lam = c - kappa * np.sqrt(inner)
    m = (x - lam * nu) / kappa
    return RefractionEvent(incident=x, normal=nu, refracted=m, multiplier=lam)


@dataclass(frozen=True)
class DiskRegion:
    """Dominance region of one ellipsoid over another: a closed geodesic cap,
    the empty set, or the whole sphere.

    kind is one of "empty", "full", "cap"; center/angular_radius are set only
    for caps.
    """

    kind: str
    center: np.ndarray | None = None
    angular_radius: float | None = None

    @classmethod
    def empty(cls):
        return cls(kind="empty")

    @classmethod
    def full_sphere(cls):
        return cls(kind="full")

    @classmethod
    def cap(cls, center, angular_radius):
        if not 0.0 <= angular_radius <= np.pi:
            raise ValueError("cap radius must lie in [0, pi]")
        return cls(kind="cap", center=normalize(center),
                   angular_radius=float(angular_radius))

    def contains(self, x) -> np.ndarray | bool:
        """Membership test; accepts a single direction or an (k, 3) batch."""
        x = np.asarray(x, dtype=float)
        if self.kind == "empty":
            return np.zeros(x.shape[:-1], dtype=bool) if x.ndim > 1 else False
        if self.kind == "full":
            return np.ones(x.shape[:-1], dtype=bool) if x.ndim > 1 else True
        dots = x @ self.center
        return dots >= np.cos(self.angular_radius)

    def boundary_margin(self, x) -> np.ndarray:
        """Signed distance x.center - cos(radius); positive means inside."""
        if self.kind == "cap":
            return np.asarray(x) @ self.center - np.cos(self.angular_radius)
        sign = -1.0 if self.kind == "empty" else 1.0
        return sign * np.ones(np.asarray(x).shape[:-1])


def classify_dominance_disk(b_i, m_i, b_j, m_j, kappa) -> DiskRegion:
    """Region {x : b_i/(1 - k m_i.x) <= b_j/(1 - k m_j.x)} on the sphere.

    Rearranging gives x . (b_i m_j - b_j m_i) >= (b_i - b_j)/kappa, so the
    region is a closed geodesic cap, the whole sphere, or empty depending on
    q = (b_i - b_j) / (kappa |b_i m_j - b_j m_i|).
    """
    kappa = as_kappa(kappa)
    if b_i <= 0 or b_j <= 0:
        raise ValueError("ellipsoid coefficients must be positive")
    m_i = normalize(m_i)
    m_j = normalize(m_j)
    d = b_i * m_j - b_j * m_i
    nd = float(np.linalg.norm(d))
    if np.linalg.norm(m_i - m_j) < 1e-9:
        raise DegenerateAxes("dominance disk undefined for coincident axes")
    q = (b_i - b_j) / (kappa * nd)
    if abs(q - 1.0) < _Q_SNAP:
        q = 1.0
    elif abs(q + 1.0) < _Q_SNAP:
        q = -1.0
    if q > 1.0:
        return DiskRegion.empty()
    if q <= -1.0:
        return DiskRegion.full_sphere()
    return DiskRegion.cap(d / nd, np.arccos(q))


def check_no_total_reflection(omega_samples, targets, kappa):
    """Check min over pairs of m.x >= kappa; report the minimizing pair.

    Returns (ok, min_dot, (source_index, target_index)).
    """
    kappa = as_kappa(kappa)
    xs = np.atleast_2d(np.asarray(omega_samples, dtype=float))
    ms = np.atleast_2d(np.asarray(targets, dtype=float))
    if xs.size == 0 or ms.size == 0:
        raise ValueError("both direction lists must be nonempty")
    dots = xs @ ms.T
    flat = int(np.argmin(dots))
    i, j = np.unravel_index(flat, dots.shape)
    min_dot = float(dots[i, j])
    return min_dot >= kappa, min_dot, (int(i), int(j))
