"""Conformal group of the unit sphere S^m and the associated test functions.

Sphere points are plain numpy arrays of shape (m+1,) with unit Euclidean
norm; most functions also accept batches of shape (..., m+1) and broadcast
over the leading axes.

The dilations ``xi(p, t)`` are conjugates of the Euclidean scaling v -> t*v
by the stereographic projection from the pole p onto the hyperplane
L_p = {x : x.p = 0}.  A point at geodesic angle theta from p projects to
radius cot(theta/2), so the ball of radius 2R about p corresponds to the
region *outside* radius cot(R) in L_p.  All closed forms below reproduce
t(R) = tan(R) and rho(R) = 1 + 1/cos(R) exactly under this orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Annulus",
    "MoebiusMap",
    "bar_phi",
    "cap_parameters",
    "covering_witness",
    "fold_map",
    "geodesic_distance",
    "phi_cap",
    "sphere_point",
    "stereographic",
    "stereographic_inverse",
    "u_annulus",
    "xi_map",
]

_UNIT_TOL = 1e-12


def sphere_point(coords) -> np.ndarray:
    """Validate and return a unit vector (norm 1 within 1e-12)."""
    q = np.asarray(coords, dtype=float)
    norms = np.linalg.norm(q, axis=-1)
    if not np.all(np.abs(norms - 1.0) <= _UNIT_TOL):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(f"point not on the unit sphere (|norm - 1| = {worst:.3e})")
    return q


def geodesic_distance(x, y) -> np.ndarray | float:
    """Intrinsic distance on S^m: arccos of the clamped inner product."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dots = np.clip(np.sum(x * y, axis=-1), -1.0, 1.0)
    return np.arccos(dots)


def stereographic(p, q) -> np.ndarray:
    """Project q from the pole p onto L_p = {x : x.p = 0}.

    Returns the ambient coordinates of (q - (q.p) p) / (1 - q.p), the
    intersection of the line through p and q with L_p.  A point at angle
    theta from p lands at radius cot(theta/2).  Raises for q = p.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = np.sum(q * p, axis=-1)
    if np.any(c >= 1.0 - 1e-15):
        raise ValueError("stereographic projection undefined at the pole itself")
    return (q - c[..., None] * p) / (1.0 - c)[..., None]


def stereographic_inverse(p, v) -> np.ndarray:
    """Inverse of :func:`stereographic`: v in L_p back to the sphere.

    With c = (|v|^2 - 1)/(|v|^2 + 1) the point is c*p + (1 - c)*v.
    """
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = np.sum(v * v, axis=-1)
    c = (r2 - 1.0) / (r2 + 1.0)
    return c[..., None] * p + (1.0 - c)[..., None] * v


def xi_map(p, t: float, q) -> np.ndarray:
    """The conformal dilation xi(p, t) applied to q (vectorized in q).

    Closed form, smooth through both fixed points p and -p:
    with c = q.p and D = t^2 (1+c) + (1-c),

        xi(p,t)(q) = c' p + (2 t / D) (q - c p),
        c' = (t^2 (1+c) - (1-c)) / D.

    xi(p,1) = id and xi(p,t) o xi(p,s) = xi(p,ts).
    """
    if t <= 0.0:
        raise ValueError("dilation parameter t must be positive")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = np.sum(q * p, axis=-1)
    t2 = t * t
    dd = t2 * (1.0 + c) + (1.0 - c)
    cp = (t2 * (1.0 + c) - (1.0 - c)) / dd
    out = cp[..., None] * p + (2.0 * t / dd)[..., None] * (q - c[..., None] * p)
    # renormalize to kill accumulated round-off (stays within ~1e-15 anyway)
    out /= np.linalg.norm(out, axis=-1, keepdims=True)
    return out


def _height_after_xi(t: float, c):
    """x_p(xi(p,t)(q)) given c = cos d(p, q), without forming the point."""
    t2 = t * t
    return (t2 * (1.0 + c) - (1.0 - c)) / (t2 * (1.0 + c) + (1.0 - c))


def cap_parameters(R: float) -> tuple[float, float]:
    """Dilation and image radius for the cap function of outer radius 2R.

    t(R) = tan(R) sends B_{2R}(p) onto the open hemisphere about p;
    rho(R) = 1 + 1/cos(R) is the stereographic radius of the image of
    B_R(p), with rho >= 2 and rho -> 2 as R -> 0+.
    """
    if not 0.0 < R < np.pi / 2:
        raise ValueError(f"cap radius must lie in (0, pi/2), got {R}")
    return np.tan(R), 1.0 + 1.0 / np.cos(R)


def phi_cap(R: float, p, q) -> np.ndarray | float:
    """Cap test function: x_p(xi(p, tan R)(q)) on B_{2R}(p), zero outside.

    Takes the value 1 at p, vanishes continuously on the boundary of
    B_{2R}(p), and is at least 3/5 on B_R(p).
    """
    t, _ = cap_parameters(R)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = np.clip(np.sum(q * p, axis=-1), -1.0, 1.0)
    inside = c > np.cos(2.0 * R)
    vals = np.where(inside, _height_after_xi(t, c), 0.0)
    return np.clip(vals, 0.0, 1.0)


def bar_phi(r: float, p, q) -> np.ndarray | float:
    """Complementary test function: zero on B_{r/2}(p), -x_p(xi(p,tau)(q)) outside.

    tau = tan(r/4) is the dilation sending B_{r/2}(p) onto the hemisphere
    about p, so the function vanishes continuously on the boundary of
    B_{r/2}(p), equals 1 at -p, and is at least 3/5 outside B_r(p).
    """
    if not 0.0 < r < np.pi:
        raise ValueError(f"inner radius must lie in (0, pi), got {r}")
    tau = np.tan(r / 4.0)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = np.clip(np.sum(q * p, axis=-1), -1.0, 1.0)
    outside = c <= np.cos(r / 2.0)
    vals = np.where(outside, -_height_after_xi(tau, c), 0.0)
    return np.clip(vals, 0.0, 1.0)


@dataclass(frozen=True)
class Annulus:
    """Geodesic shell {x : inner <= d(x, center) < outer} on S^m.

    The doubled annulus 2A halves the inner and doubles the outer radius.
    """

    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        object.__setattr__(self, "center", sphere_point(self.center))
        if not (0.0 <= self.inner < self.outer < np.pi):
            raise ValueError(
                f"need 0 <= inner < outer < pi, got [{self.inner}, {self.outer})"
            )

    def doubled(self) -> "Annulus":
        outer = min(2.0 * self.outer, np.nextafter(np.pi, 0.0))
        return Annulus(self.center, self.inner / 2.0, outer)

    def contains(self, points) -> np.ndarray:
        d = geodesic_distance(self.center, points)
        return (d >= self.inner) & (d < self.outer)

    def shell_interval(self) -> tuple[float, float]:
        """Distance-from-center interval, clipped to the attainable [0, pi]."""
        return self.inner, min(self.outer, np.pi)

    def as_dict(self) -> dict:
        return {
            "center": [float(x) for x in self.center],
            "inner": float(self.inner),
            "outer": float(self.outer),
        }


def u_annulus(annulus: Annulus, q) -> np.ndarray | float:
    """Annulus test function phi_cap * bar_phi, supported in 2A.

    For an annulus A = B_R(p) \\ B_r(p) with 0 <= r < R < pi/2 the product
    is at least 9/25 on A; for r = 0 the bar factor is omitted and the
    function reduces to the cap function.
    """
    R = annulus.outer
    if R >= np.pi / 2:
        raise ValueError("annulus test functions need outer radius < pi/2")
    vals = phi_cap(R, annulus.center, q)
    if annulus.inner > 0.0:
        vals = vals * bar_phi(annulus.inner, annulus.center, q)
    return vals


def fold_map(p, q) -> np.ndarray:
    """Fold of the sphere onto the closed hemisphere about p.

    Identity where q.p >= 0, reflection q - 2(q.p)p where q.p <= 0; weakly
    conformal with singular set {q.p = 0}.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    c = np.sum(q * p, axis=-1)
    reflected = q - 2.0 * c[..., None] * p
    return np.where((c >= 0.0)[..., None], q, reflected)


@dataclass(frozen=True)
class MoebiusMap:
    """rotation o xi(pole, t): the conformal maps used throughout.

    The rotation is an orthogonal (m+1)x(m+1) matrix; every evaluation
    stays on the unit sphere.  Composition with rotations on the left and
    the group law of the dilations make this family closed under inverse.
    """

    rotation: np.ndarray
    pole: np.ndarray
    t: float

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        if rot.ndim != 2 or rot.shape[0] != rot.shape[1]:
            raise ValueError("rotation must be a square matrix")
        if np.max(np.abs(rot.T @ rot - np.eye(rot.shape[0]))) > _UNIT_TOL * 10:
            raise ValueError("rotation matrix is not orthogonal")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "pole", sphere_point(self.pole))
        if self.t <= 0.0:
            raise ValueError("dilation parameter t must be positive")

    @classmethod
    def identity(cls, m: int) -> "MoebiusMap":
        pole = np.zeros(m + 1)
        pole[-1] = 1.0
        return cls(np.eye(m + 1), pole, 1.0)

    @classmethod
    def dilation(cls, pole, t: float) -> "MoebiusMap":
        pole = sphere_point(pole)
        return cls(np.eye(pole.shape[-1]), pole, t)

    def __call__(self, q) -> np.ndarray:
        moved = xi_map(self.pole, self.t, q)
        return moved @ self.rotation.T

    def inverse(self) -> "MoebiusMap":
        # (R o xi_{p,t})^{-1} = R^T o xi_{Rp, 1/t}
        return MoebiusMap(self.rotation.T, self.rotation @ self.pole, 1.0 / self.t)

    def as_dict(self) -> dict:
        return {
            "rotation": [[float(x) for x in row] for row in self.rotation],
            "pole": [float(x) for x in self.pole],
            "t": float(self.t),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MoebiusMap":
        return cls(np.array(data["rotation"]), np.array(data["pole"]), data["t"])


@dataclass
class CoveringReport:
    """Sampled witnesses for the half-radius ball covering property."""

    m: int
    bound: int
    max_count: int
    counts: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def all_within_bound(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "m": self.m,
            "bound": self.bound,
            "max_count": self.max_count,
            "counts": self.counts,
            "failures": self.failures,
        }


def _uniform_sphere(rng: np.random.Generator, m: int, size: int) -> np.ndarray:
    pts = rng.standard_normal((size, m + 1))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def covering_witness(
    m: int, trials: int = 20, seed: int = 0, samples: int = 4000
) -> CoveringReport:
    """Greedily cover sampled balls by half-radius balls; report counts vs 9^m.

    For each trial a random ball B_r(a) is densely sampled and covered by
    balls of radius r/2 centred at uncovered sample points.  A count above
    9^m at sample resolution is reported as a failure, never asserted:
    the covering property itself is an exact statement.
    """
    if m not in (1, 2, 3):
        raise ValueError("covering witness implemented for m in {1, 2, 3}")
    rng = np.random.default_rng(seed)
    bound = 9**m
    report = CoveringReport(m=m, bound=bound, max_count=0)
    for trial in range(trials):
        a = _uniform_sphere(rng, m, 1)[0]
        r = float(rng.uniform(0.05, np.pi))
        cloud = _uniform_sphere(rng, m, samples)
        cloud = cloud[geodesic_distance(a, cloud) < r]
        if cloud.shape[0] == 0:
            report.counts.append(0)
            continue
        covered = np.zeros(cloud.shape[0], dtype=bool)
        count = 0
        while not covered.all():
            centre = cloud[np.argmin(covered)]  # first uncovered point
            covered |= geodesic_distance(centre, cloud) < r / 2.0
            count += 1
        report.counts.append(count)
        report.max_count = max(report.max_count, count)
        if count > bound:
            report.failures.append({"trial": trial, "r": r, "count": count})
    return report
