"""Obstacles, scenes, ray casting and the reflection law.

Obstacles are strictly convex bodies described by an implicit function
``f(x) <= 0``.  Only balls are shipped, but everything downstream consumes
the generic ``normal`` / ``shape_operator`` / ``intersect`` surface, so an
ellipsoid only needs to provide ``value``, ``gradient``, ``hessian`` and
``intersect``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    BoundaryError,
    ConfigError,
    DomainError,
    EscapeError,
    FrameError,
    GeometryError,
)

BOUNDARY_TOL = 1e-10
GRAZING_TOL = 1e-6
FRAME_TOL = 1e-10


class Obstacle:
    """Strictly convex body ``{x : value(x) <= 0}``."""

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def intersect(self, x, v):
        """Smallest ``t > 0`` with ``x + t v`` entering the body, or None."""
        raise NotImplementedError

    def boundary_defect(self, x) -> float:
        raise NotImplementedError

    def check_on_boundary(self, x, tol=BOUNDARY_TOL):
        defect = self.boundary_defect(x)
        if defect > tol:
            raise BoundaryError(f"point {np.asarray(x).tolist()} is {defect:.3e} off the boundary")

    def normal(self, x, tol=BOUNDARY_TOL):
        """Inward unit normal at a boundary point."""
        self.check_on_boundary(x, tol)
        g = self.gradient(x)
        return -g / np.linalg.norm(g)

    def shape_operator(self, x):
        """Ambient ``d x d`` matrix of the shape operator (derivative of the
        outward normal restricted to the tangent space, zero along n).

        Positive semi-definite for convex bodies; ``dn`` of the *inward*
        normal is its negative.
        """
        g = self.gradient(x)
        gnorm = np.linalg.norm(g)
        n = g / gnorm
        proj = np.eye(len(n)) - np.outer(n, n)
        return proj @ self.hessian(x) @ proj / gnorm


@dataclass(frozen=True)
class Ball(Obstacle):
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def c(self):
        return np.asarray(self.center)

    @property
    def dimension(self):
        return len(self.center)

    def value(self, x):
        r = np.asarray(x) - self.c
        return float(r @ r - self.radius**2)

    def gradient(self, x):
        return 2.0 * (np.asarray(x) - self.c)

    def hessian(self, x):
        return 2.0 * np.eye(self.dimension)

    def boundary_defect(self, x):
        return abs(float(np.linalg.norm(np.asarray(x) - self.c)) - self.radius)

    def normal(self, x, tol=BOUNDARY_TOL):
        self.check_on_boundary(x, tol)
        r = self.c - np.asarray(x, dtype=float)
        return r / np.linalg.norm(r)

    def shape_operator(self, x):
        r = np.asarray(x, dtype=float) - self.c
        n = r / np.linalg.norm(r)
        return (np.eye(self.dimension) - np.outer(n, n)) / self.radius

    def project(self, y):
        r = np.asarray(y, dtype=float) - self.c
        return self.c + self.radius * r / np.linalg.norm(r)

    def intersect(self, x, v, tol=BOUNDARY_TOL):
        w = np.asarray(x, dtype=float) - self.c
        b = float(w @ v)
        cc = float(w @ w) - self.radius**2
        if cc < -tol * 2 * self.radius:
            raise DomainError(f"point {np.asarray(x).tolist()} lies inside an obstacle")
        disc = b * b - cc
        if disc < 0.0:
            return None
        # numerically stable pair of roots
        q = -(b + math.copysign(math.sqrt(disc), b))
        if q == 0.0:
            return None
        t1, t2 = q, cc / q
        t_in = min(t1, t2)
        if t_in <= tol:
            return None
        return t_in

    def to_dict(self):
        return {"center": list(self.center), "radius": self.radius}


def capsule_clearance(ci, ai, cj, aj, p):
    """Signed distance from ``p`` to the convex hull of two balls.

    The hull of B(ci, ai) and B(cj, aj) is the union over t in [0, 1] of the
    balls centred at ci + t (cj - ci) with radius ai + t (aj - ai), so the
    distance is ``min_t |p - c(t)| - a(t)``.  That function of t is convex,
    so a bounded scalar minimisation finds the global minimum.  Returns
    ``(distance, t_star)``.
    """
    ci, cj, p = (np.asarray(a, dtype=float) for a in (ci, cj, p))
    seg = cj - ci

    def f(t):
        return float(np.linalg.norm(p - (ci + t * seg)) - (ai + t * (aj - ai)))

    if np.allclose(seg, 0.0):
        return f(0.0), 0.0
    res = minimize_scalar(f, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-13})
    best = min((f(0.0), 0.0), (f(1.0), 1.0), (res.fun, float(res.x)))
    return best


@dataclass(frozen=True)
class NonEclipseReport:
    passed: bool
    witness: Optional[tuple] = None  # 1-based (i, j, k): D_k meets hull(D_i u D_j)
    point: Optional[tuple] = None
    min_clearance: float = math.inf

    def to_dict(self):
        return {
            "passed": self.passed,
            "witness": list(self.witness) if self.witness else None,
            "point": list(self.point) if self.point else None,
            "min_clearance": self.min_clearance,
        }


@dataclass(frozen=True)
class Scene:
    """Immutable collection of r >= 3 disjoint balls in R^d."""

    dimension: int
    obstacles: tuple
    d0: float = field(init=False)
    d1: float = field(init=False)

    def __post_init__(self):
        if self.dimension < 2:
            raise ConfigError("dimension must be >= 2")
        obstacles = tuple(self.obstacles)
        object.__setattr__(self, "obstacles", obstacles)
        if len(obstacles) < 3:
            raise ConfigError(f"r >= 3 required, got r = {len(obstacles)}")
        for k, ob in enumerate(obstacles):
            if ob.dimension != self.dimension:
                raise ConfigError(f"obstacle {k + 1} has dimension {ob.dimension}, expected {self.dimension}")
        gaps = [self.gap(i, j) for i, j in itertools.combinations(range(len(obstacles)), 2)]
        object.__setattr__(self, "d0", min(gaps))
        object.__setattr__(self, "d1", max(gaps))

    @property
    def r(self):
        return len(self.obstacles)

    def gap(self, i, j):
        a, b = self.obstacles[i], self.obstacles[j]
        return float(np.linalg.norm(a.c - b.c) - a.radius - b.radius)

    @property
    def max_radius(self):
        return max(ob.radius for ob in self.obstacles)

    def to_dict(self):
        return {"dimension": self.dimension, "obstacles": [ob.to_dict() for ob in self.obstacles]}

    def hash(self):
        """Stable digest of the scene content (float repr is exact)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("scene must be a JSON object")
        unknown = set(data) - {"dimension", "obstacles"}
        if unknown:
            raise ConfigError(f"unknown scene keys: {sorted(unknown)}")
        if "dimension" not in data or "obstacles" not in data:
            raise ConfigError("scene needs 'dimension' and 'obstacles'")
        dim = data["dimension"]
        if not isinstance(dim, int) or isinstance(dim, bool):
            raise ConfigError("'dimension' must be an integer")
        obstacles = []
        for k, ob in enumerate(data["obstacles"]):
            if not isinstance(ob, dict):
                raise ConfigError(f"obstacle {k + 1} must be an object")
            extra = set(ob) - {"center", "radius"}
            if extra:
                raise ConfigError(f"obstacle {k + 1}: unknown keys {sorted(extra)}")
            try:
                center = [float(c) for c in ob["center"]]
                radius = float(ob["radius"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"obstacle {k + 1}: bad center/radius ({exc})") from None
            obstacles.append(Ball(tuple(center), radius))
        return cls(dim, tuple(obstacles))


def load_scene(path) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return Scene.from_dict(data)


def three_disk_scene(side=6.0, radius=1.0) -> Scene:
    """Unit-disk equilateral configuration used throughout the tests."""
    h = side * math.sqrt(3) / 2
    return Scene(2, (Ball((0.0, 0.0), radius), Ball((side, 0.0), radius), Ball((side / 2, h), radius)))


# -- pointwise operations ---------------------------------------------------


def normal(obstacle: Obstacle, x, tol=BOUNDARY_TOL):
    return obstacle.normal(np.asarray(x, dtype=float), tol)


def gauss_map(obstacle: Obstacle, x, frame):
    """Shape operator of ``obstacle`` at ``x`` in an orthonormal tangent frame.

    ``frame`` is ``d x (d-1)``, columns orthonormal and orthogonal to the
    normal.  For a ball of radius a the result is ``Id / a``.
    """
    x = np.asarray(x, dtype=float)
    frame = np.atleast_2d(np.asarray(frame, dtype=float))
    n = obstacle.normal(x)
    if frame.shape != (len(x), len(x) - 1):
        raise FrameError(f"frame must have shape {(len(x), len(x) - 1)}, got {frame.shape}")
    if np.abs(frame.T @ frame - np.eye(len(x) - 1)).max() > FRAME_TOL:
        raise FrameError("frame is not orthonormal")
    if np.abs(frame.T @ n).max() > FRAME_TOL:
        raise FrameError("frame is not tangent to the boundary")
    return frame.T @ obstacle.shape_operator(x) @ frame


def reflect(v, n):
    v = np.asarray(v, dtype=float)
    n = np.asarray(n, dtype=float)
    return v - 2.0 * (v @ n) * n


@dataclass(frozen=True)
class Hit:
    index: int  # 0-based obstacle index
    t: float
    point: np.ndarray


def ray_intersect(scene: Scene, x, v) -> Optional[Hit]:
    """First obstacle hit by the ray ``x + t v``, ``t > 0``; None if it escapes."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    best = None
    for k, ob in enumerate(scene.obstacles):
        t = ob.intersect(x, v)
        if t is not None and (best is None or t < best[1]):
            best = (k, t)
    if best is None:
        return None
    k, t = best
    return Hit(k, t, scene.obstacles[k].project(x + t * v))


@dataclass(frozen=True)
class BilliardStep:
    index: int
    point: np.ndarray
    direction: np.ndarray  # reflected (outgoing) direction
    length: float
    incidence: float  # |<incoming, n>| at the hit
    grazing: bool


def billiard_map(scene: Scene, x, v) -> BilliardStep:
    """Fly from ``x`` along ``v`` to the next obstacle and reflect there."""
    hit = ray_intersect(scene, x, v)
    if hit is None:
        raise EscapeError(f"ray from {np.asarray(x).tolist()} along {np.asarray(v).tolist()} escapes")
    n = scene.obstacles[hit.index].normal(hit.point)
    cos_in = abs(float(np.asarray(v) @ n))
    w = reflect(v, n)
    length = float(np.linalg.norm(hit.point - np.asarray(x, dtype=float)))
    return BilliardStep(hit.index, hit.point, w / np.linalg.norm(w), length, cos_in, cos_in < GRAZING_TOL)


def check_noneclipse(scene: Scene) -> NonEclipseReport:
    """Verify that no obstacle meets the convex hull of two others.

    Pairwise disjointness is checked first and reported as a GeometryError.
    """
    obs = scene.obstacles
    for i, j in itertools.combinations(range(scene.r), 2):
        if scene.gap(i, j) <= 0.0:
            raise GeometryError(f"obstacles {i + 1} and {j + 1} intersect or touch")
    worst = math.inf
    for i, j in itertools.combinations(range(scene.r), 2):
        for k in range(scene.r):
            if k in (i, j):
                continue
            dist, t = capsule_clearance(obs[i].c, obs[i].radius, obs[j].c, obs[j].radius, obs[k].c)
            clearance = dist - obs[k].radius
            worst = min(worst, clearance)
            if clearance <= 0.0:
                c_t = obs[i].c + t * (obs[j].c - obs[i].c)
                a_t = obs[i].radius + t * (obs[j].radius - obs[i].radius)
                u = obs[k].c - c_t
                nu = np.linalg.norm(u)
                point = c_t if nu == 0 else c_t + min(a_t, nu) * u / nu
                return NonEclipseReport(False, (i + 1, j + 1, k + 1), tuple(map(float, point)), clearance)
    return NonEclipseReport(True, None, None, worst)


def orthonormal_complement(w, seed: Optional[Sequence] = None):
    """``d x (d-1)`` orthonormal basis of the plane orthogonal to ``w``.

    In d=2 this is the counter-clockwise rotation of ``w``.  Otherwise the
    columns of ``seed`` (if given) are projected and Gram-Schmidt'ed,
    falling back to coordinate axes.
    """
    w = np.asarray(w, dtype=float)
    d = len(w)
    if d == 2:
        return np.array([[-w[1]], [w[0]]])
    candidates = []
    if seed is not None:
        candidates.extend(np.asarray(seed, dtype=float).T)
    candidates.extend(np.eye(d))
    basis = []
    for c in candidates:
        u = c - (c @ w) * w
        for b in basis:
            u = u - (u @ b) * b
        nu = np.linalg.norm(u)
        if nu > 1e-8:
            basis.append(u / nu)
        if len(basis) == d - 1:
            break
    return np.column_stack(basis)
