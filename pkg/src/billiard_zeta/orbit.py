"""Periodic rays as critical points of the cyclic length functional.

For an admissible word the periodic ray is the unique minimiser of
``L(q_1, ..., q_m) = sum |q_{i+1} - q_i|`` with ``q_i`` on the boundary of
obstacle ``word[i]``.  Points are moved in local tangent coordinates
``q = c + a * normalize(u0 + T y)`` re-centred after every step, so the
same code works for disks and spheres.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import AdmissibilityError, CertificationError, ConvergenceError, DegeneracyError, GeometryError
from .geometry import Scene, orthonormal_complement, reflect
from .symbolic import CyclicClass, canonicalize

DEFAULT_TOL = 1e-12
DEFAULT_SWEEPS = 200
DEFAULT_NEWTON = 25
NEWTON_BASIN = 1e-2


@dataclass(frozen=True)
class PeriodicOrbit:
    cls: CyclicClass
    word: tuple  # symbols in traversal order (0-based obstacles are word[i]-1)
    points: np.ndarray  # (m, d)
    directions: np.ndarray  # (m, d), directions[i] from points[i] to points[i+1]
    lengths: np.ndarray  # (m,), lengths[i] = |points[i] - points[i-1]|
    tau: float
    tau_sharp: float
    residual: float
    incidences: np.ndarray  # <omega_{i-1}, n(q_i)> (> 0, incoming side)

    @property
    def m(self) -> int:
        return len(self.word)

    @property
    def mu(self) -> int:
        return self.cls.mu

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def to_dict(self):
        return {
            "word": list(self.word),
            "points": self.points.tolist(),
            "lambdas": self.lengths.tolist(),
            "tau": self.tau,
            "tau_sharp": self.tau_sharp,
            "m": self.m,
            "residual": self.residual,
        }


def _orbit_geometry(points):
    nxt = np.roll(points, -1, axis=0)
    seg = nxt - points
    seglen = np.linalg.norm(seg, axis=1)
    directions = seg / seglen[:, None]
    lengths = np.roll(seglen, 1)
    return directions, lengths


def orbit_residual(scene: Scene, orbit_or_word, points=None) -> float:
    """Largest reflection-law defect plus boundary defect along the orbit."""
    if points is None:
        word, points = orbit_or_word.word, orbit_or_word.points
    else:
        word = orbit_or_word
    points = np.asarray(points, dtype=float)
    directions, _ = _orbit_geometry(points)
    worst = 0.0
    for k, sym in enumerate(word):
        ob = scene.obstacles[sym - 1]
        defect = ob.boundary_defect(points[k])
        n = ob.normal(points[k], tol=np.inf)
        out = reflect(directions[k - 1], n)
        worst = max(worst, float(np.linalg.norm(out - directions[k])) + defect)
    return worst


def _assemble(scene, cls, word, points) -> PeriodicOrbit:
    directions, lengths = _orbit_geometry(points)
    inc = np.empty(len(word))
    for k, sym in enumerate(word):
        n = scene.obstacles[sym - 1].normal(points[k], tol=np.inf)
        inc[k] = directions[k - 1] @ n
    tau = float(lengths.sum())
    orbit = PeriodicOrbit(
        cls=cls,
        word=tuple(word),
        points=points,
        directions=directions,
        lengths=lengths,
        tau=tau,
        tau_sharp=tau / cls.mu,
        residual=orbit_residual(scene, word, points),
        incidences=inc,
    )
    return orbit


# -- length functional in local coordinates --------------------------------


def _local_frames(scene, word, points):
    us, Ts, cs, rads = [], [], [], []
    for k, sym in enumerate(word):
        ob = scene.obstacles[sym - 1]
        u = (points[k] - ob.c) / ob.radius
        u /= np.linalg.norm(u)
        us.append(u)
        Ts.append(orthonormal_complement(u))
        cs.append(ob.c)
        rads.append(ob.radius)
    return us, Ts, cs, rads


def _retract(cs, rads, us, Ts, y):
    d1 = Ts[0].shape[1]
    pts = []
    for k in range(len(us)):
        v = us[k] + Ts[k] @ y[k * d1 : (k + 1) * d1]
        pts.append(cs[k] + rads[k] * v / np.linalg.norm(v))
    return np.array(pts)


def _grad_hess(points, us, Ts, rads):
    """Gradient and Hessian of L at y = 0 in the stacked local coordinates."""
    m, d = points.shape
    d1 = d - 1
    nxt = np.roll(points, -1, axis=0)
    seg = nxt - points
    ell = np.linalg.norm(seg, axis=1)
    e = seg / ell[:, None]  # e[k]: unit vector q_k -> q_{k+1}
    g = np.zeros(m * d1)
    H = np.zeros((m * d1, m * d1))
    J = [rads[k] * Ts[k] for k in range(m)]
    for k in range(m):
        gq = e[k - 1] - e[k]  # dL/dq_k
        sk = slice(k * d1, (k + 1) * d1)
        g[sk] = J[k].T @ gq
        # curvature of the retraction: d2q/dy2 = -a u0 (per coordinate pair)
        H[sk, sk] += -rads[k] * (gq @ us[k]) * np.eye(d1)
    for k in range(m):
        j = (k + 1) % m
        P = (np.eye(d) - np.outer(e[k], e[k])) / ell[k]
        sk = slice(k * d1, (k + 1) * d1)
        sj = slice(j * d1, (j + 1) * d1)
        H[sk, sk] += J[k].T @ P @ J[k]
        H[sj, sj] += J[j].T @ P @ J[j]
        H[sk, sj] -= J[k].T @ P @ J[j]
        H[sj, sk] -= J[j].T @ P @ J[k]
    return g, H, float(ell.sum())


def _total_length(points):
    return float(np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1).sum())


def _point_subproblem(ob, q, a_prev, a_next, steps=8):
    """Minimise |q - a_prev| + |q - a_next| over the sphere, starting at q."""
    c, rad = ob.c, ob.radius

    def f(p):
        return np.linalg.norm(p - a_prev) + np.linalg.norm(p - a_next)

    for _ in range(steps):
        u = (q - c) / rad
        T = orthonormal_complement(u)
        e1 = q - a_prev
        l1 = np.linalg.norm(e1)
        e1 /= l1
        e2 = a_next - q
        l2 = np.linalg.norm(e2)
        e2 /= l2
        gq = e1 - e2
        g = rad * T.T @ gq
        if np.linalg.norm(g) < 1e-15:
            break
        H = rad**2 * T.T @ ((np.eye(len(q)) - np.outer(e1, e1)) / l1 + (np.eye(len(q)) - np.outer(e2, e2)) / l2) @ T
        H -= rad * (gq @ u) * np.eye(len(g))
        try:
            w = np.linalg.eigvalsh(H)
            step = -np.linalg.solve(H, g) if w.min() > 1e-12 else -g / max(np.abs(w).max(), 1.0)
        except np.linalg.LinAlgError:
            step = -g
        f0 = f(q)
        alpha = 1.0
        while alpha > 1e-12:
            v = u + T @ (alpha * step)
            cand = c + rad * v / np.linalg.norm(v)
            if f(cand) <= f0:
                q = cand
                break
            alpha *= 0.5
        else:
            break
    return q


def initial_points(scene: Scene, word: Sequence[int]) -> np.ndarray:
    """Boundary point of each obstacle nearest to the centroid of the centres
    of its two cyclic neighbours in the word."""
    pts = []
    m = len(word)
    for k, sym in enumerate(word):
        ob = scene.obstacles[sym - 1]
        target = 0.5 * (scene.obstacles[word[k - 1] - 1].c + scene.obstacles[word[(k + 1) % m] - 1].c)
        u = target - ob.c
        pts.append(ob.c + ob.radius * u / np.linalg.norm(u))
    return np.array(pts)


def _newton(scene, word, points, tol, max_steps, strict=False):
    """Full Newton on the stacked local coordinates.  Returns (points, steps)."""
    us, Ts, cs, rads = _local_frames(scene, word, points)
    res = orbit_residual(scene, word, points)
    for step in range(max_steps):
        if res <= tol:
            return points, step
        g, H, L = _grad_hess(points, us, Ts, rads)
        try:
            dy = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            raise DegeneracyError("singular Hessian of the length functional") from None
        if not np.all(np.isfinite(dy)) or np.linalg.cond(H) > 1e14:
            raise DegeneracyError("ill-conditioned Hessian of the length functional")
        alpha = 1.0
        if not strict:
            # backtrack only while far from the basin
            while alpha > 1e-6 and _total_length(_retract(cs, rads, us, Ts, alpha * dy)) > L + 1e-12 * L:
                alpha *= 0.5
        points = _retract(cs, rads, us, Ts, alpha * dy)
        new_res = orbit_residual(scene, word, points)
        if strict and (not np.isfinite(new_res) or new_res > 10 * max(res, 1e-8)):
            raise ConvergenceError(f"Newton diverged (residual {res:.3e} -> {new_res:.3e})", best=points)
        res = new_res
        us, Ts, cs, rads = _local_frames(scene, word, points)
    if res <= tol:
        return points, max_steps
    raise CertificationError(f"residual {res:.3e} above tol {tol:.1e} after {max_steps} Newton steps", best=points)


def _check_realizable(scene, word, points):
    directions, _ = _orbit_geometry(points)
    for k, sym in enumerate(word):
        n = scene.obstacles[sym - 1].normal(points[k], tol=np.inf)
        if not (directions[k - 1] @ n > 0 and directions[k] @ n < 0):
            raise ConvergenceError(f"critical point for {word} is not a reflecting ray at bounce {k + 1}", best=points)


def _as_class(cls_or_word) -> CyclicClass:
    if isinstance(cls_or_word, CyclicClass):
        return cls_or_word
    return canonicalize(tuple(cls_or_word))


def find_orbit(
    scene: Scene,
    cls_or_word: Union[CyclicClass, Sequence[int]],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_SWEEPS,
    newton_steps: int = DEFAULT_NEWTON,
    init: Optional[np.ndarray] = None,
) -> PeriodicOrbit:
    """Periodic ray coded by a word (iterates are solved through their root).

    Coordinate-descent sweeps bring the residual below ``NEWTON_BASIN``,
    then full Newton polishes to ``tol``.
    """
    cls = _as_class(cls_or_word)
    if any(s > scene.r for s in cls.word):
        raise AdmissibilityError(f"word {cls.word} uses symbols beyond r = {scene.r}")
    if cls.mu > 1:
        root = find_orbit(scene, cls.root, tol, max_iter, newton_steps, init)
        return iterate_orbit(scene, root, cls.mu)
    word = cls.word
    points = initial_points(scene, word) if init is None else np.asarray(init, dtype=float)
    m = len(word)
    res = orbit_residual(scene, word, points)
    sweeps = 0
    while res > NEWTON_BASIN and sweeps < max_iter:
        for k, sym in enumerate(word):
            points[k] = _point_subproblem(scene.obstacles[sym - 1], points[k], points[k - 1], points[(k + 1) % m])
        res = orbit_residual(scene, word, points)
        sweeps += 1
    if res > NEWTON_BASIN:
        raise ConvergenceError(f"coordinate descent stalled at residual {res:.3e} for {word}", best=points)
    points, _ = _newton(scene, word, points, tol, newton_steps)
    _check_realizable(scene, word, points)
    return _assemble(scene, cls, word, points)


def refine_orbit(scene: Scene, orbit: PeriodicOrbit, tol: float = DEFAULT_TOL, max_steps: int = DEFAULT_NEWTON):
    """Pure Newton polish; returns ``(orbit, steps_taken)``."""
    if orbit.residual > NEWTON_BASIN:
        raise DegeneracyError(f"residual {orbit.residual:.3e} outside the Newton basin")
    root_m = len(orbit.cls.root)
    word = orbit.word[:root_m]
    points, steps = _newton(scene, word, orbit.points[:root_m].copy(), tol, max_steps, strict=True)
    _check_realizable(scene, word, points)
    root = _assemble(scene, canonicalize(word), word, points)
    out = iterate_orbit(scene, root, orbit.mu) if orbit.mu > 1 else replace(root, cls=orbit.cls)
    return out, steps


def canonical_rotation(scene: Scene, orbit: PeriodicOrbit) -> PeriodicOrbit:
    """Relabel the starting bounce so the word reads as its canonical rotation."""
    m = orbit.m
    k = next(i for i in range(m) if orbit.word[i:] + orbit.word[:i] == orbit.cls.word)
    if k == 0:
        return orbit
    return _assemble(scene, orbit.cls, orbit.cls.word, np.roll(orbit.points, -k, axis=0))


def reverse_orbit(scene: Scene, orbit: PeriodicOrbit) -> PeriodicOrbit:
    """Same ray traversed backwards, coded by the reversed word."""
    word = tuple(reversed(orbit.word))
    return _assemble(scene, canonicalize(word), word, orbit.points[::-1].copy())


def iterate_orbit(scene: Scene, root: PeriodicOrbit, mu: int) -> PeriodicOrbit:
    """The mu-fold traversal of a primitive orbit (no re-solve)."""
    if mu == 1:
        return root
    word = root.word * mu
    cls = canonicalize(word)
    out = PeriodicOrbit(
        cls=cls,
        word=word,
        points=np.tile(root.points, (mu, 1)),
        directions=np.tile(root.directions, (mu, 1)),
        lengths=np.tile(root.lengths, mu),
        tau=mu * root.tau,
        tau_sharp=root.tau,
        residual=root.residual,
        incidences=np.tile(root.incidences, mu),
    )
    return out


def random_initial_points(scene: Scene, word, rng, spread=0.5) -> np.ndarray:
    """Randomly perturbed starting points on the neighbour-facing side."""
    base = initial_points(scene, word)
    pts = []
    for k, sym in enumerate(word):
        ob = scene.obstacles[sym - 1]
        u = (base[k] - ob.c) / ob.radius + spread * rng.standard_normal(scene.dimension)
        pts.append(ob.c + ob.radius * u / np.linalg.norm(u))
    return np.array(pts)


def uniqueness_probe(scene: Scene, word, rng, starts: int = 4, tol: float = DEFAULT_TOL) -> float:
    """Largest point distance between the reference orbit and orbits solved
    from randomly perturbed starts; a distinct critical point shows up as an
    O(1) value.  Starts that fail to converge are skipped."""
    ref = canonical_rotation(scene, find_orbit(scene, word, tol=tol))
    root = ref.cls.root
    worst = 0.0
    for _ in range(starts):
        try:
            alt = find_orbit(scene, root, tol=tol, init=random_initial_points(scene, root, rng))
        except (ConvergenceError, DegeneracyError, GeometryError):
            continue
        worst = max(worst, float(np.abs(alt.points - ref.points[: len(root)]).max()))
    return worst
