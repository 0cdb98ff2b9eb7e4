"""Linearised Poincaré map of a periodic ray and its hyperbolicity data.

Conventions
-----------
Bounce ``k`` happens at ``orbit.points[k]`` with incoming direction
``directions[k-1]``, outgoing ``directions[k]`` and preceding flight
``lengths[k]``.  The transverse plane at bounce ``k`` is orthogonal to the
outgoing direction; the return map is written in the frame of the last
bounce, so ``P = B[m-1] @ ... @ B[0]`` with

    B[k] = [[I, lam_k I], [psi_k, I + lam_k psi_k]] @ diag(sigma_k, sigma_k)

(free flight, mirror, curvature kick).  ``psi_k`` is the defocusing
curvature form ``2 cos(theta) * pi^T G pi`` with ``G`` the (positive) shape
operator and ``pi`` the projection onto the tangent plane along the
incoming ray.

Two independent routes to ``|det(Id - P)|``: the eigenvalues of the block
product, and the unstable fixed point ``M0`` of the Riccati-type maps
``A_k(M) = sigma M (I + lam M)^-1 sigma^T + psi`` whose associated
expansion ``S`` carries the expanding multipliers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ContractionError, FrameError, GrazingError, HyperbolicityError, InputError
from .geometry import FRAME_TOL, GRAZING_TOL, Scene, billiard_map, orthonormal_complement
from .orbit import PeriodicOrbit, reverse_orbit


def _min_rotation(a, b, axis):
    """Rotation taking unit ``a`` to unit ``b`` about ``a x b`` (d=3).

    For ``b = -a`` the half turn about ``axis`` (a unit vector orthogonal
    to ``a``) is used."""
    v = np.cross(a, b)
    c = float(a @ b)
    if 1.0 + c < 1e-12:
        return 2.0 * np.outer(axis, axis) - np.eye(3)
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K / (1.0 + c)


def transverse_frames(orbit: PeriodicOrbit) -> list:
    """Orthonormal ``d x (d-1)`` frames of the planes orthogonal to each
    outgoing direction.

    d=2: counter-clockwise rotation of the direction.  d=3: the first frame
    starts from the lowest coordinate axes not parallel to the direction and
    each later frame is the previous one carried by the minimal rotation
    between consecutive directions, re-orthonormalised.
    """
    W = orbit.directions
    d = orbit.dimension
    if d == 2:
        return [orthonormal_complement(w) for w in W]
    frames = [orthonormal_complement(W[0])]
    for k in range(1, len(W)):
        carried = _min_rotation(W[k - 1], W[k], frames[-1][:, 0]) @ frames[-1] if d == 3 else frames[-1]
        frames.append(orthonormal_complement(W[k], seed=carried))
    return frames


def mirror(n):
    return np.eye(len(n)) - 2.0 * np.outer(n, n)


def sigma_matrix(scene: Scene, orbit: PeriodicOrbit, k: int, frames) -> np.ndarray:
    """Mirror at bounce k written from frame ``k-1`` to frame ``k``."""
    n = scene.obstacles[orbit.word[k] - 1].normal(orbit.points[k], tol=np.inf)
    s = frames[k].T @ mirror(n) @ frames[k - 1]
    if np.abs(s.T @ s - np.eye(len(s))).max() > FRAME_TOL:
        raise FrameError(f"sigma at bounce {k} is not orthogonal")
    return s


def curvature_form(scene: Scene, orbit: PeriodicOrbit, k: int, frames) -> np.ndarray:
    """Symmetric curvature form at bounce ``k`` in frame ``k``."""
    ob = scene.obstacles[orbit.word[k] - 1]
    q = orbit.points[k]
    n = ob.normal(q, tol=np.inf)
    w_in = orbit.directions[k - 1]
    cos_in = float(w_in @ n)
    if abs(cos_in) < GRAZING_TOL:
        raise GrazingError(f"grazing incidence at bounce {k} (cos = {cos_in:.2e})")
    # basis of the plane orthogonal to the incoming ray, mapped by the mirror
    xi = mirror(n) @ frames[k]
    proj = xi - np.outer(w_in, n @ xi) / cos_in
    psi = 2.0 * abs(cos_in) * proj.T @ ob.shape_operator(q) @ proj
    return 0.5 * (psi + psi.T)


def reflection_block(lam: float, psi, sigma) -> np.ndarray:
    psi = np.atleast_2d(psi)
    sigma = np.atleast_2d(sigma)
    n = len(psi)
    I = np.eye(n)
    kick = np.block([[I, lam * I], [psi, I + lam * psi]])
    return kick @ np.block([[sigma, np.zeros((n, n))], [np.zeros((n, n)), sigma]])


def inverse_reflection_block(lam: float, psi, sigma) -> np.ndarray:
    """Exact inverse of :func:`reflection_block` (backward-time bounce)."""
    psi = np.atleast_2d(psi)
    sigma = np.atleast_2d(sigma)
    n = len(psi)
    I = np.eye(n)
    Z = np.zeros((n, n))
    back = np.block([[I + lam * psi, -lam * I], [-psi, I]])
    return np.block([[sigma.T, Z], [Z, sigma.T]]) @ back


@dataclass
class BounceData:
    lengths: np.ndarray
    psis: list
    sigmas: list
    frames: list


def bounce_data(scene: Scene, orbit: PeriodicOrbit) -> BounceData:
    frames = transverse_frames(orbit)
    psis = [curvature_form(scene, orbit, k, frames) for k in range(orbit.m)]
    sigmas = [sigma_matrix(scene, orbit, k, frames) for k in range(orbit.m)]
    return BounceData(np.asarray(orbit.lengths), psis, sigmas, frames)


def poincare_matrix(data: BounceData, start: int = 0) -> np.ndarray:
    """Ordered block product, optionally starting at another bounce."""
    m = len(data.psis)
    P = np.eye(2 * len(data.psis[0]))
    for j in range(m):
        k = (start + j) % m
        P = reflection_block(data.lengths[k], data.psis[k], data.sigmas[k]) @ P
    return P


def inverse_poincare_matrix(data: BounceData, start: int = 0) -> np.ndarray:
    m = len(data.psis)
    Q = np.eye(2 * len(data.psis[0]))
    for j in range(m):
        k = (start + j) % m
        Q = Q @ inverse_reflection_block(data.lengths[k], data.psis[k], data.sigmas[k])
    return Q


def _expanding(eigs, count):
    order = np.argsort(-np.abs(eigs), kind="stable")
    return eigs[order[:count]]


def paired_eigenvalues(P, Pinv):
    """Expanding eigenvalues from P, contracting ones as reciprocals of the
    expanding eigenvalues of the backward product (accurate even when the
    contracting multipliers are below machine precision relative to |P|)."""
    half = len(P) // 2
    up = _expanding(np.linalg.eigvals(P), half)
    down = 1.0 / _expanding(np.linalg.eigvals(Pinv), half)
    return np.concatenate([up, down[::-1]])


def det_from_eigenvalues(eigs, mu: int = 1) -> float:
    return float(np.prod(np.abs(1.0 - np.asarray(eigs) ** mu)))


def unstable_fixed_point(data: BounceData, tol: float = 1e-14, eps: float = 1e-3, max_iter: int = 10_000):
    """Fixed point ``M0`` of ``A = A_{m-1} o ... o A_0``; returns ``(M0, sweeps)``."""
    n = len(data.psis[0])
    M = eps * np.eye(n)
    for sweep in range(1, max_iter + 1):
        M_new = _sweep(data, M)[-1]
        if np.linalg.norm(M_new - M, 2) <= tol * max(1.0, np.linalg.norm(M_new, 2)):
            return 0.5 * (M_new + M_new.T), sweep
        M = M_new
    raise ContractionError(f"unstable fixed point not reached in {max_iter} sweeps")


def _sweep(data: BounceData, M):
    """Images ``M_0, ..., M_{m-1}`` of ``M`` under successive ``A_k``."""
    n = len(M)
    out = []
    for k in range(len(data.psis)):
        lam, psi, sig = data.lengths[k], data.psis[k], data.sigmas[k]
        M = sig @ M @ np.linalg.inv(np.eye(n) + lam * M) @ sig.T + psi
        M = 0.5 * (M + M.T)
        out.append(M)
    return out


def expansion_factors(data: BounceData, M0) -> list:
    """Per-bounce factors ``sigma_k (I + lam_k M_{k-1})`` with ``M_{-1} = M0``."""
    n = len(M0)
    Ms = [M0] + _sweep(data, M0)[:-1]
    return [data.sigmas[k] @ (np.eye(n) + data.lengths[k] * Ms[k]) for k in range(len(data.psis))]


def expansion_map(data: BounceData, M0):
    """Returns ``(S, nu, det_factored, factors)``."""
    factors = expansion_factors(data, M0)
    S = np.eye(len(M0))
    for F in factors:
        S = F @ S
    nu = np.linalg.eigvals(S)
    if np.any(np.abs(nu) <= 1.0):
        raise HyperbolicityError(f"expansion map has multiplier of modulus <= 1: {nu}")
    det_factored = float(abs(np.linalg.det(S)) * np.prod(np.abs(1.0 - 1.0 / nu) ** 2))
    return S, nu, det_factored, factors


@dataclass
class StabilityReport:
    P: np.ndarray
    P_inverse: np.ndarray  # exact backward product (P is too ill-conditioned to invert)
    eigenvalues: np.ndarray  # |.|-descending: expanding then contracting
    det_direct: float
    det_factored: float
    M0: np.ndarray
    S: np.ndarray
    expanding: np.ndarray  # eigenvalues of S
    factor_min_sv: np.ndarray  # smallest singular value of each bounce factor
    cross_check_delta: float
    fixed_point_sweeps: int
    min_incidence: float

    @property
    def det_abs(self) -> float:
        return self.det_direct

    @property
    def Lambda(self):
        """Leading expanding multiplier (signed where real)."""
        lead = self.eigenvalues[0]
        return float(lead.real) if abs(lead.imag) < 1e-12 * abs(lead) else lead

    def det_iterate(self, mu: int) -> float:
        return det_from_eigenvalues(self.eigenvalues, mu)

    def to_dict(self):
        return {
            "det_abs": self.det_direct,
            "det_factored": self.det_factored,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "m0": np.atleast_2d(self.M0).tolist(),
            "cross_check_delta": self.cross_check_delta,
        }


def poincare_map(scene: Scene, orbit: PeriodicOrbit, tol: float = 1e-14) -> StabilityReport:
    """Full stability analysis of a certified periodic orbit."""
    data = bounce_data(scene, orbit)
    P = poincare_matrix(data)
    Pinv = inverse_poincare_matrix(data)
    eigs = paired_eigenvalues(P, Pinv)
    det_direct = det_from_eigenvalues(eigs)
    M0, sweeps = unstable_fixed_point(data, tol=tol)
    S, nu, det_factored, factors = expansion_map(data, M0)
    min_sv = np.array([np.linalg.svd(F, compute_uv=False).min() for F in factors])
    return StabilityReport(
        P=P,
        P_inverse=Pinv,
        eigenvalues=eigs,
        det_direct=det_direct,
        det_factored=det_factored,
        M0=M0,
        S=S,
        expanding=nu,
        factor_min_sv=min_sv,
        cross_check_delta=abs(det_direct - det_factored) / det_direct,
        fixed_point_sweeps=sweeps,
        min_incidence=float(np.min(np.abs(orbit.incidences))),
    )


def transversality_gap(report: StabilityReport) -> float:
    """Smallest singular value of the stacked (normalised) unstable graph
    ``(I; M0)`` and stable eigenvectors of P; positive iff E_u and E_s meet
    only in 0."""
    n = len(report.M0)
    Eu = np.vstack([np.eye(n), report.M0])
    w, V = np.linalg.eig(report.P_inverse)
    Es = V[:, np.argsort(-np.abs(w))[:n]]
    Eu = Eu / np.linalg.norm(Eu, axis=0)
    Es = Es / np.linalg.norm(Es, axis=0)
    return float(np.linalg.svd(np.hstack([Eu, Es]), compute_uv=False).min())


# -- independent oracle -----------------------------------------------------


def _section(orbit, j):
    """Section plane halfway along the flight into bounce ``j``."""
    w = orbit.directions[j - 1]
    x0 = orbit.points[j - 1] + 0.5 * orbit.lengths[j] * w
    return x0, w, orthonormal_complement(w)


def _section_step(scene, orbit, j, state):
    """One bounce: section ``j`` -> section ``j+1`` in (position, slope) coords."""
    x0, w, F = _section(orbit, j)
    x1, w1, F1 = _section(orbit, (j + 1) % orbit.m)
    d1 = F.shape[1]
    x = x0 + F @ state[:d1]
    dirn = w + F @ state[d1:]
    dirn /= np.linalg.norm(dirn)
    step = billiard_map(scene, x, dirn)
    if step.index != orbit.word[j] - 1:
        raise HyperbolicityError("finite-difference perturbation left the orbit's word")
    x, dirn = step.point, step.direction
    t = float((x1 - x) @ w1) / float(dirn @ w1)
    x_sec = x + t * dirn
    return np.concatenate([F1.T @ (x_sec - x1), F1.T @ (dirn / float(dirn @ w1) - w1)])


def fd_jacobian(scene: Scene, orbit: PeriodicOrbit, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the composed billiard map.

    The composition is differentiated bounce by bounce between mid-flight
    sections and chained, so the step ``h`` never gets amplified by the
    expansion of earlier bounces.
    """
    n = 2 * (orbit.dimension - 1)
    J = np.eye(n)
    for j in range(orbit.m):
        Jj = np.empty((n, n))
        for c in range(n):
            e = np.zeros(n)
            e[c] = h
            Jj[:, c] = (_section_step(scene, orbit, j, e) - _section_step(scene, orbit, j, -e)) / (2 * h)
        J = Jj @ J
    return J


def fd_eigenvalues(scene: Scene, orbit: PeriodicOrbit, h: float = 1e-6) -> np.ndarray:
    """Eigenvalues of P by finite differences of the billiard map.

    Expanding ones come from the forward orbit, contracting ones from the
    time-reversed orbit (whose return map is conjugate to P^-1).
    """
    J = fd_jacobian(scene, orbit, h)
    Jr = fd_jacobian(scene, reverse_orbit(scene, orbit), h)
    half = len(J) // 2
    up = _expanding(np.linalg.eigvals(J), half)
    down = 1.0 / _expanding(np.linalg.eigvals(Jr), half)
    return np.concatenate([up, down[::-1]])


# -- certificate ------------------------------------------------------------


@dataclass(frozen=True)
class HyperbolicityCertificate:
    epsilon: float
    beta: float
    b1: float
    b2: float
    C1: float
    slope_fit: float
    intercept_fit: float
    kappa: float

    def to_dict(self):
        return dict(self.__dict__)


def hyperbolicity_certificate(scene: Scene, orbits: Sequence[PeriodicOrbit], reports: Sequence[StabilityReport]):
    """Uniform expansion rate and determinant envelope over a set of orbits.

    ``epsilon`` is the largest value with every bounce factor's smallest
    singular value >= 1 + epsilon * d0; ``beta = log(1 + epsilon d0)``.
    The envelope has ``b1 <= log det / tau <= b2`` for every orbit and
    ``C1 = min exp(log det - b1 tau) >= 1``.  The least-squares line of
    ``log det`` against ``tau`` is reported alongside.
    """
    if not reports:
        raise InputError("hyperbolicity certificate needs at least one orbit")
    return certificate_from_arrays(
        scene.d0,
        [o.tau for o in orbits],
        [r.det_direct for r in reports],
        [float(r.factor_min_sv.min()) for r in reports],
        [r.min_incidence for r in reports],
    )


def certificate_from_arrays(d0: float, taus, dets, min_svs, incidences) -> HyperbolicityCertificate:
    """Certificate from per-orbit periods, determinants, smallest bounce-factor
    singular values and smallest incidence cosines."""
    taus = np.asarray(taus, dtype=float)
    if taus.size == 0:
        raise InputError("hyperbolicity certificate needs at least one orbit")
    eps = (float(np.min(min_svs)) - 1.0) / d0
    beta = math.log1p(eps * d0)
    logdet = np.log(np.asarray(dets, dtype=float))
    ratios = logdet / taus
    b1, b2 = float(ratios.min()), float(ratios.max())
    C1 = float(np.exp(np.min(logdet - b1 * taus)))
    if len(taus) > 1 and np.ptp(taus) > 0:
        slope, intercept = np.polyfit(taus, logdet, 1)
    else:
        slope, intercept = b1, 0.0
    kappa = float(np.min(incidences))
    return HyperbolicityCertificate(eps, beta, b1, b2, C1, float(slope), float(intercept), kappa)
