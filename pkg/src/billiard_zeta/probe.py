"""Length-spectrum probe: the test function rho = 9 (phi * phi), its
rescaled windows and their pairing with the Dirichlet-signed sum of
delta masses at periods of periodic rays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .database import OrbitDatabase
from .errors import ConfigError, CoverageError
from .zeta import SeriesSpec, expand_rays

QUAD_TOL = 1e-13


def smooth_step(x, sharpness: float = 1.0):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, built from exp(-a/x)."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f0 = np.where(x > 0, np.exp(-sharpness / np.where(x > 0, x, 1.0)), 0.0)
        f1 = np.where(x < 1, np.exp(-sharpness / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return f0 / (f0 + f1)


@dataclass(frozen=True)
class PhiParams:
    """Plateau ``|t| <= plateau`` where phi = 1, support ``|t| <= edge``."""

    plateau: float = 0.375
    edge: float = 0.5
    sharpness: float = 1.0
    shoulder: Optional[Callable] = None  # custom profile on [0, 1], 1 -> 0

    def __post_init__(self):
        if not 0 < self.plateau < self.edge <= 0.5:
            raise ConfigError("need 0 < plateau < edge <= 1/2")
        if self.sharpness <= 0:
            raise ConfigError("sharpness must be positive")


class Rho:
    """``rho = 9 Phi``, ``Phi = phi * phi``, with ``rho_hat = 9 phi_hat^2``."""

    def __init__(self, params: PhiParams = PhiParams()):
        self.params = params
        if params.shoulder is not None:
            x = np.linspace(0.0, 1.0, 1001)
            v = np.asarray(params.shoulder(x), dtype=float)
            if np.any(v < 0) or np.any(v > 1) or abs(v[0] - 1) > 1e-12 or abs(v[-1]) > 1e-12:
                raise ConfigError("shoulder profile must map [0,1] into [0,1] with ends 1 and 0")
        self._Phi = lru_cache(maxsize=65536)(self._Phi_uncached)

    def phi(self, t):
        p = self.params
        a = np.abs(np.asarray(t, dtype=float))
        x = (a - p.plateau) / (p.edge - p.plateau)
        if p.shoulder is not None:
            inner = np.asarray(p.shoulder(np.clip(x, 0.0, 1.0)), dtype=float)
        else:
            inner = 1.0 - smooth_step(x, p.sharpness)
        return np.where(a <= p.plateau, 1.0, np.where(a >= p.edge, 0.0, inner))

    def _phi1(self, t: float) -> float:
        p = self.params
        a = abs(t)
        if a <= p.plateau:
            return 1.0
        if a >= p.edge:
            return 0.0
        x = (a - p.plateau) / (p.edge - p.plateau)
        if p.shoulder is not None:
            return float(p.shoulder(x))
        f0, f1 = math.exp(-p.sharpness / x), math.exp(-p.sharpness / (1.0 - x))
        return f1 / (f0 + f1)

    def _Phi_uncached(self, t: float) -> float:
        e, c = self.params.edge, self.params.plateau
        lo, hi = max(-e, t - e), min(e, t + e)
        if hi <= lo:
            return 0.0
        pts = sorted({x for x in (-c, c, t - c, t + c) if lo < x < hi})
        val, _ = quad(lambda x: self._phi1(x) * self._phi1(t - x), lo, hi,
                      points=pts or None, epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
        return val

    def Phi(self, t):
        t = np.asarray(t, dtype=float)
        out = np.array([self._Phi(abs(float(x))) for x in t.ravel()])
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def __call__(self, t):
        return 9.0 * self.Phi(t)

    def phi_hat(self, k):
        e = self.params.edge
        k = np.asarray(k, dtype=float)
        vals = [2.0 * quad(self._phi1, 0.0, e, weight="cos", wvar=float(x), epsabs=QUAD_TOL, limit=200)[0]
                if x != 0 else 2.0 * quad(self._phi1, 0.0, e, epsabs=QUAD_TOL, limit=200)[0]
                for x in k.ravel()]
        out = np.array(vals)
        return out.reshape(k.shape) if k.ndim else float(out[0])

    def hat(self, k):
        return 9.0 * np.asarray(self.phi_hat(k)) ** 2

    def hat_direct(self, k, samples: int = 2001):
        """``rho_hat`` by trapezoid quadrature of sampled rho (independent check)."""
        t = np.linspace(0.0, 1.0, samples)
        r = self(t)
        k = np.atleast_1d(np.asarray(k, dtype=float))
        return 2.0 * np.trapezoid(r[None, :] * np.cos(np.outer(k, t)), t, axis=1)


def build_rho(phi_params: Optional[PhiParams] = None) -> Rho:
    return Rho(phi_params or PhiParams())


@dataclass
class ProbeWindow:
    ell: float
    m: float
    rho: Rho

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError("window scale m >= 1 required")

    @property
    def support(self) -> tuple:
        return (self.ell - 1.0 / self.m, self.ell + 1.0 / self.m)

    def __call__(self, t):
        return self.rho(self.m * (np.asarray(t, dtype=float) - self.ell))

    def check_scene(self, d0: float):
        if self.ell <= d0:
            raise ConfigError(f"window centre {self.ell} must exceed d0 = {d0}")
        if self.m < max(1.0, 1.0 / d0):
            raise ConfigError(f"window scale must be >= max(1, 1/d0) = {max(1.0, 1.0 / d0)}")


def coverage_audit(db: OrbitDatabase, upper: float) -> float:
    """Check every ray with period < ``upper`` is in the database.

    Returns the covered length; raises CoverageError otherwise.  Words longer
    than n_max have period >= (n_max + 1) d0, and failed records are
    bounded below by n d0.
    """
    covered = db.covered_length()
    if upper >= covered:
        raise CoverageError(
            f"window reaches {upper:.6g} but the database is complete only below {covered:.6g}"
            f" (n_max={db.n_max}, d0={db.scene.d0:.6g}, tau_max={db.tau_max})",
            covered,
        )
    for r in db.flagged():
        bound = r.n * db.scene.d0
        if bound <= upper:
            raise CoverageError(f"flagged record {r.word} may have period below {upper:.6g}", bound)
    return covered


def _rays(db: OrbitDatabase):
    return expand_rays(db, SeriesSpec("N", n_max=db.n_max, tau_max=db.tau_max))


def fd_pairing(db: OrbitDatabase, window: ProbeWindow, dirichlet: bool = True) -> float:
    """``sum (-1)^m tau_sharp rho_q(tau) / |det(Id - P)|^{1/2}`` over rays in
    the window support; ``dirichlet=False`` drops the sign."""
    window.check_scene(db.scene.d0)
    lo, hi = window.support
    coverage_audit(db, hi)
    rays = _rays(db)
    sel = (rays.tau > lo) & (rays.tau < hi)
    if not np.any(sel):
        return 0.0
    sign = np.where(rays.m[sel] % 2 == 0, 1.0, -1.0) if dirichlet else 1.0
    amp = sign * rays.multiplicity[sel] * rays.tau_sharp[sel] / np.sqrt(rays.det[sel])
    return float(np.sum(amp * window(rays.tau[sel])))


def singularity_coefficient(db: OrbitDatabase, T: float, tol: float = 1e-9, dirichlet: bool = True) -> float:
    """Signed amplitude ``sum (-1)^m tau_sharp / |det|^{1/2}`` of rays with
    ``|tau - T| <= tol``; the Neumann variant (``dirichlet=False``) omits the sign."""
    coverage_audit(db, T + tol)
    rays = _rays(db)
    sel = np.abs(rays.tau - T) <= tol
    if not np.any(sel):
        return 0.0
    sign = np.where(rays.m[sel] % 2 == 0, 1.0, -1.0) if dirichlet else 1.0
    return float(np.sum(sign * rays.multiplicity[sel] * rays.tau_sharp[sel] / np.sqrt(rays.det[sel])))


def pairing_sweep(db: OrbitDatabase, ells: Sequence[float], m: float, rho: Optional[Rho] = None,
                  dirichlet: bool = True) -> np.ndarray:
    """Pairings for windows of scale m centred at each ell."""
    rho = rho or build_rho()
    return np.array([fd_pairing(db, ProbeWindow(float(l), m, rho), dirichlet) for l in ells])
