"""Dirichlet series eta_N, eta_D, eta_q and the zeta functions over an
orbit database, plus cycle expansions, zero search and counting fits.

Conventions.  Every oriented periodic ray ``gamma`` (a primitive record
``p`` traversed ``mu`` times) contributes

    eta(s)     += w(gamma) tau_sharp e^{-s tau} / |det(Id - P_gamma)|^{1/2}
    log zeta(s) -= w(gamma)           e^{-s tau} / (mu |det(Id - P_gamma)|^{1/2})

so that ``zeta'/zeta = eta``.  Weights: N -> 1, D -> (-1)^m, Q(q) -> 1 when
q divides m.  Grouping the ``log zeta`` terms by symbolic length ``n``
gives ``log zeta = sum_n l_n(s)`` and the cycle expansion is the power
series ``exp(sum_n l_n z^n)`` truncated at ``z^N`` and evaluated at z = 1.
In d = 2 with the eigenvalue tower this equals the product over
``(p, k)`` of ``(1 - w_p t_{p,k})``.  For Q(q) the expansion is of
``zeta_q^q`` so that its zeros have integer multiplicity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, least_squares

from .database import OrbitDatabase
from .errors import ConfigError, InputError, UnsupportedDimensionError


# -- series specification ---------------------------------------------------


@dataclass(frozen=True)
class SeriesSpec:
    kind: str = "N"  # "N", "D" or "Q"
    q: Optional[int] = None
    n_max: Optional[int] = None
    tau_max: Optional[float] = None
    double_count_self_reversible: bool = False

    def __post_init__(self):
        if self.kind not in ("N", "D", "Q"):
            raise ConfigError(f"unknown series kind {self.kind!r}")
        if self.kind == "Q" and (self.q is None or self.q < 2):
            raise ConfigError("kind Q needs q >= 2")

    @classmethod
    def parse(cls, text: str, **kw) -> "SeriesSpec":
        """``"N"``, ``"D"`` or ``"Q:q"``."""
        text = text.strip().upper()
        if text.startswith("Q"):
            _, _, q = text.partition(":")
            try:
                return cls("Q", int(q), **kw)
            except ValueError:
                raise ConfigError(f"bad series kind {text!r}, expected Q:q") from None
        return cls(text, **kw)

    @property
    def label(self) -> str:
        return f"Q:{self.q}" if self.kind == "Q" else self.kind

    def weight(self, m):
        m = np.asarray(m)
        if self.kind == "N":
            return np.ones(m.shape)
        if self.kind == "D":
            return np.where(m % 2 == 0, 1.0, -1.0)
        return holonomy_weight(m, self.q) / self.q

    def with_(self, **kw) -> "SeriesSpec":
        d = dict(self.__dict__)
        d.update(kw)
        return SeriesSpec(**d)


def shift_matrix(q: int) -> np.ndarray:
    """Cyclic shift ``(x_1..x_q) -> (x_q, x_1, ..., x_{q-1})``."""
    if q < 2:
        raise ConfigError("q >= 2 required")
    return np.roll(np.eye(q, dtype=int), 1, axis=0)


def holonomy_weight(m, q: int):
    """Trace of the q-reflection holonomy after m reflections: q if q | m else 0."""
    if q < 2:
        raise ConfigError("q >= 2 required")
    m = np.asarray(m)
    if np.any(m < 1):
        raise ConfigError("m >= 1 required")
    out = np.where(m % q == 0, q, 0)
    return int(out) if out.ndim == 0 else out


# -- expanded ray sets --------------------------------------------------------


@dataclass
class RaySet:
    """Flat arrays over oriented rays (primitive records x iterates)."""

    tau: np.ndarray
    tau_sharp: np.ndarray
    m: np.ndarray
    n: np.ndarray
    mu: np.ndarray
    det: np.ndarray
    multiplicity: np.ndarray
    record: np.ndarray  # index into the record list
    Lambda: np.ndarray

    def __len__(self):
        return len(self.tau)


def expand_rays(db: OrbitDatabase, spec: SeriesSpec) -> RaySet:
    """Primitive records and their iterates inside the cutoffs of ``spec``."""
    recs = db.good()
    if not recs:
        raise InputError("empty orbit database")
    n_max = spec.n_max if spec.n_max is not None else db.n_max
    if n_max > db.n_max:
        raise InputError(f"series truncation n_max={n_max} exceeds database n_max={db.n_max}")
    tau_max = spec.tau_max
    cols = {k: [] for k in ("tau", "tau_sharp", "m", "n", "mu", "det", "multiplicity", "record", "Lambda")}
    for idx, r in enumerate(recs):
        mult = 2 if (spec.double_count_self_reversible and r.self_reversible) else 1
        mu = 1
        while mu * r.n <= n_max and (tau_max is None or mu * r.tau <= tau_max):
            cols["tau"].append(mu * r.tau)
            cols["tau_sharp"].append(r.tau)
            cols["m"].append(mu * r.m)
            cols["n"].append(mu * r.n)
            cols["mu"].append(mu)
            cols["det"].append(r.det_iterate(mu))
            cols["multiplicity"].append(mult)
            cols["record"].append(idx)
            cols["Lambda"].append(r.Lambda)
            mu += 1
    return RaySet(**{k: np.asarray(v) for k, v in cols.items()})


def _exp_terms(s, tau):
    s = np.asarray(s, dtype=complex)
    return np.exp(-np.multiply.outer(s, tau))


def eta_value(db: OrbitDatabase, spec: SeriesSpec, s):
    """Truncated Dirichlet series eta at complex ``s`` (scalar or array)."""
    rays = expand_rays(db, spec)
    coef = spec.weight(rays.m) * rays.multiplicity * rays.tau_sharp / np.sqrt(rays.det)
    return _exp_terms(s, rays.tau) @ coef


def log_zeta_value(db: OrbitDatabase, spec: SeriesSpec, s):
    rays = expand_rays(db, spec)
    coef = spec.weight(rays.m) * rays.multiplicity / (rays.mu * np.sqrt(rays.det))
    return -(_exp_terms(s, rays.tau) @ coef)


def zeta_value(db: OrbitDatabase, spec: SeriesSpec, s):
    """``exp(-sum w e^{-s tau} / (mu |det|^{1/2}))`` over the truncation;
    1 for an empty truncation."""
    try:
        return np.exp(log_zeta_value(db, spec, s))
    except InputError:
        if db.records:
            raise
        return np.ones_like(np.asarray(s, dtype=complex))


def zeta_log_derivative_fd(db: OrbitDatabase, spec: SeriesSpec, s, h: float = 1e-6):
    """Central-difference ``zeta'/zeta``."""
    zp = zeta_value(db, spec, np.asarray(s) + h)
    zm = zeta_value(db, spec, np.asarray(s) - h)
    z0 = zeta_value(db, spec, s)
    return (zp - zm) / (2 * h) / z0


# -- cycle expansion --------------------------------------------------------


class CycleExpansion:
    """Truncated power-series expansion of the zeta function in symbolic length.

    ``k_max=None`` uses the full ``|det(Id - P^r)|^{-1/2}`` (the whole
    eigenvalue tower); an integer keeps the tower terms ``k = 0..k_max``,
    ``t_{p,k} = e^{-s tau_p} |Lambda_p|^{-1/2} Lambda_p^{-k}`` with signed
    ``Lambda_p``.
    """

    def __init__(self, db: OrbitDatabase, kind="N", n_max: Optional[int] = None, k_max: Optional[int] = 8):
        if db.dimension != 2:
            raise UnsupportedDimensionError("cycle expansion is implemented for d = 2 only")
        spec = kind if isinstance(kind, SeriesSpec) else SeriesSpec.parse(kind)
        self.n_max = n_max if n_max is not None else db.n_max
        self.spec = spec.with_(n_max=self.n_max, tau_max=None)
        self.k_max = k_max
        rays = expand_rays(db, self.spec)
        w = self.spec.weight(rays.m) * rays.multiplicity
        if k_max is None:
            amp = 1.0 / np.sqrt(rays.det)
        else:
            lam = rays.Lambda
            r = rays.mu
            k = np.arange(k_max + 1)
            amp = np.abs(lam) ** (-r / 2.0) * (lam[:, None] ** (-np.outer(r, k))).sum(axis=1)
        # log zeta = sum_n l_n; Q(q) expands zeta_q^q
        scale = self.spec.q if self.spec.kind == "Q" else 1
        amp = -scale * w * amp / rays.mu
        self.terms = []
        for n in range(1, self.n_max + 1):
            sel = rays.n == n
            self.terms.append((amp[sel], rays.tau[sel]))

    def log_coefficients(self, s):
        """``l_n(s)`` and ``d l_n / ds`` for n = 1..N, shape (N, len(s))."""
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        L = np.zeros((self.n_max + 1, len(s)), complex)
        dL = np.zeros_like(L)
        for n, (a, t) in enumerate(self.terms, start=1):
            if len(a):
                e = _exp_terms(s, t)
                L[n] = e @ a
                dL[n] = e @ (-t * a)
        return L, dL

    def coefficients(self, s):
        """Series coefficients ``c_0..c_N`` and their s-derivatives."""
        L, dL = self.log_coefficients(s)
        N = self.n_max
        c = np.zeros_like(L)
        dc = np.zeros_like(L)
        c[0] = 1.0
        for n in range(1, N + 1):
            k = np.arange(1, n + 1)[:, None]
            c[n] = (k * L[1 : n + 1] * c[n - 1 :: -1][:n]).sum(axis=0) / n
            dc[n] = (k * (dL[1 : n + 1] * c[n - 1 :: -1][:n] + L[1 : n + 1] * dc[n - 1 :: -1][:n])).sum(axis=0) / n
        return c, dc

    def __call__(self, s):
        c, _ = self.coefficients(s)
        out = c.sum(axis=0)
        return out if np.ndim(s) else out[0]

    def derivative(self, s):
        _, dc = self.coefficients(s)
        out = dc.sum(axis=0)
        return out if np.ndim(s) else out[0]

    def log_derivative(self, s):
        c, dc = self.coefficients(s)
        out = dc.sum(axis=0) / c.sum(axis=0)
        return out if np.ndim(s) else out[0]

    def polynomial(self, s) -> np.ndarray:
        """Coefficients ``c_n(s)`` of z^n at a single s."""
        c, _ = self.coefficients(np.atleast_1d(s))
        return c[:, 0]


def cycle_expansion(db: OrbitDatabase, kind="N", k_max: Optional[int] = 8, n_max: Optional[int] = None):
    return CycleExpansion(db, kind, n_max, k_max)


# -- zeros ----------------------------------------------------------------


@dataclass
class ZeroReport:
    s: complex
    order: int
    residue: complex
    shift: Optional[float]
    low_confidence: bool = False

    def to_dict(self):
        return {
            "s": [self.s.real, self.s.imag],
            "order": self.order,
            "residue": [self.residue.real, self.residue.imag],
            "shift": self.shift,
            "low_confidence": self.low_confidence,
        }


def leading_real_zero(expansion: CycleExpansion, s_hi: float = 3.0, s_lo: float = -3.0, step: float = 0.01):
    """Largest real zero of the expansion in ``[s_lo, s_hi]`` (None if absent)."""
    grid = np.arange(s_hi, s_lo - step / 2, -step)
    vals = expansion(grid).real
    for i in range(1, len(grid)):
        if vals[i - 1] == 0.0:
            return float(grid[i - 1])
        if np.sign(vals[i]) != np.sign(vals[i - 1]):
            f = lambda x: float(expansion(np.array([x])).real[0])
            return brentq(f, grid[i], grid[i - 1], xtol=1e-15, maxiter=200)
    return None


def contour_residue(log_derivative, s0: complex, radius: float, points: int = 64) -> complex:
    """``(1 / 2 pi i) \\oint f ds`` over a circle, trapezoid rule."""
    theta = 2 * np.pi * np.arange(points) / points
    z = s0 + radius * np.exp(1j * theta)
    dz = 1j * radius * np.exp(1j * theta)
    return complex(np.mean(log_derivative(z) * dz) / 1j)


def winding_number(f, corners, min_points: int = 64, max_points: int = 1 << 16) -> int:
    """Argument-principle zero count of ``f`` inside a rectangle."""
    re0, re1, im0, im1 = corners
    verts = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1), complex(re0, im0)]
    total = 0.0
    for a, b in zip(verts[:-1], verts[1:]):
        npts = min_points
        while True:
            t = np.linspace(0.0, 1.0, npts + 1)
            vals = f(a + (b - a) * t)
            dphase = np.angle(vals[1:] / vals[:-1])
            if np.abs(dphase).max() < np.pi / 4 or npts >= max_points:
                break
            npts *= 2
        total += dphase.sum()
    return int(round(total / (2 * np.pi)))


def _newton_zero(expansion, s, tol=1e-14, max_iter=50):
    for _ in range(max_iter):
        c, dc = expansion.coefficients(np.array([s]))
        F, dF = c.sum(axis=0)[0], dc.sum(axis=0)[0]
        if dF == 0:
            return None
        step = F / dF
        s = s - step
        if abs(step) <= tol * max(1.0, abs(s)):
            return s
    # far left the terms cancel heavily and Newton stalls at the round-off
    # floor; accept a stagnated iterate
    if abs(step) <= 1e-8 * max(1.0, abs(s)) or abs(expansion(np.array([s]))[0]) < 1e-10:
        return s
    return None


def _search_box(expansion, box, depth, out, min_size):
    count = winding_number(expansion, box)
    if count <= 0:
        return
    re0, re1, im0, im1 = box
    terminal = depth == 0 or max(re1 - re0, im1 - im0) < min_size
    if count == 1 or terminal:
        z = _newton_zero(expansion, complex(0.5 * (re0 + re1), 0.5 * (im0 + im1)))
        pad = 1e-9
        inside = z is not None and re0 - pad <= z.real <= re1 + pad and im0 - pad <= z.imag <= im1 + pad
        if inside:
            out.append(z)
        if inside or terminal:
            return
    # Newton left the box or several zeros share it: subdivide
    rm, im = 0.5 * (re0 + re1), 0.5 * (im0 + im1)
    for sub in ((re0, rm, im0, im), (rm, re1, im0, im), (re0, rm, im, im1), (rm, re1, im, im1)):
        _search_box(expansion, sub, depth - 1, out, min_size)


def default_region(db: OrbitDatabase, s0: float) -> tuple:
    """``Re s in [s0 - 1.5, s0 + 0.5]``, ``Im s in [-0.05, 2 pi / d0]``.

    The lower edge sits just below the real axis so real zeros are not on
    the contour."""
    return (s0 - 1.5, s0 + 0.5, -0.05, 2 * math.pi / db.scene.d0)


def find_zeros(
    db: OrbitDatabase,
    kind="N",
    region: Optional[Sequence[float]] = None,
    n_max: Optional[int] = None,
    k_max: Optional[int] = 8,
    max_depth: int = 8,
    min_size: float = 1e-3,
):
    """Zeros of the cycle-expanded zeta in a rectangle ``(re0, re1, im0, im1)``.

    Boxes are subdivided by argument-principle counting; each isolated
    zero is polished by Newton and annotated with the contour residue of
    ``zeta'/zeta`` and the shift of the zero when the order drops by one.
    """
    exp_ = cycle_expansion(db, kind, k_max, n_max)
    if region is None:
        s0 = leading_real_zero(exp_)
        if s0 is None:
            raise InputError("no real zero found to centre the default region; pass region")
        region = default_region(db, s0)
    found = []
    _search_box(exp_, tuple(region), max_depth, found, min_size)
    zeros = []
    for z in found:
        if abs(z.imag) <= 1e-12 * max(1.0, abs(z)):
            z = complex(z.real, 0.0)
        if all(abs(z - w) > 1e-8 for w in zeros):
            zeros.append(z)
    zeros.sort(key=lambda z: (-z.real, z.imag))
    lower = cycle_expansion(db, kind, k_max, exp_.n_max - 1) if exp_.n_max > 2 else None
    im_reliable = 2 * math.pi / db.scene.d0
    reports = []
    for z in zeros:
        others = [abs(z - w) for w in zeros if w is not z]
        radius = min([0.05] + [0.5 * d for d in others])
        res = contour_residue(exp_.log_derivative, z, radius)
        shift = None
        if lower is not None:
            z_low = _newton_zero(lower, z)
            shift = float(abs(z_low - z)) if z_low is not None else None
        low_conf = shift is None or shift > 1e-2 or abs(z.imag) > im_reliable
        reports.append(ZeroReport(complex(z), exp_.n_max, res, shift, bool(low_conf)))
    return reports


# -- abscissa of convergence ---------------------------------------------------


def length_block(db: OrbitDatabase, s, n: int, kind="N") -> np.ndarray:
    """Trace-normalised block sum over rays of symbolic length exactly n,
    ``sum (n / mu) w e^{-s tau} / |det|^{1/2}``; grows like ``lambda(s)^n``."""
    spec = (kind if isinstance(kind, SeriesSpec) else SeriesSpec.parse(kind)).with_(n_max=n, tau_max=None)
    rays = expand_rays(db, spec)
    sel = rays.n == n
    coef = spec.weight(rays.m[sel]) * rays.multiplicity[sel] * n / (rays.mu[sel] * np.sqrt(rays.det[sel]))
    return (_exp_terms(s, rays.tau[sel]) @ coef).real


def dirichlet_abscissa(db: OrbitDatabase, n_values: Sequence[int] = (6, 8, 10), kind="N", bracket=(-3.0, 3.0)):
    """Real ``s`` where length-block sums stop growing with n.

    For each ``n`` solves ``B_n(s) = B_{n-2}(s)`` by bisection (comparing
    lengths of equal parity).  Returns ``{n: s_n}``; the largest n is the
    best estimate.
    """
    out = {}
    for n in n_values:
        if n > db.n_max or n - 2 < 2:
            raise InputError(f"block n={n} needs database n_max >= {n}")

        def g(x, n=n):
            return math.log(length_block(db, np.array([x]), n, kind)[0]) - math.log(
                length_block(db, np.array([x]), n - 2, kind)[0]
            )

        out[n] = brentq(g, *bracket, xtol=1e-13)
    return out


# -- counting ------------------------------------------------------------------


@dataclass
class CountingFit:
    a_hat: float
    x_grid: np.ndarray
    counts: np.ndarray
    residuals: np.ndarray
    a1: float
    complete_below: float

    def to_dict(self):
        return {
            "a_hat": self.a_hat,
            "x_grid": self.x_grid.tolist(),
            "counts": self.counts.tolist(),
            "residuals": self.residuals.tolist(),
            "a1": self.a1,
            "complete_below": self.complete_below,
        }


def counting_function(db: OrbitDatabase, x) -> np.ndarray:
    """Number of primitive oriented rays with primitive period <= x."""
    taus = np.sort([r.tau for r in db.good()])
    return np.searchsorted(taus, np.asarray(x, dtype=float), side="right")


def counting_fit(db: OrbitDatabase, x_grid=None, points: int = 40) -> CountingFit:
    """Least-squares fit of ``log N(x) = a x - log(a x)``.

    The default grid spans the upper half of the range where the database
    is complete, ``[c/2, c]`` with ``c = (n_max + 1) d0`` (no missing word
    can be shorter than that), where the asymptotic form is most accurate.
    """
    recs = db.good()
    if len(recs) < 20:
        raise InputError(f"counting fit needs >= 20 orbits, got {len(recs)}")
    complete = min(db.covered_length(), max(r.tau for r in recs))
    if x_grid is None:
        lo = max(min(r.tau for r in recs), 0.5 * complete)
        x_grid = np.linspace(lo, complete, points)
    x_grid = np.asarray(x_grid, dtype=float)
    counts = counting_function(db, x_grid)
    keep = counts > 0
    xs, logN = x_grid[keep], np.log(counts[keep])

    def resid(a):
        return a[0] * xs - np.log(a[0] * xs) - logN

    a0 = float(np.max(logN / xs)) + 1e-3
    sol = least_squares(resid, [a0], bounds=([1e-9], [np.inf]))
    a_hat = float(sol.x[0])
    # all rays incl. iterates: #{tau <= x} <= e^{a1 x}
    rays = expand_rays(db, SeriesSpec("N"))
    all_taus = np.sort(rays.tau)
    tot = np.searchsorted(all_taus, x_grid, side="right")
    a1 = float(np.max(np.log(np.maximum(tot, 1)) / x_grid))
    return CountingFit(a_hat, x_grid, counts, resid(sol.x), a1, complete)
