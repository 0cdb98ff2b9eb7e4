"""Orbit database: one JSONL record per oriented primitive periodic ray."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .errors import BilliardError, ConfigError, ProvenanceError
from .geometry import Scene
from .orbit import DEFAULT_TOL, canonical_rotation, find_orbit, reverse_orbit
from .stability import certificate_from_arrays, det_from_eigenvalues, poincare_map
from .symbolic import CyclicClass, Orientation, canonicalize, enumerate_words

FORMAT_VERSION = 1
DEFAULT_TOL_STAB = 1e-8


def _fmt(obj) -> str:
    """JSON text with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return json.dumps(str(x))
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{_fmt(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(_fmt(v) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


dumps = _fmt


def digest(obj) -> str:
    return hashlib.sha256(_fmt(obj).encode()).hexdigest()[:16]


@dataclass
class RayRecord:
    """Stored data of one oriented primitive ray."""

    word: tuple
    orientation: str
    m: int
    tau: float
    points: list
    lambdas: list
    residual: float
    det_abs: float = float("nan")
    det_factored: float = float("nan")
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    m0: list = field(default_factory=list)
    cross_check_delta: float = float("nan")
    factor_min_sv: list = field(default_factory=list)
    kappa: float = float("nan")
    flagged: bool = False
    error: Optional[str] = None

    @property
    def n(self) -> int:
        return len(self.word)

    @property
    def tau_sharp(self) -> float:
        return self.tau

    @property
    def self_reversible(self) -> bool:
        return self.orientation == Orientation.SELF_REVERSIBLE.value

    @property
    def Lambda(self) -> float:
        """Signed leading multiplier (d=2)."""
        return float(self.eigenvalues[0].real)

    def det_iterate(self, mu: int) -> float:
        return self.det_abs if mu == 1 else det_from_eigenvalues(self.eigenvalues, mu)

    def to_dict(self):
        out = {
            "word": list(self.word),
            "orientation": self.orientation,
            "points": self.points,
            "lambdas": self.lambdas,
            "tau": self.tau,
            "tau_sharp": self.tau,
            "m": self.m,
            "residual": self.residual,
            "det_abs": self.det_abs,
            "det_factored": self.det_factored,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "m0": self.m0,
            "cross_check_delta": self.cross_check_delta,
            "factor_min_sv": self.factor_min_sv,
            "kappa": self.kappa,
            "flagged": self.flagged,
        }
        if self.error:
            out["error"] = self.error
        return out

    @classmethod
    def from_dict(cls, d):
        num = float  # also parses the "nan" strings written for failed records
        return cls(
            word=tuple(d["word"]),
            orientation=d["orientation"],
            m=d["m"],
            tau=num(d["tau"]),
            points=d["points"],
            lambdas=d["lambdas"],
            residual=num(d["residual"]),
            det_abs=num(d["det_abs"]),
            det_factored=num(d["det_factored"]),
            eigenvalues=np.array([complex(a, b) for a, b in d["eigenvalues"]]),
            m0=d["m0"],
            cross_check_delta=num(d["cross_check_delta"]),
            factor_min_sv=d["factor_min_sv"],
            kappa=num(d["kappa"]),
            flagged=d["flagged"],
            error=d.get("error"),
        )


@dataclass
class OrbitDatabase:
    scene: Scene
    records: list
    n_max: int
    tau_max: Optional[float] = None
    config: dict = field(default_factory=dict)

    @property
    def scene_hash(self) -> str:
        return self.scene.hash()

    @property
    def dimension(self) -> int:
        return self.scene.dimension

    def good(self) -> list:
        return [r for r in self.records if not r.flagged]

    def flagged(self) -> list:
        return [r for r in self.records if r.flagged]

    def restrict(self, n_max: Optional[int] = None, tau_max: Optional[float] = None) -> "OrbitDatabase":
        recs = [
            r
            for r in self.records
            if (n_max is None or r.n <= n_max) and (tau_max is None or r.tau <= tau_max)
        ]
        return OrbitDatabase(
            self.scene,
            recs,
            n_max if n_max is not None else self.n_max,
            tau_max if tau_max is not None else self.tau_max,
            self.config,
        )

    def subset(self, words: Iterable) -> "OrbitDatabase":
        """Records of the given oriented words only (no longer complete)."""
        keep = {canonicalize(w).word for w in words}
        recs = [r for r in self.records if r.word in keep]
        return OrbitDatabase(self.scene, recs, self.n_max, self.tau_max, self.config)

    def covered_length(self) -> float:
        """Every ray with period below this bound is in the database."""
        bound = (self.n_max + 1) * self.scene.d0
        return min(bound, self.tau_max) if self.tau_max is not None else bound

    def header(self):
        return {
            "format": FORMAT_VERSION,
            "scene_hash": self.scene_hash,
            "scene": self.scene.to_dict(),
            "n_max": self.n_max,
            "tau_max": self.tau_max,
            "config": self.config,
            "config_hash": digest(self.config),
            "count": len(self.records),
        }

    def dumps(self) -> str:
        lines = [_fmt({"header": self.header()})]
        lines.extend(_fmt(r.to_dict()) for r in self.records)
        return "\n".join(lines) + "\n"

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path, scene: Optional[Scene] = None) -> "OrbitDatabase":
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise ConfigError(f"{path}: empty database")
        head = json.loads(lines[0]).get("header")
        if head is None:
            raise ConfigError(f"{path}: missing header line")
        stored = Scene.from_dict(head["scene"])
        if stored.hash() != head["scene_hash"]:
            raise ProvenanceError(f"{path}: scene hash does not match embedded scene")
        if scene is not None and scene.hash() != head["scene_hash"]:
            raise ProvenanceError(f"database scene {head['scene_hash']} != scene {scene.hash()}")
        records = [RayRecord.from_dict(json.loads(line)) for line in lines[1:] if line.strip()]
        return cls(stored, records, head["n_max"], head["tau_max"], head.get("config", {}))


# -- building ---------------------------------------------------------------


def _record(scene, orbit, report, tol_orbit, tol_stab) -> RayRecord:
    rec = RayRecord(
        word=orbit.word,
        orientation=orbit.cls.orientation.value,
        m=orbit.m,
        tau=orbit.tau,
        points=orbit.points.tolist(),
        lambdas=orbit.lengths.tolist(),
        residual=orbit.residual,
        det_abs=report.det_direct,
        det_factored=report.det_factored,
        eigenvalues=report.eigenvalues,
        m0=np.atleast_2d(report.M0).tolist(),
        cross_check_delta=report.cross_check_delta,
        factor_min_sv=report.factor_min_sv.tolist(),
        kappa=report.min_incidence,
    )
    problems = []
    if rec.residual > tol_orbit:
        problems.append(f"residual {rec.residual:.3e} > {tol_orbit:.1e}")
    if rec.cross_check_delta > tol_stab:
        problems.append(f"det cross-check {rec.cross_check_delta:.3e} > {tol_stab:.1e}")
    if problems:
        rec.flagged = True
        rec.error = "; ".join(problems)
    return rec


def _failed(cls: CyclicClass, exc: Exception) -> RayRecord:
    return RayRecord(cls.word, cls.orientation.value, cls.n, float("nan"), [], [], float("nan"),
                     flagged=True, error=f"{type(exc).__name__}: {exc}")


def _solve_pair(args):
    """Solve one unordered orientation pair; returns its oriented records."""
    scene, cls, tol_orbit, tol_stab = args
    out = []
    try:
        orbit = find_orbit(scene, cls, tol=tol_orbit)
        out.append(_record(scene, orbit, poincare_map(scene, orbit), tol_orbit, tol_stab))
        if cls.orientation is Orientation.CHIRAL:
            rev = canonical_rotation(scene, reverse_orbit(scene, orbit))
            out.append(_record(scene, rev, poincare_map(scene, rev), tol_orbit, tol_stab))
    except BilliardError as exc:
        out.append(_failed(cls, exc))
        if cls.orientation is Orientation.CHIRAL:
            out.append(_failed(cls.reversed(), exc))
    return out


def default_jobs(jobs: Optional[int] = None) -> int:
    if jobs:
        return int(jobs)
    env = os.environ.get("BILLIARD_ZETA_JOBS")
    return int(env) if env else 1


def build_database(
    scene: Scene,
    n_max: int,
    tau_max: Optional[float] = None,
    tol_orbit: float = DEFAULT_TOL,
    tol_stab: float = DEFAULT_TOL_STAB,
    jobs: Optional[int] = None,
    config: Optional[dict] = None,
) -> OrbitDatabase:
    """Enumerate words, solve orbits and stability, collect in canonical order.

    Rays with period above ``tau_max`` are dropped.  Each chiral pair is
    solved once; the reversed ray reuses the same points.
    """
    if n_max < 2:
        raise ConfigError("n_max >= 2 required")
    pairs = []
    for cls in enumerate_words(scene.r, n_max):
        if cls.orientation is Orientation.CHIRAL and cls.reversed().word < cls.word:
            continue
        pairs.append((scene, cls, tol_orbit, tol_stab))
    jobs = default_jobs(jobs)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_solve_pair, pairs, chunksize=8))
    else:
        results = [_solve_pair(p) for p in pairs]
    records = [rec for group in results for rec in group]
    records.sort(key=lambda r: (r.n, r.word))
    if tau_max is not None:
        records = [r for r in records if r.flagged or r.tau <= tau_max]
    return OrbitDatabase(scene, records, n_max, tau_max, dict(config or {}))


def records_for(scene: Scene, words: Iterable, tol_orbit: float = DEFAULT_TOL) -> list:
    """Records for an explicit list of words (test / exploration helper)."""
    out = []
    for w in words:
        cls = canonicalize(w)
        orbit = find_orbit(scene, cls, tol=tol_orbit)
        out.append(_record(scene, orbit, poincare_map(scene, orbit), tol_orbit, DEFAULT_TOL_STAB))
    return out


def certify_database(db: OrbitDatabase):
    """Hyperbolicity certificate over every good record."""
    recs = db.good()
    return certificate_from_arrays(
        db.scene.d0,
        [r.tau for r in recs],
        [r.det_abs for r in recs],
        [min(r.factor_min_sv) for r in recs],
        [r.kappa for r in recs],
    )
