"""Command-line interface: ``billiard-zeta <command> [options]``.

Exit codes: 0 ok, 2 validation failure, 3 configuration error,
4 certification failure, 5 provenance mismatch, 1 other errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import plotting, probe, zeta
from .database import (
    DEFAULT_TOL_STAB,
    OrbitDatabase,
    build_database,
    certify_database,
    default_jobs,
    digest,
    dumps,
)
from .errors import (
    BilliardError,
    CertificationError,
    ConfigError,
    CoverageError,
    GeometryError,
    ProvenanceError,
)
from .geometry import Scene, check_noneclipse, load_scene, three_disk_scene
from .orbit import DEFAULT_TOL, uniqueness_probe
from .symbolic import enumerate_words, format_word

EXIT_OK, EXIT_OTHER, EXIT_VALIDATION, EXIT_CONFIG, EXIT_CERT, EXIT_PROVENANCE = 0, 1, 2, 3, 4, 5
BUILTIN_SCENE = "builtin:three-disk"
DB_NAME = "orbits.jsonl"


@dataclass(frozen=True)
class RunConfig:
    scene: str = BUILTIN_SCENE
    n_max: Optional[int] = None  # None: 6 when building, the database's value otherwise
    tau_max: Optional[float] = None
    tol_orbit: float = DEFAULT_TOL
    tol_stab: float = DEFAULT_TOL_STAB
    tol_zeta: float = 1e-12
    out: str = "out"
    jobs: int = 1
    seed: Optional[int] = None

    def check(self):
        if self.n_max is not None and self.n_max < 2:
            raise ConfigError("n_max >= 2 required")
        for name in ("tol_orbit", "tol_stab", "tol_zeta"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.tau_max is not None and not self.tau_max > 0:
            raise ConfigError("tau_max must be positive")
        if self.scene != BUILTIN_SCENE and not Path(self.scene).is_file():
            raise ConfigError(f"scene file {self.scene} not found")

    def load_scene(self) -> Scene:
        return three_disk_scene() if self.scene == BUILTIN_SCENE else load_scene(self.scene)

    def provenance(self) -> dict:
        """Fields that determine results (output path, jobs and seed do not)."""
        d = asdict(self)
        for key in ("out", "jobs", "seed", "scene"):
            d.pop(key)
        return d

    @property
    def out_dir(self) -> Path:
        p = Path(self.out)
        p.mkdir(parents=True, exist_ok=True)
        return p


# -- output helpers ------------------------------------------------------------


def _provenance(scene: Scene, cfg: RunConfig, command: dict, db: Optional[OrbitDatabase]) -> dict:
    config = {"run": cfg.provenance(), "command": command}
    if db is not None:
        config["database"] = {"n_max": db.n_max, "tau_max": db.tau_max, "config_hash": digest(db.config)}
    return {"scene_hash": scene.hash(), "config_hash": digest(config), "scene": scene.to_dict(), "config": config}


def write_report(cfg: RunConfig, scene: Scene, name: str, command: dict, result, db=None) -> Path:
    path = cfg.out_dir / f"{name}.json"
    path.write_text(dumps({"provenance": _provenance(scene, cfg, command, db), "result": result}) + "\n")
    return path


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(cfg: RunConfig, name: str, header, rows) -> Path:
    path = cfg.out_dir / f"{name}.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def _complex_pair(z):
    z = complex(z)
    return [z.real, z.imag]


def _parse_floats(text: str, count: Optional[int] = None, what: str = "value"):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r}") from None
    if count is not None and len(vals) != count:
        raise ConfigError(f"{what} needs {count} comma-separated numbers, got {text!r}")
    return vals


# -- database resolution ---------------------------------------------------------


DEFAULT_NMAX = 6


def _build(cfg: RunConfig, scene: Scene) -> OrbitDatabase:
    n_max = cfg.n_max or DEFAULT_NMAX
    config = {"n_max": n_max, "tau_max": cfg.tau_max, "tol_orbit": cfg.tol_orbit, "tol_stab": cfg.tol_stab}
    return build_database(scene, n_max, cfg.tau_max, cfg.tol_orbit, cfg.tol_stab, jobs=default_jobs(cfg.jobs), config=config)


def resolve_database(cfg: RunConfig, db_path: Optional[str], scene_given: bool):
    """Load the database (building and saving it if absent) and check provenance."""
    path = Path(db_path) if db_path else cfg.out_dir / DB_NAME
    if not path.exists():
        if db_path:
            raise ConfigError(f"database {path} not found")
        scene = cfg.load_scene()
        db = _build(cfg, scene)
        db.save(path)
        return db, scene
    db = OrbitDatabase.load(path, cfg.load_scene() if scene_given else None)
    stored = db.config
    for key in ("tol_orbit", "tol_stab"):
        if key in stored and stored[key] != getattr(cfg, key):
            raise ProvenanceError(f"database {key}={stored[key]} differs from requested {getattr(cfg, key)}")
    n_max = cfg.n_max or db.n_max
    if n_max > db.n_max:
        raise ProvenanceError(f"requested n_max={n_max} exceeds database n_max={db.n_max}")
    if cfg.tau_max is not None and db.tau_max is not None and cfg.tau_max > db.tau_max:
        raise ProvenanceError(f"requested tau_max={cfg.tau_max} exceeds database tau_max={db.tau_max}")
    if n_max < db.n_max or cfg.tau_max is not None:
        db = db.restrict(n_max, cfg.tau_max)
    return db, db.scene


# -- commands --------------------------------------------------------------------


def cmd_validate(cfg: RunConfig, args) -> int:
    scene = cfg.load_scene()
    try:
        rep = check_noneclipse(scene)
        result = {"d0": scene.d0, "d1": scene.d1, "r": scene.r, **rep.to_dict()}
    except GeometryError as exc:
        result = {"d0": scene.d0, "d1": scene.d1, "r": scene.r, "passed": False, "error": str(exc)}
    write_report(cfg, scene, "validate", {"name": "validate"}, result)
    if result["passed"]:
        print(f"PASS non-eclipse  r={scene.r}  d0={scene.d0:.17g}  d1={scene.d1:.17g}")
        return EXIT_OK
    witness = result.get("witness")
    detail = f"witness (i,j,k)={tuple(witness)}" if witness else result.get("error", "")
    print(f"FAIL non-eclipse  r={scene.r}  d0={scene.d0:.17g}  d1={scene.d1:.17g}  {detail}")
    return EXIT_VALIDATION


def cmd_build_db(cfg: RunConfig, args) -> int:
    scene = cfg.load_scene()
    rep = check_noneclipse(scene)
    if not rep.passed:
        print(f"FAIL non-eclipse, witness (i,j,k)={rep.witness}; not building", file=sys.stderr)
        return EXIT_VALIDATION
    db = _build(cfg, scene)
    path = cfg.out_dir / DB_NAME
    db.save(path)
    good = db.good()
    max_res = max((r.residual for r in good), default=float("nan"))
    max_delta = max((r.cross_check_delta for r in good), default=float("nan"))
    print(
        f"records={len(db.records)} flagged={len(db.flagged())} max_residual={max_res:.3e} "
        f"max_det_delta={max_delta:.3e} -> {path}"
    )
    if good:
        plotting.plot_length_spectrum(db, cfg.out_dir / "length_spectrum.png")
    if cfg.seed is not None:
        rng = np.random.default_rng(cfg.seed)
        rows = []
        for cls in enumerate_words(scene.r, min(db.n_max, 6)):
            rows.append({"word": format_word(cls.word), "max_deviation": uniqueness_probe(scene, cls.word, rng)})
        write_report(cfg, scene, "uniqueness", {"name": "build-db", "seed": cfg.seed}, rows, db)
    for r in db.flagged():
        print(f"flagged {format_word(r.word)}: {r.error}", file=sys.stderr)
    if db.flagged() and not args.allow_partial:
        return EXIT_CERT
    return EXIT_OK


def cmd_zeta_eval(cfg: RunConfig, args) -> int:
    db, scene = resolve_database(cfg, args.db, args.scene is not None)
    spec = zeta.SeriesSpec.parse(args.kind, double_count_self_reversible=args.double_count)
    s = complex(*_parse_floats(args.s, 2, "--s"))
    eta = complex(zeta.eta_value(db, spec, s))
    zv = complex(zeta.zeta_value(db, spec, s))
    logd = complex(zeta.zeta_log_derivative_fd(db, spec, s))
    n = zeta.SeriesSpec("N", double_count_self_reversible=args.double_count)
    q2 = zeta.SeriesSpec("Q", 2, double_count_self_reversible=args.double_count)
    d = zeta.SeriesSpec("D", double_count_self_reversible=args.double_count)
    eN, eQ, eD = (complex(zeta.eta_value(db, x, s)) for x in (n, q2, d))
    identity = abs(eD - (2 * eQ - eN)) / max(abs(eD), abs(eN), 1e-300)
    result = {
        "kind": spec.label,
        "s": _complex_pair(s),
        "eta": _complex_pair(eta),
        "zeta": _complex_pair(zv),
        "zeta_log_derivative_fd": _complex_pair(logd),
        "log_derivative_rel_error": abs(logd - eta) / max(abs(eta), 1e-300),
        "identity_D_vs_2Q2_minus_N": identity,
        "n_max": db.n_max,
        "tau_max": db.tau_max,
    }
    command = {"name": "zeta eval", "kind": spec.label, "s": _complex_pair(s), "double_count": args.double_count}
    name = f"zeta_eval_{spec.label.replace(':', '')}"
    write_report(cfg, scene, name, command, result, db)
    if args.grid:
        lo, hi, cnt = _parse_floats(args.grid, 3, "--grid")
        xs = np.linspace(lo, hi, int(cnt))
        ev = zeta.eta_value(db, spec, xs + 0j)
        zz = zeta.zeta_value(db, spec, xs + 0j)
        rows = [(x, e.real, e.imag, z.real, z.imag) for x, e, z in zip(xs, ev, zz)]
        write_csv(cfg, name, ["s_re", "eta_re", "eta_im", "zeta_re", "zeta_im"], rows)
    print(f"eta_{spec.label}({s}) = {eta:.17g}")
    print(f"zeta_{spec.label}({s}) = {zv:.17g}")
    print(f"identity |eta_D - (2 eta_2 - eta_N)| rel = {identity:.3e}")
    return EXIT_OK


def _kmax(text: str):
    return None if text.lower() == "none" else int(text)


def cmd_zeta_zeros(cfg: RunConfig, args) -> int:
    db, scene = resolve_database(cfg, args.db, args.scene is not None)
    k_max = _kmax(args.kmax)
    exp_ = zeta.cycle_expansion(db, args.kind, k_max)
    s0 = zeta.leading_real_zero(exp_)
    region = _parse_floats(args.region, 4, "--region") if args.region else None
    if region is None:
        if s0 is None:
            raise ConfigError("no real zero to centre the default region; pass --region")
        region = list(zeta.default_region(db, s0))
    reports = zeta.find_zeros(db, args.kind, region, k_max=k_max)
    result = {
        "kind": args.kind,
        "k_max": k_max,
        "n_max": db.n_max,
        "region": region,
        "leading_real_zero": s0,
        "zeros": [z.to_dict() for z in reports],
    }
    command = {"name": "zeta zeros", "kind": args.kind, "k_max": k_max, "region": region}
    write_report(cfg, scene, "zeros", command, result, db)
    rows = [(z.s.real, z.s.imag, z.residue.real, z.residue.imag, z.shift, int(z.low_confidence)) for z in reports]
    write_csv(cfg, "zeros", ["re", "im", "residue_re", "residue_im", "shift", "low_confidence"], rows)
    plotting.plot_zeros(reports, region, cfg.out_dir / "zeros.png", title=f"zeros, kind {args.kind}, n <= {db.n_max}")
    xs = np.linspace(region[0], region[1], 400)
    plotting.plot_real_axis(xs, exp_(xs).real, cfg.out_dir / "real_axis.png", s0)
    for z in reports:
        flag = "  (low confidence)" if z.low_confidence else ""
        print(f"s* = {z.s:.12g}  residue = {z.residue.real:.6f}{flag}")
    return EXIT_OK


def cmd_count_fit(cfg: RunConfig, args) -> int:
    db, scene = resolve_database(cfg, args.db, args.scene is not None)
    fit = zeta.counting_fit(db)
    write_report(cfg, scene, "count_fit", {"name": "count fit"}, fit.to_dict(), db)
    write_csv(cfg, "count_fit", ["x", "N", "residual"], zip(fit.x_grid, fit.counts, fit.residuals))
    plotting.plot_counting(fit, cfg.out_dir / "count_fit.png")
    print(f"a_hat = {fit.a_hat:.12g}  a1 = {fit.a1:.12g}  complete below x = {fit.complete_below:.6g}")
    return EXIT_OK


def cmd_certify(cfg: RunConfig, args) -> int:
    db, scene = resolve_database(cfg, args.db, args.scene is not None)
    cert = certify_database(db)
    worst = min(
        math.log(min(abs(e) for e in r.eigenvalues if abs(e) > 1)) - cert.beta * r.m for r in db.good()
    )
    logdet_tau = [(math.log(r.det_abs), r.tau) for r in db.good()]
    inside = all(math.log(cert.C1) + cert.b1 * t - 1e-12 <= ld <= cert.b2 * t + 1e-12 for ld, t in logdet_tau)
    ok = cert.beta > 0 and worst >= -1e-12 and inside
    result = {**cert.to_dict(), "min_log_margin": worst, "envelope_contains_all": inside, "passed": ok}
    write_report(cfg, scene, "certificate", {"name": "certify"}, result, db)
    plotting.plot_det_envelope(db, cert, cfg.out_dir / "det_envelope.png")
    print(f"{'PASS' if ok else 'FAIL'} beta={cert.beta:.12g} b1={cert.b1:.12g} b2={cert.b2:.12g} C1={cert.C1:.12g}")
    return EXIT_OK if ok else EXIT_CERT


def cmd_probe_pair(cfg: RunConfig, args) -> int:
    db, scene = resolve_database(cfg, args.db, args.scene is not None)
    rho = probe.build_rho()
    window = probe.ProbeWindow(args.ell, args.m, rho)
    val = probe.fd_pairing(db, window, dirichlet=not args.neumann)
    result = {"ell": args.ell, "m": args.m, "rho0": rho(0.0), "pairing": val, "neumann": args.neumann}
    command = {"name": "probe pair", "ell": args.ell, "m": args.m, "neumann": args.neumann, "sweep": args.sweep}
    write_report(cfg, scene, "probe_pair", command, result, db)
    if args.sweep:
        lo, hi, cnt = _parse_floats(args.sweep, 3, "--sweep")
        ells = np.linspace(lo, hi, int(cnt))
        vals = probe.pairing_sweep(db, ells, args.m, rho, dirichlet=not args.neumann)
        write_csv(cfg, "probe_sweep", ["ell", "pairing"], zip(ells, vals))
        plotting.plot_pairing_sweep(ells, vals, cfg.out_dir / "probe_sweep.png")
    print(f"pairing(ell={args.ell}, m={args.m}) = {val:.17g}")
    return EXIT_OK


def cmd_report(cfg: RunConfig, args) -> int:
    """Full pipeline: validate, build, evaluate, zeros, counting, certificate."""
    code = cmd_validate(cfg, args)
    if code:
        return code
    code = cmd_build_db(cfg, args)
    if code:
        return code
    args.db = str(cfg.out_dir / DB_NAME)
    for kind in ("N", "D", "Q:2"):
        args.kind = kind
        cmd_zeta_eval(cfg, args)
    args.kind = "N"
    if cfg.load_scene().dimension == 2:
        cmd_zeta_zeros(cfg, args)
    if len(OrbitDatabase.load(args.db).good()) >= 20:
        cmd_count_fit(cfg, args)
    return cmd_certify(cfg, args)


# -- argument parsing ------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--scene", help=f"scene JSON file (default: {BUILTIN_SCENE}, unit disks at side 6)")
    g.add_argument("--nmax", type=int,
                   help=f"maximal word length (default {DEFAULT_NMAX} when building, else the database's)")
    g.add_argument("--taumax", type=float, help="period cutoff")
    g.add_argument("--tol-orbit", type=float, default=DEFAULT_TOL, help="orbit residual tolerance (default 1e-12)")
    g.add_argument("--tol-stab", type=float, default=DEFAULT_TOL_STAB,
                   help="determinant cross-check tolerance (default 1e-8)")
    g.add_argument("--jobs", type=int, help="worker processes (fallback: $BILLIARD_ZETA_JOBS, then 1)")
    g.add_argument("--seed", type=int, help="seed for the multi-start uniqueness probe (build-db only)")
    g.add_argument("--out", default="out", help="output directory (default ./out)")
    g.add_argument("--db", help="database file (default OUT/orbits.jsonl, built if absent)")
    g.add_argument("--allow-partial", action="store_true", help="exit 0 even if some orbits are flagged")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(
        prog="billiard-zeta",
        description="Periodic rays, stability and dynamical zeta functions of open dispersing billiards.",
        epilog="Exit codes: 0 ok, 2 validation failure, 3 configuration error, "
        "4 certification failure, 5 provenance mismatch.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("validate", parents=[common], help="check the non-eclipse condition")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("build-db", parents=[common], help="enumerate words and solve orbits + stability")
    p.set_defaults(func=cmd_build_db)

    z = sub.add_parser("zeta", help="Dirichlet series and zeta functions").add_subparsers(
        dest="zeta_command", required=True, parser_class=_Parser
    )
    p = z.add_parser("eval", parents=[common], help="evaluate eta and zeta at one s")
    p.add_argument("--kind", default="N", help="N, D or Q:q (default N)")
    p.add_argument("--s", required=True, help="RE,IM (use --s=-0.1,0 for negative real parts)")
    p.add_argument("--grid", help="RE0,RE1,COUNT: also write a CSV over real s")
    p.add_argument("--double-count", action="store_true", help="count self-reversible rays twice")
    p.set_defaults(func=cmd_zeta_eval)
    p = z.add_parser("zeros", parents=[common], help="zeros of the cycle expansion in a rectangle")
    p.add_argument("--kind", default="N", help="N, D or Q:q (default N)")
    p.add_argument("--region", help="RE0,RE1,IM0,IM1 (default around the leading real zero)")
    p.add_argument("--kmax", default="8", help="eigenvalue tower cutoff or 'none' (default 8)")
    p.set_defaults(func=cmd_zeta_zeros)

    c = sub.add_parser("count", help="counting function of periods").add_subparsers(
        dest="count_command", required=True, parser_class=_Parser
    )
    p = c.add_parser("fit", parents=[common], help="fit N(x) ~ exp(ax)/(ax)")
    p.set_defaults(func=cmd_count_fit)

    p = sub.add_parser("certify", parents=[common], help="hyperbolicity certificate and det envelope")
    p.set_defaults(func=cmd_certify)

    pr = sub.add_parser("probe", help="length-spectrum probe").add_subparsers(
        dest="probe_command", required=True, parser_class=_Parser
    )
    p = pr.add_parser("pair", parents=[common], help="pair the signed period distribution with a window")
    p.add_argument("--ell", type=float, required=True, help="window centre")
    p.add_argument("--m", type=float, required=True, help="window scale (support half-width 1/m)")
    p.add_argument("--neumann", action="store_true", help="omit the (-1)^m sign")
    p.add_argument("--sweep", help="L0,L1,COUNT: CSV sweep of window centres")
    p.set_defaults(func=cmd_probe_pair)

    p = sub.add_parser("report", parents=[common], help="full pipeline with figures")
    p.add_argument("--region", help=argparse.SUPPRESS)
    p.add_argument("--kmax", default="8", help=argparse.SUPPRESS)
    p.add_argument("--s", default="1,0", help="evaluation point RE,IM (default 1,0)")
    p.add_argument("--grid", help=argparse.SUPPRESS)
    p.add_argument("--double-count", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_report)
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        scene=args.scene or BUILTIN_SCENE,
        n_max=args.nmax,
        tau_max=args.taumax,
        tol_orbit=args.tol_orbit,
        tol_stab=args.tol_stab,
        out=args.out,
        jobs=default_jobs(args.jobs),
        seed=args.seed,
    )
    cfg.check()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CertificationError, CoverageError) as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except ProvenanceError as exc:
        print(f"provenance mismatch: {exc}", file=sys.stderr)
        return EXIT_PROVENANCE
    except BilliardError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
