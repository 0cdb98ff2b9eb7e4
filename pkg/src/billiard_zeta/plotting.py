"""Report figures (matplotlib, Agg backend, PNG files)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no timestamps so reruns give identical files
_META = {"Software": None}


def _save(fig, path):
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def plot_length_spectrum(db, path):
    """Amplitudes tau_sharp / |det|^{1/2} at each primitive period, signed by (-1)^m."""
    recs = db.good()
    tau = np.array([r.tau for r in recs])
    amp = np.array([r.tau / np.sqrt(r.det_abs) for r in recs])
    sign = np.array([1.0 if r.m % 2 == 0 else -1.0 for r in recs])
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.vlines(tau, 0, sign * amp, color=np.where(sign > 0, "C0", "C3"), lw=1)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_yscale("symlog", linthresh=1e-6)
    ax.set_xlabel(r"period $\tau$")
    ax.set_ylabel(r"$(-1)^m\,\tau^\sharp/|\det(I-P)|^{1/2}$")
    ax.set_title(f"length spectrum, n <= {db.n_max}")
    return _save(fig, path)


def plot_det_envelope(db, cert, path):
    recs = db.good()
    tau = np.array([r.tau for r in recs])
    logdet = np.log([r.det_abs for r in recs])
    x = np.linspace(0, tau.max() * 1.05, 50)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(tau, logdet, ".", ms=3, label="orbits")
    ax.plot(x, np.log(cert.C1) + cert.b1 * x, "C1--", label=r"$\log C_1 + b_1\tau$")
    ax.plot(x, cert.b2 * x, "C2--", label=r"$b_2\tau$")
    ax.set_xlabel(r"$\tau$")
    ax.set_ylabel(r"$\log|\det(I-P)|$")
    ax.legend()
    return _save(fig, path)


def plot_zeros(reports, region, path, title="zeros"):
    fig, ax = plt.subplots(figsize=(5, 5))
    re0, re1, im0, im1 = region
    ax.add_patch(plt.Rectangle((re0, im0), re1 - re0, im1 - im0, fill=False, ls=":", color="grey"))
    for z in reports:
        ax.plot(z.s.real, z.s.imag, "x" if z.low_confidence else "o", color="C3" if z.low_confidence else "C0")
        ax.annotate(f"{z.residue.real:.2f}", (z.s.real, z.s.imag), textcoords="offset points", xytext=(4, 4), fontsize=7)
    ax.set_xlim(re0 - 0.1, re1 + 0.1)
    ax.set_ylim(im0 - 0.1, im1 + 0.1)
    ax.set_xlabel("Re s")
    ax.set_ylabel("Im s")
    ax.set_title(title)
    return _save(fig, path)


def plot_real_axis(s, values, path, zero=None):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(s, values)
    ax.axhline(0, color="k", lw=0.5)
    if zero is not None:
        ax.axvline(zero, color="C3", ls="--", lw=0.8)
    ax.set_xlabel("s (real)")
    ax.set_ylabel("cycle expansion")
    return _save(fig, path)


def plot_counting(fit, path):
    x = fit.x_grid
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(x, fit.counts, where="post", label="N(x)")
    a = fit.a_hat
    ax.plot(x, np.exp(a * x) / (a * x), "C1--", label=rf"$e^{{ax}}/(ax)$, a={a:.4f}")
    ax.set_yscale("log")
    ax.set_xlabel("x")
    ax.legend()
    return _save(fig, path)


def plot_pairing_sweep(ells, values, path):
    fig, ax = plt.subplots(figsize=(7, 3.5))
    ax.plot(ells, values, lw=0.8)
    ax.axhline(0, color="k", lw=0.5)
    ax.set_xlabel(r"window centre $\ell$")
    ax.set_ylabel("pairing")
    return _save(fig, path)
