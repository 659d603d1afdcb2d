"""Render sweep results to figure files next to the CSV output."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_X_LABELS = {
    "ob": "optical budget (dB)",
    "wavelength": "wavelength (nm)",
    "time": "time (s)",
    "port": "splitter port",
}


def render_sweep_figure(rows: list[dict], path) -> str:
    """Rate and error-rate panels versus the swept variable; returns the path."""
    if not rows:
        raise ValueError("no rows to plot")
    kind = rows[0]["sweep_kind"]
    x = [r["sweep_value"] for r in rows]
    sifted = [max(r["sifted_rate_bps"], 1e-3) for r in rows]
    secure = [max(r["secure_rate_bps"], 1e-3) for r in rows]
    qber = [100.0 * r["qber"] if not math.isnan(r["qber"]) else float("nan")
            for r in rows]

    fig, (ax_rate, ax_qber) = plt.subplots(2, 1, figsize=(6.0, 6.4), sharex=True)
    if kind == "port":
        ax_rate.bar([v - 0.15 for v in x], sifted, width=0.3, label="sifted")
        ax_rate.bar([v + 0.15 for v in x], secure, width=0.3, label="secure")
        ax_rate.set_yscale("log")
        ax_qber.bar(x, qber, width=0.4, color="firebrick")
    else:
        ax_rate.semilogy(x, sifted, "o-", ms=3, label="sifted")
        ax_rate.semilogy(x, secure, "s--", ms=3, label="secure")
        ax_qber.plot(x, qber, "o-", ms=3, color="firebrick")
    ax_rate.set_ylabel("key rate (bit/s)")
    ax_rate.legend(loc="best", fontsize=8)
    ax_rate.grid(True, alpha=0.3)
    ax_qber.set_ylabel("QBER (%)")
    ax_qber.set_xlabel(_X_LABELS.get(kind, kind))
    ax_qber.grid(True, alpha=0.3)
    scenario = rows[0].get("scenario", "")
    fig.suptitle(f"scenario {scenario}, {kind} sweep", fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)


def render_port_speckle_figure(rows: list[tuple[float, int, float]], path) -> str:
    """Per-port transmission versus wavelength from a port sweep table."""
    if not rows:
        raise ValueError("no rows to plot")
    ports = sorted({r[1] for r in rows})
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    for port in ports:
        xs = [r[0] for r in rows if r[1] == port]
        ys = [r[2] for r in rows if r[1] == port]
        ax.plot(xs, ys, lw=1.2, label=f"port {port + 1}")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("transmission (dB)")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return str(path)
