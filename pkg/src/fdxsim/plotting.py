"""PNG figures written next to the CSV reports.

Figures use the Agg backend and strip the software tag from the PNG
metadata so reruns produce identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .geometry import to_db  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _new(title: str):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
    ax.set_title(title)
    return fig, ax


def plot_array_factor(path, angles, patterns: dict) -> Path:
    """Normalized array-factor patterns in dB, one curve per range label."""
    with plt.rc_context(STYLE):
        fig, ax = _new("Array factor")
        deg = np.degrees(angles)
        for label, mag in patterns.items():
            mag = np.asarray(mag, dtype=float)
            peak = mag.max() if mag.max() > 0 else 1.0
            ax.plot(deg, to_db(mag / peak), label=label, lw=1.0)
        ax.set_ylim(-40, 3)
        ax.set_xlabel("angle (deg)")
        ax.set_ylabel("normalized |AF| (dB)")
        ax.legend(loc="lower center", fontsize=8)
        return _save(fig, path)


def plot_rate_region(path, points) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = _new("Spectral efficiency region")
        bfc = [p for p in points if p.label == "bfc"]
        ax.plot([p.se_tx for p in bfc], [p.se_rx for p in bfc], "o-", ms=3, label="BFC sweep")
        ref = {p.label: p for p in points if p.label != "bfc"}
        if "hd_tx_only" in ref and "hd_rx_only" in ref:
            a, b = ref["hd_tx_only"], ref["hd_rx_only"]
            ax.plot([a.se_tx, b.se_tx], [a.se_rx, b.se_rx], "k--", lw=1, label="HD time sharing")
        for label, marker in (("fd_capacity", "*"), ("no_mitigation", "x")):
            if label in ref:
                ax.plot(ref[label].se_tx, ref[label].se_rx, marker, ms=9, label=label)
        ax.set_xlabel("transmit SE (bits/s/Hz)")
        ax.set_ylabel("receive SE (bits/s/Hz)")
        ax.set_xlim(left=0)
        ax.set_ylim(bottom=0)
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_levels(path, report, budget=None) -> Path:
    rows = report.rows()
    with plt.rc_context(STYLE):
        fig, ax = _new("Self-interference power levels")
        names = [r[0] for r in rows]
        power = np.array([r[1] for r in rows])
        base = min(power.min(), report.noise_floor_dbm) - 10.0
        ax.bar(names, power - base, bottom=base, color="tab:blue")
        ax.axhline(report.noise_floor_dbm, color="k", ls="--", lw=1, label="noise floor")
        if budget is not None:
            ax.axhline(budget.lna_sat_dbm, color="tab:red", ls=":", lw=1, label="LNA saturation")
            ax.axhline(budget.adc_sat_dbm, color="tab:orange", ls=":", lw=1, label="ADC saturation")
        ax.set_ylabel("power (dBm)")
        ax.tick_params(axis="x", labelrotation=20, labelsize=7)
        ax.legend(fontsize=8)
        fig.tight_layout()
        return _save(fig, path)


def plot_matrix_db(path, matrix, title: str, xlabel: str, ylabel: str,
                   power: bool = True) -> Path:
    """Heatmap of a channel (|.|) or power map in dB."""
    m = np.abs(np.asarray(matrix))
    with plt.rc_context(STYLE):
        fig, ax = _new(title)
        db = 10 * np.log10(np.maximum(m, 1e-30)) if power else to_db(m)
        im = ax.imshow(db, aspect="auto", origin="lower", cmap="viridis")
        ax.grid(False)
        fig.colorbar(im, ax=ax, label="dB")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, path)


def plot_selection(path, user_ids, scores, chosen, ylabel: str) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = _new("Uplink user selection")
        colors = ["tab:green" if u == chosen else "tab:gray" for u in user_ids]
        ax.bar([str(u) for u in user_ids], scores, color=colors)
        ax.set_ylabel(ylabel)
        return _save(fig, path)
