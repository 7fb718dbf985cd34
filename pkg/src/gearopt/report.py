"""Figure rendering for traces and sweep tables.

Figures land next to the delimited outputs they visualize.  PNG metadata is
pinned so repeated runs on identical inputs produce identical bytes.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_METADATA = {"Software": "gearopt"}
_STYLE = {
    "figure.figsize": (8.0, 4.8),
    "axes.grid": True,
    "grid.alpha": 0.4,
    "grid.linestyle": "--",
    "axes.labelsize": 11,
    "legend.fontsize": 9,
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, dpi=150, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_trace(cycle, result, outdir) -> list:
    """Speed/ratio/motor-speed and power/loss figures for a simulation."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t = cycle.time
    written = []
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(3, 1, sharex=True, figsize=(8.0, 7.2))
        axes[0].plot(t, cycle.v, color="tab:blue")
        axes[0].set_ylabel("speed [m/s]")
        axes[1].step(t, result.gamma, where="post", color="tab:orange")
        axes[1].set_ylabel("gear ratio [-]")
        axes[2].plot(t, result.omega, color="tab:green")
        axes[2].set_ylabel("motor speed [rad/s]")
        axes[2].set_xlabel("time [s]")
        fig.align_ylabels(axes)
        fig.tight_layout()
        written.append(_save(fig, outdir / "trace_trajectory.png"))

        fig, axes = plt.subplots(2, 1, sharex=True, figsize=(8.0, 5.6))
        axes[0].plot(t, result.P_m / 1e3, color="tab:blue", label="motor power")
        axes[0].set_ylabel("power [kW]")
        axes[0].legend(loc="upper right")
        axes[1].plot(t, result.loss_model / 1e3, color="tab:orange", label="model loss")
        axes[1].plot(t, result.loss_sim / 1e3, color="tab:green", ls=":", label="map loss")
        axes[1].set_ylabel("loss [kW]")
        axes[1].set_xlabel("time [s]")
        axes[1].legend(loc="upper right")
        fig.align_ylabels(axes)
        fig.tight_layout()
        written.append(_save(fig, outdir / "trace_power.png"))
    return written


def plot_sweep(rows, outdir) -> list:
    """Total energy and loss versus motor rating across a size sweep."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    P = np.array([r.P_m_max for r in rows]) / 1e3
    feasible = np.array([r.feasible for r in rows])
    total = np.array([r.total_energy for r in rows]) / 1e6
    loss = np.array([r.loss_energy for r in rows]) / 1e3
    with plt.rc_context(_STYLE):
        fig, axes = plt.subplots(2, 1, sharex=True, figsize=(8.0, 5.6))
        axes[0].plot(P[feasible], total[feasible], "o-", ms=3, color="tab:blue")
        axes[0].set_ylabel("total energy [MJ]")
        axes[1].plot(P[feasible], loss[feasible], "o-", ms=3, color="tab:orange")
        axes[1].set_ylabel("loss energy [kJ]")
        axes[1].set_xlabel("motor rating [kW]")
        for ax in axes:
            for p in P[~feasible]:
                ax.axvline(p, color="tab:red", alpha=0.15, lw=3)
        fig.align_ylabels(axes)
        fig.tight_layout()
        return [_save(fig, outdir / "sweep_energy.png")]


def plot_map(motor_map, outdir, model=None) -> list:
    """Efficiency heatmap of a motor map (and the model's, when given)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    W, T = np.meshgrid(motor_map.omega, motor_map.torque, indexing="ij")
    P = W * T
    with np.errstate(divide="ignore", invalid="ignore"):
        eff = np.where(P >= 0, P / (P + motor_map.loss), (P + motor_map.loss) / P)
    eff = np.clip(np.nan_to_num(eff, nan=0.0, posinf=0.0, neginf=0.0), 0.0, 1.0)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        pc = ax.pcolormesh(W, T, eff, shading="auto", cmap="viridis", vmin=0.5, vmax=1.0)
        fig.colorbar(pc, ax=ax, label="efficiency [-]")
        ax.set_xlabel("motor speed [rad/s]")
        ax.set_ylabel("torque [N*m]")
        fig.tight_layout()
        return [_save(fig, outdir / "motor_map.png")]
