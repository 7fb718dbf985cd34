"""Replay an optimized design against a nonlinear motor map.

The design fixes the ratio trajectory; the map, interpolated bilinearly,
supplies the loss at each resulting operating point.  This validates the
fitted-model prediction without trusting it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .drivecycle import DriveCycle, wheel_demand
from .errors import EnvelopeError, ValidationError
from .motor import MotorLimits, MotorMap
from .optimizer import DesignSolution
from .vehicle import TransmissionSpec, VehicleParams, em_demand

_LIMIT_TOL = 1e-6


@dataclass(frozen=True)
class SimulationResult:
    """Energy report and per-step traces from a map replay."""

    total_energy: float  # electric energy from the map losses, J
    loss_energy: float  # map loss energy, J
    model_loss_energy: float  # loss energy the design's model predicted, J
    shift_cost: float  # carried over from the design, J
    omega: np.ndarray
    torque: np.ndarray
    P_m: np.ndarray
    loss_sim: np.ndarray
    loss_model: np.ndarray
    gamma: np.ndarray


def simulate(
    design: DesignSolution,
    cycle: DriveCycle,
    params: VehicleParams,
    motor_map: MotorMap,
) -> SimulationResult:
    """Replay the design's ratio trajectory on the map.

    The design must carry its vehicle mass and rating (the pipeline fills
    them).  Every moving operating point is validated against the map limits
    and the design rating before interpolation; violations raise
    :class:`EnvelopeError` with the step index.
    """
    if design.vehicle_mass is None or design.P_m_max is None:
        raise ValidationError("design lacks vehicle mass / rating; run it through the pipeline")
    gamma = np.asarray(design.gamma_trajectory, dtype=float)
    if gamma.shape != cycle.v.shape:
        raise ValidationError("design trajectory length does not match the cycle")

    n_gears = max(len(design.ratios), 1)
    spec_kind = design.kind if design.kind != "mgt" else "mgt"
    spec = TransmissionSpec(kind=spec_kind, n_gears=n_gears if spec_kind == "mgt" else 1)
    demand = wheel_demand(cycle, design.vehicle_mass, params)
    limits = motor_map.limits
    sat_limits = MotorLimits(limits.omega_max, limits.T_max, design.P_m_max)
    em = em_demand(demand, spec, params, sat_limits)

    moving = cycle.v > 0
    omega = np.where(moving, gamma * cycle.v / params.r_w, 0.0)
    torque = np.where(moving & (gamma > 0), em.T_mw / np.where(gamma > 0, gamma, 1.0), 0.0)
    P_m = np.where(moving, em.P_m, 0.0)

    for name, values, cap in (
        ("speed", omega, limits.omega_max),
        ("torque", np.abs(torque), limits.T_max),
        ("power", np.abs(P_m), design.P_m_max),
    ):
        over = values > cap * (1 + _LIMIT_TOL)
        if np.any(over):
            t = int(np.argmax(over))
            raise EnvelopeError(
                f"{name} {values[t]:.3f} exceeds the limit {cap:.3f}", step=t
            )

    loss_sim = np.asarray(motor_map.interpolate(omega, torque), dtype=float)
    loss_model = np.asarray(design.step_loss, dtype=float)
    dt = cycle.dt
    loss_energy = float(np.sum(loss_sim) * dt)
    total_energy = float(np.sum(P_m + loss_sim) * dt)
    return SimulationResult(
        total_energy=total_energy,
        loss_energy=loss_energy,
        model_loss_energy=float(np.sum(loss_model) * dt),
        shift_cost=design.shift_cost,
        omega=omega,
        torque=torque,
        P_m=P_m,
        loss_sim=loss_sim,
        loss_model=loss_model,
        gamma=gamma,
    )


def write_trace_csv(result: SimulationResult, cycle: DriveCycle, dest) -> None:
    """Per-step trace: t,v,gamma,omega,T_m,P_m,P_loss_model,P_loss_sim."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_trace_csv(result, cycle, fh)
        return
    dest.write("t,v,gamma,omega,T_m,P_m,P_loss_model,P_loss_sim\n")
    for k in range(cycle.n_samples):
        dest.write(
            f"{k * cycle.dt:.10g},{cycle.v[k]:.10g},{result.gamma[k]:.10g},"
            f"{result.omega[k]:.10g},{result.torque[k]:.10g},{result.P_m[k]:.10g},"
            f"{result.loss_model[k]:.10g},{result.loss_sim[k]:.10g}\n"
        )
