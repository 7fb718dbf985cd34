"""Motor sizing: the demand pipeline and the exhaustive size sweep.

Scaling the motor changes its mass, the vehicle mass changes the wheel
demand, and the demand changes the optimal transmission; the sweep closes
this loop for each candidate size and picks the feasible design with the
lowest total electric energy (mechanical energy plus losses).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .drivecycle import DriveCycle, wheel_demand
from .errors import InfeasibleError, ValidationError
from .motor import step_coefficients
from .optimizer import (
    DesignSolution,
    optimize_cvt,
    optimize_fgt,
    optimize_mgt,
    per_step_bounds,
    towing_ratio_floor,
)
from .vehicle import TransmissionSpec, VehicleParams, em_demand, total_mass


def resolve_workers(requested: int | None = None) -> int:
    """Worker count for sweep parallelism; GEAROPT_THREADS caps it (0 = auto)."""
    if requested is None:
        raw = os.environ.get("GEAROPT_THREADS", "0")
        try:
            requested = int(raw)
        except ValueError:
            raise ValidationError(f"GEAROPT_THREADS must be an integer, got {raw!r}") from None
    if requested < 0:
        raise ValidationError("worker count must be non-negative")
    if requested == 0:
        return min(4, os.cpu_count() or 1)
    return requested


def design_transmission(
    spec: TransmissionSpec,
    model,
    cycle: DriveCycle,
    params: VehicleParams,
    c_shift: float = 0.0,
    epsilon: float | None = None,
    mass: float | None = None,
    init=None,
    strict_braking_torque: bool = False,
) -> DesignSolution:
    """Full demand-to-design pipeline for one motor at its current size.

    Computes the vehicle mass from the motor rating (unless ``mass`` pins
    it), converts the cycle to motor demand, and runs the optimizer matching
    the transmission kind.  The returned solution carries the total electric
    energy, mass and rating alongside the cost breakdown.
    """
    limits = model.limits
    m_v = total_mass(params, spec, limits.P_max) if mass is None else float(mass)
    demand = wheel_demand(cycle, m_v, params)
    em = em_demand(demand, spec, params, limits)
    coeffs = step_coefficients(model, em.P_m, cycle.v, params.r_w, cycle.dt)
    gamma_min, gamma_max = per_step_bounds(
        em, limits, spec, cycle, params.r_w, strict_braking_torque
    )
    coeffs = coeffs.with_bounds(gamma_min, gamma_max)
    eta = spec.eta(params)

    if spec.kind == "cvt":
        required = m_v * params.g * np.sin(params.alpha0) * params.r_w
        available = limits.T_max * eta * spec.gamma_cvt_max
        if required > available * (1 + 1e-9):
            raise InfeasibleError(
                f"CVT cannot hold the towing slope: needs {required:.0f} N*m at the "
                f"wheel, delivers {available:.0f}"
            )
        solution = optimize_cvt(coeffs)
    else:
        floor = towing_ratio_floor(params, m_v, limits, eta)
        if spec.kind == "fgt":
            solution = optimize_fgt(coeffs, floor)
        else:
            solution = optimize_mgt(
                spec.n_gears,
                coeffs,
                c_shift=c_shift,
                towing_floor=floor,
                init=init,
                epsilon=params.epsilon if epsilon is None else epsilon,
            )

    total = float(np.sum(em.P_m + solution.step_loss) * cycle.dt)
    return replace(solution, total_energy=total, vehicle_mass=m_v, P_m_max=limits.P_max)


@dataclass(frozen=True)
class SweepRow:
    """One size candidate of a sweep; ``reason`` explains infeasibility."""

    s: float
    P_m_max: float
    mass: float
    feasible: bool
    J: float = np.nan
    loss_energy: float = np.nan
    shift_cost: float = np.nan
    total_energy: float = np.nan
    ratios: tuple = ()
    reason: str = ""
    solution: DesignSolution | None = None


def size_sweep(
    spec: TransmissionSpec,
    base_model,
    size_range,
    n_sizes: int,
    cycle: DriveCycle,
    params: VehicleParams,
    c_shift: float = 0.0,
    epsilon: float | None = None,
    workers: int | None = None,
):
    """Try ``n_sizes`` uniformly spaced motor scales; return (best, rows).

    Each size rescales the base motor, recomputes the mass-dependent demand
    and optimizes the transmission.  Infeasible sizes become infeasible rows,
    not errors; if every size is infeasible the sweep itself fails.  The best
    row minimizes total electric energy among feasible ones.
    """
    s_min, s_max = (float(s) for s in size_range)
    if not 0 < s_min <= s_max:
        raise ValidationError("size range must satisfy 0 < s_min <= s_max")
    if n_sizes < 1:
        raise ValidationError("need at least one size")
    scales = np.linspace(s_min, s_max, n_sizes) if n_sizes > 1 else np.array([s_min])

    def run(s: float) -> SweepRow:
        model = base_model.scaled(float(s))
        mass = total_mass(params, spec, model.limits.P_max)
        try:
            sol = design_transmission(
                spec, model, cycle, params, c_shift=c_shift, epsilon=epsilon
            )
        except InfeasibleError as exc:
            return SweepRow(
                s=float(s), P_m_max=model.limits.P_max, mass=mass,
                feasible=False, reason=str(exc),
            )
        return SweepRow(
            s=float(s), P_m_max=model.limits.P_max, mass=sol.vehicle_mass,
            feasible=True, J=sol.J, loss_energy=sol.loss_energy,
            shift_cost=sol.shift_cost, total_energy=sol.total_energy,
            ratios=sol.ratios, solution=sol,
        )

    n_workers = resolve_workers(workers)
    if n_workers > 1 and n_sizes > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(run, scales))
    else:
        rows = [run(s) for s in scales]

    feasible = [r for r in rows if r.feasible]
    if not feasible:
        raise InfeasibleError(
            "every motor size is infeasible; first failure: " + rows[0].reason
        )
    best = min(feasible, key=lambda r: r.total_energy)
    return best.solution, rows


def write_sweep_csv(rows, dest) -> None:
    """Sweep table CSV: s,P_m_max_kW,mass_kg,J_J,loss_J,total_energy_J,feasible,ratios."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_sweep_csv(rows, fh)
        return
    dest.write("s,P_m_max_kW,mass_kg,J_J,loss_J,total_energy_J,feasible,ratios\n")
    for r in rows:
        ratios = ";".join(f"{g:.6g}" for g in r.ratios)
        dest.write(
            f"{r.s:.10g},{r.P_m_max / 1e3:.10g},{r.mass:.10g},"
            f"{r.J:.10g},{r.loss_energy:.10g},{r.total_energy:.10g},"
            f"{int(r.feasible)},{ratios}\n"
        )
