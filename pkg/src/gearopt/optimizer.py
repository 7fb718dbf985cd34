"""Transmission design and control optimizers.

The CVT control trajectory and the FGT ratio have closed forms: the loss is
convex in the ratio, so the constrained optimum is the unconstrained
minimizer clamped to the feasible interval.  The MGT couples a combinatorial
gear-shift schedule with the ratio design; it is solved by alternating an
exact dynamic program over gears (fixed ratios) with the closed-form
per-gear ratio update (fixed schedule) until the cost settles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .drivecycle import DriveCycle
from .errors import GearoptError, InfeasibleError, ValidationError
from .motor import MotorLimits, StepCoefficients
from .vehicle import EmDemand, TransmissionSpec, VehicleParams

_BOUND_TOL = 1e-9  # relative slack when comparing ratios against their bounds


@dataclass(frozen=True)
class GearTrajectory:
    """Per-step gear choice (1-based indices) for an MGT schedule.

    ``initial_gear``, when given, is the gear engaged before the first step;
    a change away from it counts as a shift.
    """

    gears: np.ndarray
    initial_gear: int | None = None

    def __post_init__(self):
        gears = np.asarray(self.gears, dtype=int)
        object.__setattr__(self, "gears", gears)
        if gears.ndim != 1 or len(gears) == 0:
            raise ValidationError("gear trajectory must be a non-empty 1-D sequence")
        if np.any(gears < 1):
            raise ValidationError("gear indices are 1-based")

    def __len__(self) -> int:
        return len(self.gears)

    @property
    def shift_count(self) -> int:
        count = int(np.count_nonzero(np.diff(self.gears)))
        if self.initial_gear is not None and self.gears[0] != self.initial_gear:
            count += 1
        return count


class ObjectiveBreakdown(NamedTuple):
    J: float
    loss_energy: float
    shift_cost: float


@dataclass(frozen=True)
class DesignSolution:
    """A transmission design with its control trajectory and cost breakdown.

    ``ratios`` holds the designed gear ratios (empty for a CVT, whose ratio
    trajectory lives in ``gamma_trajectory``).  ``step_loss`` is the modeled
    loss power per step in W.  ``total_energy``, ``vehicle_mass`` and
    ``P_m_max`` are filled by the sizing/CLI pipeline, which knows the demand
    the design was computed for.
    """

    kind: str
    ratios: tuple
    gamma_trajectory: np.ndarray
    J: float
    loss_energy: float
    shift_cost: float
    shift_count: int
    step_loss: np.ndarray
    gear_trajectory: GearTrajectory | None = None
    iterations: int | None = None
    total_energy: float | None = None
    vehicle_mass: float | None = None
    P_m_max: float | None = None

    def __post_init__(self):
        if abs(self.J - (self.loss_energy + self.shift_cost)) > 1e-6 * max(1.0, abs(self.J)):
            raise ValidationError("J must decompose into loss energy plus shift cost")


def per_step_bounds(
    demand: EmDemand,
    limits: MotorLimits,
    spec: TransmissionSpec,
    cycle: DriveCycle,
    r_w: float,
    strict_braking_torque: bool = False,
):
    """Feasible ratio interval per step from torque, speed and CVT limits.

    The torque bound |T_mw|/T_max applies on traction steps; braking steps
    are exempt because any torque shortfall goes to the friction brakes
    (``strict_braking_torque`` restores the unconditional bound).  Stationary
    steps get (0, +inf).  Raises :class:`InfeasibleError` when some moving
    step has an empty interval.
    """
    v = cycle.v
    moving = v > 0
    binds = moving & ((demand.P_m > 0) | bool(strict_braking_torque))
    gamma_min = np.where(binds, np.abs(demand.T_mw) / limits.T_max, 0.0)
    gamma_max = np.where(
        moving, limits.omega_max * r_w / np.where(moving, v, 1.0), np.inf
    )
    if spec.kind == "cvt":
        gamma_min = np.where(moving, np.maximum(gamma_min, spec.gamma_cvt_min), 0.0)
        gamma_max = np.where(moving, np.minimum(gamma_max, spec.gamma_cvt_max), np.inf)

    bad = moving & (gamma_min > gamma_max * (1 + _BOUND_TOL))
    if np.any(bad):
        t = int(np.argmax(bad))
        raise InfeasibleError(
            f"cycle infeasible for this motor/transmission: step {t} needs a ratio "
            f">= {gamma_min[t]:.3f} (torque) but allows <= {gamma_max[t]:.3f} (speed"
            + ("/CVT range)" if spec.kind == "cvt" else ")")
        )
    return gamma_min, gamma_max


def towing_ratio_floor(
    params: VehicleParams, m_v: float, limits: MotorLimits, eta: float
) -> float:
    """Smallest ratio that can hold the stand-still towing slope."""
    if not limits.T_max > 0:
        raise ValidationError("T_max must be positive")
    return m_v * params.g * np.sin(params.alpha0) * params.r_w / (limits.T_max * eta)


def objective(
    coeffs: StepCoefficients,
    gamma=None,
    trajectory: GearTrajectory | None = None,
    ratios=None,
    c_shift: float = 0.0,
) -> ObjectiveBreakdown:
    """Cost of a control: loss energy over the cycle plus gear-shift cost.

    Pass either a per-step ratio array ``gamma`` (CVT/FGT style, no shift
    cost) or a ``trajectory`` with its ``ratios``.
    """
    if (gamma is None) == (trajectory is None):
        raise ValidationError("pass exactly one of gamma or trajectory")
    if trajectory is not None:
        if ratios is None:
            raise ValidationError("a gear trajectory needs its ratios")
        ratios = np.asarray(ratios, dtype=float)
        if len(trajectory) != len(coeffs):
            raise ValidationError("trajectory length must match the coefficients")
        if np.any(trajectory.gears > len(ratios)):
            raise ValidationError("gear index beyond the ratio list")
        gamma = ratios[trajectory.gears - 1]
        shift_cost = c_shift * trajectory.shift_count
    else:
        gamma = np.asarray(gamma, dtype=float)
        if gamma.shape != (len(coeffs),):
            raise ValidationError("gamma trajectory length must match the coefficients")
        shift_cost = 0.0
    loss_energy = float(np.sum(coeffs.loss_at(gamma)) * coeffs.dt)
    return ObjectiveBreakdown(loss_energy + shift_cost, loss_energy, shift_cost)


def optimize_cvt(coeffs: StepCoefficients) -> DesignSolution:
    """Per-step closed form: clamp the unconstrained minimizer to the bounds."""
    gamma = np.clip(coeffs.unconstrained_argmin(), coeffs.gamma_min, coeffs.gamma_max)
    step_loss = coeffs.loss_at(gamma)
    J, loss_energy, _ = objective(coeffs, gamma=gamma)
    return DesignSolution(
        kind="cvt",
        ratios=(),
        gamma_trajectory=gamma,
        J=J,
        loss_energy=loss_energy,
        shift_cost=0.0,
        shift_count=0,
        step_loss=step_loss,
    )


def _aggregate_argmin(e0: float, e1: float, e2: float, form: str) -> float:
    """Unconstrained minimizer of an aggregated per-ratio loss."""
    if form == "fractional":
        if e0 <= 0.0:
            return 0.0
        if e2 <= 0.0:
            return np.inf
        return float(np.sqrt(e0 / e2))
    if e2 > 0.0:
        return float(-e1 / (2.0 * e2))
    return -np.inf if e1 >= 0 else np.inf


def _aggregate_energy(e0: float, e1: float, e2: float, gamma: float, form: str) -> float:
    if form == "fractional":
        return e0 / gamma + e1 + e2 * gamma if gamma > 0 else (np.inf if e0 > 0 else e1)
    return e0 + e1 * gamma + e2 * gamma**2


def optimize_fgt(coeffs: StepCoefficients, towing_floor: float = 0.0) -> DesignSolution:
    """Closed-form single-ratio design over the whole cycle.

    The per-step coefficients aggregate into one convex function of the
    ratio; the towing floor joins the lower bound.
    """
    moving = ~coeffs.stationary
    dt = coeffs.dt
    e0 = float(np.sum(coeffs.d0[moving]) * dt)
    e1 = float(np.sum(coeffs.d1[moving]) * dt)
    e2 = float(np.sum(coeffs.d2[moving]) * dt)

    gmin = float(np.max(coeffs.gamma_min[moving], initial=0.0))
    gmax = float(np.min(coeffs.gamma_max[moving], initial=np.inf))
    lo = max(gmin, towing_floor, 0.0)
    if lo > gmax * (1 + _BOUND_TOL):
        binding = (
            f"towing floor {towing_floor:.3f}"
            if towing_floor >= gmin
            else f"per-step torque bound {gmin:.3f}"
        )
        raise InfeasibleError(
            f"no single ratio fits: {binding} exceeds the speed bound {gmax:.3f}"
        )
    gamma = float(np.clip(_aggregate_argmin(e0, e1, e2, coeffs.form), lo, gmax))
    gamma_traj = np.full(len(coeffs), gamma)
    step_loss = coeffs.loss_at(gamma_traj)
    J, loss_energy, _ = objective(coeffs, gamma=gamma_traj)
    return DesignSolution(
        kind="fgt",
        ratios=(gamma,),
        gamma_trajectory=gamma_traj,
        J=J,
        loss_energy=loss_energy,
        shift_cost=0.0,
        shift_count=0,
        step_loss=step_loss,
    )


def _stage_costs(ratios: np.ndarray, coeffs: StepCoefficients) -> np.ndarray:
    """(T+1, n_gears) stage energies; +inf where a gear violates the bounds."""
    n = len(ratios)
    L = np.empty((len(coeffs), n))
    for j in range(n):
        L[:, j] = coeffs.loss_at(float(ratios[j]))
    L *= coeffs.dt
    slack = 1 + _BOUND_TOL
    feasible = (ratios[None, :] * slack >= coeffs.gamma_min[:, None]) & (
        ratios[None, :] <= coeffs.gamma_max[:, None] * slack
    )
    feasible |= coeffs.stationary[:, None]
    L[~feasible] = np.inf
    return L


def gearshift_dp(
    ratios,
    coeffs: StepCoefficients,
    c_shift: float = 0.0,
    initial_gear: int | None = None,
) -> GearTrajectory:
    """Exact minimum-cost gear schedule for fixed ratios.

    Without shift costs this is a per-step argmin over feasible gears (ties
    go to the lowest index).  With shift costs it is a dynamic program over
    the gear state: backward value recursion with transition cost
    c_shift per change, then forward extraction, again preferring the lowest
    index on ties.
    """
    ratios = np.asarray(ratios, dtype=float)
    if ratios.ndim != 1 or len(ratios) == 0:
        raise ValidationError("need at least one gear ratio")
    if np.any(ratios <= 0):
        raise ValidationError("gear ratios must be strictly positive")
    if initial_gear is not None and not 1 <= initial_gear <= len(ratios):
        raise ValidationError("initial gear out of range")
    if c_shift < 0:
        raise ValidationError("shift cost must be non-negative")

    L = _stage_costs(ratios, coeffs)
    orphan = ~np.isfinite(L).any(axis=1)
    if np.any(orphan):
        t = int(np.argmax(orphan))
        raise InfeasibleError(
            f"no feasible gear at step {t}: ratio interval "
            f"[{coeffs.gamma_min[t]:.3f}, {coeffs.gamma_max[t]:.3f}]"
        )

    T1 = len(coeffs)
    if c_shift == 0.0:
        gears = np.argmin(L, axis=1) + 1
        return GearTrajectory(gears=gears, initial_gear=initial_gear)

    # backward value recursion: V[t, i] = L[t, i] + min(V[t+1, i], c + min_j V[t+1, j])
    V = np.empty_like(L)
    V[T1 - 1] = L[T1 - 1]
    for t in range(T1 - 2, -1, -1):
        nxt = V[t + 1]
        V[t] = L[t] + np.minimum(nxt, nxt.min() + c_shift)

    gears = np.empty(T1, dtype=int)
    first = V[0].copy()
    if initial_gear is not None:
        first += c_shift
        first[initial_gear - 1] -= c_shift
    gears[0] = int(np.argmin(first)) + 1
    for t in range(1, T1):
        cand = V[t] + c_shift
        cand[gears[t - 1] - 1] -= c_shift
        gears[t] = int(np.argmin(cand)) + 1
    return GearTrajectory(gears=gears, initial_gear=initial_gear)


def ratio_update(
    trajectory: GearTrajectory,
    coeffs: StepCoefficients,
    towing_floor: float = 0.0,
    ratios=None,
) -> np.ndarray:
    """Closed-form per-gear ratios for a fixed gear schedule.

    Each gear minimizes its own aggregated convex loss over the steps it is
    engaged, clamped to the bounds of those steps.  A gear with no active
    moving steps keeps its previous ratio.  The towing requirement is that
    the largest ratio reaches the floor; when no gear does, the one whose
    raise costs the least energy is pinned to the floor.
    """
    if ratios is None:
        raise ValidationError("ratio_update needs the current ratios")
    ratios = np.asarray(ratios, dtype=float)
    n = len(ratios)
    if np.any(trajectory.gears > n):
        raise ValidationError("gear index beyond the ratio list")
    if len(trajectory) != len(coeffs):
        raise ValidationError("trajectory length must match the coefficients")

    moving = ~coeffs.stationary
    dt = coeffs.dt
    out = ratios.astype(float).copy()
    agg = np.zeros((n, 3))
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    engaged = np.zeros(n, dtype=bool)
    for i in range(n):
        sel = (trajectory.gears == i + 1) & moving
        if not np.any(sel):
            continue
        engaged[i] = True
        agg[i] = (
            np.sum(coeffs.d0[sel]) * dt,
            np.sum(coeffs.d1[sel]) * dt,
            np.sum(coeffs.d2[sel]) * dt,
        )
        lo[i] = float(np.max(coeffs.gamma_min[sel]))
        hi[i] = float(np.min(coeffs.gamma_max[sel]))
        if lo[i] > hi[i] * (1 + _BOUND_TOL):
            raise InfeasibleError(
                f"gear {i + 1}: empty ratio interval [{lo[i]:.3f}, {hi[i]:.3f}] "
                "over its active steps"
            )
        uc = _aggregate_argmin(*agg[i], coeffs.form)
        out[i] = float(np.clip(uc, lo[i], hi[i]))

    if towing_floor > 0.0 and np.max(out) < towing_floor * (1 - _BOUND_TOL):
        candidates = np.flatnonzero(hi >= towing_floor * (1 - _BOUND_TOL))
        if len(candidates) == 0:
            raise InfeasibleError(
                f"towing floor {towing_floor:.3f} exceeds every gear's speed bound"
            )
        penalties = [
            _aggregate_energy(*agg[i], towing_floor, coeffs.form)
            - _aggregate_energy(*agg[i], out[i], coeffs.form)
            if engaged[i]
            else 0.0
            for i in candidates
        ]
        chosen = candidates[int(np.argmin(penalties))]
        out[chosen] = towing_floor
    return out


def default_initial_ratios(
    n_gears: int, coeffs: StepCoefficients, towing_floor: float = 0.0
) -> np.ndarray:
    """Geometric spread spanning the aggregated feasible ratio envelope."""
    moving = ~coeffs.stationary
    lo = max(float(np.max(coeffs.gamma_min[moving], initial=0.0)), towing_floor)
    hi = float(np.min(coeffs.gamma_max[moving], initial=np.inf))
    if not np.isfinite(hi):
        hi = max(10.0, lo * 2.0)
    if lo <= 0.0:
        lo = hi / 10.0
    if n_gears == 1:
        return np.array([np.sqrt(lo * hi)])
    return np.sort(np.geomspace(lo, hi, n_gears))


def optimize_mgt(
    n_gears: int,
    coeffs: StepCoefficients,
    c_shift: float = 0.0,
    towing_floor: float = 0.0,
    init=None,
    epsilon: float = 1e-6,
    max_iterations: int = 200,
) -> DesignSolution:
    """Alternate the gear-shift DP and the ratio update until J settles.

    Terminates when the relative change of J drops below ``epsilon``.  The
    cost is non-increasing across iterations by construction; a rise beyond
    numerical tolerance raises (it would mean a broken half-step).
    """
    if n_gears < 1:
        raise ValidationError("need at least one gear")
    if init is None:
        ratios = default_initial_ratios(n_gears, coeffs, towing_floor)
    else:
        ratios = np.asarray(init, dtype=float)
        if ratios.shape != (n_gears,):
            raise ValidationError("init must provide one ratio per gear")
        if np.any(ratios <= 0):
            raise ValidationError("initial ratios must be strictly positive")

    J_prev = np.inf
    trajectory = None
    breakdown = None
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        trajectory = gearshift_dp(ratios, coeffs, c_shift)
        ratios = ratio_update(trajectory, coeffs, towing_floor, ratios)
        breakdown = objective(coeffs, trajectory=trajectory, ratios=ratios, c_shift=c_shift)
        J = breakdown.J
        if J > J_prev * (1 + 1e-9) + 1e-12:
            raise GearoptError(
                f"cost increased from {J_prev:.9g} to {J:.9g}; "
                "the alternating update is broken"
            )
        if abs(J - J_prev) < epsilon * max(abs(J), 1e-12) or J == J_prev:
            J_prev = J
            break
        J_prev = J
    else:
        raise GearoptError(f"no convergence within {max_iterations} iterations")

    gamma_traj = np.asarray(ratios)[trajectory.gears - 1]
    step_loss = coeffs.loss_at(gamma_traj)
    return DesignSolution(
        kind="fgt" if n_gears == 1 else "mgt",
        ratios=tuple(float(r) for r in ratios),
        gamma_trajectory=gamma_traj,
        J=breakdown.J,
        loss_energy=breakdown.loss_energy,
        shift_cost=breakdown.shift_cost,
        shift_count=trajectory.shift_count,
        step_loss=step_loss,
        gear_trajectory=trajectory,
        iterations=iterations,
    )
