"""Brute-force global optimizers at desk scale.

These stand in for an external mixed-integer benchmark: the gear-shift
dynamic program is exact for fixed ratios, so enumerating ratio tuples on a
grid and keeping the best DP cost yields the global optimum on that grid.
Gear labels are exchangeable, so only sorted tuples are enumerated.
"""

from __future__ import annotations

from itertools import combinations_with_replacement

import numpy as np

from .errors import InfeasibleError, ValidationError
from .motor import StepCoefficients
from .optimizer import DesignSolution, _stage_costs, gearshift_dp, objective

ENUMERATION_BUDGET = 10**6


def grid_oracle_scalar(coefficients, interval, resolution: int, form: str = "fractional") -> float:
    """Argmin of a scalar ratio objective over a uniform grid (ties: smallest).

    ``coefficients`` is (a, b, c) for a/g + b + c*g (fractional form) or
    a + b*g + c*g^2 (quadratic form).
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo <= hi:
        raise ValidationError("interval must be non-empty")
    if resolution < 2:
        raise ValidationError("resolution must be at least 2")
    a, b, c = (float(x) for x in coefficients)
    g = np.linspace(lo, hi, resolution)
    if form == "fractional":
        frac = np.where(g > 0, a / np.where(g > 0, g, 1.0), np.inf if a > 0 else 0.0)
        values = frac + b + c * g
    elif form == "quadratic":
        values = a + b * g + c * g**2
    else:
        raise ValidationError(f"unknown objective form {form!r}")
    return float(g[int(np.argmin(values))])


def ratio_grid_for(
    coeffs: StepCoefficients, towing_floor: float = 0.0, resolution: float = 0.05
) -> np.ndarray:
    """Uniform candidate-ratio grid covering the useful envelope of a cycle.

    Spans every per-step clamped optimum, every per-step lower bound and the
    towing floor, padded by one cell on each side.
    """
    moving = ~coeffs.stationary
    if not np.any(moving):
        raise ValidationError("cannot build a ratio grid for an all-stationary cycle")
    clamped = np.clip(
        coeffs.unconstrained_argmin(), coeffs.gamma_min, coeffs.gamma_max
    )[moving]
    lo = max(resolution, float(np.min(clamped)) - resolution)
    hi = max(
        float(np.max(clamped)),
        float(np.max(coeffs.gamma_min[moving], initial=0.0)),
        towing_floor,
    ) + resolution
    return np.arange(lo, hi + resolution / 2, resolution)


def _sorted_tuples(n_points: int, n_gears: int) -> np.ndarray:
    """(M, n_gears) index matrix of all non-decreasing tuples."""
    if n_gears == 1:
        return np.arange(n_points)[:, None]
    if n_gears == 2:
        i, j = np.triu_indices(n_points)
        return np.column_stack([i, j])
    return np.asarray(list(combinations_with_replacement(range(n_points), n_gears)))


def brute_force_mgt(
    coeffs: StepCoefficients,
    n_gears: int,
    ratio_grid,
    c_shift: float = 0.0,
    towing_floor: float = 0.0,
) -> DesignSolution:
    """Global grid optimum: exact DP on every sorted ratio tuple.

    Refuses instances beyond ``n_gears <= 3`` or ``grid**n_gears >`` the
    enumeration budget.  Tuples whose largest ratio misses the towing floor
    are skipped; tuples leaving some step without a feasible gear cost +inf
    and drop out naturally.
    """
    grid = np.asarray(ratio_grid, dtype=float)
    if grid.ndim != 1 or len(grid) < 1:
        raise ValidationError("ratio grid must be a non-empty 1-D array")
    if np.any(grid <= 0):
        raise ValidationError("ratio grid must be strictly positive")
    if n_gears < 1 or n_gears > 3:
        raise InfeasibleError("brute force supports 1 to 3 gears only")
    needed = len(grid) ** n_gears
    if needed > ENUMERATION_BUDGET:
        raise InfeasibleError(
            f"enumeration budget exceeded: {len(grid)}^{n_gears} = {needed} "
            f"tuples > {ENUMERATION_BUDGET}"
        )

    combos = _sorted_tuples(len(grid), n_gears)
    if towing_floor > 0.0:
        keep = grid[combos].max(axis=1) >= towing_floor * (1 - 1e-9)
        combos = combos[keep]
        if len(combos) == 0:
            raise InfeasibleError(
                f"no grid ratio reaches the towing floor {towing_floor:.3f}"
            )

    # stage energies for every grid ratio once, then DP vectorized over tuples
    Lg = _stage_costs(grid, coeffs)  # (T+1, n_points)
    T1 = len(coeffs)
    with np.errstate(invalid="ignore"):
        if c_shift == 0.0:
            total = np.zeros(len(combos))
            for t in range(T1):
                total += Lg[t][combos].min(axis=1)
            J_all = total
        else:
            V = Lg[T1 - 1][combos]
            for t in range(T1 - 2, -1, -1):
                best = V.min(axis=1, keepdims=True)
                V = Lg[t][combos] + np.minimum(V, best + c_shift)
            J_all = V.min(axis=1)

    J_all = np.where(np.isnan(J_all), np.inf, J_all)
    best_m = int(np.argmin(J_all))
    if not np.isfinite(J_all[best_m]):
        raise InfeasibleError("every ratio tuple leaves some step without a feasible gear")

    ratios = grid[combos[best_m]]
    trajectory = gearshift_dp(ratios, coeffs, c_shift)
    breakdown = objective(coeffs, trajectory=trajectory, ratios=ratios, c_shift=c_shift)
    gamma_traj = ratios[trajectory.gears - 1]
    return DesignSolution(
        kind="fgt" if n_gears == 1 else "mgt",
        ratios=tuple(float(r) for r in ratios),
        gamma_trajectory=gamma_traj,
        J=breakdown.J,
        loss_energy=breakdown.loss_energy,
        shift_cost=breakdown.shift_cost,
        shift_count=trajectory.shift_count,
        step_loss=coeffs.loss_at(gamma_traj),
        gear_trajectory=trajectory,
    )
