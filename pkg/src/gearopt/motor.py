"""Motor loss modeling: map synthesis, constrained fitting, evaluation, scaling.

Two fitted representations are supported.  The fractional model writes the
loss at a given mechanical power P as

    loss(P, w) = p0(P)/w + p1(P) + p2(P)*w

over the motor speed w, with p0 >= 0 (pinned to zero at P = 0 so standstill
losses stay finite) and p2 >= 0 so the loss is convex on w > 0.  The
quadratic alternative uses q1(P) + q2(P)*w + q3(P)*w^2 with q3 >= 0.
Coefficients are fitted independently on constant-power contours of a motor
map and interpolated linearly in P between grid powers, which preserves the
sign constraints.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    CycleFormatError,
    EnvelopeError,
    ExtrapolationError,
    FitError,
    ValidationError,
)

_HULL_TOL = 1e-9


@dataclass(frozen=True)
class MotorLimits:
    """Operating limits: maximum speed (rad/s), torque (N*m) and power (W)."""

    omega_max: float
    T_max: float
    P_max: float

    def __post_init__(self):
        if not (self.omega_max > 0 and self.T_max > 0 and self.P_max > 0):
            raise ValidationError("motor limits must be strictly positive")

    def scaled(self, s: float) -> "MotorLimits":
        """Linear power scaling: torque and power scale with s, speed is fixed."""
        if not s > 0:
            raise ValidationError("scale factor must be positive")
        return MotorLimits(self.omega_max, s * self.T_max, s * self.P_max)

    def to_dict(self) -> dict:
        return {"omega_max": self.omega_max, "T_max": self.T_max, "P_max": self.P_max}

    @classmethod
    def from_dict(cls, raw: dict) -> "MotorLimits":
        return cls(float(raw["omega_max"]), float(raw["T_max"]), float(raw["P_max"]))

    @classmethod
    def default(cls) -> "MotorLimits":
        """Base motor rating from the bundled default file (not a paper value)."""
        text = resources.files("gearopt.data").joinpath("motor_default.json").read_text()
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class MotorMap:
    """Loss samples on a rectangular speed x torque grid covering the envelope.

    ``loss[i, j]`` is the loss (W, >= 0) at ``omega[i]`` and ``torque[j]``.
    The grid spans the speed/torque rectangle of ``limits``; the power limit
    constrains operating points, not sample locations.
    """

    omega: np.ndarray
    torque: np.ndarray
    loss: np.ndarray
    limits: MotorLimits

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        torque = np.asarray(self.torque, dtype=float)
        loss = np.asarray(self.loss, dtype=float)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "torque", torque)
        object.__setattr__(self, "loss", loss)
        if omega.ndim != 1 or torque.ndim != 1 or loss.shape != (len(omega), len(torque)):
            raise ValidationError("map loss grid must be (n_omega, n_torque)")
        if len(omega) < 2 or len(torque) < 2:
            raise ValidationError("map needs at least a 2x2 grid")
        if np.any(np.diff(omega) <= 0) or np.any(np.diff(torque) <= 0):
            raise ValidationError("map grid axes must be strictly increasing")
        if np.any(loss < 0):
            raise ValidationError("map losses must be non-negative")
        tol = 1e-9
        if omega[0] < -tol or omega[-1] > self.limits.omega_max * (1 + tol):
            raise ValidationError("map speed samples exceed omega_max")
        if np.max(np.abs(torque)) > self.limits.T_max * (1 + tol):
            raise ValidationError("map torque samples exceed T_max")

    def interpolate(self, omega, torque):
        """Bilinear interpolation; raises :class:`EnvelopeError` outside the grid."""
        omega = np.asarray(omega, dtype=float)
        torque = np.asarray(torque, dtype=float)
        tol_w = 1e-9 * max(1.0, abs(self.omega[-1]))
        tol_t = 1e-9 * max(1.0, abs(self.torque[-1]), abs(self.torque[0]))
        outside = (
            (omega < self.omega[0] - tol_w)
            | (omega > self.omega[-1] + tol_w)
            | (torque < self.torque[0] - tol_t)
            | (torque > self.torque[-1] + tol_t)
        )
        if np.any(outside):
            bad = int(np.argmax(outside))
            raise EnvelopeError(
                f"operating point (omega={np.ravel(omega)[bad] if omega.ndim else float(omega):.3f}, "
                f"torque={np.ravel(torque)[bad] if torque.ndim else float(torque):.3f}) "
                "outside the sampled map",
                step=bad if omega.ndim else None,
            )
        wi = np.clip(np.searchsorted(self.omega, omega, side="right") - 1, 0, len(self.omega) - 2)
        tj = np.clip(np.searchsorted(self.torque, torque, side="right") - 1, 0, len(self.torque) - 2)
        w0, w1 = self.omega[wi], self.omega[wi + 1]
        t0, t1 = self.torque[tj], self.torque[tj + 1]
        fw = np.clip((omega - w0) / (w1 - w0), 0.0, 1.0)
        ft = np.clip((torque - t0) / (t1 - t0), 0.0, 1.0)
        z00 = self.loss[wi, tj]
        z01 = self.loss[wi, tj + 1]
        z10 = self.loss[wi + 1, tj]
        z11 = self.loss[wi + 1, tj + 1]
        return (
            z00 * (1 - fw) * (1 - ft)
            + z01 * (1 - fw) * ft
            + z10 * fw * (1 - ft)
            + z11 * fw * ft
        )


# ---------------------------------------------------------------------------
# synthetic ground truths (stand-ins for proprietary map data)


@dataclass(frozen=True)
class FractionalGroundTruth:
    """Loss surface exactly inside the fractional model class.

    Coefficients vary affinely with |P|: p0 = p0_slope*|P|, pk = base + slope*|P|
    for k in {1, 2}.  Affine dependence keeps the surface piecewise linear in
    torque at fixed speed, so grid sampling plus contour interpolation is exact.
    """

    p0_slope: float = 0.05
    p1_base: float = 150.0
    p1_slope: float = 0.005
    p2_base: float = 0.2
    p2_slope: float = 1.0e-5

    def coefficients(self, P):
        aP = np.abs(P)
        return (
            self.p0_slope * aP,
            self.p1_base + self.p1_slope * aP,
            self.p2_base + self.p2_slope * aP,
        )

    def loss(self, omega, torque):
        omega, torque = np.broadcast_arrays(np.asarray(omega, float), np.asarray(torque, float))
        p0, p1, p2 = self.coefficients(omega * torque)
        frac = np.divide(p0, omega, out=np.zeros_like(p0), where=omega > 0)
        return frac + p1 + p2 * omega


@dataclass(frozen=True)
class QuadraticGroundTruth:
    """Loss surface exactly inside the quadratic model class (affine in |P|)."""

    q1_base: float = 200.0
    q1_slope: float = 0.004
    q2_base: float = 1.0
    q2_slope: float = 2.0e-5
    q3_base: float = 2.0e-3
    q3_slope: float = 1.0e-8

    def coefficients(self, P):
        aP = np.abs(P)
        return (
            self.q1_base + self.q1_slope * aP,
            self.q2_base + self.q2_slope * aP,
            self.q3_base + self.q3_slope * aP,
        )

    def loss(self, omega, torque):
        omega, torque = np.broadcast_arrays(np.asarray(omega, float), np.asarray(torque, float))
        q1, q2, q3 = self.coefficients(omega * torque)
        return q1 + q2 * omega + q3 * omega**2


@dataclass(frozen=True)
class PhysicalGroundTruth:
    """Copper + iron + windage losses; outside both fitted model classes."""

    k_copper: float = 0.025  # W per (N*m)^2
    k_hysteresis: float = 1.8  # W per rad/s
    k_eddy: float = 6.0e-4  # W per (rad/s)^2
    k_windage: float = 1.5e-7  # W per (rad/s)^3
    k_const: float = 40.0  # W

    def loss(self, omega, torque):
        omega, torque = np.broadcast_arrays(np.asarray(omega, float), np.asarray(torque, float))
        return (
            self.k_copper * torque**2
            + self.k_hysteresis * omega
            + self.k_eddy * omega**2
            + self.k_windage * omega**3
            + self.k_const
        )


GROUND_TRUTHS = {
    "fractional": FractionalGroundTruth,
    "quadratic": QuadraticGroundTruth,
    "physical": PhysicalGroundTruth,
}


def synth_map(
    ground_truth, limits: MotorLimits, n_speed: int = 129, n_torque: int = 129
) -> MotorMap:
    """Deterministically sample a loss surface on the limits' rectangle.

    ``n_torque`` should be odd so the zero-torque contour lies on grid nodes.
    Raises :class:`ValidationError` when the ground truth produces a negative
    loss anywhere on the grid.
    """
    if n_speed < 2 or n_torque < 2:
        raise ValidationError("need at least 2 samples per axis")
    omega = np.linspace(0.0, limits.omega_max, n_speed)
    torque = np.linspace(-limits.T_max, limits.T_max, n_torque)
    loss = ground_truth.loss(omega[:, None], torque[None, :])
    if np.any(loss < 0):
        i, j = np.unravel_index(int(np.argmin(loss)), loss.shape)
        raise ValidationError(
            f"ground truth produced negative loss {loss[i, j]:.3f} W at "
            f"(omega={omega[i]:.1f}, torque={torque[j]:.1f})"
        )
    return MotorMap(omega=omega, torque=torque, loss=loss, limits=limits)


def write_map_csv(motor_map: MotorMap, dest) -> None:
    """Write the map as ``omega,torque,loss`` rows (row-major over the grid)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_map_csv(motor_map, fh)
        return
    dest.write("omega,torque,loss\n")
    for i, w in enumerate(motor_map.omega):
        for j, t in enumerate(motor_map.torque):
            dest.write(f"{w:.10g},{t:.10g},{motor_map.loss[i, j]:.10g}\n")


def load_map(source, limits: MotorLimits | None = None) -> MotorMap:
    """Read a map CSV; the samples must form a complete rectangular grid.

    When ``limits`` is omitted, omega_max and T_max are taken from the grid
    extent and P_max defaults to their product (i.e. the power limit is
    assumed not to bind); pass explicit limits when it should.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_map(fh, limits=limits)
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CycleFormatError("empty map file") from None
    if header != ["omega", "torque", "loss"]:
        raise CycleFormatError(
            f"expected header omega,torque,loss, got {','.join(header)}", line=1
        )
    triplets = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise CycleFormatError(f"expected 3 fields, got {len(row)}", line=lineno)
        try:
            triplets.append([float(x) for x in row])
        except ValueError:
            raise CycleFormatError(f"non-numeric value in {row!r}", line=lineno) from None
    if not triplets:
        raise CycleFormatError("map file has no samples")
    data = np.asarray(triplets, dtype=float)
    omega = np.unique(data[:, 0])
    torque = np.unique(data[:, 1])
    if len(omega) * len(torque) != len(data):
        raise CycleFormatError(
            f"samples do not form a complete {len(omega)}x{len(torque)} grid"
        )
    grid = np.full((len(omega), len(torque)), np.nan)
    wi = np.searchsorted(omega, data[:, 0])
    tj = np.searchsorted(torque, data[:, 1])
    grid[wi, tj] = data[:, 2]
    if np.any(np.isnan(grid)):
        raise CycleFormatError("duplicate samples leave holes in the map grid")
    if limits is None:
        omega_max = float(omega[-1])
        t_max = float(np.max(np.abs(torque)))
        limits = MotorLimits(omega_max, t_max, omega_max * t_max)
    return MotorMap(omega=omega, torque=torque, loss=grid, limits=limits)


# ---------------------------------------------------------------------------
# fitted models


def default_power_grid(limits: MotorLimits, n: int = 101) -> np.ndarray:
    """Uniform fitting grid over [-P_max, P_max]; odd n puts a node at P = 0."""
    if n < 2:
        raise ValidationError("power grid needs at least 2 points")
    return np.linspace(-limits.P_max, limits.P_max, n)


class _LossModelBase:
    def _check_hull(self, P):
        grid = self.power_grid
        tol = _HULL_TOL * max(1.0, abs(grid[0]), abs(grid[-1]))
        P = np.asarray(P, dtype=float)
        if np.any(P < grid[0] - tol) or np.any(P > grid[-1] + tol):
            bad = float(np.ravel(P)[int(np.argmax((P < grid[0] - tol) | (P > grid[-1] + tol)))])
            raise ExtrapolationError(
                f"power {bad / 1e3:.3f} kW outside the fitted range "
                f"[{grid[0] / 1e3:.3f}, {grid[-1] / 1e3:.3f}] kW"
            )
        return np.clip(P, grid[0], grid[-1])


@dataclass(frozen=True)
class FractionalLossModel(_LossModelBase):
    """Power-indexed coefficients of the fractional loss model."""

    power_grid: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    limits: MotorLimits

    kind = "fractional"

    def __post_init__(self):
        for name in ("power_grid", "p0", "p1", "p2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (len(self.power_grid) == len(self.p0) == len(self.p1) == len(self.p2)):
            raise ValidationError("coefficient arrays must match the power grid")
        if np.any(np.diff(self.power_grid) <= 0):
            raise ValidationError("power grid must be strictly increasing")
        if np.any(self.p0 < 0) or np.any(self.p2 < 0):
            raise ValidationError("p0 and p2 must be non-negative")
        at_zero = np.isclose(self.power_grid, 0.0, atol=1e-9)
        if np.any(at_zero) and np.any(self.p0[at_zero] != 0.0):
            raise ValidationError("p0 must vanish at P = 0")

    def coefficients(self, P):
        P = self._check_hull(P)
        g = self.power_grid
        return np.interp(P, g, self.p0), np.interp(P, g, self.p1), np.interp(P, g, self.p2)

    def loss(self, P, omega):
        """Loss in W; +inf where omega = 0 but the power is nonzero."""
        P, omega = np.broadcast_arrays(np.asarray(P, float), np.asarray(omega, float))
        if np.any(omega < 0):
            raise ValidationError("motor speed must be non-negative")
        p0, p1, p2 = self.coefficients(P)
        frac = np.where(
            omega > 0,
            p0 / np.where(omega > 0, omega, 1.0),
            np.where(p0 > 0, np.inf, 0.0),
        )
        return frac + p1 + p2 * omega

    def scaled(self, s: float) -> "FractionalLossModel":
        if not s > 0:
            raise ValidationError("scale factor must be positive")
        return FractionalLossModel(
            power_grid=s * self.power_grid,
            p0=s * self.p0,
            p1=s * self.p1,
            p2=s * self.p2,
            limits=self.limits.scaled(s),
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "power_grid": self.power_grid.tolist(),
            "p0": self.p0.tolist(),
            "p1": self.p1.tolist(),
            "p2": self.p2.tolist(),
            "limits": self.limits.to_dict(),
        }


@dataclass(frozen=True)
class QuadraticLossModel(_LossModelBase):
    """Power-indexed coefficients of the quadratic loss model."""

    power_grid: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    q3: np.ndarray
    limits: MotorLimits

    kind = "quadratic"

    def __post_init__(self):
        for name in ("power_grid", "q1", "q2", "q3"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (len(self.power_grid) == len(self.q1) == len(self.q2) == len(self.q3)):
            raise ValidationError("coefficient arrays must match the power grid")
        if np.any(np.diff(self.power_grid) <= 0):
            raise ValidationError("power grid must be strictly increasing")
        if np.any(self.q3 < 0):
            raise ValidationError("q3 must be non-negative")

    def coefficients(self, P):
        P = self._check_hull(P)
        g = self.power_grid
        return np.interp(P, g, self.q1), np.interp(P, g, self.q2), np.interp(P, g, self.q3)

    def loss(self, P, omega):
        P, omega = np.broadcast_arrays(np.asarray(P, float), np.asarray(omega, float))
        if np.any(omega < 0):
            raise ValidationError("motor speed must be non-negative")
        q1, q2, q3 = self.coefficients(P)
        return q1 + q2 * omega + q3 * omega**2

    def scaled(self, s: float) -> "QuadraticLossModel":
        if not s > 0:
            raise ValidationError("scale factor must be positive")
        return QuadraticLossModel(
            power_grid=s * self.power_grid,
            q1=s * self.q1,
            q2=s * self.q2,
            q3=s * self.q3,
            limits=self.limits.scaled(s),
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "power_grid": self.power_grid.tolist(),
            "q1": self.q1.tolist(),
            "q2": self.q2.tolist(),
            "q3": self.q3.tolist(),
            "limits": self.limits.to_dict(),
        }


def model_from_dict(raw: dict):
    limits = MotorLimits.from_dict(raw["limits"])
    if raw["kind"] == "fractional":
        return FractionalLossModel(raw["power_grid"], raw["p0"], raw["p1"], raw["p2"], limits)
    if raw["kind"] == "quadratic":
        return QuadraticLossModel(raw["power_grid"], raw["q1"], raw["q2"], raw["q3"], limits)
    raise ValidationError(f"unknown model kind {raw.get('kind')!r}")


def loss(model, P_m, omega):
    """Evaluate a fitted model; see the model classes for the conventions."""
    return model.loss(P_m, omega)


def scale(model, s: float):
    """Scale a fitted model and its limits linearly with maximum power."""
    return model.scaled(s)


# ---------------------------------------------------------------------------
# fitting


def _contour_samples(motor_map: MotorMap, P: float):
    """Map samples interpolated onto the constant-power contour omega*torque = P."""
    omega = motor_map.omega
    torque = motor_map.torque
    t_tol = 1e-9 * max(1.0, abs(torque[0]), abs(torque[-1]))
    ws, ls = [], []
    for i, w in enumerate(omega):
        if P == 0.0:
            t_req = 0.0
        elif w <= 0.0:
            continue
        else:
            t_req = P / w
        if t_req < torque[0] - t_tol or t_req > torque[-1] + t_tol:
            continue
        ws.append(w)
        ls.append(float(np.interp(t_req, torque, motor_map.loss[i, :])))
    return np.asarray(ws), np.asarray(ls)


def _constrained_lstsq(A: np.ndarray, y: np.ndarray, nonneg: tuple, pinned: tuple):
    """Least squares with selected coefficients constrained >= 0 or pinned to 0.

    With at most two sign constraints the active set can be enumerated
    outright: every subset of the constrained coefficients is tried pinned to
    zero and the feasible solution with the smallest residual wins.
    """
    n = A.shape[1]
    subsets = [()]
    for k in nonneg:
        subsets = subsets + [s + (k,) for s in subsets]
    best = None
    for extra in subsets:
        zeroed = set(pinned) | set(extra)
        free = [j for j in range(n) if j not in zeroed]
        coef = np.zeros(n)
        if free:
            sol, *_ = np.linalg.lstsq(A[:, free], y, rcond=None)
            coef[free] = sol
        if any(coef[k] < -1e-12 for k in nonneg):
            continue
        for k in nonneg:
            coef[k] = max(coef[k], 0.0)
        resid = float(np.sum((A @ coef - y) ** 2))
        if best is None or resid < best[1] - 1e-15:
            best = (coef, resid)
    return best


def fit_fractional(motor_map: MotorMap, power_grid=None) -> FractionalLossModel:
    """Fit the fractional model on constant-power contours of a map.

    Each grid power needs at least three contour samples; p0 and p2 are kept
    non-negative and p0 is pinned to zero on the P = 0 contour.
    """
    if power_grid is None:
        power_grid = default_power_grid(motor_map.limits)
    power_grid = np.asarray(power_grid, dtype=float)
    p0 = np.zeros_like(power_grid)
    p1 = np.zeros_like(power_grid)
    p2 = np.zeros_like(power_grid)
    for k, P in enumerate(power_grid):
        ws, ls = _contour_samples(motor_map, float(P))
        if len(ws) < 3:
            raise FitError(
                f"only {len(ws)} map samples on the {P / 1e3:.2f} kW contour; need >= 3"
            )
        if P == 0.0:
            # the p0/omega column is pinned; omega = 0 rows stay well-defined
            A = np.column_stack([np.zeros_like(ws), np.ones_like(ws), ws])
            coef, _ = _constrained_lstsq(A, ls, nonneg=(2,), pinned=(0,))
        else:
            A = np.column_stack([1.0 / ws, np.ones_like(ws), ws])
            coef, _ = _constrained_lstsq(A, ls, nonneg=(0, 2), pinned=())
        p0[k], p1[k], p2[k] = coef
    return FractionalLossModel(power_grid, p0, p1, p2, motor_map.limits)


def fit_quadratic(motor_map: MotorMap, power_grid=None) -> QuadraticLossModel:
    """Fit the quadratic model (basis 1, omega, omega^2 with q3 >= 0)."""
    if power_grid is None:
        power_grid = default_power_grid(motor_map.limits)
    power_grid = np.asarray(power_grid, dtype=float)
    q1 = np.zeros_like(power_grid)
    q2 = np.zeros_like(power_grid)
    q3 = np.zeros_like(power_grid)
    for k, P in enumerate(power_grid):
        ws, ls = _contour_samples(motor_map, float(P))
        if len(ws) < 3:
            raise FitError(
                f"only {len(ws)} map samples on the {P / 1e3:.2f} kW contour; need >= 3"
            )
        A = np.column_stack([np.ones_like(ws), ws, ws**2])
        coef, _ = _constrained_lstsq(A, ls, nonneg=(2,), pinned=())
        q1[k], q2[k], q3[k] = coef
    return QuadraticLossModel(power_grid, q1, q2, q3, motor_map.limits)


def normalized_rmse(model, motor_map: MotorMap) -> float:
    """RMS loss-prediction error over the map, relative to the RMS DC power.

    Only samples whose power lies inside the model's fitted range (and with
    nonzero speed when power is nonzero) are evaluated; this mirrors the
    operating region of a drive cycle.
    """
    W, T = np.meshgrid(motor_map.omega, motor_map.torque, indexing="ij")
    P = W * T
    grid = model.power_grid
    ok = (P >= grid[0]) & (P <= grid[-1]) & ((W > 0) | (P == 0))
    pred = model.loss(P[ok], W[ok])
    err = pred - motor_map.loss[ok]
    dc = P[ok] + motor_map.loss[ok]
    rms_dc = float(np.sqrt(np.mean(dc**2)))
    if rms_dc == 0.0:
        return float(np.sqrt(np.mean(err**2)))
    return float(np.sqrt(np.mean(err**2)) / rms_dc)


# ---------------------------------------------------------------------------
# per-step ratio coefficients


@dataclass(frozen=True)
class StepCoefficients:
    """Per-step loss-vs-ratio coefficients plus feasibility bounds.

    form "fractional": loss(gamma) = d0/gamma + d1 + d2*gamma
    form "quadratic":  loss(gamma) = d0 + d1*gamma + d2*gamma^2

    Stationary steps (v = 0) carry a ratio-independent loss in the constant
    slot and are excluded from all ratio sums and bounds; their feasibility
    interval is (0, +inf).
    """

    dt: float
    d0: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    gamma_min: np.ndarray
    gamma_max: np.ndarray
    stationary: np.ndarray
    form: str = "fractional"

    def __post_init__(self):
        for name in ("d0", "d1", "d2", "gamma_min", "gamma_max"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "stationary", np.asarray(self.stationary, dtype=bool))
        n = len(self.d0)
        for name in ("d1", "d2", "gamma_min", "gamma_max", "stationary"):
            if len(getattr(self, name)) != n:
                raise ValidationError("step coefficient arrays must share one length")
        if self.form not in ("fractional", "quadratic"):
            raise ValidationError(f"unknown coefficient form {self.form!r}")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if np.any(self.d2 < 0):
            raise ValidationError("d2 must be non-negative")
        if self.form == "fractional" and np.any(self.d0 < 0):
            raise ValidationError("d0 must be non-negative")
        moving = ~self.stationary
        if np.any(self.gamma_min[moving] > self.gamma_max[moving]):
            t_bad = int(np.flatnonzero(moving)[np.argmax(
                self.gamma_min[moving] > self.gamma_max[moving]
            )])
            raise ValidationError(f"empty ratio interval at step {t_bad}")

    def __len__(self) -> int:
        return len(self.d0)

    @property
    def constant_loss(self) -> np.ndarray:
        """Ratio-independent loss power on stationary steps (0 elsewhere)."""
        slot = self.d1 if self.form == "fractional" else self.d0
        return np.where(self.stationary, slot, 0.0)

    def loss_at(self, gamma) -> np.ndarray:
        """Loss power per step at the given ratio(s); stationary steps are constant."""
        gamma = np.broadcast_to(np.asarray(gamma, dtype=float), self.d0.shape)
        if self.form == "fractional":
            safe = np.where(gamma > 0, gamma, 1.0)
            value = self.d0 / safe + self.d1 + self.d2 * gamma
            value = np.where((gamma <= 0) & (self.d0 > 0), np.inf, value)
            const = self.d1
        else:
            value = self.d0 + self.d1 * gamma + self.d2 * gamma**2
            const = self.d0
        return np.where(self.stationary, const, value)

    def unconstrained_argmin(self) -> np.ndarray:
        """Per-step minimizer of the loss over gamma > 0, before clamping.

        Fractional: sqrt(d0/d2), with d2 = 0 treated as +inf and d0 = 0 as 0.
        Quadratic: -d1/(2*d2), falling toward the bound given by the slope
        sign when d2 = 0.
        """
        if self.form == "fractional":
            with np.errstate(divide="ignore", invalid="ignore"):
                uc = np.sqrt(np.where(self.d2 > 0, self.d0 / np.where(self.d2 > 0, self.d2, 1.0),
                                      np.where(self.d0 > 0, np.inf, 0.0)))
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                uc = np.where(
                    self.d2 > 0,
                    -self.d1 / np.where(self.d2 > 0, 2.0 * self.d2, 1.0),
                    np.where(self.d1 >= 0, -np.inf, np.inf),
                )
        return np.where(self.stationary, 0.0, uc)

    def with_bounds(self, gamma_min, gamma_max) -> "StepCoefficients":
        """Attach per-step feasibility bounds (stationary steps stay (0, inf))."""
        gamma_min = np.where(self.stationary, 0.0, np.asarray(gamma_min, dtype=float))
        gamma_max = np.where(self.stationary, np.inf, np.asarray(gamma_max, dtype=float))
        return replace(self, gamma_min=gamma_min, gamma_max=gamma_max)


def step_coefficients(model, P_m, v, r_w: float, dt: float = 1.0) -> StepCoefficients:
    """Translate a fitted model into per-step ratio coefficients.

    The wheel speed v/r_w converts speed-domain coefficients to the ratio
    domain.  Steps with v = 0 are flagged stationary: power is forced to zero
    there and the loss reduces to the model's zero-power, zero-speed value.
    """
    P_m = np.asarray(P_m, dtype=float)
    v = np.asarray(v, dtype=float)
    if P_m.shape != v.shape:
        raise ValidationError("P_m and v trajectories must share one length")
    if not r_w > 0:
        raise ValidationError("wheel radius must be positive")
    stationary = v <= 0.0
    wheel = np.where(stationary, 1.0, v / r_w)
    P_eff = np.where(stationary, 0.0, P_m)
    n = len(P_m)
    if isinstance(model, FractionalLossModel):
        p0, p1, p2 = model.coefficients(P_eff)
        d0 = np.where(stationary, 0.0, p0 / wheel)
        d1 = p1
        d2 = np.where(stationary, 0.0, p2 * wheel)
        form = "fractional"
    elif isinstance(model, QuadraticLossModel):
        q1, q2, q3 = model.coefficients(P_eff)
        d0 = q1
        d1 = np.where(stationary, 0.0, q2 * wheel)
        d2 = np.where(stationary, 0.0, q3 * wheel**2)
        form = "quadratic"
    else:
        raise ValidationError(f"unsupported model type {type(model).__name__}")
    return StepCoefficients(
        dt=dt,
        d0=d0,
        d1=d1,
        d2=d2,
        gamma_min=np.zeros(n),
        gamma_max=np.full(n, np.inf),
        stationary=stationary,
        form=form,
    )
