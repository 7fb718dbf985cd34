"""Drive-cycle ingestion, synthesis and wheel-level demand.

Cycles are uniformly sampled time series of vehicle speed, acceleration and
road grade.  The CSV interchange format is ``t,v,alpha_deg[,a]`` with ``t``
in seconds, ``v`` in m/s, ``alpha_deg`` in degrees and the optional ``a``
column in m/s^2; when ``a`` is absent it is reconstructed by central finite
differences of the speed trace (one-sided at the endpoints).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import CycleFormatError, ValidationError

if TYPE_CHECKING:
    from .vehicle import VehicleParams

CYCLE_PRESETS = ("urban", "highway", "mixed")

_DT_TOL = 1e-9


@dataclass(frozen=True)
class DriveCycle:
    """Uniformly sampled speed / acceleration / grade trajectory.

    All arrays share length T+1 (at least 2); ``dt`` is the sample spacing
    in seconds, ``v`` speed in m/s, ``a`` acceleration in m/s^2 and
    ``alpha`` road grade in rad.  Speeds must be non-negative.
    """

    dt: float
    v: np.ndarray
    a: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        a = np.asarray(self.a, dtype=float)
        alpha = np.asarray(self.alpha, dtype=float)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "alpha", alpha)
        if not (v.ndim == a.ndim == alpha.ndim == 1):
            raise ValidationError("cycle trajectories must be 1-D")
        if not (len(v) == len(a) == len(alpha)):
            raise ValidationError("v, a and alpha must have equal length")
        if len(v) < 2:
            raise ValidationError("a drive cycle needs at least two samples")
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if np.any(v < 0):
            bad = int(np.argmax(v < 0))
            raise ValidationError(f"negative speed at sample {bad}")

    @property
    def n_samples(self) -> int:
        return len(self.v)

    @property
    def horizon(self) -> int:
        """T, the number of steps (samples minus one)."""
        return len(self.v) - 1

    @property
    def time(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    @property
    def duration(self) -> float:
        return self.horizon * self.dt


@dataclass(frozen=True)
class WheelDemand:
    """Per-sample tractive power, force and wheel torque for a given mass."""

    P_t: np.ndarray  # traction power, W
    F_t: np.ndarray  # total tractive force, N
    T_t_wheel: np.ndarray  # wheel torque, N*m

    def __len__(self) -> int:
        return len(self.P_t)


def load_cycle(source) -> DriveCycle:
    """Parse a cycle CSV (path or open text stream) into a :class:`DriveCycle`.

    Raises :class:`CycleFormatError` with a line number on malformed rows and
    :class:`ValidationError` on non-uniform timestamps or negative speeds.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_cycle(fh)

    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise CycleFormatError("empty cycle file") from None
    if header not in (["t", "v", "alpha_deg"], ["t", "v", "alpha_deg", "a"]):
        raise CycleFormatError(
            f"expected header t,v,alpha_deg[,a], got {','.join(header)}", line=1
        )
    has_a = len(header) == 4

    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != len(header):
            raise CycleFormatError(
                f"expected {len(header)} fields, got {len(row)}", line=lineno
            )
        try:
            rows.append([float(x) for x in row])
        except ValueError:
            raise CycleFormatError(f"non-numeric value in {row!r}", line=lineno) from None
    if len(rows) < 2:
        raise CycleFormatError("need at least two data rows")

    data = np.asarray(rows, dtype=float)
    t = data[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=_DT_TOL, atol=_DT_TOL):
        raise ValidationError("timestamps must be strictly increasing and uniform")
    dt = float(steps[0])
    v = data[:, 1]
    if np.any(v < 0):
        raise ValidationError(f"negative speed at t={t[int(np.argmax(v < 0))]:g} s")
    alpha = np.deg2rad(data[:, 2])
    a = data[:, 3] if has_a else np.gradient(v, dt, edge_order=1)
    return DriveCycle(dt=dt, v=v, a=a, alpha=alpha)


def write_cycle(cycle: DriveCycle, dest) -> None:
    """Write a cycle in the CSV schema understood by :func:`load_cycle`."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_cycle(cycle, fh)
        return
    dest.write("t,v,alpha_deg,a\n")
    alpha_deg = np.rad2deg(cycle.alpha)
    for k in range(cycle.n_samples):
        dest.write(
            f"{k * cycle.dt:.10g},{cycle.v[k]:.10g},{alpha_deg[k]:.10g},{cycle.a[k]:.10g}\n"
        )


def wheel_demand(cycle: DriveCycle, m_v: float, params: "VehicleParams") -> WheelDemand:
    """Wheel-level force, power and torque needed to follow the cycle.

    F = m_v * (c_r*g*cos(alpha) + g*sin(alpha) + a) + 0.5*rho*c_d*A_f*v^2 and
    P = F*v; the wheel torque is the full tractive force (drag included)
    times the wheel radius.
    """
    if not m_v > 0:
        raise ValidationError("vehicle mass must be positive")
    v, a, alpha = cycle.v, cycle.a, cycle.alpha
    per_kg = params.c_r * params.g * np.cos(alpha) + params.g * np.sin(alpha) + a
    drag = 0.5 * params.rho_air * params.c_d * params.A_f * v**2
    F_t = m_v * per_kg + drag
    return WheelDemand(P_t=F_t * v, F_t=F_t, T_t_wheel=F_t * params.r_w)


def synthesize_cycle(
    preset: str, duration: float, seed: int = 0, dt: float = 1.0
) -> DriveCycle:
    """Generate a deterministic synthetic cycle for a named preset.

    ``duration`` is the covered time span in seconds; samples sit at
    0, dt, ..., duration, so the cycle must span at least two steps.
    Presets: "urban" (low speed, frequent stops), "highway" (sustained high
    speed) and "mixed" (urban, rural and highway phases back to back).
    """
    if preset not in CYCLE_PRESETS:
        raise ValidationError(f"unknown preset {preset!r}; choose from {CYCLE_PRESETS}")
    if not dt > 0:
        raise ValidationError("dt must be positive")
    steps = int(round(duration / dt))
    if steps < 2:
        raise ValidationError("duration must span at least two steps")

    rng = np.random.default_rng(seed)
    if preset == "urban":
        v = _urban_speed(steps + 1, dt, rng)
    elif preset == "highway":
        v = _highway_speed(steps + 1, dt, rng)
    else:
        n = steps + 1
        n_urban = max(2, n // 3)
        n_rural = max(2, n // 3)
        n_high = n - n_urban - n_rural + 2
        parts = [
            _urban_speed(n_urban, dt, rng),
            _rural_speed(n_rural, dt, rng),
            _highway_speed(n_high, dt, rng),
        ]
        # phases reach zero speed at both ends, so joins are smooth
        v = np.concatenate([parts[0], parts[1][1:], parts[2][1:]])[: steps + 1]

    a = np.gradient(v, dt, edge_order=1)
    return DriveCycle(dt=dt, v=v, a=a, alpha=np.zeros_like(v))


def _micro_trips(n, dt, rng, v_lo, v_hi, a_lo, a_hi, idle_rng, cruise_rng, jitter):
    """Stop-and-go speed profile built from randomized micro-trips."""
    v = np.zeros(n)
    i = 0
    while i < n - 1:
        i = min(i + int(rng.integers(*idle_rng)), n - 1)
        target = rng.uniform(v_lo, v_hi)
        accel = rng.uniform(a_lo, a_hi)
        while i < n - 1 and v[i] < target:
            v[i + 1] = min(target, v[i] + accel * dt)
            i += 1
        for _ in range(int(rng.integers(*cruise_rng))):
            if i >= n - 1:
                break
            v[i + 1] = max(0.0, v[i] + rng.normal(0.0, jitter))
            i += 1
        decel = rng.uniform(0.9, 1.6)
        while i < n - 1 and v[i] > 0:
            v[i + 1] = max(0.0, v[i] - decel * dt)
            i += 1
    v[n - 1] = 0.0
    return v


def _urban_speed(n, dt, rng):
    return _micro_trips(
        n, dt, rng,
        v_lo=6.0, v_hi=14.0, a_lo=0.8, a_hi=1.4,
        idle_rng=(3, 10), cruise_rng=(8, 35), jitter=0.15,
    )


def _rural_speed(n, dt, rng):
    return _micro_trips(
        n, dt, rng,
        v_lo=14.0, v_hi=21.0, a_lo=0.6, a_hi=1.0,
        idle_rng=(2, 6), cruise_rng=(25, 70), jitter=0.12,
    )


def _highway_speed(n, dt, rng):
    """Ramp up, hold a slowly varying high speed, ramp back down."""
    v = np.zeros(n)
    v_top = rng.uniform(27.0, 31.0)
    i = 0
    while i < n - 1 and v[i] < v_top:
        # acceleration tapers off with speed, like a power-limited vehicle
        accel = max(0.25, 1.3 * (1.0 - v[i] / 38.0))
        v[i + 1] = min(v_top, v[i] + accel * dt)
        i += 1
    hold_end = max(i, n - 1 - int(np.ceil(v_top / (1.1 * dt))))
    t_rel = np.arange(n) * dt
    while i < hold_end:
        drift = 2.0 * np.sin(2.0 * np.pi * t_rel[i] / 240.0)
        v[i + 1] = np.clip(v_top + drift + rng.normal(0.0, 0.12), 15.0, 36.0)
        i += 1
    while i < n - 1:
        v[i + 1] = max(0.0, v[i] - 1.1 * dt)
        i += 1
    v[n - 1] = 0.0
    return v
