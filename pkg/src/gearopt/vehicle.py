"""Vehicle parameters, the mass model and wheel-to-motor demand conversion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .drivecycle import WheelDemand
from .errors import InfeasibleError, ValidationError

if TYPE_CHECKING:
    from .motor import MotorLimits

TRANSMISSION_KINDS = ("fgt", "mgt", "cvt")


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the vehicle and transmission technologies.

    Defaults reproduce the bundled parameter file
    (``gearopt/data/vehicle_default.json``).  ``alpha0`` is the stand-still
    towing slope in rad, ``c_shift`` the per-gear-change energy cost in J,
    ``epsilon`` the relative cost tolerance of the iterative MGT solver and
    ``rho_m`` the specific motor mass in kg/kW.
    """

    m0: float = 1450.0
    m_g0: float = 50.0
    m_gw: float = 5.0
    m_cvt: float = 80.0
    eta_fgt: float = 0.98
    eta_mgt: float = 0.98
    eta_cvt: float = 0.96
    r_w: float = 0.316
    c_d: float = 0.29
    A_f: float = 0.725
    rho_air: float = 1.25
    c_r: float = 0.02
    g: float = 9.81
    alpha0: float = math.radians(25.0)
    c_shift: float = 300.0
    epsilon: float = 1e-6
    rho_m: float = 0.9

    def __post_init__(self):
        for name in ("m0", "m_g0", "m_gw", "m_cvt"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        for name in ("eta_fgt", "eta_mgt", "eta_cvt"):
            eta = getattr(self, name)
            if not 0.0 < eta <= 1.0:
                raise ValidationError(f"{name} must lie in (0, 1]")
        if not self.r_w > 0:
            raise ValidationError("r_w must be positive")
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "VehicleParams":
        """Build params from a JSON-style dict; accepts ``alpha0_deg`` in degrees."""
        data = dict(raw)
        if "alpha0_deg" in data:
            data["alpha0"] = math.radians(data.pop("alpha0_deg"))
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown vehicle parameters: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "VehicleParams":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def default(cls) -> "VehicleParams":
        """Parameters from the bundled default file."""
        text = resources.files("gearopt.data").joinpath("vehicle_default.json").read_text()
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        out = {f: getattr(self, f) for f in self.__dataclass_fields__ if f != "alpha0"}
        out["alpha0_deg"] = math.degrees(self.alpha0)
        return out


@dataclass(frozen=True)
class TransmissionSpec:
    """Transmission technology choice: fgt, mgt (n_gears >= 2) or cvt."""

    kind: str
    n_gears: int = 1
    gamma_cvt_min: float = 2.0
    gamma_cvt_max: float = 15.0

    def __post_init__(self):
        if self.kind not in TRANSMISSION_KINDS:
            raise ValidationError(f"unknown transmission kind {self.kind!r}")
        if self.kind == "mgt" and self.n_gears < 2:
            raise ValidationError("an MGT needs at least 2 gears")
        if self.kind == "fgt" and self.n_gears != 1:
            raise ValidationError("an FGT has exactly one gear")
        if self.kind == "cvt" and not 0 < self.gamma_cvt_min <= self.gamma_cvt_max:
            raise ValidationError("CVT ratio limits must satisfy 0 < min <= max")

    @classmethod
    def parse(cls, text: str, **cvt_bounds) -> "TransmissionSpec":
        """Parse a CLI-style spec: ``fgt``, ``cvt`` or ``mgt:N``.

        ``mgt:1`` degenerates to an FGT.
        """
        text = text.strip().lower()
        if text in ("fgt", "cvt"):
            return cls(kind=text, **cvt_bounds) if text == "cvt" else cls(kind="fgt")
        if text.startswith("mgt:"):
            try:
                n = int(text.split(":", 1)[1])
            except ValueError:
                raise ValidationError(f"bad gear count in {text!r}") from None
            if n < 1:
                raise ValidationError("gear count must be at least 1")
            if n == 1:
                return cls(kind="fgt")
            return cls(kind="mgt", n_gears=n)
        raise ValidationError(f"unknown transmission spec {text!r}")

    def eta(self, params: VehicleParams) -> float:
        return {
            "fgt": params.eta_fgt,
            "mgt": params.eta_mgt,
            "cvt": params.eta_cvt,
        }[self.kind]

    def gearbox_mass(self, params: VehicleParams) -> float:
        if self.kind == "cvt":
            return params.m_cvt
        return params.m_g0 + params.m_gw * self.n_gears

    @property
    def label(self) -> str:
        return self.kind if self.kind != "mgt" else f"mgt:{self.n_gears}"


@dataclass(frozen=True)
class EmDemand:
    """Motor-side demand after transmission efficiency and brake saturation.

    ``P_m`` is the motor mechanical power (W), ``T_mw`` the motor torque
    referred to the wheel side (N*m, i.e. before dividing by the gear ratio)
    and ``P_brake`` the friction-brake power at the wheels (W, <= 0).
    """

    P_m: np.ndarray
    T_mw: np.ndarray
    P_brake: np.ndarray

    def __len__(self) -> int:
        return len(self.P_m)


def total_mass(params: VehicleParams, spec: TransmissionSpec, P_m_max: float) -> float:
    """Vehicle mass: base plus gearbox plus rho_m kg per kW of motor rating."""
    if not P_m_max > 0:
        raise ValidationError("P_m_max must be positive")
    return params.m0 + spec.gearbox_mass(params) + params.rho_m * P_m_max / 1000.0


def em_demand(
    demand: WheelDemand,
    spec: TransmissionSpec,
    params: VehicleParams,
    limits: "MotorLimits",
) -> EmDemand:
    """Convert wheel demand to motor demand and saturate regenerative braking.

    Traction is penalized by the gearbox efficiency (P_m = P_t / eta), braking
    is discounted (P_m = P_t * eta).  Where the braking power would exceed the
    motor rating, the motor is held at -P_m_max and the remaining wheel-side
    power goes to the friction brakes; the wheel-referred torque is rescaled
    consistently on those steps.  Any traction step beyond the rating raises
    :class:`InfeasibleError` (the motor is underpowered for the cycle).
    """
    eta = spec.eta(params)
    P_m = demand.P_t * eta ** (-np.sign(demand.P_t))
    T_mw = demand.T_t_wheel * eta ** (-np.sign(demand.T_t_wheel))

    over = (demand.P_t > 0) & (P_m > limits.P_max * (1.0 + 1e-12))
    if np.any(over):
        t_bad = int(np.argmax(over))
        raise InfeasibleError(
            "motor underpowered for cycle: step "
            f"{t_bad} needs {P_m[t_bad] / 1e3:.2f} kW > P_m_max = "
            f"{limits.P_max / 1e3:.2f} kW"
        )

    sat = P_m < -limits.P_max
    P_brake = np.zeros_like(P_m)
    if np.any(sat):
        scale = np.where(sat, -limits.P_max / np.where(sat, P_m, 1.0), 1.0)
        P_sat = np.where(sat, -limits.P_max, P_m)
        P_brake = np.where(sat, demand.P_t - P_sat / eta, 0.0)
        T_mw = T_mw * scale
        P_m = P_sat
    return EmDemand(P_m=P_m, T_mw=T_mw, P_brake=P_brake)
