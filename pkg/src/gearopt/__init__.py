"""Energy-optimal transmission design and control for central-drive EVs."""

from .drivecycle import (
    DriveCycle,
    WheelDemand,
    load_cycle,
    synthesize_cycle,
    wheel_demand,
    write_cycle,
)
from .errors import (
    CycleFormatError,
    EnvelopeError,
    ExtrapolationError,
    FitError,
    GearoptError,
    InfeasibleError,
    ValidationError,
)
from .motor import (
    FractionalGroundTruth,
    FractionalLossModel,
    MotorLimits,
    MotorMap,
    PhysicalGroundTruth,
    QuadraticGroundTruth,
    QuadraticLossModel,
    StepCoefficients,
    default_power_grid,
    fit_fractional,
    fit_quadratic,
    load_map,
    loss,
    normalized_rmse,
    scale,
    step_coefficients,
    synth_map,
    write_map_csv,
)
from .optimizer import (
    DesignSolution,
    GearTrajectory,
    gearshift_dp,
    objective,
    optimize_cvt,
    optimize_fgt,
    optimize_mgt,
    per_step_bounds,
    ratio_update,
    towing_ratio_floor,
)
from .oracle import brute_force_mgt, grid_oracle_scalar, ratio_grid_for
from .simulate import SimulationResult, simulate, write_trace_csv
from .sizing import SweepRow, design_transmission, size_sweep, write_sweep_csv
from .vehicle import (
    EmDemand,
    TransmissionSpec,
    VehicleParams,
    em_demand,
    total_mass,
)

__version__ = "0.1.0"
