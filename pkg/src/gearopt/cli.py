"""Command-line front end.

Subcommands: synth-cycle, synth-map, fit-motor, optimize, size-sweep,
oracle, simulate.  Structured results go to JSON (with the fully resolved
configuration embedded for reproducibility), tabular results to CSV, and
``--plots DIR`` renders figures next to them.  Exit codes: 0 ok, 2
parse/validation, 3 fit failure, 4 infeasible, 5 simulation validation.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import report
from .drivecycle import (
    CYCLE_PRESETS,
    load_cycle,
    synthesize_cycle,
    wheel_demand,
    write_cycle,
)
from .errors import (
    CycleFormatError,
    EnvelopeError,
    FitError,
    GearoptError,
    InfeasibleError,
    ValidationError,
)
from .motor import (
    GROUND_TRUTHS,
    MotorLimits,
    default_power_grid,
    fit_fractional,
    fit_quadratic,
    load_map,
    model_from_dict,
    normalized_rmse,
    step_coefficients,
    synth_map,
    write_map_csv,
)
from .optimizer import (
    DesignSolution,
    GearTrajectory,
    per_step_bounds,
    towing_ratio_floor,
)
from .oracle import brute_force_mgt, ratio_grid_for
from .simulate import simulate, write_trace_csv
from .sizing import design_transmission, size_sweep, write_sweep_csv
from .vehicle import TransmissionSpec, VehicleParams, em_demand, total_mass


def _round_floats(obj):
    """Round floats to 12 significant digits for stable serialization."""
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json(payload: dict, path) -> None:
    text = json.dumps(_round_floats(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def solution_to_dict(sol: DesignSolution) -> dict:
    out = {
        "kind": sol.kind,
        "ratios": list(sol.ratios),
        "J": sol.J,
        "loss_energy": sol.loss_energy,
        "shift_cost": sol.shift_cost,
        "shift_count": sol.shift_count,
        "iterations": sol.iterations,
        "total_energy": sol.total_energy,
        "vehicle_mass": sol.vehicle_mass,
        "P_m_max": sol.P_m_max,
        "gamma_trajectory": sol.gamma_trajectory.tolist(),
        "step_loss": sol.step_loss.tolist(),
        "gear_trajectory": (
            sol.gear_trajectory.gears.tolist() if sol.gear_trajectory else None
        ),
    }
    return out


def solution_from_dict(raw: dict) -> DesignSolution:
    gears = raw.get("gear_trajectory")
    return DesignSolution(
        kind=raw["kind"],
        ratios=tuple(raw["ratios"]),
        gamma_trajectory=np.asarray(raw["gamma_trajectory"], dtype=float),
        J=float(raw["J"]),
        loss_energy=float(raw["loss_energy"]),
        shift_cost=float(raw["shift_cost"]),
        shift_count=int(raw["shift_count"]),
        step_loss=np.asarray(raw["step_loss"], dtype=float),
        gear_trajectory=GearTrajectory(gears=np.asarray(gears)) if gears else None,
        iterations=raw.get("iterations"),
        total_energy=raw.get("total_energy"),
        vehicle_mass=raw.get("vehicle_mass"),
        P_m_max=raw.get("P_m_max"),
    )


def _load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def _parse_spec(args) -> TransmissionSpec:
    cvt_bounds = {}
    if getattr(args, "cvt_min", None) is not None:
        cvt_bounds["gamma_cvt_min"] = args.cvt_min
    if getattr(args, "cvt_max", None) is not None:
        cvt_bounds["gamma_cvt_max"] = args.cvt_max
    return TransmissionSpec.parse(args.transmission, **cvt_bounds)


def _scaled_model(model, power_kw):
    if power_kw is None:
        return model
    return model.scaled(power_kw * 1e3 / model.limits.P_max)


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_synth_cycle(args) -> int:
    cycle = synthesize_cycle(args.preset, args.duration, seed=args.seed, dt=args.dt)
    write_cycle(cycle, args.out)
    print(f"wrote {args.out}: {cycle.n_samples} samples, dt={cycle.dt:g} s")
    return 0


def _cmd_synth_map(args) -> int:
    limits = MotorLimits(args.omega_max, args.t_max, args.p_max_kw * 1e3)
    gt = GROUND_TRUTHS[args.ground_truth]()
    motor_map = synth_map(gt, limits, n_speed=args.n_speed, n_torque=args.n_torque)
    write_map_csv(motor_map, args.out)
    print(
        f"wrote {args.out}: {args.n_speed}x{args.n_torque} grid, "
        f"{args.ground_truth} ground truth"
    )
    if args.plots:
        for p in report.plot_map(motor_map, args.plots):
            print(f"wrote {p}")
    return 0


def _cmd_fit_motor(args) -> int:
    limits = None
    if args.p_max_kw is not None or args.omega_max is not None or args.t_max is not None:
        probe = load_map(args.map)
        limits = MotorLimits(
            args.omega_max if args.omega_max is not None else probe.limits.omega_max,
            args.t_max if args.t_max is not None else probe.limits.T_max,
            args.p_max_kw * 1e3 if args.p_max_kw is not None else probe.limits.P_max,
        )
    motor_map = load_map(args.map, limits=limits)
    if args.grid < 2:
        raise FitError("a power grid with fewer than 2 points cannot carry a fit")
    grid = default_power_grid(motor_map.limits, n=args.grid)
    fit = fit_fractional if args.model == "fractional" else fit_quadratic
    model = fit(motor_map, grid)
    rmse = normalized_rmse(model, motor_map)
    config = _config(args)
    write_json({"config": config, "model": model.to_dict(), "normalized_rmse": rmse}, args.out)
    print(f"normalized RMSE w.r.t. DC power: {rmse * 100:.4f}%")
    print(f"wrote {args.out}")
    return 0


def _cmd_optimize(args) -> int:
    cycle = load_cycle(args.cycle)
    params = VehicleParams.from_file(args.vehicle)
    model = _scaled_model(_load_model(args.motor), args.power)
    spec = _parse_spec(args)
    solution = design_transmission(
        spec,
        model,
        cycle,
        params,
        c_shift=args.shift_cost,
        epsilon=args.epsilon,
    )
    payload = {"config": _config(args, params=params, spec=spec, limits=model.limits),
               "solution": solution_to_dict(solution)}
    write_json(payload, args.out)
    ratios = ", ".join(f"{g:.4f}" for g in solution.ratios) or "per-step"
    print(
        f"{spec.label}: J = {solution.J / 1e3:.3f} kJ, "
        f"total = {solution.total_energy / 1e6:.4f} MJ, ratios: {ratios}"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_size_sweep(args) -> int:
    cycle = load_cycle(args.cycle)
    params = VehicleParams.from_file(args.vehicle)
    model = _load_model(args.motor)
    spec = _parse_spec(args)
    try:
        s_min, s_max = (float(x) for x in args.range.split(":"))
    except ValueError:
        raise ValidationError(f"bad size range {args.range!r}; expected smin:smax") from None
    best, rows = size_sweep(
        spec, model, (s_min, s_max), args.sizes, cycle, params,
        c_shift=args.shift_cost, epsilon=args.epsilon, workers=args.workers,
    )
    if args.table:
        write_sweep_csv(rows, args.table)
        print(f"wrote {args.table}")
    payload = {"config": _config(args, params=params, spec=spec, limits=model.limits),
               "solution": solution_to_dict(best)}
    write_json(payload, args.out)
    print(
        f"best {spec.label}: P_m_max = {best.P_m_max / 1e3:.1f} kW, "
        f"total = {best.total_energy / 1e6:.4f} MJ, mass = {best.vehicle_mass:.0f} kg"
    )
    print(f"wrote {args.out}")
    if args.plots:
        for p in report.plot_sweep(rows, args.plots):
            print(f"wrote {p}")
    return 0


def _cmd_oracle(args) -> int:
    cycle = load_cycle(args.cycle)
    params = VehicleParams.from_file(args.vehicle)
    model = _scaled_model(_load_model(args.motor), args.power)
    spec = _parse_spec(args)
    if spec.kind == "cvt":
        raise ValidationError("the oracle enumerates gear ratios; use mgt:N or fgt")
    limits = model.limits
    m_v = total_mass(params, spec, limits.P_max)
    demand = wheel_demand(cycle, m_v, params)
    em = em_demand(demand, spec, params, limits)
    coeffs = step_coefficients(model, em.P_m, cycle.v, params.r_w, cycle.dt)
    gamma_min, gamma_max = per_step_bounds(em, limits, spec, cycle, params.r_w)
    coeffs = coeffs.with_bounds(gamma_min, gamma_max)
    floor = towing_ratio_floor(params, m_v, limits, spec.eta(params))
    grid = ratio_grid_for(coeffs, floor, resolution=args.grid_res)
    solution = brute_force_mgt(
        coeffs, spec.n_gears, grid, c_shift=args.shift_cost, towing_floor=floor
    )
    total = float(np.sum(em.P_m + solution.step_loss) * cycle.dt)
    solution = replace(solution, total_energy=total, vehicle_mass=m_v, P_m_max=limits.P_max)
    payload = {"config": _config(args, params=params, spec=spec, limits=model.limits),
               "solution": solution_to_dict(solution)}
    write_json(payload, args.out)
    ratios = ", ".join(f"{g:.4f}" for g in solution.ratios)
    print(
        f"oracle {spec.label}: J = {solution.J / 1e3:.3f} kJ over "
        f"{len(grid)} grid ratios, ratios: {ratios}"
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    with open(args.design, "r", encoding="utf-8") as fh:
        design_doc = json.load(fh)
    design = solution_from_dict(design_doc["solution"])
    config = design_doc.get("config", {})
    cycle_path = args.cycle or config.get("cycle")
    vehicle_path = args.vehicle or config.get("vehicle")
    if not cycle_path or not vehicle_path:
        raise ValidationError(
            "the design does not record its cycle/vehicle; pass --cycle and --vehicle"
        )
    cycle = load_cycle(cycle_path)
    params = VehicleParams.from_file(vehicle_path)
    limits = None
    if "limits" in config:
        limits = MotorLimits.from_dict(config["limits"])
    motor_map = load_map(args.map, limits=limits)
    result = simulate(design, cycle, params, motor_map)
    if args.trace:
        write_trace_csv(result, cycle, args.trace)
        print(f"wrote {args.trace}")
    gap = abs(result.loss_energy - result.model_loss_energy) / max(result.total_energy, 1e-9)
    if args.report:
        write_json(
            {
                "config": _config(args),
                "report": {
                    "total_energy": result.total_energy,
                    "loss_energy": result.loss_energy,
                    "model_loss_energy": result.model_loss_energy,
                    "shift_cost": result.shift_cost,
                    "model_gap_of_total": gap,
                },
            },
            args.report,
        )
        print(f"wrote {args.report}")
    print(
        f"simulated total = {result.total_energy / 1e6:.4f} MJ, "
        f"map loss = {result.loss_energy / 1e3:.3f} kJ, "
        f"model loss = {result.model_loss_energy / 1e3:.3f} kJ"
    )
    if args.plots:
        for p in report.plot_trace(cycle, result, args.plots):
            print(f"wrote {p}")
    return 0


def _config(args, params=None, spec=None, limits=None) -> dict:
    skip = {"func"}
    config = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in skip
    }
    if params is not None:
        config["vehicle_params"] = params.to_dict()
    if spec is not None:
        config["transmission_spec"] = {
            "kind": spec.kind,
            "n_gears": spec.n_gears,
            "gamma_cvt_min": spec.gamma_cvt_min,
            "gamma_cvt_max": spec.gamma_cvt_max,
        }
    if limits is not None:
        config["limits"] = limits.to_dict()
    return config


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gearopt",
        description="Energy-optimal transmission design and control for electric vehicles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-cycle", help="generate a synthetic drive cycle")
    p.add_argument("--preset", choices=CYCLE_PRESETS, default="urban")
    p.add_argument("--duration", type=float, required=True, help="cycle length, s")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth_cycle)

    p = sub.add_parser("synth-map", help="generate a synthetic motor loss map")
    p.add_argument("--ground-truth", choices=sorted(GROUND_TRUTHS), default="physical")
    p.add_argument("--omega-max", type=float, default=1200.0, help="rad/s")
    p.add_argument("--t-max", type=float, default=280.0, help="N*m")
    p.add_argument("--p-max-kw", type=float, default=90.0)
    p.add_argument("--n-speed", type=int, default=129)
    p.add_argument("--n-torque", type=int, default=129)
    p.add_argument("--out", required=True)
    p.add_argument("--plots", default=None, help="directory for rendered figures")
    p.set_defaults(func=_cmd_synth_map)

    p = sub.add_parser("fit-motor", help="fit a loss model to a motor map CSV")
    p.add_argument("--map", required=True)
    p.add_argument("--model", choices=("fractional", "quadratic"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--grid", type=int, default=101, help="power grid points")
    p.add_argument("--omega-max", type=float, default=None, help="override map extent")
    p.add_argument("--t-max", type=float, default=None, help="override map extent")
    p.add_argument("--p-max-kw", type=float, default=None,
                   help="motor power rating; defaults to the map's speed*torque extent")
    p.set_defaults(func=_cmd_fit_motor)

    def add_pipeline_args(p, power=True):
        p.add_argument("--cycle", required=True)
        p.add_argument("--vehicle", required=True)
        p.add_argument("--motor", required=True, help="fitted model JSON")
        p.add_argument("--transmission", required=True, help="fgt | cvt | mgt:N")
        p.add_argument("--shift-cost", type=float, default=0.0, help="J per gear change")
        p.add_argument("--cvt-min", type=float, default=None)
        p.add_argument("--cvt-max", type=float, default=None)
        p.add_argument("--epsilon", type=float, default=None,
                       help="relative cost tolerance (default: vehicle params)")
        if power:
            p.add_argument("--power", type=float, default=None,
                           help="fix P_m_max in kW (rescales the motor)")

    p = sub.add_parser("optimize", help="optimize one transmission at a fixed motor size")
    add_pipeline_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("size-sweep", help="exhaustive motor-size sweep")
    add_pipeline_args(p, power=False)
    p.add_argument("--sizes", type=int, required=True)
    p.add_argument("--range", required=True, help="scale range smin:smax")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel sweep workers (default: GEAROPT_THREADS)")
    p.add_argument("--out", required=True)
    p.add_argument("--table", default=None, help="sweep table CSV")
    p.add_argument("--plots", default=None, help="directory for rendered figures")
    p.set_defaults(func=_cmd_size_sweep)

    p = sub.add_parser("oracle", help="brute-force ratio enumeration (desk scale)")
    add_pipeline_args(p)
    p.add_argument("--grid-res", type=float, default=0.05, help="ratio grid step")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("simulate", help="replay a design against a motor map")
    p.add_argument("--design", required=True, help="solution JSON from optimize/size-sweep")
    p.add_argument("--map", required=True)
    p.add_argument("--cycle", default=None, help="override the cycle recorded in the design")
    p.add_argument("--vehicle", default=None, help="override the vehicle parameter file")
    p.add_argument("--trace", default=None, help="per-step trace CSV")
    p.add_argument("--report", default=None, help="energy report JSON")
    p.add_argument("--plots", default=None, help="directory for rendered figures")
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CycleFormatError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"fit error: {exc}", file=sys.stderr)
        return 3
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 4
    except EnvelopeError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return 5
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GearoptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
