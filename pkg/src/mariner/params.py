"""Vehicle parameter ledger for the torpedo dynamics model.

Parameters are grouped into the six configuration categories exposed to
scenario files: environmental, physical, hydrodynamic, hydrostatic,
control surfaces, and autopilot. Defaults transcribe the REMUS 100
reference parameterization from Fossen's Handbook of Marine Craft
Hydrodynamics and Motion Control (2nd ed., Section 8.4.2); see
docs/remus100_provenance.md for the derivation of each number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

PARAM_CATEGORIES = (
    "environmental",
    "physical",
    "hydrodynamic",
    "hydrostatic",
    "control_surfaces",
    "autopilot",
)


@dataclass
class FinSpec:
    """One control fin: position of its center of pressure in the body
    frame and the unit body-frame direction of positive lift."""

    name: str
    position: tuple  # m, body frame
    lift_axis: tuple  # unit vector, body frame
    area: float  # m^2
    lift_coefficient: float  # per rad
    time_constant: float  # s, first-order actuator lag
    max_deflection: float  # rad


@dataclass
class EnvironmentalParams:
    water_density: float = 1026.0  # kg/m^3
    gravity: float = 9.81  # m/s^2
    per_agent_current: tuple | None = None  # m/s, NED; None = inherit world


@dataclass
class PhysicalParams:
    mass: float = 31.0294  # kg (prolate spheroid, L=1.6 m, d=0.19 m)
    length: float = 1.6  # m
    diameter: float = 0.19  # m
    inertia: tuple = (
        (0.11202, 0.0, 0.0),
        (0.0, 4.02777, 0.0),
        (0.0, 0.0, 4.02777),
    )  # kg m^2 about CG
    added_mass: tuple = (0.8389, 29.4376, 29.4376, 0.03360, 3.42621, 3.42621)
    # positive added-mass values (-Xudot, -Yvdot, ... in SNAME sign convention)


@dataclass
class HydrodynamicParams:
    linear_damping: tuple = (1.5934, 3.0234, 3.0234, 0.56494, 10.7783, 7.4540)
    quadratic_damping: tuple = (6.1089, 171.547, 171.547, 0.5, 21.958, 21.958)
    # diagonal coefficients: force_i = -d_i * |nu_r,i| * nu_r,i


@dataclass
class HydrostaticParams:
    r_cg: tuple = (0.0, 0.0, 0.02)  # m, CG w.r.t. body origin
    r_cb: tuple = (0.0, 0.0, 0.0)  # m, CB w.r.t. body origin
    displaced_volume: float = 31.0294 / 1026.0  # m^3, exactly neutral (W = B)


def _default_fins() -> list:
    x_f = -0.8  # stern-mounted cruciform tail
    r = 0.095
    common = dict(area=0.00665, lift_coefficient=3.0, time_constant=0.1,
                  max_deflection=0.5236)
    return [
        FinSpec("rudder_top", (x_f, 0.0, -r), (0.0, 1.0, 0.0), **common),
        FinSpec("rudder_bottom", (x_f, 0.0, r), (0.0, 1.0, 0.0), **common),
        FinSpec("stern_port", (x_f, -r, 0.0), (0.0, 0.0, 1.0), **common),
        FinSpec("stern_starboard", (x_f, r, 0.0), (0.0, 0.0, 1.0), **common),
    ]


@dataclass
class ControlSurfaceParams:
    fins: list = field(default_factory=_default_fins)
    thrust_coefficient: float = 0.15  # thrust = Kt * rho * n|n| * D^4
    prop_diameter: float = 0.14  # m
    max_prop_speed: float = 25.4  # rev/s (1525 rpm)


@dataclass
class AutopilotParams:
    # Successive-loop depth control: depth error -> pitch setpoint -> stern plane
    depth_kp: float = 0.7
    depth_ki: float = 0.04
    depth_kd: float = 2.4
    max_pitch: float = 0.5236  # rad, pitch setpoint saturation
    pitch_kp: float = 4.0
    pitch_ki: float = 0.3
    pitch_kd: float = 1.8
    # Heading sliding-mode control
    smc_lambda: float = 0.6
    smc_gain: float = 0.25
    smc_boundary: float = 0.15  # rad, boundary-layer width
    smc_feedforward: float = 1.2  # equivalent-control scale 1/b_hat


@dataclass
class VehicleParams:
    environmental: EnvironmentalParams = field(default_factory=EnvironmentalParams)
    physical: PhysicalParams = field(default_factory=PhysicalParams)
    hydrodynamic: HydrodynamicParams = field(default_factory=HydrodynamicParams)
    hydrostatic: HydrostaticParams = field(default_factory=HydrostaticParams)
    control_surfaces: ControlSurfaceParams = field(default_factory=ControlSurfaceParams)
    autopilot: AutopilotParams = field(default_factory=AutopilotParams)

    def validate(self) -> list:
        """Return a list of human-readable problems; empty when sane."""
        problems = []
        if self.physical.mass <= 0:
            problems.append("physical.mass must be positive")
        I = np.asarray(self.physical.inertia, dtype=float)
        if I.shape != (3, 3) or not np.allclose(I, I.T, atol=1e-9):
            problems.append("physical.inertia must be a symmetric 3x3 matrix")
        elif np.any(np.linalg.eigvalsh(I) <= 0):
            problems.append("physical.inertia must be positive definite")
        if any(a < 0 for a in self.physical.added_mass):
            problems.append("physical.added_mass entries must be non-negative")
        if any(d < 0 for d in self.hydrodynamic.linear_damping):
            problems.append("hydrodynamic.linear_damping entries must be non-negative")
        if any(d < 0 for d in self.hydrodynamic.quadratic_damping):
            problems.append("hydrodynamic.quadratic_damping entries must be non-negative")
        if self.hydrostatic.displaced_volume <= 0:
            problems.append("hydrostatic.displaced_volume must be positive")
        for fin in self.control_surfaces.fins:
            if fin.time_constant <= 0:
                problems.append(f"fin {fin.name}: time_constant must be positive")
            if fin.area < 0:
                problems.append(f"fin {fin.name}: area must be non-negative")
        return problems


def default_remus100_params() -> VehicleParams:
    """Parameter set for the REMUS 100 class torpedo (1.6 m x 0.19 m hull)."""
    return VehicleParams()


def copy_params(p: VehicleParams) -> VehicleParams:
    return VehicleParams(
        environmental=replace(p.environmental),
        physical=replace(p.physical),
        hydrodynamic=replace(p.hydrodynamic),
        hydrostatic=replace(p.hydrostatic),
        control_surfaces=ControlSurfaceParams(
            fins=[replace(f) for f in p.control_surfaces.fins],
            thrust_coefficient=p.control_surfaces.thrust_coefficient,
            prop_diameter=p.control_surfaces.prop_diameter,
            max_prop_speed=p.control_surfaces.max_prop_speed,
        ),
        autopilot=replace(p.autopilot),
    )
