"""Six-DOF torpedo vehicle dynamics with built-in depth and heading
autopilots and a per-tick dynamics manager.

Model structure follows Fossen (Handbook of Marine Craft Hydrodynamics
and Motion Control, 2021) in SNAME notation:

    M nu_dot + C(nu_r) nu_r + D(nu_r) nu_r + g(eta) = tau
    eta_dot = J(eta) nu

with M = M_RB + M_A, C built from M (guaranteeing skew-symmetry),
diagonal linear-plus-quadratic damping, and restoring forces from weight
at CG and buoyancy at CB. Hydrodynamic terms act on the relative
velocity nu_r = nu - body-frame current. Integration is RK4 with the
first-order fin actuator lags inside the same ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .frames import euler_to_rot, pose_jacobian, skew, wrap_angle
from .params import VehicleParams
from .world import World, height_at

MAX_PITCH_GUARD = math.radians(85.0)


class DynamicsError(RuntimeError):
    pass


@dataclass
class RigidBodyState:
    eta: np.ndarray  # [x, y, z, phi, theta, psi]
    nu: np.ndarray  # [u, v, w, p, q, r]
    fin_angles: np.ndarray  # actuator states, rad
    prop_speed: float = 0.0  # rev/s

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        self.fin_angles = np.asarray(self.fin_angles, dtype=float)

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(self.eta.copy(), self.nu.copy(),
                              self.fin_angles.copy(), self.prop_speed)


def initial_state(params: VehicleParams, eta=None, nu=None) -> RigidBodyState:
    n_fins = len(params.control_surfaces.fins)
    return RigidBodyState(
        eta=np.zeros(6) if eta is None else np.asarray(eta, dtype=float),
        nu=np.zeros(6) if nu is None else np.asarray(nu, dtype=float),
        fin_angles=np.zeros(n_fins),
    )


@dataclass
class ControlCommand:
    mode: str = "direct"  # direct | setpoint
    fin_commands: np.ndarray | None = None  # rad, per fin
    prop_speed: float = 0.0  # rev/s (direct mode)
    depth: float | None = None  # m (setpoint mode)
    heading: float | None = None  # rad
    speed: float | None = None  # m/s


@dataclass
class HydroForces:
    """Wrench contributions summed directly into M nu_dot = sum(...)."""

    coriolis: np.ndarray
    damping: np.ndarray
    restoring: np.ndarray
    actuation: np.ndarray


# ---------------------------------------------------------------------------
# model matrices


def system_matrix(params: VehicleParams):
    """M = M_RB + M_A and its inverse; M must be symmetric positive
    definite or the parameter set is rejected."""
    m = params.physical.mass
    r_g = np.asarray(params.hydrostatic.r_cg, dtype=float)
    I_cg = np.asarray(params.physical.inertia, dtype=float)
    S_rg = skew(r_g)
    M_rb = np.zeros((6, 6))
    M_rb[:3, :3] = m * np.eye(3)
    M_rb[:3, 3:] = -m * S_rg
    M_rb[3:, :3] = m * S_rg
    M_rb[3:, 3:] = I_cg - m * S_rg @ S_rg  # inertia about the body origin
    M_a = np.diag(params.physical.added_mass)
    M = M_rb + M_a
    M = 0.5 * (M + M.T)
    eigvals = np.linalg.eigvalsh(M)
    if np.any(eigvals <= 0):
        raise DynamicsError("system matrix is not positive definite; "
                            "check inertia and added-mass parameters")
    M_inv = np.linalg.inv(M)
    return M, M_inv


def coriolis_matrix(M: np.ndarray, nu_r: np.ndarray) -> np.ndarray:
    """Fossen's C(nu) parameterization from M; skew-symmetric by
    construction, so nu^T C nu = 0 identically."""
    nu1 = nu_r[:3]
    nu2 = nu_r[3:]
    a = M[:3, :3] @ nu1 + M[:3, 3:] @ nu2
    b = M[3:, :3] @ nu1 + M[3:, 3:] @ nu2
    C = np.zeros((6, 6))
    C[:3, 3:] = -skew(a)
    C[3:, :3] = -skew(a)
    C[3:, 3:] = -skew(b)
    return C


def damping_matrix(params: VehicleParams, nu_r: np.ndarray) -> np.ndarray:
    d_lin = np.asarray(params.hydrodynamic.linear_damping, dtype=float)
    d_quad = np.asarray(params.hydrodynamic.quadratic_damping, dtype=float)
    return np.diag(d_lin + d_quad * np.abs(nu_r))


def restoring_vector(params: VehicleParams, eta: np.ndarray) -> np.ndarray:
    """Fossen's g(eta) for weight W at r_cg and buoyancy B at r_cb."""
    W = params.physical.mass * params.environmental.gravity
    B = (params.environmental.water_density * params.environmental.gravity
         * params.hydrostatic.displaced_volume)
    xg, yg, zg = params.hydrostatic.r_cg
    xb, yb, zb = params.hydrostatic.r_cb
    phi, theta = eta[3], eta[4]
    sph, cph = math.sin(phi), math.cos(phi)
    sth, cth = math.sin(theta), math.cos(theta)
    return np.array([
        (W - B) * sth,
        -(W - B) * cth * sph,
        -(W - B) * cth * cph,
        -(yg * W - yb * B) * cth * cph + (zg * W - zb * B) * cth * sph,
        (zg * W - zb * B) * sth + (xg * W - xb * B) * cth * cph,
        -(xg * W - xb * B) * cth * sph - (yg * W - yb * B) * sth,
    ])


def hydro_forces(params: VehicleParams, eta, nu_r, M=None) -> HydroForces:
    """Coriolis, damping, and restoring wrenches for the current relative
    velocity; each is the contribution added to the force balance."""
    eta = np.asarray(eta, dtype=float)
    nu_r = np.asarray(nu_r, dtype=float)
    if M is None:
        M, _ = system_matrix(params)
    C = coriolis_matrix(M, nu_r)
    D = damping_matrix(params, nu_r)
    return HydroForces(
        coriolis=-C @ nu_r,
        damping=-D @ nu_r,
        restoring=-restoring_vector(params, eta),
        actuation=np.zeros(6),
    )


def actuator_forces(params: VehicleParams, nu_r, fin_angles,
                    prop_speed: float) -> np.ndarray:
    """Propeller thrust plus per-fin lift, as a body wrench.

    Fin lift follows the sign convention of Fossen's REMUS model: a
    positive deflection produces force along -lift_axis, so a positive
    rudder command yields a positive yaw moment for a stern-mounted fin.
    """
    cs = params.control_surfaces
    rho = params.environmental.water_density
    tau = np.zeros(6)
    n = prop_speed
    tau[0] += cs.thrust_coefficient * rho * n * abs(n) * cs.prop_diameter ** 4
    u_r = nu_r[0]
    omega = nu_r[3:]
    for fin, delta in zip(cs.fins, fin_angles):
        delta = max(-fin.max_deflection, min(fin.max_deflection, float(delta)))
        axis = np.asarray(fin.lift_axis, dtype=float)
        pos = np.asarray(fin.position, dtype=float)
        v_local = nu_r[:3] + np.cross(omega, pos)
        v_a = float(v_local @ axis)
        # local flow-angle correction; skipped near zero forward speed
        if u_r > 0.05:
            delta_eff = delta + math.atan2(v_a, u_r)
        else:
            delta_eff = delta
        U_sq = u_r * u_r + v_a * v_a
        lift = -0.5 * rho * U_sq * fin.area * fin.lift_coefficient * delta_eff
        force = lift * axis
        tau[:3] += force
        tau[3:] += np.cross(pos, force)
    return tau


def prop_speed_for_speed(params: VehicleParams, u_des: float) -> float:
    """Invert the steady thrust-drag balance: the prop speed whose thrust
    cancels surge drag at u_des."""
    if u_des <= 0:
        return 0.0
    d_lin = params.hydrodynamic.linear_damping[0]
    d_quad = params.hydrodynamic.quadratic_damping[0]
    drag = d_lin * u_des + d_quad * u_des * u_des
    cs = params.control_surfaces
    denom = cs.thrust_coefficient * params.environmental.water_density \
        * cs.prop_diameter ** 4
    n = math.sqrt(drag / denom)
    return min(n, cs.max_prop_speed)


# ---------------------------------------------------------------------------
# integration


def rk4_step(f, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(t, y)
    k2 = f(t + dt / 2.0, y + dt / 2.0 * k1)
    k3 = f(t + dt / 2.0, y + dt / 2.0 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def body_current(eta, current_ned) -> np.ndarray:
    """6-vector body-frame current velocity (angular components zero)."""
    R = euler_to_rot(eta[3], eta[4], eta[5])
    out = np.zeros(6)
    out[:3] = R.T @ np.asarray(current_ned, dtype=float)
    return out


def state_derivative(params: VehicleParams, y: np.ndarray, fin_cmds,
                     prop_speed: float, current_ned, M, M_inv,
                     extra_wrench=None) -> np.ndarray:
    """Time derivative of the packed state [eta, nu, fin_angles]."""
    eta = y[:6]
    nu = y[6:12]
    fins = y[12:]
    nu_r = nu - body_current(eta, current_ned)
    C = coriolis_matrix(M, nu_r)
    D = damping_matrix(params, nu_r)
    g = restoring_vector(params, eta)
    tau = actuator_forces(params, nu_r, fins, prop_speed)
    total = tau - C @ nu_r - D @ nu_r - g
    if extra_wrench is not None:
        total = total + extra_wrench
    nu_dot = M_inv @ total
    eta_dot = pose_jacobian(eta) @ nu
    cs = params.control_surfaces
    fin_dot = np.array([
        (cmd - delta) / fin.time_constant
        for fin, cmd, delta in zip(cs.fins, fin_cmds, fins)])
    return np.concatenate([eta_dot, nu_dot, fin_dot])


def _clip_fins(params: VehicleParams, fins: np.ndarray) -> np.ndarray:
    lims = np.array([f.max_deflection for f in params.control_surfaces.fins])
    return np.clip(fins, -lims, lims)


def step(params: VehicleParams, state: RigidBodyState, command: ControlCommand,
         current_ned, dt: float, M=None, M_inv=None,
         extra_wrench=None) -> RigidBodyState:
    """Advance one RK4 step. The command must already be resolved to
    direct fin/prop targets (setpoints go through the autopilots first)."""
    if dt <= 0:
        raise DynamicsError("dt must be positive")
    if command.mode != "direct":
        raise DynamicsError("step() requires a resolved direct command")
    if M is None or M_inv is None:
        M, M_inv = system_matrix(params)
    n_fins = len(params.control_surfaces.fins)
    fin_cmds = np.zeros(n_fins) if command.fin_commands is None \
        else np.asarray(command.fin_commands, dtype=float)
    fin_cmds = _clip_fins(params, fin_cmds)
    prop = max(-params.control_surfaces.max_prop_speed,
               min(params.control_surfaces.max_prop_speed, command.prop_speed))
    if abs(state.eta[4]) > MAX_PITCH_GUARD:
        raise DynamicsError(
            f"pitch {state.eta[4]:.3f} rad beyond the +-85 deg Euler guard")

    def f(t, y):
        return state_derivative(params, y, fin_cmds, prop, current_ned,
                                M, M_inv, extra_wrench)

    y0 = np.concatenate([state.eta, state.nu, state.fin_angles])
    y1 = rk4_step(f, 0.0, y0, dt)
    if not np.all(np.isfinite(y1)):
        nu_r = state.nu - body_current(state.eta, current_ned)
        forces = hydro_forces(params, state.eta, nu_r, M=M)
        raise DynamicsError(
            "non-finite state produced; term breakdown: "
            f"coriolis={forces.coriolis}, damping={forces.damping}, "
            f"restoring={forces.restoring}")
    eta = y1[:6]
    for k in (3, 4, 5):
        eta[k] = wrap_angle(eta[k])
    fins = _clip_fins(params, y1[12:])
    return RigidBodyState(eta=eta, nu=y1[6:12], fin_angles=fins,
                          prop_speed=prop)


def kinetic_energy(params: VehicleParams, nu, M=None) -> float:
    if M is None:
        M, _ = system_matrix(params)
    nu = np.asarray(nu, dtype=float)
    return 0.5 * float(nu @ M @ nu)


# ---------------------------------------------------------------------------
# autopilots


class DepthAutopilot:
    """Successive-loop PID: depth error -> pitch setpoint -> stern-plane
    deflection. Integrators use clamping anti-windup. Derivative action
    comes from measured rates, so the law is step-size independent."""

    def __init__(self, params: VehicleParams):
        self.ap = params.autopilot
        self.max_fin = max((f.max_deflection
                            for f in params.control_surfaces.fins), default=0.5236)
        self.int_depth = 0.0
        self.int_pitch = 0.0

    def command(self, state: RigidBodyState, depth_setpoint: float,
                dt: float) -> float:
        ap = self.ap
        eta, nu = state.eta, state.nu
        e_z = depth_setpoint - eta[2]
        z_dot = float((pose_jacobian(eta) @ nu)[2])
        self.int_depth = _clamp(self.int_depth + e_z * dt, 1.0 / max(ap.depth_ki, 1e-9))
        theta_d = -(ap.depth_kp * e_z + ap.depth_ki * self.int_depth
                    - ap.depth_kd * z_dot)
        theta_d = _clamp(theta_d, ap.max_pitch)
        e_th = eta[4] - theta_d
        self.int_pitch = _clamp(self.int_pitch + e_th * dt,
                                0.3 / max(ap.pitch_ki, 1e-9))
        delta_s = (ap.pitch_kp * e_th + ap.pitch_ki * self.int_pitch
                   + ap.pitch_kd * nu[4])
        return _clamp(delta_s, self.max_fin)


class HeadingAutopilot:
    """Sliding-mode heading control on s = r + lambda * psi_err with a
    boundary layer to suppress chatter, plus rate feedforward."""

    def __init__(self, params: VehicleParams):
        self.ap = params.autopilot
        self.max_fin = max((f.max_deflection
                            for f in params.control_surfaces.fins), default=0.5236)

    def command(self, state: RigidBodyState, heading_setpoint: float,
                dt: float) -> float:
        ap = self.ap
        psi_err = wrap_angle(state.eta[5] - heading_setpoint)
        r = state.nu[5]
        s = r + ap.smc_lambda * psi_err
        delta_r = (-ap.smc_feedforward * ap.smc_lambda * r
                   - ap.smc_gain * _sat(s / ap.smc_boundary))
        return _clamp(delta_r, self.max_fin)


def _clamp(x: float, limit: float) -> float:
    return max(-limit, min(limit, x))


def _sat(x: float) -> float:
    return max(-1.0, min(1.0, x))


def depth_autopilot(params: VehicleParams, state: RigidBodyState,
                    depth_setpoint: float, dt: float,
                    controller: DepthAutopilot | None = None) -> float:
    """Stateless convenience wrapper; persistent loops should hold a
    DepthAutopilot instance."""
    return (controller or DepthAutopilot(params)).command(state, depth_setpoint, dt)


def heading_autopilot(params: VehicleParams, state: RigidBodyState,
                      heading_setpoint: float, dt: float,
                      controller: HeadingAutopilot | None = None) -> float:
    return (controller or HeadingAutopilot(params)).command(
        state, heading_setpoint, dt)


# ---------------------------------------------------------------------------
# dynamics manager


@dataclass
class ContactEvent:
    agent: str
    tick: int
    position: np.ndarray
    depth_at_contact: float


class _Agent:
    def __init__(self, name, model, params, state):
        self.name = name
        self.model = model
        self.params = params
        self.state = state
        self.M, self.M_inv = (system_matrix(params) if model == "fossen_torpedo"
                              else (None, None))
        self.depth_ctl = DepthAutopilot(params)
        self.heading_ctl = HeadingAutopilot(params)


class DynamicsManager:
    """Steps every registered agent once per tick: samples the current at
    the agent's position, resolves setpoints through the autopilots, and
    integrates. Agents are mutually independent within a tick."""

    def __init__(self, dt: float, current_field=None, wave_field=None,
                 world: World | None = None, orbital_coupling: bool = False):
        self.dt = dt
        self.current_field = current_field
        self.wave_field = wave_field
        self.world = world
        self.orbital_coupling = orbital_coupling
        self.agents: dict = {}
        self.tick_index = 0
        self.contacts: list = []

    def add_agent(self, name: str, params: VehicleParams,
                  model: str = "fossen_torpedo", eta=None, nu=None) -> None:
        if name in self.agents:
            raise DynamicsError(f"agent {name!r} already registered")
        self.agents[name] = _Agent(name, model, params,
                                   initial_state(params, eta, nu))

    def sample_current(self, agent: _Agent, t: float) -> np.ndarray:
        from .envfx import sample_current as _sample
        if self.current_field is not None:
            vel = _sample(self.current_field, agent.state.eta[:3], t)
        elif agent.params.environmental.per_agent_current is not None:
            vel = np.asarray(agent.params.environmental.per_agent_current,
                             dtype=float)
        else:
            vel = np.zeros(3)
        if self.orbital_coupling and self.wave_field is not None:
            from .envfx import surface_z, wave_sample
            x, y, z = agent.state.eta[:3]
            depth = max(z - surface_z(self.wave_field, x, y, t), 0.0)
            vel = vel + wave_sample(self.wave_field, x, y, t,
                                    depth=depth).orbital_velocity
        return vel

    def resolve_command(self, agent: _Agent, command: ControlCommand,
                        dt: float) -> ControlCommand:
        if command.mode == "direct":
            return command
        cs = agent.params.control_surfaces
        fins = np.zeros(len(cs.fins))
        if command.depth is not None:
            delta_s = agent.depth_ctl.command(agent.state, command.depth, dt)
            for i, fin in enumerate(cs.fins):
                if abs(fin.lift_axis[2]) > 0.5:
                    fins[i] = delta_s
        if command.heading is not None:
            delta_r = agent.heading_ctl.command(agent.state, command.heading, dt)
            for i, fin in enumerate(cs.fins):
                if abs(fin.lift_axis[1]) > 0.5:
                    fins[i] = delta_r
        prop = prop_speed_for_speed(agent.params, command.speed) \
            if command.speed is not None else agent.state.prop_speed
        return ControlCommand(mode="direct", fin_commands=fins, prop_speed=prop)

    def tick(self, commands: dict, dt: float | None = None,
             t: float | None = None) -> dict:
        """Advance all agents one tick; returns name -> new state."""
        if dt is None:
            dt = self.dt
        if abs(dt - self.dt) > 1e-12:
            raise DynamicsError(
                f"tick dt {dt} does not match the scenario tick rate dt {self.dt}")
        if t is None:
            t = self.tick_index * self.dt
        for name in commands:
            if name not in self.agents:
                raise DynamicsError(f"command addressed to unknown agent {name!r}")
        out = {}
        for name, agent in self.agents.items():
            command = commands.get(name) or ControlCommand(
                mode="direct",
                fin_commands=np.zeros(len(agent.params.control_surfaces.fins)))
            current = self.sample_current(agent, t)
            if agent.model == "kinematic":
                eta_dot = pose_jacobian(agent.state.eta) @ agent.state.nu
                eta_dot[:3] += current
                eta = agent.state.eta + dt * eta_dot
                for k in (3, 4, 5):
                    eta[k] = wrap_angle(eta[k])
                agent.state = RigidBodyState(eta, agent.state.nu.copy(),
                                             agent.state.fin_angles.copy(),
                                             agent.state.prop_speed)
            else:
                resolved = self.resolve_command(agent, command, dt)
                extra = None
                if self.wave_field is not None and self.wave_field.components:
                    from .envfx import buoyancy_force, submerged_buoyancy_wrench
                    # swap the restoring term's full-submersion buoyancy for
                    # the wave-surface slice model
                    extra = (buoyancy_force(self.wave_field, agent.params,
                                            agent.state.eta, t)
                             - submerged_buoyancy_wrench(agent.params,
                                                         agent.state.eta))
                agent.state = step(agent.params, agent.state, resolved,
                                   current, dt, M=agent.M, M_inv=agent.M_inv,
                                   extra_wrench=extra)
            self._check_contact(agent)
            out[name] = agent.state.copy()
        self.tick_index += 1
        return out

    def _check_contact(self, agent: _Agent) -> None:
        if self.world is None:
            return
        eta = agent.state.eta
        keel = eta[:3] + euler_to_rot(eta[3], eta[4], eta[5]) @ np.array(
            [0.0, 0.0, agent.params.physical.diameter / 2.0])
        try:
            floor = height_at(self.world.heightfield, keel[0], keel[1])
        except Exception:
            return  # outside the mapped footprint
        if keel[2] >= floor:
            # tick_index increments after the agent loop; report the
            # 1-based tick this contact occurred on
            self.contacts.append(ContactEvent(
                agent=agent.name, tick=self.tick_index + 1,
                position=keel.copy(), depth_at_contact=floor))


def manager_tick(manager: DynamicsManager, commands: dict,
                 dt: float | None = None) -> dict:
    return manager.tick(commands, dt=dt)
