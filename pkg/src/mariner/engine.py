"""Simulation engine: builds a run from a scenario config, executes the
tick loop, logs state and sensor outputs, and drives the bridge.

Per-tick order: poll bridge commands, step all agents, evaluate due
sensors, publish. Commands persist until replaced, so an external
client can command once and observe the response over many ticks.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import archive, envfx, sensors
from .bridge import BridgeServer, Envelope
from .dynamics import ControlCommand, DynamicsManager
from .scenario import ScenarioConfig
from .world import World, flat_world, generate_world, load_bathymetry

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _stable_hash(text: str) -> int:
    """FNV-1a; used to derive per-sensor noise seeds platform-independently."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


class EngineError(RuntimeError):
    pass


@dataclass
class RunReport:
    ticks_executed: int = 0
    wall_time: float = 0.0
    sensor_messages: dict = field(default_factory=dict)  # "agent/sensor" -> n
    final_states: dict = field(default_factory=dict)
    contact_events: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({
            "ticks_executed": self.ticks_executed,
            "wall_time": self.wall_time,
            "sensor_messages": self.sensor_messages,
            "final_states": self.final_states,
            "contact_events": self.contact_events,
        }, indent=2, sort_keys=True)


def build_world(config: ScenarioConfig, base_dir=".") -> World:
    spec = config.world
    if spec.kind == "flat":
        return flat_world(spec.depth, spec.size_m, spec.cell_size, spec.origin)
    if spec.kind == "generate":
        return generate_world(spec.gen, config.rng_seed)
    if spec.kind == "bathymetry":
        hf = load_bathymetry(os.path.join(base_dir, spec.path))
        return World(heightfield=hf)
    if spec.kind == "archive":
        return archive.load_world(os.path.join(base_dir, spec.path))
    raise EngineError(f"unknown world kind {spec.kind!r}")


def build_current_field(config: ScenarioConfig, base_dir="."):
    spec = config.current
    if spec is None:
        return None
    if spec.kind == "constant":
        return envfx.CurrentField(kind="constant", constant=np.array(spec.vector))
    if spec.kind == "shear":
        return envfx.CurrentField(kind="shear",
                                  surface_velocity=np.array(spec.surface_velocity),
                                  decay_depth=spec.decay_depth)
    if spec.kind == "grid":
        grid = envfx.load_grid_current(os.path.join(base_dir, spec.path))
        return envfx.CurrentField(kind="grid", grid=grid)
    raise EngineError(f"unknown current kind {spec.kind!r}")


def build_wave_field(config: ScenarioConfig):
    if config.waves is None or not config.waves.components:
        return None
    return envfx.WaveField(
        components=[envfx.WaveComponent(
            amplitude=c.amplitude, wavelength=c.wavelength,
            direction=np.array(c.direction), phase=c.phase,
            steepness=c.steepness) for c in config.waves.components],
        gravity=config.waves.gravity)


def _command_from_payload(payload: dict) -> ControlCommand:
    mode = payload.get("mode", "direct")
    if mode == "direct":
        return ControlCommand(
            mode="direct",
            fin_commands=np.array(payload.get("fin_commands", []), dtype=float)
            if payload.get("fin_commands") is not None else None,
            prop_speed=float(payload.get("prop_speed", 0.0)))
    if mode == "setpoint":
        return ControlCommand(
            mode="setpoint",
            depth=payload.get("depth"),
            heading=payload.get("heading"),
            speed=payload.get("speed"))
    raise EngineError(f"unknown command mode {mode!r}")


def _fmt(x: float) -> str:
    return repr(float(x))


class SimRun:
    """One executable simulation run assembled from a validated config."""

    def __init__(self, config: ScenarioConfig, out_dir, base_dir="."):
        self.config = config
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        self.world = build_world(config, base_dir)
        self.current_field = build_current_field(config, base_dir)
        self.wave_field = build_wave_field(config)
        self.dt = 1.0 / config.ticks_per_sec
        orbital = config.waves.orbital_coupling if config.waves else False
        self.manager = DynamicsManager(
            dt=self.dt, current_field=self.current_field,
            wave_field=self.wave_field, world=self.world,
            orbital_coupling=orbital)
        self._backends: dict = {}
        self._sensor_rngs: dict = {}
        for agent in config.agents:
            if agent.per_agent_current is not None:
                agent.params.environmental.per_agent_current = \
                    tuple(agent.per_agent_current)
            self.manager.add_agent(agent.name, agent.params, agent.model,
                                   eta=agent.initial_pose,
                                   nu=agent.initial_velocity)
        self.bridge: BridgeServer | None = None
        if config.bridge is not None:
            self.bridge = BridgeServer(
                port=config.bridge.port,
                agents=[a.name for a in config.agents])
        self._held_commands: dict = {}
        self._sidescan_lines: dict = {}

    def _backend_for(self, sensor):
        key = (sensor.backend, sensor.leaf_size)
        if key not in self._backends:
            self._backends[key] = sensors.make_backend(
                sensor.backend, self.world, sensor.leaf_size)
        return self._backends[key]

    def _rng_for(self, agent_name, sensor_name):
        from .rng import Xoshiro256
        key = (agent_name, sensor_name)
        if key not in self._sensor_rngs:
            seed = self.config.rng_seed ^ _stable_hash(f"{agent_name}/{sensor_name}")
            self._sensor_rngs[key] = Xoshiro256(seed)
        return self._sensor_rngs[key]

    def _evaluate_sensor(self, agent_spec, sensor, state):
        if sensor.kind in ("imu", "dvl", "depth"):
            sample = sensors.nav_suite(state, sensor,
                                       self._rng_for(agent_spec.name, sensor.name))
            if sensor.kind == "imu":
                return "mariner.Imu.v1", {
                    "specific_force": [float(v) for v in sample.imu_specific_force],
                    "angular_rate": [float(v) for v in sample.imu_angular_rate]}
            if sensor.kind == "dvl":
                return "mariner.Dvl.v1", {
                    "velocity": [float(v) for v in sample.dvl_velocity]}
            return "mariner.Depth.v1", {"depth": sample.depth}
        backend = self._backend_for(sensor)
        if sensor.kind == "echo":
            r = sensors.echo_sounder(backend, state.eta, sensor)
            payload = {"range": (None if math.isinf(r.range) else r.range),
                       "intensity": r.intensity}
            if r.label is not None:
                payload["label"] = {"class_id": r.label.class_id,
                                    "instance_id": r.label.instance_id}
            return "mariner.SonarEcho.v1", payload
        if sensor.kind == "multibeam":
            r = sensors.multibeam_scan(backend, state.eta, sensor)
            payload = {
                "ranges": [None if math.isinf(v) else float(v) for v in r.ranges],
                "intensities": [float(v) for v in r.intensities]}
            if r.labels is not None:
                payload["labels"] = [
                    None if l is None else {"class_id": l.class_id,
                                            "instance_id": l.instance_id}
                    for l in r.labels]
            return "mariner.MultibeamScan.v1", payload
        if sensor.kind == "sidescan":
            r = sensors.sidescan_line(backend, state.eta, sensor)
            key = (agent_spec.name, sensor.name)
            self._sidescan_lines.setdefault(key, []).append(r.bins)
            payload = {"bins": [float(v) for v in r.bins]}
            if r.labels is not None:
                payload["labels"] = [
                    None if l is None else {"class_id": l.class_id,
                                            "instance_id": l.instance_id}
                    for l in r.labels]
            return "mariner.SidescanLine.v1", payload
        if sensor.kind == "lidar":
            cloud = sensors.lidar_scan(backend, state.eta, sensor)
            payload = {"points": [[float(p.point[0]), float(p.point[1]),
                                   float(p.point[2]), float(p.intensity)]
                                  for p in cloud]}
            if sensor.semantic:
                payload["labels"] = [{"class_id": p.label.class_id,
                                      "instance_id": p.label.instance_id}
                                     for p in cloud]
            return "mariner.PointCloud.v1", payload
        raise EngineError(f"unknown sensor kind {sensor.kind!r}")

    def run(self, write_pgm: bool = False) -> RunReport:
        config = self.config
        report = RunReport()
        t_wall = time.perf_counter()
        state_path = os.path.join(self.out_dir, "state.csv")
        jsonl_path = os.path.join(self.out_dir, "sensors.jsonl")
        if self.bridge is not None:
            self.bridge.start()
        try:
            with open(state_path, "w", newline="") as state_fh, \
                    open(jsonl_path, "w") as sensor_fh:
                writer = csv.writer(state_fh)
                writer.writerow(
                    ["tick", "t", "agent", "x", "y", "z", "phi", "theta", "psi",
                     "u", "v", "w", "p", "q", "r", "fins", "prop_speed",
                     "current_x", "current_y", "current_z"])
                for tick in range(1, config.duration_ticks + 1):
                    t = tick * self.dt
                    if self.bridge is not None:
                        for msg in self.bridge.poll_commands():
                            self._held_commands[msg.agent] = \
                                _command_from_payload(msg.command)
                    states = self.manager.tick(dict(self._held_commands), t=t)
                    for agent_spec in config.agents:
                        state = states[agent_spec.name]
                        current = self.manager.sample_current(
                            self.manager.agents[agent_spec.name], t)
                        writer.writerow(
                            [tick, _fmt(t), agent_spec.name]
                            + [_fmt(v) for v in state.eta]
                            + [_fmt(v) for v in state.nu]
                            + [";".join(_fmt(v) for v in state.fin_angles),
                               _fmt(state.prop_speed)]
                            + [_fmt(v) for v in current])
                        if self.bridge is not None:
                            self.bridge.publish(Envelope(
                                topic=f"{agent_spec.name}/state",
                                schema="mariner.State.v1", tick=tick, stamp=t,
                                payload={
                                    "eta": [float(v) for v in state.eta],
                                    "nu": [float(v) for v in state.nu],
                                    "fin_angles": [float(v)
                                                   for v in state.fin_angles],
                                    "prop_speed": float(state.prop_speed)}))
                        for sensor in agent_spec.sensors:
                            if tick % sensor.rate_ticks != 0:
                                continue
                            schema, payload = self._evaluate_sensor(
                                agent_spec, sensor, state)
                            key = f"{agent_spec.name}/{sensor.name}"
                            report.sensor_messages[key] = \
                                report.sensor_messages.get(key, 0) + 1
                            sensor_fh.write(json.dumps(
                                {"tick": tick, "agent": agent_spec.name,
                                 "sensor": sensor.name, "kind": sensor.kind,
                                 "schema": schema, "payload": payload},
                                sort_keys=True) + "\n")
                            if self.bridge is not None:
                                self.bridge.publish(Envelope(
                                    topic=key, schema=schema, tick=tick,
                                    stamp=t, payload=payload))
                    report.ticks_executed = tick
                    if self.manager.contacts:
                        break
        finally:
            if self.bridge is not None:
                self.bridge.stop()
        if write_pgm:
            for (agent, sensor_name), lines in self._sidescan_lines.items():
                sensors.write_pgm(
                    np.array(lines),
                    os.path.join(self.out_dir, f"{agent}_{sensor_name}.pgm"))
        report.wall_time = time.perf_counter() - t_wall
        for name, agent in self.manager.agents.items():
            report.final_states[name] = {
                "eta": [float(v) for v in agent.state.eta],
                "nu": [float(v) for v in agent.state.nu]}
        report.contact_events = [
            {"agent": c.agent, "tick": c.tick,
             "position": [float(v) for v in c.position],
             "depth_at_contact": float(c.depth_at_contact)}
            for c in self.manager.contacts]
        with open(os.path.join(self.out_dir, "report.json"), "w") as fh:
            fh.write(report.to_json())
        return report
