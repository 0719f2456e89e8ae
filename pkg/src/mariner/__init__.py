"""mariner: a headless marine robotics simulation core.

Fossen-model torpedo vehicle dynamics with depth/heading autopilots,
dual-backend ranging sensors (direct ray cast vs. cached octree) with
semantic labels, volumetric currents and Gerstner waves, procedural and
bathymetric worlds, and a tick-synchronized pub/sub TCP bridge.
"""

__version__ = "0.1.0"

__all__ = [
    "accel",
    "archive",
    "bridge",
    "cli",
    "dynamics",
    "engine",
    "envfx",
    "frames",
    "params",
    "rng",
    "scenario",
    "sensors",
    "world",
]
