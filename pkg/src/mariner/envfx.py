"""Environmental forcing fields: volumetric ocean currents and a Gerstner
wave surface, plus the slice-based buoyancy model that consumes it.

Currents are velocity fields (they enter the dynamics through the
relative velocity nu_r, never as raw forces, to avoid double-counting
drag). Waves use deep-water dispersion omega = sqrt(g k); surface height
is reported positive up, so the surface sits at NED z = -height.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .frames import euler_to_rot


class FieldError(ValueError):
    pass


# ---------------------------------------------------------------------------
# currents


@dataclass
class GridCurrent:
    origin: np.ndarray  # (3,) m
    cell_size: float
    values: np.ndarray  # (nx, ny, nz, 3) m/s

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.cell_size <= 0:
            raise FieldError("grid cell_size must be positive")
        if self.values.ndim != 4 or self.values.shape[3] != 3:
            raise FieldError("grid values must have shape (nx, ny, nz, 3)")
        if not np.all(np.isfinite(self.values)):
            raise FieldError("grid current vectors must be finite")


@dataclass
class CurrentField:
    kind: str  # constant | shear | grid
    constant: np.ndarray = field(default_factory=lambda: np.zeros(3))
    surface_velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    decay_depth: float = 10.0
    grid: GridCurrent | None = None

    def __post_init__(self):
        self.constant = np.asarray(self.constant, dtype=float)
        self.surface_velocity = np.asarray(self.surface_velocity, dtype=float)


def sample_current(fld: CurrentField, position, t: float = 0.0) -> np.ndarray:
    """Current velocity (m/s, NED) at a position; grid queries outside the
    bounds clamp to the nearest edge."""
    p = np.asarray(position, dtype=float)
    if fld.kind == "constant":
        return fld.constant.copy()
    if fld.kind == "shear":
        z = max(p[2], 0.0)  # above the surface use the surface value
        return fld.surface_velocity * math.exp(-z / fld.decay_depth)
    if fld.kind == "grid":
        g = fld.grid
        nx, ny, nz, _ = g.values.shape
        f = (p - g.origin) / g.cell_size
        f = np.clip(f, 0.0, [nx - 1, ny - 1, nz - 1])
        i0 = np.minimum(f.astype(int), [nx - 2, ny - 2, nz - 2])
        i0 = np.maximum(i0, 0)
        w = f - i0
        out = np.zeros(3)
        for di in (0, 1):
            for dj in (0, 1):
                for dk in (0, 1):
                    wt = ((w[0] if di else 1 - w[0])
                          * (w[1] if dj else 1 - w[1])
                          * (w[2] if dk else 1 - w[2]))
                    if wt != 0.0:
                        out += wt * g.values[i0[0] + di, i0[1] + dj, i0[2] + dk]
        return out
    raise FieldError(f"unknown current kind {fld.kind!r}")


GRID_MAGIC = "mariner-current-grid"


def save_grid_current(path, grid: GridCurrent) -> None:
    """Write a grid field file: one JSON header line + flat little-endian
    float32 triplets in x-major, then y, then z order."""
    nx, ny, nz, _ = grid.values.shape
    header = json.dumps({
        "magic": GRID_MAGIC,
        "origin": [float(v) for v in grid.origin],
        "cell_size": grid.cell_size,
        "dims": [nx, ny, nz],
    })
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(grid.values.astype("<f4").tobytes())


def load_grid_current(path) -> GridCurrent:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FieldError(f"{path}: malformed grid header") from exc
        if header.get("magic") != GRID_MAGIC:
            raise FieldError(f"{path}: not a current grid file")
        nx, ny, nz = header["dims"]
        raw = fh.read(nx * ny * nz * 3 * 4)
        if len(raw) != nx * ny * nz * 3 * 4:
            raise FieldError(f"{path}: truncated grid payload")
        values = np.frombuffer(raw, dtype="<f4").astype(float)
        values = values.reshape(nx, ny, nz, 3)
    return GridCurrent(origin=np.array(header["origin"]),
                       cell_size=float(header["cell_size"]), values=values)


# ---------------------------------------------------------------------------
# Gerstner waves


@dataclass
class WaveComponent:
    amplitude: float
    wavelength: float
    direction: np.ndarray  # unit 2-vector
    phase: float = 0.0
    steepness: float = 0.0  # Q in [0, 1]

    def __post_init__(self):
        if self.wavelength <= 0:
            raise FieldError("wavelength must be positive")
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise FieldError("wave direction must be non-zero")
        self.direction = d / n
        k = 2.0 * math.pi / self.wavelength
        if not (0.0 <= self.steepness <= 1.0) or self.steepness * k * self.amplitude > 1.0 + 1e-12:
            raise FieldError("steepness * k * amplitude must lie in [0, 1]")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength


@dataclass
class WaveField:
    components: list = field(default_factory=list)
    gravity: float = 9.81

    def omega(self, comp: WaveComponent) -> float:
        return math.sqrt(self.gravity * comp.wavenumber)


@dataclass
class WaveSample:
    surface_height: float  # m, positive up
    normal: np.ndarray  # unit 3-vector, NED (flat sea -> (0, 0, -1))
    orbital_velocity: np.ndarray  # m/s, NED
    horizontal_displacement: np.ndarray  # m, (x, y)


def wave_sample(fld: WaveField, x: float, y: float, t: float,
                depth: float = 0.0) -> WaveSample:
    """Superposed Gerstner components at (x, y, t).

    Orbital velocity is the deep-water linear-theory value attenuated by
    exp(-k * depth) when evaluated `depth` meters below the surface.
    """
    height = 0.0
    disp = np.zeros(2)
    grad = np.zeros(2)  # d(height)/d(x, y)
    q_term = 0.0
    orbital = np.zeros(3)
    for comp in fld.components:
        k = comp.wavenumber
        omega = math.sqrt(fld.gravity * k)
        theta = k * (comp.direction[0] * x + comp.direction[1] * y) \
            - omega * t + comp.phase
        c = math.cos(theta)
        s = math.sin(theta)
        height += comp.amplitude * c
        disp += -comp.steepness * comp.amplitude * comp.direction * s
        grad += -k * comp.amplitude * comp.direction * s
        q_term += comp.steepness * k * comp.amplitude * c
        decay = math.exp(-k * max(depth, 0.0))
        # linear-theory particle velocities; horizontal in phase with the
        # elevation, vertical (positive up) in quadrature
        u_h = comp.amplitude * omega * decay * c
        w_up = comp.amplitude * omega * decay * s
        orbital[0] += u_h * comp.direction[0]
        orbital[1] += u_h * comp.direction[1]
        orbital[2] += -w_up  # NED z is down
    # surface tangent basis of the displaced surface; z-up normal is
    # (-grad, 1 - q_term) which we flip into NED
    n_up = np.array([-grad[0], -grad[1], 1.0 - q_term])
    n_up /= np.linalg.norm(n_up)
    normal = np.array([n_up[0], n_up[1], -n_up[2]])
    return WaveSample(surface_height=height, normal=normal,
                      orbital_velocity=orbital, horizontal_displacement=disp)


def surface_z(fld: WaveField | None, x: float, y: float, t: float) -> float:
    """NED z of the sea surface at (x, y); 0 for a flat sea."""
    if fld is None or not fld.components:
        return 0.0
    return -wave_sample(fld, x, y, t).surface_height


# ---------------------------------------------------------------------------
# buoyancy


def _submerged_circle_fraction(axis_depth: float, radius: float) -> float:
    """Fraction of a circle (radius r, center `axis_depth` below the
    waterline, positive down) lying underwater."""
    if axis_depth <= -radius:
        return 0.0
    if axis_depth >= radius:
        return 1.0
    H = axis_depth + radius  # submergence of the lowest point
    r = radius
    area = r * r * math.acos((r - H) / r) - (r - H) * math.sqrt(2 * r * H - H * H)
    return area / (math.pi * r * r)


def submerged_buoyancy_wrench(params, eta) -> np.ndarray:
    """Analytic fully-submerged buoyancy wrench rho*g*V applied at r_cb,
    in the body frame about the body origin."""
    eta = np.asarray(eta, dtype=float)
    B = (params.environmental.water_density * params.environmental.gravity
         * params.hydrostatic.displaced_volume)
    R = euler_to_rot(eta[3], eta[4], eta[5])
    f_body = R.T @ np.array([0.0, 0.0, -B])
    r_cb = np.asarray(params.hydrostatic.r_cb, dtype=float)
    return np.concatenate([f_body, np.cross(r_cb, f_body)])


def buoyancy_force(wavefield: WaveField | None, params, eta, t: float = 0.0,
                   n_slices: int = 10) -> np.ndarray:
    """Buoyancy wrench (body frame, about the body origin) from a
    longitudinal array of cylindrical hull slices against the local free
    surface. Fully submerged this reduces exactly to rho*g*V at r_cb."""
    eta = np.asarray(eta, dtype=float)
    rho = params.environmental.water_density
    g = params.environmental.gravity
    vol = params.hydrostatic.displaced_volume
    r_cb = np.asarray(params.hydrostatic.r_cb, dtype=float)
    L = params.physical.length
    radius = params.physical.diameter / 2.0
    R = euler_to_rot(eta[3], eta[4], eta[5])
    slice_vol = vol / n_slices
    xs = (np.arange(n_slices) + 0.5) / n_slices - 0.5  # fractions of length
    total = np.zeros(6)
    up_body = R.T @ np.array([0.0, 0.0, -1.0])
    for fx in xs:
        r_body = r_cb + np.array([fx * L, 0.0, 0.0])
        p_world = eta[:3] + R @ r_body
        z_surf = surface_z(wavefield, p_world[0], p_world[1], t)
        frac = _submerged_circle_fraction(p_world[2] - z_surf, radius)
        if frac == 0.0:
            continue
        f_body = rho * g * slice_vol * frac * up_body
        total[:3] += f_body
        total[3:] += np.cross(r_body, f_body)
    return total
