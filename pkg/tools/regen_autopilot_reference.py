#!/usr/bin/env python3
"""Regenerate the frozen fine-step autopilot reference trajectories.

Runs the closed-loop depth and heading regressions at dt = 1e-4 s and
stores the trajectories downsampled to 10 Hz in
tests/data/autopilot_reference.npz. The test suite compares the 30 Hz
production runs against these curves, so the controllers must be
step-size independent for the comparison to pass.

This is slow (tens of minutes); it only needs to run when the vehicle
parameters or the control laws change.
"""

import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from mariner.dynamics import ControlCommand, DynamicsManager  # noqa: E402
from mariner.params import default_remus100_params  # noqa: E402
from mariner.world import flat_world  # noqa: E402

DT = 1e-4
SAMPLE_HZ = 10

DEPTH_DURATION = 120.0
DEPTH_SETPOINT = 10.0
HEADING_DURATION = 90.0
HEADING_SETPOINT = np.pi / 2.0
CRUISE_SPEED = 1.5


def run(initial_eta, command, duration):
    world = flat_world(50.0, (4000.0, 4000.0), 10.0, origin=(-2000.0, -2000.0))
    mgr = DynamicsManager(dt=DT, world=world)
    mgr.add_agent("a", default_remus100_params(), eta=initial_eta,
                  nu=[CRUISE_SPEED, 0, 0, 0, 0, 0])
    n_steps = int(round(duration / DT))
    stride = int(round(1.0 / (SAMPLE_HZ * DT)))
    ts, zs, psis = [], [], []
    t0 = time.perf_counter()
    for i in range(1, n_steps + 1):
        state = mgr.tick({"a": command})["a"]
        if i % stride == 0:
            ts.append(i * DT)
            zs.append(state.eta[2])
            psis.append(state.eta[5])
        if i % (n_steps // 10) == 0:
            print(f"  {100 * i // n_steps}% "
                  f"({time.perf_counter() - t0:.0f} s elapsed)", flush=True)
    return np.array(ts), np.array(zs), np.array(psis)


def main():
    out = os.path.join(os.path.dirname(__file__), "..", "tests", "data",
                       "autopilot_reference.npz")
    os.makedirs(os.path.dirname(out), exist_ok=True)

    print("depth step 0 -> 10 m ...", flush=True)
    cmd = ControlCommand(mode="setpoint", depth=DEPTH_SETPOINT,
                         speed=CRUISE_SPEED)
    t_d, z_d, _ = run([0, 0, 0, 0, 0, 0], cmd, DEPTH_DURATION)

    print("heading step 0 -> 90 deg ...", flush=True)
    cmd = ControlCommand(mode="setpoint", depth=DEPTH_SETPOINT,
                         heading=HEADING_SETPOINT, speed=CRUISE_SPEED)
    t_h, _, psi_h = run([0, 0, DEPTH_SETPOINT, 0, 0, 0], cmd, HEADING_DURATION)

    np.savez(out,
             dt=DT, sample_hz=SAMPLE_HZ, cruise_speed=CRUISE_SPEED,
             depth_setpoint=DEPTH_SETPOINT, heading_setpoint=HEADING_SETPOINT,
             depth_t=t_d, depth_z=z_d,
             heading_t=t_h, heading_psi=psi_h)
    print(f"wrote {os.path.abspath(out)}")


if __name__ == "__main__":
    main()
