"""Closed-loop depth-step mission demo.

Connects to a live simulation bridge, subscribes to an agent's depth
topic, ramps the depth setpoint toward a target, and logs the measured
response. Console entry point: mariner-client-demo.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field

from . import client


@dataclass
class DepthSample:
    tick: int
    stamp: float  # simulated seconds
    depth: float  # m, positive down
    setpoint: float  # m, the setpoint active when the sample arrived


@dataclass
class MissionLog:
    target_depth: float
    samples: list = field(default_factory=list)

    def crossing_time(self, threshold: float):
        """First simulated time the measured depth reaches `threshold`,
        or None if it never does."""
        for s in self.samples:
            if s.depth >= threshold:
                return s.stamp
        return None


def ramp_setpoints(target: float, steps: int) -> list:
    """Evenly spaced setpoints ending exactly at the target."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return [target * (i + 1) / steps for i in range(steps)]


def run_mission(host: str, port: int, agent: str, target_depth: float,
                steps: int = 1, step_interval: float = 0.0,
                speed: float = 1.5, duration: float = 150.0,
                topic: str | None = None, connect_timeout: float = 10.0,
                recv_timeout: float = 30.0) -> MissionLog:
    """Run the depth-step mission and return the logged response.

    Subscribes to `topic` (default "<agent>/depth"), commands the first
    setpoint immediately, then advances the ramp every `step_interval`
    simulated seconds. Returns when the stream ends or the simulated
    clock passes `duration`.
    """
    if topic is None:
        topic = f"{agent}/depth"
    setpoints = ramp_setpoints(target_depth, steps)
    log = MissionLog(target_depth=target_depth)
    with client.connect(host, port, timeout=connect_timeout) as session:
        session.subscribe(topic)
        step = 0
        session.send_command(agent, {"mode": "setpoint",
                                     "depth": setpoints[step],
                                     "speed": speed})
        for env in session.envelopes(timeout=recv_timeout):
            if env.schema != "mariner.Depth.v1":
                continue
            log.samples.append(DepthSample(
                tick=env.tick, stamp=env.stamp,
                depth=float(env.payload["depth"]),
                setpoint=setpoints[step]))
            while (step + 1 < len(setpoints)
                   and env.stamp >= (step + 1) * step_interval):
                step += 1
                session.send_command(agent, {"mode": "setpoint",
                                             "depth": setpoints[step],
                                             "speed": speed})
            if env.stamp >= duration:
                break
    return log


def _write_log(path: str, log: MissionLog) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick", "t", "depth", "setpoint"])
        for s in log.samples:
            writer.writerow([s.tick, s.stamp, s.depth, s.setpoint])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mariner-client-demo",
        description="Depth-step mission against a live mariner bridge.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, required=True)
    parser.add_argument("--agent", default="auv0")
    parser.add_argument("--topic", default=None,
                        help="depth topic; default <agent>/depth")
    parser.add_argument("--depth", type=float, default=10.0,
                        help="target depth setpoint, m")
    parser.add_argument("--steps", type=int, default=1,
                        help="number of ramp steps to the target")
    parser.add_argument("--step-interval", type=float, default=0.0,
                        help="simulated seconds between ramp steps")
    parser.add_argument("--speed", type=float, default=1.5,
                        help="cruise speed setpoint, m/s")
    parser.add_argument("--duration", type=float, default=150.0,
                        help="simulated seconds to observe")
    parser.add_argument("--log", default=None, help="write response CSV here")
    parser.add_argument("--connect-timeout", type=float, default=10.0)
    args = parser.parse_args(argv)

    try:
        log = run_mission(args.host, args.port, args.agent, args.depth,
                          steps=args.steps, step_interval=args.step_interval,
                          speed=args.speed, duration=args.duration,
                          topic=args.topic,
                          connect_timeout=args.connect_timeout)
    except (ConnectionError, client.ClientError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.log:
        _write_log(args.log, log)
    if not log.samples:
        print("error: no depth samples received", file=sys.stderr)
        return 1
    last = log.samples[-1]
    print(f"received {len(log.samples)} depth samples over "
          f"{last.stamp:.1f} simulated seconds")
    print(f"final depth {last.depth:.2f} m (target {args.depth:.2f} m)")
    threshold = 0.975 * args.depth
    t_cross = log.crossing_time(threshold)
    if t_cross is None:
        print(f"depth never reached {threshold:.2f} m")
    else:
        print(f"depth crossed {threshold:.2f} m at t = {t_cross:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
