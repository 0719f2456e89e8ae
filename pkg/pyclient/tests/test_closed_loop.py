"""End-to-end acceptance: the demo client drives a live simulator run
over the wire and observes the commanded depth response.

Each criterion prints one [PASS]/[FAIL] line with the measured numbers.
"""

import json
import os
import socket
import subprocess
import sys

from mariner_client import wire
from mariner_client.demo import main as demo_main, ramp_setpoints, run_mission

CORPUS = os.path.join(os.path.dirname(__file__), "data", "golden_frames.bin")


def check(name, cond, detail):
    print(f"[{'PASS' if cond else 'FAIL'}] {name}: {detail}")
    assert cond, f"{name}: {detail}"


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def write_scenario(tmp_path, port, duration_ticks=4500):
    doc = {
        "name": "depth-step-demo",
        "ticks_per_sec": 30.0,
        "duration_ticks": duration_ticks,
        "rng_seed": 3,
        "world": {"kind": "flat", "depth": 30.0, "size_m": [600.0, 600.0],
                  "cell_size": 50.0, "origin": [-300.0, -300.0]},
        "bridge": {"port": port, "topics": ["*"]},
        "agents": [{
            "name": "auv0",
            "initial_pose": [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            "initial_velocity": [1.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            "sensors": [{"name": "depth", "kind": "depth", "rate_ticks": 3}],
        }],
    }
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(doc))
    return path


def launch_run(tmp_path, path):
    return subprocess.Popen(
        [sys.executable, "-m", "mariner.cli", "run",
         "--scenario", str(path), "--out", str(tmp_path / "out")],
        cwd="/root/pkg", stdout=subprocess.PIPE, stderr=subprocess.PIPE,
        text=True)


def test_criterion_closed_loop_depth_step(tmp_path):
    """[SECONDARY] demo client commands a 10 m depth setpoint against a
    live run and sees published depth cross 9.75 m within 150 s."""
    port = free_port()
    proc = launch_run(tmp_path, write_scenario(tmp_path, port))
    try:
        log = run_mission("127.0.0.1", port, "auv0", target_depth=10.0,
                          speed=1.5, duration=150.0, connect_timeout=15.0)
    finally:
        out, err = proc.communicate(timeout=120)
    assert proc.returncode == 0, err
    t_cross = log.crossing_time(9.75)
    check("closed-loop depth step",
          t_cross is not None and t_cross <= 150.0 and len(log.samples) > 100,
          f"depth crossed 9.75 m at t = {t_cross} s "
          f"(limit 150 s), {len(log.samples)} depth samples")


def test_criterion_golden_corpus_decode(tmp_path):
    """[SECONDARY] the simulator-generated frame corpus decodes 100%."""
    with open(CORPUS, "rb") as fh:
        data = fh.read()
    frames = list(wire.iter_frames(data))
    decoded = sum(1 for f in frames if wire.decode(f) is not None)
    check("golden-frame corpus",
          len(frames) == 510 and decoded == len(frames),
          f"{decoded}/{len(frames)} frames decoded")


def test_demo_console_entry_with_ramp(tmp_path, capsys):
    """The installed entry point runs a ramped mission end to end and
    logs the response to CSV."""
    port = free_port()
    proc = launch_run(tmp_path, write_scenario(tmp_path, port))
    log_path = tmp_path / "mission.csv"
    try:
        rc = demo_main(["--port", str(port), "--agent", "auv0",
                        "--depth", "10.0", "--steps", "2",
                        "--step-interval", "20.0", "--speed", "1.5",
                        "--duration", "140.0", "--log", str(log_path)])
    finally:
        out, err = proc.communicate(timeout=120)
    assert proc.returncode == 0, err
    assert rc == 0
    printed = capsys.readouterr().out
    assert "depth samples" in printed
    assert "depth crossed 9.75" in printed
    rows = log_path.read_text().splitlines()
    assert rows[0] == "tick,t,depth,setpoint"
    assert len(rows) > 100
    # ramp: first setpoint is 5 m, final is 10 m
    assert rows[1].endswith(",5.0")
    assert rows[-1].endswith(",10.0")


def test_demo_connect_failure_exit_code(capsys):
    rc = demo_main(["--port", str(free_port()), "--connect-timeout", "0.3"])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_ramp_setpoints_shape():
    assert ramp_setpoints(10.0, 1) == [10.0]
    assert ramp_setpoints(10.0, 4) == [2.5, 5.0, 7.5, 10.0]
