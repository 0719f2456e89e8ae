"""Regenerate the golden frame corpus for the client wire tests.

Encodes a deterministic mix of frames with the simulator's own bridge
module (the authority on the wire format) and concatenates them into
tests/data/golden_frames.bin. The client test replays the corpus and
must decode every frame.

Usage: python3 tools/gen_golden_corpus.py   (from pyclient/, with the
mariner package importable)
"""

import os
import random
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "..", "src"))

from mariner import bridge  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "tests", "data",
                   "golden_frames.bin")


def rand_value(rng, depth=0):
    kind = rng.randrange(7 if depth < 2 else 5)
    if kind == 0:
        return rng.normalvariate(0.0, 1.0) * 10.0 ** rng.randrange(-3, 4)
    if kind == 1:
        return rng.randrange(-10**9, 10**9)
    if kind == 2:
        return rng.choice([None, True, False])
    if kind == 3:
        return "".join(chr(rng.randrange(0x20, 0x2FA0))
                       for _ in range(rng.randrange(0, 12)))
    if kind == 4:
        return float(rng.randrange(-1000, 1000))
    if kind == 5:
        return [rand_value(rng, depth + 1) for _ in range(rng.randrange(0, 4))]
    return {f"k{i}": rand_value(rng, depth + 1)
            for i in range(rng.randrange(0, 3))}


def payload_for(rng, schema):
    payload = {f: rand_value(rng) for f in bridge.SCHEMAS[schema]}
    for _ in range(rng.randrange(0, 3)):
        payload[f"extra_{rng.randrange(100)}"] = rand_value(rng)
    return payload


def main() -> None:
    rng = random.Random(20260824)
    frames = []
    schemas = sorted(bridge.SCHEMAS)
    for i in range(480):
        schema = schemas[i % len(schemas)]
        frames.append(bridge.encode(bridge.Envelope(
            topic=rng.choice(["auv0/depth", "auv0/state", "beta/echo",
                              "unicode/üβ海"]),
            schema=schema, tick=i + 1,
            stamp=(i + 1) / 30.0, payload=payload_for(rng, schema))))
    for i in range(10):
        frames.append(bridge.subscribe_frame(
            rng.choice(["*", "auv0/*", "auv?/depth", ""])))
        frames.append(bridge.command_frame(
            f"agent{i}", {"mode": "setpoint", "depth": rng.uniform(0, 30)}))
        frames.append(bridge.error_frame(f"synthetic error {i} ⚠"))
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "wb") as fh:
        for frame in frames:
            fh.write(frame)
    print(f"wrote {len(frames)} frames to {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
