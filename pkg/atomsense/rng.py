# [file name]: atomsense/rng.py
"""
Counter-based random streams.

Each noise source draws from its own Philox generator keyed by
(master seed, stream id, index...). Chunked work keys streams by chunk
index, so results do not depend on how many threads process the chunks.
"""

import numpy as np

# Stream ids are part of the determinism contract; append only.
STREAM_IDS = {
    "vibration": 1,
    "vibration_residual": 2,
    "classical_accelerometer": 3,
    "classical_gyroscope": 4,
    "detection": 5,
    "launch": 6,
    "common_mode": 7,
    "accel_floor": 8,
    "rotation_floor": 9,
    "ensemble": 10,
    "spectrum": 11,
    "velocity_drift": 12,
    "fringe_scan": 13,
}


def stream(master_seed: int, name: str, *index: int) -> np.random.Generator:
    """Return the generator for a named stream (and optional sub-indices)."""
    if name not in STREAM_IDS:
        raise KeyError(f"unknown random stream '{name}'")
    key = (STREAM_IDS[name],) + tuple(int(i) for i in index)
    seq = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
