"""Seeded random-number streams.

Every random decision in the package flows from one user seed through a
named subsystem stream, so ingest / training / evaluation are individually
reproducible no matter which other subsystems ran before them.
"""

import numpy as np

# Fixed stream indices; changing these changes every derived stream.
STREAMS = {
    "ingest": 0,
    "train": 1,
    "eval": 2,
    "init": 3,
    "synth": 4,
}


def stream_rng(seed, name, *extra):
    """Generator for subsystem `name`, optionally keyed further by `extra` ints.

    Same (seed, name, extra) always yields the same stream.
    """
    if name not in STREAMS:
        raise KeyError(f"unknown rng stream {name!r}; known: {sorted(STREAMS)}")
    key = [int(seed), STREAMS[name]] + [int(x) for x in extra]
    return np.random.default_rng(key)
