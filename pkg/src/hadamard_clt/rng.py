"""Counter-based random streams keyed by (seed, stream, trial, attempt).

Each trial draws from its own Philox generator, so the numbers a trial sees
do not depend on how trials are grouped or scheduled across workers.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameter

MASK64 = (1 << 64) - 1

# stream identifiers; distinct experiments never share random numbers
STREAM_PATH = 1
STREAM_SWEEP = 2
STREAM_CCLT = 3
STREAM_RECONSTRUCT = 4
STREAM_SELECTION = 5
STREAM_PATH_SAMPLE = 6


def trial_generator(seed: int, stream: int, trial: int, attempt: int = 0) -> np.random.Generator:
    if not 0 <= trial < 1 << 32:
        raise InvalidParameter("trial index out of range")
    if not 0 <= attempt < 1 << 8 or not 0 <= stream < 1 << 24:
        raise InvalidParameter("attempt or stream index out of range")
    key = np.array([seed & MASK64, (stream << 40) | (trial << 8) | attempt], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_block(seed: int, stream: int, trials, count: int, attempts=None) -> np.ndarray:
    """``len(trials) x count`` uniforms, row ``i`` from trial ``trials[i]``."""
    trials = list(trials)
    attempts = [0] * len(trials) if attempts is None else list(attempts)
    out = np.empty((len(trials), count))
    for i, (t, a) in enumerate(zip(trials, attempts)):
        out[i] = trial_generator(seed, stream, t, a).random(count)
    return out
