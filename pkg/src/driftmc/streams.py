"""Deterministic random-stream derivation.

Every random draw in the package comes from a generator built by
:func:`substream`, keyed by an integer seed plus a tuple of stream ids
(purpose, block index, step index, ...).  Two runs with the same seed
therefore consume identical random numbers regardless of how work is
split across worker threads.
"""

import numpy as np

# Purpose ids; keep stable, they are part of the reproducibility contract.
PARAMS = 1     # model parameter sampling
TRAIN = 2      # training batches
ESTIMATE = 3   # pricing path blocks


def substream(seed, *ids):
    """Return a Generator for the stream (seed, *ids)."""
    key = [int(seed)] + [int(i) for i in ids]
    return np.random.default_rng(key)
