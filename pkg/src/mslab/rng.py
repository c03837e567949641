"""Deterministic random streams.

Every Monte Carlo work item owns its generator, keyed by the run seed and the
item's coordinates, so results do not depend on scheduling or worker count.
"""

import os

import numpy as np

WORKERS_ENV = "MSLAB_WORKERS"


def stream(seed, *keys):
    """Return an independent generator for ``(seed, *keys)``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(k) for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def default_workers():
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return 1
    try:
        return max(1, int(value))
    except ValueError:
        return 1
