"""Seed derivation and a deterministic trial map shared by the simulators."""

import random
from concurrent.futures import ProcessPoolExecutor

import numpy as np


def derive_seed(seed, *keys):
    """Hash ``(seed, *keys)`` into a 64-bit integer seed.

    Trial ``k`` of an experiment always receives ``derive_seed(seed, k)``, so
    growing the trial count never reshuffles earlier trials.
    """
    state = np.random.SeedSequence([int(seed), *map(int, keys)]).generate_state(2, np.uint32)
    return (int(state[0]) << 32) | int(state[1])


def make_rng(seed, *keys):
    """A ``random.Random`` stream for ``(seed, *keys)``."""
    return random.Random(derive_seed(seed, *keys))


def as_rng(rng_or_seed):
    if isinstance(rng_or_seed, random.Random):
        return rng_or_seed
    return make_rng(rng_or_seed)


def trial_map(fn, args, workers=1):
    """``[fn(a) for a in args]``, optionally spread over worker processes.

    Results come back in input order regardless of completion order.
    """
    args = list(args)
    if workers is None or workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args, chunksize=max(1, len(args) // (4 * workers))))
