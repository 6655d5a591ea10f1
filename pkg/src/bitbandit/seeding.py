"""Seed-stream derivation shared by every runner.

A single run seed is split into independent substreams so that changing one
structural knob (say, the number of candidate actions) never perturbs an
unrelated source of randomness (say, the reward noise).  The rule is:

    stream(seed, tag)      = Generator(PCG64(SeedSequence([seed, tag])))
    stream(seed, tag, sub) = Generator(PCG64(SeedSequence([seed, tag, sub])))

with the fixed tags below.  SeedSequence hashing is stable across platforms,
so a (seed, tag) pair names the same stream everywhere.
"""

from __future__ import annotations

import numpy as np

NOISE = 0      # reward noise draws
ACTIONS = 1    # candidate action-set generation
CODEBOOK = 2   # epsilon-net construction
EXPLORE = 3    # pure-exploration sphere actions
THETA = 4      # unknown-parameter draw


def stream(seed: int, tag: int, sub: int | None = None) -> np.random.Generator:
    """Return the dedicated generator for one substream of a run seed."""
    entropy = [int(seed), int(tag)] if sub is None else [int(seed), int(tag), int(sub)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
