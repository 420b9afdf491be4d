"""Deterministic random-stream construction.

All randomness derives from counter-based Philox streams keyed by the
run's master seed, so results are bit-reproducible for a fixed seed no
matter how work is chunked or parallelized.

Splitting rules (fixed, relied on by regression values):

* Snapshot Monte Carlo: trials are processed in fixed blocks of
  ``MC_BLOCK_TRIALS``.  Block ``b`` draws from Philox keyed by the master
  seed with counter ``b << 128``; uniforms are laid out trial-major,
  one column per leaf instance in tree preorder.
* Temporal simulation: a single Philox stream (counter origin 0) supplies
  one uniform per (timestep, leaf instance), step-major.  The draw for
  step t and instance i is stream position ``t * n_instances + i``,
  independent of simulation history, which also yields the common-random-
  numbers coupling used for escalation comparisons.
"""

from __future__ import annotations

import numpy as np

MC_BLOCK_TRIALS = 8192
SIM_CHUNK_STEPS = 4096


def _philox_key(seed: int) -> np.ndarray:
    return np.random.SeedSequence(seed).generate_state(2, np.uint64)


def mc_block_generator(seed: int, block_index: int) -> np.random.Generator:
    """Independent uniform stream for one Monte Carlo trial block."""
    bg = np.random.Philox(key=_philox_key(seed), counter=block_index << 128)
    return np.random.Generator(bg)


def sim_stream(seed: int) -> np.random.Generator:
    """Sequential uniform stream for one temporal simulation run."""
    return np.random.Generator(np.random.Philox(key=_philox_key(seed)))
