"""Counter-based random streams for partition-independent Monte Carlo.

Every random quantity in a run is addressed as (field, index): one
Philox stream per named field, consuming a fixed number of uniform
doubles per trial/slot index.  A worker handling indices [lo, hi) reads
exactly the same values irrespective of how the run is chunked, which
makes event logs byte-identical for a given (config, seed) under any
partitioning.

Only ``random()`` draws are taken from field streams (fixed consumption);
normals are produced by inverting the standard normal CDF.
"""

from __future__ import annotations

import numpy as np
from numpy.random import Generator, Philox, SeedSequence
from scipy.special import ndtri

# doubles per Philox counter increment
_BLOCK = 4

# clip for ndtri: keeps arguments strictly inside (0, 1)
_U_LO = 1e-16
_U_HI = 1.0 - 1e-16


class FieldStreams:
    """Named Philox substreams derived from one master seed."""

    # field -> doubles consumed per index
    FIELDS = {
        "emit": 1,        # per trial: emission outcome
        "detune": 2,      # per trial: Gaussian frequency offset, photons 0/1
        "detune_lor": 2,  # per trial: Lorentzian frequency offset, photons 0/1
        "width": 2,       # per trial: envelope-width z-score, photons 0/1
        "route": 2,       # per trial: PBS routing, photons 0/1
        "time": 2,        # per trial: detection-time quantile, photons 0/1
        "port": 2,        # per trial: singleton port choice, photons 0/1
        "detjit": 2,      # per trial: detector-jitter z-score, photons 0/1
        "swap": 1,        # per slot: (t1, t2) ordering in a pair
        "cross": 1,       # per slot: opposite-vs-same port outcome
        "orient": 1,      # per slot: which detector(s) fired
        "dark": 0,        # unindexed: dark-count draws, read sequentially
    }

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        root = SeedSequence(self.master_seed)
        children = root.spawn(len(self.FIELDS))
        self._seeds = dict(zip(self.FIELDS, children))

    def _generator(self, field: str) -> Generator:
        return Generator(Philox(self._seeds[field]))

    def read(self, field: str, lo: int, n_index: int) -> np.ndarray:
        """Uniforms for indices [lo, lo + n_index) of a per-index field.

        Returns an (n_index, k) array for fields with k > 1 draws per
        index, else (n_index,).
        """
        k = self.FIELDS[field]
        if k == 0:
            raise ValueError(f"field {field!r} is not per-index")
        start = lo * k
        count = n_index * k
        g = self._generator(field)
        g.bit_generator.advance(start // _BLOCK)
        pad = start % _BLOCK
        vals = g.random(pad + count)[pad:]
        return vals.reshape(n_index, k) if k > 1 else vals

    def normals(self, field: str, lo: int, n_index: int) -> np.ndarray:
        """Standard-normal variates via inverse-CDF of the field uniforms."""
        u = np.clip(self.read(field, lo, n_index), _U_LO, _U_HI)
        return ndtri(u)

    def dark_generator(self) -> Generator:
        """Dedicated generator for dark counts (drawn once per run)."""
        return self._generator("dark")
