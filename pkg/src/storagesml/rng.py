"""Seeded random streams.

All randomness comes from one root seed.  A stream is identified by a small
tuple ``key`` and maps to ``Philox(SeedSequence(seed, spawn_key=key))``, a
counter-based generator whose output depends only on ``(seed, key)``.

Stream keys used in the package:

=========================  ====================================
``(FILTER,)``              particle-filter uniforms
``(SIMULATION,)``          price-path simulation
``(CML,)``                 composite-likelihood simulation
``(BOOTSTRAP, i)``         data for bootstrap / experiment replica ``i``
``(MC_REPEAT, k)``         filter seed for Monte Carlo repeat ``k``
=========================  ====================================
"""
import numpy as np

FILTER = 0
SIMULATION = 1
CML = 2
BOOTSTRAP = 3
MC_REPEAT = 4


def stream(seed, *key):
    """Return the generator for ``(seed, key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def substream_seed(seed, *key):
    """A derived integer seed, for handing a stream to code that takes a seed."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
