"""Keyed random streams.

Every random quantity in the simulator is drawn from a Philox generator keyed
by ``(master seed, index, role)``. Philox is counter based, so two streams
with different keys never overlap and the result of a draw does not depend on
what else was drawn before it or in which order cells were scheduled.
"""

import hashlib

import numpy as np

ROLES = {
    "channel": 0,
    "noise": 1,
    "data": 2,
    "weights": 3,
    "pyramid": 4,
}


def keyed_rng(seed, index=0, role="channel"):
    """Return an independent generator for ``(seed, index, role)``."""
    if role not in ROLES:
        raise ValueError(f"unknown rng role {role!r}")
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be nonnegative")
    ss = np.random.SeedSequence([int(seed), int(index), ROLES[role]])
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master, *parts):
    """Hash a master seed and a tuple of cell parameters into a 63-bit seed.

    Used for sweep cells so that a cell's result depends on its parameters
    only, never on its position in the grid.
    """
    text = ":".join([str(int(master))] + [repr(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1
