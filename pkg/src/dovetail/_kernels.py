"""Numba kernels for the two inner loops numpy cannot express in one pass.

Both kernels release the GIL so blocks can run concurrently from the thread
pool.  ``cache=True`` persists compiled variants across processes.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def scatter_block(keys, payloads, has_payload, bids, lo, hi, run, out_keys, out_payloads):
    """Stable scatter of records ``[lo, hi)`` to precomputed bucket offsets.

    ``run`` is this block's row of the offset matrix and is advanced in
    place; destinations of distinct blocks are disjoint by construction.
    """
    for i in range(lo, hi):
        b = bids[i]
        d = run[b]
        out_keys[d] = keys[i]
        if has_payload:
            out_payloads[d] = payloads[i]
        run[b] = d + 1


@njit(nogil=True, cache=True)
def reverse_range(keys, payloads, has_payload, lo, hi):
    """Reverse records ``[lo, hi)`` in place by swapping from both ends."""
    i = lo
    j = hi - 1
    while i < j:
        keys[i], keys[j] = keys[j], keys[i]
        if has_payload:
            payloads[i], payloads[j] = payloads[j], payloads[i]
        i += 1
        j -= 1
