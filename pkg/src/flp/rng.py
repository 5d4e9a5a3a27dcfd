"""32-bit linear congruential generator used for cheap uniform draws."""

from __future__ import annotations

import numpy as np

LCG_A = 1664525
LCG_C = 1013904223
MASK32 = 0xFFFFFFFF
_SCALE = 1.0 / 2**32


def lcg_next(state: int) -> tuple[int, float]:
    """Advance one step -> (new state, uniform in [0, 1))."""
    s = (LCG_A * state + LCG_C) & MASK32
    return s, s * _SCALE


class Lcg:
    """Stateful LCG with vectorised block draws via jump-ahead tables.

    Drawing ``n`` values at once yields exactly the same sequence as ``n``
    calls to :func:`lcg_next`.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & MASK32
        self._mul = np.zeros(0, dtype=np.uint64)
        self._add = np.zeros(0, dtype=np.uint64)

    def _grow(self, n: int):
        k = len(self._mul)
        if k >= n:
            return
        n = max(n, 2 * k)
        mul = [int(v) for v in self._mul]
        add = [int(v) for v in self._add]
        a, c = (mul[-1], add[-1]) if mul else (1, 0)
        for _ in range(len(mul), n):
            a, c = (LCG_A * a) & MASK32, (LCG_A * c + LCG_C) & MASK32
            mul.append(a)
            add.append(c)
        self._mul = np.array(mul, dtype=np.uint64)
        self._add = np.array(add, dtype=np.uint64)

    def next_float(self) -> float:
        self.state, u = lcg_next(self.state)
        return u

    def uniforms(self, n: int) -> np.ndarray:
        if n <= 0:
            return np.zeros(0)
        self._grow(n)
        # uint64 products wrap mod 2^64, which preserves the value mod 2^32
        states = (self._mul[:n] * np.uint64(self.state) + self._add[:n]) & np.uint64(MASK32)
        self.state = int(states[-1])
        return states.astype(np.float64) * _SCALE
