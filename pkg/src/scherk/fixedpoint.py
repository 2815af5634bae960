"""Anderson acceleration for fixed-point iterations x = G(x)."""

from __future__ import annotations

import numpy as np


class Anderson:
    """Type-II Anderson mixing with a bounded history.

    Call :meth:`step` with the current iterate and its image under G; the
    return value is the next iterate.  ``depth = 0`` gives plain Picard.
    """

    def __init__(self, depth: int = 5, rcond: float = 1e-10):
        self.depth = depth
        self.rcond = rcond
        self._x = []
        self._f = []
        self._g = []

    def step(self, x, gx) -> np.ndarray:
        shape = np.shape(x)
        x = np.ravel(x).astype(float)
        gx = np.ravel(gx).astype(float)
        f = gx - x
        if self.depth == 0:
            return gx.reshape(shape)
        self._x.append(x)
        self._f.append(f)
        self._g.append(gx)
        if len(self._f) > self.depth + 1:
            self._x.pop(0)
            self._f.pop(0)
            self._g.pop(0)
        if len(self._f) == 1:
            return gx.reshape(shape)
        dF = np.diff(np.array(self._f), axis=0).T
        dG = np.diff(np.array(self._g), axis=0).T
        gamma = np.linalg.lstsq(dF, f, rcond=self.rcond)[0]
        return (gx - dG @ gamma).reshape(shape)

    def reset(self) -> None:
        self._x.clear()
        self._f.clear()
        self._g.clear()
