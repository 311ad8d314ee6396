"""Finite differences on radial grids.

Stencil weights come from Fornberg's recurrence, so graded grids get the
same treatment as uniform spacing. Radial fields are extended through the
coordinate origin by parity before differencing (odd for the sphere-radius
profile, even for densities and the radial metric factor); that extension
is what removes the coordinate singularity of radial operators at s = 0.
Interior first derivatives are 4th order, second derivatives at least 3rd;
near the origin the extra order is load-bearing, because curvature
quotients divide differences by powers of the radius.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

NPTS = 5  # stencil width; half-width 2 ghost nodes at the origin


def fd_weights(z: float, nodes, m: int) -> np.ndarray:
    """Differentiation weights at point z from arbitrary nodes.

    Returns an array of shape (len(nodes), m+1); column k holds the weights
    of the k-th derivative. Exact for polynomials of degree len(nodes)-1.
    """
    x = np.asarray(nodes, dtype=float)
    k = x.size
    w = np.zeros((k, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    w[0, 0] = 1.0
    for i in range(1, k):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for s in range(mn, 0, -1):
                    w[i, s] = c1 * (s * w[i - 1, s - 1] - c5 * w[i - 1, s]) / c2
                w[i, 0] = -c1 * c5 * w[i - 1, 0] / c2
            for s in range(mn, 0, -1):
                w[j, s] = (c4 * w[j, s] - s * w[j, s - 1]) / c3
            w[j, 0] = c4 * w[j, 0] / c3
        c1 = c2
    return w


class RadialStencils:
    """Precomputed 5-point derivative stencils for one radial grid.

    The grid must start at x[0] = 0 and increase strictly. Ghost nodes at
    -x[2], -x[1] carry parity copies, so stencils near the origin stay
    centered; the outer edge uses shifted windows.
    """

    def __init__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.size < NPTS + 2:
            raise InvalidInputError("grid needs at least %d nodes" % (NPTS + 2))
        if x[0] != 0.0:
            raise InvalidInputError("radial grid must start at 0")
        if np.any(np.diff(x) <= 0):
            raise InvalidInputError("radial grid must increase strictly")
        self.x = x
        n = x.size
        half = NPTS // 2
        self.half = half
        xe = np.concatenate([-x[half:0:-1], x])
        # node i sits at extended index i + half; center windows, clip right
        starts = np.minimum(np.arange(n), n + half - NPTS)
        W1 = np.empty((n, NPTS))
        W2 = np.empty((n, NPTS))
        for i in range(n):
            w = fd_weights(x[i], xe[starts[i]:starts[i] + NPTS], 2)
            W1[i] = w[:, 1]
            W2[i] = w[:, 2]
        self._windows = starts[:, None] + np.arange(NPTS)[None, :]
        self.W1 = W1
        self.W2 = W2
        # third derivative at the origin, for L'Hopital limits of K1, K2
        self._w3_origin = fd_weights(0.0, xe[:2 * half + 1], 3)[:, 3]

    def _extend(self, f, parity):
        h = self.half
        return np.concatenate([parity * f[h:0:-1], f])

    def d1(self, f, parity=1) -> np.ndarray:
        fe = self._extend(np.asarray(f, dtype=float), parity)
        return np.einsum("ij,ij->i", self.W1, fe[self._windows])

    def d2(self, f, parity=1) -> np.ndarray:
        fe = self._extend(np.asarray(f, dtype=float), parity)
        return np.einsum("ij,ij->i", self.W2, fe[self._windows])

    def d3_origin(self, f, parity=1) -> float:
        fe = self._extend(np.asarray(f, dtype=float), parity)
        k = self._w3_origin.size
        return float(self._w3_origin @ fe[:k])
