"""Cached Gauss rules on the unit interval."""

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


@lru_cache(maxsize=None)
def gauss_legendre(m):
    """Nodes and weights of the m-point Gauss-Legendre rule on [0, 1]."""
    x, w = roots_legendre(m)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def gauss_jacobi(m, gamma):
    """Nodes and weights for int_0^1 xi**gamma f(xi) dxi (gamma > -1)."""
    x, w = roots_jacobi(m, 0.0, gamma)
    return 0.5 * (x + 1.0), w * 2.0 ** (-gamma - 1.0)


def composite_gauss(breaks, m):
    """Composite m-point Gauss-Legendre rule on the panels given by `breaks`."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = gauss_legendre(m)
    a = breaks[:-1, None]
    h = np.diff(breaks)[:, None]
    return (a + h * x).ravel(), (h * w).ravel()


def graded_breaks(a, b, toward, scale, ratio=2.0):
    """Breakpoints on [a, b] refined geometrically toward the endpoint `toward`.

    The smallest panel has width about `scale`; widths grow by `ratio`.
    """
    length = b - a
    scale = min(max(scale, 1e-14 * max(length, 1.0)), length)
    steps = [0.0]
    h = scale
    while steps[-1] + h < length:
        steps.append(steps[-1] + h)
        h *= ratio
    steps.append(length)
    steps = np.asarray(steps)
    if toward == b:
        return b - steps[::-1]
    return a + steps
