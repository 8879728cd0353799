"""Gauss-Legendre quadrature on [0, 1]."""

import functools
import math
from dataclasses import dataclass

import numpy as np

MAX_NODES = 512
NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


@dataclass(frozen=True)
class QuadratureRule:
    """A k-node Gauss-Legendre rule on [0, 1] (nodes increasing, weights positive)."""

    k: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, f):
        """Apply the rule to a vectorised callable ``f``."""
        return float(np.dot(self.weights, f(self.nodes)))


def _legendre_and_derivative(n, t):
    p_prev = np.ones_like(t)
    p = t.copy()
    for m in range(1, n):
        p_prev, p = p, ((2 * m + 1) * t * p - m * p_prev) / (m + 1)
    dp = n * (t * p - p_prev) / (t * t - 1.0)
    return p, dp


def _newton_roots(k):
    """Roots of L_k in (-1, 0] together with L_k' at them."""
    half = (k + 1) // 2
    i = np.arange(1, half + 1)
    # Tricomi-type cosine guess; gives roots in decreasing order
    t = -np.cos(math.pi * (i - 0.25) / (k + 0.5)) * (1.0 - (1.0 - 1.0 / k) / (8.0 * k * k))
    for _ in range(NEWTON_MAXITER):
        p, dp = _legendre_and_derivative(k, t)
        dt = p / dp
        t = t - dt
        if np.max(np.abs(dt)) <= NEWTON_TOL:
            break
    _, dp = _legendre_and_derivative(k, t)
    return t, dp


@functools.lru_cache(maxsize=None)
def _cached_rule(k):
    if k == 1:
        nodes, weights = np.array([0.5]), np.array([1.0])
    else:
        t, dp = _newton_roots(k)
        w = 1.0 / ((1.0 - t * t) * dp * dp)  # = (2 / ((1-t^2) L'^2)) / 2 on [0, 1]
        lower = 0.5 * (1.0 + t)
        if k % 2:
            # middle root is t = 0 exactly
            lower[-1] = 0.5
            nodes = np.concatenate([lower, 1.0 - lower[-2::-1]])
            weights = np.concatenate([w, w[-2::-1]])
        else:
            nodes = np.concatenate([lower, 1.0 - lower[::-1]])
            weights = np.concatenate([w, w[::-1]])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(k=k, nodes=nodes, weights=weights)


def gauss_rule(k):
    """Return the k-node Gauss-Legendre rule on [0, 1].

    Rules are memoised per process; the cache is guarded by ``lru_cache``'s
    internal lock so concurrent callers share one instance per ``k``.

    Raises
    ------
    ValueError
        If ``k < 1``.
    MemoryError
        If ``k`` exceeds the hard cap of 512 nodes.
    """
    k = int(k)
    if k < 1:
        raise ValueError(f"number of nodes must be >= 1, got {k}")
    if k > MAX_NODES:
        raise MemoryError(f"number of nodes capped at {MAX_NODES}, got {k}")
    return _cached_rule(k)
