"""Orthonormal shifted Legendre basis on [0, 1].

Basis functions are indexed from 1, so ``P_1`` is the constant 1 and ``P_j``
has degree ``j - 1``. They are scaled to unit L2 norm on [0, 1]:

    P_j(x) = sqrt(2j - 1) * L_{j-1}(2x - 1)

where ``L_n`` is the classical Legendre polynomial on [-1, 1].
"""

from dataclasses import dataclass

import numpy as np

DOMAIN_TOL = 1e-12


class DomainError(ValueError):
    """Raised for a basis index below 1 or an abscissa outside [0, 1]."""


def _check_points(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < -DOMAIN_TOL) or np.any(x > 1.0 + DOMAIN_TOL) or np.any(~np.isfinite(x)):
        raise DomainError(f"abscissa outside [0, 1]: {x}")
    return np.clip(x, 0.0, 1.0)


def _legendre_table(n_max, t):
    """Classical Legendre L_0..L_{n_max} at ``t`` via the three-term recurrence.

    Returns an array of shape ``(n_max + 1,) + t.shape``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty((n_max + 1,) + t.shape)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = t
    for n in range(1, n_max):
        out[n + 1] = ((2 * n + 1) * t * out[n] - n * out[n - 1]) / (n + 1)
    return out


def basis_values(s, x):
    """Values of ``P_1..P_s`` at ``x``; shape ``(s,) + x.shape``."""
    if s < 1:
        raise DomainError(f"basis size must be >= 1, got {s}")
    x = _check_points(x)
    leg = _legendre_table(s - 1, 2.0 * x - 1.0)
    scale = np.sqrt(2.0 * np.arange(s) + 1.0)
    return scale.reshape((s,) + (1,) * x.ndim) * leg


def basis_integrals(s, c):
    """Running integrals ``int_0^c P_j(x) dx`` for j = 1..s; shape ``(s,) + c.shape``.

    Uses (2n+1) L_n = d/dt (L_{n+1} - L_{n-1}), so no quadrature is involved.
    """
    if s < 1:
        raise DomainError(f"basis size must be >= 1, got {s}")
    c = _check_points(c)
    leg = _legendre_table(s, 2.0 * c - 1.0)
    out = np.empty((s,) + c.shape)
    out[0] = c
    for n in range(1, s):
        out[n] = (leg[n + 1] - leg[n - 1]) / (2.0 * np.sqrt(2.0 * n + 1.0))
    return out


def eval_basis(j, x):
    """Evaluate ``P_j(x)`` for a scalar abscissa ``x`` in [0, 1]."""
    if j < 1:
        raise DomainError(f"basis index must be >= 1, got {j}")
    return float(basis_values(j, float(x))[j - 1])


def eval_basis_integral(j, c):
    """Evaluate ``int_0^c P_j(x) dx`` for a scalar ``c`` in [0, 1]."""
    if j < 1:
        raise DomainError(f"basis index must be >= 1, got {j}")
    return float(basis_integrals(j, float(c))[j - 1])


@dataclass(frozen=True)
class BasisValueTable:
    """Basis values and running integrals tabulated at a fixed set of points.

    ``values[j, l]`` holds ``P_{j+1}(points[l])`` (0-based storage of the
    1-based basis index) and ``integrals[j, l]`` the matching running integral.
    """

    degree_count: int
    points: np.ndarray
    values: np.ndarray
    integrals: np.ndarray


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def tabulate_basis(s, points):
    """Tabulate ``P_1..P_s`` and their running integrals at ``points``."""
    pts = _check_points(np.atleast_1d(np.asarray(points, dtype=float)))
    return BasisValueTable(
        degree_count=s,
        points=_frozen(pts),
        values=_frozen(basis_values(s, pts)),
        integrals=_frozen(basis_integrals(s, pts)),
    )
