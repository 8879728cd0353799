"""Built-in Hamiltonian test problems.

All states use ``(q, p)`` ordering, including the planar quintic system whose
Hamiltonian is conventionally written as ``H(p, q)``. Reference constants:

* Sitnikov: N = 3, G = 1, masses (1, 1, 1e-5), eccentricity 0.75 and
  apocentre distance 5 for the primaries; the initial state is the explicit
  vector of the original experiment, not re-derived from (e, d).
* Henon-Heiles: saddle points (0, 1), (-sqrt(3)/2, -1/2), (sqrt(3)/2, -1/2)
  at potential 1/6.
* Quintic: coefficients a2 = b1 = b3 = c1 = c2 = 1 (all others zero), with
  saddles P1, P2 and separatrix energy H* = H(P1). Under the (q, p) reading
  the gradient vanishes at the published P1, which fixes the ordering.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .core import EvaluationFailure, HamiltonianSystem

COLLISION_DISTANCE = 1e-12


def harmonic_system():
    """``H = (q^2 + p^2) / 2``."""

    def hamiltonian(y):
        y = np.asarray(y, dtype=float)
        return 0.5 * float(np.sum(y * y))

    def gradient(y):
        return np.array(y, dtype=float)

    return HamiltonianSystem(
        dof=1,
        hamiltonian=hamiltonian,
        gradient=gradient,
        poly_degree=2,
        invariants=(("hamiltonian", hamiltonian),),
        name="harmonic",
    )


# --------------------------------------------------------------------------
# N-body


@dataclass(frozen=True)
class NBodyConfig:
    masses: tuple
    G: float = 1.0

    def __post_init__(self):
        if len(self.masses) < 2:
            raise ValueError("need at least two bodies")
        if any(m <= 0 for m in self.masses):
            raise ValueError("masses must be positive")

    @property
    def N(self):
        return len(self.masses)


SITNIKOV = NBodyConfig(masses=(1.0, 1.0, 1e-5), G=1.0)
SITNIKOV_ECCENTRICITY = 0.75
SITNIKOV_APOCENTRE_DISTANCE = 5.0
SITNIKOV_STEPSIZE = 0.5
SITNIKOV_T_MAX = 1500.0


def _pair_geometry(q):
    # q: (..., N, 3) -> differences (..., N, N, 3) and distances (..., N, N)
    diff = q[..., :, None, :] - q[..., None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return diff, dist


def nbody_system(cfg):
    """Gravitational N-body problem in three space dimensions.

    State layout: ``q = (q_1, ..., q_N)`` then ``p = (p_1, ..., p_N)``, each
    body contributing three Cartesian components. Invariants:
    ``hamiltonian`` and ``angular_momentum_norm`` (Euclidean norm of the
    total angular momentum vector).
    """
    N, G = cfg.N, cfg.G
    m = np.asarray(cfg.masses, dtype=float)
    mm = m[:, None] * m[None, :]
    off = ~np.eye(N, dtype=bool)
    iu = np.triu_indices(N, 1)

    def split(y):
        y = np.asarray(y, dtype=float)
        lead = y.shape[:-1]
        return y[..., : 3 * N].reshape(lead + (N, 3)), y[..., 3 * N :].reshape(lead + (N, 3))

    def check(dist):
        if np.any(dist[..., iu[0], iu[1]] < COLLISION_DISTANCE):
            raise EvaluationFailure("collision: two bodies closer than 1e-12")

    def hamiltonian(y):
        q, p = split(y)
        _, dist = _pair_geometry(q)
        check(dist)
        kinetic = 0.5 * np.sum(np.sum(p * p, axis=-1) / m, axis=-1)
        potential = -G * np.sum(mm[iu] / dist[..., iu[0], iu[1]], axis=-1)
        return kinetic + potential if np.ndim(kinetic) else float(kinetic + potential)

    def gradient(y):
        q, p = split(y)
        diff, dist = _pair_geometry(q)
        check(dist)
        inv3 = np.zeros_like(dist)
        inv3[..., off] = dist[..., off] ** -3
        dq = G * np.sum((mm * inv3)[..., None] * diff, axis=-2)
        dp = p / m[:, None]
        lead = dq.shape[:-2]
        return np.concatenate([dq.reshape(lead + (3 * N,)), dp.reshape(lead + (3 * N,))], axis=-1)

    def angular_momentum(y):
        q, p = split(y)
        return np.sum(np.cross(q, p), axis=-2)

    def angular_momentum_norm(y):
        return float(np.linalg.norm(angular_momentum(y)))

    def linear_momentum(y):
        return np.sum(split(y)[1], axis=-2)

    sys = HamiltonianSystem(
        dof=3 * N,
        hamiltonian=hamiltonian,
        gradient=gradient,
        poly_degree=None,
        invariants=(("hamiltonian", hamiltonian), ("angular_momentum_norm", angular_momentum_norm)),
        name="nbody",
    )
    # extra helpers used by diagnostics and tests
    object.__setattr__(sys, "angular_momentum", angular_momentum)
    object.__setattr__(sys, "linear_momentum", linear_momentum)
    return sys


def sitnikov_system():
    return nbody_system(SITNIKOV)


def sitnikov_initial_state():
    """Initial state of the Sitnikov experiment, shape (18,).

    The published vector lists the planetoid's vertical component as 1/2,
    which is a velocity: stored here as momenta ``m_i v_i``. For the unit
    mass primaries momentum and velocity coincide.
    """
    q0 = [-2.5, 0.0, 0.0, 2.5, 0.0, 0.0, 0.0, 0.0, 1e-9]
    r = math.sqrt(10.0) / 20.0
    v0 = np.array([[0.0, -r, 0.0], [0.0, r, 0.0], [0.0, 0.0, 0.5]])
    p0 = (np.asarray(SITNIKOV.masses)[:, None] * v0).ravel()
    return np.concatenate([q0, p0])


# --------------------------------------------------------------------------
# Henon-Heiles

HENON_HEILES_SADDLES = np.array(
    [[0.0, 1.0], [-math.sqrt(3.0) / 2.0, -0.5], [math.sqrt(3.0) / 2.0, -0.5]]
)
HENON_HEILES_ENERGY_BOUND = 1.0 / 6.0


def henon_heiles_potential(q):
    q = np.asarray(q, dtype=float)
    q1, q2 = q[..., 0], q[..., 1]
    return 0.5 * (q1 * q1 + q2 * q2) + q1 * q1 * q2 - q2**3 / 3.0


def henon_heiles_system():
    def hamiltonian(y):
        y = np.asarray(y, dtype=float)
        return float(0.5 * (y[2] ** 2 + y[3] ** 2) + henon_heiles_potential(y[:2]))

    def gradient(y):
        y = np.asarray(y, dtype=float)
        q1, q2 = y[..., 0], y[..., 1]
        out = y.copy()
        out[..., 0] = q1 + 2 * q1 * q2
        out[..., 1] = q2 + q1 * q1 - q2 * q2
        return out

    return HamiltonianSystem(
        dof=2,
        hamiltonian=hamiltonian,
        gradient=gradient,
        poly_degree=3,
        invariants=(("hamiltonian", hamiltonian),),
        name="henon-heiles",
    )


def henon_heiles_initial_state(q=(0.0, 0.2), p1=0.3, energy=0.99 / 6.0):
    """Initial state with the given ``q`` and ``p1``; ``p2 >= 0`` sets the energy.

    The default places the orbit inside the triangle with H 1% below 1/6.
    """
    rest = energy - 0.5 * p1 * p1 - float(henon_heiles_potential(np.asarray(q)))
    if rest < 0:
        raise ValueError("requested energy is below the energy at p2 = 0")
    return np.array([q[0], q[1], p1, math.sqrt(2.0 * rest)])


def in_triangle(q):
    """True where ``q`` lies strictly inside the saddle-point triangle."""
    q = np.asarray(q, dtype=float)
    a, b, c = HENON_HEILES_SADDLES
    out = np.ones(q.shape[:-1], dtype=bool)
    for u, v, w in ((a, b, c), (b, c, a), (c, a, b)):
        edge = v - u
        side = lambda x: edge[0] * (x[..., 1] - u[1]) - edge[1] * (x[..., 0] - u[0])  # noqa: E731
        out &= np.sign(side(q)) == np.sign(side(w))
    return out


def triangle_containment(states):
    """Return ``(contained, first_violation)`` for a Henon-Heiles trajectory.

    A state is contained when its position is inside the triangle and the
    potential is below 1/6. ``first_violation`` is ``None`` when contained.
    """
    q = np.asarray(states, dtype=float)[..., :2]
    ok = in_triangle(q) & (henon_heiles_potential(q) < HENON_HEILES_ENERGY_BOUND)
    bad = np.flatnonzero(~ok)
    return (bad.size == 0, None if bad.size == 0 else int(bad[0]))


# --------------------------------------------------------------------------
# Quintic planar system


@dataclass(frozen=True)
class QuinticCoefficients:
    a: tuple = (0.0, 0.0, 1.0, 0.0)
    b: tuple = (0.0, 1.0, 0.0, 1.0)
    c: tuple = (0.0, 1.0, 1.0, 0.0)

    def __post_init__(self):
        if all(x == 0 for x in self.a):
            raise ValueError("(a0, a1, a2, a3) must not vanish: H would drop below degree 5")


QUINTIC_DEFAULT = QuinticCoefficients()
QUINTIC_P1 = np.array([-6.879526475540134e-1, -5.206527058470621e-1])
QUINTIC_P2 = np.array([-1.179582379893681, 1.756351969248087])
QUINTIC_HSTAR = 9.050199350868576e-2


def _quintic_monomials(coef):
    """Coefficient matrix ``C`` with ``H = sum_ij C[i, j] q^i p^j``."""
    a0, a1, a2, a3 = coef.a
    b0, b1, b2, b3 = coef.b
    c0, c1, c2, c3 = coef.c
    C = np.zeros((4, 6))
    C[0, 2:6] = (0.5, c3, b3, a3)  # A(p)
    C[1, 2:5] = (c2, b2, a2)  # B(p) q
    C[2, 0:4] = (0.5, c1, b1, a1)  # C(p) q^2
    C[3, 0:3] = (c0, b0, a0)  # D(p) q^3
    return C


def quintic_system(coef=QUINTIC_DEFAULT):
    """``H = A(p) + B(p) q + C(p) q^2 + D(p) q^3`` on state ``(q, p)``.

    Evaluated through the monomial coefficient matrix so that the gradient at
    all quadrature nodes costs a handful of array operations.
    """
    C = _quintic_monomials(coef)
    Cq = C[1:] * np.arange(1, 4)[:, None]  # d/dq, rows q^0..q^2
    Cp = C[:, 1:] * np.arange(1, 6)[None, :]  # d/dp, cols p^0..p^4
    qexp, pexp = np.arange(4), np.arange(6)

    def hamiltonian(y):
        y = np.asarray(y, dtype=float)
        Q = y[..., 0, None] ** qexp
        P = y[..., 1, None] ** pexp
        val = ((Q @ C) * P).sum(axis=-1)
        return float(val) if np.ndim(val) == 0 else val

    def gradient(y):
        y = np.asarray(y, dtype=float)
        Q = y[..., 0, None] ** qexp
        P = y[..., 1, None] ** pexp
        out = np.empty(y.shape)
        out[..., 0] = ((Q[..., :3] @ Cq) * P).sum(axis=-1)
        out[..., 1] = ((Q @ Cp) * P[..., :5]).sum(axis=-1)
        return out

    return HamiltonianSystem(
        dof=1,
        hamiltonian=hamiltonian,
        gradient=gradient,
        poly_degree=5,
        invariants=(("hamiltonian", hamiltonian),),
        name="quintic",
    )


def hstar_reference():
    """Energy of the period-annulus boundary for the default quintic system."""
    return QUINTIC_HSTAR


@dataclass(frozen=True)
class Problem:
    """A named problem with its default initial state (for the CLI)."""

    name: str
    system: HamiltonianSystem
    y0: np.ndarray = field(repr=False)


def get_problem(name):
    if name == "harmonic":
        return Problem(name, harmonic_system(), np.array([1.0, 0.0]))
    if name == "sitnikov":
        return Problem(name, sitnikov_system(), sitnikov_initial_state())
    if name == "henon-heiles":
        return Problem(name, henon_heiles_system(), henon_heiles_initial_state())
    if name == "quintic":
        return Problem(name, quintic_system(), np.array([0.0, 0.3]))
    raise KeyError(f"unknown problem {name!r}; choose from {PROBLEMS}")


PROBLEMS = ("harmonic", "sitnikov", "henon-heiles", "quintic")
