"""HBVM(k, s) integrators for canonical Hamiltonian systems.

A step of HBVM(k, s) seeks a polynomial path ``sigma`` of degree ``s`` from
``y0`` whose derivative is expanded in the orthonormal Legendre basis,

    sigma'(t0 + c h) = sum_j P_j(c) gamma_j,

with coefficients fixed by projecting the vector field onto the basis through
a k-node Gauss rule:

    gamma_j = sum_l w_l P_j(c_l) J grad H(y0 + h sum_i a_li gamma_i).

The unknowns are the ``s`` vectors ``gamma_j`` whatever ``k`` is, so extra
("silent") quadrature nodes only cost gradient evaluations. With ``k = s`` the
scheme is the s-stage Gauss collocation method; for polynomial H of degree
``nu`` the energy is conserved exactly once ``k >= nu s / 2``. For
non-polynomial H there is no separate "infinite k" method: taking ``k`` large
makes the quadrature error drop below rounding, which is the practical
conservation one relies on for e.g. gravitational problems.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np

from .legendre import basis_integrals, basis_values
from .quadrature import QuadratureRule, gauss_rule


class NonConvergence(RuntimeError):
    """The stage iteration ran out of iterations.

    ``residual`` is the last max-norm update; ``step_index`` is set when the
    failure happened inside :func:`integrate`, and ``trajectory`` then holds
    the states computed before the failing step.
    """

    def __init__(self, message, residual=math.nan, step_index=None, trajectory=None):
        super().__init__(message)
        self.residual = residual
        self.step_index = step_index
        self.trajectory = trajectory


class EvaluationFailure(ArithmeticError):
    """The gradient could not be evaluated (non-finite values, collisions)."""

    def __init__(self, message, step_index=None, trajectory=None):
        super().__init__(message)
        self.step_index = step_index
        self.trajectory = trajectory


@dataclass(frozen=True)
class HamiltonianSystem:
    """A canonical Hamiltonian system in ``y = (q_1..q_m, p_1..p_m)`` ordering.

    ``gradient`` must accept arrays of shape ``(..., 2m)`` and return the
    gradient ``(dH/dq, dH/dp)`` with the same shape; the integrator evaluates
    all quadrature nodes in a single call. ``hamiltonian`` only needs to
    accept a single state. ``invariants`` lists ``(name, callable)`` pairs of
    conserved quantities to monitor.
    """

    dof: int
    hamiltonian: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    poly_degree: Optional[int] = None
    invariants: Tuple[Tuple[str, Callable[[np.ndarray], float]], ...] = ()
    name: str = "custom"

    @property
    def dimension(self):
        return 2 * self.dof

    def invariant(self, name):
        for key, fn in self.invariants:
            if key == name:
                return fn
        raise KeyError(f"{self.name} has no invariant {name!r}; known: {self.invariant_names}")

    @property
    def invariant_names(self):
        return [key for key, _ in self.invariants]

    def vector_field(self, y):
        return apply_symplectic(self.gradient(y))


def check_gradient(sys, states, step=1e-6):
    """Largest relative mismatch between ``sys.gradient`` and central differences.

    Validation utility only; the mismatch at each state is measured in the
    max norm relative to ``max(1, |grad|)``.
    """
    worst = 0.0
    for y in np.atleast_2d(states):
        g = np.asarray(sys.gradient(y), dtype=float)
        fd = np.empty_like(g)
        for i in range(y.size):
            e = np.zeros_like(y)
            e[i] = step
            fd[i] = (sys.hamiltonian(y + e) - sys.hamiltonian(y - e)) / (2 * step)
        worst = max(worst, np.max(np.abs(g - fd)) / max(1.0, np.max(np.abs(g))))
    return worst


def apply_symplectic(g):
    """Return ``J g`` with ``J = [[0, I], [-I, 0]]``, acting on the last axis."""
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    if n % 2:
        raise ValueError(f"symplectic product needs an even dimension, got {n}")
    m = n // 2
    return np.concatenate([g[..., m:], -g[..., :m]], axis=-1)


@dataclass(frozen=True)
class HbvmTableau:
    """Coefficients of HBVM(k, s).

    ``basis_at_nodes[l, j] = P_{j+1}(c_l)``, ``integrated_basis[l, j]`` the
    running integral of ``P_{j+1}`` up to ``c_l``, and ``end_integrals[j]``
    the integral over [0, 1] (zero except for the constant).
    """

    s: int
    k: int
    rule: QuadratureRule
    basis_at_nodes: np.ndarray
    integrated_basis: np.ndarray
    end_integrals: np.ndarray
    # projection[j, l] = w_l P_{j+1}(c_l): maps node values to gamma
    projection: np.ndarray = field(repr=False)

    @property
    def nodes(self):
        return self.rule.nodes

    @property
    def weights(self):
        return self.rule.weights

    @property
    def is_gauss(self):
        return self.k == self.s


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def build_tableau(k, s):
    """Assemble HBVM(k, s) coefficients; ``k = s`` gives Gauss collocation."""
    k, s = int(k), int(s)
    if s < 1:
        raise ValueError(f"degree s must be >= 1, got {s}")
    if k < s:
        raise ValueError(f"k must be >= s (got k={k}, s={s})")
    rule = gauss_rule(k)
    B = basis_values(s, rule.nodes).T
    A = basis_integrals(s, rule.nodes).T
    e = basis_integrals(s, 1.0)
    return HbvmTableau(
        s=s,
        k=k,
        rule=rule,
        basis_at_nodes=_readonly(B),
        integrated_basis=_readonly(A),
        end_integrals=_readonly(e),
        projection=_readonly(B.T * rule.weights),
    )


def min_silent_k(nu, s):
    """Smallest node count conserving a degree-``nu`` polynomial Hamiltonian."""
    return max(s, -(-nu * s // 2))


def as_runge_kutta(tab):
    """Return ``(M, b, c)``, the k-stage Runge-Kutta form of the method."""
    M = tab.integrated_basis @ tab.projection
    return M, tab.weights.copy(), tab.nodes.copy()


def stability_value(tab, z):
    """Stability function ``R(z) = 1 + z b^T (I - z M)^{-1} 1``."""
    M, b, _ = as_runge_kutta(tab)
    lhs = np.eye(tab.k) - z * M
    if np.linalg.cond(lhs) > 1e14:
        raise np.linalg.LinAlgError(f"I - zM is numerically singular at z={z}")
    return complex(1.0 + z * (b @ np.linalg.solve(lhs, np.ones(tab.k, dtype=complex))))


@dataclass(frozen=True)
class SolverConfig:
    abs_tol: float = 1e-14
    rel_tol: float = 1e-14
    max_iterations: int = 100

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("solver tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


DEFAULT_CONFIG = SolverConfig()
STALL_ITERATIONS = 3


def _symplectic_index(n):
    m = n // 2
    perm = np.concatenate([np.arange(m, n), np.arange(m)])
    sign = np.concatenate([np.ones(m), -np.ones(m)])
    return perm, sign


def solve_stages(sys, y0, h, tab, cfg=DEFAULT_CONFIG):
    """Solve for the ``s`` coefficient vectors ``gamma`` (shape ``(s, 2m)``).

    Plain fixed-point iteration on the block-size-s system, started from
    ``gamma_1 = J grad H(y0)``, ``gamma_j = 0`` otherwise. The tolerance test
    is on the max-norm update, ``abs_tol + rel_tol * |gamma|``. Once it is
    met, iteration continues (within the same budget) until the update
    vanishes or fails to reach a new minimum for ``STALL_ITERATIONS`` sweeps;
    the iterate with the smallest update is returned. Stopping right at the
    tolerance leaves a bias of a few ulps per step in the energy, which adds
    up linearly over long runs.
    """
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (sys.dimension,):
        raise ValueError(f"state has shape {y0.shape}, system expects ({sys.dimension},)")
    if not np.all(np.isfinite(y0)):
        raise EvaluationFailure("non-finite state")
    perm, sign = _symplectic_index(y0.size)
    grad = sys.gradient
    hA, W = h * tab.integrated_basis, tab.projection

    g0 = np.asarray(grad(y0), dtype=float)
    if not np.all(np.isfinite(g0)):
        raise EvaluationFailure("gradient is non-finite at the initial state")
    gamma = np.zeros((tab.s, y0.size))
    gamma[0] = g0[perm] * sign
    converged = False
    best, best_delta, stall = gamma, math.inf, 0
    delta = math.inf
    for it in range(cfg.max_iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            G = grad(y0 + hA @ gamma)
            new = W @ (G[:, perm] * sign)
            delta = float(np.abs(new - gamma).max())
        if not math.isfinite(delta):
            # the gradient was finite at y0, so this is the iteration diverging
            raise NonConvergence(f"stage iteration diverged after {it + 1} iterations", residual=delta)
        gamma = new
        if delta < best_delta:
            best, best_delta, stall = gamma, delta, 0
        else:
            stall += 1
        if not converged:
            converged = delta <= cfg.abs_tol + cfg.rel_tol * float(np.abs(gamma).max())
        if converged and (delta == 0.0 or stall >= STALL_ITERATIONS):
            return best
    if converged:
        return best
    raise NonConvergence(
        f"stage iteration did not converge in {cfg.max_iterations} iterations "
        f"(last update {delta:.3e})",
        residual=delta,
    )


def step(sys, y0, h, tab, cfg=DEFAULT_CONFIG):
    """Advance one step: ``y1 = y0 + h gamma_1``."""
    y0 = np.asarray(y0, dtype=float)
    if h == 0:
        return y0.copy()
    gamma = solve_stages(sys, y0, h, tab, cfg)
    y1 = y0 + h * gamma[0]
    if not np.all(np.isfinite(y1)):
        raise EvaluationFailure("step produced a non-finite state")
    return y1


@dataclass
class Trajectory:
    """Equally spaced states ``states[n] = y(t0 + n h)``."""

    t0: float
    h: float
    states: np.ndarray

    @property
    def step_count(self):
        return len(self.states) - 1

    @property
    def times(self):
        return self.t0 + self.h * np.arange(len(self.states))


def iterate_steps(sys, y0, h, n_steps, tab, cfg=DEFAULT_CONFIG):
    """Yield ``(n, y_n)`` for n = 1..n_steps, annotating failures with ``n``."""
    y = np.asarray(y0, dtype=float)
    for n in range(1, n_steps + 1):
        try:
            y = step(sys, y, h, tab, cfg)
        except (NonConvergence, EvaluationFailure) as exc:
            exc.step_index = n
            raise
        yield n, y


def integrate(sys, y0, h, n_steps, tab, cfg=DEFAULT_CONFIG, t0=0.0):
    """Apply :func:`step` ``n_steps`` times.

    On failure the raised exception carries ``step_index`` (the step that
    failed, 1-based) and ``trajectory`` (the states computed so far).
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    y0 = np.array(y0, dtype=float)
    states = np.empty((n_steps + 1, y0.size))
    states[0] = y0
    try:
        for n, y in iterate_steps(sys, y0, h, n_steps, tab, cfg):
            states[n] = y
    except (NonConvergence, EvaluationFailure) as exc:
        exc.trajectory = Trajectory(t0, h, states[: exc.step_index].copy())
        raise
    return Trajectory(t0=t0, h=h, states=states)
