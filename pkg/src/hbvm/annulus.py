"""Dichotomic search for the boundary of a center's period annulus.

Initial conditions are taken on the segment ``(1 - c) P0 + c Q`` from the
center ``P0`` to a point ``Q`` whose orbit does not surround it. Each probe
integrates the system from one such point and records whether the orbit
leaves a neighbourhood of ``P0``; bisection on ``c`` then brackets the
boundary.
"""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .core import DEFAULT_CONFIG, NonConvergence, build_tableau, iterate_steps


@dataclass(frozen=True)
class EscapeCriterion:
    """An orbit escapes once a sampled state is farther than ``radius`` from the
    center in the max norm. States are sampled every ``check_every`` steps."""

    radius: float = 2.0
    check_every: int = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("escape radius must be positive")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


@dataclass(frozen=True)
class Probe:
    c: float
    escaped: bool
    steps_run: int
    reason: str = ""  # "radius", "nonconvergence" or "" for bounded orbits


@dataclass
class BisectionResult:
    c_low: float
    c_high: float
    boundary_point: np.ndarray
    log: List[Probe] = field(default_factory=list)

    @property
    def probes(self):
        return len(self.log)


def orbit_escapes(states, center, crit=EscapeCriterion()):
    """Return ``(escaped, first_index)`` for a stored trajectory.

    ``states`` may be an array of states or a :class:`~hbvm.core.Trajectory`.
    ``first_index`` is ``None`` when the orbit stays within the radius.
    """
    states = np.asarray(getattr(states, "states", states), dtype=float)
    if len(states) == 0:
        raise ValueError("empty trajectory")
    idx = np.arange(0, len(states), crit.check_every)
    dist = np.max(np.abs(states[idx] - np.asarray(center, dtype=float)), axis=-1)
    hits = np.flatnonzero(dist > crit.radius)
    if hits.size == 0:
        return False, None
    return True, int(idx[hits[0]])


def probe_escape(sys, y0, center, tab, h, n_steps, crit=EscapeCriterion(), cfg=DEFAULT_CONFIG):
    """Integrate from ``y0`` until escape or ``n_steps``; return ``(escaped, steps, reason)``.

    Equivalent to integrating the full trajectory and calling
    :func:`orbit_escapes`, but stops at the first escaping sample. A stage
    iteration that fails to converge counts as an escape.
    """
    center = np.asarray(center, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    if np.max(np.abs(y0 - center)) > crit.radius:
        return True, 0, "radius"
    n = 0
    try:
        for n, y in iterate_steps(sys, y0, h, n_steps, tab, cfg):
            if n % crit.check_every == 0 and np.max(np.abs(y - center)) > crit.radius:
                return True, n, "radius"
    except NonConvergence as exc:
        return True, exc.step_index, "nonconvergence"
    return False, n, ""


def bisect_boundary(
    sys,
    center,
    target,
    s,
    k,
    h,
    n_steps,
    tol=2.0**-52,
    crit=EscapeCriterion(),
    cfg=DEFAULT_CONFIG,
):
    """Bracket the annulus boundary on the segment from ``center`` to ``target``.

    Keeps ``c_low`` on the bounded side and ``c_high`` on the escaping side,
    halving until ``c_high - c_low < tol``, and returns the point at
    ``c_low``. Endpoints are probed first; it is an error if the orbit from
    ``target`` stays bounded or the one from ``center`` escapes.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    P0 = np.asarray(center, dtype=float)
    Q = np.asarray(target, dtype=float)
    if crit.radius <= np.max(np.abs(Q - P0)):
        raise ValueError("escape radius must exceed the distance from center to target")
    tab = build_tableau(k, s)
    log = []

    def probe(c):
        y0 = (1.0 - c) * P0 + c * Q
        escaped, steps, reason = probe_escape(sys, y0, P0, tab, h, n_steps, crit, cfg)
        log.append(Probe(c=c, escaped=escaped, steps_run=steps, reason=reason))
        return escaped

    if not probe(1.0):
        raise ValueError("the orbit from the target point stays bounded; pick a target outside the annulus")
    if probe(0.0):
        raise ValueError("the orbit from the center escapes; the center is not stable at this stepsize")
    lo, hi = 0.0, 1.0
    while hi - lo >= tol:
        c = 0.5 * (lo + hi)
        if c in (lo, hi):
            break  # bracket at floating-point resolution
        if probe(c):
            hi = c
        else:
            lo = c
    return BisectionResult(c_low=lo, c_high=hi, boundary_point=(1.0 - lo) * P0 + lo * Q, log=log)


def max_probes(tol):
    """Upper bound on the number of probes used by :func:`bisect_boundary`."""
    return math.floor(math.log2(1.0 / tol)) + 3
