"""Relative drift of conserved quantities along a trajectory."""

from dataclasses import dataclass

import numpy as np


@dataclass
class DriftReport:
    """Per-step error ``|I(y_n) - I(y_0)| / |I(y_0)|`` of one invariant.

    When ``I(y_0) == 0`` the absolute error is stored instead and
    ``absolute`` is set.
    """

    name: str
    errors: np.ndarray
    absolute: bool = False

    @property
    def max_drift(self):
        return float(np.max(self.errors))

    @property
    def final_drift(self):
        return float(self.errors[-1])

    def thirds_max(self):
        """Maximum drift over each third of the run."""
        return [float(np.max(chunk)) for chunk in np.array_split(self.errors, 3)]

    def grows_monotonically(self, factor=2.0):
        """True if the per-third maxima increase strictly and the last exceeds
        the first by more than ``factor``: a secular trend rather than a
        bounded oscillation."""
        a, b, c = self.thirds_max()
        return a < b < c and c > factor * a


def drift_report(name, fn, states):
    values = np.array([fn(y) for y in np.asarray(states)], dtype=float)
    ref = values[0]
    err = np.abs(values - ref)
    if ref == 0.0:
        return DriftReport(name=name, errors=err, absolute=True)
    return DriftReport(name=name, errors=err / abs(ref))


def drift_reports(sys, states, names=None):
    """Drift reports for the named invariants of ``sys`` (default: all)."""
    names = sys.invariant_names if names is None else list(names)
    return [drift_report(n, sys.invariant(n), states) for n in names]
