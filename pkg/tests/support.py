"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from tentmesh.constraints import ConstraintConfig
from tentmesh.front import Front, advance, initial_front, local_minima


def random_front(mesh, config: ConstraintConfig, rng: np.random.Generator,
                 pitches: int) -> Front:
    """A front reached by random floor-bounded pitches from the zero front.

    Every lift stays within the guaranteed step floor, so by the preservation
    guarantees the result is causal (1D) and progressive (2D) no matter which
    local minima the generator picks.
    """
    fr = initial_front(mesh)
    tmin = config.tmin(mesh.dim)
    for _ in range(pitches):
        mins = local_minima(fr)
        p = int(rng.choice(mins))
        fr = advance(fr, p, float(rng.uniform(0.0, tmin)))
    return fr


def plane_fit_gradient(points: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Least-squares gradient of the linear interpolant (independent oracle)."""
    k = points.shape[0]
    A = np.hstack([points, np.ones((k, 1))])
    coef, *_ = np.linalg.lstsq(A, times, rcond=None)
    return coef[:-1]
