"""Causality and progress constraints for advancing fronts.

A front is a piecewise-linear time function t over the space mesh.  Two
families of constraints govern how far a vertex may be lifted:

* Causality: the time gradient over every facet stays within the local slope,
  ``|t(b) - t(a)| <= sigma |ab|`` on segments and ``|grad t| <= sigma`` on
  triangles.  The triangle check is expressed through the foot-of-altitude
  form: with u the foot of the perpendicular from the apex p onto qr and g
  the gradient magnitude along qr, causality holds iff
  ``|t(p) - t(u)| <= |pu| sqrt(sigma^2 - g^2)`` (and g <= sigma).
* Progress: ordering a triangle's vertices by time as lo <= mid <= hi,
  ``(t(hi) - t(mid)) / |mid hi| <= (1 - epsilon) sigma phi(lo)`` where phi is
  the shape factor from :func:`tentmesh.geometry.phi`.  This reserves a
  fraction of the slope budget so the next pitch at the low vertex can raise
  it by at least the global floor.

A triangle is *progressive* when lifting its lowest vertex by any amount up
to the floor keeps it causal and keeps the progress constraint satisfied
against the slope sampled over the companion triangle whose mid vertex is
lifted by the floor.  The "any amount" quantifier is checked at the interval
endpoints plus a few interior samples; for the built-in fields the
constraints vary monotonically between samples, so the endpoints carry the
guarantee.

Every check returns a :class:`ConstraintVerdict` with a signed slack in time
units; ``satisfied`` applies the relative tolerance ``rel_tol`` (slack down
to ``-rel_tol * scale`` still passes, so exact-equality designs are stable
under roundoff).  In 1D there is no progress constraint: causal fronts
already guarantee full-height steps, and the progressive notions degenerate
to causality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument, ValidationError
from .fields import (
    SlopeField,
    min_slope_over,
    sampled_min_simplices,
    sampled_min_values,
)
from .geometry import TriangleFrame, frame, phi
from .mesh import SpaceMesh

BINDING_CAUSALITY = "causality"
BINDING_PROGRESS = "progress"


@dataclass(frozen=True)
class ConstraintVerdict:
    satisfied: bool
    slack: float       # signed, in time units; negative means violated
    binding: str       # "causality" or "progress": the family that binds
    scale: float = 1.0  # magnitude the tolerance was measured against


@dataclass(frozen=True)
class ConstraintConfig:
    """Pitching parameters derived from the mesh and field.

    ``tmin_1d = sigma_min * wmin`` and ``tmin_2d = epsilon * sigma_min *
    wmin`` are the guaranteed step floors; ``eta`` is the safety margin
    subtracted from greedy step heights (and the resolution the greedy search
    works to).
    """

    epsilon: float
    eta: float
    tmin_1d: float
    tmin_2d: float
    dt_interior_samples: int = 3
    slope_samples: int = 4
    rel_tol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.epsilon <= 0.5:
            raise ValidationError(f"epsilon must be in (0, 1/2], got {self.epsilon}")
        if self.eta <= 0.0:
            raise ValidationError(f"eta must be positive, got {self.eta}")
        if self.dt_interior_samples < 0:
            raise ValidationError("dt_interior_samples must be nonnegative")

    @classmethod
    def for_problem(cls, mesh: SpaceMesh, field: SlopeField,
                    epsilon: float = 0.5, eta: float | None = None,
                    **kwargs) -> "ConstraintConfig":
        base = field.sigma_min * mesh.wmin
        if eta is None:
            eta = 1e-9 * base
        return cls(
            epsilon=epsilon,
            eta=eta,
            tmin_1d=base,
            tmin_2d=epsilon * base,
            **kwargs,
        )

    def tmin(self, dim: int) -> float:
        return self.tmin_1d if dim == 1 else self.tmin_2d

    def with_eta(self, eta: float) -> "ConstraintConfig":
        return replace(self, eta=eta)


def _verdict(slack: float, binding: str, scale: float,
             rel_tol: float) -> ConstraintVerdict:
    scale = max(1.0, scale)
    return ConstraintVerdict(
        satisfied=bool(slack >= -rel_tol * scale),
        slack=float(slack),
        binding=binding,
        scale=scale,
    )


# ---------------------------------------------------------------------------
# single-facet checks
# ---------------------------------------------------------------------------


def causal_segment(t_a: float, t_b: float, length: float, sigma: float,
                   rel_tol: float = 1e-12) -> ConstraintVerdict:
    """Causality of a 1D facet: |t_b - t_a| <= sigma * length."""
    if length <= 0.0 or sigma <= 0.0:
        raise InvalidArgument("segment length and slope must be positive")
    budget = sigma * length
    diff = abs(t_b - t_a)
    return _verdict(budget - diff, BINDING_CAUSALITY, max(budget, diff), rel_tol)


def causal_triangle(points, times, sigma: float, apex: int = 0,
                    rel_tol: float = 1e-12,
                    fr: TriangleFrame | None = None) -> ConstraintVerdict:
    """Causality of a triangle facet, checked from the given apex.

    ``points`` is (3, 2) and ``times`` the matching vertex times; ``apex``
    indexes the vertex playing p.  The verdict is equivalent to the gradient
    test |grad t| <= sigma (for any apex choice); the slack is reported in
    the altitude form, so it is a time margin at the apex.
    """
    points = np.asarray(points, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    others = [i for i in range(3) if i != apex]
    qi, ri = others
    if fr is None:
        fr = frame(points[apex], points[qi], points[ri])
    dt_qr = times[ri] - times[qi]
    g = abs(dt_qr) / fr.qr_len
    if g > sigma:
        # The base edge alone exceeds the slope: no apex time can fix it.
        budget = sigma * fr.qr_len
        return _verdict(budget - abs(dt_qr), BINDING_CAUSALITY,
                        max(budget, abs(dt_qr)), rel_tol)
    w = fr.u_along / fr.qr_len
    t_u = times[qi] * (1.0 - w) + times[ri] * w
    rhs = fr.altitude * math.sqrt(max(0.0, sigma * sigma - g * g))
    lhs = abs(times[apex] - t_u)
    return _verdict(rhs - lhs, BINDING_CAUSALITY, max(rhs, lhs), rel_tol)


def _order_by_time(times, ids) -> tuple[int, int, int]:
    """Local indices sorted by (time, id): the deterministic vertex order."""
    return tuple(sorted(range(3), key=lambda i: (times[i], ids[i])))


def progress_ok(points, times, sigma: float, epsilon: float,
                ids=(0, 1, 2), rel_tol: float = 1e-12) -> ConstraintVerdict:
    """Progress constraint for one triangle at the given vertex times.

    Vertices are ordered by (time, id); the constraint bounds the gradient
    along the edge between the two later vertices by ``(1 - epsilon) * sigma``
    times the shape factor of the earliest vertex.
    """
    points = np.asarray(points, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    lo, mid, hi = _order_by_time(times, ids)
    length = float(np.linalg.norm(points[hi] - points[mid]))
    bound = (1.0 - epsilon) * sigma * phi(points[lo], points[mid], points[hi]) * length
    diff = float(times[hi] - times[mid])
    return _verdict(bound - diff, BINDING_PROGRESS, max(bound, diff), rel_tol)


def progress_bound_rhs(fr: TriangleFrame, g: float, sigma_prog: float,
                       epsilon: float) -> float:
    """Upper bound on (t'(p) - t(u)) / |pu| imposed by the progress constraint.

    ``fr`` is the frame of triangle (p, q, r) with q the earlier end of the
    opposite edge and ``g = (t(r) - t(q)) / |qr| >= 0`` the gradient along
    it.  Lifting p to the top of the triangle tilts the facet; rotating the
    gradient onto the edge rp turns the progress bound into this cap on the
    perpendicular rate at p.  Equivalently (and exactly): t'(p) may not
    exceed ``t(r) + |rp| (1 - epsilon) sigma_prog phi_q``.
    """
    if g < 0.0:
        raise InvalidArgument("gradient along qr must be nonnegative (q is earlier)")
    c = fr.cos_nn
    s = math.sqrt(max(0.0, 1.0 - c * c))
    # Shape factor of q: larger sine of the angles at r and at p.
    sin_at_r = fr.altitude / fr.rp_len
    sin_at_p = fr.altitude * fr.qr_len / (fr.pq_len * fr.rp_len)
    phi_q = min(1.0, max(sin_at_r, sin_at_p))
    return ((1.0 - epsilon) * sigma_prog * phi_q - g * c) / s


# ---------------------------------------------------------------------------
# progressive triangles and fronts
# ---------------------------------------------------------------------------


def _dt_samples(tmin: float, interior: int) -> np.ndarray:
    """Deterministic lift samples {0, ..., tmin} with `interior` inner points."""
    return np.linspace(0.0, tmin, interior + 2)


def is_progressive_triangle(points, times, field: SlopeField,
                            config: ConstraintConfig, ids=(0, 1, 2),
                            element: int | None = None,
                            sigma_cap: float = math.inf) -> ConstraintVerdict:
    """Whether the triangle stays causal and within progress under floor lifts.

    Checks, for each sampled lift dt of the lowest vertex: causality of the
    lifted triangle against the slope sampled over it, and the progress
    constraint against the slope sampled over the companion triangle (lowest
    vertex lifted by dt, middle vertex lifted by the full floor).  Returns
    the minimum-slack verdict across all sampled conditions.

    ``sigma_cap`` further limits the slope used for the causality half (the
    driver passes the smallest remote cone slope the tentpole enters);
    progress always uses the field's own sampled slope.
    """
    points = np.asarray(points, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    tmin = config.tmin_2d
    lo, mid, hi = _order_by_time(times, ids)
    dts = _dt_samples(tmin, config.dt_interior_samples)
    n = len(dts)
    # One batched slope evaluation: rows 0..n-1 are the lifted triangles,
    # rows n..2n-1 the companions (middle vertex lifted by the full floor).
    batch = np.tile(times, (2 * n, 1))
    batch[:n, lo] += dts
    batch[n:, lo] += dts
    batch[n:, mid] = times[mid] + tmin
    sig = sampled_min_values(field, points, batch, config.slope_samples,
                             element)
    others = [i for i in range(3) if i != lo]
    fr_lo = frame(points[lo], points[others[0]], points[others[1]])
    worst: ConstraintVerdict | None = None
    for k in range(n):
        sigma_c = min(float(sig[k]), sigma_cap)
        v = causal_triangle(points, batch[k], sigma_c, apex=lo,
                            rel_tol=config.rel_tol, fr=fr_lo)
        if worst is None or v.slack < worst.slack:
            worst = v
        sigma_p = float(sig[n + k])
        v = progress_ok(points, batch[k], sigma_p, config.epsilon, ids,
                        config.rel_tol)
        if v.slack < worst.slack:
            worst = v
    return worst


def is_progressive_front(front, field: SlopeField,
                         config: ConstraintConfig,
                         limit: int = 5) -> tuple[bool, list]:
    """Check every facet of a front; returns (ok, first few violations).

    In 1D "progressive" coincides with "causal", so segments are checked for
    causality only.
    """
    mesh: SpaceMesh = front.mesh
    times = front.times
    violations: list[tuple[int, ConstraintVerdict]] = []
    if mesh.dim == 1:
        report = front_causality_report(mesh, times, field, config)
        for sid in np.flatnonzero(~report["satisfied"]):
            violations.append(
                (int(sid),
                 ConstraintVerdict(False, float(report["slack"][sid]),
                                   BINDING_CAUSALITY,
                                   float(report["scale"][sid])))
            )
            if len(violations) >= limit:
                break
        return len(violations) == 0, violations
    for sid in range(mesh.n_simplices):
        row = mesh.simplices[sid]
        v = is_progressive_triangle(
            mesh.vertices[row], times[row], field, config,
            ids=tuple(int(i) for i in row), element=sid,
        )
        if not v.satisfied:
            violations.append((sid, v))
            if len(violations) >= limit:
                return False, violations
    return len(violations) == 0, violations


# ---------------------------------------------------------------------------
# vectorized whole-front causality
# ---------------------------------------------------------------------------


def front_causality_report(mesh: SpaceMesh, times: np.ndarray,
                           field: SlopeField,
                           config: ConstraintConfig) -> dict:
    """Causality slack of every facet at the given vertex times, vectorized.

    Returns arrays keyed ``slack``, ``scale``, ``sigma``, ``satisfied``.  For
    triangles the slack is measured at the latest vertex (ties to the larger
    id), in the same altitude form as :func:`causal_triangle`.
    """
    T = times[mesh.simplices]  # (m, k)
    sigma = sampled_min_simplices(
        field, mesh.vertices[mesh.simplices], T, config.slope_samples,
        elements=np.arange(mesh.n_simplices),
    )
    if mesh.dim == 1:
        budget = sigma * mesh.measures
        diff = np.abs(T[:, 1] - T[:, 0])
        slack = budget - diff
        scale = np.maximum(1.0, np.maximum(budget, diff))
    else:
        # Latest vertex as apex; reversed argmax breaks time ties toward the
        # larger local index, i.e. the larger vertex id (rows are id-sorted).
        apex = 2 - np.argmax(T[:, ::-1], axis=1)
        rows = np.arange(T.shape[0])
        qi = np.choose(apex, [1, 0, 0])
        ri = np.choose(apex, [2, 2, 1])
        t_q, t_r, t_p = T[rows, qi], T[rows, ri], T[rows, apex]
        base = mesh.tri_base[rows, apex]
        alt = mesh.tri_alt[rows, apex]
        w = mesh.tri_uw[rows, apex]
        dt_qr = t_r - t_q
        g = np.abs(dt_qr) / base
        t_u = t_q * (1.0 - w) + t_r * w
        body = alt * np.sqrt(np.maximum(0.0, sigma * sigma - g * g))
        lhs = np.abs(t_p - t_u)
        edge_ok = g <= sigma
        slack = np.where(edge_ok, body - lhs, sigma * base - np.abs(dt_qr))
        scale = np.maximum(
            1.0,
            np.where(edge_ok, np.maximum(body, lhs),
                     np.maximum(sigma * base, np.abs(dt_qr))),
        )
    return {
        "slack": slack,
        "scale": scale,
        "sigma": sigma,
        "satisfied": slack >= -config.rel_tol * scale,
    }
