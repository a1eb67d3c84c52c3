"""Wavespeed slope fields: sigma(x, t) = 1 / wavespeed(x, t).

A slope field is the oracle the mesh generator queries while pitching.  All
built-in fields are defined by global formulas for t >= 0 and report two
global bounds, ``sigma_min`` and ``sigma_max``; the minimum step guarantee is
derived from ``sigma_min``, so it must bound every value the field will ever
return (including scripted future table updates, see
:meth:`TableField.note_future_sigma`).

``min_slope_over`` is deliberately a *sampled* minimum: the field is
evaluated at the simplex vertices, edge midpoints, centroid, and a fixed set
of extra barycentric points, and the smallest sample (scaled by the safety
factor ``kappa`` and clamped to ``sigma_min``) stands in for the true
infimum.  For fields whose variation is resolved by those samples this is
conservative; discontinuities thinner than the sampling are the caller's
responsibility, which is what ``kappa < 1`` is for.

Field documents are line based, ``#`` starts a comment::

    field constant 2.0
    field timestep 5.0 2.0 0.5
    field cone 0.5 0.5 0.0 4.0 1.0 4.0
    field table slopes.txt

``timestep`` takes ascending band boundaries followed by one slope per band
(t exactly on a boundary gets the later band's value).  ``cone`` is
``cx [cy] t_apex sigma_inside sigma_outside cone_slope``: points with
``t - t_apex >= cone_slope * |x - c|`` are inside.  ``table`` rows are
``<element id> <sigma>`` in a separate file.  Several ``field`` lines in one
document combine as the pointwise minimum.

Fields that *drive* a run must not cut budgets the front has already spent:
once the front has advanced somewhere, a later slope drop there can strand
a vertex whose neighbors' time spreads were legitimately built under the
older, larger slope.  Slope rises (slow-downs) of any shape are always
safe.  Level-in-space drops (``timestep``) are safe too: the driver
throttles every tent against the drop before crossing it, so fronts arrive
flat and rebuild their spreads under the new slope.  A spatial speed-up
``cone`` needs ``cone_slope <= sigma_inside`` so the faster wave outruns
the news of its own arrival; that makes it safe to drive 1D runs, where a
stranded vertex can always catch up to its neighbor.  In 2D even such a
cone can leave a vertex wedged between a facet spread that is suddenly too
steep and a progress budget that is suddenly too small; the driver first
looks for a verified catch-up pitch and raises
:class:`~tentmesh.errors.ContractViolation` only when none exists.
Evaluating any field is always well defined, so the constructors reject
nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgument, OutOfDomain, ValidationError
from .geometry import EventPoint

_TIME_TOL = 0.0  # fields are defined for t >= 0 exactly


@dataclass(frozen=True)
class SimplexSlope:
    """A (possibly lifted) simplex with its conservative sampled slope."""

    positions: np.ndarray  # (k, dim) vertex positions
    times: np.ndarray      # (k,) vertex times
    value: float           # sampled min slope, kappa-scaled and clamped


class SlopeField:
    """Base class; subclasses implement ``_values`` as a pure vectorized map."""

    kind = "abstract"

    def __init__(self, sigma_min: float, sigma_max: float, kappa: float = 1.0):
        if not (sigma_min > 0.0 and sigma_max >= sigma_min):
            raise ValidationError(
                f"slope bounds must satisfy 0 < sigma_min <= sigma_max, "
                f"got ({sigma_min}, {sigma_max})"
            )
        if not 0.0 < kappa <= 1.0:
            raise ValidationError(f"kappa must be in (0, 1], got {kappa}")
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.kappa = float(kappa)
        self.domain: tuple[np.ndarray, np.ndarray] | None = None

    # -- evaluation ---------------------------------------------------------

    def _values(self, xs: np.ndarray, ts: np.ndarray, elems) -> np.ndarray:
        raise NotImplementedError

    def values(self, xs, ts, elems=None) -> np.ndarray:
        """Vectorized slope lookup; ``xs`` is (N, dim), ``ts`` is (N,)."""
        xs = np.asarray(xs, dtype=np.float64)
        ts = np.asarray(ts, dtype=np.float64)
        if np.any(ts < -_TIME_TOL):
            raise OutOfDomain(f"field evaluated at negative time {ts.min()}")
        if self.domain is not None:
            lo, hi = self.domain
            pad = 1e-9 * max(1.0, float(np.max(hi - lo)))
            if np.any(xs < lo - pad) or np.any(xs > hi + pad):
                raise OutOfDomain("field evaluated outside its spatial domain")
        return self._values(xs, ts, elems)

    def attach_domain(self, lo, hi) -> None:
        self.domain = (np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64))

    @property
    def needs_elements(self) -> bool:
        return False

    @property
    def is_constant(self) -> bool:
        return False


def slope_at(field: SlopeField, point: EventPoint) -> float:
    """Slope at one spacetime point; raises :class:`OutOfDomain` off-domain."""
    xs = np.asarray(point.position, dtype=np.float64)[None, :]
    return float(field.values(xs, np.array([point.time]))[0])


class ConstantField(SlopeField):
    kind = "constant"

    def __init__(self, sigma: float, kappa: float = 1.0):
        super().__init__(sigma, sigma, kappa)
        self.sigma = float(sigma)

    def _values(self, xs, ts, elems):
        return np.full(ts.shape, self.sigma)

    @property
    def is_constant(self) -> bool:
        return True


class TimeStepField(SlopeField):
    """Piecewise-constant in time: slope values per band between boundaries."""

    kind = "timestep"

    def __init__(self, boundaries, sigmas, kappa: float = 1.0):
        boundaries = np.asarray(boundaries, dtype=np.float64)
        sigmas = np.asarray(sigmas, dtype=np.float64)
        if len(sigmas) != len(boundaries) + 1:
            raise ValidationError(
                f"timestep field needs one more slope than boundaries, "
                f"got {len(sigmas)} slopes for {len(boundaries)} boundaries"
            )
        if len(boundaries) and np.any(np.diff(boundaries) <= 0.0):
            raise ValidationError("timestep boundaries must be strictly ascending")
        if np.any(sigmas <= 0.0):
            raise ValidationError("slopes must be positive")
        super().__init__(float(sigmas.min()), float(sigmas.max()), kappa)
        self.boundaries = boundaries
        self.sigmas = sigmas

    def _values(self, xs, ts, elems):
        # side='right' puts a boundary instant into the later band.
        idx = np.searchsorted(self.boundaries, ts, side="right")
        return self.sigmas[idx]


class SpatialConeField(SlopeField):
    """One slope inside an expanding circular region, another outside.

    The region is a cone in spacetime with apex (center, t_apex): a point is
    inside when ``t - t_apex >= cone_slope * |x - center|``.

    When the field drives a run and ``sigma_inside < sigma_outside`` (the
    wave speeds up inside), keep ``cone_slope <= sigma_inside``: the
    speed-up must not spread faster than the sped-up wave, or the front can
    reach a state with no causal lift.  Even then, only drive 1D runs with
    a speed-up cone; in 2D it can wedge a front vertex between facet
    spreads committed under the outside slope and the shrunken inside
    budgets (see the module docstring).  Slow-down cones
    (``sigma_inside > sigma_outside``) are safe everywhere.
    """

    kind = "cone"

    def __init__(self, center, t_apex: float, sigma_inside: float,
                 sigma_outside: float, cone_slope: float, kappa: float = 1.0):
        if sigma_inside <= 0.0 or sigma_outside <= 0.0:
            raise ValidationError("slopes must be positive")
        if cone_slope < 0.0:
            raise ValidationError("cone_slope must be nonnegative")
        super().__init__(
            min(sigma_inside, sigma_outside), max(sigma_inside, sigma_outside), kappa
        )
        self.center = np.asarray(center, dtype=np.float64)
        self.t_apex = float(t_apex)
        self.sigma_inside = float(sigma_inside)
        self.sigma_outside = float(sigma_outside)
        self.cone_slope = float(cone_slope)

    def _values(self, xs, ts, elems):
        dist = np.linalg.norm(xs - self.center[None, :], axis=1)
        inside = (ts - self.t_apex) >= self.cone_slope * dist
        return np.where(inside, self.sigma_inside, self.sigma_outside)


class TableField(SlopeField):
    """Per-element slope table, mutable only through :meth:`set_value`.

    The driver's solver hook is the single writer; it updates entries between
    pitches.  ``sigma_min``/``sigma_max`` cover the initial values plus any
    announced future ones, so the global step floor stays valid.
    """

    kind = "table"

    def __init__(self, values, kappa: float = 1.0):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 1 or len(values) == 0:
            raise ValidationError("table field needs one slope per element")
        if np.any(values <= 0.0):
            raise ValidationError("slopes must be positive")
        super().__init__(float(values.min()), float(values.max()), kappa)
        self.table = values.copy()

    def note_future_sigma(self, sigmas) -> None:
        """Widen the global bounds to cover scripted future values."""
        for s in np.asarray(sigmas, dtype=np.float64).reshape(-1):
            if s <= 0.0:
                raise ValidationError("slopes must be positive")
            self.sigma_min = min(self.sigma_min, float(s))
            self.sigma_max = max(self.sigma_max, float(s))

    def set_value(self, element: int, sigma: float) -> None:
        if not 0 <= element < len(self.table):
            raise InvalidArgument(f"element {element} outside table of {len(self.table)}")
        if sigma < self.sigma_min or sigma > self.sigma_max:
            raise InvalidArgument(
                f"table update {sigma} outside announced bounds "
                f"[{self.sigma_min}, {self.sigma_max}]"
            )
        self.table[element] = sigma

    def _values(self, xs, ts, elems):
        if elems is None:
            raise InvalidArgument("table field needs element context to evaluate")
        return self.table[np.asarray(elems, dtype=np.int64)]

    @property
    def needs_elements(self) -> bool:
        return True


class CompositeMinField(SlopeField):
    """Pointwise minimum of several fields."""

    kind = "composite"

    def __init__(self, children, kappa: float = 1.0):
        children = list(children)
        if not children:
            raise ValidationError("composite field needs at least one child")
        super().__init__(
            min(c.sigma_min for c in children),
            min(c.sigma_max for c in children),
            kappa,
        )
        self.children = children

    def _values(self, xs, ts, elems):
        vals = self.children[0]._values(xs, ts, elems)
        for child in self.children[1:]:
            vals = np.minimum(vals, child._values(xs, ts, elems))
        return vals

    @property
    def needs_elements(self) -> bool:
        return any(c.needs_elements for c in self.children)


# ---------------------------------------------------------------------------
# sampled minimum over a simplex
# ---------------------------------------------------------------------------

_EXTRA_BARY_SEED = 20240711
_extra_bary_cache: dict[tuple[int, int], np.ndarray] = {}


def _barycentric_weights(k: int, samples: int) -> np.ndarray:
    """Rows of barycentric weights: vertices, midpoints, centroid, extras.

    The extra rows are quasi-random interior points drawn once from a fixed
    seed, so every call (and every run) samples the same locations.
    """
    key = (k, samples)
    got = _extra_bary_cache.get(key)
    if got is not None:
        return got
    rows = [np.eye(k)]
    mids = []
    for i in range(k):
        for j in range(i + 1, k):
            w = np.zeros(k)
            w[i] = w[j] = 0.5
            mids.append(w)
    rows.append(np.array(mids))
    rows.append(np.full((1, k), 1.0 / k))
    if samples > 0:
        rng = np.random.default_rng(_EXTRA_BARY_SEED + 1000 * k + samples)
        extra = rng.dirichlet(np.ones(k), size=samples)
        rows.append(extra)
    weights = np.vstack(rows)
    _extra_bary_cache[key] = weights
    return weights


def sampled_min_values(field: SlopeField, positions: np.ndarray,
                       times_batch: np.ndarray, samples: int = 4,
                       element: int | None = None) -> np.ndarray:
    """Kappa-scaled, clamped sampled minimum for a batch of time assignments.

    ``positions`` is (k, dim); ``times_batch`` is (B, k): the same spatial
    simplex under B different vertex-time assignments (the greedy probes many
    candidate lifts at once).  Returns (B,) slope values.
    """
    positions = np.asarray(positions, dtype=np.float64)
    times_batch = np.atleast_2d(np.asarray(times_batch, dtype=np.float64))
    if field.is_constant:
        # Sampling a constant always returns the constant: the minimum equals
        # sigma_min, so the kappa scaling is clamped away.
        return np.full(times_batch.shape[0], field.sigma_min)
    k = positions.shape[0]
    weights = _barycentric_weights(k, samples)  # (S, k)
    pts = weights @ positions                   # (S, dim)
    ts = times_batch @ weights.T                # (B, S)
    B, S = ts.shape
    elems = None
    if element is not None:
        elems = np.full(B * S, int(element), dtype=np.int64)
    flat = field.values(np.tile(pts, (B, 1)), ts.reshape(-1), elems=elems)
    mins = flat.reshape(B, S).min(axis=1)
    return np.maximum(field.sigma_min, mins * field.kappa)


def sampled_min_simplices(field: SlopeField, positions: np.ndarray,
                          times: np.ndarray, samples: int = 4,
                          elements=None) -> np.ndarray:
    """Conservative slope for many simplices at once.

    ``positions`` is (m, k, dim), ``times`` is (m, k), ``elements`` an
    optional (m,) id array.  Returns (m,) values identical to calling
    :func:`min_slope_over` on each row (same sample points, same scaling).
    """
    positions = np.asarray(positions, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    m, k = times.shape
    if field.is_constant:
        return np.full(m, field.sigma_min)
    weights = _barycentric_weights(k, samples)  # (S, k)
    S = weights.shape[0]
    pts = np.einsum("sk,mkd->msd", weights, positions).reshape(m * S, -1)
    ts = (times @ weights.T).reshape(m * S)
    elems = None
    if elements is not None:
        elems = np.repeat(np.asarray(elements, dtype=np.int64), S)
    vals = field.values(pts, ts, elems=elems).reshape(m, S).min(axis=1)
    return np.maximum(field.sigma_min, vals * field.kappa)


def min_slope_over(field: SlopeField, positions, times, samples: int = 4,
                   element: int | None = None) -> SimplexSlope:
    """Conservative slope for one (possibly lifted) simplex.

    See the module docstring for the sampling contract.  ``element`` is the
    mesh element id, required by table-backed fields.
    """
    positions = np.asarray(positions, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    value = float(
        sampled_min_values(field, positions, times[None, :], samples, element)[0]
    )
    return SimplexSlope(positions=positions, times=times, value=value)


# ---------------------------------------------------------------------------
# advisory monotonicity probe
# ---------------------------------------------------------------------------


def check_cone_monotonicity(field: SlopeField, probes: int, bbox=None,
                            t_max: float = 10.0, dim: int = 2,
                            seed: int = 0) -> dict:
    """Sample test of the modeling assumption behind conservative pitching.

    For each probe point P the field is compared against samples on the
    boundary of P's cone of dependence (slope taken at P): a probe is a
    violation when sigma(P) is smaller than every sampled slope on that
    boundary, i.e. the slope at P drops below anything that could have
    influenced it.  This is advisory; the mesher stays causal regardless, but
    the physical interpretation of the field is suspect when violations show
    up.  Returns ``{"probes": n, "violations": k, "examples": [...]}``.
    """
    if probes <= 0:
        raise InvalidArgument("probe count must be positive")
    if field.needs_elements:
        raise InvalidArgument(
            "cone monotonicity probing needs a formula field, not a table"
        )
    if bbox is None:
        lo = np.zeros(dim)
        hi = np.ones(dim)
    else:
        lo = np.asarray(bbox[0], dtype=np.float64)
        hi = np.asarray(bbox[1], dtype=np.float64)
        dim = len(lo)

    rng = np.random.default_rng(seed)
    n_boundary = 16
    violations = 0
    examples: list[dict] = []
    for _ in range(probes):
        x = lo + rng.random(dim) * (hi - lo)
        t = float(rng.uniform(0.2 * t_max, t_max))
        s_here = float(field._values(x[None, :], np.array([t]), None)[0])
        # Boundary of the cone of dependence: walk back in time along rays.
        fracs = rng.uniform(0.05, 1.0, size=n_boundary)
        if dim == 1:
            dirs = np.where(rng.random(n_boundary) < 0.5, -1.0, 1.0)[:, None]
        else:
            ang = rng.uniform(0.0, 2.0 * math.pi, size=n_boundary)
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        rho = fracs * t / s_here
        ys = x[None, :] + rho[:, None] * dirs
        taus = t - s_here * rho
        s_boundary = field._values(ys, taus, None)
        floor = float(s_boundary.min())
        if s_here < floor * (1.0 - 1e-12):
            violations += 1
            if len(examples) < 5:
                examples.append(
                    {"point": x.tolist(), "time": t, "slope": s_here,
                     "boundary_min": floor}
                )
    return {"probes": probes, "violations": violations, "examples": examples}


# ---------------------------------------------------------------------------
# document parsing
# ---------------------------------------------------------------------------


def _parse_field_line(args: list[str], base_dir: Path, n_elements: int | None,
                      where: str) -> SlopeField:
    if not args:
        raise ValidationError("empty field line", where)
    kind, rest = args[0], args[1:]
    try:
        nums = [float(a) for a in rest]
    except ValueError:
        nums = None
    if kind == "constant":
        if nums is None or len(nums) != 1:
            raise ValidationError("usage: field constant <sigma>", where)
        return ConstantField(nums[0])
    if kind == "timestep":
        if nums is None or len(nums) < 3 or len(nums) % 2 == 0:
            raise ValidationError(
                "usage: field timestep <boundaries...> <slopes...> "
                "(k-1 boundaries then k slopes)", where
            )
        k = (len(nums) + 1) // 2
        return TimeStepField(nums[: k - 1], nums[k - 1 :])
    if kind == "cone":
        if nums is None or len(nums) not in (5, 6):
            raise ValidationError(
                "usage: field cone <cx> [<cy>] <t_apex> <sigma_inside> "
                "<sigma_outside> <cone_slope>", where
            )
        center, tail = (nums[:1], nums[1:]) if len(nums) == 5 else (nums[:2], nums[2:])
        return SpatialConeField(center, tail[0], tail[1], tail[2], tail[3])
    if kind == "table":
        if len(rest) != 1:
            raise ValidationError("usage: field table <path>", where)
        return _load_table(base_dir / rest[0], n_elements)
    raise ValidationError(f"unknown field kind {kind!r}", where)


def _load_table(path: Path, n_elements: int | None) -> TableField:
    if n_elements is None:
        raise ValidationError("table field needs a mesh for its element count")
    values = np.zeros(n_elements)
    seen = np.zeros(n_elements, dtype=bool)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read table: {exc}", str(path)) from None
    for lineno, rawline in enumerate(lines, start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{path}:{lineno}"
        tokens = line.split()
        if len(tokens) != 2:
            raise ValidationError("table rows are '<element id> <sigma>'", where)
        try:
            elem, sigma = int(tokens[0]), float(tokens[1])
        except ValueError as exc:
            raise ValidationError(f"bad table row: {exc}", where) from None
        if not 0 <= elem < n_elements:
            raise ValidationError(f"element {elem} out of range", where)
        if seen[elem]:
            raise ValidationError(f"duplicate row for element {elem}", where)
        seen[elem] = True
        values[elem] = sigma
    if not seen.all():
        missing = int(np.flatnonzero(~seen)[0])
        raise ValidationError(f"table missing element {missing}", str(path))
    return TableField(values)


def parse_field(text: str, base_dir=".", n_elements: int | None = None,
                source: str = "<field>") -> SlopeField:
    """Parse a field document given as text; see the module docstring grammar."""
    base_dir = Path(base_dir)
    fields: list[SlopeField] = []
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "field":
            tokens = tokens[1:]
        fields.append(
            _parse_field_line(tokens, base_dir, n_elements, f"{source}:{lineno}")
        )
    if not fields:
        raise ValidationError("no field line found", source)
    if len(fields) == 1:
        return fields[0]
    return CompositeMinField(fields)


def load_field(path, n_elements: int | None = None) -> SlopeField:
    """Parse a field document file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read field document: {exc}", str(path)) from None
    return parse_field(text, base_dir=path.parent, n_elements=n_elements,
                       source=str(path))
