"""Tests for slope fields, the sampled simplex minimum, and field documents."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tentmesh.errors import InvalidArgument, OutOfDomain, ValidationError
from tentmesh.fields import (
    CompositeMinField,
    ConstantField,
    SlopeField,
    SpatialConeField,
    TableField,
    TimeStepField,
    check_cone_monotonicity,
    load_field,
    min_slope_over,
    parse_field,
    sampled_min_values,
    slope_at,
)
from tentmesh.geometry import EventPoint


class LinearInX(SlopeField):
    """sigma(x, t) = 1 + x[0]; a smooth test field on the unit interval."""

    kind = "linear-test"

    def __init__(self, kappa=1.0):
        super().__init__(1.0, 2.0, kappa)

    def _values(self, xs, ts, elems):
        return 1.0 + xs[:, 0]


def ev(x, t):
    return EventPoint(position=np.atleast_1d(np.asarray(x, dtype=float)), time=t)


class TestBuiltinFields:
    def test_constant(self):
        f = ConstantField(2.5)
        assert slope_at(f, ev([0.3, 0.4], 1.0)) == 2.5
        assert (f.sigma_min, f.sigma_max) == (2.5, 2.5)

    def test_timestep_boundary_belongs_to_later_band(self):
        f = TimeStepField([5.0], [2.0, 0.5])
        assert slope_at(f, ev([0.0], 4.9)) == 2.0
        assert slope_at(f, ev([0.0], 5.0)) == 0.5
        assert slope_at(f, ev([0.0], 7.0)) == 0.5
        assert (f.sigma_min, f.sigma_max) == (0.5, 2.0)

    def test_timestep_multiband(self):
        f = TimeStepField([1.0, 2.0], [1.0, 0.25, 4.0])
        got = f.values(np.zeros((4, 1)), np.array([0.5, 1.0, 1.5, 2.0]))
        assert got.tolist() == [1.0, 0.25, 0.25, 4.0]

    def test_cone_membership_boundary_is_inside(self):
        f = SpatialConeField([0.5, 0.5], 0.0, 4.0, 1.0, 4.0)
        assert slope_at(f, ev([0.5, 0.5], 0.0)) == 4.0       # apex
        assert slope_at(f, ev([0.5, 0.75], 0.5)) == 1.0      # outside
        assert slope_at(f, ev([0.5, 0.75], 1.0)) == 4.0      # exactly on the cone
        assert (f.sigma_min, f.sigma_max) == (1.0, 4.0)

    def test_table_requires_elements(self):
        f = TableField([1.0, 0.5, 2.0])
        with pytest.raises(InvalidArgument):
            f.values(np.zeros((1, 2)), np.zeros(1))
        got = f.values(np.zeros((3, 2)), np.zeros(3), elems=[2, 0, 1])
        assert got.tolist() == [2.0, 1.0, 0.5]

    def test_table_future_values_widen_bounds(self):
        f = TableField([1.0, 1.0])
        f.note_future_sigma([0.25])
        assert f.sigma_min == 0.25
        f.set_value(1, 0.25)
        assert f.table.tolist() == [1.0, 0.25]
        with pytest.raises(InvalidArgument):
            f.set_value(0, 0.1)  # below announced bounds
        with pytest.raises(InvalidArgument):
            f.set_value(7, 1.0)

    def test_composite_is_pointwise_min(self):
        f = CompositeMinField([ConstantField(2.0), TimeStepField([1.0], [3.0, 0.5])])
        assert slope_at(f, ev([0.0], 0.0)) == 2.0
        assert slope_at(f, ev([0.0], 1.5)) == 0.5
        assert (f.sigma_min, f.sigma_max) == (0.5, 2.0)

    def test_positive_slope_required(self):
        with pytest.raises(ValidationError):
            ConstantField(0.0)
        with pytest.raises(ValidationError):
            TimeStepField([1.0], [1.0, -2.0])

    def test_negative_time_raises(self):
        with pytest.raises(OutOfDomain):
            slope_at(ConstantField(1.0), ev([0.0], -0.1))

    def test_attached_domain_is_enforced(self):
        f = ConstantField(1.0)
        f.attach_domain([0.0, 0.0], [1.0, 1.0])
        assert slope_at(f, ev([0.5, 0.5], 0.0)) == 1.0
        with pytest.raises(OutOfDomain):
            slope_at(f, ev([2.0, 0.5], 0.0))

    def test_vectorized_matches_pointwise(self):
        f = SpatialConeField([0.0, 0.0], 1.0, 3.0, 1.0, 2.0)
        rng = np.random.default_rng(7)
        xs = rng.uniform(-2, 2, size=(50, 2))
        ts = rng.uniform(0, 5, size=50)
        batch = f.values(xs, ts)
        single = [slope_at(f, ev(x, t)) for x, t in zip(xs, ts)]
        assert batch.tolist() == single


class TestMinSlopeOver:
    SEG = np.array([[0.0], [1.0]])

    def test_constant_field_returns_constant_for_any_kappa(self):
        f = ConstantField(1.7, kappa=0.5)
        got = min_slope_over(f, self.SEG, np.array([0.0, 2.0]))
        assert got.value == 1.7

    def test_linear_field_min_at_vertex_sample(self):
        # sigma = 1 + x on [0, 1]: the x = 0 vertex is among the samples, so
        # the sampled minimum is exactly 1.
        f = LinearInX()
        got = min_slope_over(f, self.SEG, np.array([0.0, 0.0]))
        assert got.value == 1.0

    def test_kappa_scales_but_clamps_at_sigma_min(self):
        f = LinearInX(kappa=0.95)
        seg = np.array([[0.5], [1.0]])
        got = min_slope_over(f, seg, np.array([0.0, 0.0]))
        assert got.value == pytest.approx(1.5 * 0.95, rel=1e-15)
        # Near x = 0 the scaled value would dip below sigma_min and is clamped.
        got2 = min_slope_over(f, self.SEG, np.array([0.0, 0.0]))
        assert got2.value == 1.0

    def test_time_variation_is_sampled_through_lifts(self):
        f = TimeStepField([1.0], [2.0, 0.5])
        flat = min_slope_over(f, self.SEG, np.array([0.0, 0.0]))
        lifted = min_slope_over(f, self.SEG, np.array([2.0, 0.0]))
        assert flat.value == 2.0
        assert lifted.value == 0.5  # one vertex sits past the drop

    def test_batch_matches_single(self):
        f = SpatialConeField([0.5], 0.0, 2.0, 1.0, 1.0)
        tri = np.array([[0.0], [1.0]])
        batch_times = np.array([[0.0, 0.0], [1.0, 0.5], [3.0, 3.0]])
        batch = sampled_min_values(f, tri, batch_times)
        singles = [min_slope_over(f, tri, t).value for t in batch_times]
        assert batch.tolist() == singles

    def test_more_samples_resolve_narrow_feature(self):
        # A narrow low-slope pocket between mesh points: midpoints miss it at
        # samples=0 unless a quasi-random extra point lands inside.
        class Pocket(SlopeField):
            kind = "pocket"

            def __init__(self):
                super().__init__(0.1, 1.0)

            def _values(self, xs, ts, elems):
                inside = np.abs(xs[:, 0] - 0.37) < 0.015
                return np.where(inside, 0.1, 1.0)

        f = Pocket()
        coarse = min_slope_over(f, self.SEG, np.zeros(2), samples=0)
        fine = min_slope_over(f, self.SEG, np.zeros(2), samples=400)
        assert coarse.value == 1.0
        assert fine.value == pytest.approx(0.1)

    def test_sampling_is_deterministic(self):
        f = SpatialConeField([0.3, 0.3], 0.0, 2.0, 0.7, 3.0)
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        a = min_slope_over(f, tri, np.array([0.1, 0.2, 0.3]))
        b = min_slope_over(f, tri, np.array([0.1, 0.2, 0.3]))
        assert a.value == b.value


class TestConeMonotonicity:
    def test_constant_has_no_violations(self):
        rep = check_cone_monotonicity(ConstantField(1.0), probes=200, dim=1)
        assert rep["violations"] == 0

    def test_slope_increasing_in_time_has_no_violations(self):
        # Slope only grows with time, so a point is never below its past.
        rep = check_cone_monotonicity(TimeStepField([5.0], [1.0, 2.0]), probes=200)
        assert rep["violations"] == 0

    def test_sudden_global_drop_is_reported(self):
        rep = check_cone_monotonicity(TimeStepField([5.0], [2.0, 0.2]), probes=200)
        assert rep["violations"] > 0
        assert rep["examples"]

    def test_table_field_rejected(self):
        with pytest.raises(InvalidArgument):
            check_cone_monotonicity(TableField([1.0]), probes=10)


class TestDocuments:
    def test_parse_constant(self):
        f = parse_field("field constant 2.0")
        assert isinstance(f, ConstantField) and f.sigma == 2.0

    def test_parse_timestep(self):
        f = parse_field("field timestep 5.0 2.0 0.5")
        assert isinstance(f, TimeStepField)
        assert f.boundaries.tolist() == [5.0] and f.sigmas.tolist() == [2.0, 0.5]

    def test_parse_cone_1d_and_2d(self):
        f1 = parse_field("field cone 0.5 0.0 4.0 1.0 4.0")
        assert isinstance(f1, SpatialConeField) and f1.center.tolist() == [0.5]
        f2 = parse_field("field cone 0.5 0.5 0.0 4.0 1.0 4.0")
        assert f2.center.tolist() == [0.5, 0.5]

    def test_parse_composite_and_comments(self):
        f = parse_field("# two parts\nfield constant 2.0\n\nfield timestep 1.0 9.0 0.5\n")
        assert isinstance(f, CompositeMinField)

    def test_parse_table(self, tmp_path):
        (tmp_path / "slopes.txt").write_text("0 1.0\n2 0.5\n1 2.0\n")
        doc = tmp_path / "field.txt"
        doc.write_text("field table slopes.txt\n")
        f = load_field(doc, n_elements=3)
        assert isinstance(f, TableField)
        assert f.table.tolist() == [1.0, 2.0, 0.5]

    def test_table_missing_element(self, tmp_path):
        (tmp_path / "slopes.txt").write_text("0 1.0\n")
        doc = tmp_path / "field.txt"
        doc.write_text("field table slopes.txt\n")
        with pytest.raises(ValidationError, match="missing element"):
            load_field(doc, n_elements=2)

    def test_parse_errors(self):
        for bad in (
            "field constant",
            "field timestep 1.0 2.0",
            "field cone 1 2 3",
            "field warp 9",
            "",
        ):
            with pytest.raises(ValidationError):
                parse_field(bad)


@given(
    st.lists(st.floats(min_value=0.05, max_value=5.0, width=64), min_size=1,
             max_size=5),
    st.floats(min_value=0.0, max_value=20.0, width=64),
)
@settings(max_examples=100, deadline=None)
def test_timestep_values_stay_within_declared_bounds(sigmas, t):
    boundaries = [float(i + 1) for i in range(len(sigmas) - 1)]
    f = TimeStepField(boundaries, sigmas)
    v = slope_at(f, ev([0.0], t))
    assert f.sigma_min <= v <= f.sigma_max
    assert v in sigmas


@given(st.integers(min_value=0, max_value=12))
@settings(max_examples=30, deadline=None)
def test_sampled_min_never_below_sigma_min(samples):
    f = SpatialConeField([0.25, 0.25], 0.0, 0.3, 1.0, 2.0)
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    got = min_slope_over(f, tri, np.array([5.0, 0.0, 0.0]), samples=samples)
    assert got.value >= f.sigma_min
    assert got.value <= f.sigma_max
