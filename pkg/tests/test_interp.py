"""Path planner tests.

Arc-length parameterization is checked against central finite differences of
the sampled points, never against the planner's own tangent vectors, so a
bad reparameterization cannot vouch for itself.
"""
import math

import numpy as np
import pytest

from mocsim import PathSegment, ProfileSpec, ProfileType, plan_lookahead, plan_path, sample_path
from mocsim.errors import DegenerateGeometry, DimensionMismatch
from mocsim.interp import corner_blend_deviation, junction_speed_limit

LIMITS = ProfileSpec(velocity=10.0, acceleration=100.0)


def finite_diff_speed(geom, n=512):
    """|dp/ds| over the interior of the curve via central differences."""
    h = geom.length * 1e-6
    s = np.linspace(h, geom.length - h, n)
    fwd = geom.point_many(s + h)
    bwd = geom.point_many(s - h)
    return np.linalg.norm(fwd - bwd, axis=1) / (2.0 * h)


# --- geometry exactness ------------------------------------------------------


def test_linear_3_4_5():
    plan = plan_path((0.0, 0.0), PathSegment.linear((1, 2), (3.0, 4.0), LIMITS))
    assert plan.total_arc_length == pytest.approx(5.0, abs=1e-12)
    assert plan.endpoint() == pytest.approx([3.0, 4.0], abs=1e-9)
    speeds = finite_diff_speed(plan.geometry)
    assert np.max(np.abs(speeds - 1.0)) <= 1e-6


def test_linear_midpoint_on_segment():
    plan = plan_path((0.0, 0.0), PathSegment.linear((1, 2), (3.0, 4.0), LIMITS))
    # halfway along the arc the point is at radius 2.5 from the origin
    t_half = None
    ts = np.linspace(0.0, plan.duration, 20001)
    s, _, _ = plan.speed_plan.sample_many(ts)
    t_half = ts[int(np.argmin(np.abs(s - 2.5)))]
    p = sample_path(plan, float(t_half))
    assert np.linalg.norm(p) == pytest.approx(2.5, abs=1e-3)
    assert p[1] / p[0] == pytest.approx(4.0 / 3.0, abs=1e-9)


def test_sample_path_clamps():
    plan = plan_path((0.0, 0.0), PathSegment.linear((1, 2), (3.0, 4.0), LIMITS))
    assert sample_path(plan, 0.0) == pytest.approx([0.0, 0.0], abs=0.0)
    assert sample_path(plan, plan.duration + 5.0) == pytest.approx([3.0, 4.0], abs=1e-9)


def test_circular_quarter_turn():
    seg = PathSegment.circular((1, 2), (0.0, 0.0), 90.0, LIMITS)
    plan = plan_path((100.0, 0.0), seg)
    assert plan.total_arc_length == pytest.approx(100.0 * math.pi / 2.0, rel=1e-12)
    assert plan.endpoint() == pytest.approx([0.0, 100.0], abs=1e-9)
    s = np.linspace(0.0, plan.total_arc_length, 2001)
    pts = plan.geometry.point_many(s)
    radii = np.linalg.norm(pts, axis=1)
    assert np.max(np.abs(radii - 100.0)) <= 1e-6 * 100.0


def test_circular_sweep_sign():
    cw = plan_path((10.0, 0.0), PathSegment.circular((1, 2), (0.0, 0.0), -90.0, LIMITS))
    assert cw.endpoint() == pytest.approx([0.0, -10.0], abs=1e-9)


def test_circular_full_sweeps_conserve_radius():
    rng = np.random.default_rng(23)
    for _ in range(50):
        center = rng.uniform(-50.0, 50.0, size=2)
        radius = 10.0 ** rng.uniform(-1, 2)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        start = center + radius * np.array([math.cos(phi), math.sin(phi)])
        sweep = rng.uniform(1.0, 360.0) * (1 if rng.random() < 0.5 else -1)
        plan = plan_path(start, PathSegment.circular((1, 2), center, sweep, LIMITS))
        s = np.linspace(0.0, plan.total_arc_length, 720)
        pts = plan.geometry.point_many(s)
        radii = np.linalg.norm(pts - center[None, :], axis=1)
        assert np.max(np.abs(radii - radius)) <= 1e-6 * radius
        speeds = finite_diff_speed(plan.geometry)
        assert np.max(np.abs(speeds - 1.0)) <= 1e-6


def test_helical_full_turn():
    seg = PathSegment.helical((1, 2, 3), (0.0, 0.0), 360.0, 10.0, LIMITS)
    plan = plan_path((100.0, 0.0, 0.0), seg)
    assert plan.endpoint() == pytest.approx([100.0, 0.0, 10.0], abs=1e-9)
    expected = math.hypot(2.0 * math.pi * 100.0, 10.0)
    assert plan.total_arc_length == pytest.approx(expected, rel=1e-12)


def test_helical_pitch_is_affine_in_angle():
    rng = np.random.default_rng(31)
    for _ in range(20):
        center = rng.uniform(-20.0, 20.0, size=2)
        radius = 10.0 ** rng.uniform(0, 2)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        start = np.array([center[0] + radius * math.cos(phi),
                          center[1] + radius * math.sin(phi),
                          rng.uniform(-5.0, 5.0)])
        sweep = rng.uniform(30.0, 720.0) * (1 if rng.random() < 0.5 else -1)
        z_target = start[2] + rng.uniform(-20.0, 20.0)
        plan = plan_path(start, PathSegment.helical((1, 2, 3), center, sweep,
                                                    z_target, LIMITS))
        s = np.linspace(0.0, plan.total_arc_length, 1441)
        pts = plan.geometry.point_many(s)
        theta = np.unwrap(np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0]))
        coeffs = np.polynomial.polynomial.polyfit(theta, pts[:, 2], 1)
        fit = coeffs[0] + coeffs[1] * theta
        assert np.max(np.abs(pts[:, 2] - fit)) <= 1e-6
        speeds = finite_diff_speed(plan.geometry)
        assert np.max(np.abs(speeds - 1.0)) <= 1e-6


def test_spline_hits_every_waypoint():
    rng = np.random.default_rng(5)
    for _ in range(20):
        dim = 2 if rng.random() < 0.5 else 3
        n_wp = rng.integers(3, 9)
        steps = rng.uniform(-10.0, 10.0, size=(n_wp - 1, dim))
        steps[np.linalg.norm(steps, axis=1) < 0.5] += 1.0
        wps = np.vstack([rng.uniform(-20.0, 20.0, size=dim),
                         np.zeros((n_wp - 1, dim))])
        wps[1:] = wps[0] + np.cumsum(steps, axis=0)
        axes = tuple(range(1, dim + 1))
        plan = plan_path(wps[0], PathSegment.spline(axes, wps, LIMITS))
        s_wp = plan.geometry.waypoint_arclengths()
        assert s_wp[0] == 0.0
        assert s_wp[-1] == pytest.approx(plan.total_arc_length, abs=0.0)
        assert np.all(np.diff(s_wp) > 0.0)
        pts = plan.geometry.point_many(s_wp)
        assert np.max(np.abs(pts - wps)) <= 1e-6
        # numeric reparameterization gets a looser unit-speed budget
        speeds = finite_diff_speed(plan.geometry, n=1024)
        assert np.max(np.abs(speeds - 1.0)) <= 1e-3


def test_spline_endpoint_tolerance():
    wps = [(0.0, 0.0), (10.0, 5.0), (20.0, -5.0), (30.0, 0.0)]
    plan = plan_path((0.0, 0.0), PathSegment.spline((1, 2), wps, LIMITS))
    end = plan.geometry.point_at(plan.total_arc_length)
    assert end == pytest.approx([30.0, 0.0], abs=1e-6)


def test_speed_plan_target_is_arc_length():
    for seg in [
        PathSegment.linear((1, 2), (3.0, 4.0), LIMITS),
        PathSegment.circular((1, 2), (0.0, 0.0), 180.0, LIMITS),
        PathSegment.spline((1, 2), [(0, 0), (5, 5), (10, 0)], LIMITS),
    ]:
        start = (0.0, 0.0) if seg.kind.value != "Circular" else (1.0, 0.0)
        plan = plan_path(start, seg)
        assert plan.speed_plan.target_pos == pytest.approx(plan.total_arc_length, abs=0.0)


# --- degenerate and mismatched inputs ----------------------------------------


def test_zero_sweep_rejected():
    with pytest.raises(DegenerateGeometry):
        plan_path((10.0, 0.0), PathSegment.circular((1, 2), (0.0, 0.0), 0.0, LIMITS))


def test_arc_start_on_center_rejected():
    with pytest.raises(DegenerateGeometry):
        plan_path((0.0, 0.0), PathSegment.circular((1, 2), (0.0, 0.0), 90.0, LIMITS))


def test_zero_length_linear_rejected():
    with pytest.raises(DegenerateGeometry):
        plan_path((3.0, 4.0), PathSegment.linear((1, 2), (3.0, 4.0), LIMITS))


def test_spline_needs_three_waypoints():
    with pytest.raises(DegenerateGeometry):
        plan_path((0.0, 0.0), PathSegment.spline((1, 2), [(0, 0), (1, 1)], LIMITS))


def test_spline_coincident_waypoints_rejected():
    wps = [(0.0, 0.0), (5.0, 5.0), (5.0, 5.0), (10.0, 0.0)]
    with pytest.raises(DegenerateGeometry):
        plan_path((0.0, 0.0), PathSegment.spline((1, 2), wps, LIMITS))


def test_spline_must_start_at_current_position():
    wps = [(1.0, 1.0), (5.0, 5.0), (10.0, 0.0)]
    with pytest.raises(DegenerateGeometry):
        plan_path((0.0, 0.0), PathSegment.spline((1, 2), wps, LIMITS))


@pytest.mark.parametrize("start,seg", [
    ((0.0, 0.0, 0.0), PathSegment.linear((1, 2), (3.0, 4.0), LIMITS)),
    ((0.0, 0.0), PathSegment.linear((1, 2), (3.0, 4.0, 5.0), LIMITS)),
    ((1.0, 0.0, 0.0), PathSegment.circular((1, 2, 3), (0.0, 0.0), 90.0, LIMITS)),
    ((1.0, 0.0), PathSegment.helical((1, 2), (0.0, 0.0), 90.0, 5.0, LIMITS)),
    ((0.0, 0.0), PathSegment.spline((1, 2), [(0, 0, 0), (1, 1, 1), (2, 0, 0)], LIMITS)),
])
def test_dimension_mismatches_rejected(start, seg):
    with pytest.raises(DimensionMismatch):
        plan_path(start, seg)


# --- look-ahead --------------------------------------------------------------


def test_junction_formula_90_degrees():
    v = junction_speed_limit(0.0, accel=100.0, corner_tolerance=0.01, cruise=10.0)
    assert v == pytest.approx(1.0, abs=1e-12)


def test_junction_collinear_is_cruise():
    segs = [PathSegment.linear((1, 2), (10.0, 0.0), LIMITS),
            PathSegment.linear((1, 2), (20.0, 0.0), LIMITS)]
    plan = plan_lookahead((0.0, 0.0), segs, LIMITS, corner_tolerance=0.01)
    assert plan.junction_velocities[1] == pytest.approx(LIMITS.velocity, abs=1e-12)


def test_junction_right_angle_in_plan():
    segs = [PathSegment.linear((1, 2), (10.0, 0.0), LIMITS),
            PathSegment.linear((1, 2), (10.0, 10.0), LIMITS)]
    plan = plan_lookahead((0.0, 0.0), segs, LIMITS, corner_tolerance=0.01)
    assert plan.junction_velocities == pytest.approx([0.0, 1.0, 0.0], abs=1e-12)


def test_reversal_stops_dead():
    segs = [PathSegment.linear((1, 2), (10.0, 0.0), LIMITS),
            PathSegment.linear((1, 2), (0.0, 0.0), LIMITS)]
    plan = plan_lookahead((0.0, 0.0), segs, LIMITS, corner_tolerance=0.01)
    assert plan.junction_velocities[1] == 0.0


def test_single_short_segment_is_triangular():
    seg = PathSegment.linear((1, 2), (0.3, 0.4), LIMITS)
    plan = plan_lookahead((0.0, 0.0), [seg], LIMITS, corner_tolerance=0.01)
    assert plan.junction_velocities == [0.0, 0.0]
    speed = plan.plans[0].speed_plan
    ts = np.arange(0, int(math.ceil(speed.total_duration * 1000)) + 1) * 1e-3
    s, sdot, _ = speed.sample_many(ts)
    # 0.5 units of travel cannot reach cruise under a=100
    assert np.max(sdot) < LIMITS.velocity
    assert s[-1] == pytest.approx(0.5, abs=1e-9)


def zigzag_segments(n=20):
    pts = [(float(i + 1), float((i + 1) % 2)) for i in range(n)]
    return [PathSegment.linear((1, 2), p, LIMITS) for p in pts]


def test_zigzag_lookahead_respects_corners_and_limits():
    tol = 0.01
    segs = zigzag_segments(20)
    plan = plan_lookahead((0.0, 0.0), segs, LIMITS, corner_tolerance=tol)

    assert plan.junction_velocities[0] == 0.0
    assert plan.junction_velocities[-1] == 0.0
    points = [np.array([0.0, 0.0])] + [np.asarray(s.target, float) for s in segs]
    dirs = [(b - a) / np.linalg.norm(b - a) for a, b in zip(points[:-1], points[1:])]
    a_max = max(LIMITS.acceleration, LIMITS.resolved_deceleration())

    for i in range(1, len(segs)):
        vj = plan.junction_velocities[i]
        cos_theta = float(np.dot(dirs[i - 1], dirs[i]))
        assert vj <= LIMITS.velocity + 1e-12
        dev = corner_blend_deviation(vj, cos_theta, LIMITS.acceleration)
        assert dev <= tol + 1e-12, (i, vj, dev)

    for i, sub in enumerate(plan.plans):
        speed = sub.speed_plan
        ts = np.arange(0, int(math.ceil(speed.total_duration * 1000)) + 1) * 1e-3
        s, sdot, sddot = speed.sample_many(ts)
        assert np.max(np.abs(sdot)) <= LIMITS.velocity + 1e-6
        assert np.max(np.abs(sddot)) <= a_max + 1e-6
        # entry/exit speeds line up with the junction table
        assert speed.sample(0.0)[1] == pytest.approx(plan.junction_velocities[i], abs=1e-9)
        assert speed.end_velocity == pytest.approx(plan.junction_velocities[i + 1], abs=1e-9)


def test_lookahead_reachability_randomized():
    """Junction speeds always bridgeable within each segment's length."""
    rng = np.random.default_rng(97)
    for _ in range(50):
        n = int(rng.integers(2, 12))
        pts = np.cumsum(rng.uniform(-3.0, 3.0, size=(n, 2)), axis=0)
        keep = np.ones(n, dtype=bool)
        keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 1e-6
        pts = pts[keep]
        if len(pts) < 2:
            continue
        start = pts[0] + np.array([1.0, 1.0])
        segs = [PathSegment.linear((1, 2), p, LIMITS) for p in pts]
        plan = plan_lookahead(start, segs, LIMITS, corner_tolerance=0.05)
        v = plan.junction_velocities
        r = LIMITS.ramp_ratio()
        a_eff = LIMITS.acceleration * (1.0 - 0.5 * r)
        d_eff = LIMITS.resolved_deceleration() * (1.0 - 0.5 * r)
        for i, sub in enumerate(plan.plans):
            length = sub.total_arc_length
            assert v[i + 1] ** 2 <= v[i] ** 2 + 2.0 * a_eff * length + 1e-9
            assert v[i] ** 2 <= v[i + 1] ** 2 + 2.0 * d_eff * length + 1e-9


def test_lookahead_rejects_mixed_kinds():
    segs = [PathSegment.linear((1, 2), (1.0, 0.0), LIMITS),
            PathSegment.circular((1, 2), (0.0, 0.0), 90.0, LIMITS)]
    with pytest.raises(ValueError):
        plan_lookahead((0.0, 0.0), segs, LIMITS)


def test_lookahead_rejects_mismatched_axes():
    segs = [PathSegment.linear((1, 2), (1.0, 0.0), LIMITS),
            PathSegment.linear((1, 3), (2.0, 0.0), LIMITS)]
    with pytest.raises(DimensionMismatch):
        plan_lookahead((0.0, 0.0), segs, LIMITS)


def test_scurve_limits_along_path():
    # ramped profiles must stay inside limits along curved paths too
    limits = ProfileSpec(velocity=20.0, acceleration=50.0,
                         profile_type=ProfileType.SCURVE)
    plan = plan_path((30.0, 0.0), PathSegment.circular((1, 2), (0.0, 0.0), 270.0, limits))
    ts = np.arange(0, int(math.ceil(plan.duration * 1000)) + 1) * 1e-3
    _, vel = plan.state_many(ts)
    speed = np.linalg.norm(vel, axis=1)
    assert np.max(speed) <= limits.velocity + 1e-6
