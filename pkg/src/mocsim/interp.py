"""Coordinated multi-axis path planning.

Every path is split into two independent problems: a geometry that maps arc
length ``s`` to a point, and a 1-D speed plan over ``[0, L]`` produced by the
profile planner.  Sampling composes the two, so kinematic limits are enforced
along the path regardless of its shape.

Geometries are exact for lines, arcs, and helixes.  Splines interpolate the
waypoints with centripetal Catmull-Rom pieces and are reparameterized by arc
length through an adaptively refined lookup table, keeping the traversal
speed along the curve within a small fraction of the commanded one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DegenerateGeometry, DimensionMismatch, InvalidSpec
from .profiles import ProfilePlan, ProfileSpec, plan_profile, validate_spec

# Refinement targets for the spline arc-length table.
_CHORD_TOL = 1e-4
_SPEED_VAR_TOL = 2.5e-4
_MAX_DEPTH = 18


class SegmentKind(Enum):
    LINEAR = "Linear"
    CIRCULAR = "Circular"
    HELICAL = "Helical"
    SPLINE = "Spline"


@dataclass(frozen=True)
class PathSegment:
    """Declarative description of one path piece.

    Only the fields relevant to ``kind`` are set; the rest stay ``None``.
    ``sweep_deg`` is signed: positive sweeps counter-clockwise.
    """

    kind: SegmentKind
    axes: tuple[int, ...]
    limits: ProfileSpec
    target: tuple[float, ...] | None = None
    center: tuple[float, float] | None = None
    sweep_deg: float | None = None
    z_target: float | None = None
    waypoints: tuple[tuple[float, ...], ...] | None = None

    @classmethod
    def linear(cls, axes, target, limits):
        return cls(SegmentKind.LINEAR, tuple(axes), limits, target=tuple(target))

    @classmethod
    def circular(cls, axes, center, sweep_deg, limits):
        return cls(SegmentKind.CIRCULAR, tuple(axes), limits,
                   center=tuple(center), sweep_deg=float(sweep_deg))

    @classmethod
    def helical(cls, axes, center, sweep_deg, z_target, limits):
        return cls(SegmentKind.HELICAL, tuple(axes), limits,
                   center=tuple(center), sweep_deg=float(sweep_deg),
                   z_target=float(z_target))

    @classmethod
    def spline(cls, axes, waypoints, limits):
        return cls(SegmentKind.SPLINE, tuple(axes), limits,
                   waypoints=tuple(tuple(p) for p in waypoints))


class LinearGeometry:
    def __init__(self, start: np.ndarray, target: np.ndarray):
        self.start = np.asarray(start, dtype=np.float64)
        self.target = np.asarray(target, dtype=np.float64)
        delta = self.target - self.start
        self.length = float(np.linalg.norm(delta))
        if self.length <= 0.0:
            raise DegenerateGeometry("linear segment has zero length")
        self.direction = delta / self.length

    def point_many(self, s: np.ndarray) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        return self.start[None, :] + s[:, None] * self.direction[None, :]

    def tangent_many(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        return np.broadcast_to(self.direction, (len(s), len(self.direction))).copy()

    def point_at(self, s: float) -> np.ndarray:
        return self.point_many(np.array([s]))[0]

    def endpoint(self) -> np.ndarray:
        return self.target.copy()


class ArcGeometry:
    """Planar arc around ``center``; the radius comes from the start point."""

    def __init__(self, start: np.ndarray, center: np.ndarray, sweep_deg: float):
        self.center = np.asarray(center, dtype=np.float64)
        start = np.asarray(start, dtype=np.float64)
        rel = start - self.center
        self.radius = float(np.linalg.norm(rel))
        if self.radius <= 0.0:
            raise DegenerateGeometry("arc start coincides with its center")
        if sweep_deg == 0.0 or not math.isfinite(sweep_deg):
            raise DegenerateGeometry("arc sweep must be a nonzero angle")
        self.phi0 = math.atan2(rel[1], rel[0])
        self.sweep = math.radians(sweep_deg)
        self.orient = 1.0 if self.sweep > 0.0 else -1.0
        self.length = self.radius * abs(self.sweep)

    def _angles(self, s: np.ndarray) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        return self.phi0 + self.orient * s / self.radius

    def point_many(self, s: np.ndarray) -> np.ndarray:
        phi = self._angles(s)
        return np.stack([self.center[0] + self.radius * np.cos(phi),
                         self.center[1] + self.radius * np.sin(phi)], axis=1)

    def tangent_many(self, s: np.ndarray) -> np.ndarray:
        phi = self._angles(s)
        return np.stack([-self.orient * np.sin(phi),
                         self.orient * np.cos(phi)], axis=1)

    def point_at(self, s: float) -> np.ndarray:
        return self.point_many(np.array([s]))[0]

    def endpoint(self) -> np.ndarray:
        return self.point_at(self.length)


class HelixGeometry:
    """Arc in the first two axes with the third advancing linearly in angle."""

    def __init__(self, start: np.ndarray, center: np.ndarray,
                 sweep_deg: float, z_target: float):
        start = np.asarray(start, dtype=np.float64)
        self.arc = ArcGeometry(start[:2], center, sweep_deg)
        self.z0 = float(start[2])
        self.z1 = float(z_target)
        dz = self.z1 - self.z0
        self.length = math.hypot(self.arc.length, dz)
        self.dz = dz

    def point_many(self, s: np.ndarray) -> np.ndarray:
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        frac = s / self.length
        arc_s = frac * self.arc.length
        xy = self.arc.point_many(arc_s)
        z = self.z0 + frac * self.dz
        return np.concatenate([xy, z[:, None]], axis=1)

    def tangent_many(self, s: np.ndarray) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        arc_s = np.clip(s / self.length, 0.0, 1.0) * self.arc.length
        txy = self.arc.tangent_many(arc_s) * (self.arc.length / self.length)
        tz = np.full((len(s), 1), self.dz / self.length)
        return np.concatenate([txy, tz], axis=1)

    def point_at(self, s: float) -> np.ndarray:
        return self.point_many(np.array([s]))[0]

    def endpoint(self) -> np.ndarray:
        return self.point_at(self.length)


def _cr_knots(points: np.ndarray) -> np.ndarray:
    """Centripetal knot spacing: increments are sqrt of chord lengths."""
    d = np.linalg.norm(np.diff(points, axis=0), axis=1)
    knots = np.zeros(len(points))
    knots[1:] = np.cumsum(np.sqrt(d))
    return knots


def _cr_point(pts, ts, u):
    """Evaluate a Catmull-Rom piece (4 control points) at parameters ``u``.

    ``u`` is an array living in ``[ts[1], ts[2]]``.  Returns ``(point,
    derivative)`` with respect to the knot parameter.
    """
    u = np.asarray(u, dtype=np.float64)[:, None]
    p0, p1, p2, p3 = (pts[k][None, :] for k in range(4))
    t0, t1, t2, t3 = ts

    a1 = ((t1 - u) * p0 + (u - t0) * p1) / (t1 - t0)
    a2 = ((t2 - u) * p1 + (u - t1) * p2) / (t2 - t1)
    a3 = ((t3 - u) * p2 + (u - t2) * p3) / (t3 - t2)
    d_a1 = (p1 - p0) / (t1 - t0)
    d_a2 = (p2 - p1) / (t2 - t1)
    d_a3 = (p3 - p2) / (t3 - t2)

    b1 = ((t2 - u) * a1 + (u - t0) * a2) / (t2 - t0)
    b2 = ((t3 - u) * a2 + (u - t1) * a3) / (t3 - t1)
    d_b1 = (a2 - a1) / (t2 - t0) + ((t2 - u) * d_a1 + (u - t0) * d_a2) / (t2 - t0)
    d_b2 = (a3 - a2) / (t3 - t1) + ((t3 - u) * d_a2 + (u - t1) * d_a3) / (t3 - t1)

    c = ((t2 - u) * b1 + (u - t1) * b2) / (t2 - t1)
    d_c = (b2 - b1) / (t2 - t1) + ((t2 - u) * d_b1 + (u - t1) * d_b2) / (t2 - t1)
    return c, d_c


class SplineGeometry:
    """Centripetal Catmull-Rom curve through the waypoints.

    Endpoints are handled with reflected phantom control points, so the curve
    starts and ends exactly at the first and last waypoints.  An arc-length
    table drives ``point_many``; refinement bounds both the chord error and
    the variation of the parametric speed inside each table interval.
    """

    def __init__(self, waypoints: np.ndarray):
        pts = np.asarray(waypoints, dtype=np.float64)
        if pts.ndim != 2 or len(pts) < 3:
            raise DegenerateGeometry("a spline needs at least 3 waypoints")
        if np.any(np.linalg.norm(np.diff(pts, axis=0), axis=1) == 0.0):
            raise DegenerateGeometry("consecutive spline waypoints coincide")
        self.waypoints = pts
        ctrl = np.vstack([2.0 * pts[0] - pts[1], pts, 2.0 * pts[-1] - pts[-2]])
        self._ctrl = ctrl
        self._knots = _cr_knots(ctrl)
        self._build_table()

    def _eval(self, seg: int, u: np.ndarray):
        sl = slice(seg, seg + 4)
        return _cr_point(self._ctrl[sl], self._knots[seg:seg + 4], u)

    def _build_table(self):
        n_wp = len(self.waypoints)
        first_p, _ = self._eval(0, np.array([self._knots[1]]))
        us = [np.array([self._knots[1]])]
        segs = [np.array([0])]
        pts_out = [first_p]
        self._wp_table_idx = [0]
        count = 1
        for seg in range(n_wp - 1):
            u_r, p_r = self._refine_segment(seg, self._knots[seg + 1],
                                            self._knots[seg + 2])
            us.append(u_r)
            segs.append(np.full(len(u_r), seg))
            pts_out.append(p_r)
            count += len(u_r)
            self._wp_table_idx.append(count - 1)
        self._us = np.concatenate(us)
        pts_arr = np.concatenate(pts_out, axis=0)
        chords = np.linalg.norm(np.diff(pts_arr, axis=0), axis=1)
        self._cum = np.zeros(len(pts_arr))
        self._cum[1:] = np.cumsum(chords)
        self._table_pts = pts_arr
        self.length = float(self._cum[-1])
        self._interval_seg = np.concatenate(segs)

    def _refine_segment(self, seg, u_lo, u_hi):
        """Subdivide ``[u_lo, u_hi]`` until every interval is chord-flat with
        near-constant parametric speed; returns right endpoints and points,
        ascending.  All intervals at one depth are evaluated in a single
        batch, so table building costs a few array ops per level.
        """
        lo = np.array([u_lo])
        hi = np.array([u_hi])
        out_u = []
        out_p = []
        depth = 0
        while len(lo):
            mid = 0.5 * (lo + hi)
            p, dp = self._eval(seg, np.concatenate([lo, mid, hi]))
            n = len(lo)
            p_lo, p_mid, p_hi = p[:n], p[n:2 * n], p[2 * n:]
            speeds = np.linalg.norm(dp, axis=1)
            s3 = np.stack([speeds[:n], speeds[n:2 * n], speeds[2 * n:]])
            chord_err = np.linalg.norm(p_mid - 0.5 * (p_lo + p_hi), axis=1)
            s_max = s3.max(axis=0)
            s_min = s3.min(axis=0)
            var = np.divide(s_max - s_min, s_max,
                            out=np.zeros_like(s_max), where=s_max > 0.0)
            if depth >= _MAX_DEPTH:
                split = np.zeros(n, dtype=bool)
            elif depth < 3:
                split = np.ones(n, dtype=bool)
            else:
                split = (chord_err > _CHORD_TOL) | (var > _SPEED_VAR_TOL)
            out_u.append(hi[~split])
            out_p.append(p_hi[~split])
            lo = np.concatenate([lo[split], mid[split]])
            hi = np.concatenate([mid[split], hi[split]])
            depth += 1
        u = np.concatenate(out_u)
        p = np.concatenate(out_p, axis=0)
        order = np.argsort(u)
        return u[order], p[order]

    def waypoint_arclengths(self) -> np.ndarray:
        """Arc length at which each waypoint sits, first is 0, last is length."""
        return self._cum[self._wp_table_idx].copy()

    def _param_of(self, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        s = np.clip(np.asarray(s, dtype=np.float64), 0.0, self.length)
        idx = np.searchsorted(self._cum, s, side="right") - 1
        np.clip(idx, 0, len(self._cum) - 2, out=idx)
        span = self._cum[idx + 1] - self._cum[idx]
        span = np.where(span <= 0.0, 1.0, span)
        frac = (s - self._cum[idx]) / span
        u = self._us[idx] + frac * (self._us[idx + 1] - self._us[idx])
        # The interval [idx, idx+1] lives inside the segment that produced
        # its right knot; left knots can sit on a segment boundary.
        return u, self._interval_seg[idx + 1]

    def point_many(self, s: np.ndarray) -> np.ndarray:
        u, seg_ids = self._param_of(s)
        out = np.empty((len(u), self.waypoints.shape[1]))
        for seg in np.unique(seg_ids):
            mask = seg_ids == seg
            p, _ = self._eval(int(seg), u[mask])
            out[mask] = p
        return out

    def tangent_many(self, s: np.ndarray) -> np.ndarray:
        u, seg_ids = self._param_of(s)
        out = np.empty((len(u), self.waypoints.shape[1]))
        for seg in np.unique(seg_ids):
            mask = seg_ids == seg
            _, dp = self._eval(int(seg), u[mask])
            norms = np.linalg.norm(dp, axis=1, keepdims=True)
            norms = np.where(norms <= 0.0, 1.0, norms)
            out[mask] = dp / norms
        return out

    def point_at(self, s: float) -> np.ndarray:
        return self.point_many(np.array([s]))[0]

    def endpoint(self) -> np.ndarray:
        return self.waypoints[-1].copy()


@dataclass
class PathPlan:
    """A geometry paired with a speed plan over its arc length."""

    axes: tuple[int, ...]
    geometry: object
    speed_plan: ProfilePlan

    @property
    def total_arc_length(self) -> float:
        return self.geometry.length

    @property
    def duration(self) -> float:
        return self.speed_plan.total_duration

    def state_many(self, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Points and per-axis velocities at the given times."""
        s, sdot, _ = self.speed_plan.sample_many(ts)
        pts = self.geometry.point_many(s)
        vel = self.geometry.tangent_many(s) * sdot[:, None]
        return pts, vel

    def endpoint(self) -> np.ndarray:
        return self.geometry.endpoint()


def _check_dims(name: str, got: int, want: int) -> None:
    if got != want:
        raise DimensionMismatch(f"{name} needs {want} coordinates, got {got}")


def plan_path(start, segment: PathSegment) -> PathPlan:
    """Build a path plan beginning at ``start`` for one segment."""
    start = np.asarray(start, dtype=np.float64)
    n = len(segment.axes)
    _check_dims("start point", len(start), n)
    validate_spec(segment.limits)

    kind = segment.kind
    if kind is SegmentKind.LINEAR:
        if segment.target is None:
            raise DimensionMismatch("linear segment needs a target")
        _check_dims("target", len(segment.target), n)
        geom = LinearGeometry(start, np.asarray(segment.target))
    elif kind is SegmentKind.CIRCULAR:
        if n != 2:
            raise DimensionMismatch(f"circular paths need exactly 2 axes, got {n}")
        if segment.center is None or segment.sweep_deg is None:
            raise DimensionMismatch("circular segment needs center and sweep_deg")
        _check_dims("center", len(segment.center), 2)
        geom = ArcGeometry(start, np.asarray(segment.center), segment.sweep_deg)
    elif kind is SegmentKind.HELICAL:
        if n != 3:
            raise DimensionMismatch(f"helical paths need exactly 3 axes, got {n}")
        if segment.center is None or segment.sweep_deg is None or segment.z_target is None:
            raise DimensionMismatch("helical segment needs center, sweep_deg, z_target")
        _check_dims("center", len(segment.center), 2)
        geom = HelixGeometry(start, np.asarray(segment.center),
                             segment.sweep_deg, segment.z_target)
    elif kind is SegmentKind.SPLINE:
        if segment.waypoints is None:
            raise DegenerateGeometry("spline segment needs waypoints")
        wps = np.asarray(segment.waypoints, dtype=np.float64)
        if wps.ndim != 2 or wps.shape[1] != n:
            raise DimensionMismatch(
                f"spline waypoints need {n} coordinates each")
        geom = SplineGeometry(wps)
        scale = max(1.0, float(np.abs(wps).max()))
        if np.linalg.norm(start - wps[0]) > 1e-9 * scale:
            raise DegenerateGeometry("spline must start at the current position")
    else:  # pragma: no cover - enum is closed
        raise DimensionMismatch(f"unsupported segment kind {kind!r}")

    speed = plan_profile(0.0, geom.length, segment.limits)
    return PathPlan(axes=segment.axes, geometry=geom, speed_plan=speed)


def sample_path(plan: PathPlan, t: float) -> np.ndarray:
    """Point on the path at time ``t``; clamps to the endpoint when done."""
    pts, _ = plan.state_many(np.array([t], dtype=np.float64))
    return pts[0]


@dataclass
class LookaheadPlan:
    """Chained linear moves with nonzero junction speeds."""

    plans: list[PathPlan]
    junction_velocities: list[float]
    corner_tolerance: float

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.plans)


def junction_speed_limit(cos_theta: float, accel: float,
                         corner_tolerance: float, cruise: float) -> float:
    """Highest speed allowed through a corner of the given angle.

    Models the corner as a small blend arc whose centripetal acceleration is
    held to ``accel`` and whose deviation from the sharp corner stays within
    ``corner_tolerance``; that arc radius is ``tol * (1 + cos) / (1 - cos)``
    up to the blend geometry factor folded in here.
    """
    cos_theta = max(-1.0, min(1.0, cos_theta))
    if cos_theta >= 1.0 - 1e-12:
        return cruise
    if cos_theta <= -1.0 + 1e-12:
        return 0.0
    v = math.sqrt(accel * corner_tolerance * (1.0 + cos_theta) / (1.0 - cos_theta))
    return min(v, cruise)


def corner_blend_deviation(v_junction: float, cos_theta: float, accel: float) -> float:
    """Deviation of the implied blend arc from the sharp corner point."""
    cos_theta = max(-1.0, min(1.0, cos_theta))
    if cos_theta >= 1.0 - 1e-12 or v_junction <= 0.0:
        return 0.0
    radius = v_junction * v_junction / accel
    cos_half = math.sqrt((1.0 + cos_theta) / 2.0)
    return radius * (1.0 - cos_half) / cos_half


def plan_lookahead(start, segments: list[PathSegment], limits: ProfileSpec,
                   corner_tolerance: float = 0.01) -> LookaheadPlan:
    """Plan a polyline so speed is carried through corners.

    All segments must be linear and share one axis set.  Junction speeds are
    capped by the corner model, then trimmed by a backward and a forward
    reachability pass under the effective (ramp-adjusted) accelerations.
    """
    if not segments:
        raise ValueError("lookahead needs at least one segment")
    if not math.isfinite(corner_tolerance) or corner_tolerance <= 0.0:
        raise InvalidSpec(f"corner_tolerance must be positive, got {corner_tolerance!r}")
    validate_spec(limits)

    axes = segments[0].axes
    start = np.asarray(start, dtype=np.float64)
    _check_dims("start point", len(start), len(axes))

    points = [start]
    for seg in segments:
        if seg.kind is not SegmentKind.LINEAR:
            raise ValueError("lookahead blocks accept linear segments only")
        if seg.axes != axes:
            raise DimensionMismatch("lookahead segments must share one axis set")
        if seg.target is None or len(seg.target) != len(axes):
            raise DimensionMismatch("lookahead segment target has wrong dimension")
        points.append(np.asarray(seg.target, dtype=np.float64))

    n = len(segments)
    lengths = []
    dirs = []
    for a, b in zip(points[:-1], points[1:]):
        delta = b - a
        length = float(np.linalg.norm(delta))
        if length <= 0.0:
            raise DegenerateGeometry("lookahead segment has zero length")
        lengths.append(length)
        dirs.append(delta / length)

    r = limits.ramp_ratio()
    kappa = 1.0 - 0.5 * r
    a_eff = limits.acceleration * kappa
    d_eff = limits.resolved_deceleration() * kappa

    v = [0.0] * (n + 1)
    for i in range(1, n):
        cos_theta = float(np.dot(dirs[i - 1], dirs[i]))
        v[i] = junction_speed_limit(cos_theta, limits.acceleration,
                                    corner_tolerance, limits.velocity)
    for i in range(n - 1, -1, -1):  # backward: can we slow to the next junction?
        v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2.0 * d_eff * lengths[i]))
    for i in range(1, n + 1):  # forward: can we have sped up this much?
        v[i] = min(v[i], math.sqrt(v[i - 1] ** 2 + 2.0 * a_eff * lengths[i - 1]))

    plans = []
    for i, seg in enumerate(segments):
        geom = LinearGeometry(points[i], points[i + 1])
        speed = plan_profile(0.0, geom.length, limits,
                             entry_velocity=v[i], exit_velocity=v[i + 1])
        plans.append(PathPlan(axes=axes, geometry=geom, speed_plan=speed))
    return LookaheadPlan(plans=plans, junction_velocities=v,
                         corner_tolerance=corner_tolerance)
