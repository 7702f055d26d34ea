"""Single-axis kinematic profile planning.

A profile plan is a short schedule of constant-jerk segments.  Sampling a
plan at any time gives commanded position, velocity, and acceleration; the
engine consumes those samples directly, so the planner is the single source
of truth for axis kinematics.

All three user-facing profile shapes reduce to one planner parameterized by
a ramp ratio ``r``:

* ``r = 0``  pure trapezoid, acceleration steps instantly to the limit;
* ``r = 1``  full S-curve, acceleration is ramped by jerk the whole phase;
* ``0 < r < 1``  mixed: the fraction ``r`` of each acceleration phase is
  spent ramping (half at each end), the rest at the acceleration limit.

With peak acceleration ``a`` held fixed, a ramped phase covering a velocity
change ``dv`` lasts ``dv / (a * (1 - r/2))``, so the familiar trapezoid
distance bookkeeping still works if every acceleration limit is replaced by
the effective value ``a * (1 - r/2)``.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidSpec


class ProfileType(Enum):
    TRAPEZOIDAL = "Trapezoidal"
    SCURVE = "SCurve"
    JERK_RATIO = "JerkRatio"


@dataclass(frozen=True)
class ProfileSpec:
    """Kinematic limits for one move.

    ``deceleration`` of ``None`` means "same as acceleration".
    ``jerk_acc_ratio`` is only consulted for ``JERK_RATIO`` profiles; the
    other two types pin the ratio to 0 and 1 respectively.
    ``end_velocity`` is the speed the axis should carry through the target
    instead of stopping there.
    """

    velocity: float
    acceleration: float
    deceleration: float | None = None
    profile_type: ProfileType = ProfileType.TRAPEZOIDAL
    jerk_acc_ratio: float = 0.0
    end_velocity: float = 0.0

    def resolved_deceleration(self) -> float:
        return self.acceleration if self.deceleration is None else self.deceleration

    def ramp_ratio(self) -> float:
        if self.profile_type is ProfileType.TRAPEZOIDAL:
            return 0.0
        if self.profile_type is ProfileType.SCURVE:
            return 1.0
        return self.jerk_acc_ratio


def validate_spec(spec: ProfileSpec) -> None:
    """Raise :class:`InvalidSpec` unless every limit is usable."""
    if not math.isfinite(spec.velocity) or spec.velocity <= 0.0:
        raise InvalidSpec(f"velocity must be positive, got {spec.velocity!r}")
    if not math.isfinite(spec.acceleration) or spec.acceleration <= 0.0:
        raise InvalidSpec(f"acceleration must be positive, got {spec.acceleration!r}")
    dec = spec.resolved_deceleration()
    if not math.isfinite(dec) or dec <= 0.0:
        raise InvalidSpec(f"deceleration must be positive, got {dec!r}")
    r = spec.jerk_acc_ratio
    if not math.isfinite(r) or r < 0.0 or r > 1.0:
        raise InvalidSpec(f"jerk_acc_ratio must lie in [0, 1], got {r!r}")
    ev = spec.end_velocity
    if not math.isfinite(ev) or ev < 0.0:
        raise InvalidSpec(f"end_velocity must be non-negative, got {ev!r}")
    if ev > spec.velocity:
        raise InvalidSpec(
            f"end_velocity {ev!r} exceeds the velocity limit {spec.velocity!r}")


@dataclass(frozen=True)
class Segment:
    """One constant-jerk piece of a plan.

    Position over the segment is the cubic
    ``p(tau) = p0 + v0*tau + a0*tau**2/2 + j*tau**3/6``.
    """

    duration: float
    initial_velocity: float
    initial_acceleration: float
    jerk: float

    def delta_position(self) -> float:
        t = self.duration
        return t * (self.initial_velocity + t * (self.initial_acceleration / 2.0 + t * self.jerk / 6.0))

    def end_velocity(self) -> float:
        t = self.duration
        return self.initial_velocity + t * (self.initial_acceleration + t * self.jerk / 2.0)

    def end_acceleration(self) -> float:
        return self.initial_acceleration + self.duration * self.jerk


class ProfilePlan:
    """Executable schedule for one axis.

    Sampling past ``total_duration`` clamps to the target position with the
    planned end velocity and zero acceleration, so callers can sample on any
    grid without bounds checks.
    """

    __slots__ = (
        "start_pos", "target_pos", "segments", "total_duration", "end_velocity",
        "_t0", "_p0", "_v0", "_a0", "_jk",
    )

    def __init__(self, start_pos: float, target_pos: float,
                 segments: tuple[Segment, ...], end_velocity: float = 0.0):
        self.start_pos = float(start_pos)
        self.target_pos = float(target_pos)
        self.segments = tuple(segments)
        self.end_velocity = float(end_velocity)
        t0 = []
        p0 = []
        t = 0.0
        p = self.start_pos
        for seg in self.segments:
            t0.append(t)
            p0.append(p)
            t += seg.duration
            p += seg.delta_position()
        self.total_duration = t
        self._t0 = t0
        self._p0 = p0
        self._v0 = [s.initial_velocity for s in self.segments]
        self._a0 = [s.initial_acceleration for s in self.segments]
        self._jk = [s.jerk for s in self.segments]

    def integrated_endpoint(self) -> float:
        """Endpoint reached by summing segment displacements (no clamping)."""
        p = self.start_pos
        for seg in self.segments:
            p += seg.delta_position()
        return p

    def sample(self, t: float) -> tuple[float, float, float]:
        """Return ``(position, velocity, acceleration)`` at time ``t``."""
        if t >= self.total_duration or not self.segments:
            return self.target_pos, self.end_velocity, 0.0
        if t < 0.0:
            t = 0.0
        i = bisect_right(self._t0, t) - 1
        if i < 0:
            i = 0
        tau = t - self._t0[i]
        v0 = self._v0[i]
        a0 = self._a0[i]
        j = self._jk[i]
        pos = self._p0[i] + tau * (v0 + tau * (a0 / 2.0 + tau * j / 6.0))
        vel = v0 + tau * (a0 + tau * j / 2.0)
        acc = a0 + tau * j
        return pos, vel, acc

    def sample_many(self, ts: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vectorized :meth:`sample` over a time array."""
        ts = np.asarray(ts, dtype=np.float64)
        if not self.segments:
            shape = ts.shape
            return (np.full(shape, self.target_pos),
                    np.full(shape, self.end_velocity),
                    np.zeros(shape))
        t0 = np.asarray(self._t0)
        idx = np.searchsorted(t0, ts, side="right") - 1
        np.clip(idx, 0, len(self.segments) - 1, out=idx)
        tau = ts - t0[idx]
        v0 = np.asarray(self._v0)[idx]
        a0 = np.asarray(self._a0)[idx]
        j = np.asarray(self._jk)[idx]
        pos = np.asarray(self._p0)[idx] + tau * (v0 + tau * (a0 / 2.0 + tau * j / 6.0))
        vel = v0 + tau * (a0 + tau * j / 2.0)
        acc = a0 + tau * j
        done = ts >= self.total_duration
        if done.any():
            pos = np.where(done, self.target_pos, pos)
            vel = np.where(done, self.end_velocity, vel)
            acc = np.where(done, 0.0, acc)
        return pos, vel, acc


def _ramp_up(v_from: float, v_to: float, accel: float, r: float) -> list[Segment]:
    """Segments lifting speed from ``v_from`` to ``v_to`` at +``accel`` peak."""
    dv = v_to - v_from
    if dv <= 0.0:
        return []
    if r <= 0.0:
        return [Segment(dv / accel, v_from, accel, 0.0)]
    total = dv / (accel * (1.0 - 0.5 * r))
    tj = 0.5 * r * total
    tk = (1.0 - r) * total
    j = accel / tj
    segs = [Segment(tj, v_from, 0.0, j)]
    v = v_from + 0.5 * j * tj * tj
    if tk > 0.0:
        segs.append(Segment(tk, v, accel, 0.0))
        v += accel * tk
    segs.append(Segment(tj, v, accel, -j))
    return segs


def _ramp_down(v_from: float, v_to: float, decel: float, r: float) -> list[Segment]:
    """Segments dropping speed from ``v_from`` to ``v_to`` at -``decel`` peak."""
    dv = v_from - v_to
    if dv <= 0.0:
        return []
    if r <= 0.0:
        return [Segment(dv / decel, v_from, -decel, 0.0)]
    total = dv / (decel * (1.0 - 0.5 * r))
    tj = 0.5 * r * total
    tk = (1.0 - r) * total
    j = decel / tj
    segs = [Segment(tj, v_from, 0.0, -j)]
    v = v_from - 0.5 * j * tj * tj
    if tk > 0.0:
        segs.append(Segment(tk, v, -decel, 0.0))
        v -= decel * tk
    segs.append(Segment(tj, v, -decel, j))
    return segs


def plan_profile(start: float, target: float, spec: ProfileSpec, *,
                 entry_velocity: float = 0.0,
                 exit_velocity: float | None = None) -> ProfilePlan:
    """Plan a move from ``start`` to ``target`` under ``spec``.

    ``entry_velocity`` and ``exit_velocity`` are speeds along the direction
    of travel, used when chaining moves through junctions; the default is a
    rest-to-rest move honoring ``spec.end_velocity``.  An exit velocity that
    cannot be reached within the distance is clamped to the highest speed
    actually attainable.
    """
    validate_spec(spec)
    if exit_velocity is None:
        exit_velocity = spec.end_velocity

    delta = target - start
    dist = abs(delta)
    if dist == 0.0:
        return ProfilePlan(start, target, (), end_velocity=0.0)
    sign = 1.0 if delta > 0.0 else -1.0

    r = spec.ramp_ratio()
    accel = spec.acceleration
    decel = spec.resolved_deceleration()
    kappa = 1.0 - 0.5 * r
    a_eff = accel * kappa
    d_eff = decel * kappa

    v_lim = spec.velocity
    vs = min(abs(entry_velocity), v_lim)
    ve = min(abs(exit_velocity), v_lim)
    # Clamp the exit speed to what the distance allows in either direction.
    ve = min(ve, math.sqrt(vs * vs + 2.0 * a_eff * dist))
    ve = max(ve, math.sqrt(max(vs * vs - 2.0 * d_eff * dist, 0.0)))

    d_up = (v_lim * v_lim - vs * vs) / (2.0 * a_eff)
    d_down = (v_lim * v_lim - ve * ve) / (2.0 * d_eff)
    if d_up + d_down <= dist:
        vp = v_lim
    else:
        vp = math.sqrt((2.0 * a_eff * d_eff * dist + d_eff * vs * vs + a_eff * ve * ve)
                       / (a_eff + d_eff))
        vp = min(max(vp, vs, ve), v_lim)

    segs = _ramp_up(vs, vp, accel, r)
    d_cruise = dist - (vp * vp - vs * vs) / (2.0 * a_eff) - (vp * vp - ve * ve) / (2.0 * d_eff)
    if d_cruise > 1e-12 * max(dist, 1.0) and vp > 0.0:
        segs.append(Segment(d_cruise / vp, vp, 0.0, 0.0))
    segs.extend(_ramp_down(vp, ve, decel, r))

    if sign < 0.0:
        segs = [Segment(s.duration, -s.initial_velocity, -s.initial_acceleration, -s.jerk)
                for s in segs]
    return ProfilePlan(start, target, tuple(segs), end_velocity=sign * ve)


def profile_duration(plan: ProfilePlan) -> float:
    """Total time the plan takes; equals the sum of segment durations."""
    return plan.total_duration
