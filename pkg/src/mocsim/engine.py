"""Deterministic soft-motion engine.

The engine advances in fixed 1 ms ticks and logs commanded state: an ideal
servo, so position and velocity come straight from the planners.  Each tick
runs four steps in a fixed order:

1. apply actions queued by events that latched on the previous tick,
2. advance active motions by one sample,
3. evaluate armed event conditions (each latches at most once),
4. append a log row if logging is on.

Because planners are deterministic and sampling happens on a fixed grid,
identical programs produce byte-identical logs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from .errors import (
    AlreadyLogging,
    AxisBusy,
    DuplicateEvent,
    EventAlreadyLatched,
    InvalidConfig,
    IoFailure,
    NotLogging,
    TimeoutExceeded,
    UnknownAxis,
    UnknownBit,
    UnknownChannel,
    UnknownEvent,
    WrongPhase,
)
from .interp import LookaheadPlan, PathPlan, PathSegment, plan_lookahead, plan_path
from .profiles import ProfilePlan, ProfileSpec, plan_profile

SAMPLE_PERIOD_MS = 1
MAX_AXES = 128
MAX_IO_BITS = 256
MAX_CHANNELS = 256
DEFAULT_WAIT_TICKS = 10_000_000


class Phase(Enum):
    CREATED = "Created"
    COMMUNICATING = "Communicating"
    CLOSED = "Closed"


@dataclass(frozen=True)
class DeviceConfig:
    axes: tuple[int, ...]
    input_bits: int = 16
    output_bits: int = 16


def validate_config(config: DeviceConfig) -> None:
    axes = tuple(config.axes)
    if not axes:
        raise InvalidConfig("a device needs at least one axis")
    if len(axes) > MAX_AXES:
        raise InvalidConfig(f"at most {MAX_AXES} axes are supported, got {len(axes)}")
    if len(set(axes)) != len(axes):
        raise InvalidConfig("axis ids must be unique")
    for a in axes:
        if not isinstance(a, int) or a < 0:
            raise InvalidConfig(f"axis ids must be non-negative integers, got {a!r}")
    for label, n in (("input", config.input_bits), ("output", config.output_bits)):
        if not isinstance(n, int) or n < 0 or n > MAX_IO_BITS:
            raise InvalidConfig(
                f"{label} bit count must lie in [0, {MAX_IO_BITS}], got {n!r}")


# --- events -----------------------------------------------------------------

@dataclass(frozen=True)
class DistanceToTarget:
    """True while the axis is within ``value`` of its current target."""

    axis: int
    value: float


@dataclass(frozen=True)
class PositionReached:
    """True when the axis crosses (or rests on) the given position."""

    axis: int
    value: float


@dataclass(frozen=True)
class InputEdge:
    """True while the input bit holds the given level."""

    bit: int
    level: int


Condition = Union[DistanceToTarget, PositionReached, InputEdge]


@dataclass(frozen=True)
class StartPosAction:
    axis: int
    target: float
    spec: ProfileSpec
    channel: int = 0


@dataclass(frozen=True)
class SetOutputAction:
    bit: int
    level: int


EventAction = Union[StartPosAction, SetOutputAction]


@dataclass
class EventBinding:
    """An armed event.  ``latched`` flips once, the first tick the condition
    holds; the attached action (if any) runs at the start of the next tick."""

    id: int
    condition: Condition
    action: EventAction | None = None
    latched: bool = False


@dataclass(frozen=True)
class CommandHandle:
    id: int
    channel: int
    axes: tuple[int, ...]


# --- logging ----------------------------------------------------------------

@dataclass
class TrajectoryLog:
    """Sampled rows, one per tick, with a fixed column layout.

    Columns are ``t_ms`` then ``ax<k>_pos, ax<k>_vel`` per logged axis, then
    ``in<j>`` and ``out<j>`` per logged bit.  CSV serialization formats
    positions and velocities with 6 decimal places and everything else as
    integers, which makes logs byte-reproducible.
    """

    columns: list[str]
    rows: list[list[float]]
    sample_period_ms: int = SAMPLE_PERIOD_MS

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def is_empty(self) -> bool:
        return not self.rows

    def column_index(self, name: str) -> int:
        try:
            return self.columns.index(name)
        except ValueError:
            raise KeyError(f"log has no column {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        i = self.column_index(name)
        return np.asarray([row[i] for row in self.rows], dtype=np.float64)

    def axis_ids(self) -> list[int]:
        return [int(c[2:-4]) for c in self.columns if c.startswith("ax") and c.endswith("_pos")]

    def input_bit_ids(self) -> list[int]:
        return [int(c[2:]) for c in self.columns if c.startswith("in")]

    def output_bit_ids(self) -> list[int]:
        return [int(c[3:]) for c in self.columns if c.startswith("out")]

    def positions_matrix(self, axis_ids: list[int] | None = None) -> np.ndarray:
        ids = self.axis_ids() if axis_ids is None else axis_ids
        cols = [self.column_index(f"ax{k}_pos") for k in ids]
        return np.asarray([[row[c] for c in cols] for row in self.rows], dtype=np.float64)

    def final_positions(self) -> dict[int, float]:
        if not self.rows:
            return {}
        last = self.rows[-1]
        return {k: float(last[self.column_index(f"ax{k}_pos")]) for k in self.axis_ids()}

    def to_csv(self) -> str:
        float_col = [c.endswith("_pos") or c.endswith("_vel") for c in self.columns]
        lines = [",".join(self.columns)]
        for row in self.rows:
            parts = []
            for v, is_f in zip(row, float_col):
                parts.append(f"{v:.6f}" if is_f else str(int(v)))
            lines.append(",".join(parts))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        try:
            Path(path).write_text(self.to_csv(), encoding="utf-8")
        except OSError as e:
            raise IoFailure(f"cannot write log to {path}: {e}") from e

    @classmethod
    def from_csv_text(cls, text: str) -> "TrajectoryLog":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            return cls(columns=["t_ms"], rows=[])
        columns = lines[0].split(",")
        float_col = [c.endswith("_pos") or c.endswith("_vel") for c in columns]
        rows = []
        for ln in lines[1:]:
            cells = ln.split(",")
            rows.append([float(v) if is_f else int(v)
                         for v, is_f in zip(cells, float_col)])
        return cls(columns=columns, rows=rows)

    @classmethod
    def read_csv(cls, path) -> "TrajectoryLog":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise IoFailure(f"cannot read log from {path}: {e}") from e
        return cls.from_csv_text(text)


@dataclass
class EngineState:
    time_ms: int
    phase: Phase
    positions: dict[int, float]
    velocities: dict[int, float]
    busy_axes: tuple[int, ...]
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]
    active_channels: dict[int, tuple[int, ...]]
    events_latched: dict[int, bool]


@dataclass
class Outcome:
    success: bool
    code: str | None = None
    message: str | None = None
    location: tuple[int, int] | None = None


@dataclass
class RunResult:
    outcome: Outcome
    log: TrajectoryLog | None
    final_state: EngineState
    warnings: list[str]


class _AxisState:
    __slots__ = ("axis_id", "position", "velocity", "prev_position",
                 "last_target", "motion")

    def __init__(self, axis_id: int):
        self.axis_id = axis_id
        self.position = 0.0
        self.velocity = 0.0
        self.prev_position = 0.0
        self.last_target: float | None = None
        self.motion: "_ActiveMotion | None" = None


class _ActiveMotion:
    __slots__ = ("handle", "start_ms", "n_ticks", "tracks", "final_tracks")

    def __init__(self, handle: CommandHandle, start_ms: int, n_ticks: int,
                 tracks, final_tracks):
        self.handle = handle
        self.start_ms = start_ms
        self.n_ticks = n_ticks
        # tracks: list of (axis_state, pos_samples, vel_samples)
        self.tracks = tracks
        # final_tracks: list of (axis_state, final_pos, final_vel)
        self.final_tracks = final_tracks


def _tick_count(duration_s: float) -> int:
    """Ticks a motion occupies: every started millisecond counts, but exact
    multiples do not spill into an extra tick."""
    return max(0, math.ceil(duration_s * 1000.0 - 1e-6))


class _LogState:
    __slots__ = ("columns", "rows", "axis_states", "in_ids", "out_ids")

    def __init__(self, columns, axis_states, in_ids, out_ids):
        self.columns = columns
        self.rows: list[list[float]] = []
        self.axis_states = axis_states
        self.in_ids = in_ids
        self.out_ids = out_ids


class Engine:
    """One simulated device.  See the module docstring for tick semantics."""

    def __init__(self, config: DeviceConfig):
        validate_config(config)
        self.config = config
        self._phase = Phase.CREATED
        self._time_ms = 0
        self._axes: dict[int, _AxisState] = {a: _AxisState(a) for a in config.axes}
        self._axis_list = list(self._axes.values())
        self._inputs = [0] * config.input_bits
        self._outputs = [0] * config.output_bits
        self._events: dict[int, EventBinding] = {}
        self._armed: list[EventBinding] = []
        self._motions: dict[int, _ActiveMotion] = {}
        self._pending: list[tuple[int, EventAction]] = []
        self._log: _LogState | None = None
        self._last_log: TrajectoryLog | None = None
        self._next_handle = 1
        self._closed_result: RunResult | None = None

    # -- lifecycle -------------------------------------------------------

    @property
    def phase(self) -> Phase:
        return self._phase

    @property
    def time_ms(self) -> int:
        return self._time_ms

    def start_communication(self) -> None:
        if self._phase is not Phase.CREATED:
            raise WrongPhase(f"cannot start communication in phase {self._phase.value}")
        self._phase = Phase.COMMUNICATING

    def close_device(self) -> RunResult:
        if self._phase is Phase.CLOSED and self._closed_result is not None:
            return self._closed_result
        warnings = [f"axis {st.axis_id} still moving at close"
                    for st in self._axis_list if st.motion is not None]
        if self._log is not None:
            self._last_log = self.stop_log()
        for st in self._axis_list:
            st.motion = None
        self._motions.clear()
        self._pending.clear()
        self._phase = Phase.CLOSED
        result = RunResult(outcome=Outcome(success=True), log=self._last_log,
                           final_state=self.snapshot(), warnings=warnings)
        self._closed_result = result
        return result

    def _require_communicating(self) -> None:
        if self._phase is not Phase.COMMUNICATING:
            raise WrongPhase(
                f"device must be communicating, phase is {self._phase.value}")

    # -- lookups ---------------------------------------------------------

    def _axis(self, axis: int) -> _AxisState:
        st = self._axes.get(axis)
        if st is None:
            valid = ", ".join(str(a) for a in self.config.axes)
            raise UnknownAxis(f"axis {axis} is not configured; valid axes: {valid}")
        return st

    def _check_channel(self, channel: int) -> None:
        if not isinstance(channel, int) or channel < 0 or channel >= MAX_CHANNELS:
            raise UnknownChannel(
                f"channel must lie in [0, {MAX_CHANNELS}), got {channel!r}")

    def _check_out_bit(self, bit: int) -> None:
        if not isinstance(bit, int) or bit < 0 or bit >= len(self._outputs):
            raise UnknownBit(
                f"output bit {bit!r} out of range, device has {len(self._outputs)}")

    def _check_in_bit(self, bit: int) -> None:
        if not isinstance(bit, int) or bit < 0 or bit >= len(self._inputs):
            raise UnknownBit(
                f"input bit {bit!r} out of range, device has {len(self._inputs)}")

    def axis_position(self, axis: int) -> float:
        return self._axis(axis).position

    def axis_busy(self, axis: int) -> bool:
        return self._axis(axis).motion is not None

    # -- motion ----------------------------------------------------------

    def _install_motion(self, handle: CommandHandle, n_ticks: int,
                        tracks, final_tracks) -> None:
        motion = _ActiveMotion(handle, self._time_ms, n_ticks, tracks, final_tracks)
        for st, _, _ in tracks:
            st.motion = motion
        self._motions[handle.id] = motion

    def _claim_axes(self, axis_ids) -> list[_AxisState]:
        states = []
        for a in axis_ids:
            st = self._axis(a)
            if st.motion is not None:
                raise AxisBusy(f"axis {a} is already executing a command")
            states.append(st)
        return states

    def _new_handle(self, channel: int, axes) -> CommandHandle:
        handle = CommandHandle(self._next_handle, channel, tuple(axes))
        self._next_handle += 1
        return handle

    def start_pos(self, axis: int, target: float, spec: ProfileSpec,
                  channel: int = 0) -> CommandHandle:
        """Begin a point-to-point move; motion starts on the next tick."""
        self._require_communicating()
        self._check_channel(channel)
        (st,) = self._claim_axes([axis])
        plan = plan_profile(st.position, target, spec)
        n = _tick_count(plan.total_duration)
        if n > 0:
            ts = np.arange(1, n + 1, dtype=np.float64) * 1e-3
            pos, vel, _ = plan.sample_many(ts)
            tracks = [(st, pos.tolist(), vel.tolist())]
        else:
            tracks = [(st, [], [])]
        final_tracks = [(st, plan.target_pos, plan.end_velocity)]
        handle = self._new_handle(channel, [axis])
        self._install_motion(handle, n, tracks, final_tracks)
        st.last_target = plan.target_pos
        return handle

    def _install_path_chain(self, plans: list[PathPlan], axes: tuple[int, ...],
                            channel: int) -> CommandHandle:
        states = self._claim_axes(axes)
        total = sum(p.duration for p in plans)
        n = _tick_count(total)
        d = len(axes)
        if n > 0:
            ts = np.arange(1, n + 1, dtype=np.float64) * 1e-3
            pts = np.empty((n, d))
            vels = np.empty((n, d))
            offset = 0.0
            bounds = []
            for plan in plans:
                bounds.append(offset)
                offset += plan.duration
            idx = np.searchsorted(np.asarray(bounds), ts, side="right") - 1
            np.clip(idx, 0, len(plans) - 1, out=idx)
            for i, plan in enumerate(plans):
                mask = idx == i
                if not mask.any():
                    continue
                local = ts[mask] - bounds[i]
                p, v = plan.state_many(local)
                pts[mask] = p
                vels[mask] = v
            tracks = [(st, pts[:, k].tolist(), vels[:, k].tolist())
                      for k, st in enumerate(states)]
        else:
            tracks = [(st, [], []) for st in states]
        end = plans[-1].endpoint()
        end_speed = plans[-1].speed_plan.end_velocity
        if end_speed != 0.0:
            tangent = plans[-1].geometry.tangent_many(
                np.array([plans[-1].total_arc_length]))[0]
            end_vel = tangent * end_speed
        else:
            end_vel = np.zeros(d)
        final_tracks = [(st, float(end[k]), float(end_vel[k]))
                        for k, st in enumerate(states)]
        handle = self._new_handle(channel, axes)
        self._install_motion(handle, n, tracks, final_tracks)
        for k, st in enumerate(states):
            st.last_target = float(end[k])
        return handle

    def start_path(self, segment: PathSegment, channel: int = 0) -> CommandHandle:
        """Begin an interpolated move along one path segment."""
        self._require_communicating()
        self._check_channel(channel)
        states = [self._axis(a) for a in segment.axes]
        for st in states:
            if st.motion is not None:
                raise AxisBusy(f"axis {st.axis_id} is already executing a command")
        start = np.asarray([st.position for st in states])
        plan = plan_path(start, segment)
        return self._install_path_chain([plan], segment.axes, channel)

    def start_lookahead(self, segments: list[PathSegment], limits: ProfileSpec,
                        corner_tolerance: float = 0.01,
                        channel: int = 0) -> CommandHandle:
        """Begin a blended polyline built from linear segments."""
        self._require_communicating()
        self._check_channel(channel)
        if not segments:
            raise ValueError("lookahead needs at least one segment")
        axes = segments[0].axes
        states = [self._axis(a) for a in axes]
        for st in states:
            if st.motion is not None:
                raise AxisBusy(f"axis {st.axis_id} is already executing a command")
        start = np.asarray([st.position for st in states])
        plan = plan_lookahead(start, segments, limits, corner_tolerance)
        return self._install_path_chain(plan.plans, axes, channel)

    # -- events ----------------------------------------------------------

    def _validate_condition(self, condition: Condition) -> None:
        if isinstance(condition, (DistanceToTarget, PositionReached)):
            self._axis(condition.axis)
        elif isinstance(condition, InputEdge):
            self._check_in_bit(condition.bit)
            if condition.level not in (0, 1):
                raise UnknownBit(f"input level must be 0 or 1, got {condition.level!r}")
        else:
            raise UnknownEvent(f"unsupported condition {condition!r}")

    def _validate_action(self, action: EventAction) -> None:
        if isinstance(action, StartPosAction):
            self._axis(action.axis)
            self._check_channel(action.channel)
        elif isinstance(action, SetOutputAction):
            self._check_out_bit(action.bit)
            if action.level not in (0, 1):
                raise UnknownBit(f"output level must be 0 or 1, got {action.level!r}")
        else:
            raise UnknownEvent(f"unsupported action {action!r}")

    def set_event_input(self, binding: EventBinding) -> int:
        """Arm an event; returns its id.  Conditions are level-checked each
        tick, so a condition already true at arm time fires on the next one."""
        self._require_communicating()
        if binding.id in self._events:
            raise DuplicateEvent(f"event id {binding.id} is already armed")
        self._validate_condition(binding.condition)
        if binding.action is not None:
            self._validate_action(binding.action)
        self._events[binding.id] = binding
        if not binding.latched:
            self._armed.append(binding)
            self._armed.sort(key=lambda b: b.id)
        return binding.id

    def attach_event_action(self, event_id: int, action: EventAction) -> None:
        self._require_communicating()
        binding = self._events.get(event_id)
        if binding is None:
            raise UnknownEvent(f"event id {event_id} is not armed")
        if binding.latched:
            raise EventAlreadyLatched(f"event id {event_id} has already fired")
        self._validate_action(action)
        binding.action = action

    def _condition_true(self, condition: Condition) -> bool:
        if isinstance(condition, DistanceToTarget):
            st = self._axes[condition.axis]
            if st.last_target is None:
                return False
            return abs(st.last_target - st.position) <= condition.value
        if isinstance(condition, PositionReached):
            st = self._axes[condition.axis]
            v = condition.value
            return (st.prev_position - v) * (st.position - v) <= 0.0
        return self._inputs[condition.bit] == condition.level

    def _apply_action(self, action: EventAction) -> None:
        if isinstance(action, StartPosAction):
            self.start_pos(action.axis, action.target, action.spec, action.channel)
        else:
            self.set_output_bit(action.bit, action.level)

    # -- I/O ---------------------------------------------------------------

    def set_output_bit(self, bit: int, level: int) -> None:
        self._require_communicating()
        self._check_out_bit(bit)
        if level not in (0, 1):
            raise UnknownBit(f"output level must be 0 or 1, got {level!r}")
        self._outputs[bit] = level

    def set_input_bit(self, bit: int, level: int) -> None:
        """External stimulus, used by tests and the SetIn statement."""
        self._require_communicating()
        self._check_in_bit(bit)
        if level not in (0, 1):
            raise UnknownBit(f"input level must be 0 or 1, got {level!r}")
        self._inputs[bit] = level

    def read_input(self, bit: int) -> int:
        self._check_in_bit(bit)
        return self._inputs[bit]

    def read_output(self, bit: int) -> int:
        self._check_out_bit(bit)
        return self._outputs[bit]

    # -- logging -----------------------------------------------------------

    def start_log(self, axes=None, input_bits=None, output_bits=None) -> None:
        """Begin logging; the first row lands on the next tick."""
        self._require_communicating()
        if self._log is not None:
            raise AlreadyLogging("a log is already being recorded")
        axes = list(self.config.axes) if axes is None else list(axes)
        in_ids = list(range(len(self._inputs))) if input_bits is None else list(input_bits)
        out_ids = list(range(len(self._outputs))) if output_bits is None else list(output_bits)
        axis_states = [self._axis(a) for a in axes]
        for b in in_ids:
            self._check_in_bit(b)
        for b in out_ids:
            self._check_out_bit(b)
        columns = ["t_ms"]
        for a in axes:
            columns.append(f"ax{a}_pos")
            columns.append(f"ax{a}_vel")
        columns.extend(f"in{b}" for b in in_ids)
        columns.extend(f"out{b}" for b in out_ids)
        self._log = _LogState(columns, axis_states, in_ids, out_ids)

    def stop_log(self) -> TrajectoryLog:
        if self._log is None:
            raise NotLogging("no log is being recorded")
        log = TrajectoryLog(columns=self._log.columns, rows=self._log.rows)
        self._log = None
        self._last_log = log
        return log

    # -- time --------------------------------------------------------------

    def tick(self) -> None:
        """Advance simulated time by one millisecond."""
        if self._phase is not Phase.COMMUNICATING:
            raise WrongPhase(f"cannot tick in phase {self._phase.value}")
        self._time_ms = t = self._time_ms + 1

        if self._pending:
            pending = self._pending
            self._pending = []
            for _eid, action in pending:
                self._apply_action(action)

        if self._motions:
            finished = None
            for motion in self._motions.values():
                i = t - motion.start_ms - 1
                if i + 1 < motion.n_ticks:
                    for st, pos, vel in motion.tracks:
                        st.position = pos[i]
                        st.velocity = vel[i]
                else:
                    # Last tick of the plan: land exactly on the endpoint so the
                    # axis is idle the same tick its final row is logged.
                    for st, fp, fv in motion.final_tracks:
                        st.position = fp
                        st.velocity = fv
                        st.motion = None
                    if finished is None:
                        finished = []
                    finished.append(motion.handle.id)
            if finished:
                for hid in finished:
                    del self._motions[hid]

        if self._armed:
            latched_any = False
            for binding in self._armed:
                if self._condition_true(binding.condition):
                    binding.latched = True
                    latched_any = True
                    if binding.action is not None:
                        self._pending.append((binding.id, binding.action))
            if latched_any:
                self._armed = [b for b in self._armed if not b.latched]

        log = self._log
        if log is not None:
            row = [float(t)]
            for st in log.axis_states:
                row.append(st.position)
                row.append(st.velocity)
            ins = self._inputs
            outs = self._outputs
            row.extend(ins[b] for b in log.in_ids)
            row.extend(outs[b] for b in log.out_ids)
            log.rows.append(row)

        for st in self._axis_list:
            st.prev_position = st.position

    def wait(self, axis: int, max_ticks: int = DEFAULT_WAIT_TICKS) -> int:
        """Tick until the axis is idle; returns ticks consumed."""
        st = self._axis(axis)
        ticks = 0
        while st.motion is not None:
            if ticks >= max_ticks:
                raise TimeoutExceeded(
                    f"axis {axis} still moving after {max_ticks} ticks")
            self.tick()
            ticks += 1
        return ticks

    def wait_event(self, event_id: int, max_ticks: int = DEFAULT_WAIT_TICKS) -> int:
        """Tick until the event latches; returns ticks consumed."""
        binding = self._events.get(event_id)
        if binding is None:
            raise UnknownEvent(f"event id {event_id} is not armed")
        ticks = 0
        while not binding.latched:
            if ticks >= max_ticks:
                raise TimeoutExceeded(
                    f"event {event_id} not latched after {max_ticks} ticks")
            self.tick()
            ticks += 1
        return ticks

    def sleep_ticks(self, n: int) -> None:
        for _ in range(n):
            self.tick()

    # -- introspection -------------------------------------------------------

    def snapshot(self) -> EngineState:
        channels: dict[int, list[int]] = {}
        for motion in self._motions.values():
            channels.setdefault(motion.handle.channel, []).append(motion.handle.id)
        return EngineState(
            time_ms=self._time_ms,
            phase=self._phase,
            positions={a: st.position for a, st in self._axes.items()},
            velocities={a: st.velocity for a, st in self._axes.items()},
            busy_axes=tuple(a for a, st in self._axes.items() if st.motion is not None),
            inputs=tuple(self._inputs),
            outputs=tuple(self._outputs),
            active_channels={c: tuple(h) for c, h in sorted(channels.items())},
            events_latched={eid: b.latched for eid, b in sorted(self._events.items())},
        )


def create_device(config: DeviceConfig) -> Engine:
    """Validate the config and hand back an engine in the Created phase."""
    return Engine(config)
