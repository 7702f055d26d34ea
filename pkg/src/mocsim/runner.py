"""Statement dispatch: execute a parsed program against an engine.

The runner assumes programs have been through ``validate``; anything that
still goes wrong at dispatch (an unknown command, a value the engine
rejects) is converted into an error outcome carrying the statement's source
location rather than an exception, so callers always get a ``RunResult``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .engine import (
    DEFAULT_WAIT_TICKS,
    DeviceConfig,
    DistanceToTarget,
    Engine,
    EventBinding,
    InputEdge,
    Outcome,
    Phase,
    PositionReached,
    RunResult,
    SetOutputAction,
    StartPosAction,
    create_device,
)
from .errors import BadArgument, MocsimError, UnknownCommand
from .interp import PathSegment
from .mcscript import Diagnostic, ParseResult, Program, Statement, parse, preprocess, validate
from .profiles import ProfileSpec, ProfileType


def _need(stmt: Statement, key: str):
    value = stmt.get(key)
    if value is None:
        raise BadArgument(f"{stmt.name} is missing required argument '{key}'")
    return value


def _as_int(stmt: Statement, key: str, default=None):
    value = stmt.get(key, default)
    if value is default and not stmt.has(key):
        return default
    if not isinstance(value, int) or isinstance(value, bool):
        raise BadArgument(f"argument '{key}' expects an integer, got {value!r}")
    return value


def _as_float(stmt: Statement, key: str, default=None):
    value = stmt.get(key)
    if value is None:
        return default
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise BadArgument(f"argument '{key}' expects a number, got {value!r}")
    return float(value)


def _profile_spec(stmt: Statement) -> ProfileSpec:
    name = stmt.get("profile", "Trapezoidal")
    try:
        ptype = ProfileType(name)
    except ValueError:
        raise BadArgument(f"unknown profile {name!r}") from None
    return ProfileSpec(
        velocity=_as_float(stmt, "vel"),
        acceleration=_as_float(stmt, "acc"),
        deceleration=_as_float(stmt, "dec"),
        profile_type=ptype,
        jerk_acc_ratio=_as_float(stmt, "jerk_ratio", 0.0),
        end_velocity=_as_float(stmt, "end_vel", 0.0),
    )


def _axes_tuple(stmt: Statement) -> tuple[int, ...]:
    axes = _need(stmt, "axes")
    if not isinstance(axes, list):
        raise BadArgument(f"argument 'axes' expects a list, got {axes!r}")
    return tuple(axes)


class _Dispatcher:
    def __init__(self, max_wait_ticks: int):
        self.engine: Engine | None = None
        self.max_wait_ticks = max_wait_ticks
        self._block: dict | None = None

    def _live(self) -> Engine:
        if self.engine is None:
            raise BadArgument("no device has been created yet")
        return self.engine

    def run(self, stmt: Statement) -> None:
        if self._block is not None and stmt.name not in ("Segment", "EndLookahead"):
            raise BadArgument(
                f"only Segment may appear inside a lookahead block, got {stmt.name}")
        handler = getattr(self, f"_cmd_{stmt.name}", None)
        if handler is None:
            raise UnknownCommand(f"unknown command '{stmt.name}'")
        handler(stmt)

    # lifecycle

    def _cmd_CreateDevice(self, stmt):
        if self.engine is not None:
            raise BadArgument("device already created")
        axes = _axes_tuple(stmt)
        config = DeviceConfig(axes=axes,
                              input_bits=_as_int(stmt, "inputs", 16),
                              output_bits=_as_int(stmt, "outputs", 16))
        self.engine = create_device(config)

    def _cmd_StartCommunication(self, stmt):
        self._live().start_communication()

    def _cmd_CloseDevice(self, stmt):
        self._live().close_device()

    def _cmd_StartLog(self, stmt):
        # Omitted selections mean "log everything the device has".
        axes = _axes_tuple(stmt) if stmt.has("axes") else None
        self._live().start_log(axes=axes,
                               input_bits=stmt.get("ins"),
                               output_bits=stmt.get("outs"))

    def _cmd_StopLog(self, stmt):
        self._live().stop_log()

    # motion

    def _cmd_StartPos(self, stmt):
        self._live().start_pos(_as_int(stmt, "axis"), _as_float(stmt, "target"),
                               _profile_spec(stmt), channel=_as_int(stmt, "channel", 0))

    def _cmd_StartLinear(self, stmt):
        seg = PathSegment.linear(_axes_tuple(stmt), _need(stmt, "target"),
                                 _profile_spec(stmt))
        self._live().start_path(seg, channel=_as_int(stmt, "channel", 0))

    def _cmd_StartCircular(self, stmt):
        seg = PathSegment.circular(_axes_tuple(stmt), _need(stmt, "center"),
                                   _as_float(stmt, "sweep_deg"), _profile_spec(stmt))
        self._live().start_path(seg, channel=_as_int(stmt, "channel", 0))

    def _cmd_StartHelical(self, stmt):
        seg = PathSegment.helical(_axes_tuple(stmt), _need(stmt, "center"),
                                  _as_float(stmt, "sweep_deg"),
                                  _as_float(stmt, "z_target"), _profile_spec(stmt))
        self._live().start_path(seg, channel=_as_int(stmt, "channel", 0))

    def _cmd_StartSpline(self, stmt):
        seg = PathSegment.spline(_axes_tuple(stmt), _need(stmt, "waypoints"),
                                 _profile_spec(stmt))
        self._live().start_path(seg, channel=_as_int(stmt, "channel", 0))

    def _cmd_BeginLookahead(self, stmt):
        self._live()
        self._block = {
            "axes": _axes_tuple(stmt),
            "limits": _profile_spec(stmt),
            "corner_tolerance": _as_float(stmt, "corner_tolerance", 0.01),
            "channel": _as_int(stmt, "channel", 0),
            "segments": [],
        }

    def _cmd_Segment(self, stmt):
        if self._block is None:
            raise BadArgument("Segment outside a lookahead block")
        self._block["segments"].append(PathSegment.linear(
            self._block["axes"], _need(stmt, "target"), self._block["limits"]))

    def _cmd_EndLookahead(self, stmt):
        if self._block is None:
            raise BadArgument("EndLookahead without BeginLookahead")
        block, self._block = self._block, None
        self._live().start_lookahead(block["segments"], block["limits"],
                                     corner_tolerance=block["corner_tolerance"],
                                     channel=block["channel"])

    # events

    def _cmd_SetEvent(self, stmt):
        kind = _need(stmt, "kind")
        if kind == "DistanceToTarget":
            cond = DistanceToTarget(_as_int(stmt, "axis"), _as_float(stmt, "value"))
        elif kind == "PositionReached":
            cond = PositionReached(_as_int(stmt, "axis"), _as_float(stmt, "value"))
        elif kind == "InputEdge":
            cond = InputEdge(_as_int(stmt, "bit"), _as_int(stmt, "level"))
        else:
            raise BadArgument(f"unknown event kind {kind!r}")
        self._live().set_event_input(EventBinding(id=_as_int(stmt, "id"), condition=cond))

    def _cmd_OnEvent(self, stmt):
        action_name = _need(stmt, "action")
        if action_name == "StartPos":
            action = StartPosAction(axis=_as_int(stmt, "axis"),
                                    target=_as_float(stmt, "target"),
                                    spec=_profile_spec(stmt),
                                    channel=_as_int(stmt, "channel", 0))
        elif action_name == "SetOut":
            action = SetOutputAction(bit=_as_int(stmt, "bit"),
                                     level=_as_int(stmt, "level"))
        else:
            raise BadArgument(f"unknown event action {action_name!r}")
        self._live().attach_event_action(_as_int(stmt, "id"), action)

    def _cmd_WaitEvent(self, stmt):
        self._live().wait_event(_as_int(stmt, "id"), max_ticks=self.max_wait_ticks)

    # time and I/O

    def _cmd_Wait(self, stmt):
        self._live().wait(_as_int(stmt, "axis"), max_ticks=self.max_wait_ticks)

    def _cmd_Sleep(self, stmt):
        self._live().sleep_ticks(_as_int(stmt, "ms"))

    def _cmd_SetOut(self, stmt):
        self._live().set_output_bit(_as_int(stmt, "bit"), _as_int(stmt, "level"))

    def _cmd_SetIn(self, stmt):
        self._live().set_input_bit(_as_int(stmt, "bit"), _as_int(stmt, "level"))


def execute_program(program: Program, *,
                    max_wait_ticks: int = DEFAULT_WAIT_TICKS) -> RunResult:
    """Run every statement; always returns a result.

    On an engine fault the device is closed, the partial log is kept, and
    the outcome carries the fault code plus the failing statement's source
    location.
    """
    dispatcher = _Dispatcher(max_wait_ticks)
    for stmt in program.statements:
        try:
            dispatcher.run(stmt)
        except MocsimError as e:
            code = getattr(e, "code", type(e).__name__)
            outcome = Outcome(success=False, code=code, message=str(e),
                              location=(stmt.line, stmt.col))
            engine = dispatcher.engine
            if engine is not None:
                closed = engine.close_device()
                return RunResult(outcome=outcome, log=closed.log,
                                 final_state=closed.final_state,
                                 warnings=closed.warnings)
            return RunResult(outcome=outcome, log=None, final_state=None, warnings=[])
    engine = dispatcher.engine
    if engine is None:
        return RunResult(outcome=Outcome(success=True), log=None,
                         final_state=None, warnings=[])
    if engine.phase is not Phase.CLOSED:
        result = engine.close_device()
        result.warnings.append("device was not closed explicitly")
        return result
    return engine.close_device()


@dataclass
class ScriptResult:
    """Everything that came out of running one source text."""

    program: Program
    diagnostics: list[Diagnostic]
    result: RunResult | None

    @property
    def ok(self) -> bool:
        return (not self.diagnostics and self.result is not None
                and self.result.outcome.success)


def run_script(text: str, config: DeviceConfig, *,
               do_preprocess: bool = True,
               max_wait_ticks: int = DEFAULT_WAIT_TICKS) -> ScriptResult:
    """Parse, preprocess, validate, and execute a source text.

    Execution is skipped when parsing or validation produced diagnostics.
    """
    parsed: ParseResult = parse(text)
    if parsed.diagnostics:
        return ScriptResult(parsed.program, list(parsed.diagnostics), None)
    program = preprocess(parsed.program, config) if do_preprocess else parsed.program
    diags = validate(program, config)
    if diags:
        return ScriptResult(program, diags, None)
    return ScriptResult(program, [], execute_program(program, max_wait_ticks=max_wait_ticks))
