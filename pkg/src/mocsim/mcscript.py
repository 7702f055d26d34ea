"""MCScript: a small line-oriented command language for the engine.

One statement per line: a command name followed by ``key=value`` arguments.
``#`` starts a comment.  Values are numbers, bare identifiers, bracketed
lists like ``[1,2]`` or ``[[0,0],[10,5]]``, and raw strings that may contain
spaces (a value runs until the next ``key=`` pair), so a typo like
``profile=s curve`` still parses and can be diagnosed with a suggestion
instead of failing at the tokenizer.

``parse`` reports structural problems, ``validate`` checks the vocabulary
and argument semantics against a device config, and ``preprocess`` wraps a
bare program with the lifecycle and logging statements it needs to run.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum

from .engine import MAX_AXES, MAX_CHANNELS, MAX_IO_BITS, DeviceConfig


class DiagnosticCategory(Enum):
    SYNTAX = "Syntax"
    API = "Api"
    ARGUMENT = "Argument"


@dataclass(frozen=True)
class Diagnostic:
    category: DiagnosticCategory
    message: str
    line: int
    col: int
    suggestion: str | None = None

    def __str__(self) -> str:
        return f"line {self.line}: {self.category.value}: {self.message}"


@dataclass(frozen=True)
class Arg:
    key: str
    value: object
    line: int
    col: int


@dataclass(frozen=True)
class Statement:
    name: str
    args: tuple[Arg, ...]
    line: int
    col: int

    def get(self, key: str, default=None):
        for a in self.args:
            if a.key == key:
                return a.value
        return default

    def has(self, key: str) -> bool:
        return any(a.key == key for a in self.args)

    def arg(self, key: str) -> Arg | None:
        for a in self.args:
            if a.key == key:
                return a
        return None

    def signature(self):
        """Structural identity, ignoring source locations."""
        return (self.name, tuple((a.key, _freeze(a.value)) for a in self.args))


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...]

    def has_command(self, name: str) -> bool:
        return any(s.name == name for s in self.statements)

    def signature(self):
        return tuple(s.signature() for s in self.statements)


@dataclass(frozen=True)
class ParseResult:
    program: Program
    diagnostics: tuple[Diagnostic, ...]

    @property
    def ok(self) -> bool:
        return not self.diagnostics


# --- suggestions -------------------------------------------------------------

def _normalize(token: str) -> str:
    return token.casefold().replace(" ", "").replace("_", "")


def edit_distance(a: str, b: str) -> int:
    """Plain Levenshtein distance."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def suggest(token: str, vocabulary, max_distance: int = 2) -> str | None:
    """Closest vocabulary entry within the edit-distance budget, or None.

    Comparison is case-insensitive and ignores spaces and underscores, so
    ``s curve`` lands on ``SCurve``.  Ties go to the lexicographically
    smallest candidate.
    """
    target = _normalize(token)
    best = None
    best_d = max_distance + 1
    for cand in sorted(vocabulary):
        d = edit_distance(target, _normalize(cand))
        if d < best_d:
            best, best_d = cand, d
    return best


# --- parsing -----------------------------------------------------------------

_INT_RE = re.compile(r"[+-]?\d+$")


def _looks_numeric(word: str) -> bool:
    if word[0].isdigit():
        return True
    if word[0] in "+-." and len(word) > 1:
        return any(c.isdigit() for c in word)
    return False


def _tokenize(line: str):
    tokens = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "=[],":
            tokens.append((ch, ch, i + 1))
            i += 1
            continue
        j = i
        while j < n and not line[j].isspace() and line[j] not in "=[],":
            j += 1
        tokens.append(("w", line[i:j], i + 1))
        i = j
    return tokens


class _LineSyntax(Exception):
    def __init__(self, message: str, col: int):
        super().__init__(message)
        self.message = message
        self.col = col


def _word_value(word: str):
    if _INT_RE.match(word):
        return int(word)
    if _looks_numeric(word):
        try:
            return float(word)
        except ValueError:
            raise ValueError(word) from None
    return word


def _parse_list(tokens, i, start_col):
    items = []
    expect_item = True
    i += 1
    while i < len(tokens):
        kind, text, col = tokens[i]
        if kind == "]":
            if expect_item and items:
                raise _LineSyntax("trailing comma in list", col)
            return items, i + 1
        if kind == ",":
            if expect_item:
                raise _LineSyntax("empty list element", col)
            expect_item = True
            i += 1
            continue
        if not expect_item:
            raise _LineSyntax(f"expected ',' or ']' in list, got '{text}'", col)
        if kind == "[":
            sub, i = _parse_list(tokens, i, col)
            items.append(sub)
            expect_item = False
            continue
        if kind == "w":
            try:
                items.append(_word_value(text))
            except ValueError:
                raise _LineSyntax(f"bad number '{text}'", col) from None
            expect_item = False
            i += 1
            continue
        raise _LineSyntax(f"unexpected '{text}' in list", col)
    raise _LineSyntax("unterminated list", start_col)


def _parse_scalar(tokens, i, key):
    words = []
    first_col = None
    while i < len(tokens) and tokens[i][0] == "w":
        followed_by_eq = i + 1 < len(tokens) and tokens[i + 1][0] == "="
        if followed_by_eq:
            break
        if first_col is None:
            first_col = tokens[i][2]
        words.append(tokens[i][1])
        i += 1
    if not words:
        col = tokens[i][2] if i < len(tokens) else (tokens[-1][2] if tokens else 1)
        raise _LineSyntax(f"missing value for '{key}'", col)
    if len(words) == 1:
        try:
            return _word_value(words[0]), i
        except ValueError:
            raise _LineSyntax(f"bad number '{words[0]}'", first_col) from None
    return " ".join(words), i


def _parse_line(line: str, lineno: int) -> Statement:
    tokens = _tokenize(line)
    if not tokens:
        raise _LineSyntax("empty statement", 1)
    kind, name, name_col = tokens[0]
    if kind != "w":
        raise _LineSyntax(f"expected a command name, got '{name}'", name_col)
    args = []
    seen = set()
    i = 1
    while i < len(tokens):
        kind, key, key_col = tokens[i]
        if kind != "w":
            raise _LineSyntax(f"expected key=value, got '{key}'", key_col)
        if i + 1 >= len(tokens) or tokens[i + 1][0] != "=":
            raise _LineSyntax(f"expected '=' after '{key}'", key_col)
        i += 2
        if i < len(tokens) and tokens[i][0] == "[":
            value, i = _parse_list(tokens, i, tokens[i][2])
        elif i < len(tokens) and tokens[i][0] == "w":
            value, i = _parse_scalar(tokens, i, key)
        else:
            col = tokens[i][2] if i < len(tokens) else key_col
            raise _LineSyntax(f"missing value for '{key}'", col)
        if key in seen:
            raise _LineSyntax(f"duplicate argument '{key}'", key_col)
        seen.add(key)
        args.append(Arg(key, value, lineno, key_col))
    return Statement(name=name, args=tuple(args), line=lineno, col=name_col)


def parse(text: str) -> ParseResult:
    """Parse source text; collects every structural diagnostic it can find.

    Lines with syntax errors are dropped from the program but do not stop
    the scan, so one pass reports all of them.
    """
    statements = []
    diagnostics = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        hash_idx = raw.find("#")
        line = raw if hash_idx < 0 else raw[:hash_idx]
        if not line.strip():
            continue
        try:
            statements.append(_parse_line(line, lineno))
        except _LineSyntax as e:
            diagnostics.append(Diagnostic(DiagnosticCategory.SYNTAX, e.message,
                                          lineno, e.col))
    return ParseResult(Program(tuple(statements)), tuple(diagnostics))


# --- printing ----------------------------------------------------------------

def _format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, list):
        return "[" + ",".join(_format_value(x) for x in v) + "]"
    return str(v)


def print_program(program: Program) -> str:
    """Render a program back to source; parsing the result reproduces the
    same statements."""
    lines = []
    for stmt in program.statements:
        parts = [stmt.name]
        parts.extend(f"{a.key}={_format_value(a.value)}" for a in stmt.args)
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


# --- vocabulary ---------------------------------------------------------------

PROFILE_NAMES = ("Trapezoidal", "SCurve", "JerkRatio")
EVENT_KINDS = ("DistanceToTarget", "PositionReached", "InputEdge")
ACTION_NAMES = ("StartPos", "SetOut")

_LIMIT_ARGS = {
    "vel": ("positive_number", True),
    "acc": ("positive_number", True),
    "dec": ("positive_number", False),
    "profile": ("profile", False),
    "jerk_ratio": ("unit_interval", False),
    "end_vel": ("nonneg_number", False),
}

COMMANDS: dict[str, dict[str, tuple[str, bool]]] = {
    "CreateDevice": {"axes": ("int_list", True), "inputs": ("nonneg_int", False),
                     "outputs": ("nonneg_int", False)},
    "StartCommunication": {},
    "StartLog": {"axes": ("axis_list", False), "ins": ("int_list", False),
                 "outs": ("int_list", False)},
    "StopLog": {},
    "CloseDevice": {},
    "StartPos": {"channel": ("channel", False), "axis": ("axis", True),
                 "target": ("number", True), **_LIMIT_ARGS},
    "StartLinear": {"channel": ("channel", False), "axes": ("axis_list", True),
                    "target": ("number_list", True), **_LIMIT_ARGS},
    "StartCircular": {"channel": ("channel", False), "axes": ("axis_list", True),
                      "center": ("number_list", True),
                      "sweep_deg": ("nonzero_number", True), **_LIMIT_ARGS},
    "StartHelical": {"channel": ("channel", False), "axes": ("axis_list", True),
                     "center": ("number_list", True),
                     "sweep_deg": ("nonzero_number", True),
                     "z_target": ("number", True), **_LIMIT_ARGS},
    "StartSpline": {"channel": ("channel", False), "axes": ("axis_list", True),
                    "waypoints": ("point_list", True), **_LIMIT_ARGS},
    "BeginLookahead": {"channel": ("channel", False), "axes": ("axis_list", True),
                       "corner_tolerance": ("positive_number", False),
                       **_LIMIT_ARGS},
    "Segment": {"target": ("number_list", True)},
    "EndLookahead": {},
    "SetEvent": {"id": ("nonneg_int", True), "kind": ("event_kind", True),
                 "axis": ("axis", False), "value": ("number", False),
                 "bit": ("int", False), "level": ("level", False)},
    "OnEvent": {"id": ("nonneg_int", True), "action": ("action_name", True),
                "channel": ("channel", False), "axis": ("axis", False),
                "target": ("number", False), "vel": ("positive_number", False),
                "acc": ("positive_number", False), "dec": ("positive_number", False),
                "profile": ("profile", False), "jerk_ratio": ("unit_interval", False),
                "end_vel": ("nonneg_number", False), "bit": ("int", False),
                "level": ("level", False)},
    "WaitEvent": {"id": ("nonneg_int", True)},
    "Wait": {"axis": ("axis", True)},
    "Sleep": {"ms": ("nonneg_int", True)},
    "SetOut": {"bit": ("int", True), "level": ("level", True)},
    "SetIn": {"bit": ("int", True), "level": ("level", True)},
}

_ACTION_ARGS = {
    "StartPos": {"required": ("axis", "target", "vel", "acc"),
                 "allowed": ("axis", "target", "vel", "acc", "dec", "profile",
                             "jerk_ratio", "end_vel", "channel")},
    "SetOut": {"required": ("bit", "level"), "allowed": ("bit", "level")},
}


# --- validation ----------------------------------------------------------------

@dataclass
class _Ctx:
    axes: tuple[int, ...]
    input_bits: int
    output_bits: int


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_value(kind: str, value, ctx: _Ctx):
    """Return ``(message, suggestion)`` on failure, ``None`` when fine."""
    if kind == "int":
        if not _is_int(value):
            return f"expects an integer, got '{_format_value(value)}'", None
    elif kind == "nonneg_int":
        if not _is_int(value) or value < 0:
            return f"expects a non-negative integer, got '{_format_value(value)}'", None
    elif kind == "number":
        if not _is_number(value):
            return f"expects a number, got '{_format_value(value)}'", None
    elif kind == "positive_number":
        if not _is_number(value) or value <= 0:
            return f"expects a positive number, got '{_format_value(value)}'", None
    elif kind == "nonneg_number":
        if not _is_number(value) or value < 0:
            return f"expects a non-negative number, got '{_format_value(value)}'", None
    elif kind == "nonzero_number":
        if not _is_number(value) or value == 0:
            return f"expects a nonzero number, got '{_format_value(value)}'", None
    elif kind == "unit_interval":
        if not _is_number(value) or value < 0 or value > 1:
            return f"expects a number in [0, 1], got '{_format_value(value)}'", None
    elif kind == "level":
        if not _is_int(value) or value not in (0, 1):
            return f"expects 0 or 1, got '{_format_value(value)}'", None
    elif kind == "channel":
        if not _is_int(value) or value < 0 or value >= MAX_CHANNELS:
            return (f"expects a channel in [0, {MAX_CHANNELS}), "
                    f"got '{_format_value(value)}'", None)
    elif kind == "axis":
        if not _is_int(value):
            return f"expects an integer axis id, got '{_format_value(value)}'", None
        if value not in ctx.axes:
            valid = ", ".join(str(a) for a in ctx.axes)
            return f"axis {value} is not configured; valid axes: {valid}", None
    elif kind == "int_list":
        if not isinstance(value, list) or not all(_is_int(v) for v in value):
            return f"expects a list of integers, got '{_format_value(value)}'", None
    elif kind == "axis_list":
        if (not isinstance(value, list) or not value
                or not all(_is_int(v) for v in value)):
            return f"expects a list of axis ids, got '{_format_value(value)}'", None
        for v in value:
            if v not in ctx.axes:
                valid = ", ".join(str(a) for a in ctx.axes)
                return f"axis {v} is not configured; valid axes: {valid}", None
        if len(set(value)) != len(value):
            return "axis list contains duplicates", None
    elif kind == "number_list":
        if (not isinstance(value, list) or not value
                or not all(_is_number(v) for v in value)):
            return f"expects a list of numbers, got '{_format_value(value)}'", None
    elif kind == "point_list":
        if (not isinstance(value, list) or not value
                or not all(isinstance(p, list) and p and all(_is_number(v) for v in p)
                           for p in value)):
            return f"expects a list of points, got '{_format_value(value)}'", None
    elif kind == "profile":
        if value not in PROFILE_NAMES:
            s = suggest(str(value), PROFILE_NAMES)
            msg = f"has no profile named '{_format_value(value)}'"
            if s:
                msg += f". Did you mean: {s}?"
            return msg, s
    elif kind == "event_kind":
        if value not in EVENT_KINDS:
            s = suggest(str(value), EVENT_KINDS)
            msg = f"has no event kind named '{_format_value(value)}'"
            if s:
                msg += f". Did you mean: {s}?"
            return msg, s
    elif kind == "action_name":
        if value not in ACTION_NAMES:
            s = suggest(str(value), ACTION_NAMES)
            msg = f"has no action named '{_format_value(value)}'"
            if s:
                msg += f". Did you mean: {s}?"
            return msg, s
    else:  # pragma: no cover - schema table is closed
        raise AssertionError(f"unknown checker {kind}")
    return None


def _resolve_ctx(program: Program, config: DeviceConfig | None) -> _Ctx:
    """Effective device seen by the validator: the program's own CreateDevice
    wins over the supplied config."""
    for stmt in program.statements:
        if stmt.name != "CreateDevice":
            continue
        axes = stmt.get("axes")
        if isinstance(axes, list) and axes and all(_is_int(a) for a in axes):
            inputs = stmt.get("inputs", 16)
            outputs = stmt.get("outputs", 16)
            return _Ctx(tuple(axes),
                        inputs if _is_int(inputs) else 16,
                        outputs if _is_int(outputs) else 16)
        break
    if config is not None:
        return _Ctx(tuple(config.axes), config.input_bits, config.output_bits)
    return _Ctx((), 0, 0)


class _Collector:
    def __init__(self):
        self.diags: list[Diagnostic] = []

    def add(self, category, message, line, col, suggestion=None):
        self.diags.append(Diagnostic(category, message, line, col, suggestion))

    def argument(self, message, line, col, suggestion=None):
        self.add(DiagnosticCategory.ARGUMENT, message, line, col, suggestion)

    def syntax(self, message, line, col):
        self.add(DiagnosticCategory.SYNTAX, message, line, col)


def _check_args(stmt: Statement, schema, ctx: _Ctx, out: _Collector) -> bool:
    """Schema-level key and type checks; returns False if anything failed."""
    ok = True
    for a in stmt.args:
        if a.key not in schema:
            s = suggest(a.key, schema.keys())
            msg = f"{stmt.name} has no argument '{a.key}'"
            if s:
                msg += f". Did you mean: {s}?"
            out.argument(msg, a.line, a.col, s)
            ok = False
    for key, (kind, required) in schema.items():
        a = stmt.arg(key)
        if a is None:
            if required:
                out.argument(f"{stmt.name} is missing required argument '{key}'",
                             stmt.line, stmt.col)
                ok = False
            continue
        failure = _check_value(kind, a.value, ctx)
        if failure is not None:
            msg, s = failure
            out.argument(f"argument '{key}' {msg}", a.line, a.col, s)
            ok = False
    return ok


def _check_bit_arg(stmt, key, limit, label, out) -> bool:
    a = stmt.arg(key)
    if a is None:
        return True
    if _is_int(a.value) and 0 <= a.value < limit:
        return True
    out.argument(f"{label} bit {_format_value(a.value)} out of range, "
                 f"device has {limit}", a.line, a.col)
    return False


def _check_create_device(stmt: Statement, out: _Collector) -> None:
    axes = stmt.get("axes")
    a = stmt.arg("axes")
    if isinstance(axes, list) and a is not None:
        if len(axes) > MAX_AXES:
            out.argument(f"at most {MAX_AXES} axes are supported, got {len(axes)}",
                         a.line, a.col)
        if len(set(axes)) != len(axes):
            out.argument("axis ids must be unique", a.line, a.col)
        if any(_is_int(v) and v < 0 for v in axes):
            out.argument("axis ids must be non-negative", a.line, a.col)
    for key in ("inputs", "outputs"):
        arg = stmt.arg(key)
        if arg is not None and _is_int(arg.value) and arg.value > MAX_IO_BITS:
            out.argument(f"at most {MAX_IO_BITS} {key} are supported, "
                         f"got {arg.value}", arg.line, arg.col)


def _dims_match(stmt, key, want, out) -> None:
    a = stmt.arg(key)
    if a is not None and isinstance(a.value, list) and len(a.value) != want:
        out.argument(f"'{key}' needs {want} coordinates, got {len(a.value)}",
                     a.line, a.col)


def _check_command(stmt: Statement, ctx: _Ctx, declared_events: dict,
                   out: _Collector) -> None:
    name = stmt.name
    if name == "CreateDevice":
        _check_create_device(stmt, out)
    elif name == "StartLog":
        for key, limit, label in (("ins", ctx.input_bits, "input"),
                                  ("outs", ctx.output_bits, "output")):
            a = stmt.arg(key)
            if a is None or not isinstance(a.value, list):
                continue
            for b in a.value:
                if not (_is_int(b) and 0 <= b < limit):
                    out.argument(f"{label} bit {_format_value(b)} out of range, "
                                 f"device has {limit}", a.line, a.col)
                    break
    elif name == "StartLinear":
        axes = stmt.get("axes")
        if isinstance(axes, list):
            _dims_match(stmt, "target", len(axes), out)
    elif name == "StartCircular":
        axes = stmt.arg("axes")
        if axes is not None and isinstance(axes.value, list) and len(axes.value) != 2:
            out.argument(f"circular paths need exactly 2 axes, got {len(axes.value)}",
                         axes.line, axes.col)
        _dims_match(stmt, "center", 2, out)
    elif name == "StartHelical":
        axes = stmt.arg("axes")
        if axes is not None and isinstance(axes.value, list) and len(axes.value) != 3:
            out.argument(f"helical paths need exactly 3 axes, got {len(axes.value)}",
                         axes.line, axes.col)
        _dims_match(stmt, "center", 2, out)
    elif name == "StartSpline":
        axes = stmt.get("axes")
        wps = stmt.arg("waypoints")
        if wps is not None and isinstance(wps.value, list):
            pts = wps.value
            if len(pts) < 3:
                out.argument(f"a spline needs at least 3 waypoints, got {len(pts)}",
                             wps.line, wps.col)
            elif isinstance(axes, list):
                want = len(axes)
                if any(isinstance(p, list) and len(p) != want for p in pts):
                    out.argument(f"spline waypoints need {want} coordinates each",
                                 wps.line, wps.col)
                elif any(isinstance(p, list) and isinstance(q, list) and p == q
                         for p, q in zip(pts, pts[1:])):
                    out.argument("consecutive spline waypoints coincide",
                                 wps.line, wps.col)
    elif name == "SetEvent":
        eid = stmt.get("id")
        kind = stmt.get("kind")
        if kind in ("DistanceToTarget", "PositionReached"):
            needed, stray = ("axis", "value"), ("bit", "level")
        elif kind == "InputEdge":
            needed, stray = ("bit", "level"), ("axis", "value")
            _check_bit_arg(stmt, "bit", ctx.input_bits, "input", out)
        else:
            needed, stray = (), ()
        for key in needed:
            if not stmt.has(key):
                out.argument(f"SetEvent kind={kind} requires argument '{key}'",
                             stmt.line, stmt.col)
        for key in stray:
            a = stmt.arg(key)
            if a is not None:
                out.argument(f"argument '{key}' does not apply to kind {kind}",
                             a.line, a.col)
        if _is_int(eid):
            if eid in declared_events:
                out.argument(f"event id {eid} is already declared", stmt.line, stmt.col)
            else:
                declared_events[eid] = stmt
    elif name in ("OnEvent", "WaitEvent"):
        eid = stmt.get("id")
        if _is_int(eid) and eid not in declared_events:
            out.argument(f"event id {eid} has not been declared by SetEvent",
                         stmt.line, stmt.col)
        if name == "OnEvent":
            action = stmt.get("action")
            rules = _ACTION_ARGS.get(action)
            if rules is not None:
                for key in rules["required"]:
                    if not stmt.has(key):
                        out.argument(f"action {action} requires argument '{key}'",
                                     stmt.line, stmt.col)
                for a in stmt.args:
                    if a.key in ("id", "action"):
                        continue
                    if a.key not in rules["allowed"]:
                        out.argument(f"argument '{a.key}' does not apply to "
                                     f"action {action}", a.line, a.col)
                if action == "SetOut":
                    _check_bit_arg(stmt, "bit", ctx.output_bits, "output", out)
    elif name == "SetOut":
        _check_bit_arg(stmt, "bit", ctx.output_bits, "output", out)
    elif name == "SetIn":
        _check_bit_arg(stmt, "bit", ctx.input_bits, "input", out)


def validate(program: Program, config: DeviceConfig | None = None) -> list[Diagnostic]:
    """Check the vocabulary, argument names, types, and value ranges.

    The reference device is the program's own ``CreateDevice`` when present,
    otherwise ``config``.  Returns every diagnostic found, in source order.
    """
    ctx = _resolve_ctx(program, config)
    out = _Collector()
    declared_events: dict[int, Statement] = {}
    block_axes: list | None = None
    in_block = False
    for stmt in program.statements:
        if in_block and stmt.name not in ("Segment", "EndLookahead"):
            out.syntax(f"only Segment may appear inside a lookahead block, "
                       f"got {stmt.name}", stmt.line, stmt.col)
            continue
        schema = COMMANDS.get(stmt.name)
        if schema is None:
            s = suggest(stmt.name, COMMANDS.keys())
            msg = f"unknown command '{stmt.name}'"
            if s:
                msg += f". Did you mean: {s}?"
            out.add(DiagnosticCategory.API, msg, stmt.line, stmt.col, s)
            continue
        if stmt.name == "Segment" and not in_block:
            out.syntax("Segment outside a lookahead block", stmt.line, stmt.col)
            continue
        if stmt.name == "EndLookahead":
            if not in_block:
                out.syntax("EndLookahead without BeginLookahead", stmt.line, stmt.col)
            in_block = False
            block_axes = None
            continue
        ok = _check_args(stmt, schema, ctx, out)
        if ok:
            _check_command(stmt, ctx, declared_events, out)
        if stmt.name == "BeginLookahead":
            if in_block:
                out.syntax("BeginLookahead inside an open lookahead block",
                           stmt.line, stmt.col)
            in_block = True
            axes = stmt.get("axes")
            block_axes = axes if isinstance(axes, list) else None
        elif stmt.name == "Segment" and ok and block_axes is not None:
            _dims_match(stmt, "target", len(block_axes), out)
    if in_block:
        last = program.statements[-1]
        out.syntax("lookahead block is never closed", last.line, last.col)
    return out.diags


# --- preprocessing --------------------------------------------------------------

def _synth(name: str, args: list[tuple[str, object]]) -> Statement:
    return Statement(name=name, args=tuple(Arg(k, v, 0, 0) for k, v in args),
                     line=0, col=0)


def preprocess(program: Program, config: DeviceConfig) -> Program:
    """Wrap a bare program with lifecycle and logging statements.

    Missing ``CreateDevice``, ``StartCommunication``, and ``StartLog`` are
    inserted up front (logging covers every configured axis and I/O bit);
    missing ``StopLog`` and ``CloseDevice`` are appended.  Programs that
    already contain a statement keep it, so the operation is idempotent.
    """
    ctx = _resolve_ctx(program, config)
    stmts = list(program.statements)

    if not program.has_command("CreateDevice"):
        stmts.insert(0, _synth("CreateDevice", [
            ("axes", list(ctx.axes)),
            ("inputs", ctx.input_bits),
            ("outputs", ctx.output_bits),
        ]))
    if not program.has_command("StartCommunication"):
        at = next(i for i, s in enumerate(stmts) if s.name == "CreateDevice") + 1
        stmts.insert(at, _synth("StartCommunication", []))
    if not program.has_command("StartLog"):
        at = next(i for i, s in enumerate(stmts) if s.name == "StartCommunication") + 1
        stmts.insert(at, _synth("StartLog", [
            ("axes", list(ctx.axes)),
            ("ins", list(range(ctx.input_bits))),
            ("outs", list(range(ctx.output_bits))),
        ]))
    if not program.has_command("StopLog"):
        close_at = next((i for i, s in enumerate(stmts) if s.name == "CloseDevice"),
                        len(stmts))
        stmts.insert(close_at, _synth("StopLog", []))
    if not program.has_command("CloseDevice"):
        stmts.append(_synth("CloseDevice", []))
    return Program(tuple(stmts))
