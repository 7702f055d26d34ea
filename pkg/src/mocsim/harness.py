"""Evaluation harness: load task datasets, run generators, report pass rates.

Datasets are JSONL with one task per line carrying ``task_id``,
``instruction``, ``canonical_code``, and ``difficulty`` (1 to 3).  Every
canonical program is executed once at load time; broken references abort
loading rather than silently deflating scores.

For each task the harness runs the self-correction loop, simulates the
canonical program, and compares logs with both verification methods.  The
report aggregates first-try pass rates and pass-after-correction rates per
difficulty level plus a histogram of first-attempt error categories.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .engine import DeviceConfig, RunResult, TrajectoryLog
from .errors import (
    CanonicalCodeBroken,
    EmptyDataset,
    IoFailure,
    SchemaError,
)
from .mcscript import DiagnosticCategory, parse, preprocess, validate
from .pipeline.loop import DEFAULT_MAX_RETRIES, GenerationAttempt, self_correct_loop
from .runner import execute_program
from .verify import DEFAULT_TOLERANCE, Method, dtw_pass, ftpr_from_counts, match_endpoints

DESK_CONFIG = DeviceConfig(axes=(1, 2, 3, 4, 5, 6, 7, 8),
                           input_bits=16, output_bits=16)

DIFFICULTY_LABELS = {1: "L1", 2: "L2", 3: "L3"}
_LEVELS = ("L1", "L2", "L3", "OVERALL")

# Error taxonomy: parse failures are Syntax, unknown commands are Api,
# everything else a statement can get wrong is Argument.
_RUNTIME_API_CODES = {"UnknownCommand"}


@dataclass(frozen=True)
class TaskRecord:
    task_id: str
    instruction: str
    canonical_code: str
    difficulty: int

    @property
    def level(self) -> str:
        return DIFFICULTY_LABELS[self.difficulty]


def _parse_task(obj, lineno: int) -> TaskRecord:
    if not isinstance(obj, dict):
        raise SchemaError(f"line {lineno}: task must be an object")
    missing = [k for k in ("task_id", "instruction", "canonical_code", "difficulty")
               if k not in obj]
    if missing:
        raise SchemaError(f"line {lineno}: missing fields: {', '.join(missing)}")
    task_id = obj["task_id"]
    instruction = obj["instruction"]
    code = obj["canonical_code"]
    difficulty = obj["difficulty"]
    if not isinstance(task_id, str) or not task_id:
        raise SchemaError(f"line {lineno}: task_id must be a non-empty string")
    if not isinstance(instruction, str) or not instruction:
        raise SchemaError(f"line {lineno}: instruction must be a non-empty string")
    if not isinstance(code, str) or not code:
        raise SchemaError(f"line {lineno}: canonical_code must be a non-empty string")
    if not isinstance(difficulty, int) or difficulty not in DIFFICULTY_LABELS:
        raise SchemaError(f"line {lineno}: difficulty must be 1, 2, or 3")
    return TaskRecord(task_id, instruction, code, difficulty)


def run_reference(task: TaskRecord, config: DeviceConfig = DESK_CONFIG) -> RunResult:
    """Execute a task's canonical program; raises if it cannot run cleanly."""
    parsed = parse(task.canonical_code)
    if parsed.diagnostics:
        raise CanonicalCodeBroken([task.task_id],
                                  [str(d) for d in parsed.diagnostics])
    program = preprocess(parsed.program, config)
    diags = validate(program, config)
    if diags:
        raise CanonicalCodeBroken([task.task_id], [str(d) for d in diags])
    result = execute_program(program)
    if not result.outcome.success:
        raise CanonicalCodeBroken(
            [task.task_id], [f"{result.outcome.code}: {result.outcome.message}"])
    if result.log is None or result.log.is_empty():
        raise CanonicalCodeBroken([task.task_id], ["canonical run produced no log"])
    return result


def load_dataset(path, config: DeviceConfig = DESK_CONFIG, *,
                 check_canonical: bool = True) -> list[TaskRecord]:
    """Load and sanity-check a JSONL dataset."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise IoFailure(f"cannot read dataset {path}: {e}") from e
    tasks: list[TaskRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise SchemaError(f"line {lineno}: not valid JSON: {e}") from e
        task = _parse_task(obj, lineno)
        if task.task_id in seen:
            raise SchemaError(f"line {lineno}: duplicate task_id {task.task_id!r}")
        seen.add(task.task_id)
        tasks.append(task)
    if not tasks:
        raise EmptyDataset(f"dataset {path} contains no tasks")
    if check_canonical:
        broken: list[str] = []
        details: list[str] = []
        for task in tasks:
            try:
                run_reference(task, config)
            except CanonicalCodeBroken as e:
                broken.extend(e.task_ids)
                details.extend(f"{task.task_id}: {d}" for d in e.details)
        if broken:
            raise CanonicalCodeBroken(broken, details)
    return tasks


@dataclass
class EvalOutcome:
    """Per-task results.  Pass dicts are keyed by method value."""

    task_id: str
    difficulty: int
    first_attempt_passed: dict[str, bool]
    final_passed: dict[str, bool]
    attempts_used: int
    first_attempt_ran: bool
    error_category: str | None
    first_dtw_distance: float | None = None
    final_dtw_distance: float | None = None

    @property
    def level(self) -> str:
        return DIFFICULTY_LABELS[self.difficulty]


def classify_attempt(attempt: GenerationAttempt) -> str | None:
    """Error taxonomy bucket for a failed attempt, or None if it ran clean.

    Diagnostics carry their own category; runtime faults map unknown-command
    dispatch to Api and everything else to Argument.  Attempts that ran but
    only missed the verification tolerance have no category.
    """
    if attempt.diagnostics:
        return attempt.diagnostics[0].category.value
    if attempt.result is not None and not attempt.result.outcome.success:
        code = attempt.result.outcome.code
        if code in _RUNTIME_API_CODES:
            return DiagnosticCategory.API.value
        return DiagnosticCategory.ARGUMENT.value
    if attempt.generation_error is not None:
        return DiagnosticCategory.API.value
    return None


def _compare(canonical: TrajectoryLog, attempt: GenerationAttempt,
             tol_endpoints: float, tol_dtw: float):
    """Both-method comparison of one attempt against the canonical log."""
    passed = {Method.ENDPOINTS.value: False, Method.DTW.value: False}
    dtw_norm = None
    if attempt.ran_clean and attempt.result.log is not None \
            and not attempt.result.log.is_empty():
        log = attempt.result.log
        passed[Method.ENDPOINTS.value] = match_endpoints(
            canonical, log, tol_endpoints).passed
        dtw_report = dtw_pass(canonical, log, tol_dtw)
        passed[Method.DTW.value] = dtw_report.passed
        dtw_norm = dtw_report.dtw_distance
    return passed, dtw_norm


def run_task(task: TaskRecord, generator, config: DeviceConfig = DESK_CONFIG, *,
             retriever=None, max_retries: int = DEFAULT_MAX_RETRIES,
             tol_endpoints: float = DEFAULT_TOLERANCE,
             tol_dtw: float = DEFAULT_TOLERANCE) -> EvalOutcome:
    """Evaluate one task: loop the generator, compare against the reference."""
    canonical = run_reference(task, config).log
    attempts = self_correct_loop(task.task_id, task.instruction, generator,
                                 config, retriever=retriever,
                                 max_retries=max_retries)
    first = attempts[0]
    first_passed, first_dtw = _compare(canonical, first, tol_endpoints, tol_dtw)
    final = attempts[-1]
    if final is first:
        final_passed, final_dtw = dict(first_passed), first_dtw
    else:
        final_passed, final_dtw = _compare(canonical, final, tol_endpoints, tol_dtw)
    return EvalOutcome(
        task_id=task.task_id,
        difficulty=task.difficulty,
        first_attempt_passed=first_passed,
        final_passed=final_passed,
        attempts_used=len(attempts),
        first_attempt_ran=first.ran_clean,
        error_category=classify_attempt(first),
        first_dtw_distance=first_dtw,
        final_dtw_distance=final_dtw,
    )


@dataclass
class RateCell:
    n_passed: int
    n_total: int

    @property
    def rate(self) -> float:
        return ftpr_from_counts(self.n_passed, self.n_total)


@dataclass
class EvalReport:
    outcomes: list[EvalOutcome]
    first_try: dict[str, dict[str, RateCell]] = field(default_factory=dict)
    corrected: dict[str, dict[str, RateCell]] = field(default_factory=dict)
    error_histogram: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_outcomes(cls, outcomes: list[EvalOutcome]) -> "EvalReport":
        report = cls(outcomes=list(outcomes))
        methods = [m.value for m in Method]
        for table, pick in ((report.first_try, lambda o: o.first_attempt_passed),
                            (report.corrected, lambda o: o.final_passed)):
            for method in methods:
                cells: dict[str, RateCell] = {}
                for level in _LEVELS:
                    group = [o for o in outcomes
                             if level == "OVERALL" or o.level == level]
                    if not group:
                        continue
                    n_passed = sum(1 for o in group if pick(o).get(method, False))
                    cells[level] = RateCell(n_passed, len(group))
                table[method] = cells
        for outcome in outcomes:
            if outcome.error_category is not None:
                report.error_histogram[outcome.error_category] = \
                    report.error_histogram.get(outcome.error_category, 0) + 1
        report.error_histogram = dict(sorted(report.error_histogram.items()))
        return report

    def to_json(self) -> str:
        def table(cells):
            return {method: {level: {"passed": c.n_passed, "total": c.n_total,
                                     "rate": c.rate}
                             for level, c in levels.items()}
                    for method, levels in cells.items()}
        payload = {
            "n_tasks": len(self.outcomes),
            "first_try_pass_rate": table(self.first_try),
            "pass_after_correction": table(self.corrected),
            "error_histogram": self.error_histogram,
            "tasks": [{
                "task_id": o.task_id,
                "difficulty": o.difficulty,
                "first_attempt_passed": o.first_attempt_passed,
                "final_passed": o.final_passed,
                "attempts_used": o.attempts_used,
                "first_attempt_ran": o.first_attempt_ran,
                "error_category": o.error_category,
                "first_dtw_distance": o.first_dtw_distance,
                "final_dtw_distance": o.final_dtw_distance,
            } for o in self.outcomes],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = []
        header = f"{'stage':<10} {'method':<10}" + "".join(
            f"{lvl:>10}" for lvl in _LEVELS)
        lines.append(header)
        lines.append("-" * len(header))
        for label, table in (("first-try", self.first_try),
                             ("corrected", self.corrected)):
            for method, cells in table.items():
                row = f"{label:<10} {method:<10}"
                for level in _LEVELS:
                    cell = cells.get(level)
                    row += f"{cell.rate:>10.2f}" if cell else f"{'-':>10}"
                lines.append(row)
        lines.append("")
        lines.append("first-attempt error categories:")
        if self.error_histogram:
            for category, count in self.error_histogram.items():
                lines.append(f"  {category:<10} {count}")
        else:
            lines.append("  (none)")
        return "\n".join(lines) + "\n"


def run_eval(tasks: list[TaskRecord], generator,
             config: DeviceConfig = DESK_CONFIG, *,
             retriever=None, max_retries: int = DEFAULT_MAX_RETRIES,
             tol_endpoints: float = DEFAULT_TOLERANCE,
             tol_dtw: float = DEFAULT_TOLERANCE,
             jobs: int = 1) -> EvalReport:
    """Run every task and aggregate.  With ``jobs > 1`` tasks run in a
    thread pool; outcomes are reduced in dataset order either way."""
    def one(task: TaskRecord) -> EvalOutcome:
        return run_task(task, generator, config, retriever=retriever,
                        max_retries=max_retries, tol_endpoints=tol_endpoints,
                        tol_dtw=tol_dtw)

    if jobs <= 1:
        outcomes = [one(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, tasks))
    return EvalReport.from_outcomes(outcomes)
