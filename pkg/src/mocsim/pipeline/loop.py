"""The generate / run / correct loop.

Attempt 1 generates from the instruction alone (plus retrieved context).
Whenever parsing, validation, or execution fails, the error text is folded
into both the retrieval query and the next request, and the loop retries up
to ``max_retries`` more times.  The first attempt's record is never
modified afterwards, so first-try metrics stay honest.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..engine import DeviceConfig, RunResult
from ..errors import GeneratorUnavailable, RemoteError
from ..mcscript import Diagnostic, parse, preprocess, validate
from ..runner import execute_program
from .decompose import Decomposition, decompose
from .generators import GenerationRequest
from .retrieval import Chunk

DEFAULT_MAX_RETRIES = 3


@dataclass
class GenerationAttempt:
    """One trip through generate, preprocess, validate, run."""

    index: int
    program_text: str
    chunk_ids: tuple[str, ...] = ()
    prior_error: str | None = None
    diagnostics: list[Diagnostic] = field(default_factory=list)
    result: RunResult | None = None
    generation_error: str | None = None

    @property
    def ran_clean(self) -> bool:
        return (self.generation_error is None and not self.diagnostics
                and self.result is not None and self.result.outcome.success)

    def error_summary(self) -> str | None:
        """The message fed into the next attempt, or None when clean."""
        if self.generation_error is not None:
            return self.generation_error
        if self.diagnostics:
            return str(self.diagnostics[0])
        if self.result is not None and not self.result.outcome.success:
            out = self.result.outcome
            loc = f"line {out.location[0]}: " if out.location else ""
            return f"{loc}{out.code}: {out.message}"
        return None


def self_correct_loop(task_id: str, instruction: str, generator,
                      config: DeviceConfig, *,
                      retriever=None,
                      max_retries: int = DEFAULT_MAX_RETRIES,
                      max_wait_ticks: int | None = None) -> list[GenerationAttempt]:
    """Run up to ``1 + max_retries`` attempts; stop early on success.

    ``retriever`` is a callable from query text to a chunk list; when given,
    retry queries append the previous error so retrieval can surface the
    relevant documentation.  Each run gets a fresh engine, so attempts never
    share state.
    """
    decomposition = decompose(instruction)
    attempts: list[GenerationAttempt] = []
    prior_error: str | None = None
    run_kwargs = {} if max_wait_ticks is None else {"max_wait_ticks": max_wait_ticks}

    for index in range(1, max_retries + 2):
        query = instruction if prior_error is None else f"{instruction} {prior_error}"
        chunks: tuple[Chunk, ...] = tuple(retriever(query)) if retriever else ()
        request = GenerationRequest(task_id=task_id, instruction=instruction,
                                    attempt=index, decomposition=decomposition,
                                    chunks=chunks, prior_error=prior_error)
        attempt = GenerationAttempt(index=index, program_text="",
                                    chunk_ids=tuple(c.id for c in chunks),
                                    prior_error=prior_error)
        attempts.append(attempt)
        try:
            attempt.program_text = generator.generate(request)
        except (GeneratorUnavailable, RemoteError) as e:
            attempt.generation_error = f"{type(e).__name__}: {e}"
            prior_error = attempt.generation_error
            continue

        parsed = parse(attempt.program_text)
        if parsed.diagnostics:
            attempt.diagnostics = list(parsed.diagnostics)
            prior_error = attempt.error_summary()
            continue
        program = preprocess(parsed.program, config)
        diags = validate(program, config)
        if diags:
            attempt.diagnostics = diags
            prior_error = attempt.error_summary()
            continue
        attempt.result = execute_program(program, **run_kwargs)
        if attempt.result.outcome.success:
            break
        prior_error = attempt.error_summary()
    return attempts
