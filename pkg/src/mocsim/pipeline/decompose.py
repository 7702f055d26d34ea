"""Rule-based instruction decomposition.

Splits an instruction into subtask sentences and pulls out the axis and I/O
ids it mentions.  This is deliberately simple; a generator-backed decomposer
can be swapped in anywhere a callable with the same shape is accepted.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

_SPLIT_RE = re.compile(r"(?:\.\s+)|(?:[,;]?\s+then\s+)", re.IGNORECASE)
_AXIS_RE = re.compile(r"\baxis\s+(\d+)", re.IGNORECASE)
_AXES_LIST_RE = re.compile(r"\baxes\s+((?:\d+(?:\s*(?:,|and)\s*)?)+)", re.IGNORECASE)
_INPUT_RE = re.compile(r"\binput\s+(\d+)", re.IGNORECASE)
_OUTPUT_RE = re.compile(r"\boutput\s+(\d+)", re.IGNORECASE)


@dataclass(frozen=True)
class Decomposition:
    subtasks: tuple[str, ...]
    axes: tuple[int, ...]
    inputs: tuple[int, ...]
    outputs: tuple[int, ...]


def decompose(instruction: str) -> Decomposition:
    """Split on sentence ends and 'then', and collect referenced ids."""
    parts = []
    for piece in _SPLIT_RE.split(instruction):
        piece = piece.strip().rstrip(".").strip()
        if piece:
            parts.append(piece)

    axes = {int(m) for m in _AXIS_RE.findall(instruction)}
    for group in _AXES_LIST_RE.findall(instruction):
        axes.update(int(n) for n in re.findall(r"\d+", group))
    inputs = sorted(int(m) for m in set(_INPUT_RE.findall(instruction)))
    outputs = sorted(int(m) for m in set(_OUTPUT_RE.findall(instruction)))
    return Decomposition(subtasks=tuple(parts), axes=tuple(sorted(axes)),
                         inputs=tuple(inputs), outputs=tuple(outputs))
