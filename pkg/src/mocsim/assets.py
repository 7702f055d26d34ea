"""Access to the data files bundled with the package."""
from __future__ import annotations

from importlib.resources import files
from pathlib import Path


def _data_root() -> Path:
    return Path(str(files("mocsim").joinpath("data")))


def bundled_dataset_path() -> Path:
    """The desk evaluation dataset shipped with the package."""
    return _data_root() / "mceval_desk.jsonl"


def bundled_corpus_paths() -> tuple[list[Path], list[Path]]:
    """Documentation and code sample files for the bundled retrieval corpus."""
    root = _data_root()
    docs = sorted((root / "docs").glob("*.md"))
    samples = sorted((root / "samples").glob("*.mcs"))
    return docs, samples


def default_prompt_template() -> str:
    return (_data_root() / "prompt_default.txt").read_text(encoding="utf-8")
