"""Packaged fixture data: prompt template, few-shot bank, toy dataset."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

PROMPT_TEMPLATE_VERSION = "v1"
FEW_SHOT_BANK_VERSION = "v1"


def _read(name: str) -> str:
    return (resources.files(__package__) / name).read_text(encoding="utf-8")


def prompt_template() -> str:
    return _read(f"prompt_template_{PROMPT_TEMPLATE_VERSION}.txt")


def few_shot_bank() -> tuple[str, tuple[str, ...]]:
    """Return (common context line, example blocks)."""
    segments = _read(f"few_shot_bank_{FEW_SHOT_BANK_VERSION}.txt").split("\n%%\n")
    context = segments[0].strip("\n")
    examples = tuple(s.strip("\n") for s in segments[1:])
    return context, examples


def toy_dataset_paths() -> dict[str, Path]:
    """Paths to the bundled 12-node toy dataset's four input files."""
    base = resources.files(__package__) / "toy"
    return {
        "triples": Path(str(base / "triples.tsv")),
        "entity_aliases": Path(str(base / "entity_aliases.tsv")),
        "relation_aliases": Path(str(base / "relation_aliases.tsv")),
        "corpus": Path(str(base / "corpus.tsv")),
    }
