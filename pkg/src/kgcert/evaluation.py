"""Response checking for multiple-choice answers.

A response is judged by the option number it names, not by answer text.
The checker anchors on the first occurrence of "correct answer" in the
lowercased response and reads the following number, tolerating extra
whitespace, brackets or parentheses around the number, and trailing
punctuation. Few-shot echoes later in a response can never override the
first anchor. CHECKER_VERSION is recorded in every certificate so results
stay attributable to the tolerance table that judged them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

CHECKER_VERSION = "1"

_ANCHOR = "correct answer"
_NUMBER_AFTER_ANCHOR = re.compile(
    r"correct answer\s*:?\s*[\[\(\{]?\s*(\d+)\s*[\]\)\}]?\s*[.):,]?"
)


@dataclass(frozen=True)
class Verdict:
    correct: bool
    matched_span: str | None = None
    chosen_option: int | None = None


def check_response(model_answer: str, correct_index: int) -> Verdict:
    """Judge a model response against the expected 1-based option number.

    An absent anchor, or an anchor not followed by a number, counts as
    incorrect rather than an error.
    """
    if correct_index < 1:
        raise ValueError("correct_index must be >= 1")
    lowered = model_answer.lower()
    anchor_at = lowered.find(_ANCHOR)
    if anchor_at < 0:
        return Verdict(correct=False)
    match = _NUMBER_AFTER_ANCHOR.match(lowered, anchor_at)
    if match is None:
        return Verdict(correct=False)
    chosen = int(match.group(1))
    return Verdict(
        correct=(chosen == correct_index),
        matched_span=match.group(0).strip(),
        chosen_option=chosen,
    )
