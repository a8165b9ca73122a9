from __future__ import annotations

import pytest

from kgcert import check_response

# Tolerated-format fixture table: (response, correct_index) pairs that must
# be accepted. Covers the template format plus trivial formatting slack:
# case, extra whitespace, brackets or parentheses, trailing punctuation.
ACCEPT_TABLE = [
    ("correct answer: 2. entity_C, because the context says so", 2),
    ("Correct Answer:  (2) entity_C", 2),
    ("CORRECT ANSWER: 2", 2),
    ("correct answer:2. foo", 2),
    ("correct answer : 2", 2),
    ("correct answer: [2] entity_C", 2),
    ("correct answer: {2}", 2),
    ("correct answer: 2) entity_C", 2),
    ("correct answer: 2: entity_C", 2),
    ("correct answer 2. entity_C", 2),
    ("The correct answer: 2. entity_C.", 2),
    ("correct answer:\t2", 2),
    ("correct answer: 12. something", 12),
    ("correct answer: ( 3 ). thing", 3),
    ("Sure! correct answer: 5. whatever, because reasons", 5),
]

# Mismatch fixture table: pairs that must be rejected.
REJECT_TABLE = [
    ("correct answer: 3. entity_B, because ...", 2),
    ("the answer is 2", 2),
    ("option 2 is right", 2),
    ("", 2),
    ("correct answer: none of the above", 2),
    ("correct answer: entity_C (option 2)", 2),
    ("correct answer: 23. entity_X", 2),
    ("correct answer: 2", 3),
    ("I refuse to answer.", 1),
]


class TestCheckResponse:
    @pytest.mark.parametrize("response,index", ACCEPT_TABLE)
    def test_accepts_tolerated_formats(self, response, index):
        verdict = check_response(response, index)
        assert verdict.correct
        assert verdict.chosen_option == index

    @pytest.mark.parametrize("response,index", REJECT_TABLE)
    def test_rejects_mismatches(self, response, index):
        assert not check_response(response, index).correct

    def test_mismatch_reports_chosen_option(self):
        verdict = check_response("correct answer: 3. entity_B", 2)
        assert not verdict.correct
        assert verdict.chosen_option == 3

    def test_anchors_on_first_occurrence(self):
        # A later echo ("correct answer: 2") cannot override the first anchor.
        response = "correct answer: 7. x. In the examples, correct answer: 2."
        verdict = check_response(response, 2)
        assert not verdict.correct
        assert verdict.chosen_option == 7

    def test_first_anchor_without_digit_is_incorrect(self):
        response = "correct answer: unknown. later: correct answer: 2"
        verdict = check_response(response, 2)
        assert not verdict.correct
        assert verdict.chosen_option is None

    def test_all_indices_to_99(self):
        for i in range(1, 100):
            rendered = f"correct answer: {i}. option {i}, because reasons"
            assert check_response(rendered, i).correct
            for variant in (
                f"Correct Answer:  ({i}) thing",
                f"correct answer:[{i}]",
                f"correct answer :  {i}.",
            ):
                assert check_response(variant, i).correct, variant

    def test_deterministic(self):
        a = check_response("correct answer: 2. x", 2)
        b = check_response("correct answer: 2. x", 2)
        assert a == b

    def test_invalid_index(self):
        with pytest.raises(ValueError):
            check_response("correct answer: 1", 0)

    def test_correct_implies_chosen_equals_index(self):
        for response, index in ACCEPT_TABLE:
            verdict = check_response(response, index)
            if verdict.correct:
                assert verdict.chosen_option == index
