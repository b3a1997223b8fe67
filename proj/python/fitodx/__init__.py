"""Python access to the fitodx knowledge-base tools and inference engine.

Outcomes, trace events, pending questions and lint findings come back as
plain dicts with the same shape the HTTP API returns.
"""

import json

from . import _core
from ._core import FitodxError, KbError, KnowledgeBase, MissingAnswer, NotPending, SessionFinished

__all__ = [
    "FitodxError",
    "KbError",
    "KnowledgeBase",
    "MissingAnswer",
    "NotPending",
    "Session",
    "SessionFinished",
    "classify",
    "lint",
    "load_kb",
    "parse_kb",
    "run",
    "summary",
]

parse_kb = _core.parse_kb
load_kb = _core.load_kb


def run(kb, answers):
    """Evaluate with a preset {"module.question": "si"|"no"} map.

    Returns (outcome, trace). Raises MissingAnswer if a needed answer is absent.
    """
    outcome, trace = _core.run_with_answers(kb, answers)
    return json.loads(outcome), json.loads(trace)


def classify(kb, answers):
    """Outcome from the brute-force reference classifier."""
    return json.loads(_core.classify_kb(kb, answers))


def lint(kb):
    return json.loads(kb.lint_json())


def summary(kb):
    return json.loads(kb.summary_json())


class Session:
    """One interactive consultation: read `pending`, call `answer` until finished."""

    def __init__(self, kb):
        self._state = _core.Session(kb)

    @property
    def finished(self):
        return self._state.finished

    @property
    def pending(self):
        raw = self._state.pending_json
        return None if raw is None else json.loads(raw)

    @property
    def outcome(self):
        raw = self._state.outcome_json
        return None if raw is None else json.loads(raw)

    @property
    def trace(self):
        return json.loads(self._state.trace_json)

    def answer(self, question_id, answer):
        self._state.answer(question_id, answer)

    def explanation(self):
        return json.loads(self._state.explanation_json())
