import os
import pathlib

import pytest

import fitodx

ROOT = pathlib.Path(__file__).resolve().parents[2]
REFERENCE = ROOT / "kb" / "reference.fdx"
DATA = ROOT / "tests" / "data"

CROPS = ["arroz", "tabaco", "tomate", "maiz", "pimiento", "pepino", "frijol"]


def crop_answers(crop):
    return {f"principal.es_{c}": "si" if c == crop else "no" for c in CROPS}


@pytest.fixture(scope="module")
def kb():
    return fitodx.load_kb(os.fspath(REFERENCE))


def test_reference_kb_loads(kb):
    assert kb.entry == "principal"
    assert kb.modules == ["principal"] + CROPS
    assert fitodx.lint(kb) == []


def test_serialize_round_trip(kb):
    assert fitodx.parse_kb(kb.serialize()) == kb


def test_parse_error_carries_diagnostics():
    with pytest.raises(fitodx.KbError) as info:
        fitodx.parse_kb('kb "x" version 1 entry m\nmodule m {')
    assert "SYNTAX" in str(info.value)
    assert "SYNTAX" in info.value.diagnostics_json


def test_interactive_session_matches_batch_run(kb):
    answers = crop_answers("tabaco")
    answers.update({f"tabaco.p{i}": "no" for i in range(1, 13)})
    answers.update({"tabaco.p3": "si", "tabaco.p9": "si", "tabaco.p12": "si"})

    session = fitodx.Session(kb)
    asked = 0
    while not session.finished:
        q = session.pending["question_id"]
        session.answer(q, answers[q])
        asked += 1
    assert asked == 19
    assert session.outcome["diagnosis"]["name"] == "PYTHIUM APHANIDERMATUM (DAMPING OFF)"

    outcome, trace = fitodx.run(kb, answers)
    assert outcome == session.outcome
    assert trace == session.trace
    assert outcome == fitodx.classify(kb, answers)
    assert session.explanation()["fired"]["rule"] == "pythium"

    with pytest.raises(fitodx.SessionFinished):
        session.answer("tabaco.p1", "no")


def test_wrong_question_and_bad_answer(kb):
    session = fitodx.Session(kb)
    with pytest.raises(fitodx.NotPending):
        session.answer("principal.es_frijol", "si")
    with pytest.raises(ValueError):
        session.answer("principal.es_arroz", "quizas")


def test_missing_answer_reports_the_question(kb):
    with pytest.raises(fitodx.MissingAnswer) as info:
        fitodx.run(kb, crop_answers("tabaco"))
    assert info.value.question_id == "tabaco.p1"


def test_lint_and_matrix_on_corpus():
    shadowed = fitodx.load_kb(os.fspath(DATA / "shadowed.fdx"))
    findings = fitodx.lint(shadowed)
    assert [f["code"] for f in findings] == ["SHADOWED_RULE"]
    csv = shadowed.matrix_csv("m")
    assert csv.splitlines() == ["q1,q2,result", "no,no,r3", "no,si,r3", "si,no,r1", "si,si,r1"]


def test_summary(kb):
    crops = fitodx.summary(kb)["crops"]
    assert [c["module"] for c in crops] == CROPS
    assert [len(c["diagnoses"]) for c in crops] == [5, 3, 8, 7, 9, 5, 6]
