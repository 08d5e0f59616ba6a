import csv
import dataclasses
import json

import pytest

from dualthink.backend import ScriptEntry, ScriptedBackend
from dualthink.errors import ConfigError
from dualthink.presets import preset
from dualthink.runner import (
    QuestionResult,
    Report,
    ablation_sweep,
    run_benchmark,
    score_result,
)
from dualthink.types import (
    Difficulty,
    PipelineConfig,
    Question,
    QuestionKind,
    TokenUsage,
)

from scripting import entries_for_many, quick_completion

S1_ONLY = PipelineConfig(stages=frozenset(), reflection_enabled=False)


def make_mcq(i, gold="A", difficulty=None):
    return Question(
        id=f"q{i:02d}",
        text=f"Test question number {i}, which letter?",
        options=(("A", "first"), ("B", "second")),
        gold=gold,
        difficulty=difficulty,
    )


def make_open(i, aliases, text=None):
    return Question(
        id=f"q{i:02d}",
        text=text or f"Open question number {i}?",
        gold=aliases[0],
        gold_aliases=tuple(aliases),
    )


# --- scoring ----------------------------------------------------------------


def test_mcq_scoring_compares_option_labels():
    question = make_mcq(1, gold="B")
    hit = score_result(question, "B", "B", False, TokenUsage(10, 5))
    miss = score_result(question, "A", "A", True, TokenUsage(10, 5))
    assert hit.correct is True and miss.correct is False
    assert hit.predicted == "B"
    assert hit.em is None and hit.f1 is None
    assert miss.system2_triggered is True


def test_open_scoring_uses_normalized_match_and_overlap():
    question = make_open(1, ["city of paris", "paris"])
    exact = score_result(question, "The City of Paris", None, False, TokenUsage())
    assert exact.correct is True and exact.em == 1.0 and exact.f1 == 1.0
    partial = score_result(question, "paris region", None, False, TokenUsage())
    assert partial.correct is False and partial.em == 0.0
    assert partial.f1 == pytest.approx(2 / 3)


def test_question_without_gold_stays_unscored():
    question = Question(id="q1", text="ungraded?")
    result = score_result(question, "anything", None, False, TokenUsage())
    assert result.correct is None and result.em is None and result.f1 is None


def test_question_result_round_trips_through_json():
    question = make_mcq(7, gold="A", difficulty=Difficulty.HARD)
    result = score_result(
        question, "A", "A", True, TokenUsage(120, 40), trace_path="traces/q07.json"
    )
    revived = QuestionResult.from_dict(json.loads(json.dumps(result.to_dict())))
    assert revived == result


# --- whole runs -------------------------------------------------------------


def test_seven_of_ten_is_seventy_percent():
    questions = [make_mcq(i, gold="A") for i in range(1, 11)]
    answers = {q.id: ("A" if i <= 7 else "B") for i, q in enumerate(questions, start=1)}
    backend = ScriptedBackend(entries_for_many(questions, S1_ONLY, answers))
    report = run_benchmark(questions, S1_ONLY, backend)
    assert backend.remaining == 0
    assert len(report.results) == 10
    assert report.accuracy_pct == 70.00
    assert report.kind == "mcq"
    assert not report.errored


def test_report_aggregates_open_metrics():
    questions = [
        make_open(1, ["nitrogen"], text="Which gas dominates air?"),
        make_open(2, ["oxygen"], text="Which gas do we breathe for energy?"),
    ]
    answers = {"q01": "nitrogen", "q02": "carbon dioxide"}
    backend = ScriptedBackend(entries_for_many(questions, S1_ONLY, answers))
    report = run_benchmark(questions, S1_ONLY, backend)
    assert report.kind == "open"
    assert report.accuracy_pct == 50.0
    assert report.em_pct == 50.0
    assert 0.0 < report.f1_pct <= 100.0
    total = report.total_usage
    assert total.completion_tokens == sum(r.usage.completion_tokens for r in report.results)
    assert report.mean_completion_tokens == total.completion_tokens / 2


def test_duplicate_question_ids_are_rejected():
    questions = [make_mcq(1), make_mcq(1)]
    with pytest.raises(ConfigError, match="duplicate"):
        run_benchmark(questions, S1_ONLY, ScriptedBackend([]))


def test_parallel_run_routes_by_question_text():
    questions = [make_open(i, [f"answer {i}"], text=f"Unique text {i}?") for i in range(1, 7)]
    entries = [
        ScriptEntry(quick_completion(f"answer {i}"), matcher=f"Unique text {i}?")
        for i in range(1, 7)
    ]
    backend = ScriptedBackend(entries)
    report = run_benchmark(questions, S1_ONLY, backend, parallelism=3)
    assert backend.remaining == 0
    assert report.accuracy_pct == 100.0
    assert [r.question_id for r in report.results] == [f"q{i:02d}" for i in range(1, 7)]


def test_parallelism_must_be_positive():
    with pytest.raises(ConfigError):
        run_benchmark([make_mcq(1)], S1_ONLY, ScriptedBackend([]), parallelism=0)


# --- failures ----------------------------------------------------------------


def test_failed_question_is_recorded_not_raised():
    questions = [
        make_open(1, ["one"], text="First?"),
        make_open(2, ["two"], text="Second?"),
    ]
    entries = [ScriptEntry(quick_completion("one"), matcher="First?")]
    report = run_benchmark(questions, S1_ONLY, ScriptedBackend(entries))
    assert len(report.results) == 2
    failed = report.results[1]
    assert failed.error is not None
    assert failed.correct is False
    assert failed.em == 0.0 and failed.f1 == 0.0
    assert failed.usage == TokenUsage()
    assert failed.system2_triggered is False  # it died in the quick pass
    assert report.errored == [failed]
    assert report.accuracy_pct == 50.0


def test_failure_in_a_deliberation_stage_counts_as_system2():
    config = preset("System 2 (Hypothesis + Decision)")
    report = run_benchmark([make_mcq(1)], config, ScriptedBackend([]))
    assert report.results[0].error is not None
    assert report.results[0].system2_triggered is True


# --- run directories ----------------------------------------------------------


def test_out_dir_layout_and_sorting(tmp_path):
    questions = [make_mcq(i, gold="A") for i in (3, 1, 2)]
    answers = {q.id: "A" for q in questions}
    backend = ScriptedBackend(entries_for_many(questions, S1_ONLY, answers))
    out = tmp_path / "run"
    report = run_benchmark(questions, S1_ONLY, backend, out_dir=out, name="layout")
    assert (out / "config.json").is_file()
    assert (out / "results.jsonl").is_file()
    assert (out / "report.json").is_file()
    assert (out / "report.csv").is_file()
    for q in questions:
        trace_file = out / "traces" / f"{q.id}.json"
        assert trace_file.is_file()
        assert json.loads(trace_file.read_text(encoding="utf-8"))["question_id"] == q.id
    # aggregate view is sorted even though execution order was 3, 1, 2
    assert [r.question_id for r in report.results] == ["q01", "q02", "q03"]
    on_disk = json.loads((out / "report.json").read_text(encoding="utf-8"))
    assert on_disk["name"] == "layout"
    assert on_disk["accuracy_pct"] == 100.0
    with (out / "report.csv").open(encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0][0] == "question_id"
    assert [row[0] for row in rows[1:]] == ["q01", "q02", "q03"]


def test_resume_skips_questions_already_on_disk(tmp_path):
    questions = [make_mcq(i, gold="A") for i in range(1, 5)]
    answers = {q.id: "A" for q in questions}
    out = tmp_path / "run"

    first = ScriptedBackend(entries_for_many(questions[:2], S1_ONLY, answers))
    run_benchmark(questions[:2], S1_ONLY, first, out_dir=out)
    assert first.remaining == 0

    # the second script only covers q03 and q04; touching q01 or q02 again
    # would exhaust it and surface as an errored result
    second = ScriptedBackend(entries_for_many(questions[2:], S1_ONLY, answers))
    report = run_benchmark(questions, S1_ONLY, second, out_dir=out)
    assert second.remaining == 0
    assert len(report.results) == 4
    assert not report.errored
    assert report.accuracy_pct == 100.0
    lines = (out / "results.jsonl").read_text(encoding="utf-8").splitlines()
    assert len([line for line in lines if line.strip()]) == 4


def test_fully_resumed_run_makes_no_backend_calls(tmp_path):
    questions = [make_mcq(i, gold="A") for i in (1, 2)]
    answers = {q.id: "A" for q in questions}
    out = tmp_path / "run"
    run_benchmark(
        questions,
        S1_ONLY,
        ScriptedBackend(entries_for_many(questions, S1_ONLY, answers)),
        out_dir=out,
    )
    idle = ScriptedBackend([])
    report = run_benchmark(questions, S1_ONLY, idle, out_dir=out)
    assert idle.calls == []
    assert report.accuracy_pct == 100.0


def test_changed_config_is_rejected_for_an_existing_run_dir(tmp_path):
    questions = [make_mcq(1, gold="A")]
    out = tmp_path / "run"
    backend = ScriptedBackend(entries_for_many(questions, S1_ONLY, {"q01": "A"}))
    run_benchmark(questions, S1_ONLY, backend, out_dir=out)
    other = dataclasses.replace(S1_ONLY, max_parse_retries=5)
    with pytest.raises(ConfigError, match="different configuration"):
        run_benchmark(questions, other, ScriptedBackend([]), out_dir=out)


# --- ablation sweep -------------------------------------------------------------


def test_ablation_sweep_runs_each_preset_with_its_own_script(tmp_path):
    questions = [make_mcq(i, gold="A") for i in (1, 2)]
    answers = {q.id: "A" for q in questions}
    chosen = [
        ("System 1", preset("System 1")),
        ("System 2 (Hypothesis + Decision)", preset("System 2 (Hypothesis + Decision)")),
    ]
    built = {}

    def factory(name):
        config = dict(chosen)[name]
        built[name] = ScriptedBackend(entries_for_many(questions, config, answers))
        return built[name]

    rows = ablation_sweep(
        questions, factory, presets=chosen, out_dir=tmp_path / "sweep"
    )
    assert [name for name, _ in rows] == [name for name, _ in chosen]
    for name, report in rows:
        assert report.accuracy_pct == 100.0
        assert built[name].remaining == 0
    assert (tmp_path / "sweep" / "system-1" / "report.json").is_file()
    assert (
        tmp_path / "sweep" / "system-2-hypothesis-decision" / "report.json"
    ).is_file()


def test_empty_report_kind_and_rates():
    report = Report(name="empty", config=S1_ONLY)
    assert report.kind == "empty"
    assert report.accuracy_pct == 0.0
    assert report.mean_completion_tokens == 0.0
