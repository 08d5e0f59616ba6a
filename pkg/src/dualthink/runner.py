"""Benchmark harness: scoring, resumable runs, and report tables.

A run directory is append-only and self-describing: ``config.json`` pins the
pipeline configuration (rerunning with a different one is an error),
``results.jsonl`` grows one line per finished question, ``traces/`` holds
the full reasoning trace per question, and ``report.json``/``report.csv``
are rewritten at the end. Rerunning skips questions already present in
``results.jsonl``.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .backend import LLMBackend
from .engine import Engine
from .errors import BackendError, ConfigError, ParseError
from .metrics import exact_match, f1
from .presets import ablation_presets
from .prompts import PromptLibrary
from .retrieval import Retriever
from .types import (
    DIFFICULTY_ORDER,
    Difficulty,
    PipelineConfig,
    Question,
    QuestionKind,
    TokenUsage,
    to_jsonable,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuestionResult:
    """Scored outcome for one question; ``error`` is set when it crashed."""

    question_id: str
    predicted: str | None
    gold: str | None
    kind: QuestionKind
    correct: bool | None
    em: float | None
    f1: float | None
    system2_triggered: bool
    usage: TokenUsage
    difficulty: Difficulty | None = None
    trace_path: str | None = None
    error: str | None = None
    usage_estimated: bool = False

    def to_dict(self) -> dict[str, Any]:
        return to_jsonable(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QuestionResult":
        usage = data.get("usage") or {}
        return cls(
            question_id=data["question_id"],
            predicted=data.get("predicted"),
            gold=data.get("gold"),
            kind=QuestionKind(data["kind"]),
            correct=data.get("correct"),
            em=data.get("em"),
            f1=data.get("f1"),
            system2_triggered=bool(data["system2_triggered"]),
            usage=TokenUsage(
                int(usage.get("prompt_tokens", 0)),
                int(usage.get("completion_tokens", 0)),
            ),
            difficulty=Difficulty(data["difficulty"]) if data.get("difficulty") else None,
            trace_path=data.get("trace_path"),
            error=data.get("error"),
            usage_estimated=bool(data.get("usage_estimated", False)),
        )


def _pct(numerator: float, denominator: float) -> float:
    return round(100.0 * numerator / denominator, 2) if denominator else 0.0


@dataclass
class Report:
    """Aggregates over a finished (or resumed) run."""

    name: str
    config: PipelineConfig
    results: list[QuestionResult] = field(default_factory=list)

    @property
    def scored(self) -> list[QuestionResult]:
        return [r for r in self.results if r.correct is not None]

    @property
    def errored(self) -> list[QuestionResult]:
        return [r for r in self.results if r.error is not None]

    @property
    def accuracy_pct(self) -> float:
        scored = self.scored
        return _pct(sum(1 for r in scored if r.correct), len(scored))

    @property
    def em_pct(self) -> float:
        scored = [r for r in self.scored if r.em is not None]
        return _pct(sum(r.em for r in scored), len(scored))

    @property
    def f1_pct(self) -> float:
        scored = [r for r in self.scored if r.f1 is not None]
        return _pct(sum(r.f1 for r in scored), len(scored))

    @property
    def total_usage(self) -> TokenUsage:
        total = TokenUsage()
        for result in self.results:
            total = total + result.usage
        return total

    @property
    def mean_completion_tokens(self) -> float:
        if not self.results:
            return 0.0
        return self.total_usage.completion_tokens / len(self.results)

    @property
    def kind(self) -> str:
        kinds = {r.kind for r in self.results}
        if kinds == {QuestionKind.MCQ}:
            return "mcq"
        if kinds == {QuestionKind.OPEN}:
            return "open"
        return "mixed" if kinds else "empty"

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "config": self.config.to_dict(),
            "questions": len(self.results),
            "errored": len(self.errored),
            "accuracy_pct": self.accuracy_pct,
            "em_pct": self.em_pct,
            "f1_pct": self.f1_pct,
            "total_prompt_tokens": self.total_usage.prompt_tokens,
            "total_completion_tokens": self.total_usage.completion_tokens,
            "mean_completion_tokens": round(self.mean_completion_tokens, 2),
            "usage_estimated": any(r.usage_estimated for r in self.results),
            "results": [r.to_dict() for r in self.results],
        }


def score_result(
    question: Question,
    predicted: str,
    chosen_option: str | None,
    system2_triggered: bool,
    usage: TokenUsage,
    trace_path: str | None = None,
    usage_estimated: bool = False,
) -> QuestionResult:
    """Score one answered question against its gold."""
    correct: bool | None = None
    em_score: float | None = None
    f1_score: float | None = None
    if question.kind is QuestionKind.MCQ:
        if question.gold is not None:
            correct = chosen_option == question.gold
    elif question.gold_aliases:
        em_score = exact_match(predicted, question.gold_aliases)
        f1_score = f1(predicted, question.gold_aliases)
        correct = em_score == 1.0
    return QuestionResult(
        question_id=question.id,
        predicted=chosen_option if question.kind is QuestionKind.MCQ else predicted,
        gold=question.gold,
        kind=question.kind,
        correct=correct,
        em=em_score,
        f1=f1_score,
        system2_triggered=system2_triggered,
        usage=usage,
        difficulty=question.difficulty,
        trace_path=trace_path,
        usage_estimated=usage_estimated,
    )


def run_benchmark(
    questions: Sequence[Question],
    config: PipelineConfig,
    backend: LLMBackend,
    retriever: Retriever | None = None,
    *,
    parallelism: int = 1,
    out_dir: str | Path | None = None,
    name: str = "run",
    prompts: PromptLibrary | None = None,
) -> Report:
    """Answer and score every question, resuming from ``out_dir`` if present."""
    config.validate()
    if parallelism < 1:
        raise ConfigError(f"parallelism must be >= 1, got {parallelism}")
    ids = [q.id for q in questions]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ConfigError(f"duplicate question ids: {dupes}")

    existing: dict[str, QuestionResult] = {}
    results_path = traces_dir = None
    if out_dir is not None:
        out_path = Path(out_dir)
        out_path.mkdir(parents=True, exist_ok=True)
        traces_dir = out_path / "traces"
        traces_dir.mkdir(exist_ok=True)
        _check_config_snapshot(out_path / "config.json", config)
        results_path = out_path / "results.jsonl"
        if results_path.exists():
            for line in results_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    result = QuestionResult.from_dict(json.loads(line))
                    existing[result.question_id] = result
            if existing:
                logger.info("resuming: %d results already on disk", len(existing))

    engine = Engine(backend, retriever=retriever, prompts=prompts)
    todo = [q for q in questions if q.id not in existing]
    write_lock = threading.Lock()

    def answer_one(question: Question) -> QuestionResult:
        trace_path = str(traces_dir / f"{question.id}.json") if traces_dir else None
        try:
            outcome = engine.answer(question, config)
        except (ParseError, BackendError) as exc:
            logger.error("question %s failed: %s", question.id, exc)
            failed_agent = getattr(exc, "agent", None)
            triggered = (
                config.force_system2
                or not config.system1_enabled
                or (failed_agent is not None and failed_agent not in ("quick", "reflection"))
            )
            open_scored = question.kind is QuestionKind.OPEN and bool(question.gold_aliases)
            result = QuestionResult(
                question_id=question.id,
                predicted=None,
                gold=question.gold,
                kind=question.kind,
                correct=False if question.gold or question.gold_aliases else None,
                em=0.0 if open_scored else None,
                f1=0.0 if open_scored else None,
                system2_triggered=triggered,
                usage=TokenUsage(),
                difficulty=question.difficulty,
                error=str(exc),
            )
        else:
            if trace_path:
                Path(trace_path).write_text(
                    json.dumps(outcome.trace.to_dict(), indent=2), encoding="utf-8"
                )
            result = score_result(
                question,
                outcome.final_answer,
                outcome.chosen_option,
                outcome.trace.system2_triggered,
                outcome.trace.total_usage,
                trace_path=trace_path,
                usage_estimated=any(s.usage_estimated for s in outcome.trace.steps),
            )
        if results_path:
            with write_lock:
                with results_path.open("a", encoding="utf-8") as handle:
                    handle.write(json.dumps(result.to_dict()) + "\n")
        return result

    fresh: list[QuestionResult]
    if parallelism == 1 or len(todo) <= 1:
        fresh = [answer_one(q) for q in todo]
    else:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            fresh = list(pool.map(answer_one, todo))

    all_results = sorted(
        list(existing.values()) + fresh, key=lambda r: r.question_id
    )
    report = Report(name=name, config=config, results=all_results)
    if out_dir is not None:
        write_report(report, Path(out_dir))
    return report


def _check_config_snapshot(path: Path, config: PipelineConfig) -> None:
    snapshot = config.to_dict()
    if path.exists():
        on_disk = json.loads(path.read_text(encoding="utf-8"))
        if on_disk != snapshot:
            raise ConfigError(
                f"{path} holds a different configuration; "
                "use a fresh output directory or the original config"
            )
    else:
        path.write_text(json.dumps(snapshot, indent=2), encoding="utf-8")


def write_report(report: Report, out_dir: Path) -> None:
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2), encoding="utf-8"
    )
    with (out_dir / "report.csv").open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(
            [
                "question_id",
                "kind",
                "predicted",
                "gold",
                "correct",
                "em",
                "f1",
                "system2_triggered",
                "prompt_tokens",
                "completion_tokens",
                "difficulty",
                "error",
            ]
        )
        for r in report.results:
            writer.writerow(
                [
                    r.question_id,
                    r.kind.value,
                    r.predicted if r.predicted is not None else "",
                    r.gold if r.gold is not None else "",
                    "" if r.correct is None else str(r.correct).lower(),
                    "" if r.em is None else r.em,
                    "" if r.f1 is None else r.f1,
                    str(r.system2_triggered).lower(),
                    r.usage.prompt_tokens,
                    r.usage.completion_tokens,
                    r.difficulty.value if r.difficulty else "",
                    r.error or "",
                ]
            )


# --- stratified trigger table -------------------------------------------


@dataclass(frozen=True)
class StratumRow:
    difficulty: Difficulty
    mode: str
    correct: int
    incorrect: int

    @property
    def accuracy_pct(self) -> float:
        return _pct(self.correct, self.correct + self.incorrect)


def stratified_trigger_report(results: Iterable[QuestionResult]) -> list[StratumRow]:
    """Accuracy broken down by difficulty and which system answered.

    Every result needs a difficulty and a scoreable outcome; strata with no
    questions are omitted.
    """
    counts: dict[tuple[Difficulty, str], list[int]] = {}
    for result in results:
        if result.difficulty is None:
            raise ConfigError(
                f"question {result.question_id} has no difficulty; "
                "a stratified report needs one on every question"
            )
        if result.correct is None:
            raise ConfigError(
                f"question {result.question_id} has no gold answer; cannot stratify"
            )
        mode = "System 2" if result.system2_triggered else "System 1"
        cell = counts.setdefault((result.difficulty, mode), [0, 0])
        cell[0 if result.correct else 1] += 1
    rows = []
    for difficulty in DIFFICULTY_ORDER:
        for mode in ("System 1", "System 2"):
            if (difficulty, mode) in counts:
                correct, incorrect = counts[(difficulty, mode)]
                rows.append(StratumRow(difficulty, mode, correct, incorrect))
    return rows


def write_stratified_csv(rows: Sequence[StratumRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["difficulty", "mode", "correct", "incorrect", "accuracy_pct"])
        for row in rows:
            writer.writerow(
                [row.difficulty.value, row.mode, row.correct, row.incorrect, row.accuracy_pct]
            )


# --- ablation sweep -------------------------------------------------------


def ablation_sweep(
    questions: Sequence[Question],
    backend: LLMBackend | Callable[[str], LLMBackend],
    retriever: Retriever | None = None,
    presets: Sequence[tuple[str, PipelineConfig]] | None = None,
    *,
    out_dir: str | Path | None = None,
    parallelism: int = 1,
    prompts: PromptLibrary | None = None,
) -> list[tuple[str, Report]]:
    """Run every preset over the same questions; one report per preset.

    ``backend`` may be a factory taking the preset name, so scripted
    backends get a fresh script per configuration.
    """
    rows = []
    for preset_name, config in presets if presets is not None else ablation_presets():
        preset_backend = backend(preset_name) if callable(backend) else backend
        run_dir = None
        if out_dir is not None:
            run_dir = Path(out_dir) / _slug(preset_name)
        report = run_benchmark(
            questions,
            config,
            preset_backend,
            retriever,
            parallelism=parallelism,
            out_dir=run_dir,
            name=preset_name,
            prompts=prompts,
        )
        rows.append((preset_name, report))
    return rows


def _slug(name: str) -> str:
    cleaned = "".join(ch.lower() if ch.isalnum() else "-" for ch in name)
    while "--" in cleaned:
        cleaned = cleaned.replace("--", "-")
    return cleaned.strip("-")


def write_ablation_csv(rows: Sequence[tuple[str, Report]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["preset", "questions", "accuracy_pct", "em_pct", "f1_pct"])
        for name, report in rows:
            writer.writerow(
                [name, len(report.results), report.accuracy_pct, report.em_pct, report.f1_pct]
            )


# --- cost/quality tradeoff -------------------------------------------------


def accuracy_vs_tokens(
    reports: Sequence[tuple[str, Report]],
) -> list[tuple[str, float, float]]:
    """(name, mean completion tokens per question, accuracy_pct) per report."""
    rows = []
    for name, report in reports:
        if not report.results:
            logger.warning("report %r has no questions; skipping", name)
            continue
        rows.append((name, round(report.mean_completion_tokens, 2), report.accuracy_pct))
    return rows


def write_accuracy_vs_tokens_csv(
    rows: Sequence[tuple[str, float, float]], path: str | Path
) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["name", "mean_completion_tokens", "accuracy_pct"])
        for name, tokens, accuracy in rows:
            writer.writerow([name, tokens, accuracy])
