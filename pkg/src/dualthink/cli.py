"""Command-line front end.

Subcommands: ``ask`` (one question), ``bench`` (score a dataset),
``ablate`` (preset sweep), ``index build`` (build a retrieval snapshot),
``trace show`` (pretty-print a saved trace). Settings merge as
flag > config file > built-in default; the config file is INI-style with
[backend], [pipeline], [retrieval], [dataset], and [run] sections.

Exit codes: 0 success, 1 a question failed at runtime, 2 bad usage or
configuration.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .backend import BackendSpec, LLMBackend
from .dataset import DatasetSpec, load_dataset
from .engine import Engine
from .errors import BackendError, DualThinkError, ParseError
from .presets import DUAL_PRESET_NAME, ablation_presets, preset, preset_names
from .prompts import PromptLibrary
from .retrieval import BM25Index, build_index_from_corpus
from .runner import (
    ablation_sweep,
    accuracy_vs_tokens,
    run_benchmark,
    stratified_trigger_report,
    write_ablation_csv,
    write_accuracy_vs_tokens_csv,
    write_stratified_csv,
)
from .types import PipelineConfig, Question

logger = logging.getLogger(__name__)

_USAGE_EXIT = 2
_RUNTIME_EXIT = 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = _Settings.load(args)
        return args.handler(args, settings)
    except (ParseError, BackendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _RUNTIME_EXIT
    except DualThinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_EXIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualthink",
        description="Two-speed question answering: quick pass, reflection "
        "gate, and an ablatable deliberation pipeline.",
    )
    parser.add_argument("--config", help="INI config file")
    parser.add_argument("--log-level", default="warning", help="logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    ask = sub.add_parser("ask", help="answer a single question")
    ask.add_argument("question", help="the question text")
    ask.add_argument(
        "--option",
        action="append",
        default=[],
        metavar="LABEL=TEXT",
        help="multiple-choice option; repeat per option",
    )
    ask.add_argument("--trace", help="write the reasoning trace JSON here")
    _add_pipeline_flags(ask)
    _add_backend_flags(ask)
    _add_retrieval_flags(ask)
    ask.set_defaults(handler=_cmd_ask)

    bench = sub.add_parser("bench", help="run and score a dataset")
    bench.add_argument("--dataset", help="JSONL dataset path")
    bench.add_argument("--dataset-kind", choices=["auto", "mcq", "open"])
    bench.add_argument("--limit", type=int, help="use only the first N questions")
    bench.add_argument("--shuffle-seed", type=int, help="shuffle before limiting")
    bench.add_argument("--out", help="run directory (enables resume)")
    bench.add_argument("--name", help="run name for the report")
    bench.add_argument("--parallelism", type=int, help="concurrent questions")
    bench.add_argument(
        "--stratified",
        action="store_true",
        help="also print accuracy by difficulty and answering system",
    )
    _add_pipeline_flags(bench)
    _add_backend_flags(bench)
    _add_retrieval_flags(bench)
    bench.set_defaults(handler=_cmd_bench)

    ablate = sub.add_parser("ablate", help="run every preset over a dataset")
    ablate.add_argument("--dataset", help="JSONL dataset path")
    ablate.add_argument("--dataset-kind", choices=["auto", "mcq", "open"])
    ablate.add_argument("--limit", type=int)
    ablate.add_argument("--shuffle-seed", type=int)
    ablate.add_argument("--out", help="sweep directory")
    ablate.add_argument("--parallelism", type=int)
    ablate.add_argument(
        "--presets",
        help="comma-separated preset names (default: the eight ablation rows)",
    )
    _add_pipeline_flags(ablate, with_preset=False)
    _add_backend_flags(ablate)
    _add_retrieval_flags(ablate)
    ablate.set_defaults(handler=_cmd_ablate)

    index = sub.add_parser("index", help="retrieval index maintenance")
    index_sub = index.add_subparsers(dest="index_command", required=True)
    build = index_sub.add_parser("build", help="build a BM25 snapshot from a corpus")
    build.add_argument("--corpus", required=True, help="JSONL corpus path")
    build.add_argument("--out", required=True, help="snapshot output path")
    build.add_argument("--k1", type=float, default=1.2)
    build.add_argument("--b", type=float, default=0.75)
    build.set_defaults(handler=_cmd_index_build)

    trace = sub.add_parser("trace", help="inspect saved traces")
    trace_sub = trace.add_subparsers(dest="trace_command", required=True)
    show = trace_sub.add_parser("show", help="pretty-print a trace JSON file")
    show.add_argument("path", help="trace file written by ask/bench")
    show.add_argument("--full", action="store_true", help="print whole completions")
    show.set_defaults(handler=_cmd_trace_show)

    return parser


def _add_pipeline_flags(cmd: argparse.ArgumentParser, with_preset: bool = True) -> None:
    if with_preset:
        cmd.add_argument("--preset", help=f"one of: {', '.join(preset_names())}")
    cmd.add_argument("--force-system2", action="store_true", default=None)
    cmd.add_argument("--k", type=int, dest="k_retrieval", help="documents per query")
    cmd.add_argument("--max-subquestions", type=int)
    cmd.add_argument("--max-hypotheses", type=int)
    cmd.add_argument("--max-parse-retries", type=int)
    cmd.add_argument("--temperature", type=float)
    cmd.add_argument("--max-tokens", type=int)
    cmd.add_argument("--prompt-dir", help="directory of per-agent prompt overrides")


def _add_backend_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--backend", choices=["http", "scripted"], dest="backend_kind")
    cmd.add_argument("--endpoint", help="chat-completions API base URL")
    cmd.add_argument("--model")
    cmd.add_argument("--api-key-env", help="env var holding the API key")
    cmd.add_argument("--timeout", type=float)
    cmd.add_argument("--script", help="scripted-backend completions JSON")


def _add_retrieval_flags(cmd: argparse.ArgumentParser) -> None:
    cmd.add_argument("--index", dest="index_path", help="BM25 snapshot to load")
    cmd.add_argument("--corpus", dest="corpus_path", help="JSONL corpus to index on the fly")


class _Settings:
    """Config-file values, already typed; flags override at use sites."""

    def __init__(self, config: configparser.ConfigParser):
        self._config = config

    @classmethod
    def load(cls, args: argparse.Namespace) -> "_Settings":
        config = configparser.ConfigParser()
        path = getattr(args, "config", None)
        if path:
            if not Path(path).is_file():
                raise DualThinkError(f"config file not found: {path}")
            config.read(path, encoding="utf-8")
        return cls(config)

    def get(self, section: str, key: str, fallback: Any = None) -> Any:
        return self._config.get(section, key, fallback=fallback)

    def getint(self, section: str, key: str) -> int | None:
        value = self.get(section, key)
        return int(value) if value not in (None, "") else None

    def getfloat(self, section: str, key: str) -> float | None:
        value = self.get(section, key)
        return float(value) if value not in (None, "") else None

    def getbool(self, section: str, key: str) -> bool | None:
        value = self.get(section, key)
        if value in (None, ""):
            return None
        return self._config.getboolean(section, key)


def _pick(*values: Any) -> Any:
    """First value that is not None."""
    for value in values:
        if value is not None:
            return value
    return None


def _resolve_pipeline(args: argparse.Namespace, settings: _Settings) -> PipelineConfig:
    preset_name = _pick(
        getattr(args, "preset", None),
        settings.get("pipeline", "preset"),
        DUAL_PRESET_NAME,
    )
    config = preset(preset_name)
    overrides: dict[str, Any] = {}
    force = _pick(args.force_system2, settings.getbool("pipeline", "force_system2"))
    if force is not None:
        overrides["force_system2"] = force
    for attr, getter in (
        ("k_retrieval", settings.getint),
        ("max_subquestions", settings.getint),
        ("max_hypotheses", settings.getint),
        ("max_parse_retries", settings.getint),
        ("temperature", settings.getfloat),
        ("max_tokens", settings.getint),
    ):
        value = _pick(getattr(args, attr, None), getter("pipeline", attr))
        if value is not None:
            overrides[attr] = value
    if overrides:
        config = dataclasses.replace(config, **overrides)
    config.validate()
    return config


def _resolve_backend(args: argparse.Namespace, settings: _Settings) -> LLMBackend:
    spec = BackendSpec(
        kind=_pick(args.backend_kind, settings.get("backend", "kind"), "http"),
        endpoint=_pick(args.endpoint, settings.get("backend", "endpoint"), ""),
        model=_pick(args.model, settings.get("backend", "model"), ""),
        api_key_env=_pick(
            args.api_key_env, settings.get("backend", "api_key_env"), "LLM_API_KEY"
        ),
        timeout=_pick(args.timeout, settings.getfloat("backend", "timeout"), 60.0),
        max_attempts=_pick(settings.getint("backend", "max_attempts"), 3),
        script_path=_pick(args.script, settings.get("backend", "script"), ""),
    )
    return spec.build()


def _resolve_retriever(args: argparse.Namespace, settings: _Settings) -> BM25Index | None:
    index_path = _pick(args.index_path, settings.get("retrieval", "index"))
    corpus_path = _pick(args.corpus_path, settings.get("retrieval", "corpus"))
    if index_path:
        return BM25Index.load(index_path)
    if corpus_path:
        k1 = _pick(settings.getfloat("retrieval", "k1"), 1.2)
        b = _pick(settings.getfloat("retrieval", "b"), 0.75)
        return build_index_from_corpus(corpus_path, k1=k1, b=b)
    return None


def _resolve_prompts(args: argparse.Namespace, settings: _Settings) -> PromptLibrary:
    prompt_dir = _pick(getattr(args, "prompt_dir", None), settings.get("run", "prompt_dir"))
    if prompt_dir:
        return PromptLibrary.from_dir(prompt_dir)
    return PromptLibrary.default()


def _resolve_dataset(args: argparse.Namespace, settings: _Settings) -> list[Question]:
    path = _pick(args.dataset, settings.get("dataset", "path"))
    if not path:
        raise DualThinkError("no dataset given (use --dataset or [dataset] path)")
    spec = DatasetSpec(
        path=path,
        kind=_pick(args.dataset_kind, settings.get("dataset", "kind"), "auto"),
        limit=_pick(args.limit, settings.getint("dataset", "limit")),
        shuffle_seed=_pick(args.shuffle_seed, settings.getint("dataset", "shuffle_seed")),
    )
    return load_dataset(spec)


# --- subcommand handlers ---------------------------------------------------


def _cmd_ask(args: argparse.Namespace, settings: _Settings) -> int:
    options = []
    for item in args.option:
        label, sep, text = item.partition("=")
        if not sep or not label.strip():
            raise DualThinkError(f"--option must look like LABEL=TEXT, got {item!r}")
        options.append((label.strip(), text.strip()))
    question = Question(id="cli", text=args.question, options=tuple(options))
    config = _resolve_pipeline(args, settings)
    engine = Engine(
        _resolve_backend(args, settings),
        retriever=_resolve_retriever(args, settings),
        prompts=_resolve_prompts(args, settings),
    )
    result = engine.answer(question, config)
    if args.trace:
        Path(args.trace).write_text(
            json.dumps(result.trace.to_dict(), indent=2), encoding="utf-8"
        )
    mode = "system 2" if result.trace.system2_triggered else "system 1"
    if result.chosen_option is not None:
        print(f"{result.chosen_option}: {result.final_answer}")
    else:
        print(result.final_answer)
    print(
        f"[{mode}; {result.trace.total_usage.prompt_tokens} prompt + "
        f"{result.trace.total_usage.completion_tokens} completion tokens]",
        file=sys.stderr,
    )
    return 0


def _cmd_bench(args: argparse.Namespace, settings: _Settings) -> int:
    questions = _resolve_dataset(args, settings)
    config = _resolve_pipeline(args, settings)
    report = run_benchmark(
        questions,
        config,
        _resolve_backend(args, settings),
        _resolve_retriever(args, settings),
        parallelism=_pick(args.parallelism, settings.getint("run", "parallelism"), 1),
        out_dir=_pick(args.out, settings.get("run", "out")),
        name=_pick(args.name, settings.get("run", "name"), "run"),
        prompts=_resolve_prompts(args, settings),
    )
    print(f"{report.name}: {len(report.results)} questions ({report.kind})")
    if report.kind == "mcq":
        print(f"accuracy: {report.accuracy_pct:.2f}%")
    else:
        print(f"accuracy: {report.accuracy_pct:.2f}%  EM: {report.em_pct:.2f}  F1: {report.f1_pct:.2f}")
    triggered = sum(1 for r in report.results if r.system2_triggered)
    print(f"system 2 triggered on {triggered}/{len(report.results)}")
    usage = report.total_usage
    print(f"tokens: {usage.prompt_tokens} prompt + {usage.completion_tokens} completion")
    if args.stratified:
        rows = stratified_trigger_report(report.results)
        print()
        print(f"{'difficulty':<12} {'mode':<9} {'correct':>7} {'incorrect':>9} {'acc%':>7}")
        for row in rows:
            print(
                f"{row.difficulty.value:<12} {row.mode:<9} {row.correct:>7} "
                f"{row.incorrect:>9} {row.accuracy_pct:>7.2f}"
            )
        out = _pick(args.out, settings.get("run", "out"))
        if out:
            write_stratified_csv(rows, Path(out) / "stratified.csv")
    if report.errored:
        print(f"{len(report.errored)} question(s) errored", file=sys.stderr)
        return _RUNTIME_EXIT
    return 0


def _cmd_ablate(args: argparse.Namespace, settings: _Settings) -> int:
    questions = _resolve_dataset(args, settings)
    if args.presets:
        chosen = [(name.strip(), preset(name.strip())) for name in args.presets.split(",")]
    else:
        chosen = ablation_presets()
    backend = _resolve_backend(args, settings)
    rows = ablation_sweep(
        questions,
        backend,
        _resolve_retriever(args, settings),
        presets=chosen,
        out_dir=_pick(args.out, settings.get("run", "out")),
        parallelism=_pick(args.parallelism, settings.getint("run", "parallelism"), 1),
        prompts=_resolve_prompts(args, settings),
    )
    width = max(len(name) for name, _ in rows)
    print(f"{'preset':<{width}} {'acc%':>7} {'tokens/q':>9}")
    for name, report in rows:
        print(
            f"{name:<{width}} {report.accuracy_pct:>7.2f} "
            f"{report.mean_completion_tokens:>9.1f}"
        )
    out = _pick(args.out, settings.get("run", "out"))
    if out:
        write_ablation_csv(rows, Path(out) / "ablation.csv")
        write_accuracy_vs_tokens_csv(
            accuracy_vs_tokens(rows), Path(out) / "accuracy_vs_tokens.csv"
        )
    if any(report.errored for _, report in rows):
        print("some questions errored", file=sys.stderr)
        return _RUNTIME_EXIT
    return 0


def _cmd_index_build(args: argparse.Namespace, settings: _Settings) -> int:
    index = build_index_from_corpus(args.corpus, k1=args.k1, b=args.b)
    index.save(args.out)
    print(f"indexed {len(index.docs)} documents -> {args.out}")
    return 0


def _cmd_trace_show(args: argparse.Namespace, settings: _Settings) -> int:
    try:
        trace = json.loads(Path(args.path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise DualThinkError(f"cannot read trace {args.path}: {exc}") from exc
    usage = trace.get("total_usage", {})
    print(f"question: {trace.get('question_id')}")
    print(f"system 2 triggered: {trace.get('system2_triggered')}")
    print(f"final answer: {trace.get('final_answer')}")
    if trace.get("chosen_option"):
        print(f"chosen option: {trace['chosen_option']}")
    print(
        f"tokens: {usage.get('prompt_tokens', 0)} prompt + "
        f"{usage.get('completion_tokens', 0)} completion"
    )
    for i, step in enumerate(trace.get("steps", []), start=1):
        status = "ok" if step.get("parsed") is not None else "parse failed"
        step_usage = step.get("usage", {})
        print()
        print(
            f"[{i}] {step.get('agent')} (attempt {step.get('attempt')}, {status}, "
            f"{step_usage.get('prompt_tokens', 0)}+{step_usage.get('completion_tokens', 0)} tokens)"
        )
        completion = step.get("completion", "")
        if not args.full and len(completion) > 400:
            completion = completion[:400] + " ...[truncated; use --full]"
        for line in completion.splitlines():
            print(f"    {line}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
