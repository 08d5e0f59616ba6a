"""Fixed render inputs for the prompt snapshot tests.

Run this module directly to regenerate tests/data/golden_prompts/ after an
intentional template change:

    python3 tests/golden_cases.py
"""

from __future__ import annotations

from pathlib import Path

from dualthink.prompts import PromptLibrary, quote_injected
from dualthink.types import Agent

QUESTION = "Which gas makes up most of the air?"

RENDER_VALUES: dict[Agent, dict[str, str]] = {
    Agent.QUICK: {"question": QUESTION, "answer_hint": ""},
    Agent.REFLECTION: {
        "question": QUESTION,
        "quick_trace": quote_injected(
            "SQ1: What are the main gases in air?\n"
            "SA1: Nitrogen and oxygen.\n"
            "ANSWER: nitrogen",
            1500,
        ),
    },
    Agent.PLANNING: {
        "question": QUESTION,
        "max_subquestions": "5",
        "prior_context": "",
    },
    Agent.SEARCH: {
        "question": QUESTION,
        "subquestions": "P1: What fraction of air is nitrogen?",
    },
    Agent.READING: {
        "question": QUESTION,
        "material": (
            "P1: What fraction of air is nitrogen?\n"
            "[d1]\n" + quote_injected("Nitrogen makes up 78 percent of air.", 1500)
        ),
    },
    Agent.HYPOTHESIS: {
        "question": QUESTION,
        "hypothesis_brief": (
            "State between 1 and 4 distinct candidate answers as hypotheses. "
            "Omit OPTION lines."
        ),
    },
    Agent.INTEGRATION: {
        "question": QUESTION,
        "hypotheses": "H1: Nitrogen is the most abundant gas in air.",
        "evidence": "K1 (for P1; from d1):\n"
        + quote_injected("Nitrogen makes up 78 percent of air.", 1500),
    },
    Agent.DECISION: {
        "question": QUESTION,
        "context": "(none; answer directly)",
        "ranking_instruction": "",
        "answer_hint": "",
    },
}

GOLDEN_DIR = Path(__file__).parent / "data" / "golden_prompts"


def render_all() -> dict[Agent, str]:
    library = PromptLibrary.default()
    rendered = {}
    for agent, values in RENDER_VALUES.items():
        system_text, user_text = library.get(agent).render(**values)
        rendered[agent] = system_text + "\n=====\n" + user_text
    return rendered


def main() -> None:
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    for agent, text in render_all().items():
        (GOLDEN_DIR / f"{agent.value}.txt").write_text(text, encoding="utf-8")
        print(f"wrote {agent.value}.txt")


if __name__ == "__main__":
    main()
