"""Exact-match evaluation over prompt sets.

Answers are normalized (trim, strip one quote pair, drop one trailing
punctuation mark, collapse whitespace, case-fold by direction) and scored
hits@1 by byte equality. Strict mode keeps whatever the model said;
extract mode pulls the first substring matching the terminology's
identifier syntax before comparing, which isolates formatting failures
from knowledge failures.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import IO, Sequence

from .errors import DomainError, HarnessError, ParseError, TransportError
from .ontology import Terminology
from .prompts import Direction, PromptInstance
from .providers import CompletionProvider, DecodingParams

_QUOTE_PAIRS = {('"', '"'), ("'", "'"), ("“", "”"), ("‘", "’")}

_EXTRACT_PATTERNS = {
    Terminology.HPO: re.compile(r"HP:\d{7}", re.IGNORECASE),
    Terminology.GO_CC: re.compile(r"GO:\d{7}", re.IGNORECASE),
    # Case matters for gene symbols, so match against the raw string and
    # require non-wordish boundaries.
    Terminology.GENE: re.compile(r"(?<![A-Za-z0-9-])[A-Z][A-Z0-9-]*(?![A-Za-z0-9-])"),
}


def normalize_answer(
    raw: str,
    terminology: Terminology,
    direction: Direction,
    extract: bool = False,
) -> str:
    """Canonical form of a model answer (and of the expected answer)."""
    text = raw.strip()
    if len(text) >= 2 and (text[0], text[-1]) in _QUOTE_PAIRS:
        text = text[1:-1].strip()
    if text and text[-1] in ".,;":
        text = text[:-1].rstrip()
    text = re.sub(r"\s+", " ", text)
    if direction is Direction.ID_TO_TERM:
        return text.lower()
    if extract:
        match = _EXTRACT_PATTERNS[terminology].search(text)
        if match:
            text = match.group(0)
    return text.upper()


def score_item(normalized: str, expected_normalized: str) -> bool:
    """hits@1: exact byte equality of normalized strings."""
    return normalized == expected_normalized


class Phase(Enum):
    BASELINE = "baseline"
    FINETUNED = "finetuned"


@dataclass(frozen=True)
class EvalItem:
    pair_id: str
    direction: Direction
    template_id: int
    raw_output: str
    normalized_output: str
    correct: bool
    error: str | None = None


@dataclass(frozen=True)
class EvalRun:
    model_id: str
    terminology: Terminology
    direction: Direction
    phase: Phase
    items: tuple[EvalItem, ...]
    accuracy: float


class RunFailedError(TransportError):
    """Every item in a run failed; nothing was scored."""


def _evaluate_one(
    provider: CompletionProvider,
    prompt: PromptInstance,
    model_id: str,
    params: DecodingParams,
    extract: bool,
) -> EvalItem:
    terminology = prompt.pair.terminology
    expected = normalize_answer(prompt.expected_answer, terminology, prompt.direction,
                                extract=extract)
    try:
        raw = provider.complete(prompt.prompt_text, model_id, params)
    except HarnessError as exc:
        return EvalItem(
            pair_id=prompt.pair_id,
            direction=prompt.direction,
            template_id=prompt.template_id,
            raw_output="",
            normalized_output="",
            correct=False,
            error=str(exc),
        )
    normalized = normalize_answer(raw, terminology, prompt.direction, extract=extract)
    return EvalItem(
        pair_id=prompt.pair_id,
        direction=prompt.direction,
        template_id=prompt.template_id,
        raw_output=raw,
        normalized_output=normalized,
        correct=score_item(normalized, expected),
        error=None,
    )


def _vote_accuracy(items: Sequence[EvalItem], expected_by_pair: dict[str, str]) -> float:
    """Per-pair majority vote over templates; ties break to the smallest answer."""
    by_pair: dict[str, list[EvalItem]] = {}
    for item in items:
        by_pair.setdefault(item.pair_id, []).append(item)
    correct = 0
    for pid, group in by_pair.items():
        counts = Counter(i.normalized_output for i in group if i.error is None)
        if not counts:
            continue
        top = max(counts.values())
        winner = min(answer for answer, c in counts.items() if c == top)
        if winner == expected_by_pair[pid]:
            correct += 1
    return correct / len(by_pair)


def run_eval(
    provider: CompletionProvider,
    prompts: Sequence[PromptInstance],
    model_id: str,
    phase: Phase,
    concurrency_limit: int = 1,
    params: DecodingParams = DecodingParams(),
    extract: bool = False,
    vote_by_pair: bool = False,
) -> EvalRun:
    """Evaluate prompts against one model and score hits@1.

    Provider failures count as incorrect (with the error recorded on the
    item) so denominators always equal the prompt-set size. Items are
    ordered by (pair_id, template_id) no matter how completions are
    scheduled. With `vote_by_pair`, accuracy is computed on the per-pair
    majority answer across templates instead of per item.
    """
    prompts = list(prompts)
    if not prompts:
        raise DomainError("no prompts to evaluate")
    terminologies = {p.pair.terminology for p in prompts}
    directions = {p.direction for p in prompts}
    if len(terminologies) != 1 or len(directions) != 1:
        raise DomainError("a run covers exactly one terminology and direction")

    if concurrency_limit <= 1:
        items = [_evaluate_one(provider, p, model_id, params, extract) for p in prompts]
    else:
        with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
            items = list(
                pool.map(lambda p: _evaluate_one(provider, p, model_id, params, extract),
                         prompts)
            )
    items.sort(key=lambda i: (i.pair_id, i.template_id))
    if all(i.error is not None for i in items):
        raise RunFailedError(f"all {len(items)} items failed; first: {items[0].error}")

    if vote_by_pair:
        expected_by_pair = {
            p.pair_id: normalize_answer(p.expected_answer, p.pair.terminology,
                                        p.direction, extract=extract)
            for p in prompts
        }
        accuracy = _vote_accuracy(items, expected_by_pair)
    else:
        accuracy = sum(i.correct for i in items) / len(items)

    return EvalRun(
        model_id=model_id,
        terminology=next(iter(terminologies)),
        direction=next(iter(directions)),
        phase=phase,
        items=tuple(items),
        accuracy=accuracy,
    )


# ---------------------------------------------------------------------------
# File interfaces


def write_results_jsonl(run: EvalRun, sink: IO) -> int:
    for item in run.items:
        obj = {
            "pair_id": item.pair_id,
            "direction": item.direction.value,
            "template_id": item.template_id,
            "raw_output": item.raw_output,
            "normalized_output": item.normalized_output,
            "correct": item.correct,
            "error": item.error,
        }
        sink.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return len(run.items)


def read_results_jsonl(stream: IO) -> list[EvalItem]:
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    items = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", lineno) from exc
        items.append(
            EvalItem(
                pair_id=obj["pair_id"],
                direction=Direction(obj["direction"]),
                template_id=obj["template_id"],
                raw_output=obj["raw_output"],
                normalized_output=obj["normalized_output"],
                correct=obj["correct"],
                error=obj.get("error"),
            )
        )
    return items


def run_summary(run: EvalRun) -> dict:
    return {
        "model_id": run.model_id,
        "terminology": run.terminology.value,
        "direction": run.direction.value,
        "phase": run.phase.value,
        "n_items": len(run.items),
        "n_correct": sum(i.correct for i in run.items),
        "n_errors": sum(i.error is not None for i in run.items),
        "accuracy": run.accuracy,
    }
