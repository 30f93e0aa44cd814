"""Outcome classification and the derived fine-tuning metrics.

Each evaluated pair lands in exactly one category given its baseline and
fine-tuned correctness:

    (False, True)  -> Gainer     knowledge acquired
    (True, False)  -> Loser      knowledge degraded
    (True, True)   -> Correct    knowledge preserved
    (False, False) -> Incorrect  never known

Derived metrics: memorization is the Gainer share of the training split,
generalization the Gainer share of the validation split, degradation the
sum of the two per-split Loser shares, and accuracy (training terms) is
Correct + Gainer - Loser on the training split. All percentages are
computed in exact rational arithmetic and rounded half-up to one decimal
exactly once.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction
from typing import IO, Iterable, Sequence

from .errors import DomainError, ParseError
from .evaluate import EvalItem, EvalRun, Phase
from .ontology import Terminology
from .prompts import Direction, direction_label
from .sampling import Split


class OutcomeCategory(Enum):
    GAINER = "Gainer"
    LOSER = "Loser"
    CORRECT = "Correct"
    INCORRECT = "Incorrect"


CATEGORY_ORDER = (
    OutcomeCategory.GAINER,
    OutcomeCategory.LOSER,
    OutcomeCategory.CORRECT,
    OutcomeCategory.INCORRECT,
)


def classify(baseline_correct: bool, finetuned_correct: bool) -> OutcomeCategory:
    if finetuned_correct:
        return OutcomeCategory.CORRECT if baseline_correct else OutcomeCategory.GAINER
    return OutcomeCategory.LOSER if baseline_correct else OutcomeCategory.INCORRECT


@dataclass(frozen=True)
class PairOutcome:
    pair_id: str
    terminology: Terminology
    direction: Direction
    split: Split
    baseline_correct: bool
    finetuned_correct: bool

    @property
    def category(self) -> OutcomeCategory:
        return classify(self.baseline_correct, self.finetuned_correct)


def pair_correctness(items: Sequence[EvalItem]) -> dict[str, bool]:
    """Per-pair correctness from eval items.

    With one template per pair this is the item's flag; with several, the
    pair counts as correct when strictly more templates were correct than
    not (ties lose).
    """
    votes: dict[str, list[bool]] = {}
    for item in items:
        votes.setdefault(item.pair_id, []).append(item.correct)
    return {
        pid: sum(flags) * 2 > len(flags)
        for pid, flags in votes.items()
    }


def build_outcomes(
    baseline_run: EvalRun,
    finetuned_run: EvalRun,
    split_by_pair: dict[str, Split],
) -> list[PairOutcome]:
    """Join two runs of the same prompt set into per-pair outcomes."""
    if (baseline_run.terminology, baseline_run.direction) != (
        finetuned_run.terminology, finetuned_run.direction,
    ):
        raise DomainError("baseline and fine-tuned runs cover different prompt sets")
    base = pair_correctness(baseline_run.items)
    tuned = pair_correctness(finetuned_run.items)
    if set(base) != set(tuned):
        raise DomainError("baseline and fine-tuned runs scored different pairs")
    outcomes = []
    for pid in sorted(base):
        if pid not in split_by_pair:
            raise DomainError(f"pair {pid!r} has no split assignment")
        outcomes.append(
            PairOutcome(
                pair_id=pid,
                terminology=baseline_run.terminology,
                direction=baseline_run.direction,
                split=split_by_pair[pid],
                baseline_correct=base[pid],
                finetuned_correct=tuned[pid],
            )
        )
    return outcomes


# ---------------------------------------------------------------------------
# Percentages and derived metrics (exact rational arithmetic)


def round1(value: Fraction | float) -> float:
    """Round half-up to one decimal, once, at the end of a computation."""
    if isinstance(value, Fraction):
        dec = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        dec = Decimal(repr(value))
    return float(dec.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def fmt1(value: float) -> str:
    return f"{value:.1f}"


@dataclass(frozen=True)
class CategoryPercentages:
    """Category shares of one split, as exact fractions of 100."""

    gainer: Fraction
    loser: Fraction
    correct: Fraction
    incorrect: Fraction
    n: int | None = None

    @classmethod
    def from_counts(cls, counts: dict[OutcomeCategory, int]) -> "CategoryPercentages":
        total = sum(counts.values())
        if total == 0:
            raise DomainError("empty split")
        def pct(cat):
            return Fraction(counts.get(cat, 0) * 100, total)
        return cls(
            gainer=pct(OutcomeCategory.GAINER),
            loser=pct(OutcomeCategory.LOSER),
            correct=pct(OutcomeCategory.CORRECT),
            incorrect=pct(OutcomeCategory.INCORRECT),
            n=total,
        )

    @classmethod
    def from_values(cls, gainer, loser, correct, incorrect) -> "CategoryPercentages":
        to_frac = lambda v: v if isinstance(v, Fraction) else Fraction(repr(float(v)))
        return cls(to_frac(gainer), to_frac(loser), to_frac(correct), to_frac(incorrect))

    def get(self, cat: OutcomeCategory) -> Fraction:
        return getattr(self, cat.value.lower())


@dataclass(frozen=True)
class DerivedMetrics:
    memorized_pct: float
    generalized_pct: float
    degraded_pct: float
    accuracy_pct: float
    degraded_pooled_pct: float | None = None


def split_counts(outcomes: Iterable[PairOutcome]) -> dict[Split, dict[OutcomeCategory, int]]:
    counts: dict[Split, dict[OutcomeCategory, int]] = {}
    for o in outcomes:
        counts.setdefault(o.split, {}).setdefault(o.category, 0)
        counts[o.split][o.category] += 1
    return counts


def metrics_from_split_percentages(
    train: CategoryPercentages, validation: CategoryPercentages
) -> DerivedMetrics:
    """Derived metrics from per-split category percentages.

    Degradation sums the two per-split Loser percentages. The pooled
    alternative needs raw counts, so it is only present when both splits
    carry them.
    """
    memorized = train.gainer
    generalized = validation.gainer
    degraded = train.loser + validation.loser
    accuracy = train.correct + train.gainer - train.loser
    pooled = None
    if train.n and validation.n:
        weighted = (train.loser * train.n + validation.loser * validation.n)
        pooled = round1(weighted / (train.n + validation.n))
    return DerivedMetrics(
        memorized_pct=round1(memorized),
        generalized_pct=round1(generalized),
        degraded_pct=round1(degraded),
        accuracy_pct=round1(accuracy),
        degraded_pooled_pct=pooled,
    )


def derive_metrics(outcomes: Sequence[PairOutcome]) -> DerivedMetrics:
    """Derived metrics for one (terminology, direction) outcome set."""
    counts = split_counts(outcomes)
    if Split.TRAIN not in counts or Split.VALIDATION not in counts:
        missing = [s.value for s in (Split.TRAIN, Split.VALIDATION) if s not in counts]
        raise DomainError(f"missing split(s): {', '.join(missing)}")
    return metrics_from_split_percentages(
        CategoryPercentages.from_counts(counts[Split.TRAIN]),
        CategoryPercentages.from_counts(counts[Split.VALIDATION]),
    )


def reconcile_accuracy(
    metrics: DerivedMetrics, reference_accuracy_pct: float, tol: float = 0.05
) -> bool:
    """Whether the formula's accuracy agrees with an external reference value."""
    return abs(metrics.accuracy_pct - reference_accuracy_pct) <= tol


# ---------------------------------------------------------------------------
# Sankey flow edges

BASELINE_CORRECT = "baseline-correct"
BASELINE_INCORRECT = "baseline-incorrect"

_EDGE_ORDER = (
    (BASELINE_CORRECT, OutcomeCategory.CORRECT),
    (BASELINE_CORRECT, OutcomeCategory.LOSER),
    (BASELINE_INCORRECT, OutcomeCategory.GAINER),
    (BASELINE_INCORRECT, OutcomeCategory.INCORRECT),
)


def sankey_edges(outcomes: Sequence[PairOutcome]) -> list[tuple[str, str, int]]:
    """Flow edges from baseline state to outcome category, zero edges omitted."""
    counts: dict[OutcomeCategory, int] = {}
    for o in outcomes:
        counts[o.category] = counts.get(o.category, 0) + 1
    return [
        (source, category.value, counts[category])
        for source, category in _EDGE_ORDER
        if counts.get(category, 0) > 0
    ]


# ---------------------------------------------------------------------------
# Report tables


@dataclass(frozen=True)
class PerformanceRow:
    mapping: str
    baseline_pct: float
    finetuned_pct: float
    delta_pct: float


@dataclass(frozen=True)
class CategoryRow:
    terminology: str
    direction: str
    category: str
    validation_pct: float
    trained_pct: float


@dataclass(frozen=True)
class DerivedRow:
    task: str
    metrics: DerivedMetrics


@dataclass
class ReportBundle:
    performance: list[PerformanceRow]
    categories: list[CategoryRow]
    derived: list[DerivedRow]


TERMINOLOGY_ORDER = (Terminology.HPO, Terminology.GO_CC, Terminology.GENE)
DIRECTION_ORDER = (Direction.ID_TO_TERM, Direction.TERM_TO_ID)


def _accuracy_pct(run: EvalRun) -> Fraction:
    return Fraction(sum(i.correct for i in run.items) * 100, len(run.items))


def table_report(
    runs: Sequence[EvalRun],
    outcomes: Sequence[PairOutcome],
) -> ReportBundle:
    """Build the three report tables from complete run and outcome sets."""
    run_map: dict[tuple[Terminology, Direction, Phase], EvalRun] = {}
    for run in runs:
        run_map[(run.terminology, run.direction, run.phase)] = run
    outcome_map: dict[tuple[Terminology, Direction], list[PairOutcome]] = {}
    for o in outcomes:
        outcome_map.setdefault((o.terminology, o.direction), []).append(o)

    combos = [
        (t, d)
        for t in TERMINOLOGY_ORDER
        for d in DIRECTION_ORDER
        if any((t, d, phase) in run_map for phase in Phase) or (t, d) in outcome_map
    ]
    performance: list[PerformanceRow] = []
    categories: list[CategoryRow] = []
    derived: list[DerivedRow] = []
    for t, d in combos:
        label = direction_label(t, d)
        base = run_map.get((t, d, Phase.BASELINE))
        tuned = run_map.get((t, d, Phase.FINETUNED))
        if base is None or tuned is None:
            missing = "baseline" if base is None else "finetuned"
            raise DomainError(f"missing {missing} run for {label}")
        base_pct = _accuracy_pct(base)
        tuned_pct = _accuracy_pct(tuned)
        performance.append(
            PerformanceRow(
                mapping=label,
                baseline_pct=round1(base_pct),
                finetuned_pct=round1(tuned_pct),
                delta_pct=round1(tuned_pct - base_pct),
            )
        )
        if (t, d) not in outcome_map:
            raise DomainError(f"missing outcomes for {label}")
        combo_outcomes = outcome_map[(t, d)]
        counts = split_counts(combo_outcomes)
        if Split.TRAIN not in counts or Split.VALIDATION not in counts:
            raise DomainError(f"missing split in outcomes for {label}")
        train = CategoryPercentages.from_counts(counts[Split.TRAIN])
        val = CategoryPercentages.from_counts(counts[Split.VALIDATION])
        for cat in CATEGORY_ORDER:
            categories.append(
                CategoryRow(
                    terminology=t.display,
                    direction=label,
                    category=cat.value,
                    validation_pct=round1(val.get(cat)),
                    trained_pct=round1(train.get(cat)),
                )
            )
        derived.append(DerivedRow(task=label, metrics=metrics_from_split_percentages(train, val)))
    return ReportBundle(performance=performance, categories=categories, derived=derived)


def write_performance_csv(rows: Sequence[PerformanceRow], sink: IO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["mapping", "baseline_pct", "finetuned_pct", "delta_ft_pct"])
    for r in rows:
        writer.writerow([r.mapping, fmt1(r.baseline_pct), fmt1(r.finetuned_pct),
                         fmt1(r.delta_pct)])


def write_categories_csv(rows: Sequence[CategoryRow], sink: IO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["terminology", "direction", "category",
                     "validation_pct", "trained_pct"])
    for r in rows:
        writer.writerow([r.terminology, r.direction, r.category,
                         fmt1(r.validation_pct), fmt1(r.trained_pct)])


def write_derived_csv(rows: Sequence[DerivedRow], sink: IO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["task", "memorized_pct", "generalized_pct", "degraded_pct",
                     "degraded_pooled_pct", "accuracy_pct"])
    for r in rows:
        m = r.metrics
        writer.writerow([
            r.task, fmt1(m.memorized_pct), fmt1(m.generalized_pct),
            fmt1(m.degraded_pct),
            "" if m.degraded_pooled_pct is None else fmt1(m.degraded_pooled_pct),
            fmt1(m.accuracy_pct),
        ])


def write_sankey_csv(edges: Sequence[tuple[str, str, int]], sink: IO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["source", "target", "count"])
    for source, target, count in edges:
        writer.writerow([source, target, count])


def write_outcomes_jsonl(outcomes: Sequence[PairOutcome], sink: IO) -> int:
    for o in outcomes:
        obj = {
            "pair_id": o.pair_id,
            "terminology": o.terminology.value,
            "direction": o.direction.value,
            "split": o.split.value,
            "baseline_correct": o.baseline_correct,
            "finetuned_correct": o.finetuned_correct,
            "category": o.category.value,
        }
        sink.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return len(outcomes)


def read_outcomes_jsonl(stream: IO) -> list[PairOutcome]:
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    outcomes = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", lineno) from exc
        outcomes.append(
            PairOutcome(
                pair_id=obj["pair_id"],
                terminology=Terminology(obj["terminology"]),
                direction=Direction(obj["direction"]),
                split=Split(obj["split"]),
                baseline_correct=obj["baseline_correct"],
                finetuned_correct=obj["finetuned_correct"],
            )
        )
    return outcomes


def metrics_to_dict(metrics: DerivedMetrics) -> dict:
    return {
        "memorized_pct": metrics.memorized_pct,
        "generalized_pct": metrics.generalized_pct,
        "degraded_pct": metrics.degraded_pct,
        "degraded_pooled_pct": metrics.degraded_pooled_pct,
        "accuracy_pct": metrics.accuracy_pct,
    }
