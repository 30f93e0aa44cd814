#!/usr/bin/env python3
"""Compute the mini fixture's expected report CSVs by direct counting.

Deliberately independent of the package: it reads only the planted truth
and the committed split, counts categories with plain loops, computes
percentages with Fraction arithmetic, rounds half-up to one decimal, and
writes the three report tables. The pipeline must reproduce these files
byte for byte through its whole prompt/replay/score/classify/report
chain.

Run from the repository root after tools/make_mini_fixture.py:

    python tools/bruteforce_expected.py
"""

from __future__ import annotations

import json
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "mini"

# (terminology value, direction value, row label, display name) in report order
ROW_ORDER = [
    ("HPO", "id_to_term", "HPO identifier -> term", "HPO"),
    ("HPO", "term_to_id", "HPO term -> identifier", "HPO"),
    ("GO_CC", "id_to_term", "GO identifier -> term", "GO"),
    ("GO_CC", "term_to_id", "GO term -> identifier", "GO"),
    ("GENE", "id_to_term", "gene -> protein", "GENE"),
    ("GENE", "term_to_id", "protein -> gene", "GENE"),
]

CATEGORIES = ["Gainer", "Loser", "Correct", "Incorrect"]


def category(base: bool, tuned: bool) -> str:
    if not base and tuned:
        return "Gainer"
    if base and not tuned:
        return "Loser"
    if base and tuned:
        return "Correct"
    return "Incorrect"


def pct(numerator: int, denominator: int) -> Fraction:
    return Fraction(numerator * 100, denominator)


def round1(value: Fraction) -> str:
    dec = Decimal(value.numerator) / Decimal(value.denominator)
    return str(dec.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def main() -> None:
    truth = json.loads((FIXTURE_DIR / "planted_truth.json").read_text())

    perf_lines = ["mapping,baseline_pct,finetuned_pct,delta_ft_pct"]
    cat_lines = ["terminology,direction,category,validation_pct,trained_pct"]
    derived_lines = [
        "task,memorized_pct,generalized_pct,degraded_pct,degraded_pooled_pct,accuracy_pct"
    ]

    for terminology, direction, label, display in ROW_ORDER:
        rows = [v for v in truth.values()
                if v["terminology"] == terminology and v["direction"] == direction]
        assert rows, f"no planted rows for {label}"

        n = len(rows)
        base_correct = sum(r["baseline_correct"] for r in rows)
        tuned_correct = sum(r["finetuned_correct"] for r in rows)
        base_pct = pct(base_correct, n)
        tuned_pct = pct(tuned_correct, n)
        perf_lines.append(
            f"{label},{round1(base_pct)},{round1(tuned_pct)},{round1(tuned_pct - base_pct)}"
        )

        counts = {"train": {c: 0 for c in CATEGORIES},
                  "validation": {c: 0 for c in CATEGORIES}}
        for r in rows:
            counts[r["split"]][category(r["baseline_correct"], r["finetuned_correct"])] += 1
        n_train = sum(counts["train"].values())
        n_val = sum(counts["validation"].values())
        assert n_train and n_val

        for cat in CATEGORIES:
            cat_lines.append(
                f"{display},{label},{cat},"
                f"{round1(pct(counts['validation'][cat], n_val))},"
                f"{round1(pct(counts['train'][cat], n_train))}"
            )

        memorized = pct(counts["train"]["Gainer"], n_train)
        generalized = pct(counts["validation"]["Gainer"], n_val)
        degraded = pct(counts["train"]["Loser"], n_train) + pct(
            counts["validation"]["Loser"], n_val)
        pooled = pct(counts["train"]["Loser"] + counts["validation"]["Loser"],
                     n_train + n_val)
        accuracy = (pct(counts["train"]["Correct"], n_train)
                    + pct(counts["train"]["Gainer"], n_train)
                    - pct(counts["train"]["Loser"], n_train))
        derived_lines.append(
            f"{label},{round1(memorized)},{round1(generalized)},"
            f"{round1(degraded)},{round1(pooled)},{round1(accuracy)}"
        )

    out = FIXTURE_DIR / "expected"
    out.mkdir(exist_ok=True)
    (out / "performance_summary.csv").write_text("\n".join(perf_lines) + "\n")
    (out / "outcome_categories.csv").write_text("\n".join(cat_lines) + "\n")
    (out / "derived_metrics.csv").write_text("\n".join(derived_lines) + "\n")
    print(f"expected report tables written under {out}")


if __name__ == "__main__":
    main()
