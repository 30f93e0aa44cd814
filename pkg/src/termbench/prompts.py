"""Prompt templates and fine-tuning file emission.

Every pair expands into five phrasings per direction. The forward
direction asks for the identifier given the term; the reverse direction
mirrors each template, substituting identifiers for terms. For the
gene/protein terminology the ontology wording is replaced by "HGNC gene
symbol" and "protein name", which is what that mapping actually asks for.

The rendered template table below is the canonical, versioned source of
the prompt wordings; change TEMPLATE_TABLE_VERSION when editing it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable

from .errors import DomainError, ParseError
from .ontology import Terminology
from .sampling import SampledPair, pair_id

TEMPLATE_TABLE_VERSION = 1

TEMPLATE_IDS = (1, 2, 3, 4, 5)


class Direction(Enum):
    TERM_TO_ID = "term_to_id"
    ID_TO_TERM = "id_to_term"


def _ontology_templates(onto: str) -> dict[Direction, tuple[str, ...]]:
    return {
        Direction.TERM_TO_ID: (
            f"What is the {onto} identifier for the {onto} term [TERM]?",
            f"The {onto} term [TERM] has what {onto} identifier? "
            f"Respond only with the {onto} identifier.",
            f"Provide the {onto} identifier for: [TERM]",
            f"What is the ontology identifier for [TERM] in {onto}?",
            f"Return only the {onto} identifier for the term: [TERM]",
        ),
        Direction.ID_TO_TERM: (
            f"What is the {onto} term for the {onto} identifier [IDENTIFIER]?",
            f"The {onto} identifier [IDENTIFIER] has what {onto} term? "
            f"Respond only with the {onto} term.",
            f"Provide the {onto} term for: [IDENTIFIER]",
            f"What is the ontology term for [IDENTIFIER] in {onto}?",
            f"Return only the {onto} term for the identifier: [IDENTIFIER]",
        ),
    }


_GENE_TEMPLATES = {
    Direction.TERM_TO_ID: (
        "What is the HGNC gene symbol for the protein name [TERM]?",
        "The protein name [TERM] has what HGNC gene symbol? "
        "Respond only with the HGNC gene symbol.",
        "Provide the HGNC gene symbol for: [TERM]",
        "What is the gene symbol for [TERM] in HGNC?",
        "Return only the HGNC gene symbol for the protein name: [TERM]",
    ),
    Direction.ID_TO_TERM: (
        "What is the protein name for the HGNC gene symbol [IDENTIFIER]?",
        "The HGNC gene symbol [IDENTIFIER] has what protein name? "
        "Respond only with the protein name.",
        "Provide the protein name for: [IDENTIFIER]",
        "What is the protein name for [IDENTIFIER] in HGNC?",
        "Return only the protein name for the gene symbol: [IDENTIFIER]",
    ),
}

TEMPLATE_TABLE: dict[Terminology, dict[Direction, tuple[str, ...]]] = {
    Terminology.HPO: _ontology_templates("HPO"),
    Terminology.GO_CC: _ontology_templates("GO"),
    Terminology.GENE: _GENE_TEMPLATES,
}

_PLACEHOLDERS = ("[ONTOLOGY]", "[TERM]", "[IDENTIFIER]")


@dataclass(frozen=True)
class PromptInstance:
    pair: SampledPair
    direction: Direction
    template_id: int
    prompt_text: str
    expected_answer: str

    @property
    def pair_id(self) -> str:
        return pair_id(self.pair)


def direction_label(terminology: Terminology, direction: Direction) -> str:
    """Human-readable mapping name used in report rows."""
    if terminology is Terminology.GENE:
        return "protein -> gene" if direction is Direction.TERM_TO_ID else "gene -> protein"
    onto = terminology.display
    if direction is Direction.TERM_TO_ID:
        return f"{onto} term -> identifier"
    return f"{onto} identifier -> term"


def expand_prompts(pair: SampledPair, direction: Direction) -> list[PromptInstance]:
    """Render the five templates for one pair and direction."""
    templates = TEMPLATE_TABLE[pair.terminology][direction]
    if direction is Direction.TERM_TO_ID:
        fill, expected = pair.term, pair.identifier
        slot = "[TERM]"
    else:
        fill, expected = pair.identifier, pair.term
        slot = "[IDENTIFIER]"
    instances = []
    for template_id, template in zip(TEMPLATE_IDS, templates):
        text = template.replace(slot, fill)
        for leftover in _PLACEHOLDERS:
            if leftover in text:
                raise DomainError(
                    f"placeholder {leftover} survived rendering template "
                    f"{template_id} for {pair.identifier!r}"
                )
        instances.append(
            PromptInstance(
                pair=pair,
                direction=direction,
                template_id=template_id,
                prompt_text=text,
                expected_answer=expected,
            )
        )
    return instances


def expand_all(pairs: Iterable[SampledPair], directions: Iterable[Direction]) -> list[PromptInstance]:
    out: list[PromptInstance] = []
    for direction in directions:
        for pair in pairs:
            out.extend(expand_prompts(pair, direction))
    return out


def write_prompts_jsonl(prompts: Iterable[PromptInstance], sink: IO) -> int:
    n = 0
    for p in prompts:
        obj = {
            "pair_id": p.pair_id,
            "direction": p.direction.value,
            "template_id": p.template_id,
            "prompt_text": p.prompt_text,
            "expected_answer": p.expected_answer,
        }
        sink.write(json.dumps(obj, ensure_ascii=False) + "\n")
        n += 1
    return n


def read_prompts_jsonl(stream: IO, pairs_by_id: dict[str, SampledPair]) -> list[PromptInstance]:
    """Load prompts, rebinding each row to its SampledPair."""
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    prompts = []
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad JSON: {exc}", lineno) from exc
        pair = pairs_by_id.get(obj["pair_id"])
        if pair is None:
            raise ParseError(f"unknown pair_id {obj['pair_id']!r}", lineno)
        prompts.append(
            PromptInstance(
                pair=pair,
                direction=Direction(obj["direction"]),
                template_id=obj["template_id"],
                prompt_text=obj["prompt_text"],
                expected_answer=obj["expected_answer"],
            )
        )
    return prompts


# Hyperparameters recorded as provenance alongside emitted training files;
# the adapter training itself runs on an external service.
FINETUNE_HYPERPARAMETERS = {
    "method": "lora",
    "lora_rank": 64,
    "lora_alpha": 128,
    "lora_target": "all-linear",
    "learning_rate": 1e-5,
    "lr_scheduler": "cosine",
    "lr_warmup": 0,
    "lr_cycle_length": 0.5,
    "batch_size": 32,
    "max_grad_norm": 1,
    "weight_decay": 0,
    "epochs": 20,
    "train_on_inputs": "auto",
}


def emit_finetune_file(prompts: list[PromptInstance], sink: IO) -> int:
    """Write chat-format training rows: one user/assistant message pair each."""
    if not prompts:
        raise DomainError("refusing to emit an empty fine-tuning file")
    n = 0
    for p in prompts:
        row = {
            "messages": [
                {"role": "user", "content": p.prompt_text},
                {"role": "assistant", "content": p.expected_answer},
            ]
        }
        sink.write(json.dumps(row, ensure_ascii=False) + "\n")
        n += 1
    return n


def finetune_manifest(
    terminology: Terminology,
    direction: Direction,
    seed: int,
    n_pairs: int,
    n_prompts: int,
    generator: str,
) -> dict:
    return {
        "terminology": terminology.value,
        "direction": direction.value,
        "seed": seed,
        "generator": generator,
        "n_pairs": n_pairs,
        "n_prompts": n_prompts,
        "template_table_version": TEMPLATE_TABLE_VERSION,
        "hyperparameters": dict(FINETUNE_HYPERPARAMETERS),
    }
