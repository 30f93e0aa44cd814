"""Popularity proxies per identifier and rank-frequency distributions.

Three proxies approximate how often a model saw a pair during pretraining:
PMC full-text hits for the identifier string, PMC hits for the term string,
and annotation counts from curated resources. Counts are Laplace-smoothed
(add one) and log10-transformed before any statistics.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable

from .errors import DomainError, ParseError, ValidationError
from .ontology import Terminology

PROXIES = ("id_count_pmc", "term_count_pmc", "annotation_count")


@dataclass(frozen=True)
class PopularityRecord:
    terminology: Terminology
    identifier: str
    label: str
    id_count_pmc: int
    term_count_pmc: int
    annotation_count: int
    retrieved_at: str | None = None

    def __post_init__(self):
        for name in PROXIES:
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} < 0 for {self.identifier!r}")

    def proxy(self, name: str) -> int:
        if name not in PROXIES:
            raise DomainError(f"unknown proxy {name!r}; expected one of {PROXIES}")
        return getattr(self, name)


@dataclass(frozen=True)
class RankedDistribution:
    """Identifiers ranked 1..N by descending count, ties broken by identifier."""

    entries: tuple[tuple[str, int, int], ...]  # (identifier, count, rank)

    def ranks(self) -> dict[str, int]:
        return {identifier: rank for identifier, _, rank in self.entries}

    def log_log_points(self) -> list[tuple[float, float]]:
        """(log10 rank, log10(count+1)) points for rank-frequency plots."""
        return [(math.log10(rank), laplace_log(count)) for _, count, rank in self.entries]


def laplace_log(count: int) -> float:
    """log10(count + 1); maps 0 to 0.0 and is strictly monotone."""
    if count < 0:
        raise DomainError("count must be non-negative")
    return math.log10(count + 1)


def rank_frequency(records: Iterable[PopularityRecord], proxy: str) -> RankedDistribution:
    """Rank records by a proxy, descending; ties broken by identifier."""
    records = list(records)
    if not records:
        raise DomainError("cannot rank an empty record set")
    terminologies = {r.terminology for r in records}
    if len(terminologies) != 1:
        raise DomainError(f"records span multiple terminologies: {terminologies}")
    keyed = sorted(((r.proxy(proxy), r.identifier) for r in records),
                   key=lambda kv: (-kv[0], kv[1]))
    entries = tuple(
        (identifier, count, rank)
        for rank, (count, identifier) in enumerate(keyed, start=1)
    )
    return RankedDistribution(entries=entries)


def load_annotation_counts(stream: IO, terminology: Terminology) -> dict[str, int]:
    """Parse the two-column annotation TSV `identifier<TAB>count`."""
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if data.startswith("﻿"):
        data = data[1:]
    counts: dict[str, int] = {}
    for lineno, line in enumerate(data.splitlines(), start=1):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise ParseError(f"expected 2 tab-separated columns, got {len(cols)}", lineno)
        identifier, raw_count = cols[0].strip(), cols[1].strip()
        if not terminology.valid_identifier(identifier):
            raise ValidationError(
                f"line {lineno}: identifier {identifier!r} does not match the "
                f"{terminology.value} syntax"
            )
        if identifier in counts:
            raise ParseError(f"duplicate identifier {identifier!r}", lineno)
        try:
            count = int(raw_count)
        except ValueError as exc:
            raise ParseError(f"non-integer count {raw_count!r}", lineno) from exc
        if count < 0:
            raise ValidationError(f"line {lineno}: negative count for {identifier!r}")
        counts[identifier] = count
    return counts


POPULARITY_CSV_COLUMNS = [
    "terminology", "identifier", "label",
    "id_count_pmc", "term_count_pmc", "annotation_count",
]


def write_popularity_csv(records: Iterable[PopularityRecord], sink: IO) -> int:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(POPULARITY_CSV_COLUMNS)
    n = 0
    for r in records:
        writer.writerow([
            r.terminology.value, r.identifier, r.label,
            r.id_count_pmc, r.term_count_pmc, r.annotation_count,
        ])
        n += 1
    return n


def read_popularity_csv(stream: IO) -> list[PopularityRecord]:
    reader = csv.reader(stream)
    header = next(reader, None)
    if header != POPULARITY_CSV_COLUMNS:
        raise ParseError(f"unexpected popularity CSV header: {header}", 1)
    records = []
    for row in reader:
        if not row:
            continue
        records.append(
            PopularityRecord(
                terminology=Terminology(row[0]),
                identifier=row[1],
                label=row[2],
                id_count_pmc=int(row[3]),
                term_count_pmc=int(row[4]),
                annotation_count=int(row[5]),
            )
        )
    return records
