"""Semantic alignment between term and identifier embeddings.

A terminology is "lexicalized" to the degree that each identifier's
embedding sits close to its own term's embedding. We measure that three
ways: matched vs non-matched cosine similarity with a Welch t-test, a 2D
PCA projection of all vectors, and Euclidean distances between matched
pairs in the projected plane.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import ConsistencyError, DomainError
from .stats import WelchResult, welch_t


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    """Cosine similarity, clamped to [-1, 1] against floating rounding."""
    va = np.asarray(a, dtype=float)
    vb = np.asarray(b, dtype=float)
    if va.shape != vb.shape:
        raise DomainError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DomainError("cosine undefined for zero-norm vectors")
    return float(np.clip(float(va @ vb) / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class AlignmentResult:
    n: int
    rowwise_mean: float
    rowwise_sd: float
    nonrow_mean: float
    nonrow_sd: float
    delta_mean: float
    t_stat: float
    df: float
    p_value: float
    # Diagnostics over the raw n*(n-1) non-matching similarities, alongside
    # the per-term means used for the test.
    nonrow_pooled_mean: float = float("nan")
    nonrow_pooled_sd: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "rowwise_mean": self.rowwise_mean,
            "rowwise_sd": self.rowwise_sd,
            "nonrow_mean": self.nonrow_mean,
            "nonrow_sd": self.nonrow_sd,
            "delta_mean": self.delta_mean,
            "t_stat": self.t_stat,
            "df": self.df,
            "p_value": self.p_value,
            "nonrow_pooled_mean": self.nonrow_pooled_mean,
            "nonrow_pooled_sd": self.nonrow_pooled_sd,
        }


def _unit_rows(vectors: list[np.ndarray], what: str) -> np.ndarray:
    matrix = np.asarray(vectors, dtype=float)
    if matrix.ndim != 2:
        raise DomainError(f"{what} vectors must share one dimension")
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0.0):
        raise DomainError(f"{what} contains a zero-norm vector")
    return matrix / norms[:, None]


def rowwise_alignment(
    term_vecs: list[np.ndarray], id_vecs: list[np.ndarray]
) -> AlignmentResult:
    """Matched vs non-matched cosine similarity with Welch's t.

    The matched sample is cosine(term_i, id_i). The non-matched sample
    aggregates to one value per term (mean over the n-1 identifiers that
    are not its own) so both samples have size n.
    """
    if len(term_vecs) != len(id_vecs):
        raise DomainError("term and identifier vector lists differ in length")
    n = len(term_vecs)
    if n < 2:
        raise DomainError("need at least 2 pairs")
    terms = _unit_rows(term_vecs, "terms")
    ids = _unit_rows(id_vecs, "identifiers")
    if terms.shape[1] != ids.shape[1]:
        raise DomainError("term and identifier dimensions differ")

    sims = np.clip(terms @ ids.T, -1.0, 1.0)
    rowwise = np.diag(sims).copy()
    off_mask = ~np.eye(n, dtype=bool)
    nonrow_per_term = (sims.sum(axis=1) - rowwise) / (n - 1)
    pooled = sims[off_mask]

    result: WelchResult = welch_t(rowwise, nonrow_per_term)
    return AlignmentResult(
        n=n,
        rowwise_mean=float(np.mean(rowwise)),
        rowwise_sd=float(np.std(rowwise, ddof=1)),
        nonrow_mean=float(np.mean(nonrow_per_term)),
        nonrow_sd=float(np.std(nonrow_per_term, ddof=1)),
        delta_mean=float(np.mean(rowwise) - np.mean(nonrow_per_term)),
        t_stat=result.t,
        df=result.df,
        p_value=result.p,
        nonrow_pooled_mean=float(np.mean(pooled)),
        nonrow_pooled_sd=float(np.std(pooled, ddof=1)),
    )


@dataclass(frozen=True)
class PcaPoint:
    label: str
    coords: tuple[float, ...]
    class_tag: str  # "term" | "identifier"
    terminology: str


@dataclass(frozen=True)
class PcaProjection:
    components: np.ndarray        # k x dim, orthonormal rows
    explained_variance: tuple[float, ...]  # top-k eigenvalue shares of total variance
    points: tuple[PcaPoint, ...]

    @property
    def k(self) -> int:
        return self.components.shape[0]


def pca_project(
    vectors: list[np.ndarray],
    k: int = 2,
    point_meta: Sequence[tuple[str, str, str]] | None = None,
) -> PcaProjection:
    """Project mean-centered vectors onto the top-k principal axes.

    Uses the SVD of the centered matrix. Sign convention: each component's
    largest-magnitude coordinate is positive. `point_meta` supplies
    (label, class_tag, terminology) per vector for the plotted points.
    """
    matrix = np.asarray(vectors, dtype=float)
    if matrix.ndim != 2:
        raise DomainError("vectors must share one dimension")
    n, dim = matrix.shape
    if n < k + 1:
        raise DomainError(f"need at least {k + 1} vectors for k={k}, got {n}")
    if point_meta is not None and len(point_meta) != n:
        raise DomainError("point_meta length does not match vectors")

    centered = matrix - matrix.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    tol = max(n, dim) * np.finfo(float).eps * (singular[0] if singular.size else 0.0)
    rank = int(np.sum(singular > tol))
    if rank < k:
        raise DomainError(f"data rank {rank} is below the requested k={k}")

    components = vt[:k].copy()
    for i in range(k):
        pivot = int(np.argmax(np.abs(components[i])))
        if components[i, pivot] < 0:
            components[i] = -components[i]
    scores = centered @ components.T

    eigenvalues = singular**2
    total = float(eigenvalues.sum())
    shares = tuple(float(v) / total for v in eigenvalues[:k])

    points = []
    for i in range(n):
        label, class_tag, terminology = (
            point_meta[i] if point_meta is not None else (str(i), "", "")
        )
        points.append(
            PcaPoint(
                label=label,
                coords=tuple(float(c) for c in scores[i]),
                class_tag=class_tag,
                terminology=terminology,
            )
        )
    return PcaProjection(
        components=components,
        explained_variance=shares,
        points=tuple(points),
    )


@dataclass(frozen=True)
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


@dataclass(frozen=True)
class DistanceSummary:
    paired_mean: float
    nonpaired_mean: float
    per_terminology: dict[str, BoxStats]


def _box(values: np.ndarray) -> BoxStats:
    q1, median, q3 = np.percentile(values, [25, 50, 75])
    return BoxStats(float(values.min()), float(q1), float(median), float(q3),
                    float(values.max()))


def paired_distance_analysis(
    projection: PcaProjection,
    pairs: Sequence[tuple[str, str]],
) -> DistanceSummary:
    """Euclidean distances in the projected plane: matched vs non-matched.

    `pairs` lists (term_label, id_label). Identifier labels must be unique
    across the projection (identifier syntaxes are disjoint); term labels
    only need to be unique within a terminology, and are resolved through
    the identifier's terminology. Non-matched distances pair each term
    with every other identifier of the same terminology. Box stats of the
    matched distances are reported per terminology.
    """
    terms: dict[str, list[PcaPoint]] = {}
    ids: dict[str, PcaPoint] = {}
    for point in projection.points:
        if point.class_tag == "term":
            terms.setdefault(point.label, []).append(point)
        elif point.class_tag == "identifier":
            if point.label in ids:
                raise ConsistencyError(
                    f"identifier label {point.label!r} appears twice in the projection"
                )
            ids[point.label] = point

    paired: list[float] = []
    paired_by_term: dict[str, list[float]] = {}
    nonpaired: list[float] = []
    for term_label, id_label in pairs:
        i = ids.get(id_label)
        if i is None:
            raise ConsistencyError(f"identifier label {id_label!r} missing from projection")
        candidates = [
            p for p in terms.get(term_label, ()) if p.terminology == i.terminology
        ]
        if not candidates:
            raise ConsistencyError(
                f"term label {term_label!r} missing from projection "
                f"for terminology {i.terminology!r}"
            )
        if len(candidates) > 1:
            raise ConsistencyError(
                f"term label {term_label!r} is ambiguous within {i.terminology!r}"
            )
        t = candidates[0]
        d = float(np.linalg.norm(np.subtract(t.coords, i.coords)))
        paired.append(d)
        paired_by_term.setdefault(t.terminology, []).append(d)
        for other_label, other in ids.items():
            if other_label == id_label or other.terminology != t.terminology:
                continue
            nonpaired.append(float(np.linalg.norm(np.subtract(t.coords, other.coords))))

    per_terminology = {
        terminology: _box(np.asarray(values))
        for terminology, values in sorted(paired_by_term.items())
    }
    return DistanceSummary(
        paired_mean=float(np.mean(paired)) if paired else 0.0,
        nonpaired_mean=float(np.mean(nonpaired)) if nonpaired else 0.0,
        per_terminology=per_terminology,
    )


# ---------------------------------------------------------------------------
# File interfaces


def write_alignment_json(results: dict[str, AlignmentResult], sink: IO) -> None:
    payload = {name: r.to_dict() for name, r in results.items()}
    json.dump(payload, sink, indent=2, sort_keys=True)
    sink.write("\n")


def write_pca_points_csv(projection: PcaProjection, sink: IO) -> int:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["label", "class", "terminology", "x", "y"])
    for p in projection.points:
        writer.writerow([p.label, p.class_tag, p.terminology,
                         repr(p.coords[0]), repr(p.coords[1])])
    return len(projection.points)


def write_distance_summary_csv(summary: DistanceSummary, sink: IO) -> None:
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(["terminology", "min", "q1", "median", "q3", "max"])
    for terminology, box in summary.per_terminology.items():
        writer.writerow([terminology, repr(box.minimum), repr(box.q1),
                         repr(box.median), repr(box.q3), repr(box.maximum)])
    writer.writerow(["__overall__", "paired_mean", repr(summary.paired_mean),
                     "nonpaired_mean", repr(summary.nonpaired_mean), ""])
