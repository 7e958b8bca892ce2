"""Exact Hamming-ranked retrieval metrics: MAP, MAP@k, precision curves.

Ranking is a full linear scan sorted by (distance ascending, database index
ascending); ties are therefore resolved by database order, which makes every
number here deterministic for fixed inputs.

Average precision truncated at k divides by the number of relevant items
retrieved within the top k (not by the total relevant in the database).
With a full-length ranking the two conventions coincide; at a cutoff they do
not, and the retrieved-within-k denominator is the one used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import BoundProblem, solve_target_distance
from .codes import (
    BinaryCode,
    Codebook,
    from_signs,
    packed_hamming_matrix,
    word_matrix,
)

__all__ = [
    "EvalReport",
    "rank",
    "average_precision",
    "mean_average_precision",
    "min_interclass_distance",
    "class_center_codes",
]

# Cutoffs for the precision curve: 1, 5, 10, 50, 100, 500, ...
_CURVE_PATTERN = (1, 5)


def _curve_cutoffs(limit: int) -> list[int]:
    out = []
    scale = 1
    while True:
        for base in _CURVE_PATTERN:
            k = base * scale
            if k > limit:
                return out
            out.append(k)
        scale *= 10


def rank(query: BinaryCode, database: Codebook) -> np.ndarray:
    """Database indices sorted by (Hamming distance, index)."""
    if query.length != database.length:
        raise ValueError(
            f"query length {query.length} does not match database length "
            f"{database.length}"
        )
    q_words = np.array([query.words], dtype=np.uint64)
    dists = packed_hamming_matrix(q_words, database.word_matrix())[0]
    return np.argsort(dists, kind="stable")


def average_precision(relevance: Sequence[int] | np.ndarray, k: int | None = None) -> float:
    """AP of a ranked 0/1 relevance list, optionally truncated at k.

    AP = sum_{i<=k} precision(i) * rel(i) / (# relevant within top k), and 0
    when nothing relevant appears within the cutoff.
    """
    rel = np.asarray(relevance, dtype=np.float64)
    if rel.ndim != 1 or len(rel) == 0:
        raise ValueError("relevance must be a nonempty 1-d list")
    if k is not None:
        if k < 1:
            raise ValueError("k must be >= 1")
        rel = rel[:k]
    hits = rel.sum()
    if hits == 0:
        return 0.0
    precision = np.cumsum(rel) / np.arange(1, len(rel) + 1)
    return float((precision * rel).sum() / hits)


def min_interclass_distance(codes: Sequence[BinaryCode], labels: np.ndarray) -> int:
    """Minimum Hamming distance over all pairs with different labels."""
    labels = np.asarray(labels, dtype=np.int64)
    codes = list(codes)
    if len(codes) != len(labels):
        raise ValueError("labels must match the codes")
    if len(np.unique(labels)) < 2:
        raise ValueError("need at least two classes")
    words = word_matrix(codes)
    dists = packed_hamming_matrix(words, words)
    cross = labels[:, None] != labels[None, :]
    return int(dists[cross].min())


def class_center_codes(
    codes: Sequence[BinaryCode], labels: np.ndarray
) -> Codebook:
    """Per-class center codes: the majority symbol in each bit position.

    Ties between +1 and -1 go to +1, matching the sgn(0) = +1 binarization
    convention.
    """
    labels = np.asarray(labels, dtype=np.int64)
    codes = list(codes)
    if len(codes) != len(labels):
        raise ValueError("labels must match the codes")
    classes = np.unique(labels)
    signs = np.array([c.signs() for c in codes], dtype=np.float64)
    centers = [from_signs(signs[labels == c].mean(axis=0)) for c in classes]
    return Codebook(centers, class_ids=classes.tolist())


@dataclass(frozen=True)
class EvalReport:
    """Retrieval quality plus codebook diagnostics against the packing bound.

    ``min_interclass_distance`` is measured on the per-class center codes of
    the database; ``target_distance`` is the bound-derived separation for
    the same (code length, class count).  Both are None when the database
    holds fewer than two classes.
    """

    map: float
    map_at_k: float | None
    k: int | None
    precision_curve: list[tuple[int, float]]
    min_interclass_distance: int | None
    target_distance: int | None
    per_query_ap: list[float] | None


def mean_average_precision(
    query_codes: Sequence[BinaryCode],
    query_labels: np.ndarray,
    database_codes: Sequence[BinaryCode],
    database_labels: np.ndarray,
    k: int | None = None,
    include_per_query: bool = True,
) -> EvalReport:
    """Mean AP over queries with relevance = label equality.

    Rankings use the deterministic (distance, index) order.  The report also
    carries precision@k at cutoffs 1, 5, 10, 50, ... up to the database
    size, and the center-distance diagnostic described on
    :class:`EvalReport`.
    """
    query_codes = list(query_codes)
    database_codes = list(database_codes)
    query_labels = np.asarray(query_labels, dtype=np.int64)
    database_labels = np.asarray(database_labels, dtype=np.int64)
    if not query_codes or not database_codes:
        raise ValueError("query and database must both be nonempty")
    if len(query_codes) != len(query_labels):
        raise ValueError("query labels must match the query codes")
    if len(database_codes) != len(database_labels):
        raise ValueError("database labels must match the database codes")
    length = query_codes[0].length
    if any(c.length != length for c in query_codes + database_codes):
        raise ValueError("all codes must share one length")
    if k is not None and k < 1:
        raise ValueError("k must be >= 1")

    dists = packed_hamming_matrix(word_matrix(query_codes), word_matrix(database_codes))
    order = np.argsort(dists, axis=1, kind="stable")
    relevance = (database_labels[order] == query_labels[:, None]).astype(np.float64)

    positions = np.arange(1, relevance.shape[1] + 1, dtype=np.float64)
    cum_hits = np.cumsum(relevance, axis=1)
    precision = cum_hits / positions

    def _map_at(cutoff: int | None) -> tuple[float, np.ndarray]:
        rel = relevance if cutoff is None else relevance[:, :cutoff]
        prec = precision if cutoff is None else precision[:, :cutoff]
        hits = rel.sum(axis=1)
        ap = np.where(hits > 0, (prec * rel).sum(axis=1) / np.maximum(hits, 1), 0.0)
        return float(ap.mean()), ap

    full_map, per_query = _map_at(None)
    map_at_k = _map_at(k)[0] if k is not None else None

    curve = [
        (cutoff, float(relevance[:, :cutoff].mean()))
        for cutoff in _curve_cutoffs(relevance.shape[1])
    ]

    min_dist: int | None = None
    target: int | None = None
    num_classes = len(np.unique(database_labels))
    if num_classes >= 2:
        centers = class_center_codes(database_codes, database_labels)
        words = centers.word_matrix()
        center_dists = packed_hamming_matrix(words, words)
        iu = np.triu_indices(len(centers), k=1)
        min_dist = int(center_dists[iu].min())
        target = solve_target_distance(BoundProblem(length, num_classes))

    return EvalReport(
        map=full_map,
        map_at_k=map_at_k,
        k=k,
        precision_curve=curve,
        min_interclass_distance=min_dist,
        target_distance=target,
        per_query_ap=per_query.tolist() if include_per_query else None,
    )
