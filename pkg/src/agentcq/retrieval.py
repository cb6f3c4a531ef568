"""Retrieval harness: inverted index, BM25 ranking, optional external
reranking over a wire contract, and NDCG evaluation against graded qrels."""

from __future__ import annotations

import json
import logging
import math
import re
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .domain import ClarifyingQuestion, SimulatedAnswer, Topic
from .errors import AgentCQError, ValidationError
from .ingest import CorpusDoc

logger = logging.getLogger(__name__)

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4
DEFAULT_RERANK_DEPTH = 100
NDCG_CUTOFFS = (1, 5, 10)

REFORMULATION_STRATEGIES = ("query_only", "query_answer", "query_question_answer")

_TOKEN_RE = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Case-fold, split on non-alphanumerics, drop empty tokens."""
    return [t for t in _TOKEN_RE.split(text.casefold()) if t]


@dataclass(frozen=True)
class InvertedIndex:
    postings: dict[str, tuple[tuple[str, int], ...]]
    doc_lengths: dict[str, int]
    doc_count: int
    avg_doc_length: float

    def postings_for(self, term: str) -> tuple[tuple[str, int], ...]:
        return self.postings.get(term, ())

    def document_frequency(self, term: str) -> int:
        return len(self.postings.get(term, ()))


def build_index(corpus: Iterable[CorpusDoc]) -> InvertedIndex:
    """Index a corpus; duplicate doc ids are fatal."""
    doc_lengths: dict[str, int] = {}
    term_docs: dict[str, dict[str, int]] = {}
    for doc in corpus:
        if doc.doc_id in doc_lengths:
            raise ValidationError(f"duplicate doc_id: {doc.doc_id}")
        tokens = tokenize(doc.text)
        doc_lengths[doc.doc_id] = len(tokens)
        for term, count in Counter(tokens).items():
            term_docs.setdefault(term, {})[doc.doc_id] = count
    doc_count = len(doc_lengths)
    avg = sum(doc_lengths.values()) / doc_count if doc_count else 0.0
    postings = {
        term: tuple(sorted(doc_counts.items()))
        for term, doc_counts in term_docs.items()
    }
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        doc_count=doc_count,
        avg_doc_length=avg,
    )


@dataclass(frozen=True)
class RankedList:
    """Ranked documents for one topic-facet with the reformulation used."""

    topic_facet_id: str
    entries: tuple[tuple[str, float], ...]
    reformulation: str

    def __post_init__(self) -> None:
        scores = [score for _, score in self.entries]
        for previous, current in zip(scores, scores[1:]):
            if current > previous:
                raise ValidationError("entry scores must be non-increasing")

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]


def reformulate(
    query: Topic,
    question: ClarifyingQuestion,
    answer: SimulatedAnswer,
    strategy: str = "query_question_answer",
) -> str:
    """Expand the query text with the clarifying exchange.

    A blank answer falls back to query+question concatenation with a warning.
    """
    if strategy not in REFORMULATION_STRATEGIES:
        raise ValidationError(f"strategy must be one of {REFORMULATION_STRATEGIES}")
    if question.topic_id != query.topic_id:
        raise ValidationError(
            f"question {question.question_id} is for topic {question.topic_id}, "
            f"not {query.topic_id}"
        )
    if answer.question_id != question.question_id:
        raise ValidationError(
            f"answer {answer.answer_id} is for question {answer.question_id}, "
            f"not {question.question_id}"
        )
    if strategy == "query_only":
        return query.initial_request
    answer_text = answer.text.strip()
    if not answer_text:
        logger.warning(
            "blank answer %s; falling back to query+question reformulation",
            answer.answer_id,
        )
        return f"{query.initial_request} {question.text}"
    if strategy == "query_answer":
        return f"{query.initial_request} {answer_text}"
    return f"{query.initial_request} {question.text} {answer_text}"


def bm25_search(
    index: InvertedIndex,
    query_text: str,
    k: int,
    *,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    topic_facet_id: str = "",
) -> RankedList:
    """Rank documents for a query; ties break by doc_id ascending.

    Each unique query term contributes
    ``idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))`` with
    ``idf = ln(1 + (N - df + 0.5) / (df + 0.5))``.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    terms = tokenize(query_text)
    if not terms:
        raise ValidationError("query has no tokens after tokenization")
    unique_terms = list(dict.fromkeys(terms))

    scores: dict[str, float] = {}
    n_docs = index.doc_count
    for term in unique_terms:
        postings = index.postings_for(term)
        if not postings:
            continue
        df = len(postings)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        for doc_id, tf in postings:
            dl = index.doc_lengths[doc_id]
            denom = tf + k1 * (1.0 - b + b * dl / index.avg_doc_length)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (k1 + 1.0) / denom

    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    return RankedList(
        topic_facet_id=topic_facet_id,
        entries=tuple(ranked),
        reformulation=query_text,
    )


# --------------------------------------------------------------------------
# External reranking over the scoring wire contract
# --------------------------------------------------------------------------


def _default_post_json(endpoint: str, payload: dict, timeout_s: float) -> dict:
    request = urllib.request.Request(
        endpoint,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout_s) as response:
            return json.loads(response.read().decode("utf-8"))
    except urllib.error.HTTPError as exc:
        raise AgentCQError(f"reranker endpoint returned HTTP {exc.code}") from exc
    except (urllib.error.URLError, TimeoutError) as exc:
        raise AgentCQError(f"reranker endpoint unreachable: {exc}") from exc


def validate_score_response(payload: object, requested_ids: Sequence[str]) -> dict[str, float]:
    """Check a reranker response against the wire contract.

    The response must be an object whose ``scores`` member maps a subset of
    the requested doc ids to finite numbers.
    """
    if not isinstance(payload, dict) or "scores" not in payload:
        raise AgentCQError(f"malformed score payload: missing 'scores' ({payload!r})")
    scores = payload["scores"]
    if not isinstance(scores, dict):
        raise AgentCQError("malformed score payload: 'scores' must be an object")
    requested = set(requested_ids)
    out: dict[str, float] = {}
    for doc_id, value in scores.items():
        if doc_id not in requested:
            raise AgentCQError(f"score for unrequested doc_id {doc_id!r}")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(value):
            raise AgentCQError(f"non-finite score for doc_id {doc_id!r}: {value!r}")
        out[doc_id] = float(value)
    return out


def rerank_external(
    candidates: RankedList,
    query_text: str,
    endpoint: str,
    *,
    doc_texts: Mapping[str, str],
    depth: int = DEFAULT_RERANK_DEPTH,
    timeout_s: float = 30.0,
    post_json: Callable[[str, dict, float], dict] | None = None,
) -> RankedList:
    """Reorder the top ``depth`` candidates by externally returned scores.

    Documents the service does not score keep their original rank positions
    (warning logged); candidates beyond ``depth`` keep their tail positions.
    """
    if not candidates.entries:
        raise ValidationError("candidates must be non-empty")
    post = post_json or _default_post_json
    head = list(candidates.entries[:depth])
    tail = list(candidates.entries[depth:])
    payload = {
        "query_text": query_text,
        "docs": [
            {"doc_id": doc_id, "doc_text": doc_texts.get(doc_id, "")}
            for doc_id, _ in head
        ],
    }
    response = post(endpoint, payload, timeout_s)
    scores = validate_score_response(response, [doc_id for doc_id, _ in head])

    missing = [doc_id for doc_id, _ in head if doc_id not in scores]
    if missing:
        logger.warning(
            "reranker omitted %d doc(s) (%s); they keep their original positions",
            len(missing), ", ".join(missing[:5]),
        )

    scored = sorted(
        ((doc_id, scores[doc_id]) for doc_id, _ in head if doc_id in scores),
        key=lambda item: (-item[1], item[0]),
    )
    missing_set = set(missing)
    reordered: list[tuple[str, float]] = []
    scored_iter = iter(scored)
    for doc_id, original_score in head:
        if doc_id in missing_set:
            reordered.append((doc_id, original_score))
        else:
            reordered.append(next(scored_iter))

    # Entry scores must stay non-increasing; pinned docs inherit the score of
    # their predecessor so mixed scales cannot break the ranking invariant.
    smoothed: list[tuple[str, float]] = []
    for doc_id, score in reordered:
        if smoothed and score > smoothed[-1][1]:
            score = smoothed[-1][1]
        smoothed.append((doc_id, score))
    if tail:
        floor = min(smoothed[-1][1], tail[0][1]) if smoothed else tail[0][1]
        tail = [(doc_id, min(score, floor)) for doc_id, score in tail]
    return RankedList(
        topic_facet_id=candidates.topic_facet_id,
        entries=tuple(smoothed + tail),
        reformulation=candidates.reformulation,
    )


# --------------------------------------------------------------------------
# NDCG
# --------------------------------------------------------------------------


def _gain(relevance: int, gain: str) -> float:
    if gain == "exponential":
        return (2.0**relevance) - 1.0
    return float(relevance)


def ndcg_at_k(
    ranked: RankedList,
    qrels: Mapping[str, int],
    k: int,
    *,
    gain: str = "exponential",
) -> float:
    """Normalized discounted cumulative gain at cutoff ``k``.

    Unjudged documents count as relevance 0; a facet with no relevant
    documents scores 0 (flagged in the log).
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    if gain not in ("exponential", "linear"):
        raise ValidationError("gain must be 'exponential' or 'linear'")
    ideal_grades = sorted(qrels.values(), reverse=True)[:k]
    idcg = sum(
        _gain(grade, gain) / math.log2(position + 1)
        for position, grade in enumerate(ideal_grades, start=1)
    )
    if idcg == 0.0:
        logger.warning(
            "no relevant documents judged for %s; ndcg set to 0",
            ranked.topic_facet_id or "<unknown facet>",
        )
        return 0.0
    dcg = 0.0
    for position, (doc_id, _) in enumerate(ranked.entries[:k], start=1):
        dcg += _gain(qrels.get(doc_id, 0), gain) / math.log2(position + 1)
    return dcg / idcg


# --------------------------------------------------------------------------
# Run evaluation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RetrievalItem:
    """One evaluable (topic, facet, question, answer) exchange."""

    topic: Topic
    facet_id: str
    question: ClarifyingQuestion
    answer: SimulatedAnswer
    question_label: str
    answer_label: str


@dataclass(frozen=True)
class RetrievalRow:
    """Mean NDCG cells for one (question set, answer source, ranker) group."""

    question_label: str
    answer_label: str
    ranker: str
    n_facets: int
    ndcg: dict[int, float]


@dataclass
class RetrievalReport:
    rows: list[RetrievalRow] = field(default_factory=list)
    excluded_facets: int = 0

    def to_table(self) -> str:
        header = ["ranker", "questions", "answers", "n"] + [
            f"ndcg@{k}" for k in NDCG_CUTOFFS
        ]
        lines = ["\t".join(header)]
        for row in self.rows:
            cells = [
                row.ranker,
                row.question_label,
                row.answer_label,
                str(row.n_facets),
            ] + [f"{row.ndcg[k]:.3f}" for k in NDCG_CUTOFFS]
            lines.append("\t".join(cells))
        return "\n".join(lines)


def evaluate_run(
    items: Sequence[RetrievalItem],
    index: InvertedIndex,
    qrels_map: Mapping[str, Mapping[str, int]],
    *,
    strategy: str = "query_question_answer",
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    gain: str = "exponential",
    rerank_endpoint: str | None = None,
    doc_texts: Mapping[str, str] | None = None,
    rerank_depth: int = DEFAULT_RERANK_DEPTH,
    post_json: Callable[[str, dict, float], dict] | None = None,
    cutoff: int = 100,
) -> RetrievalReport:
    """Per-facet NDCG averaged within (question set, answer source, ranker).

    Facets lacking qrels are excluded and counted; the rerank columns appear
    only when an endpoint is configured.
    """
    report = RetrievalReport()
    grouped: dict[tuple[str, str, str], list[dict[int, float]]] = {}
    excluded = 0
    for item in items:
        qrels = qrels_map.get(item.facet_id)
        if not qrels:
            excluded += 1
            continue
        query_text = reformulate(item.topic, item.question, item.answer, strategy)
        ranked = bm25_search(
            index, query_text, cutoff, k1=k1, b=b, topic_facet_id=item.facet_id
        )
        per_ranker: dict[str, RankedList] = {"bm25": ranked}
        if rerank_endpoint and ranked.entries:
            per_ranker["reranked"] = rerank_external(
                ranked,
                query_text,
                rerank_endpoint,
                doc_texts=doc_texts or {},
                depth=rerank_depth,
                post_json=post_json,
            )
        for ranker, ranking in per_ranker.items():
            cells = {k: ndcg_at_k(ranking, qrels, k, gain=gain) for k in NDCG_CUTOFFS}
            grouped.setdefault(
                (item.question_label, item.answer_label, ranker), []
            ).append(cells)

    for (q_label, a_label, ranker), cell_list in sorted(grouped.items()):
        means = {
            k: sum(cells[k] for cells in cell_list) / len(cell_list)
            for k in NDCG_CUTOFFS
        }
        report.rows.append(
            RetrievalRow(
                question_label=q_label,
                answer_label=a_label,
                ranker=ranker,
                n_facets=len(cell_list),
                ndcg=means,
            )
        )
    report.excluded_facets = excluded
    return report


def _register_codecs() -> None:
    from . import ingest

    def decode_row(d: dict) -> RetrievalRow:
        return RetrievalRow(
            question_label=d["question_label"],
            answer_label=d["answer_label"],
            ranker=d["ranker"],
            n_facets=d["n_facets"],
            ndcg={int(k): v for k, v in d["ndcg"].items()},
        )

    ingest.register_record_type("retrieval_row", RetrievalRow, decode=decode_row)


_register_codecs()
