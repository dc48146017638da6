"""Iterative greedy re-ranking of the top of each question's ranking.

Starting from the initial top fact, each round scores the not-yet-selected
facts near the top of the initial ranking by their relevance-weighted mean
similarity to everything already selected, times their similarity to the
question/answer text, and commits the best one. Facts the procedure never
reaches keep their initial order, so depth 1 leaves a ranking untouched.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import Corpus
from .errors import DataError
from .evaluation import map_overall
from .scorer import Ranking, RelevanceTable, initial_ranking, normalize
from .textsim import SentenceVector, cosine, fact_vectors, qa_text

log = logging.getLogger(__name__)

DEFAULT_SWEEP = (1, 3, 5, 10, 15, 20, 30)


@dataclass(frozen=True)
class RerankConfig:
    """depth counts the finalized top positions including the kept initial
    top fact, so depth 1 is a no-op."""

    depth: int = 15

    def __post_init__(self) -> None:
        if self.depth < 1:
            raise ValueError("re-ranking depth must be >= 1")


@dataclass(frozen=True)
class CandidateScore:
    uid: str
    weighted_rel: float
    qa_sim: float
    score: float


@dataclass(frozen=True)
class RerankRound:
    number: int
    selected: str
    candidates: tuple[CandidateScore, ...]


@dataclass(frozen=True)
class RerankTrace:
    qid: str
    rounds: tuple[RerankRound, ...]

    def format_lines(self) -> list[str]:
        """One line per round: the committed uid and the top 3 candidates."""
        lines = []
        for rnd in self.rounds:
            top = sorted(rnd.candidates, key=lambda c: (-c.score, c.uid))[:3]
            shown = " ".join(f"{c.uid}:{c.score:.6f}" for c in top)
            lines.append(f"round {rnd.number}\tselected {rnd.selected}\ttop {shown}")
        return lines


def weighted_relevance(
    candidate_vec: SentenceVector, selected: Sequence[tuple[SentenceVector, float]]
) -> float:
    """Relevance-weighted mean cosine similarity between a candidate and the
    already-selected facts: sum(rel_k * sim(candidate, k)) / sum(rel_k).

    A convex combination, so the result stays within the [min, max] of the
    individual similarities and is unchanged when all weights are scaled.
    """
    if not selected:
        raise ValueError("weighted_relevance needs at least one selected fact")
    weighted = 0.0
    total = 0.0
    for vec, rel in selected:
        weighted += rel * cosine(candidate_vec, vec)
        total += rel
    if total <= 0.0:
        raise DataError("relevance weights must be positive; normalize scores first")
    return weighted / total


def rerank_score(
    candidate_vec: SentenceVector,
    selected: Sequence[tuple[SentenceVector, float]],
    qa_vec: SentenceVector,
) -> float:
    """Round score: weighted relevance times similarity to the question/answer."""
    return weighted_relevance(candidate_vec, selected) * cosine(candidate_vec, qa_vec)


def iterative_rerank(
    ranking: Ranking,
    rel_scores: Mapping[str, float],
    vectors: Mapping[str, SentenceVector],
    qa_vec: SentenceVector,
    config: RerankConfig,
) -> tuple[Ranking, RerankTrace]:
    """Greedily rebuild the top config.depth positions of one ranking.

    The initial top fact is kept as the anchor. Each round considers the
    unselected facts whose initial rank index is at most depth plus the
    number already selected (a window sliding forward one position per
    round), commits the rerank_score argmax, and breaks ties by better
    initial rank, then smaller uid. Unselected facts follow in their initial
    order, each with its incoming score, so depth 1 returns the input
    unchanged.

    rel_scores must be strictly positive for every uid in the ranking
    (normalize() guarantees this).
    """
    items = list(ranking.items)
    if not items:
        return ranking, RerankTrace(qid=ranking.qid, rounds=())
    order = [uid for uid, _ in items]
    initial_index = {uid: pos for pos, uid in enumerate(order)}
    original_score = dict(items)

    selected = [order[0]]
    selected_set = {order[0]}
    denom = rel_scores[order[0]]
    # running numerators of the weighted-relevance sum; folded[uid] counts how
    # many selected facts are already accumulated, so each pair is computed once
    numer: dict[str, float] = {}
    folded: dict[str, int] = {}
    qa_sims: dict[str, float] = {}
    rounds: list[RerankRound] = []

    target = min(config.depth, len(order))
    while len(selected) < target:
        window_end = min(config.depth + len(selected), len(order) - 1)
        pool = [uid for uid in order[: window_end + 1] if uid not in selected_set]
        best_uid: str | None = None
        best_key = None
        candidates = []
        for uid in pool:
            acc = numer.get(uid, 0.0)
            for s_uid in selected[folded.get(uid, 0) :]:
                acc += rel_scores[s_uid] * cosine(vectors[uid], vectors[s_uid])
            numer[uid] = acc
            folded[uid] = len(selected)
            w = acc / denom
            qa_sim = qa_sims.get(uid)
            if qa_sim is None:
                qa_sim = cosine(vectors[uid], qa_vec)
                qa_sims[uid] = qa_sim
            score = w * qa_sim
            candidates.append(CandidateScore(uid=uid, weighted_rel=w, qa_sim=qa_sim, score=score))
            key = (-score, initial_index[uid], uid)
            if best_key is None or key < best_key:
                best_key, best_uid = key, uid
        assert best_uid is not None  # the window always reaches an unselected fact
        selected.append(best_uid)
        selected_set.add(best_uid)
        denom += rel_scores[best_uid]
        rounds.append(
            RerankRound(number=len(rounds) + 1, selected=best_uid, candidates=tuple(candidates))
        )

    reordered = selected + [uid for uid in order if uid not in selected_set]
    new_items = tuple((uid, original_score[uid]) for uid in reordered)
    return Ranking(qid=ranking.qid, items=new_items), RerankTrace(
        qid=ranking.qid, rounds=tuple(rounds)
    )


def rerank_all(
    corpus: Corpus,
    provider,
    table: RelevanceTable,
    config: RerankConfig,
    *,
    jobs: int = 1,
    want_trace: bool = False,
) -> tuple[list[Ranking], dict[str, RerankTrace]]:
    """Re-rank every scored question; output follows the table's question order
    regardless of how many worker threads run."""
    normalized = normalize(table)
    vectors = fact_vectors(corpus, provider)
    by_qid = corpus.question_index()
    qids = [qid for qid in table if qid in by_qid]

    def one(qid: str) -> tuple[Ranking, RerankTrace]:
        qa_vec = provider.vector(qa_text(by_qid[qid]))
        base = initial_ranking(normalized, qid)
        return iterative_rerank(base, normalized[qid], vectors, qa_vec, config)

    results: dict[str, tuple[Ranking, RerankTrace]] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            for qid, result in zip(qids, pool.map(one, qids)):
                results[qid] = result
    else:
        for qid in qids:
            results[qid] = one(qid)
    rankings = [results[qid][0] for qid in qids]
    traces = {qid: results[qid][1] for qid in qids} if want_trace else {}
    return rankings, traces


def depth_sweep(
    corpus: Corpus,
    provider,
    table: RelevanceTable,
    depths: Sequence[int],
    *,
    jobs: int = 1,
) -> list[tuple[int, float]]:
    """MAP over the annotated questions after re-ranking at each depth."""
    results = []
    for depth in depths:
        rankings, _ = rerank_all(corpus, provider, table, RerankConfig(depth=depth), jobs=jobs)
        ranked = {r.qid: r.uids for r in rankings}
        results.append((depth, map_overall(ranked, corpus)))
    return results
