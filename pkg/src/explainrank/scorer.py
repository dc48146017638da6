"""Per-question relevance scores over the fact corpus, and initial rankings.

Scores come either from the built-in lexical scorers (a desk-scale stand-in
for an externally trained relevance model) or from a scores TSV produced by
such a model. Rankings sort by score descending with uid as the tie-break,
so the same table always yields the same ranking.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus
from .errors import DataError, FormatError
from .textsim import cosine, qa_text, tokenize

log = logging.getLogger(__name__)

TFIDF_COSINE = "tfidf"
OVERLAP = "overlap"

# floor of the per-question min-max rescale; keeps every relevance weight
# strictly positive for the weighted re-ranking average
NORM_FLOOR = 1e-6

RelevanceTable = dict[str, dict[str, float]]


@dataclass(frozen=True)
class Ranking:
    """Ordered (fact uid, score) pairs for one question, best first."""

    qid: str
    items: tuple[tuple[str, float], ...]

    @property
    def uids(self) -> list[str]:
        return [uid for uid, _ in self.items]


def score_lexical(corpus: Corpus, provider, method: str = TFIDF_COSINE) -> RelevanceTable:
    """Score every fact for every question.

    tfidf: cosine between the question/answer vector and the fact vector.
    overlap: fraction of the fact's (stop-word-free) token set shared with
    the question/answer token set.
    """
    if method not in (TFIDF_COSINE, OVERLAP):
        raise ValueError(f"unknown scoring method {method!r}")
    table: RelevanceTable = {}
    if method == OVERLAP:
        fact_tokens = {
            uid: set(tokenize(fact.text, drop_stopwords=True))
            for uid, fact in corpus.facts.items()
        }
    else:
        fact_vecs = {uid: provider.vector(fact.text) for uid, fact in corpus.facts.items()}
    for question in corpus.questions:
        try:
            qa = qa_text(question)
        except DataError:
            log.warning("question %s: answer key unresolvable, not scored", question.qid)
            continue
        if method == TFIDF_COSINE:
            qa_vec = provider.vector(qa)
            table[question.qid] = {uid: cosine(qa_vec, vec) for uid, vec in fact_vecs.items()}
        else:
            qa_tokens = set(tokenize(qa, drop_stopwords=True))
            table[question.qid] = {
                uid: (len(qa_tokens & toks) / len(toks) if toks else 0.0)
                for uid, toks in fact_tokens.items()
            }
    return table


def write_scores(table: RelevanceTable, path: str | Path) -> None:
    """Interchange format: one "qid<TAB>fact_uid<TAB>score" line per pair.

    Scores are written with repr so reading the file back reproduces the
    exact floats (and therefore the exact ranking)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, scores in table.items():
            for uid, score in scores.items():
                fh.write(f"{qid}\t{uid}\t{score!r}\n")


def load_scores(path: str | Path, corpus: Corpus) -> RelevanceTable:
    """Load externally computed relevance scores.

    Facts missing for a covered question are filled with that question's
    minimum score minus one so they rank last (with a coverage warning);
    duplicate (qid, fact) pairs keep the last value. Unknown fact uids are a
    hard error; qids not in the corpus are dropped with a warning.
    """
    path = Path(path)
    known_qids = {q.qid for q in corpus.questions}
    raw: dict[str, dict[str, float]] = {}
    unknown_uids: dict[str, int] = {}
    unknown_qids: set[str] = set()
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError(f"{path} line {lineno}: expected qid<TAB>fact_uid<TAB>score")
            qid, uid, score_text = fields
            try:
                score = float(score_text)
            except ValueError:
                raise FormatError(
                    f"{path} line {lineno}: unparseable score {score_text!r}"
                ) from None
            if not math.isfinite(score):
                raise FormatError(f"{path} line {lineno}: non-finite score {score_text!r}")
            if uid not in corpus.facts:
                unknown_uids.setdefault(uid, lineno)
                continue
            if qid not in known_qids:
                unknown_qids.add(qid)
                continue
            per_q = raw.setdefault(qid, {})
            if uid in per_q:
                duplicates += 1
            per_q[uid] = score
    if unknown_uids:
        shown = sorted(unknown_uids.items(), key=lambda item: item[1])[:10]
        listing = ", ".join(f"{uid!r} (line {ln})" for uid, ln in shown)
        more = "" if len(unknown_uids) <= 10 else f" and {len(unknown_uids) - 10} more"
        raise DataError(f"{path}: {len(unknown_uids)} unknown fact uid(s): {listing}{more}")
    if duplicates:
        log.warning("%s: %d duplicate (qid, fact) pair(s), last value kept", path, duplicates)
    if unknown_qids:
        log.warning("%s: %d qid(s) not in the corpus, dropped", path, len(unknown_qids))

    table: RelevanceTable = {}
    missing_pairs = 0
    for question in corpus.questions:
        per_q = raw.get(question.qid)
        if per_q is None:
            continue
        floor = min(per_q.values()) - 1.0
        filled: dict[str, float] = {}
        for uid in corpus.facts:
            if uid in per_q:
                filled[uid] = per_q[uid]
            else:
                filled[uid] = floor
                missing_pairs += 1
        table[question.qid] = filled
    if len(table) < len(known_qids):
        log.warning("%s: scores cover %d of %d questions", path, len(table), len(known_qids))
    if missing_pairs:
        log.warning("%s: %d missing (qid, fact) pair(s) filled to rank last", path, missing_pairs)
    return table


def initial_ranking(table: RelevanceTable, qid: str) -> Ranking:
    """Facts sorted by score descending, ties broken by uid ascending."""
    try:
        scores = table[qid]
    except KeyError:
        raise DataError(f"no relevance scores for question {qid!r}") from None
    items = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return Ranking(qid=qid, items=tuple(items))


def all_rankings(table: RelevanceTable) -> list[Ranking]:
    return [initial_ranking(table, qid) for qid in table]


def normalize(table: RelevanceTable) -> RelevanceTable:
    """Min-max rescale each question's scores into [NORM_FLOOR, 1].

    A strictly increasing map, so ranking order is unchanged, while the
    weighted re-ranking average gets the strictly positive weights it divides
    by even when external scores are negative. Constant score vectors map to
    all ones.
    """
    normalized: RelevanceTable = {}
    for qid, scores in table.items():
        lo = min(scores.values())
        hi = max(scores.values())
        if hi == lo:
            normalized[qid] = {uid: 1.0 for uid in scores}
        else:
            span = hi - lo
            scale = 1.0 - NORM_FLOOR
            normalized[qid] = {
                uid: NORM_FLOOR + (score - lo) / span * scale for uid, score in scores.items()
            }
    return normalized
