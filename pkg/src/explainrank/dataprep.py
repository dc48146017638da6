"""Training-dataset generation for relevance learners.

Four dataset variants: classification or regression targets, each with or
without context facts. Positives are the gold facts repeated once per
sampled negative so the classes stay exactly balanced; negatives are the
corpus facts most similar to each gold fact that are not themselves gold
("hard" negatives). Context variants prepend sampled subsets of the gold
set, which only ever appear in training files: ranking at inference sees
the question and answer alone.
"""

from __future__ import annotations

import logging
import random
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import CENTRAL, GROUNDING, LEXGLUE, Corpus, Question, Role
from .errors import DataError, FormatError
from .textsim import cosine, qa_text

log = logging.getLogger(__name__)

CLASSIFICATION = "classification"
REGRESSION = "regression"

CONTEXT_SEPARATOR = " [SEP] "

# regression targets by role; everything else gets PrepConfig.fallback_target
ROLE_TARGETS = {CENTRAL: 6.0, GROUNDING: 5.0, LEXGLUE: 4.0}
NEGATIVE_TARGET = 0.0


@dataclass(frozen=True)
class PrepConfig:
    k: int = 7
    m: int = 3
    seed: int = 13
    with_context: bool = False
    task: str = CLASSIFICATION
    fallback_target: float = 4.0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k (negatives per gold fact) must be >= 1")
        if self.m < 1:
            raise ValueError("m (context subsets per size) must be >= 1")
        if self.task not in (CLASSIFICATION, REGRESSION):
            raise ValueError(f"unknown task {self.task!r}")


@dataclass(frozen=True)
class TrainingExample:
    qid: str
    question_text: str
    context: tuple[str, ...]
    candidate_text: str
    label: float  # 0/1 for classification, {6, 5, 4, 0} for regression
    role: Role | None  # None for sampled negatives


def sample_negatives(
    gold_uid: str,
    gold_uids: frozenset[str] | set[str],
    corpus: Corpus,
    provider,
    k: int,
) -> list[str]:
    """The k corpus facts most cosine-similar to one gold fact that are not in
    the question's gold set, similarity descending, ties by uid ascending.

    Returns fewer than k (with a warning) when the corpus is that small.
    """
    try:
        gold_fact = corpus.facts[gold_uid]
    except KeyError:
        raise DataError(f"gold fact {gold_uid!r} not in corpus") from None
    anchor = provider.vector(gold_fact.text)
    scored = []
    for uid, fact in corpus.facts.items():
        if uid in gold_uids:
            continue
        scored.append((-cosine(anchor, provider.vector(fact.text)), uid))
    scored.sort()
    if len(scored) < k:
        log.warning(
            "gold fact %s: only %d non-gold fact(s) available for k=%d",
            gold_uid,
            len(scored),
            k,
        )
    return [uid for _, uid in scored[:k]]


def build_dataset(corpus: Corpus, provider, cfg: PrepConfig) -> list[TrainingExample]:
    """Generate one dataset variant over all annotated questions.

    Without context, each gold fact contributes one balanced block of
    positives and negatives. With context, blocks are repeated for m sampled
    gold subsets of every size from 1 to |gold| - 1, the candidate always
    outside its context. Per-question RNG streams are derived from
    (seed, qid), so output does not depend on question processing order.
    """
    examples: list[TrainingExample] = []
    warned_roles: set[str] = set()
    for question in corpus.questions:
        if not question.gold:
            continue
        examples.extend(_question_examples(question, corpus, provider, cfg, warned_roles))
    return examples


def _question_examples(
    question: Question,
    corpus: Corpus,
    provider,
    cfg: PrepConfig,
    warned_roles: set[str],
) -> list[TrainingExample]:
    qa = qa_text(question)
    gold_uids = question.gold_uid_set
    negatives: dict[str, list[str]] = {}
    for uid, _ in question.gold:
        if uid not in negatives:
            negatives[uid] = sample_negatives(uid, gold_uids, corpus, provider, cfg.k)

    out: list[TrainingExample] = []
    if not cfg.with_context:
        for uid, role in question.gold:
            out.extend(
                _pair_block(question.qid, qa, (), uid, role, negatives[uid], corpus, cfg, warned_roles)
            )
        return out

    if len(question.gold) < 2:
        log.info("question %s: single gold fact, contributes no context examples", question.qid)
        return out
    rng = random.Random(f"{cfg.seed}|{question.qid}")
    indices = range(len(question.gold))
    for size in range(1, len(question.gold)):
        for _ in range(cfg.m):
            chosen = sorted(rng.sample(indices, size))
            context = tuple(corpus.facts[question.gold[i][0]].text for i in chosen)
            chosen_set = set(chosen)
            for i, (uid, role) in enumerate(question.gold):
                if i in chosen_set:
                    continue
                out.extend(
                    _pair_block(
                        question.qid, qa, context, uid, role, negatives[uid], corpus, cfg, warned_roles
                    )
                )
    return out


def _pair_block(
    qid: str,
    qa: str,
    context: tuple[str, ...],
    uid: str,
    role: Role,
    neg_uids: list[str],
    corpus: Corpus,
    cfg: PrepConfig,
    warned_roles: set[str],
) -> list[TrainingExample]:
    """One positive copy per negative, then the negatives; exactly balanced."""
    if cfg.task == CLASSIFICATION:
        pos_label, neg_label = 1.0, 0.0
    else:
        pos_label = ROLE_TARGETS.get(role)
        if pos_label is None:
            if role.label not in warned_roles:
                warned_roles.add(role.label)
                log.warning(
                    "role %s has no regression target, using fallback %s",
                    role.label,
                    cfg.fallback_target,
                )
            pos_label = cfg.fallback_target
        neg_label = NEGATIVE_TARGET
    candidate = corpus.facts[uid].text
    block = [TrainingExample(qid, qa, context, candidate, pos_label, role) for _ in neg_uids]
    block.extend(
        TrainingExample(qid, qa, context, corpus.facts[neg_uid].text, neg_label, None)
        for neg_uid in neg_uids
    )
    return block


_COLUMNS = ("qid", "question_text", "context", "candidate_text", "label_or_target", "role")


def _clean_field(value: str, what: str) -> str:
    if "\t" in value or "\n" in value or "\r" in value:
        log.warning("%s contains tab/newline characters, replaced with spaces", what)
        value = re.sub(r"[\t\n\r]", " ", value)
    return value


def write_dataset(examples: Sequence[TrainingExample], path: str | Path) -> None:
    """TSV with a header row; context facts joined by the [SEP] marker."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(_COLUMNS) + "\n")
        for ex in examples:
            fields = [
                _clean_field(ex.qid, "qid"),
                _clean_field(ex.question_text, "question text"),
                _clean_field(CONTEXT_SEPARATOR.join(ex.context), "context"),
                _clean_field(ex.candidate_text, "candidate text"),
                repr(ex.label),
                _clean_field(ex.role.label if ex.role is not None else "", "role"),
            ]
            fh.write("\t".join(fields) + "\n")


def read_dataset(path: str | Path) -> list[TrainingExample]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split("\t") != list(_COLUMNS):
        raise FormatError(f"{path}: missing or wrong dataset header")
    examples: list[TrainingExample] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != len(_COLUMNS):
            raise FormatError(f"{path} line {lineno}: expected {len(_COLUMNS)} columns")
        qid, question_text, context_text, candidate, label_text, role_label = fields
        try:
            label = float(label_text)
        except ValueError:
            raise FormatError(f"{path} line {lineno}: bad label {label_text!r}") from None
        context = tuple(context_text.split(CONTEXT_SEPARATOR)) if context_text else ()
        role = Role.parse(role_label) if role_label else None
        examples.append(TrainingExample(qid, question_text, context, candidate, label, role))
    return examples


@dataclass(frozen=True)
class DatasetStats:
    total: int
    positives: int
    negatives: int
    per_label: dict[float, int]
    per_role: dict[str, int]
    per_question: dict[str, int]

    @property
    def balance(self) -> float | None:
        """positive:negative ratio, None when there are no negatives."""
        if self.negatives == 0:
            return None
        return self.positives / self.negatives

    def format_text(self) -> str:
        ratio = "n/a" if self.balance is None else f"{self.balance:.4f}"
        lines = [
            f"examples: {self.total}",
            f"positives: {self.positives}",
            f"negatives: {self.negatives}",
            f"balance (pos:neg): {ratio}",
            f"questions: {len(self.per_question)}",
            "label histogram:",
        ]
        for label in sorted(self.per_label, reverse=True):
            lines.append(f"  {label:g}: {self.per_label[label]}")
        lines.append("positive role counts:")
        for role_label in sorted(self.per_role):
            lines.append(f"  {role_label}: {self.per_role[role_label]}")
        return "\n".join(lines)


def dataset_stats(examples: Sequence[TrainingExample]) -> DatasetStats:
    per_label: Counter[float] = Counter()
    per_role: Counter[str] = Counter()
    per_question: Counter[str] = Counter()
    positives = 0
    for ex in examples:
        per_label[ex.label] += 1
        per_question[ex.qid] += 1
        if ex.label > 0:
            positives += 1
        if ex.role is not None:
            per_role[ex.role.label] += 1
    return DatasetStats(
        total=len(examples),
        positives=positives,
        negatives=len(examples) - positives,
        per_label=dict(per_label),
        per_role=dict(per_role),
        per_question=dict(per_question),
    )
