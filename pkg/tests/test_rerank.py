import math
import random

import pytest

from explainrank.errors import DataError
from explainrank.rerank import (
    RerankConfig,
    iterative_rerank,
    rerank_all,
    rerank_score,
    weighted_relevance,
)
from explainrank.scorer import Ranking, initial_ranking, normalize, score_lexical
from explainrank.textsim import default_provider, dense_vector

from synth import random_corpus


def brute_force_rerank(order, rel, vectors, qa, depth):
    """Independent step-by-step simulation of the re-ranking rules using plain
    lists and math, structured nothing like the library implementation."""

    def cos(a, b):
        dot = sum(x * y for x, y in zip(a, b))
        na = math.sqrt(sum(x * x for x in a))
        nb = math.sqrt(sum(x * x for x in b))
        return dot / (na * nb) if na and nb else 0.0

    index = {uid: i for i, uid in enumerate(order)}
    selected = [order[0]]
    while len(selected) < min(depth, len(order)):
        bound = min(depth + len(selected), len(order) - 1)
        window = [uid for uid in order[: bound + 1] if uid not in selected]

        def score(uid):
            num = sum(rel[s] * cos(vectors[uid], vectors[s]) for s in selected)
            den = sum(rel[s] for s in selected)
            return (num / den) * cos(vectors[uid], qa)

        best = min(window, key=lambda uid: (-score(uid), index[uid], uid))
        selected.append(best)
    return selected + [uid for uid in order if uid not in selected]


# Pinned 5-fact instance; expected order derived with brute_force_rerank and
# checked by hand round by round.
PINNED_VECTORS = {
    "f1": [1.0, 0.0, 0.0],
    "f2": [0.8, 0.6, 0.0],
    "f3": [0.0, 1.0, 0.0],
    "f4": [0.6, 0.0, 0.8],
    "f5": [math.sqrt(0.5), math.sqrt(0.5), 0.0],
}
PINNED_QA = [1.0, 0.0, 0.0]
PINNED_REL = {"f1": 1.0, "f2": 0.9, "f3": 0.8, "f4": 0.7, "f5": 0.6}
PINNED_EXPECTED = ["f1", "f2", "f5", "f3", "f4"]


def pinned_instance():
    vectors = {uid: dense_vector(values) for uid, values in PINNED_VECTORS.items()}
    ranking = initial_ranking({"q": PINNED_REL}, "q")
    return ranking, PINNED_REL, vectors, dense_vector(PINNED_QA)


def random_instance(rng, n_facts=None):
    n = n_facts if n_facts is not None else rng.randint(2, 25)
    dim = rng.randint(2, 5)
    vectors = {
        f"f{i:02d}": dense_vector([rng.uniform(-1.0, 2.0) for _ in range(dim)])
        for i in range(n)
    }
    qa = dense_vector([rng.uniform(-1.0, 2.0) for _ in range(dim)])
    rel = {uid: rng.uniform(0.05, 1.0) for uid in vectors}
    ranking = initial_ranking({"q": rel}, "q")
    return ranking, rel, vectors, qa


class TestWeightedRelevance:
    def test_single_selected_equals_similarity(self):
        candidate = dense_vector([1.0, 1.0])
        anchor = dense_vector([1.0, 0.0])
        expected = 1.0 / math.sqrt(2)
        for rel in (0.001, 0.4, 1.0, 250.0):
            assert weighted_relevance(candidate, [(anchor, rel)]) == pytest.approx(
                expected, abs=1e-12
            )

    def test_equal_similarities_collapse(self):
        candidate = dense_vector([1.0, 0.0])
        same = dense_vector([2.0, 0.0])  # cosine 1 regardless of length
        selected = [(same, 0.9), (same, 0.1), (same, 0.5)]
        assert weighted_relevance(candidate, selected) == pytest.approx(1.0, abs=1e-12)

    def test_hand_value(self):
        # rel [0.8, 0.2], sims [0.5, 1.0] -> (0.8*0.5 + 0.2*1.0) / 1.0 = 0.6
        candidate = dense_vector([1.0, 0.0])
        half = dense_vector([1.0, math.sqrt(3)])  # cosine 0.5 with candidate
        aligned = dense_vector([3.0, 0.0])  # cosine 1.0
        value = weighted_relevance(candidate, [(half, 0.8), (aligned, 0.2)])
        assert value == pytest.approx(0.6, abs=1e-12)

    def test_convex_bound(self):
        rng = random.Random(41)
        for _ in range(100):
            dim = rng.randint(2, 4)
            candidate = dense_vector([rng.uniform(-1, 1) for _ in range(dim)])
            selected = [
                (dense_vector([rng.uniform(-1, 1) for _ in range(dim)]), rng.uniform(0.01, 1.0))
                for _ in range(rng.randint(1, 6))
            ]
            from explainrank.textsim import cosine

            sims = [cosine(candidate, vec) for vec, _ in selected]
            value = weighted_relevance(candidate, selected)
            assert min(sims) - 1e-12 <= value <= max(sims) + 1e-12

    def test_empty_selected_rejected(self):
        with pytest.raises(ValueError):
            weighted_relevance(dense_vector([1.0]), [])

    def test_nonpositive_weights_rejected(self):
        candidate = dense_vector([1.0, 0.0])
        with pytest.raises(DataError, match="normalize"):
            weighted_relevance(candidate, [(dense_vector([1.0, 0.0]), 0.0)])


class TestRerankScore:
    def test_zero_qa_similarity_zeroes_score(self):
        candidate = dense_vector([0.0, 1.0])
        qa = dense_vector([1.0, 0.0])
        selected = [(dense_vector([0.0, 2.0]), 0.7)]
        assert rerank_score(candidate, selected, qa) == 0.0

    def test_product(self):
        # W = 0.6 (hand instance above), qa similarity 0.5 -> 0.30
        candidate = dense_vector([1.0, 0.0])
        half = dense_vector([1.0, math.sqrt(3)])
        aligned = dense_vector([3.0, 0.0])
        qa = dense_vector([1.0, math.sqrt(3)])
        value = rerank_score(candidate, [(half, 0.8), (aligned, 0.2)], qa)
        assert value == pytest.approx(0.3, abs=1e-12)

    def test_identical_everything_scores_one(self):
        vec = dense_vector([0.3, 0.4])
        assert rerank_score(vec, [(vec, 0.5), (vec, 0.2)], vec) == pytest.approx(1.0, abs=1e-12)


class TestIterativeRerank:
    def test_depth_one_is_identity(self):
        rng = random.Random(42)
        for _ in range(20):
            ranking, rel, vectors, qa = random_instance(rng)
            out, trace = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=1))
            assert out == ranking
            assert trace.rounds == ()

    def test_pinned_instance_matches_oracle(self):
        ranking, rel, vectors, qa = pinned_instance()
        out, _ = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=3))
        assert out.uids == PINNED_EXPECTED
        oracle = brute_force_rerank(ranking.uids, PINNED_REL, PINNED_VECTORS, PINNED_QA, 3)
        assert out.uids == oracle

    def test_matches_oracle_on_random_instances(self):
        rng = random.Random(43)
        for _ in range(100):
            ranking, rel, vectors, qa = random_instance(rng)
            depth = rng.randint(1, len(ranking.items) + 3)
            out, _ = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=depth))
            raw = {uid: vec.values.tolist() for uid, vec in vectors.items()}
            expected = brute_force_rerank(ranking.uids, rel, raw, qa.values.tolist(), depth)
            assert out.uids == expected

    def test_permutation(self):
        rng = random.Random(44)
        for _ in range(50):
            ranking, rel, vectors, qa = random_instance(rng)
            depth = rng.randint(1, len(ranking.items) + 2)
            out, _ = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=depth))
            assert sorted(out.uids) == sorted(ranking.uids)

    def test_prefix_stability(self):
        rng = random.Random(45)
        for _ in range(50):
            ranking, rel, vectors, qa = random_instance(rng)
            out, _ = iterative_rerank(
                ranking, rel, vectors, qa, RerankConfig(depth=rng.randint(1, 20))
            )
            assert out.uids[0] == ranking.uids[0]

    def test_tail_stability(self):
        rng = random.Random(46)
        for _ in range(50):
            ranking, rel, vectors, qa = random_instance(rng)
            depth = rng.randint(1, 8)
            out, trace = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=depth))
            selected = set(out.uids[: max(1, min(depth, len(ranking.items)))])
            remaining_in = [uid for uid in ranking.uids if uid not in selected]
            remaining_out = [uid for uid in out.uids if uid not in selected]
            assert remaining_in == remaining_out

    def test_relevance_scale_invariance_of_selection(self):
        rng = random.Random(47)
        for _ in range(50):
            ranking, rel, vectors, qa = random_instance(rng)
            depth = rng.randint(1, len(ranking.items))
            base, _ = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=depth))
            for c in (0.25, 2.0, 8.0):  # exact binary scalings
                scaled = {uid: c * value for uid, value in rel.items()}
                out, _ = iterative_rerank(ranking, scaled, vectors, qa, RerankConfig(depth=depth))
                assert out.uids == base.uids

    def test_window_excludes_deep_facts(self):
        # depth 2, one selection round: candidates are initial indices 1..3,
        # so a perfect fact parked at index 4 must not move.
        vectors = {
            "f0": dense_vector([1.0, 0.0]),
            "f1": dense_vector([0.0, 1.0]),
            "f2": dense_vector([0.0, 1.0]),
            "f3": dense_vector([0.0, 1.0]),
            "f4": dense_vector([1.0, 0.0]),
        }
        rel = {"f0": 1.0, "f1": 0.9, "f2": 0.8, "f3": 0.7, "f4": 0.6}
        ranking = initial_ranking({"q": rel}, "q")
        qa = dense_vector([1.0, 0.0])
        out, _ = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=2))
        # all in-window candidates score 0, tie-break keeps initial order
        assert out.uids == ["f0", "f1", "f2", "f3", "f4"]

    def test_window_includes_boundary_index(self):
        # same setup but the perfect fact sits at index 3 = depth + |selected|
        vectors = {
            "f0": dense_vector([1.0, 0.0]),
            "f1": dense_vector([0.0, 1.0]),
            "f2": dense_vector([0.0, 1.0]),
            "f3": dense_vector([1.0, 0.0]),
            "f4": dense_vector([0.0, 1.0]),
        }
        rel = {"f0": 1.0, "f1": 0.9, "f2": 0.8, "f3": 0.7, "f4": 0.6}
        ranking = initial_ranking({"q": rel}, "q")
        qa = dense_vector([1.0, 0.0])
        out, _ = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=2))
        assert out.uids == ["f0", "f3", "f1", "f2", "f4"]

    def test_depth_beyond_corpus_size(self):
        rng = random.Random(48)
        ranking, rel, vectors, qa = random_instance(rng, n_facts=4)
        out, _ = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=50))
        assert sorted(out.uids) == sorted(ranking.uids)

    def test_empty_ranking(self):
        out, trace = iterative_rerank(
            Ranking("q", ()), {}, {}, dense_vector([1.0]), RerankConfig(depth=5)
        )
        assert out.items == ()
        assert trace.rounds == ()

    def test_config_rejects_nonpositive_depth(self):
        with pytest.raises(ValueError):
            RerankConfig(depth=0)


class TestTrace:
    def test_rounds_bounded_and_distinct(self):
        rng = random.Random(49)
        for _ in range(30):
            ranking, rel, vectors, qa = random_instance(rng)
            depth = rng.randint(1, len(ranking.items) + 2)
            _, trace = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=depth))
            assert len(trace.rounds) <= depth - 1 if depth > 1 else not trace.rounds
            chosen = [rnd.selected for rnd in trace.rounds]
            assert len(chosen) == len(set(chosen))

    def test_candidates_recorded_with_scores(self):
        ranking, rel, vectors, qa = pinned_instance()
        _, trace = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=3))
        first = trace.rounds[0]
        assert first.selected == "f2"
        by_uid = {c.uid: c for c in first.candidates}
        assert set(by_uid) == {"f2", "f3", "f4", "f5"}
        assert by_uid["f2"].score == pytest.approx(0.64, abs=1e-12)
        assert by_uid["f2"].qa_sim == pytest.approx(0.8, abs=1e-12)

    def test_format_lines(self):
        ranking, rel, vectors, qa = pinned_instance()
        _, trace = iterative_rerank(ranking, rel, vectors, qa, RerankConfig(depth=3))
        lines = trace.format_lines()
        assert len(lines) == 2
        assert lines[0].startswith("round 1\tselected f2")
        assert "f2:0.64" in lines[0]


class TestRerankAll:
    def test_orders_follow_table_and_jobs_equivalent(self):
        corpus = random_corpus(n_questions=10, n_facts=40, seed=50)
        provider = default_provider(corpus)
        table = score_lexical(corpus, provider)
        serial, _ = rerank_all(corpus, provider, table, RerankConfig(depth=5), jobs=1)
        threaded, _ = rerank_all(corpus, provider, table, RerankConfig(depth=5), jobs=4)
        assert [r.qid for r in serial] == list(table)
        assert serial == threaded

    def test_normalized_scores_used(self):
        # negative external scores still re-rank because of normalization
        corpus = random_corpus(n_questions=3, n_facts=10, seed=51)
        provider = default_provider(corpus)
        table = {
            q.qid: {uid: -float(i) for i, uid in enumerate(corpus.facts)}
            for q in corpus.questions
        }
        rankings, _ = rerank_all(corpus, provider, table, RerankConfig(depth=4))
        for ranking in rankings:
            assert sorted(ranking.uids) == sorted(corpus.facts)
