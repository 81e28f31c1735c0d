import json
import math
import random

import pytest

from app.core.errors import ConfigurationError, RecordError
from app.retrieval.schemas import RetrievalUnit
from app.retrieval.utils import (
    analyze,
    build_index,
    build_scoped_indexes,
    chunks_to_units,
    idf,
    load_external_units,
    load_index,
    load_scoped_indexes,
    rank,
    render_context,
    retrieve_under_budget,
    save_index,
    save_scoped_indexes,
    score,
    score_all,
    score_naive,
)
from app.text.schemas import Chunk

VOCAB = ["lamp", "keeper", "storm", "bay", "harbour", "net", "boat", "reef", "tide", "stone"]


def unit(unit_id, text, token_count=None, doc_id="d1"):
    return RetrievalUnit(
        unit_id=unit_id,
        kind="edp",
        text=text,
        token_count=len(text.split()) if token_count is None else token_count,
        doc_id=doc_id,
    )


def random_units(rng, count):
    return [
        unit(f"u{i:02d}", " ".join(rng.choice(VOCAB) for _ in range(rng.randint(1, 8))))
        for i in range(count)
    ]


ABC = [unit("u1", "a b"), unit("u2", "b c"), unit("u3", "c d")]


class TestIndex:
    def test_bookkeeping(self):
        index = build_index(ABC)
        assert index.n_docs == 3
        assert index.avgdl == 2.0
        assert index.doc_freq("b") == 2
        assert index.postings["b"] == {"u1": 1, "u2": 1}

    def test_errors(self):
        with pytest.raises(ValueError):
            build_index([])
        with pytest.raises(ValueError):
            build_index([unit("u1", "a"), unit("u1", "b")])

    def test_analyzer_drops_punctuation(self):
        assert analyze("The Keeper's lamp, lit!") == ["the", "keeper", "s", "lamp", "lit"]


class TestScore:
    def test_hand_value(self):
        index = build_index(ABC)
        assert idf(index, "b") == pytest.approx(math.log(1.6), abs=1e-12)
        assert score(index, "b", "u1") == pytest.approx(math.log(1.6), abs=1e-9)
        assert score(index, "b", "u3") == 0.0

    def test_absent_term_contributes_nothing(self):
        index = build_index(ABC)
        assert score(index, "b zebra", "u1") == pytest.approx(score(index, "b", "u1"))

    def test_unknown_unit(self):
        with pytest.raises(KeyError):
            score(build_index(ABC), "b", "missing")

    def test_scores_never_negative(self):
        units = [unit(f"u{i}", "lamp keeper") for i in range(5)] + [unit("x", "storm")]
        assert all(s >= 0 for s in score_all(build_index(units), "lamp keeper storm").values())

    def test_matches_naive_scorer(self):
        rng = random.Random(3)
        for _ in range(100):
            units = random_units(rng, rng.randint(1, 50))
            query = " ".join(rng.sample(VOCAB, 3))
            indexed = score_all(build_index(units), query)
            naive = score_naive(units, query)
            assert indexed.keys() == naive.keys()
            for unit_id in naive:
                assert indexed[unit_id] == pytest.approx(naive[unit_id], abs=1e-9)
            assert [u for u, _ in rank(build_index(units), query)] == [
                u for u, _ in sorted(naive.items(), key=lambda item: (-item[1], item[0]))
            ]

    def test_duplicated_corpus_scores_copies_equally(self):
        units = [unit("a", "lamp keeper"), unit("b", "storm bay"), unit("c", "lamp storm"), unit("d", "net")]
        doubled = units + [unit(u.unit_id + "'", u.text) for u in units]
        index = build_index(doubled)
        assert index.avgdl == build_index(units).avgdl
        scores = score_all(index, "lamp storm")
        for u in units:
            assert scores[u.unit_id] == scores[u.unit_id + "'"]


class TestBudget:
    def test_budget_zero(self):
        ctx = retrieve_under_budget(build_index(ABC), ABC, "b", 0)
        assert ctx.selected == []
        assert ctx.used_tokens == 0
        assert len(ctx.hits) == 3

    def test_strict_prefix(self):
        units = [unit("a", "x", 4), unit("b", "y", 3), unit("c", "z", 5)]
        ctx = retrieve_under_budget(build_index(units), units, "nothing", 8)
        assert ctx.selected == ["a", "b"]
        assert ctx.used_tokens == 7

    def test_stops_at_first_overflow(self):
        units = [unit("a", "x", 4), unit("b", "y", 9), unit("c", "z", 1)]
        ctx = retrieve_under_budget(build_index(units), units, "nothing", 8)
        assert ctx.selected == ["a"]

    def test_saturation(self):
        ctx = retrieve_under_budget(build_index(ABC), ABC, "b", 1000)
        assert ctx.selected == [u for u, _ in ctx.hits]
        assert ctx.used_tokens == 6

    def test_negative_budget(self):
        with pytest.raises(ValueError):
            retrieve_under_budget(build_index(ABC), ABC, "b", -1)

    def test_monotone_in_budget(self):
        rng = random.Random(8)
        for _ in range(60):
            units = random_units(rng, 30)
            index = build_index(units)
            query = " ".join(rng.sample(VOCAB, 2))
            previous = []
            for budget in range(0, 120, 7):
                ctx = retrieve_under_budget(index, units, query, budget)
                assert ctx.used_tokens <= budget
                assert ctx.selected[: len(previous)] == previous
                previous = ctx.selected

    def test_deterministic(self):
        units = random_units(random.Random(1), 20)
        first = retrieve_under_budget(build_index(units), units, "lamp reef", 30)
        second = retrieve_under_budget(build_index(list(reversed(units))), units, "lamp reef", 30)
        assert first == second


class TestRender:
    def test_lines_in_rank_order(self):
        units = [unit("a", "lamp  keeper\nlit"), unit("b", "lamp")]
        ctx = retrieve_under_budget(build_index(units), units, "keeper", 100)
        assert render_context(ctx, units) == "- lamp keeper lit\n- lamp"

    def test_empty_selection(self):
        ctx = retrieve_under_budget(build_index(ABC), ABC, "b", 0)
        assert render_context(ctx, ABC) == ""


class TestPersistence:
    def test_index_round_trip(self, tmp_path):
        index = build_index(ABC)
        save_index(index, tmp_path / "index.json")
        assert load_index(tmp_path / "index.json") == index

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "index.json"
        save_index(build_index(ABC), path)
        payload = json.loads(path.read_text())
        payload["version"] = 99
        path.write_text(json.dumps(payload))
        with pytest.raises(ConfigurationError):
            load_index(path)

    def test_scoped_indexes(self, tmp_path):
        units = [unit("a", "lamp", doc_id="d1"), unit("b", "storm", doc_id="d2"), unit("c", "lamp bay", doc_id="d2")]
        indexes = build_scoped_indexes(units, "document")
        assert sorted(indexes) == ["d1", "d2"]
        assert indexes["d2"].n_docs == 2
        save_scoped_indexes(indexes, "document", tmp_path / "scoped.json")
        scope, loaded = load_scoped_indexes(tmp_path / "scoped.json")
        assert scope == "document"
        assert loaded == indexes
        assert list(build_scoped_indexes(units, "corpus")) == ["corpus"]
        with pytest.raises(ValueError):
            build_scoped_indexes(units, "galaxy")


class TestUnits:
    def test_chunk_units(self):
        chunks = [Chunk(doc_id="d1", chunk_index=2, text="One two.", token_count=3, sentence_range=(0, 0))]
        [u] = chunks_to_units(chunks)
        assert u.unit_id == "d1#00002"
        assert u.kind == "chunk"
        assert u.token_count == 3

    def test_external_units(self, tmp_path):
        path = tmp_path / "props.jsonl"
        path.write_text(
            '{"unit_id": "p1", "doc_id": "d1", "text": "Agnes keeps the lamp."}\n'
            '{"unit_id": "p2", "doc_id": "d1"}\n'
        )
        with pytest.raises(RecordError) as error:
            load_external_units(path)
        assert error.value.line_number == 2
        path.write_text('{"unit_id": "p1", "doc_id": "d1", "text": "Agnes keeps the lamp."}\n')
        [u] = load_external_units(path)
        assert u.kind == "external_proposition"
        assert u.token_count == 5
