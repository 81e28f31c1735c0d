import json
import random

import pytest

from app.core.errors import RecordError
from app.kb.schemas import Edp, make_edp_id
from app.kb.utils import build_run_kb, edps_to_units, load_kb, merge_kbs, meta_path, save_kb


def edp(entity, description, run=1, doc_id="d1", chunk_index=0):
    return Edp(entity=entity, description=description, doc_id=doc_id, chunk_index=chunk_index, sample_run=run)


def random_kbs(rng, count):
    pool = [(f"entity {i}", f"fact {i % 7}") for i in range(20)]
    kbs = []
    for run in range(1, count + 1):
        pairs = rng.sample(pool, rng.randint(0, 10))
        kbs.append(build_run_kb([edp(e, f, run, chunk_index=rng.randint(0, 3)) for e, f in pairs], run))
    return kbs


class TestEdpIdentity:
    def test_id_ignores_case_and_whitespace(self):
        a = edp("Ada  Lovelace", "Wrote the first program")
        b = edp("ada lovelace", "wrote  the first\nprogram ")
        assert a.edp_id == b.edp_id == make_edp_id("d1", "Ada Lovelace", "wrote the first program")
        assert a.entity == "Ada  Lovelace"

    def test_id_depends_on_document(self):
        assert edp("A", "b", doc_id="d1").edp_id != edp("A", "b", doc_id="d2").edp_id

    def test_render_text(self):
        record = edp("Ada", "a mathematician").to_record()
        assert record["render_text"] == "Ada: a mathematician"
        assert list(record) == ["edp_id", "entity", "description", "doc_id", "chunk_index", "sample_run", "render_text"]


class TestRunKb:
    def test_duplicates_collapse(self):
        kb = build_run_kb([edp("A", "b", chunk_index=3), edp("a", "B", chunk_index=1)], 1)
        assert len(kb) == 1
        assert kb.sorted_entries()[0].chunk_index == 1

    def test_rejects_other_run(self):
        with pytest.raises(ValueError):
            build_run_kb([edp("A", "b", run=2)], 1)

    def test_rejects_other_document_in_document_scope(self):
        with pytest.raises(ValueError):
            build_run_kb([edp("A", "b", doc_id="d2")], 1, scope="d1")

    def test_empty_run(self):
        kb = build_run_kb([], 4)
        assert len(kb) == 0
        assert kb.runs_included == frozenset({4})


class TestMerge:
    def test_two_kbs(self):
        k1 = build_run_kb([edp("e1", "f1", 1)], 1)
        k2 = build_run_kb([edp("e1", "f1", 2), edp("e2", "f2", 2)], 2)
        merged = merge_kbs([k1, k2])
        assert len(merged) == 2
        assert merged.runs_included == frozenset({1, 2})
        assert merged.kb_id == "corpus:s1+2"
        assert merged.entries[make_edp_id("d1", "e1", "f1")].sample_run == 1

    def test_union_laws(self):
        rng = random.Random(5)
        for _ in range(1000):
            a, b, c = random_kbs(rng, 3)
            ab = merge_kbs([a, b])
            assert ab.entries == merge_kbs([b, a]).entries
            assert merge_kbs([ab, c]).entries == merge_kbs([a, merge_kbs([b, c])]).entries
            assert merge_kbs([a, a]).entries == a.entries
            assert len(ab) >= max(len(a), len(b))
            assert ab.edp_ids == a.edp_ids | b.edp_ids

    def test_size_never_shrinks_with_more_runs(self):
        kbs = random_kbs(random.Random(9), 6)
        sizes = [len(merge_kbs(kbs[:s])) for s in range(1, 7)]
        assert sizes == sorted(sizes)

    def test_errors(self):
        with pytest.raises(ValueError):
            merge_kbs([])
        with pytest.raises(ValueError):
            merge_kbs([build_run_kb([], 1, scope="d1"), build_run_kb([], 2, scope="d2")])


class TestPersistence:
    def test_save_load(self, tmp_path):
        kb = merge_kbs([build_run_kb([edp("B", "two"), edp("A", "one")], 1), build_run_kb([edp("C", "three", 2)], 2)])
        path = tmp_path / "kb.jsonl"
        assert save_kb(kb, path) == 3
        loaded = load_kb(path)
        assert loaded.entries == kb.entries
        assert loaded.runs_included == frozenset({1, 2})
        ids = [json.loads(line)["edp_id"] for line in path.read_text().splitlines()]
        assert ids == sorted(ids)
        assert json.loads(meta_path(path).read_text())["size"] == 3

    def test_save_is_byte_stable(self, tmp_path):
        edps = [edp(f"e{i}", f"f{i}") for i in range(5)]
        save_kb(build_run_kb(edps, 1), tmp_path / "a.jsonl")
        save_kb(build_run_kb(list(reversed(edps)), 1), tmp_path / "b.jsonl")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    @pytest.mark.parametrize(
        "mutate, line",
        [
            (lambda r: r.update(edp_id="0" * 32), 2),
            (lambda r: r.update(render_text="changed"), 2),
            (lambda r: r.pop("entity"), 2),
        ],
    )
    def test_corrupt_lines_are_located(self, tmp_path, mutate, line):
        path = tmp_path / "kb.jsonl"
        save_kb(build_run_kb([edp("A", "one"), edp("B", "two")], 1), path)
        records = [json.loads(x) for x in path.read_text().splitlines()]
        mutate(records[1])
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        with pytest.raises(RecordError) as error:
            load_kb(path)
        assert error.value.line_number == line

    def test_invalid_json_line(self, tmp_path):
        path = tmp_path / "kb.jsonl"
        save_kb(build_run_kb([edp("A", "one")], 1), path)
        path.write_text(path.read_text() + "{not json\n")
        with pytest.raises(RecordError) as error:
            load_kb(path)
        assert error.value.line_number == 2

    def test_gzip_round_trip(self, tmp_path):
        kb = merge_kbs(random_kbs(random.Random(2), 3))
        path = tmp_path / "kb.jsonl.gz"
        assert save_kb(kb, path) == len(kb)
        assert path.read_bytes()[:2] == b"\x1f\x8b"
        loaded = load_kb(path)
        assert loaded.entries == kb.entries
        assert loaded.runs_included == kb.runs_included

    def test_thousand_entries(self, tmp_path):
        edps = [edp(f"entity {i}", f"fact {i}", chunk_index=i % 40) for i in range(1000)]
        kb = build_run_kb(edps, 1)
        path = tmp_path / "kb.jsonl"
        assert save_kb(kb, path) == 1000
        loaded = load_kb(path)
        assert len(loaded) == 1000
        assert loaded.entries == kb.entries

    def test_turing_edp_round_trip(self, tmp_path):
        turing = edp(
            "Alan Turing's contributions",
            "Pioneered modern computing, laid the foundation for artificial intelligence",
        )
        path = tmp_path / "kb.jsonl"
        save_kb(build_run_kb([turing], 1), path)
        [loaded] = load_kb(path).sorted_entries()
        assert (loaded.entity, loaded.description) == (turing.entity, turing.description)
        assert loaded.render_text == (
            "Alan Turing's contributions: Pioneered modern computing, "
            "laid the foundation for artificial intelligence"
        )


def test_edps_to_units():
    kb = build_run_kb([edp("Ada", "a mathematician."), edp("Bob", "a clerk", doc_id="d2")], 1)
    units = edps_to_units(kb)
    assert {u.kind for u in units} == {"edp"}
    ada = next(u for u in units if u.doc_id == "d1")
    assert ada.text == "Ada: a mathematician."
    assert ada.token_count == 5
    assert [u.doc_id for u in edps_to_units(kb, doc_id="d2")] == ["d2"]
