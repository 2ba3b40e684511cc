import json

import pytest

from dbgraph.corpus import (
    ColumnType,
    CorpusError,
    TableSchema,
    ColumnSchema,
    load_corpus,
    parse_data_type,
    scan_table,
    write_manifest,
)


class TestParseDataType:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("VARCHAR", ColumnType.STRING),
            ("text", ColumnType.STRING),
            ("int", ColumnType.INTEGER),
            ("BIGINT", ColumnType.INTEGER),
            ("double", ColumnType.FLOAT),
            ("real", ColumnType.FLOAT),
            ("decimal", ColumnType.FLOAT),
            ("timestamp", ColumnType.DATE),
            ("bool", ColumnType.BOOLEAN),
            ("geometry", ColumnType.OTHER),
            ("", ColumnType.OTHER),
        ],
    )
    def test_aliases(self, raw, expected):
        assert parse_data_type(raw) is expected


def _table(columns, data_file="t.csv", name="t"):
    return TableSchema(
        name=name,
        columns=[
            ColumnSchema(name=c, data_type=ColumnType.STRING, ordinal=i)
            for i, c in enumerate(columns)
        ],
        data_file=data_file,
    )


class TestScanTable:
    def test_basic_read_with_null(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,c\n1,x,y\n2,,z\n3,x,y\n4,x,NULL\n5,x,y\n")
        data = scan_table(path, _table(["a", "b", "c"]))
        assert data.row_count == 5
        assert data.cells["b"][1] is None
        assert data.cells["c"][3] is None
        assert sum(v is None for col in data.cells.values() for v in col) == 2

    def test_header_only(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n")
        assert scan_table(path, _table(["a", "b"])).row_count == 0

    def test_ragged_row(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,c\n1,2,3\n1,2,3\n1,2\n")
        with pytest.raises(CorpusError, match="row 2: expected 3 fields"):
            scan_table(path, _table(["a", "b", "c"]))

    def test_header_mismatch_names_first_divergent(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,wrong,c\n1,2,3\n")
        with pytest.raises(CorpusError, match="'b'"):
            scan_table(path, _table(["a", "b", "c"]))


class TestLoadCorpus:
    def test_fixture_loads_clean(self, corpus10):
        assert len(corpus10.databases) == 10
        assert not corpus10.diagnostics
        assert [db.db_id for db in corpus10.databases] == sorted(
            db.db_id for db in corpus10.databases
        )

    def test_missing_data_file_skips_db(self, corpus_copy):
        (corpus_copy / "00003" / "orders.csv").unlink()
        corpus = load_corpus(corpus_copy)
        assert len(corpus.databases) == 9
        fatal = [d for d in corpus.diagnostics if d.fatal]
        assert len(fatal) == 1
        assert "orders.csv" in fatal[0].message

    def test_duplicate_table_rejected(self, corpus_copy):
        descriptor_path = corpus_copy / "00005" / "schema.json"
        descriptor = json.loads(descriptor_path.read_text())
        descriptor["tables"].append(dict(descriptor["tables"][0]))
        descriptor_path.write_text(json.dumps(descriptor))
        corpus = load_corpus(corpus_copy)
        assert len(corpus.databases) == 9
        assert any("duplicate table" in d.message for d in corpus.diagnostics)

    def test_loaded_plus_skipped_equals_dirs(self, corpus_copy):
        (corpus_copy / "00001" / "schema.json").unlink()
        corpus = load_corpus(corpus_copy)
        fatal = [d for d in corpus.diagnostics if d.fatal]
        assert len(corpus.databases) + len(fatal) == 10

    def test_unreadable_root_fatal(self, tmp_path):
        with pytest.raises(CorpusError):
            load_corpus(tmp_path / "nope")

    def test_lazy_load_idempotent(self, corpus10):
        first = corpus10.load_table("00000", "people")
        second = corpus10.load_table("00000", "people")
        assert first is second
        assert corpus10.database("00000").table("people").row_count == first.row_count

    def test_roundtrip_reload_identical(self, corpus10, corpus10_root):
        again = load_corpus(corpus10_root)
        assert [db.db_id for db in again.databases] == [
            db.db_id for db in corpus10.databases
        ]
        for a, b in zip(again.databases, corpus10.databases):
            assert a == b

    def test_manifest(self, corpus10, tmp_path):
        path = tmp_path / "manifest.tsv"
        write_manifest(corpus10, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "db_id\tname\ttid\tn_tables\tn_columns"
        assert len(lines) == 11
        assert lines[1].startswith("00000\tSampleDb00000\tQ100\t2\t8")
