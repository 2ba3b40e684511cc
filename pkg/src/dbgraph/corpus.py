"""Loading and validation of a directory-based corpus of relational databases.

Corpus layout: one directory per database (zero-padded decimal name used as
db_id) containing a ``schema.json`` descriptor and one CSV data file per
table. Empty cells and the literal token ``NULL`` decode to absent values.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional


class CorpusError(Exception):
    """Fatal corpus-level failure (unreadable root, bad table scan)."""


class ColumnType(Enum):
    STRING = "string"
    INTEGER = "integer"
    FLOAT = "float"
    DATE = "date"
    BOOLEAN = "boolean"
    OTHER = "other"


# Alphabet size used by type-set metrics downstream.
TYPE_ALPHABET = tuple(ColumnType)

_TYPE_ALIASES = {
    "string": ColumnType.STRING,
    "str": ColumnType.STRING,
    "varchar": ColumnType.STRING,
    "char": ColumnType.STRING,
    "text": ColumnType.STRING,
    "integer": ColumnType.INTEGER,
    "int": ColumnType.INTEGER,
    "bigint": ColumnType.INTEGER,
    "smallint": ColumnType.INTEGER,
    "tinyint": ColumnType.INTEGER,
    "float": ColumnType.FLOAT,
    "double": ColumnType.FLOAT,
    "real": ColumnType.FLOAT,
    "decimal": ColumnType.FLOAT,
    "numeric": ColumnType.FLOAT,
    "date": ColumnType.DATE,
    "datetime": ColumnType.DATE,
    "timestamp": ColumnType.DATE,
    "time": ColumnType.DATE,
    "boolean": ColumnType.BOOLEAN,
    "bool": ColumnType.BOOLEAN,
}


def parse_data_type(raw: str) -> ColumnType:
    """Fold a raw type string into the six-variant alphabet. Total function:
    unrecognized strings map to OTHER."""
    return _TYPE_ALIASES.get(raw.strip().lower(), ColumnType.OTHER)


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    data_type: ColumnType
    ordinal: int


@dataclass(frozen=True)
class ForeignKey:
    from_table: str
    from_column: str
    to_table: str
    to_column: str


@dataclass
class TableSchema:
    name: str
    columns: list[ColumnSchema]
    data_file: str
    row_count: int = 0


@dataclass
class DatabaseSchema:
    db_id: str
    name: str
    tid: Optional[str]
    tables: list[TableSchema]
    foreign_keys: list[ForeignKey]

    def table(self, name: str) -> TableSchema:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    @property
    def n_columns(self) -> int:
        return sum(len(t.columns) for t in self.tables)


@dataclass
class TableData:
    table: str
    # column name -> list of optional cell values; None encodes NULL
    cells: dict[str, list[Optional[str]]]
    row_count: int


@dataclass(frozen=True)
class Diagnostic:
    db_id: str
    message: str
    fatal: bool = True  # fatal: database skipped; non-fatal: loaded with flag


@dataclass
class Corpus:
    root: Path
    databases: list[DatabaseSchema]
    diagnostics: list[Diagnostic]
    _data_cache: dict[tuple[str, str], TableData] = field(default_factory=dict)

    def database(self, db_id: str) -> DatabaseSchema:
        for db in self.databases:
            if db.db_id == db_id:
                return db
        raise KeyError(db_id)

    def load_table(self, db_id: str, table_name: str) -> TableData:
        """Lazy, idempotent table-data load."""
        key = (db_id, table_name)
        if key not in self._data_cache:
            db = self.database(db_id)
            table = db.table(table_name)
            path = self.root / db_id / table.data_file
            data = scan_table(path, table)
            table.row_count = data.row_count
            self._data_cache[key] = data
        return self._data_cache[key]

    def load_database(self, db_id: str) -> dict[str, TableData]:
        db = self.database(db_id)
        return {t.name: self.load_table(db_id, t.name) for t in db.tables}


def scan_table(data_file: Path | str, schema: TableSchema) -> TableData:
    """Read one CSV data file against its table schema.

    Header must match the schema's column names in order; ragged rows are
    rejected with the offending row index.
    """
    data_file = Path(data_file)
    expected = [c.name for c in schema.columns]
    with open(data_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{data_file}: empty file, header row required")
        if header != expected:
            for got, want in zip(header, expected):
                if got != want:
                    raise CorpusError(
                        f"{data_file}: header mismatch at column {want!r} (got {got!r})"
                    )
            raise CorpusError(
                f"{data_file}: header has {len(header)} columns, expected {len(expected)}"
            )
        cells: dict[str, list[Optional[str]]] = {name: [] for name in expected}
        n = 0
        for idx, row in enumerate(reader):
            if len(row) != len(expected):
                raise CorpusError(
                    f"{data_file}: row {idx}: expected {len(expected)} fields, got {len(row)}"
                )
            for name, value in zip(expected, row):
                cells[name].append(None if value == "" or value == "NULL" else value)
            n += 1
    return TableData(table=schema.name, cells=cells, row_count=n)


def _parse_descriptor(db_id: str, descriptor: dict, db_dir: Path) -> DatabaseSchema:
    """Build a DatabaseSchema from a parsed schema.json, enforcing invariants."""
    name = descriptor.get("name")
    if not name or not isinstance(name, str):
        raise ValueError("database name missing")
    tid = descriptor.get("tid")
    tables_raw = descriptor.get("tables")
    if not tables_raw:
        raise ValueError("database has no tables")

    tables: list[TableSchema] = []
    seen_tables: set[str] = set()
    for traw in tables_raw:
        tname = traw.get("name")
        if not tname:
            raise ValueError("table name missing")
        if tname in seen_tables:
            raise ValueError(f"duplicate table name {tname!r}")
        seen_tables.add(tname)
        cols: list[ColumnSchema] = []
        seen_cols: set[str] = set()
        for ordinal, craw in enumerate(traw.get("columns", [])):
            cname = craw.get("name")
            if not cname:
                raise ValueError(f"table {tname!r}: column name missing")
            if cname in seen_cols:
                raise ValueError(f"table {tname!r}: duplicate column name {cname!r}")
            seen_cols.add(cname)
            cols.append(
                ColumnSchema(
                    name=cname,
                    data_type=parse_data_type(craw.get("type", "")),
                    ordinal=ordinal,
                )
            )
        if not cols:
            raise ValueError(f"table {tname!r} has no columns")
        data_file = traw.get("data_file", f"{tname}.csv")
        if not (db_dir / data_file).is_file():
            raise ValueError(f"table {tname!r}: missing data file {data_file!r}")
        tables.append(TableSchema(name=tname, columns=cols, data_file=data_file))

    fks: list[ForeignKey] = []
    by_name = {t.name: t for t in tables}
    for fraw in descriptor.get("foreign_keys", []):
        fk = ForeignKey(
            from_table=fraw["from_table"],
            from_column=fraw["from_column"],
            to_table=fraw["to_table"],
            to_column=fraw["to_column"],
        )
        for tbl, col in ((fk.from_table, fk.from_column), (fk.to_table, fk.to_column)):
            if tbl not in by_name:
                raise ValueError(f"foreign key references unknown table {tbl!r}")
            if col not in {c.name for c in by_name[tbl].columns}:
                raise ValueError(f"foreign key references unknown column {tbl}.{col}")
        fks.append(fk)

    return DatabaseSchema(db_id=db_id, name=name, tid=tid, tables=tables, foreign_keys=fks)


def load_corpus(root_path: Path | str) -> Corpus:
    """Load every database directory under the root.

    A malformed database is skipped with a diagnostic; only an unreadable
    root is fatal. Databases come back in lexicographic db_id order.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusError(f"corpus root {root} is not a readable directory")

    databases: list[DatabaseSchema] = []
    diagnostics: list[Diagnostic] = []
    for entry in sorted(os.listdir(root)):
        db_dir = root / entry
        if not db_dir.is_dir():
            continue
        descriptor_path = db_dir / "schema.json"
        if not descriptor_path.is_file():
            diagnostics.append(Diagnostic(entry, "missing schema.json descriptor"))
            continue
        try:
            with open(descriptor_path, encoding="utf-8") as fh:
                descriptor = json.load(fh)
            db = _parse_descriptor(entry, descriptor, db_dir)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            diagnostics.append(Diagnostic(entry, str(exc)))
            continue
        if len(db.tables) == 1:
            diagnostics.append(Diagnostic(entry, "database has a single table", fatal=False))
        databases.append(db)
    return Corpus(root=root, databases=databases, diagnostics=diagnostics)


def write_manifest(corpus: Corpus, path: Path | str) -> None:
    """Write the normalized corpus manifest (TSV)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("db_id\tname\ttid\tn_tables\tn_columns\n")
        for db in corpus.databases:
            fh.write(
                f"{db.db_id}\t{db.name}\t{db.tid or ''}\t{len(db.tables)}\t{db.n_columns}\n"
            )
