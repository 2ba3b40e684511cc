"""Textual abstracts: the concise per-database serialization fed to the
embedding model.

Grammar (\\n line endings, byte-exact):
    Database: <database_name>
    Table: <table_name>
    - Column: <column_name> ; Samples: <v1> | <v2> | <v3>
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, DatabaseSchema, TableData

DEFAULT_SAMPLES_PER_COLUMN = 3
_MAX_SAMPLE_CHARS = 64


@dataclass(frozen=True)
class Abstract:
    db_id: str
    text: str
    samples_per_column: int


def _column_samples(values: list, k: int) -> list[str]:
    """First k distinct non-NULL values in row order, truncated to 64 chars."""
    out: list[str] = []
    seen: set[str] = set()
    for v in values:
        if v is None or v in seen:
            continue
        seen.add(v)
        out.append(v[:_MAX_SAMPLE_CHARS])
        if len(out) == k:
            break
    return out


def serialize_abstract(
    db: DatabaseSchema,
    data: dict[str, TableData],
    samples_per_column: int = DEFAULT_SAMPLES_PER_COLUMN,
) -> Abstract:
    """Serialize one database into its abstract. Pure and deterministic."""
    if samples_per_column < 1:
        raise ValueError("samples_per_column must be >= 1")
    lines = [f"Database: {db.name}"]
    for table in db.tables:
        lines.append(f"Table: {table.name}")
        tdata = data.get(table.name)
        for col in table.columns:
            values = tdata.cells.get(col.name, []) if tdata is not None else []
            samples = _column_samples(values, samples_per_column)
            lines.append(f"- Column: {col.name} ; Samples: {' | '.join(samples)}")
    return Abstract(db_id=db.db_id, text="\n".join(lines) + "\n",
                    samples_per_column=samples_per_column)


def write_abstracts(
    corpus: Corpus, out_dir: Path | str, samples_per_column: int = DEFAULT_SAMPLES_PER_COLUMN
) -> list[Abstract]:
    """Serialize the whole corpus, one <db_id>.abstract.txt per database plus
    a manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    abstracts = []
    for db in corpus.databases:
        data = corpus.load_database(db.db_id)
        abstract = serialize_abstract(db, data, samples_per_column)
        (out_dir / f"{db.db_id}.abstract.txt").write_text(abstract.text, encoding="utf-8")
        abstracts.append(abstract)
    with open(out_dir / "manifest.tsv", "w", encoding="utf-8") as fh:
        fh.write("db_id\tfile\tsamples_per_column\tn_lines\n")
        for a in abstracts:
            n_lines = a.text.count("\n")
            fh.write(f"{a.db_id}\t{a.db_id}.abstract.txt\t{a.samples_per_column}\t{n_lines}\n")
    return abstracts


def read_abstracts(out_dir: Path | str) -> dict[str, str]:
    """Load previously written abstracts keyed by db_id."""
    out_dir = Path(out_dir)
    result = {}
    for path in sorted(out_dir.glob("*.abstract.txt")):
        db_id = path.name[: -len(".abstract.txt")]
        result[db_id] = path.read_text(encoding="utf-8")
    return result
