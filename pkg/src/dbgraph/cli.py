"""Pipeline orchestration: every stage as a subcommand plus ``all``.

Stages are pure functions of (inputs, config); each writes its artifact and
a run manifest (config hash, input hashes, version) so reruns with
unchanged inputs are byte-identical.

Exit codes: 0 success, 2 missing stage input, 3 invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Optional

import numpy as np
import tomli

from . import __version__
from . import corpus as corpus_mod
from . import embeddings as emb_mod
from . import graph as graph_mod
from . import pairs as pairs_mod
from . import profiler as prof_mod
from . import serializer as ser_mod

EXIT_OK = 0
EXIT_MISSING_INPUT = 2
EXIT_INVARIANT = 3

STAGES = (
    "ingest", "serialize", "pairs", "join", "graph-stats", "communities",
    "node-props", "edge-props",
)


class MissingInput(Exception):
    def __init__(self, path):
        super().__init__(f"missing stage input: {path}")
        self.path = str(path)


@dataclass
class PipelineConfig:
    corpus_root: str = "corpus"
    out_dir: str = "out"
    samples_per_column: int = 3
    split_ratios: tuple = (7, 1, 2)
    seed: int = 0
    negatives_k: int = 6
    threshold: float = emb_mod.DEFAULT_THRESHOLD
    tile: int = 256
    workers: int = 1
    embedding_store: Optional[str] = None
    embedding_endpoint: Optional[str] = None
    embedding_dim: int = emb_mod.DEFAULT_DIM
    cluster_labels: Optional[str] = None
    use_weights: bool = True

    def validate(self) -> None:
        if not (-1.0 < self.threshold <= 1.0):
            raise ValueError("threshold must be in (-1, 1]")
        if self.negatives_k < 1:
            raise ValueError("negatives_k must be >= 1")
        if len(self.split_ratios) != 3 or any(r <= 0 for r in self.split_ratios):
            raise ValueError("split_ratios must be three positive numbers")


def load_config(path: Optional[str]) -> PipelineConfig:
    config = PipelineConfig()
    if path:
        with open(path, "rb") as fh:
            raw = tomli.load(fh)
        for key, value in raw.items():
            if not hasattr(config, key):
                raise ValueError(f"unknown config key {key!r}")
            if key == "split_ratios":
                value = tuple(value)
            setattr(config, key, value)
    return config


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_run_manifest(config: PipelineConfig, stage: str, inputs: list[Path]) -> None:
    out = Path(config.out_dir)
    cfg = asdict(config)
    cfg["split_ratios"] = list(config.split_ratios)
    payload = {
        "stage": stage,
        "version": __version__,
        "config": cfg,
        "config_hash": hashlib.sha256(
            json.dumps(cfg, sort_keys=True).encode()
        ).hexdigest(),
        "inputs": {str(p): _sha256(p) for p in sorted(inputs) if p.is_file()},
    }
    with open(out / f"{stage}.manifest.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_corpus(config: PipelineConfig) -> corpus_mod.Corpus:
    root = Path(config.corpus_root)
    if not root.is_dir():
        raise MissingInput(root)
    return corpus_mod.load_corpus(root)


def stage_ingest(config: PipelineConfig) -> None:
    corpus = _load_corpus(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_manifest(corpus, out / "manifest.tsv")
    with open(out / "diagnostics.tsv", "w", encoding="utf-8") as fh:
        fh.write("db_id\tfatal\tmessage\n")
        for d in corpus.diagnostics:
            fh.write(f"{d.db_id}\t{int(d.fatal)}\t{d.message}\n")
    _write_run_manifest(config, "ingest", [])


def stage_serialize(config: PipelineConfig) -> None:
    corpus = _load_corpus(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ser_mod.write_abstracts(corpus, out / "abstracts", config.samples_per_column)
    _write_run_manifest(config, "serialize", [])


def stage_pairs(config: PipelineConfig) -> None:
    corpus = _load_corpus(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pair_set = pairs_mod.extract_explicit_pairs(corpus)
    split = pairs_mod.split_pairs(pair_set, config.split_ratios, config.seed)
    triplets = pairs_mod.sample_triplets(pair_set, split, config.negatives_k, config.seed)
    pairs_mod.write_pairs(pair_set, out / "pairs.tsv")
    pairs_mod.write_splits(split, out / "splits.tsv")
    pairs_mod.write_triplets(triplets, out / "triplets.tsv")
    _write_run_manifest(config, "pairs", [])


def fetch_embeddings(
    abstracts: dict[str, str],
    endpoint: str,
    dim: int,
    batch_size: int = 32,
    retries: int = 3,
) -> emb_mod.EmbeddingMatrix:
    """POST abstract batches to a one-route embedding service.

    Request: ``{"texts": [...]}``; response: ``{"embeddings": [[...]]}``
    with one dim-length vector per text, in input order.
    """
    import requests

    ids = sorted(abstracts)
    rows: list[list[float]] = []
    for start in range(0, len(ids), batch_size):
        batch = [abstracts[i] for i in ids[start:start + batch_size]]
        last_error: Optional[Exception] = None
        for _ in range(retries):
            try:
                resp = requests.post(endpoint, json={"texts": batch}, timeout=60)
                resp.raise_for_status()
                vectors = resp.json()["embeddings"]
                last_error = None
                break
            except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                last_error = exc
        if last_error is not None:
            raise RuntimeError(f"embedding endpoint failed after {retries} tries: {last_error}")
        if len(vectors) != len(batch):
            raise ValueError(f"endpoint returned {len(vectors)} vectors for {len(batch)} texts")
        for vec in vectors:
            if len(vec) != dim:
                raise ValueError(f"endpoint returned {len(vec)}-dim vector, expected {dim}")
            rows.append(vec)
    return emb_mod.make_matrix(ids, np.array(rows, dtype=np.float32))


def _embedding_matrix(config: PipelineConfig) -> emb_mod.EmbeddingMatrix:
    if config.embedding_store:
        prefix = Path(config.embedding_store)
        if not Path(f"{prefix}.meta.json").is_file():
            if config.embedding_endpoint:
                abstracts_dir = Path(config.out_dir) / "abstracts"
                if not abstracts_dir.is_dir():
                    raise MissingInput(abstracts_dir)
                abstracts = ser_mod.read_abstracts(abstracts_dir)
                matrix = fetch_embeddings(
                    abstracts, config.embedding_endpoint, config.embedding_dim
                )
                emb_mod.store_embeddings(matrix, prefix)
                return matrix
            raise MissingInput(f"{prefix}.meta.json")
        return emb_mod.load_embeddings(prefix)
    raise MissingInput("embedding_store (not configured)")


def stage_join(config: PipelineConfig) -> None:
    matrix = _embedding_matrix(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    edges = emb_mod.threshold_join(matrix, config.threshold, config.tile, config.workers)
    emb_mod.write_edges(edges, matrix.ids, out / "edges.tsv")
    _write_run_manifest(config, "join", [Path(f"{config.embedding_store}.f32le")])


def _load_edges(config: PipelineConfig) -> tuple[emb_mod.EmbeddingMatrix, emb_mod.EdgeList]:
    edges_path = Path(config.out_dir) / "edges.tsv"
    if not edges_path.is_file():
        raise MissingInput(edges_path)
    matrix = _embedding_matrix(config)
    edges = emb_mod.read_edges(edges_path, matrix.ids, config.threshold)
    return matrix, edges


def stage_graph_stats(config: PipelineConfig) -> None:
    matrix, edges = _load_edges(config)
    graph = graph_mod.build_graph(edges, len(matrix))
    stats = graph_mod.degree_stats(graph)
    out = Path(config.out_dir)
    with open(out / "graph_stats.json", "w", encoding="utf-8") as fh:
        json.dump(graph_mod.stats_report(stats, config.threshold), fh,
                  sort_keys=True, indent=2)
        fh.write("\n")
    _write_run_manifest(config, "graph-stats", [out / "edges.tsv"])


def stage_communities(config: PipelineConfig) -> None:
    matrix, edges = _load_edges(config)
    graph = graph_mod.build_graph(edges, len(matrix))
    partition = graph_mod.louvain(graph, seed=config.seed, use_weights=config.use_weights)
    out = Path(config.out_dir)
    graph_mod.write_partition(partition, matrix.ids, out / "communities.tsv")
    with open(out / "communities_stats.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"n_communities": int(partition.labels.max()) + 1 if len(partition.labels) else 0,
             "modularity": partition.modularity},
            fh, sort_keys=True, indent=2)
        fh.write("\n")
    graph_mod.export_distributions(graph, partition, out / "distributions")
    _write_run_manifest(config, "communities", [out / "edges.tsv"])


def stage_node_props(config: PipelineConfig) -> None:
    corpus = _load_corpus(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    communities_path = out / "communities.tsv"
    communities = (
        graph_mod.read_partition(communities_path) if communities_path.is_file() else {}
    )
    clusters = {}
    if config.cluster_labels:
        cluster_path = Path(config.cluster_labels)
        if not cluster_path.is_file():
            raise MissingInput(cluster_path)
        clusters = graph_mod.read_partition(cluster_path)
    profiles = []
    for db in corpus.databases:
        data = corpus.load_database(db.db_id)
        profile = prof_mod.node_statistical(db, data, corpus.root)
        profile.community_id = communities.get(db.db_id)
        profile.cluster_id = clusters.get(db.db_id)
        profiles.append(profile)
    prof_mod.write_node_profiles(profiles, out / "node_props.tsv")
    _write_run_manifest(config, "node-props", [communities_path])


def stage_edge_props(config: PipelineConfig) -> None:
    corpus = _load_corpus(config)
    matrix, edges = _load_edges(config)
    out = Path(config.out_dir)
    confidences = prof_mod.sim_conf(edges.sim) if len(edges) else np.empty(0)
    profiles = []
    for pos in range(len(edges)):
        id_a = matrix.ids[edges.src[pos]]
        id_b = matrix.ids[edges.dst[pos]]
        db_a = corpus.database(id_a)
        db_b = corpus.database(id_b)
        profile = prof_mod.edge_statistical(
            db_a, db_b, corpus.load_database(id_a), corpus.load_database(id_b)
        )
        profile.embed_sim = float(edges.sim[pos])
        profile.sim_conf = float(confidences[pos])
        profiles.append(profile)
    prof_mod.write_edge_profiles(profiles, out / "edge_props.tsv")
    _write_run_manifest(config, "edge-props", [out / "edges.tsv"])


_STAGE_FUNCS = {
    "ingest": stage_ingest,
    "serialize": stage_serialize,
    "pairs": stage_pairs,
    "join": stage_join,
    "graph-stats": stage_graph_stats,
    "communities": stage_communities,
    "node-props": stage_node_props,
    "edge-props": stage_edge_props,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbgraph", description="Corpus-to-graph construction pipeline"
    )
    parser.add_argument("stage", choices=list(STAGES) + ["all"])
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--corpus", help="corpus root directory")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threshold", type=float)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--tile", type=int)
    parser.add_argument("--negatives-k", dest="negatives_k", type=int)
    parser.add_argument("--embedding-store", dest="embedding_store")
    parser.add_argument("--embedding-endpoint", dest="embedding_endpoint")
    parser.add_argument("--cluster-labels", dest="cluster_labels",
                        help="id<TAB>cluster file joined into node profiles")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        for attr, key in [
            ("corpus", "corpus_root"), ("out", "out_dir"), ("seed", "seed"),
            ("threshold", "threshold"), ("workers", "workers"), ("tile", "tile"),
            ("negatives_k", "negatives_k"),
            ("embedding_store", "embedding_store"),
            ("embedding_endpoint", "embedding_endpoint"),
            ("cluster_labels", "cluster_labels"),
        ]:
            value = getattr(args, attr)
            if value is not None:
                setattr(config, key, value)
        config.validate()
        stages = list(STAGES) if args.stage == "all" else [args.stage]
        for stage in stages:
            _STAGE_FUNCS[stage](config)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except FileNotFoundError as exc:
        print(f"error: missing stage input: {exc.filename}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (ValueError, corpus_mod.CorpusError, emb_mod.EmbeddingError,
            graph_mod.GraphError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
