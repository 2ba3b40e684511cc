"""Command line front end: train an encoder, embed a corpus of abstracts,
cluster an embedding store, or serve embeddings over HTTP."""

from __future__ import annotations

import argparse
import json
from pathlib import Path
from typing import Optional

import torch

from .encoder import HashEncoder
from .formats import (
    read_abstracts,
    read_embedding_store,
    read_triplets,
    write_cluster_labels,
)
from .trainer import TrainerConfig, cluster_embeddings, embed_corpus, finetune


def save_model(model: HashEncoder, path: Path | str) -> None:
    torch.save(
        {
            "state_dict": model.state_dict(),
            "dim": model.dim,
            "n_buckets": model.n_buckets,
        },
        path,
    )


def load_model(path: Path | str) -> HashEncoder:
    payload = torch.load(path, weights_only=True)
    model = HashEncoder(dim=payload["dim"], n_buckets=payload["n_buckets"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model


def cmd_train(args) -> int:
    config = TrainerConfig(
        temperature=args.temperature,
        negatives_k=args.negatives_k,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        seed=args.seed,
        dim=args.dim,
    )
    triplets = read_triplets(args.triplets)
    abstracts = read_abstracts(args.abstracts)
    result = finetune(triplets, abstracts, config)
    Path(args.model).parent.mkdir(parents=True, exist_ok=True)
    save_model(result.model, args.model)
    curve_path = Path(args.model).with_suffix(".loss.json")
    curve_path.write_text(json.dumps(result.loss_curve) + "\n", encoding="utf-8")
    print(f"epochs={len(result.loss_curve)} "
          f"first={result.loss_curve[0]:.4f} last={result.loss_curve[-1]:.4f}")
    return 0


def cmd_embed(args) -> int:
    model = load_model(args.model)
    abstracts = read_abstracts(args.abstracts)
    ids = embed_corpus(model, abstracts, args.store)
    print(f"embedded {len(ids)} abstracts -> {args.store}.f32le")
    return 0


def cmd_cluster(args) -> int:
    ids, data = read_embedding_store(args.store)
    labels = cluster_embeddings(
        ids, data, seed=args.seed,
        min_cluster_size=args.min_cluster_size,
        plot_path=args.plot,
    )
    write_cluster_labels(labels, args.out)
    n_clusters = len({v for v in labels.values() if v >= 0})
    print(f"{n_clusters} clusters over {len(ids)} databases -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = load_model(args.model)
    uvicorn.run(create_app(model), host=args.host, port=args.port)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="dbgraph-companion")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="fine-tune the encoder on triplets")
    train.add_argument("--triplets", required=True)
    train.add_argument("--abstracts", required=True)
    train.add_argument("--model", required=True)
    train.add_argument("--temperature", type=float, default=0.05)
    train.add_argument("--negatives-k", dest="negatives_k", type=int, default=6)
    train.add_argument("--learning-rate", dest="learning_rate", type=float, default=0.01)
    train.add_argument("--epochs", type=int, default=10)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--dim", type=int, default=64)
    train.set_defaults(func=cmd_train)

    embed = sub.add_parser("embed", help="embed abstracts into a binary store")
    embed.add_argument("--model", required=True)
    embed.add_argument("--abstracts", required=True)
    embed.add_argument("--store", required=True)
    embed.set_defaults(func=cmd_embed)

    cluster = sub.add_parser("cluster", help="cluster an embedding store")
    cluster.add_argument("--store", required=True)
    cluster.add_argument("--out", required=True)
    cluster.add_argument("--seed", type=int, default=0)
    cluster.add_argument("--min-cluster-size", dest="min_cluster_size",
                         type=int, default=5)
    cluster.add_argument("--plot", default=None)
    cluster.set_defaults(func=cmd_cluster)

    serve = sub.add_parser("serve", help="serve embeddings over HTTP")
    serve.add_argument("--model", required=True)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
