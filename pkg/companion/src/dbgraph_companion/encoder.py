"""Small text encoders for abstract embeddings.

The default is a hashed bag-of-words front end feeding a learned linear
projection: vocabulary-free, deterministic, and fast enough to fine-tune on
a laptop in seconds. The module interface (texts in, unit-normalized float
rows out) is the only thing downstream code depends on, so a heavier
pretrained encoder can be swapped in behind the same API.
"""

from __future__ import annotations

import re
import zlib

import numpy as np
import torch

_TOKEN = re.compile(r"[a-z0-9]+")


def _bucket(token: str, n_buckets: int) -> int:
    # crc32 is stable across processes, unlike the builtin hash
    return zlib.crc32(token.encode("utf-8")) % n_buckets


def featurize(texts: list[str], n_buckets: int) -> torch.Tensor:
    """Log-scaled hashed token counts, one row per text."""
    out = np.zeros((len(texts), n_buckets), dtype=np.float32)
    for row, text in enumerate(texts):
        for token in _TOKEN.findall(text.lower()):
            out[row, _bucket(token, n_buckets)] += 1.0
    return torch.from_numpy(np.log1p(out))


class HashEncoder(torch.nn.Module):
    """Hashed bag-of-words -> linear projection -> unit-normalized vector."""

    def __init__(self, dim: int = 64, n_buckets: int = 2048, seed: int = 0):
        super().__init__()
        self.dim = dim
        self.n_buckets = n_buckets
        generator = torch.Generator().manual_seed(seed)
        weight = torch.empty(dim, n_buckets)
        torch.nn.init.normal_(weight, std=1.0 / n_buckets**0.5, generator=generator)
        self.proj = torch.nn.Linear(n_buckets, dim, bias=False)
        with torch.no_grad():
            self.proj.weight.copy_(weight)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        raw = self.proj(features)
        norms = raw.norm(dim=-1, keepdim=True)
        if torch.any(norms == 0):
            raise ValueError("encoder produced a zero-norm embedding")
        return raw / norms

    def encode_texts(self, texts: list[str]) -> torch.Tensor:
        return self(featurize(texts, self.n_buckets))

    @torch.no_grad()
    def encode_numpy(self, texts: list[str]) -> np.ndarray:
        self.eval()
        return self.encode_texts(texts).cpu().numpy().astype(np.float32)
