"""Attention encoders for tests (psi) and MUTs (phi) plus the pair classifier.

Parameters are float64 unless the config asks for float32. Encoders are post-norm transformer stacks with
learned positional embeddings, mean pooling and a projection into the shared
embedding space.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .vocab import PAD

DTYPE = torch.float64


class SequenceTooLong(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int = 256
    token_dim: int = 64
    embed_dim: int = 64
    heads: int = 4
    layers: int = 2
    ff_dim: int = 128
    hidden: tuple[int, ...] = (128, 32)
    dtype: str = "float64"

    @property
    def torch_dtype(self) -> torch.dtype:
        return {"float64": torch.float64, "float32": torch.float32}[self.dtype]

    def to_json(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["hidden"] = tuple(d.get("hidden", (128, 32)))
        return cls(**d)


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dtype=DTYPE):
        super().__init__()
        if dim % heads:
            raise ValueError(f"token dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.head_dim = dim // heads
        self.qkv = nn.Linear(dim, 3 * dim, dtype=dtype)
        self.out = nn.Linear(dim, dim, dtype=dtype)

    def forward(self, x, key_mask):
        b, n, e = x.shape
        q, k, v = self.qkv(x).view(b, n, 3, self.heads, self.head_dim).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-1, -2) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        mixed = (attn @ v).transpose(1, 2).reshape(b, n, e)
        return self.out(mixed), attn


class EncoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, ff_dim: int, dtype=DTYPE):
        super().__init__()
        self.attn = SelfAttention(dim, heads, dtype)
        self.norm1 = nn.LayerNorm(dim, dtype=dtype)
        self.ff = nn.Sequential(nn.Linear(dim, ff_dim, dtype=dtype), nn.ReLU(), nn.Linear(ff_dim, dim, dtype=dtype))
        self.norm2 = nn.LayerNorm(dim, dtype=dtype)

    def forward(self, x, key_mask):
        a, weights = self.attn(x, key_mask)
        x = self.norm1(x + a)
        x = self.norm2(x + self.ff(x))
        return x, weights


class Encoder(nn.Module):
    """Token ids -> d-dimensional embedding (and per-layer attention maps)."""

    def __init__(self, cfg: ModelConfig, role: str):
        super().__init__()
        self.role = role
        self.max_len = cfg.max_len
        dt = cfg.torch_dtype
        self.tokens = nn.Embedding(cfg.vocab_size, cfg.token_dim, padding_idx=PAD, dtype=dt)
        self.positions = nn.Embedding(cfg.max_len, cfg.token_dim, dtype=dt)
        self.layers = nn.ModuleList(EncoderLayer(cfg.token_dim, cfg.heads, cfg.ff_dim, dt) for _ in range(cfg.layers))
        self.project = nn.Linear(cfg.token_dim, cfg.embed_dim, dtype=dt)

    def forward(self, ids, mask):
        """ids, mask: [batch, n]. Returns ([batch, d], list of [batch, heads, n, n])."""
        if ids.shape[1] > self.max_len:
            raise SequenceTooLong(f"{ids.shape[1]} tokens > max_len {self.max_len}")
        pos = torch.arange(ids.shape[1])
        x = self.tokens(ids) + self.positions(pos)[None]
        maps = []
        for layer in self.layers:
            x, w = layer(x, mask)
            maps.append(w)
        m = mask.to(x.dtype)[..., None]
        pooled = (x * m).sum(1) / m.sum(1)
        return self.project(pooled), maps


class Classifier(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        dims = (2 * cfg.embed_dim, *cfg.hidden)
        layers: list[nn.Module] = []
        for a, b in zip(dims, dims[1:]):
            layers += [nn.Linear(a, b, dtype=cfg.torch_dtype), nn.ReLU()]
        layers.append(nn.Linear(dims[-1], 2, dtype=cfg.torch_dtype))
        self.net = nn.Sequential(*layers)
        # He-normal weights and zero biases: with the very small fine-tuning
        # rate the head barely moves, so its starting scale matters.
        for mod in self.net:
            if isinstance(mod, nn.Linear):
                nn.init.kaiming_normal_(mod.weight, nonlinearity="relu")
                nn.init.zeros_(mod.bias)

    def forward(self, d_test, d_mut):
        return self.net(torch.cat([d_test, d_mut], dim=-1))


class OracleModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.phi = Encoder(cfg, "phi")  # MUT encoder
        self.psi = Encoder(cfg, "psi")  # test encoder
        self.classifier = Classifier(cfg)

    def forward(self, test_ids, test_mask, mut_ids, mut_mask):
        d_t, _ = self.psi(test_ids, test_mask)
        d_m, _ = self.phi(mut_ids, mut_mask)
        return self.classifier(d_t, d_m), d_t, d_m

    def encoder_parameters(self):
        return list(self.phi.parameters()) + list(self.psi.parameters())


def collate(sequences: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
    """Right-pad id lists into (ids, mask) tensors."""
    n = max(len(s) for s in sequences)
    if n == 0:
        raise ValueError("empty sequence")
    ids = torch.full((len(sequences), n), PAD, dtype=torch.long)
    mask = torch.zeros((len(sequences), n), dtype=torch.bool)
    for i, s in enumerate(sequences):
        if not s:
            raise ValueError("empty sequence")
        ids[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        mask[i, : len(s)] = True
    return ids, mask


@torch.no_grad()
def encode(encoder: Encoder, token_ids: list[int]) -> tuple[np.ndarray, list[list[np.ndarray]]]:
    """Embed one sequence; attention as [layer][head] -> n x n arrays."""
    if not 1 <= len(token_ids) <= encoder.max_len:
        raise SequenceTooLong(f"sequence of {len(token_ids)} tokens; allowed 1..{encoder.max_len}")
    ids, mask = collate([token_ids])
    emb, maps = encoder(ids, mask)
    attention = [[layer[0, h].numpy().copy() for h in range(layer.shape[1])] for layer in maps]
    return emb[0].numpy().copy(), attention
