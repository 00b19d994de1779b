# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Autoregressive Transformer decoder with greedy generation.

Token ids ``0..A-1`` are alphabet symbols, ``A`` is BOS and ``A + 1`` is EOS.
Each layer runs causal multi-head self-attention, single-head
cross-attention over the encoded frames and a ReLU feed-forward block, all
pre-norm with residuals.
"""

from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence

import torch
import torch.nn as nn

from ..ops.tensor import linear, softmax_rows
from ..support.exceptions import CapacityError, InputError
from .config import DecoderConfig
from .layers import (
    Dense,
    LayerNorm,
    attention_scale,
    frozen,
    merge_heads,
    sinusoid_table,
    split_heads,
)

__all__ = [
    "CrossMemory",
    "GenerationConfig",
    "TransformerDecoder",
    "decoder_forward",
    "decoder_step",
    "greedy_generate",
]

# Finite stand-in for -inf on masked logits; exp() of it underflows to 0.
_MASKED = -1e9


@dataclass(frozen=True)
class GenerationConfig:
    max_output_len: int
    bos_id: int
    eos_id: int

    def __post_init__(self):
        if self.max_output_len < 1:
            raise InputError("max_output_len must be >= 1")


class DecoderLayer(nn.Module):
    def __init__(self, hidden: int, heads: int, ffn: int, memory_dim: int):
        super().__init__()
        self.heads = heads
        self.wq = Dense(hidden, hidden)
        self.wk = Dense(hidden, hidden)
        self.wv = Dense(hidden, hidden)
        self.wo = Dense(hidden, hidden)
        # Single-head cross-attention.
        self.cq = Dense(hidden, hidden)
        self.ck = Dense(memory_dim, hidden)
        self.cv = Dense(memory_dim, hidden)
        self.co = Dense(hidden, hidden)
        self.ffn1 = Dense(hidden, ffn)
        self.ffn2 = Dense(ffn, hidden)
        self.ln1 = LayerNorm(hidden)
        self.ln2 = LayerNorm(hidden)
        self.ln3 = LayerNorm(hidden)


class CrossMemory(NamedTuple):
    """Per-layer cross-attention keys and values of one encoded line."""

    keys: List[torch.Tensor]
    values: List[torch.Tensor]


class TransformerDecoder(nn.Module):
    def __init__(self, num_symbols: int, memory_dim: int, config: DecoderConfig):
        super().__init__()
        self.num_symbols = num_symbols
        self.hidden = config.hidden
        self.num_layers = config.layers
        self.max_positions = config.max_positions
        vocab = num_symbols + 2
        self.embed = frozen(vocab, config.hidden)
        for i in range(config.layers):
            self.add_module(
                f"L{i}", DecoderLayer(config.hidden, config.heads, config.ffn, memory_dim)
            )
        self.norm = LayerNorm(config.hidden)
        self.out = Dense(config.hidden, vocab)

    @property
    def bos_id(self) -> int:
        return self.num_symbols

    @property
    def eos_id(self) -> int:
        return self.num_symbols + 1

    def layers(self) -> Sequence[DecoderLayer]:
        return [getattr(self, f"L{i}") for i in range(self.num_layers)]

    def memory(self, encoded: torch.Tensor) -> CrossMemory:
        layers = self.layers()
        return CrossMemory(
            keys=[layer.ck(encoded) for layer in layers],
            values=[layer.cv(encoded) for layer in layers],
        )

    def generation_config(self, max_output_len: int) -> GenerationConfig:
        return GenerationConfig(max_output_len, bos_id=self.bos_id, eos_id=self.eos_id)


def decoder_forward(
    tokens: Sequence[int],
    encoded: torch.Tensor,
    p: TransformerDecoder,
    *,
    memory: Optional[CrossMemory] = None,
    cross_attention_out: Optional[List[torch.Tensor]] = None,
) -> torch.Tensor:
    """Next-token logits for every prefix of ``tokens`` (``len x (A+2)``)."""
    length = len(tokens)
    if length < 1:
        raise InputError("decoder needs at least the BOS token")
    if length > p.max_positions:
        raise CapacityError("Decoder position", length, p.max_positions)
    vocab = p.embed.shape[0]
    ids = torch.as_tensor(list(tokens), dtype=torch.long)
    if bool((ids < 0).any()) or bool((ids >= vocab).any()):
        raise InputError(f"token ids must be within [0, {vocab})")
    if memory is None:
        memory = p.memory(encoded)

    x = p.embed[ids] + sinusoid_table(torch.arange(length), p.hidden)
    causal = torch.triu(torch.ones((length, length), dtype=torch.bool), diagonal=1)
    for layer, keys, values in zip(p.layers(), memory.keys, memory.values):
        h = layer.ln1(x)
        q = split_heads(layer.wq(h), layer.heads)
        k = split_heads(layer.wk(h), layer.heads)
        v = split_heads(layer.wv(h), layer.heads)
        scores = torch.matmul(q, k.transpose(1, 2)) * attention_scale(q.shape[-1])
        scores = scores.masked_fill(causal, _MASKED)
        x = x + layer.wo(merge_heads(torch.matmul(softmax_rows(scores), v)))

        cq = layer.cq(layer.ln2(x))
        cross = softmax_rows(torch.matmul(cq, keys.t()) * attention_scale(cq.shape[-1]))
        if cross_attention_out is not None:
            cross_attention_out.append(cross)
        x = x + layer.co(torch.matmul(cross, values))

        x = x + layer.ffn2(torch.relu(layer.ffn1(layer.ln3(x))))
    return linear(p.norm(x), p.out.weight, p.out.bias)


def decoder_step(
    tokens_so_far: Sequence[int],
    encoded: torch.Tensor,
    p: TransformerDecoder,
    *,
    memory: Optional[CrossMemory] = None,
) -> torch.Tensor:
    """Logits over ``A + 2`` symbols for the token following ``tokens_so_far``."""
    return decoder_forward(tokens_so_far, encoded, p, memory=memory)[-1]


def greedy_generate(
    encoded: torch.Tensor, p: TransformerDecoder, g: GenerationConfig, alphabet: str
) -> str:
    memory = p.memory(encoded)
    tokens = [g.bos_id]
    out: List[int] = []
    for _ in range(g.max_output_len):
        next_id = int(torch.argmax(decoder_step(tokens, encoded, p, memory=memory)))
        if next_id == g.eos_id:
            break
        tokens.append(next_id)
        if next_id < len(alphabet):
            out.append(next_id)
    return "".join(alphabet[i] for i in out)
