# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Sequence encoders over backbone frames and the CTC logits head."""

from typing import List, Optional, Sequence, Tuple

import torch
import torch.nn as nn

from ..decoding.ctc import FrameLogits
from ..ops.tensor import conv2d, matmul, softmax_rows
from .config import EncoderConfig, EncoderType, PositionalEncoding
from .layers import (
    ChannelAffine,
    Dense,
    LayerNorm,
    attention_scale,
    frozen,
    merge_heads,
    sinusoid_table,
    split_heads,
)

__all__ = [
    "BiLstmEncoder",
    "GrclEncoder",
    "LogitsHead",
    "SelfAttentionEncoder",
    "SelfAttentionLayer",
    "build_encoder",
    "encode_bilstm",
    "encode_grcl",
    "encode_self_attn",
    "logits",
    "self_attention_layer",
]

# Width of the fixed sinusoid features behind the relative position bias.
RELATIVE_FEATURES = 64


################################################################################
# Self-attention
################################################################################


class SelfAttentionLayer(nn.Module):
    """Pre-norm Transformer encoder layer.

    With relative positions, each head adds ``rel[h] . sinusoid(i - j)`` to
    its pre-softmax logits.
    """

    def __init__(
        self,
        hidden: int = 256,
        heads: int = 4,
        ffn: int = 1024,
        positional: PositionalEncoding = PositionalEncoding.RELATIVE,
    ):
        super().__init__()
        self.heads = heads
        self.positional = PositionalEncoding(positional)
        self.wq = Dense(hidden, hidden)
        self.wk = Dense(hidden, hidden)
        self.wv = Dense(hidden, hidden)
        self.wo = Dense(hidden, hidden)
        self.ffn1 = Dense(hidden, ffn)
        self.ffn2 = Dense(ffn, hidden)
        self.ln1 = LayerNorm(hidden)
        self.ln2 = LayerNorm(hidden)
        if self.positional == PositionalEncoding.RELATIVE:
            self.rel = frozen(heads, RELATIVE_FEATURES)

    def relative_bias(self, n: int) -> torch.Tensor:
        """``heads x n x n`` additive bias depending only on ``i - j``."""
        offsets = torch.arange(-(n - 1), n)
        table = sinusoid_table(offsets, RELATIVE_FEATURES)
        per_offset = matmul(table, self.rel.t())  # (2n-1) x heads
        i = torch.arange(n)[:, None]
        j = torch.arange(n)[None, :]
        return per_offset[(i - j) + (n - 1)].permute(2, 0, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self_attention_layer(x, self)


def self_attention_layer(
    x: torch.Tensor,
    p: SelfAttentionLayer,
    *,
    attention_out: Optional[List[torch.Tensor]] = None,
) -> torch.Tensor:
    n = x.shape[0]
    h = p.ln1(x)
    q = split_heads(p.wq(h), p.heads)
    k = split_heads(p.wk(h), p.heads)
    v = split_heads(p.wv(h), p.heads)
    scores = torch.matmul(q, k.transpose(1, 2)) * attention_scale(q.shape[-1])
    if p.positional == PositionalEncoding.RELATIVE:
        scores = scores + p.relative_bias(n)
    weights = softmax_rows(scores)
    if attention_out is not None:
        attention_out.append(weights)
    x = x + p.wo(merge_heads(torch.matmul(weights, v)))
    return x + p.ffn2(torch.relu(p.ffn1(p.ln2(x))))


class SelfAttentionEncoder(nn.Module):
    def __init__(self, in_features: int, config: EncoderConfig):
        super().__init__()
        self.positional = config.positional
        self.hidden = config.hidden
        self.input_proj = Dense(in_features, config.hidden)
        self.num_layers = config.layers
        for i in range(config.layers):
            self.add_module(
                f"L{i}",
                SelfAttentionLayer(
                    config.hidden, config.heads, config.ffn, config.positional
                ),
            )

    @property
    def output_dim(self) -> int:
        return self.hidden

    def layers(self) -> Sequence[SelfAttentionLayer]:
        return [getattr(self, f"L{i}") for i in range(self.num_layers)]

    def forward(self, frames: torch.Tensor, position_offset: int = 0) -> torch.Tensor:
        return encode_self_attn(frames, self, position_offset=position_offset)


def encode_self_attn(
    frames: torch.Tensor,
    p: SelfAttentionEncoder,
    *,
    position_offset: int = 0,
    attention_out: Optional[List[torch.Tensor]] = None,
) -> torch.Tensor:
    """Projects frames to the hidden size and runs the layer stack.

    ``position_offset`` shifts absolute positions; relative encoding only
    sees offsets between frames and is therefore unaffected by it.
    """
    x = p.input_proj(frames)
    if p.positional == PositionalEncoding.ABSOLUTE:
        positions = torch.arange(x.shape[0]) + position_offset
        x = x + sinusoid_table(positions, x.shape[1])
    for layer in p.layers():
        x = self_attention_layer(x, layer, attention_out=attention_out)
    return x


################################################################################
# GRCL
################################################################################

GRCL_FILTERS = (384, 256, 128)
GRCL_KERNELS = (3, 5, 7)


class GrclBlock(nn.Module):
    """Gated recurrent convolution block along the frame axis.

    The feed path is computed once from the block input ``u``; the gate sees
    ``u`` concatenated with the previous state and the state is refined
    ``iterations`` times with shared weights, starting from zeros.
    """

    def __init__(self, in_channels: int, filters: int, kernel: int, iterations: int):
        super().__init__()
        self.iterations = iterations
        self.feed = _Conv1d(kernel, in_channels, filters)
        self.gate = _Conv1d(kernel, in_channels + filters, filters)
        self.norm_feed = ChannelAffine(filters)
        self.norm_gate = ChannelAffine(filters)

    def forward(self, u: torch.Tensor) -> torch.Tensor:
        feed = torch.relu(self.norm_feed(self.feed(u)))
        state = torch.zeros_like(feed)
        for _ in range(self.iterations):
            gate = torch.sigmoid(self.norm_gate(self.gate(torch.cat([u, state], dim=1))))
            state = feed * gate
        return state


class _Conv1d(nn.Module):
    """Same-padded convolution over an ``n x C`` sequence (a 1-row image)."""

    def __init__(self, kernel: int, in_channels: int, out_channels: int):
        super().__init__()
        self.weight = frozen(1, kernel, in_channels, out_channels)
        self.bias = frozen(out_channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return conv2d(x.unsqueeze(0), self.weight, self.bias, padding="same")[0]


class GrclEncoder(nn.Module):
    def __init__(
        self,
        in_features: int,
        config: EncoderConfig,
        filters: Tuple[int, ...] = GRCL_FILTERS,
        kernels: Tuple[int, ...] = GRCL_KERNELS,
    ):
        super().__init__()
        self.filters = filters
        self.blocks_per_set = config.blocks_per_set
        self.input_proj = Dense(in_features, filters[0])
        channels = filters[0]
        for s, (f, k) in enumerate(zip(filters, kernels)):
            blocks = nn.Module()
            for b in range(config.blocks_per_set):
                blocks.add_module(f"B{b}", GrclBlock(channels, f, k, config.iterations))
                channels = f
            self.add_module(f"S{s}", blocks)

    @property
    def output_dim(self) -> int:
        return self.filters[-1]

    def blocks(self) -> Sequence[GrclBlock]:
        return [
            getattr(getattr(self, f"S{s}"), f"B{b}")
            for s in range(len(self.filters))
            for b in range(self.blocks_per_set)
        ]

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        return encode_grcl(frames, self)


def encode_grcl(frames: torch.Tensor, p: GrclEncoder) -> torch.Tensor:
    x = p.input_proj(frames)
    for block in p.blocks():
        x = block(x)
    return x


################################################################################
# BiLSTM
################################################################################

LSTM_HIDDEN = 512


class BiLstmLayer(nn.Module):
    def __init__(self, in_features: int, hidden: int = LSTM_HIDDEN):
        super().__init__()
        self.fwd = nn.LSTMCell(in_features, hidden)
        self.bwd = nn.LSTMCell(in_features, hidden)
        for p in self.parameters():
            p.requires_grad_(False)

    @staticmethod
    def _run(cell: nn.LSTMCell, x: torch.Tensor, reverse: bool) -> torch.Tensor:
        n = x.shape[0]
        h = x.new_zeros((1, cell.hidden_size))
        c = x.new_zeros((1, cell.hidden_size))
        outputs: List[Optional[torch.Tensor]] = [None] * n
        steps = range(n - 1, -1, -1) if reverse else range(n)
        for t in steps:
            h, c = cell(x[t : t + 1], (h, c))
            outputs[t] = h[0]
        return torch.stack(outputs)  # type: ignore[arg-type]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.cat([self._run(self.fwd, x, False), self._run(self.bwd, x, True)], dim=1)


class BiLstmEncoder(nn.Module):
    def __init__(self, in_features: int, config: EncoderConfig, hidden: int = LSTM_HIDDEN):
        super().__init__()
        self.depth = config.depth
        self.input_proj = Dense(in_features, config.hidden)
        features = config.hidden
        for i in range(config.depth):
            self.add_module(f"L{i}", BiLstmLayer(features, hidden))
            features = 2 * hidden
        self.output_proj = Dense(2 * hidden, config.hidden)

    @property
    def output_dim(self) -> int:
        return self.output_proj.out_features

    def layers(self) -> Sequence[BiLstmLayer]:
        return [getattr(self, f"L{i}") for i in range(self.depth)]

    def forward(self, frames: torch.Tensor) -> torch.Tensor:
        return encode_bilstm(frames, self)


def encode_bilstm(
    frames: torch.Tensor,
    p: BiLstmEncoder,
    *,
    states_out: Optional[List[torch.Tensor]] = None,
) -> torch.Tensor:
    """Runs the stacked bidirectional layers; concat order is (fwd, bwd)."""
    x = p.input_proj(frames)
    for layer in p.layers():
        x = layer(x)
        if states_out is not None:
            states_out.append(x)
    return p.output_proj(x)


################################################################################
# Head and factory
################################################################################


class LogitsHead(nn.Module):
    def __init__(self, in_features: int, num_symbols: int):
        super().__init__()
        self.logits = Dense(in_features, num_symbols + 1)

    def forward(self, encoded: torch.Tensor) -> torch.Tensor:
        return self.logits(encoded)


def logits(encoded: torch.Tensor, head: LogitsHead, alphabet: str) -> FrameLogits:
    """Raw per-frame class scores; the blank class is the last column."""
    return FrameLogits(head(encoded), alphabet)


def build_encoder(in_features: int, config: EncoderConfig) -> nn.Module:
    if config.type == EncoderType.SELF_ATTENTION:
        return SelfAttentionEncoder(in_features, config)
    if config.type == EncoderType.GRCL:
        return GrclEncoder(in_features, config)
    return BiLstmEncoder(in_features, config)
