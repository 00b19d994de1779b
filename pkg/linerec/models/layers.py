# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Parameter containers shared by the backbone, encoders and decoders.

Each container owns its weights as frozen ``nn.Parameter`` objects so that
``named_parameters()`` yields the bundle weight names directly.
"""

import math
from typing import Sequence, Tuple

import torch
import torch.nn as nn

from ..ops.tensor import conv2d, layer_norm, linear

__all__ = [
    "ChannelAffine",
    "Conv2d",
    "Dense",
    "LayerNorm",
    "attention_scale",
    "count_parameters",
    "frozen",
    "merge_heads",
    "shapes",
    "sinusoid_table",
    "split_heads",
]


def frozen(*shape: int) -> nn.Parameter:
    return nn.Parameter(torch.zeros(shape, dtype=torch.float32), requires_grad=False)


class Dense(nn.Module):
    """Affine map with an ``in x out`` weight."""

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.weight = frozen(in_features, out_features)
        self.bias = frozen(out_features)

    @property
    def in_features(self) -> int:
        return self.weight.shape[0]

    @property
    def out_features(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return linear(x, self.weight, self.bias)


class Conv2d(nn.Module):
    def __init__(
        self,
        kernel_size: Tuple[int, int],
        in_channels: int,
        out_channels: int,
        *,
        padding: str = "same",
    ):
        super().__init__()
        kh, kw = kernel_size
        self.weight = frozen(kh, kw, in_channels, out_channels)
        self.bias = frozen(out_channels)
        self.padding = padding

    @property
    def kernel_size(self) -> Tuple[int, int]:
        return int(self.weight.shape[0]), int(self.weight.shape[1])

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return conv2d(x, self.weight, self.bias, padding=self.padding)  # type: ignore[arg-type]


class ChannelAffine(nn.Module):
    """Inference-time batch normalization folded to ``x * scale + shift``."""

    def __init__(self, channels: int):
        super().__init__()
        self.scale = frozen(channels)
        self.shift = frozen(channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * self.scale + self.shift


class LayerNorm(nn.Module):
    def __init__(self, features: int, eps: float = 1e-6):
        super().__init__()
        self.gain = frozen(features)
        self.bias = frozen(features)
        self.eps = eps

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)


def sinusoid_table(positions: torch.Tensor, dim: int) -> torch.Tensor:
    """Fixed sin/cos features of (possibly negative) positions.

    Column ``2m`` holds ``sin(p / 10000^(2m/dim))`` and ``2m+1`` the cosine.
    """
    half = torch.arange(0, dim, 2, dtype=torch.float64)
    inv_freq = 1.0 / (10000.0 ** (half / dim))
    angles = positions.to(torch.float64)[:, None] * inv_freq[None, :]
    table = torch.zeros((positions.shape[0], dim), dtype=torch.float64)
    table[:, 0::2] = torch.sin(angles)
    table[:, 1::2] = torch.cos(angles)[:, : dim // 2]
    return table.to(torch.float32)


def split_heads(x: torch.Tensor, heads: int) -> torch.Tensor:
    """``n x (heads*hd)`` -> ``heads x n x hd``."""
    n, d = x.shape
    return x.reshape(n, heads, d // heads).transpose(0, 1)


def merge_heads(x: torch.Tensor) -> torch.Tensor:
    heads, n, hd = x.shape
    return x.transpose(0, 1).reshape(n, heads * hd)


def attention_scale(head_dim: int) -> float:
    return 1.0 / math.sqrt(head_dim)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def shapes(module: nn.Module) -> Sequence[Tuple[str, Tuple[int, ...]]]:
    return [(name, tuple(p.shape)) for name, p in module.named_parameters()]
