# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Isometric convolutional backbone.

A 40 px line is turned into a 10-row grid by a block-4 space-to-depth stem,
refined at constant resolution by fused inverted bottlenecks and collapsed
to a single row, one frame per 4 input columns.
"""

import torch
import torch.nn as nn

from ..ops.tensor import space_to_depth
from ..support.exceptions import DimensionError
from .config import BackboneConfig
from .layers import ChannelAffine, Conv2d, Dense

__all__ = [
    "Backbone",
    "FusedInvertedBottleneck",
    "HeightCollapse",
    "backbone_forward",
    "receptive_field_radius",
]


class FusedInvertedBottleneck(nn.Module):
    """``x + project(relu(norm(expand(x))))`` with a full 3x3 expansion."""

    def __init__(self, channels: int, expansion: int, kernel: int):
        super().__init__()
        hidden = channels * expansion
        self.expand = Conv2d((kernel, kernel), channels, hidden)
        self.norm = ChannelAffine(hidden)
        self.project = Conv2d((1, 1), hidden, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.norm(self.expand(x)))
        return x + self.project(h)


class HeightCollapse(nn.Module):
    """Full-height valid convolution plus a mean-pooled 1x1 residual path."""

    def __init__(self, height: int, channels: int):
        super().__init__()
        self.conv = Conv2d((height, 1), channels, channels, padding="valid")
        self.residual = Dense(channels, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        # x: rows x frames x channels -> frames x channels
        collapsed = self.conv(x)[0]
        return collapsed + self.residual(x.mean(dim=0))


class Backbone(nn.Module):
    def __init__(self, config: BackboneConfig):
        super().__init__()
        config.validate()
        self.config = config
        block = config.block_size
        self.stem = Conv2d((1, 1), block * block, config.channels)
        for i in range(config.layers):
            self.add_module(
                f"L{i}",
                FusedInvertedBottleneck(config.channels, config.expansion, config.kernel),
            )
        self.collapse = HeightCollapse(config.collapse_height, config.channels)

    @property
    def output_dim(self) -> int:
        return self.config.channels

    def bottlenecks(self):
        return [getattr(self, f"L{i}") for i in range(self.config.layers)]

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        return backbone_forward(image, self)


def backbone_forward(image: torch.Tensor, params: Backbone) -> torch.Tensor:
    """Maps an ``H x W x 1`` line to ``W/block x channels`` frames."""
    config = params.config
    if image.dim() != 3 or image.shape[2] != 1:
        raise DimensionError(f"Backbone expects an H x W x 1 image, got {list(image.shape)}")
    height, width = image.shape[0], image.shape[1]
    if height != config.height:
        raise DimensionError(f"Backbone expects height {config.height}, got {height}")
    if width % config.block_size:
        raise DimensionError(
            f"Backbone width {width} is not a multiple of {config.block_size}"
        )
    x = params.stem(space_to_depth(image, config.block_size))
    for layer in params.bottlenecks():
        x = layer(x)
    return params.collapse(x)


def receptive_field_radius(params: Backbone) -> int:
    """One-sided pixel radius of the input region seen by one output frame.

    Frame ``f`` is anchored at pixel ``block * f``; pixels farther than the
    returned radius from that anchor cannot change the frame.
    """
    block = params.config.block_size
    radius = block - 1
    for layer in params.bottlenecks():
        radius += (layer.expand.kernel_size[1] // 2) * block
        radius += (layer.project.kernel_size[1] // 2) * block
    radius += (params.collapse.conv.kernel_size[1] // 2) * block
    return radius
