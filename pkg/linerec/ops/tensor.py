# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Dense float32 kernels shared by every neural component.

Images and feature maps are HWC, convolution kernels are HWIO
(``kh x kw x Cin x Cout``) and dense weights are ``in x out``. Every kernel
is a pure function of its inputs and refuses to hand back NaN/Inf.
"""

from typing import Literal, Optional, Sequence, Tuple, Union

import torch
import torch.nn.functional as F

from ..support.exceptions import (
    DimensionError,
    NonFiniteError,
    ParameterError,
)

__all__ = [
    "conv2d",
    "depth_to_space",
    "layer_norm",
    "linear",
    "matmul",
    "softmax_rows",
    "space_to_depth",
]

Padding = Literal["same", "valid"]
IntPair = Union[int, Tuple[int, int], Sequence[int]]


def _check_finite(op: str, t: torch.Tensor) -> torch.Tensor:
    if not bool(torch.isfinite(t).all()):
        raise NonFiniteError(op)
    return t


def _pair(v: IntPair) -> Tuple[int, int]:
    if isinstance(v, int):
        return v, v
    a, b = v
    return int(a), int(b)


def matmul(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.dim() != 2 or b.dim() != 2:
        raise DimensionError(
            f"matmul expects rank-2 operands, got {list(a.shape)} and {list(b.shape)}"
        )
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner extents differ: {list(a.shape)} x {list(b.shape)}"
        )
    return _check_finite("matmul", torch.matmul(a, b))


def linear(
    x: torch.Tensor, weight: torch.Tensor, bias: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """``x @ weight + bias`` over the last axis of an ``n x in`` input."""
    y = matmul(x, weight)
    if bias is not None:
        y = y + bias
    return y


def softmax_rows(x: torch.Tensor) -> torch.Tensor:
    """Softmax over the last axis. Leading axes are treated as rows.

    torch subtracts the row max before exponentiating, so large magnitudes
    stay finite.
    """
    _check_finite("softmax_rows(input)", x)
    return _check_finite("softmax_rows", torch.softmax(x, dim=-1))


def conv2d(
    x: torch.Tensor,
    kernel: torch.Tensor,
    bias: Optional[torch.Tensor] = None,
    *,
    stride: IntPair = 1,
    padding: Padding = "same",
) -> torch.Tensor:
    """Cross-correlation of an HWC input with an HWIO kernel.

    "same" pads zeros symmetrically (the extra row/column, for even kernels,
    goes to the bottom/right) so that stride 1 preserves H x W.
    """
    sh, sw = _pair(stride)
    if sh <= 0 or sw <= 0:
        raise ParameterError(f"conv2d stride must be positive, got {(sh, sw)}")
    if x.dim() != 3 or kernel.dim() != 4:
        raise DimensionError(
            f"conv2d expects HWC input and HWIO kernel, got {list(x.shape)} and {list(kernel.shape)}"
        )
    kh, kw, cin, cout = kernel.shape
    if x.shape[2] != cin:
        raise DimensionError(
            f"conv2d input has {x.shape[2]} channels, kernel expects {cin}"
        )
    nchw = x.permute(2, 0, 1).unsqueeze(0)
    if padding == "same":
        ph, pw = kh - 1, kw - 1
        nchw = F.pad(nchw, (pw // 2, pw - pw // 2, ph // 2, ph - ph // 2))
    elif padding != "valid":
        raise ParameterError(f"conv2d padding must be 'same' or 'valid', got {padding}")
    if kh > nchw.shape[2] or kw > nchw.shape[3]:
        raise DimensionError(
            f"conv2d kernel {kh}x{kw} larger than padded input {nchw.shape[2]}x{nchw.shape[3]}"
        )
    out = F.conv2d(nchw, kernel.permute(3, 2, 0, 1), bias, stride=(sh, sw))
    return _check_finite("conv2d", out[0].permute(1, 2, 0).contiguous())


def space_to_depth(x: torch.Tensor, block: int) -> torch.Tensor:
    """Moves each ``block x block`` patch into channels.

    Channel order within the output is (row in block, column in block,
    original channel), i.e. raster order.
    """
    if block <= 0:
        raise ParameterError(f"space_to_depth block must be positive, got {block}")
    h, w, c = x.shape
    if h % block or w % block:
        raise DimensionError(
            f"space_to_depth extents {h}x{w} not divisible by block {block}"
        )
    y = x.reshape(h // block, block, w // block, block, c).permute(0, 2, 1, 3, 4)
    return y.reshape(h // block, w // block, block * block * c)


def depth_to_space(x: torch.Tensor, block: int) -> torch.Tensor:
    """Inverse raster reshape of `space_to_depth`."""
    h, w, c = x.shape
    if c % (block * block):
        raise DimensionError(f"depth_to_space channels {c} not divisible by {block}^2")
    cin = c // (block * block)
    y = x.reshape(h, w, block, block, cin).permute(0, 2, 1, 3, 4)
    return y.reshape(h * block, w * block, cin)


def layer_norm(
    x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor, eps: float = 1e-6
) -> torch.Tensor:
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(
            f"layer_norm over {d} features got gain {list(gain.shape)} bias {list(bias.shape)}"
        )
    return _check_finite("layer_norm", F.layer_norm(x, (d,), gain, bias, eps))
