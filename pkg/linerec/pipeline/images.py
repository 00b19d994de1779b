# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Line image ingestion and height normalization.

Binary PGM (P5, maxval 255) is always supported; PNG needs Pillow
(``pip install linerec[png]``). Decoded lines are bilinearly resized to the
model height with half-pixel centers, padded on the right to a multiple of
the frame stride by edge replication, and mapped to ``p / 127.5 - 1``.
"""

from dataclasses import dataclass
from pathlib import Path
import re
from typing import Optional, Union

import numpy as np
import torch
import torch.nn.functional as F

from ..models.config import PaddingPolicy
from ..support.exceptions import ImageDecodeError, ImageFormatError, InputError
from .chunking import pad_columns

__all__ = [
    "LineImage",
    "decode_pgm",
    "load_line_image",
    "normalize_line",
    "resize_height",
    "resize_width",
    "write_pgm",
]

LINE_HEIGHT = 40
FRAME_STRIDE = 4

_PGM_TOKEN = re.compile(rb"(?:\s+|#[^\n]*\n?)*([^\s#]+)")


@dataclass
class LineImage:
    """A normalized ``H x W x 1`` line; ``width`` is after stride padding."""

    pixels: torch.Tensor
    # Width after height normalization and before stride padding.
    natural_width: int
    path: str = ""

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def decode_pgm(data: bytes, path: Union[str, Path] = "<bytes>") -> np.ndarray:
    """Decodes a binary PGM into an ``H x W`` uint8 array."""
    if not data.startswith(b"P5"):
        raise ImageFormatError(path, "not a binary PGM (missing P5 magic)")
    pos = 2
    values = []
    for _ in range(3):
        m = _PGM_TOKEN.match(data, pos)
        if not m:
            raise ImageFormatError(path, "truncated PGM header")
        try:
            values.append(int(m.group(1)))
        except ValueError:
            raise ImageFormatError(path, f"bad PGM header field {m.group(1)!r}")
        pos = m.end()
    width, height, maxval = values
    if maxval != 255:
        raise ImageFormatError(path, f"unsupported maxval {maxval}; only 255 is accepted")
    if width < 1 or height < 1:
        raise ImageFormatError(path, f"empty image {width}x{height}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageFormatError(path, "missing whitespace after PGM header")
    pos += 1
    pixels = data[pos : pos + width * height]
    if len(pixels) != width * height:
        raise ImageFormatError(path, f"expected {width * height} pixel bytes, got {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def _decode_png(path: Path) -> np.ndarray:
    try:
        from PIL import Image
    except ModuleNotFoundError:
        raise ImageFormatError(path, "PNG support requires Pillow (linerec[png])")
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.uint8)
    except OSError as e:
        raise ImageFormatError(path, f"cannot decode PNG: {e}")


def resize_height(pixels: torch.Tensor, height: int = LINE_HEIGHT) -> torch.Tensor:
    """Bilinear resize of an ``H x W`` array to ``height`` keeping the aspect ratio."""
    h, w = pixels.shape
    if h == height:
        return pixels
    width = max(1, round(w * height / h))
    return _resize(pixels, height, width)


def resize_width(pixels: torch.Tensor, width: int) -> torch.Tensor:
    """Anisotropic bilinear resize of an ``H x W x C`` line to ``width`` columns."""
    if pixels.shape[1] == width:
        return pixels
    chw = pixels.permute(2, 0, 1).unsqueeze(0)
    out = F.interpolate(
        chw, size=(pixels.shape[0], width), mode="bilinear", align_corners=False
    )
    return out.squeeze(0).permute(1, 2, 0).contiguous()


def _resize(pixels: torch.Tensor, height: int, width: int) -> torch.Tensor:
    x = pixels.to(torch.float32)[None, None]
    x = F.interpolate(
        x, size=(height, width), mode="bilinear", align_corners=False, antialias=False
    )
    return x[0, 0]


def normalize_line(
    pixels: Union[np.ndarray, torch.Tensor],
    *,
    height: int = LINE_HEIGHT,
    stride: int = FRAME_STRIDE,
    path: str = "",
) -> LineImage:
    """Turns ``H x W`` grayscale values in [0, 255] into a model-ready line."""
    t = torch.as_tensor(np.asarray(pixels), dtype=torch.float32)
    if t.dim() != 2 or t.shape[0] < 1 or t.shape[1] < 1:
        raise InputError(f"expected a non-empty H x W grayscale array, got {tuple(t.shape)}")
    t = resize_height(t, height)
    natural = t.shape[1]
    line = (t / 127.5 - 1.0).unsqueeze(-1)
    remainder = natural % stride
    if remainder:
        line = pad_columns(line, 0, stride - remainder, PaddingPolicy.EDGE)
    return LineImage(pixels=line, natural_width=natural, path=path)


def load_line_image(
    path: Union[str, Path],
    *,
    height: int = LINE_HEIGHT,
    stride: int = FRAME_STRIDE,
) -> LineImage:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ImageDecodeError(path, str(e))
    if data.startswith(b"\x89PNG"):
        raw = _decode_png(path)
    else:
        raw = decode_pgm(data, path)
    return normalize_line(raw, height=height, stride=stride, path=str(path))


def write_pgm(path: Union[str, Path], pixels: Union[np.ndarray, torch.Tensor]):
    array = np.asarray(pixels, dtype=np.uint8)
    if array.ndim != 2:
        raise InputError(f"write_pgm expects H x W, got shape {array.shape}")
    height, width = array.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        f.write(array.tobytes())
