# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""The composed line recognizer.

``LineRecognizer`` only owns parameters and per-stage entry points; the
chunking and decoding policy that strings the stages together lives in
``linerec.pipeline.recognize``. Submodule names are chosen so that
``named_parameters()`` yields the weight names stored in a bundle.
"""

from typing import Dict, Optional, Tuple

import torch
import torch.nn as nn

from ..decoding.ctc import FrameLogits
from .backbone import Backbone, backbone_forward
from .config import DecoderType, EncoderType, ModelConfig
from .encoders import (
    LogitsHead,
    build_encoder,
    encode_bilstm,
    encode_grcl,
    encode_self_attn,
    logits,
)
from .layers import count_parameters
from .transformer_decoder import TransformerDecoder

__all__ = [
    "LineRecognizer",
]

_ENCODER_KEYS = {
    EncoderType.SELF_ATTENTION: "sa",
    EncoderType.GRCL: "grcl",
    EncoderType.BILSTM: "lstm",
}


class LineRecognizer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.backbone = Backbone(config.backbone)
        encoder = build_encoder(self.backbone.output_dim, config.encoder)
        self.enc = nn.ModuleDict({_ENCODER_KEYS[config.encoder.type]: encoder})
        if config.decoder.type == DecoderType.CTC:
            self.head: Optional[LogitsHead] = LogitsHead(encoder.output_dim, config.num_symbols)
            self.dec: Optional[nn.ModuleDict] = None
        else:
            self.head = None
            self.dec = nn.ModuleDict(
                {
                    "tfmr": TransformerDecoder(
                        config.num_symbols, encoder.output_dim, config.decoder
                    )
                }
            )
        self.eval()

    @property
    def alphabet(self) -> str:
        return self.config.alphabet

    @property
    def is_ctc(self) -> bool:
        return self.config.decoder.type == DecoderType.CTC

    @property
    def encoder(self) -> nn.Module:
        return self.enc[_ENCODER_KEYS[self.config.encoder.type]]

    @property
    def decoder(self) -> TransformerDecoder:
        assert self.dec is not None, "model has no Transformer decoder"
        return self.dec["tfmr"]  # type: ignore[return-value]

    def backbone_frames(self, image: torch.Tensor) -> torch.Tensor:
        return backbone_forward(image, self.backbone)

    def encode(self, frames: torch.Tensor, *, position_offset: int = 0) -> torch.Tensor:
        kind = self.config.encoder.type
        if kind == EncoderType.SELF_ATTENTION:
            return encode_self_attn(frames, self.encoder, position_offset=position_offset)
        if kind == EncoderType.GRCL:
            return encode_grcl(frames, self.encoder)
        return encode_bilstm(frames, self.encoder)

    def frame_logits(self, encoded: torch.Tensor) -> FrameLogits:
        assert self.head is not None, "model has no CTC head"
        return logits(encoded, self.head, self.alphabet)

    def parameter_count(self) -> int:
        return count_parameters(self)

    def weight_shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: tuple(p.shape) for name, p in self.named_parameters()}
