# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Named model configurations.

Every preset uses the published backbone; they differ in the encoder and
the decoder. Overrides are applied with the same keys as the JSON config.
"""

import string
from typing import Any, Callable, Dict

from ..support.exceptions import ConfigError
from .config import ModelConfig

__all__ = [
    "DEFAULT_ALPHABET",
    "PRESETS",
    "preset_config",
]

# A compact Latin set; real deployments load their alphabet from the config.
DEFAULT_ALPHABET = (
    " " + string.ascii_lowercase + string.ascii_uppercase + string.digits + string.punctuation
)


def _sa_ctc() -> Dict[str, Any]:
    return {"encoder": {"type": "self_attention"}, "decoder": {"type": "ctc"}}


def _grcl_ctc() -> Dict[str, Any]:
    return {"encoder": {"type": "grcl"}, "decoder": {"type": "ctc"}}


def _bilstm_ctc() -> Dict[str, Any]:
    return {"encoder": {"type": "bilstm"}, "decoder": {"type": "ctc"}}


def _sa_transformer() -> Dict[str, Any]:
    return {"encoder": {"type": "self_attention"}, "decoder": {"type": "transformer"}}


PRESETS: Dict[str, Callable[[], Dict[str, Any]]] = {
    "sa-ctc": _sa_ctc,
    "grcl-ctc": _grcl_ctc,
    "bilstm-ctc": _bilstm_ctc,
    "sa-transformer": _sa_transformer,
}


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def preset_config(
    name: str, alphabet: str = DEFAULT_ALPHABET, **overrides: Any
) -> ModelConfig:
    try:
        base = PRESETS[name]()
    except KeyError:
        raise ConfigError(f"Unknown preset '{name}'; choose from {', '.join(PRESETS)}")
    d = _merge(base, overrides)
    d["alphabet"] = alphabet
    return ModelConfig.from_dict(d)
