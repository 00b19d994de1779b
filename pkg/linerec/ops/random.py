# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

from typing import Sequence

import torch

from ..support.exceptions import ParameterError

__all__ = [
    "Rng",
    "rng_uniform",
]


class Rng:
    """Seeded value stream for weight initialization and synthetic inputs.

    The same seed yields the same stream within one torch build. The seed is
    reduced to the unsigned 64-bit range that torch generators accept.
    """

    __slots__ = ["seed", "_generator"]

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFF_FFFF_FFFF_FFFF
        self._generator = torch.Generator(device="cpu")
        self._generator.manual_seed(self.seed)

    @property
    def generator(self) -> torch.Generator:
        return self._generator

    def uniform(self, shape: Sequence[int], lo: float, hi: float) -> torch.Tensor:
        return rng_uniform(self, shape, lo, hi)

    def integers(self, shape: Sequence[int], lo: int, hi: int) -> torch.Tensor:
        """Integers in [lo, hi)."""
        if lo >= hi:
            raise ParameterError(f"integers needs lo < hi, got [{lo}, {hi})")
        return torch.randint(lo, hi, tuple(shape), generator=self._generator)

    def __repr__(self):
        return f"Rng(seed={self.seed})"


def rng_uniform(rng: Rng, shape: Sequence[int], lo: float, hi: float) -> torch.Tensor:
    if not lo < hi:
        raise ParameterError(f"rng_uniform needs lo < hi, got [{lo}, {hi})")
    u = torch.rand(tuple(shape), generator=rng.generator, dtype=torch.float32)
    values = lo + (hi - lo) * u
    # Rounding in float32 can land exactly on hi; keep the interval half-open.
    upper = torch.nextafter(
        torch.tensor(hi, dtype=torch.float32), torch.tensor(lo, dtype=torch.float32)
    )
    return torch.minimum(values, upper)
