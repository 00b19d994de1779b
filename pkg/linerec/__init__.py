# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""Text-line recognition: chunked CTC and Transformer inference, LM fusion
and evaluation tooling."""
