# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

from .config import *
from .layers import *
from .backbone import *
from .encoders import *
from .transformer_decoder import *
from .recognizer import *
from .presets import *
