# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception


class LineRecError(Exception):
    ...


class DimensionError(LineRecError, ValueError):
    """A tensor extent does not fit the operation."""


class ParameterError(LineRecError, ValueError):
    """A scalar argument is out of its allowed range."""


class InputError(LineRecError, ValueError):
    """Caller supplied data that violates an operation's precondition."""


class NonFiniteError(LineRecError, ArithmeticError):
    def __init__(self, op: str):
        super().__init__(f"Kernel '{op}' produced a non-finite value")


class CapacityError(LineRecError):
    def __init__(self, what: str, requested: int, capacity: int):
        self.requested = requested
        self.capacity = capacity
        super().__init__(f"{what} {requested} exceeds capacity {capacity}")


class ConfigError(LineRecError, ValueError):
    ...


class DataError(LineRecError):
    """A data file could not be used (unreadable, missing, inconsistent)."""


class ImageDecodeError(DataError):
    def __init__(self, path, reason: str):
        self.path = path
        super().__init__(f"Cannot decode image {path}: {reason}")


class FormatError(LineRecError):
    """A binary or text artifact does not follow its documented format."""


class BadMagicError(FormatError):
    def __init__(self, path, expected: bytes, actual: bytes):
        super().__init__(f"{path}: expected magic {expected!r}, found {actual!r}")


class UnsupportedVersionError(FormatError):
    def __init__(self, path, version: int, supported: int):
        super().__init__(
            f"{path}: format version {version} unsupported (this build reads {supported})"
        )


class TruncatedFileError(FormatError):
    def __init__(self, path, what: str):
        super().__init__(f"{path}: file truncated while reading {what}")


class ImageFormatError(FormatError):
    def __init__(self, path, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


class MissingWeightError(FormatError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Model bundle is missing required weight '{name}'")


class WeightShapeError(FormatError):
    def __init__(self, name: str, expected, actual):
        self.name = name
        super().__init__(
            f"Weight '{name}' has shape {list(actual)}, expected {list(expected)}"
        )


class UnexpectedWeightError(FormatError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Model bundle contains weight '{name}' unused by its config")
