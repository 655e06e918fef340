"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class DataError(Exception):
    """Bad input data: unreadable audio, malformed manifest or config."""


class AudioFormatError(DataError):
    pass


class ManifestError(DataError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelFormatError(DataError):
    def __init__(self, message, offset):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class ModelVersionError(DataError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"unsupported model file version {found}; this build reads version {expected}")


class SignalTooShort(InvalidArgument):
    pass


class NumericFailure(ArithmeticError):
    """Training produced a non-finite loss."""
