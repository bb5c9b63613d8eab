# errors.py


class InvalidArgumentError(ValueError):
    """
    Raised when an operation receives an argument outside its admissible range.
    """


class ConfigError(InvalidArgumentError):
    """
    Raised for malformed run configurations (unknown keys, bad types, bad values).
    """


class DataError(ValueError):
    """
    Raised when datasets or caches are missing, too short, or corrupted.
    """


class NumericalRankError(ArithmeticError):
    """
    Raised when a linear system is numerically singular.
    """
