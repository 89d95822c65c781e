# -*- coding: utf-8 -*-

__all__ = [
    'CheckpointError',
    'ConfigError',
    'NumericalError',
    'TraceFormatError',
    'ValidationError'
]


###########
# CLASSES #
###########

class CheckpointError(Exception):

    """
    Defines an exception thrown when a checkpoint cannot be read or does not match the current run.
    """


class ConfigError(Exception):

    """
    Defines an exception thrown when a configuration contains unknown keys or invalid values.
    """

    def __init__(self, key_path: str, message: str):

        super().__init__(f'{key_path}: {message}')

        self.key_path = key_path
        self.message = message


class NumericalError(Exception):

    """
    Defines an exception thrown when a computation produces non-finite or singular values.
    """


class TraceFormatError(Exception):

    """
    Defines an exception thrown when a generation trace is malformed or lacks required statistics.
    """

    def __init__(self, message: str, line_number: int = None):

        if line_number is not None:
            message = f'line {line_number:d}: {message}'

        super().__init__(message)

        self.line_number = line_number


class ValidationError(Exception):

    """
    Defines an exception thrown when inappropriate argument values are provided.
    """
