# -*- coding: utf-8 -*-

__all__ = [
    'validate_boolean',
    'validate_boolean_mask',
    'validate_dpi',
    'validate_enumerator',
    'validate_file_path',
    'validate_float',
    'validate_integer',
    'validate_integer_range',
    'validate_matrix',
    'validate_probability',
    'validate_text',
    'validate_token_ids'
]


###########
# IMPORTS #
###########

# Standard

from os.path import (
    isfile
)

from typing import (
    Iterable
)

# Libraries

import numpy as np
import torch

# Internal

from .custom_types import (
    olimit_float,
    olimit_int,
    oint,
    tany,
    tarray,
    tlist_str,
    tpath
)


#############
# FUNCTIONS #
#############

def _check_limits(value: float, lower_limit: tany, upper_limit: tany) -> None:

    # Limits are (bound, exclusive) pairs.
    if lower_limit is not None:

        bound, exclusive = lower_limit

        if value < bound or (exclusive and value == bound):
            relation = 'greater than' if exclusive else 'greater than or equal to'
            raise ValueError(f'The "@arg@" parameter must be {relation} {bound:g}.')

    if upper_limit is not None:

        bound, exclusive = upper_limit

        if value > bound or (exclusive and value == bound):
            relation = 'less than' if exclusive else 'less than or equal to'
            raise ValueError(f'The "@arg@" parameter must be {relation} {bound:g}.')


def _extract_as_numeric(data: tany) -> tarray:

    if _is_array(data):
        result = np.copy(data)
    elif _is_tensor(data):
        result = data.detach().cpu().numpy().copy()
    elif _is_iterable(data):
        result = np.array(list(data))
    else:
        result = None

    if result is None or not (np.issubdtype(result.dtype, np.number) or np.issubdtype(result.dtype, np.bool_)):
        raise TypeError('The data type is not supported.')

    return result


def _is_array(value: tany) -> bool:

    return value is not None and isinstance(value, np.ndarray)


def _is_bool(value: tany) -> bool:

    return value is not None and isinstance(value, (bool, np.bool_))


def _is_float(value: tany) -> bool:

    return value is not None and isinstance(value, (float, np.floating))


def _is_integer(value: tany) -> bool:

    return value is not None and isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_))


def _is_iterable(value: tany) -> bool:

    return value is not None and isinstance(value, Iterable) and not isinstance(value, (bytearray, bytes, str))


def _is_number(value: tany) -> bool:

    return _is_float(value) or _is_integer(value)


def _is_string(value: tany) -> bool:

    return value is not None and isinstance(value, str) and len(value) > 0


def _is_tensor(value: tany) -> bool:

    return value is not None and isinstance(value, torch.Tensor)


def validate_boolean(value: tany) -> bool:

    if not _is_bool(value):
        raise TypeError('The "@arg@" parameter must be a boolean value.')

    return bool(value)


def validate_boolean_mask(value: tany, size: oint = None) -> tarray:

    try:
        value = _extract_as_numeric(value)
    except Exception as e:
        raise TypeError('The "@arg@" parameter is null or wrongly typed.') from e

    if value.ndim != 1:
        raise ValueError('The "@arg@" parameter must be a vector.')

    if size is not None and value.size != size:
        raise ValueError(f'The "@arg@" parameter must have a length equal to {size:d}.')

    if not np.issubdtype(value.dtype, np.bool_):

        if not np.all(np.isin(value, [0, 1])):
            raise ValueError('The "@arg@" parameter must contain only boolean values.')

        value = value.astype(bool)

    return value


def validate_dpi(value: tany) -> int:

    if not _is_integer(value):
        raise TypeError('The "@arg@" parameter must be an integer.')

    value = int(value)

    possible_values = [75, 100, 150, 200, 300]

    if value not in possible_values:
        possible_values = [str(possible_value) for possible_value in possible_values]
        raise ValueError(f'The "@arg@" parameter must have one of the following values: {", ".join(possible_values)}.')

    return value


def validate_enumerator(value: tany, possible_values: tlist_str) -> str:

    if not all(_is_string(possible_value) for possible_value in possible_values):
        raise ValueError('The list of possible enumerator values must contain only non-empty strings.')

    if not _is_string(value):
        raise TypeError('The "@arg@" parameter must be a non-empty string.')

    if value not in possible_values:
        raise ValueError(f'The "@arg@" parameter value must be one of the following: {", ".join(possible_values)}.')

    return value


def validate_file_path(value: tany, write_permission: bool) -> str:

    if isinstance(value, tpath.__args__[1]):
        value = str(value)

    if not _is_string(value) or len(value.strip()) == 0:
        raise TypeError('The "@arg@" parameter must be a non-empty string.')

    if write_permission:
        return value

    if not isfile(value):
        raise ValueError(f'The "@arg@" parameter defines an invalid file path: {value}.')

    return value


def validate_float(value: tany, lower_limit: olimit_float = None, upper_limit: olimit_float = None) -> float:

    if not _is_number(value):
        raise TypeError('The "@arg@" parameter must be a float.')

    value = float(value)

    if not np.isfinite(value):
        raise ValueError('The "@arg@" parameter must be a finite real value.')

    _check_limits(value, lower_limit, upper_limit)

    return value


def validate_integer(value: tany, lower_limit: olimit_int = None, upper_limit: olimit_int = None) -> int:

    if not _is_integer(value):
        raise TypeError('The "@arg@" parameter must be an integer.')

    value = int(value)

    _check_limits(value, lower_limit, upper_limit)

    return value


def validate_integer_range(value: tany) -> tuple:

    if not _is_iterable(value):
        raise TypeError('The "@arg@" parameter must be a pair of integers.')

    value = tuple(value)

    if len(value) != 2 or not all(_is_integer(v) for v in value):
        raise ValueError('The "@arg@" parameter must contain exactly 2 integers.')

    a, b = int(value[0]), int(value[1])

    if a < 0 or a > b:
        raise ValueError('The "@arg@" parameter must define a non-negative range whose first value does not exceed the second one.')

    return a, b


def validate_matrix(value: tany, columns: oint = None) -> tarray:

    try:
        value = _extract_as_numeric(value)
    except Exception as e:
        raise TypeError('The "@arg@" parameter is null or wrongly typed.') from e

    value = value.astype(float)

    if value.ndim != 2 or value.shape[0] == 0:
        raise ValueError('The "@arg@" parameter must be a non-empty 2d matrix.')

    if columns is not None and value.shape[1] != columns:
        raise ValueError(f'The "@arg@" parameter must have {columns:d} columns.')

    if not np.all(np.isfinite(value)):
        raise ValueError('The "@arg@" parameter must contain only finite real values.')

    return value


def validate_probability(value: tany) -> float:

    return validate_float(value, lower_limit=(0.0, False), upper_limit=(1.0, False))


def validate_text(value: tany) -> str:

    if not isinstance(value, str):
        raise TypeError('The "@arg@" parameter must be a string.')

    return value


def validate_token_ids(value: tany, size: int) -> tarray:

    try:
        value = _extract_as_numeric(value)
    except Exception as e:
        raise TypeError('The "@arg@" parameter is null or wrongly typed.') from e

    if value.ndim != 1 or value.size == 0:
        raise ValueError('The "@arg@" parameter must be a non-empty vector of token identifiers.')

    if not np.issubdtype(value.dtype, np.integer):

        if not np.all(np.equal(np.mod(value, 1), 0)):
            raise ValueError('The "@arg@" parameter must contain only integer token identifiers.')

    value = value.astype(np.int64)

    if np.any(value < 0) or np.any(value >= size):
        raise ValueError(f'The "@arg@" parameter must contain only token identifiers between 0 and {size - 1:d}.')

    return value
