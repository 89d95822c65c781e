# -*- coding: utf-8 -*-

__all__ = [
    'finite_output'
]


###########
# IMPORTS #
###########

# Standard

from functools import (
    wraps
)

# Libraries

import numpy as np
import torch

# Internal

from .exceptions import (
    NumericalError
)


###########
# CLASSES #
###########

# noinspection PyPep8Naming
class finite_output:

    """
    | A class decorator used for marking functions whose numeric output must be finite.
    | Tensors, arrays and floats are inspected, tuples are inspected element by element.
    """

    def __init__(self, message: str):

        self.message = message

    def __call__(self, func):

        message = self.message

        @wraps(func)
        def inner(*args, **kwargs):

            result = func(*args, **kwargs)
            values = result if isinstance(result, tuple) else (result,)

            for value in values:

                if isinstance(value, torch.Tensor):
                    finite = bool(torch.isfinite(value).all())
                elif isinstance(value, (np.ndarray, float, np.floating)):
                    finite = bool(np.all(np.isfinite(value)))
                else:
                    continue

                if not finite:
                    raise NumericalError(message)

            return result

        inner._finite_output = True

        return inner
