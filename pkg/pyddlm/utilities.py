# -*- coding: utf-8 -*-

__all__ = [
    'atomic_write',
    'create_generator',
    'create_rng',
    'derive_seed',
    'generate_validation_error',
    'get_thread_count'
]


###########
# IMPORTS #
###########

# Standard

from contextlib import (
    contextmanager
)

from os import (
    environ,
    replace
)

from pathlib import (
    Path
)

from tempfile import (
    NamedTemporaryFile
)

# Libraries

import numpy as np
import numpy.random as npr
import torch

# Internal

from .custom_types import (
    oint,
    tany,
    texception,
    tgen,
    tpath,
    trand
)

from .exceptions import (
    ValidationError
)


#############
# CONSTANTS #
#############

_threads_variable = 'HALT_DIFFUSION_THREADS'


#############
# FUNCTIONS #
#############

@contextmanager
def atomic_write(file_path: tpath, binary: bool = False):

    """
    Opens a temporary file next to the target and renames it over the target once the block completes.
    """

    target = Path(file_path)
    target.parent.mkdir(parents=True, exist_ok=True)

    mode = 'wb' if binary else 'w'
    kwargs = {} if binary else {'encoding': 'utf-8', 'newline': ''}

    with NamedTemporaryFile(mode=mode, dir=target.parent, prefix=f'.{target.name}.', suffix='.tmp', delete=False, **kwargs) as file:
        temporary = Path(file.name)

        try:
            yield file
        except BaseException:
            file.close()
            temporary.unlink(missing_ok=True)
            raise

    replace(temporary, target)


def create_generator(seed: int) -> tgen:

    generator = torch.Generator(device='cpu')
    generator.manual_seed(int(seed))

    return generator


def create_rng(seed: oint) -> trand:

    if seed is None:
        return npr.RandomState()

    if isinstance(seed, (int, np.integer)):
        return npr.RandomState(int(seed) % 2**32)

    raise TypeError('The specified seed is not a valid RNG initializer.')


def derive_seed(seed: int, *keys: int) -> int:

    """
    Derives a child seed from a base seed and a sequence of non-negative integer keys.
    """

    sequence = np.random.SeedSequence([int(seed) % 2**63] + [int(key) for key in keys])
    value = int(sequence.generate_state(1, dtype=np.uint32)[0])

    return value


def generate_validation_error(e: texception, trace: tany) -> ValidationError:

    arguments = ''.join(trace[0][4]).split('=', 1)[0].strip()
    message = str(e).replace('@arg@', arguments)

    return ValidationError(message)


def get_thread_count() -> int:

    value = environ.get(_threads_variable, '').strip()

    if len(value) == 0:
        return max(1, torch.get_num_threads())

    try:
        threads = int(value)
    except ValueError as e:
        raise ValidationError(f'The "{_threads_variable}" environment variable must be a positive integer.') from e

    if threads < 1:
        raise ValidationError(f'The "{_threads_variable}" environment variable must be a positive integer.')

    return threads
