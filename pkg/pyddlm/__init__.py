# -*- coding: utf-8 -*-

__title__ = 'PyDDLM'
__version__ = '1.0.0'
__author__ = 'PyDDLM Developers'

__all__ = [
    'CheckpointError', 'ConfigError', 'NumericalError', 'TraceFormatError', 'ValidationError',
    'GenConfig', 'HaltConfig', 'RunConfig', 'load_config',
    'Vocabulary', 'build_vocabulary', 'decode', 'encode',
    'ARReference', 'Denoiser',
    'generate', 'generate_batch',
    'GenerationTrace', 'dynamics', 'read_trace', 'write_trace',
    'parse_grid', 'replay', 'sweep',
    'evaluate',
    'load_ar_reference', 'load_denoiser', 'train', 'train_ar_reference',
    'plot_dynamics', 'plot_sweep'
]

from pyddlm.exceptions import (
    CheckpointError,
    ConfigError,
    NumericalError,
    TraceFormatError,
    ValidationError
)

from pyddlm.config import (
    GenConfig,
    HaltConfig,
    RunConfig,
    load_config
)

from pyddlm.corpus import (
    Vocabulary,
    build_vocabulary,
    decode,
    encode
)

from pyddlm.denoiser import (
    ARReference,
    Denoiser
)

from pyddlm.halting import (
    parse_grid,
    replay,
    sweep
)

from pyddlm.metrics import (
    evaluate
)

from pyddlm.plotting import (
    plot_dynamics,
    plot_sweep
)

from pyddlm.sampler import (
    generate,
    generate_batch
)

from pyddlm.tracing import (
    GenerationTrace,
    dynamics,
    read_trace,
    write_trace
)

from pyddlm.training import (
    load_ar_reference,
    load_denoiser,
    train,
    train_ar_reference
)
