# -*- coding: utf-8 -*-

__all__ = [
    'ARConfig',
    'CorpusConfig',
    'GenConfig',
    'HaltConfig',
    'MaskSpec',
    'MetricsConfig',
    'ModelConfig',
    'RunConfig',
    'TrainConfig',
    'apply_overrides',
    'load_config'
]


###########
# IMPORTS #
###########

# Standard

from dataclasses import (
    asdict,
    dataclass,
    field,
    fields,
    is_dataclass,
    replace
)

from json import (
    JSONDecodeError,
    loads as json_loads
)

# Internal

from .custom_types import (
    ofloat,
    oint,
    ostr,
    tany,
    tconfig_dict,
    tlist_str,
    tpath
)

from .exceptions import (
    ConfigError
)

from .files_io import (
    read_json
)

from .validation import (
    validate_boolean,
    validate_enumerator,
    validate_float,
    validate_integer,
    validate_integer_range,
    validate_probability
)


#############
# CONSTANTS #
#############

CONDITIONING_MODES = ['unconditional', 'prefix', 'enclosed']
GRID_SPACINGS = ['linear', 'geometric']
HALT_KINDS = ['none', 'entropy', 'patience', 'kl', 'fixed']
MASK_STRATEGIES = ['mlm', 'prefix', 'span', 'mixed']
MODEL_DTYPES = ['float32', 'float64']
TOKENIZER_MODES = ['char', 'word']
TRACE_VERBOSITIES = ['stats', 'stats+states']


#############
# FUNCTIONS #
#############

def _check_fields(instance: tany, rules: dict):

    for name, (validator, optional, kwargs) in rules.items():

        value = getattr(instance, name)

        if value is None and optional:
            continue

        try:
            value = validator(value, **kwargs)
        except Exception as e:
            message = str(e).replace('The "@arg@" parameter', 'The value')
            raise ConfigError(name, message) from None

        object.__setattr__(instance, name, value)


def _build_section(cls: type, data: tany, path: str) -> tany:

    if not isinstance(data, dict):
        raise ConfigError(path, 'The section must be a JSON object.')

    known = {f.name: f for f in fields(cls)}
    kwargs = {}

    for key, value in data.items():

        key_path = f'{path}.{key}' if len(path) > 0 else key

        if key not in known:
            raise ConfigError(key_path, 'unknown key')

        default = known[key].default_factory() if callable(known[key].default_factory) else known[key].default

        if is_dataclass(default):
            kwargs[key] = _build_section(type(default), value, key_path)
        else:
            kwargs[key] = value

    try:
        return cls(**kwargs)
    except ConfigError as e:
        key_path = f'{path}.{e.key_path}' if len(path) > 0 else e.key_path
        raise ConfigError(key_path, e.message) from None


def _parse_override_value(text: str) -> tany:

    try:
        return json_loads(text)
    except JSONDecodeError:
        return text


def apply_overrides(config: 'RunConfig', overrides: tlist_str) -> 'RunConfig':

    """
    Applies a list of "section.key=value" overrides to a configuration, values being parsed as JSON when possible.
    """

    data = config.to_dict()

    for override in overrides:

        if '=' not in override:
            raise ConfigError(override, 'The override must have the form "section.key=value".')

        key_path, text = override.split('=', 1)
        keys = key_path.strip().split('.')
        target = data

        for key in keys[:-1]:

            if not isinstance(target.get(key), dict):
                raise ConfigError(key_path, 'unknown key')

            target = target[key]

        if keys[-1] not in target:
            raise ConfigError(key_path, 'unknown key')

        target[keys[-1]] = _parse_override_value(text.strip())

    return RunConfig.from_dict(data)


def load_config(file_path: tpath) -> 'RunConfig':

    try:
        data = read_json(file_path)
    except JSONDecodeError as e:
        raise ConfigError(str(file_path), f'The configuration file is not valid JSON ({e.msg}).') from None

    return RunConfig.from_dict(data)


###########
# CLASSES #
###########

@dataclass(frozen=True)
class CorpusConfig:

    """
    Defines where the training text comes from and how it is tokenized.
    """

    path: ostr = None
    mode: str = 'char'
    max_size: int = 512
    seq_len: int = 64

    def __post_init__(self):

        _check_fields(self, {
            'path': (lambda v: str(v), True, {}),
            'mode': (validate_enumerator, False, {'possible_values': TOKENIZER_MODES}),
            'max_size': (validate_integer, False, {'lower_limit': (2, False)}),
            'seq_len': (validate_integer, False, {'lower_limit': (2, False)})
        })


@dataclass(frozen=True)
class ModelConfig:

    d: int = 64
    d_model: int = 128
    layers: int = 2
    heads: int = 4
    ff_mult: int = 4
    time_features: int = 64
    dtype: str = 'float32'

    def __post_init__(self):

        _check_fields(self, {
            'd': (validate_integer, False, {'lower_limit': (1, False)}),
            'd_model': (validate_integer, False, {'lower_limit': (1, False)}),
            'layers': (validate_integer, False, {'lower_limit': (1, False)}),
            'heads': (validate_integer, False, {'lower_limit': (1, False)}),
            'ff_mult': (validate_integer, False, {'lower_limit': (1, False)}),
            'time_features': (validate_integer, False, {'lower_limit': (2, False)}),
            'dtype': (validate_enumerator, False, {'possible_values': MODEL_DTYPES})
        })

        if self.d_model % self.heads != 0:
            raise ConfigError('heads', 'The value must divide d_model.')

        if self.time_features % 2 != 0:
            raise ConfigError('time_features', 'The value must be even.')


@dataclass(frozen=True)
class MaskSpec:

    """
    Defines which sequence positions receive noise during training.
    """

    strategy: str = 'prefix'
    mlm_rate: float = 0.15
    prefix_len_range: tuple = (0, 32)
    k_max: int = 9
    span_noise_prob: float = 0.5

    def __post_init__(self):

        _check_fields(self, {
            'strategy': (validate_enumerator, False, {'possible_values': MASK_STRATEGIES}),
            'mlm_rate': (validate_probability, False, {}),
            'prefix_len_range': (validate_integer_range, False, {}),
            'k_max': (validate_integer, False, {'lower_limit': (1, False)}),
            'span_noise_prob': (validate_probability, False, {})
        })


@dataclass(frozen=True)
class TrainConfig:

    t_max: float = 10.0
    steps: int = 5000
    batch_size: int = 32
    lr: float = 3e-4
    warmup_steps: int = 500
    schedule: str = 'cosine-with-warmup'
    mask_spec: MaskSpec = field(default_factory=MaskSpec)
    time_warping: bool = False
    warp_ema_rate: float = 0.01
    loss_ema_rate: float = 0.01
    grad_clip: float = 1.0
    checkpoint_every: int = 1000
    log_every: int = 100
    seed: oint = None

    def __post_init__(self):

        _check_fields(self, {
            't_max': (validate_float, False, {'lower_limit': (0.0, True)}),
            'steps': (validate_integer, False, {'lower_limit': (0, False)}),
            'batch_size': (validate_integer, False, {'lower_limit': (1, False)}),
            'lr': (validate_float, False, {'lower_limit': (0.0, False)}),
            'warmup_steps': (validate_integer, False, {'lower_limit': (0, False)}),
            'schedule': (validate_enumerator, False, {'possible_values': ['cosine-with-warmup']}),
            'time_warping': (validate_boolean, False, {}),
            'warp_ema_rate': (validate_probability, False, {}),
            'loss_ema_rate': (validate_probability, False, {}),
            'grad_clip': (validate_float, False, {'lower_limit': (0.0, True)}),
            'checkpoint_every': (validate_integer, False, {'lower_limit': (1, False)}),
            'log_every': (validate_integer, False, {'lower_limit': (1, False)}),
            'seed': (validate_integer, True, {'lower_limit': (0, False)})
        })


@dataclass(frozen=True)
class ARConfig:

    """
    Defines the training of the autoregressive reference scorer.
    """

    enabled: bool = False
    steps: int = 2000
    batch_size: int = 32
    lr: float = 1e-3
    warmup_steps: int = 100
    seed: oint = None

    def __post_init__(self):

        _check_fields(self, {
            'enabled': (validate_boolean, False, {}),
            'steps': (validate_integer, False, {'lower_limit': (0, False)}),
            'batch_size': (validate_integer, False, {'lower_limit': (1, False)}),
            'lr': (validate_float, False, {'lower_limit': (0.0, False)}),
            'warmup_steps': (validate_integer, False, {'lower_limit': (0, False)}),
            'seed': (validate_integer, True, {'lower_limit': (0, False)})
        })


@dataclass(frozen=True)
class GenConfig:

    """
    Defines the generation loop; a missing t_max is taken from the checkpoint.
    """

    n_steps: int = 200
    noise_scale: float = 1.0
    conditioning: str = 'unconditional'
    cond_len: int = 32
    t_max: ofloat = None
    t_min_ratio: float = 0.01
    spacing: str = 'linear'
    scale_grid: bool = False
    record: str = 'stats'
    samples_per_prompt: int = 5
    seed: oint = None

    def __post_init__(self):

        _check_fields(self, {
            'n_steps': (validate_integer, False, {'lower_limit': (1, False)}),
            'noise_scale': (validate_float, False, {'lower_limit': (0.0, False)}),
            'conditioning': (validate_enumerator, False, {'possible_values': CONDITIONING_MODES}),
            'cond_len': (validate_integer, False, {'lower_limit': (0, False)}),
            't_max': (validate_float, True, {'lower_limit': (0.0, True)}),
            't_min_ratio': (validate_float, False, {'lower_limit': (0.0, True), 'upper_limit': (1.0, True)}),
            'spacing': (validate_enumerator, False, {'possible_values': GRID_SPACINGS}),
            'scale_grid': (validate_boolean, False, {}),
            'record': (validate_enumerator, False, {'possible_values': TRACE_VERBOSITIES}),
            'samples_per_prompt': (validate_integer, False, {'lower_limit': (1, False)}),
            'seed': (validate_integer, True, {'lower_limit': (0, False)})
        })


@dataclass(frozen=True)
class HaltConfig:

    """
    Defines the early-exit criterion; a missing min_steps resolves to round(0.25 * n_steps) for KL and 0 otherwise.
    """

    kind: str = 'none'
    e_t: float = 0.0
    patience_p: int = 5
    switch_threshold: int = 0
    d_t: float = 0.0
    min_steps: oint = None
    fixed_step: int = 0
    kl_halt_above: bool = False

    def __post_init__(self):

        _check_fields(self, {
            'kind': (validate_enumerator, False, {'possible_values': HALT_KINDS}),
            'e_t': (validate_float, False, {'lower_limit': (0.0, False)}),
            'patience_p': (validate_integer, False, {'lower_limit': (1, False)}),
            'switch_threshold': (validate_integer, False, {'lower_limit': (0, False)}),
            'd_t': (validate_float, False, {'lower_limit': (0.0, False)}),
            'min_steps': (validate_integer, True, {'lower_limit': (0, False)}),
            'fixed_step': (validate_integer, False, {'lower_limit': (0, False)}),
            'kl_halt_above': (validate_boolean, False, {})
        })

    @property
    def threshold(self) -> tany:

        """
        The value the criterion compares against, or None when no criterion is configured.
        """

        if self.kind == 'entropy':
            return self.e_t

        if self.kind == 'kl':
            return self.d_t

        if self.kind == 'patience':
            return self.patience_p

        if self.kind == 'fixed':
            return self.fixed_step

        return None

    def resolve_min_steps(self, n_steps: int) -> int:

        if self.min_steps is not None:
            min_steps = self.min_steps
        elif self.kind == 'kl':
            min_steps = int(round(0.25 * n_steps))
        else:
            min_steps = 0

        if self.kind != 'none' and self.kind != 'fixed' and min_steps >= n_steps:
            raise ConfigError('halt.min_steps', f'The value must be less than the number of steps ({n_steps:d}).')

        return min_steps


@dataclass(frozen=True)
class MetricsConfig:

    group_size: int = 5
    bleu_max_n: int = 4

    def __post_init__(self):

        _check_fields(self, {
            'group_size': (validate_integer, False, {'lower_limit': (2, False)}),
            'bleu_max_n': (validate_integer, False, {'lower_limit': (1, False)})
        })


@dataclass(frozen=True)
class RunConfig:

    """
    Defines the merged configuration of a run; section seeds left unset inherit the run seed.
    """

    run_dir: str = 'runs/default'
    seed: int = 0
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    ar: ARConfig = field(default_factory=ARConfig)
    gen: GenConfig = field(default_factory=GenConfig)
    halt: HaltConfig = field(default_factory=HaltConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def __post_init__(self):

        _check_fields(self, {
            'run_dir': (lambda v: str(v), False, {}),
            'seed': (validate_integer, False, {'lower_limit': (0, False)})
        })

        for name, section in (('train', self.train), ('ar', self.ar), ('gen', self.gen)):
            if section.seed is None:
                seed = self.seed + 1 if name == 'ar' else self.seed
                object.__setattr__(self, name, replace(section, seed=seed))

    @classmethod
    def from_dict(cls, data: tconfig_dict) -> 'RunConfig':

        """
        Builds a configuration from a nested mapping, rejecting unknown keys.

        :raises ConfigError: if a key is unknown or a value is invalid.
        """

        return _build_section(cls, data, '')

    def to_dict(self) -> tconfig_dict:

        data = asdict(self)
        data['train']['mask_spec']['prefix_len_range'] = list(self.train.mask_spec.prefix_len_range)

        return data
