# -*- coding: utf-8 -*-

__all__ = [
    'GenResult',
    'conditioning_mask',
    'generate',
    'generate_batch',
    'init_state',
    'prompt_ids',
    'sample_record',
    'schedule_for',
    'split_tokens'
]


###########
# IMPORTS #
###########

# Standard

from concurrent.futures import (
    ThreadPoolExecutor
)

from dataclasses import (
    asdict
)

from inspect import (
    trace
)

from logging import (
    getLogger
)

from typing import (
    NamedTuple
)

# Libraries

import numpy as np
import torch

# Internal

from .config import (
    CONDITIONING_MODES,
    GenConfig,
    HaltConfig
)

from .corpus import (
    PAD_ID,
    Vocabulary,
    decode
)

from .custom_types import (
    oint,
    ostr,
    tany,
    tarray,
    tconfig_dict,
    tlist_any
)

from .denoiser import (
    denoise,
    interpolate_x0
)

from .diffusion import (
    EmbeddingTable,
    NoiseSchedule,
    NoisyState,
    euler_step,
    make_grid,
    normalize_embeddings
)

from .exceptions import (
    NumericalError
)

from .halting import (
    CriterionState,
    advance_state,
    decide,
    step_statistics
)

from .tracing import (
    GenerationTrace,
    new_trace,
    record_step
)

from .utilities import (
    create_generator,
    derive_seed,
    generate_validation_error,
    get_thread_count
)

from .validation import (
    validate_enumerator,
    validate_integer,
    validate_token_ids
)


#############
# CONSTANTS #
#############

_logger = getLogger(__name__)


###########
# CLASSES #
###########

class GenResult(NamedTuple):

    tokens: tarray
    halt_step: int
    halted_early: bool
    trace: GenerationTrace
    seed: int


#############
# FUNCTIONS #
#############

def _embedding_matrix(table: tany) -> torch.Tensor:

    with torch.no_grad():
        return table() if isinstance(table, EmbeddingTable) else normalize_embeddings(torch.as_tensor(table))


def _validate_cond_len(value: tany, mode: str, seq_len: int) -> int:

    value = validate_integer(value, lower_limit=(0, False))

    if mode != 'unconditional' and value >= seq_len:
        raise ValueError(f'The "@arg@" parameter must be less than the sequence length ({seq_len:d}).')

    return value


def _validate_prompt(value: tany, mode: str, seq_len: int, vocab_size: int) -> tarray:

    if value is None:

        if mode != 'unconditional':
            raise ValueError(f'The "@arg@" parameter is required by the {mode} conditioning.')

        return np.full(seq_len, PAD_ID, dtype=np.int64)

    value = validate_token_ids(value, vocab_size)

    if value.size > seq_len:
        raise ValueError(f'The "@arg@" parameter must not be longer than the sequence length ({seq_len:d}).')

    return np.concatenate([value, np.full(seq_len - value.size, PAD_ID, dtype=np.int64)])


def conditioning_mask(mode: str, cond_len: int, seq_len: int) -> tarray:

    """
    The function returns the boolean mask of the clean conditioning positions.

    | **Notes:**

    * The **prefix** conditioning keeps the first **cond_len** positions.
    * The **enclosed** conditioning keeps cond_len // 2 positions at the start and the remaining ones at the end.

    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        mode = validate_enumerator(mode, CONDITIONING_MODES)
        seq_len = validate_integer(seq_len, lower_limit=(1, False))
        cond_len = _validate_cond_len(cond_len, mode, seq_len)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    mask = np.zeros(seq_len, dtype=bool)

    if mode == 'prefix':
        mask[:cond_len] = True
    elif mode == 'enclosed':
        head = cond_len // 2
        tail = cond_len - head
        mask[:head] = True
        mask[seq_len - tail:] = True

    return mask


def generate(model: tany, cfg: GenConfig, halt: HaltConfig, prompt: tany = None, seed: oint = None, run_id: str = 'sample', checkpoint: ostr = None) -> GenResult:

    """
    The function generates one sequence by integrating the probability-flow ODE from pure noise.

    | **Notes:**

    * At every step the denoiser is evaluated, the statistics are recorded and the halting criterion is checked before the Euler update.
    * Without early exit the loop evaluates the denoiser **n_steps** + 1 times, the last one at the minimum noise level.
    * Conditioning positions echo the prompt in the output tokens.

    :param model: the trained denoiser.
    :param cfg: the generation configuration.
    :param halt: the halting configuration.
    :param prompt: the prompt token identifiers, required by the prefix and enclosed conditionings.
    :param seed: the seed of the initial noise, defaulting to the configured one.
    :param run_id: the identifier stored in the trace.
    :param checkpoint: the checkpoint identifier stored in the trace.
    :raises NumericalError: if the denoiser produces non-finite values.
    :raises ValidationError: if any input argument is not compliant.
    """

    seed = cfg.seed if seed is None else seed
    n_steps = cfg.n_steps

    halt.resolve_min_steps(n_steps)

    schedule = schedule_for(model, cfg)
    state = init_state(cfg, prompt, model.embedding, schedule, model.seq_len, seed)
    ids = prompt_ids(prompt, cfg.conditioning, model.seq_len, model.vocab_size)
    gen = ~state.cond_mask

    snapshot = {'gen': asdict(cfg), 'halt': asdict(halt)}
    trace_ = new_trace(run_id, snapshot, seed, checkpoint, n_steps, state.cond_mask, cfg.record)

    matrix = _embedding_matrix(model.embedding)
    criterion = CriterionState()
    tokens = ids

    for step in range(n_steps + 1):

        try:
            dist = denoise(model, state)
        except NumericalError as e:
            raise NumericalError(f'{e} at step {step:d}') from e

        probs = dist.to_numpy()
        tokens = np.where(state.cond_mask, ids, np.argmax(probs, axis=-1))

        with torch.no_grad():
            x0_hat = interpolate_x0(dist, matrix)

        stats = step_statistics(probs, tokens, gen, criterion)
        record_step(trace_, state, x0_hat, stats, tokens)

        decision, counter = decide(halt, stats, criterion.patience_counter, n_steps)
        criterion = advance_state(criterion, tokens, probs, counter)

        if decision.halt:
            _logger.debug('Run %s halted at step %d (%s, statistic %.6g).', run_id, step, decision.reason, decision.statistic)
            return GenResult(tokens, step, True, trace_, seed)

        if step < n_steps:
            state = euler_step(state, x0_hat, float(schedule.grid[step + 1]))

    return GenResult(tokens, n_steps, False, trace_, seed)


def generate_batch(model: tany, cfg: GenConfig, halt: HaltConfig, prompts: tlist_any, samples_per_prompt: oint = None, base_seed: oint = None, checkpoint: ostr = None) -> tlist_any:

    """
    The function generates several samples per prompt with seeds derived from the base seed, the prompt index and the sample index.

    | **Notes:**

    * Samples run on a thread pool capped by the HALT_DIFFUSION_THREADS environment variable.
    * Results are ordered by prompt index, then by sample index.

    :param model: the trained denoiser.
    :param cfg: the generation configuration.
    :param halt: the halting configuration.
    :param prompts: the prompts, None entries standing for unconditional generation.
    :param samples_per_prompt: the number of samples per prompt, defaulting to the configured one.
    :param base_seed: the base seed, defaulting to the configured one.
    :param checkpoint: the checkpoint identifier stored in the traces.
    """

    samples_per_prompt = cfg.samples_per_prompt if samples_per_prompt is None else samples_per_prompt
    base_seed = cfg.seed if base_seed is None else base_seed

    tasks = [(p, s, prompt) for p, prompt in enumerate(prompts) for s in range(samples_per_prompt)]

    def run(task: tuple) -> GenResult:
        p, s, prompt = task
        return generate(model, cfg, halt, prompt, derive_seed(base_seed, p, s), f'p{p:d}_s{s:d}', checkpoint)

    with ThreadPoolExecutor(max_workers=get_thread_count()) as executor:
        results = list(executor.map(run, tasks))

    return results


def init_state(cfg: GenConfig, prompt: tany, table: tany, schedule: NoiseSchedule, seq_len: int, seed: int) -> NoisyState:

    """
    The function builds the initial sampler state: scaled Gaussian noise on the generated positions and clean prompt embeddings elsewhere.

    :param cfg: the generation configuration.
    :param prompt: the prompt token identifiers, or None.
    :param table: the embedding table or an embedding matrix.
    :param schedule: the noise schedule, whose first grid point is the starting noise level.
    :param seq_len: the sequence length.
    :param seed: the seed of the noise.
    :raises ValidationError: if any input argument is not compliant.
    """

    matrix = _embedding_matrix(table)
    cond_mask = conditioning_mask(cfg.conditioning, cfg.cond_len, seq_len)
    ids = prompt_ids(prompt, cfg.conditioning, seq_len, matrix.shape[0])

    t_start = float(schedule.grid[0])
    amplitude = t_start if cfg.scale_grid else cfg.noise_scale * t_start

    eps = torch.randn((seq_len, matrix.shape[1]), generator=create_generator(seed), dtype=matrix.dtype)
    keep = torch.from_numpy(cond_mask).unsqueeze(-1)

    X = torch.where(keep, matrix[torch.from_numpy(ids)], amplitude * eps)

    return NoisyState(X, t_start, cond_mask)


def prompt_ids(prompt: tany, mode: str, seq_len: int, vocab_size: int) -> tarray:

    """
    The function right-pads a prompt to the sequence length.

    :raises ValidationError: if the prompt is missing for a conditioned mode or longer than the sequence length.
    """

    try:

        prompt = _validate_prompt(prompt, mode, seq_len, vocab_size)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    return prompt


def sample_record(result: GenResult, vocab: Vocabulary, halt: HaltConfig, prompt_index: int, sample_index: int, trace_path: ostr = None) -> tconfig_dict:

    """
    The function builds the samples file record of one generation result.
    """

    cond_mask = result.trace.cond_mask
    prefix, continuation = split_tokens(result.tokens, cond_mask)
    conditioning = result.trace.meta['config']['gen']['conditioning']

    return {
        'prompt': decode(result.tokens[cond_mask], vocab) if cond_mask.any() else '',
        'tokens': [int(token) for token in result.tokens],
        'text': decode(result.tokens, vocab),
        'halt_step': result.halt_step,
        'halted_early': result.halted_early,
        'seed': result.seed,
        'criterion': halt.kind,
        'threshold': halt.threshold,
        'prompt_index': prompt_index,
        'sample_index': sample_index,
        'conditioning': conditioning,
        'trace': trace_path,
        'prefix_ids': prefix,
        'continuation_ids': continuation,
        'vocab_id': vocab.fingerprint
    }


def schedule_for(model: tany, cfg: GenConfig) -> NoiseSchedule:

    t_max = model.t_max if cfg.t_max is None else cfg.t_max
    noise_scale = cfg.noise_scale if cfg.scale_grid else 1.0

    return make_grid(t_max, cfg.t_min_ratio * t_max, cfg.n_steps, noise_scale, cfg.spacing)


def split_tokens(tokens: tany, cond_mask: tany) -> tuple:

    """
    The function splits a sequence into the conditioning tokens preceding the first generated position and the generated tokens.
    """

    tokens = np.asarray(tokens, dtype=np.int64)
    cond_mask = np.asarray(cond_mask, dtype=bool)

    generated = np.flatnonzero(~cond_mask)
    first = int(generated[0]) if generated.size > 0 else tokens.size

    return tokens[:first].tolist(), tokens[~cond_mask].tolist()
