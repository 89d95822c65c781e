# -*- coding: utf-8 -*-

__all__ = [
    'StepReport',
    'TrainState',
    'ar_train_step',
    'cdcd_loss',
    'cosine_with_warmup',
    'create_train_state',
    'latest_checkpoint',
    'load_ar_reference',
    'load_denoiser',
    'load_train_state',
    'sample_times',
    'save_ar_reference',
    'save_checkpoint',
    'train',
    'train_ar_reference',
    'train_step'
]


###########
# IMPORTS #
###########

# Standard

from dataclasses import (
    dataclass
)

from inspect import (
    trace
)

from logging import (
    getLogger
)

from math import (
    cos,
    pi
)

from pathlib import (
    Path
)

from re import (
    fullmatch
)

from typing import (
    NamedTuple
)

# Libraries

import numpy as np
import torch
import torch.nn.functional as F

from tqdm import (
    tqdm
)

# Internal

from .config import (
    ModelConfig,
    RunConfig,
    TrainConfig
)

from .corpus import (
    Vocabulary,
    batch_at,
    write_vocabulary
)

from .custom_types import (
    ofloat,
    opath,
    tany,
    tarray,
    tconfig_dict,
    tpath,
    ttensor
)

from .denoiser import (
    ARReference,
    Denoiser,
    TokenDistribution,
    create_ar_reference,
    create_denoiser
)

from .diffusion import (
    TimeWarpCDF,
    perturb,
    sample_mask,
    warp_sample,
    warp_update
)

from .exceptions import (
    CheckpointError,
    NumericalError
)

from .files_io import (
    append_csv,
    read_checkpoint,
    read_csv,
    write_checkpoint,
    write_csv,
    write_json
)

from .utilities import (
    create_generator,
    create_rng,
    derive_seed,
    generate_validation_error
)


#############
# CONSTANTS #
#############

_ar_log_header = ['step', 'loss', 'lr']
_log_header = ['step', 'loss', 'loss_ema', 'lr', 'mean_t', 'accuracy', 'noised_fraction']

_logger = getLogger(__name__)


###########
# CLASSES #
###########

class StepReport(NamedTuple):

    step: int
    loss: float
    loss_ema: float
    lr: float
    mean_t: float
    accuracy: float
    noised_fraction: float


@dataclass
class TrainState:

    """
    Defines the mutable state of the training loop.
    """

    model: Denoiser
    optimizer: torch.optim.Optimizer
    warp: TimeWarpCDF
    step: int = 0
    loss_ema: ofloat = None


#############
# FUNCTIONS #
#############

def _adam(model: torch.nn.Module, lr: float) -> torch.optim.Adam:

    return torch.optim.Adam(model.parameters(), lr=lr, betas=(0.9, 0.999), eps=1e-8)


def _model_tensors(model: torch.nn.Module) -> dict:

    return {f'model.{name}': value.detach().cpu().numpy() for name, value in model.state_dict().items()}


def _restore_model(model: torch.nn.Module, tensors: dict, file_path: tpath):

    state_dict = {name[len('model.'):]: torch.from_numpy(value) for name, value in tensors.items() if name.startswith('model.')}

    try:
        model.load_state_dict(state_dict)
    except RuntimeError as e:
        raise CheckpointError(f'The checkpoint "{file_path}" does not match the model architecture.') from e


def _vocabulary_of(header: tconfig_dict, file_path: tpath) -> Vocabulary:

    try:
        return Vocabulary(header['vocabulary'], header['vocab_mode'])
    except Exception as e:
        raise CheckpointError(f'The checkpoint "{file_path}" does not contain a valid vocabulary.') from e


def ar_train_step(model: ARReference, optimizer: torch.optim.Optimizer, ids: tarray, lr: float, grad_clip: float = 1.0) -> float:

    """
    The function performs one optimization step of the causal next-token cross-entropy over all positions.
    """

    model.train()

    loss = -model.next_token_log_probs(ids).mean()

    if not bool(torch.isfinite(loss)):
        raise NumericalError('non-finite loss in the autoregressive reference')

    for group in optimizer.param_groups:
        group['lr'] = lr

    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    torch.nn.utils.clip_grad_norm_(model.parameters(), grad_clip)
    optimizer.step()

    return float(loss.detach())


def cdcd_loss(dist: tany, targets: tany, mask: tany) -> ttensor:

    """
    The function computes the mean cross-entropy over the noised positions only.

    :param dist: a token distribution or raw logits, shaped (..., seq_len, vocab_size).
    :param targets: the clean token identifiers, shaped (..., seq_len).
    :param mask: the boolean mask of noised positions, shaped (..., seq_len).
    :raises ValidationError: if any input argument is not compliant.
    """

    logits = dist.logits if isinstance(dist, TokenDistribution) else torch.as_tensor(dist)

    try:

        targets = torch.as_tensor(np.asarray(targets) if not isinstance(targets, torch.Tensor) else targets, dtype=torch.long)
        mask = torch.as_tensor(np.asarray(mask) if not isinstance(mask, torch.Tensor) else mask, dtype=torch.bool)

        if not bool(mask.any()):
            raise ValueError('The "@arg@" parameter must contain at least one noised position.')

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    log_probs = F.log_softmax(logits, dim=-1)
    nll = -log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)

    return nll[mask].mean()


def cosine_with_warmup(step: int, warmup_steps: int, total_steps: int) -> float:

    """
    The function returns the learning-rate multiplier of a linear warmup followed by a cosine decay.
    """

    if warmup_steps > 0 and step < warmup_steps:
        return (step + 1) / warmup_steps

    if total_steps <= warmup_steps:
        return 1.0

    progress = min(1.0, (step - warmup_steps) / (total_steps - warmup_steps))

    return 0.5 * (1.0 + cos(pi * progress))


def create_train_state(vocab_size: int, seq_len: int, model_config: ModelConfig, config: TrainConfig) -> TrainState:

    model = create_denoiser(vocab_size, seq_len, config.t_max, model_config, config.seed)
    optimizer = _adam(model, config.lr)
    warp = TimeWarpCDF.uniform(config.t_max)

    return TrainState(model, optimizer, warp)


def latest_checkpoint(directory: tpath) -> opath:

    directory = Path(directory)

    if not directory.is_dir():
        return None

    candidates = []

    for file_path in directory.iterdir():

        match = fullmatch(r'step_(\d+)\.ckpt', file_path.name)

        if match is not None:
            candidates.append((int(match.group(1)), file_path))

    if len(candidates) == 0:
        return None

    return max(candidates)[1]


def load_ar_reference(file_path: tpath) -> tuple:

    """
    The function loads an autoregressive reference checkpoint and returns the model, the header and the vocabulary.

    :raises CheckpointError: if the checkpoint is invalid.
    """

    header, tensors = read_checkpoint(file_path)

    if header.get('kind') != 'ar_reference':
        raise CheckpointError(f'The checkpoint "{file_path}" does not contain an autoregressive reference.')

    hparams = header['hparams']
    config = ModelConfig(**hparams['model'])
    model = create_ar_reference(hparams['vocab_size'], hparams['seq_len'], config, 0)

    _restore_model(model, tensors, file_path)
    model.eval()

    return model, header, _vocabulary_of(header, file_path)


def load_denoiser(file_path: tpath) -> tuple:

    """
    The function loads a denoiser checkpoint and returns the model, the header and the vocabulary.

    :raises CheckpointError: if the checkpoint is invalid.
    """

    header, tensors = read_checkpoint(file_path)

    if header.get('kind') != 'denoiser':
        raise CheckpointError(f'The checkpoint "{file_path}" does not contain a denoiser.')

    hparams = header['hparams']
    config = ModelConfig(**hparams['model'])
    model = create_denoiser(hparams['vocab_size'], hparams['seq_len'], hparams['t_max'], config, 0)

    _restore_model(model, tensors, file_path)
    model.eval()

    return model, header, _vocabulary_of(header, file_path)


def load_train_state(file_path: tpath, config: TrainConfig) -> TrainState:

    """
    The function restores a training state, optimizer moments and time-warp CDF included.

    :raises CheckpointError: if the checkpoint is invalid.
    """

    model, header, _ = load_denoiser(file_path)
    _, tensors = read_checkpoint(file_path)

    optimizer = _adam(model, config.lr)
    moments = {}

    for name, value in tensors.items():

        if not name.startswith('optimizer.'):
            continue

        _, index, key = name.split('.', 2)
        moments.setdefault(int(index), {})[key] = torch.from_numpy(value)

    try:
        optimizer.load_state_dict({'state': moments, 'param_groups': optimizer.state_dict()['param_groups']})
    except (ValueError, KeyError) as e:
        raise CheckpointError(f'The checkpoint "{file_path}" contains invalid optimizer moments.') from e

    warp = TimeWarpCDF(tensors['warp.knots'], tensors['warp.weights'])

    return TrainState(model, optimizer, warp, int(header['step']), header['loss_ema'])


def sample_times(config: TrainConfig, warp: TimeWarpCDF, u: tarray) -> tarray:

    """
    The function maps uniform draws in [0, 1) to training noise levels, uniform over (0, t_max] or warped.
    """

    if config.time_warping:
        return np.asarray(warp_sample(warp, u), dtype=float)

    return config.t_max * (1.0 - np.asarray(u, dtype=float))


def save_ar_reference(file_path: tpath, model: ARReference, vocab: Vocabulary, config: tconfig_dict):

    header = {'kind': 'ar_reference', 'hparams': model.hparams, 'config': config, 'vocabulary': vocab.tokens, 'vocab_mode': vocab.mode}

    write_checkpoint(file_path, header, _model_tensors(model))


def save_checkpoint(file_path: tpath, state: TrainState, vocab: Vocabulary, config: tconfig_dict):

    """
    The function writes a denoiser checkpoint carrying everything needed to resume training.
    """

    header = {
        'kind': 'denoiser',
        'hparams': state.model.hparams,
        'step': state.step,
        'loss_ema': state.loss_ema,
        'config': config,
        'vocabulary': vocab.tokens,
        'vocab_mode': vocab.mode
    }

    tensors = _model_tensors(state.model)
    tensors['warp.knots'] = state.warp.knots
    tensors['warp.weights'] = state.warp.weights

    for index, moments in state.optimizer.state_dict()['state'].items():
        for key, value in moments.items():
            tensors[f'optimizer.{index:d}.{key}'] = torch.as_tensor(value).detach().cpu().numpy()

    write_checkpoint(file_path, header, tensors)


def train_step(state: TrainState, batch: tany, config: TrainConfig) -> tuple:

    """
    The function performs one training step: time and mask sampling, noising, denoising, loss, Adam update,
    embedding renormalization and time-warp fitting.

    | **Notes:**

    * Every random draw is derived from the training seed and the step counter.
    * A non-finite loss raises before any parameter is touched.
    * A batch without any noised position leaves the parameters untouched and only advances the step counter.

    :param state: the training state, updated in place.
    :param batch: the batch of token sequences.
    :param config: the training configuration.
    :raises NumericalError: if the loss is not finite.
    """

    model = state.model
    dtype = model.embedding.weight.dtype

    ids = torch.as_tensor(np.asarray(batch.sequences), dtype=torch.long)
    size, length = ids.shape

    u = create_rng(derive_seed(config.seed, state.step, 0)).random_sample(size)
    t_values = sample_times(config, state.warp, u)
    masks = np.stack([sample_mask(config.mask_spec, length, derive_seed(config.seed, state.step, 1, i)).mask for i in range(size)])

    lr = config.lr * cosine_with_warmup(state.step, config.warmup_steps, config.steps)

    if not masks.any():
        _logger.warning('Skipped step %d: the batch has no noised position.', state.step)
        state.step += 1
        loss_ema = 0.0 if state.loss_ema is None else state.loss_ema
        return state, StepReport(state.step, 0.0, loss_ema, lr, float(np.mean(t_values)), 0.0, 0.0)

    t = torch.from_numpy(t_values).to(dtype)
    mask = torch.from_numpy(masks)

    model.train()

    clean = model.embedding()[ids]
    X = perturb(clean, mask, t, create_generator(derive_seed(config.seed, state.step, 2)))
    logits = model(X, t, ~mask)
    loss = cdcd_loss(logits, ids, mask)

    if not bool(torch.isfinite(loss)):
        raise NumericalError(f'non-finite loss at step {state.step:d}')

    for group in state.optimizer.param_groups:
        group['lr'] = lr

    state.optimizer.zero_grad(set_to_none=True)
    loss.backward()
    torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
    state.optimizer.step()
    model.embedding.renormalize_()

    with torch.no_grad():

        nll = -F.log_softmax(logits.detach(), dim=-1).gather(-1, ids.unsqueeze(-1)).squeeze(-1)
        counts = mask.sum(dim=1)
        sequence_losses = ((nll * mask).sum(dim=1) / counts.clamp(min=1)).double().numpy()
        accuracy = float((logits.detach().argmax(dim=-1) == ids)[mask].double().mean())

    bins = state.warp.bin_of(t_values)

    for i in range(size):
        if counts[i] > 0:
            state.warp = warp_update(state.warp, int(bins[i]), float(sequence_losses[i]), config.warp_ema_rate)

    loss_value = float(loss.detach())

    if state.loss_ema is None:
        state.loss_ema = loss_value
    else:
        state.loss_ema = (1.0 - config.loss_ema_rate) * state.loss_ema + config.loss_ema_rate * loss_value

    state.step += 1

    report = StepReport(state.step, loss_value, state.loss_ema, lr, float(np.mean(t_values)), accuracy, float(masks.mean()))

    return state, report


def train(config: RunConfig, corpus: tarray, vocab: Vocabulary, run_dir: opath = None, resume: bool = False, progress: bool = True) -> Path:

    """
    The function runs the training loop and returns the path of the final checkpoint.

    | **Notes:**

    * The run directory receives config.json, vocab.txt, train_log.csv and checkpoints/step_N.ckpt.
    * When resuming, training continues from the newest checkpoint and the log is truncated to that step.

    :param config: the run configuration.
    :param corpus: the encoded corpus, one sequence per row.
    :param vocab: the vocabulary.
    :param run_dir: the run directory, defaulting to the configured one.
    :param resume: a boolean indicating whether to resume from the newest checkpoint.
    :param progress: a boolean indicating whether to display a progress bar.
    """

    run_dir = Path(run_dir if run_dir is not None else config.run_dir)
    checkpoints = run_dir / 'checkpoints'
    log_path = run_dir / 'train_log.csv'

    cfg = config.train
    snapshot = config.to_dict()
    corpus = np.asarray(corpus, dtype=np.int64)

    try:
        write_json(run_dir / 'config.json', snapshot)
        write_vocabulary(vocab, run_dir / 'vocab.txt')
    except OSError as e:
        raise OSError(f'Unable to write the run directory "{run_dir}": {e}') from e

    state = None

    if resume:

        latest = latest_checkpoint(checkpoints)

        if latest is not None:

            state = load_train_state(latest, cfg)
            _logger.info('Resuming training from %s (step %d).', latest, state.step)

            if log_path.is_file():
                header, rows = read_csv(log_path)
                write_csv(log_path, header, [row for row in rows if int(row['step']) <= state.step])

    if state is None:

        state = create_train_state(vocab.size, corpus.shape[1], config.model, cfg)

        write_csv(log_path, _log_header, [])
        save_checkpoint(checkpoints / 'step_0.ckpt', state, vocab, snapshot)

    pending = []
    bar = tqdm(total=cfg.steps, initial=state.step, desc='train', disable=not progress)

    while state.step < cfg.steps:

        batch = batch_at(corpus, cfg.batch_size, cfg.seed, state.step)
        state, report = train_step(state, batch, cfg)

        pending.append(report._asdict())
        bar.update(1)
        bar.set_postfix(loss=f'{report.loss_ema:.4f}')

        if state.step % cfg.log_every == 0:
            _logger.info('step %d loss %.4f lr %.3g mean t %.3f', report.step, report.loss_ema, report.lr, report.mean_t)

        if state.step % cfg.checkpoint_every == 0 or state.step == cfg.steps:
            append_csv(log_path, _log_header, pending)
            pending = []
            save_checkpoint(checkpoints / f'step_{state.step:d}.ckpt', state, vocab, snapshot)

    bar.close()

    return checkpoints / f'step_{state.step:d}.ckpt'


def train_ar_reference(config: RunConfig, corpus: tarray, vocab: Vocabulary, run_dir: opath = None, progress: bool = True) -> Path:

    """
    The function trains the autoregressive reference scorer on the same corpus and returns its checkpoint path.
    """

    run_dir = Path(run_dir if run_dir is not None else config.run_dir)
    log_path = run_dir / 'ar_train_log.csv'
    cfg = config.ar

    corpus = np.asarray(corpus, dtype=np.int64)
    model = create_ar_reference(vocab.size, corpus.shape[1], config.model, cfg.seed)
    optimizer = _adam(model, cfg.lr)

    write_csv(log_path, _ar_log_header, [])

    rows = []

    for step in tqdm(range(cfg.steps), desc='ar reference', disable=not progress):

        batch = batch_at(corpus, cfg.batch_size, cfg.seed, step)
        lr = cfg.lr * cosine_with_warmup(step, cfg.warmup_steps, cfg.steps)
        loss = ar_train_step(model, optimizer, batch.sequences, lr, config.train.grad_clip)

        rows.append({'step': step + 1, 'loss': loss, 'lr': lr})

        if (step + 1) % config.train.log_every == 0:
            _logger.info('ar step %d loss %.4f', step + 1, loss)

    append_csv(log_path, _ar_log_header, rows)

    model.eval()
    file_path = run_dir / 'ar_reference.ckpt'
    save_ar_reference(file_path, model, vocab, config.to_dict())

    return file_path
