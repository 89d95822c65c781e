# -*- coding: utf-8 -*-

__all__ = [
    'EmbeddingTable',
    'MaskSample',
    'NoiseSchedule',
    'NoisyState',
    'TimeWarpCDF',
    'add_noise',
    'embed',
    'euler_step',
    'make_grid',
    'normalize_embeddings',
    'perturb',
    'sample_mask',
    'score',
    'warp_sample',
    'warp_update'
]


###########
# IMPORTS #
###########

# Standard

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
import torch.nn as nn

# Internal

from .config import (
    MaskSpec
)

from .custom_types import (
    ogen,
    tany,
    tarray,
    ttensor
)

from .exceptions import (
    NumericalError
)

from .utilities import (
    create_generator,
    create_rng,
    generate_validation_error
)

from .validation import (
    validate_boolean_mask,
    validate_enumerator,
    validate_float,
    validate_integer,
    validate_token_ids
)


#############
# CONSTANTS #
#############

WARP_BINS = 32
WARP_EPSILON = 1e-6

_logger = getLogger(__name__)


###########
# CLASSES #
###########

class EmbeddingTable(nn.Module):

    """
    Defines the learnable token embedding matrix; every row is exposed with L2 norm sqrt(d).
    """

    def __init__(self, vocab_size: int, d: int, dtype: torch.dtype = torch.float32):

        super().__init__()

        weight = torch.randn(vocab_size, d, dtype=dtype)

        self.weight = nn.Parameter(normalize_embeddings(weight))

    @property
    def d(self) -> int:

        return int(self.weight.shape[1])

    @property
    def vocab_size(self) -> int:

        return int(self.weight.shape[0])

    def forward(self) -> ttensor:

        return normalize_embeddings(self.weight)

    @torch.no_grad()
    def renormalize_(self):

        self.weight.copy_(normalize_embeddings(self.weight))


class MaskSample(NamedTuple):

    mask: tarray
    degenerate: bool


class NoiseSchedule(NamedTuple):

    t_max: float
    t_min: float
    n_steps: int
    grid: tarray


class NoisyState(NamedTuple):

    """
    Defines the sampler state: the embeddings X(t), the noise level t and the clean conditioning positions.
    """

    X: ttensor
    t: float
    cond_mask: tarray


class TimeWarpCDF:

    """
    Defines a piecewise-linear unnormalized CDF over noise levels.

    :param knots: the increasing bin edges, spanning [0, t_max].
    :param weights: the nonnegative unnormalized mass of every bin.
    :raises ValidationError: if any input argument is not compliant.
    """

    def __init__(self, knots: tany, weights: tany):

        try:

            knots, weights = _validate_warp(knots, weights)

        except Exception as e:  # pragma: no cover
            raise generate_validation_error(e, trace()) from None

        self._knots = knots
        self._weights = weights

    def __eq__(self, other) -> bool:

        if isinstance(other, TimeWarpCDF):
            return np.array_equal(self._knots, other._knots) and np.array_equal(self._weights, other._weights)

        return False

    def __repr__(self) -> str:

        return f'TimeWarpCDF(bins={self.bins:d}, t_max={self.t_max:g})'

    @classmethod
    def uniform(cls, t_max: float, bins: int = WARP_BINS) -> 'TimeWarpCDF':

        return cls(np.linspace(0.0, t_max, bins + 1), np.ones(bins, dtype=float))

    @property
    def bins(self) -> int:

        return int(self._weights.size)

    @property
    def cdf(self) -> tarray:

        """
        The normalized CDF evaluated at every knot.
        """

        cumulative = np.concatenate(([0.0], np.cumsum(self._weights)))

        return cumulative / cumulative[-1]

    @property
    def knots(self) -> tarray:

        return np.copy(self._knots)

    @property
    def t_max(self) -> float:

        return float(self._knots[-1])

    @property
    def weights(self) -> tarray:

        return np.copy(self._weights)

    def bin_of(self, t: tany) -> tany:

        """
        The index of the bin containing every given time.
        """

        index = np.searchsorted(self._knots, t, side='right') - 1

        return np.clip(index, 0, self.bins - 1)


#############
# FUNCTIONS #
#############

def _validate_warp(knots: tany, weights: tany) -> tuple:

    knots = np.asarray(knots, dtype=float)
    weights = np.asarray(weights, dtype=float)

    if knots.ndim != 1 or knots.size < 2:
        raise ValueError('The "@arg@" parameter must contain at least 2 knots.')

    if weights.ndim != 1 or weights.size != knots.size - 1:
        raise ValueError('The "@arg@" parameter must contain one weight per bin.')

    if not np.all(np.isfinite(knots)) or not np.all(np.diff(knots) > 0.0) or knots[0] < 0.0:
        raise ValueError('The "@arg@" parameter must contain nonnegative increasing knots.')

    if not np.all(np.isfinite(weights)) or np.any(weights < 0.0) or np.sum(weights) <= 0.0:
        raise ValueError('The "@arg@" parameter must contain nonnegative weights with a positive sum.')

    return knots, weights


def _mask_draw(spec: MaskSpec, seq_len: int, rng: tany) -> tarray:

    positions = np.arange(seq_len)

    # prefixes always leave the last position noised
    high = min(spec.prefix_len_range[1], seq_len - 1)
    low = min(spec.prefix_len_range[0], high)

    if spec.strategy == 'mlm':
        return rng.random_sample(seq_len) < spec.mlm_rate

    if spec.strategy == 'prefix':
        prefix = rng.randint(low, high + 1)
        return positions >= prefix

    if spec.strategy == 'mixed':
        prefix = rng.randint(low, high + 1)
        return (positions >= prefix) & (rng.random_sample(seq_len) < spec.mlm_rate)

    k = rng.randint(1, min(spec.k_max, seq_len) + 1)
    cuts = np.sort(rng.choice(np.arange(1, seq_len), size=k - 1, replace=False))
    noised = rng.random_sample(k) < spec.span_noise_prob
    span_of = np.searchsorted(cuts, positions, side='right')

    return noised[span_of]


def add_noise(clean: ttensor, mask: tany, t: float, seed: int) -> NoisyState:

    """
    The function applies variance-exploding noise to the masked positions of a sequence of clean embeddings.

    | **Notes:**

    * Noised positions become clean + t * eps, with eps drawn from a standard normal distribution.
    * Unmasked positions are copied verbatim and become conditioning positions.

    :param clean: the clean embeddings, one row per position.
    :param mask: the boolean mask of noised positions.
    :param t: the noise level.
    :param seed: the seed of the noise.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        mask = validate_boolean_mask(mask, clean.shape[0])
        t = validate_float(t, lower_limit=(0.0, False))
        seed = validate_integer(seed, lower_limit=(0, False))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    X = perturb(clean, torch.from_numpy(mask), t, create_generator(seed))

    return NoisyState(X, t, ~mask)


def embed(tokens: tany, table: tany) -> ttensor:

    """
    The function maps token identifiers to their normalized embeddings.

    :param tokens: the token identifiers.
    :param table: the embedding table or a raw embedding matrix.
    :raises ValidationError: if any input argument is not compliant.
    """

    matrix = table() if isinstance(table, EmbeddingTable) else normalize_embeddings(table)

    try:

        tokens = validate_token_ids(tokens, matrix.shape[0])

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    return matrix[torch.from_numpy(tokens)]


def euler_step(state: NoisyState, x0_hat: ttensor, t_next: float) -> NoisyState:

    """
    The function performs one probability-flow Euler step from the current noise level to **t_next**.

    | **Notes:**

    * Noised positions follow X + (t_next - t) * (X - X0_hat) / t.
    * Conditioning positions are left untouched.

    :param state: the current state.
    :param x0_hat: the denoised estimate.
    :param t_next: the next noise level, lower than the current one.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        t_next = validate_float(t_next, lower_limit=(0.0, False), upper_limit=(state.t, True))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    X = state.X
    t = state.t

    update = X + (t_next - t) * (X - x0_hat) / t
    keep = torch.from_numpy(np.asarray(state.cond_mask, dtype=bool)).unsqueeze(-1)

    return NoisyState(torch.where(keep, X, update), t_next, state.cond_mask)


def make_grid(t_max: float, t_min: float, n_steps: int, noise_scale: float = 1.0, spacing: str = 'linear') -> NoiseSchedule:

    """
    The function builds the decreasing time grid of the sampler, from t_max * noise_scale down to t_min.

    :param t_max: the maximum noise level.
    :param t_min: the minimum noise level.
    :param n_steps: the number of Euler steps.
    :param noise_scale: the scaling applied to the first grid point.
    :param spacing: the grid spacing (**linear** or **geometric**).
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        t_max = validate_float(t_max, lower_limit=(0.0, True))
        t_min = validate_float(t_min, lower_limit=(0.0, True))
        n_steps = validate_integer(n_steps, lower_limit=(1, False))
        noise_scale = validate_float(noise_scale, lower_limit=(0.0, True))
        spacing = validate_enumerator(spacing, ['linear', 'geometric'])
        t_start = validate_float(t_max * noise_scale, lower_limit=(t_min, True))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    if spacing == 'linear':
        grid = np.linspace(t_start, t_min, n_steps + 1)
    else:
        grid = np.geomspace(t_start, t_min, n_steps + 1)

    grid[0] = t_start
    grid[-1] = t_min

    return NoiseSchedule(t_max, t_min, n_steps, grid)


def normalize_embeddings(matrix: ttensor) -> ttensor:

    """
    The function rescales every row of an embedding matrix to L2 norm sqrt(d), preserving its direction.

    :raises NumericalError: if a row has zero norm.
    """

    d = matrix.shape[-1]
    norms = torch.linalg.vector_norm(matrix, dim=-1, keepdim=True)

    if bool((norms == 0.0).any()):
        raise NumericalError('degenerate embedding')

    return matrix * (float(np.sqrt(d)) / norms)


def perturb(clean: ttensor, mask: ttensor, t: tany, generator: ogen = None) -> ttensor:

    """
    The function noises the masked positions of a (batched) embedding tensor.

    :param clean: the clean embeddings, shaped (..., seq_len, d).
    :param mask: the boolean mask of noised positions, shaped (..., seq_len).
    :param t: the noise level, a scalar or a tensor shaped (...).
    :param generator: the random generator of the noise.
    """

    eps = torch.randn(clean.shape, generator=generator, dtype=clean.dtype)

    if isinstance(t, torch.Tensor):
        t = t.to(clean.dtype).reshape(t.shape + (1, 1))

    noisy = clean + t * eps

    return torch.where(mask.unsqueeze(-1), noisy, clean)


def sample_mask(spec: MaskSpec, seq_len: int, seed: int) -> MaskSample:

    """
    The function draws the boolean mask of noised positions according to a masking strategy.

    | **Notes:**

    * An all-false mask is redrawn once; if the redraw is still all-false it is accepted and flagged as degenerate.

    :param spec: the masking specification.
    :param seq_len: the sequence length.
    :param seed: the seed of the draw.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        seq_len = validate_integer(seq_len, lower_limit=(2, False))
        seed = validate_integer(seed, lower_limit=(0, False))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    rng = create_rng(seed)
    mask = _mask_draw(spec, seq_len, rng)

    if not mask.any():

        mask = _mask_draw(spec, seq_len, rng)

        if not mask.any():
            _logger.warning('Accepted an all-false %s mask after one redraw (seed %d).', spec.strategy, seed)
            return MaskSample(mask, True)

    return MaskSample(mask, False)


def score(state: NoisyState, x0_hat: ttensor) -> ttensor:

    """
    The function computes the interpolated score (X0_hat - X) / t^2.

    :raises NumericalError: if the noise level is zero.
    """

    if state.t == 0.0:
        raise NumericalError('score singular at t=0')

    return (x0_hat - state.X) / state.t**2.0


def warp_sample(cdf: TimeWarpCDF, u: tany) -> tany:

    """
    The function maps uniform draws in [0, 1) to noise levels by inverting the normalized piecewise-linear CDF.

    :param cdf: the time-warp CDF.
    :param u: one or more uniform draws.
    """

    u_array = np.asarray(u, dtype=float)

    knots = cdf.knots
    values = cdf.cdf
    masses = np.diff(values)

    index = np.clip(np.searchsorted(values, u_array, side='right') - 1, 0, cdf.bins - 1)
    fraction = np.where(masses[index] > 0.0, (u_array - values[index]) / np.where(masses[index] > 0.0, masses[index], 1.0), 0.0)
    t = knots[index] + np.clip(fraction, 0.0, 1.0) * (knots[index + 1] - knots[index])

    return float(t) if np.ndim(u) == 0 else t


def warp_update(cdf: TimeWarpCDF, t_bin: int, observed_loss: float, ema_rate: float) -> TimeWarpCDF:

    """
    The function moves the weight of one bin toward an observed loss with an exponential moving average.

    :param cdf: the time-warp CDF.
    :param t_bin: the bin index.
    :param observed_loss: the loss observed at a noise level of that bin.
    :param ema_rate: the rate of the moving average.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        t_bin = validate_integer(t_bin, lower_limit=(0, False), upper_limit=(cdf.bins, True))
        observed_loss = validate_float(observed_loss, lower_limit=(0.0, False))
        ema_rate = validate_float(ema_rate, lower_limit=(0.0, False), upper_limit=(1.0, False))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    weights = cdf.weights

    if ema_rate == 1.0:
        weights[t_bin] = observed_loss
    else:
        weights[t_bin] = (1.0 - ema_rate) * weights[t_bin] + ema_rate * observed_loss

    weights[t_bin] = max(weights[t_bin], WARP_EPSILON)

    return TimeWarpCDF(cdf.knots, weights)
