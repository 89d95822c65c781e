# -*- coding: utf-8 -*-

__all__ = [
    'ARReference',
    'Denoiser',
    'TokenDistribution',
    'ar_nll',
    'create_ar_reference',
    'create_denoiser',
    'denoise',
    'interpolate_x0',
    'time_features'
]


###########
# IMPORTS #
###########

# Standard

from dataclasses import (
    asdict
)

from inspect import (
    trace
)

from math import (
    log,
    sqrt
)

from typing import (
    NamedTuple
)

# Libraries

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

# Internal

from .config import (
    ModelConfig
)

from .corpus import (
    PAD_ID
)

from .custom_types import (
    oint,
    otensor,
    tany,
    tarray,
    tconfig_dict,
    ttensor
)

from .decorators import (
    finite_output
)

from .diffusion import (
    EmbeddingTable,
    NoisyState
)

from .utilities import (
    generate_validation_error
)

from .validation import (
    validate_integer
)


#############
# CONSTANTS #
#############

_time_epsilon = 1e-6


###########
# CLASSES #
###########

class TokenDistribution(NamedTuple):

    """
    Defines the per-position categorical distribution p(x|X(t),t), stored as logits.
    """

    logits: ttensor

    @property
    def probs(self) -> ttensor:

        return torch.softmax(self.logits, dim=-1)

    def to_numpy(self) -> tarray:

        """
        The probabilities in double precision, computed from the logits.
        """

        return torch.softmax(self.logits.detach().double(), dim=-1).cpu().numpy()


class ConditionalLayerNorm(nn.Module):

    def __init__(self, d_model: int, cond_dim: int):

        super().__init__()

        self.norm = nn.LayerNorm(d_model, elementwise_affine=False)
        self.modulation = nn.Linear(cond_dim, 2 * d_model)

        nn.init.zeros_(self.modulation.weight)
        nn.init.zeros_(self.modulation.bias)

    def forward(self, h: ttensor, c: ttensor) -> ttensor:

        gamma, beta = self.modulation(c).unsqueeze(1).chunk(2, dim=-1)

        return (1.0 + gamma) * self.norm(h) + beta


class SelfAttention(nn.Module):

    def __init__(self, d_model: int, heads: int, causal: bool):

        super().__init__()

        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)
        self.heads = heads
        self.causal = causal

    def forward(self, h: ttensor) -> ttensor:

        b, n, c = h.shape
        q, k, v = self.qkv(h).split(c, dim=2)

        q = q.view(b, n, self.heads, c // self.heads).transpose(1, 2)
        k = k.view(b, n, self.heads, c // self.heads).transpose(1, 2)
        v = v.view(b, n, self.heads, c // self.heads).transpose(1, 2)

        attention = (q @ k.transpose(-2, -1)) * (1.0 / sqrt(k.shape[-1]))

        if self.causal:
            future = torch.triu(torch.ones(n, n, dtype=torch.bool, device=h.device), diagonal=1)
            attention = attention.masked_fill(future, float('-inf'))

        attention = torch.softmax(attention, dim=-1)
        y = (attention @ v).transpose(1, 2).contiguous().view(b, n, c)

        return self.proj(y)


class Block(nn.Module):

    """
    Defines a pre-norm transformer block; with a conditioning size both norms are conditional layer norms.
    """

    def __init__(self, d_model: int, heads: int, ff_mult: int, cond_dim: oint = None, causal: bool = False):

        super().__init__()

        if cond_dim is None:
            self.norm_1 = nn.LayerNorm(d_model)
            self.norm_2 = nn.LayerNorm(d_model)
        else:
            self.norm_1 = ConditionalLayerNorm(d_model, cond_dim)
            self.norm_2 = ConditionalLayerNorm(d_model, cond_dim)

        self.attention = SelfAttention(d_model, heads, causal)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, ff_mult * d_model),
            nn.GELU(),
            nn.Linear(ff_mult * d_model, d_model)
        )

    def _norm(self, norm: nn.Module, h: ttensor, c: otensor) -> ttensor:

        return norm(h) if c is None else norm(h, c)

    def forward(self, h: ttensor, c: otensor = None) -> ttensor:

        h = h + self.attention(self._norm(self.norm_1, h, c))
        h = h + self.mlp(self._norm(self.norm_2, h, c))

        return h


class Denoiser(nn.Module):

    """
    Defines the time-conditioned bidirectional transformer mapping noisy embeddings to token logits.

    :param vocab_size: the vocabulary size.
    :param seq_len: the sequence length.
    :param t_max: the maximum noise level seen in training.
    :param config: the model configuration.
    """

    def __init__(self, vocab_size: int, seq_len: int, t_max: float, config: ModelConfig):

        super().__init__()

        cond_dim = 4 * config.time_features

        self.config = config
        self.seq_len = seq_len
        self.t_max = float(t_max)

        self.embedding = EmbeddingTable(vocab_size, config.d)
        self.input_projection = nn.Linear(config.d, config.d_model)
        self.positions = nn.Parameter(0.02 * torch.randn(seq_len, config.d_model))
        self.conditioning = nn.Embedding(2, config.d_model)
        self.time_mlp = nn.Sequential(
            nn.Linear(config.time_features, cond_dim),
            nn.GELU(),
            nn.Linear(cond_dim, cond_dim)
        )
        self.blocks = nn.ModuleList([Block(config.d_model, config.heads, config.ff_mult, cond_dim) for _ in range(config.layers)])
        self.norm = ConditionalLayerNorm(config.d_model, cond_dim)
        self.head = nn.Linear(config.d_model, vocab_size)

        nn.init.normal_(self.conditioning.weight, mean=0.0, std=0.02)
        nn.init.normal_(self.head.weight, mean=0.0, std=0.02)
        nn.init.zeros_(self.head.bias)

    @property
    def hparams(self) -> tconfig_dict:

        return {'vocab_size': self.embedding.vocab_size, 'seq_len': self.seq_len, 't_max': self.t_max, 'model': asdict(self.config)}

    @property
    def vocab_size(self) -> int:

        return self.embedding.vocab_size

    def forward(self, X: ttensor, t: ttensor, cond_mask: ttensor) -> ttensor:

        """
        :param X: the noisy embeddings, shaped (batch, seq_len, d).
        :param t: the noise levels, shaped (batch,).
        :param cond_mask: the clean conditioning positions, shaped (batch, seq_len).
        """

        scale = torch.rsqrt(1.0 + t**2.0).reshape(-1, 1, 1)

        h = self.input_projection(X * scale)
        h = h + self.positions[:X.shape[1]] + self.conditioning(cond_mask.long())
        c = self.time_mlp(time_features(t, self.config.time_features))

        for block in self.blocks:
            h = block(h, c)

        return self.head(self.norm(h, c))


class ARReference(nn.Module):

    """
    Defines a small causal language model used as a stand-in scorer for the autoregressive negative log-likelihood.
    """

    def __init__(self, vocab_size: int, seq_len: int, config: ModelConfig):

        super().__init__()

        self.config = config
        self.seq_len = seq_len

        self.tokens = nn.Embedding(vocab_size, config.d_model)
        self.positions = nn.Parameter(0.02 * torch.randn(seq_len, config.d_model))
        self.blocks = nn.ModuleList([Block(config.d_model, config.heads, config.ff_mult, causal=True) for _ in range(config.layers)])
        self.norm = nn.LayerNorm(config.d_model)
        self.head = nn.Linear(config.d_model, vocab_size)

        nn.init.normal_(self.tokens.weight, mean=0.0, std=0.02)
        nn.init.normal_(self.head.weight, mean=0.0, std=0.02)
        nn.init.zeros_(self.head.bias)

    @property
    def hparams(self) -> tconfig_dict:

        return {'vocab_size': int(self.tokens.num_embeddings), 'seq_len': self.seq_len, 'model': asdict(self.config)}

    def forward(self, ids: ttensor) -> ttensor:

        h = self.tokens(ids) + self.positions[:ids.shape[-1]]

        for block in self.blocks:
            h = block(h)

        return self.head(self.norm(h))

    def next_token_log_probs(self, ids: tany) -> ttensor:

        """
        The log-probability of every token given the preceding ones, a padding token acting as beginning of sequence.

        :param ids: the token identifiers, shaped (seq_len,) or (batch, seq_len).
        """

        ids = torch.as_tensor(np.asarray(ids), dtype=torch.long)
        single = ids.dim() == 1

        if single:
            ids = ids.unsqueeze(0)

        bos = torch.full((ids.shape[0], 1), PAD_ID, dtype=torch.long)
        inputs = torch.cat([bos, ids[:, :-1]], dim=1)

        log_probs = F.log_softmax(self(inputs), dim=-1)
        result = log_probs.gather(-1, ids.unsqueeze(-1)).squeeze(-1)

        return result[0] if single else result


#############
# FUNCTIONS #
#############

def _model_dtype(config: ModelConfig) -> torch.dtype:

    return torch.float64 if config.dtype == 'float64' else torch.float32


def _to_numpy(values: tany) -> tarray:

    if isinstance(values, torch.Tensor):
        return values.detach().double().cpu().numpy()

    return np.asarray(values, dtype=float)


def ar_nll(ref: tany, prefix: tany, continuation: tany) -> float:

    """
    The function computes the mean negative log-probability of a continuation under a causal scorer.

    :param ref: any object exposing **next_token_log_probs**, usually an :class:`ARReference`.
    :param prefix: the conditioning tokens, possibly empty.
    :param continuation: the scored tokens.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        prefix = [int(i) for i in prefix]
        continuation = [int(i) for i in continuation]
        length = validate_integer(len(continuation), lower_limit=(1, False))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    with torch.no_grad():
        log_probs = _to_numpy(ref.next_token_log_probs(np.array(prefix + continuation, dtype=np.int64)))

    return -float(np.mean(log_probs[len(prefix):len(prefix) + length]))


def create_ar_reference(vocab_size: int, seq_len: int, config: ModelConfig, seed: int) -> ARReference:

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = ARReference(vocab_size, seq_len, config)

    return model.to(_model_dtype(config))


def create_denoiser(vocab_size: int, seq_len: int, t_max: float, config: ModelConfig, seed: int) -> Denoiser:

    """
    The function builds a denoiser whose initial parameters depend only on the given seed.
    """

    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = Denoiser(vocab_size, seq_len, t_max, config)

    model = model.to(_model_dtype(config))
    model.embedding.renormalize_()

    return model


@finite_output('numerical overflow in denoiser')
def denoise(model: Denoiser, state: NoisyState) -> TokenDistribution:

    """
    The function runs a deterministic forward pass of the denoiser on a single state.

    :raises NumericalError: if the logits are not finite.
    """

    dtype = model.embedding.weight.dtype

    with torch.no_grad():

        X = state.X.to(dtype).unsqueeze(0)
        t = torch.tensor([state.t], dtype=dtype)
        cond_mask = torch.from_numpy(np.asarray(state.cond_mask, dtype=bool)).unsqueeze(0)

        logits = model(X, t, cond_mask)[0]

    return TokenDistribution(logits)


def interpolate_x0(dist: tany, table: tany) -> ttensor:

    """
    The function computes the denoised estimate as the probability-weighted average of the embedding rows.

    :param dist: a token distribution or a matrix of probabilities.
    :param table: the embedding table or an embedding matrix.
    """

    matrix = table() if isinstance(table, EmbeddingTable) else torch.as_tensor(table)

    if isinstance(dist, TokenDistribution):
        probs = dist.probs
    else:
        probs = torch.as_tensor(dist)

    return probs.to(matrix.dtype) @ matrix


def time_features(t: ttensor, features: int) -> ttensor:

    """
    The function computes sinusoidal features of log t, shaped (batch, features).
    """

    s = torch.log(torch.clamp(t, min=_time_epsilon)).reshape(-1, 1)
    frequencies = torch.exp(torch.linspace(log(1.0 / 16.0), log(16.0), features // 2, dtype=s.dtype))
    angles = s * frequencies.unsqueeze(0)

    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)
