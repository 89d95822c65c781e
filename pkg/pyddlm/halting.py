# -*- coding: utf-8 -*-

__all__ = [
    'CriterionState',
    'HaltDecision',
    'StepStats',
    'SweepRow',
    'advance_state',
    'decide',
    'entropy_stat',
    'kl_stat',
    'parse_grid',
    'replay',
    'step_criterion',
    'step_statistics',
    'sweep',
    'token_switches'
]


###########
# IMPORTS #
###########

# Standard

from dataclasses import (
    replace
)

from inspect import (
    trace
)

from math import (
    floor,
    inf
)

from typing import (
    Callable,
    NamedTuple,
    Optional
)

# Libraries

import numpy as np

from scipy.special import (
    entr,
    rel_entr
)

# Internal

from .config import (
    HaltConfig
)

from .custom_types import (
    oarray,
    ofloat,
    oint,
    tany,
    tarray,
    tlist_any,
    ttrace
)

from .denoiser import (
    TokenDistribution
)

from .exceptions import (
    TraceFormatError
)

from .utilities import (
    generate_validation_error
)

from .validation import (
    validate_boolean_mask,
    validate_text
)


#############
# CONSTANTS #
#############

_grid_fields = {
    'entropy': ('e_t', float),
    'fixed': ('fixed_step', int),
    'kl': ('d_t', float),
    'patience': ('patience_p', int)
}

_kl_epsilon = 1e-12

_required_statistics = {
    'entropy': 'entropy_mean',
    'kl': 'kl_mean',
    'patience': 'token_switches'
}


###########
# CLASSES #
###########

class CriterionState(NamedTuple):

    prev_tokens: oarray = None
    prev_probs: oarray = None
    patience_counter: int = 0
    step: int = 0


class HaltDecision(NamedTuple):

    halt: bool
    reason: str
    statistic: float


class StepStats(NamedTuple):

    """
    Defines the statistics consumed by the halting criteria at one step; the predecessor-based ones are None at the first step.
    """

    step: int
    entropy: float
    kl: ofloat = None
    switches: oint = None


class SweepRow(NamedTuple):

    criterion: str
    threshold: float
    mean_halt_step: float
    frac_halted: float
    mean_ar_nll: ofloat


#############
# FUNCTIONS #
#############

def _probabilities(dist: tany) -> tarray:

    if isinstance(dist, TokenDistribution):
        return dist.to_numpy()

    return np.asarray(dist, dtype=float)


def _range_values(text: str, cast: type) -> list:

    start, stop, step = (cast(part) for part in text.split(':'))

    if step <= 0 or stop < start:
        raise ValueError(f'The range "{text}" is invalid.')

    count = int(floor((stop - start) / step + 1e-9)) + 1

    return [cast(start + i * step) for i in range(count)]


def _validate_gen_mask(value: tany, size: int) -> tarray:

    mask = validate_boolean_mask(value, size)

    if not mask.any():
        raise ValueError('The "@arg@" parameter must select at least one generated position.')

    return mask


def _validate_grid(value: tany) -> list:

    text = validate_text(value)
    entries = []

    for item in text.split():

        kind, _, values = item.partition('=')

        if kind not in _grid_fields or len(values) == 0:
            raise ValueError(f'The "@arg@" parameter contains an invalid entry "{item}".')

        cast = _grid_fields[kind][1]

        if ':' in values:
            parsed = _range_values(values, cast)
        else:
            parsed = [cast(v) for v in values.split(',') if len(v) > 0]

        entries.append((kind, parsed))

    if len(entries) == 0:
        raise ValueError('The "@arg@" parameter must contain at least one criterion.')

    return entries


def _validate_same_length(value: tany, size: int) -> tarray:

    value = np.asarray(value)

    if value.ndim != 1 or value.shape[0] != size:
        raise ValueError(f'The "@arg@" parameter must have length {size:d}.')

    return value


def _validate_traces(value: tany) -> tlist_any:

    value = list(value)

    if len(value) == 0:
        raise ValueError('The "@arg@" parameter must contain at least one trace.')

    return value


def advance_state(state: CriterionState, tokens: tarray, probs: tarray, patience_counter: int) -> CriterionState:

    return CriterionState(np.array(tokens, copy=True), np.array(probs, copy=True), patience_counter, state.step + 1)


def decide(cfg: HaltConfig, stats: StepStats, patience_counter: int, n_steps: int) -> tuple:

    """
    The function applies a halting criterion to the statistics of one step.

    | **Notes:**

    * Live generation and offline replay both go through this function.
    * The minimum number of steps gates every adaptive criterion; the fixed criterion ignores it.
    * Steps without a predecessor report a null statistic and never halt on the KL criterion.

    :param cfg: the halting configuration.
    :param stats: the statistics of the current step.
    :param patience_counter: the patience counter before the current step.
    :param n_steps: the maximum number of steps.
    :return: the decision and the updated patience counter.
    """

    kind = cfg.kind

    if kind == 'none':
        return HaltDecision(False, 'none', 0.0), patience_counter

    if kind == 'fixed':
        return HaltDecision(stats.step == cfg.fixed_step, 'fixed-step' if stats.step == cfg.fixed_step else 'none', float(stats.step)), patience_counter

    gate = stats.step >= cfg.resolve_min_steps(n_steps)

    if kind == 'entropy':
        halt = gate and stats.entropy <= cfg.e_t
        return HaltDecision(halt, 'threshold-met' if halt else 'none', float(stats.entropy)), patience_counter

    if kind == 'kl':

        if stats.kl is None:
            return HaltDecision(False, 'none', 0.0), patience_counter

        met = stats.kl > cfg.d_t if cfg.kl_halt_above else stats.kl <= cfg.d_t
        halt = gate and met

        return HaltDecision(halt, 'threshold-met' if halt else 'none', float(stats.kl)), patience_counter

    if stats.switches is not None:
        patience_counter = patience_counter + 1 if stats.switches <= cfg.switch_threshold else 0

    halt = gate and patience_counter >= cfg.patience_p

    return HaltDecision(halt, 'patience-met' if halt else 'none', float(patience_counter)), patience_counter


def entropy_stat(dist: tany, gen_mask: tany) -> float:

    """
    The function computes the mean Shannon entropy, in nats, of the generated positions.

    :param dist: a token distribution or a matrix of probabilities, one row per position.
    :param gen_mask: the boolean mask of generated positions.
    :raises ValidationError: if any input argument is not compliant.
    """

    probs = _probabilities(dist)

    try:

        gen_mask = _validate_gen_mask(gen_mask, probs.shape[0])

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    return float(np.mean(np.sum(entr(probs[gen_mask]), axis=-1)))


def kl_stat(cur: tany, prev: tany, gen_mask: tany) -> float:

    """
    The function computes the mean divergence KL(cur || prev), in nats, of the generated positions.

    :param cur: the current token distribution.
    :param prev: the previous token distribution, clamped away from zero.
    :param gen_mask: the boolean mask of generated positions.
    :raises ValidationError: if any input argument is not compliant.
    """

    p = _probabilities(cur)
    q = _probabilities(prev)

    try:

        gen_mask = _validate_gen_mask(gen_mask, p.shape[0])

        if p.shape != q.shape:
            raise ValueError('The "@arg@" parameter must have the same shape as the current distribution.')

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    divergence = np.sum(rel_entr(p[gen_mask], np.maximum(q[gen_mask], _kl_epsilon)), axis=-1)

    return max(0.0, float(np.mean(divergence)))


def parse_grid(text: str, base: Optional[HaltConfig] = None) -> tlist_any:

    """
    The function parses a threshold grid such as "entropy=0.1,0.5 fixed=100:1000:100" into halting configurations.

    | **Notes:**

    * Each entry is a criterion followed by a comma-separated list or an inclusive start:stop:step range.
    * The remaining settings, like the minimum number of steps, are taken from **base**.

    :raises ValidationError: if any input argument is not compliant.
    """

    base = HaltConfig() if base is None else base

    try:

        grid = _validate_grid(text)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    configs = []

    for kind, values in grid:
        field_name = _grid_fields[kind][0]
        configs.extend(replace(base, kind=kind, **{field_name: value}) for value in values)

    return configs


def replay(trace_: ttrace, cfg: HaltConfig) -> oint:

    """
    The function replays a halting criterion over the statistics recorded in a trace and returns the first halting step.

    :param trace_: the generation trace.
    :param cfg: the halting configuration.
    :return: the halting step, or None if the criterion never fires.
    :raises TraceFormatError: if the trace lacks the statistic required by the criterion.
    """

    n_steps = int(trace_.meta['n_steps'])
    required = _required_statistics.get(cfg.kind)
    counter = 0

    for index, record in enumerate(trace_.records):

        if required is not None and getattr(record, required) is None and (required == 'entropy_mean' or index > 0):
            raise TraceFormatError(f'trace lacks {required}')

        stats = StepStats(record.step, record.entropy_mean, record.kl_mean, record.token_switches)
        decision, counter = decide(cfg, stats, counter, n_steps)

        if decision.halt:
            return record.step

    return None


def step_criterion(cfg: HaltConfig, state: CriterionState, dist: tany, tokens: tarray, gen_mask: tany, n_steps: int) -> tuple:

    """
    The function evaluates a halting criterion on the current step and advances the criterion state.

    :return: the decision and the next criterion state.
    """

    probs = _probabilities(dist)
    stats = step_statistics(probs, tokens, gen_mask, state)
    decision, counter = decide(cfg, stats, state.patience_counter, n_steps)

    return decision, advance_state(state, tokens, probs, counter)


def step_statistics(dist: tany, tokens: tarray, gen_mask: tany, state: CriterionState) -> StepStats:

    probs = _probabilities(dist)
    entropy = entropy_stat(probs, gen_mask)

    if state.prev_probs is None:
        return StepStats(state.step, entropy)

    kl = kl_stat(probs, state.prev_probs, gen_mask)
    switches = token_switches(tokens, state.prev_tokens, gen_mask)

    return StepStats(state.step, entropy, kl, switches)


def sweep(traces: tlist_any, cfgs: tlist_any, ar_nll_fn: Optional[Callable] = None) -> tlist_any:

    """
    The function evaluates a grid of halting configurations over recorded traces.

    | **Notes:**

    * Runs whose criterion never fires are counted at their maximum number of steps.
    * Rows are ordered by criterion and threshold.

    :param traces: the recorded generation traces.
    :param cfgs: the halting configurations to evaluate.
    :param ar_nll_fn: an optional callable mapping a trace and a step to the reference NLL of the tokens at that step.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        traces = _validate_traces(traces)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    rows = []

    for cfg in cfgs:

        steps = []
        halted = 0
        nlls = []

        for trace_ in traces:

            halt_step = replay(trace_, cfg)

            if halt_step is None:
                halt_step = int(trace_.meta['n_steps'])
            else:
                halted += 1

            steps.append(halt_step)

            if ar_nll_fn is not None:
                nlls.append(float(ar_nll_fn(trace_, halt_step)))

        mean_ar_nll = float(np.mean(nlls)) if len(nlls) > 0 else None
        rows.append(SweepRow(cfg.kind, cfg.threshold, float(np.mean(steps)), halted / len(traces), mean_ar_nll))

    rows.sort(key=lambda row: (row.criterion, -inf if row.threshold is None else row.threshold))

    return rows


def token_switches(cur_tokens: tany, prev_tokens: tany, gen_mask: tany) -> int:

    """
    The function counts the generated positions whose token changed since the previous step.

    :raises ValidationError: if any input argument is not compliant.
    """

    cur_tokens = np.asarray(cur_tokens)

    try:

        prev_tokens = _validate_same_length(prev_tokens, cur_tokens.shape[0])
        gen_mask = validate_boolean_mask(gen_mask, cur_tokens.shape[0])

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    return int(np.count_nonzero((cur_tokens != prev_tokens) & gen_mask))
