# -*- coding: utf-8 -*-

__all__ = [
    'TRACE_VERSION',
    'GenerationTrace',
    'StepRecord',
    'cos_to_final',
    'dynamics',
    'new_trace',
    'read_trace',
    'record_step',
    'trace_to_rows',
    'wer_to_final',
    'write_trace'
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

# Internal

from .custom_types import (
    oarray,
    ofloat,
    oint,
    olist_int,
    ostr,
    tany,
    tarray,
    tconfig_dict,
    tcsv_rows,
    tlist_any,
    tpath,
    ttensor
)

from .diffusion import (
    NoisyState
)

from .exceptions import (
    TraceFormatError
)

from .files_io import (
    read_jsonl,
    write_jsonl
)

from .halting import (
    StepStats
)

from .metrics import (
    wer
)

from .utilities import (
    generate_validation_error
)

from .validation import (
    validate_enumerator
)


#############
# CONSTANTS #
#############

TRACE_VERSION = 1

_logger = getLogger(__name__)
_verbosities = ['stats', 'stats+states']


###########
# CLASSES #
###########

class StepRecord(NamedTuple):

    step: int
    t: float
    entropy_mean: float
    kl_mean: ofloat = None
    token_switches: oint = None
    l2_X: float = 0.0
    l2_X0hat: float = 0.0
    tokens: olist_int = None
    X_snapshot: oarray = None
    X0hat_snapshot: oarray = None


class GenerationTrace:

    """
    Defines the per-step record of one generation run.

    :param meta: the run metadata (identifier, configuration snapshot, seed, checkpoint, number of steps, conditioning mask, verbosity).
    :param records: the step records, ordered by step.
    """

    def __init__(self, meta: tconfig_dict, records: tlist_any = None):

        self._meta = dict(meta)
        self._records = [] if records is None else list(records)

    def __eq__(self, other) -> bool:

        if not isinstance(other, GenerationTrace):
            return False

        if self._meta != other._meta or len(self._records) != len(other._records):
            return False

        return all(_records_equal(a, b) for a, b in zip(self._records, other._records))

    def __len__(self) -> int:

        return len(self._records)

    def __repr__(self) -> str:

        return f'GenerationTrace(run_id={self._meta.get("run_id")}, records={len(self._records):d})'

    @property
    def cond_mask(self) -> tarray:

        return np.asarray(self._meta['cond_mask'], dtype=bool)

    @property
    def gen_mask(self) -> tarray:

        return ~self.cond_mask

    @property
    def has_states(self) -> bool:

        return len(self._records) > 0 and all(r.X_snapshot is not None and r.X0hat_snapshot is not None for r in self._records)

    @property
    def meta(self) -> tconfig_dict:

        return self._meta

    @property
    def n_steps(self) -> int:

        return int(self._meta['n_steps'])

    @property
    def records(self) -> tlist_any:

        return self._records

    @property
    def verbosity(self) -> str:

        return self._meta.get('verbosity', 'stats')

    def tokens_at(self, step: int) -> tarray:

        """
        Returns the argmax tokens recorded at the given step.
        """

        for record in self._records:
            if record.step == step:
                return np.asarray(record.tokens, dtype=np.int64)

        raise KeyError(step)


#############
# FUNCTIONS #
#############

def _array_or_none(value: tany) -> oarray:

    return None if value is None else np.asarray(value, dtype=float)


def _cosine(a: tarray, b: tarray) -> float:

    if np.array_equal(a, b):
        return 1.0

    norm = np.linalg.norm(a) * np.linalg.norm(b)

    if norm == 0.0:
        return 0.0

    return float(np.clip(np.dot(a, b) / norm, -1.0, 1.0))


def _mean_row_norm(matrix: tarray) -> float:

    return float(np.mean(np.linalg.norm(matrix, axis=-1)))


def _record_from_json(data: tconfig_dict, line_number: int) -> StepRecord:

    try:

        return StepRecord(
            int(data['step']),
            float(data['t']),
            float(data['entropy_mean']),
            None if data.get('kl_mean') is None else float(data['kl_mean']),
            None if data.get('token_switches') is None else int(data['token_switches']),
            float(data['l2_X']),
            float(data['l2_X0hat']),
            None if data.get('tokens') is None else [int(token) for token in data['tokens']],
            _array_or_none(data.get('X_snapshot')),
            _array_or_none(data.get('X0hat_snapshot'))
        )

    except (KeyError, TypeError, ValueError):
        raise TraceFormatError('malformed step record', line_number) from None


def _record_to_json(record: StepRecord) -> tconfig_dict:

    data = record._asdict()

    for key in ('X_snapshot', 'X0hat_snapshot'):
        if data[key] is not None:
            data[key] = data[key].tolist()

    return data


def _records_equal(a: StepRecord, b: StepRecord) -> bool:

    for x, y in zip(a, b):

        if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
            if x is None or y is None or not np.array_equal(x, y):
                return False
        elif x != y:
            return False

    return True


def _require_states(trace_: GenerationTrace):

    if not trace_.has_states:
        raise TraceFormatError('trace lacks snapshots')


def _validate_step(value: int, records: tlist_any) -> int:

    if len(records) > 0 and value <= records[-1].step:
        raise ValueError(f'The "@arg@" parameter must be greater than the last recorded step ({records[-1].step:d}).')

    return value


def cos_to_final(trace_: GenerationTrace) -> tuple:

    """
    The function computes, for every step, the cosine between the generated-position score and embeddings
    and their final-step counterparts.

    :return: the score cosine series and the embedding cosine series.
    :raises TraceFormatError: if the trace has no state snapshots.
    """

    _require_states(trace_)

    gen = trace_.gen_mask
    final = trace_.records[-1]

    final_X = final.X_snapshot[gen].ravel()
    final_score = ((final.X0hat_snapshot[gen] - final.X_snapshot[gen]) / final.t**2.0).ravel()

    cos_score = []
    cos_embedding = []

    for record in trace_.records:

        X = record.X_snapshot[gen].ravel()
        score = ((record.X0hat_snapshot[gen] - record.X_snapshot[gen]) / record.t**2.0).ravel()

        cos_score.append(_cosine(score, final_score))
        cos_embedding.append(_cosine(X, final_X))

    return np.array(cos_score), np.array(cos_embedding)


def dynamics(trace_: GenerationTrace) -> tuple:

    """
    The function assembles the per-step analysis table of a generation run.

    | **Notes:**

    * Cosine columns require state snapshots and are omitted, with a warning, when the trace has none.

    :return: the header and the rows.
    """

    header = ['step', 't', 'entropy', 'switches', 'kl', 'l2_X', 'l2_X0hat']
    wer_series = wer_to_final(trace_)

    if trace_.has_states:
        cos_score, cos_embedding = cos_to_final(trace_)
        header += ['cos_score_final', 'cos_emb_final']
    else:
        _logger.warning('The trace of run %s has no state snapshots: cosine columns are omitted.', trace_.meta.get('run_id'))
        cos_score, cos_embedding = None, None

    header.append('wer_to_final')

    rows = []

    for index, record in enumerate(trace_.records):

        row = {
            'step': record.step,
            't': record.t,
            'entropy': record.entropy_mean,
            'switches': record.token_switches,
            'kl': record.kl_mean,
            'l2_X': record.l2_X,
            'l2_X0hat': record.l2_X0hat,
            'wer_to_final': float(wer_series[index])
        }

        if cos_score is not None:
            row['cos_score_final'] = float(cos_score[index])
            row['cos_emb_final'] = float(cos_embedding[index])

        rows.append(row)

    return header, rows


def new_trace(run_id: str, config: tconfig_dict, seed: int, checkpoint: ostr, n_steps: int, cond_mask: tarray, verbosity: str = 'stats') -> GenerationTrace:

    try:

        verbosity = validate_enumerator(verbosity, _verbosities)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    meta = {
        'version': TRACE_VERSION,
        'run_id': run_id,
        'config': config,
        'seed': seed,
        'checkpoint': checkpoint,
        'n_steps': n_steps,
        'cond_mask': [bool(v) for v in cond_mask],
        'verbosity': verbosity
    }

    return GenerationTrace(meta)


def read_trace(file_path: tpath) -> GenerationTrace:

    """
    The function reads a trace written by :func:`write_trace`.

    :raises TraceFormatError: if a line is malformed or the version is unsupported.
    """

    records = read_jsonl(file_path)

    if len(records) == 0:
        raise TraceFormatError('empty trace', 1)

    meta = records[0]

    if meta.get('version') != TRACE_VERSION:
        raise TraceFormatError('unsupported trace version', 1)

    if 'n_steps' not in meta or 'cond_mask' not in meta:
        raise TraceFormatError('malformed trace header', 1)

    return GenerationTrace(meta, [_record_from_json(data, index) for index, data in enumerate(records[1:], start=2)])


def record_step(trace_: GenerationTrace, state: NoisyState, x0_hat: ttensor, stats: StepStats, tokens: tarray) -> GenerationTrace:

    """
    The function appends the record of one sampler step to a trace.

    | **Notes:**

    * Norms are averaged over the generated positions.
    * Snapshots of X and of the denoised estimate are stored only at **stats+states** verbosity.

    :param trace_: the trace to extend.
    :param state: the sampler state the denoiser was evaluated on.
    :param x0_hat: the denoised estimate.
    :param stats: the halting statistics of the step.
    :param tokens: the argmax tokens of the step.
    :raises ValidationError: if the step is not greater than the last recorded one.
    """

    try:

        step = _validate_step(stats.step, trace_.records)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    X = state.X.detach().to(torch.float64).cpu().numpy()
    X0hat = torch.as_tensor(x0_hat).detach().to(torch.float64).cpu().numpy()
    gen = ~np.asarray(state.cond_mask, dtype=bool)

    with_states = trace_.verbosity == 'stats+states'

    record = StepRecord(
        step,
        float(state.t),
        float(stats.entropy),
        None if stats.kl is None else float(stats.kl),
        None if stats.switches is None else int(stats.switches),
        _mean_row_norm(X[gen]),
        _mean_row_norm(X0hat[gen]),
        [int(token) for token in tokens],
        X if with_states else None,
        X0hat if with_states else None
    )

    trace_.records.append(record)

    return trace_


def trace_to_rows(trace_: GenerationTrace) -> tuple:

    header = ['step', 't', 'entropy_mean', 'kl_mean', 'token_switches', 'l2_X', 'l2_X0hat']
    rows: tcsv_rows = [{key: getattr(record, key) for key in header} for record in trace_.records]

    return header, rows


def wer_to_final(trace_: GenerationTrace) -> tarray:

    """
    The function computes, for every step, the word error rate of the generated tokens against the final ones.

    :raises TraceFormatError: if the trace lacks per-step tokens.
    """

    if any(record.tokens is None for record in trace_.records):
        raise TraceFormatError('trace lacks tokens')

    gen = trace_.gen_mask
    final = np.asarray(trace_.records[-1].tokens)[gen].tolist()

    return np.array([wer(np.asarray(record.tokens)[gen].tolist(), final) for record in trace_.records])


def write_trace(trace_: GenerationTrace, file_path: tpath):

    """
    The function writes a trace as JSON Lines: the metadata first, then one step record per line.
    """

    write_jsonl(file_path, [trace_.meta] + [_record_to_json(record) for record in trace_.records])
