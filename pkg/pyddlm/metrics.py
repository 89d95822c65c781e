# -*- coding: utf-8 -*-

__all__ = [
    'REPORT_COLUMNS',
    'MetricReport',
    'SampleSet',
    'dist_n',
    'evaluate',
    'export_logprobs',
    'read_logprobs',
    'sample_sets_from_records',
    'self_bleu',
    'unique_token_fraction',
    'wer',
    'write_report',
    'zipf_coeff',
    'zipf_from_frequencies'
]


###########
# IMPORTS #
###########

# Standard

from collections import (
    Counter
)

from inspect import (
    trace
)

from logging import (
    getLogger
)

from typing import (
    NamedTuple,
    Optional,
    Union
)

# Libraries

import numpy as np

from Levenshtein import (
    distance as levenshtein_distance
)

from nltk.translate.bleu_score import (
    sentence_bleu
)

from scipy.stats import (
    linregress
)

# Internal

from .config import (
    MetricsConfig
)

from .custom_types import (
    ofloat,
    oref,
    tany,
    tarray,
    tlist_any,
    tlist_int,
    tlists_int,
    tpath
)

from .denoiser import (
    ar_nll
)

from .exceptions import (
    TraceFormatError
)

from .files_io import (
    read_jsonl,
    write_csv,
    write_jsonl
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

REPORT_COLUMNS = ['prompt_index', 'ar_nll', 'dist_1', 'dist_2', 'dist_3', 'self_bleu', 'zipf', 'unique_token_fraction']

_logger = getLogger(__name__)


###########
# CLASSES #
###########

class MetricReport(NamedTuple):

    prompt_index: Union[int, str]
    ar_nll: ofloat = None
    dist_1: ofloat = None
    dist_2: ofloat = None
    dist_3: ofloat = None
    self_bleu: ofloat = None
    zipf: ofloat = None
    unique_token_fraction: ofloat = None


class SampleSet(NamedTuple):

    """
    Defines the continuations generated from one prompt, the prompt being the conditioning prefix.
    """

    prompt: tlist_int
    samples: tlists_int
    prompt_index: int = 0


#############
# FUNCTIONS #
#############

def _add_one_smoothing(precisions: tlist_any, hypothesis: tlist_int = None, **kwargs) -> tlist_any:

    smoothed = []

    for n, precision in enumerate(precisions, 1):
        if precision.numerator == 0:
            smoothed.append(1.0 / (len(hypothesis) - n + 2.0))
        else:
            smoothed.append(float(precision))

    return smoothed


def _bleu(hypothesis: tlist_int, references: tlists_int, max_n: int) -> float:

    if len(hypothesis) == 0:
        return 0.0

    # Orders longer than the hypothesis carry no n-grams and are left out of the weights.
    orders = min(max_n, len(hypothesis))
    weights = tuple([1.0 / orders] * orders)

    return float(sentence_bleu(references, hypothesis, weights=weights, smoothing_function=_add_one_smoothing))


def _mean_or_none(values: tlist_any) -> ofloat:

    values = [v for v in values if v is not None]

    if len(values) == 0:
        return None

    return float(np.mean(values))


def _ngrams(tokens: tlist_int, n: int) -> Counter:

    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _samples_of(value: tany) -> tlists_int:

    samples = value.samples if isinstance(value, SampleSet) else value

    return [[int(token) for token in sample] for sample in samples]


def _validate_frequencies(value: tany) -> tarray:

    frequencies = np.asarray(value, dtype=float)
    frequencies = frequencies[frequencies > 0.0]

    if frequencies.size < 2:
        raise ValueError('degenerate frequency distribution')

    return np.sort(frequencies)[::-1]


def _validate_group(value: tlists_int, minimum: int) -> tlists_int:

    if len(value) < minimum:
        raise ValueError(f'The "@arg@" parameter must contain at least {minimum:d} samples.')

    return value


def _validate_logprobs(records: tlist_any, sets: tlist_any) -> tlist_any:

    flat = [(s.prompt, sample) for s in sets for sample in _samples_of(s)]

    if len(records) != len(flat):
        raise ValueError(f'logprob file holds {len(records):d} records for {len(flat):d} samples')

    for index, (record, (prompt, sample)) in enumerate(zip(records, flat)):

        expected = list(prompt) + list(sample)
        tokens = record['tokens']

        for position, token in enumerate(expected):
            if position >= len(tokens) or tokens[position] != token:
                raise ValueError(f'logprob token mismatch in record {index:d} at position {position:d}')

        if len(tokens) != len(expected) or len(record['logprobs']) != len(expected):
            raise ValueError(f'logprob token mismatch in record {index:d} at position {len(expected):d}')

    return records


def _validate_ngram_order(value: tany, samples: tlists_int) -> int:

    value = validate_integer(value, lower_limit=(1, False))

    if any(len(sample) < value for sample in samples):
        raise ValueError(f'Every sample must contain at least {value:d} tokens.')

    return value


def _validate_reference(value: tany) -> tlist_int:

    value = list(value)

    if len(value) == 0:
        raise ValueError('The "@arg@" parameter must be a non-empty token sequence.')

    return value


def _validate_sample_records(value: tlist_any) -> tlist_any:

    value = list(value)

    if len(value) == 0:
        raise ValueError('The "@arg@" parameter must contain at least one sample.')

    required = ('prompt_index', 'sample_index', 'prefix_ids', 'continuation_ids', 'vocab_id')

    for index, record in enumerate(value):
        if any(key not in record for key in required):
            raise ValueError(f'The sample record {index:d} lacks one of the fields {", ".join(required)}.')

    if len({record['vocab_id'] for record in value}) > 1:
        raise ValueError('mixed vocabularies')

    return value


def _zipf_or_none(samples: tlists_int) -> ofloat:

    counts = Counter(token for sample in samples for token in sample)

    if len(counts) < 2:
        return None

    return zipf_from_frequencies(list(counts.values()))


def dist_n(samples: tany, n: int) -> float:

    """
    The function computes the ratio of distinct n-grams to n-gram occurrences, pooled over all samples.

    :param samples: a sample set or a list of token sequences.
    :param n: the n-gram order.
    :raises ValidationError: if any input argument is not compliant.
    """

    samples = _samples_of(samples)

    try:

        n = _validate_ngram_order(n, samples)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    pooled = Counter()

    for sample in samples:
        pooled.update(_ngrams(sample, n))

    return len(pooled) / sum(pooled.values())


def evaluate(sample_sets: tlist_any, ar_ref: oref = None, logprobs: Optional[tlist_any] = None, config: Optional[MetricsConfig] = None) -> tlist_any:

    """
    The function computes one metric report per prompt plus a macro-average row.

    | **Notes:**

    * AR-NLL is averaged per sample, then over samples; it comes from the reference model or from imported log-probabilities.
    * Diversity metrics are left empty, with a warning, for groups smaller than the configured size.
    * The macro row averages every column except **zipf**, which is fitted on the pooled corpus.

    :param sample_sets: the sample sets, one per prompt.
    :param ar_ref: the autoregressive reference scorer.
    :param logprobs: the imported log-probability records, aligned with the samples.
    :param config: the metrics configuration.
    :raises ValidationError: if any input argument is not compliant.
    """

    config = MetricsConfig() if config is None else config

    try:

        if logprobs is not None:
            logprobs = _validate_logprobs(logprobs, sample_sets)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    reports = []
    cursor = 0
    pooled = []

    for sample_set in sample_sets:

        samples = _samples_of(sample_set)
        pooled.extend(samples)

        if logprobs is not None:
            nlls = [-float(np.mean(record['logprobs'][len(sample_set.prompt):])) for record in logprobs[cursor:cursor + len(samples)]]
        elif ar_ref is not None:
            nlls = [ar_nll(ar_ref, sample_set.prompt, sample) for sample in samples]
        else:
            nlls = []

        cursor += len(samples)

        diverse = len(samples) >= config.group_size

        if not diverse:
            _logger.warning('Prompt %s has %d samples, fewer than %d: diversity metrics are omitted.', sample_set.prompt_index, len(samples), config.group_size)

        dists = []

        for n in (1, 2, 3):
            dists.append(dist_n(samples, n) if diverse and all(len(s) >= n for s in samples) else None)

        reports.append(MetricReport(
            sample_set.prompt_index,
            _mean_or_none(nlls),
            dists[0],
            dists[1],
            dists[2],
            self_bleu(samples, config.bleu_max_n) if diverse else None,
            _zipf_or_none(samples),
            float(np.mean([unique_token_fraction(s) for s in samples]))
        ))

    macro = [_mean_or_none([getattr(report, column) for report in reports]) for column in REPORT_COLUMNS[1:]]
    macro[REPORT_COLUMNS.index('zipf') - 1] = _zipf_or_none(pooled)

    reports.append(MetricReport('macro', *macro))

    return reports


def export_logprobs(ref: tany, sample_sets: tlist_any, file_path: tpath):

    """
    The function writes the per-token log-probabilities of every sample under a reference scorer, as JSON Lines of {tokens, logprobs}.
    """

    records = []

    for sample_set in sample_sets:
        for sample in _samples_of(sample_set):

            tokens = list(sample_set.prompt) + sample
            values = ref.next_token_log_probs(np.array(tokens, dtype=np.int64))

            records.append({'tokens': tokens, 'logprobs': [float(v) for v in values.detach().double().cpu().numpy()]})

    write_jsonl(file_path, records)


def read_logprobs(file_path: tpath) -> tlist_any:

    """
    The function reads an imported log-probability file.

    :raises TraceFormatError: if a record is malformed.
    """

    records = read_jsonl(file_path)

    for line_number, record in enumerate(records, start=1):
        if not isinstance(record.get('tokens'), list) or not isinstance(record.get('logprobs'), list):
            raise TraceFormatError('the record must contain "tokens" and "logprobs" lists', line_number)

    return records


def sample_sets_from_records(records: tlist_any) -> tuple:

    """
    The function groups the records of one or more samples files into sample sets, ordered by prompt index.

    :return: the sample sets and the vocabulary identifier shared by the records.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        records = _validate_sample_records(records)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    groups = {}

    for record in sorted(records, key=lambda r: (r['prompt_index'], r['sample_index'])):
        groups.setdefault(record['prompt_index'], []).append(record)

    sets = [SampleSet(list(group[0]['prefix_ids']), [list(r['continuation_ids']) for r in group], index) for index, group in groups.items()]

    return sets, records[0]['vocab_id']


def self_bleu(samples: tany, max_n: int = 4) -> float:

    """
    The function computes the mean BLEU of every sample against the other samples of the set.

    | **Notes:**

    * N-gram orders from 1 to **max_n** are weighted uniformly; orders longer than a sample are skipped.
    * A sample without unigram matches scores 0; higher orders without matches are smoothed by adding one to matches and occurrences.
    * The brevity penalty uses the reference length closest to the sample length.

    :param samples: a sample set or a list of token sequences.
    :param max_n: the maximum n-gram order.
    :raises ValidationError: if any input argument is not compliant.
    """

    samples = _samples_of(samples)

    try:

        samples = _validate_group(samples, 2)
        max_n = validate_integer(max_n, lower_limit=(1, False))

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    scores = [_bleu(sample, samples[:i] + samples[i + 1:], max_n) for i, sample in enumerate(samples)]

    return float(np.mean(scores))


def unique_token_fraction(sample: tany) -> float:

    sample = list(sample)

    return len(set(sample)) / len(sample)


def wer(hypothesis: tany, reference: tany) -> float:

    """
    The function computes the token-level edit distance between two sequences, normalized by the reference length.

    :raises ValidationError: if any input argument is not compliant.
    """

    hypothesis = [int(token) if isinstance(token, (int, np.integer)) else token for token in hypothesis]

    try:

        reference = _validate_reference(reference)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    reference = [int(token) if isinstance(token, (int, np.integer)) else token for token in reference]

    return levenshtein_distance(hypothesis, reference) / len(reference)


def write_report(reports: tlist_any, file_path: tpath):

    write_csv(file_path, REPORT_COLUMNS, [report._asdict() for report in reports])


def zipf_coeff(samples: tany) -> float:

    """
    The function fits the Zipf coefficient of a token corpus, the negated slope of log-frequency against log-rank.

    :raises ValidationError: if the corpus contains fewer than two distinct tokens.
    """

    counts = Counter(token for sample in _samples_of(samples) for token in sample)

    return zipf_from_frequencies(list(counts.values()))


def zipf_from_frequencies(frequencies: tany) -> float:

    try:

        frequencies = _validate_frequencies(frequencies)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    ranks = np.arange(1, frequencies.size + 1, dtype=float)
    fit = linregress(np.log(ranks), np.log(frequencies))

    return float(-fit.slope)
