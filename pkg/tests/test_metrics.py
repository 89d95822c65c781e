# -*- coding: utf-8 -*-


###########
# IMPORTS #
###########

# Standard

from math import (
    log
)

# Libraries

import numpy as np
import numpy.testing as npt
import torch

from pytest import (
    raises
)

# Internal

from pyddlm.config import (
    MetricsConfig,
    ModelConfig
)

from pyddlm.denoiser import (
    create_ar_reference
)

from pyddlm.exceptions import (
    TraceFormatError,
    ValidationError
)

from pyddlm.files_io import (
    read_csv
)

from pyddlm.metrics import (
    REPORT_COLUMNS,
    SampleSet,
    dist_n,
    evaluate,
    export_logprobs,
    read_logprobs,
    sample_sets_from_records,
    self_bleu,
    unique_token_fraction,
    wer,
    write_report,
    zipf_coeff,
    zipf_from_frequencies
)


###########
# HELPERS #
###########

class _UniformScorer:

    def next_token_log_probs(self, ids):

        return torch.full((len(ids),), -log(4.0), dtype=torch.float64)


def _sample_sets():

    return [
        SampleSet([1], [[1, 2, 3], [1, 2, 4]], 0),
        SampleSet([2], [[5, 5, 5], [5, 6, 5]], 1)
    ]


#########
# TESTS #
#########

def test_dist_n(samples, n, value):

    npt.assert_allclose(dist_n(samples, n), value, rtol=1e-12)


def test_dist_n_validation():

    with raises(ValidationError):
        dist_n([[1, 2], [3]], 2)

    with raises(ValidationError):
        dist_n([[1, 2]], 0)


def test_self_bleu(samples, max_n, value):

    npt.assert_allclose(self_bleu(samples, max_n), value, rtol=1e-9)


def test_self_bleu_validation():

    with raises(ValidationError):
        self_bleu([[1, 2, 3]])


def test_zipf_from_frequencies(frequencies, value):

    npt.assert_allclose(zipf_from_frequencies(frequencies), value, rtol=1e-9, atol=1e-12)


def test_zipf_coeff():

    samples = [[1] * 60 + [2] * 30, [3] * 20 + [4] * 15]

    npt.assert_allclose(zipf_coeff(samples), 1.0, rtol=1e-9)
    npt.assert_allclose(zipf_coeff(SampleSet([], samples)), 1.0, rtol=1e-9)

    with raises(ValidationError, match='degenerate frequency distribution'):
        zipf_coeff([[7, 7, 7], [7]])


def test_zipf_coeff_planted():

    for exponent in (0.5, 1.0, 2.0):

        counts = [int(round(200000.0 / rank**exponent)) for rank in range(1, 11)]
        samples = [[token] * count for token, count in enumerate(counts)]

        npt.assert_allclose(zipf_coeff(samples), exponent, atol=1e-3)


def test_wer(hypothesis, reference, value):

    npt.assert_allclose(wer(hypothesis, reference), value, rtol=1e-12)


def test_wer_validation():

    with raises(ValidationError):
        wer([1, 2], [])


def test_wer_distance_properties():

    rng = np.random.RandomState(3)

    def distance(a, b):
        return int(round(wer(a, b) * len(b)))

    for _ in range(50):

        a, b, c = [list(rng.randint(0, 4, size=rng.randint(1, 9))) for _ in range(3)]

        assert distance(a, b) == distance(b, a)
        assert distance(a, c) <= distance(a, b) + distance(b, c)
        assert distance(a, a) == 0


def test_unique_token_fraction(sample, value):

    npt.assert_allclose(unique_token_fraction(sample), value, rtol=1e-12)


def test_evaluate():

    reports = evaluate(_sample_sets(), _UniformScorer(), config=MetricsConfig(group_size=2, bleu_max_n=4))
    first, second, macro = reports

    assert [report.prompt_index for report in reports] == [0, 1, 'macro']

    npt.assert_allclose(first.ar_nll, log(4.0), rtol=1e-12)
    npt.assert_allclose([first.dist_1, first.dist_2, first.dist_3], [4.0 / 6.0, 0.75, 1.0], rtol=1e-12)
    npt.assert_allclose(first.self_bleu, (1.0 / 6.0)**(1.0 / 3.0), rtol=1e-9)
    npt.assert_allclose(first.unique_token_fraction, 1.0, rtol=1e-12)

    npt.assert_allclose([second.dist_1, second.dist_2, second.dist_3], [1.0 / 3.0, 0.75, 1.0], rtol=1e-12)
    npt.assert_allclose(second.unique_token_fraction, 0.5, rtol=1e-12)

    npt.assert_allclose(macro.ar_nll, log(4.0), rtol=1e-12)
    npt.assert_allclose(macro.dist_1, 0.5, rtol=1e-12)
    npt.assert_allclose(macro.unique_token_fraction, 0.75, rtol=1e-12)
    npt.assert_allclose(macro.zipf, zipf_from_frequencies([5, 2, 2, 1, 1, 1]), rtol=1e-12)


def test_evaluate_undersized_group(caplog):

    reports = evaluate(_sample_sets(), config=MetricsConfig(group_size=5))

    for report in reports:
        assert report.ar_nll is None
        assert report.dist_1 is None
        assert report.self_bleu is None
        assert report.unique_token_fraction is not None

    assert reports[0].zipf is not None
    assert 'diversity metrics are omitted' in caplog.text


def test_logprobs_roundtrip(tmp_path):

    config = ModelConfig(d=8, d_model=16, layers=1, heads=2, ff_mult=2, time_features=8, dtype='float64')
    model = create_ar_reference(7, 8, config, 0)
    sets = _sample_sets()

    file_path = tmp_path / 'logprobs.jsonl'

    with torch.no_grad():
        export_logprobs(model, sets, file_path)

    records = read_logprobs(file_path)

    assert len(records) == 4
    assert records[0]['tokens'] == [1, 1, 2, 3]

    imported = evaluate(sets, logprobs=records, config=MetricsConfig(group_size=2))
    scored = evaluate(sets, model, config=MetricsConfig(group_size=2))

    for a, b in zip(imported, scored):
        npt.assert_allclose(a.ar_nll, b.ar_nll, rtol=1e-9)

    records[2]['tokens'][1] = 6

    with raises(ValidationError, match='logprob token mismatch in record 2 at position 1'):
        evaluate(sets, logprobs=records)

    with raises(ValidationError, match='holds 3 records'):
        evaluate(sets, logprobs=records[:3])


def test_read_logprobs_validation(tmp_path):

    file_path = tmp_path / 'logprobs.jsonl'
    file_path.write_text('{"tokens": [1, 2], "logprobs": [-1.0, -2.0]}\n{"tokens": [1]}\n', encoding='utf-8')

    with raises(TraceFormatError) as e:
        read_logprobs(file_path)

    assert e.value.line_number == 2


def test_sample_sets_from_records():

    records = [
        {'prompt_index': 1, 'sample_index': 0, 'prefix_ids': [2], 'continuation_ids': [5, 5], 'vocab_id': 'v'},
        {'prompt_index': 0, 'sample_index': 1, 'prefix_ids': [1], 'continuation_ids': [1, 3], 'vocab_id': 'v'},
        {'prompt_index': 0, 'sample_index': 0, 'prefix_ids': [1], 'continuation_ids': [1, 2], 'vocab_id': 'v'}
    ]

    sets, vocab_id = sample_sets_from_records(records)

    assert vocab_id == 'v'
    assert sets == [SampleSet([1], [[1, 2], [1, 3]], 0), SampleSet([2], [[5, 5]], 1)]

    records[0]['vocab_id'] = 'w'

    with raises(ValidationError, match='mixed vocabularies'):
        sample_sets_from_records(records)

    with raises(ValidationError):
        sample_sets_from_records([{'prompt_index': 0}])


def test_write_report(tmp_path):

    file_path = tmp_path / 'metrics.csv'
    write_report(evaluate(_sample_sets(), config=MetricsConfig(group_size=2)), file_path)

    header, rows = read_csv(file_path)

    assert header == REPORT_COLUMNS
    assert [row['prompt_index'] for row in rows] == ['0', '1', 'macro']
    assert rows[0]['ar_nll'] == ''
