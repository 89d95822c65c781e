# -*- coding: utf-8 -*-


###########
# IMPORTS #
###########

# Libraries

import numpy as np

from pytest import (
    mark
)

# Internal

from pyddlm.config import (
    GenConfig,
    HaltConfig,
    RunConfig
)

from pyddlm.corpus import (
    build_vocabulary,
    encode_corpus,
    load_toy_corpus
)

from pyddlm.denoiser import (
    ar_nll
)

from pyddlm.halting import (
    replay,
    sweep
)

from pyddlm.metrics import (
    dist_n,
    self_bleu,
    wer
)

from pyddlm.sampler import (
    generate_batch,
    split_tokens
)

from pyddlm.training import (
    load_ar_reference,
    load_denoiser,
    train,
    train_ar_reference
)


#############
# CONSTANTS #
#############

_n_steps = 200
_samples = 100


###########
# CACHING #
###########

_runs = {}


###########
# HELPERS #
###########

def _full_traces(tmp_path_factory):

    if 'traces' not in _runs:

        model, _ = _toy_models(tmp_path_factory)

        cfg = GenConfig(n_steps=_n_steps, record='stats', seed=0)
        results = generate_batch(model, cfg, HaltConfig(), [None], samples_per_prompt=_samples, base_seed=0)

        _runs['traces'] = [result.trace for result in results]

    return _runs['traces']


def _kl_rows(tmp_path_factory):

    if 'rows' not in _runs:

        _, reference = _toy_models(tmp_path_factory)
        traces = _full_traces(tmp_path_factory)

        def ar_nll_fn(trace_, step):
            prefix, continuation = split_tokens(trace_.tokens_at(step), trace_.cond_mask)
            return ar_nll(reference, prefix, continuation)

        cfgs = [HaltConfig(kind='kl', d_t=float(d_t)) for d_t in np.geomspace(1e-7, 1e-1, 13)]
        rows = sweep(traces, cfgs, ar_nll_fn)
        full = float(np.mean([ar_nll_fn(trace_, _n_steps) for trace_ in traces]))

        _runs['rows'] = (cfgs, rows, full)

    return _runs['rows']


def _qualifying_cfgs(tmp_path_factory):

    cfgs, rows, full = _kl_rows(tmp_path_factory)
    thresholds = [row.threshold for row in rows if row.mean_halt_step <= 0.9 * _n_steps and abs(row.mean_ar_nll - full) <= 0.01 * full]

    return [cfg for cfg in cfgs if cfg.d_t in thresholds]


def _toy_models(tmp_path_factory):

    if 'models' not in _runs:

        config = RunConfig(run_dir=str(tmp_path_factory.mktemp('toy')), seed=0)

        text = load_toy_corpus()
        vocab = build_vocabulary(text, config.corpus.mode, config.corpus.max_size)
        corpus = encode_corpus(text, vocab, config.corpus.seq_len)

        checkpoint = train(config, corpus, vocab, progress=False)
        reference = train_ar_reference(config, corpus, vocab, progress=False)

        model, _, _ = load_denoiser(checkpoint)
        ar_model, _, _ = load_ar_reference(reference)

        _runs['models'] = (model, ar_model)

    return _runs['models']


def _zero_switch_step(trace_):

    step = None

    for record in reversed(trace_.records[1:]):
        if record.token_switches != 0:
            break
        step = record.step

    return step


#########
# TESTS #
#########

@mark.slow
def test_zero_switch_plateau(tmp_path_factory):

    traces = _full_traces(tmp_path_factory)
    tail_start = _n_steps - _n_steps // 4

    settled = [all(r.token_switches == 0 for r in trace_.records if r.step > tail_start) for trace_ in traces]

    assert np.mean(settled) >= 0.9

    initial = np.mean([trace_.records[0].entropy_mean for trace_ in traces])
    final = np.mean([trace_.records[-1].entropy_mean for trace_ in traces])

    assert final < 0.1 * initial


@mark.slow
def test_kl_early_exit(tmp_path_factory):

    _, rows, full = _kl_rows(tmp_path_factory)

    assert all(row.mean_ar_nll is not None for row in rows)
    assert np.isfinite(full)

    assert len(_qualifying_cfgs(tmp_path_factory)) > 0


@mark.slow
def test_halted_equals_full(tmp_path_factory):

    traces = _full_traces(tmp_path_factory)
    cfgs = _qualifying_cfgs(tmp_path_factory)

    assert len(cfgs) > 0

    cfg = min(cfgs, key=lambda c: c.d_t)
    errors = []

    for trace_ in traces:

        halt_step = replay(trace_, cfg)

        if halt_step is None:
            continue

        gen = trace_.gen_mask
        error = wer(trace_.tokens_at(halt_step)[gen], trace_.tokens_at(_n_steps)[gen])
        errors.append(error)

        zero_switch = _zero_switch_step(trace_)

        if zero_switch is not None and halt_step >= zero_switch:
            assert error == 0.0

    assert len(errors) > 0
    assert np.mean(errors) <= 0.02


@mark.slow
def test_noise_scale_trend(tmp_path_factory):

    model, _ = _toy_models(tmp_path_factory)

    bleu = []
    dist_1 = []

    for noise_scale in (0.0, 0.5, 1.0):

        cfg = GenConfig(n_steps=_n_steps, noise_scale=noise_scale, seed=1)
        results = generate_batch(model, cfg, HaltConfig(), [None], samples_per_prompt=20, base_seed=1)
        samples = [result.tokens.tolist() for result in results]

        bleu.append(self_bleu(samples))
        dist_1.append(dist_n(samples, 1))

    assert bleu[0] == 1.0
    assert all(a <= b for a, b in zip(dist_1, dist_1[1:]))
