# -*- coding: utf-8 -*-


###########
# IMPORTS #
###########

# Libraries

import numpy as np
import numpy.testing as npt
import torch
import torch.nn as nn

from pytest import (
    raises
)

# Internal

from pyddlm.config import (
    GenConfig,
    HaltConfig,
    ModelConfig
)

from pyddlm.corpus import (
    PAD_TOKEN,
    Vocabulary,
    decode
)

from pyddlm.denoiser import (
    create_denoiser
)

from pyddlm.diffusion import (
    EmbeddingTable,
    make_grid
)

from pyddlm.exceptions import (
    NumericalError,
    ValidationError
)

from pyddlm.halting import (
    replay
)

from pyddlm.sampler import (
    conditioning_mask,
    generate,
    generate_batch,
    init_state,
    prompt_ids,
    sample_record,
    split_tokens
)

from pyddlm.utilities import (
    derive_seed
)


#############
# CONSTANTS #
#############

_config = ModelConfig(d=4, d_model=8, layers=1, heads=2, ff_mult=2, time_features=4, dtype='float64')


###########
# HELPERS #
###########

class _ConstantDenoiser(nn.Module):

    def __init__(self, logits, seq_len, t_max=10.0):

        super().__init__()

        torch.manual_seed(0)

        self.embedding = EmbeddingTable(len(logits), 4, torch.float64)
        self.logits = torch.tensor(logits, dtype=torch.float64)
        self.seq_len = seq_len
        self.t_max = t_max

    @property
    def vocab_size(self):

        return self.embedding.vocab_size

    def forward(self, X, t, cond_mask):

        return self.logits.expand(X.shape[0], X.shape[1], self.logits.shape[0]).clone()


def _constant_model():

    return _ConstantDenoiser([0.0, 0.5, 1.0, 0.2, 3.0, 0.1], 6)


def _tiny_model():

    return create_denoiser(6, 5, 10.0, _config, 0)


#########
# TESTS #
#########

def test_conditioning_mask(mode, cond_len, seq_len, mask):

    npt.assert_array_equal(conditioning_mask(mode, cond_len, seq_len), np.array(mask, dtype=bool))


def test_conditioning_mask_enclosed_32():

    mask = conditioning_mask('enclosed', 32, 64)

    npt.assert_array_equal(np.flatnonzero(mask), np.concatenate([np.arange(16), np.arange(48, 64)]))


def test_conditioning_mask_validation():

    with raises(ValidationError):
        conditioning_mask('prefix', 8, 8)

    with raises(ValidationError):
        conditioning_mask('suffix', 2, 8)


def test_prompt_ids():

    npt.assert_array_equal(prompt_ids([3, 1], 'prefix', 4, 6), np.array([3, 1, 0, 0]))
    npt.assert_array_equal(prompt_ids(None, 'unconditional', 3, 6), np.zeros(3, dtype=np.int64))

    with raises(ValidationError):
        prompt_ids(None, 'prefix', 4, 6)

    with raises(ValidationError):
        prompt_ids([1, 2, 3, 4, 5], 'prefix', 4, 6)

    with raises(ValidationError):
        prompt_ids([1, 9], 'prefix', 4, 6)


def test_split_tokens():

    prefix, continuation = split_tokens([1, 2, 3, 4, 5], [True, True, False, False, True])

    assert prefix == [1, 2]
    assert continuation == [3, 4]

    prefix, continuation = split_tokens([1, 2, 3], [False, False, False])

    assert prefix == []
    assert continuation == [1, 2, 3]


def test_init_state():

    model = _constant_model()
    cfg = GenConfig(n_steps=4, noise_scale=0.0, conditioning='prefix', cond_len=2, seed=0)
    schedule = make_grid(10.0, 0.1, 4)

    state = init_state(cfg, [3, 5], model.embedding, schedule, 6, 0)
    matrix = model.embedding().detach()

    assert state.t == 10.0
    npt.assert_array_equal(state.cond_mask, np.array([True, True, False, False, False, False]))
    npt.assert_array_equal(state.X[:2].detach().numpy(), matrix[[3, 5]].numpy())
    npt.assert_array_equal(state.X[2:].detach().numpy(), np.zeros((4, 4)))

    cfg = GenConfig(n_steps=4, noise_scale=2.0, seed=0)
    state_1 = init_state(cfg, None, model.embedding, schedule, 6, 7)
    state_2 = init_state(cfg, None, model.embedding, schedule, 6, 7)

    npt.assert_array_equal(state_1.X.numpy(), state_2.X.numpy())
    assert not state_1.cond_mask.any()


def test_generate_halting(halt, n_steps, halt_step, halted_early):

    result = generate(_constant_model(), GenConfig(n_steps=n_steps, seed=0), HaltConfig(**halt))

    assert result.halt_step == halt_step
    assert result.halted_early == halted_early
    assert len(result.trace) == halt_step + 1
    assert result.trace.records[-1].step == halt_step

    npt.assert_array_equal(result.tokens, np.full(6, 4))


def test_generate_full_run():

    cfg = GenConfig(n_steps=5, seed=3, t_min_ratio=0.01)
    result = generate(_constant_model(), cfg, HaltConfig(kind='none'))
    t_values = [record.t for record in result.trace.records]

    assert result.seed == 3
    assert result.trace.meta['seed'] == 3
    assert result.trace.meta['n_steps'] == 5

    npt.assert_allclose(t_values, make_grid(10.0, 0.1, 5).grid, rtol=1e-12)


def test_prompt_echo():

    cfg = GenConfig(n_steps=3, conditioning='prefix', cond_len=3, seed=0)
    result = generate(_constant_model(), cfg, HaltConfig(), prompt=[1, 2, 3])

    npt.assert_array_equal(result.tokens, np.array([1, 2, 3, 4, 4, 4]))

    for step in range(4):
        npt.assert_array_equal(result.trace.tokens_at(step)[:3], np.array([1, 2, 3]))


def test_zero_noise_determinism():

    model = _tiny_model()
    cfg = GenConfig(n_steps=6, noise_scale=0.0, seed=0)

    result_1 = generate(model, cfg, HaltConfig(), seed=1)
    result_2 = generate(model, cfg, HaltConfig(), seed=2)

    npt.assert_array_equal(result_1.tokens, result_2.tokens)

    for record_1, record_2 in zip(result_1.trace.records, result_2.trace.records):
        assert record_1.entropy_mean == record_2.entropy_mean
        assert record_1.tokens == record_2.tokens


def test_seed_determinism():

    model = _tiny_model()
    cfg = GenConfig(n_steps=6, seed=0, record='stats+states')

    result_1 = generate(model, cfg, HaltConfig(), seed=5)
    result_2 = generate(model, cfg, HaltConfig(), seed=5)
    result_3 = generate(model, cfg, HaltConfig(), seed=6)

    assert result_1.trace == result_2.trace
    assert result_1.trace.records[0].l2_X != result_3.trace.records[0].l2_X


def test_replay_matches_live():

    model = _tiny_model()
    cfg = GenConfig(n_steps=10, seed=0)

    reference = generate(model, cfg, HaltConfig(), seed=4)
    entropies = [record.entropy_mean for record in reference.trace.records]
    kls = [record.kl_mean for record in reference.trace.records[1:]]

    halts = [
        HaltConfig(kind='entropy', e_t=entropies[4]),
        HaltConfig(kind='entropy', e_t=min(entropies) / 2.0),
        HaltConfig(kind='kl', d_t=float(np.median(kls))),
        HaltConfig(kind='kl', d_t=float(np.median(kls)), kl_halt_above=True, min_steps=1),
        HaltConfig(kind='patience', patience_p=2, switch_threshold=1),
        HaltConfig(kind='fixed', fixed_step=7)
    ]

    for halt in halts:

        expected = replay(reference.trace, halt)
        live = generate(model, cfg, halt, seed=4)

        assert live.halted_early == (expected is not None)
        assert live.halt_step == (cfg.n_steps if expected is None else expected)
        npt.assert_array_equal(live.tokens, reference.trace.tokens_at(live.halt_step))


def test_numerical_error():

    model = _ConstantDenoiser([0.0, float('nan'), 1.0], 4)

    with raises(NumericalError, match='at step 0'):
        generate(model, GenConfig(n_steps=3, seed=0), HaltConfig())


def test_generate_batch():

    model = _constant_model()
    cfg = GenConfig(n_steps=2, conditioning='prefix', cond_len=1, samples_per_prompt=2, seed=9)

    results = generate_batch(model, cfg, HaltConfig(), [[1], [2]])

    assert len(results) == 4
    assert [result.trace.meta['run_id'] for result in results] == ['p0_s0', 'p0_s1', 'p1_s0', 'p1_s1']
    assert [result.seed for result in results] == [derive_seed(9, p, s) for p in range(2) for s in range(2)]
    assert [int(result.tokens[0]) for result in results] == [1, 1, 2, 2]

    results = generate_batch(model, cfg, HaltConfig(), [[3]], samples_per_prompt=3, base_seed=1)

    assert [result.seed for result in results] == [derive_seed(1, 0, s) for s in range(3)]


def test_sample_record():

    vocab = Vocabulary([PAD_TOKEN, 'a', 'b', 'c', 'd', 'e'], 'char')
    halt = HaltConfig(kind='fixed', fixed_step=1)
    cfg = GenConfig(n_steps=3, conditioning='prefix', cond_len=2, seed=0)

    result = generate(_constant_model(), cfg, halt, prompt=[1, 2])
    record = sample_record(result, vocab, halt, 0, 1, 'traces/p0_s1.jsonl')

    assert record['prompt'] == 'ab'
    assert record['tokens'] == [1, 2, 4, 4, 4, 4]
    assert record['text'] == decode(result.tokens, vocab)
    assert record['halt_step'] == 1
    assert record['halted_early']
    assert record['criterion'] == 'fixed'
    assert record['threshold'] == 1
    assert record['prompt_index'] == 0
    assert record['sample_index'] == 1
    assert record['conditioning'] == 'prefix'
    assert record['trace'] == 'traces/p0_s1.jsonl'
    assert record['prefix_ids'] == [1, 2]
    assert record['continuation_ids'] == [4, 4, 4, 4]
    assert record['vocab_id'] == vocab.fingerprint
