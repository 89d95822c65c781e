# -*- coding: utf-8 -*-


###########
# IMPORTS #
###########

# Libraries

import numpy as np
import torch

from pytest import (
    mark
)

# Internal

from pyddlm.cli import (
    main
)

from pyddlm.diffusion import (
    NoisyState
)

from pyddlm.files_io import (
    read_csv,
    read_jsonl,
    write_json
)

from pyddlm.halting import (
    StepStats
)

from pyddlm.tracing import (
    new_trace,
    read_trace,
    record_step,
    write_trace
)


###########
# HELPERS #
###########

def _write_trace(file_path, seed):

    generator = torch.Generator().manual_seed(seed)
    cond_mask = np.array([False, False, False])

    trace_ = new_trace(file_path.stem, {}, seed, None, 3, cond_mask, 'stats+states')
    stats = [StepStats(0, 1.2), StepStats(1, 0.8, 0.3, 2), StepStats(2, 0.3, 0.05, 1), StepStats(3, 0.1, 0.001, 0)]

    for step, t in enumerate([4.0, 3.0, 2.0, 1.0]):
        X = torch.randn((3, 2), dtype=torch.float64, generator=generator)
        x0_hat = torch.randn((3, 2), dtype=torch.float64, generator=generator)
        record_step(trace_, NoisyState(X, t, cond_mask), x0_hat, stats[step], np.array([1, 2, min(step, 2)]))

    write_trace(trace_, file_path)


#########
# TESTS #
#########

def test_usage_errors():

    assert main([]) == 2
    assert main(['unknown']) == 2
    assert main(['generate']) == 2


def test_missing_corpus(tmp_path):

    code = main(['train', '--quiet', '--corpus', str(tmp_path / 'missing.txt'), '--run-dir', str(tmp_path / 'run')])

    assert code == 2
    assert not (tmp_path / 'run').exists()


def test_unknown_key(tmp_path):

    assert main(['train', '--quiet', '--set', 'train.nope=1', '--run-dir', str(tmp_path)]) == 2
    assert main(['train', '--quiet', '--grid', 'nope=1,2', '--run-dir', str(tmp_path)]) == 2


def test_missing_checkpoint(tmp_path):

    assert main(['generate', '--quiet', '--checkpoint', str(tmp_path / 'step_1.ckpt')]) == 2


def test_invalid_checkpoint(tmp_path):

    file_path = tmp_path / 'step_1.ckpt'
    file_path.write_bytes(b'garbage')

    assert main(['generate', '--quiet', '--checkpoint', str(file_path), '--out', str(tmp_path / 'out')]) == 1


def test_trace_to_csv(tmp_path):

    file_path = tmp_path / 'p0_s0.jsonl'
    _write_trace(file_path, 0)

    assert main(['trace-to-csv', '--quiet', str(file_path)]) == 0

    header, rows = read_csv(tmp_path / 'p0_s0.csv')

    assert header[:3] == ['step', 't', 'entropy_mean']
    assert [row['step'] for row in rows] == ['0', '1', '2', '3']


def test_analyze_trace(tmp_path):

    file_path = tmp_path / 'p0_s0.jsonl'
    out = tmp_path / 'dynamics.csv'
    _write_trace(file_path, 1)

    assert main(['analyze', '--quiet', '--trace', str(file_path), '--out', str(out), '--plot']) == 0

    header, rows = read_csv(out)

    assert 'cos_score_final' in header
    assert len(rows) == 4
    assert float(rows[-1]['cos_emb_final']) == 1.0
    assert (tmp_path / 'dynamics.png').is_file()

    assert main(['analyze', '--quiet']) == 2
    assert main(['analyze', '--quiet', '--noise-scales', '0.5']) == 2


def test_sweep(tmp_path):

    traces = tmp_path / 'traces'
    traces.mkdir()

    for seed in range(3):
        _write_trace(traces / f'p0_s{seed:d}.jsonl', seed)

    out = tmp_path / 'sweep.csv'

    assert main(['sweep', '--quiet', '--traces', str(traces), '--grid', 'fixed=0:2:1 entropy=0.5', '--out', str(out)]) == 0

    _, rows = read_csv(out)

    assert [(row['criterion'], row['mean_halt_step']) for row in rows] == [
        ('entropy', '2.0'),
        ('fixed', '0.0'),
        ('fixed', '1.0'),
        ('fixed', '2.0')
    ]

    empty = tmp_path / 'empty'
    empty.mkdir()

    assert main(['sweep', '--quiet', '--traces', str(empty), '--grid', 'fixed=1']) == 2
    assert main(['sweep', '--quiet', '--traces', str(tmp_path / 'missing'), '--grid', 'fixed=1']) == 2


@mark.slow
def test_workflow(tmp_path):

    run_dir = tmp_path / 'run'
    config_path = tmp_path / 'config.json'

    write_json(config_path, {
        'run_dir': str(run_dir),
        'seed': 1,
        'corpus': {'seq_len': 8},
        'model': {'d': 8, 'd_model': 16, 'layers': 1, 'heads': 2, 'ff_mult': 2, 'time_features': 8},
        'train': {'steps': 3, 'batch_size': 2, 'warmup_steps': 1, 'checkpoint_every': 3, 'log_every': 1},
        'ar': {'steps': 2, 'batch_size': 2, 'warmup_steps': 1},
        'gen': {'n_steps': 4, 'samples_per_prompt': 2, 'record': 'stats+states'},
        'metrics': {'group_size': 2}
    })

    checkpoint = run_dir / 'checkpoints' / 'step_3.ckpt'
    reference = run_dir / 'ar_reference.ckpt'

    assert main(['train', '--quiet', '--config', str(config_path), '--ar']) == 0
    assert checkpoint.is_file()
    assert reference.is_file()

    prompts = tmp_path / 'prompts.txt'
    prompts.write_text('the\nsun\n', encoding='utf-8')

    samples = tmp_path / 'samples'

    code = main([
        'generate', '--quiet', '--config', str(config_path),
        '--checkpoint', str(checkpoint), '--vocab', str(run_dir / 'vocab.txt'),
        '--prompts', str(prompts), '--conditioning', 'prefix', '--cond-len', '3',
        '--out', str(samples), '--halt', 'entropy', '--e_t', '0.0'
    ])

    assert code == 0

    records = read_jsonl(samples / 'samples.jsonl')

    assert len(records) == 4
    assert [(r['prompt_index'], r['sample_index']) for r in records] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert all(r['halt_step'] == 4 and not r['halted_early'] for r in records)
    assert records[0]['prompt'] == 'the'

    trace_ = read_trace(records[0]['trace'])

    assert len(trace_) == 5
    assert trace_.has_states

    sweep_out = tmp_path / 'sweep.csv'

    code = main([
        'sweep', '--quiet', '--config', str(config_path), '--traces', str(samples / 'traces'),
        '--grid', 'fixed=0:4:2 kl=0.001', '--ar-checkpoint', str(reference), '--out', str(sweep_out), '--plot'
    ])

    assert code == 0
    assert sweep_out.with_suffix('.png').is_file()

    _, rows = read_csv(sweep_out)

    assert len(rows) == 4
    assert all(len(row['mean_ar_nll']) > 0 for row in rows)

    analysis = tmp_path / 'analysis'

    code = main([
        'analyze', '--quiet', '--config', str(config_path), '--checkpoint', str(checkpoint),
        '--noise-scales', '0.5,1.0', '--prompt', 'the', '--out', str(analysis)
    ])

    assert code == 0
    assert (analysis / 'dynamics_noise=0.5.csv').is_file()
    assert (analysis / 'dynamics_noise=1.csv').is_file()

    defaults = tmp_path / 'defaults'

    code = main(['analyze', '--quiet', '--config', str(config_path), '--checkpoint', str(checkpoint), '--out', str(defaults)])

    assert code == 0
    assert sorted(p.name for p in defaults.glob('*.csv')) == sorted(
        f'dynamics_noise={scale}.csv' for scale in ['0', '0.5', '0.8', '0.9', '1', '1.1', '1.2']
    )

    metrics = tmp_path / 'metrics.csv'

    code = main(['eval', '--quiet', '--config', str(config_path), str(samples / 'samples.jsonl'), '--ar-checkpoint', str(reference), '--out', str(metrics)])

    assert code == 0

    _, rows = read_csv(metrics)

    assert [row['prompt_index'] for row in rows] == ['0', '1', 'macro']
    assert all(len(row['ar_nll']) > 0 for row in rows)
