# -*- coding: utf-8 -*-

__all__ = [
    'build_parser',
    'cmd_analyze',
    'cmd_eval',
    'cmd_generate',
    'cmd_sweep',
    'cmd_train',
    'cmd_trace_to_csv',
    'main'
]


###########
# IMPORTS #
###########

# Standard

from argparse import (
    ArgumentParser,
    Namespace
)

from dataclasses import (
    replace
)

from json import (
    dumps as json_dumps
)

from logging import (
    DEBUG,
    Formatter,
    INFO,
    StreamHandler,
    WARNING,
    getLogger
)

from pathlib import (
    Path
)

from sys import (
    stderr
)

# Libraries

import matplotlib.pyplot as mplp
import numpy as np
import torch

# Internal

from .config import (
    HaltConfig,
    RunConfig,
    apply_overrides,
    load_config
)

from .corpus import (
    build_vocabulary,
    encode_corpus,
    load_toy_corpus,
    read_corpus,
    read_vocabulary,
    tokenize
)

from .custom_types import (
    opath,
    tlist_any,
    tlist_str
)

from .denoiser import (
    ar_nll
)

from .exceptions import (
    CheckpointError,
    ConfigError,
    ValidationError
)

from .files_io import (
    read_jsonl,
    read_txt_lines,
    write_csv,
    write_json,
    write_jsonl
)

from .halting import (
    parse_grid,
    sweep
)

from .metrics import (
    evaluate,
    read_logprobs,
    sample_sets_from_records,
    write_report
)

from .plotting import (
    plot_dynamics,
    plot_sweep
)

from .sampler import (
    generate,
    generate_batch,
    sample_record,
    split_tokens
)

from .tracing import (
    dynamics,
    read_trace,
    trace_to_rows,
    write_trace
)

from .training import (
    load_ar_reference,
    load_denoiser,
    train,
    train_ar_reference
)

from .utilities import (
    get_thread_count
)


#############
# CONSTANTS #
#############

_default_noise_scales = '0.0,0.5,0.8,0.9,1.0,1.1,1.2'

_logger = getLogger(__name__)
_package_logger = getLogger('pyddlm')

_short_key_sections = ['train', 'model', 'corpus', 'ar', 'gen', 'halt', 'metrics']
_sweep_header = ['criterion', 'threshold', 'mean_halt_step', 'frac_halted', 'mean_ar_nll']


#############
# FUNCTIONS #
#############

def _configure_logging(verbose: bool, quiet: bool):

    level = DEBUG if verbose else (WARNING if quiet else INFO)

    if not any(getattr(handler, '_pyddlm', False) for handler in _package_logger.handlers):
        handler = StreamHandler(stderr)
        handler.setFormatter(Formatter('%(asctime)s %(levelname)s %(name)s: %(message)s'))
        handler._pyddlm = True
        _package_logger.addHandler(handler)

    _package_logger.setLevel(level)


def _gen_overrides(args: Namespace) -> tlist_str:

    mapping = [
        ('steps', 'gen.n_steps'),
        ('noise_scale', 'gen.noise_scale'),
        ('conditioning', 'gen.conditioning'),
        ('cond_len', 'gen.cond_len'),
        ('samples_per_prompt', 'gen.samples_per_prompt'),
        ('verbosity', 'gen.record'),
        ('seed', 'gen.seed'),
        ('halt', 'halt.kind'),
        ('e_t', 'halt.e_t'),
        ('d_t', 'halt.d_t'),
        ('patience', 'halt.patience_p'),
        ('switch_threshold', 'halt.switch_threshold'),
        ('min_steps', 'halt.min_steps'),
        ('fixed_step', 'halt.fixed_step')
    ]

    return [f'{key}={json_dumps(getattr(args, name))}' for name, key in mapping if getattr(args, name, None) is not None]


def _load_config(args: Namespace, extra: tlist_str = None) -> RunConfig:

    config = load_config(args.config) if args.config is not None else RunConfig()
    overrides = list(args.set or [])

    if args.run_dir is not None:
        overrides.append(f'run_dir={json_dumps(args.run_dir)}')

    overrides.extend(extra or [])

    return apply_overrides(config, overrides) if len(overrides) > 0 else config


def _prompt_ids(line: str, vocab) -> list:

    return [vocab.index(token) for token in tokenize(line, vocab.mode)]


def _resolve_key(config: RunConfig, key: str) -> str:

    if '.' in key:
        return key

    data = config.to_dict()

    if key in data:
        return key

    for section in _short_key_sections:
        if key in data[section]:
            return f'{section}.{key}'

    raise ConfigError(key, 'unknown key')


def _save_figure(figure, file_path: Path):

    figure.savefig(file_path, format='png')
    mplp.close(figure)

    _logger.info('Figure written to %s.', file_path)


def _trace_files(directory: opath) -> tlist_any:

    directory = Path(directory)

    if not directory.is_dir():
        raise FileNotFoundError(f'The trace directory "{directory}" does not exist.')

    files = sorted(directory.glob('*.jsonl'))

    if len(files) == 0:
        raise ValidationError(f'empty trace dir "{directory}"')

    return files


def build_parser() -> ArgumentParser:

    """
    The function builds the command-line parser with one subcommand per workflow step.
    """

    common = ArgumentParser(add_help=False)
    common.add_argument('--config', type=str, default=None, help='JSON configuration file.')
    common.add_argument('--set', type=str, action='append', metavar='SECTION.KEY=VALUE', help='Configuration override, repeatable.')
    common.add_argument('--run-dir', dest='run_dir', type=str, default=None, help='Run directory.')
    common.add_argument('--verbose', action='store_true', help='Log debug messages.')
    common.add_argument('--quiet', action='store_true', help='Log warnings and errors only.')

    parser = ArgumentParser(prog='pyddlm', description='Continuous diffusion language models with early exit.')
    subparsers = parser.add_subparsers(dest='command', required=True)

    p = subparsers.add_parser('train', parents=[common], help='Train a denoiser.')
    p.add_argument('--corpus', type=str, default=None, help='Corpus text file, one sequence per line.')
    p.add_argument('--ar', action='store_true', help='Also train the autoregressive reference.')
    p.add_argument('--grid', type=str, default=None, metavar='KEY=V1,V2', help='Train one child run per value.')
    p.add_argument('--resume', action='store_true', help='Resume from the newest checkpoint.')
    p.set_defaults(handler=cmd_train)

    p = subparsers.add_parser('generate', parents=[common], help='Generate samples and traces.')
    p.add_argument('--checkpoint', type=str, required=True, help='Denoiser checkpoint.')
    p.add_argument('--vocab', type=str, default=None, help='Vocabulary file that must match the checkpoint.')
    p.add_argument('--prompts', type=str, default=None, help='Prompts file, one prompt per line.')
    p.add_argument('--out', type=str, default=None, help='Output directory.')
    p.add_argument('--steps', type=int, default=None)
    p.add_argument('--noise-scale', dest='noise_scale', type=float, default=None)
    p.add_argument('--conditioning', type=str, default=None, choices=['unconditional', 'prefix', 'enclosed'])
    p.add_argument('--cond-len', dest='cond_len', type=int, default=None)
    p.add_argument('--samples-per-prompt', dest='samples_per_prompt', type=int, default=None)
    p.add_argument('--verbosity', type=str, default=None, choices=['stats', 'stats+states'])
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--halt', type=str, default=None, choices=['none', 'entropy', 'patience', 'kl', 'fixed'])
    p.add_argument('--e_t', type=float, default=None)
    p.add_argument('--d_t', type=float, default=None)
    p.add_argument('--patience', type=int, default=None)
    p.add_argument('--switch_threshold', type=int, default=None)
    p.add_argument('--min_steps', type=int, default=None)
    p.add_argument('--fixed_step', type=int, default=None)
    p.set_defaults(handler=cmd_generate)

    p = subparsers.add_parser('sweep', parents=[common], help='Replay halting criteria over recorded traces.')
    p.add_argument('--traces', type=str, required=True, help='Directory of traces.')
    p.add_argument('--grid', type=str, required=True, help='Threshold grid, e.g. "entropy=0.1,0.5 fixed=100:1000:100".')
    p.add_argument('--ar-checkpoint', dest='ar_checkpoint', type=str, default=None, help='Reference checkpoint for the AR-NLL column.')
    p.add_argument('--out', type=str, default=None, help='Output CSV file.')
    p.add_argument('--plot', action='store_true', help='Write a PNG figure next to the CSV file.')
    p.set_defaults(handler=cmd_sweep)

    p = subparsers.add_parser('analyze', parents=[common], help='Compute the per-step dynamics of generation runs.')
    p.add_argument('--trace', type=str, default=None, help='Trace file.')
    p.add_argument('--checkpoint', type=str, default=None, help='Denoiser checkpoint; regenerates one run per noise scale.')
    p.add_argument('--noise-scales', dest='noise_scales', type=str, default=None, help=f'Comma-separated initial noise scales (default: {_default_noise_scales}).')
    p.add_argument('--prompt', type=str, default=None, help='Prompt text used with --noise-scales.')
    p.add_argument('--out', type=str, default=None, help='Output CSV file, or directory with --noise-scales.')
    p.add_argument('--plot', action='store_true', help='Write PNG figures next to the CSV files.')
    p.set_defaults(handler=cmd_analyze)

    p = subparsers.add_parser('eval', parents=[common], help='Compute sample quality and diversity metrics.')
    p.add_argument('samples', type=str, nargs='+', help='Samples files.')
    p.add_argument('--ar-checkpoint', dest='ar_checkpoint', type=str, default=None, help='Reference checkpoint.')
    p.add_argument('--logprobs', type=str, default=None, help='Imported per-token log-probabilities.')
    p.add_argument('--out', type=str, default=None, help='Output CSV file.')
    p.set_defaults(handler=cmd_eval)

    p = subparsers.add_parser('trace-to-csv', parents=[common], help='Convert a trace to one CSV row per step.')
    p.add_argument('trace', type=str, help='Trace file.')
    p.add_argument('--out', type=str, default=None, help='Output CSV file.')
    p.set_defaults(handler=cmd_trace_to_csv)

    return parser


def cmd_analyze(args: Namespace) -> int:

    config = _load_config(args)

    if args.checkpoint is None:

        if args.noise_scales is not None:
            raise ValidationError('The --noise-scales option requires --checkpoint.')

        if args.trace is None:
            raise ValidationError('The analyze command requires --trace or --checkpoint.')

        trace_ = read_trace(args.trace)
        out = Path(args.out) if args.out is not None else Path(args.trace).with_suffix('.dynamics.csv')

        header, rows = dynamics(trace_)
        write_csv(out, header, rows)
        _logger.info('Dynamics written to %s.', out)

        if args.plot:
            figure, _ = plot_dynamics(trace_)
            _save_figure(figure, out.with_suffix('.png'))

        return 0

    model, _, vocab = load_denoiser(args.checkpoint)
    noise_scales = args.noise_scales if args.noise_scales is not None else _default_noise_scales
    scales = [float(value) for value in noise_scales.split(',') if len(value.strip()) > 0]
    prompt = _prompt_ids(args.prompt, vocab) if args.prompt is not None else None
    halt = HaltConfig()
    out = Path(args.out) if args.out is not None else Path(config.run_dir) / 'analysis'

    for scale in scales:

        cfg = replace(config.gen, noise_scale=scale, record='stats+states')
        result = generate(model, cfg, halt, prompt, run_id=f'noise={scale:g}', checkpoint=str(args.checkpoint))

        file_path = out / f'dynamics_noise={scale:g}.csv'
        header, rows = dynamics(result.trace)
        write_csv(file_path, header, rows)
        _logger.info('Dynamics for noise scale %g written to %s.', scale, file_path)

        if args.plot:
            figure, _ = plot_dynamics(result.trace)
            _save_figure(figure, file_path.with_suffix('.png'))

    return 0


def cmd_eval(args: Namespace) -> int:

    config = _load_config(args)

    records = []

    for file_path in args.samples:
        records.extend(read_jsonl(file_path))

    sets, vocab_id = sample_sets_from_records(records)

    ref = None
    logprobs = None

    if args.logprobs is not None:
        logprobs = read_logprobs(args.logprobs)
    elif args.ar_checkpoint is not None:

        ref, _, vocab = load_ar_reference(args.ar_checkpoint)

        if vocab.fingerprint != vocab_id:
            raise CheckpointError(f'The reference checkpoint "{args.ar_checkpoint}" uses a different vocabulary than the samples.')

    reports = evaluate(sets, ref, logprobs, config.metrics)
    out = Path(args.out) if args.out is not None else Path(config.run_dir) / 'metrics.csv'

    write_report(reports, out)
    _logger.info('Metric report written to %s.', out)

    return 0


def cmd_generate(args: Namespace) -> int:

    config = _load_config(args, _gen_overrides(args))
    model, header, vocab = load_denoiser(args.checkpoint)

    if args.vocab is not None and read_vocabulary(args.vocab, vocab.mode) != vocab:
        raise CheckpointError(f'The vocabulary "{args.vocab}" does not match the checkpoint "{args.checkpoint}".')

    if args.prompts is not None:
        prompts = [_prompt_ids(line, vocab) for line in read_txt_lines(args.prompts) if len(line.strip()) > 0]
    else:
        prompts = [None]

    out = Path(args.out) if args.out is not None else Path(config.run_dir) / 'samples'
    results = generate_batch(model, config.gen, config.halt, prompts, checkpoint=str(args.checkpoint))

    records = []
    per_prompt = config.gen.samples_per_prompt

    for index, result in enumerate(results):

        p, s = divmod(index, per_prompt)
        trace_path = out / 'traces' / f'p{p:d}_s{s:d}.jsonl'

        write_trace(result.trace, trace_path)
        records.append(sample_record(result, vocab, config.halt, p, s, str(trace_path)))

    write_jsonl(out / 'samples.jsonl', records)
    write_json(out / 'config.json', config.to_dict())

    halted = sum(1 for result in results if result.halted_early)
    _logger.info('%d samples written to %s (%d halted early, mean halting step %.1f).', len(results), out, halted, np.mean([r.halt_step for r in results]))

    return 0


def cmd_sweep(args: Namespace) -> int:

    config = _load_config(args)
    files = _trace_files(args.traces)
    traces = [read_trace(file_path) for file_path in files]
    cfgs = parse_grid(args.grid, config.halt)

    ar_nll_fn = None

    if args.ar_checkpoint is not None:

        ref, _, _ = load_ar_reference(args.ar_checkpoint)

        def ar_nll_fn(trace_, step):
            prefix, continuation = split_tokens(trace_.tokens_at(step), trace_.cond_mask)
            return ar_nll(ref, prefix, continuation)

    rows = sweep(traces, cfgs, ar_nll_fn)
    out = Path(args.out) if args.out is not None else Path(config.run_dir) / 'sweep.csv'

    write_csv(out, _sweep_header, [row._asdict() for row in rows])
    _logger.info('Sweep of %d configurations over %d traces written to %s.', len(cfgs), len(traces), out)

    if args.plot:
        figure, _ = plot_sweep(rows)
        _save_figure(figure, out.with_suffix('.png'))

    return 0


def cmd_trace_to_csv(args: Namespace) -> int:

    trace_ = read_trace(args.trace)
    out = Path(args.out) if args.out is not None else Path(args.trace).with_suffix('.csv')

    header, rows = trace_to_rows(trace_)
    write_csv(out, header, rows)
    _logger.info('Trace rows written to %s.', out)

    return 0


def cmd_train(args: Namespace) -> int:

    extra = [f'corpus.path={json_dumps(args.corpus)}'] if args.corpus is not None else []
    config = _load_config(args, extra)

    text = read_corpus(config.corpus.path) if config.corpus.path is not None else load_toy_corpus()
    vocab = build_vocabulary(text, config.corpus.mode, config.corpus.max_size)
    corpus = encode_corpus(text, vocab, config.corpus.seq_len)

    _logger.info('Corpus of %d sequences, vocabulary of %d tokens.', corpus.shape[0], vocab.size)

    runs = [config]

    if args.grid is not None:

        if '=' not in args.grid:
            raise ConfigError(args.grid, 'The grid must have the form "key=v1,v2".')

        key, values = args.grid.split('=', 1)
        key_path = _resolve_key(config, key.strip())
        runs = []

        for value in (v.strip() for v in values.split(',') if len(v.strip()) > 0):
            child = str(Path(config.run_dir) / f'{key.strip()}={value}')
            runs.append(apply_overrides(config, [f'{key_path}={value}', f'run_dir={json_dumps(child)}']))

    progress = not args.quiet and stderr.isatty()

    for run in runs:

        checkpoint = train(run, corpus, vocab, resume=args.resume, progress=progress)
        _logger.info('Training finished: %s.', checkpoint)

        if args.ar or run.ar.enabled:
            reference = train_ar_reference(run, corpus, vocab, progress=progress)
            _logger.info('Reference training finished: %s.', reference)

    return 0


def main(argv: tlist_str = None) -> int:

    """
    The function runs the command-line interface and returns the exit code: 0 on success,
    2 on usage, configuration or missing-input errors, 1 on any other failure.
    """

    parser = build_parser()

    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    _configure_logging(args.verbose, args.quiet)

    try:
        torch.set_num_threads(get_thread_count())
        return args.handler(args)
    except (ValidationError, ConfigError) as e:
        _logger.error('%s', e)
        return 2
    except FileNotFoundError as e:
        _logger.error('Missing input: %s', e.filename if e.filename is not None else e)
        return 2
    except Exception as e:
        _logger.error('%s: %s', type(e).__name__, e)
        _logger.debug('Traceback:', exc_info=True)
        return 1
