# -*- coding: utf-8 -*-


###########
# IMPORTS #
###########

# Libraries

import matplotlib.pyplot as mplp
import numpy as np
import torch

from pytest import (
    raises
)

# Internal

from pyddlm.diffusion import (
    NoisyState
)

from pyddlm.exceptions import (
    ValidationError
)

from pyddlm.halting import (
    StepStats,
    SweepRow
)

from pyddlm.plotting import (
    plot_dynamics,
    plot_sweep
)

from pyddlm.tracing import (
    GenerationTrace,
    new_trace,
    record_step
)


###########
# HELPERS #
###########

def _random_trace(seed, steps, verbosity):

    rng = np.random.RandomState(seed)
    generator = torch.Generator().manual_seed(seed)

    cond_mask = np.array([True, False, False, False])
    trace_ = new_trace('plot', {}, seed, None, steps, cond_mask, verbosity)

    for step in range(steps + 1):

        t = 10.0 * (1.0 - step / (steps + 1))
        X = t * torch.randn((4, 3), dtype=torch.float64, generator=generator)
        x0_hat = torch.randn((4, 3), dtype=torch.float64, generator=generator)
        tokens = rng.randint(0, 5, size=4)

        if step == 0:
            stats = StepStats(step, float(rng.uniform(0.0, 1.6)))
        else:
            stats = StepStats(step, float(rng.uniform(0.0, 1.6)), float(rng.uniform(0.0, 0.5)), int(rng.randint(0, 4)))

        record_step(trace_, NoisyState(X, t, cond_mask), x0_hat, stats, tokens)

    return trace_


#########
# TESTS #
#########

def test_plot_dynamics(seed, steps, verbosity):

    trace_ = _random_trace(seed, steps, verbosity)

    figure, axes = plot_dynamics(trace_)

    assert axes.shape == (2, 2)

    ylabel = axes[1, 1].get_ylabel()
    expected = 'Cosine to Final Step' if verbosity == 'stats+states' else 'WER to Final Step'

    mplp.close(figure)

    assert ylabel == expected


def test_plot_sweep(rows, with_nll):

    rows = [SweepRow(*row) for row in rows]

    figure, ax = plot_sweep(rows, dpi=75)

    lines = len(ax.get_lines())
    ylabel = ax.get_ylabel()

    mplp.close(figure)

    assert lines == len({row.criterion for row in rows})
    assert ylabel == ('AR-NLL' if with_nll else 'Fraction Halted')


def test_plot_validation():

    with raises(ValidationError):
        plot_dynamics(GenerationTrace({'n_steps': 0}, []))

    with raises(ValidationError):
        plot_dynamics([1, 2, 3])

    with raises(ValidationError):
        plot_sweep([])

    with raises(ValidationError):
        plot_sweep([SweepRow('fixed', 1.0, 1.0, 1.0, None)], dpi=123)
