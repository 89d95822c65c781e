# -*- coding: utf-8 -*-

__all__ = [
    'plot_dynamics',
    'plot_sweep'
]


###########
# IMPORTS #
###########

# Standard

from inspect import (
    trace
)

# Libraries

import matplotlib.pyplot as mplp
import numpy as np

# Internal

from .custom_types import (
    oplot,
    tlist_any,
    ttrace
)

from .tracing import (
    GenerationTrace,
    dynamics
)

from .utilities import (
    generate_validation_error
)

from .validation import (
    validate_dpi
)


#############
# CONSTANTS #
#############

_colors = ['#80B1D3', '#FB8072', '#B3DE69', '#BEBADA', '#FDB462', '#8DD3C7', '#FFED6F', '#FCCDE5']


#############
# FUNCTIONS #
#############

def _series(rows: tlist_any, key: str) -> tuple:

    points = [(row['step'], row[key]) for row in rows if row.get(key) is not None]

    if len(points) == 0:
        return np.array([]), np.array([])

    steps, values = zip(*points)

    return np.array(steps, dtype=float), np.array(values, dtype=float)


def _validate_sweep_rows(value: tlist_any) -> tlist_any:

    value = list(value)

    if len(value) == 0:
        raise ValueError('The "@arg@" parameter must contain at least one row.')

    return value


def _validate_trace(value: ttrace) -> GenerationTrace:

    if not isinstance(value, GenerationTrace):
        raise TypeError('The "@arg@" parameter must be a generation trace.')

    if len(value) == 0:
        raise ValueError('The "@arg@" parameter must contain at least one step record.')

    return value


def plot_dynamics(trace_: ttrace, dpi: int = 100) -> oplot:

    """
    The function plots the per-step dynamics of a generation run: token switches, entropy, embedding norms
    and, when state snapshots are available, the cosines to the final step.

    | **Notes:**

    * If `Matplotlib <https://matplotlib.org/>`_ is in `interactive mode <https://matplotlib.org/stable/users/interactive.html>`_, the plot is immediately displayed and the function does not return the plot handles.

    :param trace_: the generation trace.
    :param dpi: the resolution of the plot expressed in dots per inch.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        trace_ = _validate_trace(trace_)
        dpi = validate_dpi(dpi)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    header, rows = dynamics(trace_)

    figure, axes = mplp.subplots(2, 2, dpi=dpi, figsize=(11.0, 8.0))
    ax_switches, ax_entropy, ax_norms, ax_cosines = axes.ravel()

    x, y = _series(rows, 'switches')
    ax_switches.plot(x, y, color=_colors[0])
    ax_switches.set_ylabel('Token Switches', fontsize=11.0)

    x, y = _series(rows, 'entropy')
    ax_entropy.plot(x, y, color=_colors[1])
    ax_entropy.set_ylabel('Entropy (nats)', fontsize=11.0)

    x, y = _series(rows, 'l2_X')
    ax_norms.plot(x, y, color=_colors[2], label='X')
    x, y = _series(rows, 'l2_X0hat')
    ax_norms.plot(x, y, color=_colors[3], label='X0 Estimate')
    ax_norms.set_ylabel('Mean L2 Norm', fontsize=11.0)
    ax_norms.legend(loc='upper right')

    if 'cos_score_final' in header:
        x, y = _series(rows, 'cos_score_final')
        ax_cosines.plot(x, y, color=_colors[4], label='Score')
        x, y = _series(rows, 'cos_emb_final')
        ax_cosines.plot(x, y, color=_colors[5], label='Embedding')
        ax_cosines.set_ylabel('Cosine to Final Step', fontsize=11.0)
        ax_cosines.set_ylim(-1.05, 1.05)
        ax_cosines.legend(loc='lower right')
    else:
        x, y = _series(rows, 'wer_to_final')
        ax_cosines.plot(x, y, color=_colors[6])
        ax_cosines.set_ylabel('WER to Final Step', fontsize=11.0)

    for ax in axes.ravel():
        ax.set_xlabel('Steps', fontsize=11.0)
        ax.grid(which='major')

    figure.suptitle('Generation Dynamics', fontsize=15.0, fontweight='bold')
    figure.tight_layout()

    if mplp.isinteractive():  # pragma: no cover
        mplp.show(block=False)
        return None

    return figure, axes


def plot_sweep(rows: tlist_any, dpi: int = 100) -> oplot:

    """
    The function plots, for every halting criterion of a sweep, the reference NLL against the mean halting step.
    When the sweep carries no NLL values, the fraction of halted runs is plotted instead.

    | **Notes:**

    * If `Matplotlib <https://matplotlib.org/>`_ is in `interactive mode <https://matplotlib.org/stable/users/interactive.html>`_, the plot is immediately displayed and the function does not return the plot handles.

    :param rows: the sweep rows.
    :param dpi: the resolution of the plot expressed in dots per inch.
    :raises ValidationError: if any input argument is not compliant.
    """

    try:

        rows = _validate_sweep_rows(rows)
        dpi = validate_dpi(dpi)

    except Exception as e:  # pragma: no cover
        raise generate_validation_error(e, trace()) from None

    with_nll = all(row.mean_ar_nll is not None for row in rows)
    criteria = sorted({row.criterion for row in rows})

    figure, ax = mplp.subplots(dpi=dpi)

    for index, criterion in enumerate(criteria):

        selection = [row for row in rows if row.criterion == criterion]
        x = [row.mean_halt_step for row in selection]
        y = [row.mean_ar_nll if with_nll else row.frac_halted for row in selection]

        ax.plot(x, y, marker='o', color=_colors[index % len(_colors)], label=criterion)

    ax.set_xlabel('Mean Halting Step', fontsize=13.0)
    ax.set_ylabel('AR-NLL' if with_nll else 'Fraction Halted', fontsize=13.0)
    ax.grid(which='major')
    ax.legend(loc='best')
    ax.set_title('Early Exit Sweep', fontsize=15.0, fontweight='bold')

    if mplp.isinteractive():  # pragma: no cover
        mplp.show(block=False)
        return None

    return figure, ax
