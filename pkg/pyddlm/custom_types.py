# -*- coding: utf-8 -*-

__all__ = [
    # Generic
    'obool', 'ofloat', 'oint', 'ostr',
    'tany', 'texception',
    'tarray', 'oarray',
    'ttensor', 'otensor',
    'tpath', 'opath',
    # Lists
    'tlist_any', 'olist_any',
    'tlist_int', 'olist_int',
    'tlist_str', 'olist_str',
    # Lists of Lists
    'tlists_int', 'olists_int',
    # Specific
    'tconfig_dict', 'oconfig_dict',
    'tcsv_rows', 'ocsv_rows',
    'tgen', 'ogen',
    'tlimit_float', 'olimit_float',
    'tlimit_int', 'olimit_int',
    'tplot', 'oplot',
    'trand', 'orand',
    'tref', 'oref',
    'tstate_dict', 'ostate_dict',
    'ttrace', 'otrace'
]


###########
# IMPORTS #
###########

# Standard

from os import (
    PathLike
)

from typing import (
    Any,
    Dict,
    List,
    Optional,
    Tuple,
    TypeVar,
    Union
)

# Libraries

import matplotlib.pyplot as mplp
import numpy as np
import numpy.random as npr
import torch


#########
# TYPES #
#########

# Generic

obool = Optional[bool]
ofloat = Optional[float]
oint = Optional[int]
ostr = Optional[str]

tany = Any
texception = Exception

tarray = np.ndarray
oarray = Optional[tarray]

ttensor = torch.Tensor
otensor = Optional[ttensor]

tpath = Union[str, PathLike]
opath = Optional[tpath]

# Lists

tlist_any = List[tany]
olist_any = Optional[tlist_any]

tlist_int = List[int]
olist_int = Optional[tlist_int]

tlist_str = List[str]
olist_str = Optional[tlist_str]

# Lists of Lists

tlists_int = List[tlist_int]
olists_int = Optional[tlists_int]

# Specific

tconfig_dict = Dict[str, tany]
oconfig_dict = Optional[tconfig_dict]

tcsv_rows = List[Dict[str, tany]]
ocsv_rows = Optional[tcsv_rows]

tgen = torch.Generator
ogen = Optional[tgen]

tlimit_float = Tuple[float, bool]
olimit_float = Optional[tlimit_float]

tlimit_int = Tuple[int, bool]
olimit_int = Optional[tlimit_int]

tplot = Tuple[mplp.Figure, tany]
oplot = Optional[tplot]

trand = npr.RandomState
orand = Optional[trand]

tref = TypeVar('ARReference')
oref = Optional[tref]

tstate_dict = Dict[str, tarray]
ostate_dict = Optional[tstate_dict]

ttrace = TypeVar('GenerationTrace')
otrace = Optional[ttrace]
