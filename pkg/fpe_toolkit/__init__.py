"""
FPE Toolkit
-----------

Fixed parameter expansion of sparse MLPs: masked models, neuron
splitting under a fixed non-zero budget, DNF benchmarks, interference
metrics and coverage bounds.
"""

__title__ = "FPE-Toolkit"
__author__ = "FPE Toolkit contributors"
__license__ = "GPL-3.0"
__version__ = "1.0.0"

from .core_math import *
from .data_io import *
from .dnf_gen import *
from .enums import *
from .errors import *
from .fpe_expand import *
from .interference_metrics import *
from .masked_net import *
from .theory_bounds import *
from .training import *
