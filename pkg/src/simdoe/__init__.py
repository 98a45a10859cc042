"""simdoe: plan, execute and analyze designed simulation experiments."""

from . import (analysis, casestudies, core, design, harness, heredity, plots,
               slstudy, special, trpd)

__version__ = "0.1.0"
