"""Multi-band multi-time LPC vocoder inference engine.

Core pieces: a conditioning-feature pipeline (Bark cepstrum to per-subband
LPC), a pseudo-QMF filter bank, block-sparse GRU inference kernels with a
compiled core and a NumPy fallback, the baseline and multi-band multi-time
sample loops, forward-pass attention math, and FLOP/RTF measurement.
"""

from . import kernels
from .errors import MmlpcError

__version__ = "0.1.0"

__all__ = ["MmlpcError", "kernels", "__version__"]
