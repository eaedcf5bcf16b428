"""Multi-band linear-predictive WaveRNN vocoder with block-sparse recurrent weights."""

from .config import RunConfig, bundled_config, load_config
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["RunConfig", "bundled_config", "load_config", "BACKEND", "__version__"]
