"""Single-channel two-source separation with time-frequency masks.

Submodules: :mod:`~tfmsep.audio`, :mod:`~tfmsep.spectral`, :mod:`~tfmsep.masking`,
:mod:`~tfmsep.neuralnet`, :mod:`~tfmsep.fastica`, :mod:`~tfmsep.bsseval` and
:mod:`~tfmsep.harness`.
"""
from ._backend import BACKEND
from .audio import AudioSignal
from .masking import Mask
from .spectral import Spectrogram, StftParams

__version__ = "0.1.0"
__all__ = ["AudioSignal", "BACKEND", "Mask", "Spectrogram", "StftParams"]
