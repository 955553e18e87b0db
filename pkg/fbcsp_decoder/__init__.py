"""
FBCSP Decoder - filter-bank common spatial patterns with shrinkage LDA for
offline EEG decoding.
"""

from .classifier import RldaClassifier
from .data_loader import TrialSet, load_dataset, save_dataset
from .errors import ConfigError, DatasetError, DecoderError, LeakageError, NumericalError
from .filters import BandSpec, FilterBank, build_filter_bank
from .pipeline import make_folds, run_band_sweep, run_fbcsp
from .preprocessor import SignalPreprocessor
from .synth import SynthConfig, generate

__version__ = "1.0.0"
__all__ = [
    "RldaClassifier", "SignalPreprocessor", "TrialSet", "BandSpec", "FilterBank", "SynthConfig",
    "load_dataset", "save_dataset", "build_filter_bank", "make_folds", "run_band_sweep", "run_fbcsp",
    "generate", "DecoderError", "ConfigError", "DatasetError", "LeakageError", "NumericalError",
]
