"""SF-Net: 48 kHz full-band speech enhancement by sub-band fusion."""

from .bands import BandLayout, fuse_bands, split_bands
from .errors import ConfigError, DataError, DimensionError, DomainError, SFNetError, StateError
from .frontend import FrontendConfig, Spectrogram, Waveform, istft, stft
from .metrics import LossConfig, loss_full, loss_lb, mix_at_snr, sdr, ssnr
from .model import ArchConfig, EnhancerStream, SFNet, create_stream, enhance_offline, process_samples
from .weights import WeightSet, complexity_report, init_weights, load, save

__version__ = "0.1.0"

__all__ = [
    "ArchConfig", "BandLayout", "ConfigError", "DataError", "DimensionError", "DomainError",
    "EnhancerStream", "FrontendConfig", "LossConfig", "SFNet", "SFNetError", "Spectrogram",
    "StateError", "Waveform", "WeightSet", "complexity_report", "create_stream", "enhance_offline",
    "fuse_bands", "init_weights", "istft", "load", "loss_full", "loss_lb", "mix_at_snr",
    "process_samples", "save", "sdr", "split_bands", "ssnr", "stft",
]
