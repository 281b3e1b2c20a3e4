"""48 kHz mono WAV reading and writing (PCM16 or IEEE float32)."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import DataError
from .frontend import SAMPLE_RATE, Waveform

PCM16_SCALE = 32768.0


def read_wav(path) -> tuple[Waveform, str]:
    """Returns the waveform and its sample format ("pcm16" or "float32")."""
    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", wavfile.WavFileWarning)
            rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    except (ValueError, EOFError, OSError) as exc:
        raise DataError(f"{path}: not a readable RIFF/WAVE file ({exc})") from exc
    if data.ndim != 1:
        raise DataError(f"{path}: expected 1 channel (mono), got {data.shape[1]} channels")
    if rate != SAMPLE_RATE:
        raise DataError(f"{path}: expected {SAMPLE_RATE} Hz, got {rate} Hz (no resampling is done)")
    if data.dtype == np.int16:
        return Waveform(data.astype(np.float64) / PCM16_SCALE), "pcm16"
    if data.dtype == np.float32:
        samples = data.astype(np.float64)
        if not np.all(np.isfinite(samples)):
            raise DataError(f"{path}: contains NaN or Inf samples")
        return Waveform(samples), "float32"
    raise DataError(f"{path}: unsupported sample format {data.dtype}; use 16-bit PCM or 32-bit float")


def write_wav(path, w: Waveform, fmt: str = "float32") -> None:
    x = np.asarray(w.samples)
    if fmt == "float32":
        data = x.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(x * PCM16_SCALE), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    wavfile.write(Path(path), w.sample_rate, data)
