"""Waveform <-> compressed complex spectrogram conversion.

Framing convention: the signal is left-padded with ``window_len - hop`` zeros,
so frame ``t`` spans original samples ``[t*hop - (window_len - hop),
t*hop + hop)``.  Every original sample is then covered by exactly two frames,
which is what lets the streaming engine reproduce the offline output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataError, DimensionError, StateError

SAMPLE_RATE = 48000

# synthesis samples whose window-square sum falls below this are emitted as 0
NORM_FLOOR = 1e-8


@dataclass(frozen=True)
class FrontendConfig:
    window_len: int = 960
    hop: int = 480
    fft_size: int = 960
    beta: float = 0.5
    window: str = "hann"
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if self.window != "hann":
            raise ConfigError(f"unsupported window {self.window!r}; only 'hann'")
        if self.window_len <= 0 or 2 * self.hop != self.window_len:
            raise ConfigError("hop must be exactly half the window length")
        if self.fft_size < self.window_len:
            raise ConfigError("fft_size must be >= window_len")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigError(f"beta must lie in (0, 1], got {self.beta}")
        if self.sample_rate != SAMPLE_RATE:
            raise ConfigError(f"sample_rate must be {SAMPLE_RATE}, got {self.sample_rate}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def bin_hz(self) -> float:
        return self.sample_rate / self.fft_size

    @property
    def left_pad(self) -> int:
        return self.window_len - self.hop

    def num_frames(self, n_samples: int) -> int:
        """Frames needed so that every one of ``n_samples`` gets full OLA coverage."""
        if n_samples < 1:
            raise DataError("waveform must contain at least one sample")
        return (n_samples - 1) // self.hop + 2

    def to_dict(self) -> dict:
        return {
            "window_len": self.window_len,
            "hop": self.hop,
            "fft_size": self.fft_size,
            "beta": self.beta,
            "window": self.window,
            "sample_rate": self.sample_rate,
        }


def hann(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionError(f"waveform must be 1-D (mono), got shape {x.shape}")
        object.__setattr__(self, "samples", x)

    def __len__(self) -> int:
        return self.samples.shape[0]

    def validate(self, cfg: FrontendConfig | None = None) -> None:
        rate = SAMPLE_RATE if cfg is None else cfg.sample_rate
        if self.sample_rate != rate:
            raise ConfigError(f"expected {rate} Hz audio, got {self.sample_rate} Hz")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("waveform contains NaN or Inf samples")


@dataclass(frozen=True)
class Spectrogram:
    """T x F complex spectrogram.

    ``length`` remembers the source waveform length so that ``istft`` can
    trim the padding back off; it is ``None`` for synthetic spectrograms.
    """

    data: np.ndarray
    compressed: bool = False
    bin_hz: float = SAMPLE_RATE / 960
    length: int | None = None

    def __post_init__(self):
        d = np.asarray(self.data)
        if d.ndim != 2:
            raise DimensionError(f"spectrogram data must be T x F, got shape {d.shape}")
        object.__setattr__(self, "data", d.astype(np.complex128, copy=False))

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, **changes) -> "Spectrogram":
        return replace(self, data=data, **changes)


def frame_signal(padded: np.ndarray, cfg: FrontendConfig, n_frames: int) -> np.ndarray:
    idx = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.window_len)[None, :]
    return padded[idx]


def analyze_frames(frames: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """Window and transform raw frames (..., window_len) to (..., n_bins)."""
    return np.fft.rfft(frames * hann(cfg.window_len), n=cfg.fft_size, axis=-1)


def synthesize_frames(spec: np.ndarray, cfg: FrontendConfig) -> np.ndarray:
    """Inverse transform (..., n_bins) and apply the synthesis window."""
    grains = np.fft.irfft(spec, n=cfg.fft_size, axis=-1)[..., : cfg.window_len]
    return grains * hann(cfg.window_len)


def hop_normalizer(cfg: FrontendConfig) -> np.ndarray:
    """Window-square sum seen by each sample of one hop (two overlapping frames)."""
    w2 = hann(cfg.window_len) ** 2
    return w2[: cfg.hop] + w2[cfg.hop :]


def stft(w: Waveform, cfg: FrontendConfig = FrontendConfig()) -> Spectrogram:
    w.validate(cfg)
    n = len(w)
    n_frames = cfg.num_frames(n)
    padded = np.zeros(cfg.hop * (n_frames + 1))
    padded[cfg.left_pad : cfg.left_pad + n] = w.samples
    frames = frame_signal(padded, cfg, n_frames)
    return Spectrogram(analyze_frames(frames, cfg), compressed=False, bin_hz=cfg.bin_hz, length=n)


def istft(s: Spectrogram, cfg: FrontendConfig = FrontendConfig(), length: int | None = None) -> Waveform:
    if s.compressed:
        raise StateError("istft needs a decompressed spectrogram; call decompress first")
    if s.n_bins != cfg.n_bins:
        raise DimensionError(f"expected {cfg.n_bins} bins, got {s.n_bins}")
    if length is None:
        length = s.length if s.length is not None else max(0, (s.n_frames - 1) * cfg.hop)
    grains = synthesize_frames(s.data, cfg)
    total = cfg.hop * (s.n_frames + 1)
    out = np.zeros(total)
    norm = np.zeros(total)
    w2 = hann(cfg.window_len) ** 2
    for t in range(s.n_frames):
        sl = slice(t * cfg.hop, t * cfg.hop + cfg.window_len)
        out[sl] += grains[t]
        norm[sl] += w2
    safe = norm >= NORM_FLOOR
    out[safe] /= norm[safe]
    out[~safe] = 0.0
    y = out[cfg.left_pad : cfg.left_pad + length]
    if y.shape[0] < length:
        y = np.pad(y, (0, length - y.shape[0]))
    return Waveform(y, cfg.sample_rate)


def compress(s: Spectrogram, beta: float = 0.5) -> Spectrogram:
    """Raise magnitudes to ``beta`` keeping the phase."""
    if s.compressed:
        raise StateError("spectrogram is already compressed")
    return s.with_data(power_magnitude(s.data, beta), compressed=True)


def decompress(s: Spectrogram, beta: float = 0.5) -> Spectrogram:
    if not s.compressed:
        raise StateError("spectrogram is not compressed")
    return s.with_data(power_magnitude(s.data, 1.0 / beta), compressed=False)


def power_magnitude(z: np.ndarray, p: float) -> np.ndarray:
    if p == 1.0:
        return z.copy()
    mag = np.abs(z)
    scale = np.zeros_like(mag)
    nz = mag > 0
    scale[nz] = mag[nz] ** (p - 1.0)
    return z * scale
