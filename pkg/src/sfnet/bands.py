"""Sub-band split/fusion and polar spectral algebra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, StateError
from .frontend import Spectrogram


@dataclass(frozen=True)
class BandLayout:
    """Inclusive bin ranges of the three sub-bands; neighbours share one bin."""

    lb_range: tuple[int, int] = (0, 160)
    mb_range: tuple[int, int] = (160, 320)
    hb_range: tuple[int, int] = (320, 480)

    def __post_init__(self):
        ranges = self.ranges
        if ranges[0][0] != 0:
            raise DimensionError("low band must start at bin 0")
        for (_, hi), (lo, _) in zip(ranges, ranges[1:]):
            if hi != lo:
                raise DimensionError("adjacent bands must share exactly one bin")
        widths = {hi - lo + 1 for lo, hi in ranges}
        if len(widths) != 1:
            raise DimensionError("all bands must have the same width")

    @property
    def ranges(self) -> tuple[tuple[int, int], ...]:
        return (self.lb_range, self.mb_range, self.hb_range)

    @property
    def band_bins(self) -> int:
        return self.lb_range[1] - self.lb_range[0] + 1

    @property
    def full_bins(self) -> int:
        return self.hb_range[1] + 1

    @property
    def overlap_bins(self) -> tuple[int, int]:
        return (self.lb_range[1], self.mb_range[1])

    def to_dict(self) -> dict:
        return {"lb_range": list(self.lb_range), "mb_range": list(self.mb_range),
                "hb_range": list(self.hb_range)}


@dataclass(frozen=True)
class SubBandSet:
    lb: Spectrogram
    mb: Spectrogram
    hb: Spectrogram

    def __post_init__(self):
        if not self.lb.n_frames == self.mb.n_frames == self.hb.n_frames:
            raise DimensionError("sub-bands have different frame counts")
        if not self.lb.compressed == self.mb.compressed == self.hb.compressed:
            raise StateError("sub-bands disagree on the compressed flag")


@dataclass(frozen=True)
class MagPhase:
    mag: np.ndarray
    phase: np.ndarray


def split_bands(full: Spectrogram, layout: BandLayout = BandLayout()) -> SubBandSet:
    if full.n_bins != layout.full_bins:
        raise DimensionError(f"expected {layout.full_bins} bins, got {full.n_bins}")
    parts = [full.with_data(full.data[:, lo : hi + 1].copy(), length=full.length)
             for lo, hi in layout.ranges]
    return SubBandSet(*parts)


def fuse_bands(bands: SubBandSet, layout: BandLayout = BandLayout()) -> Spectrogram:
    """Stack the bands along frequency, averaging each shared boundary bin."""
    return bands.lb.with_data(fuse_arrays(bands.lb.data, bands.mb.data, bands.hb.data, layout))


def fuse_arrays(lb: np.ndarray, mb: np.ndarray, hb: np.ndarray,
                layout: BandLayout = BandLayout()) -> np.ndarray:
    """Array form of :func:`fuse_bands`; works on the last axis of any leading shape."""
    w = layout.band_bins
    for name, b in (("lb", lb), ("mb", mb), ("hb", hb)):
        if b.shape[-1] != w:
            raise DimensionError(f"{name} has {b.shape[-1]} bins, expected {w}")
    if not lb.shape[:-1] == mb.shape[:-1] == hb.shape[:-1]:
        raise DimensionError("sub-bands have different frame counts")
    out = np.empty(lb.shape[:-1] + (layout.full_bins,), dtype=np.result_type(lb, mb, hb))
    (l0, l1), (m0, m1), (h0, h1) = layout.ranges
    out[..., l0:l1] = lb[..., :-1]
    out[..., l1] = (lb[..., -1] + mb[..., 0]) / 2
    out[..., m0 + 1 : m1] = mb[..., 1:-1]
    out[..., m1] = (mb[..., -1] + hb[..., 0]) / 2
    out[..., h0 + 1 : h1 + 1] = hb[..., 1:]
    return out


def mag_phase(s: Spectrogram | np.ndarray) -> MagPhase:
    z = s.data if isinstance(s, Spectrogram) else np.asarray(s)
    mag = np.abs(z)
    # np.angle(0) is already 0, but -0.0 imag parts would give pi
    phase = np.where(mag > 0, np.angle(z), 0.0)
    return MagPhase(mag, phase)


def apply_gain_with_phase(mag: np.ndarray, gain: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """Rebuild a complex spectrum from ``mag * gain`` and a given phase.

    Negative products are clamped to zero so the result stays a polar form.
    Returns a bare complex array; callers wrap it in a Spectrogram if needed.
    """
    if not mag.shape == gain.shape == phase.shape:
        raise DimensionError(f"shape mismatch: {mag.shape}, {gain.shape}, {phase.shape}")
    est = np.maximum(mag * gain, 0.0)
    return est * np.cos(phase) + 1j * (est * np.sin(phase))


def add_residual(coarse: Spectrogram, residual: Spectrogram) -> Spectrogram:
    if coarse.compressed != residual.compressed:
        raise StateError("coarse and residual disagree on the compressed flag")
    if coarse.data.shape != residual.data.shape:
        raise DimensionError(f"shape mismatch: {coarse.data.shape} vs {residual.data.shape}")
    return coarse.with_data(coarse.data + residual.data)
