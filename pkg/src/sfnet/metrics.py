"""Training losses with analytic gradients, evaluation metrics, and SNR mixing.

Losses work on compressed-domain spectra, the same representation the
networks see.  Gradients are taken with respect to the estimate and are
checked against central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .frontend import SAMPLE_RATE, Waveform

SSNR_FRAME = 960
SSNR_MIN_DB, SSNR_MAX_DB = -10.0, 35.0
SSNR_SILENCE = 1e-10
SDR_CAP_DB = 100.0
PEAK_LIMIT = 0.99


@dataclass(frozen=True)
class LossConfig:
    mu: float = 0.5
    alpha: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise DomainError(f"mu must lie in [0, 1], got {self.mu}")
        if self.alpha <= 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class LossBreakdown:
    l_ri: float = 0.0
    l_mag: float = 0.0
    l_lb: float = 0.0
    l_mb_mag: float = 0.0
    l_hb_mag: float = 0.0
    l_full: float = 0.0


def _same_shape(*arrays):
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise DimensionError(f"shape mismatch: {shape} vs {np.shape(a)}")


def _abs_grad(est: np.ndarray) -> np.ndarray:
    """d|z|/d(re, im) as a complex number re/|z| + j im/|z|; 0 where z == 0."""
    mag = np.abs(est)
    out = np.zeros_like(est, dtype=complex)
    nz = mag > 0
    out[nz] = est[nz] / mag[nz]
    return out


def loss_lb(est: np.ndarray, target: np.ndarray, cfg: LossConfig = LossConfig()):
    """Low-band loss mixing RI and magnitude squared errors.

    Returns ``(breakdown, grad)`` where ``grad`` has shape ``est.shape + (2,)``
    holding dL/dRe and dL/dIm.
    """
    _same_shape(est, target)
    est = np.asarray(est, dtype=complex)
    target = np.asarray(target, dtype=complex)
    diff = est - target
    l_ri = float(np.sum(diff.real ** 2) + np.sum(diff.imag ** 2))
    mag_err = np.abs(est) - np.abs(target)
    l_mag = float(np.sum(mag_err ** 2))
    l_lb = cfg.mu * l_ri + (1.0 - cfg.mu) * l_mag
    g = cfg.mu * 2.0 * diff + (1.0 - cfg.mu) * 2.0 * mag_err * _abs_grad(est)
    grad = np.stack([g.real, g.imag], axis=-1)
    return LossBreakdown(l_ri=l_ri, l_mag=l_mag, l_lb=l_lb, l_full=cfg.alpha * l_lb), grad


def loss_mag(est_mag: np.ndarray, target_mag: np.ndarray) -> tuple[float, np.ndarray]:
    """Squared Frobenius error of magnitudes and its gradient."""
    _same_shape(est_mag, target_mag)
    d = np.asarray(est_mag, dtype=float) - np.asarray(target_mag, dtype=float)
    return float(np.sum(d ** 2)), 2.0 * d


def loss_full(lb_est, lb_tgt, mb_mag_est, mb_mag_tgt, hb_mag_est, hb_mag_tgt,
              cfg: LossConfig = LossConfig()) -> LossBreakdown:
    return loss_full_grad(lb_est, lb_tgt, mb_mag_est, mb_mag_tgt, hb_mag_est, hb_mag_tgt, cfg)[0]


def loss_full_grad(lb_est, lb_tgt, mb_mag_est, mb_mag_tgt, hb_mag_est, hb_mag_tgt,
                   cfg: LossConfig = LossConfig()) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """Second-stage loss ``alpha * L_lb + L_mb + L_hb`` with gradients per input."""
    lb, g_lb = loss_lb(lb_est, lb_tgt, cfg)
    l_mb, g_mb = loss_mag(mb_mag_est, mb_mag_tgt)
    l_hb, g_hb = loss_mag(hb_mag_est, hb_mag_tgt)
    full = cfg.alpha * lb.l_lb + l_mb + l_hb
    out = LossBreakdown(lb.l_ri, lb.l_mag, lb.l_lb, l_mb, l_hb, full)
    return out, {"lb": cfg.alpha * g_lb, "mb": g_mb, "hb": g_hb}


def _samples(w) -> np.ndarray:
    if isinstance(w, Waveform):
        return w.samples
    return np.asarray(w, dtype=np.float64)


def _check_pair(ref, est):
    r, e = _samples(ref), _samples(est)
    if r.shape != e.shape:
        raise DimensionError(f"length mismatch: ref {r.shape[0]} vs est {e.shape[0]}")
    for w in (ref, est):
        if isinstance(w, Waveform) and w.sample_rate != SAMPLE_RATE:
            raise DomainError(f"metrics expect {SAMPLE_RATE} Hz audio")
    return r, e


def segment_snrs(ref, est, frame: int = SSNR_FRAME) -> np.ndarray:
    """Clamped per-frame SNRs (dB) over non-overlapping frames, silent frames dropped."""
    r, e = _check_pair(ref, est)
    n = max(r.shape[0] // frame, 1)
    usable = min(n * frame, r.shape[0])
    r = r[:usable].reshape(n, -1)
    e = e[:usable].reshape(n, -1)
    sig = np.sum(r ** 2, axis=1)
    err = np.sum((r - e) ** 2, axis=1)
    keep = sig >= SSNR_SILENCE
    with np.errstate(divide="ignore"):
        snr = 10.0 * np.log10(sig[keep] / err[keep])
    return np.clip(snr, SSNR_MIN_DB, SSNR_MAX_DB)


def ssnr(ref, est) -> float:
    """Segmental SNR: mean of clamped 20 ms frame SNRs."""
    snrs = segment_snrs(ref, est)
    if snrs.size == 0:
        raise DomainError("reference is silent in every frame")
    return float(np.mean(snrs))


def sdr(ref, est) -> float:
    """Scale-invariant projection SDR in dB, capped at +/-100 dB."""
    r, e = _check_pair(ref, est)
    rr = float(r @ r)
    if rr == 0.0:
        raise DomainError("reference signal is all zeros")
    target = (float(e @ r) / rr) * r
    noise = e - target
    t_pow, n_pow = float(target @ target), float(noise @ noise)
    if n_pow == 0.0:
        return SDR_CAP_DB
    if t_pow == 0.0:
        return -SDR_CAP_DB
    return float(np.clip(10.0 * np.log10(t_pow / n_pow), -SDR_CAP_DB, SDR_CAP_DB))


def snr_db(signal, noise) -> float:
    s, n = _samples(signal), _samples(noise)
    return float(10.0 * np.log10((s @ s) / (n @ n)))


@dataclass(frozen=True)
class Mixture:
    mixture: Waveform
    clean: Waveform
    noise: Waveform
    gain: float
    """Peak-normalization gain applied to both components (1.0 if none)."""


def mix_at_snr(clean, noise, snr_db: float, peak_limit: float = PEAK_LIMIT) -> Mixture:
    """Scale ``noise`` so the clean/noise energy ratio equals ``snr_db``.

    Noise longer than the clean signal is truncated.  If the mixture would
    clip, both components are scaled so the peak equals ``peak_limit``;
    the ratio is unchanged.
    """
    c = _samples(clean)
    n = _samples(noise)
    if n.shape[0] < c.shape[0]:
        raise DimensionError(f"noise ({n.shape[0]}) shorter than clean ({c.shape[0]})")
    n = n[: c.shape[0]]
    ec, en = float(c @ c), float(n @ n)
    if ec == 0.0:
        raise DomainError("clean signal is silent")
    if en == 0.0:
        raise DomainError("noise signal is silent")
    scaled = n * np.sqrt(ec / (en * 10.0 ** (snr_db / 10.0)))
    mix = c + scaled
    peak = float(np.max(np.abs(mix)))
    gain = peak_limit / peak if peak > 1.0 else 1.0
    return Mixture(Waveform(mix * gain), Waveform(c * gain), Waveform(scaled * gain), gain)
