"""Figures written next to the CLI's delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bands import BandLayout  # noqa: E402
from .frontend import FrontendConfig, Waveform, stft  # noqa: E402
from .weights import PAPER_MACS_G, PAPER_PARAMS_M, ComplexityReport  # noqa: E402

FIGSIZE = (8.0, 4.5)


def _log_spec(w: Waveform, cfg: FrontendConfig) -> np.ndarray:
    mag = np.abs(stft(w, cfg).data)
    return 20.0 * np.log10(mag + 1e-8)


def plot_spectrograms(panels: dict[str, Waveform], path, cfg: FrontendConfig = FrontendConfig(),
                      layout: BandLayout = BandLayout()) -> Path:
    """Log-magnitude spectrograms side by side with the sub-band edges marked."""
    path = Path(path)
    fig, axes = plt.subplots(1, len(panels), figsize=FIGSIZE, sharey=True, squeeze=False)
    specs = {k: _log_spec(w, cfg) for k, w in panels.items()}
    vmax = max(s.max() for s in specs.values())
    for ax, (title, s) in zip(axes[0], specs.items()):
        t_end = s.shape[0] * cfg.hop / cfg.sample_rate
        im = ax.imshow(s.T, origin="lower", aspect="auto", cmap="magma", vmin=vmax - 90, vmax=vmax,
                       extent=(0.0, t_end, 0.0, cfg.sample_rate / 2e3))
        for edge in layout.overlap_bins:
            ax.axhline(edge * cfg.bin_hz / 1e3, color="w", lw=0.6, ls="--")
        ax.set_title(title)
        ax.set_xlabel("time (s)")
    axes[0][0].set_ylabel("frequency (kHz)")
    fig.colorbar(im, ax=axes[0].tolist(), label="dB")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_complexity(rep: ComplexityReport, path) -> Path:
    path = Path(path)
    fig, (ax_p, ax_m) = plt.subplots(1, 2, figsize=FIGSIZE)
    names = sorted(rep.params_per_subnet)
    ax_p.bar(names, [rep.params_per_subnet[n] / 1e6 for n in names], color="tab:blue")
    ax_p.axhline(PAPER_PARAMS_M, color="k", ls="--", lw=0.8, label=f"published total {PAPER_PARAMS_M} M")
    ax_p.axhline(rep.params_m, color="tab:red", lw=0.8, label=f"total {rep.params_m:.2f} M")
    ax_p.set_ylabel("parameters (M)")
    ax_p.legend(fontsize=7)
    mnames = sorted(rep.macs_per_subnet)
    ax_m.bar(mnames, [rep.macs_per_subnet[n] / 1e9 for n in mnames], color="tab:green")
    ax_m.axhline(PAPER_MACS_G, color="k", ls="--", lw=0.8, label=f"published total {PAPER_MACS_G} G/s")
    ax_m.axhline(rep.macs_g, color="tab:red", lw=0.8, label=f"total {rep.macs_g:.2f} G/s")
    ax_m.set_ylabel("MACs (G/s)")
    ax_m.legend(fontsize=7)
    for ax in (ax_p, ax_m):
        ax.tick_params(axis="x", labelrotation=30, labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
