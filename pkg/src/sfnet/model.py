"""The sub-band fusion network: DSLB (ME + CP), MBM and HBM assembled from nn layers.

``SFNet`` turns a compressed 481-bin spectrogram into its enhanced version,
either for a whole utterance (``state=None``) or frame by frame with the
nested state from :meth:`SFNet.new_state`.  Waveform-level entry points are
:func:`enhance_offline` and :class:`EnhancerStream`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import bands
from .bands import BandLayout
from .errors import ConfigError, DataError, DimensionError, StateError
from .frontend import (FrontendConfig, Waveform, analyze_frames, decompress, compress,
                       hop_normalizer, istft, power_magnitude, stft, synthesize_frames)
from .nn import (CAHAM, CLN_EPS, STCM, ConvBlock, CausalConv2d, Deconv2dFreq, DictSource, Layer,
                 MaskHead, ParamSource, encoder_freq_pad, sigmoid, tcm_stack_step)


@dataclass(frozen=True)
class ArchConfig:
    lb_channels: int = 64
    band_channels: int = 48
    depth: int = 5
    lb_tcm_groups: int = 4
    band_tcm_groups: int = 2
    dilations: tuple[int, ...] = (1, 2, 4, 8, 16, 32)
    lb_squeeze: int = 64
    band_squeeze: int = 128
    share_stcm: bool = True
    skip_connections: bool = True
    band_bins: int = 161

    def __post_init__(self):
        object.__setattr__(self, "dilations", tuple(int(d) for d in self.dilations))
        d = self.dilations
        if not d or any(x <= 0 or x & (x - 1) for x in d) or any(a >= b for a, b in zip(d, d[1:])):
            raise ConfigError(f"dilations must be strictly increasing powers of two, got {d}")
        if self.depth != 5:
            raise ConfigError("encoder depth is fixed at 5")
        if self.lb_tcm_groups < 2 or self.band_tcm_groups < 2:
            raise ConfigError("cAHAM needs at least two S-TCM groups")
        for name in ("lb_channels", "band_channels", "lb_squeeze", "band_squeeze"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dilations"] = list(self.dilations)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown ArchConfig keys: {sorted(unknown)}")
        return cls(**known)

    def bin_chain(self) -> list[int]:
        sizes = [self.band_bins]
        for _ in range(self.depth):
            sizes.append(sizes[-1] // 2)
        return sizes


def _enc_kernel(i: int) -> int:
    return 5 if i == 0 else 3


class Encoder(Layer):
    """Five conv blocks with frequency stride 2: 161 -> 80 -> 40 -> 20 -> 10 -> 5."""

    def __init__(self, src: ParamSource, prefix: str, in_ch: int, widths: list[int], bin_chain: list[int]):
        self.in_ch = in_ch
        self.blocks = []
        cin = in_ch
        for i, cout in enumerate(widths):
            kf = _enc_kernel(i)
            left, right, f_out = encoder_freq_pad(bin_chain[i], kf, 2)
            if f_out != bin_chain[i + 1]:
                raise DimensionError("encoder bin chain is inconsistent")
            self.blocks.append(ConvBlock.build(src, f"{prefix}.{i}", CausalConv2d, (2, kf, cin, cout),
                                               stride_f=2, pad_f=(left, right)))
            cin = cout

    def new_state(self):
        return [b.new_state() for b in self.blocks]

    def __call__(self, x, state=None):
        """Returns the bottleneck map and every block output (for skips)."""
        outs = []
        for i, b in enumerate(self.blocks):
            x = b(x, None if state is None else state[i])
            outs.append(x)
        return x, outs

    def macs_per_frame(self):
        return sum(b.macs_per_frame() for b in self.blocks)


class Decoder(Layer):
    """Five mirrored deconv blocks back to ``bin_chain[0]`` bins.

    With skips, each block input is concatenated with the encoder output of
    the same frequency size.
    """

    def __init__(self, src: ParamSource, prefix: str, channels: int, bin_chain: list[int], skips: bool):
        self.skips = skips
        self.blocks = []
        depth = len(bin_chain) - 1
        for i in range(depth):
            kf = _enc_kernel(depth - 1 - i)
            cin = channels * (2 if skips else 1)
            self.blocks.append(ConvBlock.build(src, f"{prefix}.{i}", Deconv2dFreq, (2, kf, cin, channels),
                                               out_bins=bin_chain[depth - 1 - i]))

    def new_state(self):
        return [b.new_state() for b in self.blocks]

    def __call__(self, x, skips, state=None):
        for i, b in enumerate(self.blocks):
            if self.skips:
                x = np.concatenate([x, skips[-1 - i]], axis=-1)
            x = b(x, None if state is None else state[i])
        return x

    def macs_per_frame(self):
        return sum(b.macs_per_frame() for b in self.blocks)


class TCMStackState:
    """Packed streaming state of a TCMStack for ``batch`` independent streams."""

    def __init__(self, batch: int, n_blocks: int, max_hist: int, squeeze: int, dtype):
        self.batch = batch
        self.stats = np.zeros((batch, n_blocks, 2, 3))
        self.rings = np.zeros((batch, n_blocks, max_hist, squeeze), dtype=dtype)
        self.pos = np.zeros((batch, n_blocks), dtype=np.int64)


class TCMStack(Layer):
    """Groups of S-TCMs with increasing dilation; returns every group output.

    Offline calls run the vectorized layers.  Stateful calls go frame by
    frame through a compiled kernel holding the same weights; a state with
    ``batch > 1`` takes a (B, T, width) input, one row per stream.
    """

    def __init__(self, src: ParamSource, prefix: str, groups: int, width: int, squeeze: int, dilations):
        self.groups = [[STCM(src, f"{prefix}.g{g}.b{k}", width, squeeze, d) for k, d in enumerate(dilations)]
                       for g in range(groups)]
        self.width, self.squeeze = width, squeeze
        blocks = [m for grp in self.groups for m in grp]
        self._per_group = len(dilations)
        self._dtype = blocks[0].sq_w.dtype

        def pack(get):
            return np.ascontiguousarray(np.stack([get(m) for m in blocks]))

        self._packed = (pack(lambda m: m.sq_w), pack(lambda m: m.sq_b),
                        pack(lambda m: m.norm1.gain), pack(lambda m: m.norm1.bias), pack(lambda m: m.act1.slope),
                        pack(lambda m: m.dconv._w), pack(lambda m: m.dconv.bias),
                        pack(lambda m: m.norm2.gain), pack(lambda m: m.norm2.bias), pack(lambda m: m.act2.slope),
                        pack(lambda m: m.ex_w), pack(lambda m: m.ex_b))
        self._dil = np.array([m.dilation for m in blocks], dtype=np.int64)
        self._max_hist = int(max(m._taps for m in blocks))

    def new_state(self, batch: int = 1):
        return TCMStackState(batch, len(self._dil), self._max_hist, self.squeeze, self._dtype)

    def __call__(self, x, state=None):
        if state is None:
            outs = []
            for grp in self.groups:
                for m in grp:
                    x = m(x)
                outs.append(x)
            return outs
        batched = x.ndim == 3
        xb = x if batched else x[None]
        if xb.ndim != 3 or xb.shape[0] != state.batch or xb.shape[2] != self.width:
            raise DimensionError(f"S-TCM stack state holds {state.batch} stream(s) of width {self.width}, "
                                 f"got input {x.shape}")
        xb = np.ascontiguousarray(xb, dtype=self._dtype)
        t_len = xb.shape[1]
        res = np.empty((t_len, len(self.groups), state.batch, self.width), dtype=self._dtype)
        for t in range(t_len):
            tcm_stack_step(xb[:, t], self._per_group, *self._packed, self._dil, state.stats, state.rings,
                           state.pos, CLN_EPS, res[t])
        outs = [np.moveaxis(res[:, g], 0, 1) for g in range(len(self.groups))]
        return outs if batched else [o[0] for o in outs]

    def macs_per_frame(self):
        return sum(m.macs_per_frame() for grp in self.groups for m in grp)


class Bottleneck(Layer):
    """Flatten (T, F, C) -> (T, F*C), run S-TCM groups and cAHAM, reshape back."""

    def __init__(self, src: ParamSource, prefix: str, tcm: TCMStack):
        self.tcm = tcm
        self.caham = CAHAM(src, f"{prefix}.caham", len(tcm.groups))
        self._width = tcm.groups[0][0].width

    def new_state(self):
        return self.tcm.new_state()

    def __call__(self, x, state=None):
        t, f, c = x.shape
        return self.mix(self.tcm(x.reshape(t, f * c), state), x.shape)

    def mix(self, outs, shape):
        """cAHAM over the group outputs, reshaped back to the (T, F, C) map."""
        return self.caham(outs).reshape(shape)

    def macs_per_frame(self):
        return self.tcm.macs_per_frame() + self.caham.macs_per_frame(self._width)


def _tcm(src, prefix, cfg: ArchConfig, groups, channels, squeeze):
    width = channels * cfg.bin_chain()[-1]
    return TCMStack(src, prefix, groups, width, squeeze, cfg.dilations)


class MENet(Layer):
    """Magnitude branch: |X_lb| -> gain in (-1, 1)."""

    def __init__(self, src: ParamSource, prefix: str, cfg: ArchConfig, tcm: TCMStack):
        c, chain = cfg.lb_channels, cfg.bin_chain()
        self.encoder = Encoder(src, f"{prefix}.enc", 1, [c] * cfg.depth, chain)
        self.bottleneck = Bottleneck(src, prefix, tcm)
        self.decoder = Decoder(src, f"{prefix}.dec", c, chain, cfg.skip_connections)
        self.mask = MaskHead(src, f"{prefix}.mask", c)

    def new_state(self):
        return {"enc": self.encoder.new_state(), "tcm": self.bottleneck.new_state(),
                "dec": self.decoder.new_state()}

    def __call__(self, mag, state=None):
        st = state or {}
        z, skips = self.encode(mag, st)
        return self.decode(self.bottleneck(z, st.get("tcm")), skips, st)

    def encode(self, mag, state=None):
        if mag.ndim != 2:
            raise DimensionError(f"ME-Net expects a T x F magnitude, got shape {mag.shape}")
        return self.encoder(mag[..., None], (state or {}).get("enc"))

    def decode(self, z, skips, state=None):
        return self.mask(self.decoder(z, skips, (state or {}).get("dec")))

    def macs_per_frame(self):
        return (self.encoder.macs_per_frame() + self.bottleneck.macs_per_frame()
                + self.decoder.macs_per_frame() + self.mask.macs_per_frame())


class CPNet(Layer):
    """Complex branch: (Re, Im) of X_lb -> residual (Re, Im), unbounded."""

    def __init__(self, src: ParamSource, prefix: str, cfg: ArchConfig, tcm: TCMStack):
        c, chain = cfg.lb_channels, cfg.bin_chain()
        self.encoder = Encoder(src, f"{prefix}.enc", 2, [c] * cfg.depth, chain)
        self.bottleneck = Bottleneck(src, prefix, tcm)
        self.decoders = [Decoder(src, f"{prefix}.dec_{p}", c, chain, cfg.skip_connections) for p in ("real", "imag")]
        self.heads = [CausalConv2d(src.get(f"{prefix}.out_{p}.kernel", (1, 1, c, 1)),
                                   src.get(f"{prefix}.out_{p}.bias", (1,))) for p in ("real", "imag")]

    def new_state(self):
        return {"enc": self.encoder.new_state(), "tcm": self.bottleneck.new_state(),
                "dec": [d.new_state() for d in self.decoders]}

    def __call__(self, ri, state=None):
        st = state or {}
        z, skips = self.encode(ri, st)
        return self.decode(self.bottleneck(z, st.get("tcm")), skips, st)

    def encode(self, ri, state=None):
        if ri.ndim != 3 or ri.shape[-1] != 2:
            raise DimensionError(f"CP-Net expects T x F x 2, got shape {ri.shape}")
        return self.encoder(ri, (state or {}).get("enc"))

    def decode(self, z, skips, state=None):
        dec_states = (state or {}).get("dec") or [None, None]
        parts = [head(dec(z, skips, ds))[..., 0]
                 for dec, head, ds in zip(self.decoders, self.heads, dec_states)]
        return np.stack(parts, axis=-1)

    def macs_per_frame(self):
        return (self.encoder.macs_per_frame() + self.bottleneck.macs_per_frame()
                + sum(d.macs_per_frame() for d in self.decoders)
                + sum(h.macs_per_frame() for h in self.heads))


class Interaction(Layer):
    """Gated injection of guide features: f_target + sigmoid(conv([f_target, f_guide])) * f_guide."""

    def __init__(self, src: ParamSource, prefix: str, channels: int):
        self.channels = channels
        self.kernel = src.get(f"{prefix}.gate.kernel", (2 * channels, channels))
        self.bias = src.get(f"{prefix}.gate.bias", (channels,))
        self._bins = 0

    def __call__(self, f_target, f_guide, state=None):
        if f_target.shape != f_guide.shape:
            raise DimensionError(f"interaction shapes differ: {f_target.shape} vs {f_guide.shape}")
        self._bins = f_target.shape[1]
        logits = np.concatenate([f_target, f_guide], axis=-1) @ self.kernel + self.bias
        return f_target + sigmoid(logits) * f_guide

    def macs_per_frame(self):
        return self._bins * 2 * self.channels * self.channels


def interaction(f_target: np.ndarray, f_guide: np.ndarray, kernel: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Functional form of :class:`Interaction` for given gate weights."""
    src = DictSource({"x.gate.kernel": kernel, "x.gate.bias": bias})
    return Interaction(src, "x", f_target.shape[-1])(f_target, f_guide)


class BandMaskNet(Layer):
    """MBM/HBM: noisy-band encoder plus guide encoder, interaction, trunk, mask head.

    The guide encoder runs at half width and widens to the trunk width in its
    last block so both bottlenecks line up for the interaction gate.
    """

    def __init__(self, src: ParamSource, prefix: str, cfg: ArchConfig, guide_ch: int):
        c, chain = cfg.band_channels, cfg.bin_chain()
        self.guide_ch = guide_ch
        self.encoder = Encoder(src, f"{prefix}.enc", 1, [c] * cfg.depth, chain)
        half = max(c // 2, 1)
        self.guide_encoder = Encoder(src, f"{prefix}.guide_enc", guide_ch, [half] * (cfg.depth - 1) + [c], chain)
        self.interaction = Interaction(src, f"{prefix}.inter", c)
        tcm = _tcm(src, f"{prefix}.tcm", cfg, cfg.band_tcm_groups, c, cfg.band_squeeze)
        self.bottleneck = Bottleneck(src, prefix, tcm)
        self.decoder = Decoder(src, f"{prefix}.dec", c, chain, cfg.skip_connections)
        self.mask = MaskHead(src, f"{prefix}.mask", c)

    def new_state(self):
        return {"enc": self.encoder.new_state(), "guide": self.guide_encoder.new_state(),
                "tcm": self.bottleneck.new_state(), "dec": self.decoder.new_state()}

    def __call__(self, mag, guide, state=None):
        st = state or {}
        if guide.ndim == 2:
            guide = guide[..., None]
        if guide.shape[-1] != self.guide_ch or guide.shape[:2] != mag.shape:
            raise DimensionError(f"guide shape {guide.shape} does not match magnitude {mag.shape}")
        z, skips = self.encoder(mag[..., None], st.get("enc"))
        g, _ = self.guide_encoder(guide, st.get("guide"))
        z = self.interaction(z, g)
        z = self.bottleneck(z, st.get("tcm"))
        return self.mask(self.decoder(z, skips, st.get("dec")))

    def macs_per_frame(self):
        return (self.encoder.macs_per_frame() + self.guide_encoder.macs_per_frame()
                + self.interaction.macs_per_frame() + self.bottleneck.macs_per_frame()
                + self.decoder.macs_per_frame() + self.mask.macs_per_frame())


@dataclass
class BandEstimates:
    """Per-frame outputs of one SFNet pass, all in the compressed domain."""

    full: np.ndarray
    lb: np.ndarray
    mb: np.ndarray
    hb: np.ndarray
    lb_gain: np.ndarray | None = None
    mb_gain: np.ndarray | None = None
    hb_gain: np.ndarray | None = None


class SFNet:
    """Full sub-band fusion graph over compressed 481-bin spectra.

    With ``identity=True`` every gain is 1 and the residual 0, so the graph
    reproduces its input; the networks are still built but never run.
    """

    def __init__(self, src: ParamSource, cfg: ArchConfig = ArchConfig(),
                 layout: BandLayout = BandLayout(), identity: bool = False, dtype=np.float64):
        if layout.band_bins != cfg.band_bins:
            raise ConfigError("band layout and ArchConfig disagree on sub-band width")
        self.cfg, self.layout, self.identity = cfg, layout, identity
        self.dtype = np.dtype(dtype)
        c = cfg.lb_channels
        self.shared_tcm = None
        if cfg.share_stcm:
            shared = _tcm(src, "dslb.tcm", cfg, cfg.lb_tcm_groups, c, cfg.lb_squeeze)
            me_tcm = cp_tcm = self.shared_tcm = shared
        else:
            me_tcm = _tcm(src, "dslb.me.tcm", cfg, cfg.lb_tcm_groups, c, cfg.lb_squeeze)
            cp_tcm = _tcm(src, "dslb.cp.tcm", cfg, cfg.lb_tcm_groups, c, cfg.lb_squeeze)
        self.me = MENet(src, "dslb.me", cfg, me_tcm)
        self.cp = CPNet(src, "dslb.cp", cfg, cp_tcm)
        self.mbm = BandMaskNet(src, "mbm", cfg, guide_ch=1)
        self.hbm = BandMaskNet(src, "hbm", cfg, guide_ch=2)

    @classmethod
    def from_weights(cls, ws, identity: bool = False, dtype=np.float64) -> "SFNet":
        """Build from a WeightSet; ``dtype=float32`` trades precision for speed."""
        return cls(DictSource(ws.entries, dtype), ws.arch, ws.layout, identity=identity, dtype=dtype)

    def new_state(self) -> dict:
        st = {"me": self.me.new_state(), "cp": self.cp.new_state(),
              "mbm": self.mbm.new_state(), "hbm": self.hbm.new_state()}
        if self.shared_tcm is not None:
            # ME and CP stream through the shared stack together as a batch of two
            st["me"]["tcm"] = st["cp"]["tcm"] = None
            st["dslb_tcm"] = self.shared_tcm.new_state(batch=2)
        return st

    def _dslb_joint(self, mag, ri, st):
        zm, skm = self.me.encode(mag, st["me"])
        zc, skc = self.cp.encode(ri, st["cp"])
        t, f, c = zm.shape
        outs = self.shared_tcm(np.stack([zm.reshape(t, f * c), zc.reshape(t, f * c)]), st["dslb_tcm"])
        gain = self.me.decode(self.me.bottleneck.mix([o[0] for o in outs], zm.shape), skm, st["me"])
        res = self.cp.decode(self.cp.bottleneck.mix([o[1] for o in outs], zc.shape), skc, st["cp"])
        return gain, res

    def dslb(self, lb: np.ndarray, state=None) -> tuple[np.ndarray, np.ndarray]:
        """Low band: magnitude gain on the noisy phase plus the CP residual."""
        st = state or {}
        mp = bands.mag_phase(lb)
        if self.identity:
            gain = np.ones_like(mp.mag)
            residual = np.zeros_like(lb)
        else:
            mag = mp.mag.astype(self.dtype)
            ri_in = np.stack([lb.real, lb.imag], axis=-1).astype(self.dtype)
            if "dslb_tcm" in st:
                gain, ri = self._dslb_joint(mag, ri_in, st)
            else:
                gain, ri = self.me(mag, st.get("me")), self.cp(ri_in, st.get("cp"))
            gain = gain.astype(np.float64)
            residual = ri[..., 0].astype(np.float64) + 1j * ri[..., 1]
        coarse = bands.apply_gain_with_phase(mp.mag, gain, mp.phase)
        return coarse + residual, gain

    def forward(self, spec: np.ndarray, state=None) -> BandEstimates:
        """Enhance a compressed (T, 481) complex array."""
        if spec.ndim != 2 or spec.shape[1] != self.layout.full_bins:
            raise DimensionError(f"expected T x {self.layout.full_bins} spectrum, got {spec.shape}")
        st = state or {}
        (l0, l1), (m0, m1), (h0, h1) = self.layout.ranges
        lb, mb, hb = spec[:, l0 : l1 + 1], spec[:, m0 : m1 + 1], spec[:, h0 : h1 + 1]
        lb_est, lb_gain = self.dslb(lb, st)
        lb_mag = np.abs(lb_est)

        mb_mp = bands.mag_phase(mb)
        if self.identity:
            mb_gain = np.ones_like(mb_mp.mag)
        else:
            mb_gain = self.mbm(mb_mp.mag.astype(self.dtype), lb_mag.astype(self.dtype),
                               st.get("mbm")).astype(np.float64)
        mb_est = bands.apply_gain_with_phase(mb_mp.mag, mb_gain, mb_mp.phase)
        mb_mag = np.maximum(mb_mp.mag * mb_gain, 0.0)

        hb_mp = bands.mag_phase(hb)
        if self.identity:
            hb_gain = np.ones_like(hb_mp.mag)
        else:
            guide = np.stack([lb_mag, mb_mag], axis=-1).astype(self.dtype)
            hb_gain = self.hbm(hb_mp.mag.astype(self.dtype), guide, st.get("hbm")).astype(np.float64)
        hb_est = bands.apply_gain_with_phase(hb_mp.mag, hb_gain, hb_mp.phase)

        full = bands.fuse_arrays(lb_est, mb_est, hb_est, self.layout)
        return BandEstimates(full, lb_est, mb_est, hb_est, lb_gain, mb_gain, hb_gain)

    def macs_per_frame(self) -> dict[str, int]:
        """Per-subnet MACs; layers must have seen at least one frame."""
        return {"dslb.me": self.me.macs_per_frame(), "dslb.cp": self.cp.macs_per_frame(),
                "mbm": self.mbm.macs_per_frame(), "hbm": self.hbm.macs_per_frame()}


def enhance_offline(noisy: Waveform, model: SFNet, cfg: FrontendConfig = FrontendConfig()) -> Waveform:
    noisy.validate(cfg)
    spec = compress(stft(noisy, cfg), cfg.beta)
    est = model.forward(spec.data).full
    return istft(decompress(spec.with_data(est), cfg.beta), cfg, length=len(noisy))


class EnhancerStream:
    """Chunk-in, chunk-out streaming enhancer.

    Input of any chunk size is buffered into hops.  Output sample ``k`` is
    released once the frame completing its overlap-add has been processed,
    i.e. at most one window (960 samples) after sample ``k`` arrived, and
    the concatenated output equals the offline result for the same input.
    ``flush`` pushes zeros through to finish the tail so that the total
    output length equals the total input length.
    """

    def __init__(self, model: SFNet, cfg: FrontendConfig = FrontendConfig()):
        self.model = model
        self.cfg = cfg
        self.state = model.new_state()
        self._buf = np.zeros(cfg.left_pad)
        self._tail = np.zeros(cfg.hop)
        self._norm = hop_normalizer(cfg)
        self._frames = 0
        self._received = 0
        self._emitted = 0
        self._skip = cfg.left_pad
        self.closed = False

    def _process_frame(self, frame: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        spec = power_magnitude(analyze_frames(frame[None, :], cfg), cfg.beta)
        est = self.model.forward(spec, self.state).full
        grain = synthesize_frames(power_magnitude(est, 1.0 / cfg.beta), cfg)[0]
        block = (self._tail + grain[: cfg.hop]) / self._norm
        self._tail = grain[cfg.hop :].copy()
        self._frames += 1
        return block

    def _drain(self) -> np.ndarray:
        cfg = self.cfg
        out = []
        while self._buf.shape[0] >= cfg.window_len:
            block = self._process_frame(self._buf[: cfg.window_len])
            self._buf = self._buf[cfg.hop :]
            if self._skip:
                drop = min(self._skip, block.shape[0])
                block = block[drop:]
                self._skip -= drop
            out.append(block)
        return np.concatenate(out) if out else np.zeros(0)

    def process(self, samples) -> np.ndarray:
        if self.closed:
            raise StateError("stream has been closed")
        x = np.asarray(samples, dtype=np.float64).ravel()
        if not np.all(np.isfinite(x)):
            raise DataError("stream input contains NaN or Inf samples")
        self._received += x.shape[0]
        self._buf = np.concatenate([self._buf, x])
        out = self._drain()
        self._emitted += out.shape[0]
        return out

    def flush(self) -> np.ndarray:
        """Finish the stream; returns the remaining samples and closes it."""
        if self.closed:
            raise StateError("stream has been closed")
        self.closed = True
        if self._received == 0:
            return np.zeros(0)
        need = self.cfg.num_frames(self._received)
        pad = (need - self._frames) * self.cfg.hop + self.cfg.hop - self._buf.shape[0]
        if pad > 0:
            self._buf = np.concatenate([self._buf, np.zeros(pad)])
        out = self._drain()
        out = out[: self._received - self._emitted]
        self._emitted += out.shape[0]
        return out


def create_stream(model: SFNet, cfg: FrontendConfig = FrontendConfig()) -> EnhancerStream:
    return EnhancerStream(model, cfg)


def process_samples(stream: EnhancerStream, samples) -> np.ndarray:
    return stream.process(samples)
