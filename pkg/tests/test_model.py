import numpy as np
import pytest
from conftest import TINY

from sfnet.bands import apply_gain_with_phase, mag_phase
from sfnet.errors import DataError, DimensionError, StateError
from sfnet.frontend import Waveform
from sfnet.model import ArchConfig, EnhancerStream, SFNet, create_stream, enhance_offline, interaction, \
    process_samples
from sfnet.weights import init_weights


def compressed_band(rng, t=12, f=161):
    z = rng.normal(size=(t, f)) + 1j * rng.normal(size=(t, f))
    return z * rng.uniform(0, 1.5, (t, 1))


def with_entries(ws, **updates):
    entries = dict(ws.entries)
    for name, fn in updates.items():
        for key in [k for k in entries if k.startswith(name.replace("__", "."))]:
            entries[key] = fn(entries[key])
    return SFNet.from_weights(type(ws)(entries, ws.arch, ws.frontend, ws.layout))


def run_frames(fn, x, state):
    return np.concatenate([fn(x[t : t + 1], state) for t in range(x.shape[0])])


def stream_all(model, x, chunk):
    s = EnhancerStream(model)
    parts = [s.process(x[i : i + chunk]) for i in range(0, len(x), chunk)]
    return np.concatenate(parts + [s.flush()])


def test_arch_config_validation():
    with pytest.raises(Exception):
        ArchConfig(dilations=(1, 3))
    with pytest.raises(Exception):
        ArchConfig(dilations=(2, 1))
    with pytest.raises(Exception):
        ArchConfig(depth=4)
    assert ArchConfig.from_dict(ArchConfig().to_dict()) == ArchConfig()


class TestMENet:
    def test_gain_bounded(self, tiny_model, rng):
        g = tiny_model.me(np.abs(compressed_band(rng)))
        assert g.shape == (12, 161)
        assert np.all(np.abs(g) < 1)

    def test_streaming(self, tiny_model, rng):
        mag = np.abs(compressed_band(rng, t=20))
        st = tiny_model.me.new_state()
        assert np.max(np.abs(run_frames(tiny_model.me, mag, st) - tiny_model.me(mag))) < 1e-5

    def test_zero_mask_head(self, tiny_weights, rng):
        m = with_entries(tiny_weights, dslb__me__mask__tanh=np.zeros_like)
        lb = compressed_band(rng)
        mp = mag_phase(lb)
        g = m.me(mp.mag)
        assert not np.any(g)
        assert not np.any(apply_gain_with_phase(mp.mag, g, mp.phase))

    def test_bad_shape(self, tiny_model):
        with pytest.raises(DimensionError):
            tiny_model.me(np.zeros((3, 161, 1)))


class TestCPNet:
    def test_streaming(self, tiny_model, rng):
        lb = compressed_band(rng, t=20)
        ri = np.stack([lb.real, lb.imag], axis=-1)
        st = tiny_model.cp.new_state()
        assert np.max(np.abs(run_frames(tiny_model.cp, ri, st) - tiny_model.cp(ri))) < 1e-5

    def test_zero_output_heads(self, tiny_weights, tiny_model, rng):
        m = with_entries(tiny_weights, dslb__cp__out_=np.zeros_like)
        lb = compressed_band(rng)
        mp = mag_phase(lb)
        est, gain = m.dslb(lb)
        np.testing.assert_array_equal(est, apply_gain_with_phase(mp.mag, tiny_model.me(mp.mag), mp.phase))

    def test_shared_stcm_perturbation(self, tiny_weights, tiny_model, rng):
        name = "dslb.tcm.g0.b1.squeeze.kernel"
        assert name in tiny_weights.entries
        assert not any(k.startswith("dslb.me.tcm") or k.startswith("dslb.cp.tcm") for k in tiny_weights.entries)
        m = with_entries(tiny_weights, **{name.replace(".", "__"): lambda a: a + 0.5})
        lb = compressed_band(rng)
        ri = np.stack([lb.real, lb.imag], axis=-1)
        assert np.max(np.abs(m.me(np.abs(lb)) - tiny_model.me(np.abs(lb)))) > 1e-6
        assert np.max(np.abs(m.cp(ri) - tiny_model.cp(ri))) > 1e-6

    def test_bad_shape(self, tiny_model):
        with pytest.raises(DimensionError):
            tiny_model.cp(np.zeros((3, 161, 3)))


class TestDSLB:
    def test_identity_passthrough(self, tiny_weights, rng):
        m = SFNet.from_weights(tiny_weights, identity=True)
        lb = compressed_band(rng)
        est, gain = m.dslb(lb)
        np.testing.assert_allclose(est, lb, atol=1e-12)
        assert np.all(gain == 1)

    def test_reconstruction_arithmetic(self, tiny_model, rng):
        lb = compressed_band(rng)
        est, gain = tiny_model.dslb(lb)
        res = tiny_model.cp(np.stack([lb.real, lb.imag], axis=-1))
        for t, f in [(0, 0), (3, 17), (11, 160), (7, 99)]:
            m = max(abs(lb[t, f]) * gain[t, f], 0.0)
            th = np.angle(lb[t, f])
            re = m * np.cos(th) + res[t, f, 0]
            im = m * np.sin(th) + res[t, f, 1]
            assert est[t, f] == pytest.approx(complex(re, im), abs=1e-12)
        changed = np.abs(res[..., 0] + 1j * res[..., 1]) > 1e-9
        keep = (np.abs(est) > 0) & (gain * np.abs(lb) > 0) & changed
        dphase = np.abs(np.angle(est[keep] * np.conj(lb[keep])))
        assert np.all(dphase > 0)

    def test_zero_input_is_cp_response(self, tiny_model):
        z = np.zeros((6, 161), dtype=complex)
        est, _ = tiny_model.dslb(z)
        res = tiny_model.cp(np.zeros((6, 161, 2)))
        np.testing.assert_array_equal(est, res[..., 0] + 1j * res[..., 1])


class TestInteraction:
    def setup_method(self):
        r = np.random.default_rng(3)
        self.ft = r.normal(size=(4, 5, 3))
        self.fg = r.normal(size=(4, 5, 3))
        self.k = r.normal(size=(6, 3))

    def test_gate_closed(self):
        out = interaction(self.ft, self.fg, self.k, np.full(3, -1e3))
        np.testing.assert_allclose(out, self.ft, atol=1e-12)

    def test_gate_open(self):
        out = interaction(self.ft, self.fg, self.k, np.full(3, 1e3))
        np.testing.assert_allclose(out, self.ft + self.fg, atol=1e-12)

    def test_zero_guide(self):
        out = interaction(self.ft, np.zeros_like(self.fg), self.k, np.zeros(3))
        np.testing.assert_array_equal(out, self.ft)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            interaction(self.ft, self.fg[:, :4], self.k, np.zeros(3))


@pytest.mark.parametrize("which,guide_ch", [("mbm", 1), ("hbm", 2)])
class TestBandMaskers:
    def test_no_amplification(self, tiny_model, rng, which, guide_ch):
        net = getattr(tiny_model, which)
        mag = np.abs(compressed_band(rng))
        guide = np.abs(rng.normal(size=mag.shape + (guide_ch,)))
        gain = net(mag, guide)
        est = np.maximum(mag * gain, 0)
        assert np.all(est <= mag)

    def test_zero_in_zero_out(self, tiny_model, which, guide_ch):
        net = getattr(tiny_model, which)
        mag = np.zeros((5, 161))
        gain = net(mag, np.zeros((5, 161, guide_ch)))
        assert not np.any(np.maximum(mag * gain, 0))

    def test_streaming(self, tiny_model, rng, which, guide_ch):
        net = getattr(tiny_model, which)
        mag = np.abs(compressed_band(rng, t=16))
        guide = np.abs(rng.normal(size=mag.shape + (guide_ch,)))
        st = net.new_state()
        streamed = np.concatenate([net(mag[t : t + 1], guide[t : t + 1], st) for t in range(16)])
        assert np.max(np.abs(streamed - net(mag, guide))) < 1e-5

    def test_guide_shape(self, tiny_model, which, guide_ch):
        net = getattr(tiny_model, which)
        with pytest.raises(DimensionError):
            net(np.zeros((5, 161)), np.zeros((5, 161, guide_ch + 1)))


class TestFullGraph:
    def test_identity_offline(self, tiny_weights, rng):
        m = SFNet.from_weights(tiny_weights, identity=True)
        x = rng.uniform(-0.5, 0.5, 9000)
        y = enhance_offline(Waveform(x), m).samples
        assert y.shape == x.shape
        assert np.max(np.abs(y - x)) < 1e-5

    def test_zero_input_leakage(self, tiny_model):
        y = enhance_offline(Waveform(np.zeros(4800)), tiny_model).samples
        assert np.sqrt(np.mean(y ** 2)) < 1e-3

    def test_phase_kept_in_upper_bands(self, tiny_model, rng):
        spec = compressed_band(rng, t=10, f=481)
        est = tiny_model.forward(spec)
        for band, lo in ((est.mb, 160), (est.hb, 320)):
            noisy = spec[:, lo : lo + 161]
            pos = np.abs(band) > 0
            err = np.angle(band[pos] * np.conj(noisy[pos]))
            assert np.max(np.abs(err)) < 1e-10

    def test_offline_equals_streaming(self, tiny_model, rng):
        x = rng.uniform(-0.5, 0.5, 7000)
        off = enhance_offline(Waveform(x), tiny_model).samples
        assert np.max(np.abs(stream_all(tiny_model, x, 480) - off)) < 1e-5

    def test_chunking_is_bit_identical(self, tiny_model, rng):
        x = rng.uniform(-0.5, 0.5, 3000)
        a = stream_all(tiny_model, x, 1)
        b = stream_all(tiny_model, x, 4800)
        c = stream_all(tiny_model, x, 777)
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, c)

    def test_determinism(self, tiny_weights, rng):
        x = rng.uniform(-0.5, 0.5, 4000)
        a = enhance_offline(Waveform(x), SFNet.from_weights(tiny_weights)).samples
        b = enhance_offline(Waveform(x), SFNet.from_weights(tiny_weights)).samples
        np.testing.assert_array_equal(a, b)

    def test_unshared_stcm(self, rng):
        cfg = ArchConfig(**{**TINY.to_dict(), "share_stcm": False})
        ws = init_weights(cfg, seed=1)
        assert any(k.startswith("dslb.me.tcm") for k in ws.entries)
        assert any(k.startswith("dslb.cp.tcm") for k in ws.entries)
        m = SFNet.from_weights(ws)
        x = rng.uniform(-0.5, 0.5, 3000)
        off = enhance_offline(Waveform(x), m).samples
        assert np.max(np.abs(stream_all(m, x, 480) - off)) < 1e-5

    def test_float32_compute(self, tiny_weights, rng):
        x = rng.uniform(-0.5, 0.5, 4000)
        ref = enhance_offline(Waveform(x), SFNet.from_weights(tiny_weights)).samples
        m32 = SFNet.from_weights(tiny_weights, dtype=np.float32)
        assert np.max(np.abs(enhance_offline(Waveform(x), m32).samples - ref)) < 1e-5
        assert np.max(np.abs(stream_all(m32, x, 480) - ref)) < 1e-5

    def test_forward_shape_check(self, tiny_model):
        with pytest.raises(DimensionError):
            tiny_model.forward(np.zeros((3, 480), dtype=complex))


class TestStream:
    def test_latency_bound(self, tiny_model):
        n = 1234
        x = np.zeros(4000)
        x[n] = 1.0
        s = create_stream(SFNet.from_weights(init_weights(TINY, seed=7), identity=True))
        out, emitted_at = [], []
        for i, v in enumerate(x):
            y = process_samples(s, [v])
            out.extend(y)
            emitted_at.extend([i] * len(y))
        out.extend(s.flush())
        out = np.asarray(out)
        first = int(np.flatnonzero(np.abs(out) > 1e-9)[0])
        assert first == n
        # the sample at index n is released at most one window after it arrived
        assert n <= emitted_at[first] <= n + 960
        assert max(e - k for k, e in enumerate(emitted_at)) <= 960

    def test_flush_length_and_close(self, tiny_model, rng):
        s = EnhancerStream(tiny_model)
        x = rng.uniform(-0.5, 0.5, 2345)
        total = sum(len(s.process(x[i : i + 100])) for i in range(0, 2345, 100))
        total += len(s.flush())
        assert total == 2345
        with pytest.raises(StateError):
            s.process(x[:10])
        with pytest.raises(StateError):
            s.flush()

    def test_empty_stream(self, tiny_model):
        s = EnhancerStream(tiny_model)
        assert s.flush().shape == (0,)

    def test_rejects_nan(self, tiny_model):
        with pytest.raises(DataError):
            EnhancerStream(tiny_model).process([0.0, np.inf])

    def test_states_not_aliased(self, tiny_model, rng):
        # two interleaved streams on one model give the same result as separate runs
        x, y = rng.uniform(-0.5, 0.5, 2400), rng.uniform(-0.5, 0.5, 2400)
        a, b = EnhancerStream(tiny_model), EnhancerStream(tiny_model)
        ra, rb = [], []
        for i in range(0, 2400, 480):
            ra.append(a.process(x[i : i + 480]))
            rb.append(b.process(y[i : i + 480]))
        ra.append(a.flush())
        rb.append(b.flush())
        np.testing.assert_array_equal(np.concatenate(ra), stream_all(tiny_model, x, 480))
        np.testing.assert_array_equal(np.concatenate(rb), stream_all(tiny_model, y, 480))
