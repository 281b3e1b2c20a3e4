import json
import struct
import zlib

import numpy as np
import pytest
from conftest import TINY

from sfnet.model import ArchConfig
from sfnet.nn import CausalConv2d, ShapeRecorder
from sfnet.weights import (FORMAT_VERSION, MAGIC, PAPER_MACS_G, PAPER_PARAMS_M, BadMagicError, ChecksumError,
                           ManifestError, TruncatedError, VersionError, WeightSet, WeightShapeError,
                           complexity_report, from_bytes, init_bound, init_weights, load, param_shapes, save,
                           to_bytes)


def rewrite_manifest(blob: bytes, edit) -> bytes:
    """Apply ``edit`` to the manifest JSON, keeping the payload and its CRC."""
    _, _, mlen = struct.unpack_from("<4sIQ", blob)
    manifest = json.loads(blob[16 : 16 + mlen])
    edit(manifest)
    m = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode()
    return blob[:4] + struct.pack("<IQ", FORMAT_VERSION, len(m)) + m + blob[16 + mlen :]


class TestInit:
    def test_deterministic(self):
        assert init_weights(TINY, seed=3) == init_weights(TINY, seed=3)

    def test_seed_matters(self):
        a, b = init_weights(TINY, seed=3), init_weights(TINY, seed=4)
        assert a != b
        assert any(not np.array_equal(a.entries[k], b.entries[k]) for k in a.entries)

    def test_values(self, tiny_weights):
        for name, arr in tiny_weights.entries.items():
            assert arr.dtype == np.float32
            assert np.all(np.isfinite(arr))
            kind = name.rsplit(".", 1)[1]
            if kind == "kernel":
                assert np.max(np.abs(arr)) <= np.float32(init_bound(arr.shape))
            elif kind == "bias":
                assert not np.any(arr)
            elif kind == "gain":
                assert np.all(arr == 1)
            else:
                assert kind == "slope" and np.all(arr == np.float32(0.25))

    def test_exact_entry_set(self, tiny_weights):
        assert {k: v.shape for k, v in tiny_weights.entries.items()} == param_shapes(TINY)
        tiny_weights.validate()

    def test_missing_and_orphan(self, tiny_weights):
        entries = dict(tiny_weights.entries)
        entries.pop(next(iter(entries)))
        with pytest.raises(ManifestError):
            WeightSet(entries, TINY).validate()
        with pytest.raises(ManifestError):
            WeightSet(dict(tiny_weights.entries, extra=np.zeros(1, np.float32)), TINY).validate()


class TestFile:
    def test_round_trip(self, tiny_weights, tmp_path):
        p = tmp_path / "w.sfnw"
        save(tiny_weights, p)
        back = load(p)
        assert back == tiny_weights
        assert back.arch == TINY

    def test_canonical_bytes(self, tiny_weights, tmp_path):
        save(tiny_weights, tmp_path / "a.sfnw")
        save(tiny_weights, tmp_path / "b.sfnw")
        assert (tmp_path / "a.sfnw").read_bytes() == (tmp_path / "b.sfnw").read_bytes()

    def test_layout(self, tiny_weights):
        blob = to_bytes(tiny_weights)
        magic, version, mlen = struct.unpack_from("<4sIQ", blob)
        assert magic == MAGIC == b"SFNW" and version == 1
        manifest = json.loads(blob[16 : 16 + mlen])
        assert list(manifest) == sorted(manifest)
        names = [t["name"] for t in manifest["tensors"]]
        assert names == sorted(names)
        payload = blob[16 + mlen : -4]
        assert struct.unpack("<I", blob[-4:])[0] == zlib.crc32(payload)
        first = manifest["tensors"][1]
        n = int(np.prod(first["shape"]))
        arr = np.frombuffer(payload, "<f4", count=n, offset=first["offset"]).reshape(first["shape"])
        np.testing.assert_array_equal(arr, tiny_weights.entries[first["name"]])

    def test_checksum(self, tiny_weights):
        blob = bytearray(to_bytes(tiny_weights))
        blob[-100] ^= 0x01
        with pytest.raises(ChecksumError):
            from_bytes(bytes(blob))

    def test_bad_magic(self, tiny_weights):
        with pytest.raises(BadMagicError):
            from_bytes(b"XXXX" + to_bytes(tiny_weights)[4:])

    def test_version(self, tiny_weights):
        blob = to_bytes(tiny_weights)
        with pytest.raises(VersionError):
            from_bytes(blob[:4] + struct.pack("<I", 2) + blob[8:])

    @pytest.mark.parametrize("cut", [3, 20, 500, -3])
    def test_truncated(self, tiny_weights, cut):
        blob = to_bytes(tiny_weights)
        with pytest.raises(TruncatedError):
            from_bytes(blob[:cut])

    def test_channel_edit_names_tensor(self, full_weights):
        blob = rewrite_manifest(to_bytes(full_weights), lambda m: m["arch"].update(lb_channels=32))
        with pytest.raises(WeightShapeError) as exc:
            from_bytes(blob)
        assert exc.value.tensor.startswith("dslb.")
        assert exc.value.tensor in str(exc.value)

    def test_garbled_manifest(self, tiny_weights):
        blob = rewrite_manifest(to_bytes(tiny_weights), lambda m: m.pop("arch"))
        with pytest.raises(ManifestError):
            from_bytes(blob)

    def test_distinct_error_types(self):
        kinds = {BadMagicError, VersionError, TruncatedError, ChecksumError, ManifestError, WeightShapeError}
        assert len(kinds) == 6


class TestComplexity:
    def test_single_conv_params(self):
        rec = ShapeRecorder()
        CausalConv2d(rec.get("c.kernel", (1, 1, 2, 3)), rec.get("c.bias", (3,)))
        assert sum(int(np.prod(s)) for s in rec.shapes.values()) == 9

    def test_totals_are_sums(self):
        rep = complexity_report()
        assert rep.params_total == sum(rep.params_per_subnet.values()) == init_weights().n_params()
        assert rep.macs_per_second == pytest.approx(sum(rep.macs_per_subnet.values()), abs=4)
        assert rep.frames_per_second == 100

    def test_deterministic(self):
        assert complexity_report().to_dict() == complexity_report().to_dict()

    def test_sharing_accounting(self):
        shared = complexity_report(ArchConfig())
        unshared = complexity_report(ArchConfig(share_stcm=False))
        tcm = sum(int(np.prod(s)) for k, s in param_shapes(ArchConfig()).items() if k.startswith("dslb.tcm."))
        assert unshared.params_total - shared.params_total == tcm
        # compute is unaffected by sharing
        assert unshared.macs_per_second == shared.macs_per_second

    def test_doubling_channels(self):
        base = ArchConfig()
        doubled = ArchConfig(lb_channels=128, band_channels=96, lb_squeeze=128, band_squeeze=256)
        ratio = complexity_report(doubled).params_total / complexity_report(base).params_total
        assert 3.5 < ratio < 4.05

    def test_against_published(self):
        rep = complexity_report()
        assert abs(rep.params_m / PAPER_PARAMS_M - 1) <= 0.25
        assert abs(rep.macs_g / PAPER_MACS_G - 1) <= 0.25
        assert rep.params_deviation == pytest.approx(rep.params_m / 6.98 - 1)

    def test_conv_mac_formula(self):
        conv = CausalConv2d(np.zeros((2, 3, 4, 5)), np.zeros(5), stride_f=2, pad_f=(1, 1))
        conv(np.zeros((1, 9, 4)))
        assert conv.macs_per_frame() == 5 * 5 * 2 * 3 * 4
