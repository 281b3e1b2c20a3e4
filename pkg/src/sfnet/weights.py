"""Named-tensor weight store, the .sfnw file format, and complexity accounting.

File layout (all integers little-endian)::

    b"SFNW" | u32 version | u64 manifest length | manifest JSON (sorted keys)
    | float32 payload | u32 CRC32 of payload

The manifest holds the architecture, frontend and band-layout configs and a
tensor directory of ``{name, shape, offset}`` with byte offsets into the
payload.  Tensors are written in sorted name order.
"""

from __future__ import annotations

import functools
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bands import BandLayout
from .errors import SFNetError
from .frontend import FrontendConfig
from .model import ArchConfig, SFNet
from .nn import ShapeRecorder

MAGIC = b"SFNW"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")

# Table 1 of the reference system, SF-Net row
PAPER_PARAMS_M = 6.98
PAPER_MACS_G = 5.62


class WeightFileError(SFNetError):
    """Base class for .sfnw load failures."""


class BadMagicError(WeightFileError):
    pass


class VersionError(WeightFileError):
    pass


class TruncatedError(WeightFileError):
    pass


class ChecksumError(WeightFileError):
    pass


class ManifestError(WeightFileError):
    pass


class WeightShapeError(WeightFileError):
    def __init__(self, tensor: str, expected, found):
        self.tensor = tensor
        super().__init__(f"tensor {tensor!r}: manifest config expects shape {tuple(expected)}, "
                         f"file holds {tuple(found)}")


@functools.lru_cache(maxsize=16)
def _shapes(cfg: ArchConfig, layout: BandLayout) -> tuple[tuple[str, tuple[int, ...]], ...]:
    rec = ShapeRecorder()
    SFNet(rec, cfg, layout)
    return tuple(sorted(rec.shapes.items()))


def param_shapes(cfg: ArchConfig = ArchConfig(), layout: BandLayout = BandLayout()) -> dict[str, tuple[int, ...]]:
    """Every tensor the architecture needs, shared tensors listed once."""
    return dict(_shapes(cfg, layout))


def fan_in(shape: tuple[int, ...]) -> int:
    return int(np.prod(shape[:-1])) if len(shape) > 1 else int(shape[0])


def init_bound(shape: tuple[int, ...]) -> float:
    return 1.0 / np.sqrt(fan_in(shape))


@dataclass
class WeightSet:
    entries: dict[str, np.ndarray]
    arch: ArchConfig = field(default_factory=ArchConfig)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    layout: BandLayout = field(default_factory=BandLayout)
    format_version: int = FORMAT_VERSION

    def validate(self) -> None:
        expected = param_shapes(self.arch, self.layout)
        missing = sorted(set(expected) - set(self.entries))
        if missing:
            raise ManifestError(f"missing tensors: {missing[:5]}{' ...' if len(missing) > 5 else ''}")
        orphans = sorted(set(self.entries) - set(expected))
        if orphans:
            raise ManifestError(f"orphan tensors not used by the architecture: {orphans[:5]}")
        for name, shape in expected.items():
            if tuple(self.entries[name].shape) != shape:
                raise WeightShapeError(name, shape, self.entries[name].shape)

    def manifest_config(self) -> dict:
        return {"arch": self.arch.to_dict(), "frontend": self.frontend.to_dict(),
                "layout": self.layout.to_dict(), "format_version": self.format_version}

    def n_params(self) -> int:
        return int(sum(a.size for a in self.entries.values()))

    def __eq__(self, other):
        if not isinstance(other, WeightSet):
            return NotImplemented
        if self.manifest_config() != other.manifest_config() or self.entries.keys() != other.entries.keys():
            return False
        return all(self.entries[k].dtype == other.entries[k].dtype
                   and np.array_equal(self.entries[k], other.entries[k]) for k in self.entries)


def init_weights(cfg: ArchConfig = ArchConfig(), seed: int = 0, layout: BandLayout = BandLayout(),
                 frontend: FrontendConfig = FrontendConfig()) -> WeightSet:
    """Seeded initialization: kernels U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases 0,
    PReLU slopes 0.25, norm gains 1."""
    rng = np.random.default_rng(seed)
    entries = {}
    for name, shape in param_shapes(cfg, layout).items():
        kind = name.rsplit(".", 1)[-1]
        if kind == "kernel":
            b = init_bound(shape)
            arr = rng.uniform(-b, b, size=shape)
        elif kind == "bias":
            arr = np.zeros(shape)
        elif kind == "gain":
            arr = np.ones(shape)
        elif kind == "slope":
            arr = np.full(shape, 0.25)
        else:
            raise ManifestError(f"no init rule for tensor {name!r}")
        entries[name] = arr.astype("<f4")
    return WeightSet(entries, cfg, frontend, layout)


def to_bytes(ws: WeightSet) -> bytes:
    ws.validate()
    directory, chunks, offset = [], [], 0
    for name in sorted(ws.entries):
        arr = np.ascontiguousarray(ws.entries[name], dtype="<f4")
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = dict(ws.manifest_config(), tensors=directory)
    mbytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(chunks)
    return (_HEADER.pack(MAGIC, FORMAT_VERSION, len(mbytes)) + mbytes + payload
            + struct.pack("<I", zlib.crc32(payload)))


def from_bytes(blob: bytes) -> WeightSet:
    if len(blob) < _HEADER.size:
        raise TruncatedError("file shorter than the .sfnw header")
    magic, version, mlen = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format version {version}, expected {FORMAT_VERSION}")
    start = _HEADER.size
    if len(blob) < start + mlen:
        raise TruncatedError("file ends inside the manifest")
    try:
        manifest = json.loads(blob[start : start + mlen].decode("utf-8"))
        arch = ArchConfig.from_dict(manifest["arch"])
        frontend = FrontendConfig(**manifest["frontend"])
        lay = manifest["layout"]
        layout = BandLayout(*(tuple(lay[k]) for k in ("lb_range", "mb_range", "hb_range")))
        directory = manifest["tensors"]
    except WeightFileError:
        raise
    except (ValueError, KeyError, TypeError, SFNetError) as exc:
        raise ManifestError(f"unreadable manifest: {exc}") from exc
    payload_len = sum(4 * int(np.prod(t["shape"], dtype=np.int64)) for t in directory)
    body = start + mlen
    if len(blob) < body + payload_len + 4:
        raise TruncatedError(f"payload truncated: need {payload_len + 4} bytes, have {len(blob) - body}")
    if len(blob) > body + payload_len + 4:
        raise ManifestError("trailing bytes after checksum")
    payload = blob[body : body + payload_len]
    (crc,) = struct.unpack_from("<I", blob, body + payload_len)
    if zlib.crc32(payload) != crc:
        raise ChecksumError("payload CRC32 mismatch")

    expected = param_shapes(arch, layout)
    entries = {}
    for t in directory:
        name, shape, off = t["name"], tuple(t["shape"]), int(t["offset"])
        if name not in expected:
            raise ManifestError(f"orphan tensor {name!r} not used by the manifest architecture")
        if expected[name] != shape:
            raise WeightShapeError(name, expected[name], shape)
        n = int(np.prod(shape, dtype=np.int64))
        if off < 0 or off + 4 * n > payload_len:
            raise ManifestError(f"tensor {name!r} offset out of range")
        entries[name] = np.frombuffer(payload, dtype="<f4", count=n, offset=off).reshape(shape).copy()
    ws = WeightSet(entries, arch, frontend, layout, int(manifest.get("format_version", version)))
    ws.validate()
    return ws


def save(ws: WeightSet, path) -> None:
    Path(path).write_bytes(to_bytes(ws))


def load(path) -> WeightSet:
    return from_bytes(Path(path).read_bytes())


@dataclass
class ComplexityReport:
    params_total: int
    params_per_subnet: dict[str, int]
    macs_per_second: int
    macs_per_subnet: dict[str, int]
    frames_per_second: float

    @property
    def params_m(self) -> float:
        return self.params_total / 1e6

    @property
    def macs_g(self) -> float:
        return self.macs_per_second / 1e9

    @property
    def params_deviation(self) -> float:
        """Relative deviation from the published 6.98 M parameters."""
        return self.params_m / PAPER_PARAMS_M - 1.0

    @property
    def macs_deviation(self) -> float:
        return self.macs_g / PAPER_MACS_G - 1.0

    def to_dict(self) -> dict:
        return {"params_total": self.params_total, "params_per_subnet": dict(self.params_per_subnet),
                "macs_per_sec": self.macs_per_second, "macs_per_subnet": dict(self.macs_per_subnet),
                "paper_params_m": PAPER_PARAMS_M, "paper_macs_g": PAPER_MACS_G,
                "params_deviation": self.params_deviation, "macs_deviation": self.macs_deviation}


def _subnet(name: str) -> str:
    parts = name.split(".")
    return ".".join(parts[:2]) if parts[0] == "dslb" else parts[0]


def complexity_report(cfg: ArchConfig = ArchConfig(), layout: BandLayout = BandLayout(),
                      frontend: FrontendConfig = FrontendConfig()) -> ComplexityReport:
    """Parameters (shared tensors once) and MACs per second of audio, from shapes only."""
    shapes = param_shapes(cfg, layout)
    per = {}
    for name, shape in shapes.items():
        key = _subnet(name)
        per[key] = per.get(key, 0) + int(np.prod(shape))
    model = SFNet(ShapeRecorder(), cfg, layout)
    # one frame through the graph fixes every layer's frequency size
    model.forward(np.zeros((1, layout.full_bins), dtype=complex))
    fps = frontend.sample_rate / frontend.hop
    macs_frame = model.macs_per_frame()
    macs = {k: int(round(v * fps)) for k, v in macs_frame.items()}
    return ComplexityReport(sum(per.values()), per, int(round(sum(macs_frame.values()) * fps)), macs, fps)
