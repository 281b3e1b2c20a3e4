"""Command-line interface.

Exit codes: 0 ok, 2 bad audio/data, 3 bad weights, 64 usage error.
Plain output is one ``key<TAB>value`` line per field; ``--json`` prints a
single object that always carries the keys params_total, macs_per_sec, rtf,
ssnr_db and sdr_db (null when a command does not compute them).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DomainError, SFNetError
from .frontend import FrontendConfig, Waveform
from .metrics import mix_at_snr, sdr, snr_db, ssnr
from .model import ArchConfig, EnhancerStream, SFNet, enhance_offline
from .wavio import read_wav, write_wav
from .weights import (PAPER_MACS_G, PAPER_PARAMS_M, WeightFileError, complexity_report, init_weights,
                      load, save)

EXIT_OK, EXIT_DATA, EXIT_WEIGHTS, EXIT_USAGE = 0, 2, 3, 64
REPORT_KEYS = ("params_total", "macs_per_sec", "rtf", "ssnr_db", "sdr_db")
PRECISIONS = {"float32": np.float32, "float64": np.float64}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(fields: dict, as_json: bool) -> None:
    if as_json:
        out = {k: None for k in REPORT_KEYS}
        out.update(fields)
        print(json.dumps(out, sort_keys=True))
        return
    for k, v in fields.items():
        if isinstance(v, float):
            v = f"{v:.6f}"
        elif isinstance(v, dict):
            v = json.dumps(v, sort_keys=True)
        print(f"{k}\t{v}")


def _load_weights(path) -> "WeightSet":  # noqa: F821
    try:
        return load(path)
    except FileNotFoundError:
        raise WeightFileError(f"{path}: no such weight file") from None
    except (WeightFileError, OSError) as exc:
        raise WeightFileError(f"{path}: {exc}") from exc


def _build_model(args) -> SFNet:
    dtype = PRECISIONS[args.precision]
    if args.identity:
        ws = _load_weights(args.weights) if args.weights else init_weights(seed=0)
        return SFNet.from_weights(ws, identity=True, dtype=dtype)
    if not args.weights:
        raise UsageError("--weights is required unless --identity is given")
    return SFNet.from_weights(_load_weights(args.weights), dtype=dtype)


def run_stream(model: SFNet, x: np.ndarray, chunk: int) -> np.ndarray:
    stream = EnhancerStream(model)
    parts = [stream.process(x[i : i + chunk]) for i in range(0, x.shape[0], chunk)]
    parts.append(stream.flush())
    return np.concatenate(parts)


def cmd_enhance(args) -> int:
    if args.chunk is not None and args.mode != "streaming":
        raise UsageError("--chunk only applies to --mode streaming")
    chunk = args.chunk if args.chunk is not None else 480
    if chunk < 1:
        raise UsageError("--chunk must be >= 1")
    noisy, fmt = read_wav(args.input)
    model = _build_model(args)
    t0 = time.perf_counter()
    if args.mode == "offline":
        y = enhance_offline(noisy, model).samples
    else:
        y = run_stream(model, noisy.samples, chunk)
    elapsed = time.perf_counter() - t0
    out = Waveform(y)
    write_wav(args.output, out, args.format or fmt)
    duration = len(noisy) / noisy.sample_rate
    fields = {"mode": args.mode, "samples": len(noisy), "seconds": elapsed,
              "rtf": elapsed / duration if duration else 0.0}
    if args.figure:
        from .report import plot_spectrograms
        fields["figure"] = str(plot_spectrograms({"noisy": noisy, "enhanced": out}, args.figure))
    _emit(fields, args.json)
    return EXIT_OK


def cmd_metrics(args) -> int:
    ref, _ = read_wav(args.ref)
    est, _ = read_wav(args.est)
    if len(ref) != len(est):
        raise DataError(f"length mismatch: ref has {len(ref)} samples, est has {len(est)}")
    err = Waveform(est.samples - ref.samples)
    fields = {"ssnr_db": ssnr(ref, est), "sdr_db": sdr(ref, est),
              "snr_db": snr_db(ref, err) if np.any(err.samples) else float("inf")}
    if not np.isfinite(fields["snr_db"]):
        fields["snr_db"] = None
    _emit(fields, args.json)
    return EXIT_OK


def cmd_mix(args) -> int:
    clean, _ = read_wav(args.clean)
    noise, _ = read_wav(args.noise)
    try:
        mix = mix_at_snr(clean, noise, args.snr)
    except DomainError as exc:
        raise DataError(str(exc)) from exc
    write_wav(args.output, mix.mixture)
    fields = {"output": args.output, "snr_db": snr_db(mix.clean, mix.noise), "gain": mix.gain}
    if args.components:
        stem = Path(args.components)
        write_wav(f"{stem}_clean.wav", mix.clean)
        write_wav(f"{stem}_noise.wav", mix.noise)
        fields["components"] = f"{stem}_clean.wav,{stem}_noise.wav"
    _emit(fields, args.json)
    return EXIT_OK


def _read_config(spec: str) -> ArchConfig:
    if spec == "default":
        return ArchConfig()
    try:
        return ArchConfig.from_dict(json.loads(Path(spec).read_text()))
    except (OSError, ValueError, TypeError) as exc:
        raise UsageError(f"cannot read config {spec!r}: {exc}") from exc


def cmd_init(args) -> int:
    cfg = _read_config(args.config)
    ws = init_weights(cfg, seed=args.seed)
    save(ws, args.output)
    _emit({"output": args.output, "params_total": ws.n_params(), "seed": args.seed}, args.json)
    return EXIT_OK


def cmd_describe(args) -> int:
    cfg = _load_weights(args.weights).arch if args.weights else _read_config(args.config)
    rep = complexity_report(cfg)
    fields = {"params_total": rep.params_total, "params_m": rep.params_m,
              "macs_per_sec": rep.macs_per_second, "macs_g": rep.macs_g,
              "params_per_subnet": rep.params_per_subnet, "macs_per_subnet": rep.macs_per_subnet,
              "params_deviation": rep.params_deviation, "macs_deviation": rep.macs_deviation}
    if args.figure:
        from .report import plot_complexity
        fields["figure"] = str(plot_complexity(rep, args.figure))
    _emit(fields, args.json)
    if not args.json:
        print(f"paper: {PAPER_PARAMS_M} M / {PAPER_MACS_G} G MACs "
              f"(this build: {rep.params_m:.2f} M ({rep.params_deviation:+.1%}) / "
              f"{rep.macs_g:.2f} G ({rep.macs_deviation:+.1%}))")
    return EXIT_OK


def bench(model: SFNet, seconds: float, chunk: int = 480, seed: int = 0, warmup: float = 0.5) -> float:
    """Real-time factor of streaming ``seconds`` of synthetic noise through ``model``."""
    rate = FrontendConfig().sample_rate
    rng = np.random.default_rng(seed)
    if warmup > 0:
        run_stream(model, rng.uniform(-0.3, 0.3, int(warmup * rate)), chunk)
    x = rng.uniform(-0.3, 0.3, int(seconds * rate))
    t0 = time.perf_counter()
    run_stream(model, x, chunk)
    return (time.perf_counter() - t0) / seconds


def cmd_bench(args) -> int:
    if args.seconds <= 0 or args.chunk < 1:
        raise UsageError("--seconds must be positive and --chunk >= 1")
    ws = _load_weights(args.weights) if args.weights else init_weights(seed=args.seed)
    model = SFNet.from_weights(ws, dtype=PRECISIONS[args.precision])
    rtf = bench(model, args.seconds, args.chunk, args.seed)
    rep = complexity_report(ws.arch)
    _emit({"rtf": rtf, "seconds": args.seconds, "precision": args.precision, "chunk": args.chunk,
           "macs_per_sec": rep.macs_per_second, "params_total": rep.params_total}, args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sfnet", description="Full-band sub-band fusion speech enhancement.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    e = sub.add_parser("enhance", help="enhance a 48 kHz mono WAV file")
    e.add_argument("--input", required=True)
    e.add_argument("--output", required=True)
    e.add_argument("--weights")
    e.add_argument("--identity", action="store_true", help="passthrough configuration (gain 1, residual 0)")
    e.add_argument("--mode", choices=("offline", "streaming"), default="offline")
    e.add_argument("--chunk", type=int, help="streaming chunk size in samples (default 480)")
    e.add_argument("--precision", choices=tuple(PRECISIONS), default="float32")
    e.add_argument("--format", choices=("float32", "pcm16"), help="output format (default: same as input)")
    e.add_argument("--figure", help="write a noisy/enhanced spectrogram PNG here")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_enhance)

    m = sub.add_parser("metrics", help="SSNR / SDR of an estimate against a reference")
    m.add_argument("--ref", required=True)
    m.add_argument("--est", required=True)
    m.add_argument("--json", action="store_true")
    m.set_defaults(func=cmd_metrics)

    x = sub.add_parser("mix", help="mix clean speech and noise at a given SNR")
    x.add_argument("--clean", required=True)
    x.add_argument("--noise", required=True)
    x.add_argument("--snr", type=float, required=True)
    x.add_argument("--output", required=True)
    x.add_argument("--components", help="also write <stem>_clean.wav and <stem>_noise.wav")
    x.add_argument("--json", action="store_true")
    x.set_defaults(func=cmd_mix)

    i = sub.add_parser("init", help="write seeded random weights")
    i.add_argument("--config", default="default", help="ArchConfig JSON file or 'default'")
    i.add_argument("--seed", type=int, default=0)
    i.add_argument("--output", required=True)
    i.add_argument("--json", action="store_true")
    i.set_defaults(func=cmd_init)

    d = sub.add_parser("describe", help="parameter and MACs report")
    d.add_argument("--weights")
    d.add_argument("--config", default="default")
    d.add_argument("--figure", help="write a complexity bar chart PNG here")
    d.add_argument("--json", action="store_true")
    d.set_defaults(func=cmd_describe)

    b = sub.add_parser("bench", help="streaming real-time factor on synthetic noise")
    b.add_argument("--weights")
    b.add_argument("--seconds", type=float, default=10.0)
    b.add_argument("--chunk", type=int, default=480)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--precision", choices=tuple(PRECISIONS), default="float32")
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"sfnet: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (WeightFileError, ConfigError) as exc:
        print(f"sfnet: weights error: {exc}", file=sys.stderr)
        return EXIT_WEIGHTS
    except (DataError, SFNetError) as exc:
        print(f"sfnet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
