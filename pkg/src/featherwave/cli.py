"""Command-line entry points.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import corpus, kernels
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .complexity import ComplexityConfig, compare_baseline, format_report
from .config import ConfigError, RunConfig, load_config
from .features import FeatureError, read_features, write_features
from .net import InferenceNet, NetShape, NumericalError
from .pipeline import Frontend, copy_synthesis
from .sampler import SamplerConfig, generate
from .sparsity import OneShotSchedule, SparsityError, TsspSchedule, bench_kernel
from .train import Dataset, to_checkpoint, train, uniform_nll
from .wavio import WavError, read_wav, write_wav

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class InputError(Exception):
    pass


def _config(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _read_audio(path, cfg: RunConfig) -> np.ndarray:
    x, rate = read_wav(path)
    if rate != cfg.sample_rate:
        raise InputError(f"{path}: sample rate {rate} does not match config {cfg.sample_rate}")
    return x


def cmd_features(args) -> int:
    cfg = _config(args)
    fe = Frontend(cfg)
    mel = fe.mel(_read_audio(args.input, cfg))
    write_features(args.output, mel)
    print(f"frames={mel.n_frames}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    files = sorted(Path(args.corpus).glob("*.wav"))
    if not files:
        raise InputError(f"no .wav files in {args.corpus}")
    fe = Frontend(cfg)
    dataset = Dataset.from_audio([_read_audio(f, cfg) for f in files], fe)
    iterations = args.iterations if args.iterations is not None else cfg.train_iterations
    if args.schedule == "oneshot":
        schedule = OneShotSchedule(cfg.warmup_ramp_iters // cfg.schedule_scale, cfg.final_sparsity)
    else:
        schedule = TsspSchedule.from_config(cfg)
    result = train(dataset, cfg, schedule, iterations=iterations,
                   log=lambda line: print(line, flush=True))
    save_checkpoint(args.output, to_checkpoint(result, cfg))
    print(f"# uniform_nll={uniform_nll(cfg.q_root):.6f} final_nll={result.history[-1][1]:.6f}",
          file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    fe = Frontend(cfg)
    src = Path(args.input)
    if src.suffix.lower() == ".wav":
        mel = fe.mel(_read_audio(src, cfg))
    else:
        mel = read_features(src)
        got = (mel.n_mels, mel.sample_rate, mel.hop)
        want = (cfg.n_mels, cfg.sample_rate, cfg.hop)
        if got != want:
            raise InputError(f"features (n_mels, rate, hop)={got} do not match checkpoint {want}")
    plan = fe.lpc.plan(mel)
    shape = NetShape.from_config(cfg)
    net = InferenceNet(ckpt.params, shape, ckpt.block_mask, threads=args.threads)
    seed = cfg.seed if args.seed is None else args.seed
    sc = SamplerConfig(cfg.threshold if args.threshold is None else args.threshold, seed)
    t0 = time.perf_counter()
    y = generate(net, mel.frames, plan, fe.codec, fe.fb, cfg.repeat, cfg.preemph, sc)
    wall = time.perf_counter() - t0
    write_wav(args.output, y, cfg.sample_rate)
    print(f"rtf={len(y) / cfg.sample_rate / wall:.6f}")
    return EXIT_OK


def cmd_copysynth(args) -> int:
    cfg = _config(args)
    fe = Frontend(cfg)
    y, snr = copy_synthesis(_read_audio(args.input, cfg), fe)
    write_wav(args.output, y, cfg.sample_rate)
    print(f"snr_db={snr:.3f}")
    return EXIT_OK


def cmd_bench(args) -> int:
    print("backend,n,density,reps,sparse_ns,dense_ns,speedup,checksum")
    for d in args.density:
        r = bench_kernel(args.n, d, args.reps, backend=args.backend, threads=args.threads,
                         seed=args.seed or 0)
        print(f"{r['backend']},{r['n']},{d},{r['reps']},{r['sparse_ns']:.1f},"
              f"{r['dense_ns']:.1f},{r['speedup']:.3f},{r['checksum']:.6e}")
    return EXIT_OK


def cmd_flops(args) -> int:
    c = ComplexityConfig(args.gru_units, args.density, args.q, args.affine_units,
                         args.bands, args.sample_rate, args.embed_dim)
    rep = compare_baseline(c)
    print(json.dumps(rep, indent=2) if args.json else format_report(rep))
    return EXIT_OK


def cmd_prune_plan(args) -> int:
    cfg = _config(args)
    sched = TsspSchedule.from_config(cfg, scaled=args.scaled)
    step = args.step or max(1, sched.total_iters // 24)
    print("iter,target_sparsity")
    points = sorted(set(range(0, sched.total_iters + 1, step)) | set(sched.milestones()))
    for it in points:
        print(f"{it},{sched(it):.6f}")
    return EXIT_OK


def cmd_make_corpus(args) -> int:
    for p in corpus.write_corpus(args.directory, args.seconds):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="featherwave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="store_true", help="print version and kernel backend")
    sub = p.add_subparsers(dest="command")

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("features", cmd_features, "extract a log-mel feature file from a WAV")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--config")

    sp = add("train", cmd_train, "train on a directory of WAV files, CSV log on stdout")
    sp.add_argument("corpus")
    sp.add_argument("output")
    sp.add_argument("--config")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--iterations", type=int)
    sp.add_argument("--schedule", choices=["tssp", "oneshot"], default="tssp")

    sp = add("synth", cmd_synth, "generate audio from features (or a WAV) and a checkpoint")
    sp.add_argument("input")
    sp.add_argument("checkpoint")
    sp.add_argument("output")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--threshold", type=float)

    sp = add("copysynth", cmd_copysynth, "rebuild a WAV from its own excitation, print SNR")
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--config")

    sp = add("bench", cmd_bench, "time block-sparse vs dense matvec")
    sp.add_argument("--n", type=int, default=384)
    sp.add_argument("--density", type=float, nargs="+", default=[1.0, 0.5, 0.2, 0.1, 0.05])
    sp.add_argument("--reps", type=int, default=2000)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--backend", choices=["cython", "python"])
    sp.add_argument("--seed", type=int)

    sp = add("flops", cmd_flops, "closed-form complexity report")
    sp.add_argument("--gru-units", type=int, default=384)
    sp.add_argument("--density", type=float, default=0.1)
    sp.add_argument("--q", type=int, default=32)
    sp.add_argument("--affine-units", type=int, default=128)
    sp.add_argument("--bands", type=int, default=4)
    sp.add_argument("--sample-rate", type=int, default=16000)
    sp.add_argument("--embed-dim", type=int, default=16)
    sp.add_argument("--json", action="store_true")

    sp = add("prune-plan", cmd_prune_plan, "print the sparsity schedule as CSV")
    sp.add_argument("--config")
    sp.add_argument("--step", type=int)
    sp.add_argument("--scaled", action="store_true", help="divide iteration counts by schedule_scale")

    sp = add("make-corpus", cmd_make_corpus, "write the synthetic training corpus")
    sp.add_argument("directory")
    sp.add_argument("--seconds", type=float, default=10.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.version:
        from . import __version__
        print(f"featherwave {__version__} ({kernels.BACKEND} kernels)")
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, WavError, FeatureError, ConfigError, CheckpointError, SparsityError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
