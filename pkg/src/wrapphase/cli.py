"""Command-line front end.

Subcommands: extract, train, predict, gl, reconstruct, eval.
Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""
import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path


from . import fileio, griffinlim, metrics, spectral
from .model import CheckpointError

log = logging.getLogger("wrapphase")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _stft_from(config_path):
    if not config_path:
        return spectral.StftConfig()
    from .trainer import load_config

    return load_config(config_path)[3]


def _inputs(path, suffixes):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input {path} does not exist")
    files = [p] if p.is_file() else sorted(q for q in p.iterdir() if q.suffix.lower() in suffixes)
    files = [f for f in files if f.suffix.lower() in suffixes]
    if not files:
        raise UsageError(f"no input files in {path}")
    return files


def _stem(path):
    name = Path(path).name
    for suffix in (".amp.phsc", ".phase.phsc", ".phsc", ".wav"):
        if name.lower().endswith(suffix):
            return name[: -len(suffix)]
    return Path(path).stem


def _pmap(fn, items, jobs):
    if jobs <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(jobs) as pool:
        return list(pool.map(fn, items))


def _load_amplitude(path, cfg, length):
    """(amplitude, length, reference samples or None) from a WAV or PHSC file."""
    if path.suffix.lower() == ".wav":
        x, _ = fileio.read_wav(path, cfg.sample_rate)
        return spectral.amplitude(spectral.stft(x, cfg)), x.size, x
    if length is None:
        raise UsageError(f"{path}: --length is required for feature input")
    return fileio.read_phsc(path), length, None


# --------------------------------------------------------------------------


def cmd_extract(args):
    cfg = _stft_from(args.config)
    files = _inputs(args.inp, {".wav"})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(f):
        try:
            x, _ = fileio.read_wav(f, cfg.sample_rate)
        except fileio.AudioFormatError as exc:
            log.error("%s", exc)
            return False
        spec = spectral.stft(x, cfg)
        fileio.write_phsc(out / f"{_stem(f)}.amp.phsc", spectral.amplitude(spec))
        fileio.write_phsc(out / f"{_stem(f)}.phase.phsc", spectral.phase_of(spec))
        return True

    ok = _pmap(one, files, args.jobs)
    log.info("extracted %d of %d files", sum(ok), len(ok))
    return EXIT_OK if all(ok) else EXIT_FAIL


def cmd_train(args):
    from .trainer import load_config, train

    if not Path(args.config).is_file():
        raise UsageError(f"config file {args.config} not found")
    try:
        train_cfg, model_cfg, loss_cfg, stft_cfg = load_config(args.config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data_dir = Path(train_cfg.data_dir)
    if not data_dir.is_absolute():
        data_dir = Path(args.config).resolve().parent / data_dir
    changes = {"data_dir": str(data_dir)}
    if train_cfg.val_dir and not Path(train_cfg.val_dir).is_absolute():
        changes["val_dir"] = str(Path(args.config).resolve().parent / train_cfg.val_dir)
    if args.seed is not None:
        changes["seed"] = args.seed
    train_cfg = replace(train_cfg, **changes)
    state, logbook = train(train_cfg, model_cfg, loss_cfg, out_dir=args.out,
                           resume=args.resume, stft_cfg=stft_cfg)
    steps = [r for r in logbook.records if r["type"] == "step"]
    if steps:
        log.info("trained %d steps; loss %.4f -> %.4f", len(steps), steps[0]["total"], steps[-1]["total"])
    return EXIT_OK


def cmd_predict(args):
    import torch

    from .estimators import PhasePredictor

    torch.set_num_threads(max(1, args.threads))
    try:
        est = PhasePredictor.from_checkpoint(args.ckpt)
    except (OSError, CheckpointError) as exc:
        raise UsageError(f"cannot load checkpoint {args.ckpt}: {exc}") from None
    cfg = spectral.StftConfig(fft_size=2 * (est.n_bins_ - 1))
    files = [f for f in _inputs(args.inp, {".wav", ".phsc"}) if not f.name.endswith(".phase.phsc")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    timings, failed = {}, 0
    for f in files:
        try:
            amp, length, _ = _load_amplitude(f, cfg, args.length)
        except (fileio.AudioFormatError, ValueError) as exc:
            log.error("%s", exc)
            failed += 1
            continue
        t0 = time.perf_counter()
        phase = est.predict(amp)
        y = griffinlim.reconstruct(amp, phase, cfg, length)
        timings[_stem(f)] = {"seconds": time.perf_counter() - t0, "duration_s": length / cfg.sample_rate}
        fileio.write_phsc(out / f"{_stem(f)}.phase.phsc", phase)
        fileio.write_wav(out / f"{_stem(f)}.wav", y, cfg.sample_rate)
    if not timings:
        return EXIT_FAIL
    total = sum(t["seconds"] for t in timings.values())
    dur = sum(t["duration_s"] for t in timings.values())
    report = {"threads": args.threads, "utterances": timings, "total_seconds": total,
              "total_duration_s": dur, "rtf": metrics.rtf(total, dur)}
    (out / "timing.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    log.info("RTF %.4f over %d files", report["rtf"], len(timings))
    return EXIT_FAIL if failed else EXIT_OK


def cmd_gl(args):
    if args.iters < 0:
        raise UsageError("--iters must be >= 0")
    cfg = spectral.StftConfig()
    gl_cfg = griffinlim.GlConfig(args.iters, args.init, args.seed or 0)
    files = [f for f in _inputs(args.inp, {".wav", ".phsc"}) if not f.name.endswith(".phase.phsc")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def one(f):
        try:
            amp, length, _ = _load_amplitude(f, cfg, args.length)
        except (fileio.AudioFormatError, ValueError) as exc:
            log.error("%s", exc)
            return None
        t0 = time.perf_counter()
        phase = griffinlim.griffin_lim(amp, gl_cfg, cfg, length)
        y = griffinlim.reconstruct(amp, phase, cfg, length)
        seconds = time.perf_counter() - t0
        fileio.write_phsc(out / f"{_stem(f)}.phase.phsc", phase)
        fileio.write_wav(out / f"{_stem(f)}.wav", y, cfg.sample_rate)
        return _stem(f), {"seconds": seconds, "duration_s": length / cfg.sample_rate}

    results = _pmap(one, files, args.jobs)
    timings = dict(r for r in results if r is not None)
    if not timings:
        return EXIT_FAIL
    total = sum(t["seconds"] for t in timings.values())
    dur = sum(t["duration_s"] for t in timings.values())
    report = {"iterations": args.iters, "utterances": timings, "total_seconds": total,
              "total_duration_s": dur, "rtf": metrics.rtf(total, dur)}
    (out / "timing.json").write_text(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_FAIL if None in results else EXIT_OK


def cmd_reconstruct(args):
    cfg = spectral.StftConfig()
    amp = fileio.read_phsc(args.amp)
    phase = fileio.read_phsc(args.phase)
    from .estimators import to_principal

    y = griffinlim.reconstruct(amp, to_principal(phase), cfg, args.length)
    fileio.write_wav(args.out, y, cfg.sample_rate)
    return EXIT_OK


def cmd_eval(args):
    ref = {f.name: f for f in _inputs(args.ref, {".wav"})}
    tst = {f.name: f for f in _inputs(args.test, {".wav"})}
    only_ref, only_test = sorted(set(ref) - set(tst)), sorted(set(tst) - set(ref))
    if only_ref or only_test:
        lines = [f"missing from {args.test}: {n}" for n in only_ref]
        lines += [f"missing from {args.ref}: {n}" for n in only_test]
        print("unpaired files:\n  " + "\n  ".join(lines), file=sys.stderr)
        return EXIT_FAIL
    timing = {}
    timing_file = Path(args.timing) if args.timing else Path(args.test) / "timing.json"
    if timing_file.is_file():
        timing = json.loads(timing_file.read_text()).get("utterances", {})

    def one(name):
        x, sr = fileio.read_wav(ref[name], None)
        y, sr2 = fileio.read_wav(tst[name], sr)
        try:
            f0 = metrics.f0_rmse(x, y, sr)
        except metrics.UndefinedMetricError:
            f0 = None
        gen = timing.get(_stem(name), {}).get("seconds", 0.0)
        return metrics.UtteranceScore(name, metrics.snr(x, y, sr), f0, x.size / sr, gen)

    report = metrics.EvalReport(system=args.system or Path(args.test).name)
    for score in _pmap(one, sorted(ref), args.jobs):
        report.add(score)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n")
    out.with_suffix(".txt").write_text(metrics.format_table([report]) + "\n")
    print(metrics.format_table([report]))
    return EXIT_OK


# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="wrapphase", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="seed for every random choice")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("extract", help="WAV files -> amplitude/phase PHSC dumps")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_extract)

    s = sub.add_parser("train", help="train a phase predictor")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--resume")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("predict", help="predict phase and resynthesise")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--length", type=int, help="output samples (needed for PHSC input)")
    s.add_argument("--threads", type=int, default=1, help="torch threads (1 for honest RTF)")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("gl", help="Griffin-Lim baseline")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--iters", type=int, default=100)
    s.add_argument("--init", choices=("zero", "random"), default="zero")
    s.add_argument("--length", type=int)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_gl)

    s = sub.add_parser("reconstruct", help="amplitude + phase PHSC -> WAV")
    s.add_argument("--amp", required=True)
    s.add_argument("--phase", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--length", type=int)
    s.set_defaults(func=cmd_reconstruct)

    s = sub.add_parser("eval", help="SNR / F0-RMSE / RTF report")
    s.add_argument("--ref", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--timing", help="timing.json from predict/gl (default: <test>/timing.json)")
    s.add_argument("--system")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"wrapphase {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CheckpointError as exc:
        print(f"wrapphase {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - top-level CLI boundary
        log.debug("failure", exc_info=True)
        print(f"wrapphase {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
