"""Command-line entry point: ``dncshap {train,attribute,label,eval,spectrogram}``.

Exit codes: 0 success, 1 bad input or configuration, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import audio, formats, labels, metrics
from .attribution import AttributionError, dnc_shap, resolve_jobs, write_attribution
from .audio import AudioError, MelConfig, Waveform
from .data import make_synthetic
from .fusion import ConfigError, FusionConfig, FusionModel, load_model
from .nn.checkpoint import CheckpointError
from .nn.layers import ShapeError
from .nn.train import PairDataset, TrainConfig, TrainingDiverged, evaluate, train_toy

log = logging.getLogger("dncshap")


class UserError(Exception):
    pass


USER_ERRORS = (
    UserError, AttributionError, AudioError, CheckpointError, ConfigError, ShapeError,
    formats.FormatError, labels.LabelError, metrics.MetricsError, TrainingDiverged, OSError,
)


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- train ---------------------------------------------------------------------

def _model_config(args):
    overrides = {"topology": args.topology, "seed": args.seed}
    if args.config:
        return FusionConfig.from_text(Path(args.config).read_text(), **overrides)
    topology = args.topology or "proposed"
    if args.scale == "full":
        return FusionConfig(topology=topology, height=args.input_size, width=args.input_size, seed=args.seed)
    return FusionConfig.mini(size=args.input_size, topology=topology, seed=args.seed)


def _load_dataset(args, config):
    if args.data:
        with np.load(args.data) as z:
            missing = {"images", "speech", "labels"} - set(z.files)
            if missing:
                raise UserError(f"{args.data}: missing arrays {sorted(missing)}")
            return PairDataset(z["images"], z["speech"], z["labels"])
    return make_synthetic(args.samples, config.height, config.width, seed=args.seed,
                          n_classes=config.n_classes)


def cmd_train(args):
    config = _model_config(args)
    model = FusionModel(config)
    data = _load_dataset(args, config)
    if len(data) == 0:
        raise UserError("dataset is empty")
    tc = TrainConfig(seed=args.seed, batch_size=args.batch_size, lr=args.lr, epochs=args.epochs,
                     gamma=args.gamma, val_fraction=args.val_fraction)
    model, history = train_toy(model, data, tc)
    out = _out_dir(args.out)
    ckpt = out / f"{args.name}.ckpt"
    model.save(ckpt)
    (out / f"{args.name}.history.csv").write_text(history.to_csv())
    _, acc = evaluate(model, data, args.gamma)
    log.info("wrote %s (%d epochs, accuracy on all data %.3f)", ckpt, len(history), acc)
    print(ckpt)
    return 0


# -- attribute -------------------------------------------------------------------

def _class_names(n):
    return list(labels.CLASSES) if n == len(labels.CLASSES) else [str(i) for i in range(n)]


def cmd_attribute(args):
    model = load_model(args.checkpoint)
    h, w = model.config.height, model.config.width
    try:
        image = formats.read_image(args.image)
    except formats.FormatError as exc:
        raise UserError(f"{args.image}: {exc}") from exc
    if image.shape[:2] != (h, w):
        raise UserError(f"{args.image}: image is {image.shape[1]}x{image.shape[0]}, model expects {w}x{h}")

    mel_cfg = MelConfig(n_mels=h, n_frames=w, fft_size=args.fft_size)
    frame_duration = offset = None
    if args.wav:
        samples, rate = formats.read_wav(args.wav)
        wave = Waveform(samples, rate)
        speech = audio.logmel(wave, mel_cfg)
        hop, _, start = audio.frame_layout(samples.size, mel_cfg)
        frame_duration, offset = hop / rate, start * hop / rate
    elif args.spectrogram:
        spec = formats.read_matrix_csv(args.spectrogram)
        if spec.shape != (h, w):
            raise UserError(f"{args.spectrogram}: spectrogram is {spec.shape}, model expects {(h, w)}")
        speech = spec[..., None]
    else:
        raise UserError("one of --wav or --spectrogram is required")

    result = dnc_shap(model, image, speech, times=args.times, baseline=args.baseline, jobs=resolve_jobs(args.jobs))
    names = _class_names(model.n_classes)
    importance = audio.time_importance(result.shap_speech)
    intervals = audio.threshold_segments(importance, args.percentile)
    extra = {
        "P": names[result.arg_max],
        "Score": result.pred_f,
        "seed": args.seed,
        "times": args.times,
        "percentile": args.percentile,
        "retained_frames": [list(iv) for iv in intervals],
    }
    if args.gt is not None:
        extra["GT"] = args.gt
    if args.alignment:
        if frame_duration is None:
            frame_duration = args.frame_duration
            offset = 0.0
        if frame_duration is None:
            raise UserError("--alignment with --spectrogram needs --frame-duration")
        words = audio.load_alignment(args.alignment)
        extra["words"] = audio.highlight_words(intervals, words, frame_duration, offset)
    stem = args.stem or Path(args.image).stem
    paths = write_attribution(result, _out_dir(args.out), stem, extra)
    if "words" in extra:
        words_path = Path(args.out) / f"{stem}.words.txt"
        words_path.write_text("".join(f"{w}\n" for w in extra["words"]))
        paths.append(words_path)
    for p in paths:
        print(p)
    return 0


# -- label -----------------------------------------------------------------------

def cmd_label(args):
    classes = tuple(c.strip() for c in args.classes.split(",")) if args.classes else labels.CLASSES
    out = _out_dir(args.out)
    decisions, errors = labels.label_csv(args.input, out / "decisions.csv", args.threshold, classes,
                                         args.require_agreement)
    stats = labels.corpus_stats(decisions)
    (out / "stats.json").write_text(labels.format_stats(stats))
    sys.stdout.write(labels.stats_table(stats))
    for err in errors:
        print(f"{args.input}:{err.line}: sample {err.sample_id!r}: {err.message}", file=sys.stderr)
    return 1 if errors else 0


# -- eval ------------------------------------------------------------------------

def _read_label_column(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise UserError(f"{path}: empty file")
    header = [c.strip().lower() for c in rows[0]]
    if "label" in header:
        col = header.index("label")
        ids = [r[header.index("sample_id")].strip() for r in rows[1:]] if "sample_id" in header else None
        rows = rows[1:]
    else:
        col, ids = len(rows[0]) - 1, None
    try:
        return ids, [r[col].strip() for r in rows]
    except IndexError as exc:
        raise UserError(f"{path}: ragged rows") from exc


def _class_order(values, given):
    if given:
        return [c.strip() for c in given.split(",")]
    uniq = set(values)
    if uniq <= set(labels.CLASSES):
        return list(labels.CLASSES)
    if all(v.isdigit() for v in uniq):
        return [str(i) for i in range(max(int(v) for v in uniq) + 1)]
    return sorted(uniq)


def cmd_eval(args):
    pid, pred = _read_label_column(args.predictions)
    tid, truth = _read_label_column(args.labels)
    if len(pred) != len(truth):
        raise UserError(f"{len(pred)} predictions vs {len(truth)} labels")
    if pid is not None and tid is not None and pid != tid:
        raise UserError("sample_id columns of the two files do not match")
    classes = _class_order(pred + truth, args.classes)
    index = {c: i for i, c in enumerate(classes)}
    unknown = sorted(set(pred + truth) - set(index))
    if unknown:
        raise UserError(f"labels not in class list: {unknown}")
    cm = metrics.confusion_matrix([index[t] for t in truth], [index[p] for p in pred], len(classes))
    rep = metrics.report(cm)
    rep["classes"] = classes
    if args.out:
        formats.write_json(args.out, rep)
    for k in ("accuracy", "macro_f1", "cohen_kappa"):
        print(f"{k}: {rep[k]:.6f}")
    return 0


# -- spectrogram -------------------------------------------------------------------

def cmd_spectrogram(args):
    samples, rate = formats.read_wav(args.wav)
    cfg = MelConfig(n_mels=args.n_mels, n_frames=args.n_frames, fft_size=args.fft_size)
    spec = audio.logmel(Waveform(samples, rate), cfg)[..., 0]
    formats.write_matrix_csv(args.out, spec)
    if args.pgm:
        formats.write_pgm(args.pgm, np.floor(spec[::-1] * 255).astype(np.uint8))
    print(args.out)
    return 0


# -- parser --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # usage mistakes are user errors (exit 1), not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="dncshap", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a fusion model on synthetic or .npz data")
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--lr", type=float, default=8e-6)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--gamma", type=float, default=2.0, help="focal-loss exponent")
    t.add_argument("--val-fraction", type=float, default=0.3)
    t.add_argument("--topology", default=None, help="overrides the config file")
    t.add_argument("--config", help="key = value model config file")
    t.add_argument("--scale", choices=("mini", "full"), default="mini")
    t.add_argument("--input-size", type=int, default=32)
    t.add_argument("--samples", type=int, default=256, help="synthetic sample count")
    t.add_argument("--data", help=".npz with images, speech, labels arrays")
    t.add_argument("--out", default=".")
    t.add_argument("--name", default="model")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attribute", help="divide-and-conquer Shapley maps for one sample")
    a.add_argument("--checkpoint", required=True)
    a.add_argument("--image", required=True, help="binary PPM (P6) or PGM (P5)")
    a.add_argument("--wav", help="16-bit PCM WAV")
    a.add_argument("--spectrogram", help="precomputed spectrogram CSV")
    a.add_argument("--alignment", help="JSON word alignment")
    a.add_argument("--frame-duration", type=float, help="seconds per spectrogram column (CSV input)")
    a.add_argument("--gt", help="ground-truth label to record")
    a.add_argument("--seed", type=int, required=True)
    a.add_argument("--times", type=int, default=6)
    a.add_argument("--percentile", type=float, default=30.0)
    a.add_argument("--baseline", type=float, default=0.0)
    a.add_argument("--fft-size", type=int, default=1024)
    a.add_argument("--jobs", type=int, default=None, help="worker threads (default $DNC_ATTRIB_JOBS or 1)")
    a.add_argument("--out", default=".")
    a.add_argument("--stem")
    a.set_defaults(func=cmd_attribute)

    lb = sub.add_parser("label", help="assign ground truth from two classifiers' probabilities")
    lb.add_argument("--input", required=True)
    lb.add_argument("--out", default=".")
    lb.add_argument("--threshold", type=float, default=labels.DEFAULT_THRESHOLD)
    lb.add_argument("--classes", help="comma-separated class names of the probability columns")
    lb.add_argument("--require-agreement", action="store_true",
                    help="also discard samples whose two classifiers disagree")
    lb.set_defaults(func=cmd_label)

    e = sub.add_parser("eval", help="accuracy, macro-F1 and Cohen's kappa")
    e.add_argument("--predictions", required=True)
    e.add_argument("--labels", required=True)
    e.add_argument("--classes")
    e.add_argument("--out", help="metrics JSON path")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("spectrogram", help="WAV to log-mel CSV")
    s.add_argument("--wav", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--pgm")
    s.add_argument("--n-mels", type=int, default=128)
    s.add_argument("--n-frames", type=int, default=128)
    s.add_argument("--fft-size", type=int, default=1024)
    s.set_defaults(func=cmd_spectrogram)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except USER_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
