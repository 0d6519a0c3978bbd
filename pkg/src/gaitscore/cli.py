"""Command-line front end: synth, train, score, eval, inspect.

Exit codes: 0 success, 1 usage error, 2 data/validation error, 3 internal
error. Results go to stdout or ``--out``; diagnostics and the resolved
configuration echo go to stderr. Output files are written to a temporary
sibling and renamed into place, so failures never leave partial files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import assessment, evaluation, lops_features, poi_features, sequence_models
from .errors import GaitDataError
from .frames import load_sequence, save_sequence
from .synthgait import SynthParams, generate_walk

SEED_ENV_VAR = "GAITSCORE_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def main(argv=None) -> int:
    """Console entry point."""
    code = run(sys.argv[1:] if argv is None else argv)
    if argv is None:
        sys.exit(code)
    return code


def run(argv) -> int:
    """Parse and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # argparse exits itself for -h/--help
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "func", None) is None:
        print("error: no subcommand given (try --help)", file=sys.stderr)
        return 1
    try:
        args.func(args)
    except GaitDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal invariant violation
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="gaitscore",
                     description="Gait normality scoring on depth silhouettes")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("synth", parents=[], help="generate a synthetic walk sequence")
    p.add_argument("--out", required=True, help="output sequence directory")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--fps", type=float, default=13.0)
    p.add_argument("--width", type=int, default=212)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--stride-hz", type=float, default=0.9)
    p.add_argument("--swing-amp", type=float, default=8.0)
    p.add_argument("--limp", type=float, default=0.0, help="asymmetry in [0, 1]")
    p.add_argument("--sole-pad", type=int, default=0, help="sole pad height in px")
    p.add_argument("--depth-base", type=float, default=2600.0)
    p.add_argument("--noise-mm", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--label", choices=["normal", "abnormal", "none", "auto"],
                   default="auto", help="label written to the sidecar "
                   "(auto: normal iff limp == 0 and no sole pad)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train a model on normal-gait sequences")
    p.add_argument("--data", required=True,
                   help="directory of sequence subdirectories")
    p.add_argument("--out", required=True, help="model JSON path")
    _add_config_flags(p)
    p.add_argument("--threshold-margin", type=float,
                   default=assessment.DEFAULT_THRESHOLD_MARGIN)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("score", help="score one sequence against a model")
    p.add_argument("--model", required=True)
    p.add_argument("--seq", required=True, help="sequence directory")
    p.add_argument("--per-frame", action="store_true",
                   help="include per-frame scores in the output")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--out", default=None, help="write output to a file")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("eval", help="evaluate a model on a labeled test set")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="directory of labeled sequence subdirectories")
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("inspect", help="dump per-frame features for debugging")
    p.add_argument("--seq", required=True, help="sequence directory")
    p.add_argument("--model", default=None,
                   help="optional model for histogram/delta features")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_inspect)

    return parser


def _add_config_flags(p) -> None:
    p.add_argument("--fast-threshold", type=float, default=30.0,
                   help="keypoint detector depth margin, mm")
    p.add_argument("--q", type=int, default=5, help="quantization bins per dimension")
    p.add_argument("--window", type=int, default=10, help="sliding window width")
    p.add_argument("--states", type=int, default=8, help="HMM hidden states")
    p.add_argument("--mixtures", type=int, default=3, help="GMM components per state")
    p.add_argument("--proj-bins", type=int, default=10,
                   help="projection histogram bins")
    p.add_argument("--hamming-mode", choices=list(sequence_models.HAMMING_MODES),
                   default="occupancy")
    p.add_argument("--seed", type=int, default=None)


def _resolve_seed(flag_value, default: int = 0) -> int:
    if flag_value is not None:
        return flag_value
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return int(env)
    return default


def _echo(config: dict) -> None:
    print("config: " + json.dumps(config, sort_keys=True), file=sys.stderr)


def _emit(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        _atomic_write_text(Path(out_path), text)


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


# --- subcommands ---------------------------------------------------------------

def _cmd_synth(args) -> None:
    seed = _resolve_seed(args.seed)
    params = SynthParams(
        frames=args.frames, fps=args.fps, width=args.width, height=args.height,
        stride_hz=args.stride_hz, swing_amp=args.swing_amp, limp_asym=args.limp,
        sole_pad_px=args.sole_pad, depth_base=args.depth_base,
        noise_mm=args.noise_mm, seed=seed,
    )
    _echo({"subcommand": "synth", "out": args.out, **params.__dict__})
    seq = generate_walk(params)
    if args.label == "auto":
        seq.label = "normal" if (args.limp == 0 and args.sole_pad == 0) else "abnormal"
    elif args.label != "none":
        seq.label = args.label
    save_sequence(seq, args.out)
    print(f"wrote {len(seq)} frames to {args.out}", file=sys.stderr)


def _config_from_args(args) -> assessment.PipelineConfig:
    return assessment.PipelineConfig(
        fast_threshold_mm=args.fast_threshold,
        q=args.q,
        window_w=args.window,
        n_states=args.states,
        n_mix=args.mixtures,
        proj_bins=args.proj_bins,
        hamming_mode=args.hamming_mode,
        seed=_resolve_seed(args.seed),
    )


def _sequence_dirs(data_dir: str) -> list:
    root = Path(data_dir)
    if not root.is_dir():
        raise GaitDataError(f"data directory {root} does not exist")
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        raise GaitDataError(f"no sequence subdirectories under {root}")
    return dirs


def _cmd_train(args) -> None:
    config = _config_from_args(args)
    _echo({"subcommand": "train", "data": args.data, "out": args.out,
           "threshold_margin": args.threshold_margin, "threads": args.threads,
           **config.__dict__})
    sequences = []
    for d in _sequence_dirs(args.data):
        seq = load_sequence(d)
        if seq.label == "abnormal":
            print(f"skipping {d.name}: labeled abnormal", file=sys.stderr)
            continue
        sequences.append(seq)
    model = assessment.train(sequences, config,
                             threshold_margin=args.threshold_margin,
                             n_threads=args.threads)
    _atomic_write_text(Path(args.out), assessment.model_to_json(model))
    print(f"wrote model to {args.out} "
          f"(threshold {model.threshold:.6f}, "
          f"weights poi={model.weights.w_poi:.6f} lops={model.weights.w_lops:.6f})",
          file=sys.stderr)


def _cmd_score(args) -> None:
    model = assessment.load_model(args.model)
    _echo({"subcommand": "score", "model": args.model, "seq": args.seq,
           "threads": args.threads, **model.config.__dict__})
    seq = load_sequence(args.seq)
    result = assessment.assess_sequence(model, seq, n_threads=args.threads)
    doc = {
        "sequence_score": result.sequence_score,
        "decision": result.decision,
        "windows": [
            {"start_frame": w.start_frame, "s_poi": w.s_poi,
             "s_lops": w.s_lops, "s_final": w.s_final}
            for w in result.windows
        ],
    }
    if args.per_frame:
        doc["per_frame"] = [{"frame": f, "score": s} for f, s in result.frame_scores]
    if args.json:
        _emit(_canonical_json(doc), args.out)
    else:
        lines = [f"sequence score: {result.sequence_score:.6f}",
                 f"decision: {result.decision}",
                 f"windows: {len(result.windows)}"]
        if args.per_frame:
            lines += [f"frame {f:6d}: {s:.6f}" for f, s in result.frame_scores]
        _emit("\n".join(lines) + "\n", args.out)


def _cmd_eval(args) -> None:
    model = assessment.load_model(args.model)
    _echo({"subcommand": "eval", "model": args.model, "data": args.data,
           "threads": args.threads, **model.config.__dict__})
    sequences = [load_sequence(d) for d in _sequence_dirs(args.data)]
    report = evaluation.evaluate(model, sequences, n_threads=args.threads)
    _emit(_canonical_json(report.to_dict()), args.out)
    print(f"per-frame EER {report.per_frame_eer:.4f}, "
          f"per-sequence EER {report.per_sequence_eer:.4f}", file=sys.stderr)


def _cmd_inspect(args) -> None:
    seq = load_sequence(args.seq)
    model = assessment.load_model(args.model) if args.model else None
    config = model.config if model else assessment.PipelineConfig()
    _echo({"subcommand": "inspect", "seq": args.seq, "model": args.model,
           **config.__dict__})
    intr = seq.meta.intrinsics
    rows = []
    hists = []
    for t, frame in enumerate(seq.frames):
        head = seq.meta.head(t)
        ground = seq.meta.ground(t)
        kps = poi_features.detect_keypoints(frame, intr, config.fast_threshold_mm)
        lops = lops_features.compute_lops_feature(frame, head, ground,
                                                  k=config.proj_bins)
        row = {
            "frame": t,
            "n_keypoints": len(kps),
            "ratio_left": lops.ratio_left,
            "ratio_right": lops.ratio_right,
        }
        if model is not None:
            raw = poi_features.frame_raw_features(kps, head, ground)
            projected = poi_features.project(model.pca, raw) if raw.shape[0] else raw
            hist = poi_features.build_histogram(projected, model.bounds)
            hists.append(hist)
            row["n_clamped"] = hist.n_clamped
            row["delta_prev"] = (
                sequence_models.hamming_delta(hists[t], hists[t - 1],
                                              mode=config.hamming_mode)
                if t > 0 else None
            )
        rows.append(row)
    doc = {"n_frames": len(seq.frames), "label": seq.label, "frames": rows}
    if args.json:
        _emit(_canonical_json(doc), args.out)
    else:
        lines = [f"frames: {len(rows)}  label: {seq.label}"]
        for r in rows:
            extra = f"  delta={r.get('delta_prev')}" if model else ""
            lines.append(f"frame {r['frame']:6d}: kp={r['n_keypoints']:4d} "
                         f"ratios=({r['ratio_left']:.4f}, {r['ratio_right']:.4f})"
                         + extra)
        _emit("\n".join(lines) + "\n", args.out)
