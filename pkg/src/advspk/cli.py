"""Command-line entry points.

    advspk synth-corpus    generate a synthetic speech/noise/RIR tree + trials
    advspk train           one training run from a config file
    advspk evaluate        score a trial list with a checkpoint
    advspk sweep           the full condition matrix with repeats
    advspk report          re-render reports from a sweep directory
    advspk serve-benchmark run the annotation backend

Exit code is 0 only when every sub-run succeeded.
"""

import argparse
import json
import sys
from pathlib import Path

from . import experiment as exp
from .audio.io import read_train_manifest
from .benchmark import BenchmarkSet, RecordStore, create_app
from .evaluation import evaluate, load_trial_list
from .synth import (make_noise_corpus, make_rir_set, make_synthetic_corpus,
                    make_trial_list)


def _cmd_synth_corpus(args) -> int:
    out = Path(args.out)
    manifest = make_synthetic_corpus(
        out, n_speakers=args.speakers, utts_per_speaker=args.utts_per_speaker,
        channel_coloration=args.channel_coloration, seed=args.seed,
        utt_duration_s=args.duration)
    print(f"wrote {manifest}")
    if args.noise:
        print(f"wrote {make_noise_corpus(out, seed=args.seed + 1)}")
    if args.rirs:
        print(f"wrote {make_rir_set(out, seed=args.seed + 2)}")
    if args.trials > 0:
        entries = read_train_manifest(manifest)
        # hold out the last utterances of each speaker for evaluation
        held = [e for e in entries if int(e[0].split("utt")[1]) >= args.utts_per_speaker - args.eval_utts]
        path = make_trial_list(held, out / "trials.txt", n_trials=args.trials,
                               seed=args.seed + 3)
        print(f"wrote {path}")
    return 0


def _cmd_train(args) -> int:
    cfg = exp.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out_dir = Path(args.out)
    conditions = exp.conditions_from_config(cfg)
    if len(conditions) != 1:
        print("train runs a single condition; use `sweep` for a matrix",
              file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    exp.dump_config(cfg, out_dir / "config.yaml")
    seed = exp.run_seed(cfg, 0, 0)
    results = exp.execute_run(cfg, conditions[0], seed, out_dir)
    (out_dir / "results.json").write_text(json.dumps(results, indent=2))
    print(f"EER {results['eer'] * 100:.2f}%  minDCF {results['mindcf']:.3f}")
    return 0


def _cmd_evaluate(args) -> int:
    from .encoder import load_encoder
    from .trainer import Trainer  # noqa: F401  (checkpoint formats share the loader)
    import torch

    payload = torch.load(args.checkpoint, map_location="cpu", weights_only=False)
    from .encoder import Encoder, EncoderConfig
    encoder = Encoder(EncoderConfig(**payload["encoder_config"]))
    encoder.load_state_dict(payload["encoder_state"])

    trials = load_trial_list(args.trials)
    out = Path(args.out) if args.out else None
    score_file = out / "scores.txt" if out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    result = evaluate(trials, encoder, audio_root=args.audio_root,
                      score_file=score_file)
    print(f"EER {result.eer * 100:.2f}%  minDCF {result.mindcf:.3f}")
    if out:
        (out / "results.json").write_text(json.dumps(
            {"eer": result.eer, "mindcf": result.mindcf}, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    cfg = exp.load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    rows, failures = exp.run_experiment(cfg, args.out)
    report = exp.render_report(rows)
    print(report)
    out = Path(args.out)
    (out / "report.txt").write_text(report + "\n")
    (out / "report.csv").write_text(exp.render_csv(rows))
    return 1 if failures else 0


def _cmd_report(args) -> int:
    runs_dir = Path(args.runs) / "runs"
    if not runs_dir.exists():
        print(f"no runs directory under {args.runs}", file=sys.stderr)
        return 2
    results = []
    for results_path in sorted(runs_dir.glob("*/results.json")):
        results.append(json.loads(results_path.read_text()))
    if not results:
        print("no completed runs", file=sys.stderr)
        return 2
    for r in results:
        cond = r.get("condition", {})
        print(f"{cond.get('speaker_loss', '?'):<22} regime={cond.get('regime', '?'):<14} "
              f"lambda={cond.get('lambda_', 0):<4g} seed={r['seed']:<6} "
              f"EER {r['eer'] * 100:.2f}%  minDCF {r['mindcf']:.3f}")
    return 0


def _cmd_serve_benchmark(args) -> int:
    import uvicorn

    state = Path(args.state)
    state.mkdir(parents=True, exist_ok=True)
    benchmark_path = state / "benchmark.json"
    if benchmark_path.exists():
        benchmark = BenchmarkSet.load(benchmark_path)
    else:
        trials = load_trial_list(args.trials)
        benchmark = BenchmarkSet.from_trials(trials, n_subsets=args.subsets)
        benchmark.save(benchmark_path)
    store = RecordStore(state / "records")
    app = create_app(benchmark, store, audio_root=args.audio_root,
                     static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advspk")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-corpus", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--speakers", type=int, default=32)
    p.add_argument("--utts-per-speaker", type=int, default=20)
    p.add_argument("--duration", type=float, default=4.0)
    p.add_argument("--channel-coloration", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", action="store_true", help="also emit a noise bank")
    p.add_argument("--rirs", action="store_true", help="also emit RIR filters")
    p.add_argument("--trials", type=int, default=0,
                   help="emit a trial list of this many pairs over held-out utts")
    p.add_argument("--eval-utts", type=int, default=4,
                   help="held-out utterances per speaker for the trial list")
    p.set_defaults(fn=_cmd_synth_corpus)

    p = sub.add_parser("train", help="single training run")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="score a trial list with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--audio-root", default=".")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("sweep", help="run the condition matrix with repeats")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("report", help="print results from a sweep directory")
    p.add_argument("--runs", required=True)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("serve-benchmark", help="run the annotation backend")
    p.add_argument("--trials", required=True)
    p.add_argument("--audio-root", default=".")
    p.add_argument("--state", required=True, help="directory for benchmark state")
    p.add_argument("--subsets", type=int, default=4)
    p.add_argument("--static", default=None, help="built UI directory to serve")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8077)
    p.set_defaults(fn=_cmd_serve_benchmark)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
