"""Command-line interface.

Subcommands: generate, graph, features, train, predict, eval, export.
Exit codes: 0 ok, 1 usage/config error, 2 input validation error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

from .assignment import extract_voices
from .config import ExperimentConfig, build_config, load_config
from .errors import (
    CheckpointError,
    ConfigError,
    ConsistencyError,
    NumericalError,
    ParseError,
    SizeError,
    StateError,
    TrainingDivergedError,
    ValidationError,
    VoicesepError,
)
from .features import assemble_features
from .graph import build_graph, edge_statistics
from .score import load_score, serialize_score
from .synthesis import SyntheticConfig, generate_synthetic_score
from .training import evaluate, load_model, predict_piece, prepare_piece, train
from .viz import graph_dot, pianoroll_svg

MATRIX_MAGIC = b"VSEPMAT1"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _write_atomic(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)


def _write_matrix(path: Path, matrix: np.ndarray) -> None:
    header = MATRIX_MAGIC + struct.pack("<QQ", *matrix.shape)
    _write_atomic(path, header + np.ascontiguousarray(matrix, dtype="<f8").tobytes())


def _cmd_generate(args) -> int:
    config = SyntheticConfig(
        divisions=args.divisions,
        pitch_range=(args.pitch_min, args.pitch_max),
        max_step=args.max_step,
        durations=tuple(args.durations),
        rest_prob=args.rest_prob,
    )
    score = generate_synthetic_score(args.seed, args.voices, args.notes, config)
    data = serialize_score(score)
    if args.out:
        _write_atomic(Path(args.out), data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return 0


def _cmd_graph(args) -> int:
    score = load_score(args.score)
    graph = build_graph(
        score,
        window_measures=args.window,
        during_inclusive=args.during_inclusive,
        silence_last_offset=args.silence_last_offset,
    )
    stats = edge_statistics(graph)
    payload = json.dumps(stats, indent=2) + "\n"
    if args.json:
        _write_atomic(Path(args.json), payload.encode("utf-8"))
    else:
        sys.stdout.write(payload)
    if args.dot:
        _write_atomic(Path(args.dot), (graph_dot(graph) + "\n").encode("utf-8"))
    return 0


def _cmd_features(args) -> int:
    score = load_score(args.score)
    graph = build_graph(score, window_measures=args.window)
    matrix = assemble_features(score, graph)
    if args.csv:
        lines = [",".join(f"{v:.17g}" for v in row) for row in matrix]
        _write_atomic(Path(args.csv), ("\n".join(lines) + "\n").encode("utf-8"))
    out = args.out or (None if args.csv else Path(args.score).with_suffix(".features.bin"))
    if out:
        _write_matrix(Path(out), matrix)
        print(f"wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to {out}")
    return 0


def _config_from_args(args) -> ExperimentConfig:
    overrides = {
        "epochs": args.epochs,
        "seed": args.seed,
        "patience": args.patience,
        "corpus_dir": args.corpus,
        "checkpoint_path": args.checkpoint,
        "log_path": args.log,
        "alpha_mode": args.alpha_mode,
        "tau": args.tau,
    }
    if args.config:
        return load_config(args.config, overrides)
    doc = {k: v for k, v in overrides.items() if v is not None}
    return build_config(doc)


def _cmd_train(args) -> int:
    config = _config_from_args(args)
    result = train(config)
    print(f"best epoch {result.best_epoch}: val F1 {result.best_val_f1:.4f}")
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"log: {result.log_path}")
    return 0


def _cmd_predict(args) -> int:
    model, metadata = load_model(args.checkpoint)
    score = load_score(args.score)
    config = ExperimentConfig(train_pieces=[Path(args.score)], window_measures=args.window)
    piece = prepare_piece(score, config, name=Path(args.score).stem, labeled=score.has_voices() and len(score.notes) > 0)
    scores, links, voices = predict_piece(model, piece, tau=args.tau, postprocess=args.postprocess)

    links_payload = {
        "links": sorted(
            [[u, v, float(p)] for (u, v), p in scores.as_dict().items() if (u, v) in links]
        )
    }
    out_links = Path(args.out_links or Path(args.score).with_suffix(".links.json"))
    _write_atomic(out_links, (json.dumps(links_payload, indent=1) + "\n").encode("utf-8"))
    print(f"wrote {len(links_payload['links'])} links to {out_links}")

    if voices is None and args.postprocess == "none":
        try:
            voices = extract_voices(piece.score, links)
        except VoicesepError:
            print("thresholded links violate degree constraints; no voiced score written "
                  "(use --postprocess greedy or la)", file=sys.stderr)
    if voices is not None:
        voiced = piece.score.with_voices(voices.voice_of())
        out_score = Path(args.out_score or Path(args.score).with_suffix(".voiced.json"))
        _write_atomic(out_score, serialize_score(voiced))
        print(f"wrote {voices.n_voices} voices to {out_score}")
    return 0


def _cmd_eval(args) -> int:
    model, metadata = load_model(args.checkpoint)
    paths = sorted(Path(args.pieces).glob("*.json")) if Path(args.pieces).is_dir() else [Path(args.pieces)]
    if not paths:
        raise ConfigError(f"no pieces found at {args.pieces}")
    config = ExperimentConfig(train_pieces=paths, window_measures=args.window)
    pieces = [prepare_piece(load_score(p), config, name=p.stem) for p in paths]
    result = evaluate(model, pieces, tau=args.tau, postprocess=args.postprocess)
    payload = {
        "micro": {m: r.as_dict() for m, r in result.micro.items()},
        "macro": {m: r.as_dict() for m, r in result.macro.items()},
        "per_piece": {
            m: {name: r.as_dict() for name, r in rows.items()} for m, rows in result.per_piece.items()
        },
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.json:
        _write_atomic(Path(args.json), text.encode("utf-8"))
    else:
        sys.stdout.write(text)
    return 0


def _cmd_export(args) -> int:
    score = load_score(args.score)
    links = None
    if args.links:
        doc = json.loads(Path(args.links).read_text(encoding="utf-8"))
        links = [(u, v) for u, v, *_ in doc["links"]]
    if args.format == "svg":
        voice_of = None
        if links is not None and not score.has_voices():
            voice_of = extract_voices(score, set(links)).voice_of()
        if links is None and score.has_voices():
            from .score import derive_ground_truth_links

            links = sorted(derive_ground_truth_links(score).links)
        svg = pianoroll_svg(score, voice_of=voice_of, links=links)
        _write_atomic(Path(args.out), (svg + "\n").encode("utf-8"))
    else:
        graph = build_graph(score, window_measures=args.window)
        _write_atomic(Path(args.out), (graph_dot(graph) + "\n").encode("utf-8"))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voicesep", description="Voice separation for quantized symbolic music.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[], help="generate a synthetic labeled score")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--voices", type=int, default=3)
    p.add_argument("--notes", type=int, default=40, help="notes per voice")
    p.add_argument("--divisions", type=int, default=4)
    p.add_argument("--pitch-min", type=int, default=36)
    p.add_argument("--pitch-max", type=int, default=84)
    p.add_argument("--max-step", type=int, default=5)
    p.add_argument("--durations", type=int, nargs="+", default=[2, 4, 8])
    p.add_argument("--rest-prob", type=float, default=0.15)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("graph", help="edge statistics and optional DOT export")
    p.add_argument("score", type=Path)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--during-inclusive", action="store_true")
    p.add_argument("--silence-last-offset", action="store_true")
    p.add_argument("--json", type=Path, help="write stats JSON here instead of stdout")
    p.add_argument("--dot", type=Path)
    p.set_defaults(func=_cmd_graph)

    p = sub.add_parser("features", help="dump the note feature matrix")
    p.add_argument("score", type=Path)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--out", type=Path, help="binary matrix output path")
    p.add_argument("--csv", type=Path, help="also write a CSV copy")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", type=Path)
    p.add_argument("--corpus", type=Path)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--alpha-mode", choices=["ramp", "fixed", "none"], dest="alpha_mode")
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--log", type=Path)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="predict links and voices for one score")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--score", type=Path, required=True)
    p.add_argument("--postprocess", choices=["none", "greedy", "la"], default="greedy")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--out-score", type=Path)
    p.add_argument("--out-links", type=Path)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("eval", help="evaluate a checkpoint on labeled pieces")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--pieces", type=Path, required=True, help="piece file or directory of .json scores")
    p.add_argument("--postprocess", choices=["greedy", "la", "both"], default="both")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--json", type=Path)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("export", help="pianoroll SVG or typed-graph DOT")
    p.add_argument("--score", type=Path, required=True)
    p.add_argument("--links", type=Path, help="links JSON from predict")
    p.add_argument("--format", choices=["svg", "dot"], default="svg")
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"voicesep: config error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError, ConsistencyError) as exc:
        print(f"voicesep: invalid input: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, StateError, SizeError, NumericalError, TrainingDivergedError, OSError) as exc:
        print(f"voicesep: {exc}", file=sys.stderr)
        return 3
    except VoicesepError as exc:
        print(f"voicesep: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
