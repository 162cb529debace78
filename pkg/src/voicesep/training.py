"""Training loop, evaluation, and single-piece prediction.

One piece is one optimization step: forward over its candidate set,
classification loss on a freshly resampled positive/negative batch,
regularization over the full candidate set, backward, AdamW update.
Validation F1 (thresholded links, no postprocessing) drives early
stopping and best-checkpoint selection.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .assignment import apply_mask_and_threshold, linear_assignment, resolve_greedy
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig
from .errors import CheckpointError, ConfigError, TrainingDivergedError
from .features import N_INTRINSIC, assemble_features
from .graph import ScoreGraph, build_graph
from .losses import bce_loss, indicator_vectors, reg_loss, subsample_negatives
from .metrics import MetricsReport, link_metrics, macro_metrics, pool_metrics
from .model import LinkScores, ModelConfig, VoiceLinkModel, threshold_links
from .optim import OptimizerState, adamw_step
from .score import Score, load_score, preprocess_monophonic

__all__ = [
    "PreparedPiece",
    "prepare_piece",
    "train",
    "TrainingResult",
    "EpochStats",
    "evaluate",
    "EvalResult",
    "predict_piece",
    "load_model",
]

_PIECE_SEED_STRIDE = 1_000_003


@dataclass
class PreparedPiece:
    """Everything the loop needs for one piece, computed once."""

    name: str
    score: Score
    graph: ScoreGraph
    features: np.ndarray
    zeta: np.ndarray
    xi: np.ndarray
    target_links: set[tuple[str, str]]

    @property
    def candidate_pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple(self.graph.candidate_pairs())


def prepare_piece(score: Score, config: ExperimentConfig, name: str = "piece",
                  labeled: bool = True) -> PreparedPiece:
    """Preprocess, build graph and features, cache training targets."""
    if labeled:
        score, _ = preprocess_monophonic(score, truncate_overlaps=config.truncate_overlaps)
    graph = build_graph(
        score,
        window_measures=config.window_measures,
        during_inclusive=config.during_inclusive,
        silence_last_offset=config.silence_last_offset,
        with_targets=labeled,
    )
    features = assemble_features(score, graph)
    if labeled and graph.targets is not None:
        zeta, xi = indicator_vectors(graph)
        targets = set(graph.targets.links)
    else:
        zeta = np.zeros(graph.n_nodes)
        xi = np.zeros(graph.n_nodes)
        targets = set()
    return PreparedPiece(name, score, graph, features, zeta, xi, targets)


def _flip_pe_signs(features: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    flipped = features.copy()
    signs = rng.choice([-1.0, 1.0], size=features.shape[1] - N_INTRINSIC)
    flipped[:, N_INTRINSIC:] *= signs
    return flipped


def _split_pieces(config: ExperimentConfig) -> tuple[list[Path], list[Path]]:
    if config.train_pieces:
        return list(config.train_pieces), list(config.val_pieces)
    paths = sorted(Path(config.corpus_dir).glob("*.json"))
    if not paths:
        raise ConfigError(f"no .json scores found in {config.corpus_dir}")
    rng = np.random.default_rng(config.split_seed)
    order = rng.permutation(len(paths))
    n_val = int(round(len(paths) * config.val_fraction))
    val_idx = set(order[:n_val].tolist())
    train = [paths[i] for i in range(len(paths)) if i not in val_idx]
    val = [paths[i] for i in sorted(val_idx)]
    return train, val


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    clf_loss: float
    reg_loss: float
    alpha: float
    val_precision: float
    val_recall: float
    val_f1: float


@dataclass
class TrainingResult:
    best_epoch: int
    best_val_f1: float
    checkpoint_path: Path
    log_path: Path
    history: list[EpochStats] = field(default_factory=list)


def _greedy_val_metrics(model: VoiceLinkModel, pieces: list[PreparedPiece], tau: float) -> MetricsReport:
    reports = []
    for piece in pieces:
        scores = model.predict_links(piece.graph, piece.features)
        reports.append(link_metrics(threshold_links(scores, tau), piece.target_links))
    return pool_metrics(reports)


def train(config: ExperimentConfig, scores_by_name: dict[str, Score] | None = None) -> TrainingResult:
    """Run the full optimization and save the best checkpoint.

    Pieces come from ``scores_by_name`` when given (tests, synthetic
    corpora built in memory), else from the config's corpus paths.
    """
    config.validate()
    if scores_by_name is not None:
        names = list(scores_by_name)
        train_scores = [(n, scores_by_name[n]) for n in names]
        val_scores: list[tuple[str, Score]] = []
        if config.val_fraction > 0 and len(train_scores) > 1:
            rng = np.random.default_rng(config.split_seed)
            order = rng.permutation(len(train_scores))
            n_val = int(round(len(train_scores) * config.val_fraction))
            val_set = set(order[:n_val].tolist())
            val_scores = [train_scores[i] for i in sorted(val_set)]
            train_scores = [train_scores[i] for i in range(len(train_scores)) if i not in val_set]
    else:
        train_paths, val_paths = _split_pieces(config)
        train_scores = [(p.stem, load_score(p)) for p in train_paths]
        val_scores = [(p.stem, load_score(p)) for p in val_paths]
    if not train_scores:
        raise ConfigError("training split is empty")

    train_pieces = [prepare_piece(s, config, name) for name, s in train_scores]
    val_pieces = [prepare_piece(s, config, name) for name, s in val_scores]

    model = VoiceLinkModel(config.model, seed=config.seed)
    optimizer = OptimizerState.initialize(model.parameters(), config.optimizer)

    best_f1 = -1.0
    best_epoch = -1
    best_params: dict[str, np.ndarray] = {}
    epochs_since_best = 0
    history: list[EpochStats] = []

    for epoch in range(config.epochs):
        alpha = config.alpha_at(epoch)
        clf_losses = []
        reg_losses = []
        for piece_idx, piece in enumerate(train_pieces):
            features = piece.features
            if config.pe_sign_flip:
                rng = np.random.default_rng([config.seed, epoch, piece_idx])
                features = _flip_pe_signs(features, rng)
            probs = model.candidate_probabilities(piece.graph, features)
            batch = subsample_negatives(
                piece.graph, seed=config.seed * _PIECE_SEED_STRIDE + piece_idx, epoch=epoch
            )
            l_clf = bce_loss(batch, probs)
            l_reg = reg_loss(
                probs, piece.graph.candidates[0], piece.graph.candidates[1],
                piece.zeta, piece.xi, piece.graph.n_nodes,
            )
            loss = l_clf + alpha * l_reg
            if not np.isfinite(loss.data):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, piece {piece.name}",
                    epoch=epoch, piece=piece.name,
                )
            ad.zero_grad(model.parameters())
            loss.backward()
            adamw_step(model.parameters(), optimizer)
            clf_losses.append(float(l_clf.data))
            reg_losses.append(float(l_reg.data))

        monitor = val_pieces if val_pieces else train_pieces
        val = _greedy_val_metrics(model, monitor, config.tau)
        history.append(EpochStats(
            epoch=epoch,
            clf_loss=float(np.mean(clf_losses)),
            reg_loss=float(np.mean(reg_losses)),
            alpha=alpha,
            val_precision=val.precision,
            val_recall=val.recall,
            val_f1=val.f1,
        ))

        if val.f1 > best_f1:
            best_f1 = val.f1
            best_epoch = epoch
            best_params = {n: p.data.copy() for n, p in model.parameters().items()}
            epochs_since_best = 0
        else:
            epochs_since_best += 1
        if config.target_f1 is not None and val.f1 >= config.target_f1:
            break
        if epochs_since_best >= config.patience:
            break

    for name, p in model.parameters().items():
        p.data = best_params[name]
    config.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        config.checkpoint_path,
        model.parameters(),
        config.model.to_dict(),
        optimizer=optimizer,
        metadata={
            "best_epoch": best_epoch,
            "best_val_f1": best_f1,
            "tau": config.tau,
            "window_measures": config.window_measures,
            "seed": config.seed,
        },
    )
    write_log(config.log_path, history)
    return TrainingResult(best_epoch, best_f1, config.checkpoint_path, config.log_path, history)


def write_log(path: Path, history: list[EpochStats]) -> None:
    """Atomically write the per-epoch CSV training log."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "clf_loss", "reg_loss", "alpha", "val_precision", "val_recall", "val_f1"])
        for row in history:
            writer.writerow([
                row.epoch,
                f"{row.clf_loss:.17g}",
                f"{row.reg_loss:.17g}",
                f"{row.alpha:.17g}",
                f"{row.val_precision:.17g}",
                f"{row.val_recall:.17g}",
                f"{row.val_f1:.17g}",
            ])
    tmp.replace(path)


@dataclass
class EvalResult:
    per_piece: dict[str, dict[str, MetricsReport]]  # mode -> piece -> report
    micro: dict[str, MetricsReport]
    macro: dict[str, MetricsReport]


def evaluate(
    model: VoiceLinkModel,
    pieces: list[PreparedPiece],
    tau: float = 0.5,
    postprocess: str = "both",
) -> EvalResult:
    """Score link predictions against ground truth for each piece.

    ``postprocess`` selects the reported rows: ``greedy`` (thresholded
    raw predictions), ``la`` (matching then threshold), or ``both``.
    """
    modes = {"greedy": ["greedy"], "la": ["la"], "both": ["greedy", "la"]}.get(postprocess)
    if modes is None:
        raise ConfigError(f"postprocess must be greedy|la|both, got {postprocess!r}")
    per_piece: dict[str, dict[str, MetricsReport]] = {m: {} for m in modes}
    for piece in pieces:
        scores = model.predict_links(piece.graph, piece.features)
        for mode in modes:
            if mode == "greedy":
                predicted = threshold_links(scores, tau)
            else:
                predicted = apply_mask_and_threshold(scores, linear_assignment(scores), tau)
            per_piece[mode][piece.name] = link_metrics(predicted, piece.target_links)
    micro = {m: pool_metrics(list(per_piece[m].values())) for m in modes}
    macro = {m: macro_metrics(list(per_piece[m].values())) for m in modes}
    return EvalResult(per_piece=per_piece, micro=micro, macro=macro)


def predict_piece(
    model: VoiceLinkModel,
    piece: PreparedPiece,
    tau: float = 0.5,
    postprocess: str = "greedy",
):
    """Predict links for one piece; returns (scores, links, voices).

    ``postprocess='none'`` thresholds only, which may leave degree
    conflicts, so no voice assignment is derived; ``greedy`` resolves
    conflicts best-first; ``la`` solves the matching problem first.
    """
    from .assignment import extract_voices

    scores = model.predict_links(piece.graph, piece.features)
    if postprocess == "none":
        return scores, threshold_links(scores, tau), None
    if postprocess == "greedy":
        links = resolve_greedy(scores, tau)
    elif postprocess == "la":
        links = apply_mask_and_threshold(scores, linear_assignment(scores), tau)
    else:
        raise ConfigError(f"postprocess must be none|greedy|la, got {postprocess!r}")
    return scores, links, extract_voices(piece.score, links)


def load_model(path) -> tuple[VoiceLinkModel, dict]:
    """Load a checkpoint into a fresh model; returns (model, metadata)."""
    ckpt = load_checkpoint(path)
    try:
        model = VoiceLinkModel.from_checkpoint(ckpt)
    except TypeError as exc:
        raise CheckpointError(f"checkpoint model config is unusable: {exc}") from exc
    return model, ckpt.metadata
