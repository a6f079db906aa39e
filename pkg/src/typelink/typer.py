"""Multi-label semantic-group prediction from a mention and its context.

The encoder is a hashed bag of prefixed tokens; the classifier is one
logistic-regression head per semantic group. Scores from any external model
can be brought in through :func:`import_scores` and used interchangeably.
"""

from __future__ import annotations

import bisect
import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    EmptyDataset,
    NumericalDivergence,
    ParseError,
    RangeError,
    UndefinedMetric,
    UnknownGroup,
)
from .lexicon import Token, normalize, tokenize
from .type_system import groups_of

log = logging.getLogger(__name__)

MODEL_VERSION = 1
DEFAULT_HASH_DIM = 2 ** 14
DEFAULT_WINDOW_K = 64
MIN_THRESHOLD, MAX_THRESHOLD = 0.001, 1.0

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@lru_cache(maxsize=1 << 18)
def stable_hash(text: str) -> int:
    """64-bit FNV-1a over the UTF-8 bytes of ``text``."""
    h = _FNV_OFFSET
    for b in text.encode("utf-8"):
        h ^= b
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class TrainingExample:
    left_context: tuple[str, ...]
    mention_tokens: tuple[str, ...]
    right_context: tuple[str, ...]
    labels: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.mention_tokens:
            raise ValueError("mention_tokens must be non-empty")


def _check_dim(hash_dim: int) -> None:
    if hash_dim < 2 or hash_dim & (hash_dim - 1):
        raise ValueError(f"hash_dim must be a power of two, got {hash_dim}")


def feature_strings(example: TrainingExample) -> list[str]:
    m = example.mention_tokens
    feats = [f"m:{t}" for t in m]
    feats += [f"mb:{a} {b}" for a, b in zip(m, m[1:])]
    feats += [f"l:{t}" for t in example.left_context]
    feats += [f"r:{t}" for t in example.right_context]
    return feats


def featurize(example: TrainingExample, hash_dim: int) -> dict[int, float]:
    """Sparse hashed feature counts, keyed by index in ``[0, hash_dim)``."""
    _check_dim(hash_dim)
    vec: dict[int, float] = {}
    for f in feature_strings(example):
        idx = stable_hash(f) & (hash_dim - 1)
        vec[idx] = vec.get(idx, 0.0) + 1.0
    return vec


def feature_matrix(examples: Sequence[TrainingExample], hash_dim: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for i, ex in enumerate(examples):
        for j, v in sorted(featurize(ex, hash_dim).items()):
            rows.append(i)
            cols.append(j)
            vals.append(v)
    return sp.csr_matrix((vals, (rows, cols)), shape=(len(examples), hash_dim), dtype=np.float64)


def label_matrix(examples: Sequence[TrainingExample], groups: Sequence[str]) -> np.ndarray:
    pos = {g: i for i, g in enumerate(groups)}
    y = np.zeros((len(examples), len(groups)))
    for i, ex in enumerate(examples):
        for g in ex.labels:
            if g not in pos:
                raise UnknownGroup(f"unknown semantic group {g!r}")
            y[i, pos[g]] = 1.0
    return y


@dataclass
class TyperModel:
    groups: tuple[str, ...]
    weights: np.ndarray  # (n_groups, hash_dim)
    bias: np.ndarray  # (n_groups,)
    hash_dim: int = DEFAULT_HASH_DIM
    window_k: int = DEFAULT_WINDOW_K
    seed: int = 0
    version: int = MODEL_VERSION

    @classmethod
    def zeros(cls, groups: Sequence[str], hash_dim: int = DEFAULT_HASH_DIM,
              window_k: int = DEFAULT_WINDOW_K, seed: int = 0) -> "TyperModel":
        _check_dim(hash_dim)
        g = len(groups)
        return cls(tuple(groups), np.zeros((g, hash_dim)), np.zeros(g), hash_dim, window_k, seed)

    def copy(self) -> "TyperModel":
        return replace(self, weights=self.weights.copy(), bias=self.bias.copy())

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "hash_dim": self.hash_dim,
            "window_k": self.window_k,
            "seed": self.seed,
            "groups": [
                {"name": g, "bias": float(self.bias[i]), "weights": self.weights[i].tolist()}
                for i, g in enumerate(self.groups)
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "TyperModel":
        groups = obj["groups"]
        hash_dim = int(obj["hash_dim"])
        weights = np.array([g["weights"] for g in groups], dtype=np.float64).reshape(len(groups), hash_dim)
        bias = np.array([g["bias"] for g in groups], dtype=np.float64)
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
            raise ParseError("model contains non-finite weights")
        return cls(tuple(g["name"] for g in groups), weights, bias, hash_dim,
                   int(obj["window_k"]), int(obj["seed"]), int(obj.get("version", MODEL_VERSION)))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "TyperModel":
        with open(path, encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid model JSON: {exc.msg}", path) from None
        try:
            return cls.from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed model: {exc}", path) from None


@dataclass(frozen=True)
class TrainConfig:
    hash_dim: int = DEFAULT_HASH_DIM
    window_k: int = DEFAULT_WINDOW_K
    epochs: int = 10
    learning_rate: float = 0.5
    l2: float = 1e-6
    seed: int = 0
    batch_size: int = 32

    def validate(self) -> None:
        _check_dim(self.hash_dim)
        if self.window_k < 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("window_k must be >= 0, epochs and batch_size >= 1")
        if not (self.learning_rate > 0 and self.l2 >= 0):
            raise ValueError("learning_rate must be > 0 and l2 >= 0")


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def _log_loss(z: np.ndarray, y: np.ndarray) -> float:
    # sum over groups of -[y log s + (1-y) log(1-s)], written stably
    return float(np.sum(np.logaddexp(0.0, z) - y * z))


def batch_loss_and_grad(model: TyperModel, x: sp.csr_matrix, y: np.ndarray, l2: float = 0.0):
    """Mean (over rows) summed-over-groups logistic loss plus ``l2/2 * ||W||^2``.

    Returns ``(loss, grad_weights, grad_bias)``; bias is not regularized.
    """
    n = x.shape[0]
    z = np.asarray(x @ model.weights.T) + model.bias
    loss = _log_loss(z, y) / n + 0.5 * l2 * float(np.sum(model.weights * model.weights))
    dz = (sigmoid(z) - y) / n
    grad_w = np.asarray((x.T @ dz).T) + l2 * model.weights
    grad_b = dz.sum(axis=0)
    return loss, grad_w, grad_b


def example_loss_and_grad(model: TyperModel, example: TrainingExample, l2: float = 0.0):
    x = feature_matrix([example], model.hash_dim)
    y = label_matrix([example], model.groups)
    return batch_loss_and_grad(model, x, y, l2)


def train(dataset: Sequence[TrainingExample], config: TrainConfig, groups: Sequence[str],
          init: TyperModel | None = None) -> tuple[TyperModel, list[float]]:
    """Fit one-vs-rest logistic heads with mini-batch SGD.

    Passing ``init`` starts from an existing model (pretrain, then fine-tune).
    Shuffling is driven by ``config.seed`` only, so equal inputs give
    bit-identical weights.

    Returns:
        The trained model and the full-dataset loss after every epoch.
    """
    if not dataset:
        raise EmptyDataset("cannot train on an empty dataset")
    config.validate()
    if init is not None:
        if init.hash_dim != config.hash_dim or init.window_k != config.window_k:
            raise ValueError("init model hash_dim/window_k differ from config")
        if tuple(init.groups) != tuple(groups):
            raise ValueError("init model groups differ from the requested label set")
        model = init.copy()
        model.seed = config.seed
    else:
        model = TyperModel.zeros(groups, config.hash_dim, config.window_k, config.seed)

    x = feature_matrix(dataset, config.hash_dim)
    y = label_matrix(dataset, model.groups)
    n = x.shape[0]
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            idx = order[lo:lo + config.batch_size]
            _, gw, gb = batch_loss_and_grad(model, x[idx], y[idx], config.l2)
            model.weights -= config.learning_rate * gw
            model.bias -= config.learning_rate * gb
        loss, _, _ = batch_loss_and_grad(model, x, y, config.l2)
        if not math.isfinite(loss) or not np.all(np.isfinite(model.weights)):
            raise NumericalDivergence(epoch)
        history.append(loss)
        log.debug("epoch %d loss %.6f", epoch, loss)
    return model, history


def predict_matrix(model: TyperModel, examples: Sequence[TrainingExample]) -> np.ndarray:
    """Scores of shape ``(len(examples), len(model.groups))``."""
    if not examples:
        return np.zeros((0, len(model.groups)))
    x = feature_matrix(examples, model.hash_dim)
    return sigmoid(np.asarray(x @ model.weights.T) + model.bias)


def predict_scores(model: TyperModel, example: TrainingExample) -> dict[str, float]:
    row = predict_matrix(model, [example])[0]
    return {g: float(s) for g, s in zip(model.groups, row)}


# ---------------------------------------------------------------- thresholds


@dataclass
class Thresholds:
    values: dict[str, float]
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        for g, t in self.values.items():
            if not MIN_THRESHOLD < t < MAX_THRESHOLD:
                raise RangeError(f"threshold for {g!r} outside (0.001, 1): {t}")

    @classmethod
    def uniform(cls, groups: Iterable[str], value: float = 0.5) -> "Thresholds":
        return cls({g: value for g in groups})

    def to_json(self) -> dict:
        return {"thresholds": dict(self.values), "warnings": list(self.warnings)}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Thresholds":
        return cls({str(g): float(t) for g, t in obj["thresholds"].items()}, list(obj.get("warnings", [])))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=False)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "Thresholds":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_json(json.load(fh))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed thresholds file: {exc}", path) from None


def default_grid() -> list[float]:
    """40 log-spaced points strictly inside (0.001, 1), plus 0.5."""
    pts = np.geomspace(MIN_THRESHOLD, MAX_THRESHOLD, 42)[1:-1]
    return sorted(set(float(p) for p in pts) | {0.5})


def binary_f1(scores: np.ndarray, gold: np.ndarray, threshold: float) -> float:
    pred = scores >= threshold
    tp = float(np.sum(pred & gold))
    fp = float(np.sum(pred & ~gold))
    fn = float(np.sum(~pred & gold))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def tune_from_scores(scores: np.ndarray, gold: np.ndarray, groups: Sequence[str],
                     grid: Sequence[float] | None = None) -> Thresholds:
    """Per-group threshold maximizing binary F1 on the grid; ties go to the smaller value."""
    grid = default_grid() if grid is None else list(grid)
    if not grid:
        raise ValueError("threshold grid is empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("threshold grid must be strictly increasing")
    if grid[0] <= MIN_THRESHOLD or grid[-1] >= MAX_THRESHOLD:
        raise RangeError("threshold grid must lie inside (0.001, 1)")
    gold = gold.astype(bool)
    values, warnings = {}, []
    for j, g in enumerate(groups):
        if not gold[:, j].any():
            values[g] = 0.5
            msg = f"group {g!r} has no positive validation example; threshold defaults to 0.5"
            warnings.append(msg)
            log.warning(msg)
            continue
        best_t, best_f1 = grid[0], -1.0
        for t in grid:
            f1 = binary_f1(scores[:, j], gold[:, j], t)
            if f1 > best_f1:
                best_t, best_f1 = t, f1
        values[g] = best_t
    return Thresholds(values, warnings)


def tune_thresholds(model: TyperModel, validation: Sequence[TrainingExample],
                    grid: Sequence[float] | None = None) -> Thresholds:
    scores = predict_matrix(model, validation)
    gold = label_matrix(validation, model.groups)
    return tune_from_scores(scores, gold, model.groups, grid)


def groups_above(scores: Mapping[str, float], thresholds: Thresholds) -> set[str]:
    """Groups whose score reaches their threshold (inclusive); empty means abstain."""
    return {g for g, s in scores.items() if s >= thresholds.values.get(g, 0.5)}


def predict_groups(model: TyperModel, thresholds: Thresholds, example: TrainingExample) -> set[str]:
    return groups_above(predict_scores(model, example), thresholds)


# ---------------------------------------------------------------- PR-AUC


@dataclass(frozen=True)
class ScoredExample:
    scores: Mapping[str, float]
    gold: frozenset[str]


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """Step-interpolated area under the precision-recall curve.

    Thresholds sweep the distinct scores in descending order; tied scores form
    one sweep point.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetric("no positive examples")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of each run of equal scores
    last = np.r_[np.nonzero(np.diff(s))[0], len(s) - 1]
    tp, fp = tp[last].astype(np.float64), fp[last].astype(np.float64)
    precision = tp / (tp + fp)
    recall = tp / n_pos
    steps = np.diff(np.r_[0.0, recall])
    return float(np.sum(steps * precision))


def pr_auc(scored: Sequence[ScoredExample], mode: str = "micro", groups: Sequence[str] | None = None) -> float:
    """Micro (pooled pairs) or macro (mean over groups with a positive) PR-AUC."""
    if not scored:
        raise UndefinedMetric("no scored examples")
    if groups is None:
        groups = sorted(scored[0].scores)
    s = np.array([[ex.scores.get(g, 0.0) for g in groups] for ex in scored])
    y = np.array([[g in ex.gold for g in groups] for ex in scored])
    return pr_auc_arrays(s, y, mode)


def pr_auc_arrays(scores: np.ndarray, gold: np.ndarray, mode: str = "micro") -> float:
    gold = np.asarray(gold, dtype=bool)
    if not gold.any():
        raise UndefinedMetric("no positive labels in any group")
    if mode == "micro":
        return average_precision(scores.ravel(), gold.ravel())
    if mode == "macro":
        cols = [j for j in range(gold.shape[1]) if gold[:, j].any()]
        return float(np.mean([average_precision(scores[:, j], gold[:, j]) for j in cols]))
    raise ValueError(f"mode must be 'micro' or 'macro', got {mode!r}")


# ---------------------------------------------------------------- context + IO


class DocumentContext:
    """Tokenized document supporting fast context-window extraction."""

    def __init__(self, text: str):
        self.text = text
        self.tokens: list[Token] = tokenize(text)
        self._starts = [t.start for t in self.tokens]
        self._ends = [t.end for t in self.tokens]

    def example(self, start: int, end: int, k: int, labels: Iterable[str] = ()) -> TrainingExample | None:
        """Mention ``text[start:end]`` with up to ``k`` tokens each side; None if it has no tokens."""
        mention = tuple(normalize(self.text[start:end]))
        if not mention:
            return None
        left_hi = bisect.bisect_right(self._ends, start)
        right_lo = bisect.bisect_left(self._starts, end)
        left = tuple(t.text for t in self.tokens[max(0, left_hi - k):left_hi]) if k else ()
        right = tuple(t.text for t in self.tokens[right_lo:right_lo + k])
        return TrainingExample(left, mention, right, frozenset(labels))


def import_scores(path: str | Path, groups: Sequence[str]) -> list[tuple[tuple[str, int, int], dict[str, float]]]:
    """Read externally computed group scores.

    Records are ``{"doc_id", "start", "end", "scores": {group: score}}``;
    groups not listed score 0.0.
    """
    known = set(groups)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                key = (rec["doc_id"], int(rec["start"]), int(rec["end"]))
                raw = rec["scores"]
                if not isinstance(raw, dict):
                    raise TypeError("scores must be an object")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(f"bad score record: {exc}", path, lineno) from None
            scores = {g: 0.0 for g in groups}
            for g, v in raw.items():
                if g not in known:
                    raise UnknownGroup(f"{path}:{lineno}: unknown semantic group {g!r}")
                v = float(v)
                if not 0.0 <= v <= 1.0:
                    raise RangeError(f"{path}:{lineno}: score {v} for {g!r} outside [0, 1]")
                scores[g] = v
            out.append((key, scores))
    return out


def build_examples(docs, annotations, lexicon, type_map, window_k: int,
                   warnings: list[str] | None = None) -> list[TrainingExample]:
    """Join ``(doc_id, start, end, cui)`` annotations with documents into labelled examples.

    Labels are the semantic groups of the annotated concept. Annotations whose
    cui is unknown or whose span holds no token are skipped with a warning.
    """
    by_id = docs if isinstance(docs, Mapping) else {d.id: d for d in docs}
    contexts: dict[str, DocumentContext] = {}
    out = []

    def warn(msg):
        log.warning(msg)
        if warnings is not None:
            warnings.append(msg)

    for a in annotations:
        concept = lexicon.get(a.cui)
        if concept is None:
            warn(f"{a.doc_id}:{a.start}-{a.end}: cui {a.cui!r} not in lexicon; skipped")
            continue
        ctx = contexts.get(a.doc_id)
        if ctx is None:
            ctx = contexts[a.doc_id] = DocumentContext(by_id[a.doc_id].text)
        ex = ctx.example(a.start, a.end, window_k, groups_of(type_map, concept.fine_types))
        if ex is None:
            warn(f"{a.doc_id}:{a.start}-{a.end}: span holds no token; skipped")
            continue
        out.append(ex)
    return out
