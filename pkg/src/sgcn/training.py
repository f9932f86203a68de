"""Optimization (Adam, value clipping, per-epoch decay) and evaluation metrics."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from sgcn.data import LabelSet, RelationRecord
from sgcn.errors import ConfigError, NumericError
from sgcn.model import SgcnModel
from sgcn.rng import SplitMix64

logger = logging.getLogger(__name__)

SELECT_METRICS = ("auto", "macro_f1", "accuracy", "positive_f1")


@dataclass(frozen=True)
class Task:
    """``multi_class`` over a label set, or ``one_vs_all`` for one target label."""

    kind: str = "multi_class"
    target: Optional[str] = None

    @classmethod
    def parse(cls, spec: str) -> "Task":
        if spec in ("multi-class", "multi_class"):
            return cls("multi_class")
        for prefix in ("one-vs-all:", "one_vs_all:"):
            if spec.startswith(prefix) and spec[len(prefix):]:
                return cls("one_vs_all", spec[len(prefix):])
        raise ConfigError(f"bad task {spec!r}; use multi-class or one-vs-all:<Class>")

    def __str__(self) -> str:
        return "multi-class" if self.kind == "multi_class" else f"one-vs-all:{self.target}"

    def classes(self, labels: LabelSet) -> List[str]:
        if self.kind == "multi_class":
            return list(labels.labels)
        if self.target not in labels.labels:
            raise ConfigError(f"one-vs-all target {self.target!r} is not in label set {labels.name}")
        return [f"not-{self.target}", self.target]

    @property
    def positive(self) -> Optional[int]:
        return 1 if self.kind == "one_vs_all" else None

    def label_index(self, sense: str, labels: LabelSet) -> int:
        if self.kind == "one_vs_all":
            return int(sense == self.target)
        return labels.index(sense)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target": self.target}


@dataclass(frozen=True)
class Example:
    id: str
    arg1: Tuple[str, ...]
    arg2: Tuple[str, ...]
    label: int


def to_examples(records: Sequence[RelationRecord], labels: LabelSet, task: Task) -> List[Example]:
    task.classes(labels)  # validates the target
    return [Example(r.id, tuple(r.arg1_tokens), tuple(r.arg2_tokens), task.label_index(r.sense, labels)) for r in records]


def balance_negatives(examples: Sequence[Example], seed: int) -> List[Example]:
    """Downsample label-0 examples to the number of label-1 examples."""
    pos = [e for e in examples if e.label == 1]
    neg = [e for e in examples if e.label != 1]
    if len(neg) <= len(pos):
        return list(examples)
    rng = SplitMix64(seed ^ 0xB1A5)
    keep = set(rng.permutation(len(neg))[: len(pos)])
    kept = [e for k, e in enumerate(neg) if k in keep]
    kept_ids = {id(e) for e in kept} | {id(e) for e in pos}
    return [e for e in examples if id(e) in kept_ids]


@dataclass
class TrainConfig:
    lr: float = 1e-2
    decay: float = 0.9
    clip_lo: float = -5.0
    clip_hi: float = 5.0
    batch: int = 64
    epochs: int = 30
    seed: int = 1
    task: Task = field(default_factory=Task)
    select_metric: str = "auto"
    balance_negatives: bool = False

    def validate(self) -> None:
        if not 0 < self.decay <= 1:
            raise ConfigError(f"decay must lie in (0, 1], got {self.decay}")
        if not self.clip_lo < self.clip_hi:
            raise ConfigError(f"clip range [{self.clip_lo}, {self.clip_hi}] is empty")
        if self.batch < 1 or self.epochs < 0:
            raise ConfigError("batch must be >= 1 and epochs >= 0")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")
        if self.select_metric not in SELECT_METRICS:
            raise ConfigError(f"select_metric must be one of {SELECT_METRICS}")

    def resolved_metric(self) -> str:
        if self.select_metric != "auto":
            return self.select_metric
        return "positive_f1" if self.task.kind == "one_vs_all" else "macro_f1"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task"] = str(self.task)
        return d


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return cfg.lr * cfg.decay ** epoch


def clip_gradients(grads: Dict[str, np.ndarray], lo: float, hi: float) -> Dict[str, np.ndarray]:
    """Componentwise value clipping into ``[lo, hi]``."""
    return {name: np.clip(g, lo, hi) for name, g in grads.items()}


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float) -> Dict[str, np.ndarray]:
    """Bias-corrected Adam update of ``params`` (in place) for every name in ``grads``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        if g.shape != params[name].shape:
            raise ConfigError(f"gradient for {name!r} is {g.shape}, parameter is {params[name].shape}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, g in grads.items():
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params


@dataclass
class EvalReport:
    classes: List[str]
    confusion: np.ndarray  # rows gold, cols predicted
    precision: List[float]
    recall: List[float]
    f1: List[float]
    macro_f1: float
    accuracy: float
    positive: Optional[int] = None

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    @property
    def positive_f1(self) -> float:
        return self.f1[self.positive] if self.positive is not None else self.macro_f1

    def metric(self, name: str) -> float:
        return {"macro_f1": self.macro_f1, "accuracy": self.accuracy, "positive_f1": self.positive_f1}[name]

    def to_dict(self) -> dict:
        d = {
            "classes": list(self.classes),
            "per_class": {
                c: {"precision": p, "recall": r, "f1": f}
                for c, p, r, f in zip(self.classes, self.precision, self.recall, self.f1)
            },
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "total": self.total,
        }
        if self.positive is not None:
            d["positive_class"] = self.classes[self.positive]
            d["positive_f1"] = self.positive_f1
        return d

    def format_table(self) -> str:
        width = max(9, *(len(c) for c in self.classes))
        lines = [f"{'class':<{width}}  {'P':>7}  {'R':>7}  {'F1':>7}  {'support':>7}"]
        for k, c in enumerate(self.classes):
            lines.append(
                f"{c:<{width}}  {self.precision[k]:7.4f}  {self.recall[k]:7.4f}  {self.f1[k]:7.4f}  {int(self.confusion[k].sum()):7d}"
            )
        lines.append(f"{'macro-F1':<{width}}  {self.macro_f1:7.4f}")
        lines.append(f"{'accuracy':<{width}}  {self.accuracy:7.4f}")
        if self.positive is not None:
            lines.append(f"{'pos-F1':<{width}}  {self.positive_f1:7.4f}  ({self.classes[self.positive]})")
        lines.append("confusion (rows gold, cols predicted):")
        for k, c in enumerate(self.classes):
            lines.append(f"{c:<{width}}  " + " ".join(f"{int(v):6d}" for v in self.confusion[k]))
        return "\n".join(lines)


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def report_from_predictions(
    gold: Sequence[int], pred: Sequence[int], classes: Sequence[str], positive: Optional[int] = None
) -> EvalReport:
    C = len(classes)
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (np.asarray(gold, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    tp = np.diag(confusion).astype(np.float64)
    precision = [_ratio(tp[k], confusion[:, k].sum()) for k in range(C)]
    recall = [_ratio(tp[k], confusion[k].sum()) for k in range(C)]
    f1 = [_ratio(2 * p * r, p + r) for p, r in zip(precision, recall)]
    return EvalReport(
        list(classes),
        confusion,
        precision,
        recall,
        f1,
        float(np.mean(f1)),
        _ratio(tp.sum(), confusion.sum()),
        positive,
    )


def evaluate(model: SgcnModel, examples: Sequence[Example], task: Task) -> EvalReport:
    if not examples:
        raise ConfigError("cannot evaluate on an empty dataset")
    gold = [e.label for e in examples]
    pred = [model.predict(e.arg1, e.arg2) for e in examples]
    return report_from_predictions(gold, pred, model.classes, task.positive)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    dev_accuracy: float
    dev_macro_f1: float
    degree_floor_hits: int

    def line(self) -> str:
        return "\t".join(
            [
                str(self.epoch),
                format(self.lr, ".17g"),
                format(self.train_loss, ".17g"),
                format(self.dev_accuracy, ".17g"),
                format(self.dev_macro_f1, ".17g"),
                str(self.degree_floor_hits),
            ]
        )


@dataclass
class TrainResult:
    model: SgcnModel
    log: List[EpochLog]
    best_epoch: int
    steps: int


def train(
    model: SgcnModel,
    train_set: Sequence[Example],
    dev_set: Optional[Sequence[Example]],
    cfg: TrainConfig,
    on_epoch: Optional[Callable[[EpochLog], None]] = None,
) -> TrainResult:
    """Minibatch Adam training; returns the snapshot with the best dev metric.

    Each example runs on its own tape. Batch gradients are the mean of the
    per-example gradients summed in a fixed order, so a seed fully
    determines every number produced.
    """
    cfg.validate()
    if not train_set:
        raise ConfigError("training set is empty")
    n_cls = model.dims.num_classes
    for e in train_set:
        if not 0 <= e.label < n_cls:
            raise ConfigError(f"example {e.id}: label {e.label} invalid for {n_cls} classes")
    if cfg.balance_negatives and cfg.task.kind == "one_vs_all":
        train_set = balance_negatives(train_set, cfg.seed)
    metric = cfg.resolved_metric()
    rng = SplitMix64(cfg.seed)
    state = AdamState()
    names = model.trainable()
    best_score, best_epoch, best_params = -np.inf, -1, None
    log: List[EpochLog] = []

    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        order = rng.permutation(len(train_set))
        total_loss = 0.0
        hits = 0
        for start in range(0, len(order), cfg.batch):
            batch = [train_set[k] for k in order[start:start + cfg.batch]]
            acc = {name: np.zeros_like(model.params[name]) for name in names}
            for ex in batch:
                loss, grads, h = model.loss_and_grads(ex.arg1, ex.arg2, ex.label)
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite loss on example {ex.id}")
                total_loss += loss
                hits += h
                for name in names:
                    acc[name] += grads[name]
            scale = 1.0 / len(batch)
            mean = {name: g * scale for name, g in acc.items()}
            adam_step(state, model.params, clip_gradients(mean, cfg.clip_lo, cfg.clip_hi), lr)

        if dev_set:
            report = evaluate(model, dev_set, cfg.task)
            dev_acc, dev_f1, score = report.accuracy, report.macro_f1, report.metric(metric)
        else:
            dev_acc = dev_f1 = float("nan")
            score = float(epoch)
        entry = EpochLog(epoch, lr, total_loss / len(train_set), dev_acc, dev_f1, hits)
        log.append(entry)
        logger.info(entry.line())
        if on_epoch is not None:
            on_epoch(entry)
        if score > best_score:
            best_score, best_epoch = score, epoch
            best_params = {k: v.copy() for k, v in model.params.items()}

    if best_params is not None:
        model.params = best_params
    model.meta = dict(model.meta, seed=cfg.seed, epoch=best_epoch)
    return TrainResult(model, log, best_epoch, state.step)
