"""Dataset hierarchy, frame sampling, the training loop, and the
frame -> repetition -> subject prediction cascade.

Classification is binary: HC (healthy control, class 0, also the tie-break
winner at every level) versus ALS (class 1, the positive class).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import LandmarkFrame, frame_to_graph
from .model import FpgModel, GraphTensors, graph_to_tensors, model_forward, model_backward
from .numerics import AdamState, adam_step, cross_entropy


class Group(enum.Enum):
    HC = 0
    ALS = 1


class Task(enum.Enum):
    SPREAD = "SPREAD"
    KISS = "KISS"
    OPEN = "OPEN"
    BLOW = "BLOW"
    BBP = "BBP"
    PA = "PA"
    PATAKA = "PATAKA"


@dataclass(frozen=True)
class Repetition:
    """One performance instance of a task: an ordered run of frames."""

    repetition_id: str
    task: Task
    frames: Tuple[LandmarkFrame, ...]
    label: Group

    def __post_init__(self):
        if len(self.frames) == 0:
            raise ValueError(f"repetition {self.repetition_id!r} has no frames")
        idx = [f.frame_index for f in self.frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(
                f"repetition {self.repetition_id!r}: frame indices must be strictly increasing"
            )
        object.__setattr__(self, "frames", tuple(self.frames))


@dataclass(frozen=True)
class Subject:
    subject_id: str
    group: Group
    repetitions: Tuple[Repetition, ...]

    def __post_init__(self):
        if len(self.repetitions) == 0:
            raise ValueError(f"subject {self.subject_id!r} has no repetitions")
        for rep in self.repetitions:
            if rep.label != self.group:
                raise ValueError(
                    f"subject {self.subject_id!r} is {self.group.name} but repetition "
                    f"{rep.repetition_id!r} is labeled {rep.label.name}"
                )
        object.__setattr__(self, "repetitions", tuple(self.repetitions))


@dataclass(frozen=True)
class Dataset:
    subjects: Tuple[Subject, ...]
    task_filter: Optional[Task] = None

    def __post_init__(self):
        ids = [s.subject_id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")
        object.__setattr__(self, "subjects", tuple(self.subjects))

    def filtered(self, task: Optional[Task]) -> "Dataset":
        """Subjects restricted to one task; subjects without it are dropped."""
        if task is None:
            return self
        kept = []
        for s in self.subjects:
            reps = tuple(r for r in s.repetitions if r.task == task)
            if reps:
                kept.append(Subject(s.subject_id, s.group, reps))
        return Dataset(subjects=tuple(kept), task_filter=task)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    batch_size: int = 64
    lr_gat: float = 1e-4
    lr_linear: float = 1e-5
    patience: int = 10
    frames_per_repetition: int = 15
    seed: int = 0

    def __post_init__(self):
        for name in ("max_epochs", "batch_size", "patience", "frames_per_repetition"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.lr_gat <= 0 or self.lr_linear <= 0:
            raise ValueError("learning rates must be positive")
        if self.frames_per_repetition % 2 == 0:
            raise ValueError("frames_per_repetition must be odd so frame votes cannot tie")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")


def sample_frame_indices(n_available: int, k: int) -> List[int]:
    """k indices equally spaced over [0, n_available), round-half-up.

    i_j = round(j*(T-1)/(k-1)), evaluated in exact integer arithmetic.
    Short clips yield duplicate indices; the first and last frames are always
    included when T >= 2.
    """
    if n_available < 1:
        raise ValueError("no frames available")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k == 1:
        return [0]
    den = k - 1
    return [(2 * j * (n_available - 1) + den) // (2 * den) for j in range(k)]


def sample_frames(rep: Repetition, k: int) -> List[LandmarkFrame]:
    """k equally spaced frames from a repetition (with duplicates if short)."""
    return [rep.frames[i] for i in sample_frame_indices(len(rep.frames), k)]


def majority_label(votes: Sequence[Group]) -> Group:
    """Majority vote; exact ties resolve to HC (the conservative choice)."""
    if len(votes) == 0:
        raise ValueError("cannot vote over an empty sequence")
    als = sum(1 for v in votes if v == Group.ALS)
    return Group.ALS if als * 2 > len(votes) else Group.HC


def classify_logits(logits: np.ndarray) -> Group:
    """Argmax over (HC, ALS) logits; an exact tie counts as HC."""
    return Group.ALS if logits[1] > logits[0] else Group.HC


def predict_frame(frame: LandmarkFrame, model: FpgModel, subset=None) -> Group:
    """Classify one frame from its face graph."""
    subset = subset if subset is not None else model.config.subset
    graph = frame_to_graph(frame, subset)
    logits, _ = model_forward(graph, model)
    return classify_logits(logits)


def predict_repetition(rep: Repetition, model: FpgModel, cfg: TrainConfig) -> Group:
    """Majority vote over the repetition's sampled frames."""
    votes = [
        predict_frame(f, model) for f in sample_frames(rep, cfg.frames_per_repetition)
    ]
    return majority_label(votes)


def predict_subject(subject: Subject, model: FpgModel, cfg: TrainConfig) -> Group:
    """Majority vote over the subject's repetition predictions."""
    votes = [predict_repetition(rep, model, cfg) for rep in subject.repetitions]
    return majority_label(votes)


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainHistory:
    epochs: List[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = float("inf")

    def rows(self) -> List[Tuple[int, float, float, float]]:
        return [(e.epoch, e.train_loss, e.val_loss, e.val_accuracy) for e in self.epochs]


def _prepare_samples(
    reps: Sequence[Repetition], model: FpgModel, k: int
) -> List[Tuple[GraphTensors, int]]:
    """Sample frames and precompute their graph tensors once; the geometry
    never changes across epochs."""
    samples: List[Tuple[GraphTensors, int]] = []
    for rep in reps:
        for frame in sample_frames(rep, k):
            graph = frame_to_graph(frame, model.config.subset)
            samples.append((graph_to_tensors(graph, model.config), rep.label.value))
    return samples


def _mean_loss(samples, model) -> Tuple[float, float]:
    """(mean cross-entropy, accuracy) over prepared samples, no grads."""
    total = 0.0
    hits = 0
    for tensors, label in samples:
        logits, _ = model_forward(tensors, model)
        loss, _ = cross_entropy(logits, label)
        total += loss
        if classify_logits(logits).value == label:
            hits += 1
    return total / len(samples), hits / len(samples)


def train(
    model: FpgModel,
    train_set: Sequence[Repetition],
    val_set: Sequence[Repetition],
    cfg: TrainConfig,
) -> Tuple[FpgModel, TrainHistory]:
    """Mini-batch training with early stopping on validation loss.

    Frames from all training repetitions are sampled once, then reshuffled
    every epoch (stream seeded by (seed, epoch)) and processed in batches of
    ``cfg.batch_size`` with mean-gradient Adam steps: ``lr_gat`` for the
    attention layers, ``lr_linear`` for the output layers. Returns the model
    restored to the best-validation-loss epoch, plus the per-epoch history.
    """
    if len(train_set) == 0:
        raise ValueError("empty training set")
    if len(val_set) == 0:
        raise ValueError("empty validation set")

    k = cfg.frames_per_repetition
    train_samples = _prepare_samples(train_set, model, k)
    val_samples = _prepare_samples(val_set, model, k)

    gat_params = model.gat_parameters()
    linear_params = model.linear_parameters()
    adam = AdamState()
    step = 0

    history = TrainHistory()
    best_values = model.copy_values()
    epochs_since_best = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(train_samples))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            model.zero_grad()
            batch_loss = 0.0
            for i in batch:
                tensors, label = train_samples[i]
                logits, cache = model_forward(tensors, model)
                loss, grad_logits = cross_entropy(logits, label)
                batch_loss += loss
                model_backward(cache, grad_logits / len(batch))
            epoch_loss += batch_loss
            step += 1
            for p in gat_params:
                adam_step(p, adam, cfg.lr_gat, step)
            for p in linear_params:
                adam_step(p, adam, cfg.lr_linear, step)

        val_loss, val_acc = _mean_loss(val_samples, model)
        history.epochs.append(
            EpochStats(epoch, epoch_loss / len(train_samples), val_loss, val_acc)
        )

        if val_loss < history.best_val_loss:
            history.best_val_loss = val_loss
            history.best_epoch = epoch
            best_values = model.copy_values()
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                break

    model.load_values(best_values)
    return model, history
