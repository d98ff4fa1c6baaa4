"""Stratified splitting, the training loop, and per-SNR evaluation."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diffcore import AdamW, Tensor, backward, cross_entropy
from .model import CamdModel
from .sigsynth import DatasetFile


class TrainingError(Exception):
    pass


class DivergenceError(TrainingError):
    """Loss became non-finite during training."""


@dataclass
class SplitSpec:
    fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-12:
            raise ValueError(f"split fractions {self.fractions} must sum to 1")


@dataclass
class TrainHyper:
    lr: float = 2e-3
    weight_decay: float = 1e-3
    batch_size: int = 512
    epochs: int = 50
    seed: int = 0


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    seconds: float


@dataclass
class TrainLog:
    seed: int
    hyper: TrainHyper
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = 0.0


@dataclass
class EvalReport:
    per_snr_accuracy: dict[float, float]
    per_snr_count: dict[float, int]
    confusion: dict[float, np.ndarray]      # K x K int matrices, rows = true class
    overall_accuracy: float
    avg_accuracy: float                     # unweighted mean over SNR strata
    max_accuracy: float
    low_snr_db: float
    low_snr_accuracy: float | None          # None when that stratum is absent


def split_dataset(d: DatasetFile, spec: SplitSpec):
    """Per-(label, snr) stratified 6:2:2 split; remainder goes train-first.

    Returns (train, val, test) index arrays; deterministic per seed.
    """
    strata: dict[tuple[int, float], list[int]] = {}
    for i in range(d.num_frames):
        strata.setdefault((int(d.labels[i]), float(d.snr_dbs[i])), []).append(i)
    rng = np.random.default_rng(spec.seed)
    train, val, test = [], [], []
    for key in sorted(strata):
        idx = np.array(strata[key])
        if len(idx) < 5:
            raise ValueError(f"stratum {key} has only {len(idx)} frames (need >= 5)")
        rng.shuffle(idx)
        n = len(idx)
        counts = [int(n * f) for f in spec.fractions]
        for j in range(n - sum(counts)):        # remainder: train, then val, then test
            counts[j % 3] += 1
        train.extend(idx[:counts[0]])
        val.extend(idx[counts[0]:counts[0] + counts[1]])
        test.extend(idx[counts[0] + counts[1]:])
    return (np.sort(np.array(train, dtype=np.int64)),
            np.sort(np.array(val, dtype=np.int64)),
            np.sort(np.array(test, dtype=np.int64)))


def _batches(indices: np.ndarray, batch_size: int):
    for start in range(0, len(indices), batch_size):
        yield indices[start:start + batch_size]


def predict_logits(model: CamdModel, d: DatasetFile, indices, batch_size: int = 512):
    out = np.empty((len(indices), model.config.num_classes), dtype=np.float64)
    pos = 0
    for batch in _batches(np.asarray(indices), batch_size):
        x = d.iq[batch].astype(model.dtype)
        logits = model.forward(Tensor(x))
        out[pos:pos + len(batch)] = logits.data
        pos += len(batch)
    return out


def _accuracy_and_loss(model, d, indices, batch_size):
    logits = predict_logits(model, d, indices, batch_size)
    labels = d.labels[indices].astype(np.int64)
    loss = float(cross_entropy(Tensor(logits), labels).data)
    acc = float((logits.argmax(axis=1) == labels).mean())
    return acc, loss


def train(model: CamdModel, d: DatasetFile, train_idx, val_idx,
          hyper: TrainHyper = TrainHyper()) -> TrainLog:
    """Shuffled mini-batch AdamW training with best-val checkpointing.

    The model is left holding the parameters of the best validation epoch.
    """
    if len(train_idx) == 0:
        raise TrainingError("empty training set")
    opt = AdamW(model.parameters(), lr=hyper.lr, weight_decay=hyper.weight_decay)
    log = TrainLog(seed=hyper.seed, hyper=hyper)
    best_state = None
    train_idx = np.asarray(train_idx)
    for epoch in range(hyper.epochs):
        t0 = time.monotonic()
        rng = np.random.default_rng([hyper.seed, epoch])
        order = rng.permutation(train_idx)
        losses = []
        for batch in _batches(order, hyper.batch_size):
            x = Tensor(d.iq[batch].astype(model.dtype))
            labels = d.labels[batch].astype(np.int64)
            logits = model.forward(x)
            loss = cross_entropy(logits, labels)
            if not np.isfinite(loss.data):
                raise DivergenceError(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            backward(loss)
            opt.step()
            losses.append(float(loss.data))
        val_acc, val_loss = (0.0, float("nan"))
        if len(val_idx):
            val_acc, val_loss = _accuracy_and_loss(model, d, val_idx, hyper.batch_size)
        log.epochs.append(EpochRecord(
            epoch=epoch, train_loss=float(np.mean(losses)), val_loss=val_loss,
            val_accuracy=val_acc, seconds=time.monotonic() - t0))
        if val_acc >= log.best_val_accuracy or best_state is None:
            log.best_val_accuracy = val_acc
            log.best_epoch = epoch
            best_state = model.state_arrays()
    if best_state is not None:
        model.load_state_arrays(best_state)
    return log


def evaluate(model: CamdModel, d: DatasetFile, indices,
             low_snr_db: float = -4.0, batch_size: int = 512) -> EvalReport:
    """Argmax predictions stratified by SNR; Avg is the unweighted SNR mean."""
    indices = np.asarray(indices)
    logits = predict_logits(model, d, indices, batch_size)
    preds = logits.argmax(axis=1)
    labels = d.labels[indices].astype(np.int64)
    snrs = d.snr_dbs[indices].astype(np.float64)
    k = model.config.num_classes
    per_acc, per_n, confusion = {}, {}, {}
    for snr in sorted(set(snrs.tolist())):
        mask = snrs == snr
        cm = np.zeros((k, k), dtype=np.int64)
        np.add.at(cm, (labels[mask], preds[mask]), 1)
        confusion[snr] = cm
        per_n[snr] = int(mask.sum())
        per_acc[snr] = float((preds[mask] == labels[mask]).mean())
    accs = list(per_acc.values())
    low = per_acc.get(float(low_snr_db))
    return EvalReport(
        per_snr_accuracy=per_acc, per_snr_count=per_n, confusion=confusion,
        overall_accuracy=float((preds == labels).mean()),
        avg_accuracy=float(np.mean(accs)), max_accuracy=float(np.max(accs)),
        low_snr_db=float(low_snr_db), low_snr_accuracy=low)


def emit_csv(report: EvalReport, out_dir) -> None:
    """accuracy_by_snr.csv plus one confusion_<snr>.csv per stratum."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["snr_db,accuracy,n"]
    for snr in sorted(report.per_snr_accuracy):
        lines.append(f"{snr:.1f},{report.per_snr_accuracy[snr]:.6f},{report.per_snr_count[snr]}")
    (out / "accuracy_by_snr.csv").write_text("\n".join(lines) + "\n")
    for snr, cm in report.confusion.items():
        rows = [",".join(str(v) for v in row) for row in cm]
        (out / f"confusion_{snr:+.1f}dB.csv").write_text("\n".join(rows) + "\n")


def write_train_log(log: TrainLog, path) -> None:
    """Line-delimited JSON: one record per epoch."""
    with open(path, "w") as f:
        for rec in log.epochs:
            f.write(json.dumps({
                "epoch": rec.epoch, "train_loss": rec.train_loss,
                "val_loss": rec.val_loss, "val_acc": rec.val_accuracy,
                "seconds": rec.seconds}) + "\n")
