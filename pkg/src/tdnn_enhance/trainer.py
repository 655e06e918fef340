"""Staged training: noisy->clean, then clean->clean and noise->silence
fine-tuning, then noisy->clean again, with per-epoch validation and
best-model selection."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp
from .datagen import AudioCache, Manifest, PairKind, build_pairs, derive_seed
from .errors import InvalidArgument, NumericFailure
from .network import TdnnModel, build_model, forward, forward_backward
from .masking import signal_mse
from .optim import INITIAL_LR, AdamState, adam_step, lr_update

log = logging.getLogger(__name__)

DEFAULT_STAGES = (
    (PairKind.NOISY_TO_CLEAN, 30),
    (PairKind.CLEAN_TO_CLEAN, 5),
    (PairKind.NOISE_TO_SILENCE, 5),
    (PairKind.NOISY_TO_CLEAN, 5),
)


@dataclass(frozen=True)
class StagePlan:
    stages: tuple = DEFAULT_STAGES

    def __post_init__(self):
        stages = tuple((PairKind(mode), int(n)) for mode, n in self.stages)
        if not stages:
            raise InvalidArgument("a stage plan needs at least one stage")
        for mode, n in stages:
            if n < 1:
                raise InvalidArgument(f"stage {mode.value} has {n} epochs; need at least 1")
        object.__setattr__(self, "stages", stages)

    @property
    def total_epochs(self) -> int:
        return sum(n for _, n in self.stages)

    @classmethod
    def parse(cls, text: str) -> StagePlan:
        """``"noisy_clean:30, clean_clean:5"`` -> StagePlan."""
        stages = []
        for item in text.split(","):
            item = item.strip()
            if not item:
                continue
            mode, _, count = item.partition(":")
            try:
                stages.append((PairKind(mode.strip()), int(count)))
            except ValueError:
                raise InvalidArgument(f"bad stage {item!r}; expected mode:epochs") from None
        return cls(tuple(stages))

    def format(self) -> str:
        return ", ".join(f"{mode.value}:{n}" for mode, n in self.stages)


@dataclass
class ModelConfig:
    contexts: tuple
    hidden: int | tuple = 256
    seed: int = 0
    output_bias: float = 1.0

    def build(self, mean=None, std=None) -> TdnnModel:
        return build_model(
            self.contexts, self.hidden, seed=self.seed, mean=mean, std=std, output_bias=self.output_bias
        )


@dataclass
class Utterance:
    utt_id: str
    noisy_mag: np.ndarray
    clean_mag: np.ndarray


@dataclass
class EpochRecord:
    stage: int
    epoch: int
    mode: str
    train_loss: float
    valid_loss: float
    learning_rate: float
    seconds: float


@dataclass
class TrainReport:
    records: list[EpochRecord] = field(default_factory=list)
    # (stage, epoch) of the returned model; None means the initial model won.
    best_checkpoint: tuple | None = None
    best_valid_loss: float = float("inf")

    HEADER = "# stage\tepoch\tmode\ttrain_loss\tvalid_loss\tlr\tseconds"

    def to_text(self, include_timing: bool = True) -> str:
        lines = [self.HEADER]
        for r in self.records:
            secs = f"{r.seconds:.3f}" if include_timing else "-"
            lines.append(
                f"{r.stage}\t{r.epoch}\t{r.mode}\t{r.train_loss!r}\t{r.valid_loss!r}\t{r.learning_rate!r}\t{secs}"
            )
        best = "initial" if self.best_checkpoint is None else "\t".join(map(str, self.best_checkpoint))
        lines.append(f"# best\t{best}\t{self.best_valid_loss!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> TrainReport:
        report = cls()
        for line in text.splitlines():
            fields = line.split("\t")
            if line.startswith("# best"):
                if fields[1] == "initial":
                    report.best_valid_loss = float(fields[2])
                else:
                    report.best_checkpoint = (int(fields[1]), int(fields[2]))
                    report.best_valid_loss = float(fields[3])
            elif line and not line.startswith("#"):
                secs = float("nan") if fields[6] == "-" else float(fields[6])
                report.records.append(
                    EpochRecord(int(fields[0]), int(fields[1]), fields[2], float(fields[3]),
                                float(fields[4]), float(fields[5]), secs)
                )
        return report


def featurize(pairs) -> list[Utterance]:
    utts = []
    for pair in pairs:
        noisy = dsp.magnitude(dsp.stft(pair.input))
        clean = dsp.magnitude(dsp.stft(pair.target))
        utts.append(Utterance(pair.utt_id, noisy, clean))
    return utts


def input_stats(utts):
    """Per-frequency mean and std of the noisy magnitudes over all frames."""
    stacked = np.concatenate([u.noisy_mag for u in utts], axis=0)
    return stacked.mean(axis=0), stacked.std(axis=0)


def validation_loss(model: TdnnModel, utts) -> float:
    if not utts:
        raise InvalidArgument("validation set is empty")
    losses = [signal_mse(u.noisy_mag, forward(model, u.noisy_mag), u.clean_mag) for u in utts]
    return float(np.mean(losses))


def run_epoch(model: TdnnModel, utts, adam: AdamState, seed=0, batch: int = 1, stage_label="?"):
    """One pass over ``utts`` in a seeded shuffled order.

    Gradients of ``batch`` consecutive utterances are averaged before each
    Adam step. Returns ``(model, adam, mean per-utterance loss)``.
    """
    if not utts:
        raise InvalidArgument("cannot run an epoch without training pairs")
    if batch < 1:
        raise InvalidArgument(f"batch must be >= 1, got {batch}")
    order = np.random.default_rng(seed).permutation(len(utts))
    losses = []
    for start in range(0, len(order), batch):
        acc = None
        idx = order[start : start + batch]
        for i in idx:
            u = utts[i]
            loss, grads = forward_backward(model, u.noisy_mag, u.clean_mag)
            if not np.isfinite(loss):
                raise NumericFailure(f"non-finite loss {loss} in stage {stage_label}, utterance {u.utt_id}")
            losses.append(loss)
            acc = grads if acc is None else [a + g for a, g in zip(acc, grads)]
        if len(idx) > 1:
            acc = [a / len(idx) for a in acc]
        params, adam = adam_step(model.parameters(), acc, adam)
        model.set_parameters(params)
    return model, adam, float(np.mean(losses))


def run_schedule(
    plan: StagePlan,
    manifest: Manifest,
    model_config: ModelConfig,
    seed=0,
    learning_rate: float = INITIAL_LR,
    batch: int = 1,
    init_model: TdnnModel | None = None,
    adam: AdamState | None = None,
    checkpoint_dir=None,
):
    """Train through every stage of ``plan`` and return ``(best_model, report)``.

    Every epoch is validated on the noisy->clean validation pairs, whatever
    the stage trains on. When ``init_model`` is given it is fine-tuned, keeps
    its normalization statistics, and is itself the first best-model
    candidate.
    """
    audio = AudioCache(manifest)
    features = {}

    def utterances(mode, split="train"):
        key = (mode, split)
        if key not in features:
            features[key] = featurize(build_pairs(manifest, mode, seed, split, audio))
            if not features[key]:
                raise InvalidArgument(f"no {mode.value} pairs in split {split!r}")
        return features[key]

    valid = utterances(PairKind.NOISY_TO_CLEAN, "valid")
    if init_model is None:
        mean, std = input_stats(utterances(PairKind.NOISY_TO_CLEAN))
        model = model_config.build(mean, std)
    else:
        model = init_model.copy()
    if adam is None:
        adam = AdamState.for_params(model.parameters(), learning_rate)

    report = TrainReport()
    best_model = model.copy()
    if init_model is not None:
        report.best_valid_loss = validation_loss(model, valid)
    prev_valid = None
    if checkpoint_dir is not None:
        checkpoint_dir = Path(checkpoint_dir)
        checkpoint_dir.mkdir(parents=True, exist_ok=True)

    for stage_no, (mode, n_epochs) in enumerate(plan.stages, start=1):
        train = utterances(mode)
        for epoch in range(1, n_epochs + 1):
            tic = time.perf_counter()
            lr_used = adam.learning_rate
            model, adam, train_loss = run_epoch(
                model, train, adam, derive_seed(seed, "shuffle", stage_no, epoch), batch, f"{stage_no}:{mode.value}"
            )
            valid_loss = validation_loss(model, valid)
            if not np.isfinite(valid_loss):
                raise NumericFailure(f"non-finite validation loss in stage {stage_no}, epoch {epoch}")
            if prev_valid is not None:
                lr_update(adam, prev_valid, valid_loss)
            prev_valid = valid_loss
            record = EpochRecord(
                stage_no, epoch, mode.value, train_loss, valid_loss, lr_used, time.perf_counter() - tic
            )
            report.records.append(record)
            log.info(
                "stage %d (%s) epoch %d: train %.6g valid %.6g lr %.3g",
                stage_no, mode.value, epoch, train_loss, valid_loss, lr_used,
            )
            if checkpoint_dir is not None:
                from .modelio import save_model

                save_model(model, checkpoint_dir / f"stage{stage_no}_epoch{epoch:03d}.tdnn")
            if valid_loss < report.best_valid_loss:
                report.best_valid_loss = valid_loss
                report.best_checkpoint = (stage_no, epoch)
                best_model = model.copy()
    return best_model, report
