"""CycleGAN objective arithmetic and fine-tuning schedule auditing.

These are pure functions over externally produced numbers (discriminator
probabilities, reconstructed planes, training-log epochs); no training ever
runs here. Logarithms are natural, the cycle penalty is a per-pixel mean of
absolute differences on unit-range values, and every log argument is floored
at 1e-12 so the audit stays total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvalError
from .imageio import CATEGORIES, ImagePlane

#: Cycle-consistency weight per donor-model category.
LAMBDA_BY_CATEGORY = {
    "Artistic Style Transfer": 9.0,
    "Animal Images": 10.0,
    "Natural Landscape Images": 10.0,
    "Photography": 10.0,
    "Satellite and Map Images": 11.0,
    "Urban Scenes": 11.0,
}

assert set(LAMBDA_BY_CATEGORY) == set(CATEGORIES)

_PROB_CLAMP = 1e-12


class LossError(EvalError):
    """Invalid input to a loss-audit computation."""


@dataclass(frozen=True)
class DiscriminatorBatch:
    """Discriminator probabilities on real and translated samples."""

    d_real: tuple[float, ...]
    d_fake: tuple[float, ...]

    def __post_init__(self):
        if not self.d_real or not self.d_fake:
            raise LossError("probability lists must be non-empty")
        for name, values in (("d_real", self.d_real), ("d_fake", self.d_fake)):
            for v in values:
                if not 0.0 <= v <= 1.0:
                    raise LossError(f"{name} entry {v} outside [0, 1]")


@dataclass(frozen=True)
class CycleBatch:
    """Originals paired with their round-trip reconstructions."""

    x: ImagePlane
    fgx: ImagePlane
    y: ImagePlane
    gfy: ImagePlane

    def __post_init__(self):
        if not self.x.same_shape(self.fgx):
            raise LossError("x and fgx dimensions differ")
        if not self.y.same_shape(self.gfy):
            raise LossError("y and gfy dimensions differ")


@dataclass(frozen=True)
class FinetuneConfig:
    """Hyperparameter record for fine-tuning one donor model.

    The two fully-connected layer sizes are recorded for auditing only;
    nothing here is ever executed.
    """

    category: str
    lambda_weight: float
    base_learning_rate: float = 0.001
    total_epochs: int = 200
    decay_start_epoch: int = 100
    batch_size: int = 2
    fc1_units: int = 256
    fc2_units: int = 256

    def __post_init__(self):
        if self.lambda_weight <= 0:
            raise LossError("lambda_weight must be positive")
        if self.base_learning_rate <= 0:
            raise LossError("base_learning_rate must be positive")
        if not 0 < self.decay_start_epoch < self.total_epochs:
            raise LossError("decay_start_epoch must lie in (0, total_epochs)")
        if self.batch_size <= 0 or self.fc1_units <= 0 or self.fc2_units <= 0:
            raise LossError("batch_size and FC sizes must be positive")
        if self.category in LAMBDA_BY_CATEGORY:
            expected = LAMBDA_BY_CATEGORY[self.category]
            if self.lambda_weight != expected:
                raise LossError(
                    f"lambda_weight {self.lambda_weight} does not match the "
                    f"{self.category!r} table value {expected}"
                )

    @classmethod
    def for_category(cls, category: str, **overrides) -> "FinetuneConfig":
        return cls(category=category, lambda_weight=lambda_for_category(category), **overrides)


def _clamped_log(p: float) -> float:
    # the argument is already <= 1 for validated inputs, so only the lower
    # clamp can bind; a perfect discriminator therefore scores exactly 0
    return math.log(max(p, _PROB_CLAMP))


def adversarial_loss(batch: DiscriminatorBatch) -> float:
    """Mean ln(d_real) plus mean ln(1 - d_fake); always <= 0 under clamping."""
    real = [_clamped_log(d) for d in batch.d_real]
    fake = [_clamped_log(1.0 - d) for d in batch.d_fake]
    return sum(real) / len(real) + sum(fake) / len(fake)


def cycle_consistency_loss(batch: CycleBatch) -> float:
    """Mean absolute reconstruction error of both cycles on unit-range pixels."""
    fwd = np.mean(np.abs(batch.fgx.pixels / batch.fgx.range_r - batch.x.pixels / batch.x.range_r))
    bwd = np.mean(np.abs(batch.gfy.pixels / batch.gfy.range_r - batch.y.pixels / batch.y.range_r))
    return float(fwd + bwd)


def total_objective(adv_xy: float, adv_yx: float, cyc: float, cfg: FinetuneConfig) -> float:
    """Full objective: both adversarial terms plus the weighted cycle penalty."""
    if cyc < 0:
        raise LossError("cycle loss cannot be negative")
    return adv_xy + adv_yx + cfg.lambda_weight * cyc


def lambda_for_category(category: str) -> float:
    """Cycle-consistency weight for one of the six donor-model categories."""
    try:
        return LAMBDA_BY_CATEGORY[category]
    except KeyError:
        raise LossError(
            f"unknown category {category!r} (expected one of {', '.join(CATEGORIES)})"
        ) from None


def lr_at_epoch(cfg: FinetuneConfig, epoch: int) -> float:
    """Learning rate at an epoch: flat plateau, then linear decay to zero.

    The decay segment runs from decay_start_epoch (value = base rate) to
    total_epochs (value = exactly 0).
    """
    if not 0 <= epoch <= cfg.total_epochs:
        raise LossError(f"epoch {epoch} outside [0, {cfg.total_epochs}]")
    if epoch < cfg.decay_start_epoch:
        return cfg.base_learning_rate
    if epoch == cfg.total_epochs:
        return 0.0
    span = cfg.total_epochs - cfg.decay_start_epoch
    return cfg.base_learning_rate * (cfg.total_epochs - epoch) / span


def read_probability_file(path) -> tuple[float, ...]:
    """Read one probability per line from a plain-text file."""
    values: list[float] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError:
                raise LossError(f"{path}:{lineno}: not a number: {line!r}") from None
    if not values:
        raise LossError(f"{path}: no probabilities found")
    return tuple(values)
