"""SGD training demo: mini backbone plus a binary head on synthetic data.

Samples differ in size, so every sample gets its own forward/backward
graph and the gradients of one step are accumulated (summed) over its
samples.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from scaresnet.errors import GradientError, ValidationError
from scaresnet.nn import (
    BackboneConfig,
    BackboneWeights,
    Initializer,
    ParameterGroup,
    backbone_forward,
    build_scaresnet,
    check_input_size,
    decays,
    preset_config,
)
from scaresnet.synthetic import SyntheticSample, load_dataset
from scaresnet.tensor import DType, Graph, Tensor, resolve_dtype, save_checkpoint
from scaresnet.tensor import functional as F

logger = logging.getLogger(__name__)

StepCallback = Callable[[int, float], None]
DatasetLike = Union[str, Path, Sequence[SyntheticSample]]

ABLATION_VARIANTS = ("baseline", "cca", "spprcsp", "full")


@dataclass
class DemoWeights(ParameterGroup):
    backbone: BackboneWeights
    head_weight: Tensor
    head_bias: Tensor


class DemoModel:
    """Backbone, global average pool, linear, sigmoid."""

    def __init__(self, config: BackboneConfig, seed: int = 0, dtype: DType = DType.FLOAT32):
        self.config = config
        self.dtype = resolve_dtype(dtype)
        head_init = Initializer(seed + 1, self.dtype)
        self.weights = DemoWeights(
            backbone=build_scaresnet(config, seed=seed, dtype=self.dtype),
            head_weight=head_init.uniform((1, config.out_channels), fan_in=config.out_channels),
            head_bias=head_init.zeros((1,)),
        )

    def logit(self, image: Tensor) -> Tensor:
        features = backbone_forward(image, self.weights.backbone, self.config)
        pooled = F.global_avg_pool(features)
        return F.linear(pooled, self.weights.head_weight, self.weights.head_bias)

    def probability(self, image: Tensor) -> float:
        return F.sigmoid(self.logit(image)).item()

    def loss(self, image: Tensor, label: int) -> Tensor:
        return F.bce_with_logits(self.logit(image), float(label))


class SGD:
    """SGD with momentum; weight decay only on matrices and kernels.

    v <- momentum * v + (g + wd * p),  p <- p - lr * v
    """

    def __init__(
        self,
        params: Dict[str, Tensor],
        lr: float,
        momentum: float = 0.9,
        weight_decay: float = 1e-4,
    ):
        if lr < 0:
            raise ValidationError(f"learning rate must be >= 0, got {lr}")
        if not 0 <= momentum < 1:
            raise ValidationError(f"momentum must lie in [0, 1), got {momentum}")
        self.params = params
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {name: np.zeros_like(p.data) for name, p in params.items()}

    def step(self, grads: Dict[str, np.ndarray]) -> None:
        for name, param in self.params.items():
            g = grads.get(name)
            g = np.zeros_like(param.data) if g is None else g
            if self.weight_decay and decays(param):
                g = g + self.weight_decay * param.data
            v = self.momentum * self.velocity[name] + g
            self.velocity[name] = v
            param.data = (param.data - self.lr * v).astype(param.data.dtype)


@dataclass
class TrainReport:
    """Per-step monitor losses plus loss and accuracy over the whole training set.

    ``initial_loss`` and ``final_loss`` are mean losses over every sample
    before and after training; ``losses`` tracks a fixed monitor subset after
    each step.
    """

    losses: List[float]
    batch_losses: List[float]
    initial_loss: float
    final_loss: float
    final_accuracy: float
    seed: int
    config: Dict[str, Any]
    wall_clock_seconds: float = 0.0

    def deterministic_dict(self) -> Dict[str, Any]:
        """Everything except the wall-clock time."""
        return {
            "losses": self.losses,
            "batch_losses": self.batch_losses,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "final_accuracy": self.final_accuracy,
            "seed": self.seed,
            "config": self.config,
        }

    def to_dict(self) -> Dict[str, Any]:
        doc = self.deterministic_dict()
        doc["wall_clock_seconds"] = self.wall_clock_seconds
        return doc


def _monitor_indices(labels: Sequence[int], size: int, rng: np.random.Generator) -> List[int]:
    """A fixed, label-balanced subset used to track the loss across steps."""
    positives = [i for i, label in enumerate(labels) if label]
    negatives = [i for i, label in enumerate(labels) if not label]
    half = max(1, size // 2)
    chosen = list(rng.permutation(positives)[:half]) + list(rng.permutation(negatives)[:half])
    return sorted(int(i) for i in chosen)


def mean_loss(model: DemoModel, samples: Sequence[SyntheticSample]) -> float:
    return float(np.mean([model.loss(s.image, s.label).item() for s in samples]))


def accuracy(model: DemoModel, samples: Sequence[SyntheticSample]) -> float:
    hits = sum(int((model.probability(s.image) >= 0.5) == bool(s.label)) for s in samples)
    return hits / len(samples)


def _prepare_samples(dataset: DatasetLike, dtype: DType) -> List[SyntheticSample]:
    samples = list(load_dataset(dataset) if isinstance(dataset, (str, Path)) else dataset)
    if len(samples) < 2:
        raise ValidationError(f"need at least 2 samples, got {len(samples)}")
    return [
        s if s.image.dtype == dtype else replace(s, image=s.image.astype(dtype))
        for s in samples
    ]


def train_demo(
    dataset: DatasetLike,
    steps: int = 200,
    lr: float = 0.001,
    seed: int = 0,
    momentum: float = 0.9,
    weight_decay: float = 1e-4,
    batch: int = 2,
    monitor_size: int = 8,
    config: Optional[BackboneConfig] = None,
    checkpoint: Optional[Union[str, Path]] = None,
    on_step: Optional[StepCallback] = None,
    dtype: Union[DType, str] = DType.FLOAT32,
) -> TrainReport:
    """Train the demo model and return its report.

    Each step draws ``batch`` samples from a seeded epoch permutation,
    runs one graph per sample and sums their gradients. ``losses`` holds
    the mean loss over a fixed monitor subset after every step, so with
    lr = 0 it is constant.
    """
    if steps < 1 or batch < 1:
        raise ValidationError(f"steps and batch must be >= 1, got {steps}, {batch}")
    dtype = resolve_dtype(dtype)
    samples = _prepare_samples(dataset, dtype)
    config = config or preset_config("mini")
    for s in samples:
        check_input_size(config, *s.size)

    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    model = DemoModel(config, seed=seed, dtype=dtype)
    params = model.weights.named_parameters()
    optimizer = SGD(params, lr=lr, momentum=momentum, weight_decay=weight_decay)
    monitor = [samples[i] for i in _monitor_indices([s.label for s in samples], monitor_size, rng)]

    initial = mean_loss(model, samples)
    logger.info(
        f"train-demo: {len(samples)} samples, {steps} steps, lr={lr}, dtype={dtype.value}, "
        f"{len(params)} tensors, initial loss {initial:.4f}"
    )

    order: List[int] = []
    losses: List[float] = []
    batch_losses: List[float] = []
    for step in range(steps):
        grads: Dict[str, np.ndarray] = {}
        step_loss = 0.0
        for _ in range(batch):
            if not order:
                order = [int(i) for i in rng.permutation(len(samples))]
            sample = samples[order.pop(0)]
            with Graph() as graph:
                loss = model.loss(sample.image, sample.label)
            value = loss.item()
            if not np.isfinite(value):
                raise GradientError(f"non-finite loss at step {step}", step=step)
            graph.backward(loss)
            step_loss += value / batch
            for name, p in params.items():
                if p.grad is not None:
                    grads[name] = grads.get(name, 0.0) + p.grad
                    p.grad = None
        optimizer.step(grads)

        monitor_loss = mean_loss(model, monitor)
        if not np.isfinite(monitor_loss):
            raise GradientError(f"non-finite monitor loss at step {step}", step=step)
        losses.append(monitor_loss)
        batch_losses.append(step_loss)
        if on_step is not None:
            on_step(step, monitor_loss)
        logger.debug(f"step {step}: batch loss {step_loss:.4f}, monitor loss {monitor_loss:.4f}")

    final = mean_loss(model, samples)
    final_accuracy = accuracy(model, samples)
    if checkpoint is not None:
        save_checkpoint(params, checkpoint)

    report = TrainReport(
        losses=losses,
        batch_losses=batch_losses,
        initial_loss=initial,
        final_loss=final,
        final_accuracy=final_accuracy,
        seed=seed,
        config={
            "backbone": config.to_dict(),
            "steps": steps,
            "lr": lr,
            "momentum": momentum,
            "weight_decay": weight_decay,
            "batch": batch,
            "monitor_size": len(monitor),
            "samples": len(samples),
            "dtype": dtype.value,
            "parameters": model.weights.num_parameters(),
        },
        wall_clock_seconds=time.perf_counter() - started,
    )
    logger.info(
        f"train-demo done: loss {initial:.4f} -> {final:.4f}, accuracy {final_accuracy:.3f}"
    )
    return report


# --- ablation ---


def ablation_configs(config: BackboneConfig) -> Dict[str, BackboneConfig]:
    """Plain ResNet, with attention, with SPPRCSP, and with both.

    Attention goes where ``config`` puts it, or where its preset does when
    ``config`` has none.
    """
    insert = config.cca_insert_after or preset_config(config.preset).cca_insert_after
    return {
        "baseline": replace(config, cca_insert_after=(), use_spprcsp=False),
        "cca": replace(config, cca_insert_after=insert, use_spprcsp=False),
        "spprcsp": replace(config, cca_insert_after=(), use_spprcsp=True),
        "full": replace(config, cca_insert_after=insert, use_spprcsp=True),
    }


@dataclass
class AblationReport:
    """One TrainReport per variant, all trained from the same seed and data."""

    seed: int
    reports: Dict[str, TrainReport] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, Any]]:
        return [
            {
                "variant": name,
                "parameters": report.config["parameters"],
                "initial_loss": report.initial_loss,
                "final_loss": report.final_loss,
                "final_accuracy": report.final_accuracy,
                "wall_clock_seconds": report.wall_clock_seconds,
            }
            for name, report in self.reports.items()
        ]

    def deterministic_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "variants": {name: r.deterministic_dict() for name, r in self.reports.items()},
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "variants": self.rows(),
            "reports": {name: r.to_dict() for name, r in self.reports.items()},
        }


def train_ablation(
    dataset: DatasetLike,
    steps: int = 200,
    lr: float = 0.001,
    seed: int = 0,
    config: Optional[BackboneConfig] = None,
    variants: Sequence[str] = ABLATION_VARIANTS,
    checkpoint_dir: Optional[Union[str, Path]] = None,
    on_variant: Optional[Callable[[str], None]] = None,
    dtype: Union[DType, str] = DType.FLOAT32,
    **train_kwargs: Any,
) -> AblationReport:
    """Train every requested variant of ``config`` with identical data, seed and schedule.

    With ``checkpoint_dir`` each variant's weights land in a subdirectory
    named after it.
    """
    unknown = sorted(set(variants) - set(ABLATION_VARIANTS))
    if unknown:
        raise ValidationError(f"unknown ablation variants {unknown}; choose from {ABLATION_VARIANTS}")
    dtype = resolve_dtype(dtype)
    samples = _prepare_samples(dataset, dtype)
    configs = ablation_configs(config or preset_config("mini"))
    result = AblationReport(seed=seed)
    for name in ABLATION_VARIANTS:
        if name not in variants:
            continue
        if on_variant is not None:
            on_variant(name)
        logger.info(f"ablation: training variant {name}")
        result.reports[name] = train_demo(
            samples,
            steps=steps,
            lr=lr,
            seed=seed,
            config=configs[name],
            dtype=dtype,
            checkpoint=Path(checkpoint_dir) / name if checkpoint_dir is not None else None,
            **train_kwargs,
        )
    return result
