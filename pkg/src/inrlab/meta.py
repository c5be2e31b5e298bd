"""Meta-learned initializations adapted by a few plain gradient steps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .encoders import Encoder, IdentityEncoder
from .init import ArchSpec, InitScheme, init_model
from .model import MlpModel, NonFiniteError, PointLoss, loss_backward
from .objectives import SampledSignal, loss_mse
from .rng import Rng
from .signal_io import lattice_coords
from .train import DIVERGENCE_LOSS, AdamState, DivergenceError, FitResult, TrainRun, TrainConfig, adam_update


@dataclass(frozen=True)
class MetaConfig:
    inner_steps: int = 3
    inner_lr: float = 1e-2
    outer_lr: float = 1e-3
    tasks_per_batch: int = 8
    outer_steps: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")
        if not self.inner_lr > 0:
            raise ValueError("inner learning rate must be positive")


@dataclass(frozen=True)
class BumpFamily:
    """1D Gaussian bumps exp(-((x - c)/w)^2) with centers uniform in [-spread, spread]."""

    n_points: int = 64
    width: float = 0.25
    spread: float = 0.5

    def task(self, center: float) -> SampledSignal:
        x = lattice_coords((self.n_points,))
        y = np.exp(-(((x[:, 0] - center) / self.width) ** 2))
        return SampledSignal(x, y[:, None], (self.n_points,))

    def sample(self, rng: Rng) -> SampledSignal:
        return self.task(float(rng.uniform(-self.spread, self.spread)))


def _sum_loss_grad(model: MlpModel, encoder: Encoder, task: SampledSignal):
    """Sum over the context set of squared errors, and its parameter gradients."""
    value, g = loss_backward(model, encoder, PointLoss(task.coords, task.values))
    return value * task.n, g.scaled(float(task.n))


def adapt(theta: MlpModel, task: SampledSignal, steps: int, alpha: float,
          encoder: Encoder | None = None) -> MlpModel:
    """Exactly ``steps`` plain gradient steps phi <- phi - alpha * grad sum_i ||f_phi(x_i) - y_i||^2."""
    enc = encoder or IdentityEncoder(theta.input_dim)
    phi = theta
    if alpha == 0:
        return phi
    for _ in range(steps):
        _, g = _sum_loss_grad(phi, enc, task)
        phi = phi.with_arrays([a - alpha * ga for a, ga in zip(phi.arrays(), g.model)])
    return phi


@dataclass
class MetaResult:
    theta: MlpModel
    outer_losses: list[float] = field(default_factory=list)


def meta_fit(sampler: Callable[[Rng], SampledSignal], arch: ArchSpec, config: MetaConfig,
             scheme: InitScheme | None = None, encoder: Encoder | None = None) -> MetaResult:
    """First-order meta-learning of an initialization.

    Each outer step adapts the current initialization to a batch of sampled
    tasks and moves it (with Adam) along the mean gradient of the
    post-adaptation MSE taken at the adapted parameters, treating the inner
    loop as constant.
    """
    rng = Rng(config.seed)
    theta = init_model(arch, scheme or InitScheme.standard(), rng.spawn(0))
    enc = encoder or IdentityEncoder(theta.input_dim)
    task_rng = rng.spawn(1)
    state = AdamState.for_arrays(theta.arrays(), config.outer_lr)
    losses = []
    for step in range(config.outer_steps):
        acc = [np.zeros_like(a) for a in theta.arrays()]
        total = 0.0
        for _ in range(config.tasks_per_batch):
            task = sampler(task_rng)
            phi = adapt(theta, task, config.inner_steps, config.inner_lr, enc)
            value, g = loss_backward(phi, enc, PointLoss(task.coords, task.values))
            total += value
            acc = [a + ga for a, ga in zip(acc, g.model)]
        mean = total / config.tasks_per_batch
        if not math.isfinite(mean) or mean > DIVERGENCE_LOSS:
            run = TrainRun(TrainConfig(steps=config.outer_steps, seed=config.seed), losses)
            raise DivergenceError(f"meta loss {mean:.3g} at outer step {step}", FitResult(theta, enc, run))
        losses.append(mean)
        grads = [a / config.tasks_per_batch for a in acc]
        try:
            theta = theta.with_arrays(adam_update(state, theta.arrays(), grads))
        except NonFiniteError as exc:
            run = TrainRun(TrainConfig(steps=config.outer_steps, seed=config.seed), losses)
            raise DivergenceError(str(exc), FitResult(theta, enc, run)) from exc
    return MetaResult(theta, losses)


def adaptation_error(theta: MlpModel, tasks, steps: int, alpha: float,
                     encoder: Encoder | None = None) -> float:
    """Mean MSE over tasks after adapting from ``theta``."""
    return float(np.mean([loss_mse(adapt(theta, t, steps, alpha, encoder), encoder, t) for t in tasks]))
