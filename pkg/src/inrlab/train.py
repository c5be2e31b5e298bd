"""Adam optimization and the fitting loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .encoders import Encoder, IdentityEncoder
from .model import Gradients, MlpModel, NonFiniteError, forward_batch
from .objectives import Objective
from .rng import Rng
from .signal_io import psnr

log = logging.getLogger(__name__)

DIVERGENCE_LOSS = 1e6


@dataclass
class AdamState:
    lr: float
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_arrays(cls, arrays, lr: float, **kw) -> "AdamState":
        return cls(lr, [np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kw)

    @classmethod
    def for_model(cls, model, encoder: Encoder | None = None, lr: float = 1e-3, **kw):
        enc = encoder.arrays() if encoder is not None else []
        return cls.for_arrays(list(model.arrays()) + list(enc), lr, **kw)


def adam_update(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam step on flat array lists; mutates ``state``."""
    if len(params) != len(state.m) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError("gradients are not shape-congruent with the optimizer state")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NonFiniteError("non-finite gradient; aborting optimizer step")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        mhat = state.m[i] / c1
        vhat = state.v[i] / c2
        out.append(p - state.lr * mhat / (np.sqrt(vhat) + state.eps))
    return out


def adam_step(state: AdamState, model, grads: Gradients, encoder: Encoder | None = None):
    """Update model (and trainable encoder arrays); returns (model, encoder, state)."""
    grads = _pullback(model, grads)
    m_arr = list(model.arrays())
    e_arr = list(encoder.arrays()) if encoder is not None else []
    new = adam_update(state, m_arr + e_arr, list(grads.model) + list(grads.encoder))
    model = model.with_arrays(new[: len(m_arr)])
    if encoder is not None and e_arr:
        encoder = encoder.with_arrays(new[len(m_arr):])
    return model, encoder, state


def default_lr(model) -> float:
    """1e-4 for networks with sine layers, 1e-3 otherwise."""
    net = model.collapse() if hasattr(model, "collapse") else model
    if any(l.atom is not None and l.atom.id == "sine" for l in net.layers):
        return 1e-4
    return 1e-3


@dataclass
class TrainConfig:
    steps: int = 2000
    lr: float | None = None
    batch_size: int | None = None
    seed: int = 0
    psnr_every: int = 50
    divergence_loss: float = DIVERGENCE_LOSS


@dataclass
class TrainRun:
    """Per-step losses and periodic PSNR values of one fitting run."""

    config: TrainConfig
    losses: list[float] = field(default_factory=list)
    psnr_log: list[tuple[int, float]] = field(default_factory=list)
    aborted: str | None = None

    def rows(self):
        """(step, loss, psnr-or-None) for every logged step, 1-based."""
        ps = dict(self.psnr_log)
        return [(i + 1, l, ps.get(i + 1)) for i, l in enumerate(self.losses)]


@dataclass
class FitResult:
    model: object
    encoder: Encoder
    run: TrainRun


class DivergenceError(FloatingPointError):
    """Training blew up; ``result`` holds the last finite model and the run log."""

    def __init__(self, message: str, result: FitResult):
        super().__init__(message)
        self.result = result


def _collapse(params):
    return params.collapse() if hasattr(params, "collapse") else params


def _pullback(params, grads: Gradients) -> Gradients:
    if hasattr(params, "pullback"):
        return Gradients(params.pullback(grads.model), grads.encoder)
    return grads


def reconstruction_psnr(model, encoder, objective: Objective, reference=None) -> float | None:
    if objective.grid_shape is None:
        return None
    if reference is None:
        if objective.operator.kind != "identity" or objective.kind != "value":
            return None
        reference = objective.measurements
    pred = forward_batch(_collapse(model), encoder, objective.coords)
    return psnr(pred, np.asarray(reference, dtype=float).reshape(pred.shape))


def fit(model, encoder: Encoder | None, objective: Objective, config: TrainConfig,
        reference=None, callback=None) -> FitResult:
    """Minimize ``objective`` with Adam.

    ``model`` is an :class:`MlpModel` or any parameterization exposing
    ``arrays``/``with_arrays``/``collapse``/``pullback``. Minibatches are drawn
    from per-epoch shuffles of the run seed and need a pointwise operator.
    The loss before each update is logged; PSNR is logged every
    ``config.psnr_every`` steps when the objective lives on a grid.
    ``callback(step, model, encoder)`` runs after every update.
    """
    if encoder is None:
        encoder = IdentityEncoder(_collapse(model).input_dim)
    lr = config.lr if config.lr is not None else default_lr(model)
    state = AdamState.for_arrays(list(model.arrays()) + list(encoder.arrays()), lr)
    run = TrainRun(config)
    rng = Rng(config.seed)
    n = objective.coords.shape[0]
    bs = config.batch_size
    if bs is not None and bs >= n:
        bs = None
    order = None
    cursor = 0
    good = (model, encoder)  # last parameters with a finite, bounded loss
    for step in range(1, config.steps + 1):
        batch = None
        if bs is not None:
            if order is None or cursor + bs > n:
                order, cursor = rng.permutation(n), 0
            batch = order[cursor:cursor + bs]
            cursor += bs
        try:
            value, grads = objective.value_and_grad(_collapse(model), encoder, batch)
        except NonFiniteError as exc:
            run.aborted = str(exc)
            raise DivergenceError(f"step {step}: {exc}", FitResult(*good, run)) from exc
        if value > config.divergence_loss:
            run.aborted = f"loss {value:.3g} exceeded {config.divergence_loss:.3g} at step {step}"
            raise DivergenceError(run.aborted, FitResult(*good, run))
        good = (model, encoder)
        run.losses.append(value)
        try:
            model, encoder, state = adam_step(state, model, grads, encoder)
        except NonFiniteError as exc:
            run.aborted = str(exc)
            raise DivergenceError(f"step {step}: {exc}", FitResult(*good, run)) from exc
        if config.psnr_every and step % config.psnr_every == 0:
            p = reconstruction_psnr(model, encoder, objective, reference)
            if p is not None:
                run.psnr_log.append((step, p))
        if callback is not None:
            callback(step, model, encoder)
    return FitResult(model, encoder, run)

