"""Fitting objectives: sampled signals, linear measurement operators and regularizers.

An objective is ``D(A(q), y) + sum_j lam_j R_j(theta)`` where ``q`` is the
network output, its input jacobian or its Laplacian on a dense evaluation set,
``A`` a linear operator, ``D`` the mean squared error over measurements, and
``R_j`` weight decay or total variation. Gradients are exact: operators are
linear and their adjoints are applied to the fidelity residual before the
network reverse pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .encoders import Encoder, IdentityEncoder
from .model import Gradients, MlpModel, NonFiniteError, backward, input_derivatives_batch, propagate


@dataclass
class SampledSignal:
    """Coordinates (N, d) in [-1, 1]^d with values (N, c); ``grid_shape`` for lattices."""

    coords: np.ndarray
    values: np.ndarray
    grid_shape: tuple[int, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.coords, dtype=float)
        Y = np.asarray(self.values, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Y.ndim == 1:
            Y = Y[:, None]
        if X.shape[0] < 1 or X.shape[0] != Y.shape[0]:
            raise ValueError("coords and values need the same positive sample count")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("signal entries must be finite")
        if self.grid_shape is not None:
            self.grid_shape = tuple(int(g) for g in self.grid_shape)
            if int(np.prod(self.grid_shape)) != X.shape[0]:
                raise ValueError("grid_shape does not match the sample count")
        self.coords, self.values = X, Y

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def c(self) -> int:
        return self.values.shape[1]


@dataclass
class SupervisionTargets:
    """Optional derivative targets: gradients (N, c, d) and Laplacians (N, c)."""

    gradients: np.ndarray | None = None
    laplacians: np.ndarray | None = None

    def check(self, signal: SampledSignal):
        n, c, d = signal.n, signal.c, signal.d
        if self.gradients is not None:
            self.gradients = np.asarray(self.gradients, dtype=float).reshape(n, c, d)
        if self.laplacians is not None:
            self.laplacians = np.asarray(self.laplacians, dtype=float).reshape(n, c)
        return self


def _pred_grad(model, encoder, coords):
    return input_derivatives_batch(model, encoder or IdentityEncoder(model.input_dim), coords, 1)


def loss_mse(model: MlpModel, encoder: Encoder | None, signal: SampledSignal) -> float:
    """(1/N) sum_i ||f(x_i) - y_i||^2."""
    enc = encoder or IdentityEncoder(model.input_dim)
    r = propagate(model, enc, signal.coords, 0).out[0] - signal.values
    return float(np.sum(r * r) / signal.n)


def loss_grad(model: MlpModel, encoder: Encoder | None, coords, g) -> float:
    """(1/N) sum_i ||grad f(x_i) - g_i||^2 with g given as (N, c, d) or (N, c*d)."""
    d = _pred_grad(model, encoder, np.atleast_2d(coords))
    r = d.jacobian - np.asarray(g, dtype=float).reshape(d.jacobian.shape)
    return float(np.sum(r * r) / r.shape[0])


def loss_laplacian(model: MlpModel, encoder: Encoder | None, coords, h) -> float:
    """(1/N) sum_i ||Lap f(x_i) - h_i||^2."""
    enc = encoder or IdentityEncoder(model.input_dim)
    d = input_derivatives_batch(model, enc, np.atleast_2d(coords), 2)
    lap = d.laplacian
    r = lap - np.asarray(h, dtype=float).reshape(lap.shape)
    return float(np.sum(r * r) / r.shape[0])


# --- operators ----------------------------------------------------------------

OPERATOR_KINDS = ("identity", "mask", "conv", "downsample")


@dataclass(frozen=True)
class ForwardOperator:
    kind: str = "identity"
    mask: np.ndarray | None = None
    kernel: np.ndarray | None = None
    factor: int = 1

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValueError(f"unknown operator {self.kind!r}; expected one of {OPERATOR_KINDS}")
        if self.kind == "mask":
            m = np.asarray(self.mask).astype(bool).reshape(-1)
            if not m.any():
                raise ValueError("mask keeps no samples: no constraints to fit")
            object.__setattr__(self, "mask", m)
        if self.kind == "conv":
            k = np.asarray(self.kernel, dtype=float)
            if k.size == 0 or any(s % 2 == 0 for s in k.shape) or not np.all(np.isfinite(k)):
                raise ValueError("conv kernel must be finite with odd length along every axis")
            object.__setattr__(self, "kernel", k)
        if self.kind == "downsample" and int(self.factor) < 1:
            raise ValueError("downsample factor must be >= 1")

    @property
    def pointwise(self) -> bool:
        """Measurements depend on single samples, so minibatching is valid."""
        return self.kind in ("identity", "mask")

    def _kernel_for(self, ndim: int) -> np.ndarray:
        k = self.kernel
        if k.ndim == ndim:
            return k
        if k.ndim == 1 and ndim == 2:
            return np.outer(k, k)
        raise ValueError(f"kernel with {k.ndim} dims cannot act on a {ndim}-D grid")

    def _grid(self, grid_shape):
        if grid_shape is None:
            raise ValueError(f"{self.kind} operator needs grid_shape")
        return tuple(grid_shape)

    def apply(self, u: np.ndarray, grid_shape=None) -> np.ndarray:
        """Measurements from dense samples u of shape (N, c)."""
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        n, c = u.shape
        if self.kind == "identity":
            return u
        if self.kind == "mask":
            if self.mask.shape[0] != n:
                raise ValueError(f"mask length {self.mask.shape[0]} != sample count {n}")
            return u[self.mask]
        shape = self._grid(grid_shape)
        img = u.reshape(*shape, c)
        if self.kind == "conv":
            k = self._kernel_for(len(shape))
            out = np.stack(
                [ndimage.convolve(img[..., j], k, mode="constant", cval=0.0) for j in range(c)], -1
            )
            return out.reshape(n, c)
        f = int(self.factor)
        if any(s % f for s in shape):
            raise ValueError(f"downsample factor {f} does not divide grid {shape}")
        new = [s // f for s in shape]
        blocks = img.reshape(*[x for s in new for x in (s, f)], c)
        axes = tuple(range(1, 2 * len(shape), 2))
        return blocks.mean(axis=axes).reshape(-1, c)

    def adjoint(self, v: np.ndarray, n: int, grid_shape=None) -> np.ndarray:
        """Transpose of :meth:`apply`, mapping measurement-space arrays back to (n, c)."""
        v = np.asarray(v, dtype=float)
        c = v.shape[1]
        if self.kind == "identity":
            return v
        if self.kind == "mask":
            out = np.zeros((n, c))
            out[self.mask] = v
            return out
        shape = self._grid(grid_shape)
        if self.kind == "conv":
            k = self._kernel_for(len(shape))
            img = v.reshape(*shape, c)
            out = np.stack(
                [ndimage.correlate(img[..., j], k, mode="constant", cval=0.0) for j in range(c)], -1
            )
            return out.reshape(n, c)
        f = int(self.factor)
        new = [s // f for s in shape]
        img = v.reshape(*new, c)
        for ax in range(len(shape)):
            img = np.repeat(img, f, axis=ax)
        return img.reshape(n, c) / f ** len(shape)

    def to_dict(self) -> dict:
        d = {"op": self.kind}
        if self.kind == "mask":
            d["mask"] = self.mask.astype(int).tolist()
        if self.kind == "conv":
            d["kernel"] = self.kernel.tolist()
        if self.kind == "downsample":
            d["factor"] = int(self.factor)
        return d


def apply_forward_operator(op: ForwardOperator, samples, grid_shape=None) -> np.ndarray:
    return op.apply(samples, grid_shape)


# --- regularizers -----------------------------------------------------------------


@dataclass(frozen=True)
class Regularizer:
    """``weight_decay``: lam * ||theta||^2 over model arrays.
    ``tv``: lam * sum of |forward differences| of f along each grid axis.
    """

    kind: str
    lam: float
    coords: np.ndarray | None = None
    grid_shape: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("weight_decay", "tv"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.lam < 0:
            raise ValueError("regularizer weight must be non-negative")
        if self.kind == "tv":
            if self.coords is None or self.grid_shape is None:
                raise ValueError("tv needs an evaluation grid (coords and grid_shape)")
            object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))
            object.__setattr__(self, "grid_shape", tuple(self.grid_shape))


def _tv_value_grad(Y: np.ndarray, grid_shape) -> tuple[float, np.ndarray]:
    img = Y.reshape(*grid_shape, -1)
    total = 0.0
    g = np.zeros_like(img)
    for ax in range(len(grid_shape)):
        diff = np.diff(img, axis=ax)
        total += float(np.abs(diff).sum())
        s = np.sign(diff)
        hi = [slice(None)] * img.ndim
        lo = [slice(None)] * img.ndim
        hi[ax] = slice(1, None)
        lo[ax] = slice(None, -1)
        g[tuple(hi)] += s
        g[tuple(lo)] -= s
    return total, g.reshape(Y.shape)


def regularizer_value(reg: Regularizer, model: MlpModel, encoder: Encoder) -> float:
    if reg.kind == "weight_decay":
        return reg.lam * float(sum(np.sum(a * a) for a in model.arrays()))
    Y = propagate(model, encoder, reg.coords, 0).out[0]
    return reg.lam * _tv_value_grad(Y, reg.grid_shape)[0]


# --- composed objective -------------------------------------------------------

FIDELITY_KINDS = ("value", "gradient", "laplacian")


@dataclass
class Objective:
    """Measurement fit of one network quantity plus regularizers.

    ``kind`` picks the quantity fed through the operator: network values
    (N, c), input jacobians flattened to (N, c*d), or Laplacians (N, c).
    """

    coords: np.ndarray
    measurements: np.ndarray
    operator: ForwardOperator = field(default_factory=ForwardOperator)
    kind: str = "value"
    grid_shape: tuple[int, ...] | None = None
    regularizers: Sequence[Regularizer] = ()

    def __post_init__(self):
        if self.kind not in FIDELITY_KINDS:
            raise ValueError(f"unknown fidelity {self.kind!r}; expected one of {FIDELITY_KINDS}")
        self.coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        y = np.asarray(self.measurements, dtype=float)
        self.measurements = y[:, None] if y.ndim == 1 else y.reshape(y.shape[0], -1)

    @property
    def order(self) -> int:
        return FIDELITY_KINDS.index(self.kind)

    @classmethod
    def from_signal(cls, signal: SampledSignal, regularizers: Sequence[Regularizer] = ()):
        return cls(signal.coords, signal.values, ForwardOperator(), "value", signal.grid_shape,
                   tuple(regularizers))

    def value_and_grad(self, model: MlpModel, encoder: Encoder | None,
                       batch: np.ndarray | None = None) -> tuple[float, Gradients]:
        """Objective and exact gradients; ``batch`` restricts pointwise operators to a subset."""
        enc = encoder or IdentityEncoder(model.input_dim)
        op, X, y = self.operator, self.coords, self.measurements
        if batch is not None:
            if not op.pointwise:
                raise ValueError(f"{op.kind} measurements couple samples; minibatches need a pointwise operator")
            if op.kind == "mask":
                keep = op.mask[batch]
                rows = np.cumsum(op.mask) - 1
                X, y = X[batch][keep], y[rows[batch][keep]]
                op = ForwardOperator()
                if X.shape[0] == 0:
                    return _regularized(self, model, enc, Gradients.zeros(model, enc), 0.0)
            else:
                X, y = X[batch], y[batch]
        n = X.shape[0]
        order = self.order
        tape = propagate(model, enc, X, order, keep=True)
        Y, DY, D2Y = tape.out
        if order == 0:
            q = Y
        elif order == 1:
            q = np.transpose(DY, (1, 0, 2)).reshape(n, -1)  # (N, d*c) axis-major
        else:
            q = D2Y.sum(axis=0)
        if order == 1:
            y_q = self._jac_targets(y, n, Y.shape[1])
        else:
            y_q = y
        meas = op.apply(q, self.grid_shape)
        if meas.shape != y_q.shape:
            raise ValueError(f"operator output {meas.shape} does not match measurements {y_q.shape}")
        r = meas - y_q
        m = r.shape[0]
        value = float(np.sum(r * r) / m)
        if not np.isfinite(value):
            bad = np.flatnonzero(~np.isfinite(q).all(axis=1))
            if bad.size == 0 and op.kind == "identity":
                bad = np.flatnonzero(~np.isfinite(r).all(axis=1))
            i = int(bad[0]) if bad.size else 0
            raise NonFiniteError(f"non-finite objective at coordinate {X[i].tolist()}", X[i])
        gq = op.adjoint(2.0 * r / m, n, self.grid_shape)
        gY = np.zeros_like(Y)
        gDY = gD2Y = None
        if order == 0:
            gY = gq
        elif order == 1:
            gDY = np.transpose(gq.reshape(n, DY.shape[0], Y.shape[1]), (1, 0, 2))
        else:
            gDY = np.zeros_like(DY)
            gD2Y = np.broadcast_to(gq, D2Y.shape).copy()
        grads = backward(model, enc, tape, gY, gDY, gD2Y)
        return _regularized(self, model, enc, grads, value)

    def value(self, model: MlpModel, encoder: Encoder | None = None) -> float:
        return self.value_and_grad(model, encoder)[0]

    @staticmethod
    def _jac_targets(y, n, c):
        """Gradient targets given as (N, c, d) rows flattened c-major; reorder to axis-major."""
        d = y.shape[1] // c
        return np.transpose(y.reshape(-1, c, d), (0, 2, 1)).reshape(-1, c * d)


def _regularized(obj: Objective, model, enc, grads: Gradients, value: float):
    for reg in obj.regularizers:
        if reg.lam == 0:
            continue
        if reg.kind == "weight_decay":
            value += reg.lam * float(sum(np.sum(a * a) for a in model.arrays()))
            grads = grads + Gradients([2.0 * reg.lam * a for a in model.arrays()],
                                      [np.zeros_like(a) for a in enc.arrays()])
        else:
            tape = propagate(model, enc, reg.coords, 0, keep=True)
            tv, g = _tv_value_grad(tape.out[0], reg.grid_shape)
            value += reg.lam * tv
            grads = grads + backward(model, enc, tape, reg.lam * g)
    return value, grads


def total_objective(model: MlpModel, encoder: Encoder | None, fidelity: str,
                    operator: ForwardOperator, measurements, coords,
                    regularizers: Sequence[Regularizer] = (), grid_shape=None):
    """D(A(q), y) + sum lam_j R_j and its exact gradients.

    ``fidelity`` names the supervised quantity q: "value", "gradient" or
    "laplacian"; gradient measurements are rows of (c, d) jacobians flattened.
    """
    obj = Objective(coords, measurements, operator, fidelity, grid_shape, tuple(regularizers))
    return obj.value_and_grad(model, encoder)
