"""Coordinate MLPs: evaluation, exact input derivatives and parameter gradients.

A hidden layer computes ``h' = psi(omega * (W h + b))``; the last layer is
affine. Input derivatives are carried forward per input axis (jacobian and the
diagonal of the Hessian), and gradients with respect to every parameter are
obtained by a hand-written reverse pass through that forward-mode
computation. This gives exact gradients for losses on values, jacobians and
Laplacians without a general autodiff graph.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .atoms import Atom, UnsupportedDerivativeError, chebyshev_basis
from .encoders import Encoder, IdentityEncoder

log = logging.getLogger(__name__)


class NonFiniteError(FloatingPointError):
    """Loss or output overflowed; carries the offending coordinate when known."""

    def __init__(self, message: str, coord: np.ndarray | None = None):
        super().__init__(message)
        self.coord = coord


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)
    atom: Atom | None = None  # None for the final affine layer
    omega: float = 1.0
    learn_atom: bool = False  # chebyshev coefficients trainable

    def __post_init__(self):
        W = np.asarray(self.weight, dtype=float)
        b = np.asarray(self.bias, dtype=float).reshape(-1)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ValueError(f"layer shapes inconsistent: W {W.shape}, b {b.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if self.learn_atom and (self.atom is None or self.atom.id != "chebyshev"):
            raise ValueError("only chebyshev atoms have trainable coefficients")
        object.__setattr__(self, "weight", W)
        object.__setattr__(self, "bias", b)

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class MlpModel:
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("model needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError("adjacent layer dimensions do not chain")
        for l in layers[:-1]:
            if l.atom is None:
                raise ValueError("hidden layers need an activation atom")
        if layers[-1].atom is not None:
            raise ValueError("final layer must be affine")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].n_out

    @property
    def max_order(self) -> int:
        orders = [l.atom.max_order for l in self.layers[:-1]]
        return min(orders) if orders else 2

    def arrays(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out += [l.weight, l.bias]
            if l.learn_atom:
                out.append(np.asarray(l.atom.params["coeffs"], dtype=float))
        return out

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "MlpModel":
        it = iter(arrays)
        layers = []
        for l in self.layers:
            W, b = next(it), next(it)
            atom = l.atom
            if l.learn_atom:
                atom = atom.with_params(coeffs=tuple(float(c) for c in next(it)))
            layers.append(replace(l, weight=np.array(W, dtype=float), bias=np.array(b, dtype=float), atom=atom))
        return MlpModel(tuple(layers))

    def n_params(self) -> int:
        return int(sum(a.size for a in self.arrays()))


@dataclass
class InputDerivatives:
    """value (c,), jacobian (c, d), hessian_diag (c, d) at one point (or batched with a leading N)."""

    value: np.ndarray
    jacobian: np.ndarray | None = None
    hessian_diag: np.ndarray | None = None

    @property
    def laplacian(self) -> np.ndarray:
        return self.hessian_diag.sum(axis=-1)


@dataclass
class Gradients:
    """Parameter gradients aligned with ``model.arrays()`` and ``encoder.arrays()``."""

    model: list[np.ndarray]
    encoder: list[np.ndarray] = field(default_factory=list)

    def flat(self) -> list[np.ndarray]:
        return list(self.model) + list(self.encoder)

    def scaled(self, c: float) -> "Gradients":
        return Gradients([c * g for g in self.model], [c * g for g in self.encoder])

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(
            [a + b for a, b in zip(self.model, other.model)],
            [a + b for a, b in zip(self.encoder, other.encoder)],
        )

    @classmethod
    def zeros(cls, model: MlpModel, encoder: Encoder | None = None) -> "Gradients":
        enc = encoder.arrays() if encoder is not None else []
        return cls([np.zeros_like(a) for a in model.arrays()], [np.zeros_like(a) for a in enc])


@dataclass
class Tape:
    """Forward cache for one batch. Derivative stacks are axis-first: (d, N, n)."""

    X: np.ndarray
    order: int
    encoded: object
    inputs: list = field(default_factory=list)  # per layer: (H, DH, D2H)
    pre: list = field(default_factory=list)  # per hidden layer: (A, DA, D2A, psi-jet)
    out: tuple = ()


def _check_input(model: MlpModel, encoder: Encoder, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != encoder.in_dim:
        raise ValueError(f"coordinate dimension {X.shape[1]} != encoder input {encoder.in_dim}")
    if encoder.out_dim != model.input_dim:
        raise ValueError(f"encoder output {encoder.out_dim} != model input {model.input_dim}")
    if np.any(np.abs(X) > 1.0):
        log.info("extrapolating: %d coordinates outside [-1, 1]^d", int(np.sum(np.any(np.abs(X) > 1.0, axis=1))))
    return X


def propagate(model: MlpModel, encoder: Encoder, X: np.ndarray, order: int = 0,
              keep: bool = False) -> Tape:
    """Run the network on a batch carrying input derivatives up to ``order``.

    With ``keep`` the activation jets needed for a reverse pass are stored.
    """
    X = _check_input(model, encoder, X)
    if order > model.max_order:
        bad = [l.atom.id for l in model.layers[:-1] if l.atom.max_order < order]
        raise UnsupportedDerivativeError(
            f"input derivatives of order {order} need smoother atoms than {sorted(set(bad))}"
        )
    enc = encoder.propagate(X, order)
    tape = Tape(X, order, enc)
    H, DH, D2H = enc.value, enc.d1, enc.d2
    jet_order = order + 1 if keep else order
    for layer in model.layers:
        tape.inputs.append((H, DH, D2H))
        Wt = layer.weight.T
        w = layer.omega
        A = H @ Wt
        A += layer.bias
        DA = D2A = None
        if order >= 1:
            DA = DH @ Wt
        if order >= 2:
            D2A = D2H @ Wt
        if w != 1.0:
            A *= w
            if DA is not None:
                DA *= w
            if D2A is not None:
                D2A *= w
        if layer.atom is None:
            H, DH, D2H = A, DA, D2A
            break
        P = layer.atom.jet(A, jet_order)
        if keep:
            tape.pre.append((A, DA, D2A, P))
        H = P[0]
        if order >= 1:
            DH = P[1] * DA
        if order >= 2:
            D2H = P[2] * DA**2 + P[1] * D2A
    tape.out = (H, DH, D2H)
    return tape


def forward_batch(model: MlpModel, encoder: Encoder | None, X: np.ndarray) -> np.ndarray:
    if encoder is None:
        encoder = IdentityEncoder(model.input_dim)
    return propagate(model, encoder, X, 0).out[0]


def forward(model: MlpModel, encoder: Encoder | None, x) -> np.ndarray:
    """Evaluate the model at a single coordinate; returns a c-vector."""
    if encoder is None:
        encoder = IdentityEncoder(model.input_dim)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != encoder.in_dim:
        raise ValueError(f"coordinate has {x.shape[0]} entries, expected {encoder.in_dim}")
    return forward_batch(model, encoder, x[None, :])[0]


def input_derivatives_batch(model: MlpModel, encoder: Encoder, X: np.ndarray,
                            order: int = 2) -> InputDerivatives:
    """Values (N, c), jacobians (N, c, d) and Hessian diagonals (N, c, d)."""
    H, DH, D2H = propagate(model, encoder, X, order).out
    jac = np.transpose(DH, (1, 2, 0)) if DH is not None else None
    hes = np.transpose(D2H, (1, 2, 0)) if D2H is not None else None
    return InputDerivatives(H, jac, hes)


def forward_with_input_derivatives(model: MlpModel, encoder: Encoder | None, x,
                                   order: int = 2) -> InputDerivatives:
    """Exact value, jacobian (c, d) and Hessian diagonal (c, d) at one point.

    Hash encoders are piecewise linear, so only ``order=1`` is accepted for them.
    """
    if encoder is None:
        encoder = IdentityEncoder(model.input_dim)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    d = input_derivatives_batch(model, encoder, x, order)
    return InputDerivatives(
        d.value[0],
        None if d.jacobian is None else d.jacobian[0],
        None if d.hessian_diag is None else d.hessian_diag[0],
    )


def backward(model: MlpModel, encoder: Encoder, tape: Tape, gY: np.ndarray,
             gDY: np.ndarray | None = None, gD2Y: np.ndarray | None = None) -> Gradients:
    """Reverse pass given upstream gradients for the outputs.

    gY is (N, c); gDY and gD2Y are axis-first (d, N, c) gradients with respect
    to the jacobian and Hessian-diagonal stacks. Orders above ``tape.order``
    must be None.
    """
    if gDY is not None and tape.order < 1 or gD2Y is not None and tape.order < 2:
        raise ValueError("tape was recorded with too low a derivative order")
    g0, g1, g2 = gY, gDY, gD2Y
    grads: list[list[np.ndarray]] = []
    n_hidden = len(model.layers) - 1
    for li in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[li]
        H, DH, D2H = tape.inputs[li]
        w = layer.omega
        lgrads: list[np.ndarray] = []
        if layer.atom is not None:
            A, DA, D2A, P = tape.pre[li]
            coeff_grad = None
            if layer.learn_atom:
                coeff_grad = _coeff_grad(layer.atom, A, DA, D2A, g0, g1, g2)
            gA = g0 * P[1]
            gDA = gD2A = None
            if g1 is not None:
                gA = gA + np.sum(g1 * DA, axis=0) * P[2]
                gDA = g1 * P[1]
            if g2 is not None:
                gA = gA + np.sum(g2 * DA**2, axis=0) * P[3] + np.sum(g2 * D2A, axis=0) * P[2]
                gDA = gDA + 2.0 * g2 * P[2] * DA
                gD2A = g2 * P[1]
            g0, g1, g2 = gA, gDA, gD2A
        else:
            coeff_grad = None
        if w != 1.0:
            g0 = g0 * w
            g1 = None if g1 is None else g1 * w
            g2 = None if g2 is None else g2 * w
        gW = g0.T @ H
        if g1 is not None:
            gW += np.einsum("ano,ani->oi", g1, DH)
        if g2 is not None:
            gW += np.einsum("ano,ani->oi", g2, D2H)
        gb = g0.sum(axis=0)
        lgrads = [gW, gb] + ([coeff_grad] if coeff_grad is not None else [])
        grads.append(lgrads)
        Wm = layer.weight
        g0 = g0 @ Wm
        g1 = None if g1 is None else g1 @ Wm
        g2 = None if g2 is None else g2 @ Wm
    del n_hidden
    flat = [g for lg in reversed(grads) for g in lg]
    enc_grads = encoder.backward(tape.X, tape.encoded, g0, g1, g2)
    return Gradients(flat, enc_grads)


def _coeff_grad(atom: Atom, A, DA, D2A, g0, g1, g2) -> np.ndarray:
    k = len(atom.params["coeffs"])
    order = 0 if g1 is None else (1 if g2 is None else 2)
    basis = chebyshev_basis(A, k, order)
    out = np.zeros(k)
    for j, T in enumerate(basis):
        acc = np.sum(g0 * T[0])
        if g1 is not None:
            acc += np.sum(g1 * T[1] * DA)
        if g2 is not None:
            acc += np.sum(g2 * (T[2] * DA**2 + T[1] * D2A))
        out[j] = acc
    return out


@dataclass
class PointLoss:
    """Squared-error supervision on values, input jacobians and Laplacians at ``coords``.

    Each present term contributes ``weight * mean_i ||pred_i - target_i||^2``.
    ``gradients`` is (N, c, d); ``laplacians`` is (N, c).
    """

    coords: np.ndarray
    values: np.ndarray | None = None
    gradients: np.ndarray | None = None
    laplacians: np.ndarray | None = None
    value_weight: float = 1.0
    grad_weight: float = 1.0
    lap_weight: float = 1.0

    @property
    def order(self) -> int:
        if self.laplacians is not None:
            return 2
        return 1 if self.gradients is not None else 0

    def __call__(self, Y, J, L):
        n = Y.shape[0]
        loss = 0.0
        gY = np.zeros_like(Y)
        gJ = None if J is None else np.zeros_like(J)
        gL = None if L is None else np.zeros_like(L)
        rows = np.zeros(n)
        if self.values is not None:
            r = Y - np.asarray(self.values, dtype=float).reshape(Y.shape)
            rows += self.value_weight * np.sum(r * r, axis=1) / n
            gY = 2.0 * self.value_weight * r / n
        if self.gradients is not None:
            r = J - np.asarray(self.gradients, dtype=float).reshape(J.shape)
            rows += self.grad_weight * np.sum(r * r, axis=(1, 2)) / n
            gJ = 2.0 * self.grad_weight * r / n
        if self.laplacians is not None:
            r = L - np.asarray(self.laplacians, dtype=float).reshape(L.shape)
            rows += self.lap_weight * np.sum(r * r, axis=1) / n
            gL = 2.0 * self.lap_weight * r / n
        loss = float(np.sum(rows))
        return loss, rows, gY, gJ, gL


def loss_backward(model: MlpModel, encoder: Encoder | None, loss, coords=None,
                  order: int | None = None) -> tuple[float, Gradients]:
    """Loss value and exact parameter gradients for a loss on network outputs.

    ``loss`` is a callable ``(Y, J, L) -> (value, per_row, gY, gJ, gL)`` where
    Y is (N, c), J the jacobians (N, c, d) or None and L the Laplacians (N, c)
    or None; ``per_row`` localizes non-finite values. A :class:`PointLoss`
    carries its own coordinates and derivative order.
    """
    if encoder is None:
        encoder = IdentityEncoder(model.input_dim)
    if coords is None:
        coords = loss.coords
    if order is None:
        order = getattr(loss, "order", 0)
    tape = propagate(model, encoder, coords, order, keep=True)
    Y, DY, D2Y = tape.out
    J = np.transpose(DY, (1, 2, 0)) if order >= 1 else None
    L = D2Y.sum(axis=0) if order >= 2 else None
    value, rows, gY, gJ, gL = loss(Y, J, L)
    if not np.isfinite(value):
        bad = np.flatnonzero(~np.isfinite(rows))
        i = int(bad[0]) if bad.size else int(np.argmax(np.abs(np.nan_to_num(rows, nan=np.inf))))
        raise NonFiniteError(f"non-finite loss at coordinate {tape.X[i].tolist()}", tape.X[i])
    gDY = np.transpose(gJ, (2, 0, 1)) if gJ is not None else None
    gD2Y = np.broadcast_to(gL, D2Y.shape).copy() if gL is not None else None
    return value, backward(model, encoder, tape, gY, gDY, gD2Y)
