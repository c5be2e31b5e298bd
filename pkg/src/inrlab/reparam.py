"""Weights expressed as learned combinations of fixed cosine bases, W = Lambda @ B."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import Layer, MlpModel
from .rng import Rng


def cosine_basis(n_in: int, r: int, rng: Rng) -> np.ndarray:
    """r x n_in rows cos(2 pi f_i k / n_in + phi_i).

    Frequencies f_i are log-spaced over [1, max(1, n_in/2)] cycles and phases
    are uniform on [0, 2 pi) from ``rng``.
    """
    f = np.geomspace(1.0, max(1.0, n_in / 2.0), r)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=r)
    k = np.arange(n_in)
    return np.cos(2.0 * math.pi * np.outer(f, k) / n_in + phi[:, None])


@dataclass(frozen=True)
class ReparamLinear:
    """Trainable coefficients ``lam`` (n_out x r) over a frozen basis ``basis`` (r x n_in)."""

    lam: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        B = np.asarray(self.basis, dtype=float)
        if lam.ndim != 2 or B.ndim != 2 or lam.shape[1] != B.shape[0]:
            raise ValueError(f"coefficient shape {lam.shape} does not match basis {B.shape}")
        B = B.copy()
        B.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "basis", B)

    @classmethod
    def fit_weight(cls, W: np.ndarray, basis: np.ndarray) -> "ReparamLinear":
        """Coefficients reproducing W as closely as the basis allows (least squares)."""
        lam = np.linalg.lstsq(np.asarray(basis).T, np.asarray(W).T, rcond=None)[0].T
        return cls(lam, basis)

    def forward(self, H: np.ndarray) -> np.ndarray:
        """H @ (lam B)^T evaluated as (H @ B^T) @ lam^T."""
        return (H @ self.basis.T) @ self.lam.T


def collapse_reparam(layer: ReparamLinear) -> np.ndarray:
    return layer.lam @ layer.basis


@dataclass(frozen=True)
class ReparamModel:
    """An MLP whose selected layers store ``ReparamLinear`` weights.

    Exposes ``arrays``/``with_arrays`` over (lam or W, b) per layer so the
    generic fitting loop can optimize it; ``collapse`` gives the plain model
    and ``pullback`` maps weight gradients to coefficient gradients.
    """

    base: MlpModel
    reparam: tuple[ReparamLinear | None, ...]

    @classmethod
    def from_model(cls, model: MlpModel, rng: Rng, rank: int | None = None,
                   layers: tuple[int, ...] | None = None) -> "ReparamModel":
        """Reparameterize ``layers`` (default: all but the first) with rank ``rank`` (default n_in)."""
        if layers is None:
            layers = tuple(range(1, len(model.layers)))
        rp = []
        for i, l in enumerate(model.layers):
            if i in layers:
                B = cosine_basis(l.n_in, rank or l.n_in, rng.spawn(i))
                rp.append(ReparamLinear.fit_weight(l.weight, B))
            else:
                rp.append(None)
        return cls(model, tuple(rp))

    def collapse(self) -> MlpModel:
        layers = [
            l if r is None else replace(l, weight=collapse_reparam(r))
            for l, r in zip(self.base.layers, self.reparam)
        ]
        return MlpModel(tuple(layers))

    def arrays(self) -> list[np.ndarray]:
        out = []
        for l, r in zip(self.base.layers, self.reparam):
            out += [l.weight if r is None else r.lam, l.bias]
            if l.learn_atom:
                out.append(np.asarray(l.atom.params["coeffs"], dtype=float))
        return out

    def with_arrays(self, arrays) -> "ReparamModel":
        it = iter(arrays)
        plain, rps = [], []
        for l, r in zip(self.base.layers, self.reparam):
            first = next(it)
            if r is None:
                plain += [first, next(it)]
                rps.append(None)
            else:
                rr = replace(r, lam=first)
                plain += [collapse_reparam(rr), next(it)]
                rps.append(rr)
            if l.learn_atom:
                plain.append(next(it))
        return ReparamModel(self.base.with_arrays(plain), tuple(rps))

    def pullback(self, grads: list[np.ndarray]) -> list[np.ndarray]:
        out = list(grads)
        pos = 0
        for l, r in zip(self.base.layers, self.reparam):
            if r is not None:
                out[pos] = grads[pos] @ r.basis.T
            pos += 3 if l.learn_atom else 2
        return out
