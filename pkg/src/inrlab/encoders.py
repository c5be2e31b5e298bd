"""Coordinate encoders: identity, Fourier features and a multiresolution hash grid.

Each encoder maps an (N, d) coordinate batch to (N, m) features and can also
propagate per-axis input derivatives (jacobian and second-derivative diagonal)
for the network engine. Trainable encoders expose their arrays through
``arrays()`` / ``with_arrays()`` and return parameter gradients from
``backward``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .atoms import UnsupportedDerivativeError
from .rng import Rng

HASH_PRIMES = (1, 2654435761, 805459861)


@dataclass
class EncodedBatch:
    """Features and their per-axis derivative stacks (axis-first: (d, N, m))."""

    value: np.ndarray
    d1: np.ndarray | None = None
    d2: np.ndarray | None = None
    cache: dict = field(default_factory=dict)


class Encoder:
    kind = "abstract"
    max_order = 2

    in_dim: int
    out_dim: int

    def encode(self, X: np.ndarray) -> np.ndarray:
        return self.propagate(np.atleast_2d(X), 0).value

    def propagate(self, X: np.ndarray, order: int) -> EncodedBatch:
        raise NotImplementedError

    def arrays(self) -> list[np.ndarray]:
        return []

    def with_arrays(self, arrays: Sequence[np.ndarray]) -> "Encoder":
        return self

    def backward(self, X, batch: EncodedBatch, g0, g1, g2) -> list[np.ndarray]:
        return []

    def _check(self, X: np.ndarray, order: int):
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"expected coordinates of shape (N, {self.in_dim}), got {X.shape}")
        if order > self.max_order:
            raise UnsupportedDerivativeError(
                f"{self.kind} encoder supports input derivatives up to order {self.max_order}"
            )


def _axis_eye(X: np.ndarray) -> np.ndarray:
    n, d = X.shape
    d1 = np.zeros((d, n, d))
    for a in range(d):
        d1[a, :, a] = 1.0
    return d1


@dataclass(frozen=True)
class IdentityEncoder(Encoder):
    in_dim: int

    kind = "identity"

    @property
    def out_dim(self) -> int:
        return self.in_dim

    def propagate(self, X, order):
        X = np.asarray(X, dtype=float)
        self._check(X, order)
        out = EncodedBatch(X)
        if order >= 1:
            out.d1 = _axis_eye(X)
        if order >= 2:
            out.d2 = np.zeros_like(out.d1)
        return out

    def to_dict(self):
        return {"kind": self.kind, "in_dim": self.in_dim}


@dataclass(frozen=True)
class FourierFeatureEncoder(Encoder):
    """gamma(x) = [cos(2 pi B x), sin(2 pi B x)], cosines first.

    ``B`` is (m, d) in cycles per unit coordinate. ``mode`` records how it was
    built (gaussian / logspaced / fixed); ``trainable`` lets the optimizer
    update it.
    """

    B: np.ndarray
    mode: str = "fixed"
    sigma: float | None = None
    octaves: int | None = None
    trainable: bool = False

    kind = "fourier"

    def __post_init__(self):
        B = np.asarray(self.B, dtype=float)
        if B.ndim != 2 or not np.all(np.isfinite(B)):
            raise ValueError("B must be a finite (m, d) matrix")
        object.__setattr__(self, "B", B)

    @property
    def in_dim(self) -> int:
        return self.B.shape[1]

    @property
    def m(self) -> int:
        return self.B.shape[0]

    @property
    def out_dim(self) -> int:
        return 2 * self.m

    def propagate(self, X, order):
        X = np.asarray(X, dtype=float)
        self._check(X, order)
        W = 2.0 * math.pi * self.B  # (m, d)
        u = X @ W.T
        c, s = np.cos(u), np.sin(u)
        out = EncodedBatch(np.concatenate([c, s], axis=1), cache={"c": c, "s": s})
        if order >= 1:
            out.d1 = np.stack(
                [np.concatenate([-s * W[:, a], c * W[:, a]], axis=1) for a in range(self.in_dim)]
            )
        if order >= 2:
            out.d2 = np.stack(
                [
                    np.concatenate([-c * W[:, a] ** 2, -s * W[:, a] ** 2], axis=1)
                    for a in range(self.in_dim)
                ]
            )
        return out

    def arrays(self):
        return [self.B] if self.trainable else []

    def with_arrays(self, arrays):
        if not self.trainable:
            return self
        return replace(self, B=np.asarray(arrays[0], dtype=float))

    def backward(self, X, batch, g0, g1, g2):
        if not self.trainable:
            return []
        m = self.m
        W = 2.0 * math.pi * self.B
        c, s = batch.cache["c"], batch.cache["s"]
        gu = -g0[:, :m] * s + g0[:, m:] * c
        gw = np.zeros_like(W)  # explicit dependence of the derivative stacks on W
        for a in range(self.in_dim):
            w = W[:, a]
            if g1 is not None:
                g1c, g1s = g1[a][:, :m], g1[a][:, m:]
                gu += (-g1c * c - g1s * s) * w
                gw[:, a] += np.sum(-g1c * s + g1s * c, axis=0)
            if g2 is not None:
                g2c, g2s = g2[a][:, :m], g2[a][:, m:]
                gu += (g2c * s - g2s * c) * w**2
                gw[:, a] += np.sum(-g2c * c - g2s * s, axis=0) * 2.0 * w
        return [2.0 * math.pi * (gu.T @ X + gw)]

    def to_dict(self):
        return {
            "kind": self.kind,
            "mode": self.mode,
            "sigma": self.sigma,
            "octaves": self.octaves,
            "trainable": self.trainable,
            "shape": list(self.B.shape),
        }


def fourier_gaussian(d: int, m: int, sigma: float, rng: Rng, trainable: bool = False):
    """Random Fourier features: B_ij ~ N(0, sigma^2)."""
    B = rng.normal(0.0, sigma, size=(m, d))
    return FourierFeatureEncoder(B, mode="gaussian", sigma=sigma, trainable=trainable)


def fourier_logspaced(d: int, octaves: int, trainable: bool = False):
    """Axis-aligned frequencies 2^0..2^(K-1) per axis; rows ordered octave-major."""
    rows = []
    for k in range(octaves):
        for a in range(d):
            r = np.zeros(d)
            r[a] = 2.0**k
            rows.append(r)
    return FourierFeatureEncoder(np.array(rows), mode="logspaced", octaves=octaves, trainable=trainable)


class HashGridEncoder(Encoder):
    """Multiresolution hash grid with d-linear interpolation.

    Level l has resolution N_l = floor(N0 * b**l) cells per axis and
    (N_l + 1)**d lattice vertices. Levels whose vertices fit in the table are
    indexed directly (row-major, first axis fastest); the rest use
    XOR(v_i * prime_i) mod T with primes (1, 2654435761, 805459861).
    Coordinates in [-1, 1]^d map affinely to [0, N_l]^d.
    """

    kind = "hash"
    max_order = 1

    def __init__(self, in_dim: int, levels: int, base_resolution: int, growth: float,
                 table_size: int, feature_dim: int, tables: np.ndarray | None = None,
                 rng: Rng | None = None):
        if not 1 <= in_dim <= len(HASH_PRIMES):
            raise ValueError(f"hash encoder supports 1..{len(HASH_PRIMES)} dims")
        if growth <= 1.0 and levels > 1:
            raise ValueError("growth factor must exceed 1")
        self.in_dim = in_dim
        self.levels = levels
        self.base_resolution = base_resolution
        self.growth = float(growth)
        self.table_size = table_size
        self.feature_dim = feature_dim
        if tables is None:
            if rng is None:
                raise ValueError("need tables or an rng to initialize them")
            tables = rng.uniform(-1e-4, 1e-4, size=(levels, table_size, feature_dim))
        tables = np.asarray(tables, dtype=float)
        if tables.shape != (levels, table_size, feature_dim):
            raise ValueError("table array shape mismatch")
        self.tables = tables

    @property
    def out_dim(self) -> int:
        return self.levels * self.feature_dim

    def resolution(self, level: int) -> int:
        return int(math.floor(self.base_resolution * self.growth**level))

    def collision_free(self, level: int) -> bool:
        return (self.resolution(level) + 1) ** self.in_dim <= self.table_size

    def hash_index(self, level: int, v) -> np.ndarray | int:
        """Table slot(s) for integer lattice point(s) v (shape (..., d))."""
        v = np.asarray(v, dtype=np.int64)
        scalar = v.ndim == 1
        v = np.atleast_2d(v)
        n = self.resolution(level)
        if v.shape[-1] != self.in_dim:
            raise ValueError("lattice point dimension mismatch")
        if np.any(v < 0) or np.any(v > n):
            raise ValueError(f"lattice point outside [0, {n}] at level {level}")
        if self.collision_free(level):
            idx = np.zeros(v.shape[0], dtype=np.int64)
            stride = 1
            for a in range(self.in_dim):
                idx += v[:, a] * stride
                stride *= n + 1
        else:
            h = np.zeros(v.shape[0], dtype=np.uint64)
            for a in range(self.in_dim):
                h ^= v[:, a].astype(np.uint64) * np.uint64(HASH_PRIMES[a])
            idx = (h % np.uint64(self.table_size)).astype(np.int64)
        return int(idx[0]) if scalar else idx

    def _corners(self, X: np.ndarray, level: int):
        n = self.resolution(level)
        u = (X + 1.0) * 0.5 * n
        cell = np.clip(np.floor(u), 0, n - 1).astype(np.int64)
        frac = u - cell
        d = self.in_dim
        out = []
        for corner in range(1 << d):
            bits = [(corner >> a) & 1 for a in range(d)]
            v = cell + np.array(bits, dtype=np.int64)
            w = np.ones(X.shape[0])
            dw = []
            for a in range(d):
                w = w * (frac[:, a] if bits[a] else 1.0 - frac[:, a])
            for a in range(d):
                g = np.full(X.shape[0], 0.5 * n if bits[a] else -0.5 * n)
                for b in range(d):
                    if b != a:
                        g = g * (frac[:, b] if bits[b] else 1.0 - frac[:, b])
                dw.append(g)
            out.append((self.hash_index(level, v), w, np.stack(dw)))
        return out

    def propagate(self, X, order):
        X = np.asarray(X, dtype=float)
        self._check(X, order)
        N, F = X.shape[0], self.feature_dim
        value = np.zeros((N, self.out_dim))
        d1 = np.zeros((self.in_dim, N, self.out_dim)) if order >= 1 else None
        corners_all = []
        for lvl in range(self.levels):
            corners = self._corners(X, lvl)
            corners_all.append(corners)
            sl = slice(lvl * F, (lvl + 1) * F)
            tab = self.tables[lvl]
            for idx, w, dw in corners:
                feat = tab[idx]
                value[:, sl] += w[:, None] * feat
                if d1 is not None:
                    d1[:, :, sl] += dw[:, :, None] * feat[None]
        return EncodedBatch(value, d1, None, cache={"corners": corners_all})

    def arrays(self):
        return [self.tables]

    def with_arrays(self, arrays):
        return HashGridEncoder(self.in_dim, self.levels, self.base_resolution, self.growth,
                               self.table_size, self.feature_dim, tables=arrays[0])

    def backward(self, X, batch, g0, g1, g2):
        if g2 is not None:
            raise UnsupportedDerivativeError("hash encoder has no second derivatives")
        F = self.feature_dim
        grad = np.zeros_like(self.tables)
        for lvl, corners in enumerate(batch.cache["corners"]):
            sl = slice(lvl * F, (lvl + 1) * F)
            for idx, w, dw in corners:
                contrib = w[:, None] * g0[:, sl]
                if g1 is not None:
                    contrib = contrib + np.einsum("an,anf->nf", dw, g1[:, :, sl])
                np.add.at(grad[lvl], idx, contrib)
        return [grad]

    def to_dict(self):
        return {
            "kind": self.kind,
            "in_dim": self.in_dim,
            "levels": self.levels,
            "base_resolution": self.base_resolution,
            "growth": self.growth,
            "table_size": self.table_size,
            "feature_dim": self.feature_dim,
            "primes": list(HASH_PRIMES),
        }
