"""Discrete Fourier transforms, normalized spectrum profiles and spectrum-matched selection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .encoders import Encoder, IdentityEncoder
from .init import ArchSpec, InitScheme, init_model
from .model import forward_batch
from .rng import Rng


def _fft_pow2(x: np.ndarray, inverse: bool) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey along the last axis."""
    n = x.shape[-1]
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    a = x[..., rev].astype(complex)
    sign = 1.0 if inverse else -1.0
    size = 2
    while size <= n:
        half = size // 2
        tw = np.exp(sign * 2j * math.pi * np.arange(half) / size)
        a = a.reshape(*x.shape[:-1], n // size, size)
        even = a[..., :half].copy()
        odd = a[..., half:] * tw
        a[..., :half] = even + odd
        a[..., half:] = even - odd
        a = a.reshape(*x.shape[:-1], n)
        size *= 2
    return a


def _dft_direct(x: np.ndarray, inverse: bool) -> np.ndarray:
    n = x.shape[-1]
    k = np.arange(n)
    sign = 1.0 if inverse else -1.0
    M = np.exp(sign * 2j * math.pi * np.outer(k, k) / n)
    return x.astype(complex) @ M.T


def dft(x, axis: int = -1) -> np.ndarray:
    """Unnormalized forward DFT: X_k = sum_t x_t exp(-2 pi i k t / n).

    Radix-2 FFT for power-of-two lengths, direct summation otherwise.
    """
    x = np.moveaxis(np.asarray(x), axis, -1)
    n = x.shape[-1]
    if n < 2:
        raise ValueError("dft needs at least 2 samples")
    X = _fft_pow2(x, False) if n & (n - 1) == 0 else _dft_direct(x, False)
    return np.moveaxis(X, -1, axis)


def idft(X, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`dft` (includes the 1/n factor)."""
    X = np.moveaxis(np.asarray(X), axis, -1)
    n = X.shape[-1]
    if n < 2:
        raise ValueError("idft needs at least 2 samples")
    x = _fft_pow2(X, True) if n & (n - 1) == 0 else _dft_direct(X, True)
    return np.moveaxis(x / n, -1, axis)


@dataclass(frozen=True)
class SpectrumSummary:
    """Normalized magnitude profile; bins sum to one."""

    bins: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=float)
        if b.ndim != 1 or np.any(b < 0) or abs(b.sum() - 1.0) > 1e-12:
            raise ValueError("spectrum bins must be a non-negative vector summing to 1")
        object.__setattr__(self, "bins", b)

    def __len__(self):
        return len(self.bins)


def _normalize(profile: np.ndarray) -> SpectrumSummary:
    total = profile.sum()
    if not total > 0 or not math.isfinite(total):
        raise ValueError("signal has zero spectral energy; cannot normalize its spectrum")
    p = profile / total
    return SpectrumSummary(p / p.sum())


def spectrum_summary(samples, grid_shape: tuple[int, ...] | None = None) -> SpectrumSummary:
    """Normalized DFT magnitude profile of a real signal.

    1D input gives the half spectrum of length n//2 + 1. With a 2D
    ``grid_shape`` the magnitude of the 2D DFT is averaged over rings of
    integer radius 0..min(H, W)//2. Multichannel samples (N, c) average the
    channel magnitudes.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x = x.reshape(x.shape[0], -1)
    if grid_shape is None or len(grid_shape) == 1:
        mag = np.abs(dft(x, axis=0)).mean(axis=1)
        return _normalize(mag[: x.shape[0] // 2 + 1])
    if len(grid_shape) != 2:
        raise ValueError("spectrum summaries support 1D and 2D grids")
    H, W = grid_shape
    img = x.reshape(H, W, -1)
    F = np.abs(dft(dft(img, axis=0), axis=1)).mean(axis=2)
    ky = np.fft.fftfreq(H) * H
    kx = np.fft.fftfreq(W) * W
    r = np.rint(np.hypot(ky[:, None], kx[None, :])).astype(np.int64)
    n_bins = min(H, W) // 2 + 1
    keep = r < n_bins
    sums = np.bincount(r[keep], weights=F[keep], minlength=n_bins)
    counts = np.bincount(r[keep], minlength=n_bins)
    return _normalize(sums / np.maximum(counts, 1))


def wasserstein1(s1: SpectrumSummary, s2: SpectrumSummary) -> float:
    """Earth mover's distance between profiles on a common bin axis, in bin units."""
    a, b = np.asarray(getattr(s1, "bins", s1)), np.asarray(getattr(s2, "bins", s2))
    if a.shape != b.shape:
        raise ValueError(f"bin counts differ: {a.shape[0]} vs {b.shape[0]}")
    return float(np.sum(np.abs(np.cumsum(a) - np.cumsum(b))))


@dataclass(frozen=True)
class Candidate:
    arch: ArchSpec
    scheme: InitScheme
    encoder: Encoder | None = None
    name: str = ""


@dataclass
class FreshResult:
    index: int
    candidate: Candidate
    distances: list[float]


def candidate_output(cand: Candidate, coords: np.ndarray, seed: int, index: int) -> np.ndarray:
    """Initialized output of a candidate on the coordinates, seeded by seed XOR index."""
    enc = cand.encoder if cand.encoder is not None else IdentityEncoder(coords.shape[1])
    model = init_model(cand.arch, cand.scheme, Rng(seed ^ index))
    return forward_batch(model, enc, coords)


def fresh_select(candidates: Sequence[Candidate], signal, seed: int = 0) -> FreshResult:
    """Pick the candidate whose untrained output spectrum is closest to the target's.

    Each candidate is initialized from ``seed ^ index``. Ties go to the earlier
    candidate.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if signal.coords.shape[0] < 64:
        raise ValueError("spectrum matching needs at least 64 target samples")
    grid = signal.grid_shape
    target = spectrum_summary(signal.values, grid)
    dists = []
    for i, cand in enumerate(candidates):
        out = candidate_output(cand, signal.coords, seed, i)
        dists.append(wasserstein1(spectrum_summary(out, grid), target))
    best = int(np.argmin(dists))
    return FreshResult(best, candidates[best], dists)
