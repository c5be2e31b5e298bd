"""Numerical checks of spectral behaviour: harmonics of polynomial activations,
stability of integer translates of a generator, and per-frequency fitting speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .atoms import Atom
from .encoders import Encoder, IdentityEncoder
from .init import ArchSpec, InitScheme, init_model
from .model import forward_batch
from .objectives import Objective, SampledSignal
from .rng import Rng
from .signal_io import lattice_coords
from .spectra import dft
from .train import TrainConfig, fit

# --- harmonic generation --------------------------------------------------------


@dataclass
class HarmonicReport:
    n: int
    bins: list[int]
    magnitudes: list[float]

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.bins, self.magnitudes))


def harmonic_probe(alpha: Sequence[float], omega: int, n: int | None = None,
                   rel_threshold: float = 1e-9) -> HarmonicReport:
    """Spectrum of rho(exp(2 pi i omega x)) with rho(z) = sum_k alpha_k z^k on x_i = i/n.

    Magnitudes are |DFT| / n, so bin k*omega carries |alpha_k|. Bins below
    ``rel_threshold`` times the peak are dropped.
    """
    alpha = np.asarray(alpha, dtype=complex)
    K = len(alpha) - 1
    if K < 1:
        raise ValueError("need at least two polynomial coefficients (K >= 1)")
    if int(omega) != omega or omega < 1:
        raise ValueError("omega must be a positive integer number of cycles")
    omega = int(omega)
    if n is None:
        n = 1 << max(6, math.ceil(math.log2(8 * K * omega)))
    if n < 2 or n & (n - 1):
        raise ValueError("sample count must be a power of two")
    if K * omega >= n / 2:
        raise ValueError(
            f"highest harmonic {K * omega} reaches Nyquist for n={n}; aliasing would corrupt the spectrum"
        )
    z = np.exp(2j * math.pi * omega * np.arange(n) / n)
    rho = np.zeros(n, dtype=complex)
    zk = np.ones(n, dtype=complex)
    for a in alpha:
        rho += a * zk
        zk = zk * z
    mag = np.abs(dft(rho)) / n
    keep = np.flatnonzero(mag > rel_threshold * mag.max())
    support = set(range(0, K * omega + 1, omega))
    if not set(keep.tolist()) <= support:
        raise AssertionError(f"harmonic support {keep.tolist()} exceeds multiples of {omega} up to {K * omega}")
    return HarmonicReport(n, keep.tolist(), mag[keep].tolist())


# --- translates of a generator ----------------------------------------------------


class InsufficientDecayError(ValueError):
    """The generator does not decay fast enough for the windowed estimates to converge."""


@dataclass
class RieszReport:
    frame_min: float
    frame_max: float
    pou_deviation: float
    gram_min_singular: float
    classification: str
    window: float = 0.0


@dataclass(frozen=True)
class RieszSettings:
    K_translates: int = 64
    window: float = 32.0
    density: int = 8
    eps_A: float = 1e-3
    eps_P: float = 1e-6
    eps_G: float = 1e-8
    gram_translates: int = 8
    pou_translates: int = 4096
    tolerance: float = 1e-3
    max_window: float = 65536.0
    xi_points: int = 512


def _quad_grid(T: float, density: int) -> tuple[np.ndarray, np.ndarray]:
    m = int(round(2 * T * density))
    x = np.linspace(-T, T, m + 1)
    w = np.full(m + 1, 1.0 / density)
    w[0] = w[-1] = 0.5 / density
    return x, w


def gram_matrix(F, n_translates: int, T: float, density: int) -> np.ndarray:
    """Gram matrix of F(. - k), |k| <= n_translates, over [-T, T] by the trapezoid rule."""
    x, w = _quad_grid(T, density)
    ks = np.arange(-n_translates, n_translates + 1)
    V = np.stack([F(x - k) for k in ks])
    return (V * w) @ V.T


def autocorrelation(F, lags: int, T: float, density: int) -> np.ndarray:
    """a(n) = integral over [-T, T] of F(x) F(x - n), n = 0..lags."""
    x, w = _quad_grid(T, density)
    f = F(x) * w
    return np.array([float(f @ F(x - n)) for n in range(lags + 1)])


def frame_function(a: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """G(xi) = sum_k |F^(xi + k)|^2 = sum_n a(n) exp(-2 pi i n xi) for a real, even a."""
    n = np.arange(1, len(a))
    return a[0] + 2.0 * np.cos(2.0 * math.pi * np.outer(xi, n)) @ a[1:]


def pou_deviation(F, n_translates: int, n_x: int = 64) -> float:
    """max_x |sum_{|k| <= n} F(x - k) - mean| over x in [0, 1)."""
    x = np.arange(n_x) / n_x
    ks = np.arange(-n_translates, n_translates + 1)
    S = F(x[:, None] - ks[None, :]).sum(axis=1)
    return float(np.max(np.abs(S - S.mean())))


def riesz_analyze(atom: Atom, settings: RieszSettings | None = None) -> RieszReport:
    """Classify the integer translates of the atom as a Riesz basis, weak Riesz basis, or neither.

    Linear dependence of translates (tiny Gram singular value) fails first.
    Frame bounds come from G(xi), computed from the autocorrelation of F over
    a window that doubles until G changes by less than ``tolerance``.
    """
    s = settings or RieszSettings()
    F = atom
    gram = gram_matrix(F, s.gram_translates, s.window + s.gram_translates, s.density)
    sv = np.linalg.svd(gram, compute_uv=False)
    gmin = float(sv.min())
    pou = pou_deviation(F, s.pou_translates)
    if gmin < s.eps_G:
        return RieszReport(0.0, math.inf, pou, gmin, "fails", s.window)
    xi = np.arange(s.xi_points) / s.xi_points
    T = s.window
    G_prev = frame_function(autocorrelation(F, s.K_translates, T / 2, s.density), xi)
    while True:
        G = frame_function(autocorrelation(F, s.K_translates, T, s.density), xi)
        err = float(np.max(np.abs(G - G_prev)))
        if err <= s.tolerance:
            break
        if T * 2 > s.max_window:
            raise InsufficientDecayError(
                f"{atom.id}: windowed frame estimate still changes by {err:.3g} at window "
                f"[-{T:g}, {T:g}]; the generator decays too slowly, use a larger window"
            )
        G_prev, T = G, T * 2
    A, B = float(G.min()), float(G.max())
    A = max(A, 0.0)
    if A <= s.eps_A:
        cls = "fails"
    elif pou < s.eps_P:
        cls = "riesz"
    else:
        cls = "weak_riesz"
    return RieszReport(A, B, pou, gmin, cls, T)


# --- spectral bias ------------------------------------------------------------------


def two_tone(n: int, f_lo: int, f_hi: int, a_lo: float = 1.0, a_hi: float = 1.0) -> SampledSignal:
    """sin(2 pi f_lo i/n) a_lo + sin(2 pi f_hi i/n) a_hi at pixel-center coordinates."""
    i = np.arange(n)
    y = a_lo * np.sin(2 * math.pi * f_lo * i / n) + a_hi * np.sin(2 * math.pi * f_hi * i / n)
    return SampledSignal(lattice_coords((n,)), y[:, None], (n,))


def band_residual_db(residual: np.ndarray, bins: Sequence[int], amplitudes: Sequence[float]) -> list[float]:
    """Residual amplitude at each DFT bin, in dB relative to the tone amplitude there.

    A tone of amplitude a at bin k has |DFT_k| = a n / 2. Zero-amplitude
    bands are reported relative to 1.
    """
    r = np.asarray(residual, dtype=float).reshape(-1)
    n = r.shape[0]
    R = np.abs(dft(r)) * 2.0 / n
    out = []
    for k, a in zip(bins, amplitudes):
        ref = a if a > 0 else 1.0
        out.append(float(20.0 * np.log10(max(R[k] / ref, 1e-300))))
    return out


@dataclass
class SpectralBiasResult:
    f_lo: int
    f_hi: int
    steps: list[int] = field(default_factory=list)
    lo_db: list[float] = field(default_factory=list)
    hi_db: list[float] = field(default_factory=list)

    def steps_to(self, band: str, threshold_db: float = -20.0) -> int | None:
        curve = self.lo_db if band == "lo" else self.hi_db
        for s, v in zip(self.steps, curve):
            if v <= threshold_db:
                return s
        return None

    def rows(self):
        return list(zip(self.steps, self.lo_db, self.hi_db))


def spectral_bias_probe(arch: ArchSpec, scheme: InitScheme, f_lo: int = 1, f_hi: int = 32,
                        steps: int = 5000, every: int = 10, n: int = 512, lr: float | None = None,
                        seed: int = 0, encoder: Encoder | None = None,
                        amplitudes: tuple[float, float] = (1.0, 1.0)) -> SpectralBiasResult:
    """Fit a two-tone target and record the residual at both tones every ``every`` steps."""
    if not 0 < f_lo < f_hi < n // 2:
        raise ValueError("need 0 < f_lo < f_hi < n/2")
    sig = two_tone(n, f_lo, f_hi, *amplitudes)
    enc = encoder or IdentityEncoder(1)
    model = init_model(arch, scheme, Rng(seed))
    out = SpectralBiasResult(f_lo, f_hi)

    def record(step, m, e):
        if step % every == 0 or step == 0:
            r = forward_batch(m, e, sig.coords) - sig.values
            lo, hi = band_residual_db(r, (f_lo, f_hi), amplitudes)
            out.steps.append(step)
            out.lo_db.append(lo)
            out.hi_db.append(hi)

    record(0, model, enc)
    fit(model, enc, Objective.from_signal(sig), TrainConfig(steps=steps, lr=lr, seed=seed, psnr_every=0),
        callback=record)
    return out
