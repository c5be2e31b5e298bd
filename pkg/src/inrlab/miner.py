"""Coarse-to-fine image fitting with small per-patch networks on a Laplacian pyramid.

Level 0 is the finest band. The coarsest level is fit by one network over the
whole (downsampled) image. Each finer level is cut into P x P patches; a patch
gets its own network only if the energy of its Laplacian band, relative to
the total image energy, exceeds ``tau``. Active patches are fit to the residual
against the upsampled reconstruction of the coarser levels, so fitting errors
made at coarse scales are corrected at finer ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .atoms import Atom, make_atom
from .encoders import Encoder, IdentityEncoder
from .init import ArchSpec, InitScheme, init_model
from .model import forward_batch
from .objectives import Objective, SampledSignal
from .rng import Rng, derive_seed
from .signal_io import ImageGrid, downsample2, lattice_coords, pyramid_decompose, upsample2
from .train import TrainConfig, fit


class FittedNet:
    """Predictor backed by a network and its encoder."""

    def __init__(self, model, encoder: Encoder):
        self.model = model
        self.encoder = encoder

    def predict(self, coords: np.ndarray) -> np.ndarray:
        return forward_batch(self.model, self.encoder, coords)


@dataclass
class PatchEntry:
    """``predictor`` is None for pruned patches (which contribute exactly zero)."""

    row: int
    col: int
    predictor: object | None
    energy_fraction: float


@dataclass
class PyramidModel:
    """``levels[0]`` is the coarsest network (one patch); then finer levels in order."""

    shape: tuple[int, int]
    channels: int
    J: int
    patch: int
    tau: float
    coarse: object
    bands: list[list[PatchEntry]] = field(default_factory=list)  # coarse-to-fine, J-1 entries

    def level_shape(self, j: int) -> tuple[int, int]:
        """Grid shape of level j (0 = finest)."""
        f = 2**j
        return self.shape[0] // f, self.shape[1] // f

    def active_patches(self) -> int:
        return sum(p.predictor is not None for band in self.bands for p in band)


def _check_dims(shape, J, P):
    h, w = shape
    f = 2 ** (J - 1)
    if h % f or w % f:
        raise ValueError(f"image {h}x{w} not divisible by 2^(J-1) = {f}")
    if J > 1:
        for j in range(J - 1):
            lh, lw = h // 2**j, w // 2**j
            if lh % P or lw % P:
                raise ValueError(f"level {j} grid {lh}x{lw} not divisible by patch size {P}")


def _fit_net(values: np.ndarray, shape, arch: ArchSpec, scheme: InitScheme, encoder: Encoder,
             cfg: TrainConfig, seed: int):
    coords = lattice_coords(shape)
    sig = SampledSignal(coords, values.reshape(-1, values.shape[-1]), shape)
    model = init_model(arch, scheme, Rng(seed))
    res = fit(model, encoder, Objective.from_signal(sig), TrainConfig(
        steps=cfg.steps, lr=cfg.lr, batch_size=cfg.batch_size, seed=seed, psnr_every=0))
    return FittedNet(res.model, res.encoder), sig


def miner_fit(image, J: int, patch: int, tau: float = 1e-4, hidden: tuple[int, ...] = (32, 32),
              atom: Atom | None = None, scheme: InitScheme | None = None,
              coarse_hidden: tuple[int, ...] | None = None, steps: int = 500,
              coarse_steps: int | None = None, lr: float | None = None, seed: int = 0,
              encoder: Encoder | None = None) -> PyramidModel:
    """Fit a pyramid of networks to an (H, W) or (H, W, c) image."""
    v = image.values if isinstance(image, ImageGrid) else np.asarray(image, dtype=float)
    if v.ndim == 2:
        v = v[:, :, None]
    h, w, c = v.shape
    _check_dims((h, w), J, patch)
    atom = atom or make_atom("sine")
    scheme = scheme or (InitScheme.siren(30.0) if atom.id == "sine" else InitScheme.standard())
    enc = encoder or IdentityEncoder(2)
    total_energy = float(np.sum(v * v))
    if total_energy <= 0:
        total_energy = 1.0

    levels = [v]
    for _ in range(J - 1):
        levels.append(downsample2(levels[-1]))
    laplacian = pyramid_decompose(v, J)[:-1]

    coarse_arch = ArchSpec(enc.out_dim, tuple(coarse_hidden or hidden), c, atom)
    cfg = TrainConfig(steps=coarse_steps or steps, lr=lr)
    coarse, _ = _fit_net(levels[-1], levels[-1].shape[:2], coarse_arch, scheme, enc, cfg,
                         derive_seed(seed, J - 1))
    pyr = PyramidModel((h, w), c, J, patch, tau, coarse)
    recon = _render_net(coarse, levels[-1].shape[:2], c)
    patch_arch = ArchSpec(enc.out_dim, tuple(hidden), c, atom)
    patch_cfg = TrainConfig(steps=steps, lr=lr)
    for j in range(J - 2, -1, -1):
        target = levels[j] - upsample2(recon)
        lh, lw = target.shape[:2]
        entries = []
        band = np.zeros_like(target)
        for pr in range(lh // patch):
            for pc in range(lw // patch):
                sl = (slice(pr * patch, (pr + 1) * patch), slice(pc * patch, (pc + 1) * patch))
                res = target[sl]
                frac = float(np.sum(laplacian[j][sl] ** 2)) / total_energy
                if frac <= tau:
                    entries.append(PatchEntry(pr, pc, None, frac))
                    continue
                net, sig = _fit_net(res, (patch, patch), patch_arch, scheme, enc, patch_cfg,
                                    derive_seed(seed, j, pr, pc))
                pred = net.predict(sig.coords).reshape(res.shape)
                if np.sum((pred - res) ** 2) >= np.sum(res * res):
                    # a fit worse than predicting zero is dropped
                    entries.append(PatchEntry(pr, pc, None, frac))
                    continue
                band[sl] = pred
                entries.append(PatchEntry(pr, pc, net, frac))
        pyr.bands.append(entries)
        recon = upsample2(recon) + band
    return pyr


def _render_net(pred, shape, c) -> np.ndarray:
    return pred.predict(lattice_coords(shape)).reshape(*shape, c)


def _render_band(pyr: PyramidModel, k: int) -> np.ndarray:
    """Grid values of the k-th finer band (k = 0 is just below the coarse level)."""
    j = pyr.J - 2 - k
    lh, lw = pyr.level_shape(j)
    P = pyr.patch
    out = np.zeros((lh, lw, pyr.channels))
    local = lattice_coords((P, P))
    for e in pyr.bands[k]:
        if e.predictor is not None:
            out[e.row * P:(e.row + 1) * P, e.col * P:(e.col + 1) * P] = (
                e.predictor.predict(local).reshape(P, P, pyr.channels)
            )
    return out


def miner_render(pyr: PyramidModel, levels: int | None = None) -> np.ndarray:
    """Full-resolution image from the coarse net plus the first ``levels - 1`` bands.

    ``levels`` counts the coarse level; omitted bands contribute zero.
    """
    n = pyr.J if levels is None else levels
    if not 1 <= n <= pyr.J:
        raise ValueError(f"levels must be in 1..{pyr.J}")
    cur = _render_net(pyr.coarse, pyr.level_shape(pyr.J - 1), pyr.channels)
    for k in range(pyr.J - 1):
        cur = upsample2(cur)
        if k < n - 1:
            cur = cur + _render_band(pyr, k)
    return cur


def _bilinear(img: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Sample a pixel-center image at continuous coords in [-1, 1]^2 (edges clamped)."""
    h, w = img.shape[:2]
    u = np.clip((coords[:, 0] + 1.0) * h / 2.0 - 0.5, 0.0, h - 1.0)
    v = np.clip((coords[:, 1] + 1.0) * w / 2.0 - 0.5, 0.0, w - 1.0)
    i0 = np.minimum(np.floor(u).astype(int), max(h - 2, 0))
    j0 = np.minimum(np.floor(v).astype(int), max(w - 2, 0))
    i1, j1 = np.minimum(i0 + 1, h - 1), np.minimum(j0 + 1, w - 1)
    fu, fv = (u - i0)[:, None], (v - j0)[:, None]
    return ((1 - fu) * (1 - fv) * img[i0, j0] + (1 - fu) * fv * img[i0, j1]
            + fu * (1 - fv) * img[i1, j0] + fu * fv * img[i1, j1])


def miner_eval(pyr: PyramidModel, coords, levels: int | None = None) -> np.ndarray:
    """Evaluate the representation at arbitrary points of [-1, 1]^2.

    The finest included band is queried continuously through its patch
    network; coarser levels enter through bilinear upsampling, which at
    pixel centers coincides with the grid reconstruction of
    :func:`miner_render`.
    """
    X = np.atleast_2d(np.asarray(coords, dtype=float))
    n = pyr.J if levels is None else levels
    if not 1 <= n <= pyr.J:
        raise ValueError(f"levels must be in 1..{pyr.J}")
    if pyr.J == 1:
        return pyr.coarse.predict(X)
    # reconstruction of the level just below the top band used, upsampled to the finest grid
    if n < pyr.J:
        return _bilinear(miner_render(pyr, n), X)
    base = miner_render_level(pyr, 1)
    out = _bilinear(base, X)
    P = pyr.patch
    h, w = pyr.shape
    u = np.clip((X[:, 0] + 1.0) * h / 2.0, 0.0, h - 1e-9)
    v = np.clip((X[:, 1] + 1.0) * w / 2.0, 0.0, w - 1e-9)
    pr, pc = (u // P).astype(int), (v // P).astype(int)
    lookup = {(e.row, e.col): e for e in pyr.bands[-1]}
    for key in set(zip(pr.tolist(), pc.tolist())):
        e = lookup[key]
        if e.predictor is None:
            continue
        sel = (pr == key[0]) & (pc == key[1])
        local = np.stack([2.0 * (u[sel] - key[0] * P) / P - 1.0,
                          2.0 * (v[sel] - key[1] * P) / P - 1.0], axis=1)
        out[sel] += e.predictor.predict(local)
    return out


def miner_render_level(pyr: PyramidModel, j: int) -> np.ndarray:
    """Full reconstruction at level j's resolution (all bands at or coarser than j)."""
    cur = _render_net(pyr.coarse, pyr.level_shape(pyr.J - 1), pyr.channels)
    for k in range(pyr.J - 1 - j):
        cur = upsample2(cur) + _render_band(pyr, k)
    return cur
