import numpy as np
import pytest
from hypothesis import given, strategies as st

from inrlab import make_atom
from inrlab.init import InitScheme
from inrlab.miner import PatchEntry, PyramidModel, miner_eval, miner_fit, miner_render
from inrlab.rng import Rng
from inrlab.signal_io import coords_to_indices, downsample2, lattice_coords, psnr, pyramid_decompose


class Lookup:
    """Predictor that returns stored grid values at pixel-center coordinates."""

    def __init__(self, grid):
        self.grid = grid

    def predict(self, coords):
        idx = coords_to_indices(coords, self.grid.shape[:2])
        return self.grid[idx[:, 0], idx[:, 1]]


def perfect_pyramid(img, J, P):
    levels = pyramid_decompose(img, J)
    pyr = PyramidModel(img.shape[:2], img.shape[2], J, P, 0.0, Lookup(levels[-1]))
    for band in reversed(levels[:-1]):
        entries = []
        for r in range(band.shape[0] // P):
            for c in range(band.shape[1] // P):
                entries.append(PatchEntry(r, c, Lookup(band[r * P:(r + 1) * P, c * P:(c + 1) * P]), 1.0))
        pyr.bands.append(entries)
    return pyr


@given(st.integers(0, 1000), st.integers(1, 4))
def test_perfect_band_nets_reproduce_image(seed, J):
    img = Rng(seed).random((32, 32, 1))
    pyr = perfect_pyramid(img, J, 4)
    assert np.max(np.abs(miner_render(pyr) - img)) <= 1e-12
    vals = miner_eval(pyr, lattice_coords((32, 32)))
    assert np.max(np.abs(vals.reshape(img.shape) - img)) <= 1e-12


def test_partial_renders_match_coarser_reconstructions():
    img = Rng(0).random((16, 16, 1))
    pyr = perfect_pyramid(img, 3, 4)
    from inrlab.signal_io import upsample2
    assert np.allclose(miner_render(pyr, 1), upsample2(upsample2(downsample2(downsample2(img)))), atol=1e-12)


def test_single_level_is_one_fit():
    img = Rng(1).random((8, 8))
    pyr = miner_fit(img, 1, 8, hidden=(8,), steps=5)
    assert pyr.bands == [] and pyr.active_patches() == 0
    assert miner_render(pyr).shape == (8, 8, 1)


def test_constant_image_prunes_every_patch():
    pyr = miner_fit(np.full((16, 16), 0.4), 3, 4, hidden=(8,), steps=30, coarse_steps=300)
    assert pyr.active_patches() == 0
    assert sum(len(b) for b in pyr.bands) == 16 + 4
    # pruned patches contribute nothing beyond the upsampled coarse level
    assert np.allclose(miner_render(pyr), miner_render(pyr, 1))


def test_levels_improve_a_textured_image():
    x = lattice_coords((32, 32))
    img = (0.5 + 0.25 * np.sin(6 * x[:, 0]) * np.cos(9 * x[:, 1])
           + 0.2 * np.sin(40 * x[:, 0] + 30 * x[:, 1])).reshape(32, 32)
    pyr = miner_fit(img, 2, 8, tau=1e-5, hidden=(16, 16), steps=150, coarse_steps=300,
                    atom=make_atom("sine"), scheme=InitScheme.siren(30))
    p = [psnr(miner_render(pyr, k)[..., 0], img) for k in (1, 2)]
    assert p[1] >= p[0]
    assert np.allclose(miner_eval(pyr, x).reshape(32, 32), miner_render(pyr)[..., 0], atol=1e-12)


def test_fit_is_deterministic():
    img = Rng(2).random((16, 16))
    a = miner_render(miner_fit(img, 2, 8, hidden=(8,), steps=10, seed=4))
    b = miner_render(miner_fit(img, 2, 8, hidden=(8,), steps=10, seed=4))
    assert np.array_equal(a, b)


def test_divisibility_checked():
    with pytest.raises(ValueError):
        miner_fit(np.zeros((12, 12)), 3, 4)
    with pytest.raises(ValueError):
        miner_fit(np.zeros((16, 16)), 2, 6)
