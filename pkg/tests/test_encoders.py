import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from inrlab.atoms import UnsupportedDerivativeError
from inrlab.encoders import (
    FourierFeatureEncoder, HashGridEncoder, IdentityEncoder, fourier_gaussian, fourier_logspaced,
)
from inrlab.rng import Rng


def test_fourier_at_origin_and_quarter_period():
    enc = fourier_gaussian(2, 5, 3.0, Rng(0))
    assert np.array_equal(enc.encode(np.zeros((1, 2)))[0], np.r_[np.ones(5), np.zeros(5)])
    quarter = FourierFeatureEncoder(np.array([[1.0]])).encode(np.array([[0.25]]))[0]
    assert np.allclose(quarter, [0.0, 1.0], atol=1e-15)


@given(st.integers(0, 1000), st.integers(1, 3))
def test_fourier_pairs_have_unit_energy(seed, d):
    enc = fourier_gaussian(d, 16, 5.0, Rng(seed))
    X = Rng(seed + 1).uniform(-1, 1, size=(32, d))
    E = enc.encode(X)
    assert np.max(np.abs(E[:, :16] ** 2 + E[:, 16:] ** 2 - 1.0)) <= 1e-14


def test_gaussian_frequency_variance():
    B = fourier_gaussian(2, 4096, 10.0, Rng(0)).B
    assert 95.0 <= B.var() <= 105.0


def test_logspaced_rows():
    B = fourier_logspaced(2, 3).B
    assert B.tolist() == [[1, 0], [0, 1], [2, 0], [0, 2], [4, 0], [0, 4]]


@pytest.mark.parametrize("make", [
    lambda: fourier_gaussian(2, 6, 2.0, Rng(4)),
    lambda: fourier_logspaced(2, 4),
    lambda: IdentityEncoder(2),
])
def test_encoder_jacobian_and_curvature_match_finite_differences(make):
    enc = make()
    X = Rng(9).uniform(-1, 1, size=(20, 2))
    b = enc.propagate(X, 2)
    h = 1e-5
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd1 = (enc.encode(X + e) - enc.encode(X - e)) / (2 * h)
        fd2 = (enc.encode(X + e) - 2 * enc.encode(X) + enc.encode(X - e)) / h**2
        assert np.max(np.abs(fd1 - b.d1[a])) <= 1e-6 * max(1.0, np.max(np.abs(b.d1[a])))
        assert np.max(np.abs(fd2 - b.d2[a])) <= 1e-4 * max(1.0, np.max(np.abs(b.d2[a])))


def make_hash(**kw):
    args = dict(in_dim=2, levels=4, base_resolution=4, growth=2.0, table_size=64, feature_dim=2)
    args.update(kw)
    return HashGridEncoder(**args, rng=Rng(1))


def test_hash_index_zero_and_direct():
    enc = make_hash()
    assert enc.resolution(0) == 4 and enc.collision_free(0)
    assert enc.hash_index(0, [0, 0]) == 0
    assert enc.hash_index(0, [2, 3]) == 2 + 5 * 3
    assert not enc.collision_free(3)
    assert enc.hash_index(3, [0, 0]) == 0


def test_hash_collisions_exist_on_big_levels():
    enc = make_hash()
    n = enc.resolution(3)
    grid = np.array([[i, j] for i in range(n + 1) for j in range(n + 1)])
    slots = enc.hash_index(3, grid)
    assert len(set(slots.tolist())) < len(grid)


def test_hash_index_constants():
    enc = make_hash()
    v = np.array([5, 7])
    want = (5 * 1 ^ 7 * 2654435761) % 64
    assert enc.hash_index(3, v) == want


def test_hash_vertex_and_midpoint_values():
    enc = make_hash(levels=1, in_dim=1, table_size=64)
    n = enc.resolution(0)
    for v in range(n + 1):
        x = np.array([[2.0 * v / n - 1.0]])
        assert np.allclose(enc.encode(x)[0], enc.tables[0, enc.hash_index(0, [v])], atol=1e-15)
    mid = np.array([[2.0 * 1.5 / n - 1.0]])
    want = 0.5 * (enc.tables[0, 1] + enc.tables[0, 2])
    assert np.allclose(enc.encode(mid)[0], want, atol=1e-15)


def test_hash_constant_tables():
    enc = make_hash()
    enc = enc.with_arrays([np.full_like(enc.tables, 0.37)])
    X = Rng(2).uniform(-1, 1, size=(50, 2))
    assert np.allclose(enc.encode(X), 0.37, atol=1e-15)


def test_hash_lipschitz_across_cells():
    enc = make_hash()
    bound = math.sqrt(2) * np.max(np.abs(enc.tables)) * enc.resolution(enc.levels - 1)
    rng = Rng(3)
    X = rng.uniform(-1, 1, size=(500, 2))
    for scale in (1e-2, 1e-4, 1e-7):
        D = rng.uniform(-scale, scale, size=(500, 2))
        diff = np.max(np.abs(enc.encode(np.clip(X + D, -1, 1)) - enc.encode(X)), axis=1)
        step = np.linalg.norm(np.clip(X + D, -1, 1) - X, axis=1)
        assert np.all(diff <= bound * step + 1e-15)


def test_hash_rejects_second_derivatives():
    with pytest.raises(UnsupportedDerivativeError):
        make_hash().propagate(np.zeros((1, 2)), 2)


def test_hash_is_deterministic():
    a, b = make_hash(), make_hash()
    X = Rng(5).uniform(-1, 1, size=(10, 2))
    assert np.array_equal(a.encode(X), b.encode(X))


def test_wrong_input_dimension():
    with pytest.raises(ValueError):
        IdentityEncoder(2).encode(np.zeros((3, 3)))
