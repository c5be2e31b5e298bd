import numpy as np
import pytest
from hypothesis import given, strategies as st

from inrlab import Layer, MlpModel, make_atom
from inrlab.init import ArchSpec, InitScheme, init_model
from inrlab.meta import BumpFamily, MetaConfig, adapt, adaptation_error, meta_fit
from inrlab.objectives import SampledSignal
from inrlab.rng import Rng

ARCH = ArchSpec(1, (8,), 1, make_atom("sine", omega=1.0))


def bump_model(seed=0):
    return init_model(ARCH, InitScheme.standard(), Rng(seed))


def same(a, b):
    return all(np.array_equal(p, q) for p, q in zip(a.arrays(), b.arrays()))


def test_zero_step_size_is_a_no_op():
    theta = bump_model()
    task = BumpFamily().task(0.2)
    assert same(adapt(theta, task, 3, 0.0), theta)


@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-2, 2), st.floats(1e-4, 0.5))
def test_single_step_matches_hand_gradient(x, y, w, alpha):
    theta = MlpModel((Layer(np.array([[w]]), np.zeros(1)),))
    task = SampledSignal(np.array([[x]]), np.array([[y]]))
    phi = adapt(theta, task, 1, alpha)
    assert phi.layers[0].weight[0, 0] == pytest.approx(w - alpha * 2 * (w * x - y) * x, abs=1e-15)
    assert phi.layers[0].bias[0] == pytest.approx(-alpha * 2 * (w * x - y), abs=1e-15)


def test_adapt_takes_exactly_j_plain_steps():
    theta = MlpModel((Layer(np.array([[0.5]]), np.zeros(1)),))
    task = SampledSignal(np.array([[1.0]]), np.array([[2.0]]))
    w, b = 0.5, 0.0
    for _ in range(3):
        r = w + b - 2.0
        w, b = w - 0.1 * 2 * r, b - 0.1 * 2 * r
    phi = adapt(theta, task, 3, 0.1)
    assert phi.layers[0].weight[0, 0] == pytest.approx(w, abs=1e-15)
    assert phi.layers[0].bias[0] == pytest.approx(b, abs=1e-15)


def test_adapt_is_deterministic():
    theta = bump_model(1)
    task = BumpFamily().task(-0.1)
    assert same(adapt(theta, task, 3, 1e-3), adapt(theta, task, 3, 1e-3))


def test_meta_fit_is_deterministic_and_improves():
    fam = BumpFamily()
    cfg = MetaConfig(inner_steps=3, inner_lr=1e-3, outer_lr=1e-2, tasks_per_batch=4, outer_steps=60, seed=5)
    a = meta_fit(fam.sample, ARCH, cfg)
    b = meta_fit(fam.sample, ARCH, cfg)
    assert a.outer_losses == b.outer_losses and same(a.theta, b.theta)
    tasks = [fam.sample(Rng(99).spawn(i)) for i in range(8)]
    start = init_model(ARCH, InitScheme.standard(), Rng(5).spawn(0))
    assert adaptation_error(a.theta, tasks, 3, 1e-3) < adaptation_error(start, tasks, 3, 1e-3)


def test_config_validation():
    with pytest.raises(ValueError):
        MetaConfig(inner_steps=0)
    with pytest.raises(ValueError):
        MetaConfig(inner_lr=0.0)


def test_bump_family():
    fam = BumpFamily(n_points=32)
    t = fam.task(0.0)
    assert t.n == 32 and t.values.max() <= 1.0
    assert np.allclose(t.values[:, 0], t.values[::-1, 0])
    c = [float(fam.sample(Rng(s)).coords[np.argmax(fam.sample(Rng(s)).values), 0]) for s in range(20)]
    assert all(abs(v) <= fam.spread + 1.0 / 32 for v in c)
