import numpy as np
import pytest
from hypothesis import given, strategies as st

from inrlab import Layer, MlpModel, NonFiniteError, make_atom
from inrlab.init import ArchSpec, InitScheme, init_model
from inrlab.model import Gradients
from inrlab.objectives import ForwardOperator, Objective, SampledSignal, loss_mse
from inrlab.rng import Rng
from inrlab.signal_io import lattice_coords
from inrlab.train import AdamState, DivergenceError, TrainConfig, adam_step, adam_update, default_lr, fit


def line_model(w=0.0, b=0.0):
    return MlpModel((Layer(np.array([[w]]), np.array([b])),))


def test_zero_gradient_leaves_parameters():
    p = [np.array([1.0, -2.0])]
    st_ = AdamState.for_arrays(p, 0.1)
    out = adam_update(st_, p, [np.zeros(2)])
    assert np.array_equal(out[0], p[0]) and st_.t == 1


@given(st.floats(1e-6, 1e6) | st.floats(-1e6, -1e-6))
def test_first_step_is_lr_against_gradient(g):
    st_ = AdamState.for_arrays([np.zeros(1)], 1e-3)
    step = adam_update(st_, [np.zeros(1)], [np.array([g])])[0][0]
    assert np.sign(step) == -np.sign(g)
    assert abs(abs(step) - 1e-3) <= 1e-3 * 1e-8 / abs(g) + 1e-15


@given(st.floats(1e-3, 1e3), st.integers(0, 1000))
def test_first_step_direction_is_scale_invariant(scale, seed):
    rng = Rng(seed)
    g = np.where(rng.random(5) < 0.5, -1.0, 1.0) * rng.uniform(0.1, 1.0, size=5)
    a = adam_update(AdamState.for_arrays([np.zeros(5)], 1e-2), [np.zeros(5)], [g])[0]
    b = adam_update(AdamState.for_arrays([np.zeros(5)], 1e-2), [np.zeros(5)], [scale * g])[0]
    assert np.array_equal(np.sign(a), np.sign(b))
    assert np.allclose(a, b, rtol=1e-3)


def test_non_finite_gradient_aborts():
    st_ = AdamState.for_arrays([np.zeros(2)], 1e-3)
    with pytest.raises(NonFiniteError):
        adam_update(st_, [np.zeros(2)], [np.array([1.0, np.nan])])
    assert st_.t == 0
    with pytest.raises(ValueError):
        adam_update(st_, [np.zeros(2)], [np.zeros(3)])


def test_adam_step_on_model():
    m = line_model(1.0, 0.0)
    st_ = AdamState.for_model(m, lr=0.5)
    g = Gradients([np.array([[2.0]]), np.array([-3.0])], [])
    m2, _, st_ = adam_step(st_, m, g)
    assert np.allclose(m2.layers[0].weight, 0.5) and np.allclose(m2.layers[0].bias, 0.5)


def test_default_learning_rates():
    sine = init_model(ArchSpec(1, (4,), 1, make_atom("sine")), InitScheme.siren(), Rng(0))
    relu = init_model(ArchSpec(1, (4,), 1, make_atom("relu")), InitScheme.standard(), Rng(0))
    assert default_lr(sine) == 1e-4 and default_lr(relu) == 1e-3


def test_linear_target_matches_least_squares():
    x = lattice_coords((8,))
    y = 2.0 * x - 0.5
    sig = SampledSignal(x, y, (8,))
    res = fit(line_model(), None, Objective.from_signal(sig), TrainConfig(steps=2000, lr=1e-2))
    A = np.hstack([x, np.ones_like(x)])
    w, b = np.linalg.lstsq(A, y, rcond=None)[0][:, 0]
    assert res.run.losses[-1] < 1e-10
    assert abs(res.model.layers[0].weight[0, 0] - w) < 1e-5 and abs(res.model.layers[0].bias[0] - b) < 1e-5


def test_zero_steps_returns_model_unchanged():
    m = init_model(ArchSpec(1, (4,), 1), InitScheme.standard(), Rng(0))
    sig = SampledSignal(lattice_coords((8,)), np.ones((8, 1)), (8,))
    res = fit(m, None, Objective.from_signal(sig), TrainConfig(steps=0))
    assert res.model is m and res.run.losses == []


def test_sine_network_fits_high_frequency_but_relu_does_not():
    x = lattice_coords((256,))
    sig = SampledSignal(x, np.sin(2 * np.pi * 8 * x), (256,))
    out = {}
    for atom, scheme in [("sine", InitScheme.siren(30)), ("relu", InitScheme.standard())]:
        m = init_model(ArchSpec(1, (64, 64), 1, make_atom(atom)), scheme, Rng(0))
        res = fit(m, None, Objective.from_signal(sig), TrainConfig(steps=2000, psnr_every=0))
        out[atom] = loss_mse(res.model, None, sig)
    assert out["sine"] < 1e-4 < out["relu"]


def small_problem():
    m = init_model(ArchSpec(2, (8,), 1, make_atom("sine")), InitScheme.siren(10), Rng(3))
    coords = lattice_coords((6, 6))
    sig = SampledSignal(coords, np.cos(coords[:, :1] * 3), (6, 6))
    return m, sig


def test_runs_are_reproducible_including_minibatches():
    m, sig = small_problem()
    cfg = TrainConfig(steps=30, batch_size=10, seed=4, psnr_every=5)
    a = fit(m, None, Objective.from_signal(sig), cfg)
    b = fit(m, None, Objective.from_signal(sig), cfg)
    assert a.run.losses == b.run.losses and a.run.psnr_log == b.run.psnr_log
    assert all(np.array_equal(p, q) for p, q in zip(a.model.arrays(), b.model.arrays()))


def test_logs_are_stepwise():
    m, sig = small_problem()
    res = fit(m, None, Objective.from_signal(sig), TrainConfig(steps=20, psnr_every=5))
    assert len(res.run.losses) == 20
    assert [s for s, _ in res.run.psnr_log] == [5, 10, 15, 20]
    rows = res.run.rows()
    assert [r[0] for r in rows] == list(range(1, 21))
    assert rows[4][2] is not None and rows[3][2] is None


def test_psnr_skipped_for_non_identity_operator():
    m, sig = small_problem()
    obj = Objective(sig.coords, sig.values.reshape(6, 6)[::2, ::2].reshape(-1, 1), ForwardOperator("downsample", factor=2), "value", (6, 6))
    res = fit(m, None, obj, TrainConfig(steps=10, psnr_every=5))
    assert res.run.psnr_log == []


def test_divergence_keeps_last_good_model():
    m, sig = small_problem()
    with pytest.raises(DivergenceError) as exc:
        fit(m, None, Objective.from_signal(sig), TrainConfig(steps=200, lr=1e3, divergence_loss=10.0))
    res = exc.value.result
    assert res.run.aborted
    assert loss_mse(res.model, None, sig) <= 10.0


def test_callback_sees_every_step():
    m, sig = small_problem()
    seen = []
    fit(m, None, Objective.from_signal(sig), TrainConfig(steps=7), callback=lambda s, *_: seen.append(s))
    assert seen == list(range(1, 8))
