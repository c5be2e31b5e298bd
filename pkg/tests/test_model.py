import logging
import math

import numpy as np
import pytest

from conftest import max_rel_err
from inrlab import (
    Layer, MlpModel, NonFiniteError, PointLoss, forward, forward_batch, forward_with_input_derivatives,
    loss_backward, make_atom,
)
from inrlab.encoders import IdentityEncoder, fourier_gaussian
from inrlab.init import ArchSpec, InitScheme, init_model
from inrlab.model import input_derivatives_batch
from inrlab.rng import Rng


def single(atom, w=1.0, b=0.0, omega=1.0):
    return MlpModel((Layer([[w]], [b], atom, omega), Layer([[1.0]], [0.0])))


def test_single_sine_neuron():
    m = single(make_atom("sine", omega=1.0), omega=30.0)
    d = forward_with_input_derivatives(m, None, [math.pi / 60])
    assert abs(d.value[0] - 1.0) < 1e-15
    assert abs(d.jacobian[0, 0]) < 1e-12


def test_single_gaussian_neuron_derivatives():
    d = forward_with_input_derivatives(single(make_atom("gaussian", s=1.0)), None, [0.0])
    assert (d.value[0], d.jacobian[0, 0], d.laplacian[0]) == (1.0, 0.0, -2.0)


def test_zero_weights_give_output_bias():
    layers = (Layer(np.zeros((4, 2)), np.zeros(4), make_atom("sine")),
              Layer(np.zeros((1, 4)), [0.7]))
    assert forward(MlpModel(layers), None, [0.3, -0.2])[0] == 0.7


def test_two_layer_gaussian_matches_scalar_loop():
    rng = Rng(0)
    W1, b1 = rng.normal(size=(3, 2)), rng.normal(size=3)
    W2, b2 = rng.normal(size=(3, 3)), rng.normal(size=3)
    W3, b3 = rng.normal(size=(1, 3)), rng.normal(size=1)
    g = make_atom("gaussian", s=0.7)
    m = MlpModel((Layer(W1, b1, g), Layer(W2, b2, g), Layer(W3, b3)))
    X = rng.uniform(-1, 1, size=(16, 2))
    got = forward_batch(m, IdentityEncoder(2), X)[:, 0]
    for n in range(16):
        h = list(X[n])
        for W, b in ((W1, b1), (W2, b2)):
            h = [math.exp(-0.7 * (sum(W[i][j] * h[j] for j in range(len(h))) + b[i]) ** 2)
                 for i in range(len(b))]
        y = sum(W3[0][j] * h[j] for j in range(3)) + b3[0]
        assert abs(got[n] - y) <= 1e-14


def test_final_layer_linearity():
    m = init_model(ArchSpec(2, (8, 8), 1, make_atom("sine")), InitScheme.siren(30), Rng(1))
    X = Rng(2).uniform(-1, 1, size=(10, 2))
    last = m.layers[-1]
    y = forward_batch(m, IdentityEncoder(2), X) - last.bias
    scaled = MlpModel(m.layers[:-1] + (Layer(3.0 * last.weight, last.bias),))
    y3 = forward_batch(scaled, IdentityEncoder(2), X) - last.bias
    assert np.array_equal(y3, np.float64(3.0) * y) or np.max(np.abs(y3 - 3 * y)) <= 1e-15


def siren3(seed=0):
    return init_model(ArchSpec(2, (16, 16), 1, make_atom("sine")), InitScheme.siren(30), Rng(seed))


def test_siren_jacobian_and_laplacian_finite_differences():
    m, enc = siren3(), IdentityEncoder(2)
    X = Rng(7).uniform(-1, 1, size=(20, 2))
    d = input_derivatives_batch(m, enc, X, 2)
    h = 1e-5
    f = lambda Z: forward_batch(m, enc, Z)
    for a in range(2):
        e = np.zeros(2)
        e[a] = h
        fd = (f(X + e) - f(X - e)) / (2 * h)
        assert max_rel_err(d.jacobian[:, :, a], fd) <= 1e-5
    hl = 1e-4
    lap = sum((f(X + hl * np.eye(2)[a]) - 2 * f(X) + f(X - hl * np.eye(2)[a])) / hl**2 for a in range(2))
    assert max_rel_err(d.laplacian, lap) <= 1e-4


def test_linear_model_loss_gradient_by_hand():
    m = MlpModel((Layer([[1.0]], [0.0]),))
    loss, g = loss_backward(m, None, PointLoss(np.array([[1.0]]), np.array([[0.0]])))
    assert loss == 1.0
    assert g.model[0][0, 0] == 2.0 and g.model[1][0] == 2.0


def test_zero_residual_gives_zero_gradients():
    m = siren3()
    X = Rng(1).uniform(-1, 1, size=(8, 2))
    Y = forward_batch(m, IdentityEncoder(2), X)
    loss, g = loss_backward(m, None, PointLoss(X, Y))
    assert loss == 0.0
    assert all(np.all(a == 0) for a in g.model)


def flat_fd(model, encoder, loss_fn, h=1e-6):
    arrays = model.arrays()
    out = []
    for k, A in enumerate(arrays):
        G = np.zeros_like(A)
        for idx in np.ndindex(A.shape):
            vals = []
            for sgn in (1, -1):
                B = [a.copy() for a in arrays]
                B[k][idx] += sgn * h
                vals.append(loss_fn(model.with_arrays(B), encoder))
            G[idx] = (vals[0] - vals[1]) / (2 * h)
        out.append(G)
    return out


@pytest.mark.parametrize("targets", ["values", "gradients", "laplacians"])
def test_parameter_gradients_finite_differences(targets):
    rng = Rng(5)
    m = init_model(ArchSpec(2, (6, 6), 1, make_atom("sine", omega=2.0)), InitScheme.standard(), rng)
    X = rng.uniform(-1, 1, size=(10, 2))
    kw = {"values": rng.normal(size=(10, 1))}
    if targets == "gradients":
        kw["gradients"] = rng.normal(size=(10, 1, 2))
    if targets == "laplacians":
        kw["laplacians"] = rng.normal(size=(10, 1))
    loss = PointLoss(X, **kw)
    _, g = loss_backward(m, None, loss)
    fd = flat_fd(m, None, lambda mm, e: loss_backward(mm, e, loss)[0])
    scale = max(np.max(np.abs(a)) for a in fd)
    for got, want in zip(g.model, fd):
        assert np.max(np.abs(got - want)) <= 1e-5 * scale


def test_learnable_fourier_and_chebyshev_gradients():
    rng = Rng(6)
    enc = fourier_gaussian(1, 3, 1.0, rng, trainable=True)
    arch = ArchSpec(enc.out_dim, (5,), 1, make_atom("chebyshev", coeffs=(0.1, 0.8, -0.3, 0.2)), learn_atom=True)
    m = init_model(arch, InitScheme.standard(), rng)
    X = rng.uniform(-1, 1, size=(12, 1))
    loss = PointLoss(X, rng.normal(size=(12, 1)), gradients=rng.normal(size=(12, 1, 1)))
    _, g = loss_backward(m, enc, loss)
    fd_model = flat_fd(m, enc, lambda mm, e: loss_backward(mm, e, loss)[0])
    B = enc.B
    fdB = np.zeros_like(B)
    for idx in np.ndindex(B.shape):
        vals = []
        for sgn in (1, -1):
            B2 = B.copy()
            B2[idx] += sgn * 1e-6
            vals.append(loss_backward(m, enc.with_arrays([B2]), loss)[0])
        fdB[idx] = (vals[0] - vals[1]) / 2e-6
    scale = max(np.max(np.abs(a)) for a in fd_model + [fdB])
    for got, want in zip(g.model + g.encoder, fd_model + [fdB]):
        assert np.max(np.abs(got - want)) <= 1e-5 * scale


def test_non_finite_loss_reports_coordinate():
    m = MlpModel((Layer([[1.0]], [0.0]),))
    X = np.array([[0.1], [0.2]])
    Y = np.array([[0.0], [np.inf]])
    with pytest.raises(NonFiniteError) as err:
        loss_backward(m, None, PointLoss(X, Y))
    assert err.value.coord.tolist() == [0.2]


def test_extrapolation_is_logged(caplog):
    m = siren3()
    with caplog.at_level(logging.INFO, logger="inrlab.model"):
        forward(m, None, [1.5, 0.0])
    assert "outside" in caplog.text


def test_relu_network_rejects_laplacian():
    m = init_model(ArchSpec(1, (4,), 1, make_atom("relu")), InitScheme.standard(), Rng(0))
    with pytest.raises(ValueError):
        forward_with_input_derivatives(m, None, [0.1], order=2)


def test_layer_validation():
    with pytest.raises(ValueError):
        Layer(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ValueError):
        MlpModel((Layer(np.zeros((2, 2)), np.zeros(2)), Layer(np.zeros((1, 2)), np.zeros(1))))
