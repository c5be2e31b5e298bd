"""Architectures and matched weight initializers.

Weight bounds, with n the fan-in of a layer and d the network input width:

- ``standard``: Glorot-uniform weights, zero biases, the atom's own parameters.
- ``siren(w0)``: sine atoms with unit frequency. The first layer has layer
  scale w0 and weights U(+-1/d); hidden layers have scale 1 and weights
  U(+-sqrt(6/n)); the affine output layer draws U(+-sqrt(6/n)/w0).
- ``siren_reparam(w0)``: the same functions, but w0 is the layer scale of every
  sine layer and hidden weights are stored as U(+-sqrt(6/(w0^2 n))).
- ``finer(w0, k)``: finer atoms with frequency w0 and weights as in
  ``siren_reparam``; the first-layer bias is U(-k, k).

Sine-layer biases are U(+-1/sqrt(n)) times w0 in effective (scaled) units, and
output biases U(+-1/sqrt(n)). All weights are drawn before any bias so that
schemes that differ only in biases share their weights for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .atoms import Atom, make_atom
from .model import Layer, MlpModel
from .rng import Rng

SCHEME_KINDS = ("standard", "siren", "siren_reparam", "finer")


@dataclass(frozen=True)
class ArchSpec:
    """Layer widths and activation atoms.

    ``atoms`` is one atom for every hidden layer or a tuple with one per hidden
    layer. ``in_dim`` is the width fed to the first layer (the encoder output).
    """

    in_dim: int
    hidden: tuple[int, ...]
    out_dim: int
    atoms: Atom | tuple[Atom, ...] = make_atom("relu")
    learn_atom: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.in_dim < 1 or self.out_dim < 1 or any(h < 1 for h in self.hidden):
            raise ValueError("layer widths must be positive")
        if isinstance(self.atoms, Atom):
            object.__setattr__(self, "atoms", (self.atoms,) * len(self.hidden))
        atoms = tuple(self.atoms)
        if len(atoms) != len(self.hidden):
            raise ValueError("need one atom per hidden layer")
        object.__setattr__(self, "atoms", atoms)

    @property
    def dims(self) -> list[int]:
        return [self.in_dim, *self.hidden, self.out_dim]

    def n_params(self) -> int:
        d = self.dims
        n = sum(a * b + b for a, b in zip(d[:-1], d[1:]))
        if self.learn_atom:
            n += sum(len(a.params["coeffs"]) for a in self.atoms if a.id == "chebyshev")
        return n


@dataclass(frozen=True)
class InitScheme:
    kind: str = "standard"
    omega0: float = 30.0
    bias_range: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown init scheme {self.kind!r}; expected one of {SCHEME_KINDS}")
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.bias_range < 0:
            raise ValueError("bias range k must be non-negative")

    @classmethod
    def standard(cls):
        return cls("standard")

    @classmethod
    def siren(cls, omega0: float = 30.0):
        return cls("siren", omega0)

    @classmethod
    def siren_reparam(cls, omega0: float = 30.0):
        return cls("siren_reparam", omega0)

    @classmethod
    def finer(cls, omega0: float = 30.0, bias_range: float = 1.0):
        return cls("finer", omega0, bias_range)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "omega0": self.omega0, "bias_range": self.bias_range}


def _layer_plan(arch: ArchSpec, scheme: InitScheme):
    """Per layer: (atom, layer scale, weight bound, bias bound)."""
    dims = arch.dims
    n_layers = len(dims) - 1
    w0 = scheme.omega0
    plan = []
    for i in range(n_layers):
        fan_in, fan_out = dims[i], dims[i + 1]
        last = i == n_layers - 1
        first = i == 0
        if scheme.kind == "standard":
            atom = None if last else arch.atoms[i]
            plan.append((atom, 1.0, math.sqrt(6.0 / (fan_in + fan_out)), 0.0))
            continue
        if last:
            plan.append((None, 1.0, math.sqrt(6.0 / fan_in) / w0, 1.0 / math.sqrt(fan_in)))
            continue
        base = arch.atoms[i]
        if scheme.kind in ("siren", "siren_reparam"):
            if base.id not in ("sine", "finer"):
                raise ValueError(f"{scheme.kind} init needs sine or finer atoms, got {base.id!r}")
            atom = base.with_params(omega=1.0)
            if scheme.kind == "siren":
                scale = w0 if first else 1.0
                wb = 1.0 / arch.in_dim if first else math.sqrt(6.0 / fan_in)
            else:
                scale = w0
                wb = 1.0 / arch.in_dim if first else math.sqrt(6.0 / fan_in) / w0
            plan.append((atom, scale, wb, w0 / scale / math.sqrt(fan_in)))
        else:
            if base.id != "finer":
                raise ValueError(f"finer init needs finer atoms, got {base.id!r}")
            atom = base.with_params(omega=w0)
            wb = 1.0 / arch.in_dim if first else math.sqrt(6.0 / fan_in) / w0
            bb = scheme.bias_range if first else 1.0 / math.sqrt(fan_in)
            plan.append((atom, 1.0, wb, bb))
    return plan


def init_model(arch: ArchSpec, scheme: InitScheme, rng: Rng) -> MlpModel:
    """Draw a model for ``arch`` under ``scheme`` from ``rng``."""
    plan = _layer_plan(arch, scheme)
    dims = arch.dims
    weights = [
        rng.uniform(-wb, wb, size=(dims[i + 1], dims[i])) for i, (_, _, wb, _) in enumerate(plan)
    ]
    biases = [
        rng.uniform(-bb, bb, size=dims[i + 1]) if bb > 0 else np.zeros(dims[i + 1])
        for i, (_, _, _, bb) in enumerate(plan)
    ]
    layers = []
    for (atom, scale, _, _), W, b in zip(plan, weights, biases):
        learn = arch.learn_atom and atom is not None and atom.id == "chebyshev"
        layers.append(Layer(W, b, atom, scale, learn))
    return MlpModel(tuple(layers))


def preactivations(model: MlpModel, X: np.ndarray) -> list[np.ndarray]:
    """Scaled pre-activations omega * (W h + b) of each hidden layer on raw inputs X."""
    out = []
    H = np.asarray(X, dtype=float)
    for layer in model.layers[:-1]:
        A = layer.omega * (H @ layer.weight.T + layer.bias)
        out.append(A)
        H = layer.atom(A)
    return out
