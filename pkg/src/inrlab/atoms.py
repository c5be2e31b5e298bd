"""Activation atoms with closed-form derivatives.

Every atom is evaluated through truncated derivative jets: a jet is a list
``[f, f', f'', f''']`` of arrays, and atoms are built from a handful of jet
primitives (products, chain rule through sin/cos/exp/tanh/sinc/abs). The
network engine asks for one order more than the loss needs, so third
derivatives are available when Laplacian supervision is backpropagated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

Jet = list  # list[np.ndarray], derivatives of increasing order

ATOM_IDS = ("relu", "sine", "gaussian", "wire", "finer", "hosc", "sinc", "rc", "chebyshev")

SMOOTHNESS = {
    "relu": "C0",
    "sine": "C_inf",
    "gaussian": "C_inf",
    "wire": "C_inf",
    "finer": "C1",
    "hosc": "C_inf",
    "sinc": "C_inf",
    "rc": "C_inf",
    "chebyshev": "C_inf",
}

PARITY = {
    "relu": "none",
    "sine": "odd",
    "gaussian": "even",
    "wire": "even",
    "finer": "odd",
    "hosc": "odd",
    "sinc": "even",
    "rc": "even",
    "chebyshev": "none",
}

DEFAULT_PARAMS: dict[str, dict] = {
    "relu": {},
    "sine": {"omega": 30.0},
    "gaussian": {"s": 1.0},
    "wire": {"omega": 20.0, "s": 100.0},
    "finer": {"omega": 30.0},
    "hosc": {"beta": 8.0, "omega": 30.0},
    "sinc": {"omega": math.pi},
    "rc": {"omega1": math.pi, "omega2": math.pi / 2},
    "chebyshev": {"coeffs": (0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)},
}

# Named presets beyond the per-atom defaults.
PRESETS: dict[str, tuple[str, dict]] = {
    "sine-audio": ("sine", {"omega": 3000.0}),
}

_REQUIRED = {
    "relu": (),
    "sine": ("omega",),
    "gaussian": ("s",),
    "wire": ("omega", "s"),
    "finer": ("omega",),
    "hosc": ("beta", "omega"),
    "sinc": ("omega",),
    "rc": ("omega1", "omega2"),
    "chebyshev": ("coeffs",),
}

_SINC_SERIES_RADIUS = 0.5
_SINC_SERIES_TERMS = 14


class UnsupportedDerivativeError(ValueError):
    """Raised when a derivative order is requested that an atom or encoder cannot supply."""


# --- jet primitives -------------------------------------------------------


def _const(c, like: np.ndarray, order: int) -> Jet:
    z = np.zeros_like(like)
    return [np.full_like(like, c)] + [z] * order


def _linear(x: np.ndarray, a: float, b: float, order: int) -> Jet:
    """Jet of a*x + b."""
    z = np.zeros_like(x)
    jet = [a * x + b]
    if order >= 1:
        jet.append(np.full_like(x, a))
    jet += [z] * (order - 1) if order >= 2 else []
    return jet


def _add(f: Jet, g: Jet) -> Jet:
    return [a + b for a, b in zip(f, g)]


def _scale(f: Jet, c: float) -> Jet:
    return [c * a for a in f]


def _mul(f: Jet, g: Jet) -> Jet:
    n = len(f)
    out = [f[0] * g[0]]
    if n > 1:
        out.append(f[1] * g[0] + f[0] * g[1])
    if n > 2:
        out.append(f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2])
    if n > 3:
        out.append(f[3] * g[0] + 3.0 * f[2] * g[1] + 3.0 * f[1] * g[2] + f[0] * g[3])
    return out


def _chain(outer: Sequence[np.ndarray], inner: Jet) -> Jet:
    """Faa di Bruno up to third order; outer[k] is the k-th derivative at inner[0]."""
    n = len(inner)
    out = [outer[0]]
    if n > 1:
        out.append(outer[1] * inner[1])
    if n > 2:
        out.append(outer[2] * inner[1] ** 2 + outer[1] * inner[2])
    if n > 3:
        out.append(
            outer[3] * inner[1] ** 3 + 3.0 * outer[2] * inner[1] * inner[2] + outer[1] * inner[3]
        )
    return out


def _sin(u: Jet) -> Jet:
    s, c = np.sin(u[0]), np.cos(u[0])
    return _chain([s, c, -s, -c][: len(u)], u)


def _cos(u: Jet) -> Jet:
    s, c = np.sin(u[0]), np.cos(u[0])
    return _chain([c, -s, -c, s][: len(u)], u)


def _exp(u: Jet) -> Jet:
    e = np.exp(u[0])
    return _chain([e] * len(u), u)


def _tanh(u: Jet) -> Jet:
    t = np.tanh(u[0])
    d1 = 1.0 - t * t
    return _chain([t, d1, -2.0 * t * d1, d1 * (6.0 * t * t - 2.0)][: len(u)], u)


def _abs(u: Jet) -> Jet:
    # sign(0) = 0 by convention
    z = np.zeros_like(u[0])
    return _chain([np.abs(u[0]), np.sign(u[0]), z, z][: len(u)], u)


def _sinc_series_derivs(u: np.ndarray, n: int) -> list[np.ndarray]:
    k = np.arange(_SINC_SERIES_TERMS)
    coef = np.zeros(2 * _SINC_SERIES_TERMS)
    coef[2 * k] = (-1.0) ** k / np.array([math.factorial(2 * j + 1) for j in k], dtype=float)
    poly = np.polynomial.Polynomial(coef)
    out = []
    for _ in range(n):
        out.append(poly(u))
        poly = poly.deriv()
    return out


def sinc_derivs(u: np.ndarray, n: int) -> list[np.ndarray]:
    """sin(u)/u and its first n-1 derivatives; Taylor series near u = 0."""
    u = np.asarray(u, dtype=float)
    near = np.abs(u) < _SINC_SERIES_RADIUS
    safe = np.where(near, 1.0, u)
    s = np.sin(safe) / safe
    c = np.cos(safe)
    out = [s]
    if n > 1:
        s1 = (c - s) / safe
        out.append(s1)
    if n > 2:
        s2 = -s - 2.0 * s1 / safe
        out.append(s2)
    if n > 3:
        out.append((-c - 3.0 * s2) / safe)
    if near.any():
        ser = _sinc_series_derivs(u[near], n)
        for k in range(n):
            out[k] = np.where(near, 0.0, out[k])
            out[k][near] = ser[k]
    return out


def _sinc(u: Jet) -> Jet:
    return _chain(sinc_derivs(u[0], len(u)), u)


def _poly_t(t: Jet, coeffs: Sequence[float]) -> Jet:
    """sum_k a_k T_k(t) via the three-term recurrence, on jets."""
    one = _const(1.0, t[0], len(t) - 1)
    acc = _scale(one, coeffs[0])
    prev, cur = one, t
    for k in range(1, len(coeffs)):
        acc = _add(acc, _scale(cur, coeffs[k]))
        prev, cur = cur, _add(_scale(_mul(t, cur), 2.0), _scale(prev, -1.0))
    return acc


def chebyshev_basis(x: np.ndarray, n_coeffs: int, order: int) -> list[Jet]:
    """Jets of T_k(tanh(x)) for k < n_coeffs; used for coefficient gradients."""
    t = _tanh(_linear(x, 1.0, 0.0, order))
    basis = [_const(1.0, x, order)]
    if n_coeffs > 1:
        basis.append(t)
    while len(basis) < n_coeffs:
        basis.append(_add(_scale(_mul(t, basis[-1]), 2.0), _scale(basis[-2], -1.0)))
    return basis


# --- atoms ----------------------------------------------------------------


@dataclass(frozen=True)
class Atom:
    """A scalar activation with named parameters.

    ``id`` is one of :data:`ATOM_IDS`; params follow :data:`DEFAULT_PARAMS`.
    The rc atom is the raised-cosine pulse ``sinc(w1 x) cos(w2 x) / (1 - s x^2)``
    with ``s = (2 w2 / pi)^2`` so that the poles at ``+-1/sqrt(s)`` coincide with
    zeros of the cosine; an explicit ``s`` must match this value.
    """

    id: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in ATOM_IDS:
            raise ValueError(f"unknown atom id {self.id!r}; expected one of {ATOM_IDS}")
        p = dict(self.params)
        for key in _REQUIRED[self.id]:
            if key not in p:
                raise ValueError(f"atom {self.id!r} missing parameter {key!r}")
        for key in ("omega", "s", "beta", "omega1", "omega2"):
            if key in p:
                p[key] = float(p[key])
                if not (p[key] > 0 and math.isfinite(p[key])):
                    raise ValueError(f"atom {self.id!r}: {key} must be positive and finite")
        if self.id == "chebyshev":
            coeffs = tuple(float(c) for c in p["coeffs"])
            if len(coeffs) < 2:
                raise ValueError("chebyshev atom needs K >= 1 (at least two coefficients)")
            if not all(math.isfinite(c) for c in coeffs):
                raise ValueError("chebyshev coefficients must be finite")
            p["coeffs"] = coeffs
        if self.id == "rc":
            s_req = (2.0 * p["omega2"] / math.pi) ** 2
            if "s" in p and abs(p["s"] - s_req) > 1e-12 * max(1.0, s_req):
                raise ValueError(
                    f"rc atom: s={p['s']} makes the pole at 1/sqrt(s) non-removable; "
                    f"s must equal (2*omega2/pi)^2 = {s_req}"
                )
            p["s"] = s_req
        object.__setattr__(self, "params", p)

    @property
    def smoothness(self) -> str:
        return SMOOTHNESS[self.id]

    @property
    def parity(self) -> str:
        return PARITY[self.id]

    @property
    def max_order(self) -> int:
        """Highest input-derivative order usable for supervision."""
        return {"C0": 0, "C1": 1}.get(self.smoothness, 2)

    def with_params(self, **updates) -> "Atom":
        p = dict(self.params)
        p.update(updates)
        if self.id == "rc":
            p.pop("s", None)
        return Atom(self.id, p)

    def jet(self, x: np.ndarray, order: int) -> Jet:
        """Derivatives 0..order (order <= 3) of the atom at x."""
        if not 0 <= order <= 3:
            raise ValueError("order must be in 0..3")
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.id == "relu":
            z = np.zeros_like(x)
            return [np.maximum(x, 0.0), (x > 0).astype(float), z, z][: order + 1]
        if self.id == "sine":
            return _sin(_linear(x, p["omega"], 0.0, order))
        if self.id == "gaussian":
            return _exp(_quad(x, -p["s"], order))
        if self.id == "wire":
            return _mul(_exp(_quad(x, -p["s"], order)), _cos(_linear(x, p["omega"], 0.0, order)))
        if self.id == "finer":
            xj = _linear(x, 1.0, 0.0, order)
            inner = _scale(_add(_mul(xj, _abs(xj)), xj), p["omega"])
            return _sin(inner)
        if self.id == "hosc":
            return _tanh(_scale(_sin(_linear(x, p["omega"], 0.0, order)), p["beta"]))
        if self.id == "sinc":
            return _sinc(_linear(x, p["omega"], 0.0, order))
        if self.id == "rc":
            w2 = p["omega2"]
            # cos(w2 x)/(1 - s x^2) == pi/4 [sinc(pi/2 - w2 x) + sinc(pi/2 + w2 x)]
            shaped = _scale(
                _add(
                    _sinc(_linear(x, -w2, math.pi / 2, order)),
                    _sinc(_linear(x, w2, math.pi / 2, order)),
                ),
                math.pi / 4,
            )
            return _mul(_sinc(_linear(x, p["omega1"], 0.0, order)), shaped)
        if self.id == "chebyshev":
            return _poly_t(_tanh(_linear(x, 1.0, 0.0, order)), p["coeffs"])
        raise AssertionError(self.id)

    def __call__(self, x):
        return self.jet(x, 0)[0]

    def to_dict(self) -> dict:
        p = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()}
        if self.id == "rc":
            p.pop("s", None)
        return {"id": self.id, "params": p}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Atom":
        return cls(d["id"], dict(d.get("params", {})))


def _quad(x: np.ndarray, a: float, order: int) -> Jet:
    """Jet of a*x^2."""
    z = np.zeros_like(x)
    jet = [a * x * x, 2.0 * a * x, np.full_like(x, 2.0 * a), z]
    return jet[: order + 1]


def make_atom(atom_id: str, **params) -> Atom:
    """Build an atom, filling unspecified parameters from the defaults."""
    if atom_id in PRESETS:
        atom_id, preset = PRESETS[atom_id]
        params = {**preset, **params}
    if atom_id not in DEFAULT_PARAMS:
        raise ValueError(f"unknown atom id {atom_id!r}")
    merged = dict(DEFAULT_PARAMS[atom_id])
    merged.update({k: v for k, v in params.items() if v is not None})
    return Atom(atom_id, merged)


def eval_atom(atom: Atom, x: float) -> tuple[float, float, float]:
    """(psi, psi', psi'') at a scalar x. ReLU reports psi'' = 0 (non-smooth)."""
    if not math.isfinite(x):
        raise ValueError("x must be finite")
    jet = atom.jet(np.array([x], dtype=float), 2)
    return float(jet[0][0]), float(jet[1][0]), float(jet[2][0])


@dataclass(frozen=True)
class CatalogEntry:
    id: str
    defaults: dict
    smoothness: str
    parity: str


def list_atoms() -> list[CatalogEntry]:
    """Catalog in stable order (the order breaks ties in selection routines)."""
    return [
        CatalogEntry(a, dict(DEFAULT_PARAMS[a]), SMOOTHNESS[a], PARITY[a]) for a in ATOM_IDS
    ]
