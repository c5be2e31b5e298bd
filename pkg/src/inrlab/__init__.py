"""Coordinate-network signal representations with spectral design tools."""

import os as _os

# INRF_THREADS caps BLAS/OpenMP threads; it must be applied before numpy loads.
if _os.environ.get("INRF_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["INRF_THREADS"])

from .atoms import Atom, UnsupportedDerivativeError, eval_atom, list_atoms, make_atom
from .encoders import FourierFeatureEncoder, HashGridEncoder, IdentityEncoder
from .model import (
    Gradients,
    InputDerivatives,
    Layer,
    MlpModel,
    NonFiniteError,
    PointLoss,
    forward,
    forward_batch,
    forward_with_input_derivatives,
    loss_backward,
)
from .rng import Rng

__all__ = [
    "Atom", "UnsupportedDerivativeError", "eval_atom", "list_atoms", "make_atom",
    "FourierFeatureEncoder", "HashGridEncoder", "IdentityEncoder",
    "Gradients", "InputDerivatives", "Layer", "MlpModel", "NonFiniteError", "PointLoss",
    "forward", "forward_batch", "forward_with_input_derivatives", "loss_backward", "Rng",
]
