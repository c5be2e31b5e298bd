"""Greedy layer-by-layer activation selection from an atom dictionary."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .atoms import ATOM_IDS, Atom
from .encoders import Encoder, IdentityEncoder
from .init import ArchSpec, InitScheme, init_model
from .model import MlpModel
from .objectives import Objective, SampledSignal, loss_mse
from .rng import Rng, derive_seed
from .train import DivergenceError, FitResult, TrainConfig, fit


@dataclass
class MireResult:
    atoms: list[Atom]
    model: MlpModel
    encoder: Encoder
    trials: list[list[float]] = field(default_factory=list)  # per stage, error per dictionary atom
    final: FitResult | None = None


def _trial_model(prefix: Sequence[Atom], in_dim: int, width: int, out_dim: int, seed: int):
    arch = ArchSpec(in_dim, (width,) * len(prefix), out_dim, tuple(prefix))
    return init_model(arch, InitScheme.standard(), Rng(seed))


def mire_select(signal: SampledSignal, dictionary: Sequence[Atom], depth: int,
                trial_steps: int = 300, width: int = 32, final_steps: int = 2000,
                encoder: Encoder | None = None, seed: int = 0, lr: float = 1e-3) -> MireResult:
    """Choose one atom per hidden layer, greedily.

    At stage l a depth-l network is built from the atoms already chosen plus
    each candidate for layer l, freshly initialized (Glorot) and trained for
    ``trial_steps``; the candidate with the lowest final MSE wins. Only atom
    identities carry over between stages, weights are refit. Ties go to the
    atom earlier in the catalog order. A final network with the full sequence
    is then trained for ``final_steps``.
    """
    if not dictionary:
        raise ValueError("atom dictionary is empty")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    atoms = sorted(dictionary, key=lambda a: ATOM_IDS.index(a.id))
    enc = encoder or IdentityEncoder(signal.d)
    obj = Objective.from_signal(signal)
    cfg = TrainConfig(steps=trial_steps, lr=lr, seed=seed, psnr_every=0)
    chosen: list[Atom] = []
    trials = []
    for stage in range(depth):
        errs = []
        for k, atom in enumerate(atoms):
            model = _trial_model(chosen + [atom], enc.out_dim, width, signal.c,
                                 derive_seed(seed, stage, k))
            try:
                res = fit(model, enc, obj, cfg)
                errs.append(loss_mse(res.model, res.encoder, signal))
            except DivergenceError:
                errs.append(math.inf)
        best = min(range(len(atoms)), key=lambda i: (errs[i], i))
        chosen.append(atoms[best])
        trials.append(errs)
    model = _trial_model(chosen, enc.out_dim, width, signal.c, derive_seed(seed, depth))
    final = fit(model, enc, obj, TrainConfig(steps=final_steps, lr=lr, seed=seed))
    return MireResult(chosen, final.model, final.encoder, trials, final)
