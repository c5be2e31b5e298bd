"""Fit one grayscale image with several parameter-matched networks and tabulate PSNR.

    python scripts/image_comparison.py --image tests/data/camera128.pgm --steps 2000
"""

import argparse
import time
from pathlib import Path

from _common import write_csv
from inrlab import make_atom
from inrlab.encoders import fourier_gaussian
from inrlab.init import ArchSpec, InitScheme, init_model
from inrlab.objectives import Objective
from inrlab.rng import Rng
from inrlab.signal_io import load_pgm_ppm, to_samples
from inrlab.train import TrainConfig, fit


def width_for(in_dim: int, target: int, depth: int = 3) -> int:
    """Hidden width whose parameter count is closest to ``target``."""
    count = lambda w: in_dim * w + (depth - 1) * w * w + depth * w + w + 1
    return min(range(4, 1024), key=lambda w: abs(count(w) - target))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--image", default="tests/data/camera128.pgm")
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--batch-size", type=int, default=2048)
    p.add_argument("--features", type=int, default=16, help="Fourier feature count m")
    p.add_argument("--sigma", type=float, default=4.0)
    p.add_argument("--w0", type=float, default=30.0)
    p.add_argument("--models", default="relu,ff,siren,wire,finer")
    p.add_argument("--out", type=Path, default=Path("results"))
    args = p.parse_args()

    obj = Objective.from_signal(to_samples(load_pgm_ppm(args.image)))
    target = 2 * 64 * 64 + (2 * args.features + 4) * 64 + 1
    configs = {
        "relu": (make_atom("relu"), InitScheme.standard(), None, 1e-3),
        "ff": (make_atom("relu"), InitScheme.standard(),
               fourier_gaussian(2, args.features, args.sigma, Rng(1)), 1e-3),
        "siren": (make_atom("sine"), InitScheme.siren(args.w0), None, 1e-4),
        "wire": (make_atom("wire"), InitScheme.standard(), None, 1e-3),
        "finer": (make_atom("finer"), InitScheme.finer(args.w0, 1.0), None, 1e-4),
    }
    rows = []
    for name in args.models.split(","):
        atom, scheme, enc, lr = configs[name]
        in_dim = 2 if enc is None else enc.out_dim
        w = width_for(in_dim, target)
        arch = ArchSpec(in_dim, (w, w, w), 1, atom)
        t = time.perf_counter()
        res = fit(init_model(arch, scheme, Rng(0)), enc, obj,
                  TrainConfig(steps=args.steps, lr=lr, batch_size=args.batch_size, psnr_every=args.steps))
        db = res.run.psnr_log[-1][1]
        secs = time.perf_counter() - t
        print(f"{name:6s} width {w:3d}  params {arch.n_params():6d}  {db:6.2f} dB  {secs:5.0f} s")
        rows.append((name, w, arch.n_params(), db, secs))
    write_csv(args.out / "image_comparison.csv", ["model", "width", "params", "psnr", "seconds"], rows)


if __name__ == "__main__":
    main()
