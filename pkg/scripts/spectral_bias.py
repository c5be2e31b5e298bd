"""Per-tone residual curves for relu and sine networks on a two-tone 1D target.

    python scripts/spectral_bias.py --steps 5000
"""

import argparse
from pathlib import Path

from _common import write_csv
from inrlab import make_atom
from inrlab.analysis import spectral_bias_probe
from inrlab.init import ArchSpec, InitScheme

RUNS = {
    "relu": ("relu", InitScheme.standard(), 1e-3),
    "siren": ("sine", InitScheme.siren(30.0), 1e-4),
    "finer": ("finer", InitScheme.finer(30.0, 1.0), 1e-4),
}


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--every", type=int, default=10)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--f-lo", type=int, default=1)
    p.add_argument("--f-hi", type=int, default=32)
    p.add_argument("--models", default="relu,siren")
    p.add_argument("--out", type=Path, default=Path("results"))
    args = p.parse_args()
    for name in args.models.split(","):
        atom, scheme, lr = RUNS[name]
        arch = ArchSpec(1, (args.width,) * 3, 1, make_atom(atom))
        r = spectral_bias_probe(arch, scheme, args.f_lo, args.f_hi, args.steps, args.every, lr=lr)
        print(f"{name}: -20 dB reached at step {r.steps_to('lo')} (f={args.f_lo}), "
              f"{r.steps_to('hi')} (f={args.f_hi})")
        write_csv(args.out / f"spectral_bias_{name}.csv", ["step", "lo_db", "hi_db"], r.rows())


if __name__ == "__main__":
    main()
