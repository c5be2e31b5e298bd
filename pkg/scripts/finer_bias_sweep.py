"""Steps for the high tone to reach -20 dB as the first-layer bias range of a FINER network grows."""

import argparse
from pathlib import Path

from _common import write_csv
from inrlab import make_atom
from inrlab.analysis import spectral_bias_probe
from inrlab.init import ArchSpec, InitScheme


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--k", default="1,5,10", help="bias ranges to try")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--w0", type=float, default=30.0)
    p.add_argument("--out", type=Path, default=Path("results"))
    args = p.parse_args()
    arch = ArchSpec(1, (64, 64, 64), 1, make_atom("finer"))
    rows = []
    for k in map(float, args.k.split(",")):
        r = spectral_bias_probe(arch, InitScheme.finer(args.w0, k), 1, 32, args.steps, 10, lr=1e-4)
        rows.append((k, r.steps_to("lo"), r.steps_to("hi")))
        print(f"k={k:g}: low tone {rows[-1][1]}, high tone {rows[-1][2]}")
    write_csv(args.out / "finer_bias_sweep.csv", ["k", "steps_lo", "steps_hi"], rows)


if __name__ == "__main__":
    main()
