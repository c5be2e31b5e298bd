"""PSNR of a pyramid fit as finer levels are added."""

import argparse
from pathlib import Path

from _common import write_csv
from inrlab.miner import miner_fit, miner_render
from inrlab.signal_io import load_pgm_ppm, psnr


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--image", default="tests/data/camera256.pgm")
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--patch", type=int, default=32)
    p.add_argument("--steps", type=int, default=150)
    p.add_argument("--coarse-steps", type=int, default=500)
    p.add_argument("--tau", type=float, default=1e-4)
    p.add_argument("--out", type=Path, default=Path("results"))
    args = p.parse_args()
    img = load_pgm_ppm(args.image).values
    pyr = miner_fit(img, args.levels, args.patch, tau=args.tau, steps=args.steps, coarse_steps=args.coarse_steps)
    rows = [(k, psnr(miner_render(pyr, k), img)) for k in range(1, args.levels + 1)]
    for k, db in rows:
        print(f"{k} level(s): {db:.2f} dB")
    print(f"{pyr.active_patches()} active patches")
    write_csv(args.out / "miner_levels.csv", ["levels", "psnr"], rows)


if __name__ == "__main__":
    main()
