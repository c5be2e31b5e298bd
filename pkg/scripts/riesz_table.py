"""Frame bounds and partition-of-unity deviation for the translates of several atoms."""

import argparse
import math
from pathlib import Path

from _common import write_csv
from inrlab import make_atom
from inrlab.analysis import InsufficientDecayError, RieszSettings, riesz_analyze

GENERATORS = {
    "sinc": make_atom("sinc"),
    "gaussian": make_atom("gaussian", s=1.0),
    "gaussian-narrow": make_atom("gaussian", s=0.5),
    "sine": make_atom("sine", omega=math.pi),
    "rc": make_atom("rc", omega1=math.pi, omega2=math.pi / 4),
    "relu": make_atom("relu"),
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--density", type=int, default=8)
    p.add_argument("--out", type=Path, default=Path("results"))
    args = p.parse_args()
    rows = []
    for name, atom in GENERATORS.items():
        try:
            r = riesz_analyze(atom, RieszSettings(density=args.density))
        except InsufficientDecayError as exc:
            print(f"{name}: {exc}")
            rows.append((name, "no_decay", None, None, None, None))
            continue
        print(f"{name}: {r.classification} (A={r.frame_min:.6g}, B={r.frame_max:.6g}, pou={r.pou_deviation:.3g})")
        rows.append((name, r.classification, r.frame_min, r.frame_max, r.pou_deviation, r.gram_min_singular))
    write_csv(args.out / "riesz_table.csv", ["generator", "class", "A", "B", "pou", "gram_min"], rows)


if __name__ == "__main__":
    main()
