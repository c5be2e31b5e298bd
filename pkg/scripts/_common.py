"""Small helpers shared by the experiment scripts."""

import csv
from pathlib import Path


def write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{x:.9g}" if isinstance(x, float) else ("" if x is None else x) for x in row])
    print(f"wrote {path}")
