#!/usr/bin/env python3
"""Plot relative d' against the swept parameter from a `simulate sweep` CSV.

    python3 scripts/plot_sweep.py results.csv --out results.png

Needs matplotlib. The swept column is the one of contrast, l_max, ssr and
browse_speed that takes more than one value.
"""

import argparse
import csv
from collections import defaultdict
from statistics import NormalDist

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

NORMAL = NormalDist()
SWEEPABLE = ["contrast", "l_max", "ssr", "browse_speed"]
LABELS = {
    "contrast": "effective contrast L_max/L_min",
    "l_max": "L_max (cd/m²)",
    "ssr": "spatial sampling rate (px/deg)",
    "browse_speed": "browsing speed (slices/s)",
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv")
    parser.add_argument("--out", default="sweep.png")
    parser.add_argument("--absolute", action="store_true", help="plot d' instead of d'/max d'")
    args = parser.parse_args()

    with open(args.csv, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise SystemExit("no rows")
    swept = [c for c in SWEEPABLE if len({r[c] for r in rows}) > 1]
    param = swept[0] if swept else "contrast"

    curves = defaultdict(list)
    for r in rows:
        curves[r["method"]].append((float(r[param]), float(r["d_prime"]), float(r["error_bar"])))

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for method, points in curves.items():
        points.sort()
        x = [p[0] for p in points]
        d = [p[1] for p in points]
        # d' error bar from the AUC error bar by the delta method
        err = [eb * 2 ** 0.5 / NORMAL.pdf(dp / 2 ** 0.5) for (_, dp, eb) in points]
        scale = 1.0 if args.absolute else max(max(d), 1e-12)
        ax.errorbar(x, [v / scale for v in d], yerr=[e / scale for e in err], marker="o", capsize=3, label=method)
    ax.set_xscale("log" if param in ("contrast", "l_max", "browse_speed") else "linear")
    ax.set_xlabel(LABELS[param])
    ax.set_ylabel("d'" if args.absolute else "d' / max d'")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
