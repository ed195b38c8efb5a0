"""Summary statistics of a released cluster file (cluster count, noise, uncertainty).

The released file marks noise with label 8.

    python3 scripts/published_stats.py cluster_set.csv
"""

import argparse

import numpy as np

from nemiregions.cli import label_file_stats
from nemiregions.grid_model import read_grid


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("path")
    p.add_argument("--noise-label", type=int, default=8)
    a = p.parse_args()

    ds = read_grid(a.path, noise_label_in_file=a.noise_label)
    for key, value in label_file_stats(ds).items():
        print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
    unc = np.array([c.uncertainty for c in ds.cells if c.uncertainty is not None], dtype=float)
    if unc.size:
        for q in (25, 75, 90, 99):
            print(f"uncertainty p{q}: {np.percentile(unc, q):.4f}")
        print(f"cells with zero uncertainty: {100 * np.mean(unc == 0):.2f}%")


if __name__ == "__main__":
    main()
