"""DBSCAN hyperparameter sweep over (epsilon, min_samples) on an embedded blob set.

Prints the CH-optimal cell and the elbow of the cluster-count surface, and
optionally saves the long-format table and a heatmap figure.

    python3 scripts/dbscan_sweep.py --eps-max 1.0 --csv sweep.csv --png sweep.png
"""

import argparse

import numpy as np

from nemiregions.embedding import EmbeddingParams, embed
from nemiregions.sweep import dbscan_grid, rows_to_csv
from nemiregions.synthetic import BlobConfig, make_blobs


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--blobs", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps-min", type=float, default=0.05)
    p.add_argument("--eps-max", type=float, default=1.0)
    p.add_argument("--eps-steps", type=int, default=20)
    p.add_argument("--ms-min", type=int, default=2)
    p.add_argument("--ms-max", type=int, default=11)
    p.add_argument("--max-noise", type=float, default=0.1,
                   help="noise cap for the capped CH pick; CH ignores noise points and "
                        "otherwise favours cells that discard most of the data")
    p.add_argument("--csv")
    p.add_argument("--png", help="heatmap of cluster counts (needs matplotlib)")
    a = p.parse_args()

    X, _ = make_blobs(BlobConfig(n_points=a.n, n_blobs=a.blobs, seed=a.seed))
    E = embed(X, EmbeddingParams(seed=a.seed)).coords
    hm = dbscan_grid(E, (a.eps_min, a.eps_max, a.eps_steps), (a.ms_min, a.ms_max))
    picks = hm.selections()
    ch = np.where(hm.noise_fraction <= a.max_noise, hm.scores["ch"], np.nan)
    if not np.isnan(ch).all():
        i, j = np.unravel_index(np.nanargmax(ch), ch.shape)
        picks["ch_noise_capped"] = (hm.epsilon[i], int(hm.min_samples[j]))
    for name, (eps, ms) in picks.items():
        i = int(np.argmin(np.abs(hm.epsilon - eps)))
        j = int(np.flatnonzero(hm.min_samples == ms)[0])
        print(f"{name}: epsilon={eps:.5g} min_samples={ms} -> {hm.n_clusters[i, j]} clusters, "
              f"noise {100 * hm.noise_fraction[i, j]:.2f}%")
    if a.csv:
        with open(a.csv, "w") as fh:
            fh.write(rows_to_csv(hm.to_rows()))
    if a.png:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(6, 5))
        im = ax.imshow(hm.n_clusters, origin="lower", aspect="auto", cmap="viridis",
                       extent=(hm.min_samples[0] - 0.5, hm.min_samples[-1] + 0.5,
                               hm.epsilon[0], hm.epsilon[-1]))
        ax.set_xlabel("min_samples")
        ax.set_ylabel("epsilon")
        fig.colorbar(im, label="clusters")
        fig.savefig(a.png, dpi=120, bbox_inches="tight")


if __name__ == "__main__":
    main()
