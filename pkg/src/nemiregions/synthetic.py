"""Synthetic Gaussian blobs and grid datasets built from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_model import PARAMETER_COLUMNS, GridCell, GridDataset, canonical_grid


@dataclass(frozen=True)
class BlobConfig:
    n_points: int = 2000
    n_blobs: int = 4
    n_features: int = 6
    sigma: float = 0.05
    seed: int = 0

    def centers(self) -> np.ndarray:
        """Unit-vector centres: pairwise distance sqrt(2), i.e. about 28 sigma at the default."""
        if self.n_blobs > self.n_features:
            raise ValueError("need at least as many features as blobs")
        return np.eye(self.n_features)[: self.n_blobs]


def make_blobs(config: BlobConfig = BlobConfig()) -> tuple[np.ndarray, np.ndarray]:
    """Points and true labels; blob sizes differ by at most one, order is shuffled."""
    rng = np.random.default_rng(config.seed)
    labels = np.arange(config.n_points) % config.n_blobs
    rng.shuffle(labels)
    X = config.centers()[labels] + rng.normal(0.0, config.sigma, (config.n_points, config.n_features))
    return X, labels.astype(np.int64)


def blob_dataset(config: BlobConfig = BlobConfig(), volume: float = 1.0) -> GridDataset:
    """Blob features placed on a regular grid as the six parameter columns."""
    if config.n_features != len(PARAMETER_COLUMNS):
        raise ValueError("grid datasets carry exactly six parameters")
    X, labels = make_blobs(config)
    keys = canonical_grid(config.n_points)
    cells = tuple(
        GridCell(lev_m=lev, latitude=lat, longitude=lon, params=tuple(float(v) for v in x),
                 volume=volume, label=int(lab), imputed=0.0)
        for (lev, lat, lon), x, lab in zip(keys, X, labels)
    )
    return GridDataset(cells)
