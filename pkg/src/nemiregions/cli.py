"""Command-line front end: ingest, impute, embed, cluster, sweep, score, nemi, compare, stats, synth, run.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .clustering import NOISE, ClusterSet, dbscan, kmeans, ward
from .cvi import CVI_NAMES, SCORERS, all_scores
from .embedding import EmbeddingParams, embed
from .errors import DegenerateError, FormatError, NemiError
from .grid_model import (GridDataset, assign_volumes, dataset_stats, knn_impute,
                         min_max_scale, read_grid, write_cluster_csv)
from .nemi import Ensemble, aggregate, select_base
from .similarity import ari, nmi, overlap_sym
from .sweep import DbscanParams, dbscan_grid, ensemble_run, rows_to_csv, score_curve
from .synthetic import BlobConfig, blob_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3

# derived seeds are base_seed plus these offsets
SEED_OFFSET_EMBED = 0            # run i embeds with base_seed + i
SEED_OFFSET_SHUFFLE = 1_000_000  # run i visits points in an order drawn from base_seed + i + this
SEED_OFFSET_SWEEP = 2_000_000    # DBSCAN sweep point order


class UsageError(Exception):
    pass


class StageError(Exception):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


# --- configuration -------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Every setting of ``run``; written verbatim into the manifest.

    Stage toggles: ``impute``, ``sweep`` and ``nemi``. The embedding and
    clustering stages always run.
    """
    input: str = ""
    output_dir: str = "out"
    noise_label: int = -1           # integer used for NOISE in input and output files
    raw_input: bool = False         # accept the 9-column geometry + parameter subset
    impute: bool = True
    impute_k: int = 5
    n_neighbors: int = 20
    min_dist: float = 0.0
    n_epochs: int = 500
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    epsilon: float = 0.10661017
    min_samples: int = 4
    shuffle: bool = False
    n_runs: int = 10
    base_seed: int = 0
    nemi: bool = True
    nemi_base: int = -1             # -1 selects the base with lowest mean uncertainty
    weight_mode: str = "volume"     # volume or count
    sweep: bool = False
    eps_min: float = 0.01
    eps_max: float = 0.2
    eps_steps: int = 20
    ms_min: int = 2
    ms_max: int = 11
    cvnnh_k: int = 10

    def validate(self) -> None:
        if self.weight_mode not in ("volume", "count"):
            raise UsageError(f"weight_mode must be volume or count, got {self.weight_mode!r}")
        if self.n_runs < 1:
            raise UsageError("n_runs must be at least 1")
        if self.nemi and self.n_runs < 2:
            raise UsageError("nemi needs n_runs >= 2")

    def embedding_params(self, seed: int) -> EmbeddingParams:
        return EmbeddingParams(n_neighbors=self.n_neighbors, min_dist=self.min_dist,
                               n_epochs=self.n_epochs,
                               negative_sample_rate=self.negative_sample_rate,
                               learning_rate=self.learning_rate, seed=seed)


def _convert(field_type, raw: str, key: str):
    t = field_type if isinstance(field_type, str) else field_type.__name__
    try:
        if t == "bool":
            v = raw.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        return raw.strip()
    except ValueError:
        raise UsageError(f"bad value {raw!r} for {key}") from None


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; unknown keys are rejected."""
    types = {f.name: f.type for f in fields(PipelineConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _convert(types[key], value, key)
    return out


def load_config(path: Optional[str], overrides: dict) -> PipelineConfig:
    """Defaults, then the config file, then command-line overrides (flags win)."""
    values = {}
    if path:
        values.update(parse_config_text(Path(path).read_text()))
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = PipelineConfig(**values)
    cfg.validate()
    return cfg


def config_from_manifest(path: str) -> PipelineConfig:
    data = json.loads(Path(path).read_text())
    try:
        cfg = PipelineConfig(**data["config"])
    except TypeError as exc:
        raise UsageError(f"manifest has unknown keys: {exc}") from None
    cfg.validate()
    return cfg


# --- artifacts -----------------------------------------------------------

class ArtifactWriter:
    """Writes files with a ``.partial`` suffix and renames them on :meth:`commit`.

    A failed run leaves its ``.partial`` files behind for inspection.
    """

    def __init__(self, directory: Path):
        self.directory = directory
        self.pending: list[Path] = []
        self.digests: dict[str, str] = {}

    def write(self, name: str, data: bytes) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        target = self.directory / name
        target.parent.mkdir(parents=True, exist_ok=True)
        partial = target.with_name(target.name + ".partial")
        partial.write_bytes(data)
        self.pending.append(target)
        self.digests[name] = hashlib.sha256(data).hexdigest()

    def commit(self) -> None:
        for target in self.pending:
            os.replace(target.with_name(target.name + ".partial"), target)
        self.pending.clear()


def _weights(dataset: GridDataset, mode: str) -> Optional[np.ndarray]:
    if mode == "count":
        return None
    w = dataset.volumes()
    if np.isnan(w).any() or (w <= 0).any():
        raise FormatError("volume weighting needs a positive volume for every cell", column="volume")
    return w


def _load_input(cfg: PipelineConfig) -> GridDataset:
    ds = read_grid(cfg.input, cfg.noise_label, require_all=not cfg.raw_input)
    if any(c.volume is None for c in ds.cells):
        ds = assign_volumes(ds)
    return ds


def scaled_features(dataset: GridDataset) -> np.ndarray:
    fm = dataset.feature_matrix()
    if fm.missing_mask.any():
        raise FormatError("features still contain missing values; run impute first")
    scaled, _ = min_max_scale(fm)
    return scaled.values


def run_pipeline(cfg: PipelineConfig, log=print) -> dict:
    """Run every enabled stage and write artifacts plus ``manifest.json`` to ``cfg.output_dir``.

    Returns the manifest. Stage failures raise :class:`StageError`.
    """
    if not Path(cfg.input).is_file():
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    out = ArtifactWriter(Path(cfg.output_dir))
    stage = "ingest"
    try:
        ds = _load_input(cfg)
        log(f"ingest: {len(ds)} cells")
        if cfg.impute:
            stage = "impute"
            ds = knn_impute(ds, cfg.impute_k)
        stage = "scale"
        X = scaled_features(ds)
        out.write("features_scaled.csv", write_cluster_csv(ds.with_columns(params=X), cfg.noise_label))

        stage = "embed+cluster"
        weights = _weights(ds, cfg.weight_mode)
        runs = max(cfg.n_runs, 2) if cfg.nemi else cfg.n_runs
        if runs >= 2:
            ens, report, coords = ensemble_run(
                X, cfg.embedding_params(cfg.base_seed),
                DbscanParams(cfg.epsilon, cfg.min_samples, cfg.shuffle),
                runs, cfg.base_seed + SEED_OFFSET_EMBED, weights,
                progress=lambda i: log(f"run {i} done"))
            members = list(ens.members)
        else:
            emb = embed(X, cfg.embedding_params(cfg.base_seed))
            cs = dbscan(emb.coords, cfg.epsilon, cfg.min_samples)
            members, coords, report, ens = [cs], [emb.coords], None, None

        score_rows = []
        for i, (cs, E) in enumerate(zip(members, coords)):
            run_ds = ds.with_columns(params=X, embedding=E, label=list(cs.labels))
            out.write(f"runs/run_{i:03d}.csv", write_cluster_csv(run_ds, cfg.noise_label))
            row = {"run": i, "seed": cfg.base_seed + SEED_OFFSET_EMBED + i,
                   "n_clusters": cs.n_clusters, "noise_fraction": cs.noise_fraction}
            row.update(all_scores(E, cs, cfg.cvnnh_k))
            score_rows.append(row)
        out.write("scores.csv", rows_to_csv(score_rows).encode())
        if report is not None:
            rows = [{"run_a": int(r[0]), "run_b": int(r[1]), "ari": r[2], "nmi": r[3], "overlap": r[4]}
                    for r in report.pairwise]
            out.write("variability.csv", rows_to_csv(rows).encode())
            log(f"pairwise ARI {report.ari[0]:.4f}+-{report.ari[1]:.4f}, "
                f"overlap {report.overlap[0]:.4f}+-{report.overlap[1]:.4f}")

        base_id = 0
        if cfg.nemi:
            stage = "nemi"
            base_id = cfg.nemi_base if cfg.nemi_base >= 0 else select_base(ens)
            res = aggregate(ens, base_id)
            final = ds.with_columns(params=X, embedding=coords[base_id],
                                    label=list(res.final_labels.labels),
                                    uncertainty=[round(float(u), 6) for u in res.uncertainty])
            out.write("nemi_final.csv", write_cluster_csv(final, cfg.noise_label))
            log(f"nemi: base {base_id}, mean uncertainty {res.mean_uncertainty:.3f}%")

        selections = {}
        if cfg.sweep:
            stage = "sweep"
            hm = dbscan_grid(coords[base_id], (cfg.eps_min, cfg.eps_max, cfg.eps_steps),
                             (cfg.ms_min, cfg.ms_max), cfg.base_seed + SEED_OFFSET_SWEEP,
                             cvnnh_k=cfg.cvnnh_k)
            out.write("sweep_dbscan.csv", rows_to_csv(hm.to_rows()).encode())
            selections = {k: list(v) for k, v in hm.selections().items()}

        stage = "manifest"
        manifest = {
            "version": __version__,
            "config": dataclasses.asdict(cfg),
            "seeds": {
                "embed": [cfg.base_seed + SEED_OFFSET_EMBED + i for i in range(len(members))],
                "shuffle": ([cfg.base_seed + SEED_OFFSET_EMBED + i + SEED_OFFSET_SHUFFLE
                             for i in range(len(members))] if cfg.shuffle else []),
                "sweep_order": cfg.base_seed + SEED_OFFSET_SWEEP if cfg.sweep else None,
            },
            "nemi_base": base_id if cfg.nemi else None,
            "sweep_selections": selections,
            "artifacts": dict(sorted(out.digests.items())),
        }
        out.write("manifest.json", (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode())
    except Exception as exc:
        raise StageError(stage, exc) from exc
    out.commit()
    return manifest


# --- comparison ----------------------------------------------------------

JOIN_KEYS = ("LEV_M", "LATITUDE", "LONGITUDE")


def _read_labels(path, keys, label_column, noise_label):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        cols = []
        for name in (*keys, label_column):
            if name.lower() not in header:
                raise FormatError(f"{path}: missing column {name!r}", column=name)
            cols.append(header.index(name.lower()))
        table = {}
        for r, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                key = tuple(float(row[c]) for c in cols[:-1])
                lab = row[cols[-1]].strip()
                if lab == "":
                    continue
                label = int(float(lab))
            except (ValueError, IndexError):
                raise FormatError(f"{path}: row {r} does not parse", row=r) from None
            if key in table:
                raise FormatError(f"{path}: duplicate key {key} at row {r}", row=r)
            table[key] = NOISE if (noise_label is not None and label == noise_label) else label
    return table


def compare_regionalisations(path_a, path_b, keys: Sequence[str] = JOIN_KEYS,
                             label_column: str = "label", noise_label_a: Optional[int] = None,
                             noise_label_b: Optional[int] = None, drop_noise: bool = False) -> dict:
    """Join two label files on ``keys`` and report overlap, NMI, ARI and the dropped-cell count."""
    a = _read_labels(path_a, keys, label_column, noise_label_a)
    b = _read_labels(path_b, keys, label_column, noise_label_b)
    common = sorted(set(a) & set(b))
    if not common:
        raise FormatError("the two files share no cells")
    la = np.array([a[k] for k in common])
    lb = np.array([b[k] for k in common])
    dropped = len(a) + len(b) - 2 * len(common)
    return {"overlap": overlap_sym(la, lb, drop_noise), "nmi": nmi(la, lb, drop_noise),
            "ari": ari(la, lb, drop_noise), "n_joined": len(common), "dropped": dropped}


def label_file_stats(dataset: GridDataset) -> dict:
    labels = np.array([NOISE if c.label is None else c.label for c in dataset.cells])
    unc = np.array([c.uncertainty for c in dataset.cells if c.uncertainty is not None], dtype=float)
    has_labels = any(c.label is not None for c in dataset.cells)
    out = {"n_cells": len(dataset)}
    if has_labels:
        cs = ClusterSet(labels)
        out.update(n_clusters=cs.n_clusters, noise_percent=100.0 * cs.noise_fraction)
    if unc.size:
        out.update(mean_uncertainty=float(unc.mean()), median_uncertainty=float(np.median(unc)),
                   std_uncertainty=float(unc.std()))
    return out


# --- argument parsing ----------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_config_flags(p):
    for f in fields(PipelineConfig):
        flag = "--" + f.name.replace("_", "-")
        t = f.type if isinstance(f.type, str) else f.type.__name__
        if t == "bool":
            p.add_argument(flag, dest=f.name, default=None, type=lambda s, n=f.name: _convert("bool", s, n),
                           metavar="BOOL")
        else:
            p.add_argument(flag, dest=f.name, default=None, type={"int": int, "float": float}.get(t, str))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nemiregions", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def io_args(sp, output=True):
        sp.add_argument("input")
        if output:
            sp.add_argument("-o", "--output", required=True)
        sp.add_argument("--noise-label", type=int, default=-1,
                        help="integer encoding NOISE in files (8 in the released table)")

    sp = sub.add_parser("ingest", help="validate a grid file and fill cell volumes")
    io_args(sp)
    sp.add_argument("--raw", action="store_true", help="input holds only geometry and parameters")

    sp = sub.add_parser("impute", help="fill missing parameters by k-nearest-neighbour weighting")
    io_args(sp)
    sp.add_argument("--k", type=int, default=5)

    sp = sub.add_parser("embed", help="min-max scale the parameters and embed them in 3-D")
    io_args(sp)
    sp.add_argument("--n-neighbors", type=int, default=20)
    sp.add_argument("--min-dist", type=float, default=0.0)
    sp.add_argument("--n-epochs", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("cluster", help="cluster the embedding (or scaled features)")
    io_args(sp)
    sp.add_argument("--alg", choices=("kmeans", "ward", "dbscan"), required=True)
    sp.add_argument("--k", type=int)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--min-samples", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--order-seed", type=int, help="shuffle the DBSCAN visiting order")
    sp.add_argument("--on", choices=("embedding", "features"), default="embedding")

    sp = sub.add_parser("sweep", help="CVI curves over k or a DBSCAN heatmap, as long-format CSV")
    io_args(sp)
    sp.add_argument("--alg", choices=("kmeans", "ward", "dbscan"), required=True)
    sp.add_argument("--k-min", type=int, default=2)
    sp.add_argument("--k-max", type=int, default=10)
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--eps-min", type=float, default=0.01)
    sp.add_argument("--eps-max", type=float, default=0.2)
    sp.add_argument("--eps-steps", type=int, default=20)
    sp.add_argument("--ms-min", type=int, default=2)
    sp.add_argument("--ms-max", type=int, default=11)
    sp.add_argument("--order-seed", type=int)
    sp.add_argument("--on", choices=("embedding", "features"), default="embedding")

    sp = sub.add_parser("score", help="cluster validity indices of a labelled file")
    io_args(sp, output=False)
    sp.add_argument("--metric", choices=CVI_NAMES,
                    help="report one index and fail on degenerate input (default: all, NaN when undefined)")
    sp.add_argument("--cvnnh-k", type=int, default=10)
    sp.add_argument("--on", choices=("embedding", "features"), default="embedding")

    sp = sub.add_parser("nemi", help="fuse labelled runs into final labels with uncertainty")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--noise-label", type=int, default=-1)
    sp.add_argument("--base", type=int, default=-1, help="member index; -1 selects automatically")
    sp.add_argument("--weights", choices=("volume", "count"), default="volume")

    sp = sub.add_parser("compare", help="overlap, NMI and ARI between two label files")
    sp.add_argument("file_a")
    sp.add_argument("file_b")
    sp.add_argument("--keys", default=",".join(JOIN_KEYS))
    sp.add_argument("--label-column", default="label")
    sp.add_argument("--noise-label-a", type=int)
    sp.add_argument("--noise-label-b", type=int)
    sp.add_argument("--drop-noise", action="store_true")

    sp = sub.add_parser("stats", help="parameter, cluster and uncertainty statistics")
    io_args(sp, output=False)
    sp.add_argument("--raw", action="store_true")

    sp = sub.add_parser("synth", help="write a synthetic Gaussian-blob grid file")
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--blobs", type=int, default=4)
    sp.add_argument("--sigma", type=float, default=0.05)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("run", help="run the whole pipeline from a key=value config")
    sp.add_argument("--config")
    sp.add_argument("--manifest", help="re-run the configuration recorded in a manifest")
    _add_config_flags(sp)
    return p


# --- command handlers ----------------------------------------------------

def _write(path, data: bytes):
    Path(path).write_bytes(data)


def _load_coords(ds: GridDataset, on: str) -> np.ndarray:
    if on == "features":
        return scaled_features(ds)
    E = ds.embedding()
    if np.isnan(E).any():
        raise FormatError("embedding columns e0..e2 are empty; run embed first", column="e0")
    return E


def _cmd_ingest(a):
    ds = read_grid(a.input, a.noise_label, require_all=not a.raw)
    _write(a.output, write_cluster_csv(assign_volumes(ds), a.noise_label))
    print(f"{len(ds)} cells")


def _cmd_impute(a):
    ds = knn_impute(read_grid(a.input, a.noise_label), a.k)
    _write(a.output, write_cluster_csv(ds, a.noise_label))


def _cmd_embed(a):
    ds = read_grid(a.input, a.noise_label)
    params = EmbeddingParams(n_neighbors=a.n_neighbors, min_dist=a.min_dist,
                             n_epochs=a.n_epochs, seed=a.seed)
    emb = embed(scaled_features(ds), params)
    _write(a.output, write_cluster_csv(ds.with_columns(embedding=emb.coords), a.noise_label))
    print(f"cross-entropy {emb.final_cross_entropy:.6g}")


def _cmd_cluster(a):
    ds = read_grid(a.input, a.noise_label)
    X = _load_coords(ds, a.on)
    if a.alg == "dbscan":
        if a.eps is None or a.min_samples is None:
            raise UsageError("dbscan needs --eps and --min-samples")
        order = None if a.order_seed is None else np.random.default_rng(a.order_seed).permutation(len(ds))
        cs = dbscan(X, a.eps, a.min_samples, order)
    else:
        if a.k is None:
            raise UsageError(f"{a.alg} needs --k")
        cs = kmeans(X, a.k, seed=a.seed)[0] if a.alg == "kmeans" else ward(X, a.k)[0]
    _write(a.output, write_cluster_csv(ds.with_columns(label=list(cs.labels)), a.noise_label))
    print(f"{cs.n_clusters} clusters, noise {100 * cs.noise_fraction:.2f}%")


def _cmd_sweep(a):
    ds = read_grid(a.input, a.noise_label)
    X = _load_coords(ds, a.on)
    if a.alg == "dbscan":
        hm = dbscan_grid(X, (a.eps_min, a.eps_max, a.eps_steps), (a.ms_min, a.ms_max), a.order_seed)
        _write(a.output, rows_to_csv(hm.to_rows()).encode())
        for name, cell in hm.selections().items():
            print(f"{name}: epsilon={cell[0]:.8g} min_samples={cell[1]}")
    else:
        curve = score_curve(X, a.alg, range(a.k_min, a.k_max + 1), a.repeats)
        _write(a.output, rows_to_csv(curve.to_rows()).encode())


def _cmd_score(a):
    ds = read_grid(a.input, a.noise_label)
    X = _load_coords(ds, a.on)
    cs = ClusterSet(ds.labels())
    if a.metric:
        scores = {a.metric: float(SCORERS[a.metric](X, cs, a.cvnnh_k))}
    else:
        scores = all_scores(X, cs, a.cvnnh_k)
    sys.stdout.write(rows_to_csv([scores]))


def _cmd_nemi(a):
    datasets = [read_grid(p, a.noise_label) for p in a.inputs]
    keys = [c.key for c in datasets[0].cells]
    for p, d in zip(a.inputs[1:], datasets[1:]):
        if [c.key for c in d.cells] != keys:
            raise FormatError(f"{p}: cells differ from {a.inputs[0]}")
    weights = _weights(datasets[0], a.weights)
    ens = Ensemble(tuple(ClusterSet(d.labels()) for d in datasets), weights)
    base = a.base if a.base >= 0 else select_base(ens)
    res = aggregate(ens, base)
    out = datasets[base].with_columns(label=list(res.final_labels.labels),
                                      uncertainty=[round(float(u), 6) for u in res.uncertainty])
    _write(a.output, write_cluster_csv(out, a.noise_label))
    print(f"base {base}, mean uncertainty {res.mean_uncertainty:.3f}%")


def _cmd_compare(a):
    keys = tuple(k.strip() for k in a.keys.split(",") if k.strip())
    rep = compare_regionalisations(a.file_a, a.file_b, keys, a.label_column,
                                   a.noise_label_a, a.noise_label_b, a.drop_noise)
    sys.stdout.write(rows_to_csv([rep]))


def _cmd_stats(a):
    ds = read_grid(a.input, a.noise_label, require_all=not a.raw)
    for name, s in dataset_stats(ds).items():
        print(f"{name}: mean={s.mean:.6g} min={s.min:.6g} max={s.max:.6g} "
              f"missing={100 * s.missing_fraction:.2f}%")
    for key, value in label_file_stats(ds).items():
        print(f"{key}: {value:.6g}" if isinstance(value, float) else f"{key}: {value}")


def _cmd_synth(a):
    ds = blob_dataset(BlobConfig(n_points=a.n, n_blobs=a.blobs, sigma=a.sigma, seed=a.seed))
    _write(a.output, write_cluster_csv(ds))


def _cmd_run(a):
    overrides = {f.name: getattr(a, f.name) for f in fields(PipelineConfig)}
    if a.manifest:
        cfg = replace(config_from_manifest(a.manifest),
                      **{k: v for k, v in overrides.items() if v is not None})
        cfg.validate()
    else:
        cfg = load_config(a.config, overrides)
    if not cfg.input:
        raise UsageError("run needs an input file (--input or config key input)")
    run_pipeline(cfg, log=lambda msg: print(msg, file=sys.stderr))


HANDLERS = {"ingest": _cmd_ingest, "impute": _cmd_impute, "embed": _cmd_embed,
            "cluster": _cmd_cluster, "sweep": _cmd_sweep, "nemi": _cmd_nemi, "score": _cmd_score,
            "compare": _cmd_compare, "stats": _cmd_stats, "synth": _cmd_synth, "run": _cmd_run}


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    if isinstance(exc, DegenerateError):
        return EXIT_DEGENERATE
    if isinstance(exc, (NemiError, ValueError, OSError, KeyError)):
        return EXIT_DATA
    raise exc


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        HANDLERS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except Exception as exc:
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
