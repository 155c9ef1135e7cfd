"""Alternative similarity metrics and the rank-correlation harness.

The harness evaluates each metric on the matched view pairs of an ambiguity
table, in primary-similarity order, and reports Spearman/Pearson correlation
against the primary metric.  Whether the baselines correlate is reported, not
asserted: with the synthetic embedding world there is no reason to expect the
real-image behaviour of pixel or keypoint metrics.

Tie convention: a constant series has correlation 0 (scipy returns NaN there).
Plot scaling: each metric is min-max mapped onto [0, 1] over its pair range;
a constant metric scales to all zeros.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .ambiguity import AmbiguityTable
from .codebook import cossim
from .so3 import Rotation
from .synthworld import SynthObject, differing_blobs, render_embedding

DEFAULT_MATCH_TOLERANCE = 1e-6


def mse_similarity(view_a: np.ndarray, view_b: np.ndarray) -> float:
    """Negated mean squared error between raw embeddings (larger = more similar)."""
    a = np.asarray(view_a, dtype=float)
    b = np.asarray(view_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(-np.mean((a - b) ** 2))


def blob_match_similarity(
    obj_a: SynthObject,
    r_a: Rotation,
    obj_b: SynthObject,
    r_b: Rotation,
    tolerance: float = DEFAULT_MATCH_TOLERANCE,
) -> float:
    """Fraction of visible blobs whose descriptors match within tolerance.

    Matches count blobs visible in both views with near-equal descriptors;
    the denominator is blobs visible in either view.
    """
    if obj_a.descriptor_dim != obj_b.descriptor_dim:
        raise ValueError("objects must share descriptor dimension")
    if obj_a.n_blobs != obj_b.n_blobs:
        raise ValueError("blob-match similarity requires paired blob clouds")
    vis_a = (obj_a.positions @ r_a.view_direction()) > 0.0
    vis_b = (obj_b.positions @ r_b.view_direction()) > 0.0
    union = vis_a | vis_b
    if not np.any(union):
        return 1.0
    close = np.linalg.norm(obj_a.descriptors - obj_b.descriptors, axis=1) < tolerance
    matched = vis_a & vis_b & close
    return float(np.sum(matched)) / float(np.sum(union))


def _correlation(values: np.ndarray, baseline: np.ndarray):
    if np.ptp(values) == 0.0 or np.ptp(baseline) == 0.0:
        return 0.0, 0.0
    sp = float(stats.spearmanr(values, baseline).statistic)
    pe = float(stats.pearsonr(values, baseline).statistic)
    return sp, pe


def scaled(values: np.ndarray) -> np.ndarray:
    """Affine min-max map onto [0, 1]; constant input maps to zeros."""
    v = np.asarray(values, dtype=float)
    span = np.ptp(v)
    if span == 0.0:
        return np.zeros_like(v)
    return (v - np.min(v)) / span


@dataclass(frozen=True)
class MetricReport:
    metric_names: tuple
    values: dict       # name -> per-pair values in primary-sorted order
    spearman: dict     # name -> correlation vs the primary similarity
    pearson: dict

    def __len__(self) -> int:
        return len(next(iter(self.values.values())))

    def scaled_values(self, name: str) -> np.ndarray:
        return scaled(self.values[name])

    def save_metric_csv(self, name: str, path) -> None:
        sv = self.scaled_values(name)
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["pair_index", "scaled_value"])
            for i, v in enumerate(sv):
                w.writerow([i, f"{v:.17g}"])

    def save_correlations_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["metric", "spearman", "pearson"])
            for name in self.metric_names:
                w.writerow([name, f"{self.spearman[name]:.17g}", f"{self.pearson[name]:.17g}"])


METRIC_NAMES = ("primary", "mse", "blob_match")


def metric_comparison(
    table: AmbiguityTable,
    obj: SynthObject,
    others_by_class: dict,
    metrics=METRIC_NAMES,
) -> MetricReport:
    """Evaluate each metric on every matched pair, in primary-rank order."""
    if len(table) == 0:
        raise ValueError("table is empty")
    unknown = set(metrics) - set(METRIC_NAMES)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    primary = table.raw_similarity
    values = {}
    for name in metrics:
        if name == "primary":
            values[name] = primary.copy()
            continue
        out = np.empty(len(table))
        for i, p in enumerate(table.pairs):
            other = others_by_class[p.matched_class]
            if name == "mse":
                va = render_embedding(obj, p.r_a)
                vb = render_embedding(other, p.r_b)
                out[i] = mse_similarity(va, vb)
            else:
                out[i] = blob_match_similarity(obj, p.r_a, other, p.r_b)
        values[name] = out
    spearman = {}
    pearson = {}
    for name in metrics:
        if name == "primary":
            # Self-correlation is 1 by definition (unless degenerate).
            sp = 0.0 if np.ptp(primary) == 0.0 else 1.0
            spearman[name], pearson[name] = sp, sp
        else:
            spearman[name], pearson[name] = _correlation(values[name], primary)
    return MetricReport(tuple(metrics), values, spearman, pearson)


def noise_robustness_sweep(
    table: AmbiguityTable,
    obj: SynthObject,
    others_by_class: dict,
    sigmas,
    seed: int = 0,
) -> list:
    """Spearman correlation of noisy pair similarities against the clean ranking.

    Returns ``[(sigma, correlation)]``; sigma 0 reproduces the ranking exactly.
    """
    from . import seeding

    if len(list(sigmas)) == 0:
        raise ValueError("need at least one sigma")
    baseline = table.raw_similarity
    results = []
    for si, sigma in enumerate(sigmas):
        if sigma < 0.0:
            raise ValueError("sigma must be >= 0")
        vals = np.empty(len(table))
        for i, p in enumerate(table.pairs):
            other = others_by_class[p.matched_class]
            za = render_embedding(obj, p.r_a, sigma, seeding.rng(seed, "noise-a", si, i))
            zb = render_embedding(other, p.r_b, sigma, seeding.rng(seed, "noise-b", si, i))
            vals[i] = cossim(za, zb)
        if sigma == 0.0:
            corr = 1.0 if np.ptp(baseline) > 0.0 else 0.0
        else:
            corr, _ = _correlation(vals, baseline)
        results.append((float(sigma), float(corr)))
    return results
