"""Diversity, disparity and fragmentation-ratio metrics on embedding matrices.

Within-group diversity is the inverse of the expected Gaussian-kernel
similarity over ordered distinct-index pairs:

    S_diversity(D_i) = 1 / E_{u,v ~ D_i, u != v} exp(-t * ||u - v||^2)

Cross-group disparity inverts the average of all ordered cross-group
expectations:

    S_disparity = m (m-1) / sum_{i != j} E_{u ~ D_i, v ~ D_j} exp(-t * ||u - v||^2)

and the fragmentation ratio is S_disparity divided by an aggregate of
per-group diversities (arithmetic mean by default, geometric optional).
Rows are expected to be unit-normalized before any metric call.

Determinism contract: exact-mode kernel sums are accumulated over rows in a
canonical content order, in fixed-size chunks reduced in chunk order, so
results are bit-identical regardless of worker count and of input row
permutations. Subsampled estimates are a pure function of the configured
seed.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from .errors import InsufficientDataError, SingletonGroupWarning, ValidationError

DEFAULT_TEMPERATURES = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
HIGHLIGHT_TEMPERATURE = 20.0  # conventional reporting temperature
CHUNK_ROWS = 512
SAMPLE_BLOCK = 1 << 16

THREADS_ENV_VAR = "FRAGSCOPE_THREADS"

Aggregation = Literal["mean", "geomean"]


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else FRAGSCOPE_THREADS, else CPU count."""
    if threads is None:
        env = os.environ.get(THREADS_ENV_VAR, "").strip()
        if env:
            try:
                threads = int(env)
            except ValueError as exc:
                raise ValidationError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}") from exc
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValidationError(f"thread count must be >= 1, got {threads}")
    return threads


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Row matrix of feature vectors; `normalized` asserts unit row norms."""

    vectors: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise ValidationError(f"vectors must be a non-empty 2-D matrix, got shape {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise ValidationError("vectors must be finite")
        if self.normalized:
            norms = np.linalg.norm(vectors, axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > 1e-6)
            if bad.size:
                raise ValidationError(
                    f"normalized=True but row {int(bad[0])} has norm {norms[bad[0]]!r}"
                )
        vectors = vectors.copy()
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def normalize_rows(e: EmbeddingSet) -> EmbeddingSet:
    """Scale every row to unit Euclidean norm; rejects zero-norm rows."""
    norms = np.linalg.norm(e.vectors, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValidationError(f"cannot normalize zero-norm row at index {int(zero[0])}")
    return EmbeddingSet(e.vectors / norms[:, None], normalized=True)


@dataclass(frozen=True, eq=False)
class Partition:
    """Per-row sub-dataset labels with derived index groups (first-appearance order)."""

    labels: tuple[str, ...]
    groups: dict[str, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        labels = tuple(str(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValidationError("partition needs at least one row label")
        groups: dict[str, list[int]] = {}
        for i, lab in enumerate(labels):
            groups.setdefault(lab, []).append(i)
        object.__setattr__(
            self, "groups", {lab: np.array(idx, dtype=np.intp) for lab, idx in groups.items()}
        )

    @property
    def group_order(self) -> tuple[str, ...]:
        return tuple(self.groups.keys())

    @property
    def m(self) -> int:
        return len(self.groups)


@dataclass(frozen=True)
class EstimatorConfig:
    """Pair-expectation estimator: exact enumeration or seeded subsampling."""

    mode: Literal["exact", "subsample"] = "exact"
    pair_budget: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("exact", "subsample"):
            raise ValidationError(f"estimator mode must be 'exact' or 'subsample', got {self.mode!r}")
        if self.mode == "subsample" and (self.pair_budget is None or self.pair_budget < 1):
            raise ValidationError("subsample mode requires pair_budget >= 1")


def _canonical_order(x: np.ndarray) -> np.ndarray:
    """Row order sorted by content, so sums do not depend on input row order."""
    return x[np.lexsort(x.T[::-1])]


def _check_temperature(t: float) -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0.0:
        raise ValidationError(f"temperature must be finite and >= 0, got {t!r}")
    return t


def _chunk_kernel_sum(
    x: np.ndarray, y: np.ndarray, t: float, start: int, stop: int, cross: bool
) -> float:
    """Kernel sum of rows [start, stop) of x against all of y.

    When cross is False, x and y are the same matrix and the diagonal cells
    are zeroed before summing (within-group pairs are distinct-index only).
    """
    block = x[start:stop]
    d2 = (
        np.einsum("ij,ij->i", block, block)[:, None]
        + np.einsum("ij,ij->i", y, y)[None, :]
        - 2.0 * (block @ y.T)
    )
    np.clip(d2, 0.0, None, out=d2)
    k = np.exp(-t * d2)
    if not cross:
        k[np.arange(stop - start), np.arange(start, stop)] = 0.0
    return float(k.sum())


def _pair_kernel_sum(x: np.ndarray, y: np.ndarray | None, t: float, threads: int) -> float:
    """Deterministic chunked kernel sum; y=None means within-x distinct pairs."""
    cross = y is not None
    target = y if cross else x
    starts = range(0, x.shape[0], CHUNK_ROWS)

    def work(start: int) -> float:
        return _chunk_kernel_sum(x, target, t, start, min(start + CHUNK_ROWS, x.shape[0]), cross)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(work, starts))
    else:
        partials = [work(s) for s in starts]
    # Reduce in chunk order; chunk boundaries never depend on the worker count.
    total = 0.0
    for p in partials:
        total += p
    return total


def _subsample_kernel_mean_within(
    x: np.ndarray, t: float, budget: int, rng: np.random.Generator
) -> float:
    n = x.shape[0]
    i = rng.integers(0, n, size=budget)
    off = rng.integers(1, n, size=budget)
    j = (i + off) % n
    return _sampled_kernel_mean(x[i], x[j], t)


def _subsample_kernel_mean_cross(
    xi: np.ndarray, xj: np.ndarray, t: float, budget: int, rng: np.random.Generator
) -> float:
    a = rng.integers(0, xi.shape[0], size=budget)
    b = rng.integers(0, xj.shape[0], size=budget)
    return _sampled_kernel_mean(xi[a], xj[b], t)


def _sampled_kernel_mean(a: np.ndarray, b: np.ndarray, t: float) -> float:
    total = 0.0
    for start in range(0, a.shape[0], SAMPLE_BLOCK):
        diff = a[start : start + SAMPLE_BLOCK] - b[start : start + SAMPLE_BLOCK]
        d2 = np.einsum("ij,ij->i", diff, diff)
        total += float(np.exp(-t * d2).sum())
    return total / a.shape[0]


def _require_normalized(e: EmbeddingSet) -> None:
    if not e.normalized:
        raise ValidationError("embeddings must be row-normalized first (see normalize_rows)")


def kernel_mean_within(
    e: EmbeddingSet,
    group: Sequence[int] | np.ndarray,
    t: float,
    cfg: EstimatorConfig = EstimatorConfig(),
    threads: int | None = None,
) -> float:
    """Mean of exp(-t*||u-v||^2) over ordered distinct-index pairs of a group."""
    _require_normalized(e)
    t = _check_temperature(t)
    idx = np.asarray(group, dtype=np.intp)
    n = idx.shape[0]
    if n < 2:
        raise InsufficientDataError(f"group has {n} row(s); need at least 2 for pair expectations")
    x = _canonical_order(e.vectors[idx])
    if cfg.mode == "exact":
        return _pair_kernel_sum(x, None, t, resolve_threads(threads)) / (n * (n - 1))
    rng = np.random.default_rng(cfg.seed)
    return _subsample_kernel_mean_within(x, t, int(cfg.pair_budget), rng)


def diversity(
    e: EmbeddingSet,
    group: Sequence[int] | np.ndarray,
    t: float,
    cfg: EstimatorConfig = EstimatorConfig(),
    threads: int | None = None,
) -> float:
    """Inverse expected within-group kernel similarity (>= 1, = 1 iff all identical)."""
    mean = kernel_mean_within(e, group, t, cfg, threads)
    if mean <= 0.0:
        raise ValidationError("kernel mean underflowed to 0; temperature too large for this data")
    return 1.0 / mean


def disparity(
    e: EmbeddingSet,
    p: Partition,
    t: float,
    cfg: EstimatorConfig = EstimatorConfig(),
    threads: int | None = None,
) -> float:
    """m(m-1) over the summed ordered cross-group kernel expectations."""
    _require_normalized(e)
    t = _check_temperature(t)
    if len(p.labels) != e.n:
        raise ValidationError(f"partition labels {len(p.labels)} rows, embeddings {e.n} rows")
    m = p.m
    if m < 2:
        raise InsufficientDataError(f"disparity needs at least 2 groups, got {m}")
    order = p.group_order
    mats = {lab: _canonical_order(e.vectors[p.groups[lab]]) for lab in order}
    nthreads = resolve_threads(threads)
    total = 0.0
    if cfg.mode == "exact":
        # E_ij == E_ji exactly (symmetric kernel); compute each unordered pair
        # once in fixed group order and count it for both directions.
        for a in range(m):
            for b in range(a + 1, m):
                xi, xj = mats[order[a]], mats[order[b]]
                e_ij = _pair_kernel_sum(xi, xj, t, nthreads) / (xi.shape[0] * xj.shape[0])
                total += 2.0 * e_ij
    else:
        rng = np.random.default_rng(cfg.seed)
        for a in range(m):
            for b in range(m):
                if a == b:
                    continue
                total += _subsample_kernel_mean_cross(
                    mats[order[a]], mats[order[b]], t, int(cfg.pair_budget), rng
                )
    if total <= 0.0:
        raise ValidationError("kernel sum underflowed to 0; temperature too large for this data")
    return m * (m - 1) / total


def aggregate_diversity(scores: Sequence[float], aggregation: Aggregation = "mean") -> float:
    if not scores:
        raise ValidationError("no diversity scores to aggregate")
    arr = np.asarray(scores, dtype=np.float64)
    if aggregation == "mean":
        return float(arr.mean())
    if aggregation == "geomean":
        return float(np.exp(np.log(arr).mean()))
    raise ValidationError(f"unknown aggregation {aggregation!r}")


def fragmentation_ratio(
    diversity_scores: Sequence[float] | Mapping[str, float],
    disparity_score: float,
    aggregation: Aggregation = "mean",
) -> float:
    """Disparity divided by the aggregated per-group diversity at one temperature."""
    if isinstance(diversity_scores, Mapping):
        diversity_scores = list(diversity_scores.values())
    return disparity_score / aggregate_diversity(diversity_scores, aggregation)


@dataclass(frozen=True)
class MetricReport:
    """Scores for every (group, temperature) plus per-temperature cross metrics."""

    temperatures: tuple[float, ...]
    groups: tuple[str, ...]
    diversity: dict[str, tuple[float, ...]]
    disparity: tuple[float, ...] | None
    ratio: tuple[float, ...] | None
    estimator: EstimatorConfig
    aggregation: Aggregation
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "temperatures": list(self.temperatures),
            "groups": list(self.groups),
            "diversity": {g: list(v) for g, v in self.diversity.items()},
            "disparity": None if self.disparity is None else list(self.disparity),
            "ratio": None if self.ratio is None else list(self.ratio),
            "estimator": {
                "mode": self.estimator.mode,
                "pair_budget": self.estimator.pair_budget,
                "seed": self.estimator.seed,
            },
            "aggregation": self.aggregation,
            "warnings": list(self.warnings),
        }

    def to_csv_rows(self) -> list[list[str]]:
        rows = [["temperature", "group", "diversity", "disparity", "ratio"]]
        for k, t in enumerate(self.temperatures):
            disp = "" if self.disparity is None else repr(self.disparity[k])
            rat = "" if self.ratio is None else repr(self.ratio[k])
            for g in self.groups:
                rows.append([repr(t), g, repr(self.diversity[g][k]), disp, rat])
        return rows


def temperature_sweep(
    e: EmbeddingSet,
    p: Partition,
    temperatures: Sequence[float] = DEFAULT_TEMPERATURES,
    cfg: EstimatorConfig = EstimatorConfig(),
    aggregation: Aggregation = "mean",
    threads: int | None = None,
) -> MetricReport:
    """Evaluate diversity/disparity/ratio over a temperature grid.

    Singleton groups are scored 1.0 with a warning instead of failing, so
    sweeps stay total over corpora with tiny sub-datasets. Partitions with a
    single group get null disparity/ratio.
    """
    if len(temperatures) == 0:
        raise ValidationError("temperature grid must be non-empty")
    temps = tuple(_check_temperature(t) for t in temperatures)
    if len(p.labels) != e.n:
        raise ValidationError(f"partition labels {len(p.labels)} rows, embeddings {e.n} rows")
    notes: list[str] = []
    div: dict[str, tuple[float, ...]] = {}
    for lab in p.group_order:
        idx = p.groups[lab]
        if idx.shape[0] < 2:
            warnings.warn(
                f"group {lab!r} has a single row; diversity defined as 1.0",
                SingletonGroupWarning,
                stacklevel=2,
            )
            notes.append(f"singleton group {lab!r}: diversity defined as 1.0")
            div[lab] = tuple(1.0 for _ in temps)
        else:
            div[lab] = tuple(diversity(e, idx, t, cfg, threads) for t in temps)
    if p.m >= 2:
        disp = tuple(disparity(e, p, t, cfg, threads) for t in temps)
        rat = tuple(
            fragmentation_ratio([div[g][k] for g in p.group_order], disp[k], aggregation)
            for k in range(len(temps))
        )
    else:
        notes.append("single group: disparity and ratio undefined")
        disp = None
        rat = None
    return MetricReport(
        temperatures=temps,
        groups=p.group_order,
        diversity=div,
        disparity=disp,
        ratio=rat,
        estimator=cfg,
        aggregation=aggregation,
        warnings=tuple(notes),
    )
