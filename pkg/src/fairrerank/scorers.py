"""Score-matrix producers: built-in baselines plus an import path for
externally computed scores.

Every scorer returns a dense (num_users x num_items) float64 matrix of
predicted preferences wrapped in :class:`ScoreMatrix`. `mask_seen` stamps
train-seen cells with a -inf sentinel so downstream top-K selection can
never return an already-consumed item. All scorers are deterministic
functions of their inputs and seed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .dataset import DataError, Dataset, Interactions, distinct_user_counts
from .util import atomic_write_text

__all__ = [
    "MASKED",
    "ScoreMatrix",
    "MFConfig",
    "popularity_scorer",
    "random_scorer",
    "mf_scorer",
    "train_mf_factors",
    "mf_objective",
    "load_scores",
    "read_scores",
    "write_scores",
    "mask_seen",
]

logger = logging.getLogger(__name__)

MASKED = float("-inf")


@dataclass(frozen=True)
class ScoreMatrix:
    """Dense predicted-preference matrix. Cells equal to MASKED are
    unselectable; every other cell must be finite."""

    values: np.ndarray
    masked_seen: bool = False
    import_coverage: float | None = None

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("score matrix must be 2-dimensional")
        bad = ~np.isfinite(self.values) & ~(self.values == MASKED)
        if bad.any():
            raise ValueError("score matrix contains NaN or +inf entries")

    @property
    def num_users(self) -> int:
        return int(self.values.shape[0])

    @property
    def num_items(self) -> int:
        return int(self.values.shape[1])

    def selectable(self) -> np.ndarray:
        """Boolean mask of cells eligible for selection."""
        return np.isfinite(self.values)


@dataclass(frozen=True)
class MFConfig:
    """Hyperparameters for the confidence-weighted implicit-feedback
    matrix-factorization scorer."""

    latent_dim: int = 32
    regularization: float = 0.05
    iterations: int = 20
    confidence_alpha: float = 40.0
    seed: int = 0

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.regularization <= 0:
            raise ValueError("regularization must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.confidence_alpha <= 0:
            raise ValueError("confidence_alpha must be positive")


def popularity_scorer(train: Interactions) -> ScoreMatrix:
    """Score every item by its distinct-training-user fraction, identically
    for all users. Deliberately popularity-biased."""
    if train.num_items < 1:
        raise ValueError("empty catalog")
    counts = distinct_user_counts(train, train.num_items)
    row = counts.astype(np.float64) / float(train.num_users)
    values = np.tile(row, (train.num_users, 1))
    return ScoreMatrix(values)


def random_scorer(num_users: int, num_items: int, seed: int) -> ScoreMatrix:
    """I.i.d. uniform(0,1) scores from a seeded generator; null-model control."""
    if num_users < 1 or num_items < 1:
        raise ValueError("num_users and num_items must be >= 1")
    rng = np.random.default_rng(seed)
    return ScoreMatrix(rng.random((num_users, num_items)))


def _group_by(index: np.ndarray, companion: np.ndarray, weights: np.ndarray, size: int):
    """Group (companion, weight) arrays by the values of `index` (0..size-1).
    Returns two lists of arrays, one pair per index value."""
    order = np.argsort(index, kind="stable")
    sorted_index = index[order]
    starts = np.searchsorted(sorted_index, np.arange(size), side="left")
    stops = np.searchsorted(sorted_index, np.arange(size), side="right")
    comp_sorted = companion[order]
    w_sorted = weights[order]
    return (
        [comp_sorted[a:b] for a, b in zip(starts, stops)],
        [w_sorted[a:b] for a, b in zip(starts, stops)],
    )


def _solve_half(
    this: np.ndarray,
    other: np.ndarray,
    seen: list[np.ndarray],
    seen_w: list[np.ndarray],
    reg: float,
    alpha: float,
    threads: int,
) -> None:
    """One ALS half-step: re-solve every row of `this` against the frozen
    `other` factors. Row solves are independent, so the result does not
    depend on how rows are distributed over threads."""
    dim = other.shape[1]
    gram = other.T @ other + reg * np.eye(dim)

    def solve_range(lo: int, hi: int) -> None:
        for r in range(lo, hi):
            cols = seen[r]
            if len(cols) == 0:
                # all preference targets are 0, so the exact solve is 0
                this[r] = 0.0
                continue
            conf_minus_one = alpha * seen_w[r]
            factors = other[cols]
            a = gram + (factors.T * conf_minus_one) @ factors
            b = factors.T @ (1.0 + conf_minus_one)
            this[r] = np.linalg.solve(a, b)

    nrows = this.shape[0]
    if threads <= 1 or nrows < 2 * threads:
        solve_range(0, nrows)
        return
    bounds = np.linspace(0, nrows, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(solve_range, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
        for fut in futures:
            fut.result()


def train_mf_factors(
    train: Interactions, cfg: MFConfig = MFConfig(), threads: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Alternating least squares on the implicit-feedback objective with
    confidence 1 + alpha*w on observed cells and binary preference targets.

    Returns the (user_factors, item_factors) pair after cfg.iterations full
    iterations (user half-step then item half-step each). Deterministic for
    a fixed seed; raises RuntimeError naming the iteration if factors go
    non-finite.
    """
    m, n = train.num_users, train.num_items
    rng = np.random.default_rng(cfg.seed)
    user_factors = rng.standard_normal((m, cfg.latent_dim)) * 0.01
    item_factors = rng.standard_normal((n, cfg.latent_dim)) * 0.01

    user_seen, user_w = _group_by(train.users, train.items, train.weights, m)
    item_seen, item_w = _group_by(train.items, train.users, train.weights, n)

    for it in range(cfg.iterations):
        _solve_half(user_factors, item_factors, user_seen, user_w, cfg.regularization, cfg.confidence_alpha, threads)
        _solve_half(item_factors, user_factors, item_seen, item_w, cfg.regularization, cfg.confidence_alpha, threads)
        if not (np.isfinite(user_factors).all() and np.isfinite(item_factors).all()):
            raise RuntimeError(f"non-finite factor values at ALS iteration {it}")
    return user_factors, item_factors


def mf_objective(
    train: Interactions, user_factors: np.ndarray, item_factors: np.ndarray, cfg: MFConfig
) -> float:
    """Weighted regularized squared loss of a factor pair: confidence-weighted
    reconstruction error over all (user, item) cells plus the L2 penalty.
    Used as the independent check that ALS iterations never increase it."""
    pred = user_factors @ item_factors.T
    pref = np.zeros_like(pred)
    conf = np.ones_like(pred)
    pref[train.users, train.items] = 1.0
    conf[train.users, train.items] += cfg.confidence_alpha * train.weights
    loss = float(np.sum(conf * (pref - pred) ** 2))
    penalty = cfg.regularization * (float(np.sum(user_factors**2)) + float(np.sum(item_factors**2)))
    return loss + penalty


def mf_scorer(train: Interactions, cfg: MFConfig = MFConfig(), threads: int = 1) -> ScoreMatrix:
    """Matrix-factorization scorer: R = user_factors @ item_factors.T."""
    user_factors, item_factors = train_mf_factors(train, cfg, threads)
    return ScoreMatrix(user_factors @ item_factors.T)


def load_scores(
    source: Iterable[str], ds: Dataset, fill: float = 0.0, delimiter: str = "\t"
) -> ScoreMatrix:
    """Import externally computed scores from "user_key<sep>item_key<sep>score"
    lines. Cells absent from the file take `fill` (use -inf to make them
    unselectable); later duplicates overwrite earlier ones. The fraction of
    cells provided is recorded on the result and logged when below 1.
    """
    m, n = ds.num_users, ds.num_items
    values = np.full((m, n), fill, dtype=np.float64)
    provided = np.zeros((m, n), dtype=bool)
    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        parts = line.split(delimiter)
        if len(parts) != 3:
            raise DataError(f"expected 3 fields, got {len(parts)}", lineno)
        user_key, item_key, score_text = (p.strip() for p in parts)
        if user_key not in ds.user_index:
            raise DataError(f"unknown user key {user_key!r}", lineno)
        if item_key not in ds.item_index:
            raise DataError(f"unknown item key {item_key!r}", lineno)
        try:
            score = float(score_text)
        except ValueError:
            raise DataError(f"unparseable score {score_text!r}", lineno) from None
        if not math.isfinite(score):
            raise DataError(f"non-finite score {score_text!r}", lineno)
        u = ds.user_index[user_key]
        i = ds.item_index[item_key]
        values[u, i] = score
        provided[u, i] = True
    coverage = float(provided.sum()) / float(m * n)
    if coverage < 1.0:
        logger.warning(
            "score import covered %.1f%% of cells; missing cells filled with %r", 100.0 * coverage, fill
        )
    return ScoreMatrix(values, import_coverage=coverage)


def read_scores(path: Path | str, ds: Dataset, fill: float = 0.0, delimiter: str = "\t") -> ScoreMatrix:
    with open(path, "r", encoding="utf-8") as fh:
        return load_scores(fh, ds, fill=fill, delimiter=delimiter)


def write_scores(path: Path | str, matrix: ScoreMatrix, ds: Dataset, delimiter: str = "\t") -> Path:
    """Export a score matrix as one "user item score" triple per cell.
    Sentinel (masked/absent) cells are omitted; they re-import as fill."""
    lines = []
    for u in range(matrix.num_users):
        row = matrix.values[u]
        for i in range(matrix.num_items):
            if math.isfinite(row[i]):
                lines.append(delimiter.join((ds.user_keys[u], ds.item_keys[i], repr(float(row[i])))))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def mask_seen(matrix: ScoreMatrix, train: Interactions) -> ScoreMatrix:
    """Stamp train-seen cells with the MASKED sentinel; unseen cells are
    unchanged bit-for-bit and masking is idempotent."""
    if matrix.num_users != train.num_users or matrix.num_items != train.num_items:
        raise ValueError(
            f"score matrix is {matrix.num_users}x{matrix.num_items} but train universe is "
            f"{train.num_users}x{train.num_items}"
        )
    values = matrix.values.copy()
    values[train.users, train.items] = MASKED
    return ScoreMatrix(values, masked_seen=True, import_coverage=matrix.import_coverage)
