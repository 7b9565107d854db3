"""Self-verification battery: oracle equivalence, exposure monotonicity,
partition fidelity, and metric bound checks on seeded random instances.

The battery is what `fairrerank verify` runs and what the acceptance tests
reuse. Failures are reported as structured results, never raised.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .dataset import Interactions, partition_popularity
from .metrics import evaluate_all
from .rerank import RecommendationLists, RerankConfig, fairness_gap, plain_topk, rerank_exact, rerank_oracle
from .synthetic import random_rerank_instance

__all__ = ["CheckOutcome", "run_battery", "DEFAULT_LAMBDA_GRID"]

DEFAULT_LAMBDA_GRID = tuple(i / 10 for i in range(21))  # 0.0, 0.1, ..., 2.0


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    passed: bool
    detail: str
    seconds: float


def _instances(count: int, seed: int):
    rng = np.random.default_rng(seed)
    for index in range(count):
        yield random_rerank_instance(rng, quantized=(index % 2 == 1))


def _check_oracle_equivalence(count: int, seed: int, tie_break: str) -> CheckOutcome:
    """Exact solver vs exhaustive oracle: objective within 1e-9 and the
    selected sets identical on every (instance, lambda) pair; the lambda=0
    selection must equal the plain top-k of the raw scores."""
    start = time.perf_counter()
    checked = 0
    for idx, inst in enumerate(_instances(count, seed)):
        cfg0 = RerankConfig(k=inst.k, lam=0.0)
        baseline = plain_topk(inst.scores, inst.k)
        for lam in DEFAULT_LAMBDA_GRID:
            cfg = RerankConfig(k=inst.k, lam=lam)
            fast = rerank_exact(inst.scores, inst.part, cfg, tie_break=tie_break)
            slow = rerank_oracle(inst.scores, inst.part, cfg)
            if abs(fast.objective - slow.objective) > 1e-9:
                return CheckOutcome(
                    "oracle_equivalence",
                    False,
                    f"instance {idx} lambda={lam:g}: objective gap "
                    f"{abs(fast.objective - slow.objective):.3e}",
                    time.perf_counter() - start,
                )
            for u in range(fast.num_users):
                if set(fast.items[u].tolist()) != set(slow.items[u].tolist()):
                    return CheckOutcome(
                        "oracle_equivalence",
                        False,
                        f"instance {idx} lambda={lam:g} user {u}: sets differ "
                        f"{sorted(fast.items[u].tolist())} vs {sorted(slow.items[u].tolist())}",
                        time.perf_counter() - start,
                    )
            checked += 1
        zero = rerank_exact(inst.scores, inst.part, cfg0, tie_break=tie_break)
        if not np.array_equal(zero.items, baseline.items):
            return CheckOutcome(
                "oracle_equivalence",
                False,
                f"instance {idx}: lambda=0 selection differs from plain top-k",
                time.perf_counter() - start,
            )
    return CheckOutcome(
        "oracle_equivalence",
        True,
        f"{count} instances x {len(DEFAULT_LAMBDA_GRID)} lambdas ({checked} comparisons)",
        time.perf_counter() - start,
    )


def _check_monotone_exposure(count: int, seed: int, tie_break: str) -> CheckOutcome:
    """Short-head selections never increase along an ascending lambda grid,
    per user and hence in aggregate, and the fairness gap never increases;
    past num_users * score range the short-head count is exactly zero and
    the gap is exactly -k."""
    start = time.perf_counter()
    for idx, inst in enumerate(_instances(count, seed)):
        m, k = inst.scores.num_users, inst.k
        previous_user_short = None
        previous_gap = None
        for lam in DEFAULT_LAMBDA_GRID:
            lists = rerank_exact(inst.scores, inst.part, RerankConfig(k=k, lam=lam), tie_break=tie_break)
            fairness = fairness_gap(lists, inst.part)
            if fairness.short_count + fairness.long_count != m * k:
                return CheckOutcome(
                    "monotone_exposure",
                    False,
                    f"instance {idx} lambda={lam:g}: exposure identity violated",
                    time.perf_counter() - start,
                )
            if not -k <= fairness.gap <= k:
                return CheckOutcome(
                    "monotone_exposure",
                    False,
                    f"instance {idx} lambda={lam:g}: gap {fairness.gap} out of bounds",
                    time.perf_counter() - start,
                )
            user_short = inst.part.short_head[lists.items].sum(axis=1)
            if previous_user_short is not None and np.any(user_short > previous_user_short):
                worst = int(np.argmax(user_short - previous_user_short))
                return CheckOutcome(
                    "monotone_exposure",
                    False,
                    f"instance {idx} lambda={lam:g}: user {worst} short count rose "
                    f"{int(previous_user_short[worst])} -> {int(user_short[worst])}",
                    time.perf_counter() - start,
                )
            if previous_gap is not None and fairness.gap > previous_gap + 1e-12:
                return CheckOutcome(
                    "monotone_exposure",
                    False,
                    f"instance {idx} lambda={lam:g}: gap rose {previous_gap} -> {fairness.gap}",
                    time.perf_counter() - start,
                )
            previous_user_short = user_short
            previous_gap = fairness.gap
        saturated = rerank_exact(
            inst.scores, inst.part, RerankConfig(k=k, lam=inst.saturating_lambda), tie_break=tie_break
        )
        sat_fair = fairness_gap(saturated, inst.part)
        if sat_fair.short_count != 0 or sat_fair.gap != -k:
            return CheckOutcome(
                "monotone_exposure",
                False,
                f"instance {idx}: saturation failed (short={sat_fair.short_count}, gap={sat_fair.gap})",
                time.perf_counter() - start,
            )
    return CheckOutcome(
        "monotone_exposure", True, f"{count} instances, per-user", time.perf_counter() - start
    )


_CATALOG_EXPECTATIONS = ((2060, 412), (1019, 203), (1189, 237), (1507, 301))


def _check_partition_sizes() -> CheckOutcome:
    """floor(0.2 * n) short-head items for the four reference catalog sizes."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    for n, expected in _CATALOG_EXPECTATIONS:
        users = rng.integers(0, 50, size=3 * n)
        items = rng.integers(0, n, size=3 * n)
        train = Interactions(users, items, np.ones(3 * n), 50, n)
        part = partition_popularity(train, n, ratio=0.2)
        if part.num_short != expected:
            return CheckOutcome(
                "partition_sizes",
                False,
                f"n={n}: got {part.num_short} short-head, expected {expected}",
                time.perf_counter() - start,
            )
    return CheckOutcome(
        "partition_sizes",
        True,
        ", ".join(f"{n}->{s}" for n, s in _CATALOG_EXPECTATIONS),
        time.perf_counter() - start,
    )


def _random_evaluation(rng: np.random.Generator):
    m = int(rng.integers(3, 12))
    n = int(rng.integers(8, 25))
    k = int(rng.integers(2, min(5, n // 2) + 1))
    size = int(rng.integers(m, 4 * m))
    train = Interactions(
        rng.integers(0, m, size=size), rng.integers(0, n, size=size), np.ones(size), m, n
    )
    part = partition_popularity(train, n, ratio=0.2)
    lists = np.stack([rng.choice(n, size=k, replace=False) for _ in range(m)])
    judgments = [set(rng.choice(n, size=int(rng.integers(1, 4)), replace=False).tolist()) for _ in range(m)]
    return RecommendationLists(items=lists.astype(np.int64), num_items=n), judgments, train, part, k


def _check_metric_bounds(count: int, seed: int) -> CheckOutcome:
    """Every bounded report field stays in range over random evaluations
    (EvaluationReport.validate re-checks the exposure identity too)."""
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    for idx in range(count):
        lists, judgments, train, part, k = _random_evaluation(rng)
        try:
            report = evaluate_all(lists, judgments, train, part, k)
            report.validate()
        except ValueError as exc:
            return CheckOutcome(
                "metric_bounds", False, f"evaluation {idx}: {exc}", time.perf_counter() - start
            )
        if not math.isfinite(report.novelty):
            return CheckOutcome(
                "metric_bounds", False, f"evaluation {idx}: non-finite novelty", time.perf_counter() - start
            )
    return CheckOutcome("metric_bounds", True, f"{count} random evaluations", time.perf_counter() - start)


def run_battery(
    instances: int = 200,
    seed: int = 20240,
    tie_break: str = "default",
    metric_evaluations: int = 100,
) -> list[CheckOutcome]:
    """Run all checks; `tie_break` is a test hook that, when set to
    "inverted", must make the equivalence check fail."""
    return [
        _check_oracle_equivalence(instances, seed, tie_break),
        _check_monotone_exposure(max(instances // 4, 25), seed + 1, tie_break),
        _check_partition_sizes(),
        _check_metric_bounds(metric_evaluations, seed + 2),
    ]
