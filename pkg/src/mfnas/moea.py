"""NSGA-II machinery: dominance, sorting, crowding, selection, hypervolume.

Both objectives are minimized: f1 is the validation error rate, f2 the
parameter count. Dominance uses raw values (scale-invariant); crowding and
hypervolume normalize internally.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .genome import Genome

logger = logging.getLogger(__name__)


class ObjectiveVector(NamedTuple):
    f1: float
    f2: float


@dataclass(frozen=True)
class RankInfo:
    front: int
    crowding: float


class InsufficientPoolError(ValueError):
    pass


def dominates(a: ObjectiveVector, b: ObjectiveVector) -> bool:
    return a != b and a.f1 <= b.f1 and a.f2 <= b.f2


def fast_non_dominated_sort(points: Sequence[ObjectiveVector]) -> list[int]:
    """1-based front index per point; front 1 is the non-dominated set."""
    n = len(points)
    dominated_by: list[list[int]] = [[] for _ in range(n)]
    domination_count = [0] * n
    fronts = [0] * n
    current = []
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(points[p], points[q]):
                dominated_by[p].append(q)
            elif dominates(points[q], points[p]):
                domination_count[p] += 1
        if domination_count[p] == 0:
            fronts[p] = 1
            current.append(p)
    level = 1
    while current:
        nxt = []
        for p in current:
            for q in dominated_by[p]:
                domination_count[q] -= 1
                if domination_count[q] == 0:
                    fronts[q] = level + 1
                    nxt.append(q)
        level += 1
        current = nxt
    return fronts


def crowding_distance(front: Sequence[ObjectiveVector]) -> list[float]:
    """Boundary points get +inf; interior points sum normalized neighbor gaps
    per objective. A zero objective range contributes nothing."""
    n = len(front)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    distance = [0.0] * n
    for objective in range(2):
        order = sorted(range(n), key=lambda i: front[i][objective])
        lo = front[order[0]][objective]
        hi = front[order[-1]][objective]
        distance[order[0]] = math.inf
        distance[order[-1]] = math.inf
        span = hi - lo
        if span <= 0:
            continue
        for rank in range(1, n - 1):
            i = order[rank]
            if math.isinf(distance[i]):
                continue
            gap = front[order[rank + 1]][objective] - front[order[rank - 1]][objective]
            distance[i] += gap / span
    return distance


def _pool_objectives(pool: Sequence[Genome]) -> list[ObjectiveVector]:
    return [ObjectiveVector(*g.objectives()) for g in pool]


def rank_population(pop: Sequence[Genome]) -> list[RankInfo]:
    """Front number and crowding distance per individual, for tournaments."""
    points = _pool_objectives(pop)
    fronts = fast_non_dominated_sort(points)
    info: list[RankInfo | None] = [None] * len(pop)
    for level in sorted(set(fronts)):
        idx = [i for i in range(len(pop)) if fronts[i] == level]
        crowd = crowding_distance([points[i] for i in idx])
        for i, c in zip(idx, crowd):
            info[i] = RankInfo(front=level, crowding=c)
    return info  # type: ignore[return-value]


def environment_selection(
    pool: Sequence[Genome], n: int
) -> tuple[list[Genome], list[Genome]]:
    """Keep whole fronts while they fit, then the highest-crowding members of
    the split front; ties broken by insertion order."""
    if len(pool) < n:
        raise InsufficientPoolError(f"pool of {len(pool)} cannot fill {n} survivors")
    points = _pool_objectives(pool)
    fronts = fast_non_dominated_sort(points)
    survivors_idx: list[int] = []
    level = 1
    while True:
        idx = [i for i in range(len(pool)) if fronts[i] == level]
        if not idx:
            break
        if len(survivors_idx) + len(idx) <= n:
            survivors_idx.extend(idx)
            if len(survivors_idx) == n:
                break
        else:
            crowd = crowding_distance([points[i] for i in idx])
            # Stable sort keeps insertion order among equal crowding values.
            by_crowd = sorted(range(len(idx)), key=lambda j: -crowd[j])
            survivors_idx.extend(idx[j] for j in by_crowd[: n - len(survivors_idx)])
            break
        level += 1
    chosen = set(survivors_idx)
    survivors = [pool[i] for i in sorted(survivors_idx)]
    eliminated = [pool[i] for i in range(len(pool)) if i not in chosen]
    return survivors, eliminated


def binary_tournament(
    pop: Sequence[Genome],
    rank_info: Sequence[RankInfo],
    n: int,
    rng: np.random.Generator,
) -> list[Genome]:
    """n winners, each from two uniform draws: lower front wins, then higher
    crowding, then a fair coin."""
    winners = []
    for _ in range(n):
        i = int(rng.integers(len(pop)))
        j = int(rng.integers(len(pop)))
        a, b = rank_info[i], rank_info[j]
        if a.front != b.front:
            pick = i if a.front < b.front else j
        elif a.crowding != b.crowding:
            pick = i if a.crowding > b.crowding else j
        else:
            pick = i if rng.random() < 0.5 else j
        winners.append(pop[pick])
    return winners


def hypervolume(points: Sequence[ObjectiveVector], ref: ObjectiveVector) -> float:
    """Exact 2-objective hypervolume by sort-and-sweep. Points not dominating
    the reference are skipped (and reported via the log)."""
    usable = [p for p in points if p.f1 <= ref.f1 and p.f2 <= ref.f2]
    skipped = len(points) - len(usable)
    if skipped:
        logger.warning("hypervolume: skipped %d point(s) outside the reference box", skipped)
    if not usable:
        return 0.0
    usable.sort(key=lambda p: (p.f1, p.f2))
    hv = 0.0
    ceiling = ref.f2
    for p in usable:
        if p.f2 < ceiling:
            hv += (ref.f1 - p.f1) * (ceiling - p.f2)
            ceiling = p.f2
    return hv


def normalized_hypervolume(fronts: Sequence[Sequence[ObjectiveVector]]) -> list[float]:
    """HV of each front after a common rescale: f1 is already in [0,1], f2 is
    divided by 1.1x the max parameter count across all fronts; the reference
    point is (1, 1) in the scaled space."""
    max_f2 = max((p.f2 for front in fronts for p in front), default=0.0)
    scale = 1.1 * max_f2 if max_f2 > 0 else 1.0
    ref = ObjectiveVector(1.0, 1.0)
    values = []
    for front in fronts:
        scaled = [ObjectiveVector(p.f1, p.f2 / scale) for p in front]
        values.append(hypervolume(scaled, ref))
    return values
