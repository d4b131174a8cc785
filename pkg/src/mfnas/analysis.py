"""Rank-correlation studies, fidelity sweeps, and Pareto-front export."""

from __future__ import annotations

import csv
import statistics
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .config import RunConfig, substream
from .decoder import to_dot
from .evaluation import CurveCoefficients, DEFAULT_CURVE, SyntheticEvaluator
from .genome import Genome, to_line
from .moea import ObjectiveVector, fast_non_dominated_sort
from .search import run_baseline, run_search
from .variation import initialize_population

Ranking = list[str]


class RankingInputError(ValueError):
    pass


def _inversions(seq: list[int]) -> int:
    """Merge-sort inversion count (the discordant-pair count for a
    permutation)."""
    if len(seq) < 2:
        return 0
    mid = len(seq) // 2
    left, right = seq[:mid], seq[mid:]
    count = _inversions(left) + _inversions(right)
    merged = []
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            j += 1
            count += len(left) - i
    merged.extend(left[i:])
    merged.extend(right[j:])
    seq[:] = merged
    return count


def kendall_tau(r1: Ranking, r2: Ranking) -> float:
    """tau-a over two total orders of the same ids: (C - D) / (n*(n-1)/2)."""
    if len(r1) != len(r2) or set(r1) != set(r2):
        raise RankingInputError("rankings must order the same id set")
    if len(set(r1)) != len(r1):
        raise RankingInputError("rankings must not repeat ids")
    n = len(r1)
    if n < 2:
        return 1.0
    pos2 = {gid: i for i, gid in enumerate(r2)}
    seq = [pos2[gid] for gid in r1]
    total = n * (n - 1) // 2
    discordant = _inversions(seq)
    return (total - 2 * discordant) / total


def rank_by_error(entries: Sequence[tuple[str, float]]) -> Ranking:
    """Ids by ascending error; ties broken by genome id. Duplicate ids keep
    their first entry (identical genotypes share one evaluation)."""
    seen: dict[str, float] = {}
    for gid, f1 in entries:
        seen.setdefault(gid, f1)
    return [gid for gid, _ in sorted(seen.items(), key=lambda kv: (kv[1], kv[0]))]


def sample_architectures(n_arch: int, seed: int,
                         node_range: tuple[int, int] = (5, 12)) -> list[Genome]:
    """n_arch id-distinct genomes via the diversity-gradient initializer."""
    rng = substream(seed, "init")
    unique: dict[str, Genome] = {}
    while len(unique) < n_arch:
        for g in initialize_population(n_arch, node_range, rng):
            if g.id not in unique:
                unique[g.id] = g
                if len(unique) == n_arch:
                    break
    return list(unique.values())


def ranking_study(n_arch: int, max_epochs: int, seed: int,
                  coeffs: CurveCoefficients = DEFAULT_CURVE) -> list[float]:
    """Kendall's tau between the ranking at each epoch and the final-epoch
    ranking, over synthetically evaluated samples (one value per epoch)."""
    genomes = sample_architectures(n_arch, seed)
    evaluator = SyntheticEvaluator(seed=seed, coeffs=coeffs)
    per_epoch: list[Ranking] = []
    for epochs in range(1, max_epochs + 1):
        entries = [(g.id, evaluator.curve_error(g, epochs)) for g in genomes]
        per_epoch.append(rank_by_error(entries))
    final = per_epoch[-1]
    return [kendall_tau(r, final) for r in per_epoch]


def fidelity_sweep(mf_values: Sequence[int], seeds: Sequence[int],
                   base_config: RunConfig | None = None) -> list[dict]:
    """Full search per fidelity count: cost reduction vs the ladder-free
    baseline (1 - epochs/baseline_epochs) and tau between the final pool's
    fidelity-limited and complete-epoch rankings. Medians across seeds."""
    cfg = base_config if base_config is not None else RunConfig()
    baseline_epochs: dict[int, int] = {}
    for seed in seeds:
        baseline_epochs[seed] = run_baseline(replace(cfg, seed=seed)).total_epochs
    rows = []
    for mf in mf_values:
        reductions, taus, totals = [], [], []
        for seed in seeds:
            result = run_search(replace(cfg, mf=mf, seed=seed))
            totals.append(result.total_epochs)
            reductions.append(1.0 - result.total_epochs / baseline_epochs[seed])
            taus.append(
                kendall_tau(
                    rank_by_error(result.final_pool_pre),
                    rank_by_error(result.final_pool_post),
                )
            )
        rows.append({
            "mf": mf,
            "cost_reduction": statistics.median(reductions),
            "tau": statistics.median(taus),
            "epochs": statistics.median(totals),
            "baseline_epochs": statistics.median(baseline_epochs.values()),
        })
    return rows


FRONT_HEADER = ["id", "f1", "f2", "genome"]


def export_front(pop: Sequence[Genome], directory: Path) -> Path:
    """Write front.csv (all individuals, ascending f1) and one DOT file per
    non-dominated genome into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = sorted(pop, key=lambda g: (g.eval.f1, g.id))
    csv_path = directory / "front.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FRONT_HEADER)
        for g in rows:
            writer.writerow([g.id, repr(g.eval.f1), g.eval.f2, to_line(g)])
    if rows:
        points = [ObjectiveVector(*g.objectives()) for g in rows]
        fronts = fast_non_dominated_sort(points)
        written = set()
        for g, front in zip(rows, fronts):
            if front == 1 and g.id not in written:
                (directory / f"{g.id}.dot").write_text(to_dot(g))
                written.add(g.id)
    return csv_path
