"""The full search loop and its complete-epoch baseline twin.

Both loops share initialization, tournament mating, and offspring generation;
the search routes selection through the fidelity ladder and archive while the
baseline evaluates everything at complete epochs under plain NSGA-II.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .config import RunConfig, derived_seed, substream
from .evaluation import EvaluatorBase, ExternalEvaluator, SyntheticEvaluator
from .genome import Genome
from .moea import (
    ObjectiveVector,
    binary_tournament,
    environment_selection,
    hypervolume,
    rank_population,
)
from .multifidelity import Archive, FidelityState, mf_selection
from .variation import initialize_population, make_offspring

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    population: list[Genome]
    archive: Archive | None
    events: list[dict]
    total_epochs: int
    usage: dict
    # (id, f1) of the finalized pool before/after complete-epoch training;
    # the baseline has no pre-finalization view, so pre == post there.
    final_pool_pre: list[tuple[str, float]] = field(default_factory=list)
    final_pool_post: list[tuple[str, float]] = field(default_factory=list)


def make_evaluator(config: RunConfig) -> EvaluatorBase:
    """'synthetic' (noise keyed to the run seed), 'synthetic:<seed>', or
    'exec:<command line>' spawning an external trainer."""
    spec = config.evaluator
    if spec == "synthetic":
        return SyntheticEvaluator(seed=derived_seed(config.seed, "synthetic-noise"))
    if spec.startswith("synthetic:"):
        return SyntheticEvaluator(seed=int(spec.split(":", 1)[1]))
    if spec.startswith("exec:"):
        return ExternalEvaluator(command=spec.split(":", 1)[1])
    raise ValueError(f"unknown evaluator spec {spec!r}")


def _hv_record(pop: list[Genome], max_f2: float) -> tuple[float, list[float]]:
    ref = ObjectiveVector(1.0, 1.1 * max_f2 if max_f2 > 0 else 1.0)
    points = [ObjectiveVector(*g.objectives()) for g in pop]
    return hypervolume(points, ref), [ref.f1, ref.f2]


def _counter_snapshot(pop: list[Genome]) -> dict[str, dict[str, int]]:
    return {
        g.id: {"ss": g.counters.ss, "ms": g.counters.ms, "me": g.counters.me} for g in pop
    }


def run_search(config: RunConfig, evaluator: EvaluatorBase | None = None) -> RunResult:
    """Execute the multi-fidelity search; returns the final population plus
    the per-generation event stream and budget usage."""
    config.validate()
    owns_evaluator = evaluator is None
    if evaluator is None:
        evaluator = make_evaluator(config)
    try:
        rng_init = substream(config.seed, "init")
        rng_var = substream(config.seed, "variation")
        rng_tour = substream(config.seed, "tournament")

        population = initialize_population(config.pop_size, config.node_range, rng_init)
        population = [evaluator.evaluate(g, 1) for g in population]
        archive = Archive(members=(), capacity=config.capacity)
        state = FidelityState(
            s=1, mf=config.mf, gen_budget=config.gen_budget,
            complete_epochs=config.complete_epochs,
        )
        max_f2 = max(g.eval.f2 for g in population)

        events: list[dict] = []
        final_pre: list[tuple[str, float]] = []
        for g in range(1, config.gen_budget + 1):
            ranks = rank_population(population)
            parents = binary_tournament(population, ranks, config.pop_size, rng_tour)
            offspring = make_offspring(parents, config.variation, rng_var)
            offspring = [evaluator.evaluate(x, state.s) for x in offspring]
            trace: dict = {}
            population, archive, state = mf_selection(
                population, offspring, archive, g, state, evaluator, trace
            )
            max_f2 = max([max_f2] + [x.eval.f2 for x in population])
            hv, hv_ref = _hv_record(population, max_f2)
            events.append({
                "gen": g,
                "s": state.s,
                "tick": trace["tick"],
                "survivor_ids": [x.id for x in population],
                "archive_ids": archive.ids(),
                "counters": _counter_snapshot(population + list(archive.members)),
                "epochs_total": evaluator.store.total_epochs,
                "hv": hv,
                "hv_ref": hv_ref,
            })
            if "pre_final" in trace:
                final_pre = trace["pre_final"]
            logger.info(
                "gen %d: s=%d tick=%s hv=%.4f epochs=%d",
                g, state.s, trace["tick"], hv, evaluator.store.total_epochs,
            )

        final_pool = population + list(archive.members)
        return RunResult(
            population=population,
            archive=archive,
            events=events,
            total_epochs=evaluator.store.total_epochs,
            usage=evaluator.store.usage(),
            final_pool_pre=final_pre,
            final_pool_post=[(x.id, x.eval.f1) for x in final_pool],
        )
    finally:
        if owns_evaluator:
            evaluator.close()


def run_baseline(config: RunConfig, evaluator: EvaluatorBase | None = None) -> RunResult:
    """Same loop without the ladder: every evaluation runs to complete epochs
    and selection is plain NSGA-II (no archive)."""
    config.validate()
    owns_evaluator = evaluator is None
    if evaluator is None:
        evaluator = make_evaluator(config)
    try:
        rng_init = substream(config.seed, "init")
        rng_var = substream(config.seed, "variation")
        rng_tour = substream(config.seed, "tournament")

        population = initialize_population(config.pop_size, config.node_range, rng_init)
        population = [evaluator.evaluate(g, config.complete_epochs) for g in population]
        max_f2 = max(g.eval.f2 for g in population)

        events: list[dict] = []
        for g in range(1, config.gen_budget + 1):
            ranks = rank_population(population)
            parents = binary_tournament(population, ranks, config.pop_size, rng_tour)
            offspring = make_offspring(parents, config.variation, rng_var)
            offspring = [evaluator.evaluate(x, config.complete_epochs) for x in offspring]
            population, _ = environment_selection(population + offspring, config.pop_size)
            max_f2 = max([max_f2] + [x.eval.f2 for x in population])
            hv, hv_ref = _hv_record(population, max_f2)
            events.append({
                "gen": g,
                "survivor_ids": [x.id for x in population],
                "epochs_total": evaluator.store.total_epochs,
                "hv": hv,
                "hv_ref": hv_ref,
            })
            logger.info("gen %d (baseline): hv=%.4f epochs=%d",
                        g, hv, evaluator.store.total_epochs)

        snapshot = [(x.id, x.eval.f1) for x in population]
        return RunResult(
            population=population,
            archive=None,
            events=events,
            total_epochs=evaluator.store.total_epochs,
            usage=evaluator.store.usage(),
            final_pool_pre=snapshot,
            final_pool_post=snapshot,
        )
    finally:
        if owns_evaluator:
            evaluator.close()
