"""Multi-fidelity evaluation based selection.

Each generation runs plain NSGA-II environment selection first, then ranks
the eliminated individuals together with the archive by four criteria and
truncates into the archive. Every floor(gen_budget/mf) generations the shared
epoch level rises by one and the survivors plus the archive are resumed,
re-ranked, and re-split; at the final generation everyone left is trained to
complete epochs before the last selection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

from .genome import Genome, UnevaluatedGenomeError
from .moea import environment_selection

if TYPE_CHECKING:
    from .evaluation import Evaluator


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Archive:
    """Capacity-bounded store of eliminated-but-promising individuals."""

    members: tuple[Genome, ...] = ()
    capacity: int = 0

    def ids(self) -> list[str]:
        return [g.id for g in self.members]


@dataclass(frozen=True)
class FidelityState:
    """Shared epoch level s on a ladder of mf fidelities over gen_budget
    generations; complete_epochs is the finalization budget."""

    s: int
    mf: int
    gen_budget: int
    complete_epochs: int

    def tick_interval(self) -> int:
        interval = self.gen_budget // self.mf
        if interval == 0:
            raise ConfigurationError(
                f"mf={self.mf} exceeds gen_budget={self.gen_budget}: tick interval would be 0"
            )
        return interval


def record_env_selection(
    survivors: Sequence[Genome], eliminated: Sequence[Genome]
) -> tuple[list[Genome], list[Genome]]:
    """Survivors gain one single-evaluation survival; first-time eliminated
    individuals get their elimination counter started."""
    new_survivors = [
        replace(g, counters=replace(g.counters, ss=g.counters.ss + 1)) for g in survivors
    ]
    new_eliminated = [
        replace(g, counters=replace(g.counters, me=1)) if g.counters.me == 0 else g
        for g in eliminated
    ]
    return new_survivors, new_eliminated


def criteria_key(g: Genome) -> tuple[int, int, int, float]:
    """Descending lexicographic retention key: net multi-fidelity survivals,
    fewest multi-fidelity exposures, single-evaluation survivals, and finally
    model size (bigger architectures are kept)."""
    if g.eval is None:
        raise UnevaluatedGenomeError(f"genome {g.id} has no evaluation for criteria ranking")
    c = g.counters
    return (c.ms - c.me, -(c.ms + c.me), c.ss, float(g.eval.f2))


def truncate_archive(
    e: Archive,
    newly_eliminated: Sequence[Genome],
    store=None,
    protected_ids: frozenset[str] = frozenset(),
) -> Archive:
    """Keep the top-capacity individuals of archive + newly eliminated under
    the criteria key; release checkpoints of discarded individuals whose id is
    not still live elsewhere."""
    union = list(e.members) + list(newly_eliminated)
    # reverse=True keeps Python's sort stability, so ties stay in input order.
    ordered = sorted(union, key=criteria_key, reverse=True)
    kept = ordered[: e.capacity]
    discarded = ordered[e.capacity :]
    if store is not None:
        live = {g.id for g in kept} | set(protected_ids)
        for g in discarded:
            if g.id not in live:
                store.release(g.id, missing_ok=True)
    return Archive(members=tuple(kept), capacity=e.capacity)


def fidelity_tick(g: int, st: FidelityState) -> FidelityState:
    """Raise s by one at every tick_interval generations until s reaches mf."""
    interval = st.tick_interval()
    if g % interval == 0 and st.s != st.mf:
        return replace(st, s=st.s + 1)
    return st


def _evaluate_all(genomes: Sequence[Genome], epochs: int, evaluator: "Evaluator") -> list[Genome]:
    return [evaluator.evaluate(g, epochs) for g in genomes]


def mf_selection(
    p: Sequence[Genome],
    q: Sequence[Genome],
    e: Archive,
    g: int,
    st: FidelityState,
    evaluator: "Evaluator",
    trace: dict | None = None,
) -> tuple[list[Genome], Archive, FidelityState]:
    """One generation of multi-fidelity evaluation based selection.

    Returns the next population (size |p|), the next archive, and the next
    fidelity state. When a ``trace`` dict is supplied it is filled with
    observability snapshots (tick flag, pre-finalization pool objectives).
    """
    pop_size = len(p)
    survivors, eliminated = environment_selection(list(p) + list(q), pop_size)
    survivors, eliminated = record_env_selection(survivors, eliminated)
    survivor_ids = frozenset(gen.id for gen in survivors)
    e = truncate_archive(e, eliminated, store=getattr(evaluator, "store", None),
                         protected_ids=survivor_ids)

    st_next = fidelity_tick(g, st)
    if st_next.s != st.s:
        pool = _evaluate_all(list(survivors) + list(e.members), st_next.s, evaluator)
        p_next, into_archive = environment_selection(pool, pop_size)
        p_next = [
            replace(x, counters=replace(x.counters, ms=x.counters.ms + 1, ss=0))
            for x in p_next
        ]
        updated = []
        for x in into_archive:
            c = x.counters
            if c.me == 0:
                c = replace(c, ms=c.ms + 1)
            c = replace(c, me=c.me + 1)
            updated.append(replace(x, counters=c))
        e = Archive(members=tuple(updated), capacity=e.capacity)
    else:
        p_next = survivors

    if trace is not None:
        trace["tick"] = st_next.s != st.s
        trace["s_after"] = st_next.s

    if g == st_next.gen_budget:
        prefinal = list(p_next) + list(e.members)
        if trace is not None:
            trace["pre_final"] = [(x.id, x.eval.f1) for x in prefinal]
        pool = _evaluate_all(prefinal, st_next.complete_epochs, evaluator)
        p_next, into_archive = environment_selection(pool, pop_size)
        e = Archive(members=tuple(into_archive), capacity=e.capacity)

    return list(p_next), e, st_next
