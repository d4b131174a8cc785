from pathlib import Path

import pytest

from mfnas.genome import Counters, EvalResult, Genome, UnevaluatedGenomeError
from mfnas.multifidelity import (
    Archive,
    ConfigurationError,
    FidelityState,
    criteria_key,
    fidelity_tick,
    mf_selection,
    record_env_selection,
    truncate_archive,
)

from conftest import random_valid_genome
from micro_run import ScriptedEvaluator, build_genomes, run_micro, transcript_text

GOLDEN = Path(__file__).parent / "golden" / "micro_run.jsonl"


def stub(rng, ss=0, ms=0, me=0, f1=0.5, f2=1000):
    g = random_valid_genome(rng)
    return Genome(
        normal=g.normal,
        reduction=g.reduction,
        counters=Counters(ss=ss, ms=ms, me=me),
        eval=EvalResult(f1=f1, f2=f2, epochs_trained=1, checkpoint_id="c"),
    )


class TestRecordEnvSelection:
    def test_fresh_eliminated_gets_me(self, rng):
        _, [e] = record_env_selection([], [stub(rng)])
        assert (e.counters.ss, e.counters.ms, e.counters.me) == (0, 0, 1)

    def test_me_not_rebumped(self, rng):
        _, [e] = record_env_selection([], [stub(rng, me=2)])
        assert e.counters.me == 2

    def test_survivor_ss_increment(self, rng):
        [s], _ = record_env_selection([stub(rng, ss=1)], [])
        assert (s.counters.ss, s.counters.ms, s.counters.me) == (2, 0, 0)


class TestCriteriaKey:
    def test_hand_evaluated_pair(self, rng):
        a = stub(rng, ss=3, ms=2, me=1, f2=int(2.9e6))
        b = stub(rng, ss=9, ms=1, me=0, f2=int(9e6))
        # First keys tie at 1; b wins on fewer fidelity exposures (-1 > -3).
        assert criteria_key(b) > criteria_key(a)

    def test_larger_f2_preferred_on_full_tie(self, rng):
        a = stub(rng, f2=int(5e6))
        b = stub(rng, f2=int(3e6))
        assert criteria_key(a) > criteria_key(b)

    def test_stable_ties_keep_input_order(self, rng):
        twins = [stub(rng, f2=7) for _ in range(3)]
        archive = truncate_archive(Archive(members=(), capacity=3), twins)
        assert [g.id for g in archive.members] == [g.id for g in twins]

    def test_unevaluated_rejected(self, rng):
        g = random_valid_genome(rng)
        with pytest.raises(UnevaluatedGenomeError):
            criteria_key(g)


class TestTruncateArchive:
    def test_under_capacity_keeps_all(self, rng):
        members = [stub(rng, f2=i) for i in range(3)]
        archive = truncate_archive(Archive(members=(), capacity=5), members)
        assert len(archive.members) == 3

    def test_zero_capacity(self, rng):
        archive = truncate_archive(Archive(members=(), capacity=0), [stub(rng)])
        assert archive.members == ()

    def test_matches_resort_oracle(self, rng):
        pool = [
            stub(rng, ss=int(rng.integers(4)), ms=int(rng.integers(4)),
                 me=int(rng.integers(4)), f2=int(rng.integers(1, 50)))
            for _ in range(30)
        ]
        archive = truncate_archive(Archive(members=(), capacity=20), pool)
        # Independent second implementation of the same rule: decorate with
        # explicit key tuples and index, sort, take the top 20.
        decorated = [
            ((g.counters.ms - g.counters.me,
              -(g.counters.ms + g.counters.me),
              g.counters.ss,
              g.eval.f2), -i, g)
            for i, g in enumerate(pool)
        ]
        decorated.sort(key=lambda t: (t[0], t[1]), reverse=True)
        want = [g.id for _, _, g in decorated[:20]]
        assert [g.id for g in archive.members] == want


class TestFidelityTick:
    def test_gen25_mf6_trajectory(self):
        st = FidelityState(s=1, mf=6, gen_budget=25, complete_epochs=25)
        trajectory = []
        for g in range(1, 26):
            st = fidelity_tick(g, st)
            trajectory.append(st.s)
        ticks = [g for g in range(1, 26) if trajectory[g - 1] != (trajectory[g - 2] if g > 1 else 1)]
        assert ticks == [4, 8, 12, 16, 20]
        assert max(trajectory) == 6
        assert trajectory[-1] == 6

    def test_non_multiple_unchanged(self):
        st = FidelityState(s=2, mf=6, gen_budget=25, complete_epochs=25)
        assert fidelity_tick(5, st).s == 2

    def test_guard_at_mf(self):
        st = FidelityState(s=6, mf=6, gen_budget=25, complete_epochs=25)
        assert fidelity_tick(24, st).s == 6

    def test_mf_above_budget_rejected(self):
        st = FidelityState(s=1, mf=3, gen_budget=2, complete_epochs=5)
        with pytest.raises(ConfigurationError):
            fidelity_tick(1, st)


class TestMfSelectionMicroRun:
    """Hand-simulated trajectory for the scripted Pop=4, MF=2, Gen=2 run.

    Generation 1 (tick, S 1->2): NSGA-II keeps {A,D,E,F} of A..H at one epoch
    (boundary points A, F plus the two highest-crowding interior points E, D);
    the archive fills with [H,G,C,B] ordered by the size criterion.
    Re-evaluation at two epochs lets H (error 0.55 -> 0.05) displace D into
    the archive: the population becomes [A,E,F,H].
    Generation 2 (no tick, finalize at 3 epochs): offspring I..L are all
    dominated; truncation keeps [D,L,K,J] (D leads on net multi-fidelity
    survivals, then the fresh offspring by size) and releases I,G,C,B.
    Finalization re-selects [A,F,H,D], pushing E out to the archive with its
    counters frozen.
    """

    @pytest.fixture(scope="class")
    @staticmethod
    def micro():
        events, evaluator, id_to_name = run_micro()
        return events, evaluator, id_to_name

    def test_generation_one(self, micro):
        events, _, _ = micro
        e1 = events[0]
        assert e1["tick"] is True and e1["s"] == 2
        assert e1["survivors"] == ["A", "E", "F", "H"]
        assert e1["archive"] == ["D", "G", "C", "B"]
        assert e1["counters"]["A"] == {"ss": 0, "ms": 1, "me": 0}
        assert e1["counters"]["E"] == {"ss": 0, "ms": 1, "me": 0}
        assert e1["counters"]["F"] == {"ss": 0, "ms": 1, "me": 0}
        assert e1["counters"]["H"] == {"ss": 0, "ms": 1, "me": 1}
        assert e1["counters"]["D"] == {"ss": 1, "ms": 1, "me": 1}
        assert e1["counters"]["G"] == {"ss": 0, "ms": 0, "me": 2}
        assert e1["counters"]["C"] == {"ss": 0, "ms": 0, "me": 2}
        assert e1["counters"]["B"] == {"ss": 0, "ms": 0, "me": 2}
        assert e1["epochs_total"] == 16

    def test_generation_two(self, micro):
        events, _, _ = micro
        e2 = events[1]
        assert e2["tick"] is False and e2["s"] == 2
        assert e2["survivors"] == ["A", "F", "H", "D"]
        assert e2["archive"] == ["E", "L", "K", "J"]
        assert e2["counters"]["A"] == {"ss": 1, "ms": 1, "me": 0}
        assert e2["counters"]["F"] == {"ss": 1, "ms": 1, "me": 0}
        assert e2["counters"]["H"] == {"ss": 1, "ms": 1, "me": 1}
        assert e2["counters"]["D"] == {"ss": 1, "ms": 1, "me": 1}
        assert e2["counters"]["E"] == {"ss": 1, "ms": 1, "me": 0}
        assert e2["counters"]["L"] == {"ss": 0, "ms": 0, "me": 1}
        assert e2["counters"]["K"] == {"ss": 0, "ms": 0, "me": 1}
        assert e2["counters"]["J"] == {"ss": 0, "ms": 0, "me": 1}
        assert e2["epochs_total"] == 32

    def test_discarded_checkpoints_released(self, micro):
        _, evaluator, id_to_name = micro
        name_to_id = {v: k for k, v in id_to_name.items()}
        for name in "IGCB":
            assert not evaluator.store.has(name_to_id[name])
        for name in "AFHDELKJ":
            assert evaluator.store.has(name_to_id[name])

    def test_budget_ledger_matches_hand_sum(self, micro):
        # init 4x1 + Q1 4x1 + tick re-eval 8x1 + Q2 4x2 + finalize 8x1 = 32
        _, evaluator, _ = micro
        assert evaluator.store.total_epochs == 32

    def test_matches_golden_transcript(self, micro):
        events, _, _ = micro
        assert transcript_text(events) == GOLDEN.read_text()


class TestMfSelectionGeneric:
    def test_non_tick_returns_survivors(self):
        genomes = build_genomes()
        id_to_name = {g.id: n for n, g in genomes.items()}
        ev = ScriptedEvaluator(id_to_name)
        pop = [ev.evaluate(genomes[n], 1) for n in "ABCD"]
        off = [ev.evaluate(genomes[n], 1) for n in "EFGH"]
        st = FidelityState(s=1, mf=2, gen_budget=9, complete_epochs=3)
        # g=1 with interval floor(9/2)=4: no tick, no finalization.
        p_next, archive, st_next = mf_selection(
            pop, off, Archive(members=(), capacity=4), 1, st, ev
        )
        assert st_next.s == 1
        assert [id_to_name[g.id] for g in p_next] == ["A", "D", "E", "F"]
        assert [id_to_name[g.id] for g in archive.members] == ["H", "G", "C", "B"]

    def test_tick_with_empty_archive_reranks_survivors(self):
        genomes = build_genomes()
        id_to_name = {g.id: n for n, g in genomes.items()}
        ev = ScriptedEvaluator(id_to_name)
        pop = [ev.evaluate(genomes[n], 1) for n in "ABCD"]
        off = [ev.evaluate(genomes[n], 1) for n in "EFGH"]
        st = FidelityState(s=1, mf=2, gen_budget=2, complete_epochs=3)
        p_next, archive, st_next = mf_selection(
            pop, off, Archive(members=(), capacity=0), 1, st, ev
        )
        assert st_next.s == 2
        # Capacity 0: re-evaluation covers exactly the step-1 survivors.
        assert sorted(id_to_name[g.id] for g in p_next) == ["A", "D", "E", "F"]
        assert archive.members == ()

    def test_population_size_invariant(self, rng):
        events, evaluator, _ = run_micro()
        # |P| == Pop in every record (4 here) and |archive| <= capacity.
        for event in events:
            assert len(event["survivors"]) == 4
            assert len(event["archive"]) <= 4
