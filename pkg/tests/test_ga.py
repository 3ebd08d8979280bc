import itertools

import numpy as np
import pytest

from ddopt.ga import (
    Chromosome,
    FitnessContext,
    GAConfig,
    config_from_json,
    config_to_json,
    crossover,
    evolve_generation,
    group_schedule,
    increase_complexity,
    initial_population,
    ktilde,
    mutate_double,
    mutate_single,
    run_ga,
    selection_probabilities,
    temperature,
)
from ddopt.model import PulseModel, pulse_set
from ddopt.sequences import Sequence, cyclic_ok

IDEAL = ("I", "X", "Y", "Z")


def chrom(genes, k=None, level=0, groups=None):
    genes = tuple(genes)
    if groups is None:
        k = k or len(genes)
        groups = tuple((i,) for i in range(k))
        level = 99
    return Chromosome(k=k or len(genes), groups=groups, genes=genes, level=level)


def decodes_cyclic(c):
    return cyclic_ok(Sequence(tuple((0.1, p) for p in c.decode()), 0.1))


class TestKtilde:
    def test_paper_values(self):
        assert [ktilde(l) for l in (0, 1, 2, 3)] == [2, 3, 5, 6]

    def test_closed_formula_range(self):
        for l in range(13):
            if l % 2 == 0:
                assert ktilde(l) == pytest.approx(1.5 * (l + 4 / 3))
            else:
                assert ktilde(l) == pytest.approx(1.5 * (l + 1))


class TestGroupSchedule:
    def test_level_zero_odd_even(self):
        sched = group_schedule(8)
        assert set(sched[0]) == {(0, 2, 4, 6), (1, 3, 5, 7)}

    def test_partitions_valid_every_level(self):
        for k in (2, 4, 8, 16):
            for part in group_schedule(k):
                sites = sorted(s for g in part for s in g)
                assert sites == list(range(k))

    def test_final_level_singletons(self):
        for k in (2, 4, 8, 16):
            assert all(len(g) == 1 for g in group_schedule(k)[-1])

    def test_even_sites_unlink_before_odd(self):
        # K=16: the odd-site block stays whole until every even site is free
        sched = group_schedule(16)
        odd_block = tuple(range(0, 16, 2))
        for part in sched:
            even_groups = [g for g in part if g[0] % 2 == 1]
            if any(len(g) > 1 for g in even_groups):
                assert odd_block in part

    def test_rejects_odd_k(self):
        with pytest.raises(ValueError):
            group_schedule(5)


class TestInitialPopulation:
    def test_ideal_enumerates_sixteen(self):
        cfg = GAConfig(k=8)
        pop = initial_population(cfg)
        assert len(pop) == 16
        for c in pop:
            decoded = c.decode()
            assert decoded == (decoded[0], decoded[1]) * 4
            assert decodes_cyclic(c)

    def test_k4_all_pairs_cyclic(self):
        # (P_odd P_even)^2 is proportional to identity for any pair
        pop = initial_population(GAConfig(k=4))
        assert len(pop) == 16
        assert ("X", "X", "X", "X") in {c.decode() for c in pop}

    def test_k2_only_matching_axes(self):
        pop = initial_population(GAConfig(k=2))
        assert {c.decode() for c in pop} == {("I", "I"), ("X", "X"), ("Y", "Y"), ("Z", "Z")}

    def test_larger_alphabet_sampled_to_q(self):
        cfg = GAConfig(k=8, model=PulseModel.finite_width(0.01), seed=3)
        pop = initial_population(cfg)
        assert len(pop) == 16
        assert len({c.decode() for c in pop}) == 16
        assert all(decodes_cyclic(c) for c in pop)


class TestSelection:
    def test_equal_fitness_uniform(self):
        p = selection_probabilities([1.0] * 8, t=0.5)
        assert np.allclose(p, 1 / 8)

    def test_infinite_temperature_uniform(self):
        p = selection_probabilities([5.0, 1.0, 3.0], t=1e12)
        assert np.allclose(p, 1 / 3, atol=1e-9)

    def test_softmax_hand_value(self):
        p = selection_probabilities([2.0, 1.0], t=1.0)
        assert p[0] == pytest.approx(0.7311, abs=1e-4)
        assert p[1] == pytest.approx(0.2689, abs=1e-4)

    def test_sums_to_one(self):
        rng = np.random.default_rng(0)
        p = selection_probabilities(list(rng.uniform(0, 12, size=16)), t=0.3)
        assert p.sum() == pytest.approx(1.0)


class TestTemperature:
    def test_starts_at_t0(self):
        cfg = GAConfig(k=4, t0=2.0, tf=0.1)
        assert temperature(0, cfg, 2.0) == pytest.approx(2.0)

    def test_ends_at_tf_for_integer_lambda(self):
        cfg = GAConfig(k=4, t0=2.0, tf=0.1, lam=3.0)
        assert temperature(cfg.cutoff_generation, cfg, 2.0) == pytest.approx(0.1)

    def test_matches_formula(self):
        cfg = GAConfig(k=4, t0=1.5, tf=0.05, eta=0.2, lam=4.0)
        a_c = cfg.cutoff_generation
        alpha = a_c // 8
        want = 1.5 * (0.05 / 1.5) ** (alpha / a_c) * (1 - 0.2 * np.sin(4 * np.pi * alpha / a_c))
        assert temperature(alpha, cfg, 1.5) == pytest.approx(max(want, 0.05))

    def test_never_below_tf(self):
        cfg = GAConfig(k=4, t0=1.0, tf=0.2, eta=0.9, lam=2.5)
        for alpha in range(0, 2 * cfg.cutoff_generation):
            assert temperature(alpha, cfg, 1.0) >= 0.2


class TestCrossover:
    def test_offspring_always_cyclic(self):
        rng = np.random.default_rng(1)
        sched = group_schedule(8)
        cfg = GAConfig(k=8)
        pop = initial_population(cfg)
        pop = increase_complexity(pop, sched, 0)
        pop = increase_complexity(pop, sched, 1)
        for trial in range(2000):
            i, j = rng.integers(0, len(pop), size=2)
            o1, o2 = crossover(pop[int(i)], pop[int(j)], IDEAL, rng)
            assert decodes_cyclic(o1) and decodes_cyclic(o2)

    def test_spec_example_splice_repair(self):
        # parents XYXY, ZYZY at full complexity: every offspring must come
        # from a splice with at most the splice-site gene repaired
        rng = np.random.default_rng(2)
        p1, p2 = chrom("XYXY"), chrom("ZYZY")
        allowed = set()
        for i in range(1, 5):
            for left, right in ((p1, p2), (p2, p1)):
                raw = list(left.decode()[:i] + right.decode()[i:])
                for fix in IDEAL:
                    cand = raw.copy()
                    cand[i - 1] = fix
                    if decodes_cyclic(chrom(cand)):
                        allowed.add(tuple(cand))
        for _ in range(500):
            o1, o2 = crossover(p1, p2, IDEAL, rng)
            assert o1.decode() in allowed
            assert o2.decode() in allowed

    def test_identical_parents_reproduce(self):
        rng = np.random.default_rng(3)
        p = chrom("XYXY")
        o1, o2 = crossover(p, p, IDEAL, rng)
        assert o1.decode() == o2.decode() == p.decode()

    def test_rejects_mismatched_groups(self):
        sched = group_schedule(4)
        a = Chromosome(4, sched[0], ("X", "Y"), 0)
        b = chrom("XYXY")
        with pytest.raises(ValueError):
            crossover(a, b, IDEAL, np.random.default_rng(0))


class TestMutations:
    def test_single_site_on_xx_is_duplicate(self):
        # no single gene of XX can change while staying cyclic
        rng = np.random.default_rng(4)
        assert mutate_single(chrom("XX"), IDEAL, rng) is None

    def test_double_site_on_xx_reaches_matched_pairs(self):
        rng = np.random.default_rng(5)
        seen = set()
        for _ in range(200):
            m = mutate_double(chrom("XX"), IDEAL, rng)
            assert m is not None
            seen.add(m.decode())
            assert decodes_cyclic(m)
        assert seen == {("I", "I"), ("Y", "Y"), ("Z", "Z")}

    def test_double_site_needs_matching_genes(self):
        rng = np.random.default_rng(6)
        assert mutate_double(chrom("XYZI"), IDEAL, rng) is None

    def test_singleton_ideal_groups_cannot_single_mutate(self):
        # odd-sized groups only admit same-axis replacements, and the ideal
        # alphabet has one label per axis
        rng = np.random.default_rng(7)
        assert mutate_single(chrom("XYXY"), IDEAL, rng) is None

    def test_single_mutation_changes_sequence(self):
        rng = np.random.default_rng(7)
        alphabet = pulse_set(PulseModel.flip_angle(0.1))
        c = chrom(("X", "Yb", "X", "Yb"))
        for _ in range(100):
            m = mutate_single(c, alphabet, rng)
            assert m is not None
            assert m.decode() != c.decode()
            assert decodes_cyclic(m)

    def test_even_group_admits_any_label(self):
        # a two-site group cancels its own axis, so all replacements work
        groups = ((0, 2), (1, 3))
        c = Chromosome(4, groups, ("X", "Y"), 0)
        rng = np.random.default_rng(8)
        seen = {mutate_single(c, IDEAL, rng).decode() for _ in range(300)}
        assert len(seen) >= 5  # both groups x three alternatives, minus overlap

    def test_property_mutants_cyclic(self):
        rng = np.random.default_rng(9)
        cfg = GAConfig(k=8, model=PulseModel.flip_angle(0.1), seed=0)
        alphabet = pulse_set(cfg.model)
        pop = initial_population(cfg)
        for c in pop:
            for _ in range(50):
                for mut in (mutate_single, mutate_double):
                    m = mut(c, alphabet, rng)
                    if m is not None:
                        assert decodes_cyclic(m)


class TestEvolveGeneration:
    def test_population_size_constant_and_unique(self):
        cfg = GAConfig(k=4, seed=5)
        ctx = FitnessContext(cfg)
        pop = initial_population(cfg)
        for alpha in range(3):
            pop = evolve_generation(pop, ctx, cfg, t=1.0, level=0, alpha=alpha)
            assert len(pop) == cfg.q_pop
            keys = [c.decode() for c in pop]
            assert len(set(keys)) == len(keys)
            assert all(decodes_cyclic(c) for c in pop)

    def test_best_fitness_never_decreases(self):
        cfg = GAConfig(k=4, seed=6, generations_per_level=8)
        res = run_ga(cfg)
        best = [row["best_ever_q"] for row in res.history]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:]))


class TestComplexityLadder:
    def test_decoded_sequences_unchanged(self):
        cfg = GAConfig(k=8, seed=7)
        sched = group_schedule(8)
        pop = initial_population(cfg)
        before = [c.decode() for c in pop]
        pop2 = increase_complexity(pop, sched, 0)
        assert [c.decode() for c in pop2] == before
        assert all(c.level == 1 for c in pop2)

    def test_full_ladder_reaches_singletons(self):
        sched = group_schedule(16)
        cfg = GAConfig(k=16, seed=8)
        pop = initial_population(cfg)
        for level in range(len(sched) - 1):
            pop = increase_complexity(pop, sched, level)
        assert all(len(g) == 1 for g in pop[0].groups)


class TestRunGA:
    def test_deterministic_history(self):
        cfg = GAConfig(k=4, seed=9, generations_per_level=6)
        r1 = run_ga(cfg)
        r2 = run_ga(cfg)
        assert r1.history == r2.history
        assert r1.best_sequence.steps == r2.best_sequence.steps

    def test_best_beats_initial_population(self):
        cfg = GAConfig(k=4, seed=10, generations_per_level=6)
        ctx = FitnessContext(cfg)
        initial_best = max(ctx.evaluate(c) for c in initial_population(cfg))
        res = run_ga(cfg, ctx)
        assert res.best_fitness >= initial_best

    def test_result_sequence_is_cyclic(self):
        cfg = GAConfig(k=2, model=PulseModel.flip_angle(0.05), seed=11,
                       generations_per_level=5)
        res = run_ga(cfg)
        assert cyclic_ok(res.best_sequence)


class TestConfig:
    def test_q_must_divide_by_eight(self):
        with pytest.raises(ValueError):
            GAConfig(k=4, q_pop=10)

    def test_temperature_ordering_enforced(self):
        with pytest.raises(ValueError):
            GAConfig(k=4, t0=0.01, tf=0.05)

    def test_json_round_trip(self):
        cfg = GAConfig(k=8, model=PulseModel.flip_angle(0.1), seed=3,
                       bath_seeds=(1, 2), generations_per_level=7)
        back = config_from_json(config_to_json(cfg))
        assert back == cfg

    def test_chromosome_partition_validated(self):
        with pytest.raises(ValueError):
            Chromosome(4, ((0, 1), (1, 2, 3)), ("X", "Y"), 0)
