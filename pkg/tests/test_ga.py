import itertools

import numpy as np
import pytest
from scipy.stats import binomtest

from dynfsm.analysis import builtin_strategy
from dynfsm.codec import Layout, encode_chromosome
from dynfsm.dataset import Dataset
from dynfsm.fsm import Fsm
from dynfsm.ga import (GaConfig, evolve, init_population, linear_rank_probabilities,
                       single_point_crossover, uniform_mutation)
from dynfsm.simulate import MatchConfig, play_match

from .test_fitness import python_accuracy

L = Layout(2, 2, 4)


def exhaustive_best(data):
    """Max accuracy over every 2-state, 2-action, 4-column machine."""
    best = 0.0
    for av in itertools.product((1, 2), repeat=2):
        for cells in itertools.product((1, 2), repeat=8):
            fsm = Fsm(av, [cells[:4], cells[4:]], data.predictor_names, data.action_labels)
            best = max(best, python_accuracy(fsm, data))
    return best


class TestRank:
    def test_two(self):
        assert linear_rank_probabilities([0.5, 0.9]) == pytest.approx([1 / 3, 2 / 3])

    def test_ties_uniform(self):
        assert linear_rank_probabilities([0.7] * 6) == pytest.approx([1 / 6] * 6)

    def test_four(self):
        assert linear_rank_probabilities([0.1, 0.2, 0.3, 0.4]) == pytest.approx([0.1, 0.2, 0.3, 0.4])

    def test_sum_and_monotone(self, rng):
        f = rng.random(30)
        p = linear_rank_probabilities(f)
        assert p.sum() == pytest.approx(1.0)
        order = np.argsort(f)
        assert np.all(np.diff(p[order]) > 0)

    def test_best_selected_more_than_worst(self, rng):
        f = rng.random(20)
        draws = rng.choice(20, size=4000, p=linear_rank_probabilities(f))
        n_best, n_worst = np.sum(draws == f.argmax()), np.sum(draws == f.argmin())
        assert binomtest(int(n_best), int(n_best + n_worst), 0.5).pvalue < 1e-6
        assert n_best > n_worst


class TestOperators:
    def test_equal_parents(self, rng):
        a = rng.integers(0, 2, 10, dtype=np.uint8)
        c1, c2 = single_point_crossover(a, a, rng)
        assert np.array_equal(c1, a) and np.array_equal(c2, a)

    def test_direct_cut(self, rng):
        c1, c2 = single_point_crossover([0, 0, 0, 0], [1, 1, 1, 1], rng, cut=2)
        assert c1.tolist() == [0, 0, 1, 1] and c2.tolist() == [1, 1, 0, 0]

    def test_bit_conservation(self, rng):
        for _ in range(1000):
            a, b = rng.integers(0, 2, (2, 17), dtype=np.uint8)
            c1, c2 = single_point_crossover(a, b, rng)
            assert np.array_equal(c1.astype(int) + c2, a.astype(int) + b)

    def test_length_mismatch(self, rng):
        with pytest.raises(ValueError):
            single_point_crossover([0, 1], [0, 1, 1], rng)

    def test_mutation_extremes(self, rng):
        a = rng.integers(0, 2, 50, dtype=np.uint8)
        assert np.array_equal(uniform_mutation(a, 0.0, rng), a)
        assert np.array_equal(uniform_mutation(a, 1.0, rng), 1 - a)

    def test_mutation_rate(self, rng):
        a = np.zeros(10_000, dtype=np.uint8)
        assert abs(uniform_mutation(a, 0.1, rng).mean() - 0.1) <= 0.01


class TestInit:
    def test_random(self):
        pop = init_population(GaConfig(), L)
        assert pop.shape == (175, 10) and set(np.unique(pop)) <= {0, 1}

    def test_priors_first(self):
        tft = builtin_strategy("tft")
        pop = init_population(GaConfig(population_size=10, prior_machines=(tft,)), L)
        assert np.array_equal(pop[0], encode_chromosome(tft))

    def test_deterministic(self):
        assert np.array_equal(init_population(GaConfig(seed=4), L), init_population(GaConfig(seed=4), L))

    def test_prior_mismatch(self):
        with pytest.raises(ValueError):
            init_population(GaConfig(prior_machines=(builtin_strategy("tf2t"),)), L)


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"population_size": 1}, {"crossover_prob": 1.5}, {"mutation_prob": -0.1},
        {"max_generations": None, "stagnation_generations": None}, {"selection": "roulette"},
    ])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            GaConfig(**kw)


@pytest.fixture(scope="module")
def small_data():
    cfg = MatchConfig(builtin_strategy("grim"), builtin_strategy("tft"), 0.1, 0.2, 300, seed=8)
    return play_match(cfg).player_data


class TestEvolve:
    def test_reaches_exhaustive_optimum(self, small_data):
        best = exhaustive_best(small_data)
        for seed in range(5):
            res = evolve(small_data, L, GaConfig(seed=seed, max_generations=100,
                                                 stagnation_generations=None))
            assert res.best_fitness == best

    def test_fixed_point(self, small_data):
        tft = builtin_strategy("tft")
        cfg = GaConfig(population_size=20, crossover_prob=0, mutation_prob=0, max_generations=5,
                       prior_machines=(tft,) * 20)
        res = evolve(small_data, L, cfg)
        assert res.best_fsm.state_matrix == tft.state_matrix
        assert res.best_fsm.action_vector == tft.action_vector
        assert res.best_fitness == python_accuracy(tft, small_data)

    def test_deterministic_and_monotone(self, small_data):
        cfg = GaConfig(seed=3, max_generations=30)
        a, b = evolve(small_data, L, cfg), evolve(small_data, L, cfg)
        assert a.generation_log == b.generation_log
        assert np.array_equal(a.best_chromosome, b.best_chromosome)
        best = [x for x, _ in a.generation_log]
        assert all(x <= y for x, y in zip(best, best[1:]))
        assert a.best_fitness == best[-1]
        assert all(m <= x for x, m in a.generation_log)

    def test_stagnation_stop(self, small_data):
        res = evolve(small_data, L, GaConfig(max_generations=None, stagnation_generations=5))
        assert res.generations_run >= 5
        tail = [x for x, _ in res.generation_log[-6:]]
        assert len(set(tail)) == 1

    def test_proportional_option(self, small_data):
        res = evolve(small_data, L, GaConfig(selection="proportional", max_generations=20))
        assert 0 < res.best_fitness <= 1

    def test_threads_do_not_change_result(self, small_data):
        a = evolve(small_data, L, GaConfig(seed=2, max_generations=15))
        b = evolve(small_data, L, GaConfig(seed=2, max_generations=15, threads=3))
        assert a.generation_log == b.generation_log

    def test_errors(self, small_data):
        with pytest.raises(ValueError):
            evolve(small_data, Layout(2, 2, 8), GaConfig(max_generations=1))
        empty = Dataset((), [0], [], [], np.zeros((0, 2)), ("a", "b"), ("c", "d"))
        with pytest.raises(ValueError, match="empty"):
            evolve(empty, L, GaConfig(max_generations=1))
