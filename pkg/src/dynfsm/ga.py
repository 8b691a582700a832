"""Genetic search over chromosome space for the most predictive machine."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .codec import Layout, decode_arrays, decode_chromosome, encode_chromosome
from .dataset import Dataset
from .fitness import match_counts
from .fsm import Fsm


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 175
    crossover_prob: float = 0.8
    mutation_prob: float = 0.1
    elitism_fraction: float = 0.05
    max_generations: int | None = 500
    stagnation_generations: int | None = 100
    seed: int = 0
    selection: str = "rank"  # or "proportional"
    prior_machines: tuple[Fsm, ...] = field(default=(), compare=False)
    threads: int = 1

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        for name in ("crossover_prob", "mutation_prob", "elitism_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not self.max_generations and not self.stagnation_generations:
            raise ValueError("set max_generations or stagnation_generations")
        if self.selection not in ("rank", "proportional"):
            raise ValueError(f"unknown selection scheme {self.selection!r}")

    def replace(self, **changes) -> GaConfig:
        params = {k: getattr(self, k) for k in self.__dataclass_fields__}
        params.update(changes)
        return GaConfig(**params)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["prior_machines"] = [m.to_dict() for m in self.prior_machines]
        return d


@dataclass
class EvolveResult:
    best_chromosome: np.ndarray
    best_fsm: Fsm
    best_fitness: float
    generation_log: list[tuple[float, float]]
    generations_run: int
    identifiability: object | None = None
    importance: object | None = None
    test_accuracy: float | None = None

    def to_dict(self) -> dict:
        out = {
            "best_chromosome": self.best_chromosome.astype(int).tolist(),
            "machine": self.best_fsm.to_dict(),
            "best_fitness": self.best_fitness,
            "generations_run": self.generations_run,
            "generation_log": [{"best": b, "median": m} for b, m in self.generation_log],
            "test_accuracy": self.test_accuracy,
        }
        if self.identifiability is not None:
            out["identifiability"] = self.identifiability.to_dict()
        if self.importance is not None:
            out["importance"] = self.importance.to_dict()
        return out


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def init_population(config: GaConfig, layout: Layout, rng: np.random.Generator | None = None) -> np.ndarray:
    rng = rng if rng is not None else _rng(config.seed, 0)
    pop = rng.integers(0, 2, size=(config.population_size, layout.length), dtype=np.uint8)
    priors = config.prior_machines[: config.population_size]
    for i, machine in enumerate(priors):
        if machine.layout != layout:
            raise ValueError(f"prior machine layout {machine.layout} does not match {layout}")
        pop[i] = encode_chromosome(machine, layout)
    return pop


def linear_rank_probabilities(fitness) -> np.ndarray:
    """P(rank r) = 2r / (N(N+1)), worst rank 1, ties get their average rank."""
    f = np.asarray(fitness, dtype=float)
    n = len(f)
    ranks = rankdata(f, method="average")
    return 2.0 * ranks / (n * (n + 1))


def proportional_probabilities(fitness) -> np.ndarray:
    f = np.asarray(fitness, dtype=float)
    total = f.sum()
    return f / total if total > 0 else np.full(len(f), 1.0 / len(f))


def single_point_crossover(a, b, rng: np.random.Generator, cut: int | None = None):
    a = np.asarray(a, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError("parents differ in length")
    n = a.shape[-1]
    if n < 2:
        raise ValueError("crossover needs chromosomes of length >= 2")
    k = int(rng.integers(1, n)) if cut is None else cut
    return np.concatenate([a[:k], b[k:]]), np.concatenate([b[:k], a[k:]])


def uniform_mutation(chrom, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit independently with probability ``rate``."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    chrom = np.asarray(chrom, dtype=np.uint8)
    return chrom ^ (rng.random(chrom.shape) < rate).astype(np.uint8)


def _breed(pop: np.ndarray, probs: np.ndarray, config: GaConfig, rng: np.random.Generator) -> np.ndarray:
    n, length = pop.shape
    parents = pop[rng.choice(n, size=n, replace=True, p=probs)]
    n_pairs = n // 2
    do_cross = rng.random(n_pairs) < config.crossover_prob
    cuts = rng.integers(1, length, size=n_pairs) if length > 1 else np.zeros(n_pairs, int)
    a, b = parents[0 : 2 * n_pairs : 2], parents[1 : 2 * n_pairs : 2]
    pos = np.arange(length)
    swap = do_cross[:, None] & (pos[None, :] >= cuts[:, None])
    children = parents.copy()
    children[0 : 2 * n_pairs : 2] = np.where(swap, b, a)
    children[1 : 2 * n_pairs : 2] = np.where(swap, a, b)
    flips = rng.random(children.shape) < config.mutation_prob
    return children ^ flips.astype(np.uint8)


class _Scorer:
    """Memoized matched-row counts keyed by chromosome bytes."""

    def __init__(self, data: Dataset, layout: Layout, threads: int, limit: int = 200_000):
        self.data, self.layout, self.threads, self.limit = data, layout, threads, limit
        self.cache: dict[bytes, int] = {}

    def __call__(self, pop: np.ndarray) -> np.ndarray:
        keys = [row.tobytes() for row in pop]
        todo = {k: i for i, k in enumerate(keys) if k not in self.cache}
        if todo:
            idx = list(todo.values())
            actions, matrix = decode_arrays(pop[idx], self.layout)
            counts = match_counts(actions, matrix, self.data, self.threads)
            if len(self.cache) + len(todo) > self.limit:
                self.cache.clear()
            self.cache.update(zip(todo.keys(), counts.tolist()))
        return np.array([self.cache[k] for k in keys], dtype=np.int64)


def evolve(data: Dataset, layout: Layout, config: GaConfig | None = None,
           callback=None) -> EvolveResult:
    """Run the GA until a stopping rule fires; return the best-ever machine.

    Each generation: rank (or proportional) selection with replacement,
    pairwise single-point crossover, per-bit mutation, then the top
    ``ceil(elitism_fraction * N)`` parents replace the worst offspring.
    """
    config = config or GaConfig()
    if data.n_rows == 0:
        raise ValueError("empty dataset")
    if layout.n_columns != 2**data.n_predictors:
        raise ValueError(f"layout has {layout.n_columns} columns; data has "
                         f"{data.n_predictors} predictors")
    if data.n_actions > layout.n_actions:
        raise ValueError("layout has fewer actions than the data")

    score = _Scorer(data, layout, config.threads)
    n = config.population_size
    n_elite = math.ceil(config.elitism_fraction * n)
    pop = init_population(config, layout, _rng(config.seed, 0))
    counts = score(pop)

    best_i = int(np.argmax(counts))
    best_bits, best_count = pop[best_i].copy(), int(counts[best_i])
    log = [(best_count / data.n_rows, float(np.median(counts)) / data.n_rows)]
    stale, gen = 0, 0
    max_gen = config.max_generations or math.inf
    max_stale = config.stagnation_generations or math.inf
    prob_fn = linear_rank_probabilities if config.selection == "rank" else proportional_probabilities

    while gen < max_gen and stale < max_stale:
        gen += 1
        rng = _rng(config.seed, 1, gen)
        children = _breed(pop, prob_fn(counts), config, rng)
        child_counts = score(children)
        if n_elite:
            elite = np.argsort(-counts, kind="stable")[:n_elite]
            worst = np.argsort(child_counts, kind="stable")[:n_elite]
            children[worst] = pop[elite]
            child_counts[worst] = counts[elite]
        pop, counts = children, child_counts
        i = int(np.argmax(counts))
        if counts[i] > best_count:
            best_bits, best_count, stale = pop[i].copy(), int(counts[i]), 0
        else:
            stale += 1
        log.append((int(counts[i]) / data.n_rows, float(np.median(counts)) / data.n_rows))
        if callback is not None and callback(gen, log[-1]):
            break

    fsm = decode_chromosome(best_bits, layout, data.predictor_names, _labels(data, layout))
    return EvolveResult(best_bits, fsm, best_count / data.n_rows, log, gen)


def _labels(data: Dataset, layout: Layout) -> tuple[str, ...]:
    labels = list(data.action_labels)
    while len(labels) < layout.n_actions:
        labels.append(f"a{len(labels) + 1}")
    return tuple(labels)
