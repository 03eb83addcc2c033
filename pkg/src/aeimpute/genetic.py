"""Real-coded genetic search over the missing fields of one record.

Fitness is the negated squared reconstruction error of the completed record,
so the fittest candidate is the one the autoencoder reproduces best.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import ConfigError, DataError, NumericError


@dataclass(frozen=True)
class GaConfig:
    population_size: int = 15
    generations: int = 10
    crossover_rate: float = 0.8
    mutation_rate: float = 0.1
    elitism: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be at least 2")
        if self.generations < 1:
            raise ConfigError("generations must be at least 1")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elitism < self.population_size:
            raise ConfigError("elitism must be below population_size")


@dataclass(frozen=True)
class GeneBounds:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ConfigError("bounds must be equal-length vectors")
        if np.any(lo > hi):
            raise ConfigError(f"lower bound above upper bound: {lo} > {hi}")
        if np.any(lo < 0.0) or np.any(hi > 1.0):
            raise ConfigError("gene bounds must lie inside [0, 1]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, n_genes: int) -> "GeneBounds":
        return cls(np.zeros(n_genes), np.ones(n_genes))

    def __len__(self):
        return self.lo.size

    def contains(self, genes) -> bool:
        g = np.asarray(genes, dtype=float)
        return bool(np.all(g >= self.lo) and np.all(g <= self.hi))


@dataclass
class Individual:
    genes: np.ndarray
    fitness: float | None = None

    def copy(self) -> "Individual":
        return Individual(self.genes.copy(), self.fitness)


@dataclass(frozen=True)
class FitnessContext:
    """The network plus the known part of a normalized record.

    ``model`` is anything that maps an ``(n, d)`` batch to its reconstruction,
    normally an ``AutoencoderModel``.
    """

    model: Callable[[np.ndarray], np.ndarray]
    known_values: np.ndarray
    missing_indices: tuple[int, ...]

    def __post_init__(self):
        known = np.asarray(self.known_values, dtype=float).copy()
        missing = tuple(int(i) for i in self.missing_indices)
        if not missing:
            raise DataError("at least one missing index is required")
        if len(set(missing)) != len(missing):
            raise DataError("duplicate missing index")
        holes = np.flatnonzero(np.isnan(known))
        if set(holes) - set(missing):
            raise DataError(f"known values absent at indices {sorted(set(holes) - set(missing))}")
        object.__setattr__(self, "known_values", known)
        object.__setattr__(self, "missing_indices", missing)

    @classmethod
    def from_record(cls, model, record) -> "FitnessContext":
        record = np.asarray(record, dtype=float)
        return cls(model, record, tuple(np.flatnonzero(np.isnan(record))))

    def assemble(self, genes) -> np.ndarray:
        """Fill the missing slots; ``genes`` may be one vector or a population."""
        genes = np.asarray(genes, dtype=float)
        X = np.broadcast_to(self.known_values, genes.shape[:-1] + self.known_values.shape).copy()
        X[..., list(self.missing_indices)] = genes
        return X


def population_fitness(ctx: FitnessContext, genes) -> np.ndarray:
    """Fitness of every row of a ``(pop, n_genes)`` array."""
    X = ctx.assemble(np.atleast_2d(genes))
    out = np.asarray(ctx.model(X), dtype=float)
    if not np.all(np.isfinite(out)):
        raise NumericError("network produced non-finite output")
    R = X - out
    return -np.sum(R * R, axis=1)


def fitness(ctx: FitnessContext, genes) -> float:
    genes = np.atleast_1d(np.asarray(genes, dtype=float))
    if genes.shape != (len(ctx.missing_indices),):
        raise DataError(f"expected {len(ctx.missing_indices)} genes, got {genes.shape}")
    return float(population_fitness(ctx, genes[None, :])[0])


def init_population(cfg: GaConfig, bounds: GeneBounds, n_genes: int, rng=None) -> list[Individual]:
    if n_genes < 1:
        raise ConfigError("n_genes must be at least 1")
    if len(bounds) != n_genes:
        raise ConfigError("bounds do not match the gene count")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    genes = rng.uniform(bounds.lo, bounds.hi, size=(cfg.population_size, n_genes))
    # uniform(lo, hi) with lo == hi returns lo exactly; keep it explicit anyway
    genes = np.where(bounds.lo == bounds.hi, bounds.lo, genes)
    return [Individual(g) for g in genes]


def rank_weights(fitnesses: Sequence[float]) -> np.ndarray:
    """Linear ranking: best gets weight N, worst gets 1; tied individuals share
    the mean weight of their ranks."""
    f = np.asarray(fitnesses, dtype=float)
    n = f.size
    order = np.argsort(-f, kind="stable")
    w = np.empty(n)
    w[order] = n - np.arange(n)
    _, group = np.unique(f, return_inverse=True)
    w = np.bincount(group, weights=w)[group] / np.bincount(group)[group]
    return w / w.sum()


def select(population: Sequence[Individual], rng) -> tuple[Individual, Individual]:
    """Two distinct parents by linear rank selection."""
    n = len(population)
    if n < 2:
        raise ConfigError("selection needs at least two individuals")
    if any(ind.fitness is None for ind in population):
        raise DataError("selection requires evaluated individuals")
    p = rank_weights([ind.fitness for ind in population])
    first = int(rng.choice(n, p=p))
    p = p.copy()
    p[first] = 0.0
    second = int(rng.choice(n, p=p / p.sum()))
    return population[first], population[second]


def simple_crossover(a: Individual, b: Individual, rng, cut: int | None = None):
    """One-point crossover; single-gene parents are returned as copies."""
    n = a.genes.size
    if b.genes.size != n:
        raise ConfigError("parents have different gene counts")
    if n < 2:
        return Individual(a.genes.copy()), Individual(b.genes.copy())
    k = int(rng.integers(1, n)) if cut is None else cut
    c1 = np.concatenate([a.genes[:k], b.genes[k:]])
    c2 = np.concatenate([b.genes[:k], a.genes[k:]])
    return Individual(c1), Individual(c2)


def boundary_mutation(ind: Individual, bounds: GeneBounds, rate: float, rng) -> Individual:
    """Send each gene, with probability ``rate``, to its lower or upper bound."""
    hit = rng.random(ind.genes.size) < rate
    if not hit.any():
        return ind.copy()
    upper = rng.random(ind.genes.size) < 0.5
    genes = ind.genes.copy()
    genes[hit] = np.where(upper[hit], bounds.hi[hit], bounds.lo[hit])
    if np.array_equal(genes, ind.genes):
        return Individual(genes, ind.fitness)
    return Individual(genes)


@dataclass
class GaResult:
    best_genes: np.ndarray
    best_fitness: float
    history: list[float] = field(default_factory=list)


def _evaluate(ctx, population):
    todo = [i for i, ind in enumerate(population) if ind.fitness is None]
    if todo:
        f = population_fitness(ctx, np.array([population[i].genes for i in todo]))
        for i, v in zip(todo, f):
            population[i].fitness = float(v)


def evolve(ctx: FitnessContext, cfg: GaConfig = GaConfig(), bounds: GeneBounds | None = None,
           callback=None) -> GaResult:
    """Run the GA and return the best individual ever seen.

    ``history[0]`` is the best fitness of the initial population and
    ``history[g]`` the best after generation ``g``, so the list has
    ``cfg.generations + 1`` entries. ``callback(generation, population)``
    is invoked after each evaluation, if given.
    """
    n_genes = len(ctx.missing_indices)
    bounds = GeneBounds.unit(n_genes) if bounds is None else bounds
    rng = np.random.default_rng(cfg.seed)
    population = init_population(cfg, bounds, n_genes, rng)
    _evaluate(ctx, population)
    if callback is not None:
        callback(0, population)

    best = max(population, key=lambda ind: ind.fitness).copy()
    history = [best.fitness]
    for generation in range(1, cfg.generations + 1):
        ranked = sorted(population, key=lambda ind: -ind.fitness)
        nxt = [ind.copy() for ind in ranked[:cfg.elitism]]
        while len(nxt) < cfg.population_size:
            a, b = select(population, rng)
            if rng.random() < cfg.crossover_rate:
                c1, c2 = simple_crossover(a, b, rng)
            else:
                c1, c2 = a.copy(), b.copy()
            for child in (c1, c2):
                if len(nxt) < cfg.population_size:
                    nxt.append(boundary_mutation(child, bounds, cfg.mutation_rate, rng))
        population = nxt
        _evaluate(ctx, population)
        if callback is not None:
            callback(generation, population)
        top = max(population, key=lambda ind: ind.fitness)
        if top.fitness > best.fitness:
            best = top.copy()
        history.append(top.fitness)
    return GaResult(best.genes, float(best.fitness), history)
