"""
Imputing one record with the genetic algorithm
==============================================

The fitness of a candidate value is the negated squared reconstruction error
of the completed record. Compare the search over [0, 1] with the search inside
forest bounds.
"""
import numpy as np

from aeimpute import (
    SURVEY_SCHEMA, FitnessContext, GaConfig, NetworkConfig, NormalizationParams, SynthConfig, derive_bounds,
    evolve, generate, init_model, normalize, split_dataset, train, train_forest,
)
from aeimpute.genetic import population_fitness

norm = NormalizationParams.from_schema(SURVEY_SCHEMA)
tr, va, te = split_dataset(normalize(generate(SynthConfig(n_records=3000, seed=4))), seed=4)
model, _ = train(init_model(NetworkConfig(seed=4), norm), tr, va, max_cycles=400)
forest = train_forest(tr.values, 4, seed=4)

rec = te.values[3].copy()
truth = rec[4]
rec[4] = np.nan
ctx = FitnessContext.from_record(model, rec)

# the fitness landscape along the one missing coordinate
grid = np.linspace(0, 1, 11)
print(np.column_stack([grid, population_fitness(ctx, grid[:, None])]).round(4))

wide = evolve(ctx, GaConfig(seed=0))
narrow = evolve(ctx, GaConfig(seed=0), derive_bounds(forest, rec))
print("best fitness per generation:", np.round(wide.history, 5))
for label, res in (("ann-ga", wide), ("ann-ga-df", narrow)):
    est = norm.unscale(res.best_genes[0], 4)
    print(f"{label:10s} estimate {est:5.2f} years of schooling, fitness {res.best_fitness:.5f}")
print("true value", norm.unscale(truth, 4))
