"""
Comparing the two imputation modes end to end
=============================================

Train once, impute the blanked Education values with both modes, score the
estimates against the truth and run the impact assessment.
"""
import numpy as np

from aeimpute import (
    GaConfig, ImputationJob, NetworkConfig, NormalizationParams, SynthConfig, compare_modes,
    generate, impact_assessment, impute_dataset, init_model, inject_mar, listwise_clean, normalize,
    score_estimates, split_dataset, train, train_forest,
)
from aeimpute.evaluation import format_accuracy, format_impact

SEED = 0
full = generate(SynthConfig(n_records=5000, seed=SEED))
missing, truth = inject_mar(full, SynthConfig(missing_fraction=0.2, seed=SEED))
norm = NormalizationParams.from_schema(full.schema)
tr, va, _ = split_dataset(normalize(listwise_clean(missing), norm), seed=SEED)

model, _ = train(init_model(NetworkConfig(seed=SEED), norm), tr, va)
forest = train_forest(tr.values, 4, seed=SEED)

idx = np.array([i for i, _ in truth])
true_values = np.array([v for _, v in truth])
reports, impacts = [], []
for mode in ("ann-ga", "ann-ga-df"):
    job = ImputationJob(model, full.schema, GaConfig(seed=SEED), mode, forest)
    completed, _ = impute_dataset(job, missing, n_jobs=4)
    reports.append(score_estimates(completed.values[idx, 4], true_values, mode))
    impacts.append(impact_assessment(model, completed, full, mode))

print(format_accuracy(reports, compare_modes(*reports)))
for rep in impacts:
    print(format_impact(rep))
