"""
Synthetic survey records and MAR missingness
============================================

Generate complete records, then blank Education in a fifth of them with
older respondents more likely to be hit.
"""
import numpy as np

from aeimpute import SURVEY_SCHEMA, SynthConfig, generate, inject_mar

full = generate(SynthConfig(n_records=2000, seed=0))
print(SURVEY_SCHEMA.names)
print(full.values[:5])

# Education rises with age by construction
age, edu = full.values[:, 2], full.values[:, 4]
print("corr(Age, Education) =", round(np.corrcoef(age, edu)[0, 1], 3))

missing, truth = inject_mar(full, SynthConfig(missing_fraction=0.2, seed=0))
blank = missing.missing_mask[:, 4]
print(f"{blank.sum()} records blanked")

# the missingness depends on an observed field, which is what MAR means
print("mean age, blanked:", age[blank].mean().round(2), " kept:", age[~blank].mean().round(2))
print("first truth pairs:", truth[:3])
