"""Synthetic antenatal-survey records and MAR missingness.

The generator builds in dependencies (education rises with age and differs
by race and province, father's age tracks the mother's, parity never exceeds
gravidity) so that an autoencoder has structure to learn.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError
from .schema import SURVEY_SCHEMA, Dataset, VariableSchema


@dataclass(frozen=True)
class SynthConfig:
    n_records: int = 5000
    seed: int = 0
    noise_scale: float = 1.0
    missing_fraction: float = 0.2
    missing_variable: int | str = "Education"
    mar_driver: int | str = "Age"
    mar_strength: float = 3.0

    def __post_init__(self):
        if self.n_records < 1:
            raise ConfigError("n_records must be positive")
        if not 0.0 <= self.missing_fraction < 1.0:
            raise ConfigError("missing_fraction must lie in [0, 1)")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be nonnegative")


def _resolve(cfg: SynthConfig, schema: VariableSchema):
    miss = schema.index(cfg.missing_variable)
    driver = schema.index(cfg.mar_driver)
    if miss == driver:
        raise ConfigError("MAR driver must differ from the missing variable")
    return miss, driver


def generate(cfg: SynthConfig = SynthConfig(), schema: VariableSchema = SURVEY_SCHEMA) -> Dataset:
    if schema.names != SURVEY_SCHEMA.names:
        raise ConfigError("the generator only knows the survey schema")
    rng = np.random.default_rng(cfg.seed)
    n = cfg.n_records
    s = cfg.noise_scale
    lo, hi = schema.lo, schema.hi

    province = rng.integers(1, 10, size=n)
    region = rng.integers(1, 53, size=n)
    race = rng.choice([1, 2, 3, 4], size=n, p=[0.78, 0.10, 0.09, 0.03])
    age = np.clip(np.round(rng.gamma(4.0, 3.0, size=n) + 15.0), 15, 50)

    race_effect = np.array([0.0, 0.0, 1.0, 1.5, 2.0])[race]
    province_effect = 0.12 * (province - 5)
    education = 2.5 + 0.3 * (age - 15) + race_effect + province_effect
    education = np.clip(np.round(education + s * rng.normal(0.0, 0.35, size=n)), 0, 13)

    gravidity = np.clip(np.round(0.09 * (age - 15) + rng.poisson(1.0, size=n)), 0, 8)
    parity = np.minimum(rng.binomial(gravidity.astype(int), 0.6), 7)
    parity = np.minimum(parity, gravidity)

    father = np.clip(np.round(age + 4.0 + s * rng.normal(0.0, 4.0, size=n)), 16, 65)

    z_age = (age - 15) / 35.0
    hiv = rng.random(n) < 1.0 / (1.0 + np.exp(-(-1.8 + 2.5 * z_age)))
    rpr = rng.random(n) < 1.0 / (1.0 + np.exp(-(-2.6 + 1.5 * z_age)))

    values = np.column_stack([
        province, region, age, race, education, gravidity, parity, father, hiv, rpr,
    ]).astype(float)
    values = np.clip(values, lo, hi)
    return Dataset(schema, values)


def mar_probabilities(driver_normalized, strength=3.0) -> np.ndarray:
    """Per-record inclusion weights, logistic in the normalized driver."""
    z = np.asarray(driver_normalized, dtype=float)
    w = 1.0 / (1.0 + np.exp(-strength * (z - 0.5)))
    return w / w.sum()


def inject_mar(d: Dataset, cfg: SynthConfig = SynthConfig()):
    """Blank ``cfg.missing_variable`` in ``round(fraction * n)`` records.

    Records are drawn without replacement with weights increasing in the
    driver variable, so missingness depends only on an observed field.
    Returns the blanked dataset and ``(record_index, true_value)`` pairs.
    """
    if not d.complete_mask.all():
        raise DataError("inject_mar expects a complete dataset")
    miss, driver = _resolve(cfg, d.schema)
    k = int(round(cfg.missing_fraction * len(d)))
    if k == 0:
        return d, []
    rng = np.random.default_rng([cfg.seed, 1])
    spec = d.schema.variables[driver]
    z = (d.values[:, driver] - spec.lo) / (spec.hi - spec.lo)
    p = mar_probabilities(z, cfg.mar_strength)
    chosen = np.sort(rng.choice(len(d), size=k, replace=False, p=p))
    values = d.values.copy()
    truth = [(int(i), float(values[i, miss])) for i in chosen]
    values[chosen, miss] = np.nan
    return d.with_values(values), truth


def truth_to_csv(truth, variable: str) -> str:
    lines = ["record_index,variable,true_value"]
    lines += [f"{i},{variable},{v!r}" for i, v in truth]
    return "\n".join(lines) + "\n"


def truth_from_csv(text: str):
    rows = list(csv.DictReader(io.StringIO(text)))
    return [(int(r["record_index"]), r["variable"], float(r["true_value"])) for r in rows]
