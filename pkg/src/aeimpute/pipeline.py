"""Per-record imputation loop: bounds, genetic search, write-back."""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .autoencoder import AutoencoderModel
from .exceptions import AeImputeError, ConfigError, DataError, ImputationError
from .forest import RegressionForest, derive_bounds
from .genetic import FitnessContext, GaConfig, GeneBounds, evolve
from .schema import Dataset, NormalizationParams, VariableSchema, round_to_schema

logger = logging.getLogger(__name__)

MODES = ("ann-ga", "ann-ga-df")


@dataclass(frozen=True)
class ImputationJob:
    model: AutoencoderModel
    schema: VariableSchema
    ga_cfg: GaConfig = GaConfig()
    mode: str = "ann-ga"
    forest: RegressionForest | None = None
    margin: float = 0.05
    norm: NormalizationParams | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.mode == "ann-ga-df":
            if self.forest is None:
                raise ConfigError("ann-ga-df mode requires a forest")
            if not 0 <= self.forest.response_index < len(self.schema):
                raise ConfigError("forest response variable is not in the schema")
        if self.margin < 0:
            raise ConfigError("margin must be nonnegative")

    @property
    def params(self) -> NormalizationParams:
        if self.norm is not None:
            return self.norm
        if self.model.norm is not None:
            return self.model.norm
        return NormalizationParams.from_schema(self.schema)


@dataclass(frozen=True)
class ImputationResult:
    record_index: int
    estimates: tuple[tuple[int, float], ...]
    ga_best_fitness: float
    bounds_used: GeneBounds


def _bounds_for(job: ImputationJob, record, missing) -> GeneBounds:
    if job.mode == "ann-ga":
        return GeneBounds.unit(len(missing))
    response = job.forest.response_index
    lo = np.zeros(len(missing))
    hi = np.ones(len(missing))
    if response in missing:
        b = derive_bounds(job.forest, record, job.margin)
        k = missing.index(response)
        lo[k], hi[k] = b.lo[0], b.hi[0]
    if missing != [response]:
        warnings.warn(
            f"missing fields {missing} differ from the forest response {response}; "
            "using [0, 1] for variables without a forest",
            stacklevel=3,
        )
    return GeneBounds(lo, hi)


def impute_record(job: ImputationJob, record, record_index: int = 0) -> ImputationResult:
    """Estimate the missing fields of one normalized record.

    The GA seed is ``job.ga_cfg.seed + record_index`` so results do not depend
    on processing order.
    """
    record = np.asarray(record, dtype=float)
    missing = [int(i) for i in np.flatnonzero(np.isnan(record))]
    if not missing:
        raise DataError(f"record {record_index} has no missing fields")
    bounds = _bounds_for(job, record, missing)
    ctx = FitnessContext(job.model, record, tuple(missing))
    cfg = replace(job.ga_cfg, seed=job.ga_cfg.seed + record_index)
    res = evolve(ctx, cfg, bounds)
    values = job.params.unscale(res.best_genes, missing)
    estimates = tuple((j, float(v)) for j, v in zip(missing, values))
    return ImputationResult(record_index, estimates, res.best_fitness, bounds)


def _repair_parity(row, estimated, schema):
    names = schema.names
    if "Parity" not in names or "Gravidity" not in names:
        return
    p, g = names.index("Parity"), names.index("Gravidity")
    if row[p] > row[g]:
        if p in estimated:
            row[p] = row[g]
        elif g in estimated:
            row[g] = row[p]


def impute_dataset(job: ImputationJob, d: Dataset, n_jobs: int = 1, round_integers: bool = True):
    """Fill every incomplete record of an un-normalized dataset.

    Returns the completed dataset (original units, integer-coded variables
    rounded) and the per-record results in record order.
    """
    if d.normalized:
        raise DataError("impute_dataset expects un-normalized data")
    p = job.params
    Z = p.scale(d.values)
    todo = np.flatnonzero(np.isnan(Z).any(axis=1))

    def work(i):
        try:
            return impute_record(job, Z[i], int(i))
        except AeImputeError as exc:
            raise ImputationError(int(i), exc) from exc

    if n_jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(work, todo))
    else:
        results = [work(i) for i in todo]

    out = d.values.copy()
    for res in results:
        row = out[res.record_index]
        for j, v in res.estimates:
            row[j] = v
        if round_integers:
            row[:] = round_to_schema(row, d.schema)
            _repair_parity(row, {j for j, _ in res.estimates}, d.schema)
    logger.info("imputed %d of %d records (%s)", len(results), len(d), job.mode)
    return d.with_values(out), results


def results_to_csv(results, schema: VariableSchema, imputed: Dataset | None = None) -> str:
    """Sidecar table: one line per estimated field.

    ``estimate`` is the value written into the completed dataset when
    ``imputed`` is given, otherwise the raw GA estimate.
    """
    lines = ["record_index,variable,estimate,ga_best_fitness,bound_lo,bound_hi"]
    for res in results:
        for k, (j, v) in enumerate(res.estimates):
            if imputed is not None:
                v = imputed.values[res.record_index, j]
            lines.append(
                f"{res.record_index},{schema.names[j]},{float(v)!r},{res.ga_best_fitness!r},"
                f"{float(res.bounds_used.lo[k])!r},{float(res.bounds_used.hi[k])!r}"
            )
    return "\n".join(lines) + "\n"
