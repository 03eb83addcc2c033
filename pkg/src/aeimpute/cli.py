"""Command-line workflow: synth, train, forest, impute, evaluate.

Settings come from a flat ``key = value`` file (``--config``) with
``--set key=value`` overrides; the command-line value always wins. Relative
file names resolve against ``--out-dir``.

Exit codes: 0 success, 1 usage or configuration error, 2 data or numeric error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autoencoder, evaluation, forest, schema, synth
from .exceptions import AeImputeError, ConfigError
from .genetic import GaConfig
from .pipeline import MODES, ImputationJob, impute_dataset, results_to_csv

logger = logging.getLogger("aeimpute")

# key: (default, type, help)
KEYS = {
    "schema": ("", str, "schema file; empty selects the built-in survey schema"),
    "data.n_records": (5000, int, "synthetic records to generate"),
    "data.seed": (0, int, "generator and missingness seed"),
    "data.noise_scale": (1.0, float, "scale of the generator's noise terms"),
    "data.missing_fraction": (0.2, float, "fraction of records with the variable blanked"),
    "data.missing_variable": ("Education", str, "variable made missing"),
    "data.mar_driver": ("Age", str, "observed variable driving missingness"),
    "data.complete": ("data.csv", str, "complete synthetic data"),
    "data.missing": ("missing.csv", str, "data with MAR missingness"),
    "data.truth": ("truth.csv", str, "ground truth for the blanked fields"),
    "train.input": ("missing.csv", str, "training input, cleaned by listwise deletion"),
    "train.hidden": (9, int, "hidden nodes (must be below the 10 inputs)"),
    "train.max_cycles": (1000, int, "maximum training cycles"),
    "train.patience": (50, int, "early-stopping patience in cycles"),
    "train.seed": (0, int, "weight-initialization and split seed"),
    "train.split": ("0.6,0.2,0.2", str, "train,validation,test fractions"),
    "train.model": ("model.txt", str, "model file"),
    "train.report": ("train_report.csv", str, "per-cycle training history"),
    "forest.n_trees": (4, int, "trees in the forest"),
    "forest.response": ("Education", str, "variable the forest brackets"),
    "forest.max_depth": (12, int, "maximum tree depth"),
    "forest.min_leaf": (5, int, "minimum rows per leaf"),
    "forest.window_fraction": (0.2, float, "initial window as a fraction of rows"),
    "forest.misfit_tolerance": (0.05, float, "normalized residual counted as a misfit"),
    "forest.max_rounds": (5, int, "maximum window regrowth rounds"),
    "forest.prune": (False, bool, "reduced-error pruning against the validation split"),
    "forest.seed": (0, int, "window seed (tree t uses seed + t)"),
    "forest.file": ("forest.txt", str, "forest file written by 'forest'"),
    "ga.population": (15, int, "GA population size"),
    "ga.generations": (10, int, "GA generations"),
    "ga.crossover_rate": (0.8, float, "probability of crossover per pair"),
    "ga.mutation_rate": (0.1, float, "per-gene boundary-mutation probability"),
    "ga.elitism": (1, int, "individuals copied unchanged each generation"),
    "ga.seed": (0, int, "GA base seed (record i uses seed + i)"),
    "impute.mode": ("ann-ga", str, "ann-ga or ann-ga-df"),
    "impute.input": ("missing.csv", str, "dataset to complete"),
    "impute.model": ("model.txt", str, "model file to load"),
    "impute.forest": ("", str, "forest file; required for ann-ga-df"),
    "impute.margin": (0.05, float, "normalized margin added around forest bounds"),
    "impute.n_jobs": (1, int, "worker threads"),
    "evaluate.model": ("model.txt", str, "model used for the impact assessment"),
    "evaluate.modes": ("ann-ga,ann-ga-df", str, "modes to evaluate when their outputs exist"),
}
SEED_KEYS = ("data.seed", "train.seed", "forest.seed", "ga.seed")


class UsageError(ConfigError):
    pass


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(key: str, raw):
    default, kind, _ = KEYS[key]
    if not isinstance(raw, str):
        return raw
    try:
        if kind is bool:
            return _parse_bool(raw)
        return kind(raw.strip())
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


@dataclass
class RunConfig:
    values: dict
    out_dir: Path

    @classmethod
    def build(cls, config_path=None, overrides=(), seed_override=None, out_dir="."):
        values = {k: v[0] for k, v in KEYS.items()}
        if config_path:
            try:
                text = Path(config_path).read_text(encoding="utf-8")
            except OSError as exc:
                raise UsageError(f"cannot read config file: {exc}") from None
            values.update(parse_config_text(text))
        for item in overrides:
            if "=" not in item:
                raise UsageError(f"--set expects key=value, got {item!r}")
            key, value = (s.strip() for s in item.split("=", 1))
            if key not in KEYS:
                raise UsageError(f"unknown key {key!r}")
            values[key] = _coerce(key, value)
        if seed_override is not None:
            for key in SEED_KEYS:
                values[key] = seed_override
        return cls(values, Path(out_dir))

    def __getitem__(self, key):
        return self.values[key]

    def path(self, key) -> Path:
        p = Path(self.values[key])
        return p if p.is_absolute() else self.out_dir / p

    def schema(self) -> schema.VariableSchema:
        if self["schema"]:
            return schema.load_schema(self.path("schema"))
        return schema.SURVEY_SCHEMA

    def synth_config(self) -> synth.SynthConfig:
        return synth.SynthConfig(
            n_records=self["data.n_records"], seed=self["data.seed"],
            noise_scale=self["data.noise_scale"], missing_fraction=self["data.missing_fraction"],
            missing_variable=self["data.missing_variable"], mar_driver=self["data.mar_driver"],
        )

    def ga_config(self) -> GaConfig:
        return GaConfig(
            population_size=self["ga.population"], generations=self["ga.generations"],
            crossover_rate=self["ga.crossover_rate"], mutation_rate=self["ga.mutation_rate"],
            elitism=self["ga.elitism"], seed=self["ga.seed"],
        )

    def split(self):
        try:
            fractions = tuple(float(x) for x in self["train.split"].split(","))
        except ValueError:
            raise UsageError("train.split must be three comma-separated numbers") from None
        return fractions


def _require_inputs(*paths: Path):
    for p in paths:
        if not p.is_file():
            raise FileNotFoundError(f"input file not found: {p}")


def _prepare_out(cfg: RunConfig):
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(cfg.out_dir, os.W_OK):
        raise PermissionError(f"output directory is not writable: {cfg.out_dir}")


def cmd_synth(cfg: RunConfig, args=None):
    _prepare_out(cfg)
    sch = cfg.schema()
    sc = cfg.synth_config()
    full = synth.generate(sc, sch)
    missing, truth = synth.inject_mar(full, sc)
    schema.write_csv(cfg.path("data.complete"), full)
    schema.write_csv(cfg.path("data.missing"), missing)
    variable = sch.names[sch.index(sc.missing_variable)]
    evaluation.write_text(cfg.path("data.truth"), synth.truth_to_csv(truth, variable))
    logger.info("synth: %d records, %d blanked", len(full), len(truth))


def _training_partitions(cfg: RunConfig):
    sch = cfg.schema()
    raw = schema.load_csv(cfg.path("train.input"), sch)
    clean = schema.listwise_clean(raw)
    norm = schema.NormalizationParams.from_schema(sch)
    return schema.split_dataset(schema.normalize(clean, norm), cfg.split(), cfg["train.seed"]), norm


def cmd_train(cfg: RunConfig, args=None):
    _require_inputs(cfg.path("train.input"))
    _prepare_out(cfg)
    (tr, va, _), norm = _training_partitions(cfg)
    net = autoencoder.NetworkConfig(
        n_in=len(tr.schema), n_hidden=cfg["train.hidden"], n_out=len(tr.schema),
        max_cycles=cfg["train.max_cycles"], early_stop_patience=cfg["train.patience"],
        seed=cfg["train.seed"],
    )
    model, report = autoencoder.train(autoencoder.init_model(net, norm), tr, va)
    autoencoder.save_model(model, cfg.path("train.model"))
    lines = ["cycle,train_mse,validation_mse"]
    for i, (a, b) in enumerate(zip(report.train_mse_history, report.validation_mse_history), start=1):
        lines.append(f"{i},{a!r},{b!r}")
    evaluation.write_text(cfg.path("train.report"), "\n".join(lines) + "\n")
    logger.info("train: %d cycles, train MSE %.3g, best validation MSE %.3g",
                report.cycles_run, report.final_train_mse, report.best_validation_mse)


def cmd_forest(cfg: RunConfig, args=None):
    _require_inputs(cfg.path("train.input"))
    _prepare_out(cfg)
    (tr, va, _), _ = _training_partitions(cfg)
    response = tr.schema.index(cfg["forest.response"])
    params = forest.TreeParams.for_response(
        response, len(tr.schema), max_depth=cfg["forest.max_depth"], min_leaf=cfg["forest.min_leaf"],
    )
    window = forest.WindowConfig(
        cfg["forest.window_fraction"], cfg["forest.misfit_tolerance"], cfg["forest.max_rounds"],
    )
    f = forest.train_forest(tr.values, response, cfg["forest.n_trees"], params, window, cfg["forest.seed"])
    if cfg["forest.prune"]:
        f = forest.RegressionForest([forest.prune(t, va.values) for t in f.trees])
    forest.save_forest(f, cfg.path("forest.file"))
    logger.info("forest: %d trees for %s", len(f.trees), tr.schema.names[response])


def _output_names(mode: str):
    return f"imputed_{mode}.csv", f"results_{mode}.csv"


def cmd_impute(cfg: RunConfig, args=None):
    mode = cfg["impute.mode"]
    if mode not in MODES:
        raise UsageError(f"--mode must be one of {MODES}")
    if mode == "ann-ga-df" and not cfg["impute.forest"]:
        raise UsageError("ann-ga-df mode needs --forest")
    inputs = [cfg.path("impute.input"), cfg.path("impute.model")]
    if cfg["impute.forest"]:
        inputs.append(cfg.path("impute.forest"))
    _require_inputs(*inputs)
    _prepare_out(cfg)
    sch = cfg.schema()
    data = schema.load_csv(cfg.path("impute.input"), sch)
    model = autoencoder.load_model(cfg.path("impute.model"))
    fr = forest.load_forest(cfg.path("impute.forest")) if mode == "ann-ga-df" else None
    job = ImputationJob(model, sch, cfg.ga_config(), mode, fr, cfg["impute.margin"])
    completed, results = impute_dataset(job, data, n_jobs=cfg["impute.n_jobs"])
    data_name, results_name = _output_names(mode)
    schema.write_csv(cfg.out_dir / data_name, completed)
    evaluation.write_text(cfg.out_dir / results_name, results_to_csv(results, sch, completed))
    logger.info("impute: %s filled %d records", mode, len(results))


def cmd_evaluate(cfg: RunConfig, args=None):
    _require_inputs(cfg.path("data.truth"), cfg.path("data.complete"), cfg.path("evaluate.model"))
    _prepare_out(cfg)
    sch = cfg.schema()
    truth = synth.truth_from_csv(cfg.path("data.truth").read_text(encoding="utf-8"))
    reference = schema.load_csv(cfg.path("data.complete"), sch)
    model = autoencoder.load_model(cfg.path("evaluate.model"))
    index = np.array([i for i, _, _ in truth], dtype=int)
    columns = np.array([sch.index(v) for _, v, _ in truth], dtype=int)
    true_values = np.array([t for _, _, t in truth])

    modes = [m.strip() for m in cfg["evaluate.modes"].split(",") if m.strip()]
    accuracy, impacts = [], {}
    for mode in modes:
        path = cfg.out_dir / _output_names(mode)[0]
        if not path.is_file():
            continue
        imputed = schema.load_csv(path, sch)
        estimates = imputed.values[index, columns]
        accuracy.append(evaluation.score_estimates(estimates, true_values, mode))
        impacts[mode] = evaluation.impact_assessment(model, imputed, reference, mode)
    if not accuracy:
        raise FileNotFoundError("no imputed outputs found for any mode")

    comparison = evaluation.compare_modes(*accuracy) if len(accuracy) == 2 else None
    out = cfg.out_dir
    evaluation.write_text(out / "table4.csv", evaluation.accuracy_table_csv(accuracy))
    for mode, name in (("ann-ga", "table5.csv"), ("ann-ga-df", "table6.csv")):
        if mode in impacts:
            evaluation.write_text(out / name, evaluation.impact_table_csv(impacts[mode]))
    evaluation.write_text(out / "fig5.csv", evaluation.per_sample_csv(
        {r.mode: r.errors for r in accuracy}, index))
    evaluation.write_text(out / "fig6.csv", evaluation.per_sample_csv(
        {m: r.per_sample_error for m, r in impacts.items()}))
    text = evaluation.format_accuracy(accuracy, comparison)
    for rep in impacts.values():
        text += "\n" + evaluation.format_impact(rep)
    evaluation.write_text(out / "report.txt", text)
    sys.stdout.write(text)


COMMANDS = {
    "synth": (cmd_synth, "generate synthetic data and inject MAR missingness"),
    "train": (cmd_train, "train the autoencoder on cleaned, normalized data"),
    "forest": (cmd_forest, "grow the windowed regression forest"),
    "impute": (cmd_impute, "fill missing values with the GA (ann-ga or ann-ga-df)"),
    "evaluate": (cmd_evaluate, "score estimates and assess impact"),
}


def _keys_epilog() -> str:
    lines = ["config keys (default):"]
    for key, (default, _, text) in KEYS.items():
        lines.append(f"  {key} = {default}    {text}")
    return "\n".join(lines)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--seed-override", type=int, help="replace every seed key with this value")
    common.add_argument("--out-dir", help="directory for inputs and outputs (default: .)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="aeimpute", description=__doc__.splitlines()[0], parents=[common],
                     epilog=_keys_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, text) in COMMANDS.items():
        p = sub.add_parser(name, help=text, description=text, parents=[common], epilog=_keys_epilog(),
                           formatter_class=argparse.RawDescriptionHelpFormatter,
                           argument_default=argparse.SUPPRESS)
        if name == "impute":
            p.add_argument("--mode", choices=MODES)
            p.add_argument("--forest", help="forest file (required for ann-ga-df)")
            p.add_argument("--model", help="model file")
            p.add_argument("--input", help="dataset to complete")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    overrides = list(getattr(args, "set", None) or [])
    for flag, key in (("mode", "impute.mode"), ("forest", "impute.forest"),
                      ("model", "impute.model"), ("input", "impute.input")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides.append(f"{key}={value}")
    try:
        cfg = RunConfig.build(getattr(args, "config", None), overrides,
                              getattr(args, "seed_override", None), getattr(args, "out_dir", None) or ".")
        COMMANDS[args.command][0](cfg, args)
    except ConfigError as exc:
        print(f"aeimpute: error: {exc}", file=sys.stderr)
        return 1
    except (AeImputeError, OSError) as exc:
        print(f"aeimpute: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
