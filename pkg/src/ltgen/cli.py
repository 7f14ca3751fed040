"""Command-line entry point wiring the toolkit into reproducible runs.

Every command reads an optional JSON configuration document (flags win
over the document), writes its artifacts into --out, and finishes by
writing a manifest recording the command, config path, seed, and a
sha256 per artifact. Data outputs are byte-deterministic in the seed;
wall-clock timestamps appear only in the manifest.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 training
aborted (the collapse/divergence report is still written).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import classifier as clf_mod
from . import evaluation as ev
from . import gan as gan_mod
from . import pipeline as pl
from . import search as sr
from .nn import net_from_doc, net_to_doc

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_ABORTED = 3

MANIFEST_NAME = "manifest.json"


class CliError(Exception):
    """Validation-level failure (bad inputs, malformed documents)."""


# --- plumbing ---------------------------------------------------------------

def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(doc: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(out_dir: Path, command: str, config_path,
                   seed, artifacts: list) -> Path:
    """Record what ran and hash every artifact the run produced."""
    doc = {
        "command": command,
        "config_path": None if config_path is None else str(config_path),
        "seed": seed,
        "out_dir": str(out_dir),
        "artifacts": {name: _sha256(out_dir / name) for name in sorted(artifacts)},
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / MANIFEST_NAME
    _write_json(doc, path)
    return path


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise CliError(f"config document not found: {path}")
    except json.JSONDecodeError as err:
        raise CliError(f"config document {path} is not valid JSON: {err}")
    if not isinstance(doc, dict):
        raise CliError(f"config document {path} must hold a JSON object")
    return doc


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _resolve(flag_value, cfg: dict, key: str, default):
    """Flag beats config document beats default."""
    if flag_value is not None:
        return flag_value
    return cfg.get(key, default)


def _load_samples(path) -> np.ndarray:
    """Raw feature-matrix CSV written by `gan sample` (one row per sample)."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != list(pl.FEATURE_NAMES):
                raise CliError(f"{path}: expected feature header "
                               f"{list(pl.FEATURE_NAMES)}, got {header}")
            rows = [[float(v) for v in row] for row in reader if row]
    except FileNotFoundError:
        raise CliError(f"samples file not found: {path}")
    except ValueError as err:
        raise CliError(f"{path}: {err}")
    if not rows:
        raise CliError(f"{path}: no sample rows")
    return np.asarray(rows, dtype=float)


def _load_dataset(path) -> pl.Dataset:
    try:
        return pl.load_dataset(path)
    except FileNotFoundError:
        raise CliError(f"dataset not found: {path}")


def _require_scaling(ds: pl.Dataset, path) -> pl.ScalingSpec:
    if ds.scaling is None:
        raise CliError(f"dataset {path} has no scaling sidecar")
    return ds.scaling


def _load_classifier_file(path) -> clf_mod.FeasibilityClassifier:
    try:
        return clf_mod.load_classifier(path)
    except FileNotFoundError:
        raise CliError(f"classifier checkpoint not found: {path}")


def _spacecraft_from(cfg: dict) -> pl.SpacecraftModel:
    doc = cfg.get("spacecraft", {})
    kwargs = {}
    for field in ("m_dry", "thrust_max", "isp", "g0"):
        if field in doc:
            kwargs[field] = float(doc[field])
    if "m0_range" in doc:
        kwargs["m0_range"] = tuple(doc["m0_range"])
    return pl.SpacecraftModel(**kwargs)


# --- catalog ----------------------------------------------------------------

def cmd_catalog_synth(args) -> int:
    cfg = _load_config(args.config)
    n = int(_resolve(args.n, cfg, "n", 500))
    seed = int(_resolve(args.seed, cfg, "seed", 0))
    ranges = (pl.CatalogRanges(**{k: tuple(v) for k, v in cfg["ranges"].items()})
              if "ranges" in cfg else None)
    catalog = pl.synth_catalog(n, ranges, seed=seed)
    out = _out_dir(args)
    pl.save_catalog(catalog, out / "catalog.csv")
    write_manifest(out, "catalog synth", args.config, seed, ["catalog.csv"])
    print(f"wrote {len(catalog.asteroids)} asteroids to {out / 'catalog.csv'}")
    return EXIT_OK


def cmd_catalog_validate(args) -> int:
    try:
        catalog = pl.load_catalog(args.path)
    except FileNotFoundError:
        raise CliError(f"catalog not found: {args.path}")
    doc = {"path": str(args.path), "n_asteroids": len(catalog.asteroids),
           "ok": True}
    if args.out is not None:
        out = _out_dir(args)
        _write_json(doc, out / "validation.json")
        write_manifest(out, "catalog validate", None, None, ["validation.json"])
    print(f"catalog {args.path} ok: {len(catalog.asteroids)} asteroids")
    return EXIT_OK


# --- dataset ----------------------------------------------------------------

def _pipeline_config(cfg: dict, seed: int, target_override) -> pl.PipelineConfig:
    if "catalog_path" in cfg:
        try:
            catalog = pl.load_catalog(cfg["catalog_path"])
        except FileNotFoundError:
            raise CliError(f"catalog not found: {cfg['catalog_path']}")
    else:
        cat_doc = cfg.get("catalog", {})
        ranges = (pl.CatalogRanges(**{k: tuple(v) for k, v in
                                      cat_doc["ranges"].items()})
                  if "ranges" in cat_doc else None)
        catalog = pl.synth_catalog(int(cat_doc.get("n", 500)), ranges,
                                   seed=int(cat_doc.get("seed", seed)))
    kwargs = {"catalog": catalog,
              "target_feasible": int(_resolve(target_override, cfg,
                                              "target_feasible", 100))}
    for key in ("max_attempts", "kappa", "eta_duty", "t_ref", "t0_step",
                "n_restarts", "max_tof"):
        if key in cfg:
            kwargs[key] = cfg[key]
    for key in ("t0_window", "tof_grid"):
        if key in cfg:
            kwargs[key] = tuple(cfg[key])
    if "pair_filter" in cfg:
        kwargs["pair_filter"] = pl.PairFilter(**cfg["pair_filter"])
    if "spacecraft" in cfg:
        kwargs["spacecraft"] = _spacecraft_from(cfg)
    return pl.PipelineConfig(**kwargs)


def cmd_dataset_generate(args) -> int:
    cfg = _load_config(args.config)
    seed = int(_resolve(args.seed, cfg, "seed", 0))
    config = _pipeline_config(cfg, seed, args.n)
    dataset = pl.generate_dataset(config, seed=seed)
    out = _out_dir(args)
    pl.save_dataset(dataset, out / "dataset.csv")
    write_manifest(out, "dataset generate", args.config, seed,
                   ["dataset.csv", "dataset.csv.meta.json"])
    meta = dataset.meta
    print(f"{meta['n_feasible']} feasible / {meta['n_attempted']} attempted "
          f"(convergence rate {meta['convergence_rate']:.4f})")
    return EXIT_OK


# --- classifier ---------------------------------------------------------------

def cmd_classifier_train(args) -> int:
    cfg = _load_config(args.config)
    seed = int(_resolve(args.seed, cfg, "seed", 0))
    dataset = _load_dataset(args.data)
    scaling = _require_scaling(dataset, args.data)
    config = (clf_mod.ClassifierConfig.from_dict(cfg["classifier"])
              if "classifier" in cfg else clf_mod.ClassifierConfig())
    if args.epochs is not None:
        config = dataclasses.replace(config, n_epochs=int(args.epochs))
    features = pl.apply_scaler(scaling, dataset.feature_matrix())
    clf, metrics = clf_mod.train_classifier(features, dataset.labels(),
                                            config, seed=seed)
    out = _out_dir(args)
    clf_mod.save_classifier(clf, out / "classifier.json")
    _write_json(metrics.to_dict(), out / "metrics.json")
    write_manifest(out, "classifier train", args.config, seed,
                   ["classifier.json", "metrics.json"])
    print(f"holdout accuracy {metrics.accuracy:.4f} "
          f"(precision {metrics.precision:.4f}, recall {metrics.recall:.4f})")
    return EXIT_OK


# --- gan ------------------------------------------------------------------------

def _save_net(net, path: Path) -> None:
    _write_json(net_to_doc(net), path)


def cmd_gan_train(args) -> int:
    cfg = _load_config(args.config)
    dataset = _load_dataset(args.data)
    scaling = _require_scaling(dataset, args.data)
    classifier = _load_classifier_file(args.classifier)
    config = (gan_mod.GanConfig.from_dict(cfg["gan"]) if "gan" in cfg
              else gan_mod.default_config())
    if args.epochs is not None:
        config = dataclasses.replace(config, n_epochs=int(args.epochs))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=int(args.seed))
    real = pl.apply_scaler(scaling, dataset.feature_matrix(label=1))
    out = _out_dir(args)
    artifacts = ["history.csv", "collapse_report.json", "scaling.json",
                 "gan_config.json"]
    _write_json(scaling.to_dict(), out / "scaling.json")
    _write_json(config.to_dict(), out / "gan_config.json")
    try:
        result = gan_mod.train(config, real, classifier)
    except (gan_mod.DivergedError, gan_mod.CollapsedError) as err:
        history = err.history if err.history is not None \
            else gan_mod.TrainingMetrics()
        gan_mod.save_history(history, out / "history.csv")
        report = {"status": "aborted", "message": str(err),
                  "last": None if err.report is None else err.report.to_dict()}
        _write_json(report, out / "collapse_report.json")
        write_manifest(out, "gan train", args.config, config.seed, artifacts)
        print(f"training aborted: {err}", file=sys.stderr)
        return EXIT_ABORTED
    gan_mod.save_history(result.history, out / "history.csv")
    report = {"status": "completed", "best_epoch": result.best_epoch,
              "best_val_acc": result.best_val_acc,
              "best": result.report.to_dict(),
              "last": result.last_report.to_dict()}
    _write_json(report, out / "collapse_report.json")
    _save_net(result.generator, out / "generator.json")
    _save_net(result.discriminator, out / "discriminator.json")
    artifacts += ["generator.json", "discriminator.json"]
    write_manifest(out, "gan train", args.config, config.seed, artifacts)
    print(f"best validation accuracy {result.best_val_acc:.4f} "
          f"at epoch {result.best_epoch}")
    return EXIT_OK


def cmd_gan_sample(args) -> int:
    model_dir = Path(args.model)
    gen_path = model_dir / "generator.json"
    scaling_path = model_dir / "scaling.json"
    for path in (gen_path, scaling_path):
        if not path.exists():
            raise CliError(f"model artifact missing: {path}")
    with open(gen_path, encoding="utf-8") as fh:
        generator = net_from_doc(json.load(fh))
    with open(scaling_path, encoding="utf-8") as fh:
        scaling = pl.ScalingSpec.from_dict(json.load(fh))
    seed = 0 if args.seed is None else int(args.seed)
    rng = np.random.default_rng(seed)
    samples = gan_mod.sample_transfers(generator, int(args.n), scaling, rng)
    out = _out_dir(args)
    ev.save_scatter_csv(samples, out / "samples.csv", names=pl.FEATURE_NAMES)
    write_manifest(out, "gan sample", None, seed, ["samples.csv"])
    print(f"wrote {samples.shape[0]} samples to {out / 'samples.csv'}")
    return EXIT_OK


# --- eval ------------------------------------------------------------------------

def cmd_eval_convergence(args) -> int:
    cfg = _load_config(args.config)
    samples = _load_samples(args.samples)
    dataset = _load_dataset(args.data)
    scaling = _require_scaling(dataset, args.data)
    baseline = cfg.get("baseline_rate", dataset.meta.get("convergence_rate"))
    if not baseline:
        raise CliError("no baseline rate: dataset meta lacks convergence_rate "
                       "and config does not set baseline_rate")
    classifier = (_load_classifier_file(args.classifier)
                  if args.classifier is not None else None)
    report = ev.evaluate_generated(
        samples, scaling, _spacecraft_from(cfg), baseline_rate=float(baseline),
        kappa=float(cfg.get("kappa", dataset.meta.get("kappa", 1.15))),
        eta_duty=float(cfg.get("eta_duty", dataset.meta.get("eta_duty", 0.9))),
        classifier=classifier)
    out = _out_dir(args)
    _write_json(report.to_dict(), out / "convergence.json")
    write_manifest(out, "eval convergence", args.config, None,
                   ["convergence.json"])
    print(f"oracle rate {report.oracle_rate:.4f} vs baseline "
          f"{report.baseline_rate:.4f} (lift {report.lift:.2f}x)")
    return EXIT_OK


def cmd_eval_distribution(args) -> int:
    dataset = _load_dataset(args.data)
    scaling = _require_scaling(dataset, args.data)
    reference = dataset.feature_matrix(label=1)
    if reference.shape[0] == 0:
        raise CliError("dataset has no feasible rows to use as reference")
    samples = (_load_samples(args.samples) if args.samples is not None
               else reference)
    report = ev.distribution_report(samples, reference, scaler=scaling)
    out = _out_dir(args)
    _write_json(report.to_dict(), out / "distribution.json")
    ev.save_summary_csv(report, out / "summary.csv")
    ev.save_histogram_csv(report, out / "histograms.csv")
    write_manifest(out, "eval distribution", None, None,
                   ["distribution.json", "summary.csv", "histograms.csv"])
    print(f"distribution report over {report.n_samples} samples vs "
          f"{report.n_reference} reference rows")
    return EXIT_OK


def cmd_eval_compare(args) -> int:
    reports = []
    for path in (args.report_a, args.report_b):
        try:
            with open(path, encoding="utf-8") as fh:
                reports.append(ev.DistributionReport.from_dict(json.load(fh)))
        except FileNotFoundError:
            raise CliError(f"distribution report not found: {path}")
        except (KeyError, json.JSONDecodeError) as err:
            raise CliError(f"bad distribution report {path}: {err}")
    comparison = ev.compare_runs(reports[0], reports[1])
    out = _out_dir(args)
    _write_json(comparison.to_dict(), out / "comparison.json")
    ev.save_comparison_csv(comparison, out / "comparison.csv")
    write_manifest(out, "eval compare", None, None,
                   ["comparison.json", "comparison.csv"])
    print(f"closer to reference: {comparison.closer} "
          f"(mean median gap {comparison.mean_median_gap_a:.4f} vs "
          f"{comparison.mean_median_gap_b:.4f})")
    return EXIT_OK


# --- search ----------------------------------------------------------------------

def cmd_search_grid(args) -> int:
    cfg = _load_config(args.config)
    seed = int(_resolve(args.seed, cfg, "seed", 0))
    dataset = _load_dataset(args.data)
    _require_scaling(dataset, args.data)
    classifier = _load_classifier_file(args.classifier)
    grid = (sr.GridSpec.from_dict(cfg["grid"]) if "grid" in cfg
            else sr.GridSpec.desk_default())
    if args.budget is not None:
        grid = dataclasses.replace(grid, budget=int(args.budget))
    if args.epochs is not None:
        grid = dataclasses.replace(grid, n_epochs=int(args.epochs))
    result = sr.run_grid(grid, dataset, classifier, seed=seed,
                         spacecraft=_spacecraft_from(cfg),
                         n_eval=int(cfg.get("n_eval", 500)))
    out = _out_dir(args)
    sr.save_search_csv(result, out / "search.csv")
    artifacts = ["search.csv"]
    if result.best is not None:
        best_config = sr.trial_config(grid, result.best.params,
                                      sr.trial_seed(seed, result.best.trial))
        _write_json({"gan": best_config.to_dict()}, out / "best_config.json")
        artifacts.append("best_config.json")
        print(f"best trial {result.best.trial}: oracle rate "
              f"{result.best.oracle_rate:.4f}")
    else:
        print(result.diagnostics)
    write_manifest(out, "search grid", args.config, seed, artifacts)
    return EXIT_OK


# --- parser ---------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this tool reserves 2 for
    validation failures, so remap usage errors to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(parser, *, seed=True, config=True, out_required=True):
    if seed:
        parser.add_argument("--seed", type=int, default=None,
                            help="master random seed (wins over config)")
    if config:
        parser.add_argument("--config", default=None,
                            help="JSON configuration document")
    parser.add_argument("--out", required=out_required,
                        help="output directory (created if missing)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ltgen", description=__doc__.splitlines()[0])
    top = parser.add_subparsers(dest="group", required=True,
                                parser_class=_Parser)

    catalog = top.add_parser("catalog", help="synthetic asteroid catalogs")
    catalog_sub = catalog.add_subparsers(dest="action", required=True,
                                         parser_class=_Parser)
    synth = catalog_sub.add_parser("synth", help="sample a catalog CSV")
    synth.add_argument("--n", type=int, default=None, help="number of bodies")
    _add_common(synth)
    synth.set_defaults(func=cmd_catalog_synth)
    validate = catalog_sub.add_parser("validate", help="check a catalog CSV")
    validate.add_argument("path", help="catalog CSV to check")
    validate.add_argument("--out", default=None,
                          help="optional directory for the validation report")
    validate.set_defaults(func=cmd_catalog_validate)

    dataset = top.add_parser("dataset", help="labeled transfer datasets")
    dataset_sub = dataset.add_subparsers(dest="action", required=True,
                                         parser_class=_Parser)
    generate = dataset_sub.add_parser("generate",
                                      help="run the labeled-dataset pipeline")
    generate.add_argument("--n", type=int, default=None,
                          help="target number of feasible rows")
    _add_common(generate)
    generate.set_defaults(func=cmd_dataset_generate)

    classifier = top.add_parser("classifier", help="feasibility classifier")
    classifier_sub = classifier.add_subparsers(dest="action", required=True,
                                               parser_class=_Parser)
    ctrain = classifier_sub.add_parser("train", help="train on a dataset")
    ctrain.add_argument("--data", required=True, help="dataset CSV")
    ctrain.add_argument("--epochs", type=int, default=None)
    _add_common(ctrain)
    ctrain.set_defaults(func=cmd_classifier_train)

    gan = top.add_parser("gan", help="adversarial feature generator")
    gan_sub = gan.add_subparsers(dest="action", required=True,
                                 parser_class=_Parser)
    gtrain = gan_sub.add_parser("train", help="adversarial training run")
    gtrain.add_argument("--data", required=True, help="dataset CSV")
    gtrain.add_argument("--classifier", required=True,
                        help="classifier checkpoint for validation")
    gtrain.add_argument("--epochs", type=int, default=None)
    _add_common(gtrain)
    gtrain.set_defaults(func=cmd_gan_train)
    gsample = gan_sub.add_parser("sample", help="draw generated transfers")
    gsample.add_argument("--model", required=True,
                         help="gan train output directory")
    gsample.add_argument("--n", type=int, required=True,
                         help="number of samples")
    gsample.add_argument("--seed", type=int, default=None)
    gsample.add_argument("--out", required=True)
    gsample.set_defaults(func=cmd_gan_sample)

    evaluate = top.add_parser("eval", help="diagnostics and reports")
    eval_sub = evaluate.add_subparsers(dest="action", required=True,
                                       parser_class=_Parser)
    conv = eval_sub.add_parser("convergence",
                               help="re-judge samples with the oracle")
    conv.add_argument("--samples", required=True, help="samples CSV")
    conv.add_argument("--data", required=True, help="dataset CSV (baseline)")
    conv.add_argument("--classifier", default=None,
                      help="optional classifier checkpoint")
    _add_common(conv, seed=False)
    conv.set_defaults(func=cmd_eval_convergence)
    dist = eval_sub.add_parser("distribution",
                               help="box statistics and histograms")
    dist.add_argument("--samples", default=None,
                      help="samples CSV (defaults to the real feasible rows)")
    dist.add_argument("--data", required=True, help="dataset CSV (reference)")
    dist.add_argument("--out", required=True)
    dist.set_defaults(func=cmd_eval_distribution)
    compare = eval_sub.add_parser("compare", help="compare two runs")
    compare.add_argument("report_a", help="first distribution.json")
    compare.add_argument("report_b", help="second distribution.json")
    compare.add_argument("--out", required=True)
    compare.set_defaults(func=cmd_eval_compare)

    search = top.add_parser("search", help="hyperparameter search")
    search_sub = search.add_subparsers(dest="action", required=True,
                                       parser_class=_Parser)
    grid = search_sub.add_parser("grid", help="budgeted grid search")
    grid.add_argument("--data", required=True, help="dataset CSV")
    grid.add_argument("--classifier", required=True,
                      help="classifier checkpoint for validation")
    grid.add_argument("--budget", type=int, default=None,
                      help="maximum number of trials")
    grid.add_argument("--epochs", type=int, default=None,
                      help="per-trial epoch cap")
    _add_common(grid)
    grid.set_defaults(func=cmd_search_grid)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return EXIT_OK if err.code in (0, None) else int(err.code)
    try:
        return args.func(args)
    except (CliError, pl.PipelineError, clf_mod.ClassifierError,
            gan_mod.GanError, ValueError, KeyError, TypeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
