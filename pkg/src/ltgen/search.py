"""Budgeted grid search over adversarial-training hyperparameters.

Enumerates network-shape and optimizer combinations in deterministic grid
order, trains each one on the same scaled feasible rows, and ranks the
runs that finish with a Healthy verdict by the oracle convergence rate of
their generated samples. Diverged and mode-collapsed runs are listed in
the trial table but never ranked, since a collapsed generator can still
score well on classifier accuracy alone.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field, fields

import numpy as np

from .evaluation import evaluate_generated
from .gan import (CollapsedError, CollapseThresholds, DivergedError, GanConfig,
                  VERDICT_COLLAPSE, VERDICT_DIVERGED, VERDICT_HEALTHY,
                  recent_score_means, sample_transfers, train)
from .nn import NetworkConfig
from .pipeline import Dataset, SpacecraftModel, apply_scaler

N_FEATURES = 22

SEARCH_HEADER = ("trial", "gen_layers", "gen_neurons", "gen_dropout",
                 "gen_lr", "dis_layers", "dis_neurons", "dis_dropout",
                 "dis_lr", "verdict", "oracle_rate", "s_gen", "s_dis")


def _stepped(lo: float, hi: float, step: float) -> tuple:
    """Values lo, lo+step, ... not exceeding hi (small float tolerance)."""
    if step <= 0 or hi < lo:
        raise ValueError(f"bad range [{lo}, {hi}] step {step}")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(float(lo + k * step) for k in range(n))


def _int_steps(lo: int, hi: int, step: int) -> tuple:
    return tuple(int(v) for v in _stepped(lo, hi, step))


@dataclass(frozen=True)
class TrialParams:
    """One point of the hyperparameter grid."""
    gen_layers: int
    gen_neurons: int
    gen_dropout: float
    gen_lr: float
    dis_layers: int
    dis_neurons: int
    dis_dropout: float
    dis_lr: float

    def as_row(self) -> tuple:
        return (self.gen_layers, self.gen_neurons, self.gen_dropout,
                self.gen_lr, self.dis_layers, self.dis_neurons,
                self.dis_dropout, self.dis_lr)


_AXES = tuple(f.name for f in fields(TrialParams))


@dataclass(frozen=True)
class GridSpec:
    """Axes of the search grid plus the trial budget and per-trial epoch cap.

    The full published ranges (generator depth 5-30 vs discriminator 4-10,
    neurons 100-300 vs 200-400, dropout 0-0.8, learning rate 1e-5-3e-4;
    steps of 2 layers / 50 neurons / 0.1 dropout / 5e-5) are available via
    full_table(), but the default desk_default() grid keeps the run under
    a dozen short trials.
    """
    gen_layers: tuple = (6,)
    gen_neurons: tuple = (150,)
    gen_dropout: tuple = (0.3,)
    gen_lr: tuple = (1.5e-4,)
    dis_layers: tuple = (4,)
    dis_neurons: tuple = (200,)
    dis_dropout: tuple = (0.4,)
    dis_lr: tuple = (2e-4,)
    budget: int = 12
    n_epochs: int = 200
    noise_dim: int = 64
    batch_size: int = 128
    n_val: int = 500
    flip_factor: float = 0.05
    thresholds: CollapseThresholds = CollapseThresholds()

    def __post_init__(self):
        for name in _AXES:
            axis = getattr(self, name)
            if len(axis) == 0:
                raise ValueError(f"grid axis {name} is empty")
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.n_epochs < 1:
            raise ValueError(f"n_epochs must be >= 1, got {self.n_epochs}")

    @classmethod
    def full_table(cls, budget: int = 12, n_epochs: int = 200) -> "GridSpec":
        """The complete published search ranges at the stated step sizes."""
        return cls(gen_layers=_int_steps(5, 30, 2),
                   gen_neurons=_int_steps(100, 300, 50),
                   gen_dropout=_stepped(0.0, 0.8, 0.1),
                   gen_lr=_stepped(1e-5, 3e-4, 5e-5),
                   dis_layers=_int_steps(4, 10, 2),
                   dis_neurons=_int_steps(200, 400, 50),
                   dis_dropout=_stepped(0.0, 0.8, 0.1),
                   dis_lr=_stepped(1e-5, 3e-4, 5e-5),
                   budget=budget, n_epochs=n_epochs)

    @classmethod
    def desk_default(cls) -> "GridSpec":
        """Small grid (4 trials) suitable for a single-machine run."""
        return cls(gen_layers=(6, 10), gen_lr=(1e-4, 1.5e-4))

    def n_total(self) -> int:
        out = 1
        for name in _AXES:
            out *= len(getattr(self, name))
        return out

    def combos(self) -> tuple:
        """Budget-limited trial list in deterministic grid order."""
        axes = [getattr(self, name) for name in _AXES]
        product = itertools.islice(itertools.product(*axes), self.budget)
        return tuple(TrialParams(*values) for values in product)

    def to_dict(self) -> dict:
        doc = {name: list(getattr(self, name)) for name in _AXES}
        doc.update(budget=self.budget, n_epochs=self.n_epochs,
                   noise_dim=self.noise_dim, batch_size=self.batch_size,
                   n_val=self.n_val, flip_factor=self.flip_factor,
                   thresholds={
                       "coverage_floor": self.thresholds.coverage_floor,
                       "divergence_floor": self.thresholds.divergence_floor,
                       "warmup_epochs": self.thresholds.warmup_epochs,
                       "persistence": self.thresholds.persistence,
                   })
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "GridSpec":
        kwargs = {name: tuple(doc[name]) for name in _AXES}
        for name in ("budget", "n_epochs", "noise_dim", "batch_size",
                     "n_val", "flip_factor"):
            if name in doc:
                kwargs[name] = doc[name]
        if "thresholds" in doc:
            kwargs["thresholds"] = CollapseThresholds(**doc["thresholds"])
        return cls(**kwargs)


def trial_seed(seed: int, trial: int) -> int:
    """Deterministic per-trial seed derived from (master seed, trial index)."""
    return int(np.random.SeedSequence([int(seed), int(trial)])
               .generate_state(1)[0])


def trial_config(grid: GridSpec, params: TrialParams, seed: int) -> GanConfig:
    """Materialize one grid point as a full training configuration."""
    gen = NetworkConfig(input_dim=grid.noise_dim, output_dim=N_FEATURES,
                        n_layers=params.gen_layers,
                        n_neurons=params.gen_neurons,
                        dropout_rate=params.gen_dropout,
                        learning_rate=params.gen_lr,
                        output_activation="tanh")
    dis = NetworkConfig(input_dim=N_FEATURES, output_dim=1,
                        n_layers=params.dis_layers,
                        n_neurons=params.dis_neurons,
                        dropout_rate=params.dis_dropout,
                        learning_rate=params.dis_lr,
                        output_activation="sigmoid")
    return GanConfig(gen=gen, dis=dis, noise_dim=grid.noise_dim,
                     batch_size=grid.batch_size, n_epochs=grid.n_epochs,
                     flip_factor=grid.flip_factor, n_val=grid.n_val,
                     thresholds=grid.thresholds, seed=seed)


@dataclass(frozen=True)
class TrialResult:
    """Outcome of a single grid trial. oracle_rate is None unless Healthy."""
    trial: int
    params: TrialParams
    verdict: str
    oracle_rate: float | None
    s_gen: float
    s_dis: float

    def as_row(self) -> tuple:
        rate = "" if self.oracle_rate is None else repr(float(self.oracle_rate))
        return ((self.trial,) + self.params.as_row()
                + (self.verdict, rate, repr(float(self.s_gen)),
                   repr(float(self.s_dis))))


@dataclass(frozen=True)
class SearchResult:
    """All trials plus the Healthy-only ranking (best oracle rate first)."""
    trials: tuple
    ranked: tuple
    diagnostics: str = ""

    @property
    def best(self) -> TrialResult | None:
        return self.ranked[0] if self.ranked else None


def run_grid(grid: GridSpec, dataset: Dataset, classifier, seed: int,
             spacecraft: SpacecraftModel | None = None,
             n_eval: int = 500) -> SearchResult:
    """Train every budgeted grid point and rank the Healthy outcomes.

    Each trial trains on the dataset's scaled feasible rows with a seed
    derived from (seed, trial index); a rerun reproduces the table. For a
    Healthy trial, n_eval transfers are sampled from the best checkpoint
    and re-judged by the feasibility oracle to obtain its oracle rate.
    """
    sc = spacecraft if spacecraft is not None else SpacecraftModel()
    feasible = dataset.feature_matrix(label=1)
    if feasible.shape[0] == 0:
        raise ValueError("dataset has no feasible rows to train on")
    real = apply_scaler(dataset.scaling, feasible)
    baseline = dataset.meta.get("convergence_rate") or (
        feasible.shape[0] / max(len(dataset.rows), 1))
    kappa = dataset.meta.get("kappa", 1.15)
    eta_duty = dataset.meta.get("eta_duty", 0.9)

    results = []
    for index, params in enumerate(grid.combos()):
        config = trial_config(grid, params, trial_seed(seed, index))
        try:
            outcome = train(config, real, classifier)
        except (DivergedError, CollapsedError) as err:
            verdict = (err.report.verdict if err.report is not None
                       else VERDICT_DIVERGED if isinstance(err, DivergedError)
                       else VERDICT_COLLAPSE)
            if err.history is not None and len(err.history) > 0:
                s_gen, s_dis = recent_score_means(err.history)
            else:
                s_gen = s_dis = float("nan")
            results.append(TrialResult(trial=index, params=params,
                                       verdict=verdict, oracle_rate=None,
                                       s_gen=s_gen, s_dis=s_dis))
            continue
        rng_eval = np.random.default_rng(
            np.random.SeedSequence([int(seed), index, 1]))
        samples = sample_transfers(outcome.generator, n_eval,
                                   dataset.scaling, rng_eval)
        report = evaluate_generated(samples, dataset.scaling, sc,
                                    baseline_rate=baseline, kappa=kappa,
                                    eta_duty=eta_duty)
        s_gen, s_dis = recent_score_means(outcome.history)
        results.append(TrialResult(trial=index, params=params,
                                   verdict=VERDICT_HEALTHY,
                                   oracle_rate=report.oracle_rate,
                                   s_gen=s_gen, s_dis=s_dis))

    healthy = [r for r in results if r.verdict == VERDICT_HEALTHY]
    ranked = tuple(sorted(healthy, key=lambda r: (-r.oracle_rate, r.trial)))
    diagnostics = ""
    if not ranked:
        counts = {}
        for r in results:
            counts[r.verdict] = counts.get(r.verdict, 0) + 1
        detail = ", ".join(f"{v}: {c}" for v, c in sorted(counts.items()))
        diagnostics = (f"no Healthy trial among {len(results)} "
                       f"({detail}); ranking is empty")
    return SearchResult(trials=tuple(results), ranked=ranked,
                        diagnostics=diagnostics)


def save_search_csv(result: SearchResult, path) -> None:
    """Ranked Healthy trials first, then the rest in trial order."""
    ranked_ids = {r.trial for r in result.ranked}
    rest = [r for r in result.trials if r.trial not in ranked_ids]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SEARCH_HEADER)
        for r in list(result.ranked) + rest:
            writer.writerow(r.as_row())


def load_search_csv(path) -> tuple:
    """Rows of the trial table as TrialResult values (ranking not restored)."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SEARCH_HEADER:
            raise ValueError(f"unexpected search header {header}")
        for row in reader:
            params = TrialParams(int(row[1]), int(row[2]), float(row[3]),
                                 float(row[4]), int(row[5]), int(row[6]),
                                 float(row[7]), float(row[8]))
            rate = None if row[10] == "" else float(row[10])
            out.append(TrialResult(trial=int(row[0]), params=params,
                                   verdict=row[9], oracle_rate=rate,
                                   s_gen=float(row[11]),
                                   s_dis=float(row[12])))
    return tuple(out)
