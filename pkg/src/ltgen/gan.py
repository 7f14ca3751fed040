"""Adversarial training of a transfer-feature generator.

A dense generator maps Gaussian noise columns onto scaled 22-dimensional
transfer feature vectors; a dense discriminator scores feature columns as
real or generated. Training alternates one discriminator update (real rows
labeled 1 with a small flipped fraction, generated rows labeled 0) with one
non-saturating generator update through the frozen discriminator. Health
telemetry is the score pair

    s_gen = mean(y_hat_gen)
    s_dis = (mean(y_hat_real) + mean(1 - y_hat_gen)) / 2

plus a per-epoch validation accuracy from a feasibility classifier, and a
bin-coverage/KS collapse detector that distinguishes mode collapse (low
variety at decent validation accuracy) from divergence (validation accuracy
below a floor after warm-up).
"""
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .evaluation import bin_occupancy, ks_statistic
from .nn import (AdamState, DenseNet, NetworkConfig, adam_step, backward,
                 bce_loss, forward, init_network)
from .pipeline import FEATURE_NAMES, ScalingSpec, invert_scaler

N_FEATURES = len(FEATURE_NAMES)
N_COVERAGE_BINS = 20
MIN_COLLAPSE_SAMPLES = 500

VERDICT_HEALTHY = "Healthy"
VERDICT_COLLAPSE = "ModeCollapse"
VERDICT_DIVERGED = "Diverged"
VERDICTS = (VERDICT_HEALTHY, VERDICT_COLLAPSE, VERDICT_DIVERGED)

HISTORY_HEADER = ["iter", "epoch", "gen_loss", "dis_loss", "s_gen", "s_dis",
                  "val_acc"]


class GanError(Exception):
    """Base class for adversarial-training failures."""


class DivergedError(GanError):
    """Training never balanced: non-finite loss, or validation accuracy
    stayed below the divergence floor after warm-up."""

    def __init__(self, message: str, history: "TrainingMetrics | None" = None,
                 report: "CollapseReport | None" = None):
        super().__init__(message)
        self.history = history
        self.report = report


class CollapsedError(GanError):
    """Generator variety collapsed: mean bin coverage stayed below the floor
    for `persistence` consecutive validations."""

    def __init__(self, message: str, history: "TrainingMetrics | None" = None,
                 report: "CollapseReport | None" = None):
        super().__init__(message)
        self.history = history
        self.report = report


@dataclass(frozen=True)
class ScoreBands:
    """Healthy ranges for the two training scores (telemetry, not a stop rule)."""
    gen_low: float = 0.3
    gen_high: float = 0.4
    dis_low: float = 0.6
    dis_high: float = 0.7

    def __post_init__(self):
        for lo, hi, name in ((self.gen_low, self.gen_high, "gen"),
                             (self.dis_low, self.dis_high, "dis")):
            if not (0.0 <= lo < hi <= 1.0):
                raise ValueError(f"invalid {name} score band [{lo}, {hi}]")

    def gen_in_band(self, s_gen: float) -> bool:
        return self.gen_low <= s_gen <= self.gen_high

    def dis_in_band(self, s_dis: float) -> bool:
        return self.dis_low <= s_dis <= self.dis_high


@dataclass(frozen=True)
class CollapseThresholds:
    """Stop-rule knobs for the collapse/divergence detector.

    warmup_epochs gates both stop rules: early-training fluctuation routinely
    trips either test, so verdicts only count against a run once the epoch
    counter has passed the warm-up. persistence is the number of consecutive
    ModeCollapse validations required before training aborts.
    """
    coverage_floor: float = 0.6
    divergence_floor: float = 0.2
    warmup_epochs: int = 10
    persistence: int = 5

    def __post_init__(self):
        if not (0.0 <= self.coverage_floor <= 1.0):
            raise ValueError(f"coverage_floor must be in [0, 1], got {self.coverage_floor}")
        if not (0.0 <= self.divergence_floor <= 1.0):
            raise ValueError(f"divergence_floor must be in [0, 1], got {self.divergence_floor}")
        if self.warmup_epochs < 0:
            raise ValueError("warmup_epochs must be >= 0")
        if self.persistence < 1:
            raise ValueError("persistence must be >= 1")


@dataclass(frozen=True)
class GanConfig:
    """Hyperparameters of one adversarial training run.

    noise_dim is the generator input width; each training batch feeds the
    generator a (noise_dim, batch_size) standard-normal matrix.
    """
    gen: NetworkConfig
    dis: NetworkConfig
    noise_dim: int = 64
    batch_size: int = 128
    n_epochs: int = 200
    flip_factor: float = 0.05
    bands: ScoreBands = field(default_factory=ScoreBands)
    thresholds: CollapseThresholds = field(default_factory=CollapseThresholds)
    n_val: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.noise_dim < 1:
            raise ValueError(f"noise_dim must be >= 1, got {self.noise_dim}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.n_epochs < 1:
            raise ValueError(f"n_epochs must be >= 1, got {self.n_epochs}")
        if not (0.0 <= self.flip_factor < 0.5):
            raise ValueError(f"flip_factor must be in [0, 0.5), got {self.flip_factor}")
        if self.gen.input_dim != self.noise_dim:
            raise ValueError(f"generator input_dim {self.gen.input_dim} != "
                             f"noise_dim {self.noise_dim}")
        if self.gen.output_dim != N_FEATURES or self.dis.input_dim != N_FEATURES:
            raise ValueError(
                f"generator output_dim and discriminator input_dim must both "
                f"be {N_FEATURES}, got {self.gen.output_dim}/{self.dis.input_dim}")
        if self.dis.output_dim != 1:
            raise ValueError(f"discriminator output_dim must be 1, got {self.dis.output_dim}")
        if self.gen.output_activation != "tanh":
            raise ValueError("generator head must be tanh")
        if self.dis.output_activation != "sigmoid":
            raise ValueError("discriminator head must be sigmoid")
        if self.n_val < MIN_COLLAPSE_SAMPLES:
            raise ValueError(f"n_val must be >= {MIN_COLLAPSE_SAMPLES}, got {self.n_val}")

    def to_dict(self) -> dict:
        def net_dict(cfg: NetworkConfig) -> dict:
            return {
                "input_dim": cfg.input_dim,
                "output_dim": cfg.output_dim,
                "n_layers": cfg.n_layers,
                "n_neurons": cfg.n_neurons,
                "dropout_rate": cfg.dropout_rate,
                "learning_rate": cfg.learning_rate,
                "output_activation": cfg.output_activation,
            }
        return {
            "gen": net_dict(self.gen),
            "dis": net_dict(self.dis),
            "noise_dim": self.noise_dim,
            "batch_size": self.batch_size,
            "n_epochs": self.n_epochs,
            "flip_factor": self.flip_factor,
            "bands": {"gen_low": self.bands.gen_low, "gen_high": self.bands.gen_high,
                      "dis_low": self.bands.dis_low, "dis_high": self.bands.dis_high},
            "thresholds": {
                "coverage_floor": self.thresholds.coverage_floor,
                "divergence_floor": self.thresholds.divergence_floor,
                "warmup_epochs": self.thresholds.warmup_epochs,
                "persistence": self.thresholds.persistence,
            },
            "n_val": self.n_val,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(doc: dict) -> "GanConfig":
        return GanConfig(
            gen=NetworkConfig(**doc["gen"]),
            dis=NetworkConfig(**doc["dis"]),
            noise_dim=doc["noise_dim"],
            batch_size=doc["batch_size"],
            n_epochs=doc["n_epochs"],
            flip_factor=doc["flip_factor"],
            bands=ScoreBands(**doc["bands"]),
            thresholds=CollapseThresholds(**doc["thresholds"]),
            n_val=doc["n_val"],
            seed=doc["seed"],
        )


def default_config(noise_dim: int = 64, batch_size: int = 128,
                   n_epochs: int = 200, seed: int = 0) -> GanConfig:
    """Reference configuration: a deep, high-capacity generator (20 layers
    of 250 neurons, dropout 0.5, lr 1.5e-4) against a shallower
    discriminator (6 layers of 300 neurons, dropout 0.4, lr 2e-4)."""
    gen = NetworkConfig(input_dim=noise_dim, output_dim=N_FEATURES,
                        n_layers=20, n_neurons=250, dropout_rate=0.5,
                        learning_rate=1.5e-4, output_activation="tanh")
    dis = NetworkConfig(input_dim=N_FEATURES, output_dim=1, n_layers=6,
                        n_neurons=300, dropout_rate=0.4, learning_rate=2e-4,
                        output_activation="sigmoid")
    return GanConfig(gen=gen, dis=dis, noise_dim=noise_dim,
                     batch_size=batch_size, n_epochs=n_epochs, seed=seed)


def destabilized_config(config: GanConfig) -> GanConfig:
    """Variant known to destabilize training, for collapse-detector
    experiments: faster generator steps (lr 2e-4), heavier discriminator
    dropout (0.5), and a slowed discriminator (lr 1.75e-4)."""
    gen = replace(config.gen, learning_rate=2e-4)
    dis = replace(config.dis, dropout_rate=0.5, learning_rate=1.75e-4)
    return replace(config, gen=gen, dis=dis)


@dataclass
class Gan:
    """Paired networks plus their optimizer states."""
    config: GanConfig
    generator: DenseNet
    discriminator: DenseNet
    gen_opt: AdamState
    dis_opt: AdamState


def make_gan(config: GanConfig, rng: np.random.Generator | None = None) -> Gan:
    """Build freshly initialized generator/discriminator from one rng stream."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    generator = init_network(config.gen, rng, seed=config.seed)
    discriminator = init_network(config.dis, rng, seed=config.seed)
    return Gan(config=config, generator=generator, discriminator=discriminator,
               gen_opt=AdamState(generator.parameters()),
               dis_opt=AdamState(discriminator.parameters()))


@dataclass(frozen=True)
class StepMetrics:
    """Losses and scores of one train_step."""
    gen_loss: float
    dis_loss: float
    s_gen: float
    s_dis: float


@dataclass
class TrainingMetrics:
    """Per-iteration training trace with sparse per-epoch validation accuracy.

    val_acc holds None except at iterations where a validation ran.
    """
    iterations: list = field(default_factory=list)
    epochs: list = field(default_factory=list)
    gen_loss: list = field(default_factory=list)
    dis_loss: list = field(default_factory=list)
    s_gen: list = field(default_factory=list)
    s_dis: list = field(default_factory=list)
    val_acc: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.iterations)

    def append(self, iteration: int, epoch: int, step: StepMetrics) -> None:
        for name, score in (("s_gen", step.s_gen), ("s_dis", step.s_dis)):
            if not (0.0 <= score <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {score}")
        self.iterations.append(int(iteration))
        self.epochs.append(int(epoch))
        self.gen_loss.append(float(step.gen_loss))
        self.dis_loss.append(float(step.dis_loss))
        self.s_gen.append(float(step.s_gen))
        self.s_dis.append(float(step.s_dis))
        self.val_acc.append(None)

    def record_validation(self, accuracy: float) -> None:
        """Attach a validation accuracy to the most recent iteration."""
        if not self.iterations:
            raise ValueError("no iterations recorded yet")
        if not (0.0 <= accuracy <= 1.0):
            raise ValueError(f"validation accuracy must be in [0, 1], got {accuracy}")
        self.val_acc[-1] = float(accuracy)

    def validation_trace(self) -> tuple[np.ndarray, np.ndarray]:
        """(epoch, accuracy) pairs for the iterations where validation ran."""
        epochs = [e for e, a in zip(self.epochs, self.val_acc) if a is not None]
        accs = [a for a in self.val_acc if a is not None]
        return np.array(epochs, dtype=int), np.array(accs, dtype=float)


def save_history(metrics: TrainingMetrics, path) -> None:
    """Write the training trace as CSV (val_acc blank where absent)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_HEADER)
        for i in range(len(metrics)):
            acc = metrics.val_acc[i]
            writer.writerow([
                metrics.iterations[i],
                metrics.epochs[i],
                repr(float(metrics.gen_loss[i])),
                repr(float(metrics.dis_loss[i])),
                repr(float(metrics.s_gen[i])),
                repr(float(metrics.s_dis[i])),
                "" if acc is None else repr(float(acc)),
            ])


def load_history(path) -> TrainingMetrics:
    metrics = TrainingMetrics()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != HISTORY_HEADER:
            raise ValueError(f"unexpected history header {header}")
        for row in reader:
            metrics.iterations.append(int(row[0]))
            metrics.epochs.append(int(row[1]))
            metrics.gen_loss.append(float(row[2]))
            metrics.dis_loss.append(float(row[3]))
            metrics.s_gen.append(float(row[4]))
            metrics.s_dis.append(float(row[5]))
            metrics.val_acc.append(None if row[6] == "" else float(row[6]))
    return metrics


def recent_score_means(history: TrainingMetrics,
                       n_epochs: int = 10) -> tuple[float, float]:
    """Mean (s_gen, s_dis) over the iterations of the last n_epochs epochs."""
    if len(history) == 0:
        raise ValueError("history is empty")
    if n_epochs < 1:
        raise ValueError(f"n_epochs must be >= 1, got {n_epochs}")
    epochs = np.asarray(history.epochs)
    keep = epochs > epochs.max() - n_epochs
    s_gen = np.asarray(history.s_gen)[keep]
    s_dis = np.asarray(history.s_dis)[keep]
    return float(s_gen.mean()), float(s_dis.mean())


def sample_noise(noise_dim: int, batch_size: int,
                 rng: np.random.Generator) -> np.ndarray:
    """(noise_dim, batch_size) matrix of i.i.d. standard-normal entries."""
    if noise_dim < 1 or batch_size < 1:
        raise ValueError(f"noise matrix dims must be >= 1, got "
                         f"({noise_dim}, {batch_size})")
    return rng.standard_normal((noise_dim, batch_size))


def compute_scores(y_hat_real: np.ndarray, y_hat_gen: np.ndarray) -> tuple[float, float]:
    """Score pair from one discriminator pass over real and generated batches.

    s_gen is the mean probability assigned to generated samples; s_dis
    averages the discriminator's correctness on both halves. At the
    adversarial ideal both equal 0.5.
    """
    real = np.asarray(y_hat_real, dtype=float).ravel()
    gen = np.asarray(y_hat_gen, dtype=float).ravel()
    if real.size != gen.size or real.size == 0:
        raise ValueError(f"score inputs must be equal-length and non-empty, "
                         f"got {real.size}/{gen.size}")
    for name, arr in (("y_hat_real", real), ("y_hat_gen", gen)):
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValueError(f"{name} entries must lie in [0, 1]")
    s_gen = float(np.mean(gen))
    s_dis = 0.5 * float(np.mean(real)) + 0.5 * (1.0 - s_gen)
    return s_gen, s_dis


def train_step(gan: Gan, real_batch: np.ndarray,
               rng: np.random.Generator) -> StepMetrics:
    """One discriminator update then one generator update.

    real_batch is a (n_features, n_b) column batch of scaled feasible rows.
    The discriminator trains on one concatenated [real | generated] batch
    with floor(flip_factor * n_b) real labels flipped to 0; the generator
    then trains on fresh noise against all-ones labels through the frozen
    discriminator (non-saturating loss).
    """
    cfg = gan.config
    real_batch = np.asarray(real_batch, dtype=float)
    if real_batch.ndim != 2 or real_batch.shape[0] != cfg.dis.input_dim:
        raise ValueError(f"real batch shape {real_batch.shape} incompatible "
                         f"with discriminator input {cfg.dis.input_dim}")
    n_b = real_batch.shape[1]
    if n_b < 1:
        raise ValueError("empty real batch")

    # discriminator update
    noise = sample_noise(cfg.noise_dim, n_b, rng)
    fake, _ = forward(gan.generator, noise, mode="train", rng=rng)
    dis_in = np.concatenate([real_batch, fake], axis=1)
    labels = np.ones((1, 2 * n_b))
    labels[0, n_b:] = 0.0
    n_flip = int(math.floor(cfg.flip_factor * n_b))
    if n_flip > 0:
        flip_idx = rng.choice(n_b, size=n_flip, replace=False)
        labels[0, flip_idx] = 0.0
    preds, dis_cache = forward(gan.discriminator, dis_in, mode="train", rng=rng)
    dis_loss, dis_loss_grad = bce_loss(preds, labels)
    if not math.isfinite(dis_loss):
        raise DivergedError(f"non-finite discriminator loss {dis_loss}")
    dis_grads = backward(gan.discriminator, dis_cache, dis_loss_grad)
    adam_step(gan.dis_opt, gan.discriminator.parameters(), dis_grads.as_list(),
              cfg.dis.learning_rate)
    s_gen, s_dis = compute_scores(preds[0, :n_b], preds[0, n_b:])

    # generator update through the frozen discriminator
    noise = sample_noise(cfg.noise_dim, n_b, rng)
    fake, gen_cache = forward(gan.generator, noise, mode="train", rng=rng)
    preds, dis_cache = forward(gan.discriminator, fake, mode="train", rng=rng)
    gen_loss, gen_loss_grad = bce_loss(preds, np.ones_like(preds))
    if not math.isfinite(gen_loss):
        raise DivergedError(f"non-finite generator loss {gen_loss}")
    through = backward(gan.discriminator, dis_cache, gen_loss_grad)
    gen_grads = backward(gan.generator, gen_cache, through.d_input)
    adam_step(gan.gen_opt, gan.generator.parameters(), gen_grads.as_list(),
              cfg.gen.learning_rate)

    return StepMetrics(gen_loss=gen_loss, dis_loss=dis_loss,
                       s_gen=s_gen, s_dis=s_dis)


def validation_cadence(n_train: int, n_b: int) -> int:
    """Iterations between validations: floor(n_train / n_b)."""
    if n_b < 1:
        raise ValueError(f"batch size must be >= 1, got {n_b}")
    if n_train < n_b:
        raise ValueError(f"training set ({n_train}) smaller than batch ({n_b})")
    return n_train // n_b


def generate_scaled(generator: DenseNet, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """(n_features, n) scaled samples from the generator in eval mode."""
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    noise = sample_noise(generator.config.input_dim, n, rng)
    samples, _ = forward(generator, noise, mode="eval")
    return samples


def _predicted_feasible_fraction(classifier, samples: np.ndarray) -> float:
    """Fraction of (n_features, n) scaled columns the classifier accepts."""
    flags = np.asarray(classifier.predict_feasible(samples))
    if flags.size != samples.shape[1]:
        raise ValueError(f"classifier returned {flags.size} predictions for "
                         f"{samples.shape[1]} samples")
    return float(np.mean(flags.astype(bool)))


def validate_epoch(gan: Gan, classifier, n_val: int,
                   scaler: ScalingSpec | None = None,
                   rng: np.random.Generator | None = None) -> float:
    """Classifier-estimated feasible fraction of n_val fresh generated samples.

    Sampling is in scaled space (the classifier consumes scaled features);
    when a scaler is supplied it is only checked for dimensional agreement.
    The true oracle rate of the same samples may differ — that comparison is
    the eval module's job.
    """
    if rng is None:
        rng = np.random.default_rng(gan.config.seed)
    samples = generate_scaled(gan.generator, n_val, rng)
    if scaler is not None and len(scaler.feature_names) != samples.shape[0]:
        raise ValueError(f"scaler covers {len(scaler.feature_names)} features, "
                         f"generator emits {samples.shape[0]}")
    return _predicted_feasible_fraction(classifier, samples)


@dataclass(frozen=True)
class RealStats:
    """Per-feature range, bin occupancy, and sorted columns of the real rows.

    occupied[j] marks which of the n_bins equal-width bins over
    [mins[j], maxs[j]] contain at least one real sample; columns holds each
    feature's sorted values for KS comparisons.
    """
    mins: np.ndarray
    maxs: np.ndarray
    occupied: np.ndarray
    columns: np.ndarray
    n_bins: int = N_COVERAGE_BINS


def build_real_stats(real_rows: np.ndarray,
                     n_bins: int = N_COVERAGE_BINS) -> RealStats:
    """Collapse-detector reference statistics from (n, n_features) real rows."""
    rows = np.asarray(real_rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise ValueError(f"need a (n >= 2, n_features) row matrix, got {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("real rows must be finite")
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    mins = rows.min(axis=0)
    maxs = rows.max(axis=0)
    occupied = np.stack([
        bin_occupancy(rows[:, j], mins[j], maxs[j], n_bins)
        for j in range(rows.shape[1])
    ])
    return RealStats(mins=mins, maxs=maxs, occupied=occupied,
                     columns=np.sort(rows, axis=0), n_bins=n_bins)


@dataclass(frozen=True)
class CollapseReport:
    """Variety diagnostics of one batch of generated samples.

    coverage[j] is the fraction of real-occupied bins of feature j that also
    hold at least one generated sample, so the real set scores exactly 1
    against itself and a constant generator scores 1/(occupied bins).
    """
    coverage: tuple
    ks: tuple
    mean_coverage: float
    verdict: str
    val_acc: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "coverage", tuple(float(c) for c in self.coverage))
        object.__setattr__(self, "ks", tuple(float(k) for k in self.ks))
        if len(self.coverage) != len(self.ks):
            raise ValueError("coverage/ks lengths do not match")
        for c in self.coverage:
            if not (0.0 <= c <= 1.0):
                raise ValueError(f"coverage entries must be in [0, 1], got {c}")
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    def to_dict(self) -> dict:
        return {
            "coverage": list(self.coverage),
            "ks": list(self.ks),
            "mean_coverage": self.mean_coverage,
            "verdict": self.verdict,
            "val_acc": self.val_acc,
        }

    @staticmethod
    def from_dict(doc: dict) -> "CollapseReport":
        return CollapseReport(coverage=tuple(doc["coverage"]), ks=tuple(doc["ks"]),
                              mean_coverage=doc["mean_coverage"],
                              verdict=doc["verdict"], val_acc=doc.get("val_acc"))


def detect_collapse(gen_samples: np.ndarray, real_stats: RealStats,
                    thresholds: CollapseThresholds,
                    val_acc: float | None = None,
                    after_warmup: bool = True) -> CollapseReport:
    """Coverage/KS diagnostics plus a Healthy/ModeCollapse/Diverged verdict.

    gen_samples is a (n, n_features) row matrix of scaled samples, n >= 500.
    Diverged takes precedence when the validation accuracy sits below the
    divergence floor after warm-up; otherwise mean coverage below the
    coverage floor means ModeCollapse.
    """
    samples = np.asarray(gen_samples, dtype=float)
    n_features = real_stats.mins.size
    if samples.ndim != 2 or samples.shape[1] != n_features:
        raise ValueError(f"expected (n, {n_features}) samples, got {samples.shape}")
    if samples.shape[0] < MIN_COLLAPSE_SAMPLES:
        raise ValueError(f"collapse detection needs >= {MIN_COLLAPSE_SAMPLES} "
                         f"samples, got {samples.shape[0]}")
    if val_acc is not None and not (0.0 <= val_acc <= 1.0):
        raise ValueError(f"val_acc must be in [0, 1], got {val_acc}")

    coverage = np.empty(n_features)
    ks = np.empty(n_features)
    for j in range(n_features):
        gen_occ = bin_occupancy(samples[:, j], real_stats.mins[j],
                                 real_stats.maxs[j], real_stats.n_bins)
        real_occ = real_stats.occupied[j]
        n_real = int(np.count_nonzero(real_occ))
        coverage[j] = (np.count_nonzero(gen_occ & real_occ) / n_real
                       if n_real else 0.0)
        ks[j] = ks_statistic(samples[:, j], real_stats.columns[:, j])
    mean_coverage = float(coverage.mean())

    if val_acc is not None and after_warmup and val_acc < thresholds.divergence_floor:
        verdict = VERDICT_DIVERGED
    elif mean_coverage < thresholds.coverage_floor:
        verdict = VERDICT_COLLAPSE
    else:
        verdict = VERDICT_HEALTHY
    return CollapseReport(coverage=tuple(coverage), ks=tuple(ks),
                          mean_coverage=mean_coverage, verdict=verdict,
                          val_acc=val_acc)


@dataclass
class TrainResult:
    """Outcome of a completed (non-aborted) training run.

    generator is the checkpoint with the best validation accuracy among
    Healthy validations; discriminator is the final one. report is the
    collapse report at the best checkpoint, last_report the final one.
    """
    generator: DenseNet
    discriminator: DenseNet
    history: TrainingMetrics
    report: CollapseReport
    last_report: CollapseReport
    best_epoch: int
    best_val_acc: float


def train(config: GanConfig, real_rows: np.ndarray, classifier,
          callbacks: tuple = ()) -> TrainResult:
    """Full adversarial training on scaled feasible rows.

    real_rows is a (n_train, n_features) matrix of scaled feasible feature
    vectors. Each epoch shuffles the rows and runs floor(n_train/batch)
    train_steps, then validates: n_val generated samples are scored by the
    classifier and checked by the collapse detector. Aborts with
    DivergedError/CollapsedError per the detector's stop rules (both gated
    by the warm-up, ModeCollapse additionally by persistence); otherwise
    returns the best Healthy checkpoint. Accuracy ties prefer the most
    recent Healthy epoch: the classifier's estimate saturates long before
    the generator stops improving, and keeping the first saturated epoch
    would freeze the checkpoint at whatever output first fooled it.
    callbacks are invoked after every validation as
    cb(epoch=, iteration=, accuracy=, report=).
    """
    rows = np.asarray(real_rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != config.gen.output_dim:
        raise ValueError(f"expected (n, {config.gen.output_dim}) training rows, "
                         f"got {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("training rows must be finite")

    rng = np.random.default_rng(config.seed)
    gan = make_gan(config, rng)
    stats = build_real_stats(rows)
    n_train = rows.shape[0]
    f_valid = validation_cadence(n_train, config.batch_size)
    thresholds = config.thresholds

    history = TrainingMetrics()
    last_report = None
    best = None  # (val_acc, epoch, generator copy, report)
    consecutive_collapse = 0
    iteration = 0

    for epoch in range(1, config.n_epochs + 1):
        perm = rng.permutation(n_train)
        for k in range(f_valid):
            batch = rows[perm[k * config.batch_size:(k + 1) * config.batch_size]].T
            try:
                step = train_step(gan, batch, rng)
            except DivergedError as err:
                raise DivergedError(str(err), history=history,
                                    report=last_report) from None
            iteration += 1
            history.append(iteration, epoch, step)

            if iteration % f_valid != 0:
                continue
            samples = generate_scaled(gan.generator, config.n_val, rng)
            accuracy = _predicted_feasible_fraction(classifier, samples)
            after_warmup = epoch > thresholds.warmup_epochs
            report = detect_collapse(samples.T, stats, thresholds,
                                     val_acc=accuracy, after_warmup=after_warmup)
            history.record_validation(accuracy)
            last_report = report
            for cb in callbacks:
                cb(epoch=epoch, iteration=iteration, accuracy=accuracy,
                   report=report)

            if report.verdict == VERDICT_DIVERGED:
                raise DivergedError(
                    f"validation accuracy {accuracy:.4f} below divergence "
                    f"floor {thresholds.divergence_floor} at epoch {epoch}",
                    history=history, report=report)
            if report.verdict == VERDICT_COLLAPSE and after_warmup:
                consecutive_collapse += 1
                if consecutive_collapse >= thresholds.persistence:
                    raise CollapsedError(
                        f"mean coverage {report.mean_coverage:.4f} below "
                        f"{thresholds.coverage_floor} for "
                        f"{consecutive_collapse} consecutive validations",
                        history=history, report=report)
            else:
                consecutive_collapse = 0
            if report.verdict == VERDICT_HEALTHY and \
                    (best is None or accuracy >= best[0]):
                best = (accuracy, epoch, gan.generator.copy(), report)

    if best is None:
        raise CollapsedError("no Healthy validation epoch to checkpoint",
                             history=history, report=last_report)
    best_acc, best_epoch, best_gen, best_report = best
    return TrainResult(generator=best_gen, discriminator=gan.discriminator,
                       history=history, report=best_report,
                       last_report=last_report, best_epoch=best_epoch,
                       best_val_acc=best_acc)


def sample_transfers(generator: DenseNet, n: int, scaler: ScalingSpec,
                     rng: np.random.Generator) -> np.ndarray:
    """(n, n_features) unscaled synthetic feature vectors from the generator.

    Outputs are free-standing feature vectors: they are not tied to catalog
    asteroid ids. Tanh outputs are mapped back through the inverse scaling,
    so every raw feature lies inside the scaler's observed [min, max].
    """
    scaled = generate_scaled(generator, n, rng)
    return invert_scaler(scaler, scaled.T)
