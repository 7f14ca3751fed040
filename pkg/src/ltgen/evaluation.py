"""Diagnostics for generated transfer features.

Re-evaluates generated feature vectors with the analytic feasibility oracle,
summarizes per-feature distributions (quartiles, histograms, KS distances,
bin coverage), and contrasts runs against the conventional pipeline baseline.
All exports are plot-ready CSV/JSON documents; nothing here renders figures.
"""
import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .astro import (ElementError, GravParam, Mee, NoConvergenceError, SUN,
                    angular_momentum, mee_to_classical, orbital_energy)
from .pipeline import (Asteroid, Catalog, FEATURE_NAMES, MAX_TOF_DAYS,
                       ScalingSpec, SpacecraftModel, TransferCandidate,
                       apply_scaler, feasibility_oracle)

N_BINS = 20
REASON_INVALID_ELEMENTS = "invalid_elements"

# the eight features reported in the per-feature summary table
REPORT_FEATURES = ("dt_lt", "m_i", "d_p", "d_f", "d_g", "d_h", "d_k", "d_L")

SUMMARY_HEADER = ["feature", "min", "max", "mean", "median", "q1", "q3"]
HISTOGRAM_HEADER = ["feature", "bin_lo", "bin_hi", "sample_count",
                    "reference_count"]
COMPARISON_HEADER = ["feature", "median_gap_a", "median_gap_b", "coverage_a",
                     "coverage_b"]

_COL = {name: j for j, name in enumerate(FEATURE_NAMES)}
_DELTA_NAMES = ("d_p", "d_f", "d_g", "d_h", "d_k", "d_L", "d_energy", "d_angmom")


def ks_statistic(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """Two-sample Kolmogorov-Smirnov distance (sup gap between the ECDFs)."""
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("KS statistic needs non-empty samples")
    return float(_scipy_stats.ks_2samp(a, b).statistic)


def bin_counts(values: np.ndarray, lo: float, hi: float,
               n_bins: int = N_BINS) -> np.ndarray:
    """Counts per equal-width bin over [lo, hi]; values outside fall nowhere.

    A degenerate range collapses to a single bin at lo.
    """
    values = np.asarray(values, dtype=float)
    if n_bins < 1:
        raise ValueError(f"n_bins must be >= 1, got {n_bins}")
    if hi > lo:
        counts, _ = np.histogram(values, bins=n_bins, range=(lo, hi))
        return counts
    counts = np.zeros(n_bins, dtype=int)
    counts[0] = int(np.count_nonzero(values == lo))
    return counts


def bin_occupancy(values: np.ndarray, lo: float, hi: float,
                  n_bins: int = N_BINS) -> np.ndarray:
    """Which equal-width bins over [lo, hi] contain >= 1 value (bool mask)."""
    return bin_counts(values, lo, hi, n_bins) > 0


def coverage_ratio(sample: np.ndarray, reference: np.ndarray, lo: float,
                   hi: float, n_bins: int = N_BINS) -> float:
    """Fraction of reference-occupied bins that the sample also occupies."""
    ref_occ = bin_occupancy(reference, lo, hi, n_bins)
    n_ref = int(np.count_nonzero(ref_occ))
    if n_ref == 0:
        return 0.0
    sample_occ = bin_occupancy(sample, lo, hi, n_bins)
    return float(np.count_nonzero(sample_occ & ref_occ) / n_ref)


# --- oracle convergence of generated samples ---------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    """Oracle feasibility of a batch of generated feature vectors.

    lift = oracle_rate / baseline_rate, the headline improvement over the
    conventional pipeline. mean_residual is the mean (over reconstructable
    samples) of the per-sample max componentwise |stored delta - recomputed
    delta| in scaled units; n_clamped counts samples whose m_i or dt_lt
    needed clamping before oracle evaluation.
    """
    n_samples: int
    oracle_rate: float
    baseline_rate: float
    lift: float
    mean_residual: float
    n_clamped: int
    classifier_rate: float | None = None
    reject_counts: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "reject_counts",
                           tuple((str(r), int(c)) for r, c in self.reject_counts))
        if self.n_samples < 1:
            raise ValueError("report needs at least one sample")
        for name in ("oracle_rate", "baseline_rate"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if self.classifier_rate is not None and \
                not (0.0 <= self.classifier_rate <= 1.0):
            raise ValueError(f"classifier_rate must be in [0, 1], "
                             f"got {self.classifier_rate}")
        if self.baseline_rate == 0.0:
            raise ValueError("baseline_rate must be positive")
        if self.lift < 0.0:
            raise ValueError(f"lift must be >= 0, got {self.lift}")
        if self.n_clamped < 0 or self.n_clamped > self.n_samples:
            raise ValueError("n_clamped out of range")

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "oracle_rate": self.oracle_rate,
            "baseline_rate": self.baseline_rate,
            "lift": self.lift,
            "mean_residual": self.mean_residual,
            "n_clamped": self.n_clamped,
            "classifier_rate": self.classifier_rate,
            "reject_counts": {reason: count for reason, count in self.reject_counts},
        }

    @staticmethod
    def from_dict(doc: dict) -> "ConvergenceReport":
        return ConvergenceReport(
            n_samples=doc["n_samples"], oracle_rate=doc["oracle_rate"],
            baseline_rate=doc["baseline_rate"], lift=doc["lift"],
            mean_residual=doc["mean_residual"], n_clamped=doc["n_clamped"],
            classifier_rate=doc.get("classifier_rate"),
            reject_counts=tuple(sorted(doc.get("reject_counts", {}).items())),
        )


def _reconstruct(row: np.ndarray, sc: SpacecraftModel):
    """Oracle inputs from (mee1, mee2, m_i, dt_lt) only.

    Both element sets are taken as epoch-0 snapshots, departure at t0 = 0;
    the impulsive seed is fixed at dt_lt / 1.5 so dt_lt sits inside the
    low-thrust window. Returns (candidate, catalog, elements1, elements2,
    clamped flag).
    """
    lo, hi = sc.m0_range
    m_i = min(max(float(row[_COL["m_i"]]), lo), hi)
    dt_lt = min(max(float(row[_COL["dt_lt"]]), 1.0), MAX_TOF_DAYS)
    clamped = (m_i != row[_COL["m_i"]]) or (dt_lt != row[_COL["dt_lt"]])
    mee1 = Mee(p=row[_COL["p1"]], f=row[_COL["f1"]], g=row[_COL["g1"]],
               h=row[_COL["h1"]], k=row[_COL["k1"]], L=row[_COL["L1"]])
    mee2 = Mee(p=row[_COL["p2"]], f=row[_COL["f2"]], g=row[_COL["g2"]],
               h=row[_COL["h2"]], k=row[_COL["k2"]], L=row[_COL["L2"]])
    el1 = mee_to_classical(mee1)
    el2 = mee_to_classical(mee2)
    catalog = Catalog((Asteroid(id="gen-from", elements=el1, epoch=0.0),
                       Asteroid(id="gen-to", elements=el2, epoch=0.0)))
    cand = TransferCandidate(from_id="gen-from", to_id="gen-to", t0=0.0,
                             m_i=m_i, dt_lt=dt_lt, dt_impls=dt_lt / 1.5)
    return cand, catalog, el1, el2, clamped


def _consistency_residual(row: np.ndarray, el1, el2, mee_slopes: np.ndarray,
                          mu: GravParam) -> float:
    """Max componentwise |stored delta - recomputed delta| in scaled units."""
    recomputed = np.array([
        row[_COL["p1"]] - row[_COL["p2"]],
        row[_COL["f1"]] - row[_COL["f2"]],
        row[_COL["g1"]] - row[_COL["g2"]],
        row[_COL["h1"]] - row[_COL["h2"]],
        row[_COL["k1"]] - row[_COL["k2"]],
        row[_COL["L1"]] - row[_COL["L2"]],
        orbital_energy(el1, mu) - orbital_energy(el2, mu),
        angular_momentum(el1, mu) - angular_momentum(el2, mu),
    ])
    stored = np.array([row[_COL[name]] for name in _DELTA_NAMES])
    return float(np.max(np.abs(stored - recomputed) * mee_slopes))


def evaluate_generated(samples: np.ndarray, scaler: ScalingSpec,
                       sc: SpacecraftModel, baseline_rate: float,
                       kappa: float = 1.15, eta_duty: float = 0.9,
                       classifier=None, mu: GravParam = SUN) -> ConvergenceReport:
    """Oracle convergence rate of unscaled (n, 22) generated feature rows.

    Feasibility of each row is decided from the reconstructed pair orbits
    alone; the redundant delta columns only feed the consistency residual.
    Rows whose elements cannot be reconstructed (or whose Lambert/propagation
    fails) count as infeasible, never as errors. When a classifier is given,
    its feasible fraction on the scaled rows is reported alongside.
    """
    rows = np.asarray(samples, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(FEATURE_NAMES):
        raise ValueError(f"expected (n, {len(FEATURE_NAMES)}) samples, "
                         f"got {rows.shape}")
    if rows.shape[0] < 1:
        raise ValueError("need at least one sample")
    if not (0.0 < baseline_rate <= 1.0):
        raise ValueError(f"baseline_rate must be in (0, 1], got {baseline_rate}")

    mins = np.array(scaler.mins)
    maxs = np.array(scaler.maxs)
    delta_idx = [_COL[name] for name in _DELTA_NAMES]
    mee_slopes = 2.0 / (maxs[delta_idx] - mins[delta_idx])

    n_feasible = 0
    n_clamped = 0
    residuals = []
    reject_counts: dict[str, int] = {}
    for row in rows:
        try:
            cand, catalog, el1, el2, clamped = _reconstruct(row, sc)
        except (ElementError, NoConvergenceError, ValueError):
            reject_counts[REASON_INVALID_ELEMENTS] = \
                reject_counts.get(REASON_INVALID_ELEMENTS, 0) + 1
            continue
        n_clamped += int(clamped)
        residuals.append(_consistency_residual(row, el1, el2, mee_slopes, mu))
        report = feasibility_oracle(cand, catalog, sc, kappa, eta_duty, mu)
        if report.feasible:
            n_feasible += 1
        else:
            reject_counts[report.reject_reason] = \
                reject_counts.get(report.reject_reason, 0) + 1

    n = rows.shape[0]
    oracle_rate = n_feasible / n
    classifier_rate = None
    if classifier is not None:
        scaled = apply_scaler(scaler, rows)
        flags = np.asarray(classifier.predict_feasible(scaled.T))
        classifier_rate = float(np.mean(flags.astype(bool)))
    return ConvergenceReport(
        n_samples=n, oracle_rate=oracle_rate, baseline_rate=baseline_rate,
        lift=oracle_rate / baseline_rate,
        mean_residual=float(np.mean(residuals)) if residuals else math.inf,
        n_clamped=n_clamped, classifier_rate=classifier_rate,
        reject_counts=tuple(sorted(reject_counts.items())),
    )


# --- per-feature distribution diagnostics ----------------------------------------

@dataclass(frozen=True)
class FeatureStats:
    """Box-plot statistics of one feature's sample.

    Quartiles use linear-interpolation quantiles; whiskers reach the most
    extreme values within 1.5 IQR of the quartiles, and n_outliers counts
    values beyond them. degenerate flags a collapsed box (q1 == q3).
    """
    name: str
    minimum: float
    maximum: float
    mean: float
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    n_outliers: int
    degenerate: bool

    def __post_init__(self):
        if not (self.q1 <= self.median <= self.q3):
            raise ValueError(f"quartiles out of order for {self.name}: "
                             f"{self.q1}, {self.median}, {self.q3}")

    def to_dict(self) -> dict:
        return {
            "name": self.name, "min": self.minimum, "max": self.maximum,
            "mean": self.mean, "median": self.median, "q1": self.q1,
            "q3": self.q3, "whisker_lo": self.whisker_lo,
            "whisker_hi": self.whisker_hi, "n_outliers": self.n_outliers,
            "degenerate": self.degenerate,
        }

    @staticmethod
    def from_dict(doc: dict) -> "FeatureStats":
        return FeatureStats(name=doc["name"], minimum=doc["min"],
                            maximum=doc["max"], mean=doc["mean"],
                            median=doc["median"], q1=doc["q1"], q3=doc["q3"],
                            whisker_lo=doc["whisker_lo"],
                            whisker_hi=doc["whisker_hi"],
                            n_outliers=doc["n_outliers"],
                            degenerate=doc["degenerate"])


def feature_stats(name: str, values: np.ndarray) -> FeatureStats:
    values = np.sort(np.asarray(values, dtype=float).ravel())
    if values.size == 0:
        raise ValueError(f"no values for feature {name}")
    q1, median, q3 = (float(q) for q in np.quantile(values, (0.25, 0.5, 0.75)))
    iqr = q3 - q1
    inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]
    return FeatureStats(
        name=name, minimum=float(values[0]), maximum=float(values[-1]),
        mean=float(values.mean()), median=median, q1=q1, q3=q3,
        whisker_lo=float(inside[0]), whisker_hi=float(inside[-1]),
        n_outliers=int(values.size - inside.size), degenerate=bool(q1 == q3),
    )


@dataclass(frozen=True)
class FeatureDistribution:
    """Sample-vs-reference diagnostics for one feature.

    Histograms share equal-width bins over the reference range; coverage is
    the fraction of reference-occupied bins the sample also occupies.
    """
    name: str
    sample: FeatureStats
    reference: FeatureStats
    ks: float
    coverage: float
    bin_edges: tuple
    sample_hist: tuple
    reference_hist: tuple

    def to_dict(self) -> dict:
        return {
            "name": self.name, "sample": self.sample.to_dict(),
            "reference": self.reference.to_dict(), "ks": self.ks,
            "coverage": self.coverage, "bin_edges": list(self.bin_edges),
            "sample_hist": list(self.sample_hist),
            "reference_hist": list(self.reference_hist),
        }

    @staticmethod
    def from_dict(doc: dict) -> "FeatureDistribution":
        return FeatureDistribution(
            name=doc["name"], sample=FeatureStats.from_dict(doc["sample"]),
            reference=FeatureStats.from_dict(doc["reference"]), ks=doc["ks"],
            coverage=doc["coverage"], bin_edges=tuple(doc["bin_edges"]),
            sample_hist=tuple(doc["sample_hist"]),
            reference_hist=tuple(doc["reference_hist"]),
        )


@dataclass(frozen=True)
class DistributionReport:
    """Per-feature distribution diagnostics of a sample against a reference."""
    features: tuple
    n_samples: int
    n_reference: int

    def feature(self, name: str) -> FeatureDistribution:
        for feat in self.features:
            if feat.name == name:
                return feat
        raise KeyError(f"no feature named {name!r}")

    def names(self) -> tuple:
        return tuple(feat.name for feat in self.features)

    def to_dict(self) -> dict:
        return {
            "features": [feat.to_dict() for feat in self.features],
            "n_samples": self.n_samples,
            "n_reference": self.n_reference,
        }

    @staticmethod
    def from_dict(doc: dict) -> "DistributionReport":
        return DistributionReport(
            features=tuple(FeatureDistribution.from_dict(f)
                           for f in doc["features"]),
            n_samples=doc["n_samples"], n_reference=doc["n_reference"],
        )


def distribution_report(samples: np.ndarray, reference: np.ndarray,
                        scaler: ScalingSpec | None = None,
                        n_bins: int = N_BINS) -> DistributionReport:
    """Column-by-column diagnostics of samples against a reference set.

    Both matrices are (rows, features) in the same units. Feature names come
    from the scaler when given, else from the standard feature order.
    """
    sample_rows = np.asarray(samples, dtype=float)
    ref_rows = np.asarray(reference, dtype=float)
    if sample_rows.ndim != 2 or ref_rows.ndim != 2:
        raise ValueError("samples and reference must be 2-D row matrices")
    if sample_rows.shape[1] != ref_rows.shape[1]:
        raise ValueError(f"feature widths differ: {sample_rows.shape[1]} vs "
                         f"{ref_rows.shape[1]}")
    if sample_rows.shape[0] == 0 or ref_rows.shape[0] == 0:
        raise ValueError("samples and reference must be non-empty")
    width = sample_rows.shape[1]
    if scaler is not None:
        if len(scaler.feature_names) != width:
            raise ValueError(f"scaler covers {len(scaler.feature_names)} "
                             f"features, data has {width}")
        names = scaler.feature_names
    elif width == len(FEATURE_NAMES):
        names = FEATURE_NAMES
    else:
        names = tuple(f"feature_{j}" for j in range(width))

    features = []
    for j, name in enumerate(names):
        col_sample = sample_rows[:, j]
        col_ref = ref_rows[:, j]
        lo = float(col_ref.min())
        hi = float(col_ref.max())
        if hi > lo:
            edges = np.linspace(lo, hi, n_bins + 1)
        else:
            edges = np.full(n_bins + 1, lo)
        features.append(FeatureDistribution(
            name=name,
            sample=feature_stats(name, col_sample),
            reference=feature_stats(name, col_ref),
            ks=ks_statistic(col_sample, col_ref),
            coverage=coverage_ratio(col_sample, col_ref, lo, hi, n_bins),
            bin_edges=tuple(float(e) for e in edges),
            sample_hist=tuple(int(c) for c in bin_counts(col_sample, lo, hi, n_bins)),
            reference_hist=tuple(int(c) for c in bin_counts(col_ref, lo, hi, n_bins)),
        ))
    return DistributionReport(features=tuple(features),
                              n_samples=sample_rows.shape[0],
                              n_reference=ref_rows.shape[0])


# --- run comparison ---------------------------------------------------------------

@dataclass(frozen=True)
class RunComparison:
    """Side-by-side distribution distance of two runs to one reference.

    Median gaps are |sample median - reference median| normalized by the
    reference range, so they average meaningfully across features. closer is
    'first'/'second' when one run has both the lower mean gap and the
    not-lower coverage, 'tie' on exact equality, 'mixed' otherwise.
    """
    feature_names: tuple
    median_gap_a: tuple
    median_gap_b: tuple
    coverage_a: tuple
    coverage_b: tuple
    mean_median_gap_a: float
    mean_median_gap_b: float
    mean_coverage_a: float
    mean_coverage_b: float
    closer: str

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "median_gap_a": list(self.median_gap_a),
            "median_gap_b": list(self.median_gap_b),
            "coverage_a": list(self.coverage_a),
            "coverage_b": list(self.coverage_b),
            "mean_median_gap_a": self.mean_median_gap_a,
            "mean_median_gap_b": self.mean_median_gap_b,
            "mean_coverage_a": self.mean_coverage_a,
            "mean_coverage_b": self.mean_coverage_b,
            "closer": self.closer,
        }

    @staticmethod
    def from_dict(doc: dict) -> "RunComparison":
        return RunComparison(
            feature_names=tuple(doc["feature_names"]),
            median_gap_a=tuple(doc["median_gap_a"]),
            median_gap_b=tuple(doc["median_gap_b"]),
            coverage_a=tuple(doc["coverage_a"]),
            coverage_b=tuple(doc["coverage_b"]),
            mean_median_gap_a=doc["mean_median_gap_a"],
            mean_median_gap_b=doc["mean_median_gap_b"],
            mean_coverage_a=doc["mean_coverage_a"],
            mean_coverage_b=doc["mean_coverage_b"],
            closer=doc["closer"],
        )


def _normalized_gaps(report: DistributionReport) -> np.ndarray:
    gaps = []
    for feat in report.features:
        span = feat.reference.maximum - feat.reference.minimum
        gap = abs(feat.sample.median - feat.reference.median)
        gaps.append(gap / span if span > 0.0 else gap)
    return np.array(gaps)


def compare_runs(report_a: DistributionReport,
                 report_b: DistributionReport) -> RunComparison:
    """Contrast two DistributionReports taken against the same reference."""
    if report_a.names() != report_b.names():
        raise ValueError("reports cover different features")
    if report_a.n_reference != report_b.n_reference:
        raise ValueError("reports use different reference sets")
    for fa, fb in zip(report_a.features, report_b.features):
        if fa.reference != fb.reference:
            raise ValueError(f"reference statistics differ for {fa.name!r}")

    gaps_a = _normalized_gaps(report_a)
    gaps_b = _normalized_gaps(report_b)
    cov_a = np.array([feat.coverage for feat in report_a.features])
    cov_b = np.array([feat.coverage for feat in report_b.features])
    mean_gap_a = float(gaps_a.mean())
    mean_gap_b = float(gaps_b.mean())
    mean_cov_a = float(cov_a.mean())
    mean_cov_b = float(cov_b.mean())

    if mean_gap_a == mean_gap_b and mean_cov_a == mean_cov_b:
        closer = "tie"
    elif mean_gap_a <= mean_gap_b and mean_cov_a >= mean_cov_b:
        closer = "first"
    elif mean_gap_b <= mean_gap_a and mean_cov_b >= mean_cov_a:
        closer = "second"
    else:
        closer = "mixed"
    return RunComparison(
        feature_names=report_a.names(),
        median_gap_a=tuple(float(g) for g in gaps_a),
        median_gap_b=tuple(float(g) for g in gaps_b),
        coverage_a=tuple(float(c) for c in cov_a),
        coverage_b=tuple(float(c) for c in cov_b),
        mean_median_gap_a=mean_gap_a, mean_median_gap_b=mean_gap_b,
        mean_coverage_a=mean_cov_a, mean_coverage_b=mean_cov_b,
        closer=closer,
    )


# --- CSV exports ------------------------------------------------------------------

def _fmt(value: float) -> str:
    return repr(float(value))


def save_summary_csv(report: DistributionReport, path,
                     features: tuple = REPORT_FEATURES) -> None:
    """Per-feature box statistics of the sample side, one row per feature."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        for name in features:
            stats = report.feature(name).sample
            writer.writerow([name, _fmt(stats.minimum), _fmt(stats.maximum),
                             _fmt(stats.mean), _fmt(stats.median),
                             _fmt(stats.q1), _fmt(stats.q3)])


def save_histogram_csv(report: DistributionReport, path) -> None:
    """Sample and reference bin counts for every feature (plot-ready)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_HEADER)
        for feat in report.features:
            for b in range(len(feat.sample_hist)):
                writer.writerow([feat.name, _fmt(feat.bin_edges[b]),
                                 _fmt(feat.bin_edges[b + 1]),
                                 feat.sample_hist[b], feat.reference_hist[b]])


def save_scatter_csv(samples: np.ndarray, path,
                     names: tuple = FEATURE_NAMES) -> None:
    """Raw feature columns keyed by name; every pairwise scatter derives
    from this one table."""
    rows = np.asarray(samples, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(names):
        raise ValueError(f"expected (n, {len(names)}) samples, got {rows.shape}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names))
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def save_comparison_csv(comparison: RunComparison, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(COMPARISON_HEADER)
        for j, name in enumerate(comparison.feature_names):
            writer.writerow([name, _fmt(comparison.median_gap_a[j]),
                             _fmt(comparison.median_gap_b[j]),
                             _fmt(comparison.coverage_a[j]),
                             _fmt(comparison.coverage_b[j])])
