"""Conventional low-thrust transfer dataset generation.

Workflow: synthetic near-Earth-asteroid catalog -> orbit-similarity pair
filter -> impulsive Lambert grid search (sets the time-of-flight scale) ->
candidate initialization -> analytic feasibility oracle -> 22-dimensional
feature extraction -> min-max scaling -> labeled CSV dataset.

The oracle replaces a full low-thrust trajectory optimizer with three cheap
checks: required Lambert delta-v against a rocket-equation propellant cap and
against an accumulated thrust-duration cap, with a penalty factor kappa
converting impulsive delta-v into a low-thrust equivalent.
"""
import csv
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import astro
from .astro import ClassicalElements, ElementError, GravParam, SUN

TWO_PI = 2.0 * math.pi

FEATURE_NAMES = (
    "m_i", "dt_lt",
    "p1", "f1", "g1", "h1", "k1", "L1",
    "p2", "f2", "g2", "h2", "k2", "L2",
    "d_p", "d_f", "d_g", "d_h", "d_k", "d_L",
    "d_energy", "d_angmom",
)

LABEL_FEASIBLE = 1
LABEL_INFEASIBLE = 0

REASON_NONE = "none"
REASON_PROPELLANT = "propellant"
REASON_THRUST_DURATION = "thrust_duration"
REASON_LAMBERT_FAILURE = "lambert_failure"

ORACLE_VERSION = "1"
MAX_TOF_DAYS = 1460.0  # four-year ceiling on low-thrust time of flight


class PipelineError(Exception):
    """Base class for workflow failures."""


class CatalogError(PipelineError):
    """Catalog file malformed or violates element invariants."""


class NoFeasiblePairError(PipelineError):
    """Rejection sampling found no pair passing the filter."""


class AllLambertFailedError(PipelineError):
    """Every cell of an impulsive search grid failed to solve."""


class EmptyTofWindowError(PipelineError):
    """The low-thrust TOF window [1.2*dt, min(2*dt, max)] is empty."""


class TargetUnreachableError(PipelineError):
    """Attempt budget exhausted before reaching the requested row counts."""


@dataclass(frozen=True)
class Asteroid:
    id: str
    elements: ClassicalElements
    epoch: float = 0.0

    def __post_init__(self):
        if not self.id:
            raise CatalogError("asteroid id must be non-empty")
        if not math.isfinite(self.epoch):
            raise CatalogError(f"epoch must be finite, got {self.epoch}")


@dataclass(frozen=True)
class Catalog:
    asteroids: tuple[Asteroid, ...]

    def __post_init__(self):
        object.__setattr__(self, "asteroids", tuple(self.asteroids))
        index = {}
        for ast in self.asteroids:
            if ast.id in index:
                raise CatalogError(f"duplicate asteroid id {ast.id!r}")
            index[ast.id] = ast
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.asteroids)

    def __iter__(self):
        return iter(self.asteroids)

    def get(self, ast_id: str) -> Asteroid:
        try:
            return self._index[ast_id]
        except KeyError:
            raise CatalogError(f"unknown asteroid id {ast_id!r}") from None


@dataclass(frozen=True)
class SpacecraftModel:
    """Spacecraft constants for the feasibility checks.

    v_e is the effective exhaust velocity in km/s, derived from isp*g0 when
    not supplied explicitly.
    """
    m_dry: float = 1000.0
    m0_range: tuple[float, float] = (1000.0, 3000.0)
    thrust_max: float = 0.236
    isp: float = 4190.0
    g0: float = 9.80665
    v_e: float | None = None

    def __post_init__(self):
        if self.m_dry <= 0.0:
            raise ValueError(f"m_dry must be positive, got {self.m_dry}")
        lo, hi = self.m0_range
        if not (self.m_dry <= lo <= hi):
            raise ValueError(f"m0_range {self.m0_range} must sit above m_dry {self.m_dry}")
        if self.thrust_max <= 0.0:
            raise ValueError(f"thrust_max must be positive, got {self.thrust_max}")
        if self.isp <= 0.0 or self.g0 <= 0.0:
            raise ValueError("isp and g0 must be positive")
        derived = self.isp * self.g0 / 1000.0
        if self.v_e is None:
            object.__setattr__(self, "v_e", derived)
        elif abs(derived - self.v_e) >= 0.01:
            raise ValueError(
                f"v_e {self.v_e} inconsistent with isp*g0/1000 = {derived:.4f}"
            )


@dataclass(frozen=True)
class PairFilter:
    """Orbit-similarity thresholds for candidate asteroid pairs."""
    max_da: float = 0.3                      # AU
    max_di: float = math.radians(3.0)        # rad
    max_dl: float = math.radians(30.0)       # rad, true-longitude gap

    def __post_init__(self):
        if not (self.max_da > 0.0 and self.max_di > 0.0 and self.max_dl > 0.0):
            raise ValueError("pair filter thresholds must be positive")


@dataclass(frozen=True)
class TransferCandidate:
    """One oracle-ready transfer: pair, departure epoch, mass, and TOF."""
    from_id: str
    to_id: str
    t0: float
    m_i: float
    dt_lt: float
    dt_impls: float

    def __post_init__(self):
        if self.from_id == self.to_id:
            raise ValueError("transfer endpoints must differ")
        if not (self.dt_impls > 0.0):
            raise ValueError(f"dt_impls must be positive, got {self.dt_impls}")
        lo = 1.2 * self.dt_impls
        hi = min(2.0 * self.dt_impls, MAX_TOF_DAYS)
        slack = 1e-9 * max(1.0, hi)
        if not (lo - slack <= self.dt_lt <= hi + slack):
            raise ValueError(
                f"dt_lt {self.dt_lt} outside window [{lo}, {hi}] for dt_impls {self.dt_impls}"
            )
        if not math.isfinite(self.t0):
            raise ValueError(f"t0 must be finite, got {self.t0}")
        if not (self.m_i > 0.0):
            raise ValueError(f"m_i must be positive, got {self.m_i}")


@dataclass(frozen=True)
class FeatureVector:
    """The 22 transfer features, in the fixed dataset column order.

    Departure-body equinoctial elements at t0 (p1..L1), arrival-body
    elements at the same epoch (p2..L2), their componentwise differences
    (with d_L computed on [0, 2*pi)-normalized longitudes, so it spans
    (-2*pi, 2*pi)), and the scalar energy / angular-momentum differences.
    """
    m_i: float
    dt_lt: float
    p1: float
    f1: float
    g1: float
    h1: float
    k1: float
    L1: float
    p2: float
    f2: float
    g2: float
    h2: float
    k2: float
    L2: float
    d_p: float
    d_f: float
    d_g: float
    d_h: float
    d_k: float
    d_L: float
    d_energy: float
    d_angmom: float

    def __post_init__(self):
        for name in FEATURE_NAMES:
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"feature {name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_NAMES])

    @staticmethod
    def from_array(values) -> "FeatureVector":
        values = np.asarray(values, dtype=float)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} features, got {values.shape}")
        return FeatureVector(**{name: float(v) for name, v in zip(FEATURE_NAMES, values)})


@dataclass(frozen=True)
class FeasibilityReport:
    """Oracle verdict with the quantities behind it (delta-v in km/s)."""
    feasible: bool
    dv_required: float
    dv_propellant_cap: float
    dv_thrust_cap: float
    m_final_est: float
    reject_reason: str

    def __post_init__(self):
        if self.feasible != (self.reject_reason == REASON_NONE):
            raise ValueError("feasible flag inconsistent with reject_reason")


@dataclass(frozen=True)
class DatasetRow:
    features: FeatureVector
    label: int
    from_id: str
    to_id: str
    t0: float
    dt_impls: float

    def __post_init__(self):
        if self.label not in (LABEL_FEASIBLE, LABEL_INFEASIBLE):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class ScalingSpec:
    """Per-feature min-max bounds mapping raw features onto [-1, 1]."""
    feature_names: tuple[str, ...]
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    fingerprint: str

    def __post_init__(self):
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "mins", tuple(float(v) for v in self.mins))
        object.__setattr__(self, "maxs", tuple(float(v) for v in self.maxs))
        if not (len(self.feature_names) == len(self.mins) == len(self.maxs)):
            raise ValueError("scaling spec lengths do not match")
        for name, lo, hi in zip(self.feature_names, self.mins, self.maxs):
            if not (hi > lo):
                raise ValueError(f"degenerate scaling range for feature {name}")

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mins": list(self.mins),
            "maxs": list(self.maxs),
            "fingerprint": self.fingerprint,
        }

    @staticmethod
    def from_dict(doc: dict) -> "ScalingSpec":
        return ScalingSpec(
            feature_names=tuple(doc["feature_names"]),
            mins=tuple(doc["mins"]),
            maxs=tuple(doc["maxs"]),
            fingerprint=doc["fingerprint"],
        )


@dataclass
class Dataset:
    """Labeled feature rows plus the scaling fitted on them."""
    rows: list[DatasetRow]
    scaling: ScalingSpec | None = None
    meta: dict = field(default_factory=dict)

    def feature_matrix(self, label: int | None = None) -> np.ndarray:
        rows = self.rows if label is None else [r for r in self.rows if r.label == label]
        if not rows:
            return np.zeros((0, len(FEATURE_NAMES)))
        return np.stack([r.features.as_array() for r in rows])

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=int)


# --- catalog ---------------------------------------------------------------

@dataclass(frozen=True)
class CatalogRanges:
    """Uniform sampling ranges for the synthetic catalog (NEA-like)."""
    a: tuple[float, float] = (0.7, 1.8)        # AU
    e: tuple[float, float] = (0.0, 0.6)
    i_deg: tuple[float, float] = (0.0, 10.0)

    def __post_init__(self):
        for name, (lo, hi) in (("a", self.a), ("e", self.e), ("i_deg", self.i_deg)):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"invalid range for {name}: ({lo}, {hi})")
        if self.a[0] <= 0.0:
            raise ValueError("semi-major axis range must be positive")
        if self.e[0] < 0.0 or self.e[1] >= 1.0:
            raise ValueError("eccentricity range must sit inside [0, 1)")
        if self.i_deg[0] < 0.0 or self.i_deg[1] >= 90.0:
            raise ValueError("inclination range must sit inside [0, 90) degrees")


def synth_catalog(n: int, ranges: CatalogRanges | None = None,
                  seed: int = 0) -> Catalog:
    """Sample n synthetic asteroids, uniform per element, deterministic in seed."""
    if n < 2:
        raise ValueError(f"catalog needs at least 2 asteroids, got {n}")
    ranges = ranges if ranges is not None else CatalogRanges()
    rng = np.random.default_rng(seed)
    width = max(4, len(str(n)))
    asteroids = []
    for idx in range(n):
        elements = ClassicalElements(
            a=float(rng.uniform(*ranges.a)),
            e=float(rng.uniform(*ranges.e)),
            i=math.radians(float(rng.uniform(*ranges.i_deg))),
            raan=float(rng.uniform(0.0, TWO_PI)),
            argp=float(rng.uniform(0.0, TWO_PI)),
            nu=float(rng.uniform(0.0, TWO_PI)),
        )
        asteroids.append(Asteroid(id=f"ast-{idx:0{width}d}", elements=elements))
    return Catalog(asteroids=tuple(asteroids))


CATALOG_HEADER = ["id", "a_au", "e", "i_deg", "raan_deg", "argp_deg", "nu_deg",
                  "epoch_day"]


def save_catalog(catalog: Catalog, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CATALOG_HEADER)
        for ast in catalog:
            el = ast.elements
            writer.writerow([
                ast.id, repr(el.a), repr(el.e), repr(math.degrees(el.i)),
                repr(math.degrees(el.raan)), repr(math.degrees(el.argp)),
                repr(math.degrees(el.nu)), repr(ast.epoch),
            ])


def load_catalog(path) -> Catalog:
    asteroids = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CATALOG_HEADER:
            raise CatalogError(f"bad catalog header {header!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CATALOG_HEADER):
                raise CatalogError(f"line {line_no}: expected "
                                   f"{len(CATALOG_HEADER)} columns, got {len(row)}")
            try:
                elements = ClassicalElements(
                    a=float(row[1]), e=float(row[2]), i=math.radians(float(row[3])),
                    raan=math.radians(float(row[4])),
                    argp=math.radians(float(row[5])),
                    nu=math.radians(float(row[6])),
                )
                asteroids.append(Asteroid(id=row[0], elements=elements,
                                          epoch=float(row[7])))
            except (ElementError, ValueError) as err:
                raise CatalogError(f"line {line_no}: {err}") from err
    if not asteroids:
        raise CatalogError("catalog file contains no asteroids")
    return Catalog(asteroids=tuple(asteroids))


# --- pair selection ---------------------------------------------------------

def _pair_table(catalog: Catalog, t_ref: float,
                mu: GravParam) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-asteroid (a, i, true longitude at t_ref) arrays for fast filtering."""
    a = np.array([ast.elements.a for ast in catalog])
    inc = np.array([ast.elements.i for ast in catalog])
    lon = np.array([astro.true_longitude(ast.elements, ast.epoch, t_ref, mu)
                    for ast in catalog])
    return a, inc, lon


def _passes_filter(table, idx_from: int, idx_to: int, filt: PairFilter) -> bool:
    a, inc, lon = table
    if abs(a[idx_from] - a[idx_to]) > filt.max_da:
        return False
    if abs(inc[idx_from] - inc[idx_to]) > filt.max_di:
        return False
    return abs(astro.wrap_angle(lon[idx_from] - lon[idx_to])) <= filt.max_dl


def _sample_pair_indices(table, filt: PairFilter, rng: np.random.Generator,
                         max_attempts: int) -> tuple[int, int]:
    n = len(table[0])
    for _ in range(max_attempts):
        idx_from = int(rng.integers(0, n))
        idx_to = int(rng.integers(0, n))
        if idx_from == idx_to:
            continue
        if _passes_filter(table, idx_from, idx_to, filt):
            return idx_from, idx_to
    raise NoFeasiblePairError(
        f"no pair passed the filter in {max_attempts} attempts"
    )


def sample_pair(catalog: Catalog, filt: PairFilter, t_ref: float,
                rng: np.random.Generator, max_attempts: int = 20_000,
                mu: GravParam = SUN) -> tuple[Asteroid, Asteroid]:
    """Uniformly sample an ordered asteroid pair passing the similarity filter."""
    if len(catalog) < 2:
        raise NoFeasiblePairError("catalog has fewer than 2 asteroids")
    table = _pair_table(catalog, t_ref, mu)
    idx_from, idx_to = _sample_pair_indices(table, filt, rng, max_attempts)
    return catalog.asteroids[idx_from], catalog.asteroids[idx_to]


# --- impulsive grid search --------------------------------------------------

def impulsive_grid_search(pair: tuple[Asteroid, Asteroid],
                          t0_window: tuple[float, float] = (0.0, 730.0),
                          tof_grid: tuple[float, float, float] = (50.0, 730.0, 10.0),
                          mu: GravParam = SUN,
                          t0_step: float = 20.0) -> tuple[float, float, float]:
    """Exhaustive impulsive transfer search over a (t0, tof) grid.

    For each cell, solves Lambert between the departure body at t0 and the
    arrival body at t0+tof and scores dv = |v1 - v_dep| + |v_arr - v2| in
    km/s. Failed cells are skipped. Returns (dv_min, dt_impls, t0_best) for
    the first-best cell in row-major (t0-major) grid order.
    """
    body_from, body_to = pair
    lo, hi = t0_window
    if not (hi >= lo and t0_step > 0.0):
        raise ValueError(f"bad t0 window {t0_window} / step {t0_step}")
    tof_lo, tof_hi, tof_step = tof_grid
    if not (tof_hi >= tof_lo > 0.0 and tof_step > 0.0):
        raise ValueError(f"bad tof grid {tof_grid}")
    t0s = np.arange(lo, hi + 1e-9, t0_step)
    tofs = np.arange(tof_lo, tof_hi + 1e-9, tof_step)

    r_dep, v_dep = astro.propagate_many(body_from.elements, body_from.epoch, t0s, mu)
    t0_grid, tof_grid_vals = np.meshgrid(t0s, tofs, indexing="ij")
    arrival_epochs = (t0_grid + tof_grid_vals).ravel()
    unique_epochs, inverse = np.unique(arrival_epochs, return_inverse=True)
    r_arr_u, v_arr_u = astro.propagate_many(body_to.elements, body_to.epoch,
                                            unique_epochs, mu)
    r_arr = r_arr_u[inverse]
    v_arr = v_arr_u[inverse]
    cell_t0_idx = np.repeat(np.arange(len(t0s)), len(tofs))
    r1s = r_dep[cell_t0_idx]
    v1s_body = v_dep[cell_t0_idx]
    tof_flat = tof_grid_vals.ravel()

    v1s, v2s, ok = astro.lambert_many(r1s, r_arr, tof_flat, mu)
    if not np.any(ok):
        raise AllLambertFailedError(
            f"no Lambert solution on the grid for pair "
            f"({body_from.id}, {body_to.id})"
        )
    dv = (np.linalg.norm(v1s - v1s_body, axis=1)
          + np.linalg.norm(v_arr - v2s, axis=1)) * astro.AU_PER_DAY_IN_KM_S
    dv = np.where(ok, dv, np.inf)
    best = int(np.argmin(dv))
    return float(dv[best]), float(tof_flat[best]), float(t0s[cell_t0_idx[best]])


# --- candidate initialization ------------------------------------------------

def init_transfer(pair: tuple[Asteroid, Asteroid], dt_impls: float, t0: float,
                  sc: SpacecraftModel, rng: np.random.Generator,
                  max_tof: float = MAX_TOF_DAYS) -> TransferCandidate:
    """Draw (m_i, dt_lt) uniformly; the TOF window scales off dt_impls."""
    if not (dt_impls > 0.0):
        raise ValueError(f"dt_impls must be positive, got {dt_impls}")
    lo = 1.2 * dt_impls
    hi = min(2.0 * dt_impls, max_tof)
    if lo > hi:
        raise EmptyTofWindowError(
            f"TOF window empty: 1.2*{dt_impls} = {lo} exceeds {hi}"
        )
    m_i = float(rng.uniform(*sc.m0_range))
    dt_lt = float(rng.uniform(lo, hi))
    return TransferCandidate(from_id=pair[0].id, to_id=pair[1].id, t0=t0,
                             m_i=m_i, dt_lt=dt_lt, dt_impls=dt_impls)


# --- feasibility oracle -------------------------------------------------------

def feasibility_oracle(cand: TransferCandidate, catalog: Catalog,
                       sc: SpacecraftModel, kappa: float = 1.15,
                       eta_duty: float = 0.9,
                       mu: GravParam = SUN) -> FeasibilityReport:
    """Analytic feasibility verdict for one transfer candidate.

    dv_required converts the impulsive Lambert solution at (t0, dt_lt) to
    km/s; kappa scales it to a low-thrust equivalent. The transfer is
    feasible when the rocket equation keeps the final mass at or above the
    dry mass AND the scaled delta-v fits under what the thruster can
    accumulate over dt_lt at duty factor eta_duty on the mean mass.
    """
    if not (kappa >= 1.0):
        raise ValueError(f"kappa must be >= 1, got {kappa}")
    if not (0.0 < eta_duty <= 1.0):
        raise ValueError(f"eta_duty must be in (0, 1], got {eta_duty}")
    body_from = catalog.get(cand.from_id)
    body_to = catalog.get(cand.to_id)
    lo, hi = sc.m0_range
    if not (lo <= cand.m_i <= hi):
        raise ValueError(f"m_i {cand.m_i} outside m0_range {sc.m0_range}")

    m_bar = 0.5 * (cand.m_i + sc.m_dry)
    # (N/kg) * s = m/s; /1000 -> km/s
    dv_thrust_cap = sc.thrust_max / m_bar * cand.dt_lt * astro.DAY_S * eta_duty / 1000.0
    dv_propellant_cap = sc.v_e * math.log(cand.m_i / sc.m_dry)

    st_dep = astro.propagate(body_from.elements, body_from.epoch, cand.t0, mu)
    st_arr = astro.propagate(body_to.elements, body_to.epoch,
                             cand.t0 + cand.dt_lt, mu)
    try:
        v1, v2 = astro.lambert(st_dep.r, st_arr.r, cand.dt_lt, mu)
    except (astro.NearCollinearError, astro.NoConvergenceError):
        return FeasibilityReport(
            feasible=False, dv_required=math.inf,
            dv_propellant_cap=dv_propellant_cap, dv_thrust_cap=dv_thrust_cap,
            m_final_est=0.0, reject_reason=REASON_LAMBERT_FAILURE,
        )
    dv_required = (float(np.linalg.norm(v1 - st_dep.v))
                   + float(np.linalg.norm(st_arr.v - v2))) * astro.AU_PER_DAY_IN_KM_S
    m_final_est = cand.m_i * math.exp(-kappa * dv_required / sc.v_e)
    propellant_ok = m_final_est >= sc.m_dry
    thrust_ok = kappa * dv_required <= dv_thrust_cap
    if propellant_ok and thrust_ok:
        reason = REASON_NONE
    elif not propellant_ok:
        reason = REASON_PROPELLANT
    else:
        reason = REASON_THRUST_DURATION
    return FeasibilityReport(
        feasible=propellant_ok and thrust_ok, dv_required=dv_required,
        dv_propellant_cap=dv_propellant_cap, dv_thrust_cap=dv_thrust_cap,
        m_final_est=m_final_est, reject_reason=reason,
    )


# --- feature extraction -------------------------------------------------------

def _elements_at(body: Asteroid, t: float, mu: GravParam) -> ClassicalElements:
    """Osculating elements at epoch t (only the anomaly advances)."""
    el = body.elements
    ecc0 = 2.0 * math.atan2(math.sqrt(1.0 - el.e) * math.sin(el.nu / 2.0),
                            math.sqrt(1.0 + el.e) * math.cos(el.nu / 2.0))
    m0 = ecc0 - el.e * math.sin(ecc0)
    n = math.sqrt(mu.mu / el.a**3)
    ecc = astro.solve_kepler(m0 + n * (t - body.epoch), el.e)
    nu = 2.0 * math.atan2(math.sqrt(1.0 + el.e) * math.sin(ecc / 2.0),
                          math.sqrt(1.0 - el.e) * math.cos(ecc / 2.0))
    return ClassicalElements(a=el.a, e=el.e, i=el.i, raan=el.raan,
                             argp=el.argp, nu=astro.norm_angle(nu))


def extract_features(cand: TransferCandidate, catalog: Catalog,
                     mu: GravParam = SUN) -> FeatureVector:
    """Build the 22-feature vector; both bodies' elements taken at t0.

    The longitude difference d_L subtracts the two [0, 2*pi)-normalized true
    longitudes directly, so it ranges over (-2*pi, 2*pi) rather than being
    wrapped — the sign and magnitude carry phase-lead/lag information.
    """
    body_from = catalog.get(cand.from_id)
    body_to = catalog.get(cand.to_id)
    el1 = _elements_at(body_from, cand.t0, mu)
    el2 = _elements_at(body_to, cand.t0, mu)
    mee1 = astro.classical_to_mee(el1)
    mee2 = astro.classical_to_mee(el2)
    energy1 = astro.orbital_energy(el1, mu)
    energy2 = astro.orbital_energy(el2, mu)
    h1 = astro.angular_momentum(el1, mu)
    h2 = astro.angular_momentum(el2, mu)
    return FeatureVector(
        m_i=cand.m_i, dt_lt=cand.dt_lt,
        p1=mee1.p, f1=mee1.f, g1=mee1.g, h1=mee1.h, k1=mee1.k, L1=mee1.L,
        p2=mee2.p, f2=mee2.f, g2=mee2.g, h2=mee2.h, k2=mee2.k, L2=mee2.L,
        d_p=mee1.p - mee2.p, d_f=mee1.f - mee2.f, d_g=mee1.g - mee2.g,
        d_h=mee1.h - mee2.h, d_k=mee1.k - mee2.k, d_L=mee1.L - mee2.L,
        d_energy=energy1 - energy2, d_angmom=h1 - h2,
    )


# --- scaling -----------------------------------------------------------------

def fit_scaler(dataset: Dataset) -> ScalingSpec:
    """Per-feature min/max over every row (both labels)."""
    matrix = dataset.feature_matrix()
    if matrix.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty dataset")
    mins = matrix.min(axis=0)
    maxs = matrix.max(axis=0)
    for name, lo, hi in zip(FEATURE_NAMES, mins, maxs):
        if not (hi > lo):
            raise ValueError(f"degenerate scaling range for feature {name}")
    fingerprint = hashlib.sha256(
        np.ascontiguousarray(matrix, dtype="<f8").tobytes()
    ).hexdigest()
    return ScalingSpec(feature_names=FEATURE_NAMES, mins=tuple(mins),
                       maxs=tuple(maxs), fingerprint=fingerprint)


def apply_scaler(spec: ScalingSpec, values: np.ndarray) -> np.ndarray:
    """Map raw features onto [-1, 1]; out-of-range values are NOT clamped."""
    values = np.asarray(values, dtype=float)
    mins = np.array(spec.mins)
    maxs = np.array(spec.maxs)
    if values.shape[-1] != len(spec.feature_names):
        raise ValueError(f"expected {len(spec.feature_names)} features, "
                         f"got shape {values.shape}")
    return 2.0 * (values - mins) / (maxs - mins) - 1.0


def invert_scaler(spec: ScalingSpec, scaled: np.ndarray) -> np.ndarray:
    scaled = np.asarray(scaled, dtype=float)
    mins = np.array(spec.mins)
    maxs = np.array(spec.maxs)
    if scaled.shape[-1] != len(spec.feature_names):
        raise ValueError(f"expected {len(spec.feature_names)} features, "
                         f"got shape {scaled.shape}")
    return mins + (scaled + 1.0) * (maxs - mins) / 2.0


# --- dataset generation --------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Everything generate_dataset needs besides the seed."""
    catalog: Catalog
    target_feasible: int
    max_attempts: int = 1_000_000
    pair_filter: PairFilter = PairFilter()
    spacecraft: SpacecraftModel = SpacecraftModel()
    kappa: float = 1.15
    eta_duty: float = 0.9
    t_ref: float = 0.0
    t0_window: tuple[float, float] = (0.0, 730.0)
    t0_step: float = 20.0
    tof_grid: tuple[float, float, float] = (50.0, 730.0, 10.0)
    n_restarts: int = 5
    max_tof: float = MAX_TOF_DAYS

    def __post_init__(self):
        if self.target_feasible < 1:
            raise ValueError("target_feasible must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.n_restarts < 1:
            raise ValueError("n_restarts must be >= 1")

    def hash(self) -> str:
        doc = {
            "catalog_ids": [ast.id for ast in self.catalog],
            "catalog_elements": [
                [ast.elements.a, ast.elements.e, ast.elements.i,
                 ast.elements.raan, ast.elements.argp, ast.elements.nu,
                 ast.epoch]
                for ast in self.catalog
            ],
            "target_feasible": self.target_feasible,
            "max_attempts": self.max_attempts,
            "pair_filter": [self.pair_filter.max_da, self.pair_filter.max_di,
                            self.pair_filter.max_dl],
            "spacecraft": [self.spacecraft.m_dry, list(self.spacecraft.m0_range),
                           self.spacecraft.thrust_max, self.spacecraft.isp,
                           self.spacecraft.g0, self.spacecraft.v_e],
            "kappa": self.kappa,
            "eta_duty": self.eta_duty,
            "t_ref": self.t_ref,
            "t0_window": list(self.t0_window),
            "t0_step": self.t0_step,
            "tof_grid": list(self.tof_grid),
            "n_restarts": self.n_restarts,
            "max_tof": self.max_tof,
        }
        blob = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def generate_dataset(config: PipelineConfig, seed: int) -> Dataset:
    """Run the full conventional workflow until target_feasible rows exist.

    One attempt = one filtered pair + n_restarts independent (m_i, dt_lt)
    draws, keeping the draw with the largest estimated final mass; every
    attempt lands in the dataset as exactly one labeled row, so the reported
    convergence rate is n_feasible / n_attempted exactly.
    """
    rng = np.random.default_rng(seed)
    catalog = config.catalog
    if len(catalog) < 2:
        raise NoFeasiblePairError("catalog has fewer than 2 asteroids")
    table = _pair_table(catalog, config.t_ref, SUN)
    grid_cache: dict[tuple[str, str], tuple | None] = {}
    rows: list[DatasetRow] = []
    seen: set[tuple] = set()
    attempted = 0
    n_feasible = 0
    budget = config.max_attempts

    while n_feasible < config.target_feasible:
        if budget <= 0:
            raise TargetUnreachableError(
                f"attempt budget exhausted: {n_feasible}/{config.target_feasible} "
                f"feasible rows after {attempted} attempts"
            )
        budget -= 1
        idx_from, idx_to = _sample_pair_indices(table, config.pair_filter, rng,
                                                max_attempts=100_000)
        pair = (catalog.asteroids[idx_from], catalog.asteroids[idx_to])
        key = (pair[0].id, pair[1].id)
        if key not in grid_cache:
            try:
                grid_cache[key] = impulsive_grid_search(
                    pair, config.t0_window, config.tof_grid, SUN, config.t0_step)
            except AllLambertFailedError:
                grid_cache[key] = None
        cached = grid_cache[key]
        if cached is None:
            continue
        _, dt_impls, t0_best = cached

        best_cand = None
        best_report = None
        try:
            for _ in range(config.n_restarts):
                cand = init_transfer(pair, dt_impls, t0_best, config.spacecraft,
                                     rng, config.max_tof)
                report = feasibility_oracle(cand, catalog, config.spacecraft,
                                            config.kappa, config.eta_duty)
                if best_report is None or report.m_final_est > best_report.m_final_est:
                    best_cand = cand
                    best_report = report
        except EmptyTofWindowError:
            continue

        dup_key = (best_cand.from_id, best_cand.to_id, best_cand.t0,
                   best_cand.m_i, best_cand.dt_lt)
        if dup_key in seen:
            continue
        seen.add(dup_key)
        features = extract_features(best_cand, catalog)
        label = LABEL_FEASIBLE if best_report.feasible else LABEL_INFEASIBLE
        rows.append(DatasetRow(features=features, label=label,
                               from_id=best_cand.from_id, to_id=best_cand.to_id,
                               t0=best_cand.t0, dt_impls=best_cand.dt_impls))
        attempted += 1
        n_feasible += label

    dataset = Dataset(rows=rows)
    dataset.scaling = fit_scaler(dataset)
    dataset.meta = {
        "seed": seed,
        "config_hash": config.hash(),
        "oracle_version": ORACLE_VERSION,
        "kappa": config.kappa,
        "eta_duty": config.eta_duty,
        "n_attempted": attempted,
        "n_feasible": n_feasible,
        "convergence_rate": n_feasible / attempted,
        "n_restarts": config.n_restarts,
    }
    return dataset


# --- dataset persistence --------------------------------------------------------

DATASET_HEADER = list(FEATURE_NAMES) + ["label", "from_id", "to_id", "t0",
                                        "dt_impls"]


def dataset_meta_path(path) -> str:
    return str(path) + ".meta.json"


def save_dataset(dataset: Dataset, path) -> None:
    """Write rows as CSV plus a sidecar metadata JSON; byte-deterministic."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(DATASET_HEADER)
        for row in dataset.rows:
            values = [repr(float(v)) for v in row.features.as_array()]
            writer.writerow(values + [row.label, row.from_id, row.to_id,
                                      repr(float(row.t0)),
                                      repr(float(row.dt_impls))])
    meta = dict(dataset.meta)
    if dataset.scaling is not None:
        meta["scaling"] = dataset.scaling.to_dict()
    with open(dataset_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DATASET_HEADER:
            raise PipelineError(f"bad dataset header {header!r}")
        n_feat = len(FEATURE_NAMES)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DATASET_HEADER):
                raise PipelineError(f"line {line_no}: expected "
                                    f"{len(DATASET_HEADER)} columns")
            try:
                features = FeatureVector.from_array([float(v) for v in row[:n_feat]])
                rows.append(DatasetRow(
                    features=features, label=int(row[n_feat]),
                    from_id=row[n_feat + 1], to_id=row[n_feat + 2],
                    t0=float(row[n_feat + 3]), dt_impls=float(row[n_feat + 4]),
                ))
            except ValueError as err:
                raise PipelineError(f"line {line_no}: {err}") from err
    dataset = Dataset(rows=rows)
    meta_path = dataset_meta_path(path)
    try:
        with open(meta_path, encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        meta = {}
    scaling = meta.pop("scaling", None)
    dataset.meta = meta
    if scaling is not None:
        dataset.scaling = ScalingSpec.from_dict(scaling)
    return dataset
