"""Two-body orbital mechanics in canonical AU-day units.

Element conversions (classical <-> modified equinoctial), Kepler propagation,
a zero-revolution Lambert solver, and the scalar energy / angular-momentum
quantities used by the transfer feature vector. All operations are pure
functions on immutable values.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * math.pi

# Sun GM in AU^3/day^2; a = 1 AU gives a 365.257 d period.
MU_SUN = 2.9591220828559e-4

AU_KM = 149_597_870.7
DAY_S = 86_400.0
AU_PER_DAY_IN_KM_S = AU_KM / DAY_S


class ElementError(ValueError):
    """Orbit element outside the supported (elliptic, non-singular) domain."""


class NearCollinearError(ValueError):
    """Lambert endpoints subtend a transfer angle too close to 0 or pi."""


class NoConvergenceError(RuntimeError):
    """Iterative solver failed to reach its residual tolerance."""


def norm_angle(x: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    r = x % TWO_PI
    if r >= TWO_PI or r < 0.0:
        r = 0.0
    return r


def wrap_angle(x: float) -> float:
    """Wrap an angle difference to [-pi, pi)."""
    return (x + math.pi) % TWO_PI - math.pi


@dataclass(frozen=True)
class GravParam:
    """Gravitational parameter of the central body [AU^3/day^2]."""
    mu: float

    def __post_init__(self):
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise ElementError(f"mu must be positive and finite, got {self.mu}")


SUN = GravParam(mu=MU_SUN)


@dataclass(frozen=True)
class ClassicalElements:
    """Classical orbital elements: a [AU], e [-], angles [rad].

    Elliptic orbits only (0 <= e < 1, 0 <= i < pi); angles are normalized
    to [0, 2*pi) on construction.
    """
    a: float
    e: float
    i: float
    raan: float
    argp: float
    nu: float

    def __post_init__(self):
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ElementError(f"a must be positive and finite, got {self.a}")
        if not (0.0 <= self.e < 1.0):
            raise ElementError(f"e must satisfy 0 <= e < 1 (elliptic only), got {self.e}")
        if not (0.0 <= self.i < math.pi):
            raise ElementError(f"i must satisfy 0 <= i < pi, got {self.i}")
        for name in ("raan", "argp", "nu"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ElementError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, norm_angle(v))


@dataclass(frozen=True)
class Mee:
    """Modified equinoctial elements (p, f, g, h, k, L); p in AU, L in rad."""
    p: float
    f: float
    g: float
    h: float
    k: float
    L: float

    def __post_init__(self):
        if not (self.p > 0.0 and math.isfinite(self.p)):
            raise ElementError(f"p must be positive and finite, got {self.p}")
        if not all(math.isfinite(v) for v in (self.f, self.g, self.h, self.k, self.L)):
            raise ElementError("MEE components must be finite")
        if self.f * self.f + self.g * self.g >= 1.0:
            raise ElementError(
                f"f^2 + g^2 must be < 1 (elliptic only), got {self.f**2 + self.g**2}"
            )
        object.__setattr__(self, "L", norm_angle(self.L))


@dataclass(frozen=True)
class StateVector:
    """Heliocentric position [AU] and velocity [AU/day] at epoch t [day]."""
    r: np.ndarray
    v: np.ndarray
    t: float

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if r.shape != (3,) or v.shape != (3,):
            raise ElementError("r and v must be 3-vectors")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v)) and math.isfinite(self.t)):
            raise ElementError("state components must be finite")
        if float(np.linalg.norm(r)) <= 0.0:
            raise ElementError("|r| must be positive")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "v", v)


def classical_to_mee(el: ClassicalElements) -> Mee:
    """Convert classical elements to modified equinoctial elements."""
    lonper = el.argp + el.raan
    tan_half_i = math.tan(el.i / 2.0)
    return Mee(
        p=el.a * (1.0 - el.e**2),
        f=el.e * math.cos(lonper),
        g=el.e * math.sin(lonper),
        h=tan_half_i * math.cos(el.raan),
        k=tan_half_i * math.sin(el.raan),
        L=norm_angle(el.raan + el.argp + el.nu),
    )


def mee_to_classical(mee: Mee) -> ClassicalElements:
    """Exact inverse of classical_to_mee on the elliptic domain."""
    e = math.hypot(mee.f, mee.g)
    a = mee.p / (1.0 - e * e)
    i = 2.0 * math.atan(math.hypot(mee.h, mee.k))
    raan = math.atan2(mee.k, mee.h) if (mee.h != 0.0 or mee.k != 0.0) else 0.0
    lonper = math.atan2(mee.g, mee.f) if e > 0.0 else 0.0
    return ClassicalElements(
        a=a,
        e=e,
        i=i,
        raan=norm_angle(raan),
        argp=norm_angle(lonper - raan),
        nu=norm_angle(mee.L - lonper),
    )


def solve_kepler(mean_anomaly: float, e: float, tol: float = 1e-12) -> float:
    """Solve E - e*sin(E) = M for the eccentric anomaly E.

    Newton iteration with a bisection fallback; the residual of the returned
    solution is below `tol`. M may be any finite real; full revolutions are
    preserved (E - M is periodic).
    """
    if not (0.0 <= e < 1.0):
        raise ElementError(f"e must satisfy 0 <= e < 1, got {e}")
    if not math.isfinite(mean_anomaly):
        raise ElementError(f"mean anomaly must be finite, got {mean_anomaly}")
    revs = math.floor(mean_anomaly / TWO_PI)
    m = mean_anomaly - revs * TWO_PI
    ecc = solve_kepler_reduced(m, e, tol)
    return ecc + revs * TWO_PI


def solve_kepler_reduced(m: float, e: float, tol: float) -> float:
    """Kepler solve for M already reduced to [0, 2*pi)."""
    ecc = m + e * math.sin(m)
    for _ in range(50):
        resid = ecc - e * math.sin(ecc) - m
        if abs(resid) < tol:
            return ecc
        ecc -= resid / (1.0 - e * math.cos(ecc))
    # Newton stalled (possible very close to e=1); g(E) is monotone, bisect.
    lo, hi = m - e, m + e
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid - e * math.sin(mid) - m < 0.0:
            lo = mid
        else:
            hi = mid
    ecc = 0.5 * (lo + hi)
    if abs(ecc - e * math.sin(ecc) - m) >= tol:
        raise NoConvergenceError(f"Kepler solve failed for M={m}, e={e}")
    return ecc


def _solve_kepler_array(m: np.ndarray, e: float) -> np.ndarray:
    """Vectorized Kepler solve; falls back to scalar for stragglers."""
    revs = np.floor(m / TWO_PI)
    mw = m - revs * TWO_PI
    ecc = mw + e * np.sin(mw)
    for _ in range(30):
        resid = ecc - e * np.sin(ecc) - mw
        ecc = ecc - resid / (1.0 - e * np.cos(ecc))
    resid = np.abs(ecc - e * np.sin(ecc) - mw)
    bad = resid >= 1e-12
    if np.any(bad):
        for idx in np.nonzero(bad)[0]:
            ecc[idx] = solve_kepler_reduced(float(mw[idx]), e, 1e-12)
    return ecc + revs * TWO_PI


def _nu_to_ecc_anomaly(nu: float, e: float) -> float:
    return 2.0 * math.atan2(
        math.sqrt(1.0 - e) * math.sin(nu / 2.0),
        math.sqrt(1.0 + e) * math.cos(nu / 2.0),
    )


def _perifocal_basis(el: ClassicalElements) -> np.ndarray:
    """Rotation matrix taking perifocal (PQW) vectors to the inertial frame."""
    co, so = math.cos(el.raan), math.sin(el.raan)
    cw, sw = math.cos(el.argp), math.sin(el.argp)
    ci, si = math.cos(el.i), math.sin(el.i)
    return np.array([
        [co * cw - so * sw * ci, -co * sw - so * cw * ci, so * si],
        [so * cw + co * sw * ci, -so * sw + co * cw * ci, -co * si],
        [sw * si, cw * si, ci],
    ])


def propagate(el: ClassicalElements, epoch0: float, t: float,
              mu: GravParam = SUN) -> StateVector:
    """Keplerian two-body state at time t for elements valid at epoch0."""
    if not math.isfinite(t):
        raise ElementError(f"t must be finite, got {t}")
    rs, vs = propagate_many(el, epoch0, np.array([t]), mu)
    return StateVector(r=rs[0], v=vs[0], t=t)


def propagate_many(el: ClassicalElements, epoch0: float, ts: np.ndarray,
                   mu: GravParam = SUN) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized propagation: positions (n,3) and velocities (n,3) at ts."""
    ts = np.asarray(ts, dtype=float)
    e = el.e
    n = math.sqrt(mu.mu / el.a**3)
    ecc0 = _nu_to_ecc_anomaly(el.nu, e)
    m0 = ecc0 - e * math.sin(ecc0)
    ecc = _solve_kepler_array(m0 + n * (ts - epoch0), e)
    nu = 2.0 * np.arctan2(
        math.sqrt(1.0 + e) * np.sin(ecc / 2.0),
        math.sqrt(1.0 - e) * np.cos(ecc / 2.0),
    )
    p = el.a * (1.0 - e * e)
    radius = p / (1.0 + e * np.cos(nu))
    cos_nu, sin_nu = np.cos(nu), np.sin(nu)
    vfac = math.sqrt(mu.mu / p)
    r_pqw = np.stack([radius * cos_nu, radius * sin_nu, np.zeros_like(nu)], axis=1)
    v_pqw = np.stack([-vfac * sin_nu, vfac * (e + cos_nu), np.zeros_like(nu)], axis=1)
    rot = _perifocal_basis(el)
    return r_pqw @ rot.T, v_pqw @ rot.T


def true_longitude(el: ClassicalElements, epoch0: float, t: float,
                   mu: GravParam = SUN) -> float:
    """True longitude raan + argp + nu(t), normalized to [0, 2*pi)."""
    e = el.e
    ecc0 = _nu_to_ecc_anomaly(el.nu, e)
    m0 = ecc0 - e * math.sin(ecc0)
    n = math.sqrt(mu.mu / el.a**3)
    ecc = solve_kepler(m0 + n * (t - epoch0), e)
    nu = 2.0 * math.atan2(
        math.sqrt(1.0 + e) * math.sin(ecc / 2.0),
        math.sqrt(1.0 - e) * math.cos(ecc / 2.0),
    )
    return norm_angle(el.raan + el.argp + nu)


def orbital_energy(el: ClassicalElements, mu: GravParam = SUN) -> float:
    """Specific orbital energy -mu/(2a) [AU^2/day^2]."""
    return -mu.mu / (2.0 * el.a)


def angular_momentum(el: ClassicalElements, mu: GravParam = SUN) -> float:
    """Specific angular momentum magnitude sqrt(mu*p) [AU^2/day]."""
    return math.sqrt(mu.mu * el.a * (1.0 - el.e**2))


def state_to_classical(state: StateVector, mu: GravParam = SUN) -> ClassicalElements:
    """Recover classical elements from a heliocentric state (elliptic only)."""
    r = state.r
    v = state.v
    rn = float(np.linalg.norm(r))
    v2 = float(np.dot(v, v))
    h_vec = np.cross(r, v)
    hn = float(np.linalg.norm(h_vec))
    if hn <= 0.0:
        raise ElementError("degenerate (rectilinear) state")
    energy = 0.5 * v2 - mu.mu / rn
    if energy >= 0.0:
        raise ElementError(f"state is not elliptic (energy {energy})")
    a = -mu.mu / (2.0 * energy)
    e_vec = ((v2 - mu.mu / rn) * r - float(np.dot(r, v)) * v) / mu.mu
    e = float(np.linalg.norm(e_vec))
    i = math.acos(min(1.0, max(-1.0, h_vec[2] / hn)))
    node = np.array([-h_vec[1], h_vec[0], 0.0])
    nn = float(np.linalg.norm(node))
    if nn > 1e-12 * hn:
        raan = math.atan2(node[1], node[0])
    else:
        node = np.array([1.0, 0.0, 0.0])
        nn = 1.0
        raan = 0.0
    if e > 1e-12:
        argp = math.atan2(float(np.dot(np.cross(node, e_vec), h_vec)) / hn,
                          float(np.dot(node, e_vec)))
        nu = math.atan2(float(np.dot(np.cross(e_vec, r), h_vec)) / hn,
                        float(np.dot(e_vec, r)))
    else:
        argp = 0.0
        nu = math.atan2(float(np.dot(np.cross(node, r), h_vec)) / hn,
                        float(np.dot(node, r)))
    return ClassicalElements(a=a, e=e, i=i, raan=norm_angle(raan),
                             argp=norm_angle(argp), nu=norm_angle(nu))


# --- Lambert (zero revolution, prograde) ----------------------------------

COLLINEAR_TOL = 1e-3  # rad; transfer angles this close to 0 or pi are rejected
_Z_LO = -16.0 * math.pi**2
# upper bracket stays far enough below (2*pi)^2 that 1 - cos(sqrt(z)) keeps
# a couple of hundred ulps; the time of flight there is astronomically large
_Z_HI = 4.0 * math.pi**2 * (1.0 - 1e-7)


def _stumpff_c(z: float) -> float:
    if z > 1e-6:
        return (1.0 - math.cos(math.sqrt(z))) / z
    if z < -1e-6:
        return (math.cosh(math.sqrt(-z)) - 1.0) / (-z)
    return 1.0 / 2.0 - z / 24.0 + z * z / 720.0


def _stumpff_s(z: float) -> float:
    if z > 1e-6:
        sz = math.sqrt(z)
        return (sz - math.sin(sz)) / (sz * sz * sz)
    if z < -1e-6:
        sz = math.sqrt(-z)
        return (math.sinh(sz) - sz) / (sz * sz * sz)
    return 1.0 / 6.0 - z / 120.0 + z * z / 5040.0


def _transfer_angle(r1: np.ndarray, r2: np.ndarray) -> float:
    """Prograde transfer angle in [0, 2*pi)."""
    r1n = float(np.linalg.norm(r1))
    r2n = float(np.linalg.norm(r2))
    cos_dt = float(np.dot(r1, r2)) / (r1n * r2n)
    dt = math.acos(min(1.0, max(-1.0, cos_dt)))
    if r1[0] * r2[1] - r1[1] * r2[0] < 0.0:
        dt = TWO_PI - dt
    return dt


def lambert(r1, r2, tof: float, mu: GravParam = SUN) -> tuple[np.ndarray, np.ndarray]:
    """Solve the zero-revolution prograde Lambert problem.

    Universal-variable formulation; returns (v1, v2) in AU/day such that
    propagating (r1, v1) for tof days reaches r2.

    Raises NearCollinearError when the transfer angle is within 1e-3 rad of
    0 or pi, and NoConvergenceError when no zero-revolution solution exists
    in the bracketed universal-variable range.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if not (tof > 0.0 and math.isfinite(tof)):
        raise ElementError(f"tof must be positive and finite, got {tof}")
    r1n = float(np.linalg.norm(r1))
    r2n = float(np.linalg.norm(r2))
    dt = _transfer_angle(r1, r2)
    if min(dt, abs(dt - math.pi), TWO_PI - dt) < COLLINEAR_TOL:
        raise NearCollinearError(f"transfer angle {dt:.6f} rad is near 0 or pi")
    cos_dt = math.cos(dt)
    a_coef = math.sin(dt) * math.sqrt(r1n * r2n / (1.0 - cos_dt))
    sqrt_mu_tof = math.sqrt(mu.mu) * tof

    def fun(z: float) -> float:
        c = _stumpff_c(z)
        if c <= 0.0:
            return 1e30
        y = r1n + r2n + a_coef * (z * _stumpff_s(z) - 1.0) / math.sqrt(c)
        if y <= 0.0:
            return -1e30
        return (y / c) ** 1.5 * _stumpff_s(z) + a_coef * math.sqrt(y) - sqrt_mu_tof

    if fun(_Z_LO) > 0.0:
        raise NoConvergenceError(f"no zero-revolution solution for tof={tof}")
    if fun(_Z_HI) < 0.0:
        raise NoConvergenceError(f"no zero-revolution solution for tof={tof}")
    z = brentq(fun, _Z_LO, _Z_HI, xtol=1e-13, maxiter=300)
    c = _stumpff_c(z)
    y = r1n + r2n + a_coef * (z * _stumpff_s(z) - 1.0) / math.sqrt(c)
    if y <= 0.0 or abs(fun(z)) > 1e-6 * sqrt_mu_tof:
        raise NoConvergenceError(f"Lambert root rejected for tof={tof}")
    f = 1.0 - y / r1n
    g = a_coef * math.sqrt(y / mu.mu)
    gdot = 1.0 - y / r2n
    v1 = (r2 - f * r1) / g
    v2 = (gdot * r2 - r1) / g
    return v1, v2


def _stumpff_c_array(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z > 1e-6
    neg = z < -1e-6
    mid = ~(pos | neg)
    zp = np.sqrt(z[pos])
    out[pos] = (1.0 - np.cos(zp)) / z[pos]
    zn = np.sqrt(-z[neg])
    out[neg] = (np.cosh(zn) - 1.0) / (-z[neg])
    zm = z[mid]
    out[mid] = 1.0 / 2.0 - zm / 24.0 + zm * zm / 720.0
    return out


def _stumpff_s_array(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z > 1e-6
    neg = z < -1e-6
    mid = ~(pos | neg)
    zp = np.sqrt(z[pos])
    out[pos] = (zp - np.sin(zp)) / (zp * zp * zp)
    zn = np.sqrt(-z[neg])
    out[neg] = (np.sinh(zn) - zn) / (zn * zn * zn)
    zm = z[mid]
    out[mid] = 1.0 / 6.0 - zm / 120.0 + zm * zm / 5040.0
    return out


def lambert_many(r1s: np.ndarray, r2s: np.ndarray, tofs: np.ndarray,
                 mu: GravParam = SUN) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched Lambert solve via bisection; cells that fail are masked out.

    Arguments are (n,3), (n,3), (n,) arrays. Returns (v1s, v2s, ok) where
    ok marks cells with a converged, non-collinear solution. Matches the
    scalar `lambert` result on every ok cell.
    """
    r1s = np.asarray(r1s, dtype=float)
    r2s = np.asarray(r2s, dtype=float)
    tofs = np.asarray(tofs, dtype=float)
    n = len(tofs)
    r1n = np.linalg.norm(r1s, axis=1)
    r2n = np.linalg.norm(r2s, axis=1)
    cos_dt = np.clip(np.sum(r1s * r2s, axis=1) / (r1n * r2n), -1.0, 1.0)
    dt = np.arccos(cos_dt)
    cz = r1s[:, 0] * r2s[:, 1] - r1s[:, 1] * r2s[:, 0]
    dt = np.where(cz < 0.0, TWO_PI - dt, dt)
    usable = np.minimum(np.minimum(dt, np.abs(dt - math.pi)), TWO_PI - dt) >= COLLINEAR_TOL
    usable &= tofs > 0.0

    a_coef = np.where(
        usable,
        np.sin(dt) * np.sqrt(r1n * r2n / np.maximum(1.0 - np.cos(dt), 1e-15)),
        1.0,
    )
    rsum = r1n + r2n
    sqrt_mu_tof = math.sqrt(mu.mu) * tofs

    def resid(z):
        c = np.maximum(_stumpff_c_array(z), 1e-300)
        s = _stumpff_s_array(z)
        y = rsum + a_coef * (z * s - 1.0) / np.sqrt(c)
        valid = y > 0.0
        ys = np.where(valid, y, 1.0)
        val = (ys / c) ** 1.5 * s + a_coef * np.sqrt(ys) - sqrt_mu_tof
        return np.where(valid, val, -np.inf), y

    lo = np.full(n, _Z_LO)
    hi = np.full(n, _Z_HI)
    f_lo, _ = resid(lo)
    f_hi, _ = resid(hi)
    usable &= (f_lo <= 0.0) & (f_hi >= 0.0)
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        f_mid, _ = resid(mid)
        go_up = f_mid < 0.0
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    z = 0.5 * (lo + hi)
    f_final, y = resid(z)
    usable &= np.abs(f_final) <= 1e-6 * sqrt_mu_tof
    usable &= y > 0.0

    ys = np.where(y > 0.0, y, 1.0)
    f_lag = 1.0 - ys / r1n
    g_lag = a_coef * np.sqrt(ys / mu.mu)
    gdot = 1.0 - ys / r2n
    g_safe = np.where(np.abs(g_lag) > 0.0, g_lag, 1.0)
    v1s = (r2s - f_lag[:, None] * r1s) / g_safe[:, None]
    v2s = (gdot[:, None] * r2s - r1s) / g_safe[:, None]
    usable &= np.all(np.isfinite(v1s), axis=1) & np.all(np.isfinite(v2s), axis=1)
    return v1s, v2s, usable
