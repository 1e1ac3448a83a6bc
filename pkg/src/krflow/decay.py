"""Power-law decay fitting of curvature quantities along trajectories.

Distances are measured in the time-zero metric from a fixed basepoint (the
first trusted grid point) unless stated otherwise; fitted exponents against
time-zero and time-t distances agree for uniformly biLipschitz flows, and
that agreement is itself a tested property.

Covariant derivatives of the curvature are proxied by repeated radial
differentiation with respect to arc length, |D^(k+1)| = |d |D^k| / ds| with
ds = (1/2) sqrt(psi) drho; only decay exponents of these proxies are ever
asserted.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .errors import WindowTooSmall
from .fd import MARGIN, deriv1
from .flow import FlowTrajectory, evolve, FlowControls
from .geometry import (BaseGeometry, RadialProfile, cumulative_distance,
                       curvature_norm_samples, ricci_norm_samples,
                       scalar_curvature)

FLAT_TOLERANCE = 1e-9
MIN_FIT_SAMPLES = 8


class QuantityKind(enum.Enum):
    RICCI_NORM = "RicciNorm"
    SCALAR_CURV = "ScalarCurv"
    RM_NORM = "RmNorm"
    COV_DERIV_RM = "CovDerivRm"


@dataclass(frozen=True)
class Quantity:
    kind: QuantityKind
    k: int = 0  # derivative order, CovDerivRm only

    def __post_init__(self):
        if self.kind is QuantityKind.COV_DERIV_RM and not (1 <= self.k <= 2):
            raise ValueError("CovDerivRm supports k in {1, 2}")

    @property
    def label(self) -> str:
        if self.kind is QuantityKind.COV_DERIV_RM:
            return f"CovDerivRm({self.k})"
        return self.kind.value


def quantity_samples(profile: RadialProfile, base: BaseGeometry,
                     quantity: Quantity) -> np.ndarray:
    if quantity.kind is QuantityKind.RICCI_NORM:
        return ricci_norm_samples(profile, base)
    if quantity.kind is QuantityKind.SCALAR_CURV:
        return np.abs(scalar_curvature(profile, base))
    vals = curvature_norm_samples(profile, base)
    if quantity.kind is QuantityKind.RM_NORM:
        return vals
    for _ in range(quantity.k):
        vals = np.abs(deriv1(vals, profile.dx)) * 2.0 / np.sqrt(profile.psi)
    return vals


@dataclass(frozen=True)
class DecayReport:
    quantity: str
    time: float
    fit_window: tuple[float, float]  # distance interval
    exponent: float
    r2: float
    samples: np.ndarray  # (distance, value) rows
    flat: bool = False

    def to_csv_row(self) -> str:
        return (f"{self.quantity},{self.time:.17g},{self.fit_window[0]:.17g},"
                f"{self.fit_window[1]:.17g},{self.exponent:.17g},{self.r2:.17g}\n")


def write_decay_reports(path, reports):
    with open(path, "w", newline="") as f:
        f.write("quantity,time,window_lo,window_hi,exponent,r2\n")
        for rep in reports:
            f.write(rep.to_csv_row())


def _loglog_fit(d: np.ndarray, v: np.ndarray):
    x = np.log(d)
    y = np.log(v)
    a = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), r2


def fit_decay_exponent(traj: FlowTrajectory, quantity: Quantity, time: float,
                       fit_window: tuple[float, float],
                       distance_profile: RadialProfile | None = None) -> DecayReport:
    """Least-squares slope of log(value) against log(distance).

    fit_window is a distance interval; distances default to the time-zero
    metric (the trajectory's initial profile) from the first trusted grid
    point.  An all-zero quantity over the window is reported with the flat
    flag instead of an exponent.
    """
    profile = traj.profile_at(time)
    dprof = traj.profiles[0] if distance_profile is None else distance_profile
    rho_base = float(dprof.rho[MARGIN])
    dist = cumulative_distance(dprof, rho_base)
    vals = quantity_samples(profile, traj.base, quantity)

    ok = np.zeros(profile.npoints, dtype=bool)
    ok[MARGIN + quantity.k:profile.npoints - MARGIN - quantity.k] = True
    sel = ok & (dist >= fit_window[0]) & (dist <= fit_window[1]) & (dist > 0)
    if int(np.count_nonzero(sel)) < MIN_FIT_SAMPLES:
        raise WindowTooSmall(
            f"fit window {fit_window} holds {int(np.count_nonzero(sel))} samples, "
            f"need {MIN_FIT_SAMPLES}")
    d = dist[sel]
    v = vals[sel]
    samples = np.column_stack([d, v])
    scale = float(np.max(np.abs(vals[ok])))
    if scale <= FLAT_TOLERANCE:
        return DecayReport(quantity.label, time, fit_window, float("nan"), 1.0,
                           samples, flat=True)
    exponent, r2 = _loglog_fit(d, v)
    return DecayReport(quantity.label, time, fit_window, exponent, r2, samples)


@dataclass(frozen=True)
class PreservationVerdict:
    reports: list
    passed: bool
    max_drift: float


def decay_preservation_check(traj: FlowTrajectory, quantity: Quantity,
                             times, fit_window,
                             drift_tol: float = 0.05,
                             r2_min: float = 0.99) -> PreservationVerdict:
    """PASS iff the fitted exponent drifts by <= drift_tol with good fits."""
    reports = [fit_decay_exponent(traj, quantity, t, fit_window) for t in times]
    if all(r.flat for r in reports):
        return PreservationVerdict(reports, True, 0.0)
    if any(r.flat for r in reports):
        return PreservationVerdict(reports, False, float("inf"))
    e0 = reports[0].exponent
    drift = max(abs(r.exponent - e0) for r in reports)
    ok = drift <= drift_tol and all(r.r2 >= r2_min for r in reports)
    return PreservationVerdict(reports, ok, drift)


@dataclass(frozen=True)
class PlateauReport:
    horizons: np.ndarray
    c1: np.ndarray          # measured biLipschitz constant up to each horizon
    rm_sup: np.ndarray      # sup |Rm| over the ball up to each horizon
    applicable: bool
    passed: bool


def bilipschitz_plateau_check(initial: RadialProfile, base: BaseGeometry,
                              horizons, ball_window: tuple[float, float],
                              controls: FlowControls | None = None,
                              c1_cap: float = 100.0,
                              growth_tol: float = 0.05,
                              samples_per_unit: int = 4) -> PlateauReport:
    """Uniform-in-horizon curvature bound under a biLipschitz hypothesis.

    Evolves once to max(horizons), sampling densely; for each horizon T it
    reports the measured two-sided coefficient ratio C1(T) and the running
    sup of |Rm| over the ball window.  NotApplicable (applicable=False) when
    C1 exceeds the cap; PASS iff the |Rm| sup grows by <= growth_tol from
    the second-largest to the largest horizon.
    """
    horizons = np.asarray(sorted(horizons), dtype=float)
    t_max = float(horizons[-1])
    n_out = max(int(t_max * samples_per_unit), len(horizons)) + 1
    times = np.unique(np.concatenate([np.linspace(0.0, t_max, n_out), horizons]))
    base_controls = controls or FlowControls()
    run_controls = FlowControls(
        scheme=base_controls.scheme, dt=base_controls.dt,
        bc_kind=base_controls.bc_kind, output_times=times)
    traj = evolve(initial, base, t_max, run_controls)

    sl = initial.window_slice(*ball_window)
    phi0 = initial.phi[sl]
    psi0 = initial.psi[sl]
    c1_run, rm_run = [], []
    c1_now = 1.0
    rm_now = 0.0
    for prof in traj.profiles:
        phi = prof.phi[sl]
        psi = prof.psi[sl]
        ratio = max(float(np.max(phi / phi0)), float(np.max(phi0 / phi)),
                    float(np.max(psi / psi0)), float(np.max(psi0 / psi)))
        c1_now = max(c1_now, ratio)
        rm = curvature_norm_samples(prof, base)[sl]
        rm_now = max(rm_now, float(np.max(rm)))
        c1_run.append(c1_now)
        rm_run.append(rm_now)

    c1_at = np.array([c1_run[int(np.argmin(np.abs(traj.times - T)))]
                      for T in horizons])
    rm_at = np.array([rm_run[int(np.argmin(np.abs(traj.times - T)))]
                      for T in horizons])
    applicable = bool(np.all(c1_at <= c1_cap))
    if not applicable:
        return PlateauReport(horizons, c1_at, rm_at, False, False)
    if rm_at[-2] == 0.0:
        passed = rm_at[-1] == 0.0
    else:
        passed = rm_at[-1] <= (1.0 + growth_tol) * rm_at[-2]
    return PlateauReport(horizons, c1_at, rm_at, True, bool(passed))
