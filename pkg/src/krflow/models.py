"""Model ends (cylindrical, bulging, conical, shrinking-bundle family).

Each constructor returns a RadialProfile whose coefficient pair satisfies
the closedness relation exactly by construction, and
asymptotic_form_residual measures how closely an arbitrary profile matches
a given regime over a window.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (GridNotPositive, InterpolationRangeExceeded, NonKaehler,
                     OutOfRange, RegimeMismatch)
from .geometry import BaseGeometry, RadialProfile


class RegimeKind(enum.Enum):
    CYLINDRICAL = "cylindrical"
    BULGING = "bulging"
    CONICAL = "conical"
    FIK = "fik"


@dataclass(frozen=True)
class RegimeSpec:
    """Which model family a profile is compared against, plus its parameters.

    Exactly the fields relevant to `kind` are read:
      cylindrical: c (fiber coefficient is 2c)
      bulging:     N
      conical:     k_log
      fik:         p, t0
    """

    kind: RegimeKind
    c: float | None = None
    N: float | None = None
    k_log: float | None = None
    p: float | None = None
    t0: float | None = None

    def __post_init__(self):
        need = {
            RegimeKind.CYLINDRICAL: ("c",),
            RegimeKind.BULGING: ("N",),
            RegimeKind.CONICAL: ("k_log",),
            RegimeKind.FIK: ("p", "t0"),
        }[self.kind]
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"{self.kind.value} regime requires field {name!r}")
        if self.kind is RegimeKind.CYLINDRICAL and self.c <= 0:
            raise ValueError("c must be positive")
        if self.kind is RegimeKind.BULGING and self.N <= 0:
            raise ValueError("N must be positive")
        if self.kind is RegimeKind.FIK and (self.p <= 0 or self.t0 <= 0):
            raise ValueError("p and t0 must be positive")


def make_cylindrical(c: float, base: BaseGeometry, rho: np.ndarray,
                     base_offset: float) -> RadialProfile:
    """Cylinder end: phi = a, psi = 2c (potential c rho^2 plus a base form)."""
    if base.mu != 0:
        raise RegimeMismatch("cylindrical asymptotics require mu = 0")
    if c <= 0 or base_offset <= 0:
        raise NonKaehler("c and base_offset must be positive")
    rho = np.asarray(rho, dtype=float)
    return RadialProfile(rho=rho, phi=np.full_like(rho, base_offset),
                         psi=np.full_like(rho, 2.0 * c))


def bulging_coefficients(N: float) -> tuple[float, float]:
    """(base, fiber) leading coefficients of the bulging model.

    phi = C_b rho^(1/N), psi = C_f rho^((1-N)/N) with
    C_b = (N+1)^2 / (2N), C_f = (N+1)^2 / (2N^2) = C_b / N.
    """
    cb = (N + 1.0) ** 2 / (2.0 * N)
    return cb, cb / N


def make_bulging(N: float, base: BaseGeometry, rho: np.ndarray) -> RadialProfile:
    """Bulging end from the potential (N+1)/2 * rho^((N+1)/N); needs rho > 0."""
    if base.mu != 1:
        raise RegimeMismatch("bulging asymptotics require mu = 1")
    if N <= 0:
        raise ValueError("N must be positive")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0):
        raise GridNotPositive("bulging model needs a strictly positive grid")
    cb, cf = bulging_coefficients(N)
    return RadialProfile(rho=rho, phi=cb * rho ** (1.0 / N),
                         psi=cf * rho ** ((1.0 - N) / N))


def make_conical(k_log: float, base: BaseGeometry, rho: np.ndarray) -> RadialProfile:
    """Conical end from the potential e^rho + k_log * rho."""
    if base.mu != 1:
        raise RegimeMismatch("conical asymptotics require mu = 1")
    rho = np.asarray(rho, dtype=float)
    e = np.exp(rho)
    if k_log <= -np.exp(rho[0]):
        raise NonKaehler(f"k_log must exceed -e^rho_min = {-np.exp(rho[0]):.6g}")
    return RadialProfile(rho=rho, phi=e + k_log, psi=e.copy())


def load_b_table(path) -> np.ndarray:
    """Two-column CSV `s,B` -> array of shape (m, 2) sorted by s."""
    data = np.genfromtxt(path, delimiter=",", skip_header=1)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("expected a two-column CSV with header s,B")
    return data[np.argsort(data[:, 0])]


def save_b_table(path, table: np.ndarray):
    with open(path, "w", newline="") as f:
        f.write("s,B\n")
        for s, b in table:
            f.write(f"{s:.17g},{b:.17g}\n")


def make_fik(p: float, t0: float, b_table: np.ndarray, base: BaseGeometry,
             rho: np.ndarray) -> RadialProfile:
    """Shrinking-bundle (FIK-type) time slice from a tabulated profile function B.

    Chart dictionary, fixed once: the ansatz coordinate is the cone
    log-radius, e^rho = (B(0)/p) |z|^(2p), so the self-similar argument is
    x = (4 B(0)/p) * t0 * e^(-rho) and the reduced pair is

        phi = e^rho * B(x) / B(0),      psi = d_rho phi
            = e^rho * (B(x) - x B'(x)) / B(0).

    At t0 -> 0 (or rho -> +infty) the pair degenerates to the exact cone.
    B is given as a sorted (x, B) table with x[0] = 0 carrying B(0) > 0 and
    is interpolated by a cubic spline; the needed argument range must be
    covered.
    """
    if p <= 0 or t0 <= 0:
        raise ValueError("p and t0 must be positive")
    b_table = np.asarray(b_table, dtype=float)
    xs, bs = b_table[:, 0], b_table[:, 1]
    if xs[0] != 0.0:
        raise ValueError("B table must start at argument 0 (carries B(0))")
    b0 = bs[0]
    if b0 <= 0:
        raise NonKaehler("B(0) must be positive")
    rho = np.asarray(rho, dtype=float)
    x = (4.0 * b0 / p) * t0 * np.exp(-rho)
    if np.max(x) > xs[-1] + 1e-14:
        raise InterpolationRangeExceeded(
            f"B table covers x <= {xs[-1]:.6g}, need {np.max(x):.6g}")
    spl = CubicSpline(xs, bs)
    bx = spl(x)
    bpx = spl(x, 1)
    e = np.exp(rho)
    phi = e * bx / b0
    psi = e * (bx - x * bpx) / b0
    if np.any(phi <= 0) or np.any(psi <= 0):
        raise NonKaehler("B table produces a nonpositive coefficient")
    return RadialProfile(rho=rho, phi=phi, psi=psi)


def _rel_sup(actual: np.ndarray, model: np.ndarray) -> float:
    return float(np.max(np.abs(actual - model)) / np.max(np.abs(model)))


def asymptotic_form_residual(profile: RadialProfile, spec: RegimeSpec,
                             window: tuple[float, float]):
    """Relative sup-distance to the regime's model pair over the window.

    The regime's free scalar parameter is fit by least squares on
    log-coefficients over the window (c from psi for cylindrical, leading
    coefficient from phi for bulging, cone coefficient from psi for
    conical); the other coefficient then uses the same fitted parameter.
    Returns (residual, fitted) where fitted maps parameter names to values.

    The residual is max over the two coefficient slots of
    sup|actual - model| / sup|model|.  Profiles that differ only in a
    subleading correction are therefore close; regimes with different
    leading growth separate on windows long enough for the growth to show.
    """
    sl = profile.window_slice(*window)
    rho = profile.rho[sl]
    phi = profile.phi[sl]
    psi = profile.psi[sl]

    if spec.kind is RegimeKind.CYLINDRICAL:
        a_fit = float(np.exp(np.mean(np.log(phi))))
        c_fit = float(np.exp(np.mean(np.log(psi)))) / 2.0
        res = max(_rel_sup(phi, np.full_like(phi, a_fit)),
                  _rel_sup(psi, np.full_like(psi, 2.0 * c_fit)))
        return res, {"c": c_fit, "base_offset": a_fit}

    if spec.kind is RegimeKind.BULGING:
        N = spec.N
        cb_fit = float(np.exp(np.mean(np.log(phi) - np.log(rho) / N)))
        model_phi = cb_fit * rho ** (1.0 / N)
        model_psi = (cb_fit / N) * rho ** ((1.0 - N) / N)
        res = max(_rel_sup(phi, model_phi), _rel_sup(psi, model_psi))
        return res, {"leading_coefficient": cb_fit}

    if spec.kind is RegimeKind.CONICAL:
        c_fit = float(np.exp(np.mean(np.log(psi) - rho)))
        e = np.exp(rho)
        res = max(_rel_sup(phi, c_fit * e + spec.k_log), _rel_sup(psi, c_fit * e))
        return res, {"cone_coefficient": c_fit}

    raise OutOfRange("asymptotic_form_residual supports cylindrical, bulging "
                     "and conical regimes only")
