"""Radial ansatz for rotationally symmetric Kahler metrics on a model end.

A metric is encoded by two positive coefficient functions on a uniform grid
in the radial log-coordinate rho:

    omega = phi(rho) * omega_D  +  psi(rho) * (i d rho ^ dbar rho)

where omega_D is a Kahler-Einstein metric on the (n-1)-dimensional base with
Ric(omega_D) = lam * omega_D, and the line-bundle twisting mu in {0, 1} fixes
the closedness relation d_rho phi = mu * psi.

Conventions used package-wide (each stated once, here):

* Riemannian lengths: the radial line element is (1/4) psi drho^2, so the
  arc length of [rho0, rho1] is the integral of (1/2) sqrt(psi).  For the
  cone pair phi = psi = e^rho this gives radius R with R^2 = e^rho.
* Scalar curvature: R = 2 [ (n-1) r_base/phi + r_fiber/psi ], i.e. twice the
  unitary-frame trace of the Ricci coefficients.
* Curvature norm |Rm|: square root of the sum of squared components of the
  Kahler curvature tensor in a unitary frame adapted to the ansatz
  (fiber direction e_0, base directions e_alpha).  The base's own curvature
  enters through the space-form model with the same Einstein constant,
  R^D_(ab~cd~) = (lam/n)(g_(ab~) g_(cd~) + g_(ad~) g_(cb~)); for n = 2 this
  is exact, for n > 2 it is the fixed convention.  Only decay exponents of
  |Rm| are ever asserted, never prefactors.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .errors import GridTooCoarse, NonKaehler, OutOfRange, TooCloseToBoundary
from .fd import MARGIN, deriv1, deriv2, spacing, untrusted_mask

MIN_POINTS = 5


@dataclass(frozen=True)
class BaseGeometry:
    """Scalar data through which the divisor enters the reduced equations.

    n: total complex dimension of the end (base has dimension n-1).
    lam: Einstein constant of the base metric, Ric(omega_D) = lam * omega_D.
    mu: twisting flag; curvature of the bundle metric equals mu * omega_D.
    orbifold_k: quotient order for C^n/Z_k global models; labeling only,
        it never enters a radial formula.
    """

    n: int
    lam: float
    mu: int
    orbifold_k: int = 1

    def __post_init__(self):
        if self.mu not in (0, 1):
            raise ValueError("mu must be 0 or 1")
        if self.orbifold_k < 1:
            raise ValueError("orbifold_k must be >= 1")
        n_min = 2 if self.mu == 1 else 1
        if self.n < n_min:
            raise ValueError(f"n must be >= {n_min} when mu = {self.mu}")


def _as_readonly(a) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(a, dtype=float))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RadialProfile:
    """Sampled coefficient pair (phi, psi) on a uniform rho-grid."""

    rho: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    dx: float = field(init=False)

    def __post_init__(self):
        rho = _as_readonly(self.rho)
        phi = _as_readonly(self.phi)
        psi = _as_readonly(self.psi)
        if not (rho.shape == phi.shape == psi.shape) or rho.ndim != 1:
            raise ValueError("rho, phi, psi must be 1-d arrays of equal length")
        if rho.size < MIN_POINTS:
            raise GridTooCoarse(f"need at least {MIN_POINTS} grid points")
        if np.any(phi <= 0) or np.any(psi <= 0):
            raise NonKaehler("phi and psi must be positive at every grid point")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "dx", spacing(rho))

    @property
    def npoints(self) -> int:
        return self.rho.size

    def closedness_defect(self, base: BaseGeometry) -> float:
        """Max interior |d_rho phi - mu psi| by central differences."""
        d = deriv1(self.phi, self.dx) - base.mu * self.psi
        return float(np.max(np.abs(d[MARGIN:-MARGIN])))

    def index_of(self, rho: float) -> int:
        """Nearest grid index; OutOfRange if rho is off the grid."""
        if rho < self.rho[0] - 1e-12 or rho > self.rho[-1] + 1e-12:
            raise OutOfRange(f"rho={rho} outside [{self.rho[0]}, {self.rho[-1]}]")
        return int(round((rho - self.rho[0]) / self.dx))

    def window_slice(self, lo: float, hi: float) -> slice:
        """Slice of grid indices with lo <= rho <= hi."""
        if lo >= hi:
            raise OutOfRange("empty window")
        i0 = int(np.searchsorted(self.rho, lo - 1e-12))
        i1 = int(np.searchsorted(self.rho, hi + 1e-12))
        if i0 >= i1:
            raise OutOfRange("window contains no grid points")
        return slice(i0, i1)

    # -- serialization ----------------------------------------------------

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write("rho,phi,psi\n")
            for r, p, q in zip(self.rho, self.phi, self.psi):
                f.write(f"{r:.17g},{p:.17g},{q:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "RadialProfile":
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        return cls(rho=data[:, 0], phi=data[:, 1], psi=data[:, 2])

    def to_json_dict(self, base: BaseGeometry) -> dict:
        return {
            "base": {"n": base.n, "lambda": base.lam, "mu": base.mu,
                     "orbifold_k": base.orbifold_k},
            "rho_grid": self.rho.tolist(),
            "phi": self.phi.tolist(),
            "psi": self.psi.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> tuple["RadialProfile", BaseGeometry]:
        base = BaseGeometry(n=int(d["base"]["n"]), lam=float(d["base"]["lambda"]),
                            mu=int(d["base"]["mu"]),
                            orbifold_k=int(d["base"].get("orbifold_k", 1)))
        return cls(rho=d["rho_grid"], phi=d["phi"], psi=d["psi"]), base


@dataclass(frozen=True)
class RicciCoefficients:
    """Coefficients of Ric(omega) = r_base * omega_D + r_fiber * (i drho^dbar rho)."""

    r_base: np.ndarray
    r_fiber: np.ndarray
    untrusted: np.ndarray  # boundary-margin mask

    def __post_init__(self):
        object.__setattr__(self, "r_base", _as_readonly(self.r_base))
        object.__setattr__(self, "r_fiber", _as_readonly(self.r_fiber))
        m = np.asarray(self.untrusted, dtype=bool)
        m.setflags(write=False)
        object.__setattr__(self, "untrusted", m)


def uniform_grid(rho_min: float, rho_max: float, points: int) -> np.ndarray:
    if points < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points")
    if rho_min >= rho_max:
        raise ValueError("rho_min must be < rho_max")
    return np.linspace(rho_min, rho_max, points)


def profile_from_potential(rho: np.ndarray, potential: np.ndarray,
                           base: BaseGeometry,
                           base_offset: float = 0.0) -> RadialProfile:
    """Profile of i d dbar P(rho): phi = a + mu P', psi = P''.

    The offset a is the residual base coefficient when the potential carries
    no base direction (mu = 0); it must vanish when mu = 1.
    """
    rho = np.asarray(rho, dtype=float)
    potential = np.asarray(potential, dtype=float)
    if rho.size < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points")
    if base.mu == 1 and base_offset != 0.0:
        raise ValueError("base_offset must be 0 when mu = 1")
    if base.mu == 0 and base_offset <= 0.0:
        raise ValueError("base_offset must be > 0 when mu = 0")
    h = spacing(rho)
    phi = base_offset + base.mu * deriv1(potential, h)
    psi = deriv2(potential, h)
    if np.any(phi <= 0) or np.any(psi <= 0):
        raise NonKaehler("potential produces a nonpositive coefficient")
    return RadialProfile(rho=rho, phi=phi, psi=psi)


def log_det_coefficient(profile: RadialProfile, base: BaseGeometry) -> np.ndarray:
    """Q = (n-1) log phi + log psi, the radial part of log det g."""
    return (base.n - 1) * np.log(profile.phi) + np.log(profile.psi)


def ricci_coefficients(profile: RadialProfile, base: BaseGeometry) -> RicciCoefficients:
    """Ricci coefficients r_base = lam - mu Q', r_fiber = -Q''."""
    if profile.npoints < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points")
    q = log_det_coefficient(profile, base)
    r_base = base.lam - base.mu * deriv1(q, profile.dx)
    r_fiber = -deriv2(q, profile.dx)
    return RicciCoefficients(r_base=r_base, r_fiber=r_fiber,
                             untrusted=untrusted_mask(profile.npoints))


def scalar_curvature(profile: RadialProfile, base: BaseGeometry) -> np.ndarray:
    """Scalar curvature samples, R = 2[(n-1) r_base/phi + r_fiber/psi]."""
    rc = ricci_coefficients(profile, base)
    return 2.0 * ((base.n - 1) * rc.r_base / profile.phi + rc.r_fiber / profile.psi)


def _sqrt_psi_half_spline(profile: RadialProfile) -> CubicSpline:
    return CubicSpline(profile.rho, 0.5 * np.sqrt(profile.psi))


def radial_distance(profile: RadialProfile, rho0: float, rho1: float) -> float:
    """Radial arc length: composite Simpson quadrature of (1/2) sqrt(psi).

    The integrand is resampled from a cubic spline so the endpoints need not
    be grid points.
    """
    if rho0 >= rho1:
        raise OutOfRange("rho0 must be < rho1")
    if rho0 < profile.rho[0] - 1e-12 or rho1 > profile.rho[-1] + 1e-12:
        raise OutOfRange("integration limits outside the grid")
    g = _sqrt_psi_half_spline(profile)
    m = max(8, 2 * int(np.ceil((rho1 - rho0) / profile.dx)))
    x = np.linspace(rho0, rho1, m + 1)
    return float(simpson(g(x), x=x))


def cumulative_distance(profile: RadialProfile, rho_base: float) -> np.ndarray:
    """Signed arc length from rho_base to every grid point (spline quadrature)."""
    if rho_base < profile.rho[0] - 1e-12 or rho_base > profile.rho[-1] + 1e-12:
        raise OutOfRange("basepoint outside the grid")
    anti = _sqrt_psi_half_spline(profile).antiderivative()
    return np.asarray(anti(profile.rho) - anti(rho_base))


def _curvature_blocks(phi, psi, phi_p, psi_p, psi_pp, base: BaseGeometry):
    """Unitary-frame curvature components of the ansatz metric.

    K0: fiber-fiber, K1: fiber-base, K2/K3: base-base parallel/exchange
    coefficients (space-form convention for the base, see module docstring).
    """
    n, lam, mu = base.n, base.lam, base.mu
    k0 = (psi_p * psi_p / psi - psi_pp) / (psi * psi)
    k1 = mu * (mu * psi * psi / phi - psi_p) / (psi * phi)
    k2 = (lam * phi / n - mu * phi_p) / (phi * phi)
    k3 = (lam * phi / n - mu * mu * psi) / (phi * phi)
    return k0, k1, k2, k3


def _norm_from_blocks(k0, k1, k2, k3, n: int):
    m = n - 1
    sq = k0 * k0 + 4.0 * m * k1 * k1 + m * m * (k2 * k2 + k3 * k3) \
        + 2.0 * m * k2 * k3
    return np.sqrt(sq)


def curvature_norm_samples(profile: RadialProfile, base: BaseGeometry) -> np.ndarray:
    """|Rm| at every grid point (boundary margin filled by one-sided stencils)."""
    if profile.npoints < MIN_POINTS:
        raise GridTooCoarse(f"need at least {MIN_POINTS} grid points")
    h = profile.dx
    phi_p = deriv1(profile.phi, h)
    psi_p = deriv1(profile.psi, h)
    psi_pp = deriv2(profile.psi, h)
    blocks = _curvature_blocks(profile.phi, profile.psi, phi_p, psi_p, psi_pp, base)
    return _norm_from_blocks(*blocks, base.n)


def curvature_norm_at(profile: RadialProfile, base: BaseGeometry, rho: float) -> float:
    """|Rm| at a single point, at least MARGIN spacings from the boundary."""
    i = profile.index_of(rho)
    if i < MARGIN or i >= profile.npoints - MARGIN:
        raise TooCloseToBoundary(
            f"rho={rho} is within {MARGIN} spacings of the grid boundary")
    h = profile.dx
    sl = slice(i - 2, i + 3)
    phi = profile.phi[sl]
    psi = profile.psi[sl]
    phi_p = float(np.dot([1, -8, 0, 8, -1], phi) / (12 * h))
    psi_p = float(np.dot([1, -8, 0, 8, -1], psi) / (12 * h))
    psi_pp = float(np.dot([-1, 16, -30, 16, -1], psi) / (12 * h * h))
    blocks = _curvature_blocks(phi[2], psi[2], phi_p, psi_p, psi_pp, base)
    return float(_norm_from_blocks(*blocks, base.n))


def ricci_norm_samples(profile: RadialProfile, base: BaseGeometry) -> np.ndarray:
    """|Ric| in the unitary frame: sqrt((n-1)(r_base/phi)^2 + (r_fiber/psi)^2)."""
    rc = ricci_coefficients(profile, base)
    return np.sqrt((base.n - 1) * (rc.r_base / profile.phi) ** 2
                   + (rc.r_fiber / profile.psi) ** 2)
