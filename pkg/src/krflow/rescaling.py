"""Parabolic rescalings of trajectories and their limit measurements.

Rescaling dictionaries (the module's central derivations, validated by the
scale-1 identity and flat-cone exactness tests):

* Bulging, scale r: the chart map acts on the radial log-coordinate as
  rho = r^2 + r rho_hat (from u -> r u + i r^2/2 with rho = 2 Im u), time
  rescales as t = r^(2/N) t_hat, and the coefficient slots carry
      phi_hat(rho_hat, t_hat) = r^(-2/N) phi(r^2 + r rho_hat, r^(2/N) t_hat)
      psi_hat(rho_hat, t_hat) = r^(2-2/N) psi(r^2 + r rho_hat, r^(2/N) t_hat)
  (the fiber slot gains r^2 because d rho = r d rho_hat enters quadratically).

* Conical, scale s: rho = rho_hat + 2 log s, t = s^2 t_hat, and both
  coefficient slots are divided by s^2.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import HorizonExceeded, LatticeMismatch, WindowOutsideGrid
from .flow import FlowTrajectory
from .models import bulging_coefficients


class RescaleRegime(enum.Enum):
    BULGING = "bulging"
    CONICAL = "conical"


@dataclass(frozen=True)
class RescalingSpec:
    """Scale >= 1 plus the analysis window in rescaled variables."""

    regime: RescaleRegime
    scale: float
    rho_window: tuple[float, float]
    t_window: tuple[float, float] = (0.0, 0.0)
    N: float | None = None
    points: int = 257

    def __post_init__(self):
        if self.scale < 1.0:
            raise ValueError("scale must be >= 1")
        if self.rho_window[0] >= self.rho_window[1]:
            raise ValueError("empty rho window")
        if self.regime is RescaleRegime.BULGING and self.N is None:
            raise ValueError("bulging rescaling requires N")


@dataclass(frozen=True)
class RescaledSamples:
    """Coefficient samples on a common (rho_hat, t_hat) lattice."""

    rho_hat: np.ndarray
    t_hat: np.ndarray
    phi_hat: np.ndarray  # shape (len(t_hat), len(rho_hat))
    psi_hat: np.ndarray


def _resample(profile, rho_target: np.ndarray):
    if rho_target[0] < profile.rho[0] - 1e-9 or rho_target[-1] > profile.rho[-1] + 1e-9:
        raise WindowOutsideGrid(
            f"window maps to [{rho_target[0]:.4g}, {rho_target[-1]:.4g}], grid is "
            f"[{profile.rho[0]:.4g}, {profile.rho[-1]:.4g}]")
    phi = CubicSpline(profile.rho, profile.phi)(rho_target)
    psi = CubicSpline(profile.rho, profile.psi)(rho_target)
    return phi, psi


def _rescaled_times(traj: FlowTrajectory, time_factor: float,
                    t_window: tuple[float, float]) -> np.ndarray:
    t_hat = traj.times / time_factor
    keep = (t_hat >= t_window[0] - 1e-12) & (t_hat <= t_window[1] + 1e-12)
    if not np.any(keep):
        raise HorizonExceeded(
            f"no stored times in rescaled window {t_window}; trajectory has "
            f"t_hat in [{t_hat[0]:.4g}, {t_hat[-1]:.4g}]")
    if t_window[1] > t_hat[-1] + 1e-12:
        raise HorizonExceeded(
            f"trajectory covers t_hat <= {t_hat[-1]:.4g} < {t_window[1]:.4g}")
    return np.where(keep)[0]


def bulging_rescale(traj: FlowTrajectory, spec: RescalingSpec) -> RescaledSamples:
    """Anisotropic bulging rescaling of a trajectory at scale r."""
    if spec.regime is not RescaleRegime.BULGING:
        raise ValueError("spec.regime must be BULGING")
    r, N = spec.scale, spec.N
    time_factor = r ** (2.0 / N)
    idx = _rescaled_times(traj, time_factor, spec.t_window)
    rho_hat = np.linspace(*spec.rho_window, spec.points)
    rho_orig = r * r + r * rho_hat
    phis, psis = [], []
    for i in idx:
        phi, psi = _resample(traj.profiles[i], rho_orig)
        phis.append(r ** (-2.0 / N) * phi)
        psis.append(r ** (2.0 - 2.0 / N) * psi)
    return RescaledSamples(rho_hat=rho_hat, t_hat=traj.times[idx] / time_factor,
                           phi_hat=np.array(phis), psi_hat=np.array(psis))


def conical_blowdown(traj: FlowTrajectory, spec: RescalingSpec) -> RescaledSamples:
    """Parabolic blowdown of a trajectory at scale s."""
    if spec.regime is not RescaleRegime.CONICAL:
        raise ValueError("spec.regime must be CONICAL")
    s = spec.scale
    idx = _rescaled_times(traj, s * s, spec.t_window)
    rho_hat = np.linspace(*spec.rho_window, spec.points)
    rho_orig = rho_hat + 2.0 * np.log(s)
    phis, psis = [], []
    for i in idx:
        phi, psi = _resample(traj.profiles[i], rho_orig)
        phis.append(phi / (s * s))
        psis.append(psi / (s * s))
    return RescaledSamples(rho_hat=rho_hat, t_hat=traj.times[idx] / (s * s),
                           phi_hat=np.array(phis), psi_hat=np.array(psis))


def rescale_samples_further(samples: RescaledSamples, s2: float,
                            keep: slice) -> RescaledSamples:
    """Compose a conical blowdown at s2 on already-rescaled samples.

    Exact at the sampling level when the shifted points land on existing
    sample points: `keep` selects the target rho_hat indices and the shift
    2 log s2 must equal an integer number of sample spacings.
    """
    h = samples.rho_hat[1] - samples.rho_hat[0]
    shift = 2.0 * np.log(s2)
    offset = shift / h
    k = int(round(offset))
    if abs(offset - k) > 1e-9:
        raise LatticeMismatch("2 log s2 must be a multiple of the sample spacing")
    idx = np.arange(samples.rho_hat.size)[keep]
    if idx[-1] + k >= samples.rho_hat.size:
        raise WindowOutsideGrid("shifted window exceeds the sample range")
    t_keep = samples.t_hat / (s2 * s2)
    return RescaledSamples(rho_hat=samples.rho_hat[idx],
                           t_hat=t_keep,
                           phi_hat=samples.phi_hat[:, idx + k] / (s2 * s2),
                           psi_hat=samples.psi_hat[:, idx + k] / (s2 * s2))


@dataclass(frozen=True)
class ProductLimitReport:
    scale: float
    times: np.ndarray
    sup_error: np.ndarray
    l2_error: np.ndarray
    fitted_coefficient: np.ndarray

    def max_sup_error(self) -> float:
        return float(np.max(self.sup_error))

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            f.write("scale,time,sup_error,l2_error,fitted_coefficient\n")
            for t, s, l2, c in zip(self.times, self.sup_error, self.l2_error,
                                   self.fitted_coefficient):
                f.write(f"{self.scale:.17g},{t:.17g},{s:.17g},{l2:.17g},{c:.17g}\n")


def product_limit_error(samples: RescaledSamples, N: float,
                        divisor_law, scale: float = 0.0) -> ProductLimitReport:
    """Relative deviation from the product-limit pair, per time slice.

    The limit pair is ((1/2)((N+1)/N)^2 N * divisor_law(t_hat) on the base
    slot, the constant (1/2)((N+1)/N)^2 on the fiber slot).  Errors are
    relative sup and L2 over the window; fitted_coefficient is the mean
    base coefficient of the samples.
    """
    if samples.phi_hat.shape != samples.psi_hat.shape or \
            samples.phi_hat.shape != (samples.t_hat.size, samples.rho_hat.size):
        raise LatticeMismatch("samples do not share a common lattice")
    # Base slot (1/2)((N+1)/N)^2 N = cb, fiber slot (1/2)((N+1)/N)^2 = cf.
    cb, cf = bulging_coefficients(N)
    sup_err, l2_err, fitted = [], [], []
    for k, t in enumerate(samples.t_hat):
        base_target = cb * float(divisor_law(t))
        dev_phi = np.abs(samples.phi_hat[k] - base_target) / abs(base_target)
        dev_psi = np.abs(samples.psi_hat[k] - cf) / cf
        dev = np.maximum(dev_phi, dev_psi)
        sup_err.append(float(np.max(dev)))
        l2_err.append(float(np.sqrt(np.mean(dev_phi ** 2 + dev_psi ** 2))))
        fitted.append(float(np.mean(samples.phi_hat[k])))
    return ProductLimitReport(scale=scale, times=samples.t_hat,
                              sup_error=np.asarray(sup_err),
                              l2_error=np.asarray(l2_err),
                              fitted_coefficient=np.asarray(fitted))


def fit_cone_coefficient(samples: RescaledSamples, time_index: int,
                         window: tuple[float, float]) -> float:
    """Cone coefficient of a blown-down slice, log-least-squares on psi."""
    sel = (samples.rho_hat >= window[0]) & (samples.rho_hat <= window[1])
    rho = samples.rho_hat[sel]
    psi = samples.psi_hat[time_index][sel]
    return float(np.exp(np.mean(np.log(psi) - rho)))


def fit_first_order_slot(samples: RescaledSamples, time_index: int,
                         window: tuple[float, float]) -> dict:
    """Fit phi_hat ~ C e^rho + beta + c_phi w and psi_hat ~ C e^rho + c_psi w.

    Returns the fitted pieces plus the first-order potential coefficient
    b1 = (c_psi - c_phi)/2 (the w-slot of the potential expansion enters phi
    with weight -1 and psi with weight +1).
    """
    sel = (samples.rho_hat >= window[0]) & (samples.rho_hat <= window[1])
    rho = samples.rho_hat[sel]
    e = np.exp(rho)
    w = np.exp(-rho)
    one = np.ones_like(rho)
    phi = samples.phi_hat[time_index][sel]
    psi = samples.psi_hat[time_index][sel]
    # Columns span many orders of magnitude; normalize them so the small
    # w-slot is not lost to the conditioning of the cone column.
    design = np.column_stack([e, one, w])
    norms = np.linalg.norm(design, axis=0)
    design = design / norms
    coef_phi = np.linalg.lstsq(design, phi, rcond=None)[0] / norms
    coef_psi = np.linalg.lstsq(design, psi, rcond=None)[0] / norms
    b1 = 0.5 * (coef_psi[2] - coef_phi[2])
    return {"cone_phi": float(coef_phi[0]), "constant_phi": float(coef_phi[1]),
            "w_phi": float(coef_phi[2]), "cone_psi": float(coef_psi[0]),
            "w_psi": float(coef_psi[2]), "b1": float(b1)}
