"""Reduced Kahler-Ricci flow on radial profiles.

With Q = (n-1) log phi + log psi the flow reads

    d_t phi = -r_base  = mu Q' - lam
    d_t psi = -r_fiber = Q''

which preserves the closedness relation d_rho phi = mu psi because
d_rho(d_t phi) = mu Q'' = mu d_t psi.  The psi-equation is quasilinear
heat-type with diffusivity 1/psi (plus the (n-1)/phi coupling), which sets
the explicit stability bound.

Boundary conditions pin the two-point margin at each end:
FrozenModel holds the initial values, DriftingModel moves them linearly at
the initial Ricci rate, (phi, psi)(t) = (phi0 - t r_base(0), psi0 - t
r_fiber(0)).  This reproduces the known far-field laws of the three model
ends: cylinder base drifts by -lam t with a static fiber, the bulging
leading term is frozen (drift -lam t is subleading), and the conical
constant slot drifts by (n - lam) t.
"""

import enum
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (NoConvergence, Singularity, SingularityKind,
                     StabilityViolation)
from .fd import MARGIN, deriv1, deriv2
from .geometry import (BaseGeometry, RadialProfile, ricci_coefficients,
                       uniform_grid)
from .series import soliton_expand

# Stability of the 4th-order heat stencil under the classical 4-stage
# Runge-Kutta scheme: |dt * 16/(3 dx^2) * D| <= 2.785.
_RK4_STABLE = 2.785 * 3.0 / 16.0
_CFL_FRACTION = 0.4


class Scheme(enum.Enum):
    EXPLICIT_RK4 = "ExplicitRK4"
    IMPLICIT_TRAPEZOID = "ImplicitTrapezoid"


class BCKind(enum.Enum):
    FROZEN_MODEL = "FrozenModel"
    DRIFTING_MODEL = "DriftingModel"


@dataclass(frozen=True)
class FlowControls:
    scheme: Scheme = Scheme.EXPLICIT_RK4
    dt: float | None = None  # None -> automatic CFL step
    bc_kind: BCKind = BCKind.DRIFTING_MODEL
    n_outputs: int = 9
    output_times: np.ndarray | None = None
    psi_floor_factor: float = 1e-6
    phi_floor_factor: float = 1e-6
    gradient_cap: float = 1e8
    inner_tol: float = 1e-10
    inner_cap: int = 300


@dataclass(frozen=True)
class FlowTrajectory:
    base: BaseGeometry
    times: np.ndarray
    profiles: list
    scheme: Scheme
    dt_history: np.ndarray
    bc_kind: BCKind

    def profile_at(self, t: float) -> RadialProfile:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"no stored profile at t={t}; stored times "
                             f"{self.times.tolist()}")
        return self.profiles[i]

    def to_csv_dir(self, out_dir):
        """One CSV per slice plus an index `time,filename,min_psi,min_phi`."""
        import os
        os.makedirs(out_dir, exist_ok=True)
        rows = []
        for k, (t, prof) in enumerate(zip(self.times, self.profiles)):
            name = f"slice_{k:04d}.csv"
            prof.to_csv(os.path.join(out_dir, name))
            rows.append((t, name, float(np.min(prof.psi)), float(np.min(prof.phi))))
        with open(os.path.join(out_dir, "index.csv"), "w", newline="") as f:
            f.write("time,filename,min_psi,min_phi\n")
            for t, name, mpsi, mphi in rows:
                f.write(f"{t:.17g},{name},{mpsi:.17g},{mphi:.17g}\n")


def _output_times(horizon: float, controls: FlowControls) -> np.ndarray:
    if controls.output_times is not None:
        ts = np.asarray(controls.output_times, dtype=float)
        if ts[0] != 0.0 or np.any(np.diff(ts) <= 0) or ts[-1] > horizon + 1e-12:
            raise ValueError("output_times must increase from 0 to <= horizon")
        return ts
    return np.linspace(0.0, horizon, controls.n_outputs)


def _max_diffusivity(phi: np.ndarray, psi: np.ndarray, n: int) -> float:
    return float(np.max((n - 1) / phi + 1.0 / psi))


class _ReducedFlow:
    """Method-of-lines right-hand side with pinned boundary margins."""

    def __init__(self, initial: RadialProfile, base: BaseGeometry,
                 controls: FlowControls):
        self.base = base
        self.dx = initial.dx
        self.m = initial.npoints
        self.controls = controls
        rc = ricci_coefficients(initial, base)
        if controls.bc_kind is BCKind.DRIFTING_MODEL:
            drift_phi = -rc.r_base
            drift_psi = -rc.r_fiber
        else:
            drift_phi = np.zeros(self.m)
            drift_psi = np.zeros(self.m)
        self.margin = np.concatenate([np.arange(MARGIN),
                                      np.arange(self.m - MARGIN, self.m)])
        self.margin_dphi = drift_phi[self.margin]
        self.margin_dpsi = drift_psi[self.margin]
        self.psi_floor = controls.psi_floor_factor * float(np.min(initial.psi))
        self.phi_floor = controls.phi_floor_factor * float(np.min(initial.phi))

    def rhs(self, phi: np.ndarray, psi: np.ndarray):
        base = self.base
        q = (base.n - 1) * np.log(phi) + np.log(psi)
        g = deriv1(q, self.dx)
        dphi = base.mu * g - base.lam
        dpsi = deriv2(q, self.dx)
        dphi[self.margin] = self.margin_dphi
        dpsi[self.margin] = self.margin_dpsi
        return dphi, dpsi, g

    def check_state(self, t: float, rho: np.ndarray, phi, psi, g=None):
        if np.min(psi) < self.psi_floor or not np.all(np.isfinite(psi)):
            i = int(np.argmin(psi))
            raise Singularity(t, float(rho[i]), SingularityKind.PSI_COLLAPSE)
        if np.min(phi) < self.phi_floor or not np.all(np.isfinite(phi)):
            i = int(np.argmin(phi))
            raise Singularity(t, float(rho[i]), SingularityKind.PHI_COLLAPSE)
        if g is not None:
            gmax = float(np.max(np.abs(g)))
            if not np.isfinite(gmax) or gmax > self.controls.gradient_cap:
                i = int(np.argmax(np.abs(g)))
                raise Singularity(t, float(rho[i]), SingularityKind.GRADIENT_BLOWUP)

    def stable_dt(self, phi, psi) -> float:
        return _RK4_STABLE * self.dx ** 2 / _max_diffusivity(phi, psi, self.base.n)


def _rk4_step(flow: _ReducedFlow, phi, psi, dt):
    k1p, k1q, _ = flow.rhs(phi, psi)
    k2p, k2q, _ = flow.rhs(phi + 0.5 * dt * k1p, psi + 0.5 * dt * k1q)
    k3p, k3q, _ = flow.rhs(phi + 0.5 * dt * k2p, psi + 0.5 * dt * k2q)
    k4p, k4q, _ = flow.rhs(phi + dt * k3p, psi + dt * k3q)
    phi_new = phi + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
    psi_new = psi + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    return phi_new, psi_new


def _trapezoid_step(flow: _ReducedFlow, phi, psi, dt):
    """Implicit trapezoid with a damped fixed-point inner solve."""
    f0p, f0q, _ = flow.rhs(phi, psi)
    lip = 16.0 / 3.0 * _max_diffusivity(phi, psi, flow.base.n) / flow.dx ** 2
    alpha = 1.0 / (1.0 + 0.5 * dt * lip)
    up, uq = phi + dt * f0p, psi + dt * f0q  # explicit Euler predictor
    scale = max(float(np.max(np.abs(phi))), float(np.max(np.abs(psi))), 1.0)
    for _ in range(flow.controls.inner_cap):
        fp, fq, _ = flow.rhs(up, uq)
        gp = phi + 0.5 * dt * (f0p + fp)
        gq = psi + 0.5 * dt * (f0q + fq)
        res = max(float(np.max(np.abs(gp - up))), float(np.max(np.abs(gq - uq))))
        up = up + alpha * (gp - up)
        uq = uq + alpha * (gq - uq)
        if res <= flow.controls.inner_tol * scale:
            return up, uq
    raise NoConvergence(f"trapezoid inner solve stalled (dt={dt:.3g})")


def evolve(initial: RadialProfile, base: BaseGeometry, horizon: float,
           controls: FlowControls = FlowControls()) -> FlowTrajectory:
    """Evolve a profile by the reduced flow up to the horizon."""
    flow = _ReducedFlow(initial, base, controls)
    outputs = _output_times(horizon, controls)
    rho = initial.rho
    phi = initial.phi.copy()
    psi = initial.psi.copy()

    profiles = [initial]
    dt_hist = []
    t = 0.0
    explicit = controls.scheme is Scheme.EXPLICIT_RK4
    step_count = 0
    for t_target in outputs[1:]:
        while t_target - t > 1e-12 * max(1.0, t_target):
            if explicit:
                if controls.dt is None:
                    dt = _CFL_FRACTION * flow.dx ** 2 / _max_diffusivity(
                        phi, psi, base.n)
                else:
                    dt = controls.dt
                    dt_lim = flow.stable_dt(phi, psi)
                    if dt > dt_lim:
                        raise StabilityViolation(
                            f"dt={dt:.3g} exceeds the stability bound {dt_lim:.3g}")
            else:
                dt = controls.dt if controls.dt is not None else \
                    4.0 * flow.dx ** 2 / _max_diffusivity(phi, psi, base.n)
            dt = min(dt, t_target - t)
            if explicit:
                phi, psi = _rk4_step(flow, phi, psi, dt)
            else:
                phi, psi = _trapezoid_step(flow, phi, psi, dt)
            t += dt
            dt_hist.append(dt)
            step_count += 1
            # Gradient blow-up is probed periodically; the coefficient
            # floors are cheap and checked every step.
            if step_count % 16 == 0:
                _, _, g = flow.rhs(phi, psi)
                flow.check_state(t, rho, phi, psi, g)
            else:
                flow.check_state(t, rho, phi, psi)
        t = t_target
        flow.check_state(t, rho, phi, psi, flow.rhs(phi, psi)[2])
        profiles.append(RadialProfile(rho=rho, phi=phi.copy(), psi=psi.copy()))
    return FlowTrajectory(base=base, times=outputs, profiles=profiles,
                          scheme=controls.scheme,
                          dt_history=np.asarray(dt_hist), bc_kind=controls.bc_kind)


# -- potential-form flow ----------------------------------------------------


@dataclass(frozen=True)
class PotentialFlowState:
    """Reference pair for omega_t = omega_0 - t Ric(omega_0) plus potential u."""

    time: float
    u: np.ndarray
    phi_ref: np.ndarray
    psi_ref: np.ndarray


@dataclass(frozen=True)
class PotentialTrajectory:
    base: BaseGeometry
    rho: np.ndarray
    times: np.ndarray
    states: list
    dt_history: np.ndarray
    bc_kind: BCKind

    def reconstruct(self, state: PotentialFlowState) -> RadialProfile:
        dx = float(self.rho[1] - self.rho[0])
        phi = state.phi_ref + self.base.mu * deriv1(state.u, dx)
        psi = state.psi_ref + deriv2(state.u, dx)
        return RadialProfile(rho=self.rho, phi=phi, psi=psi)


def evolve_potential(initial: RadialProfile, base: BaseGeometry, horizon: float,
                     controls: FlowControls = FlowControls()) -> PotentialTrajectory:
    """Potential form: d_t u = (n-1) log(phi/phi0) + log(psi/psi0).

    The reconstructed pair is phi = phi_ref(t) + mu u', psi = psi_ref(t) + u''
    with the reference computed once from the initial Ricci coefficients.
    Margin values of u follow the same model law as `evolve`, integrated
    alongside the interior.
    """
    flow = _ReducedFlow(initial, base, controls)
    outputs = _output_times(horizon, controls)
    rho = initial.rho
    dx = initial.dx
    rc0 = ricci_coefficients(initial, base)
    phi0 = initial.phi
    psi0 = initial.psi
    margin = flow.margin

    def reconstruct(t, u):
        phi = (phi0 - t * rc0.r_base) + base.mu * deriv1(u, dx)
        psi = (psi0 - t * rc0.r_fiber) + deriv2(u, dx)
        return phi, psi

    def du_dt(t, u):
        phi, psi = reconstruct(t, u)
        flow.check_state(t, rho, phi, psi)
        du = (base.n - 1) * np.log(phi / phi0) + np.log(psi / psi0)
        # Margin law: the drifting model metric there is the linearized pair.
        phi_m = phi0[margin] + t * flow.margin_dphi
        psi_m = psi0[margin] + t * flow.margin_dpsi
        du[margin] = (base.n - 1) * np.log(phi_m / phi0[margin]) \
            + np.log(psi_m / psi0[margin])
        return du

    u = np.zeros_like(phi0)
    t = 0.0
    states = [PotentialFlowState(0.0, u.copy(), phi0.copy(), psi0.copy())]
    dt_hist = []
    for t_target in outputs[1:]:
        while t_target - t > 1e-12 * max(1.0, t_target):
            phi, psi = reconstruct(t, u)
            dt = controls.dt if controls.dt is not None else \
                _CFL_FRACTION * dx ** 2 / _max_diffusivity(phi, psi, base.n)
            dt = min(dt, t_target - t)
            k1 = du_dt(t, u)
            k2 = du_dt(t + 0.5 * dt, u + 0.5 * dt * k1)
            k3 = du_dt(t + 0.5 * dt, u + 0.5 * dt * k2)
            k4 = du_dt(t + dt, u + dt * k3)
            u = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
            dt_hist.append(dt)
        t = t_target
        states.append(PotentialFlowState(
            t, u.copy(), phi0 - t * rc0.r_base, psi0 - t * rc0.r_fiber))
    return PotentialTrajectory(base=base, rho=rho, times=outputs, states=states,
                               dt_history=np.asarray(dt_hist),
                               bc_kind=controls.bc_kind)


# -- expanding-soliton profile ----------------------------------------------


@dataclass(frozen=True)
class SolitonSolution:
    profile: RadialProfile
    b_table: np.ndarray       # (x, B) samples in shrinking-bundle normalization
    p: float                  # cone exponent n/lam implied by the base
    max_residual: float       # sup of the reduced soliton equations on the grid
    series_order: int


def _soliton_series_pq(base: BaseGeometry, order: int):
    """Normalized deviation series of the soliton: phi = e^s(1+p), psi = e^s(1+q)."""
    exp = soliton_expand(base.n, base.lam, order)
    a = [float(exp.coefficient(j)) for j in range(order + 1)]
    p_coef = np.zeros(order + 2)
    q_coef = np.zeros(order + 2)
    p_coef[1] = base.n - base.lam
    for j in range(1, order + 1):
        p_coef[j + 1] = -j * a[j]
        q_coef[j + 1] = j * j * a[j]
    return p_coef, q_coef


def _eval_poly_in_w(coef: np.ndarray, s):
    w = np.exp(-np.asarray(s, dtype=float))
    out = np.zeros_like(w)
    for c in coef[::-1]:
        out = out * w + c
    return out


def soliton_ode_residual(profile: RadialProfile, base: BaseGeometry) -> float:
    """Max finite-difference residual of the reduced soliton equations.

    Measured in cone-normalized variables phi = e^rho (1+p), psi = e^rho (1+q):
        p' = q - p
        q' = (1+q) [ e^rho (p - q) + lam - 1 - (n-1)(1+q)/(1+p) ]
    over the trusted interior of the grid.
    """
    e = np.exp(profile.rho)
    p = profile.phi / e - 1.0
    q = profile.psi / e - 1.0
    dp = deriv1(p, profile.dx)
    dq = deriv1(q, profile.dx)
    res1 = dp - (q - p)
    res2 = dq - (1.0 + q) * (e * (p - q) + base.lam - 1.0
                             - (base.n - 1) * (1.0 + q) / (1.0 + p))
    sl = slice(MARGIN, -MARGIN)
    return float(max(np.max(np.abs(res1[sl])), np.max(np.abs(res2[sl]))))


def soliton_profile_solve(base: BaseGeometry, cone_coefficient: float,
                          window: tuple[float, float], points: int = 2048,
                          series_order: int = 10,
                          b_samples: int = 4096) -> SolitonSolution:
    """Time-1 expanding-soliton profile with cone asymptotics at rho -> +infty.

    In shifted coordinate s = rho + log(cone_coefficient) the normalized
    deviation system is integrated forward from exact-series data at the
    inner end of the window; the forward direction is contractive (the
    second characteristic mode decays like exp(-e^s)), while backward
    integration would amplify it catastrophically, so the cone condition at
    the outer end is realized through the series data plus forward damping.
    The returned table samples B (the self-similar profile function in
    shrinking-bundle normalization, B(0) = p = n/lam) against x = 4 e^{-s}.
    """
    if base.mu != 1:
        raise ValueError("soliton profiles require mu = 1")
    if cone_coefficient <= 0:
        raise ValueError("cone_coefficient must be positive")
    if window[1] < 12:
        raise ValueError("window must extend to rho_max >= 12 for the cone "
                         "boundary condition to be accurate")
    rho = uniform_grid(window[0], window[1], points)
    shift = float(np.log(cone_coefficient))
    p_cone = base.n / base.lam

    if base.lam == base.n:
        # Ricci-flat cone: the soliton is the cone itself, B is constant.
        e = cone_coefficient * np.exp(rho)
        profile = RadialProfile(rho=rho, phi=e, psi=e.copy())
        xs = np.linspace(0.0, 4.0 * np.exp(-(window[0] + shift)), b_samples)
        table = np.column_stack([xs, np.full_like(xs, p_cone)])
        return SolitonSolution(profile=profile, b_table=table, p=p_cone,
                               max_residual=soliton_ode_residual(profile, base),
                               series_order=series_order)

    p_coef, q_coef = _soliton_series_pq(base, series_order)
    # Extend the s-range so the emitted B table covers small arguments.
    s_lo = window[0] + shift
    s_hi = window[1] + shift + 4.0

    # Integration variables (p, R) with R = e^s (p - q) = phi - psi: the
    # difference that multiplies e^s in the equations is carried as an O(1)
    # quantity with relative accuracy control instead of being recovered
    # from a catastrophic cancellation.  The fast characteristic mode has
    # rate ~e^s, so an implicit integrator is required.
    n1 = base.n - 1

    def rhs(s, y):
        p, big_r = y
        es = np.exp(s)
        q = p - big_r / es
        g = big_r + base.lam - 1.0 - n1 * (1.0 + q) / (1.0 + p)
        return [-big_r / es, -es * (1.0 + q) * g]

    def jac(s, y):
        p, big_r = y
        es = np.exp(s)
        q = p - big_r / es
        g = big_r + base.lam - 1.0 - n1 * (1.0 + q) / (1.0 + p)
        dg_dp = -n1 * (p - q) / (1.0 + p) ** 2
        drp_dp = -es * (g + (1.0 + q) * dg_dp)
        drp_dr = g - es * (1.0 + q) * (1.0 + n1 / (es * (1.0 + p)))
        return [[0.0, -1.0 / es], [drp_dp, drp_dr]]

    p0 = float(_eval_poly_in_w(p_coef, s_lo))
    q0 = float(_eval_poly_in_w(q_coef, s_lo))
    y0 = [p0, np.exp(s_lo) * (p0 - q0)]
    sol = solve_ivp(rhs, (s_lo, s_hi), y0, method="Radau", jac=jac,
                    dense_output=True, rtol=1e-12, atol=1e-15, max_step=0.25)
    if not sol.success:
        raise NoConvergence(f"soliton integration failed: {sol.message}")

    s_grid = rho + shift
    pr = sol.sol(s_grid)
    e = np.exp(s_grid)
    phi = e * (1.0 + pr[0])
    profile = RadialProfile(rho=rho, phi=phi, psi=phi - pr[1])

    # The emitted table is uniform in the argument x = 4 e^{-s}: B is
    # analytic in x, so uniform knots keep the spline's divided differences
    # well conditioned (logarithmic knots near x = 0 would lose most of the
    # derivative's precision to roundoff).  Row 0 carries the exact cone
    # limit B(0).
    xs = np.linspace(0.0, 4.0 * np.exp(-s_lo), b_samples + 1)
    bs = np.empty_like(xs)
    bs[0] = p_cone
    bs[1:] = p_cone * (1.0 + sol.sol(np.log(4.0 / xs[1:]))[0])
    table = np.column_stack([xs, bs])
    return SolitonSolution(profile=profile, b_table=table, p=p_cone,
                           max_residual=soliton_ode_residual(profile, base),
                           series_order=series_order)


def self_similar_family(solution: SolitonSolution, base: BaseGeometry,
                        rho: np.ndarray, t: float) -> RadialProfile:
    """Time-t slice of the flow generated by an expanding soliton.

    The family is phi_t(rho) = t * phi_1(rho - log t) (same for psi), which
    is exactly the shrinking-bundle reconstruction from the B table.
    """
    from .models import make_fik
    return make_fik(solution.p, t, solution.b_table, base, rho)


def flow_equation_residual(profiles: dict, base: BaseGeometry,
                           t_center: float, dt: float) -> float:
    """Max interior residual |d_t(phi,psi) + Ric coefficients| of a family.

    `profiles` maps times {t-2dt, t-dt, t, t+dt, t+2dt} to RadialProfiles on
    a common grid; the time derivative uses the 4th-order central stencil.
    """
    ts = [t_center + k * dt for k in (-2, -1, 0, 1, 2)]
    ps = [profiles[t] for t in ts]
    wts = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * dt)
    dphi = sum(w * p.phi for w, p in zip(wts, ps))
    dpsi = sum(w * p.psi for w, p in zip(wts, ps))
    rc = ricci_coefficients(ps[2], base)
    sl = slice(MARGIN, -MARGIN)
    return float(max(np.max(np.abs((dphi + rc.r_base)[sl])),
                     np.max(np.abs((dpsi + rc.r_fiber)[sl]))))
