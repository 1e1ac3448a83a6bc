"""Exact truncated-series algebra in w = e^(-rho).

The invariant reduction keeps only radial eigenfunctions of the rescaling
field: the slot j of a TruncatedExpansion holds the coefficient of w^j
(weight 2j; odd weights are identically zero and have no slot).
Coefficients are exact rationals, or exact-rational polynomials in t for
time-dependent expansions.  All arithmetic truncates deterministically at
the stated order.
"""

from dataclasses import dataclass
from fractions import Fraction

from .errors import OddWeightConstant

Rat = Fraction


class TPoly:
    """Polynomial in t with Fraction coefficients; index = power of t."""

    __slots__ = ("c",)

    def __init__(self, coeffs=()):
        c = [Fraction(x) for x in coeffs]
        while c and c[-1] == 0:
            c.pop()
        self.c = tuple(c)

    @classmethod
    def const(cls, x) -> "TPoly":
        return cls((Fraction(x),))

    def __bool__(self):
        return bool(self.c)

    def __eq__(self, other):
        other = _as_tpoly(other)
        return self.c == other.c

    def __hash__(self):
        return hash(self.c)

    @property
    def degree(self) -> int:
        return len(self.c) - 1 if self.c else -1

    def coeff(self, k: int) -> Fraction:
        return self.c[k] if 0 <= k < len(self.c) else Fraction(0)

    def __add__(self, other):
        other = _as_tpoly(other)
        n = max(len(self.c), len(other.c))
        return TPoly([self.coeff(k) + other.coeff(k) for k in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return TPoly([-x for x in self.c])

    def __sub__(self, other):
        return self + (-_as_tpoly(other))

    def __rsub__(self, other):
        return _as_tpoly(other) + (-self)

    def __mul__(self, other):
        other = _as_tpoly(other)
        if not self.c or not other.c:
            return TPoly()
        out = [Fraction(0)] * (len(self.c) + len(other.c) - 1)
        for i, a in enumerate(self.c):
            for j, b in enumerate(other.c):
                out[i + j] += a * b
        return TPoly(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TPoly):
            raise TypeError("division by a polynomial is not supported")
        return TPoly([x / Fraction(other) for x in self.c])

    def integrate(self) -> "TPoly":
        """Antiderivative in t with zero constant term."""
        return TPoly([Fraction(0)] + [x / (k + 1) for k, x in enumerate(self.c)])

    def differentiate(self) -> "TPoly":
        return TPoly([k * x for k, x in enumerate(self.c)][1:])

    def __call__(self, t):
        val = Fraction(0) if isinstance(t, Fraction) else 0.0
        for x in reversed(self.c):
            val = val * t + (x if isinstance(t, Fraction) else float(x))
        return val

    def keep_degree(self, d: int) -> "TPoly":
        """Retain only the t^d monomial."""
        return TPoly([Fraction(0)] * d + [self.coeff(d)])

    def scale_t(self, factor: Fraction) -> "TPoly":
        """t -> factor * t."""
        return TPoly([x * factor ** k for k, x in enumerate(self.c)])

    def __repr__(self):
        if not self.c:
            return "0"
        parts = []
        for k, x in enumerate(self.c):
            if x == 0:
                continue
            term = str(x) if k == 0 else (f"{x} t" if k == 1 else f"{x} t^{k}")
            parts.append(term)
        return " + ".join(parts)


def _as_tpoly(x) -> TPoly:
    if isinstance(x, TPoly):
        return x
    return TPoly((Fraction(x),))


@dataclass(frozen=True)
class TruncatedExpansion:
    """Finite series sum_j coeffs[j] * w^j, exact through order = len-1."""

    coeffs: tuple
    n: Fraction
    lam: Fraction

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(_as_tpoly(c) for c in self.coeffs))
        object.__setattr__(self, "n", Fraction(self.n))
        object.__setattr__(self, "lam", Fraction(self.lam))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def coefficient(self, j: int):
        """Slot j as a Fraction when constant in t, else as a TPoly."""
        c = self.coeffs[j] if j <= self.order else TPoly()
        return c.coeff(0) if c.degree <= 0 else c

    def is_zero(self) -> bool:
        return all(not c for c in self.coeffs)

    def map_coeffs(self, f) -> "TruncatedExpansion":
        return TruncatedExpansion(tuple(f(j, c) for j, c in enumerate(self.coeffs)),
                                  self.n, self.lam)

    def at_time(self, t: Fraction) -> "TruncatedExpansion":
        t = Fraction(t)
        return self.map_coeffs(lambda j, c: TPoly((c(t),)))

    # -- serialization ----------------------------------------------------

    def to_csv(self, path):
        """Rows `j,coeff_t_power,numerator,denominator` (zero rows skipped)."""
        with open(path, "w", newline="") as f:
            f.write("j,coeff_t_power,numerator,denominator\n")
            for j, c in enumerate(self.coeffs):
                for k in range(c.degree + 1):
                    x = c.coeff(k)
                    if x != 0:
                        f.write(f"{j},{k},{x.numerator},{x.denominator}\n")

    def pretty(self, symbol: str = "u") -> str:
        terms = []
        for j, c in enumerate(self.coeffs):
            if not c:
                continue
            for k in range(c.degree + 1):
                x = c.coeff(k)
                if x == 0:
                    continue
                factors = []
                if x != 1 or (j == 0 and k == 0):
                    factors.append(str(x))
                if k == 1:
                    factors.append("t")
                elif k > 1:
                    factors.append(f"t^{k}")
                if j == 1:
                    factors.append("w")
                elif j > 1:
                    factors.append(f"w^{j}")
                terms.append(" ".join(factors) if factors else "1")
        body = " + ".join(terms) if terms else "0"
        return f"{symbol} = {body} + O(w^{self.order + 1})"


# -- series arithmetic on plain coefficient lists --------------------------

def _series_mul(a: list, b: list, order: int) -> list:
    out = [TPoly() for _ in range(order + 1)]
    for i, ai in enumerate(a):
        if not ai or i > order:
            continue
        for j, bj in enumerate(b):
            if i + j > order:
                break
            if bj:
                out[i + j] = out[i + j] + ai * bj
    return out


def _series_log1p(s: list, order: int) -> list:
    """log(1 + S) for S with zero constant slot, through w^order."""
    assert not s[0]
    out = [TPoly() for _ in range(order + 1)]
    power = s[:]
    sign = 1
    for m in range(1, order + 1):
        for j in range(order + 1):
            if power[j]:
                out[j] = out[j] + Fraction(sign, m) * power[j]
        if m < order:
            power = _series_mul(power, s, order)
            sign = -sign
    return out


def _metric_deviation_series(base_dev: list, fiber_dev: list, n: Fraction,
                             order: int) -> list:
    """(n-1) log(1 + base_dev) + log(1 + fiber_dev), through w^order."""
    lb = _series_log1p(base_dev, order)
    lf = _series_log1p(fiber_dev, order)
    return [(n - 1) * lb[j] + lf[j] for j in range(order + 1)]


def _deviations_from_u(u_coeffs: list, ric_t, order: int):
    """Coefficient deviations of (omega0 - tau Ric0 + i d dbar u) / e^rho.

    u_coeffs[j] multiplies w^j; ric_t is the polynomial factor on the
    Ricci term (Fraction(1) for the soliton frame, t for the flow frame).
    The operator i d dbar sends a_j w^j to the pair (-j a_j, j^2 a_j) w^j;
    dividing by the cone coefficient e^rho shifts the slot by one.
    """
    base = [TPoly() for _ in range(order + 1)]
    fiber = [TPoly() for _ in range(order + 1)]
    # -tau * Ric(omega0): Ric(omega0) has the constant pair (lam - n, 0),
    # so the base deviation gains (n - lam) * tau * w.
    if order >= 1:
        base[1] = base[1] + ric_t
    for j in range(1, order):  # u-slot j lands in deviation slot j+1
        if u_coeffs[j]:
            base[j + 1] = base[j + 1] + Fraction(-j) * u_coeffs[j]
            fiber[j + 1] = fiber[j + 1] + Fraction(j * j) * u_coeffs[j]
    return base, fiber


def soliton_expand(n, lam, order: int) -> TruncatedExpansion:
    """Expanding-soliton series u = sum_j a_j w^j, solved order by order.

    The soliton condition reduces to
        (n-1) log S_base + log S_fiber = sum_j (j+1) a_j w^j
    with S_base, S_fiber the normalized coefficient deviations of
    omega0 - Ric(omega0) + i d dbar u; slot m of the left side involves
    only a_1 .. a_(m-1), so each order determines a_m uniquely.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    n = Fraction(n)
    lam = Fraction(lam)
    a = [TPoly() for _ in range(order + 1)]
    ric_factor = TPoly.const(n - lam)
    for m in range(1, order + 1):
        base, fiber = _deviations_from_u(a, ric_factor, m)
        lhs = _metric_deviation_series(base, fiber, n, m)
        a[m] = lhs[m] / Fraction(m + 1)
    return TruncatedExpansion(tuple(a), n, lam)


@dataclass(frozen=True)
class GradientPotential:
    """Soliton potential F = cone_coefficient * e^rho + series in w."""

    cone_coefficient: Fraction
    series: TruncatedExpansion


def gradient_potential(expansion: TruncatedExpansion) -> GradientPotential:
    """Potential of the radial soliton field: F = -e^rho + sum_j j a_j w^j."""
    series = expansion.map_coeffs(lambda j, c: Fraction(j) * c)
    return GradientPotential(cone_coefficient=Fraction(-1), series=series)


def gradient_identity_residual(expansion: TruncatedExpansion) -> TruncatedExpansion:
    """Series residual of the contraction identity dF/drho + psi = 0.

    The fiber coefficient of the soliton metric is psi = e^rho +
    sum_j j^2 a_j w^j while dF/drho = -e^rho - sum_j j^2 a_j w^j; the cone
    parts cancel exactly, so only the series slots are returned (all zero
    when the identity holds).
    """
    f = gradient_potential(expansion).series
    # d/drho of sum_j f_j w^j = sum_j (-j) f_j w^j ; psi-series slot is j^2 a_j.
    return expansion.map_coeffs(
        lambda j, c: Fraction(-j) * f.coeffs[j] + Fraction(j * j) * c)


def flow_expand(n, lam, order: int, constants=None) -> TruncatedExpansion:
    """Potential-flow series with exact polynomial-in-t coefficients.

    Solves d/dt u_j = [w^j]((n-1) log S_base + log S_fiber) order by order,
    with S_* the normalized deviations of omega0 - t Ric(omega0) +
    i d dbar u.  `constants` are the free integration constants indexed by
    weight k = 0..2*order; odd-weight entries must vanish (the invariant
    reduction has no odd-weight slots): weight 2j seeds slot j at t = 0.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    n = Fraction(n)
    lam = Fraction(lam)
    if constants is None:
        constants = {}
    if not isinstance(constants, dict):
        constants = {k: v for k, v in enumerate(constants)}
    c_slot = [Fraction(0)] * (order + 1)
    for k, v in constants.items():
        v = Fraction(v)
        if v == 0:
            continue
        if k % 2 == 1:
            raise OddWeightConstant(f"constant of odd weight {k} must be zero")
        if k // 2 <= order:
            c_slot[k // 2] = v
    b = [TPoly() for _ in range(order + 1)]
    b[0] = TPoly.const(c_slot[0])
    ric_factor = TPoly((Fraction(0), n - lam))  # (n - lam) * t
    for m in range(1, order + 1):
        base, fiber = _deviations_from_u(b, ric_factor, m)
        rhs = _metric_deviation_series(base, fiber, n, m)[m]
        b[m] = rhs.integrate() + TPoly.const(c_slot[m])
    return TruncatedExpansion(tuple(b), n, lam)


def blowdown(expansion: TruncatedExpansion) -> TruncatedExpansion:
    """Keep only the top t-power t^(j+1) in slot j; erases all free constants."""
    return expansion.map_coeffs(lambda j, c: c.keep_degree(j + 1))


def soliton_equation_residual(expansion: TruncatedExpansion,
                              extra_order: int = 2) -> TruncatedExpansion:
    """Exact series residual of the soliton condition for a truncated u.

    Recomputes (n-1) log S_base + log S_fiber - sum (j+1) a_j w^j through
    order K + extra_order; for the order-K solution the slots 0..K vanish
    and slot K+1 is the leading residual coefficient.
    """
    k = expansion.order
    target = k + extra_order
    a = list(expansion.coeffs) + [TPoly()] * extra_order
    base, fiber = _deviations_from_u(a, TPoly.const(expansion.n - expansion.lam),
                                     target)
    lhs = _metric_deviation_series(base, fiber, expansion.n, target)
    res = [lhs[j] - Fraction(j + 1) * a[j] for j in range(target + 1)]
    return TruncatedExpansion(tuple(res), expansion.n, expansion.lam)
