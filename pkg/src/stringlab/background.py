"""Weights and plane-wave background profiles.

The background is a travelling plane wave Psi(t - x).  Everything downstream
uses it only through Psi' and its derivatives, the antiderivative Psi itself
(to build the total field on a grid) and the integral

    H2(u) = int_0^u Psi'(s)^2 ds,

which enters the adapted advanced coordinate.  Three families are provided,
each with closed-form derivatives of every tabulated order:

    zero      Psi' = 0
    power     Psi' = A (1 + u^2)^(-p/2)
    gaussian  Psi' = A exp(-u^2 / (2 sigma^2))
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from numpy.polynomial import hermite_e, polynomial
from scipy import integrate, special

# Highest derivative order i of Psi^(i) available in closed form.
MAX_ORDER = 8

KINDS = ("zero", "power", "gaussian")


class OrderNotImplementedError(ValueError):
    """Requested derivative order is outside the closed-form table."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class WeightParams:
    gamma: float = 0.5
    epsilon: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0,1), got {self.gamma}")
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class PlaneWaveProfile:
    """Psi' of one of the catalog families.

    ``exponent`` is the decay power p for kind="power" and the width sigma
    for kind="gaussian"; it is ignored for kind="zero".
    """

    kind: str = "gaussian"
    amplitude: float = 0.2
    exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}; expected one of {KINDS}")
        if self.kind != "zero" and not self.exponent > 0.0:
            raise ValueError("profile exponent/width must be positive")

    @property
    def sigma(self) -> float:
        return self.exponent

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.amplitude == 0.0


def zero_profile() -> PlaneWaveProfile:
    return PlaneWaveProfile("zero", 0.0, 1.0)


# ---------------------------------------------------------------------------
# weights


def japanese(x):
    return np.sqrt(1.0 + np.asarray(x, dtype=float) ** 2)


def lambda_weight(x, params: WeightParams):
    """Lambda(x) = (1 + x^2)^(1 + gamma)."""
    x = np.asarray(x, dtype=float)
    out = (1.0 + x * x) ** (1.0 + params.gamma)
    return out if out.ndim else float(out)


def lambda_weight_derivative(x, params: WeightParams):
    """Lambda'(x) = 2 (1 + gamma) x (1 + x^2)^gamma."""
    x = np.asarray(x, dtype=float)
    out = 2.0 * (1.0 + params.gamma) * x * (1.0 + x * x) ** params.gamma
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# closed-form derivative tables


@functools.lru_cache(maxsize=None)
def _power_table(half_p: float):
    # d^n/du^n (1+u^2)^(-s) = P_n(u) (1+u^2)^(-s-n),
    # P_{n+1} = P_n' (1+u^2) - 2 (s+n) u P_n.
    polys = [np.array([1.0])]
    one_plus = np.array([1.0, 0.0, 1.0])
    for n in range(MAX_ORDER):
        pn = polys[-1]
        nxt = polynomial.polysub(
            polynomial.polymul(polynomial.polyder(pn), one_plus),
            polynomial.polymul(np.array([0.0, 2.0 * (half_p + n)]), pn),
        )
        polys.append(np.asarray(nxt, dtype=float))
    return tuple(polys)


def _check_order(i: int):
    if int(i) != i or i < 1:
        raise OrderNotImplementedError(f"derivative order must be an integer >= 1, got {i}")
    if i > MAX_ORDER:
        raise OrderNotImplementedError(
            f"derivative order {i} exceeds the closed-form table (max {MAX_ORDER})"
        )


def psi_derivative(profile: PlaneWaveProfile, i: int, u):
    """Exact i-th derivative Psi^(i)(u) for i >= 1."""
    _check_order(i)
    u = np.asarray(u, dtype=float)
    n = i - 1  # derivative order applied to Psi'
    if profile.is_zero:
        out = np.zeros_like(u)
    elif profile.kind == "gaussian":
        s = profile.sigma
        z = u / s
        coeffs = np.zeros(n + 1)
        coeffs[n] = 1.0
        out = profile.amplitude * (-1.0 / s) ** n * hermite_e.hermeval(z, coeffs) * np.exp(-0.5 * z * z)
    else:
        half_p = 0.5 * profile.exponent
        pn = _power_table(half_p)[n]
        out = profile.amplitude * polynomial.polyval(u, pn) * (1.0 + u * u) ** (-half_p - n)
    return out if out.ndim else float(out)


def psi_derivatives(profile: PlaneWaveProfile, u, count: int):
    """List [Psi'(u), Psi''(u), ...] of length ``count``."""
    return [psi_derivative(profile, i, u) for i in range(1, count + 1)]


def psi_value(profile: PlaneWaveProfile, u):
    """Psi(u) normalised by Psi(0) = 0."""
    u = np.asarray(u, dtype=float)
    if profile.is_zero:
        out = np.zeros_like(u)
    elif profile.kind == "gaussian":
        s = profile.sigma
        out = profile.amplitude * s * math.sqrt(0.5 * math.pi) * special.erf(u / (s * math.sqrt(2.0)))
    else:
        out = profile.amplitude * u * special.hyp2f1(0.5, 0.5 * profile.exponent, 1.5, -u * u)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# H2(u) = int_0^u Psi'^2


def _h2_closed(profile: PlaneWaveProfile, u):
    if profile.is_zero:
        return np.zeros_like(u)
    a2 = profile.amplitude ** 2
    if profile.kind == "gaussian":
        s = profile.sigma
        return a2 * s * 0.5 * math.sqrt(math.pi) * special.erf(u / s)
    return a2 * u * special.hyp2f1(0.5, profile.exponent, 1.5, -u * u)


@functools.lru_cache(maxsize=65536)
def _h2_quad_scalar(profile: PlaneWaveProfile, u: float, tol: float) -> float:
    if u == 0.0 or profile.is_zero:
        return 0.0
    f = lambda s: psi_derivative(profile, 1, s) ** 2  # noqa: E731
    val, err, info = integrate.quad(f, 0.0, u, epsabs=tol, epsrel=0.0, limit=400, full_output=1)[:3]
    if err > tol:
        raise QuadratureError(f"H2 quadrature at u={u} reached only {err:.3e} (tol {tol:.1e})")
    return float(val)


def psi_integral_sq(profile: PlaneWaveProfile, u, method: str = "closed", tol: float = 1e-12):
    """H2(u) = int_0^u (Psi')^2.

    ``method="closed"`` uses the exact antiderivative of the family,
    ``method="quad"`` adaptive Gauss-Kronrod quadrature (memoised per point).
    """
    u = np.asarray(u, dtype=float)
    if method == "closed":
        out = _h2_closed(profile, u)
    elif method == "quad":
        flat = [_h2_quad_scalar(profile, float(x), tol) for x in u.ravel()]
        out = np.asarray(flat, dtype=float).reshape(u.shape)
    else:
        raise ValueError(f"unknown method {method!r}")
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# decay assumption


@dataclass
class DecayCheck:
    """Weighted suprema C_i of |Psi^(i+1)| and a per-order growth flag.

    ``growing[i]`` is set when the weighted envelope is still larger on the
    outer half of the grid than on the inner half, i.e. the supremum is being
    pushed outward by the grid extent rather than attained in the interior.
    """

    constants: Dict[int, float]
    growing: Dict[int, bool]

    def __getitem__(self, i):
        return self.constants[i]

    def __iter__(self):
        return iter(self.constants)

    def items(self):
        return self.constants.items()


def check_decay_assumption(
    profile: PlaneWaveProfile,
    params: WeightParams,
    i_max: int,
    u_grid: Sequence[float],
) -> DecayCheck:
    u = np.asarray(u_grid, dtype=float)
    if u.size == 0:
        raise ValueError("u_grid is empty")
    env = np.sqrt(lambda_weight(u, params)) * japanese(u) ** (0.5 * (1.0 + params.epsilon))
    reach = np.max(np.abs(u))
    outer = np.abs(u) >= 0.5 * reach
    constants, growing = {}, {}
    for i in range(i_max + 1):
        w = env * np.abs(psi_derivative(profile, i + 1, u))
        c = float(np.max(w))
        constants[i] = c
        inner_max = float(np.max(w[~outer])) if np.any(~outer) else 0.0
        outer_max = float(np.max(w[outer]))
        growing[i] = bool(outer_max > 1.01 * inner_max and outer_max > 0.0)
    return DecayCheck(constants, growing)
