"""Initial data for the perturbed plane wave from seed profiles (f, fbar, delta).

With phi|_{t=0} = F and d_t phi|_{t=0} = G, the data obey

    F' + G = delta f,      G - F' = 2 fbar - delta Psi'(-x)^2 f,

which makes d_ub phi = delta f and d_u phi = fbar on the initial slice:
the advanced derivative is small, the retarded one need not be.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from numpy.polynomial import hermite_e
from scipy import integrate

from .background import PlaneWaveProfile, WeightParams, lambda_weight, psi_derivative, psi_value
from .solver import Grid, GridState

SEED_KINDS = ("zero", "gaussian", "kink")
SUPPORT_TOL = 1e-12
SEED_MAX_ORDER = 6


class SupportOverflowError(ValueError):
    """A seed is not negligible at the grid edges."""


@dataclass(frozen=True)
class Seed:
    """A data profile: gaussian A exp(-(x - c)^2 / (2 w^2)), the hat
    A max(0, 1 - |x - c| / w) (non-smooth control), or zero."""

    kind: str = "gaussian"
    amplitude: float = 0.3
    width: float = 2.0
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in SEED_KINDS:
            raise ValueError(f"unknown seed kind {self.kind!r}; expected one of {SEED_KINDS}")
        if self.kind != "zero" and not self.width > 0:
            raise ValueError("seed width must be positive")

    def derivative(self, k: int, x):
        x = np.asarray(x, dtype=float)
        if k < 0 or k > SEED_MAX_ORDER:
            raise ValueError(f"seed derivative order {k} unavailable (max {SEED_MAX_ORDER})")
        if self.kind == "zero" or self.amplitude == 0.0:
            return np.zeros_like(x)
        z = (x - self.center) / self.width
        if self.kind == "gaussian":
            c = np.zeros(k + 1)
            c[k] = 1.0
            return self.amplitude * (-1.0 / self.width) ** k * hermite_e.hermeval(z, c) * np.exp(-0.5 * z * z)
        if k == 0:
            return self.amplitude * np.maximum(0.0, 1.0 - np.abs(z))
        if k == 1:
            return np.where(np.abs(z) < 1.0, -np.sign(z) * self.amplitude / self.width, 0.0)
        return np.zeros_like(x)

    def __call__(self, x):
        return self.derivative(0, x)

    def scaled(self, factor: float) -> "Seed":
        return Seed(self.kind, self.amplitude * factor, self.width, self.center)


@dataclass(frozen=True)
class SeedProfiles:
    f: Seed
    fbar: Seed
    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


@dataclass
class InitialData:
    x: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    G: np.ndarray
    seeds: SeedProfiles
    profile: PlaneWaveProfile


def _Fp_G(seeds: SeedProfiles, profile: PlaneWaveProfile, x):
    d = seeds.delta
    f = seeds.f(x)
    fb = seeds.fbar(x)
    P2 = np.asarray(psi_derivative(profile, 1, -np.asarray(x, dtype=float))) ** 2
    Fp = 0.5 * (d * f - 2.0 * fb + d * P2 * f)
    G = 0.5 * (d * f + 2.0 * fb - d * P2 * f)
    return Fp, G


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _cumulative(fun, x):
    """int_{x[0]}^{x[i]} fun by 8-point Gauss-Legendre on every cell."""
    a, b = x[:-1], x[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    cell = half * (fun(nodes.ravel()).reshape(nodes.shape) @ _GL_W)
    return np.concatenate([[0.0], np.cumsum(cell)])


def build_data(seeds: SeedProfiles, profile: PlaneWaveProfile, grid: Grid, support_tol: float = SUPPORT_TOL) -> InitialData:
    x = grid.x
    for name, s in (("f", seeds.f), ("fbar", seeds.fbar)):
        edge = max(abs(float(s(x[0]))), abs(float(s(x[-1]))))
        if edge > support_tol:
            raise SupportOverflowError(f"seed {name} is {edge:.2e} at the grid edge (tol {support_tol:g})")
    Fp, G = _Fp_G(seeds, profile, x)
    F = _cumulative(lambda s: _Fp_G(seeds, profile, s)[0], x)
    return InitialData(x, F, Fp, G, seeds, profile)


def to_grid_state(data: InitialData, grid: Grid) -> GridState:
    """Total field Psi(t - x) + phi at t = grid.t (= 0)."""
    u = grid.t - data.x
    P = np.asarray(psi_derivative(data.profile, 1, u)) * np.ones_like(data.x)
    phi = np.asarray(psi_value(data.profile, u)) + data.F
    return GridState(grid, phi, P + data.G, -P + data.Fp)


def state_from_perturbation(grid: Grid, profile: PlaneWaveProfile, F, Fp, G) -> GridState:
    """Total state from arbitrary perturbation data (F, F', G) at t = grid.t."""
    x = grid.x
    u = grid.t - x
    P = np.asarray(psi_derivative(profile, 1, u)) * np.ones_like(x)
    return GridState(grid, np.asarray(psi_value(profile, u)) + F, P + G, -P + Fp)


def weighted_sobolev_norm(profile_pair: Tuple[Seed, Seed], k_max: int, gamma: float, tol: float = 1e-10) -> float:
    """I = max_{k <= k_max} int Lambda(x) (|f^(k)|^2 + |fbar^(k)|^2) dx."""
    params = WeightParams(gamma=gamma)
    f, fb = profile_pair
    best = 0.0
    for k in range(k_max + 1):
        def integrand(x, k=k):
            return float(lambda_weight(x, params) * (f.derivative(k, x) ** 2 + fb.derivative(k, x) ** 2))

        pts = sorted({s.center for s in (f, fb) if s.kind != "zero"})
        total = 0.0
        # split at the seed centres; hat seeds also at their kinks
        brk = [-math.inf] + pts + [math.inf]
        if any(s.kind == "kink" for s in (f, fb)):
            extra = [s.center + d * s.width for s in (f, fb) if s.kind == "kink" for d in (-1, 1)]
            brk = [-math.inf] + sorted(set(pts + extra)) + [math.inf]
        for lo, hi in zip(brk[:-1], brk[1:]):
            val, err = integrate.quad(integrand, lo, hi, epsabs=tol, epsrel=1e-12, limit=400)
            if err > max(tol, 1e-12 * abs(val)) * 10:
                from .background import QuadratureError

                raise QuadratureError(f"weighted norm quadrature error {err:.2e}")
            total += val
        best = max(best, total)
    return float(best)


@dataclass
class InitialEnergyCheck:
    E2: float
    Eb2: float
    I: float
    ratio_E: float
    ratio_Eb: float


def initial_energy_check(data: InitialData, profile: PlaneWaveProfile, params: WeightParams, grid: Grid, k: int = 0, k_max: int = 4, fd_order: int = 4) -> InitialEnergyCheck:
    """E^2_(k+1)(0), Eb^2_(k+1)(0) and the ratios E^2/(delta^2 I^2), Eb^2/I^2."""
    from .diagnostics import slice_energies
    from .solver import extract_jets

    st = to_grid_state(data, grid)
    jets = extract_jets(st, profile, K=2 if k >= 1 else 1, fd_order=fd_order)
    E2, Eb2 = slice_energies(jets, params, k)
    I = weighted_sobolev_norm((data.seeds.f, data.seeds.fbar), k_max, params.gamma)
    d = data.seeds.delta
    rE = E2 / (d * d * I * I) if d > 0 and I > 0 else (0.0 if E2 == 0 else math.inf)
    rEb = Eb2 / (I * I) if I > 0 else (0.0 if Eb2 == 0 else math.inf)
    return InitialEnergyCheck(E2, Eb2, I, rE, rEb)
