"""Weighted energies, null fluxes, energy-identity bookkeeping, decay profiles
and the small studies built on them.

Slices are integrated in x with a cubic spline through the valid nodes (the
Jacobian of (u, ub) -> (t, x) is 1, so du dub = dt dx).  Quantities along the
characteristics are obtained by evaluating the same spline at the curve point
of every snapshot and integrating in t with Simpson's rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .background import (
    PlaneWaveProfile,
    WeightParams,
    lambda_weight,
    lambda_weight_derivative,
    psi_derivative,
    psi_integral_sq,
)
from .eqforms import box_g, box_g_commuted
from .geometry import deformation_direct, energy_density, metric_scalars, multipliers
from .solver import GridState, JetField, extract_jets

REGION_KINDS = ("sigma_minus", "sigma_plus", "full_slice", "null_out", "null_in")
INTERPOLATION = "cubic spline in x; Simpson in t at snapshot times"


class RegionError(ValueError):
    """Region or segment lies outside the computed grid or history."""


@dataclass(frozen=True)
class RegionSpec:
    """sigma_plus(u0): {u <= u0} on a slice;  sigma_minus(ub0): {ub <= ub0};
    null_out(u0, tau): C_{u0} for 0 <= t <= tau;  null_in(ub0, tau): Cb_{ub0}."""

    kind: str
    value: float = 0.0
    tau: float | None = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if not math.isfinite(self.value) or (self.tau is not None and not math.isfinite(self.tau)):
            raise ValueError("region parameters must be finite")


# ---------------------------------------------------------------------------
# helpers


def _orders(k: int):
    if k == 0:
        return [(0, 0)]
    if k == 1:
        return [(1, 0), (0, 1)]
    raise ValueError("energies are implemented for k in {0, 1}")


def _frame_jets(jets: JetField, K):
    """(L phi_K, Lb phi_K) = (d_ub phi_K, d_u phi_K)."""
    i, j = K
    return jets[(i, j + 1)], jets[(i + 1, j)]


def ub_curve_x(t, ub0: float, profile: PlaneWaveProfile, x_guess=None, tol: float = 1e-14):
    """x(t) on the incoming characteristic ub = ub0 (Newton on the chart)."""
    t = np.asarray(t, dtype=float)
    x = 2.0 * ub0 - t if x_guess is None else np.asarray(x_guess, dtype=float) * np.ones_like(t)
    for _ in range(60):
        u = t - x
        F = 0.5 * (t + x) - 0.5 * np.asarray(psi_integral_sq(profile, u)) - ub0
        dF = 0.5 + 0.5 * np.asarray(psi_derivative(profile, 1, u)) ** 2
        step = F / dF
        x = x - step
        if np.all(np.abs(step) < tol):
            break
    return x


def _spline_integral(x, y, valid, lo=None, hi=None):
    xv, yv = x[valid], y[valid]
    lo = xv[0] if lo is None else max(lo, xv[0])
    hi = xv[-1] if hi is None else min(hi, xv[-1])
    if hi <= lo:
        return 0.0
    return float(CubicSpline(xv, yv).integrate(lo, hi))


def _spline_at(x, y, valid, xq):
    xv = x[valid]
    xq = np.asarray(xq, dtype=float)
    if np.any(xq < xv[0]) or np.any(xq > xv[-1]):
        raise RegionError("curve leaves the valid part of the grid")
    return CubicSpline(xv, y[valid])(xq)


def _region_bounds(jets: JetField, region: RegionSpec):
    if region.kind == "full_slice":
        return None, None
    if region.kind == "sigma_plus":
        return jets.t - region.value, None
    if region.kind == "sigma_minus":
        if jets.profile is None:
            raise RegionError("sigma_minus needs the profile on the jet field")
        return None, float(ub_curve_x(jets.t, region.value, jets.profile))
    raise RegionError(f"{region.kind} is not a slice region")


# ---------------------------------------------------------------------------
# energies


def energy_densities(jets: JetField, params: WeightParams, k: int):
    """Integrands (with sqrt g) of E^2_(k+1), Eb^2_(k+1), F^2_(k+1), Fb^2_(k+1)."""
    q, p = jets[(0, 1)], jets[(1, 0)]
    ms = metric_scalars(_first(jets))
    sg = np.sqrt(np.asarray(ms.g))
    P = jets.psi1
    lam = lambda_weight(jets.u, params)
    lamb = lambda_weight(jets.ub, params)
    e = np.zeros_like(q)
    eb = np.zeros_like(q)
    f = np.zeros_like(q)
    fb = np.zeros_like(q)
    gbb = np.asarray(ms.gubub)
    for K in _orders(k):
        L, Lb = _frame_jets(jets, K)
        e += lamb * ((1.0 + (P + p) ** 2) * L * L + q * q * Lb * Lb)
        eb += lam * (Lb * Lb + ((1.0 + P * P) * p * p + gbb * gbb) * L * L)
        f += lamb * (L * L + q ** 4 * Lb * Lb)
        fb += lam * (Lb * Lb + (2.0 * P + p) ** 2 * p * p * L * L)
    return e * sg, eb * sg, f * sg, fb * sg


def _first(jets: JetField):
    from .geometry import FirstJet

    return FirstJet(jets.psi1, jets[(1, 0)], jets[(0, 1)])


def _valid(jets: JetField, k: int):
    return jets.valid if k >= 1 else np.ones_like(jets.valid)


def slice_energy(jets: JetField, params: WeightParams, region: RegionSpec, k: int, which: str | None = None) -> float:
    """E^2_(k+1) on sigma_plus regions, Eb^2_(k+1) on sigma_minus regions;
    on full_slice ``which`` ("E" or "Eb") selects the family."""
    if which is None:
        which = {"sigma_plus": "E", "sigma_minus": "Eb"}.get(region.kind)
        if which is None:
            raise RegionError("full_slice needs which='E' or 'Eb'")
    lo, hi = _region_bounds(jets, region)
    x = jets.x
    if (lo is not None and lo > x[-1]) or (hi is not None and hi < x[0]):
        raise RegionError("region outside grid")
    e, eb, _, _ = energy_densities(jets, params, k)
    y = e if which == "E" else eb
    return _spline_integral(x, y, _valid(jets, k), lo, hi)


def slice_energies(jets: JetField, params: WeightParams, k: int):
    """(E^2_(k+1)(t), Eb^2_(k+1)(t)): the suprema over cuts, i.e. full slices."""
    e, eb, _, _ = energy_densities(jets, params, k)
    v = _valid(jets, k)
    return _spline_integral(jets.x, e, v), _spline_integral(jets.x, eb, v)


def jet_history(snaps: Sequence[GridState], profile: PlaneWaveProfile, K: int = 2, fd_order: int = 4) -> List[JetField]:
    return [extract_jets(s, profile, K, fd_order) for s in snaps]


def _times(hist: Sequence[JetField]):
    return np.array([j.t for j in hist])


def _curve(hist, segment: RegionSpec):
    """(times, x on curve, dparam/dt) for a null segment."""
    t = _times(hist)
    tau = t[-1] if segment.tau is None else segment.tau
    if tau > t[-1] + 1e-12:
        raise RegionError("segment outside history")
    sel = t <= tau + 1e-12
    t = t[sel]
    if segment.kind == "null_out":
        return t, t - segment.value, np.ones_like(t), sel
    if segment.kind == "null_in":
        prof = hist[0].profile
        xc = ub_curve_x(t, segment.value, prof)
        P = np.asarray(psi_derivative(prof, 1, t - xc))
        return t, xc, 2.0 / (1.0 + P * P), sel
    raise RegionError(f"{segment.kind} is not a null segment")


def _time_integral(y, t, cumulative=False):
    if len(t) < 2:
        return np.zeros(len(t)) if cumulative else 0.0
    if cumulative:
        if len(t) < 3:
            return integrate.cumulative_trapezoid(y, t, initial=0.0)
        return integrate.cumulative_simpson(y, x=t, initial=0.0)
    return float(integrate.simpson(y, x=t))


def flux_energy(hist: Sequence[JetField], params: WeightParams, segment: RegionSpec, k: int) -> float:
    """F^2_(k+1)(u0, tau) on null_out(u0, tau) or Fb^2_(k+1)(ub0, tau) on null_in."""
    t, xc, w, sel = _curve(hist, segment)
    vals = []
    for jets, xq in zip([h for h, s in zip(hist, sel) if s], xc):
        _, _, f, fb = energy_densities(jets, params, k)
        y = f if segment.kind == "null_out" else fb
        vals.append(float(_spline_at(jets.x, y, _valid(jets, k), xq)))
    return _time_integral(np.array(vals) * w, t)


# ---------------------------------------------------------------------------
# energy identities


@dataclass
class IdentityTerms:
    slice_tau: float
    flux: float
    slice_0: float
    bulk: float

    @property
    def lhs(self) -> float:
        return self.slice_tau + self.flux

    @property
    def rhs(self) -> float:
        return self.slice_0 - self.bulk

    @property
    def residual(self) -> float:
        return self.lhs - self.rhs


def identity_densities(jets: JetField, params: WeightParams, multiplier: str, k: int):
    """Per-node (T(-Dt, xi) sqrt g, T(-Df, xi) sqrt g, d_alpha(sqrt g P^alpha)).

    ``f`` is u for xi = L~ and ub for xi = Lb~; the divergence is evaluated
    through the current identity with Box_g phi_K supplied by eqforms.
    """
    sj = jets.second_jet()
    ms = metric_scalars(sj.first)
    sg = np.sqrt(np.asarray(ms.g))
    if multiplier == "L":
        lam = lambda_weight(jets.ub, params)
        dlam = lambda_weight_derivative(jets.ub, params)
        xi = multipliers(ms, 1.0, lam).L
        pair_t, pair_f = "-Dt,L", "-Du,L"
    elif multiplier == "Lb":
        lam = lambda_weight(jets.u, params)
        dlam = lambda_weight_derivative(jets.u, params)
        xi = multipliers(ms, lam, 1.0).Lb
        pair_t, pair_f = "-Dt,Lb", "-Dub,Lb"
    else:
        raise ValueError("multiplier must be 'L' or 'Lb'")
    dens_t = np.zeros_like(sg)
    dens_f = np.zeros_like(sg)
    bulk = np.zeros_like(sg)
    for K in _orders(k):
        if k == 0:
            box = np.asarray(box_g(sj))
            jet = (np.asarray(sj.p), np.asarray(sj.q))
        else:
            box, jet = box_g_commuted(sj, jets.psi3, K)
        xi_psi = np.asarray(xi[0]) * jet[0] + np.asarray(xi[1]) * jet[1]
        tdx, half = deformation_direct(sj, jet, multiplier, lam, dlam, path="a")
        bulk += sg * (box * xi_psi + tdx - half)
        dens_t += sg * np.asarray(energy_density(ms, jet, pair_t, lam))
        dens_f += sg * np.asarray(energy_density(ms, jet, pair_f, lam))
    return dens_t, dens_f, bulk


def energy_identity_terms(hist: Sequence[JetField], params: WeightParams, multiplier: str, cut: float, k: int) -> IdentityTerms:
    """Both sides of the energy identity on D+ (xi = L~, cut u0) or D- (xi = Lb~, cut ub0)."""
    if len(hist) < 3:
        raise RegionError("insufficient history (need >= 3 snapshots)")
    kind = "null_out" if multiplier == "L" else "null_in"
    seg = RegionSpec(kind, cut, hist[-1].t)
    t, xc, w, _ = _curve(hist, seg)
    bulk_t, flux_t = [], []
    slices = []
    for jets, xq in zip(hist, xc):
        dt_, df_, b_ = identity_densities(jets, params, multiplier, k)
        v = jets.valid
        if multiplier == "L":
            lo, hi = xq, None
        else:
            lo, hi = None, xq
        bulk_t.append(_spline_integral(jets.x, b_, v, lo, hi))
        flux_t.append(float(_spline_at(jets.x, df_, v, xq)))
        slices.append(_spline_integral(jets.x, dt_, v, lo, hi))
    bulk = _time_integral(np.array(bulk_t), t)
    flux = _time_integral(np.array(flux_t) * w, t)
    return IdentityTerms(slices[-1], flux, slices[0], bulk)


def energy_identity_residual(hist: Sequence[JetField], params: WeightParams, multiplier: str, cut: float, k: int) -> float:
    return energy_identity_terms(hist, params, multiplier, cut, k).residual


# ---------------------------------------------------------------------------
# decay, Sobolev ratios, persistence


@dataclass
class DecayProfile:
    t: np.ndarray
    sup_L: Dict[tuple, np.ndarray]  # sup Lambda^{1/2}(u) |d_u d^K phi|
    sup_Lb: Dict[tuple, np.ndarray]  # sup Lambdab^{1/2}(ub) |d_ub d^K phi| / delta (unscaled if delta = 0)

    def constant_L(self, K=(0, 0)) -> float:
        return float(np.max(self.sup_L[K]))

    def constant_Lb(self, K=(0, 0)) -> float:
        return float(np.max(self.sup_Lb[K]))


def decay_profile(hist: Sequence[JetField], params: WeightParams, delta: float) -> DecayProfile:
    orders = [(0, 0)] + ([(1, 0), (0, 1)] if hist[0].K >= 2 else [])
    sL = {K: [] for K in orders}
    sLb = {K: [] for K in orders}
    for jets in hist:
        wl = np.sqrt(lambda_weight(jets.u, params))
        wlb = np.sqrt(lambda_weight(jets.ub, params))
        for K in orders:
            v = jets.valid if K != (0, 0) else np.ones_like(jets.valid)
            Lphi, Lbphi = _frame_jets(jets, K)
            sL[K].append(float(np.max((wl * np.abs(Lbphi))[v])))
            val = float(np.max((wlb * np.abs(Lphi))[v]))
            sLb[K].append(val / delta if delta > 0 else val)
    return DecayProfile(
        _times(hist), {K: np.array(v) for K, v in sL.items()}, {K: np.array(v) for K, v in sLb.items()}
    )


def sobolev_ratio(values, deriv, dx: float, weight=None) -> float:
    """||w g||_inf / (||w g||_L2 + ||(w g)_x||_L2) with w = 1 by default;
    ``deriv`` is the x-derivative of the (weighted) field."""
    g = np.asarray(values, dtype=float)
    gx = np.asarray(deriv, dtype=float)
    if weight is not None:
        g = g * weight
    num = float(np.max(np.abs(g))) if g.size else 0.0
    if num == 0.0:
        return 0.0
    den = math.sqrt(integrate.simpson(g * g, dx=dx)) + math.sqrt(integrate.simpson(gx * gx, dx=dx))
    return num / den if den > 0 else 0.0


@dataclass
class PersistenceReport:
    x0: np.ndarray
    t: np.ndarray
    drift: float  # max over curves and times of |p^2(t) - p^2(0)|
    margin: float  # min over tracked curves and times of p^2 - psi(u)^2
    tracked: int
    drift_series: np.ndarray = field(default_factory=lambda: np.zeros(0))


def persistence_check(hist: Sequence[JetField], threshold: Callable | None = None, x0=None) -> PersistenceReport:
    """Track (d_u phi)^2 along x = x0 + t (u = -x0 fixed)."""
    first = hist[0]
    t_end = hist[-1].t
    if x0 is None:
        lo, hi = first.x[0] + 2 * first.x[1] - 2 * first.x[0], first.x[-1] - t_end
        x0 = first.x[(first.x >= lo) & (first.x <= hi)]
    x0 = np.asarray(x0, dtype=float)
    u = -x0
    thr = np.zeros_like(u) if threshold is None else np.asarray(threshold(u), dtype=float) ** 2
    p0 = None
    drift_series = []
    drift = 0.0
    margin = math.inf
    ones = np.ones_like(first.valid)
    for jets in hist:
        p = _spline_at(jets.x, jets[(1, 0)], ones, x0 + jets.t) if jets.t > 0 else _spline_at(jets.x, jets[(1, 0)], ones, x0)
        p2 = p * p
        if p0 is None:
            p0 = p2
            track = p0 > thr
        d = float(np.max(np.abs(p2 - p0))) if p2.size else 0.0
        drift_series.append(d)
        drift = max(drift, d)
        if np.any(track):
            margin = min(margin, float(np.min((p2 - thr)[track])))
    return PersistenceReport(x0, _times(hist), drift, margin, int(np.sum(track)), np.array(drift_series))


# ---------------------------------------------------------------------------
# histories of energies, scaling


@dataclass
class EnergyHistory:
    """Full-slice energies (the suprema over cuts) per snapshot and the fluxes
    at t_end maximised over the cut ladder."""

    t: np.ndarray
    E2: Dict[int, np.ndarray]
    Eb2: Dict[int, np.ndarray]
    F2: Dict[int, float]
    Fb2: Dict[int, float]

    def sup(self, name: str, k: int) -> float:
        v = getattr(self, name)[k]
        return float(np.max(v)) if isinstance(v, np.ndarray) else float(v)


def energy_history(hist: Sequence[JetField], params: WeightParams, ks=(0, 1), u_ladder=None, ub_ladder=None) -> EnergyHistory:
    t = _times(hist)
    E2 = {k: np.array([slice_energies(j, params, k)[0] for j in hist]) for k in ks}
    Eb2 = {k: np.array([slice_energies(j, params, k)[1] for j in hist]) for k in ks}
    F2, Fb2 = {}, {}
    for k in ks:
        F2[k] = max((flux_energy(hist, params, RegionSpec("null_out", c), k) for c in (u_ladder if u_ladder is not None else [])), default=0.0)
        Fb2[k] = max((flux_energy(hist, params, RegionSpec("null_in", c), k) for c in (ub_ladder if ub_ladder is not None else [])), default=0.0)
    return EnergyHistory(t, E2, Eb2, F2, Fb2)


def energy_rows(hist: Sequence[JetField], params: WeightParams, ks, u_ladder, ub_ladder, t_every: int = 1):
    """Rows (t, k, cut, E2(u=cut,t), Eb2(ub=cut,t), F2(cut,t), Fb2(cut,t))."""
    rows = []
    t = _times(hist)
    for k in ks:
        F = {}
        Fb = {}
        for c in u_ladder:
            _, xc, w, _ = _curve(hist, RegionSpec("null_out", c))
            vals = [float(_spline_at(j.x, energy_densities(j, params, k)[2], _valid(j, k), xq)) for j, xq in zip(hist, xc)]
            F[c] = _time_integral(np.array(vals) * w, t, cumulative=True)
        for c in ub_ladder:
            _, xc, w, _ = _curve(hist, RegionSpec("null_in", c))
            vals = [float(_spline_at(j.x, energy_densities(j, params, k)[3], _valid(j, k), xq)) for j, xq in zip(hist, xc)]
            Fb[c] = _time_integral(np.array(vals) * w, t, cumulative=True)
        for i in range(0, len(hist), t_every):
            j = hist[i]
            for cu, cub in zip(u_ladder, ub_ladder):
                e = slice_energy(j, params, RegionSpec("sigma_plus", cu), k)
                eb = slice_energy(j, params, RegionSpec("sigma_minus", cub), k)
                rows.append((j.t, k, cu, cub, e, eb, float(F[cu][i]), float(Fb[cub][i])))
    return rows


def fitted_exponent(deltas: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(value) against log(delta)."""
    d = np.log(np.asarray(deltas, dtype=float))
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(d, np.log(v), 1)[0])


@dataclass
class ScalingTable:
    deltas: List[float]
    values: Dict[str, List[float]]
    exponents: Dict[str, float]

    def ratio(self, name: str, i: int = 0, j: int = 1) -> float:
        return self.values[name][i] / self.values[name][j]


def scaling_study(run: Callable[[float], EnergyHistory], deltas: Sequence[float], ks=(0, 1)) -> ScalingTable:
    """``run(delta)`` returns the EnergyHistory of one simulation."""
    if len(deltas) < 2:
        raise ValueError("need at least two deltas")
    values: Dict[str, List[float]] = {}
    for d in deltas:
        h = run(d)
        for k in ks:
            for name in ("E2", "Eb2", "F2", "Fb2"):
                values.setdefault(f"{name}_k{k}", []).append(h.sup(name, k))
    exps = {n: fitted_exponent(deltas, v) for n, v in values.items()}
    return ScalingTable(list(deltas), values, exps)


# ---------------------------------------------------------------------------
# CSV output


def fmt(x) -> str:
    """Shortest round-trip decimal for floats; plain str otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


ENERGY_HEADER = ("t", "k", "u_cut", "ub_cut", "E2", "Eb2", "F2", "Fb2")
DECAY_HEADER = ("t", "i", "j", "weighted_sup_L", "weighted_sup_Lb")


def decay_rows(dp: DecayProfile):
    rows = []
    for n, t in enumerate(dp.t):
        for K in sorted(dp.sup_L):
            rows.append((float(t), K[0], K[1], float(dp.sup_L[K][n]), float(dp.sup_Lb[K][n])))
    return rows
