"""Equivalent forms of the perturbation's Euler-Lagrange equation as pointwise
functionals of a second jet, and the identity harness that checks them
against each other on analytic test fields.

Every formula here is a closed-form function of ``SecondJet`` data; the
derivatives of (sqrt g)^{-1} and of the inverse metric are expanded by the
chain rule.  The independent oracle is truncated Taylor arithmetic
(``taylor.Taylor2``) on the analytic catalog fields.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np

from .background import PlaneWaveProfile, lambda_weight, psi_derivatives, WeightParams
from .geometry import (
    G_FLOOR,
    FirstJet,
    SecondJet,
    _Lin,
    _lin_jet,
    bilinear_expanded,
    deformation_direct,
    determinant,
    energy_density,
    energy_density_expanded,
    energy_momentum,
    metric_derivatives,
    metric_scalars,
    multipliers,
    stress_bilinear,
)
from .taylor import Taylor2

__all__ = [
    "SecondJet",
    "el_flux_residual",
    "s0_source",
    "r0_source",
    "tilde_s0_source",
    "tilde_r0_source",
    "box_g",
    "box_g_commuted",
    "on_shell_jet",
    "quasilinear_principal",
    "AnalyticTestField",
    "catalog",
    "higher_order_commute_residual",
    "ResidualRow",
    "ResidualReport",
    "run_identity_suite",
]


def _a(x):
    return np.asarray(x, dtype=float)


def _out(x):
    x = np.asarray(x, dtype=float)
    return x if x.ndim else float(x)


class _Pieces:
    """Shared pointwise quantities: g, gring, and d(g^{-1/2}) along u, ub."""

    def __init__(self, j: SecondJet, g_floor: float):
        self.ms = metric_scalars(j.first, g_floor)
        self.P, self.P2 = _a(j.psi1), _a(j.psi2)
        self.p, self.q = _a(j.p), _a(j.q)
        self.puu, self.pub, self.qbb = _a(j.puu), _a(j.pub), _a(j.qubub)
        d = metric_derivatives(j)
        self.d = d
        g, g_u, g_ub = d["g"]
        self.g = g
        self.sg = np.sqrt(g)
        self.gr = _a(self.ms.gring)
        # s = g^{-1/2}
        self.s = 1.0 / self.sg
        self.s_u = -0.5 * g ** -1.5 * g_u
        self.s_ub = -0.5 * g ** -1.5 * g_ub


def el_flux_residual(j: SecondJet, g_floor: float = G_FLOOR):
    """EL0: the divergence form of the equation, zero on exact solutions.

    EL0 = d_u(-q s) + d_ub(-p s) - d_ub(s P) + d_ub(s P^2 q),  s = g^{-1/2}.
    """
    z = _Pieces(j, g_floor)
    P, p, q, s = z.P, z.p, z.q, z.s
    v = (
        -z.pub * s - q * z.s_u
        - z.pub * s - p * z.s_ub
        - P * z.s_ub
        + P * P * z.qbb * s + P * P * q * z.s_ub
    )
    return _out(v)


def s0_source(j: SecondJet, g_floor: float = G_FLOOR):
    """S0: source of the divergence-form wave equation for phi."""
    z = _Pieces(j, g_floor)
    P, p, q, g, gr, sg = z.P, z.p, z.q, z.g, z.gr, z.sg
    Q2, M = z.qbb, z.pub
    v = (
        gr / g ** 2 * (1.0 - g) * P * P * Q2
        + (gr - g) / g ** 2 * P * p * Q2
        - gr / g ** 2 * P ** 3 * q * Q2
        + gr / g ** 2 * P * q * M
        + (gr - 1.0) / g * 2.0 * M
        + P * q * M / g
        + z.P2 * q * q / g
        - gr / sg * P * P * q * z.s_ub
        + (gr - 1.0) / sg * q * z.s_u
        + (gr - 1.0) / sg * p * z.s_ub
        + P * q * q * z.s_u / sg
        - P * q * p * z.s_ub / sg
    )
    return _out(v)


def tilde_s0_source(j: SecondJet, g_floor: float = G_FLOOR):
    """S0~: the variant source obtained without trading g for gring."""
    z = _Pieces(j, g_floor)
    P, p, q, g, sg = z.P, z.p, z.q, z.g, z.sg
    Q2, M = z.qbb, z.pub
    v = (
        (1.0 - g) / g ** 2 * P * P * Q2
        + (1.0 - g) / g ** 2 * P * p * Q2
        - P ** 3 * q * Q2 / g ** 2
        + P * q * M / g ** 2
        + P * q * M / g
        - P * P * q * z.s_ub / sg
        + z.P2 * q * q / g
        + P * q * q * z.s_u / sg
        - P * q * p * z.s_ub / sg
    )
    return _out(v)


R0_VARIANTS = ("printed", "corrected")


def r0_source(j: SecondJet, g_floor: float = G_FLOOR, variant: str = "printed"):
    """Semilinear right side R0 of g^{mu nu} dd phi = R0.

    ``variant="printed"``:   Psi'' q^2 (1 - 3Pq + (Pq)^2 - (Pq)^3) / (gring g).
    ``variant="corrected"``: Psi'' q^2 (1 - Pq)^3 / (gring g) = Psi'' q^2 (1 - Pq) / g,
    which is what holds on solutions; the two differ by 2 Psi'' q^2 (Pq)^2 / (gring g).
    """
    ms = metric_scalars(j.first, g_floor)
    P, q = _a(j.psi1), _a(j.q)
    x = P * q
    if variant == "printed":
        poly = 1.0 - 3.0 * x + x * x - x ** 3
    elif variant == "corrected":
        poly = (1.0 - x) ** 3
    else:
        raise ValueError(f"variant must be one of {R0_VARIANTS}")
    return _out(_a(j.psi2) * q * q * poly / (_a(ms.gring) * _a(ms.g)))


def tilde_r0_source(j: SecondJet, g_floor: float = G_FLOOR):
    """R0~: semilinear form carrying the second-jet terms explicitly."""
    ms = metric_scalars(j.first, g_floor)
    P, p, q = _a(j.psi1), _a(j.p), _a(j.q)
    Q2, M, puu = _a(j.qubub), _a(j.pub), _a(j.puu)
    g = _a(ms.g)
    c = (2.0 * P + p) * p
    v = (
        2.0 * c * P * q * Q2
        - c * P * P * q * q * Q2
        + (1.0 + 3.0 * g) * P * q * M
        + 2.0 * P * p * q * q * M
        + (2.0 * p - P) * P * P * q ** 3 * M
        + 2.0 * P * q ** 3 * puu
        - P * P * q ** 4 * puu
        + (1.0 - P * q) * _a(j.psi2) * q * q
    )
    return _out(v / (_a(ms.gring) * g))


def quasilinear_principal(j: SecondJet, g_floor: float = G_FLOOR):
    """g^{uu} phi_uu + 2 g^{u ub} phi_uub + g^{ub ub} phi_ubub."""
    ms = metric_scalars(j.first, g_floor)
    return _out(
        _a(ms.guu) * _a(j.puu) + 2.0 * _a(ms.guub) * _a(j.pub) + _a(ms.gubub) * _a(j.qubub)
    )


def _divergences(z: _Pieces):
    """(d_mu(sqrt g g^{mu u}), d_mu(sqrt g g^{mu ub}))."""
    d = z.d
    g, g_u, g_ub = d["g"]
    sg = z.sg
    sg_u, sg_ub = g_u / (2.0 * sg), g_ub / (2.0 * sg)

    def dmix(name, k):
        return d[name][k] * sg + d[name][0] * (sg_u if k == 1 else sg_ub)

    return dmix("guu", 1) + dmix("guub", 2), dmix("guub", 1) + dmix("gubub", 2)


def box_g(j: SecondJet, g_floor: float = G_FLOOR):
    """Box_g phi = g^{mu nu} d d phi + (1/sqrt g) d_nu phi d_mu (g^{mu nu} sqrt g)."""
    z = _Pieces(j, g_floor)
    div_u, div_ub = _divergences(z)
    principal = quasilinear_principal(j, g_floor)
    return _out(principal + (z.p * div_u + z.q * div_ub) / z.sg)


def box_g_commuted(j: SecondJet, psi3, K: tuple, g_floor: float = G_FLOOR):
    """Box_g phi_K for |K| = 1 on solutions, together with the jet of phi_K.

    Uses g^{mu nu} dd phi_K = d_K(g^{mu nu} dd phi) - (d_K g^{mu nu}) dd phi and
    g^{mu nu} dd phi = Psi'' q^2 (1 - Pq) / g on solutions, so only second
    jets and Psi''' are needed.  Returns (Box_g phi_K, (d_u phi_K, d_ub phi_K)).
    """
    if K not in ((1, 0), (0, 1)):
        raise ValueError("K must be (1, 0) or (0, 1)")
    z = _Pieces(j, g_floor)
    P, p, q = _lin_jet(j)
    P2 = _Lin(z.P2, _a(psi3) * np.ones_like(z.P2), 0.0 * z.P2)
    g = 1.0 - 2.0 * p * q - 2.0 * P * q + P * P * q * q
    R = P2 * q * q * (1.0 - P * q) / g
    d = z.d
    k = 1 if K == (1, 0) else 2
    dR = R.du if k == 1 else R.dub
    lower = d["guu"][k] * z.puu + 2.0 * d["guub"][k] * z.pub + d["gubub"][k] * z.qbb
    jet = (z.puu, z.pub) if K == (1, 0) else (z.pub, z.qbb)
    div_u, div_ub = _divergences(z)
    return _out(dR - lower + (jet[0] * div_u + jet[1] * div_ub) / z.sg), jet


def on_shell_jet(psi1, psi2, p, q, puu, qubub, g_floor: float = G_FLOOR) -> SecondJet:
    """Complete a jet by solving the equation (affine in d_u d_ub phi) for pub."""
    z = np.zeros_like(_a(p) + _a(q))
    j0 = SecondJet(psi1, psi2, p, q, puu, z, qubub)
    j1 = SecondJet(psi1, psi2, p, q, puu, z + 1.0, qubub)
    e0 = _a(el_flux_residual(j0, g_floor))
    e1 = _a(el_flux_residual(j1, g_floor))
    return SecondJet(psi1, psi2, p, q, puu, _out(-e0 / (e1 - e0)), qubub)


# ---------------------------------------------------------------------------
# analytic test fields


@dataclass(frozen=True)
class AnalyticTestField:
    """A catalog recipe phi(u, ub) with exact derivatives via Taylor arithmetic.

    ``kind`` selects one of ``CATALOG_KINDS``; ``params`` holds its
    coefficients.  ``profile`` binds the plane-wave background.
    """

    kind: str
    params: tuple = ()
    profile: PlaneWaveProfile = PlaneWaveProfile()

    def taylor(self, u, ub, K: int) -> Taylor2:
        u, ub = np.broadcast_arrays(_a(u), _a(ub))
        U = Taylor2.variable(u, "u", K)
        B = Taylor2.variable(ub, "ub", K)
        k = self.kind
        c = self.params
        if k == "const":
            return Taylor2.constant(np.full(u.shape, c[0]), K)
        if k == "lin_u":
            return U * c[0]
        if k == "lin_ub":
            return B * c[0]
        if k == "sin_sin":
            A, a, b = c
            return (U * a).sin() * (B * b).sin() * A
        if k == "u_exp":
            A, = c
            return U * (B * B * -1.0).exp() * A
        if k == "gauss_sum":
            A1, w1, A2, w2 = c
            return (U * U * (-1.0 / w1 ** 2)).exp() * A1 + (B * B * (-1.0 / w2 ** 2)).exp() * A2
        if k == "gauss_u":
            A1, w1 = c
            return (U * U * (-1.0 / w1 ** 2)).exp() * A1
        raise ValueError(f"unknown catalog kind {k!r}")

    def value(self, u, ub):
        return self.taylor(u, ub, 0).value

    def psi_taylor(self, u, K: int) -> Taylor2:
        """Psi'(u) as a series in u."""
        u = _a(u)
        derivs = psi_derivatives(self.profile, u, K + 1)
        return Taylor2.from_derivatives_u([_a(d) * np.ones_like(u) for d in derivs], K)

    def second_jet(self, u, ub) -> SecondJet:
        t = self.taylor(u, ub, 2)
        P = self.psi_taylor(u, 1)
        return SecondJet(
            P.deriv(0, 0), P.deriv(1, 0),
            t.deriv(1, 0), t.deriv(0, 1),
            t.deriv(2, 0), t.deriv(1, 1), t.deriv(0, 2),
        )

    @property
    def is_exact_solution(self) -> bool:
        """Fields depending on u alone: Psi(u) + phi(u) is again a plane wave."""
        return self.kind in ("const", "lin_u", "gauss_u")


CATALOG_KINDS = ("const", "lin_u", "lin_ub", "sin_sin", "u_exp", "gauss_sum", "gauss_u")


def catalog(profile: PlaneWaveProfile, rng: np.random.Generator | None = None) -> List[AnalyticTestField]:
    """The fixed catalog; coefficients drawn (amplitudes <= 0.3) if rng given."""
    if rng is None:
        vals = dict(
            const=(0.3,), lin_u=(0.2,), lin_ub=(0.25,), sin_sin=(0.3, 0.7, 0.9),
            u_exp=(0.2,), gauss_sum=(0.3, 1.5, 0.25, 1.0), gauss_u=(0.3, 1.2),
        )
    else:
        r = lambda lo, hi: float(rng.uniform(lo, hi))  # noqa: E731
        vals = dict(
            const=(r(-0.3, 0.3),), lin_u=(r(-0.3, 0.3),), lin_ub=(r(-0.3, 0.3),),
            sin_sin=(r(0.05, 0.3), r(0.2, 1.0), r(0.2, 1.0)), u_exp=(r(0.05, 0.3),),
            gauss_sum=(r(0.05, 0.3), r(0.8, 2.0), r(0.05, 0.3), r(0.8, 2.0)),
            gauss_u=(r(0.05, 0.3), r(0.8, 2.0)),
        )
    return [AnalyticTestField(k, vals[k], profile) for k in CATALOG_KINDS]


# ---------------------------------------------------------------------------
# Taylor oracles


def _metric_taylor(P, p, q):
    g = 1.0 - p * q * 2.0 - P * q * 2.0 + P * P * q * q
    guu = q * q * -1.0 / g
    guub = (P * q + p * q - 1.0) / g
    gubub = (P * p * 2.0 + p * p) * -1.0 / g
    return g, guu, guub, gubub


def current_divergence_oracle(fld: AnalyticTestField, u, ub, multiplier: str, params: WeightParams):
    """(1/sqrt g) d_alpha(sqrt g P^alpha) with P^alpha = T^alpha_beta[phi] xi^beta,
    assembled by exact Taylor arithmetic on the field."""
    t = fld.taylor(u, ub, 2)
    p, q = t.d_u(), t.d_ub()
    P = fld.psi_taylor(u, 1)
    g, guu, guub, gubub = _metric_taylor(P, p, q)
    sg = g.sqrt()
    Du = guu * p + guub * q
    Dub = guub * p + gubub * q
    halfQ = (Du * p + Dub * q) * 0.5
    T_u_u, T_u_ub = Du * p - halfQ, Du * q
    T_ub_u, T_ub_ub = Dub * p, Dub * q - halfQ
    u, ub = np.broadcast_arrays(_a(u), _a(ub))
    gam = params.gamma
    if multiplier == "L":
        B = Taylor2.variable(ub, "ub", 1)
        lam = (B * B + 1.0).power(1.0 + gam)
        xi_u, xi_ub = guu * lam * -1.0, guub * lam * -1.0
    else:
        U = Taylor2.variable(u, "u", 1)
        lam = (U * U + 1.0).power(1.0 + gam)
        xi_u, xi_ub = guub * lam * -1.0, gubub * lam * -1.0
    Pu = T_u_u * xi_u + T_u_ub * xi_ub
    Pub = T_ub_u * xi_u + T_ub_ub * xi_ub
    div = (sg * Pu).deriv(1, 0) + (sg * Pub).deriv(0, 1)
    return div / sg.value


def el_flux_oracle(fld: AnalyticTestField, u, ub):
    t = fld.taylor(u, ub, 2)
    p, q = t.d_u(), t.d_ub()
    P = fld.psi_taylor(u, 1)
    s = (1.0 - p * q * 2.0 - P * q * 2.0 + P * P * q * q).power(-0.5)
    return (q * s * -1.0).deriv(1, 0) + (p * s * -1.0 - s * P + s * P * P * q).deriv(0, 1)


def box_oracle(fld: AnalyticTestField, u, ub):
    t = fld.taylor(u, ub, 2)
    p, q = t.d_u(), t.d_ub()
    P = fld.psi_taylor(u, 1)
    g, guu, guub, gubub = _metric_taylor(P, p, q)
    sg = g.sqrt()
    div = (sg * (guu * p + guub * q)).deriv(1, 0) + (sg * (guub * p + gubub * q)).deriv(0, 1)
    return div / sg.value


# ---------------------------------------------------------------------------
# higher-order commutation (Leibniz) residual


def _multi_indices(k):
    return [(i, k - i) for i in range(k + 1)]


def higher_order_commute_residual(fld: AnalyticTestField, k: int, u, ub):
    """max over |K| = k of |g dd phi_K - (d^K(g dd phi) - sum_{0<I<=K} C(K,I) d^I g dd phi_{K-I})|,
    normalised by max(1, |terms|).  Vanishes by the Leibniz rule."""
    if k < 0 or k > 2:
        raise ValueError("derivative order unavailable: k must be in {0, 1, 2}")
    K = k + 2
    t = fld.taylor(u, ub, K)
    P = fld.psi_taylor(u, K - 1)
    p, q = t.d_u(), t.d_ub()
    g, guu, guub, gubub = _metric_taylor(P, p, q)
    tuu, tuub, tubub = t.d_u().d_u(), t.d_u().d_ub(), t.d_ub().d_ub()
    prod = guu * tuu + guub * tuub * 2.0 + gubub * tubub
    comps = ((guu, tuu, 1.0), (guub, tuub, 2.0), (gubub, tubub, 1.0))
    worst = 0.0
    for (k1, k2) in _multi_indices(k):
        lhs = sum(w * gc.deriv(0, 0) * tc.deriv(k1, k2) for gc, tc, w in comps)
        rhs = prod.deriv(k1, k2)
        scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
        for i1 in range(k1 + 1):
            for i2 in range(k2 + 1):
                if i1 == 0 and i2 == 0:
                    continue
                c = math.comb(k1, i1) * math.comb(k2, i2)
                term = sum(w * gc.deriv(i1, i2) * tc.deriv(k1 - i1, k2 - i2) for gc, tc, w in comps)
                rhs = rhs - c * term
                scale = np.maximum(scale, np.abs(c * term))
        worst = np.maximum(worst, np.abs(lhs - rhs) / scale)
    return _out(worst)


# ---------------------------------------------------------------------------
# identity suite


@dataclass
class ResidualRow:
    name: str
    n_points: int
    max_abs: float
    max_rel: float
    threshold: float
    passed: bool
    note: str = ""


@dataclass
class ResidualReport:
    rows: List[ResidualRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, name: str) -> ResidualRow:
        for r in self.rows:
            if r.name == name:
                return r
        raise KeyError(name)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["identity", "n_points", "max_abs", "max_rel", "pass"])
            for r in self.rows:
                w.writerow([r.name, r.n_points, repr(float(r.max_abs)), repr(float(r.max_rel)), str(r.passed).lower()])


DEFAULT_THRESHOLDS = {
    "algebraic": 1e-10,
    "chain": 1e-9,
}

ALGEBRAIC = (
    "geom-inverse", "geom-raised", "geom-determinant",
    "ID-A", "ID-D-EL0", "ID-D-S0", "ID-D-R0", "ID-D-R0tilde",
    "ID-D-onshell-EL0", "ID-D-onshell-S0", "ID-D-onshell-R0", "ID-D-onshell-R0tilde",
    "ID-E-ub,ub", "ID-E-u,u", "ID-E-u,ub", "ID-E-Dt,L", "ID-E-Dt,Lb",
    "ID-F-L-T", "ID-F-L-xi", "ID-F-Lb-T", "ID-F-Lb-xi", "ID-G-k1", "ID-G-k2",
)
CHAIN = ("ID-B", "ID-C-L", "ID-C-Lb", "EL0-oracle", "Box-oracle")


def _rel(lhs, rhs, *terms):
    lhs, rhs = _a(lhs), _a(rhs)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    for t in terms:
        scale = np.maximum(scale, np.abs(_a(t)))
    diff = np.abs(lhs - rhs)
    return diff, diff / scale


@dataclass
class SamplePoint:
    field: AnalyticTestField
    u: np.ndarray
    ub: np.ndarray


def sample_points(
    profile: PlaneWaveProfile,
    n_points: int,
    rng: np.random.Generator,
    box: float = 3.0,
    fields: Sequence[AnalyticTestField] | None = None,
    g_min: float = 0.1,
) -> List[SamplePoint]:
    """n_points admissible points per catalog field (|p|,|q| <= 0.3, |Psi'| <= 0.5, g >= g_min)."""
    out = []
    if fields is None:
        fields = catalog(profile, rng)
    for fld in fields:
        us, ubs, have = [], [], 0
        tries = 0
        while have < n_points and tries < 50:
            tries += 1
            u = rng.uniform(-box, box, 4 * n_points)
            ub = rng.uniform(-box, box, 4 * n_points)
            j = fld.second_jet(u, ub)
            P, p, q = _a(j.psi1), _a(j.p), _a(j.q)
            ok = (np.abs(p) <= 0.3) & (np.abs(q) <= 0.3) & (np.abs(P) <= 0.5)
            ok &= determinant(P, p, q) >= g_min
            us.append(u[ok])
            ubs.append(ub[ok])
            have += int(ok.sum())
        u = np.concatenate(us)[:n_points]
        ub = np.concatenate(ubs)[:n_points]
        if u.size:
            out.append(SamplePoint(fld, u, ub))
    return out


def _identity_residuals(sp: SamplePoint, params: WeightParams) -> Dict[str, tuple]:
    fld, u, ub = sp.field, sp.u, sp.ub
    j = fld.second_jet(u, ub)
    ms = metric_scalars(j.first)
    P, p, q = _a(j.psi1), _a(j.p), _a(j.q)
    res = {}

    # geometry invariants
    g_uu, g_uub, g_ubub = ms.covariant
    guu, guub, gubub = _a(ms.guu), _a(ms.guub), _a(ms.gubub)
    e11 = guu * g_uu + guub * g_uub - 1.0
    e12 = guu * g_uub + guub * g_ubub
    e22 = guub * g_uub + gubub * g_ubub - 1.0
    err = np.maximum(np.abs(e11), np.maximum(np.abs(e12), np.abs(e22)))
    res["geom-inverse"] = (err, err)
    g, gr = _a(ms.g), _a(ms.gring)
    lhs_u = g * (guu * p + guub * q)
    rhs_u = (-1.0 + P * q) * q
    lhs_b = g * (guub * p + gubub * q)
    rhs_b = (-1.0 + P * q) * p - 2.0 * P * p * q
    d1, r1 = _rel(lhs_u, rhs_u)
    d2, r2 = _rel(lhs_b, rhs_b)
    res["geom-raised"] = (np.maximum(d1, d2), np.maximum(r1, r2))
    ring_form = (2.0 * (-1.0 + P * q) * p * q - 2.0 * P * p * q * q) / gr
    res["geom-determinant"] = _rel(g, gr * (1.0 + ring_form))

    el0 = _a(el_flux_residual(j))
    s0 = _a(s0_source(j))
    st0 = _a(tilde_s0_source(j))
    bx = _a(box_g(j))
    sg = np.sqrt(g)
    res["ID-A"] = _rel(st0 - s0, (gr - 1.0) / sg * el0, st0, s0)
    res["ID-B"] = _rel(sg * (bx - s0), gr * el0, sg * bx, sg * s0)
    res["EL0-oracle"] = _rel(el0, el_flux_oracle(fld, u, ub))
    res["Box-oracle"] = _rel(bx, box_oracle(fld, u, ub))

    # ID-C for both multipliers, psi = phi
    a, b = p, q
    T = energy_momentum(ms, (a, b))
    for mult in ("L", "Lb"):
        if mult == "L":
            lam = lambda_weight(ub, params)
            dlam = 2.0 * (1.0 + params.gamma) * ub * (1.0 + ub * ub) ** params.gamma
            xi = multipliers(ms, 1.0, lam).L
        else:
            lam = lambda_weight(u, params)
            dlam = 2.0 * (1.0 + params.gamma) * u * (1.0 + u * u) ** params.gamma
            xi = multipliers(ms, lam, 1.0).Lb
        xi_psi = _a(xi[0]) * a + _a(xi[1]) * b
        t_a, h_a = deformation_direct(j, (a, b), mult, lam, dlam, path="a")
        t_b, h_b = deformation_direct(j, (a, b), mult, lam, dlam, path="b")
        lhs = current_divergence_oracle(fld, u, ub, mult, params)
        rhs = bx * xi_psi + _a(t_a) - _a(h_a)
        res[f"ID-C-{mult}"] = _rel(lhs, rhs, bx * xi_psi, t_a, h_a)
        res[f"ID-F-{mult}-T"] = _rel(t_a, t_b)
        res[f"ID-F-{mult}-xi"] = _rel(h_a, h_b)

    # ID-E with an independent psi-jet
    rng = np.random.default_rng(u.size)
    pa, pb = rng.uniform(-1, 1, u.shape), rng.uniform(-1, 1, u.shape)
    for which, (al, be) in (("ub,ub", ("ub", "ub")), ("u,u", ("u", "u")), ("u,ub", ("u", "ub"))):
        res[f"ID-E-{which}"] = _rel(stress_bilinear(ms, (pa, pb), al, be), bilinear_expanded(ms, (pa, pb), which))
    lam = lambda_weight(ub, params)
    res["ID-E-Dt,L"] = _rel(energy_density(ms, (pa, pb), "-Dt,L", lam), energy_density_expanded(ms, (pa, pb), "-Dt,L", lam))
    lam = lambda_weight(u, params)
    res["ID-E-Dt,Lb"] = _rel(energy_density(ms, (pa, pb), "-Dt,Lb", lam), energy_density_expanded(ms, (pa, pb), "-Dt,Lb", lam))

    # ID-D on exact solutions only
    if fld.is_exact_solution:
        principal = _a(quasilinear_principal(j))
        res["ID-D-EL0"] = _rel(el0, 0.0)
        res["ID-D-S0"] = _rel(bx, s0)
        res["ID-D-R0"] = _rel(principal, r0_source(j))
        res["ID-D-R0tilde"] = _rel(principal, tilde_r0_source(j))

    # on-shell completion of the same jets: only pub is replaced
    js = on_shell_jet(j.psi1, j.psi2, j.p, j.q, j.puu, j.qubub)
    principal = _a(quasilinear_principal(js))
    res["ID-D-onshell-EL0"] = _rel(el_flux_residual(js), 0.0)
    res["ID-D-onshell-S0"] = _rel(box_g(js), s0_source(js))
    res["ID-D-onshell-R0"] = _rel(principal, r0_source(js, variant="corrected"))
    res["ID-D-onshell-R0tilde"] = _rel(principal, tilde_r0_source(js))

    for k in (1, 2):
        r = _a(higher_order_commute_residual(fld, k, u, ub))
        res[f"ID-G-k{k}"] = (r, r)
    return res


def run_identity_suite(
    fields: Sequence[AnalyticTestField] | None = None,
    n_points: int = 1000,
    thresholds: Dict[str, float] | None = None,
    profile: PlaneWaveProfile | None = None,
    params: WeightParams | None = None,
    seed: int = 0,
) -> ResidualReport:
    """Evaluate every identity on n_points admissible points per catalog field.

    Per-field evaluation errors become failed rows; the suite never aborts.
    """
    thr = dict(DEFAULT_THRESHOLDS)
    if thresholds:
        thr.update(thresholds)
    if profile is None:
        profile = PlaneWaveProfile("gaussian", 0.2, 2.0)
    if params is None:
        params = WeightParams()
    report = ResidualReport()
    if n_points <= 0:
        return report
    rng = np.random.default_rng(seed)
    pts = sample_points(profile, n_points, rng, fields=fields)
    agg: Dict[str, List] = {}
    errors: Dict[str, str] = {}
    for sp in pts:
        try:
            res = _identity_residuals(sp, params)
        except Exception as exc:  # recorded, not raised
            errors[f"field:{sp.field.kind}"] = f"{type(exc).__name__}: {exc}"
            continue
        for name, (d, r) in res.items():
            d, r = np.atleast_1d(_a(d)), np.atleast_1d(_a(r))
            n, ma, mr = agg.get(name, (0, 0.0, 0.0))
            agg[name] = (n + d.size, max(ma, float(np.max(d))), max(mr, float(np.max(r))))
    for name in ALGEBRAIC + CHAIN:
        if name not in agg:
            continue
        n, ma, mr = agg[name]
        t = thr["chain"] if name in CHAIN else thr["algebraic"]
        ok = bool(np.isfinite(mr) and mr <= t)
        report.rows.append(ResidualRow(name, n, ma, mr, t, ok))
    for name, msg in errors.items():
        report.rows.append(ResidualRow(name, 0, math.inf, math.inf, 0.0, False, msg))
    return report
