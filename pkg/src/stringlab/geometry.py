"""Null chart adapted to the plane wave, induced-metric algebra, stress tensor
and the weighted multipliers.

Conventions.  u = t - x and ub = (t + x)/2 - H2(u)/2.  A first jet of the
perturbation is (P, p, q) = (Psi'(u), d_u phi, d_ub phi); a second jet adds
Psi'' and the three second derivatives.  In these coordinates the induced
metric of the graph is

    g_uu = 2 P p + p^2,  g_uub = -1 + P q + p q,  g_ubub = q^2,

with |det| = g = 1 - 2pq - 2Pq + (Pq)^2.  The truncated metric (drop dphi^2)
has determinant gring = (1 - Pq)^2.  Every function accepts scalars or numpy
arrays (broadcast elementwise).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .background import PlaneWaveProfile, psi_integral_sq

G_FLOOR = 1e-6

PAIRINGS = ("-Du,L", "-Dub,Lb", "-Dt,L", "-Dt,Lb")
MULTIPLIERS = ("L", "Lb")


class DegenerateMetricError(ValueError):
    """The induced metric lost the timelike condition (g <= g_floor)."""


def _arr(x):
    return np.asarray(x, dtype=float)


def _out(x):
    x = np.asarray(x, dtype=float)
    return x if x.ndim else float(x)


# ---------------------------------------------------------------------------
# chart


@dataclass(frozen=True)
class NullCoords:
    u: object
    ub: object


def to_null(t, x, profile: PlaneWaveProfile) -> NullCoords:
    t, x = _arr(t), _arr(x)
    u = t - x
    ub = 0.5 * (t + x) - 0.5 * _arr(psi_integral_sq(profile, u))
    return NullCoords(_out(u), _out(ub))


def from_null(nc: NullCoords, profile: PlaneWaveProfile):
    u, ub = _arr(nc.u), _arr(nc.ub)
    s = ub + 0.5 * _arr(psi_integral_sq(profile, u))
    return _out(s + 0.5 * u), _out(s - 0.5 * u)


@dataclass(frozen=True)
class FrameCoeffs:
    """d_u, d_ub in the (d_t, d_x) basis and du, dub in the (dt, dx) basis."""

    d_u: tuple
    d_ub: tuple
    du: tuple
    dub: tuple

    @property
    def jacobian_det(self):
        # d(u, ub)/d(t, x)
        return _out(_arr(self.du[0]) * _arr(self.dub[1]) - _arr(self.du[1]) * _arr(self.dub[0]))


def frame_coeffs(psi1) -> FrameCoeffs:
    P2 = _arr(psi1) ** 2
    return FrameCoeffs(
        d_u=(_out(0.5 * (P2 + 1.0)), _out(0.5 * (P2 - 1.0))),
        d_ub=(1.0, 1.0),
        du=(1.0, -1.0),
        dub=(_out(0.5 * (1.0 - P2)), _out(0.5 * (1.0 + P2))),
    )


# ---------------------------------------------------------------------------
# jets


@dataclass(frozen=True)
class FirstJet:
    psi1: object
    p: object
    q: object


@dataclass(frozen=True)
class SecondJet:
    psi1: object
    psi2: object
    p: object
    q: object
    puu: object
    pub: object
    qubub: object

    @property
    def first(self) -> FirstJet:
        return FirstJet(self.psi1, self.p, self.q)

    def take(self, mask):
        return SecondJet(*(np.asarray(getattr(self, f.name))[mask] for f in fields(self)))


def zero_second_jet(psi1=0.0, psi2=0.0) -> SecondJet:
    return SecondJet(psi1, psi2, 0.0, 0.0, 0.0, 0.0, 0.0)


def determinant(psi1, p, q):
    P, p, q = _arr(psi1), _arr(p), _arr(q)
    return 1.0 - 2.0 * p * q - 2.0 * P * q + (P * q) ** 2


# ---------------------------------------------------------------------------
# metric


@dataclass(frozen=True)
class MetricScalars:
    psi1: object
    p: object
    q: object
    gring: object
    g: object
    guu: object
    guub: object
    gubub: object
    rU: object
    rUb: object

    @property
    def sqrt_g(self):
        return _out(np.sqrt(_arr(self.g)))

    @property
    def gring_guub_trunc(self):
        """gring * gring^{u ub} = -1 + P q."""
        return _out(-1.0 + _arr(self.psi1) * _arr(self.q))

    @property
    def gring_gubub_trunc(self):
        """gring * gring^{ub ub} = -2 P p."""
        return _out(-2.0 * _arr(self.psi1) * _arr(self.p))

    @property
    def covariant(self):
        """(g_uu, g_uub, g_ubub) of the induced metric."""
        P, p, q = _arr(self.psi1), _arr(self.p), _arr(self.q)
        return _out(2.0 * P * p + p * p), _out(-1.0 + P * q + p * q), _out(q * q)

    @property
    def gring_abs_gubub(self):
        """gring |g^{ub ub}| = gring |(2P + p) p| / g."""
        return _out(_arr(self.gring) * np.abs(_arr(self.gubub)))

    @property
    def neg_gring_guu(self):
        """-gring g^{uu} = rU^2 / g."""
        return _out(_arr(self.rU) ** 2 / _arr(self.g))


def metric_scalars(jet: FirstJet, g_floor: float = G_FLOOR) -> MetricScalars:
    P, p, q = _arr(jet.psi1), _arr(jet.p), _arr(jet.q)
    P, p, q = np.broadcast_arrays(P, p, q)
    g = determinant(P, p, q)
    if np.any(~(g > g_floor)):
        k = int(np.argmin(np.where(np.isnan(g), -np.inf, g))) if g.ndim else 0
        gv = g.ravel()[k] if g.ndim else float(g)
        raise DegenerateMetricError(
            f"degenerate metric: g = {gv:.3e} <= {g_floor:g} at index {k} "
            f"(Psi'={P.ravel()[k] if P.ndim else float(P):.4g}, "
            f"p={p.ravel()[k] if p.ndim else float(p):.4g}, q={q.ravel()[k] if q.ndim else float(q):.4g})"
        )
    Pq = P * q
    gring = (1.0 - Pq) ** 2
    rU = -q + P * q * q
    rUb = -p - P * p * q
    h = 1.0 / (gring * g)
    guu = -h * rU * rU
    guub = (-1.0 + Pq) / gring - h * rU * rUb
    gubub = -2.0 * P * p / gring - h * rUb * rUb
    return MetricScalars(
        _out(P), _out(p), _out(q), _out(gring), _out(g),
        _out(guu), _out(guub), _out(gubub), _out(rU), _out(rUb),
    )


# ---------------------------------------------------------------------------
# stress tensor


@dataclass(frozen=True)
class EnergyMomentum:
    """Mixed components T^alpha_beta: ``T_u_ub`` is T^u_{ub}."""

    T_u_u: object
    T_u_ub: object
    T_ub_u: object
    T_ub_ub: object
    A: object


def _raise(ms, a, b):
    a, b = _arr(a), _arr(b)
    Du = _arr(ms.guu) * a + _arr(ms.guub) * b
    Dub = _arr(ms.guub) * a + _arr(ms.gubub) * b
    return Du, Dub


def _quad(ms, a, b):
    a, b = _arr(a), _arr(b)
    return _arr(ms.guu) * a * a + 2.0 * _arr(ms.guub) * a * b + _arr(ms.gubub) * b * b


def energy_momentum(ms: MetricScalars, psi_jet) -> EnergyMomentum:
    a, b = _arr(psi_jet[0]), _arr(psi_jet[1])
    Du, Dub = _raise(ms, a, b)
    half_Q = 0.5 * _quad(ms, a, b)
    A = 0.5 * (_arr(ms.guu) * a * a - _arr(ms.gubub) * b * b)
    return EnergyMomentum(
        _out(Du * a - half_Q), _out(Du * b), _out(Dub * a), _out(Dub * b - half_Q), _out(A)
    )


def stress_bilinear(ms: MetricScalars, psi_jet, alpha: str, beta: str):
    """T(D alpha, D beta) = T_{mu nu} g^{alpha mu} g^{beta nu} for alpha, beta in {u, ub}."""
    a, b = psi_jet
    Du, Dub = _raise(ms, a, b)
    grad = {"u": Du, "ub": Dub}
    ginv = {("u", "u"): ms.guu, ("u", "ub"): ms.guub, ("ub", "u"): ms.guub, ("ub", "ub"): ms.gubub}
    return _out(grad[alpha] * grad[beta] - 0.5 * _arr(ginv[(alpha, beta)]) * _quad(ms, a, b))


@dataclass(frozen=True)
class MultiplierVec:
    """Components in the (d_u, d_ub) basis."""

    L: tuple
    Lb: tuple


def multipliers(ms: MetricScalars, lam_u, lamb_ub) -> MultiplierVec:
    """L~ = -Lambdab(ub) Du and Lb~ = -Lambda(u) Dub."""
    lam, lamb = _arr(lam_u), _arr(lamb_ub)
    L = (_out(-lamb * _arr(ms.guu)), _out(-lamb * _arr(ms.guub)))
    Lb = (_out(-lam * _arr(ms.guub)), _out(-lam * _arr(ms.gubub)))
    return MultiplierVec(L, Lb)


def energy_density(ms: MetricScalars, psi_jet, pairing: str, lam=1.0):
    """T(-Df, xi) for the four pairings used by the energy identities.

    ``lam`` is Lambdab(ub) for pairings with L~ and Lambda(u) for Lb~.
    """
    lam = _arr(lam)
    if pairing == "-Du,L":
        return _out(lam * stress_bilinear(ms, psi_jet, "u", "u"))
    if pairing == "-Dub,Lb":
        return _out(lam * stress_bilinear(ms, psi_jet, "ub", "ub"))
    c = 0.5 * (1.0 + _arr(ms.psi1) ** 2)
    if pairing == "-Dt,L":
        return _out(lam * (c * stress_bilinear(ms, psi_jet, "u", "u") + stress_bilinear(ms, psi_jet, "ub", "u")))
    if pairing == "-Dt,Lb":
        return _out(lam * (c * stress_bilinear(ms, psi_jet, "u", "ub") + stress_bilinear(ms, psi_jet, "ub", "ub")))
    raise ValueError(f"unknown pairing {pairing!r}; expected one of {PAIRINGS}")


def bilinear_expanded(ms: MetricScalars, psi_jet, which: str):
    """Frame expansions of T(Dub,Dub), T(Du,Du), T(Du,Dub) term by term."""
    a, b = _arr(psi_jet[0]), _arr(psi_jet[1])
    guu, guub, gubub = _arr(ms.guu), _arr(ms.guub), _arr(ms.gubub)
    if which == "ub,ub":
        v = (guub * a) ** 2 + 0.5 * (gubub * b) ** 2 + gubub * guub * a * b - 0.5 * gubub * guu * a * a
    elif which == "u,u":
        v = (guub * b) ** 2 + 0.5 * (guu * a) ** 2 + guu * guub * a * b - 0.5 * guu * gubub * b * b
    elif which == "u,ub":
        v = 0.5 * guub * guu * a * a + 0.5 * guub * gubub * b * b + guu * gubub * a * b
    else:
        raise ValueError(which)
    return _out(v)


def energy_density_expanded(ms: MetricScalars, psi_jet, pairing: str, lam=1.0):
    """The time-slice densities written as sign-organised sums.

    For T(-Dt, L~) the coefficient of (d_ub psi)^2 is arranged so that its
    leading part is the square (P + p)^2 / 2; for T(-Dt, Lb~) the leading
    terms are Lambda (g^{ub u} a)^2 and Lambda (g^{ub ub} b)^2 / 2.
    """
    a, b = _arr(psi_jet[0]), _arr(psi_jet[1])
    lam = _arr(lam)
    P, p = _arr(ms.psi1), _arr(ms.p)
    gring, g = _arr(ms.gring), _arr(ms.g)
    guu, guub, gubub = _arr(ms.guu), _arr(ms.guub), _arr(ms.gubub)
    up = _arr(ms.rU) / gring  # raised gradient d^u phi w.r.t. the truncated metric
    ubp = _arr(ms.rUb) / gring
    c = 1.0 + P * P
    if pairing == "-Du,L":
        return _out(lam * bilinear_expanded(ms, psi_jet, "u,u"))
    if pairing == "-Dub,Lb":
        return _out(lam * bilinear_expanded(ms, psi_jet, "ub,ub"))
    if pairing == "-Dt,L":
        v = (
            0.5 * (guub * b) ** 2
            + 0.25 * c * (guu * a) ** 2
            - 0.5 * (gring / g) * guub * up * up * a * a
            + (0.5 * P * P * guub * guub - 0.5 * (gring / g) * guub * ubp * ubp - guub * P * p / gring) * b * b
            + 0.5 * c * (guu * guub * a * b - 0.5 * guu * gubub * b * b)
            + guu * gubub * a * b
        )
        return _out(lam * v)
    if pairing == "-Dt,Lb":
        v = (
            (guub * a) ** 2
            + 0.25 * c * guub * guu * a * a
            + 0.5 * (gubub * b) ** 2
            - 0.25 * c * (gring / g) * guub * ubp * ubp * b * b
            - 0.5 * c / gring * guub * P * p * b * b
            + 0.5 * c * guu * gubub * a * b
            + gubub * guub * a * b
            - 0.5 * gubub * guu * a * a
        )
        return _out(lam * v)
    raise ValueError(f"unknown pairing {pairing!r}")


def dt_L_square_coefficient(ms: MetricScalars):
    """Coefficient of (d_ub psi)^2 in T(-Dt, L~)/Lambdab beyond (g^{u ub})^2/2.

    Equals (P + p)^2/2 up to terms carrying d_ub phi; both are returned.
    """
    P, p = _arr(ms.psi1), _arr(ms.p)
    gring, g, guub = _arr(ms.gring), _arr(ms.g), _arr(ms.guub)
    ubp = _arr(ms.rUb) / gring
    exact = 0.5 * P * P * guub * guub - 0.5 * (gring / g) * guub * ubp * ubp - guub * P * p / gring
    return _out(exact), _out(0.5 * (P + p) ** 2)


# ---------------------------------------------------------------------------
# derivatives of first-jet data along the null directions


class _Lin:
    """Value with its (d_u, d_ub) derivatives; product and quotient rules only."""

    __slots__ = ("v", "du", "dub")

    def __init__(self, v, du, dub):
        self.v, self.du, self.dub = v, du, dub

    def __add__(self, o):
        if isinstance(o, _Lin):
            return _Lin(self.v + o.v, self.du + o.du, self.dub + o.dub)
        return _Lin(self.v + o, self.du, self.dub)

    __radd__ = __add__

    def __neg__(self):
        return _Lin(-self.v, -self.du, -self.dub)

    def __sub__(self, o):
        return self + (-o)

    def __rsub__(self, o):
        return (-self) + o

    def __mul__(self, o):
        if isinstance(o, _Lin):
            return _Lin(self.v * o.v, self.du * o.v + self.v * o.du, self.dub * o.v + self.v * o.dub)
        return _Lin(self.v * o, self.du * o, self.dub * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, _Lin):
            inv = _Lin(1.0 / o.v, -o.du / o.v ** 2, -o.dub / o.v ** 2)
            return self * inv
        return _Lin(self.v / o, self.du / o, self.dub / o)

    def __rtruediv__(self, o):
        return _Lin(o / self.v, -o * self.du / self.v ** 2, -o * self.dub / self.v ** 2)

    def along(self, cu, cub):
        """Derivative along the vector cu d_u + cub d_ub."""
        return cu * self.du + cub * self.dub


def _lin_jet(j: SecondJet):
    P = _Lin(_arr(j.psi1), _arr(j.psi2), 0.0 * _arr(j.psi1))
    p = _Lin(_arr(j.p), _arr(j.puu), _arr(j.pub))
    q = _Lin(_arr(j.q), _arr(j.pub), _arr(j.qubub))
    return P, p, q


def metric_derivatives(j: SecondJet):
    """(d_u, d_ub) of g, g^{uu}, g^{u ub}, g^{ub ub} by the quotient rule.

    Returns a dict name -> (value, d_u, d_ub).  This is the direct route:
    the inverse is written as the cofactor matrix over -g.
    """
    P, p, q = _arr(j.psi1), _arr(j.p), _arr(j.q)
    P2, puu, pub, qbb = _arr(j.psi2), _arr(j.puu), _arr(j.pub), _arr(j.qubub)
    g = determinant(P, p, q)
    # partials of g w.r.t. (P, p, q)
    gP = -2.0 * q + 2.0 * P * q * q
    gp = -2.0 * q
    gq = -2.0 * p - 2.0 * P + 2.0 * P * P * q
    g_u = gP * P2 + gp * puu + gq * pub
    g_ub = gp * pub + gq * qbb
    # cofactor numerators
    nuu, nuub, nbb = -q * q, -1.0 + P * q + p * q, -(2.0 * P * p + p * p)
    nuu_u, nuu_ub = -2.0 * q * pub, -2.0 * q * qbb
    nuub_u = P2 * q + P * pub + puu * q + p * pub
    nuub_ub = P * qbb + pub * q + p * qbb
    nbb_u = -(2.0 * (P2 * p + P * puu) + 2.0 * p * puu)
    nbb_ub = -(2.0 * P * pub + 2.0 * p * pub)

    def quot(n, n_u, n_ub):
        return n / g, n_u / g - n * g_u / g ** 2, n_ub / g - n * g_ub / g ** 2

    return {
        "g": (g, g_u, g_ub),
        "guu": quot(nuu, nuu_u, nuu_ub),
        "guub": quot(nuub, nuub_u, nuub_ub),
        "gubub": quot(nbb, nbb_u, nbb_ub),
    }


# ---------------------------------------------------------------------------
# deformation terms


def _check_jet(j, g_floor):
    return metric_scalars(j.first, g_floor)


def deformation_direct(
    j: SecondJet,
    psi_jet,
    multiplier: str,
    lam,
    dlam,
    path: str = "a",
    g_floor: float = G_FLOOR,
):
    """(T^alpha_beta d_alpha xi^beta, (1/(2 sqrt g)) xi(sqrt g g^{gamma rho}) d psi d psi).

    ``multiplier`` is "L" (xi = -Lambdab(ub) Du, pass Lambdab and its
    derivative at ub) or "Lb" (xi = -Lambda(u) Dub, pass Lambda, Lambda' at u).

    ``path="a"`` differentiates the assembled components directly,
    ``path="b"`` evaluates the closed forms organised around the truncated
    metric (with the corrections recorded in the project notes), and
    ``path="b-printed"`` evaluates those closed forms exactly as originally
    typeset, typos included, for comparison.
    """
    if multiplier not in MULTIPLIERS:
        raise ValueError(f"multiplier must be one of {MULTIPLIERS}")
    ms = _check_jet(j, g_floor)
    if path == "a":
        return _deform_a(j, ms, psi_jet, multiplier, _arr(lam), _arr(dlam))
    if path in ("b", "b-printed"):
        return _deform_b(j, ms, psi_jet, multiplier, _arr(lam), _arr(dlam), printed=(path == "b-printed"))
    raise ValueError(f"unknown path {path!r}")


def _deform_a(j, ms, psi_jet, multiplier, lam, dlam):
    a, b = _arr(psi_jet[0]), _arr(psi_jet[1])
    d = metric_derivatives(j)
    T = energy_momentum(ms, (a, b))
    Tm = {("u", "u"): T.T_u_u, ("u", "ub"): T.T_u_ub, ("ub", "u"): T.T_ub_u, ("ub", "ub"): T.T_ub_ub}
    if multiplier == "L":
        row = {"u": d["guu"], "ub": d["guub"]}  # g^{u beta}
        # xi^beta = -lam(ub) g^{u beta}
        dxi = {
            ("u", b_): -lam * row[b_][1] for b_ in ("u", "ub")
        }
        dxi.update({("ub", b_): -dlam * row[b_][0] - lam * row[b_][2] for b_ in ("u", "ub")})
        xi = (-lam * row["u"][0], -lam * row["ub"][0])
    else:
        row = {"u": d["guub"], "ub": d["gubub"]}  # g^{ub beta}
        dxi = {("u", b_): -dlam * row[b_][0] - lam * row[b_][1] for b_ in ("u", "ub")}
        dxi.update({("ub", b_): -lam * row[b_][2] for b_ in ("u", "ub")})
        xi = (-lam * row["u"][0], -lam * row["ub"][0])
    t_dxi = sum(_arr(Tm[(al, be)]) * dxi[(al, be)] for al in ("u", "ub") for be in ("u", "ub"))

    g, g_u, g_ub = d["g"]
    Q = _quad(ms, a, b)

    def dquad(k):
        return d["guu"][k] * a * a + 2.0 * d["guub"][k] * a * b + d["gubub"][k] * b * b

    along_u = g_u / (2.0 * g) * Q + dquad(1)
    along_ub = g_ub / (2.0 * g) * Q + dquad(2)
    half_term = 0.5 * (xi[0] * along_u + xi[1] * along_ub)
    return _out(t_dxi), _out(half_term)


def _deform_b(j, ms, psi_jet, multiplier, lam, dlam, printed=False):
    a, b = _arr(psi_jet[0]), _arr(psi_jet[1])
    P, p, q = _lin_jet(j)
    gring = (1.0 - P * q) * (1.0 - P * q)
    g = 1.0 - 2.0 * p * q - 2.0 * P * q + P * P * q * q
    rU = -1.0 * q + P * q * q
    rUb = -1.0 * p - P * p * q
    h = 1.0 / (gring * g)
    Pq, Pp = P * q, P * p

    gv, gringv = g.v, gring.v
    guu, guub, gubub = _arr(ms.guu), _arr(ms.guub), _arr(ms.gubub)
    A = 0.5 * (guu * a * a - gubub * b * b)
    Y = (guu * a + guub * b) * b  # g^{u mu} d_mu psi d_ub psi = T^u_ub
    Z = (guub * a + gubub * b) * a  # g^{ub mu} d_mu psi d_u psi = T^ub_u
    lead = -dlam * (0.5 * guub * (guu * a * a + gubub * b * b) + gubub * b * guu * a)
    Q2 = _arr(j.qubub)
    P0, p0, q0 = P.v, p.v, q.v

    if multiplier == "L":
        NUU, NBU = rU * rU, rUb * rU
        t_dxi = (
            lead
            + h.v * lam * (NUU.du - gv * P0 * Q2 - NBU.dub) * A
            + lam / gringv * Y * Pq.du
            + lam * h.v * Y * NBU.du
            + lam * h.v * Z * NUU.dub
            + lam * (h.du * NUU.v - h.dub * NBU.v) * A
            + lam * Y * h.du * NBU.v
            + lam * Z * h.dub * NUU.v
        )
        X = (guu, guub)  # xi = -lam * X
    else:
        NUB, NBB = rU * rUb, rUb * rUb
        cross = (P0 * p0 * q0 * _arr(j.pub) if printed else P0 * p0 * q0 * Q2) - p0 * Q2
        dPp_or_dPq = Pp.du if printed else Pq.du
        last = lam * h.v * Z * h.dub * NUB.v if printed else lam * Z * h.dub * NUB.v
        t_dxi = (
            lead
            + lam / gringv * (Pq.du - 2.0 * Pp.dub) * A
            + 4.0 * lam * P0 * P0 / gringv ** 2 * cross * A
            + lam * h.v * (NUB.du - NBB.dub) * A
            + lam / gringv * Z * P0 * Q2
            + 2.0 * lam / gringv * Y * Pp.du
            - 4.0 * lam / gringv ** 2 * Y * dPp_or_dPq * P0 * P0 * p0 * q0
            + 4.0 * lam / gringv ** 2 * Y * Pq.du * P0 * p0
            + lam * h.v * Y * NBB.du
            + lam * h.v * Z * NUB.dub
            + lam * (h.du * NUB.v - h.dub * NBB.v) * A
            + lam * Y * h.du * NBB.v
            + last
        )
        X = (guub, gubub)

    def Xd(f):
        return f.along(X[0], X[1])

    # full (1/sqrt g) xi(sqrt g g^{gamma rho}) d psi d psi, with xi = -lam X
    ring_form = 2.0 * (-1.0 + Pq.v) * a * b - 2.0 * Pp.v * b * b  # gring gring^{gamma rho} psi psi
    R2 = (rU.v * a + rUb.v * b) ** 2
    q2, p2, pq = q * q, p * p, p * q
    pq_cross = pq * Pq * Pq
    xi_term = (
        -lam / gringv * (2.0 * Xd(Pq) * a * b - 2.0 * Xd(Pp) * b * b)
        + lam / gringv * Xd(gring) * ring_form / gringv
        + lam * h.v * Xd(q2) * a * a
        + lam * h.v * Xd(p2) * b * b
        + lam * h.v * Xd(q2 * (-2.0 * Pq + Pq * Pq)) * a * a
        + lam * h.v * Xd(p2 * (2.0 * Pq + Pq * Pq)) * b * b
        + lam * h.v * Xd(g) * Pp.v * b * b
    )
    if printed:
        xi_term = xi_term + (
            2.0 * lam * h.v * Xd(pq) * Pq.v * a * b
            - 2.0 * lam * h.v * Xd(pq_cross) * Pq.v * a * b
            - lam * gringv / (2.0 * gv) ** 2 * Xd(g) * R2 / gringv ** 2
            - lam / gv * Xd(gring) * R2 / gringv ** 2
        )
    else:
        xi_term = xi_term + (
            lam * h.v * Xd(g) * (1.0 - Pq.v) * a * b
            + 2.0 * lam * h.v * Xd(pq) * a * b
            - 2.0 * lam * h.v * Xd(pq_cross) * a * b
            - lam * gringv / (2.0 * gv * gv) * Xd(g) * R2 / gringv ** 2
            - lam / gv * Xd(gring) * R2 / gringv ** 2
        )
    return _out(t_dxi), _out(0.5 * xi_term)
