"""Method-of-lines solver for the relativistic string (timelike minimal graph)
equation in 1+1 dimensions,

    (1 + w^2) phi_tt - 2 v w phi_tx - (1 - v^2) phi_xx = 0,  v = phi_t, w = phi_x,

evolved as the first-order system

    phi_t = v,   w_t = v_x,   v_t = (2 v w v_x + (1 - v^2) w_x) / (1 + w^2),

with central finite differences in x and the classic four-stage Runge-Kutta
integrator.  The evolved field is the total field Psi(t - x) + phi; the
perturbation and its null-frame jets are recovered in ``extract_jets``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Sequence

import numpy as np

from .background import PlaneWaveProfile, psi_derivative, psi_integral_sq, psi_value

log = logging.getLogger(__name__)

# central first-derivative stencils (offsets -h..h)
_STENCILS = {
    2: np.array([-0.5, 0.0, 0.5]),
    4: np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0,
}


class TimelikeViolation(RuntimeError):
    """D = 1 + w^2 - v^2 dropped below the floor."""

    def __init__(self, message, index=None, x=None, t=None, D=None):
        super().__init__(message)
        self.index, self.x, self.t, self.D = index, x, t, D


class CFLViolation(RuntimeError):
    """Requested step exceeds the stability bound."""


@dataclass(frozen=True)
class Grid:
    x0: float
    dx: float
    n: int
    t: float = 0.0

    def __post_init__(self):
        if self.n < 16:
            raise ValueError(f"grid needs n >= 16, got {self.n}")
        if not self.dx > 0:
            raise ValueError("dx must be positive")

    @classmethod
    def from_bounds(cls, x_min: float, x_max: float, n: int, t: float = 0.0):
        return cls(float(x_min), (float(x_max) - float(x_min)) / (n - 1), int(n), float(t))

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x0 + self.dx * (self.n - 1)

    def refined(self) -> "Grid":
        """Nested refinement: halve dx, keep the end points (n -> 2n - 1)."""
        return Grid(self.x0, 0.5 * self.dx, 2 * self.n - 1, self.t)


@dataclass(frozen=True)
class GridState:
    grid: Grid
    phi: np.ndarray
    v: np.ndarray
    w: np.ndarray

    @property
    def t(self) -> float:
        return self.grid.t

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def D(self) -> np.ndarray:
        return 1.0 + self.w ** 2 - self.v ** 2

    def at_time(self, t: float, phi, v, w) -> "GridState":
        return GridState(replace(self.grid, t=float(t)), phi, v, w)


@dataclass(frozen=True)
class SolverConfig:
    fd_order: int = 4
    cfl: float = 0.4
    t_end: float = 10.0
    snapshot_stride: int = 10
    D_floor: float = 1e-3
    boundary: str = "compact-support-pad"

    def __post_init__(self):
        if self.fd_order not in _STENCILS:
            raise ValueError(f"fd_order must be one of {sorted(_STENCILS)}")
        if not (0.0 < self.cfl < 1.0):
            raise ValueError("cfl must lie in (0,1)")
        if self.t_end < 0:
            raise ValueError("t_end must be non-negative")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        if self.boundary != "compact-support-pad":
            raise ValueError("only boundary='compact-support-pad' is supported")


def halo(fd_order: int) -> int:
    return fd_order // 2


def ddx(f: np.ndarray, dx: float, fd_order: int = 4) -> np.ndarray:
    """Central derivative; the ends are padded by edge replication."""
    st = _STENCILS[fd_order]
    h = len(st) // 2
    fp = np.pad(f, h, mode="edge")
    n = f.shape[0]
    out = np.zeros_like(f, dtype=float)
    # antisymmetric pairs: exact zero on constants
    for k in range(1, h + 1):
        out += st[h + k] * (fp[h + k:h + k + n] - fp[h - k:h - k + n])
    return out / dx


def _check_timelike(state: GridState, D_floor: float, D=None):
    if D is None:
        D = state.D()
    bad = ~(D >= D_floor)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise TimelikeViolation(
            f"timelike violation at t={state.t:.6g}, node {k} (x={state.x[k]:.6g}): "
            f"D={D[k]:.3e} < D_floor={D_floor:g}",
            index=k, x=float(state.x[k]), t=state.t, D=float(D[k]),
        )


def rhs(state: GridState, order: int = 4, D_floor: float = 1e-3):
    """(phi_t, v_t, w_t) for the string equation."""
    v, w = state.v, state.w
    D = 1.0 + w * w - v * v
    _check_timelike(state, D_floor, D)
    vx = ddx(v, state.grid.dx, order)
    wx = ddx(w, state.grid.dx, order)
    return v.copy(), v_tt_free(v, w, vx, wx), vx


def v_tt_free(v, w, vx, wx):
    """v_t from the equation given spatial derivatives (no FD inside).

    Written as w_x + (2 v w v_x - (v^2 + w^2) w_x) / (1 + w^2): for a left
    mover (v = -w) the bracket cancels exactly in floating point, so plane
    waves keep v + w = 0 bit for bit.
    """
    return wx + (2.0 * v * w * vx - (v * v + w * w) * wx) / (1.0 + w * w)


def characteristic_speeds(v, w):
    D = 1.0 + w * w - v * v
    s = np.sqrt(np.maximum(D, 0.0))
    return (v * w + s) / (1.0 + w * w), (v * w - s) / (1.0 + w * w)


@dataclass
class RunLog:
    dt: float
    n_steps: int
    min_D: float
    max_speed: float
    notes: List[str] = field(default_factory=list)


def evolve(initial: GridState, cfg: SolverConfig, dt: float | None = None, log_out: RunLog | None = None) -> List[GridState]:
    """RK4 evolution to cfg.t_end; returns snapshots every snapshot_stride steps
    (the initial and final states are always included)."""
    dx = initial.grid.dx
    dt_max = cfg.cfl * dx
    if dt is None:
        dt = dt_max
    if dt > dt_max * (1.0 + 1e-12):
        log.warning("dt=%g exceeds cfl*dx=%g; reduced", dt, dt_max)
        dt = dt_max
    n_steps = int(math.ceil(cfg.t_end / dt - 1e-9)) if cfg.t_end > 0 else 0
    if n_steps:
        dt = cfg.t_end / n_steps  # adjusted down so that t_end is hit exactly
    _check_timelike(initial, cfg.D_floor)
    order, Df = cfg.fd_order, cfg.D_floor
    phi, v, w = initial.phi.astype(float), initial.v.astype(float), initial.w.astype(float)
    t0 = initial.t
    snaps = [initial.at_time(t0, phi.copy(), v.copy(), w.copy())]
    min_D = float(np.min(initial.D()))
    max_speed = 0.0
    g = initial.grid

    def f(p_, v_, w_, t_):
        return rhs(GridState(replace(g, t=t_), p_, v_, w_), order, Df)

    for k in range(n_steps):
        t = t0 + k * dt
        k1 = f(phi, v, w, t)
        k2 = f(phi + 0.5 * dt * k1[0], v + 0.5 * dt * k1[1], w + 0.5 * dt * k1[2], t + 0.5 * dt)
        k3 = f(phi + 0.5 * dt * k2[0], v + 0.5 * dt * k2[1], w + 0.5 * dt * k2[2], t + 0.5 * dt)
        k4 = f(phi + dt * k3[0], v + dt * k3[1], w + dt * k3[2], t + dt)
        phi = phi + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        v = v + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        w = w + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        D = 1.0 + w * w - v * v
        st = GridState(replace(g, t=t0 + (k + 1) * dt), phi, v, w)
        _check_timelike(st, Df, D)
        min_D = min(min_D, float(np.min(D)))
        lp, lm = characteristic_speeds(v, w)
        sp = float(max(np.max(np.abs(lp)), np.max(np.abs(lm))))
        if sp > 1.0 + 1e-12:
            raise CFLViolation(f"characteristic speed {sp} exceeds 1 at t={st.t}")
        max_speed = max(max_speed, sp)
        if (k + 1) % cfg.snapshot_stride == 0 or k + 1 == n_steps:
            snaps.append(st.at_time(st.t, phi.copy(), v.copy(), w.copy()))
    if log_out is not None:
        log_out.dt, log_out.n_steps, log_out.min_D, log_out.max_speed = dt, n_steps, min_D, max_speed
    return snaps


def flux_form_residual(snaps: Sequence[GridState], fd_order: int = 4) -> np.ndarray:
    """d_t(v/sqrt D) - d_x(w/sqrt D) at the interior snapshots.

    Time derivative by the 5-point (or 3-point) central formula across
    equally spaced snapshots.  Returns an array (n_snap - 2h, n).
    """
    h = halo(fd_order)
    if len(snaps) < 2 * h + 1:
        raise ValueError("not enough snapshots for the time stencil")
    dts = np.diff([s.t for s in snaps])
    if np.ptp(dts) > 1e-9 * max(1.0, dts[0]):
        snaps = snaps[:-1] if np.ptp(dts[:-1]) <= 1e-9 * max(1.0, dts[0]) else snaps
        dts = np.diff([s.t for s in snaps])
    dT = float(dts[0])
    st = _STENCILS[fd_order]
    A = np.array([s.v / np.sqrt(s.D()) for s in snaps])
    B = [ddx(s.w / np.sqrt(s.D()), s.grid.dx, fd_order) for s in snaps]
    out = []
    for i in range(h, len(snaps) - h):
        dt_a = sum(c * A[i - h + k] for k, c in enumerate(st)) / dT
        out.append(dt_a - B[i])
    return np.array(out)


# ---------------------------------------------------------------------------
# jets of the perturbation


@dataclass
class JetField:
    """Null-frame jets of phi_pert on one slice; ``jets[(i, j)]`` is
    d_u^i d_ub^j phi_pert.  ``valid`` masks the FD halo for order-2 jets."""

    t: float
    x: np.ndarray
    u: np.ndarray
    ub: np.ndarray
    psi1: np.ndarray
    psi2: np.ndarray
    psi3: np.ndarray
    jets: Dict[tuple, np.ndarray]
    valid: np.ndarray
    K: int
    profile: PlaneWaveProfile | None = None

    def __getitem__(self, key):
        if key not in self.jets:
            raise KeyError(f"jet {key} unavailable (K={self.K})")
        return self.jets[key]

    def second_jet(self, mask=None):
        from .geometry import SecondJet

        if self.K < 2:
            raise ValueError("second jets need K = 2")
        m = slice(None) if mask is None else mask
        return SecondJet(
            self.psi1[m], self.psi2[m], self.jets[(1, 0)][m], self.jets[(0, 1)][m],
            self.jets[(2, 0)][m], self.jets[(1, 1)][m], self.jets[(0, 2)][m],
        )


def extract_jets(snapshot: GridState, profile: PlaneWaveProfile, K: int = 2, fd_order: int = 4) -> JetField:
    if K not in (0, 1, 2):
        raise ValueError("derivative order unavailable: K must be <= 2")
    t, x = snapshot.t, snapshot.x
    u = t - x
    ub = 0.5 * (t + x) - 0.5 * np.asarray(psi_integral_sq(profile, u))
    P = np.asarray(psi_derivative(profile, 1, u)) * np.ones_like(x)
    P2 = np.asarray(psi_derivative(profile, 2, u)) * np.ones_like(x)
    P3 = np.asarray(psi_derivative(profile, 3, u)) * np.ones_like(x)
    v, w = snapshot.v, snapshot.w
    vp = v - P
    wp = w + P
    c1 = 0.5 * (P * P + 1.0)
    c2 = 0.5 * (P * P - 1.0)
    jets = {(0, 0): snapshot.phi - np.asarray(psi_value(profile, u))}
    valid = np.ones(x.shape, dtype=bool)
    if K >= 1:
        jets[(0, 1)] = vp + wp
        jets[(1, 0)] = c1 * vp + c2 * wp
    if K >= 2:
        dx = snapshot.grid.dx
        vx = ddx(v, dx, fd_order)
        wx = ddx(w, dx, fd_order)
        vt = v_tt_free(v, w, vx, wx)
        wt = vx
        # P depends on t - x: d_t P = Psi'', d_x P = -Psi''
        vp_t, vp_x = vt - P2, vx + P2
        wp_t, wp_x = wt + P2, wx - P2
        q_t, q_x = vp_t + wp_t, vp_x + wp_x
        dc = P * P2
        p_t = dc * vp + c1 * vp_t + dc * wp + c2 * wp_t
        p_x = -dc * vp + c1 * vp_x - dc * wp + c2 * wp_x
        jets[(0, 2)] = q_t + q_x
        jets[(1, 1)] = p_t + p_x
        jets[(2, 0)] = c1 * p_t + c2 * p_x
        h = halo(fd_order)
        valid[:h] = False
        valid[-h:] = False
    return JetField(float(t), x, u, ub, P, P2, P3, jets, valid, K, profile)


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceResult:
    """Observed orders per monitored quantity; ``None`` orders mean the
    errors are at rounding level ("exact")."""

    dx: List[float]
    errors: Dict[str, List[float]]
    orders: Dict[str, List[float | None]]
    flags: Dict[str, str]

    def min_order(self, name: str) -> float | None:
        vals = [o for o in self.orders[name] if o is not None]
        return min(vals) if vals else None


def observed_orders(errors: Sequence[float], floor: float = 1e-13) -> List[float | None]:
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a <= floor or b <= floor:
            out.append(None)
        else:
            out.append(math.log2(a / b))
    return out


def convergence_study(
    make_state: Callable[[Grid], GridState],
    grid: Grid,
    cfg: SolverConfig,
    refinements: int = 3,
    window: tuple | None = None,
    extra: Dict[str, Callable[[List[GridState]], float]] | None = None,
) -> ConvergenceResult:
    """Self-convergence under nested 2x refinement (dx and dt halved together).

    Solution error on level k is max |phi_k - phi_{k+1}| (and likewise v, w)
    on the coarse nodes inside ``window`` at t_end; ``extra`` maps names to
    functionals of the snapshot list whose successive differences are used.
    """
    if refinements < 2:
        raise ValueError("need at least 3 grids (refinements >= 2)")
    grids = [grid]
    for _ in range(refinements):
        grids.append(grids[-1].refined())
    finals, extras, resid = [], {k: [] for k in (extra or {})}, []
    base_dt = cfg.cfl * grid.dx
    for lvl, g in enumerate(grids):
        snaps = evolve(make_state(g), cfg, dt=base_dt / 2 ** lvl)
        finals.append(snaps[-1])
        try:
            r = flux_form_residual(snaps, cfg.fd_order)
            h = 3 * halo(cfg.fd_order)
            xm = g.x
            lo, hi = window if window else (xm[0], xm[-1])
            sel = (xm >= lo) & (xm <= hi)
            sel[:h] = False
            sel[-h:] = False
            resid.append(float(np.max(np.abs(r[:, sel]))))
        except ValueError:
            resid.append(float("nan"))
        for k, fn in (extra or {}).items():
            extras[k].append(float(fn(snaps)))
    errs = {"phi": [], "v": [], "w": []}
    for a, b in zip(finals[:-1], finals[1:]):
        xa = a.x
        lo, hi = window if window else (xa[0], xa[-1])
        sel = (xa >= lo) & (xa <= hi)
        for name in errs:
            fa, fb = getattr(a, name), getattr(b, name)[::2]
            errs[name].append(float(np.max(np.abs(fa[sel] - fb[sel]))))
    errors = dict(errs)
    errors["flux_residual"] = resid
    for k, vals in extras.items():
        errors[k] = [abs(vals[i] - vals[i + 1]) for i in range(len(vals) - 1)]
    orders = {k: observed_orders(v) for k, v in errors.items()}
    flags = {}
    for k, o in orders.items():
        vals = [x for x in o if x is not None]
        if not vals:
            flags[k] = "exact"
        elif min(vals) < 2.0:
            flags[k] = "degraded"
        else:
            flags[k] = "ok"
    return ConvergenceResult([g.dx for g in grids], errors, orders, flags)
