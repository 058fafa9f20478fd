import numpy as np
import pytest

from stringlab.background import PlaneWaveProfile, psi_value, zero_profile
from stringlab.initdata import Seed, SeedProfiles, build_data, state_from_perturbation, to_grid_state
from stringlab.solver import (
    Grid,
    GridState,
    RunLog,
    SolverConfig,
    TimelikeViolation,
    characteristic_speeds,
    convergence_study,
    ddx,
    evolve,
    extract_jets,
    flux_form_residual,
    observed_orders,
    rhs,
)

GAUSS = PlaneWaveProfile("gaussian", 0.2, 2.0)


def linear_state(grid, a, b):
    x = grid.x
    return GridState(grid, a * grid.t + b * x, np.full_like(x, a), np.full_like(x, b))


@pytest.mark.parametrize("order,expected", [(2, 2.0), (4, 4.0)])
def test_ddx_order(order, expected):
    errs = []
    for n in (101, 201, 401):
        g = Grid.from_bounds(-3, 3, n)
        f = np.sin(g.x)
        interior = slice(order, -order)
        errs.append(np.max(np.abs(ddx(f, g.dx, order) - np.cos(g.x))[interior]))
    orders = observed_orders(errs)
    assert min(orders) == pytest.approx(expected, abs=0.15)


def test_ddx_exact_on_constants_with_padding():
    assert np.all(ddx(np.full(32, 2.5), 0.1, 4) == 0.0)


def test_static_linear_graph():
    st = linear_state(Grid.from_bounds(-5, 5, 64), 0.0, 0.7)
    _, vt, wt = rhs(st)
    assert np.all(vt == 0.0) and np.all(wt == 0.0)


def test_travelling_linear_graph():
    st = linear_state(Grid.from_bounds(-5, 5, 64), 0.6, 0.3)
    _, vt, _ = rhs(st)
    assert np.max(np.abs(vt)) < 1e-15
    snaps = evolve(st, SolverConfig(t_end=1.0, snapshot_stride=1000))
    assert np.allclose(snaps[-1].phi, 0.6 * 1.0 + 0.3 * st.x, atol=1e-13)


def test_null_graph_is_rejected():
    g = Grid.from_bounds(-5, 5, 64)
    with pytest.raises(TimelikeViolation) as info:
        evolve(linear_state(g, 1.0, 0.0), SolverConfig(t_end=1.0))
    assert info.value.index is not None and info.value.D == pytest.approx(0.0)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(fd_order=3)
    with pytest.raises(ValueError):
        SolverConfig(cfl=1.2)
    with pytest.raises(ValueError):
        SolverConfig(snapshot_stride=0)


def test_t_end_hit_exactly_and_log():
    st = linear_state(Grid.from_bounds(-5, 5, 101), 0.0, 0.0)
    log = RunLog(0.0, 0, 0.0, 0.0)
    snaps = evolve(st, SolverConfig(t_end=1.2345, snapshot_stride=7), log_out=log)
    assert snaps[-1].t == pytest.approx(1.2345, abs=1e-13)
    assert log.dt <= 0.4 * st.grid.dx
    assert log.n_steps * log.dt == pytest.approx(1.2345, rel=1e-13)


def test_zero_data_flat_stays_zero():
    g = Grid.from_bounds(-10, 10, 101)
    st = state_from_perturbation(g, zero_profile(), *(np.zeros(g.n),) * 3)
    snaps = evolve(st, SolverConfig(t_end=2.0))
    assert all(np.all(s.phi == 0) and np.all(s.v == 0) and np.all(s.w == 0) for s in snaps)


def test_plane_wave_tracks_background():
    errs = []
    for n in (401, 801, 1601):
        g = Grid.from_bounds(-40, 40, n)
        st = state_from_perturbation(g, GAUSS, *(np.zeros(g.n),) * 3)
        final = evolve(st, SolverConfig(t_end=10.0, snapshot_stride=10 ** 6))[-1]
        errs.append(np.max(np.abs(final.phi - psi_value(GAUSS, final.t - final.x))))
    assert errs[-1] < 1e-7
    assert min(observed_orders(errs)) > 3.5


def test_small_data_matches_dalembert():
    g = Grid.from_bounds(-20, 20, 1601)
    x, d = g.x, 1e-3
    F = d * np.exp(-x * x)
    G = d * x * np.exp(-x * x)
    st = state_from_perturbation(g, zero_profile(), F, -2 * x * F / 1.0, G)
    t = 4.0
    final = evolve(st, SolverConfig(t_end=t, snapshot_stride=10 ** 6))[-1]
    exact = 0.5 * d * (np.exp(-(x - t) ** 2) + np.exp(-(x + t) ** 2)) + 0.25 * d * (np.exp(-(x - t) ** 2) - np.exp(-(x + t) ** 2))
    assert np.max(np.abs(final.phi - exact)) < 5 * d ** 3 + 1e-9


def test_characteristic_speeds_bounded():
    rng = np.random.default_rng(0)
    v, w = rng.uniform(-0.9, 0.9, 1000), rng.uniform(-3, 3, 1000)
    ok = 1 + w * w - v * v > 0
    lp, lm = characteristic_speeds(v[ok], w[ok])
    assert np.all(np.abs(lp) <= 1 + 1e-15) and np.all(np.abs(lm) <= 1 + 1e-15)


def test_flux_form_residual_small_on_smooth_run():
    g = Grid.from_bounds(-30, 30, 1201)
    data = build_data(SeedProfiles(Seed(amplitude=0.5, width=1.5), Seed(amplitude=0.3, width=1.5), 0.5), GAUSS, g)
    snaps = evolve(to_grid_state(data, g), SolverConfig(t_end=2.0, snapshot_stride=5))
    r = flux_form_residual(snaps)
    assert np.max(np.abs(r[:, 20:-20])) < 1e-4


# jets ------------------------------------------------------------------------


def test_zero_perturbation_jets_vanish():
    g = Grid.from_bounds(-20, 20, 401)
    st = state_from_perturbation(g, GAUSS, *(np.zeros(g.n),) * 3)
    jets = extract_jets(st, GAUSS)
    for key in ((0, 0), (1, 0), (0, 1), (0, 2), (1, 1)):
        assert np.max(np.abs(jets[key][jets.valid])) < 1e-15, key
    # d_u p carries the finite-difference error of d_x Psi'
    assert np.max(np.abs(jets[(2, 0)][jets.valid])) < 1e-6


def test_initial_jets_reproduce_seeds():
    g = Grid.from_bounds(-30, 30, 601)
    seeds = SeedProfiles(Seed(amplitude=1.0, width=1.5), Seed(amplitude=0.3, width=2.0, center=1.0), 0.01)
    jets = extract_jets(to_grid_state(build_data(seeds, GAUSS, g), g), GAUSS)
    assert np.max(np.abs(jets[(0, 1)] - 0.01 * seeds.f(g.x))) < 1e-12
    assert np.max(np.abs(jets[(1, 0)] - seeds.fbar(g.x))) < 1e-12


def test_left_mover_is_transported():
    g = Grid.from_bounds(-40, 40, 1601)
    seeds = SeedProfiles(Seed("zero"), Seed(amplitude=0.3, width=1.5), 0.0)
    snaps = evolve(to_grid_state(build_data(seeds, GAUSS, g), g), SolverConfig(t_end=8.0, snapshot_stride=40))
    p0 = extract_jets(snaps[0], GAUSS, K=1)[(1, 0)]
    for s in snaps[1:]:
        j = extract_jets(s, GAUSS, K=1)
        assert np.max(np.abs(j[(0, 1)])) < 1e-13
        shift = int(round(s.t / g.dx))
        assert np.max(np.abs(j[(1, 0)][shift:] - p0[: g.n - shift])) < 1e-6


# convergence -----------------------------------------------------------------


def test_convergence_exact_linear_solution():
    g = Grid.from_bounds(-5, 5, 41)
    cr = convergence_study(lambda gr: linear_state(gr, 0.3, -0.2), g, SolverConfig(t_end=1.0, snapshot_stride=2), refinements=2)
    assert cr.flags["phi"] == "exact" and cr.min_order("phi") is None


def _seeded(kind):
    seeds = SeedProfiles(Seed(kind, 0.5, 1.5), Seed(kind, 0.3, 1.5), 0.5)
    return lambda gr: to_grid_state(build_data(seeds, GAUSS, gr), gr)


def test_convergence_smooth_order():
    g = Grid.from_bounds(-20, 20, 201)
    cfg = SolverConfig(t_end=4.0, snapshot_stride=4)
    cr = convergence_study(_seeded("gaussian"), g, cfg, refinements=3, window=(-16, 16))
    for k in ("phi", "v", "w"):
        assert cr.min_order(k) >= 3.5, (k, cr.orders[k])
    assert cr.flags["phi"] == "ok"


def test_convergence_kink_degrades():
    g = Grid.from_bounds(-20, 20, 201)
    cfg = SolverConfig(t_end=4.0, snapshot_stride=4)
    cr = convergence_study(_seeded("kink"), g, cfg, refinements=3, window=(-16, 16))
    assert cr.min_order("v") < 2.0
    assert cr.flags["v"] == "degraded"


def test_convergence_needs_three_grids():
    with pytest.raises(ValueError):
        convergence_study(_seeded("gaussian"), Grid.from_bounds(-5, 5, 41), SolverConfig(), refinements=1)
