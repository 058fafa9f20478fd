import numpy as np
import pytest
from scipy import integrate

from stringlab.background import PlaneWaveProfile, psi_derivative, zero_profile
from stringlab.eqforms import catalog, sample_points
from stringlab.geometry import (
    PAIRINGS,
    DegenerateMetricError,
    FirstJet,
    NullCoords,
    SecondJet,
    deformation_direct,
    energy_density,
    energy_density_expanded,
    energy_momentum,
    frame_coeffs,
    from_null,
    metric_scalars,
    multipliers,
    stress_bilinear,
    to_null,
)

GAUSS = PlaneWaveProfile("gaussian", 0.2, 2.0)


def random_jets(n=1000, seed=1, scale=0.4):
    rng = np.random.default_rng(seed)
    P, p, q = (rng.uniform(-scale, scale, n) for _ in range(3))
    ms = metric_scalars(FirstJet(P, p, q))
    a, b = rng.normal(size=n), rng.normal(size=n)
    return ms, (a, b)


# chart ---------------------------------------------------------------------


def test_to_null_flat():
    nc = to_null(2.0, 1.0, zero_profile())
    assert (nc.u, nc.ub) == (1.0, 1.5)
    assert from_null(NullCoords(1.0, 1.5), zero_profile()) == (2.0, 1.0)


def test_origin_maps_to_origin():
    nc = to_null(0.0, 0.0, GAUSS)
    assert (nc.u, nc.ub) == (0.0, 0.0)
    assert from_null(nc, GAUSS) == (0.0, 0.0)


def test_to_null_gaussian_against_quadrature():
    h2, _ = integrate.quad(lambda s: psi_derivative(GAUSS, 1, s) ** 2, 0.0, 2.0, epsabs=1e-15)
    nc = to_null(3.0, 1.0, GAUSS)
    assert nc.u == 2.0
    assert nc.ub == pytest.approx(2.0 - h2 / 2, abs=1e-14)


def test_null_round_trip():
    rng = np.random.default_rng(7)
    u, ub = rng.uniform(-10, 10, 500), rng.uniform(-10, 10, 500)
    t, x = from_null(NullCoords(u, ub), GAUSS)
    back = to_null(t, x, GAUSS)
    assert np.allclose(back.u, u, atol=1e-12) and np.allclose(back.ub, ub, atol=1e-12)


def test_frame_is_dual():
    fc = frame_coeffs(np.array([0.0, 0.3, -0.7]))
    # du(d_u) = 1, du(d_ub) = 0, dub(d_u) = 0, dub(d_ub) = 1
    pair = lambda form, vec: form[0] * vec[0] + form[1] * vec[1]  # noqa: E731
    assert np.allclose(pair(fc.du, fc.d_u), 1.0)
    assert np.allclose(pair(fc.du, fc.d_ub), 0.0)
    assert np.allclose(pair(fc.dub, fc.d_u), 0.0)
    assert np.allclose(pair(fc.dub, fc.d_ub), 1.0)


# metric --------------------------------------------------------------------


def test_metric_flat_case():
    ms = metric_scalars(FirstJet(0.0, 0.0, 0.0))
    assert (ms.gring, ms.g, ms.guu, ms.guub, ms.gubub) == (1.0, 1.0, 0.0, -1.0, 0.0)


def test_metric_hand_inverse():
    ms = metric_scalars(FirstJet(0.0, 0.3, 0.2))
    assert ms.g == pytest.approx(0.88, rel=1e-15)
    assert ms.guu == pytest.approx(-0.04 / 0.88, rel=1e-14)
    assert ms.gubub == pytest.approx(-0.09 / 0.88, rel=1e-14)
    assert ms.guub == pytest.approx(-1 - 0.06 / 0.88, rel=1e-14)


def test_metric_with_background():
    ms = metric_scalars(FirstJet(0.5, 0.3, 0.2))
    assert ms.gring == pytest.approx(0.81, rel=1e-15)
    assert ms.g == pytest.approx(0.69, rel=1e-14)


def test_inverse_metric_inverts_covariant():
    ms, _ = random_jets()
    guu, guub, gubub = ms.covariant
    assert np.allclose(ms.guu * guu + ms.guub * guub, 1.0, atol=1e-13)
    assert np.allclose(ms.guu * guub + ms.guub * gubub, 0.0, atol=1e-13)
    assert np.allclose(ms.guub * guub + ms.gubub * gubub, 1.0, atol=1e-13)
    assert np.allclose(guu * gubub - guub ** 2, -ms.g, atol=1e-13)


def test_degenerate_metric_reports_index():
    with pytest.raises(DegenerateMetricError, match="index 1"):
        metric_scalars(FirstJet(np.zeros(3), np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.6, 0.0])))


# stress tensor ---------------------------------------------------------------


def test_zero_psi_jet_gives_zero_stress():
    ms, _ = random_jets(10)
    em = energy_momentum(ms, (np.zeros(10), np.zeros(10)))
    for c in (em.T_u_u, em.T_u_ub, em.T_ub_u, em.T_ub_ub, em.A):
        assert np.all(c == 0.0)


def test_flat_phi_components():
    ms = metric_scalars(FirstJet(0.4, 0.0, 0.0))
    em = energy_momentum(ms, (0.7, -0.2))
    assert em.A == 0.0 and em.T_u_u == 0.0


def test_stress_is_traceless():
    ms, psi = random_jets()
    em = energy_momentum(ms, psi)
    assert np.max(np.abs(em.T_u_u + em.T_ub_ub)) < 1e-13


def test_multipliers_flat():
    ms = metric_scalars(FirstJet(0.0, 0.0, 0.0))
    mv = multipliers(ms, 1.0, 1.0)
    assert mv.L == (0.0, 1.0) and mv.Lb == (1.0, 0.0)
    mv0 = multipliers(ms, 0.0, 0.0)
    assert all(c == 0.0 for c in mv0.L + mv0.Lb)


def test_multiplier_components_against_metric():
    ms, _ = random_jets()
    lam = np.linspace(1, 3, ms.g.size)
    mv = multipliers(ms, lam, 1.0)
    assert np.array_equal(mv.Lb[0], -lam * ms.guub)


def test_bilinear_against_index_contraction():
    ms, (a, b) = random_jets()
    ginv = np.array([[ms.guu, ms.guub], [ms.guub, ms.gubub]])
    gcov = np.array([[ms.covariant[0], ms.covariant[1]], [ms.covariant[1], ms.covariant[2]]])
    d = np.array([a, b])
    Q = np.einsum("ijn,in,jn->n", ginv, d, d)
    T = np.einsum("in,jn->ijn", d, d) - 0.5 * gcov * Q
    direct = np.einsum("ijn,in,jn->n", T, ginv[1], ginv[1])
    expected = (ms.guub * a) ** 2 + 0.5 * (ms.gubub * b) ** 2 + ms.gubub * ms.guub * a * b - 0.5 * ms.gubub * ms.guu * a * a
    assert np.allclose(direct, expected, rtol=1e-12, atol=1e-13)
    assert np.allclose(stress_bilinear(ms, (a, b), "ub", "ub"), expected, rtol=1e-12, atol=1e-13)


def test_dt_density_flat_point():
    ms = metric_scalars(FirstJet(0.0, 0.0, 0.0))
    assert energy_density(ms, (0.3, 0.8), "-Dt,L", 1.0) == pytest.approx(0.5 * 0.8 ** 2, rel=1e-15)
    assert energy_density_expanded(ms, (0.3, 0.8), "-Dt,L", 1.0) == pytest.approx(0.32, rel=1e-15)


@pytest.mark.parametrize("pairing", PAIRINGS)
def test_expanded_densities_agree(pairing):
    ms, psi = random_jets()
    lam = 1.7
    assert np.allclose(energy_density(ms, psi, pairing, lam), energy_density_expanded(ms, psi, pairing, lam), rtol=1e-11, atol=1e-12)


def test_densities_nonnegative_for_causal_multipliers():
    # g^{uu} <= 0 always; Dub is causal only where g^{ub ub} <= 0
    ms, psi = random_jets(scale=0.3)
    causal = ms.gubub <= 0
    assert np.min(energy_density(ms, psi, "-Dt,L")) >= -1e-14
    assert np.min(energy_density(ms, psi, "-Du,L")) >= -1e-14
    for pairing in ("-Dt,Lb", "-Dub,Lb"):
        assert np.min(energy_density(ms, psi, pairing)[causal]) >= -1e-14


def test_unknown_pairing():
    ms, psi = random_jets(3)
    with pytest.raises(ValueError):
        energy_density(ms, psi, "nope")


# deformation -------------------------------------------------------------------


def test_deformation_flat_perturbation_vanishes():
    j = SecondJet(0.3, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0)
    for m in ("L", "Lb"):
        for path in ("a", "b"):
            t1, t2 = deformation_direct(j, (0.4, -0.6), m, 1.0, 0.0, path)
            assert abs(t1) < 1e-15 and abs(t2) < 1e-15


def test_deformation_zero_psi_jet():
    j = SecondJet(0.3, 0.1, 0.2, 0.1, 0.05, -0.03, 0.02)
    for m in ("L", "Lb"):
        t1, t2 = deformation_direct(j, (0.0, 0.0), m, 1.3, 0.2)
        assert t1 == 0.0 and t2 == 0.0


def test_deformation_paths_agree_on_catalog():
    rng = np.random.default_rng(3)
    for sp in sample_points(GAUSS, 200, rng, fields=catalog(GAUSS, rng)):
        j = sp.field.second_jet(sp.u, sp.ub)
        psi = (rng.normal(size=sp.u.shape), rng.normal(size=sp.u.shape))
        lam, dlam = 1.0 + sp.u ** 2, 2 * sp.u
        for m in ("L", "Lb"):
            a = np.array(deformation_direct(j, psi, m, lam, dlam, "a"))
            b = np.array(deformation_direct(j, psi, m, lam, dlam, "b"))
            scale = np.maximum(1.0, np.abs(a))
            assert np.max(np.abs(a - b) / scale) < 1e-10


def test_deformation_printed_closed_forms_differ():
    rng = np.random.default_rng(5)
    for sp in sample_points(GAUSS, 50, rng, fields=catalog(GAUSS, rng)):
        j = sp.field.second_jet(sp.u, sp.ub)
        psi = (rng.normal(size=sp.u.shape), rng.normal(size=sp.u.shape))
        a = np.array(deformation_direct(j, psi, "Lb", 1.0, 0.1, "a"))
        bp = np.array(deformation_direct(j, psi, "Lb", 1.0, 0.1, "b-printed"))
        if np.max(np.abs(a - bp)) > 1e-6:
            return
    pytest.fail("printed closed forms reproduced the direct path everywhere")
