import math

import numpy as np
import pytest

from stringlab.taylor import Taylor2


def at(u, ub, K=3):
    return Taylor2.variable(np.atleast_1d(u), "u", K), Taylor2.variable(np.atleast_1d(ub), "ub", K)


def test_product_rule_mixed():
    U, B = at(0.7, -0.4)
    f = (U * U) * B.sin()
    # d_u d_ub (u^2 sin ub) = 2u cos ub
    assert f.deriv(1, 1)[0] == pytest.approx(2 * 0.7 * math.cos(-0.4), rel=1e-15)
    assert f.deriv(2, 1)[0] == pytest.approx(2 * math.cos(-0.4), rel=1e-15)


def test_elementary_functions():
    U, B = at(0.3, 0.5)
    f = (U * 2.0 + B).exp()
    assert f.deriv(2, 1)[0] == pytest.approx(4 * math.exp(1.1), rel=1e-14)
    g = (U * U + 1.0).sqrt()
    assert g.deriv(1, 0)[0] == pytest.approx(0.3 / math.sqrt(1.09), rel=1e-14)
    h = 1.0 / (U + 2.0)
    assert h.deriv(3, 0)[0] == pytest.approx(-6 / 2.3 ** 4, rel=1e-13)
    c = B.cos()
    assert c.deriv(0, 2)[0] == pytest.approx(-math.cos(0.5), rel=1e-14)


def test_power_and_division_consistent():
    U, B = at(0.2, 0.9)
    f = (U + B + 1.0) ** 3
    g = (U + B + 1.0) * (U + B + 1.0) * (U + B + 1.0)
    assert np.allclose(f.c, g.c, rtol=1e-14)
    q = f / (U + B + 1.0)
    assert np.allclose(q.c, ((U + B + 1.0) ** 2).c, rtol=1e-13)


def test_d_u_shifts_and_truncates():
    U, B = at(1.5, 0.0)
    f = U ** 3
    assert f.d_u().K == 2
    assert f.d_u().deriv(1, 0)[0] == pytest.approx(6 * 1.5, rel=1e-15)
    assert f.truncate(1).deriv(1, 0)[0] == pytest.approx(3 * 1.5 ** 2, rel=1e-15)
