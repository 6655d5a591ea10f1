import numpy as np
import pytest

from bitbandit.links import (
    LinkFunction,
    identity_link,
    link_by_name,
    link_constants,
    logistic_link,
    scaled_logistic_link,
)
from conftest import constant_slope_link

K1_LOGISTIC_11 = 0.19661193324148185  # sigma(1) * (1 - sigma(1))


def test_identity_constants():
    assert link_constants(identity_link(), 1.0, 1.0) == (1.0, 1.0)
    assert link_constants(identity_link(), 5.0, 3.0) == (1.0, 1.0)


def test_logistic_constants_closed_form():
    k1, k2 = link_constants(logistic_link(), 1.0, 1.0)
    assert k1 == pytest.approx(K1_LOGISTIC_11, rel=1e-12)
    assert k2 == 1.0


def test_constant_slope_uses_grid(rng):
    for c in (0.3, 0.9):
        k1, k2 = link_constants(constant_slope_link(c), 1.0, 1.0)
        assert k1 == pytest.approx(c, rel=1e-9)
        assert k2 == 1.0


def test_grid_fallback_matches_logistic_closed_form():
    closed = logistic_link()
    grid = LinkFunction(
        name="logistic-grid", mu=closed.mu, mu_dot=closed.mu_dot, mu_int=closed.mu_int
    )
    a = link_constants(closed, 1.0, 1.0)
    b = link_constants(grid, 1.0, 1.0)
    assert a[0] == pytest.approx(b[0], rel=1e-6)
    assert a[1] == b[1] == 1.0


def test_scaled_logistic():
    link = scaled_logistic_link(4.8)
    k1, k2 = link_constants(link, 1.0, 1.0)
    assert k2 == pytest.approx(1.2, rel=1e-12)  # sup mu_dot = 4.8/4
    assert k1 == pytest.approx(4.8 * K1_LOGISTIC_11, rel=1e-12)
    # k1 capped at 1 when the derivative floor exceeds it
    wide = scaled_logistic_link(50.0)
    k1w, _ = link_constants(wide, 1.0, 1.0)
    assert k1w == 1.0


def test_link_by_name():
    assert link_by_name("identity").name == "identity"
    assert link_by_name("logistic").name == "logistic"
    assert link_by_name("scaled-logistic:2.5").name == "scaled-logistic:2.5"
    with pytest.raises(ValueError):
        link_by_name("probit")
    with pytest.raises(ValueError):
        link_by_name("scaled-logistic:zero")


def test_decreasing_link_rejected():
    bad = LinkFunction(
        name="neg",
        mu=lambda z: -np.asarray(z, float),
        mu_dot=lambda z: -np.ones_like(np.asarray(z, float)),
        mu_int=lambda z: -0.5 * np.square(np.asarray(z, float)),
    )
    with pytest.raises(ValueError, match="strictly increasing"):
        link_constants(bad, 1.0, 1.0)


def test_antiderivative_consistency():
    link = logistic_link()
    z = np.linspace(-3.0, 3.0, 2001)
    h = z[1] - z[0]
    num = np.gradient(link.mu_int(z), h)
    np.testing.assert_allclose(num[2:-2], link.mu(z)[2:-2], atol=1e-4)
