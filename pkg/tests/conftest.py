import numpy as np
import pytest

from bitbandit.links import LinkFunction


def ball_points(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from the unit ball (independent of the library's sampler)."""
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * (rng.random(n) ** (1.0 / d))[:, None]


def constant_slope_link(c: float) -> LinkFunction:
    """mu(z) = c*z without closed-form extrema, to exercise the grid fallback."""
    return LinkFunction(
        name=f"slope:{c}",
        mu=lambda z: c * np.asarray(z, dtype=float),
        mu_dot=lambda z: np.full_like(np.asarray(z, dtype=float), c),
        mu_int=lambda z: 0.5 * c * np.square(np.asarray(z, dtype=float)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
