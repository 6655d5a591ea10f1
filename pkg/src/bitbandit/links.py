"""Inverse link functions for the generalized-linear reward model.

A link bundles the scalar map ``mu``, its derivative ``mu_dot``, and the
antiderivative ``mu_int`` (with ``mu_int' = mu``) needed by the convex
potential that the estimator minimizes.  Links are selected by name in run
configs: ``identity``, ``logistic``, or ``scaled-logistic:<c>`` which is
``c * logistic`` (amplitude scaling).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

_GRID_POINTS = 10_000


@dataclass(frozen=True)
class LinkFunction:
    """Scalar inverse link with the regularity constants used everywhere.

    ``k1 = min(1, inf mu_dot)`` and ``k2 = max(1, sup mu_dot)`` over the
    reachable argument range ``|z| <= L*M``; both extrema are closed-form
    where the registry knows them and a dense-grid estimate otherwise.
    """

    name: str
    mu: Callable[[np.ndarray], np.ndarray]
    mu_dot: Callable[[np.ndarray], np.ndarray]
    mu_int: Callable[[np.ndarray], np.ndarray]
    # Closed-form extrema of mu_dot over |z| <= r, if known; else grid fallback.
    dot_extrema: Callable[[float], tuple[float, float]] | None = field(default=None)

    def derivative_range(self, radius: float) -> tuple[float, float]:
        """(inf, sup) of mu_dot over |z| <= radius."""
        if self.dot_extrema is not None:
            return self.dot_extrema(radius)
        z = np.linspace(-radius, radius, _GRID_POINTS)
        d = np.asarray(self.mu_dot(z), dtype=float)
        return float(d.min()), float(d.max())


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=float)))


def _sigmoid_dot(z):
    s = _sigmoid(z)
    return s * (1.0 - s)


def _softplus(z):
    # Antiderivative of the logistic function, evaluated stably.
    return np.logaddexp(0.0, np.asarray(z, dtype=float))


def _logistic_extrema(radius: float) -> tuple[float, float]:
    # mu_dot = s(1-s) is symmetric and peaks at 0, decreasing in |z|.
    edge = float(_sigmoid_dot(np.array(radius)))
    return edge, 0.25


def identity_link() -> LinkFunction:
    return LinkFunction(
        name="identity",
        mu=lambda z: np.asarray(z, dtype=float),
        mu_dot=lambda z: np.ones_like(np.asarray(z, dtype=float)),
        mu_int=lambda z: 0.5 * np.square(np.asarray(z, dtype=float)),
        dot_extrema=lambda r: (1.0, 1.0),
    )


def logistic_link() -> LinkFunction:
    return LinkFunction(
        name="logistic",
        mu=_sigmoid,
        mu_dot=_sigmoid_dot,
        mu_int=_softplus,
        dot_extrema=_logistic_extrema,
    )


def scaled_logistic_link(c: float) -> LinkFunction:
    if c <= 0:
        raise ValueError(f"scaled-logistic scale must be positive, got {c}")
    return LinkFunction(
        name=f"scaled-logistic:{c:g}",
        mu=lambda z: c * _sigmoid(z),
        mu_dot=lambda z: c * _sigmoid_dot(z),
        mu_int=lambda z: c * _softplus(z),
        dot_extrema=lambda r: (c * _logistic_extrema(r)[0], c * 0.25),
    )


def link_by_name(name: str) -> LinkFunction:
    """Resolve a link from its config-file spelling."""
    if name == "identity":
        return identity_link()
    if name == "logistic":
        return logistic_link()
    if name.startswith("scaled-logistic:"):
        try:
            c = float(name.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad scaled-logistic parameter in {name!r}") from exc
        return scaled_logistic_link(c)
    raise ValueError(f"unknown link {name!r}; expected identity | logistic | scaled-logistic:<c>")


def link_constants(link: LinkFunction, L: float, M: float) -> tuple[float, float]:
    """Regularity constants (k1, k2) of a link over the reachable range.

    k1 < = 1 <= k2 by construction; a nonpositive k1 violates the standing
    smoothness assumption and is rejected.
    """
    lo, hi = link.derivative_range(float(L) * float(M))
    k1 = min(1.0, lo)
    k2 = max(1.0, hi)
    if k1 <= 0.0:
        raise ValueError(
            f"link {link.name!r} has inf mu_dot = {lo:.3g} <= 0 on |z| <= {L * M:g}; "
            "strictly increasing links are required"
        )
    return k1, k2
