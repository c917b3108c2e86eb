"""Gauss and Gauss-Lobatto rules on the reference cell [-1/2, 1/2].

Weights are normalized to sum to one so that sums approximate *averages*
over the cell, matching how cell-mean decompositions are written.  The
first Gauss-Lobatto weight (the endpoint weight) caps the CFL number of the
high-order cell-average schemes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .exceptions import MhdDomainError


def gauss_rule(q):
    """q-point Gauss nodes/weights on [-1/2, 1/2], weights summing to 1."""
    if q < 1:
        raise MhdDomainError("need at least one Gauss point")
    x, w = legendre.leggauss(q)
    return x / 2.0, w / 2.0


def gauss_lobatto_rule(ell):
    """ell-point Gauss-Lobatto nodes/weights on [-1/2, 1/2], summing to 1.

    Interior nodes are the roots of P'_{ell-1}; endpoint weights equal
    1/(ell(ell-1)) after normalization.
    """
    if ell < 2:
        raise MhdDomainError("Gauss-Lobatto needs at least two points")
    pn = legendre.Legendre.basis(ell - 1)
    interior = pn.deriv().roots().real
    x = np.concatenate(([-1.0], np.sort(interior), [1.0]))
    w = 2.0 / (ell * (ell - 1) * pn(x) ** 2)
    return x / 2.0, w / 2.0


def lobatto_count(k):
    """Smallest point count L with 2L - 3 >= k (degree-k cell decompositions).

    Realized as L = ceil((k + 3) / 2); the floor variant breaks the
    requirement at even k.
    """
    return int(np.ceil((k + 3) / 2))


def _monomial_average(power):
    """Exact average of xi^power over [-1/2, 1/2]."""
    if power % 2:
        return 0.0
    return (0.5 ** power) / (power + 1)


def _verify_exactness(x, w, degree, label):
    for pw in range(degree + 1):
        approx = float(np.sum(w * x ** pw))
        if abs(approx - _monomial_average(pw)) > 1e-14:
            raise MhdDomainError(
                f"{label} rule failed exactness check at degree {pw}")


@dataclass(frozen=True)
class QuadratureTables:
    """All nodes/weights a degree-k scheme needs, verified at build time."""

    k: int
    gauss_x: np.ndarray
    gauss_w: np.ndarray
    lobatto_x: np.ndarray
    lobatto_w: np.ndarray

    @property
    def q(self):
        return len(self.gauss_x)

    @property
    def ell(self):
        return len(self.lobatto_x)

    @property
    def omega_hat_1(self):
        """Endpoint Gauss-Lobatto weight: the high-order CFL ceiling."""
        return float(self.lobatto_w[0])


@lru_cache(maxsize=None)
def tables_for_degree(k):
    """Default tables for polynomial degree k: Q = k+1 Gauss points and the
    smallest valid Gauss-Lobatto count."""
    if k < 0:
        raise MhdDomainError("polynomial degree must be nonnegative")
    q = max(k + 1, 1)
    ell = lobatto_count(k)
    gx, gw = gauss_rule(q)
    lx, lw = gauss_lobatto_rule(ell)
    _verify_exactness(gx, gw, 2 * q - 1, "Gauss")
    _verify_exactness(lx, lw, 2 * ell - 3, "Gauss-Lobatto")
    if not np.allclose(lx, -lx[::-1], atol=1e-14):
        raise MhdDomainError("Gauss-Lobatto nodes must be symmetric")
    return QuadratureTables(k=k, gauss_x=gx, gauss_w=gw, lobatto_x=lx, lobatto_w=lw)
