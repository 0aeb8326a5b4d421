"""Von Mises-Fisher moments on the unit sphere of R^n.

Every quantity here is an average of a function of ``u = cos(theta)`` against
the density ``e^{kappa u}`` on the sphere ``S^{n-1}``.  In the variable ``u`` the
surface measure becomes ``(1 - u^2)^{(n-3)/2} du``, so all integrals are computed
with Gauss-Jacobi rules carrying exactly that weight.  The rules are exact for
polynomials, which gives exponential convergence for the smooth integrands used
throughout the package (for ``n = 2`` the rule is the Chebyshev rule, i.e. the
periodic trapezoid rule in ``theta``).

Conventions
-----------
* ``vmf_normalization(kappa, n)`` is ``Z = <e^{kappa u}>`` under the *normalized*
  uniform measure, so ``Z(0) = 1``.  In ``n = 2`` this is ``I_0(kappa)``, in
  ``n = 3`` it is ``sinh(kappa) / kappa``.
* ``order_parameter(kappa, n)`` is ``c = <u>_M`` and ``order_parameter_prime`` is
  ``c' = <(u - c)^2>_M``.

For ``kappa > LARGE_KAPPA`` the order parameter and its derivative switch to the
large-concentration expansion ``c = 1 - (n-1)/(2k) + (n-1)(n-3)/(8k^2) + ...``.
It comes from the Hankel expansion of ``I_nu`` with ``nu = n/2 - 1`` (``c`` is
the Bessel ratio ``I_{nu+1}/I_nu``) truncated after ``HANKEL_TERMS`` terms,
which leaves an error far below ``1e-14`` at the crossover.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from .errors import DomainError, QuadratureError

BASE_NODES = 256
MAX_NODES = 1 << 16
QUAD_TOL = 1e-12
LARGE_KAPPA = 500.0
HANKEL_TERMS = 8

__all__ = [
    "vmf_normalization",
    "log_vmf_normalization",
    "order_parameter",
    "order_parameter_prime",
    "vmf_moment",
    "VmfMoments",
    "vmf_moments",
    "order_parameter_c",
    "order_parameter_c_prime",
]


@lru_cache(maxsize=64)
def _rule(n: int, nodes: int, shift: int = 0):
    """Normalized Gauss-Jacobi rule for the weight ``(1-u^2)^{(n-3)/2 + shift}``."""
    a = 0.5 * (n - 3) + shift
    u, w = roots_jacobi(nodes, a, a)
    w = w / w.sum()
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def _check_dim(n):
    if int(n) != n or n < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {n!r}")
    return int(n)


def _check_kappa(kappa):
    k = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise DomainError(f"concentration must be finite and >= 0, got {kappa!r}")
    return k


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


def _raw_moments(k, n, nodes):
    """(log Z, c, c') at a fixed rule size, for an array of kappa <= LARGE_KAPPA."""
    u, w = _rule(n, nodes)
    ku = np.multiply.outer(k, u)
    # scaled weights keep exp() bounded for any kappa
    e = w * np.exp(ku - k[..., None])
    s = e.sum(axis=-1)
    log_z = k + np.log(s)
    # <u e^{ku}> with the e^{0} part removed: no cancellation for small kappa
    num = (w * u * np.expm1(ku)).sum(axis=-1)
    c = num / (s * np.exp(k))
    c_prime = (e * (u - c[..., None]) ** 2).sum(axis=-1) / s
    return log_z, c, c_prime


def _adaptive_moments(k, n):
    """Double the rule size until each kappa's moments settle; only the
    unsettled entries are recomputed at the next size."""
    out = [np.empty_like(k) for _ in range(3)]
    todo = np.arange(k.size)
    nodes = BASE_NODES
    prev = _raw_moments(k, n, nodes)
    while True:
        nodes *= 2
        cur = _raw_moments(k[todo], n, nodes)
        err = np.maximum.reduce(
            [
                np.abs(cur[0] - prev[0]) / np.maximum(1.0, np.abs(cur[0])),
                np.abs(cur[1] - prev[1]),
                np.abs(cur[2] - prev[2]),
            ]
        )
        done = err <= QUAD_TOL
        for q in range(3):
            out[q][todo[done]] = cur[q][done]
        if done.all():
            return tuple(out)
        if nodes >= MAX_NODES:
            raise QuadratureError("VMF moments did not converge", float(err.max()))
        todo = todo[~done]
        prev = tuple(x[~done] for x in cur)


def _hankel_coefficients(n):
    # I_nu(k) ~ e^k / sqrt(2 pi k) * sum_m a_m k^{-m}
    mu = (n - 2) ** 2
    a = [1.0]
    for m in range(1, HANKEL_TERMS):
        a.append(-a[-1] * (mu - (2 * m - 1) ** 2) / (8.0 * m))
    return np.array(a)


def _asymptotic_c_and_prime(k, n):
    """``c`` and ``c'`` from ``log Z = k - (n-1)/2 log k + log S(1/k) + const``."""
    a = _hankel_coefficients(n)
    m = np.arange(a.size)[:, None]
    x = 1.0 / np.asarray(k, dtype=float)[None, :]
    S = np.sum(a[:, None] * x**m, axis=0)
    S1 = np.sum(-m * a[:, None] * x ** (m + 1), axis=0)
    S2 = np.sum(m * (m + 1) * a[:, None] * x ** (m + 2), axis=0)
    half = 0.5 * (n - 1)
    c = 1.0 - half * x[0] + S1 / S
    cp = half * x[0] ** 2 + (S2 * S - S1**2) / S**2
    return c, cp


def vmf_moments(kappa, n):
    """Return ``(log Z, c, c')`` for scalar or array ``kappa``.

    Exact analytic values are used at ``kappa = 0``, the expansion above
    ``LARGE_KAPPA`` and adaptive Gauss-Jacobi quadrature in between.
    """
    n = _check_dim(n)
    k = np.atleast_1d(_check_kappa(kappa)).astype(float)
    log_z = np.zeros_like(k)
    c = np.zeros_like(k)
    cp = np.full_like(k, 1.0 / n)
    mid = (k > 0) & (k <= LARGE_KAPPA)
    big = k > LARGE_KAPPA
    if mid.any():
        log_z[mid], c[mid], cp[mid] = _adaptive_moments(k[mid], n)
    if big.any():
        kb = k[big]
        log_z[big] = _log_z_large(kb, n)
        c[big], cp[big] = _asymptotic_c_and_prime(kb, n)
    if np.ndim(kappa) == 0:
        return float(log_z[0]), float(c[0]), float(cp[0])
    shape = np.shape(kappa)
    return log_z.reshape(shape), c.reshape(shape), cp.reshape(shape)


def _log_z_large(k, n):
    # Z = Gamma(n/2) (2/k)^nu I_nu(k) with the same Hankel series as c
    nu = 0.5 * n - 1.0
    a = _hankel_coefficients(n)
    x = 1.0 / k
    S = np.polyval(a[::-1], x)
    return math.lgamma(0.5 * n) + nu * math.log(2.0) - (nu + 0.5) * np.log(k) + k - 0.5 * math.log(2.0 * math.pi) + np.log(S)


def log_vmf_normalization(kappa, n):
    """Natural log of :func:`vmf_normalization`; finite for every finite ``kappa``."""
    return vmf_moments(kappa, n)[0]


def vmf_normalization(kappa, n):
    """Mean of ``e^{kappa cos(theta)}`` over the uniform probability measure on ``S^{n-1}``.

    Overflows to ``inf`` for ``kappa`` beyond roughly 700; use
    :func:`log_vmf_normalization` there.
    """
    with np.errstate(over="ignore"):
        return _scalar_or_array(np.exp(log_vmf_normalization(kappa, n)), kappa)


def order_parameter(kappa, n):
    """Order parameter ``c(kappa) = <cos theta>_M`` in ``[0, 1)``.

    >>> round(order_parameter(1.0, 3), 10)
    0.3130352855
    """
    return vmf_moments(kappa, n)[1]


def order_parameter_prime(kappa, n):
    """Derivative ``dc/dkappa``, equal to the variance of ``cos theta`` under ``M``."""
    return vmf_moments(kappa, n)[2]


def vmf_moment(kappa, n, integrand: Callable[[np.ndarray], np.ndarray], *, tol=QUAD_TOL):
    """Average ``<phi(cos theta)>_M`` of a bounded function ``phi`` on ``[-1, 1]``.

    Parameters
    ----------
    kappa : float
        Concentration, ``>= 0``.
    n : int
        Ambient dimension.
    integrand : callable
        Vectorized function of ``u = cos(theta)``.
    tol : float
        Agreement required between successive rule doublings, relative to
        ``max(1, |value|)``.

    Raises
    ------
    QuadratureError
        If doubling up to ``MAX_NODES`` never reaches ``tol``.
    """
    n = _check_dim(n)
    k = float(_check_kappa(kappa))
    nodes = BASE_NODES
    prev = None
    while True:
        u, w = _rule(n, nodes)
        e = w * np.exp(k * (u - 1.0))
        val = float(np.sum(e * np.asarray(integrand(u), dtype=float)) / e.sum())
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * max(1.0, abs(val)):
                return val
            if nodes >= MAX_NODES:
                raise QuadratureError("vmf_moment did not converge", err)
        prev = val
        nodes *= 2


class VmfMoments:
    """Bundle of VMF quantities at one ``(kappa, n)``."""

    __slots__ = ("kappa", "n", "z", "c", "c_prime")

    def __init__(self, kappa, n):
        log_z, c, cp = vmf_moments(float(kappa), n)
        self.kappa = float(kappa)
        self.n = int(n)
        with np.errstate(over="ignore"):
            self.z = float(np.exp(log_z))
        self.c = c
        self.c_prime = cp

    def __repr__(self):
        return f"VmfMoments(kappa={self.kappa}, n={self.n}, c={self.c:.12g}, c_prime={self.c_prime:.12g})"


order_parameter_c = order_parameter
order_parameter_c_prime = order_parameter_prime
