"""Coefficient models ``nu(|J|)``, ``tau(|J|)`` and the derived quotient ``k``.

A model is fixed by the alignment rate ``nu`` and the noise intensity ``tau``,
both functions of the norm ``r = |J|`` of the local momentum.  Everything else
follows from them:

* ``k(r) = nu(r) / tau(r)`` with derivative ``k_prime``,
* the potential ``Phi(r) = int_0^r k(s) ds``,
* the inverse ``j = k^{-1}`` defined on ``[0, kappa_max)``.

Presets are built by the module-level constructors :func:`constant`,
:func:`linear`, :func:`hysteresis`, :func:`regularized_1`, :func:`regularized_2`,
:func:`custom_beta`, :func:`user_functions` and :func:`user_table`.
:func:`from_config` maps a ``{"preset": name, ...}`` mapping to one of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import DomainError, RangeError
from .vmf import order_parameter, order_parameter_prime

Func = Callable[[np.ndarray], np.ndarray]

PROBE_LIMIT = 1e8

__all__ = [
    "ModelCoefficients",
    "constant",
    "linear",
    "hysteresis",
    "regularized_1",
    "regularized_2",
    "custom_beta",
    "user_functions",
    "user_table",
    "from_config",
    "PRESETS",
    "j_of_kappa",
    "phi_potential",
]


def _vectorize(fn):
    """Evaluate a scalar-only function elementwise and keep scalars scalar."""

    def wrapped(x):
        if np.ndim(x) == 0:
            return float(fn(float(x)))
        x = np.asarray(x, dtype=float)
        return np.array([fn(float(v)) for v in x.ravel()]).reshape(x.shape)

    return wrapped


@dataclass(frozen=True)
class ModelCoefficients:
    """Immutable description of a coefficient model.

    Attributes
    ----------
    nu, tau, k, k_prime, phi : callable
        Vectorized functions of ``r = |J| >= 0``.
    name : str
        Preset identifier (``"HYSTERESIS"``, ``"LINEAR"``, ...).
    params : dict
        Preset parameters, echoed into output files.
    j_exact : callable or None
        Closed-form inverse of ``k`` when one exists.  Otherwise
        :meth:`j` inverts ``k`` numerically.
    j_prime_exact : callable or None
        Closed-form derivative of ``j``.
    kappa_max : float
        Supremum of ``k``; ``inf`` when ``k`` is unbounded.
    invertible : bool
        ``False`` for models with ``k(0) > 0`` (the constant model), for which
        ``j`` is undefined.
    """

    nu: Func
    tau: Func
    k: Func
    k_prime: Func
    phi: Func
    name: str
    params: Mapping = field(default_factory=dict)
    j_exact: Optional[Func] = None
    j_prime_exact: Optional[Func] = None
    kappa_max: float = math.inf
    invertible: bool = True

    @property
    def tau0(self) -> float:
        """Noise intensity at zero momentum, ``tau(0)``."""
        return float(self.tau(0.0))

    def rho_c(self, n: int) -> float:
        """Critical density ``n / k'(0)``, or ``inf`` when ``k'(0) = 0``."""
        kp0 = float(self.k_prime(0.0))
        if kp0 <= 0.0:
            return math.inf
        return n / kp0

    def j(self, kappa):
        """Inverse of ``k``; see :func:`j_of_kappa`."""
        return j_of_kappa(self, kappa)

    def j_prime(self, kappa):
        """Derivative ``dj/dkappa = 1 / k'(j(kappa))``."""
        if self.j_prime_exact is not None:
            _check_kappa_range(self, kappa)
            return self.j_prime_exact(kappa)
        return 1.0 / np.asarray(self.k_prime(self.j(kappa)), dtype=float)[()]

    def describe(self) -> dict:
        return {"preset": self.name, **dict(self.params)}


def _check_kappa_range(model, kappa):
    if not model.invertible:
        raise RangeError(f"{model.name} model has k(0) > 0; j is undefined", limit=None)
    k = np.asarray(kappa, dtype=float)
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise DomainError(f"kappa must be finite and >= 0, got {kappa!r}")
    if np.any(k >= model.kappa_max):
        raise RangeError(
            f"kappa must be below kappa_max = {model.kappa_max:.17g} for {model.name}",
            limit=model.kappa_max,
        )
    return k


def _invert_scalar(model, kappa):
    if kappa == 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while model.k(hi) < kappa:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise RangeError("j inversion failed to bracket", limit=model.kappa_max)
    f = lambda r: float(model.k(r)) - kappa
    r = brentq(f, lo, hi, xtol=1e-14 * max(1.0, hi), rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(2):
        kp = float(model.k_prime(r))
        if kp > 0:
            r_new = r - f(r) / kp
            if lo <= r_new <= hi:
                r = r_new
    return r


def j_of_kappa(model: ModelCoefficients, kappa):
    """Inverse ``j(kappa) = |J|`` of ``k``.

    Parameters
    ----------
    model : ModelCoefficients
    kappa : float or array_like
        Concentrations in ``[0, kappa_max)``.

    Raises
    ------
    RangeError
        If ``kappa >= kappa_max`` (the limit is attached as ``.limit``) or the
        model is not invertible.

    Examples
    --------
    >>> j_of_kappa(hysteresis(), 2.0)
    1.0
    """
    k = _check_kappa_range(model, kappa)
    if model.j_exact is not None:
        out = model.j_exact(k)
    elif k.ndim == 0:
        out = _invert_scalar(model, float(k))
    else:
        out = np.array([_invert_scalar(model, float(v)) for v in k.ravel()]).reshape(k.shape)
    return float(out) if np.ndim(kappa) == 0 else np.asarray(out, dtype=float)


def phi_potential(model: ModelCoefficients, J_norm):
    """Potential ``Phi(|J|) = int_0^|J| k(s) ds``."""
    r = np.asarray(J_norm, dtype=float)
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise DomainError(f"|J| must be finite and >= 0, got {J_norm!r}")
    out = model.phi(r)
    return float(out) if np.ndim(J_norm) == 0 else np.asarray(out, dtype=float)


def _probe_kappa_max(k: Func) -> float:
    """Estimate ``sup k`` by probing a geometric grid up to ``PROBE_LIMIT``.

    ``k`` is declared unbounded when it still grows by more than a relative
    ``1e-6`` per decade at the top of the grid.
    """
    r = np.geomspace(1.0, PROBE_LIMIT, 17)
    vals = np.asarray(k(r), dtype=float)
    top, prev = vals[-1], vals[-3]
    if top - prev > 1e-6 * abs(top):
        return math.inf
    return float(top)


# presets ---------------------------------------------------------------------


def constant(nu0: float = 1.0, tau0: float = 1.0) -> ModelCoefficients:
    """Constant coefficients.  ``k(0) > 0``, so ``j`` is unavailable."""
    if nu0 <= 0 or tau0 <= 0:
        raise DomainError("nu0 and tau0 must be positive")
    kap = nu0 / tau0
    return ModelCoefficients(
        nu=lambda r: nu0 + 0.0 * np.asarray(r, dtype=float),
        tau=lambda r: tau0 + 0.0 * np.asarray(r, dtype=float),
        k=lambda r: kap + 0.0 * np.asarray(r, dtype=float),
        k_prime=lambda r: 0.0 * np.asarray(r, dtype=float),
        phi=lambda r: kap * np.asarray(r, dtype=float),
        name="CONSTANT",
        params={"nu0": nu0, "tau0": tau0},
        kappa_max=kap,
        invertible=False,
    )


def linear() -> ModelCoefficients:
    """``nu(|J|) = |J|``, ``tau = 1``; the inverse is ``j(kappa) = kappa``."""
    ident = lambda r: np.asarray(r, dtype=float) * 1.0
    return ModelCoefficients(
        nu=ident,
        tau=lambda r: 1.0 + 0.0 * np.asarray(r, dtype=float),
        k=ident,
        k_prime=lambda r: 1.0 + 0.0 * np.asarray(r, dtype=float),
        phi=lambda r: 0.5 * np.asarray(r, dtype=float) ** 2,
        name="LINEAR",
        j_exact=ident,
        j_prime_exact=lambda kap: 1.0 + 0.0 * np.asarray(kap, dtype=float),
    )


def hysteresis() -> ModelCoefficients:
    """``nu(|J|) = |J|``, ``tau(|J|) = 1/(1+|J|)``, hence ``k = |J| + |J|^2``."""

    def j_exact(kap):
        kap = np.asarray(kap, dtype=float)
        # (sqrt(1+4k) - 1)/2 written without cancellation
        return 2.0 * kap / (np.sqrt(1.0 + 4.0 * kap) + 1.0)

    return ModelCoefficients(
        nu=lambda r: np.asarray(r, dtype=float) * 1.0,
        tau=lambda r: 1.0 / (1.0 + np.asarray(r, dtype=float)),
        k=lambda r: np.asarray(r, dtype=float) * (1.0 + np.asarray(r, dtype=float)),
        k_prime=lambda r: 1.0 + 2.0 * np.asarray(r, dtype=float),
        phi=lambda r: np.asarray(r, dtype=float) ** 2 / 2 + np.asarray(r, dtype=float) ** 3 / 3,
        name="HYSTERESIS",
        j_exact=j_exact,
        j_prime_exact=lambda kap: 1.0 / np.sqrt(1.0 + 4.0 * np.asarray(kap, dtype=float)),
    )


def regularized_1(eps: float, tau0: float = 1.0) -> ModelCoefficients:
    """``nu(|J|) = |J|/(eps+|J|)`` with constant noise ``tau0``.

    ``k`` saturates at ``kappa_max = 1/tau0`` and ``rho_c = n eps tau0``.
    """
    if eps <= 0 or tau0 <= 0:
        raise DomainError("eps and tau0 must be positive")

    def j_exact(kap):
        s = np.asarray(kap, dtype=float) * tau0
        return eps * s / (1.0 - s)

    def phi(r):
        r = np.asarray(r, dtype=float)
        return (r - eps * np.log1p(r / eps)) / tau0

    return ModelCoefficients(
        nu=lambda r: np.asarray(r, dtype=float) / (eps + np.asarray(r, dtype=float)),
        tau=lambda r: tau0 + 0.0 * np.asarray(r, dtype=float),
        k=lambda r: np.asarray(r, dtype=float) / (tau0 * (eps + np.asarray(r, dtype=float))),
        k_prime=lambda r: eps / (tau0 * (eps + np.asarray(r, dtype=float)) ** 2),
        phi=phi,
        name="REGULARIZED_1",
        params={"eps": eps, "tau0": tau0},
        j_exact=j_exact,
        j_prime_exact=lambda kap: eps * tau0 / (1.0 - np.asarray(kap, dtype=float) * tau0) ** 2,
        kappa_max=1.0 / tau0,
    )


def regularized_2(eps: float, tau0: float = 1.0) -> ModelCoefficients:
    """``nu(|J|) = |J|/sqrt(eps^2+|J|^2)`` with constant noise ``tau0``."""
    if eps <= 0 or tau0 <= 0:
        raise DomainError("eps and tau0 must be positive")

    def j_exact(kap):
        s = np.asarray(kap, dtype=float) * tau0
        return eps * s / np.sqrt((1.0 - s) * (1.0 + s))

    def j_prime_exact(kap):
        s = np.asarray(kap, dtype=float) * tau0
        return eps * tau0 / ((1.0 - s) * (1.0 + s)) ** 1.5

    return ModelCoefficients(
        nu=lambda r: np.asarray(r, dtype=float) / np.hypot(eps, r),
        tau=lambda r: tau0 + 0.0 * np.asarray(r, dtype=float),
        k=lambda r: np.asarray(r, dtype=float) / (tau0 * np.hypot(eps, r)),
        k_prime=lambda r: eps**2 / (tau0 * np.hypot(eps, r) ** 3),
        phi=lambda r: (np.asarray(r, dtype=float) ** 2 / (np.hypot(eps, r) + eps)) / tau0,
        name="REGULARIZED_2",
        params={"eps": eps, "tau0": tau0},
        j_exact=j_exact,
        j_prime_exact=j_prime_exact,
        kappa_max=1.0 / tau0,
    )


def custom_beta(beta: float, n: int = 2) -> ModelCoefficients:
    """Model with ``j(kappa) = c(kappa) (1 + kappa^{1/beta})`` and ``tau = 1``.

    The compatibility equation then reads ``rho = 1 + kappa^{1/beta}``, so the
    transition sits at ``rho_c = 1`` and the order parameter grows like
    ``c((rho - 1)^beta)``, i.e. with critical exponent ``beta``.  The model
    depends on the dimension ``n`` through ``c``.
    """
    if not 0 < beta <= 1:
        raise DomainError(f"beta must lie in (0, 1], got {beta}")
    p = 1.0 / beta

    def j_exact(kap):
        kap = np.asarray(kap, dtype=float)
        return order_parameter(kap, n) * (1.0 + kap**p)

    def j_prime_exact(kap):
        kap = np.asarray(kap, dtype=float)
        c = order_parameter(kap, n)
        cp = order_parameter_prime(kap, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(kap > 0, p * kap ** (p - 1.0) * c, 0.0)
        return cp * (1.0 + kap**p) + tail

    def k_scalar(r):
        if r <= 0.0:
            return 0.0
        hi = max(1.0, n * r)
        while j_exact(hi) < r:
            hi *= 2.0
        return brentq(lambda s: float(j_exact(s)) - r, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=500)

    k = _vectorize(k_scalar)

    def k_prime(r):
        return 1.0 / np.asarray(j_prime_exact(k(r)), dtype=float)[()]

    def phi_scalar(r):
        # Legendre identity: int_0^r k = r k(r) - int_0^{k(r)} j
        kr = k_scalar(r)
        integral, _ = quad(lambda s: float(j_exact(s)), 0.0, kr, epsabs=1e-13, epsrel=1e-12)
        return r * kr - integral

    return ModelCoefficients(
        nu=k,
        tau=lambda r: 1.0 + 0.0 * np.asarray(r, dtype=float),
        k=k,
        k_prime=k_prime,
        phi=_vectorize(phi_scalar),
        name="CUSTOM_BETA",
        params={"beta": beta, "n": n},
        j_exact=j_exact,
        j_prime_exact=j_prime_exact,
    )


def user_functions(
    nu: Func,
    tau: Func,
    *,
    k_prime: Optional[Func] = None,
    phi: Optional[Func] = None,
    name: str = "USER",
) -> ModelCoefficients:
    """Model from user closures ``nu`` and ``tau``.

    Missing ``k_prime`` is replaced by a centered difference (one-sided at 0)
    and missing ``phi`` by adaptive quadrature of ``k``.
    """
    if float(tau(0.0)) <= 0:
        raise DomainError("tau(0) must be positive")

    def k(r):
        return np.asarray(nu(r), dtype=float) / np.asarray(tau(r), dtype=float)

    if k_prime is None:

        def k_prime_fd(r):
            r = np.asarray(r, dtype=float)
            h = 1e-6 * np.maximum(1.0, r)
            lo = np.maximum(r - h, 0.0)
            return (k(r + h) - k(lo)) / (r + h - lo)

        k_prime = k_prime_fd
    if phi is None:
        phi = _vectorize(lambda r: quad(lambda s: float(k(s)), 0.0, r, epsabs=1e-13, epsrel=1e-12)[0])
    return ModelCoefficients(
        nu=nu,
        tau=tau,
        k=k,
        k_prime=k_prime,
        phi=phi,
        name=name,
        kappa_max=_probe_kappa_max(k),
    )


def user_table(r_values, nu_values, tau_values, *, name: str = "USER") -> ModelCoefficients:
    """Model from tabulated ``nu`` and ``tau`` on increasing ``r`` nodes.

    ``k = nu/tau`` is interpolated with a shape-preserving (PCHIP) cubic, so a
    monotone table gives a monotone ``k``.  Outside the table ``k`` is held at
    its last value; ``j`` is therefore only meaningful inside the table range.
    """
    r = np.asarray(r_values, dtype=float)
    nu_v = np.asarray(nu_values, dtype=float)
    tau_v = np.asarray(tau_values, dtype=float)
    if r.ndim != 1 or r.size < 2 or not np.all(np.diff(r) > 0) or r[0] != 0.0:
        raise DomainError("r_values must be strictly increasing and start at 0")
    if nu_v.shape != r.shape or tau_v.shape != r.shape:
        raise DomainError("nu_values and tau_values must match r_values in length")
    if np.any(tau_v <= 0):
        raise DomainError("tau must be positive")
    k_v = nu_v / tau_v
    if np.any(np.diff(k_v) <= 0):
        raise DomainError("tabulated k = nu/tau must be strictly increasing")
    k_i = PchipInterpolator(r, k_v, extrapolate=False)
    kp_i = k_i.derivative()
    phi_i = k_i.antiderivative()
    nu_i = PchipInterpolator(r, nu_v, extrapolate=False)
    tau_i = PchipInterpolator(r, tau_v, extrapolate=False)
    r_top = r[-1]

    def clip(x):
        return np.minimum(np.asarray(x, dtype=float), r_top)

    def k(x):
        return k_i(clip(x))[()]

    def k_prime(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= r_top, kp_i(clip(x)), 0.0)[()]

    def phi(x):
        x = np.asarray(x, dtype=float)
        return (phi_i(clip(x)) + k_v[-1] * np.maximum(x - r_top, 0.0))[()]

    return ModelCoefficients(
        nu=lambda x: nu_i(clip(x))[()],
        tau=lambda x: tau_i(clip(x))[()],
        k=k,
        k_prime=k_prime,
        phi=phi,
        name=name,
        params={"table_size": int(r.size)},
        kappa_max=float(k_v[-1]),
    )


PRESETS = {
    "CONSTANT": constant,
    "LINEAR": linear,
    "HYSTERESIS": hysteresis,
    "REGULARIZED_1": regularized_1,
    "REGULARIZED_2": regularized_2,
    "CUSTOM_BETA": custom_beta,
}


def from_config(cfg: Mapping) -> ModelCoefficients:
    """Build a preset from ``{"preset": NAME, **params}``.

    A ``"USER"`` preset needs ``"table": {"r": [...], "nu": [...], "tau": [...]}``.
    """
    cfg = dict(cfg)
    name = str(cfg.pop("preset", "HYSTERESIS")).upper()
    if name == "USER":
        table = cfg.pop("table", None)
        if table is None or cfg:
            raise DomainError("USER preset takes exactly one key 'table' with r, nu, tau lists")
        return user_table(table["r"], table["nu"], table["tau"])
    if name not in PRESETS:
        raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS) + ['USER']}")
    try:
        return PRESETS[name](**cfg)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {name}: {exc}") from None
