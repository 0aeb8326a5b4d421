"""Relaxation rates and macroscopic (SOH and diffusion) coefficients.

Rates
    Near the uniform state the slowest mode decays at
    ``lambda0 = (n - 1) tau0 (1 - rho / rho_c)``.  Near a stable von Mises-Fisher
    equilibrium the rate is ``lambda = (c tau(j) / j') Lambda_kappa (j/c)'``.

SOH coefficients
    For an equilibrium branch ``rho -> kappa(rho)``::

        c1 = c(kappa),   c2 = c_tilde(kappa),
        Theta = 1/kappa + (c_tilde - c) (rho / kappa) dkappa/drho,
        delta = nu(j) / c * ((n - 1)/kappa + c_tilde).

    ``dkappa/drho`` comes from differentiating ``rho = j/c``.  A second,
    ``kappa``-only expression of ``Theta`` uses the identity
    ``c' = 1 - (n - 1) c / kappa - c^2`` and is reported as ``theta_alt`` for
    cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Sequence, Union

import numpy as np

from .equilibria import (
    COMPAT_TOL,
    MARGINAL_TOL,
    Stability,
    ratio_slope,
    solve_compatibility,
)
from .errors import ConsistencyError, DomainError, PhaselabError
from .model import ModelCoefficients
from .spectral import c_tilde, poincare_constant
from .vmf import vmf_moments

FOLD_TOL = 1e-6

__all__ = [
    "rate_uniform",
    "rate_vmf",
    "rate_vmf_hysteresis",
    "SohCoefficients",
    "soh_coefficients",
    "diffusion_coefficient",
    "HyperbolicityScan",
    "hyperbolicity_scan",
]


def rate_uniform(model: ModelCoefficients, n: int, rho: float) -> float:
    """Decay rate ``(n-1) tau0 (1 - rho/rho_c)`` of perturbations of the uniform state.

    Raises
    ------
    DomainError
        If ``rho >= rho_c`` (the uniform state is not stable there).
    """
    rho_c = model.rho_c(n)
    if not 0 <= rho < rho_c:
        raise DomainError(f"uniform rate needs 0 <= rho < rho_c = {rho_c}, got {rho}")
    return (n - 1) * model.tau0 * (1.0 - rho / rho_c)


def _check_equilibrium(model, n, rho, kappa):
    _, c, _ = vmf_moments(kappa, n)
    j = float(model.j(kappa))
    if abs(rho * c - j) > COMPAT_TOL * max(1.0, j):
        raise ConsistencyError(f"(rho={rho}, kappa={kappa}) violates rho c = j by {abs(rho * c - j):.3e}")
    return j, c


def rate_vmf(model: ModelCoefficients, n: int, rho: float, kappa: float) -> float:
    """Rate ``(c tau(j) / j') Lambda_kappa (j/c)'`` at a stable VMF equilibrium.

    Raises
    ------
    DomainError
        If the equilibrium is unstable or marginal (``(j/c)' <= tol``).
    ConsistencyError
        If ``(rho, kappa)`` is not an equilibrium.
    """
    if kappa <= 0:
        raise DomainError("rate_vmf needs kappa > 0")
    j, c = _check_equilibrium(model, n, rho, kappa)
    slope = ratio_slope(model, n, kappa)
    if slope <= MARGINAL_TOL * (1.0 + rho):
        raise DomainError(f"equilibrium at kappa={kappa} is not stable (slope {slope:.3e})")
    jp = float(model.j_prime(kappa))
    return c * float(model.tau(j)) / jp * poincare_constant(kappa, n) * slope


def rate_vmf_hysteresis(n: int, kappa: float) -> float:
    """Closed form of :func:`rate_vmf` for the hysteresis model ``k = |J| + |J|^2``.

    ``lambda = Lambda_kappa / (1 + j) * (1 - (1/c - c - (n-1)/kappa) j (1 + 2j))``
    """
    j = 2.0 * kappa / (math.sqrt(1.0 + 4.0 * kappa) + 1.0)
    _, c, _ = vmf_moments(kappa, n)
    return poincare_constant(kappa, n) / (1.0 + j) * (1.0 - (1.0 / c - c - (n - 1) / kappa) * j * (1.0 + 2.0 * j))


def diffusion_coefficient(model: ModelCoefficients, n: int, rho: float) -> float:
    """Diffusion coefficient ``1 / ((n-1) n tau0 (1 - rho/rho_c))`` of the disordered phase."""
    rho_c = model.rho_c(n)
    if not 0 <= rho < rho_c:
        raise DomainError(f"diffusion coefficient needs 0 <= rho < rho_c = {rho_c}, got {rho}")
    return 1.0 / ((n - 1) * n * model.tau0 * (1.0 - rho / rho_c))


@dataclass(frozen=True)
class SohCoefficients:
    """SOH coefficients at one point of an equilibrium branch.

    ``near_fold`` is set when ``|dkappa/drho|`` is so large that ``theta`` is
    dominated by the divergence at a fold of the branch; ``theta`` is then a
    large-magnitude number whose sign, not value, is meaningful.
    ``lambda0`` is ``nan`` for ``rho >= rho_c``; ``lambda_kappa`` is ``nan`` on
    unstable roots.
    """

    rho: float
    kappa: float
    c1: float
    c2: float
    theta: float
    theta_alt: float
    delta: float
    hyperbolic: bool
    lambda0: float
    lambda_kappa: float
    dkappa_drho: float
    near_fold: bool

    def as_dict(self):
        return asdict(self)


def _pick_root(model, n, rho, branch):
    if isinstance(branch, (int, float)) and not isinstance(branch, bool):
        return float(branch)
    roots = [r for r in solve_compatibility(model, n, rho) if r.kappa > 0]
    if branch == "stable":
        stable = [r for r in roots if r.stability is Stability.STABLE]
        if not stable:
            raise DomainError(f"no stable non-uniform equilibrium at rho={rho}")
        return stable[-1].kappa
    if branch == "unstable":
        unstable = [r for r in roots if r.stability is Stability.UNSTABLE]
        if not unstable:
            raise DomainError(f"no unstable non-uniform equilibrium at rho={rho}")
        return unstable[0].kappa
    raise DomainError(f"branch must be 'stable', 'unstable' or a kappa value, got {branch!r}")


def soh_coefficients(
    model: ModelCoefficients, n: int, rho: float, branch: Union[str, float] = "stable"
) -> SohCoefficients:
    """SOH coefficients at density ``rho``.

    Parameters
    ----------
    branch : {"stable", "unstable"} or float
        ``"stable"`` picks the largest stable positive root, ``"unstable"``
        the smallest unstable one; a float is taken as the root ``kappa``
        itself and checked against the compatibility equation.
    """
    kappa = _pick_root(model, n, rho, branch)
    j, c = _check_equilibrium(model, n, rho, kappa)
    _, _, cp = vmf_moments(kappa, n)
    jp = float(model.j_prime(kappa))
    ct = c_tilde(kappa, n)
    drho_dkappa = (jp * c - j * cp) / c**2
    dkappa_drho = math.inf if drho_dkappa == 0 else 1.0 / drho_dkappa
    theta = 1.0 / kappa + (ct - c) * (rho / kappa) * dkappa_drho
    q = n - 1 - kappa / c + kappa * jp / j
    theta_alt = (q + kappa * ct) / (kappa * (q + kappa * c))
    delta = float(model.nu(j)) / c * ((n - 1) / kappa + ct)
    near_fold = abs(drho_dkappa) * kappa < FOLD_TOL * rho
    rho_c = model.rho_c(n)
    lam0 = (n - 1) * model.tau0 * (1.0 - rho / rho_c) if rho < rho_c else math.nan
    if drho_dkappa > MARGINAL_TOL * (1.0 + rho):
        lam = c * float(model.tau(j)) / jp * poincare_constant(kappa, n) * drho_dkappa
    else:
        lam = math.nan
    return SohCoefficients(
        rho=float(rho),
        kappa=kappa,
        c1=c,
        c2=ct,
        theta=theta,
        theta_alt=theta_alt,
        delta=delta,
        hyperbolic=bool(theta > 0),
        lambda0=lam0,
        lambda_kappa=lam,
        dkappa_drho=dkappa_drho,
        near_fold=bool(near_fold),
    )


@dataclass
class HyperbolicityScan:
    """Output of :func:`hyperbolicity_scan`.

    ``sign_changes`` holds ``(rho_left, rho_right)`` pairs of consecutive
    successful grid points between which ``theta`` changes sign.
    """

    rows: list
    failures: list
    sign_changes: list


def hyperbolicity_scan(
    model: ModelCoefficients, n: int, rho_grid: Sequence[float], branch: str = "stable"
) -> HyperbolicityScan:
    """Evaluate :func:`soh_coefficients` along ``rho_grid``; failures are recorded, not raised."""
    rows, failures = [], []
    for rho in rho_grid:
        try:
            rows.append(soh_coefficients(model, n, float(rho), branch))
        except PhaselabError as exc:
            failures.append((float(rho), str(exc)))
    changes = []
    for a, b in zip(rows[:-1], rows[1:]):
        if np.sign(a.theta) * np.sign(b.theta) < 0:
            changes.append((a.rho, b.rho))
    return HyperbolicityScan(rows=rows, failures=failures, sign_changes=changes)
