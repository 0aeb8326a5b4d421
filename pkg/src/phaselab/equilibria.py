"""Equilibria of the homogeneous dynamics and the resulting phase diagram.

Non-uniform equilibria at density ``rho`` are von Mises-Fisher distributions
whose concentration solves the compatibility equation ``j(kappa) = rho c(kappa)``,
equivalently ``j(kappa) / c(kappa) = rho``.  The shape of the ratio ``j/c``
therefore determines everything: its limit at ``kappa -> 0`` is the critical
density ``rho_c``, its infimum is ``rho_*``, and a root is stable exactly when
``j/c`` is increasing there.

Root finding scans ``j - rho c`` on a merged log/linear grid of ``kappa`` nodes
and refines each sign change with Brent's method.  All roots satisfy
``j(kappa) = rho c(kappa) < rho``, so the scan never needs to look past
``kappa = k(rho)``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConsistencyError, DomainError, RangeError
from .model import ModelCoefficients
from .vmf import log_vmf_normalization, vmf_moments

SCAN_NODES = 2000
ROOT_XTOL = 1e-14
MARGINAL_TOL = 1e-8
COMPAT_TOL = 1e-8

__all__ = [
    "Stability",
    "CompatibilityRoot",
    "CriticalDensities",
    "PhaseDiagram",
    "ExponentFit",
    "ratio_j_over_c",
    "ratio_slope",
    "critical_densities",
    "ratio_critical_points",
    "solve_compatibility",
    "uniform_stability",
    "phase_diagram",
    "equilibrium_free_energy",
    "crossing_density",
    "unimodality_violations",
    "critical_exponent_fit",
]


class Stability(str, enum.Enum):
    STABLE = "STABLE"
    UNSTABLE = "UNSTABLE"
    MARGINAL = "MARGINAL"


@dataclass(frozen=True)
class CompatibilityRoot:
    """One solution of the compatibility equation.

    ``slope`` is ``d(j/c)/dkappa`` at the root; it is ``nan`` for the uniform
    root ``kappa = 0``, whose stability is decided by ``rho`` versus ``rho_c``.
    ``branch`` is 0 for the uniform root and otherwise the index of the monotone
    piece of ``j/c`` containing ``kappa`` (1 for the first piece, and so on).
    """

    kappa: float
    rho: float
    c1: float
    stability: Stability
    slope: float
    branch: int = 0


@dataclass(frozen=True)
class CriticalDensities:
    rho_c: float
    rho_star: float
    kappa_star: float


@dataclass
class PhaseDiagram:
    """Equilibrium branches over a density grid.

    ``branches`` maps a branch id to a list of ``(rho, kappa, c1, stability,
    free_energy)`` tuples in grid order.  Branch 0 is the uniform state.
    """

    n: int
    rho_grid: np.ndarray
    branches: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def rows(self):
        """Flat rows ``(rho, branch, kappa, c1, stability, free_energy)`` sorted by rho then branch."""
        out = []
        for bid, pts in self.branches.items():
            for rho, kappa, c1, stab, fe in pts:
                out.append((rho, bid, kappa, c1, stab.value, fe))
        out.sort(key=lambda r: (r[0], r[1]))
        return out

    def branch_range(self, branch: int):
        """Smallest and largest grid density at which ``branch`` exists, or ``None``."""
        pts = self.branches.get(branch, [])
        if not pts:
            return None
        rhos = [p[0] for p in pts]
        return min(rhos), max(rhos)


@dataclass(frozen=True)
class ExponentFit:
    """Result of fitting ``c1 ~ alpha0 (rho - rho_c)^beta``.

    ``beta`` and ``alpha0`` are ``None`` when no fit is possible; ``reason``
    then says why.
    """

    beta: Optional[float]
    alpha0: Optional[float]
    reason: str = ""
    window: tuple = ()

    @property
    def ok(self) -> bool:
        return self.beta is not None


# ratio j/c ------------------------------------------------------------------


def _ratio_parts(model, n, kappa):
    k = np.asarray(kappa, dtype=float)
    _, c, cp = vmf_moments(k, n)
    j = np.asarray(model.j(k), dtype=float)
    jp = np.asarray(model.j_prime(k), dtype=float)
    return j, jp, np.asarray(c, dtype=float), np.asarray(cp, dtype=float)


def ratio_j_over_c(model: ModelCoefficients, n: int, kappa):
    """``j(kappa) / c(kappa)``: the density at which ``kappa`` is an equilibrium.

    At ``kappa = 0`` the limit ``rho_c`` is returned.

    Raises
    ------
    RangeError
        If ``kappa`` lies outside the domain of ``j``.
    """
    k = np.asarray(kappa, dtype=float)
    j, _, c, _ = _ratio_parts(model, n, k)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(k > 0, j / np.where(k > 0, c, 1.0), model.rho_c(n))
    return float(out) if out.ndim == 0 else out


def ratio_slope(model: ModelCoefficients, n: int, kappa):
    """Derivative ``(j/c)' = (j' c - j c') / c^2`` for ``kappa > 0``."""
    k = np.asarray(kappa, dtype=float)
    if np.any(k <= 0):
        raise DomainError("ratio slope needs kappa > 0")
    j, jp, c, cp = _ratio_parts(model, n, k)
    out = (jp * c - j * cp) / c**2
    return float(out) if out.ndim == 0 else out


def _scan_nodes(kappa_hi, count=SCAN_NODES, kappa_lo=None):
    half = count // 2
    lo = kappa_lo if kappa_lo is not None else 1e-6 * kappa_hi
    nodes = np.union1d(np.geomspace(lo, kappa_hi, half), np.linspace(lo, kappa_hi, count - half))
    return nodes


def _kappa_limit(model, r):
    """``k(r)``, nudged below ``kappa_max`` so that ``j`` stays finite."""
    kap = float(model.k(r))
    if math.isfinite(model.kappa_max):
        kap = min(kap, model.kappa_max * (1.0 - 1e-12))
    return kap


def ratio_critical_points(model: ModelCoefficients, n: int, kappa_hi: float, nodes: int = SCAN_NODES):
    """Interior local extrema of ``j/c`` on ``(0, kappa_hi]``, ascending."""
    grid = _scan_nodes(kappa_hi, nodes)
    s = ratio_slope(model, n, grid)
    out = []
    for i in np.nonzero(np.sign(s[:-1]) * np.sign(s[1:]) < 0)[0]:
        out.append(brentq(lambda x: ratio_slope(model, n, x), grid[i], grid[i + 1], xtol=ROOT_XTOL))
    return out


def _ratio_search_limit(model, n):
    """A ``kappa`` beyond which ``j/c`` exceeds every value it took before its minimum."""
    r_hi = 10.0 * (model.rho_c(n) if math.isfinite(model.rho_c(n)) else 1.0)
    for _ in range(60):
        kap = _kappa_limit(model, r_hi)
        grid = _scan_nodes(kap)
        ratio = ratio_j_over_c(model, n, grid)
        i = int(np.argmin(ratio))
        if i < len(grid) - 1 and ratio[-1] > 1.5 * ratio[i]:
            return grid, ratio
        r_hi *= 4.0
    raise RangeError("could not bracket the minimum of j/c", limit=model.kappa_max)


def critical_densities(model: ModelCoefficients, n: int) -> CriticalDensities:
    """Critical densities ``rho_c = n / k'(0)`` and ``rho_* = inf j/c``.

    ``kappa_star`` is the minimizer of ``j/c``; it is ``0`` when the infimum is
    the limit at ``kappa -> 0`` (second-order transitions).

    Examples
    --------
    >>> from phaselab.model import hysteresis
    >>> cd = critical_densities(hysteresis(), 2)
    >>> round(cd.rho_star, 4), round(cd.kappa_star, 4)
    (1.3726, 1.2619)
    """
    rho_c = model.rho_c(n)
    grid, ratio = _ratio_search_limit(model, n)
    i = int(np.argmin(ratio))
    if i == 0 and ratio_slope(model, n, grid[0]) >= 0:
        return CriticalDensities(rho_c=rho_c, rho_star=rho_c, kappa_star=0.0)
    lo, hi = grid[max(i - 1, 0)], grid[i + 1]
    kappa_star = brentq(lambda x: ratio_slope(model, n, x), lo, hi, xtol=ROOT_XTOL)
    rho_star = ratio_j_over_c(model, n, kappa_star)
    return CriticalDensities(rho_c=rho_c, rho_star=min(rho_star, rho_c), kappa_star=kappa_star)


def _classify(slope, rho):
    tol = MARGINAL_TOL * (1.0 + rho)
    if slope > tol:
        return Stability.STABLE
    if slope < -tol:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def uniform_stability(model: ModelCoefficients, n: int, rho: float) -> Stability:
    """Linear stability of the uniform state: stable below ``rho_c``, unstable above."""
    if rho <= 0:
        raise DomainError("rho must be positive")
    rho_c = model.rho_c(n)
    if rho < rho_c:
        return Stability.STABLE
    if rho > rho_c:
        return Stability.UNSTABLE
    return Stability.MARGINAL


def solve_compatibility(
    model: ModelCoefficients,
    n: int,
    rho: float,
    *,
    nodes: int = SCAN_NODES,
    critical_points: Optional[Sequence[float]] = None,
) -> list:
    """All solutions ``kappa >= 0`` of ``j(kappa) = rho c(kappa)``.

    The uniform root ``kappa = 0`` always comes first, followed by the positive
    roots in increasing order.

    Parameters
    ----------
    model, n, rho
        Model, dimension and density.
    nodes : int
        Number of scan nodes; roots closer than the grid spacing can be missed.
    critical_points : sequence of float, optional
        Precomputed extrema of ``j/c`` used for branch labels; computed when
        omitted.
    """
    if not rho > 0 or not math.isfinite(rho):
        raise DomainError(f"rho must be positive and finite, got {rho!r}")
    roots = [CompatibilityRoot(0.0, rho, 0.0, uniform_stability(model, n, rho), math.nan, 0)]
    kap_hi = _kappa_limit(model, rho)
    if kap_hi <= 0:
        return roots
    grid = _scan_nodes(kap_hi, nodes)
    j = np.asarray(model.j(grid), dtype=float)
    g = j - rho * vmf_moments(grid, n)[1]
    if critical_points is None:
        critical_points = ratio_critical_points(model, n, kap_hi)

    def resid(x):
        return float(model.j(x)) - rho * vmf_moments(x, n)[1]

    brackets = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    exact = np.nonzero(g == 0)[0]
    found = [float(grid[i]) for i in exact]
    for i in brackets:
        found.append(brentq(resid, grid[i], grid[i + 1], xtol=ROOT_XTOL * max(1.0, grid[i]), rtol=1e-15))
    if len(brackets) >= nodes // 4:
        warnings.warn(f"root count {len(brackets)} reaches the scan resolution", RuntimeWarning)
    for kappa in sorted(found):
        slope = ratio_slope(model, n, kappa)
        _, c, _ = vmf_moments(kappa, n)
        branch = 1 + int(np.searchsorted(np.asarray(critical_points, dtype=float), kappa))
        roots.append(CompatibilityRoot(kappa, rho, c, _classify(slope, rho), slope, branch))
    return roots


def equilibrium_free_energy(model: ModelCoefficients, n: int, rho: float, kappa: float) -> float:
    """Free energy of the equilibrium ``rho M_kappa``.

    ``F = rho ln rho + rho (kappa c - ln Z) - Phi(j(kappa))``; for ``kappa = 0``
    this is ``rho ln rho``.

    Raises
    ------
    ConsistencyError
        If ``(rho, kappa)`` violates the compatibility equation beyond ``1e-8``.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    if kappa == 0:
        return rho * math.log(rho)
    log_z, c, _ = vmf_moments(kappa, n)
    j = float(model.j(kappa))
    if abs(rho * c - j) > COMPAT_TOL * max(1.0, j):
        raise ConsistencyError(
            f"(rho={rho}, kappa={kappa}) is not an equilibrium: |rho c - j| = {abs(rho * c - j):.3e}"
        )
    return rho * math.log(rho) + rho * (kappa * c - log_z) - float(model.phi(j))


def _branch_excess(model, n, kappa):
    """``F_kappa - rho ln rho`` along the curve ``rho = j/c``."""
    log_z, c, _ = vmf_moments(kappa, n)
    j = float(model.j(kappa))
    rho = j / c
    return rho * (kappa * c - log_z) - float(model.phi(j))


def crossing_density(model: ModelCoefficients, n: int, *, samples: int = 400):
    """Density ``rho_1`` in ``(rho_*, rho_c)`` where the stable branch and the
    uniform state have equal free energy.

    The stable branch is parametrized by ``kappa`` (``rho = j/c`` is monotone
    on it), so the crossing is a scalar root in ``kappa``.

    Returns
    -------
    rho_1 : float
    kappa_1 : float
    sign_changes : int
        Number of sign changes of the free-energy difference on a sample grid;
        1 means the crossing is unique.

    Raises
    ------
    DomainError
        If the transition is not first order (``rho_* = rho_c``).
    """
    cd = critical_densities(model, n)
    if not math.isfinite(cd.rho_c) or cd.kappa_star == 0.0:
        raise DomainError("no bistable density range: rho_* equals rho_c")
    roots = solve_compatibility(model, n, cd.rho_c * (1 - 1e-12))
    upper = [r.kappa for r in roots if r.kappa > cd.kappa_star]
    kappa_c = upper[0]
    grid = np.linspace(cd.kappa_star, kappa_c, samples)[1:-1]
    vals = np.array([_branch_excess(model, n, x) for x in grid])
    changes = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(changes) == 0:
        raise ConsistencyError("free-energy difference does not change sign on the stable branch")
    i = changes[0]
    kappa_1 = brentq(lambda x: _branch_excess(model, n, x), grid[i], grid[i + 1], xtol=1e-13)
    return ratio_j_over_c(model, n, kappa_1), kappa_1, len(changes)


def unimodality_violations(model: ModelCoefficients, n: int, kappa_hi: float, nodes: int = SCAN_NODES):
    """Interior extrema of ``j/c`` beyond the first, i.e. departures from a
    single-minimum profile.  An empty list means ``j/c`` is unimodal on the grid."""
    return ratio_critical_points(model, n, kappa_hi, nodes)[1:]


def phase_diagram(model: ModelCoefficients, n: int, rho_grid) -> PhaseDiagram:
    """Sweep all equilibria over ``rho_grid``.

    Every positive root is assigned to the monotone piece of ``j/c`` it lies
    on, so each branch carries a single stability label and ``kappa`` is
    monotone along it.
    """
    rho_grid = np.asarray(rho_grid, dtype=float)
    if rho_grid.ndim != 1 or rho_grid.size == 0:
        raise DomainError("rho_grid must be a non-empty 1-D sequence")
    if np.any(rho_grid <= 0) or np.any(np.diff(rho_grid) <= 0):
        raise DomainError("rho_grid must be positive and strictly increasing")
    kap_top = _kappa_limit(model, float(rho_grid[-1]))
    crit = ratio_critical_points(model, n, kap_top)
    diagram = PhaseDiagram(n=n, rho_grid=rho_grid)
    for rho in rho_grid:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            roots = solve_compatibility(model, n, float(rho), critical_points=crit)
        for w in caught:
            diagram.warnings.append(f"rho={rho:.17g}: {w.message}")
        for r in roots:
            fe = equilibrium_free_energy(model, n, float(rho), r.kappa)
            diagram.branches.setdefault(r.branch, []).append((float(rho), r.kappa, r.c1, r.stability, fe))
    return diagram


def critical_exponent_fit(
    model: ModelCoefficients,
    n: int,
    *,
    window: tuple = (1e-4, 1e-2),
    points: int = 21,
) -> ExponentFit:
    """Fit the critical exponent ``beta`` of a second-order transition.

    The order parameter of the branch emerging from ``kappa = 0`` is sampled at
    ``rho = rho_c (1 + s)`` for ``s`` log-spaced in ``window`` and
    ``log c1`` is regressed on ``log(rho - rho_c)``.

    Returns an :class:`ExponentFit` whose ``beta`` is ``None`` with a reason if
    the transition is first order or ``rho_c`` is infinite.
    """
    rho_c = model.rho_c(n)
    if not math.isfinite(rho_c):
        return ExponentFit(None, None, "rho_c is infinite (k'(0) = 0)", window)
    cd = critical_densities(model, n)
    if cd.rho_star < rho_c * (1 - 1e-9):
        return ExponentFit(
            None, None, f"first-order transition: rho_* = {cd.rho_star:.6g} < rho_c = {rho_c:.6g}", window
        )
    s = np.geomspace(window[0], window[1], points)
    rhos = rho_c * (1.0 + s)
    c1 = []
    for rho in rhos:
        pos = [r for r in solve_compatibility(model, n, float(rho)) if r.kappa > 0]
        if not pos:
            return ExponentFit(None, None, f"no positive root at rho = {rho:.6g}", window)
        c1.append(pos[0].c1)
    x = np.log(rhos - rho_c)
    y = np.log(np.asarray(c1))
    beta, log_a = np.polyfit(x, y, 1)
    return ExponentFit(float(beta), float(math.exp(log_a)), "", window)
