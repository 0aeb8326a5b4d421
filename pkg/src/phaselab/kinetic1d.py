"""Homogeneous kinetic Fokker-Planck equation on the circle.

The probability density ``f`` (mean 1 with respect to the uniform measure)
evolves by::

    df/dt = tau d^2f/dtheta^2 + nu d/dtheta( sin(theta - phi) f ),

where ``phi`` is the angle of the current ``J = <(cos, sin) f>`` and
``nu, tau`` are evaluated at ``rho |J|``.  The density ``rho`` is a parameter
of the equation and may depend on time.

Discretization
    Conservative central differences on ``m`` uniform nodes, written in flux
    form so the discrete mass is conserved exactly.  Time stepping is backward
    Euler with ``nu``, ``tau`` and ``phi`` frozen at the start of the step, so
    every step costs one cyclic tridiagonal solve.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .errors import ConvergenceError, DomainError, PhaselabError
from .model import ModelCoefficients
from .vmf import log_vmf_normalization

DIVERGENCE_GUARD = 1.0 + 1e-6

__all__ = [
    "KineticState",
    "HysteresisProtocol",
    "Trace",
    "uniform_state",
    "vmf_state",
    "perturbed_uniform",
    "current_J",
    "step",
    "reinforce",
    "run_relaxation",
    "run_hysteresis",
    "measure_decay_rate",
    "free_energy_discrete",
    "jump_locations",
    "loop_area",
]


@dataclass(frozen=True)
class KineticState:
    """Grid values of ``f`` at ``theta_i = 2 pi i / m`` with time stamp."""

    values: np.ndarray
    t: float = 0.0
    rho: float = 1.0
    dt: float = 0.01

    @property
    def m(self) -> int:
        return self.values.size

    @property
    def theta(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.m) / self.m

    def replace(self, **kw) -> "KineticState":
        d = dict(values=self.values, t=self.t, rho=self.rho, dt=self.dt)
        d.update(kw)
        return KineticState(**d)


def _default_rho(t, T=500.0):
    return 1.75 - 0.75 * np.cos(np.pi * t / T)


@dataclass(frozen=True)
class HysteresisProtocol:
    """Slow density cycle ``rho(t)``, by default ``1.75 - 0.75 cos(pi t / T)``.

    ``epsilon_threshold`` is the reinforcement level used by the kinetic
    solver; the particle solver ignores it.
    """

    T: float = 500.0
    epsilon_threshold: float = 0.02
    t_end: Optional[float] = None
    dt: float = 0.01
    m: int = 100
    rho_of_t: Optional[Callable[[float], float]] = None
    record_every: int = 10

    def __post_init__(self):
        if self.T <= 0 or self.dt <= 0 or self.m < 16:
            raise DomainError("protocol needs T > 0, dt > 0 and m >= 16")
        if self.epsilon_threshold < 0:
            raise DomainError("epsilon_threshold must be >= 0")
        probe = np.linspace(0.0, self.duration, 257)
        if np.any(np.asarray([self.rho(t) for t in probe]) <= 0):
            raise DomainError("rho(t) must stay positive over the protocol")

    @property
    def duration(self) -> float:
        return 2.0 * self.T if self.t_end is None else self.t_end

    def rho(self, t: float) -> float:
        if self.rho_of_t is not None:
            return float(self.rho_of_t(t))
        return float(_default_rho(t, self.T))


@dataclass
class Trace:
    """Time series of a run.

    ``free_energy`` is the free energy at the density of each record for the
    kinetic solver and ``nan`` for particle runs.
    ``distance`` is the sup-distance to the reference equilibrium of a
    relaxation run (see :func:`run_relaxation`).
    ``min_value`` is the smallest grid value (or ``nan`` for particles) seen
    during the run; a negative value flags a positivity violation.
    """

    times: np.ndarray
    order_parameter: np.ndarray
    rho: np.ndarray
    free_energy: np.ndarray
    min_value: float = math.nan
    meta: dict = field(default_factory=dict)
    distance: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.distance is None:
            self.distance = np.full(len(self.times), math.nan)
        lengths = {
            len(self.times),
            len(self.order_parameter),
            len(self.rho),
            len(self.free_energy),
            len(self.distance),
        }
        if len(lengths) != 1:
            raise ValueError("trace series must have equal length")


# states ---------------------------------------------------------------------


def _grid(m):
    return 2.0 * np.pi * np.arange(m) / m


def uniform_state(m: int = 100, rho: float = 1.0, dt: float = 0.01) -> KineticState:
    return KineticState(np.ones(m), 0.0, rho, dt)


def vmf_state(kappa: float, m: int = 100, phi: float = 0.0, rho: float = 1.0, dt: float = 0.01) -> KineticState:
    """Sampled von Mises density ``e^{kappa cos(theta - phi)} / Z(kappa)``."""
    th = _grid(m)
    vals = np.exp(kappa * np.cos(th - phi) - log_vmf_normalization(kappa, 2))
    return KineticState(vals, 0.0, rho, dt)


def perturbed_uniform(amplitude: float, m: int = 100, phi: float = 0.0, rho: float = 1.0, dt: float = 0.01):
    """``1 + 2 a cos(theta - phi)``, whose current is ``a (cos phi, sin phi)``."""
    th = _grid(m)
    return KineticState(1.0 + 2.0 * amplitude * np.cos(th - phi), 0.0, rho, dt)


def current_J(state: KineticState) -> np.ndarray:
    """First moment ``J = <(cos theta, sin theta) f>`` by the periodic trapezoid rule."""
    th = state.theta
    f = state.values
    return np.array([np.mean(f * np.cos(th)), np.mean(f * np.sin(th))])


# stepping -------------------------------------------------------------------


def _cyclic_solve(lower, diag, upper, rhs):
    """Solve a cyclic tridiagonal system.

    ``lower[i]`` multiplies ``x[i-1]`` in row ``i`` (``lower[0]`` is the corner
    entry for ``x[m-1]``) and ``upper[i]`` multiplies ``x[i+1]``
    (``upper[m-1]`` is the corner entry for ``x[0]``).  Uses one banded solve
    with two right-hand sides and a Sherman-Morrison correction.
    """
    m = diag.size
    alpha = upper[-1]  # A[m-1, 0]
    beta = lower[0]  # A[0, m-1]
    gamma = -diag[0]
    d = diag.copy()
    d[0] -= gamma
    d[-1] -= alpha * beta / gamma
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1] = d
    ab[2, :-1] = lower[1:]
    u = np.zeros(m)
    u[0] = gamma
    u[-1] = alpha
    sol = solve_banded((1, 1), ab, np.column_stack([rhs, u]), check_finite=False)
    y, z = sol[:, 0], sol[:, 1]
    vy = y[0] + beta / gamma * y[-1]
    vz = z[0] + beta / gamma * z[-1]
    return y - vy / (1.0 + vz) * z


def _coefficients(model, f, theta, rho):
    J = np.array([np.mean(f * np.cos(theta)), np.mean(f * np.sin(theta))])
    norm = float(np.hypot(J[0], J[1]))
    phi = math.atan2(J[1], J[0]) if norm > 0 else 0.0
    nu = float(model.nu(rho * norm))
    tau = float(model.tau(rho * norm))
    return nu, tau, phi, norm


def step(state: KineticState, rho: float, model: ModelCoefficients) -> KineticState:
    """Advance ``state`` by ``state.dt`` at density ``rho``.

    Raises
    ------
    PhaselabError
        If the linear system is singular or produces non-finite values.
    """
    f = state.values
    m = f.size
    if m < 16 or state.dt <= 0:
        raise DomainError("step needs m >= 16 and dt > 0")
    h = 2.0 * np.pi / m
    theta = state.theta
    nu, tau, phi, _ = _coefficients(model, f, theta, rho)
    dt = state.dt
    # drift at the cell faces theta_{i+1/2}
    a_plus = -nu * np.sin(theta + 0.5 * h - phi)
    a_minus = np.roll(a_plus, 1)
    diff = tau / h**2
    lower = -dt * (diff + a_minus / (2 * h))
    upper = -dt * (diff - a_plus / (2 * h))
    diag = 1.0 + dt * (2 * diff + (a_plus - a_minus) / (2 * h))
    new = _cyclic_solve(lower, diag, upper, f)
    if not np.all(np.isfinite(new)):
        raise PhaselabError("kinetic step produced non-finite values (singular system)")
    return state.replace(values=new, t=state.t + dt, rho=rho)


def reinforce(state: KineticState, epsilon: float) -> KineticState:
    """Push a near-uniform state away from uniformity.

    If ``||f - 1||_inf <= epsilon``, add ``(epsilon - ||f - 1||_inf) cos(theta - phi)``
    with ``phi`` the direction of the current (the x-axis if the current
    vanishes).  The sup-distance to 1 then stays ``<= epsilon`` and the mean is
    unchanged.
    """
    f = state.values
    dev = float(np.max(np.abs(f - 1.0)))
    boost = max(0.0, epsilon - dev)
    if boost == 0.0:
        return state
    J = current_J(state)
    phi = math.atan2(J[1], J[0]) if np.hypot(J[0], J[1]) > 0 else 0.0
    return state.replace(values=f + boost * np.cos(state.theta - phi))


def free_energy_discrete(state: KineticState, rho: float, model: ModelCoefficients) -> float:
    """Free energy ``<f ln f> - Phi(|J_f|)`` of ``f = rho * values``.

    Non-positive grid values are clipped to ``1e-300`` with a warning.
    """
    f = rho * state.values
    if np.any(f <= 0):
        warnings.warn("non-positive density values clipped for the free energy", RuntimeWarning)
        f = np.maximum(f, 1e-300)
    J = current_J(state)
    return float(np.mean(f * np.log(f)) - model.phi(rho * float(np.hypot(J[0], J[1]))))


# runs -----------------------------------------------------------------------


def run_relaxation(
    model: ModelCoefficients,
    f0: KineticState,
    rho: float,
    t_end: float,
    *,
    record_every: int = 1,
    reference: Optional[np.ndarray] = None,
    align: bool = False,
) -> Trace:
    """Integrate at fixed ``rho`` up to ``t_end`` and record ``|J|`` and the free energy.

    The ``distance`` series is ``max |f - reference|`` (``reference``
    defaults to the uniform density).  With ``align=True`` the reference,
    assumed centred on ``theta = 0``, is first rotated to the current direction
    of ``J`` by a Fourier shift, so the neutral rotation mode of a non-uniform
    equilibrium does not register as a distance.

    Raises
    ------
    ConvergenceError
        If ``|J|`` exceeds ``1 + 1e-6`` (the scheme has left the set of
        probability densities).
    """
    if abs(np.mean(f0.values) - 1.0) > 1e-10:
        raise DomainError("initial state must have mean 1")
    nsteps = int(round(t_end / f0.dt))
    state = f0.replace(rho=rho)
    ref = np.ones(f0.m) if reference is None else np.asarray(reference, dtype=float)

    ref_hat = np.fft.rfft(ref)
    wavenumbers = np.arange(ref_hat.size)

    def dist(st, J):
        target = ref
        if align:
            phi = math.atan2(J[1], J[0])
            target = np.fft.irfft(ref_hat * np.exp(-1j * wavenumbers * phi), n=ref.size)
        return float(np.max(np.abs(st.values - target)))

    times, ops, fes, dists = [state.t], [], [], []
    J = current_J(state)
    ops.append(float(np.hypot(*J)))
    fes.append(free_energy_discrete(state, rho, model))
    dists.append(dist(state, J))
    vmin = float(state.values.min())
    for k in range(1, nsteps + 1):
        state = step(state, rho, model)
        vmin = min(vmin, float(state.values.min()))
        if k % record_every == 0 or k == nsteps:
            J = current_J(state)
            norm = float(np.hypot(*J))
            if norm > DIVERGENCE_GUARD:
                raise ConvergenceError(f"|J| = {norm:.6g} > 1 at t = {state.t:.6g}: the scheme diverged", norm)
            times.append(state.t)
            ops.append(norm)
            fes.append(free_energy_discrete(state, rho, model))
            dists.append(dist(state, J))
    n = len(times)
    return Trace(
        times=np.asarray(times),
        order_parameter=np.asarray(ops),
        rho=np.full(n, float(rho)),
        free_energy=np.asarray(fes),
        min_value=vmin,
        meta={"final_state": state},
        distance=np.asarray(dists),
    )


def run_hysteresis(
    model: ModelCoefficients,
    protocol: HysteresisProtocol = HysteresisProtocol(),
    f0: Optional[KineticState] = None,
) -> Trace:
    """Integrate with the time-dependent density of ``protocol``.

    After each step the state is reinforced with :func:`reinforce`, so that a
    state near the uniform one cannot stay trapped there once it becomes
    unstable.
    """
    m, dt = protocol.m, protocol.dt
    state = uniform_state(m, protocol.rho(0.0), dt) if f0 is None else f0
    nsteps = int(round(protocol.duration / dt))
    eps = protocol.epsilon_threshold
    state = reinforce(state, eps)
    times, ops, rhos = [0.0], [float(np.hypot(*current_J(state)))], [protocol.rho(0.0)]
    fes = [free_energy_discrete(state, rhos[0], model)]
    vmin = float(state.values.min())
    for k in range(1, nsteps + 1):
        rho = protocol.rho(k * dt)
        state = reinforce(step(state, rho, model), eps)
        vmin = min(vmin, float(state.values.min()))
        if k % protocol.record_every == 0 or k == nsteps:
            norm = float(np.hypot(*current_J(state)))
            if norm > DIVERGENCE_GUARD:
                raise ConvergenceError(f"|J| = {norm:.6g} > 1 at t = {state.t:.6g}", norm)
            times.append(k * dt)
            ops.append(norm)
            rhos.append(rho)
            fes.append(free_energy_discrete(state, rho, model))
    return Trace(
        times=np.asarray(times),
        order_parameter=np.asarray(ops),
        rho=np.asarray(rhos),
        free_energy=np.asarray(fes),
        min_value=vmin,
        meta={"engine": "kinetic", "T": protocol.T, "m": m, "dt": dt, "epsilon": eps},
    )


def measure_decay_rate(
    trace: Trace,
    window: tuple,
    target: float = 0.0,
    *,
    series: str = "order_parameter",
    r2_min: float = 0.999,
) -> float:
    """Exponential decay rate of ``|y(t) - target|`` over ``window = (t0, t1)``.

    ``y`` is the trace series named by ``series`` (``"order_parameter"`` or
    ``"distance"``).  Returns the negated least-squares slope of
    ``log |y - target|``.

    Raises
    ------
    ConvergenceError
        ``"no decay detected"`` when the distance does not shrink or the
        log-linear fit has ``R^2 < r2_min``.
    """
    t0, t1 = window
    mask = (trace.times >= t0) & (trace.times <= t1)
    if series not in ("order_parameter", "distance"):
        raise DomainError(f"unknown series {series!r}")
    dist = np.abs(getattr(trace, series)[mask] - target)
    t = trace.times[mask]
    if t.size < 3 or np.any(dist <= 0):
        raise ConvergenceError("no decay detected: distance vanished or too few samples")
    y = np.log(dist)
    slope, icpt = np.polyfit(t, y, 1)
    ss_res = float(np.sum((y - (slope * t + icpt)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    if slope >= 0 or r2 < r2_min or y[0] - y[-1] < 1e-6:
        raise ConvergenceError(f"no decay detected (slope {slope:.3e}, R^2 {r2:.6f})", r2)
    return float(-slope)


def jump_locations(trace: Trace, level: float):
    """Densities where ``|J|`` crosses ``level``: upward while ``rho`` rises and
    downward while ``rho`` falls.

    Returns ``(rho_up, rho_down)``; either is ``nan`` if no crossing occurs.
    Each crossing is linearly interpolated between records.
    """
    c, r = trace.order_parameter, trace.rho
    drho = np.gradient(r, trace.times)
    up = down = math.nan
    for i in range(len(c) - 1):
        if math.isnan(up) and drho[i] > 0 and c[i] < level <= c[i + 1]:
            up = r[i] + (level - c[i]) / (c[i + 1] - c[i]) * (r[i + 1] - r[i])
        if math.isnan(down) and drho[i] < 0 and c[i] >= level > c[i + 1]:
            down = r[i] + (level - c[i]) / (c[i + 1] - c[i]) * (r[i + 1] - r[i])
    return up, down


def loop_area(trace: Trace) -> float:
    """Signed area ``-oint c1 d rho`` enclosed by the order-parameter loop.

    Positive when the upper (ordered) path is taken while ``rho`` decreases,
    i.e. for a hysteresis loop traversed clockwise in the (rho, c1) plane.
    """
    return float(-np.trapezoid(trace.order_parameter, trace.rho))
