"""Reaction-diffusion ODE systems on tensor-product grids.

The semidiscrete model is

    U'(t) = D * Lap_h U + a U + b U^{.M},

with U^{.M} the elementwise M-th power. This module supplies the right
hand side, a fixed-step RK4 reference solver with an automatic step
audit, containment and norm-decay checks, a discrete free energy that
the dynamics dissipate, and a small closed-form two-site demonstration
of sensitivity to initial data near blow-up.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .grid import (
    DIRICHLET,
    GridSpec,
    SparseOperator,
    SpatialField,
    build_laplacian_nd,
    mu1,
)
from .report import BoundReport, write_report_csv

GAMMA_UNDEFINED = "γ undefined (no finite invariant region)"
STIFFNESS_ERROR = "stiffness: reduce T or refine manually"

# reference_solve gives up after this many step halvings
MAX_HALVINGS = 12


@dataclass(frozen=True)
class RDParams:
    """Coefficients of the reaction-diffusion system."""

    D: float  # diffusion coefficient, must be positive
    a: float  # linear reaction coefficient
    b: float  # nonlinear coefficient; the model assumes b != 0
    M: int    # elementwise power in the nonlinearity, integer >= 2

    def __post_init__(self) -> None:
        if not self.D > 0:
            raise ValueError(f"need D > 0, got D={self.D}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"need integer M >= 2, got M={self.M}")
        object.__setattr__(self, "M", int(self.M))


def lambda1(params: RDParams, grid: GridSpec) -> float:
    """Largest eigenvalue of the linear part D*Lap_h + a*I.

    Periodic axes contribute 0 (constants are in the kernel), Dirichlet
    axes contribute D times the top one-axis eigenvalue each.
    """
    return params.D * sum(mu1(grid.n, bc) for bc in grid.axis_bcs) + params.a


def gamma(params: RDParams) -> float:
    """Scale (|a|/|b|)^(1/(M-1)) of the invariant region.

    Raises for b = 0, where no finite invariant region exists. For a = 0
    the value degenerates to 0 and a warning is emitted; callers that
    need a usable containment interval must supply their own.
    """
    if params.b == 0:
        raise ValueError(GAMMA_UNDEFINED)
    g = (abs(params.a) / abs(params.b)) ** (1.0 / (params.M - 1))
    if g == 0.0:
        warnings.warn(
            "a = 0 collapses the invariant-region scale to 0; "
            "containment checks need explicit bounds",
            stacklevel=2,
        )
    return g


def rhs(params: RDParams, lap: SparseOperator, U: SpatialField) -> SpatialField:
    """Evaluate D*Lap_h*U + a*U + b*U^{.M}."""
    v = U.values
    out = params.D * lap.apply(v) + params.a * v + params.b * v**params.M
    return SpatialField(out, U.grid)


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    """Discrete-time solution record.

    ``states[i]`` is the flattened field at ``times[i]``. If the
    integrator hit non-finite values the record is truncated at the last
    finite state and ``completed`` is False.
    """

    times: np.ndarray
    states: np.ndarray
    grid: GridSpec
    params: RDParams
    method: str = "rk4"
    step: float = 0.0
    halvings: int = 0   # step halvings spent by the reference solver
    completed: bool = True

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.times.ndim != 1 or self.states.shape != (self.times.size, self.grid.n_d):
            raise ValueError("trajectory shapes are inconsistent with the grid")
        if self.times.size >= 2 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def field(self, i: int) -> SpatialField:
        return SpatialField(self.states[i].copy(), self.grid)

    def sup_norms(self) -> np.ndarray:
        return np.max(np.abs(self.states), axis=1)

    def l2_norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)


def _as_values(U0, grid: GridSpec) -> np.ndarray:
    if isinstance(U0, SpatialField):
        if U0.grid != grid:
            raise ValueError("initial field lives on a different grid")
        return U0.values.copy()
    v = np.asarray(U0, dtype=float).reshape(-1)
    if v.size != grid.n_d:
        raise ValueError(f"initial data has {v.size} entries, grid expects {grid.n_d}")
    return v


def rk4_solve(
    params: RDParams,
    grid: GridSpec,
    U0,
    T: float,
    steps: int,
    lap: Optional[SparseOperator] = None,
) -> Trajectory:
    """Classic fixed-step RK4 over [0, T] with the given step count.

    Stops early (``completed=False``) if the iterate leaves the floating
    range, which is how step-size failures show up for stiff grids.
    """
    if T <= 0:
        raise ValueError(f"need T > 0, got T={T}")
    if steps < 1:
        raise ValueError("need at least one step")
    if lap is None:
        lap = build_laplacian_nd(grid)
    D, a, b, M = params.D, params.a, params.b, params.M

    def f(v: np.ndarray) -> np.ndarray:
        return D * lap.apply(v) + a * v + b * v**M

    h = T / steps
    u = _as_values(U0, grid)
    states = np.empty((steps + 1, u.size))
    states[0] = u
    n_done = 0
    # overflow here is how oversized steps announce themselves, so the
    # warnings are muted and the loop just stops at the last finite state
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(steps):
            k1 = f(u)
            k2 = f(u + 0.5 * h * k1)
            k3 = f(u + 0.5 * h * k2)
            k4 = f(u + h * k3)
            u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(u)):
                break
            states[i + 1] = u
            n_done = i + 1
    times = np.linspace(0.0, T, steps + 1)
    completed = n_done == steps
    return Trajectory(
        times=times[: n_done + 1],
        states=states[: n_done + 1],
        grid=grid,
        params=params,
        method="rk4",
        step=h,
        completed=completed,
    )


def _stability_steps(params: RDParams, grid: GridSpec, T: float) -> int:
    # crude spectral-radius estimate of the Jacobian near the origin;
    # RK4's real stability interval is about 2.78, keep a margin
    rate = 4.0 * params.D * grid.d * (grid.n + 1) ** 2 + abs(params.a) + abs(params.b)
    return max(16, int(math.ceil(T * rate / 2.5)))


def reference_solve(
    params: RDParams,
    grid: GridSpec,
    U0,
    T: float,
    tol: float = 1e-10,
    lap: Optional[SparseOperator] = None,
) -> Trajectory:
    """RK4 solve with the step refined until max_t ||U||_inf settles.

    Starting from a stability-limited step, the step is halved until one
    more halving moves the peak sup norm by less than ``tol``. The peak
    alone is a weak yardstick for decaying solutions (it sits at t = 0
    and never moves), so the whole solution curve is also required to
    settle at shared time points: the doubled grid contains the coarse
    grid as every other sample. Runs that blow up count as unconverged.
    After MAX_HALVINGS halvings the solve is abandoned with a stiffness
    error.
    """
    if lap is None:
        lap = build_laplacian_nd(grid)
    steps = _stability_steps(params, grid, T)

    prev = rk4_solve(params, grid, U0, T, steps, lap=lap)
    for halving in range(1, MAX_HALVINGS + 1):
        steps *= 2
        cur = rk4_solve(params, grid, U0, T, steps, lap=lap)
        if prev.completed and cur.completed:
            peak_drift = abs(
                float(np.max(np.abs(cur.states))) - float(np.max(np.abs(prev.states)))
            )
            curve_drift = float(np.max(np.abs(cur.states[::2] - prev.states)))
            if peak_drift < tol and curve_drift < tol:
                cur.halvings = halving
                return cur
        prev = cur
    raise RuntimeError(STIFFNESS_ERROR)


# ---------------------------------------------------------------------------
# containment and decay checks
# ---------------------------------------------------------------------------


def invariant_interval(params: RDParams) -> Tuple[float, float]:
    """Extreme real zeros [gamma1, gamma2] of the reaction a*u + b*u^M.

    These bracket the largest interval on which the reaction pushes
    inward, so trajectories started inside stay inside. Zeros are located
    by a sign scan plus root bracketing on [-2*gamma, 2*gamma]. The a = 0
    case degenerates to the single zero at the origin.
    """
    g = gamma(params)
    if g == 0.0:
        return (0.0, 0.0)
    a, b, M = params.a, params.b, params.M

    def reaction(u: float) -> float:
        return a * u + b * u**M

    grid_pts = np.linspace(-2.0 * g, 2.0 * g, 4001)
    vals = reaction(grid_pts)
    roots = [0.0]
    for i in range(len(grid_pts) - 1):
        lo, hi = vals[i], vals[i + 1]
        if lo == 0.0:
            roots.append(float(grid_pts[i]))
        elif lo * hi < 0.0:
            roots.append(float(brentq(reaction, grid_pts[i], grid_pts[i + 1])))
    if vals[-1] == 0.0:
        roots.append(float(grid_pts[-1]))
    return (min(roots), max(roots))


def check_maximum_principle(
    traj: Trajectory,
    gamma1: Optional[float] = None,
    gamma2: Optional[float] = None,
    slack: float = 1e-8,
) -> BoundReport:
    """Check pointwise containment of a trajectory in [gamma1, gamma2].

    Defaults come from ``invariant_interval``. The check only asserts
    anything when the initial state is inside the interval; otherwise
    the report carries ``precondition_ok=False`` and the margins are
    informational. Violations are recorded, never raised.
    """
    if gamma1 is None or gamma2 is None:
        g1_default, g2_default = invariant_interval(traj.params)
        gamma1 = g1_default if gamma1 is None else gamma1
        gamma2 = g2_default if gamma2 is None else gamma2
    if gamma1 > gamma2:
        raise ValueError(f"empty interval: gamma1={gamma1} > gamma2={gamma2}")

    mins = np.min(traj.states, axis=1)
    maxs = np.max(traj.states, axis=1)
    margins = np.minimum(mins - gamma1, gamma2 - maxs)
    pre_ok = bool(margins[0] >= -slack)
    worst = float(np.min(margins))
    ok = worst >= -slack if pre_ok else True

    # keep the report light: subsample rows but always include the worst
    idx = list(range(0, traj.times.size, max(1, traj.times.size // 200)))
    worst_i = int(np.argmin(margins))
    if worst_i not in idx:
        idx.append(worst_i)
        idx.sort()
    rows = [
        {"t": float(traj.times[i]), "min": float(mins[i]), "max": float(maxs[i]),
         "margin": float(margins[i])}
        for i in idx
    ]
    return BoundReport(
        name="pointwise containment",
        ok=ok,
        margin=worst,
        tolerance=slack,
        precondition_ok=pre_ok,
        rows=rows,
        notes=f"interval [{gamma1:.6g}, {gamma2:.6g}]",
    )


def l2_decay_checks(traj: Trajectory, slack: float = 1e-8) -> List[BoundReport]:
    """Check the two a priori 2-norm estimates along a trajectory.

    Returns one report for the exponential envelope (valid when the
    initial sup norm is within the invariant-region scale) and one for
    plain monotone contraction (valid when the linear part is strictly
    stable and the initial 2-norm is large enough for the nonlinearity
    to assist). Preconditions are evaluated and reported; a failed
    precondition makes the corresponding check vacuous, not failed.
    """
    params = traj.params
    lam1 = lambda1(params, traj.grid)
    l2 = traj.l2_norms()
    n0 = float(l2[0])
    sup0 = float(np.max(np.abs(traj.states[0])))
    reports: List[BoundReport] = []

    # exponential envelope exp((lam1 + |b| g^(M-1)) t) * ||U0||
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            g = gamma(params)
        pre_env = sup0 <= g + slack
        rate = lam1 + abs(params.b) * g ** (params.M - 1)
        note_env = f"rate {rate:.6g}"
    except ValueError:
        pre_env, rate, note_env = False, math.nan, "b = 0, scale undefined"
    if pre_env:
        envelope = n0 * np.exp(rate * traj.times)
        margins = envelope - l2
        worst = float(np.min(margins))
        ok = worst >= -slack * max(1.0, n0)
    else:
        worst, ok = math.nan, True
    reports.append(
        BoundReport(
            name="l2 exponential envelope",
            ok=ok,
            margin=worst,
            tolerance=slack * max(1.0, n0),
            precondition_ok=pre_env,
            notes=note_env,
        )
    )

    # monotone contraction ||U(t)|| <= ||U0||
    pre_con = lam1 < 0 and abs(params.b) * n0 ** (params.M - 1) + lam1 >= 0
    if pre_con:
        worst = float(np.min(n0 - l2))
        ok = worst >= -slack * max(1.0, n0)
    else:
        worst, ok = math.nan, True
    reports.append(
        BoundReport(
            name="l2 monotone contraction",
            ok=ok,
            margin=worst,
            tolerance=slack * max(1.0, n0),
            precondition_ok=pre_con,
            notes=f"lambda1 {lam1:.6g}, initial l2 norm {n0:.6g}",
        )
    )
    return reports


# ---------------------------------------------------------------------------
# discrete free energy
# ---------------------------------------------------------------------------


def energy(params: RDParams, grid: GridSpec, U: SpatialField) -> float:
    """Discrete free energy dissipated by the dynamics.

    Sum of (D/2) |grad_h U|^2 and the reaction potential
    -(a u^2/2 + b u^(M+1)/(M+1)), both weighted by the cell volume.
    Gradients are one-sided differences; Dirichlet axes include the
    boundary gaps against the zero ghost values, periodic axes wrap.
    The negative gradient of this functional is exactly the cell-volume
    multiple of the right hand side, so it decreases along solutions.
    """
    tensor = U.reshaped()
    vol = 1.0
    for axis in range(grid.d):
        vol *= grid.spacing(axis)
    grad_sq = 0.0
    for axis in range(grid.d):
        dx = grid.spacing(axis)
        if grid.axis_bcs[axis] == DIRICHLET:
            pad = [(0, 0)] * grid.d
            pad[axis] = (1, 1)
            padded = np.pad(tensor, pad)  # ghost zeros at both walls
            diffs = np.diff(padded, axis=axis)
        else:
            wrapped = np.concatenate(
                [tensor, np.take(tensor, [0], axis=axis)], axis=axis
            )
            diffs = np.diff(wrapped, axis=axis)
        grad_sq += float(np.sum(diffs**2)) / dx**2
    u = U.values
    potential = -(params.a * u**2 / 2.0 + params.b * u ** (params.M + 1) / (params.M + 1))
    return vol * (0.5 * params.D * grad_sq + float(np.sum(potential)))


def energy_series(traj: Trajectory) -> np.ndarray:
    return np.array(
        [energy(traj.params, traj.grid, traj.field(i)) for i in range(traj.times.size)]
    )


# ---------------------------------------------------------------------------
# sensitivity demonstration near blow-up
# ---------------------------------------------------------------------------


@dataclass
class HardnessDemo:
    """Closed-form divergence of two nearby states under u' = -u + R u^2."""

    R: float
    eps: float
    t_star: float            # blow-up time of the perturbed state
    t_star_cap: float        # upper bound on t_star depending only on eps
    times: np.ndarray        # sample times on [0, 0.99 t_star]
    overlaps: np.ndarray     # normalized inner product of the two states
    drop_time: Optional[float]  # first time overlap < 3/sqrt(10), if any


def _scalar_blowup(u0: float, R: float, t: np.ndarray) -> np.ndarray:
    # solution of u' = -u + R u^2 through u0 (substitute z = 1/u)
    return 1.0 / (R + (1.0 / u0 - R) * np.exp(t))


def hardness_demo(R: float, eps: float, samples: int = 512) -> HardnessDemo:
    """Track the overlap of two nearby two-site states toward blow-up.

    Both states follow the decoupled dynamics u_i' = -u_i + R u_i^2.
    The base state starts at (1, 1)/sqrt(2), a fixed point direction; the
    perturbed state is the same vector rotated so the initial overlap is
    1 - eps. The perturbed state reaches blow-up at t_star and the curve
    is sampled up to 0.99 t_star, by which point the overlap has fallen
    below 3/sqrt(10).
    """
    if R < math.sqrt(2.0) - 1e-12:
        raise ValueError(f"need R >= sqrt(2), got R={R}")
    if not 0.0 < eps < 0.5:
        raise ValueError(f"need 0 < eps < 1/2, got eps={eps}")
    theta = 2.0 * math.asin(math.sqrt(eps / 2.0))
    phi0 = np.array([1.0, 1.0]) / math.sqrt(2.0)
    psi0 = np.array([math.cos(theta + math.pi / 4.0), math.sin(theta + math.pi / 4.0)])

    w0 = psi0.max()   # the larger perturbed component blows up first
    t_star = math.log(R / (R - 1.0 / w0))
    s = math.sqrt(2.0 * eps - eps**2)
    t_star_cap = math.log((s + 1.0 - eps) / (s - eps))

    times = np.linspace(0.0, 0.99 * t_star, samples)
    phi = np.stack([_scalar_blowup(c, R, times) for c in phi0])
    psi = np.stack([_scalar_blowup(c, R, times) for c in psi0])
    dots = np.sum(phi * psi, axis=0)
    overlaps = dots / (np.linalg.norm(phi, axis=0) * np.linalg.norm(psi, axis=0))

    threshold = 3.0 / math.sqrt(10.0)
    below = np.nonzero(overlaps < threshold)[0]
    drop_time = float(times[below[0]]) if below.size else None
    return HardnessDemo(
        R=R,
        eps=eps,
        t_star=t_star,
        t_star_cap=t_star_cap,
        times=times,
        overlaps=overlaps,
        drop_time=drop_time,
    )


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as rows (t, j, value), one row per node per time."""
    def rows():
        for i, t in enumerate(traj.times):
            for j, v in enumerate(traj.states[i]):
                yield (f"{t:.17g}", j, f"{v:.17g}")

    write_report_csv(path, ["t", "j", "value"], rows())
