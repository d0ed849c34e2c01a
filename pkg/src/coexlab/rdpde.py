"""1-D reaction-diffusion tools: explicit solver, traveling-front speed
estimation, the analytic sign-of-speed integral, and the critical birth-rate
bisection for the two-neighbor (sexual) reaction.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


def sexual_rho2(beta: float) -> float:
    """Upper nontrivial root of -1 + beta*u*(1-u); exists iff beta > 4."""
    if beta <= 4:
        raise ValueError("nontrivial fixed points need beta > 4")
    return 0.5 * (1.0 + np.sqrt(1.0 - 4.0 / beta))


def sexual_rho1(beta: float) -> float:
    if beta <= 4:
        raise ValueError("nontrivial fixed points need beta > 4")
    return 0.5 * (1.0 - np.sqrt(1.0 - 4.0 / beta))


@dataclass(frozen=True)
class SexualReaction:
    """g(u) = u(-1 + beta*u*(1-u)), one component."""

    beta: float
    components = 1

    def terms(self, u: np.ndarray) -> np.ndarray:
        v = u[0]
        return np.array([v * (-1.0 + self.beta * v * (1.0 - v))])

    def front_states(self):
        rho2 = sexual_rho2(self.beta)
        return np.array([rho2]), np.array([0.0])

    def front_level(self):
        return 0, sexual_rho2(self.beta) / 2.0


@dataclass(frozen=True)
class CatalystReaction:
    """Two components (CO, O): deposition minus reaction, per the catalytic
    surface system."""

    p: float
    q: float
    r: float
    components = 2

    def terms(self, u: np.ndarray) -> np.ndarray:
        vac = 1.0 - u[0] - u[1]
        react = self.r * u[0] * u[1]
        return np.array([self.p * vac - react, self.q * vac ** 2 - react])

    def front_states(self):
        pts = catalyst_fixed_points(self.p, self.q, self.r)
        interior = [pt for pt in pts if pt[0] > 0 and pt[1] > 0]
        if not interior:
            raise ValueError("no interior fixed point for these parameters")
        return np.array(interior[0]), np.array([1.0, 0.0])

    def front_level(self):
        # track the O component: high on the left, zero on the right
        left, right = self.front_states()
        return 1, (left[1] + right[1]) / 2.0


@dataclass
class PdeState:
    """Explicit-scheme state on a 1-D grid with zero-flux boundaries."""

    dx: float
    dt: float
    u: np.ndarray  # (components, N)
    time: float = 0.0

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        comps = self.u.shape[0]
        if self.dt > self.dx ** 2 / (2.0 * comps):
            raise ValueError("explicit stability bound violated: "
                             f"dt={self.dt} > dx^2/(2*{comps})")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("non-finite PDE state")

    @property
    def n_cells(self) -> int:
        return self.u.shape[1]

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_cells) * self.dx

    def copy(self) -> "PdeState":
        return PdeState(self.dx, self.dt, self.u.copy(), self.time)


def front_initial_state(reaction, n_cells: int, dx: float,
                        dt: float = None) -> PdeState:
    """Left half at the invading equilibrium, right half at the invaded one."""
    left, right = reaction.front_states()
    u = np.empty((reaction.components, n_cells))
    mid = n_cells // 2
    u[:, :mid] = left[:, None]
    u[:, mid:] = right[:, None]
    if dt is None:
        dt = 0.8 * dx ** 2 / (2.0 * reaction.components)
    return PdeState(dx, dt, u)


def _laplacian(u: np.ndarray, dx: float) -> np.ndarray:
    """3-point Laplacian with zero-flux (mirror) boundaries."""
    padded = np.pad(u, ((0, 0), (1, 1)), mode="edge")
    return (padded[:, :-2] - 2.0 * u + padded[:, 2:]) / dx ** 2


def integrate_pde(reaction, state: PdeState, T: float,
                  observer=None, observe_every: float = 1.0) -> PdeState:
    """Forward-Euler to time state.time + T; optional observer(t, u) called
    on a fixed cadence."""
    steps = int(round(T / state.dt))
    next_obs = state.time
    for k in range(steps):
        if observer is not None and state.time >= next_obs - 1e-12:
            observer(state.time, state.u)
            next_obs += observe_every
        state.u += state.dt * (_laplacian(state.u, state.dx)
                               + reaction.terms(state.u))
        state.time += state.dt
    if observer is not None:
        observer(state.time, state.u)
    if not np.all(np.isfinite(state.u)):
        raise RuntimeError("PDE state diverged")
    return state


def speed_sign(beta: float, zero_band: float = 1e-12) -> int:
    """Sign of the front speed from the exact polynomial integral of
    g(u) = -u + beta*u^2 - beta*u^3 over [0, rho2]."""
    rho = sexual_rho2(beta)
    integral = -rho ** 2 / 2.0 + beta * rho ** 3 / 3.0 - beta * rho ** 4 / 4.0
    if integral > zero_band:
        return 1
    if integral < -zero_band:
        return -1
    return 0


@dataclass
class WaveSpeedEstimate:
    speed: float
    residual: float
    level: float
    window: tuple[float, float]
    valid: bool = True


def estimate_front_speed(reaction, T: float, n_cells: int = 2000,
                         dx: float = 0.1, dt: float = None,
                         sample_every: float = 1.0) -> WaveSpeedEstimate:
    """Track the level crossing of the front profile and regress position
    against time over the last half of the run."""
    state = front_initial_state(reaction, n_cells, dx, dt)
    comp, level = reaction.front_level()
    times, positions = [], []
    edge_hit = [False]

    def observer(t, u):
        prof = u[comp]
        # rightmost downward crossing of the level
        above = prof >= level
        idx = np.nonzero(above[:-1] & ~above[1:])[0]
        if len(idx) == 0:
            edge_hit[0] = True
            return
        i = idx[-1]
        frac = (prof[i] - level) / (prof[i] - prof[i + 1])
        pos = (i + frac) * dx
        if pos < 5 * dx or pos > (n_cells - 5) * dx:
            edge_hit[0] = True
        times.append(t)
        positions.append(pos)

    integrate_pde(reaction, state, T, observer, sample_every)
    times_a = np.asarray(times)
    pos_a = np.asarray(positions)
    keep = times_a >= T / 2.0
    if edge_hit[0] or keep.sum() < 3:
        return WaveSpeedEstimate(np.nan, np.nan, level, (T / 2, T), valid=False)
    A = np.vstack([times_a[keep], np.ones(keep.sum())]).T
    coef, res, *_ = np.linalg.lstsq(A, pos_a[keep], rcond=None)
    residual = float(np.sqrt(res[0] / keep.sum())) if len(res) else 0.0
    return WaveSpeedEstimate(float(coef[0]), residual, level, (T / 2, T))


def critical_beta(bracket=(4.05, 5.0), tolerance: float = 0.05,
                  T: float = 80.0, n_cells: int = 2000, dx: float = 0.1,
                  dt: float = None) -> float:
    """Bisection on the numeric front-speed sign for the sexual reaction."""
    lo, hi = bracket

    def sign_at(beta):
        est = estimate_front_speed(SexualReaction(beta), T, n_cells, dx, dt)
        if not est.valid:
            raise RuntimeError(f"front left the domain at beta={beta}")
        return np.sign(est.speed)

    s_lo, s_hi = sign_at(lo), sign_at(hi)
    if s_lo == s_hi:
        raise ValueError("bracket endpoints give the same front-speed sign")
    while hi - lo > 2 * tolerance:
        mid = 0.5 * (lo + hi)
        s_mid = sign_at(mid)
        if s_mid == s_lo or s_mid == 0:
            lo = mid
        else:
            hi = mid
        if s_mid == 0:
            return mid
    return 0.5 * (lo + hi)


def catalyst_fixed_points(p: float, q: float, r: float) -> list[np.ndarray]:
    """Fixed points of the catalyst reaction terms.

    Boundary points (1,0) and (0,1) always; the interior pair from the
    closed-form quadratic when p < q and the discriminant is non-negative.
    """
    pts = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    if p < q:
        disc = (q - p) ** 2 - 4.0 * q * p ** 2 / r
        if disc >= 0:
            root = np.sqrt(disc)
            beta = ((q - p) + root) / (2.0 * q)
            alpha = ((q - p) - root) / (2.0 * q)
            pts.append(np.array([alpha, beta]))
            pts.append(np.array([beta, alpha]))
    return pts


def profile_to_csv(state: PdeState, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x"] + [f"u_{i + 1}" for i in range(state.u.shape[0])])
        for i, x in enumerate(state.x):
            w.writerow([repr(float(x))] + [repr(float(v))
                                           for v in state.u[:, i]])
