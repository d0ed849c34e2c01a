"""Mean-field ODE toolbox: right-hand sides, adaptive integration, fixed
points with stability classification, invasion predicates, the cyclic
conserved quantity, and a numeric Lyapunov-condition checker.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.stats import qmc


def _rhs_competing(u, beta1, beta2, delta1, delta2):
    s = 1.0 - u[0] - u[1]
    return np.array([beta1 * u[0] * s - delta1 * u[0],
                     beta2 * u[1] * s - delta2 * u[1]])


def _rhs_gbt(u, beta1, beta2, delta1, delta2):
    return np.array([
        beta1 * u[0] * (1 - u[0] - u[1]) - delta1 * u[0] - beta2 * u[1] * u[0],
        beta2 * u[1] * (1 - u[0]) - delta2 * u[1],
    ])


def _rhs_host_pathogen(u, alpha, gamma1, gamma2, gamma3):
    # transcribed literally, including gamma2*u2 in the third gain term
    u1, u2, u3 = u
    return np.array([
        (u1 + u2) * (gamma2 * u2 + gamma3 * u3) - alpha * u1 * u2 - gamma1 * u1 * u3,
        alpha * u1 * u2 - gamma2 * u2,
        u3 * (gamma1 * u1 + gamma2 * u2) - gamma3 * u3 * (u1 + u2),
    ])


def _rhs_sexual(u, beta):
    return np.array([-u[0] + beta * u[0] ** 2 * (1 - u[0])])


def _rhs_colicin2(u, beta1, beta2, gamma, delta1=1.0, delta2=1.0):
    s = 1.0 - u[0] - u[1]
    return np.array([
        beta1 * u[0] * s - delta1 * u[0],
        beta2 * u[1] * s - u[1] * (delta2 + gamma * u[0]),
    ])


def _rhs_colicin3(u, beta1, beta2, beta3, gamma1, gamma2,
                  delta1=1.0, delta2=1.0, delta3=1.0):
    s = 1.0 - u[0] - u[1] - u[2]
    return np.array([
        beta1 * u[0] * s - delta1 * u[0],
        beta2 * u[1] * s - delta2 * u[1],
        beta3 * u[2] * s - u[2] * (delta3 + gamma1 * u[0] + gamma2 * u[1]),
    ])


def _rhs_hawks_doves(u, a, b, c, d, kappa):
    h, v = u
    n = h + v
    if n <= 0:
        return np.zeros(2)  # continuous extension: no individuals, no flow
    return np.array([
        h * (a * h / n + b * v / n - kappa * n),
        v * (c * h / n + d * v / n - kappa * n),
    ])


def _rhs_voter(u, lam):
    lam = np.asarray(lam)
    drift = (lam - lam.T) @ u
    return u * drift


_RHS = {
    "eq1": _rhs_competing,
    "eq2": _rhs_gbt,
    "eq4": _rhs_host_pathogen,
    "eq6": _rhs_sexual,
    "eq9": _rhs_colicin2,
    "eq10": _rhs_colicin3,
    "eq11": _rhs_hawks_doves,
    "voter": _rhs_voter,
}

_DIMS = {"eq1": 2, "eq2": 2, "eq4": 3, "eq6": 1, "eq9": 2, "eq10": 3,
         "eq11": 2}


@dataclass(frozen=True)
class OdeSystem:
    """One of the mean-field systems, identified by equation tag."""

    ident: str
    params: dict

    def __post_init__(self):
        if self.ident not in _RHS:
            raise KeyError(f"unknown system {self.ident!r}; known: {sorted(_RHS)}")

    @property
    def dim(self) -> int:
        if self.ident == "voter":
            return len(np.asarray(self.params["lam"]))
        return _DIMS[self.ident]

    def rhs(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dim,):
            raise ValueError(f"state must have shape ({self.dim},)")
        if not np.all(np.isfinite(u)):
            raise ValueError("non-finite state")
        return _RHS[self.ident](u, **self.params)

    def jacobian(self, u, h: float = 1e-6) -> np.ndarray:
        """Central finite-difference Jacobian."""
        u = np.asarray(u, dtype=float)
        n = self.dim
        J = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = h * max(1.0, abs(u[j]))
            J[:, j] = (self.rhs(u + e) - self.rhs(u - e)) / (2 * e[j])
        return J


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_times, dim)
    stats: dict = field(default_factory=dict)


def integrate(system: OdeSystem, u0, T: float, tol: float = 1e-8,
              t_eval=None, method: str = "RK45") -> Trajectory:
    """Adaptive embedded Runge-Kutta integration with local tolerance tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    u0 = np.asarray(u0, dtype=float)
    if not np.all(np.isfinite(u0)):
        raise ValueError("non-finite initial state")
    if T == 0:
        return Trajectory(np.array([0.0]), u0[None, :], {"nfev": 0})
    if t_eval is None:
        t_eval = np.linspace(0.0, T, 201)
    sol = solve_ivp(lambda t, u: _RHS[system.ident](u, **system.params),
                    (0.0, T), u0, t_eval=t_eval, method=method,
                    rtol=tol, atol=tol)
    if not sol.success:
        raise RuntimeError(f"integration failed (stiffness?): {sol.message}")
    return Trajectory(sol.t, sol.y.T, {"nfev": sol.nfev, "status": sol.status})


@dataclass
class FixedPointReport:
    point: np.ndarray
    residual: float
    eigenvalues: np.ndarray
    classification: str  # stable | unstable | saddle | center/marginal

    def __repr__(self):
        pt = np.array2string(self.point, precision=6)
        return f"FixedPoint({pt}, {self.classification})"


def classify(eigenvalues: np.ndarray, margin: float = 1e-8) -> str:
    re = np.real(eigenvalues)
    if np.all(re < -margin):
        return "stable"
    if np.all(re > margin):
        return "unstable"
    if np.any(re > margin) and np.any(re < -margin) and np.all(np.abs(re) > margin):
        return "saddle"
    return "center/marginal"


def _newton(system: OdeSystem, u0, tol: float, max_iter: int = 60):
    u = np.asarray(u0, dtype=float)
    for _ in range(max_iter):
        F = system.rhs(u)
        if not np.all(np.isfinite(F)):
            return None
        if np.linalg.norm(F) <= tol:
            return u
        J = system.jacobian(u)
        try:
            step = np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)) or np.linalg.norm(step) > 10.0:
            return None
        u = u - step
    return None


def find_fixed_points(system: OdeSystem, tol: float = 1e-10,
                      class_margin: float = 1e-8) -> list[FixedPointReport]:
    """Newton from a deterministic start lattice; converged roots are
    deduplicated at distance 10*tol and classified by Jacobian eigenvalues.

    Non-convergent starts are dropped; their count lands in the report list
    attribute `find_fixed_points.last_dropped` for diagnostics.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = system.dim
    axes = np.linspace(0.01, 0.99, 9)
    starts = [np.zeros(n)]
    mesh = np.stack(np.meshgrid(*([axes] * n), indexing="ij"),
                    axis=-1).reshape(-1, n)
    for p in mesh:
        if p.sum() <= 1.0 + 1e-12:
            starts.append(p)
            # boundary-face starts: same point with coordinates zeroed
            for j in range(n):
                q = p.copy()
                q[j] = 0.0
                starts.append(q)
    roots = []
    dropped = 0
    for s in starts:
        u = _newton(system, s, tol)
        if u is None:
            dropped += 1
            continue
        if any(np.linalg.norm(u - r) <= 10 * tol for r in roots):
            continue
        roots.append(u)
    find_fixed_points.last_dropped = dropped
    reports = []
    for u in sorted(roots, key=lambda r: tuple(np.round(r, 12))):
        ev = np.linalg.eigvals(system.jacobian(u))
        reports.append(FixedPointReport(u, float(np.linalg.norm(system.rhs(u))),
                                        ev, classify(ev, class_margin)))
    return reports


def invasion_check(which: str, **params) -> tuple[bool, float]:
    """Invasion predicates; returns (invades, margin).

    gbt: rare 1's against the 2's equilibrium (beta1*d2/b2 > d1 + b2 - d2).
    host-pathogen: rare 3's against the 1/2 equilibrium.
    colicin-interior: the two-sided chain giving an interior fixed point.
    Raises ValueError("resident extinct") when the resident equilibrium
    does not exist.
    """
    if which == "gbt":
        b1, b2 = params["beta1"], params["beta2"]
        d1 = params.get("delta1", 1.0)
        d2 = params.get("delta2", 1.0)
        if b2 <= d2:
            raise ValueError("resident extinct")
        lhs = b1 * d2 / b2
        rhs = d1 + b2 * (b2 - d2) / b2
        return lhs > rhs, lhs - rhs
    if which == "host-pathogen":
        a = params["alpha"]
        g1, g2, g3 = params["gamma1"], params["gamma2"], params["gamma3"]
        if g2 >= a:
            raise ValueError("resident extinct")
        lhs = g1 * g2 / a + g2 * (1 - g2 / a)
        return lhs > g3, lhs - g3
    if which == "colicin-interior":
        b1, b2 = params["beta1"], params["beta2"]
        d1 = params.get("delta1", 1.0)
        d2 = params.get("delta2", 1.0)
        g = params["gamma"]
        if d1 >= b1 or d2 >= b2:
            raise ValueError("resident extinct")
        margin = min(d1 / b1 - d2 / b2, (d2 + g) / (b2 + g) - d1 / b1)
        return margin > 0, margin
    raise KeyError(f"unknown invasion check {which!r}")


def cyclic_equilibrium(beta1: float, beta2: float, beta3: float):
    """Interior equilibrium of the 3-cycle voter ODE and its invariant.

    rho_i = beta_{i-1} / sum(beta) with the index wrapping 1 <- 3; the
    function H(u) = sum_i rho_i log u_i is constant along solutions.
    """
    if beta1 <= 0 or beta2 <= 0 or beta3 <= 0:
        raise ValueError("cyclic rates must be positive")
    s = beta1 + beta2 + beta3
    rho = np.array([beta3, beta1, beta2]) / s

    def H(u):
        u = np.asarray(u, dtype=float)
        return float(np.dot(rho, np.log(u)))

    return rho, H


def cyclic_system(beta1, beta2, beta3) -> OdeSystem:
    lam = np.zeros((3, 3))
    lam[0, 2] = beta1
    lam[1, 0] = beta2
    lam[2, 1] = beta3
    return OdeSystem("voter", {"lam": lam})


@dataclass
class LyapunovReport:
    max_derivative: float
    convexity_violations: int
    n_samples: int


def check_lyapunov(phi: Callable, system: OdeSystem, n_samples: int = 256,
                   seed: int = 0, grad: Callable | None = None) -> LyapunovReport:
    """Max of d(phi)/dt = grad(phi) . rhs over quasi-random interior points,
    plus a midpoint convexity spot check.

    Pass an analytic `grad` for tight conservation checks; the central-
    difference fallback carries O(h^2) curvature error near the boundary.
    """
    n = system.dim
    sampler = qmc.Sobol(d=n, scramble=True, seed=seed)
    pts = 0.01 + 0.98 * sampler.random(n_samples)
    pts = pts[pts.sum(axis=1) <= 0.99] if n > 1 else pts
    h = 1e-6

    if grad is None:
        def grad(u):
            g = np.empty(n)
            for j in range(n):
                e = np.zeros(n)
                e[j] = h
                g[j] = (phi(u + e) - phi(u - e)) / (2 * h)
            return g

    max_d = -np.inf
    for u in pts:
        max_d = max(max_d, float(np.dot(grad(u), system.rhs(u))))
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(min(n_samples, 128)):
        i, j = rng.integers(len(pts)), rng.integers(len(pts))
        a, b = pts[i], pts[j]
        if phi((a + b) / 2) > (phi(a) + phi(b)) / 2 + 1e-9:
            violations += 1
    return LyapunovReport(max_d, violations, len(pts))


def trajectory_to_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        dim = traj.states.shape[1]
        w.writerow(["t"] + [f"u_{i + 1}" for i in range(dim)])
        for t, u in zip(traj.times, traj.states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in u])


def fixed_points_to_csv(reports: list[FixedPointReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not reports:
            fh.write("")
            return
        dim = len(reports[0].point)
        head = [f"u_{i + 1}" for i in range(dim)]
        head += [f"eig{i + 1}_re" for i in range(dim)]
        head += [f"eig{i + 1}_im" for i in range(dim)]
        head += ["class", "residual"]
        w.writerow(head)
        for r in reports:
            row = [repr(float(v)) for v in r.point]
            row += [repr(float(np.real(e))) for e in r.eigenvalues]
            row += [repr(float(np.imag(e))) for e in r.eigenvalues]
            row += [r.classification, repr(r.residual)]
            w.writerow(row)
