"""The model zoo: per-site transition rates for each lattice model.

Each model maps a local configuration to a list of (rate, apply) proposals
consumed by the exact event engine, declares a per-site rate bound that
dominates every reachable configuration, and knows how to pack itself for
the compiled fast path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .lattice import (DispersalKernel, StateGrid, CountGrid, NN_OFFSETS,
                      nearest_neighbor_kernel, neighbor_fractions)

# fast-path model codes (see kernels.run_chunk)
MID_COMPETING = 0
MID_GBT = 1
MID_HOST_PATHOGEN = 2
MID_SEXUAL = 3
MID_CATALYST = 4
MID_COLICIN2 = 5
MID_COLICIN3 = 6
MID_VOTER = 7
MID_CATALYST_INF = 8


class Transition(NamedTuple):
    rate: float
    apply: Callable  # apply(rng) mutates the grid
    tag: str


def _setter(grid: StateGrid, x: int, y: int, s: int):
    def apply(rng):
        grid.set(x, y, s)
    return apply


class StateModel:
    """Base class: S-state lattice model with a uniform per-site rate bound."""

    name = "abstract"
    n_states = 0

    def __init__(self, bound_override: float | None = None):
        self._bound_override = bound_override

    @property
    def site_bound(self) -> float:
        if self._bound_override is not None:
            return self._bound_override
        return self._natural_bound()

    def _natural_bound(self) -> float:
        raise NotImplementedError

    def site_transitions(self, grid: StateGrid, x: int, y: int) -> list[Transition]:
        raise NotImplementedError

    def is_absorbed(self, counts: np.ndarray) -> bool:
        raise NotImplementedError

    def fast_spec(self):
        """(model_id, params, kernel_a, kernel_b) for the compiled runner."""
        raise NotImplementedError

    def make_grid(self, geometry) -> StateGrid:
        return StateGrid(geometry, self.n_states)


def _check_nonneg(**params):
    for k, v in params.items():
        if v < 0:
            raise ValueError(f"rate parameter {k} must be non-negative, got {v}")


class CompetingContact(StateModel):
    """Two contact processes competing for vacant space (states 0, 1, 2)."""

    name = "competing-contact"
    n_states = 3

    def __init__(self, beta1, beta2, delta1, delta2,
                 kernel1: DispersalKernel | None = None,
                 kernel2: DispersalKernel | None = None,
                 bound_override=None):
        super().__init__(bound_override)
        _check_nonneg(beta1=beta1, beta2=beta2, delta1=delta1, delta2=delta2)
        self.beta = (beta1, beta2)
        self.delta = (delta1, delta2)
        self.kernel1 = kernel1 or nearest_neighbor_kernel()
        self.kernel2 = kernel2 or self.kernel1

    def _natural_bound(self):
        return max(max(self.beta), max(self.delta))

    def site_transitions(self, grid, x, y):
        s = grid.get(x, y)
        out = []
        if s == 0:
            f1 = neighbor_fractions(grid, x, y, self.kernel1)[1]
            f2 = neighbor_fractions(grid, x, y, self.kernel2)[2]
            out.append(Transition(self.beta[0] * f1, _setter(grid, x, y, 1), "0->1"))
            out.append(Transition(self.beta[1] * f2, _setter(grid, x, y, 2), "0->2"))
        else:
            out.append(Transition(self.delta[s - 1], _setter(grid, x, y, 0), f"{s}->0"))
        return out

    def is_absorbed(self, counts):
        return counts[1] == 0 and counts[2] == 0

    def fast_spec(self):
        return (MID_COMPETING,
                np.array([*self.beta, *self.delta]),
                self.kernel1, self.kernel2)


class GrassBushesTrees(StateModel):
    """Hierarchical contact process: type 2 births succeed onto {0, 1}.

    Transitions involving only the 2's come first in the proposal list so a
    shared-seed run couples exactly with the single-type marginal.
    """

    name = "grass-bushes-trees"
    n_states = 3

    def __init__(self, beta1, beta2, delta1, delta2,
                 kernel1=None, kernel2=None, bound_override=None):
        super().__init__(bound_override)
        _check_nonneg(beta1=beta1, beta2=beta2, delta1=delta1, delta2=delta2)
        self.beta = (beta1, beta2)
        self.delta = (delta1, delta2)
        self.kernel1 = kernel1 or nearest_neighbor_kernel()
        self.kernel2 = kernel2 or self.kernel1

    def _natural_bound(self):
        return max(max(self.beta), self.delta[0] + self.beta[1], self.delta[1])

    def site_transitions(self, grid, x, y):
        s = grid.get(x, y)
        out = []
        if s != 2:
            f2 = neighbor_fractions(grid, x, y, self.kernel2)[2]
            out.append(Transition(self.beta[1] * f2, _setter(grid, x, y, 2),
                                  f"{s}->2"))
        if s == 0:
            f1 = neighbor_fractions(grid, x, y, self.kernel1)[1]
            out.append(Transition(self.beta[0] * f1, _setter(grid, x, y, 1), "0->1"))
        elif s == 1:
            out.append(Transition(self.delta[0], _setter(grid, x, y, 0), "1->0"))
        else:
            out.append(Transition(self.delta[1], _setter(grid, x, y, 0), "2->0"))
        return out

    def is_absorbed(self, counts):
        return counts[1] == 0 and counts[2] == 0

    def fast_spec(self):
        return (MID_GBT,
                np.array([*self.beta, *self.delta]),
                self.kernel1, self.kernel2)


class HostPathogen(StateModel):
    """Two species plus a pathogen (states 1=healthy, 2=infected, 3=rival)."""

    name = "host-pathogen"
    n_states = 4  # code 0 unused

    def __init__(self, alpha, gamma1, gamma2, gamma3, kernel=None,
                 bound_override=None):
        super().__init__(bound_override)
        _check_nonneg(alpha=alpha, gamma1=gamma1, gamma2=gamma2, gamma3=gamma3)
        self.alpha = alpha
        self.gamma = (gamma1, gamma2, gamma3)
        self.kernel = kernel or nearest_neighbor_kernel()

    def _natural_bound(self):
        return max(self.alpha, *self.gamma)

    def site_transitions(self, grid, x, y):
        s = grid.get(x, y)
        f = neighbor_fractions(grid, x, y, self.kernel)
        g1, g2, g3 = self.gamma
        if s == 1:
            return [Transition(self.alpha * f[2], _setter(grid, x, y, 2), "1->2"),
                    Transition(g1 * f[3], _setter(grid, x, y, 3), "1->3")]
        if s == 2:
            return [Transition(g2 * (f[1] + f[2]), _setter(grid, x, y, 1), "2->1"),
                    Transition(g2 * f[3], _setter(grid, x, y, 3), "2->3")]
        return [Transition(g3 * (f[1] + f[2]), _setter(grid, x, y, 1), "3->1")]

    def is_absorbed(self, counts):
        n = counts.sum()
        return counts[1] == n or counts[3] == n

    def fast_spec(self):
        return (MID_HOST_PATHOGEN,
                np.array([self.alpha, *self.gamma]),
                self.kernel, self.kernel)

    def make_grid(self, geometry):
        g = StateGrid(geometry, self.n_states)
        g.states[:] = 1
        return g


class SexualReproduction(StateModel):
    """Birth needs two occupied neighbors: 0->1 at beta*k(k-1)/(n(n-1))."""

    name = "sexual"
    n_states = 2

    def __init__(self, beta, kernel=None, bound_override=None):
        super().__init__(bound_override)
        _check_nonneg(beta=beta)
        self.beta = beta
        self.kernel = kernel or nearest_neighbor_kernel()

    def _natural_bound(self):
        return max(1.0, self.beta)

    def site_transitions(self, grid, x, y):
        s = grid.get(x, y)
        if s == 1:
            return [Transition(1.0, _setter(grid, x, y, 0), "1->0")]
        W, H = grid.geometry.width, grid.geometry.height
        n = len(self.kernel)
        k = sum(grid.states[(y - dy) % H, (x - dx) % W] == 1
                for dx, dy in self.kernel.offsets)
        rate = self.beta * k * (k - 1) / (n * (n - 1))
        return [Transition(rate, _setter(grid, x, y, 1), "0->1")]

    def is_absorbed(self, counts):
        return counts[1] == 0

    def fast_spec(self):
        return (MID_SEXUAL, np.array([self.beta]), self.kernel, self.kernel)


def _resolve_instant(grid: StateGrid, x: int, y: int, rng) -> None:
    """r = infinity reaction: a fresh adsorbate annihilates with a uniformly
    chosen opposite-type nearest neighbor, if one exists (12 -> 00)."""
    s = grid.get(x, y)
    if s not in (1, 2):
        return
    opp = 3 - s
    nbrs = [(dx, dy) for dx, dy in NN_OFFSETS if grid.get(x + dx, y + dy) == opp]
    if not nbrs:
        return
    dx, dy = nbrs[int(rng.integers(len(nbrs)))]
    grid.set(x, y, 0)
    grid.set(x + dx, y + dy, 0)


class Catalyst(StateModel):
    """Surface catalysis: 0=vacant, 1=CO, 2=O.

    CO adsorbs at p per vacant site, O2 onto unordered vacant pairs at q/4,
    and adjacent CO/O pairs react at r/4 (r = inf resolves instantaneously).
    Pair events are attributed to ordered site/direction picks at half the
    unordered rate, keeping the per-site bound uniform.
    """

    name = "catalyst"
    n_states = 3

    def __init__(self, p, q, r=np.inf, double_o2_flux=False, bound_override=None):
        super().__init__(bound_override)
        _check_nonneg(p=p, q=q)
        if r != np.inf:
            _check_nonneg(r=r)
        # the printed q/4 pair rate is read per unordered pair; the flag
        # doubles it for the per-ordered-pair reading
        self.p = p
        self.q = q * (2.0 if double_o2_flux else 1.0)
        self.r = r

    def _natural_bound(self):
        if np.isinf(self.r):
            return self.p + self.q / 2
        return max(self.p + self.q / 2, self.r / 2)

    def site_transitions(self, grid, x, y):
        s = grid.get(x, y)
        out = []
        instant = np.isinf(self.r)
        if s == 0:
            def co(rng, x=x, y=y):
                grid.set(x, y, 1)
                if instant:
                    _resolve_instant(grid, x, y, rng)
            out.append(Transition(self.p, co, "CO"))
            for dx, dy in NN_OFFSETS:
                if grid.get(x + dx, y + dy) == 0:
                    def o2(rng, x=x, y=y, dx=dx, dy=dy):
                        grid.set(x, y, 2)
                        grid.set(x + dx, y + dy, 2)
                        if instant:
                            _resolve_instant(grid, x, y, rng)
                            if grid.get(x + dx, y + dy) == 2:
                                _resolve_instant(grid, x + dx, y + dy, rng)
                    out.append(Transition(self.q / 8, o2, f"O2@{dx},{dy}"))
        elif not instant:
            opp = 3 - s
            for dx, dy in NN_OFFSETS:
                if grid.get(x + dx, y + dy) == opp:
                    def react(rng, x=x, y=y, dx=dx, dy=dy):
                        grid.set(x, y, 0)
                        grid.set(x + dx, y + dy, 0)
                    out.append(Transition(self.r / 8, react, f"react@{dx},{dy}"))
        return out

    def is_absorbed(self, counts):
        if counts[0] > 0:
            return False
        if np.isinf(self.r):
            return True
        return counts[1] == 0 or counts[2] == 0

    def fast_spec(self):
        k = nearest_neighbor_kernel()
        if np.isinf(self.r):
            return (MID_CATALYST_INF, np.array([self.p, self.q]), k, k)
        return (MID_CATALYST, np.array([self.p, self.q, self.r]), k, k)


class Colicin2(StateModel):
    """Toxin competition: producers (1) add gamma*f1 to the sensitives' (2)
    death rate."""

    name = "colicin2"
    n_states = 3

    def __init__(self, beta1, beta2, gamma, delta1=1.0, delta2=1.0,
                 kernel=None, bound_override=None):
        super().__init__(bound_override)
        _check_nonneg(beta1=beta1, beta2=beta2, gamma=gamma,
                      delta1=delta1, delta2=delta2)
        self.beta = (beta1, beta2)
        self.delta = (delta1, delta2)
        self.gamma = gamma
        self.kernel = kernel or nearest_neighbor_kernel()

    def _natural_bound(self):
        return max(max(self.beta), self.delta[0], self.delta[1] + self.gamma)

    def site_transitions(self, grid, x, y):
        s = grid.get(x, y)
        if s == 0:
            f = neighbor_fractions(grid, x, y, self.kernel)
            return [Transition(self.beta[0] * f[1], _setter(grid, x, y, 1), "0->1"),
                    Transition(self.beta[1] * f[2], _setter(grid, x, y, 2), "0->2")]
        if s == 1:
            return [Transition(self.delta[0], _setter(grid, x, y, 0), "1->0")]
        f1 = neighbor_fractions(grid, x, y, self.kernel)[1]
        return [Transition(self.delta[1] + self.gamma * f1,
                           _setter(grid, x, y, 0), "2->0")]

    def is_absorbed(self, counts):
        return counts[1] == 0 and counts[2] == 0

    def fast_spec(self):
        return (MID_COLICIN2,
                np.array([*self.beta, *self.delta, self.gamma]),
                self.kernel, self.kernel)


class Colicin3(StateModel):
    """Three-strain toxin competition; state 3 is sensitive to both toxins."""

    name = "colicin3"
    n_states = 4

    def __init__(self, beta1, beta2, beta3, gamma1, gamma2,
                 delta1=1.0, delta2=1.0, delta3=1.0, kernel=None,
                 bound_override=None):
        super().__init__(bound_override)
        _check_nonneg(beta1=beta1, beta2=beta2, beta3=beta3,
                      gamma1=gamma1, gamma2=gamma2,
                      delta1=delta1, delta2=delta2, delta3=delta3)
        self.beta = (beta1, beta2, beta3)
        self.delta = (delta1, delta2, delta3)
        self.gamma = (gamma1, gamma2)
        self.kernel = kernel or nearest_neighbor_kernel()

    def _natural_bound(self):
        return max(max(self.beta), self.delta[0], self.delta[1],
                   self.delta[2] + max(self.gamma))

    def site_transitions(self, grid, x, y):
        s = grid.get(x, y)
        if s == 0:
            f = neighbor_fractions(grid, x, y, self.kernel)
            return [Transition(self.beta[i - 1] * f[i], _setter(grid, x, y, i),
                               f"0->{i}") for i in (1, 2, 3)]
        if s in (1, 2):
            return [Transition(self.delta[s - 1], _setter(grid, x, y, 0),
                               f"{s}->0")]
        f = neighbor_fractions(grid, x, y, self.kernel)
        rate = self.delta[2] + self.gamma[0] * f[1] + self.gamma[1] * f[2]
        return [Transition(rate, _setter(grid, x, y, 0), "3->0")]

    def is_absorbed(self, counts):
        return counts[1] == 0 and counts[2] == 0 and counts[3] == 0

    def fast_spec(self):
        return (MID_COLICIN3,
                np.array([*self.beta, *self.delta, *self.gamma]),
                self.kernel, self.kernel)


class MultitypeVoter(StateModel):
    """Biased voter: a site in state j flips to i at f_i * lam[i, j].

    lam[i, j] is the rate at which i's eat j's; the cyclic case takes
    lam[1,3]=beta1, lam[2,1]=beta2, lam[3,2]=beta3 (1-based types).
    """

    name = "voter"

    def __init__(self, lam: np.ndarray, kernel=None, bound_override=None):
        super().__init__(bound_override)
        lam = np.asarray(lam, dtype=np.float64)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise ValueError("lam must be square")
        if np.any(lam < 0):
            raise ValueError("lam entries must be non-negative")
        if np.any(np.diag(lam) != 0):
            raise ValueError("lam must have zero diagonal")
        self.lam = lam
        self.k = lam.shape[0]
        self.n_states = self.k + 1  # code 0 unused
        self.kernel = kernel or nearest_neighbor_kernel()

    @classmethod
    def cyclic(cls, beta1, beta2, beta3, **kw):
        lam = np.zeros((3, 3))
        lam[0, 2] = beta1
        lam[1, 0] = beta2
        lam[2, 1] = beta3
        return cls(lam, **kw)

    @classmethod
    def silvertown(cls, **kw):
        lam = np.array([
            [0.00, 0.09, 0.32, 0.23, 0.37],
            [0.08, 0.00, 0.16, 0.06, 0.09],
            [0.06, 0.06, 0.00, 0.44, 0.11],
            [0.02, 0.06, 0.05, 0.00, 0.03],
            [0.02, 0.03, 0.05, 0.03, 0.00],
        ])
        return cls(lam, **kw)

    def _natural_bound(self):
        return float(self.lam.max())

    def site_transitions(self, grid, x, y):
        j = grid.get(x, y)
        f = neighbor_fractions(grid, x, y, self.kernel)
        out = []
        for i in range(1, self.k + 1):
            if i == j:
                continue
            out.append(Transition(f[i] * self.lam[i - 1, j - 1],
                                  _setter(grid, x, y, i), f"{j}->{i}"))
        return out

    def is_absorbed(self, counts):
        n = counts.sum()
        return any(counts[i] == n for i in range(1, self.k + 1))

    def fast_spec(self):
        params = np.concatenate(([float(self.k)], self.lam.ravel()))
        return (MID_VOTER, params, self.kernel, self.kernel)

    def make_grid(self, geometry):
        g = StateGrid(geometry, self.n_states)
        g.states[:] = 1
        return g


@dataclass
class PrisonersDilemma:
    """Hawk/dove game dynamics with multiple individuals per site.

    Per individual: migration to a uniform nearest neighbor at rate nu,
    crowding death at kappa*(site population), and a game step whose rate
    a*p + b*(1-p) (hawks) or c*p + d*(1-p) (doves) is a birth rate when
    positive and a death rate at its magnitude when negative.  p is the hawk
    fraction over the 5x5 square; an empty square means no game step.

    kappa and nu have no canonical values in the source material; the
    defaults here are artifact choices.
    """

    a: float = -0.6
    b: float = 0.9
    c: float = -0.9
    d: float = 0.7
    nu: float = 1.0
    kappa: float = 0.1

    name = "prisoners-dilemma"

    def __post_init__(self):
        _check_nonneg(nu=self.nu, kappa=self.kappa)

    def game_rates(self, p: float, defined: bool) -> tuple[float, float]:
        """Signed per-capita game rates (hawk, dove) at hawk fraction p."""
        if not defined:
            return 0.0, 0.0
        return (self.a * p + self.b * (1 - p),
                self.c * p + self.d * (1 - p))

    def make_grid(self, geometry) -> CountGrid:
        return CountGrid(geometry)


REGISTRY: dict[str, Callable] = {
    "competing-contact": CompetingContact,
    "grass-bushes-trees": GrassBushesTrees,
    "host-pathogen": HostPathogen,
    "sexual": SexualReproduction,
    "catalyst": Catalyst,
    "colicin2": Colicin2,
    "colicin3": Colicin3,
    "voter": MultitypeVoter,
    "prisoners-dilemma": PrisonersDilemma,
}


def build_model(name: str, **params):
    """Construct a registered model; voter accepts beta1..beta3 (cyclic),
    a flat lam matrix, or silvertown=True."""
    if name not in REGISTRY:
        raise KeyError(f"unknown model {name!r}; known: {sorted(REGISTRY)}")
    cls = REGISTRY[name]
    if name == "voter":
        if params.pop("silvertown", False):
            return MultitypeVoter.silvertown(**params)
        if "lam" in params:
            return MultitypeVoter(**params)
        return MultitypeVoter.cyclic(**params)
    return cls(**params)
