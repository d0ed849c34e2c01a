"""Torus geometry, dispersal kernels, neighborhood statistics and seeded RNG streams.

Everything downstream (the event engine, the model zoo, the experiment
harness) runs on a finite W x H torus standing in for the infinite plane;
boundary effects are handled experimentally by size-doubling sanity runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Nearest-neighbor displacements (E, W, N, S) used all over the place.
NN_OFFSETS = np.array([(1, 0), (-1, 0), (0, 1), (0, -1)], dtype=np.int64)


@dataclass(frozen=True)
class TorusGeometry:
    """A W x H grid with periodic wrap in both axes."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError("torus needs width >= 2 and height >= 2")

    @property
    def n_sites(self) -> int:
        return self.width * self.height

    def wrap(self, x: int, y: int) -> tuple[int, int]:
        return x % self.width, y % self.height

    def site_index(self, x: int, y: int) -> int:
        x, y = self.wrap(x, y)
        return y * self.width + x

    def site_xy(self, index: int) -> tuple[int, int]:
        return index % self.width, index // self.width


@dataclass(frozen=True)
class DispersalKernel:
    """Offspring displacement distribution p(y) over integer offsets.

    Offsets exclude the origin and are distinct; probabilities sum to 1.
    """

    offsets: np.ndarray      # (K, 2) int64
    probabilities: np.ndarray  # (K,) float64

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.int64).reshape(-1, 2)
        pr = np.asarray(self.probabilities, dtype=np.float64).ravel()
        if len(off) != len(pr):
            raise ValueError("offsets and probabilities length mismatch")
        if np.any(pr < 0):
            raise ValueError("negative kernel probability")
        if abs(pr.sum() - 1.0) > 1e-12:
            raise ValueError("kernel probabilities must sum to 1")
        if np.any((off[:, 0] == 0) & (off[:, 1] == 0)):
            raise ValueError("kernel may not contain the zero offset")
        if len({(int(a), int(b)) for a, b in off}) != len(off):
            raise ValueError("kernel offsets must be distinct")
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "probabilities", pr)

    def __len__(self) -> int:
        return len(self.offsets)


def nearest_neighbor_kernel() -> DispersalKernel:
    """Uniform kernel on the four nearest neighbors."""
    return DispersalKernel(NN_OFFSETS.copy(), np.full(4, 0.25))


def box_kernel(L: int) -> DispersalKernel:
    """Uniform kernel on {y : 0 < ||y||_inf <= L}.

    The sup-norm reading gives (2L+1)^2 - 1 offsets with equal weight; the
    norm choice is recorded in the experiment config so a Euclidean variant
    can be added without changing call sites.
    """
    if L < 1:
        raise ValueError("box kernel needs L >= 1")
    offs = [(dx, dy)
            for dx in range(-L, L + 1)
            for dy in range(-L, L + 1)
            if (dx, dy) != (0, 0)]
    n = len(offs)
    return DispersalKernel(np.array(offs, dtype=np.int64), np.full(n, 1.0 / n))


@dataclass
class StateGrid:
    """Per-site small-integer state on a torus; codes live in {0..n_states-1}."""

    geometry: TorusGeometry
    n_states: int
    states: np.ndarray = None  # (H, W) int8, indexed [y, x]

    def __post_init__(self):
        if self.states is None:
            self.states = np.zeros((self.geometry.height, self.geometry.width),
                                   dtype=np.int8)
        else:
            self.states = np.asarray(self.states, dtype=np.int8)
            if self.states.shape != (self.geometry.height, self.geometry.width):
                raise ValueError("state array shape does not match geometry")
        if self.states.min(initial=0) < 0 or self.states.max(initial=0) >= self.n_states:
            raise ValueError("state code outside model alphabet")

    def get(self, x: int, y: int) -> int:
        return int(self.states[y % self.geometry.height, x % self.geometry.width])

    def set(self, x: int, y: int, s: int) -> None:
        self.states[y % self.geometry.height, x % self.geometry.width] = s

    def counts(self) -> np.ndarray:
        return np.bincount(self.states.ravel(), minlength=self.n_states).astype(np.int64)

    def fractions(self) -> np.ndarray:
        return self.counts() / self.geometry.n_sites

    def copy(self) -> "StateGrid":
        return StateGrid(self.geometry, self.n_states, self.states.copy())


@dataclass
class CountGrid:
    """Per-site hawk/dove head counts for the game-dynamics model."""

    geometry: TorusGeometry
    hawks: np.ndarray = None  # (H, W) int64
    doves: np.ndarray = None

    def __post_init__(self):
        shape = (self.geometry.height, self.geometry.width)
        if self.hawks is None:
            self.hawks = np.zeros(shape, dtype=np.int64)
        else:
            self.hawks = np.asarray(self.hawks, dtype=np.int64).reshape(shape)
        if self.doves is None:
            self.doves = np.zeros(shape, dtype=np.int64)
        else:
            self.doves = np.asarray(self.doves, dtype=np.int64).reshape(shape)
        if self.hawks.min(initial=0) < 0 or self.doves.min(initial=0) < 0:
            raise ValueError("negative head count")

    @property
    def total_population(self) -> int:
        return int(self.hawks.sum() + self.doves.sum())

    def copy(self) -> "CountGrid":
        return CountGrid(self.geometry, self.hawks.copy(), self.doves.copy())


def neighbor_fractions(grid: StateGrid, x: int, y: int,
                       kernel: DispersalKernel) -> np.ndarray:
    """Kernel-weighted fraction of neighbors of (x, y) in each state.

    Follows the dispersal convention: weight p(off) is attached to the
    neighbor at (x - off), so asymmetric kernels count the sites whose
    offspring would land on (x, y).
    """
    f = np.zeros(grid.n_states)
    W, H = grid.geometry.width, grid.geometry.height
    st = grid.states
    for (dx, dy), p in zip(kernel.offsets, kernel.probabilities):
        f[st[(y - dy) % H, (x - dx) % W]] += p
    return f


def square_fraction(grid: CountGrid, x: int, y: int) -> tuple[float, bool]:
    """Hawk fraction over the 5x5 torus square centered at (x, y).

    Returns (p, defined). An empty square yields (0.0, False); callers treat
    the undefined case as a zero game rate.
    """
    W, H = grid.geometry.width, grid.geometry.height
    hw = dv = 0
    for dy in range(-2, 3):
        yy = (y + dy) % H
        for dx in range(-2, 3):
            xx = (x + dx) % W
            hw += grid.hawks[yy, xx]
            dv += grid.doves[yy, xx]
    tot = hw + dv
    if tot == 0:
        return 0.0, False
    return hw / tot, True


@dataclass(frozen=True)
class RandomStream:
    """Reproducible replicate-indexed randomness.

    Same (master_seed, index) always yields the same draws; distinct indices
    give independent-quality streams (numpy SeedSequence spawning).
    """

    master_seed: int
    index: int = 0

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=(self.index,))

    def generator(self) -> np.random.Generator:
        return np.random.default_rng(self.seed_sequence())

    def kernel_state(self) -> np.ndarray:
        """256-bit xoshiro state for the compiled event kernels.

        Uses seed words disjoint from those consumed by generator()."""
        state = self.seed_sequence().generate_state(8, np.uint64)[4:].copy()
        if not state.any():  # all-zero state is the one forbidden seed
            state[0] = np.uint64(0x9E3779B97F4A7C15)
        return state
