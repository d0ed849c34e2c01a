"""Exact continuous-time event engine.

The generic path works with any StateModel: exponential holding times at
the constant total bound rate, uniform site picks, and acceptance with
probability actual/bound (thinning).  Each proposal consumes exactly three
RNG draws (holding time, site, acceptance level), which makes shared-seed
couplings between models with aligned proposal lists exact.

CountGrid models (hawks/doves) go through a direct-method sampler instead,
since their per-site rates are unbounded a priori.
"""

from __future__ import annotations

import pickle
import struct
from dataclasses import dataclass, field

import numpy as np

from .lattice import StateGrid, CountGrid, RandomStream, square_fraction
from .models import PrisonersDilemma
from . import kernels

CHECKPOINT_MAGIC = b"CXLCHKPT"
CHECKPOINT_VERSION = 1


@dataclass
class SimClock:
    time: float = 0.0
    events: int = 0  # accepted events


@dataclass(frozen=True)
class StirringSpec:
    """Nearest-neighbor exchanges at rate epsilon^-2 per unordered pair."""

    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("stirring epsilon must be positive")

    @property
    def pair_rate(self) -> float:
        return self.epsilon ** -2

    @property
    def site_bound(self) -> float:
        # ordered (site, direction) attribution at pair_rate/2 each
        return 2.0 * self.pair_rate


@dataclass
class StepResult:
    dt: float
    site: tuple[int, int]
    accepted: bool
    tag: str | None
    absorbed: bool = False


_DIRS = ((1, 0), (-1, 0), (0, 1), (0, -1))


def step(model, grid: StateGrid, clock: SimClock, rng: np.random.Generator,
         stirring: StirringSpec | None = None) -> StepResult:
    """Sample and apply one proposal (accepted or rejected).

    Reports absorption (and leaves the clock alone) when the configuration
    can never change again.
    """
    if model.is_absorbed(grid.counts()):
        return StepResult(0.0, (0, 0), False, None, absorbed=True)
    geo = grid.geometry
    N = geo.n_sites
    stir = stirring.site_bound if stirring else 0.0
    bound = model.site_bound + stir
    dt = rng.exponential(1.0 / (bound * N))
    site = int(rng.integers(N))
    u = rng.uniform(0.0, bound)
    x, y = geo.site_xy(site)
    clock.time += dt
    if u < stir:
        d = min(3, int(u * 4.0 / stir))
        dx, dy = _DIRS[d]
        a, b = grid.get(x, y), grid.get(x + dx, y + dy)
        grid.set(x, y, b)
        grid.set(x + dx, y + dy, a)
        clock.events += 1
        return StepResult(dt, (x, y), True, "stir")
    u -= stir
    for rate, apply, tag in model.site_transitions(grid, x, y):
        if u < rate:
            apply(rng)
            clock.events += 1
            return StepResult(dt, (x, y), True, tag)
        u -= rate
    return StepResult(dt, (x, y), False, None)


@dataclass
class SimResult:
    grid: StateGrid | CountGrid
    clock: SimClock
    sample_times: np.ndarray
    samples: np.ndarray         # (n_samples, n_channels)
    absorbed: bool = False
    absorption_time: float | None = None


def run_until(model, grid, T: float, rng: np.random.Generator,
              sample_times=None, stirring: StirringSpec | None = None,
              clock: SimClock | None = None) -> SimResult:
    """Run the generic engine to time T, sampling densities exactly at the
    requested times (state right-continuous in time)."""
    if T < 0:
        raise ValueError("horizon must be non-negative")
    if isinstance(model, PrisonersDilemma):
        return run_count_model(model, grid, T, rng, sample_times)
    clock = clock or SimClock()
    sample_times = (np.asarray(sample_times, dtype=float)
                    if sample_times is not None else np.array([T]))
    samples = []
    si = 0
    geo = grid.geometry
    N = geo.n_sites
    stir = stirring.site_bound if stirring else 0.0
    bound = model.site_bound + stir
    total = bound * N
    absorbed = False
    absorption_time = None
    last_event_time = clock.time
    while clock.time < T:
        if model.is_absorbed(grid.counts()):
            absorbed = True
            absorption_time = last_event_time
            break
        dt = rng.exponential(1.0 / total)
        site = int(rng.integers(N))
        u = rng.uniform(0.0, bound)
        t_new = clock.time + dt
        while si < len(sample_times) and sample_times[si] < t_new \
                and sample_times[si] <= T:
            samples.append(grid.fractions())
            si += 1
        if t_new >= T:
            clock.time = T
            break
        clock.time = t_new
        x, y = geo.site_xy(site)
        if u < stir:
            d = min(3, int(u * 4.0 / stir))
            dx, dy = _DIRS[d]
            a, b = grid.get(x, y), grid.get(x + dx, y + dy)
            grid.set(x, y, b)
            grid.set(x + dx, y + dy, a)
            clock.events += 1
            last_event_time = clock.time
            continue
        u -= stir
        for rate, apply, tag in model.site_transitions(grid, x, y):
            if u < rate:
                apply(rng)
                clock.events += 1
                last_event_time = clock.time
                break
            u -= rate
    clock.time = T
    while si < len(sample_times):
        samples.append(grid.fractions())
        si += 1
    return SimResult(grid, clock, sample_times, np.array(samples),
                     absorbed, absorption_time)


def run_fast_trace(model, grid: StateGrid, T: float, rng_state: np.ndarray,
                   sample_times=None, stirring: StirringSpec | None = None,
                   t0: float = 0.0) -> SimResult:
    """Compiled-path equivalent of run_until for StateGrid models."""
    sample_times = (np.asarray(sample_times, dtype=float)
                    if sample_times is not None else np.array([T]))
    if np.any(np.diff(sample_times) < 0) or np.any(sample_times > T):
        raise ValueError("sample times must be non-decreasing and <= T")
    eps = stirring.epsilon if stirring else None
    samples = []
    t = t0
    clock = SimClock(time=t0)
    absorbed = False
    absorption_time = None
    for t_next in np.concatenate([sample_times, [T]]):
        if not absorbed and t_next > t:
            t, was_absorbed, _, acc = kernels.run_fast(
                model, grid, t, t_next, rng_state, eps)
            clock.events += acc
            if was_absorbed:
                absorbed = True
                absorption_time = t
        t = max(t, t_next)
        samples.append(grid.fractions())
    samples.pop()  # the trailing [T] run is not a requested sample
    clock.time = T
    return SimResult(grid, clock, sample_times, np.array(samples),
                     absorbed, absorption_time)


# ---------------------------------------------------------------------------
# hawks/doves count model: direct-method Gillespie

def _square_sums(arr: np.ndarray) -> np.ndarray:
    """Sum of arr over the 5x5 torus square centered at each site."""
    out = np.zeros_like(arr)
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            out += np.roll(np.roll(arr, dy, axis=0), dx, axis=1)
    return out


def pd_site_rates(model: PrisonersDilemma, grid: CountGrid):
    """Per-site rates for the 8 event classes of the hawks/doves model.

    Returns (rates, hawk_game, dove_game): rates has shape (8, H, W) in the
    order hawk-migrate, hawk-crowd, hawk-game, dove-migrate, dove-crowd,
    dove-game, hawk-game-sign, dove-game-sign packed as the signed
    per-capita game rates in the last two channels.
    """
    h = grid.hawks.astype(np.float64)
    v = grid.doves.astype(np.float64)
    n = h + v
    sq_h = _square_sums(h)
    sq_n = _square_sums(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(sq_n > 0, sq_h / np.maximum(sq_n, 1), 0.0)
    defined = sq_n > 0
    gh = np.where(defined, model.a * p + model.b * (1 - p), 0.0)
    gd = np.where(defined, model.c * p + model.d * (1 - p), 0.0)
    rates = np.stack([
        model.nu * h,
        model.kappa * n * h,
        np.abs(gh) * h,
        model.nu * v,
        model.kappa * n * v,
        np.abs(gd) * v,
    ])
    return rates, gh, gd


def run_count_model(model: PrisonersDilemma, grid: CountGrid, T: float,
                    rng: np.random.Generator, sample_times=None) -> SimResult:
    """Direct-method sampler for the hawks/doves model.

    Samples record per-site mean hawk and dove counts.  Rates are rebuilt
    after every event; fine at the desk scales this model is run at.
    """
    sample_times = (np.asarray(sample_times, dtype=float)
                    if sample_times is not None else np.array([T]))
    geo = grid.geometry
    W, H = geo.width, geo.height
    clock = SimClock()
    samples = []
    si = 0
    absorbed = False
    absorption_time = None

    def record():
        samples.append(np.array([grid.hawks.mean(), grid.doves.mean()]))

    while clock.time < T:
        rates, gh, gd = pd_site_rates(model, grid)
        total = rates.sum()
        if total <= 0:
            absorbed = True
            absorption_time = clock.time
            break
        dt = rng.exponential(1.0 / total)
        t_new = clock.time + dt
        while si < len(sample_times) and sample_times[si] < t_new:
            record()
            si += 1
        if t_new >= T:
            clock.time = T
            break
        clock.time = t_new
        flat = rates.ravel()
        idx = int(np.searchsorted(np.cumsum(flat), rng.uniform(0, total),
                                  side="right"))
        idx = min(idx, flat.size - 1)
        cls, rem = divmod(idx, W * H)
        y, x = divmod(rem, W)
        arr = grid.hawks if cls < 3 else grid.doves
        kind = cls % 3
        if kind == 0:  # migrate
            dx, dy = _DIRS[int(rng.integers(4))]
            arr[y, x] -= 1
            arr[(y + dy) % H, (x + dx) % W] += 1
        elif kind == 1:  # crowding death
            arr[y, x] -= 1
        else:  # game step: birth when positive, death when negative
            g = gh[y, x] if cls < 3 else gd[y, x]
            arr[y, x] += 1 if g > 0 else -1
        clock.events += 1
    clock.time = T
    while si < len(sample_times):
        record()
        si += 1
    return SimResult(grid, clock, sample_times, np.array(samples),
                     absorbed, absorption_time)


# ---------------------------------------------------------------------------
# checkpointing

def save_checkpoint(path, grid, t: float, rng_state, extra: dict | None = None):
    """Versioned binary checkpoint: 8-byte magic, u32 version, payload."""
    if isinstance(rng_state, np.random.Generator):
        rng_payload = ("generator", rng_state.bit_generator.state)
    else:
        rng_payload = ("xoshiro", np.asarray(rng_state, dtype=np.uint64).tolist())
    payload = {
        "t": float(t),
        "rng": rng_payload,
        "extra": extra or {},
    }
    if isinstance(grid, CountGrid):
        payload["grid"] = ("count", grid.geometry.width, grid.geometry.height,
                           grid.hawks.tolist(), grid.doves.tolist())
    else:
        payload["grid"] = ("state", grid.geometry.width, grid.geometry.height,
                           grid.n_states, grid.states.tolist())
    blob = pickle.dumps(payload, protocol=4)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(blob)


def load_checkpoint(path):
    """Returns (grid, t, rng_state, extra); rng_state matches what was saved
    (a Generator or a xoshiro uint64 state vector)."""
    from .lattice import TorusGeometry
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        payload = pickle.loads(fh.read())
    kind = payload["grid"][0]
    if kind == "count":
        _, w, h, hawks, doves = payload["grid"]
        grid = CountGrid(TorusGeometry(w, h), np.array(hawks), np.array(doves))
    else:
        _, w, h, n_states, states = payload["grid"]
        grid = StateGrid(TorusGeometry(w, h), n_states, np.array(states))
    rkind, rdata = payload["rng"]
    if rkind == "generator":
        gen = np.random.default_rng()
        gen.bit_generator.state = rdata
        rng_state = gen
    else:
        rng_state = np.array(rdata, dtype=np.uint64)
    return grid, payload["t"], rng_state, payload["extra"]
