"""Experiment orchestration: config files, replicated runs, coexistence
verdicts, parameter sweeps, and deterministic file outputs (CSV traces and
PPM snapshots).
"""

from __future__ import annotations

import csv
import io
import os
import time as _time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import TorusGeometry, StateGrid, CountGrid, RandomStream
from .models import build_model, PrisonersDilemma, REGISTRY
from .engine import (StirringSpec, SimClock, run_until, run_count_model,
                     save_checkpoint, load_checkpoint)
from . import kernels


class ConfigError(ValueError):
    pass


# 0 white, 1 black, 2 mid-gray, 3 light-gray, then darker grays for larger
# alphabets
DEFAULT_PALETTE = [(255, 255, 255), (0, 0, 0), (128, 128, 128),
                   (192, 192, 192), (96, 96, 96), (224, 224, 224),
                   (64, 64, 64), (160, 160, 160)]


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    params: dict
    width: int = 100
    height: int = 100
    init: str = "all:0"
    horizon: float = 100.0
    samples: int = 51
    replicates: int = 1
    seed: int = 0
    stirring: float | None = None
    out_dir: str = "out"
    snapshot: bool = False
    palette: tuple | None = None
    theta: float = 0.05
    window: float = 0.2  # fraction of the horizon checked for persistence
    checkpoint_interval: float | None = None
    threads: int = 1

    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.samples)

    def window_span(self) -> float:
        return self.window * self.horizon


_EXPERIMENT_KEYS = {
    "model": str, "width": int, "height": int, "init": str,
    "horizon": float, "samples": int, "replicates": int, "seed": int,
    "stirring": float, "threads": int,
}
_OUTPUT_KEYS = {
    "directory": str, "snapshot": bool, "palette": str, "theta": float,
    "window": float, "checkpoint_interval": float,
}


def _parse_value(raw: str, typ):
    raw = raw.strip()
    if typ is bool:
        if raw.lower() in ("true", "yes", "1"):
            return True
        if raw.lower() in ("false", "no", "0"):
            return False
        raise ConfigError(f"not a boolean: {raw!r}")
    try:
        return typ(raw)
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _parse_palette(raw: str):
    out = []
    for part in raw.split(";"):
        rgb = tuple(int(v) for v in part.split(","))
        if len(rgb) != 3 or any(not 0 <= v <= 255 for v in rgb):
            raise ConfigError(f"bad palette entry {part!r}")
        out.append(rgb)
    return tuple(out)


def parse_config(text: str) -> ExperimentConfig:
    """Line-oriented `key = value` pairs under [section] headers.

    Unknown sections or keys are errors; [model] keys are handed to the
    model constructor verbatim.
    """
    section = None
    exp: dict = {}
    out: dict = {}
    params: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in ("experiment", "model", "output"):
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.strip()
        if section == "experiment":
            if key not in _EXPERIMENT_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            exp[key] = _parse_value(raw, _EXPERIMENT_KEYS[key])
        elif section == "output":
            if key not in _OUTPUT_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key == "palette":
                out["palette"] = _parse_palette(raw)
            else:
                out[key] = _parse_value(raw, _OUTPUT_KEYS[key])
        elif section == "model":
            if raw.lower() in ("true", "false"):
                params[key] = raw.lower() == "true"
            else:
                params[key] = _parse_value(raw, float)
        else:
            raise ConfigError(f"line {lineno}: key outside any section")
    if "model" not in exp:
        raise ConfigError("missing required key: model")
    if exp["model"] not in REGISTRY:
        raise ConfigError(f"unknown model {exp['model']!r}")
    kwargs = dict(exp)
    if "directory" in out:
        kwargs["out_dir"] = out.pop("directory")
    kwargs.update(out)
    return ExperimentConfig(params=params, **kwargs)


def format_config(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    buf.write("[experiment]\n")
    buf.write(f"model = {cfg.model}\n")
    buf.write(f"width = {cfg.width}\n")
    buf.write(f"height = {cfg.height}\n")
    buf.write(f"init = {cfg.init}\n")
    buf.write(f"horizon = {cfg.horizon!r}\n")
    buf.write(f"samples = {cfg.samples}\n")
    buf.write(f"replicates = {cfg.replicates}\n")
    buf.write(f"seed = {cfg.seed}\n")
    buf.write(f"threads = {cfg.threads}\n")
    if cfg.stirring is not None:
        buf.write(f"stirring = {cfg.stirring!r}\n")
    buf.write("\n[model]\n")
    for k, v in cfg.params.items():
        if isinstance(v, bool):
            buf.write(f"{k} = {'true' if v else 'false'}\n")
        else:
            buf.write(f"{k} = {float(v)!r}\n")
    buf.write("\n[output]\n")
    buf.write(f"directory = {cfg.out_dir}\n")
    buf.write(f"snapshot = {'true' if cfg.snapshot else 'false'}\n")
    buf.write(f"theta = {cfg.theta!r}\n")
    buf.write(f"window = {cfg.window!r}\n")
    if cfg.checkpoint_interval is not None:
        buf.write(f"checkpoint_interval = {cfg.checkpoint_interval!r}\n")
    if cfg.palette is not None:
        buf.write("palette = "
                  + ";".join(",".join(str(c) for c in rgb)
                             for rgb in cfg.palette) + "\n")
    return buf.getvalue()


@dataclass
class DensityTrace:
    times: np.ndarray
    values: np.ndarray  # (n_samples, n_channels)
    channels: tuple[str, ...]


@dataclass
class CoexistenceVerdict:
    persists: tuple[bool, ...]
    theta: float
    window: tuple[float, float]


def detect_coexistence(trace: DensityTrace, theta: float,
                       window: float) -> CoexistenceVerdict:
    """A type persists iff its density is >= theta at every sample inside
    the final window [T - window, T]."""
    T = float(trace.times[-1])
    if window > T - float(trace.times[0]) + 1e-12:
        raise ValueError("window longer than trace span")
    mask = trace.times >= T - window - 1e-12
    flags = tuple(bool(np.all(trace.values[mask, j] >= theta))
                  for j in range(trace.values.shape[1]))
    return CoexistenceVerdict(flags, theta, (T - window, T))


def build_model_from_config(cfg: ExperimentConfig):
    try:
        return build_model(cfg.model, **cfg.params)
    except (TypeError, ValueError, KeyError) as e:
        raise ConfigError(f"bad model parameters for {cfg.model!r}: {e}") from e


def build_initial_grid(model, cfg: ExperimentConfig,
                       gen: np.random.Generator):
    geo = TorusGeometry(cfg.width, cfg.height)
    kind, _, arg = cfg.init.partition(":")
    if isinstance(model, PrisonersDilemma):
        if kind != "counts":
            raise ConfigError("count model needs init = counts:<hawks>,<doves>")
        mh, md = (float(v) for v in arg.split(","))
        grid = CountGrid(geo)
        grid.hawks[:] = gen.poisson(mh, grid.hawks.shape)
        grid.doves[:] = gen.poisson(md, grid.doves.shape)
        return grid
    grid = model.make_grid(geo)
    if kind == "all":
        s = int(arg)
        if not 0 <= s < model.n_states:
            raise ConfigError(f"init state {s} outside alphabet")
        grid.states[:] = s
    elif kind == "random":
        p = np.array([float(v) for v in arg.split(",")])
        if len(p) != model.n_states:
            raise ConfigError(
                f"init needs {model.n_states} probabilities, got {len(p)}")
        if abs(p.sum() - 1.0) > 1e-9 or np.any(p < 0):
            raise ConfigError("init probabilities must be a distribution")
        grid.states[:] = gen.choice(
            model.n_states, size=grid.states.shape, p=p).astype(np.int8)
    else:
        raise ConfigError(f"unknown init spec {cfg.init!r}")
    return grid


def _state_channels(model) -> tuple[str, ...]:
    return tuple(f"u_{i}" for i in range(model.n_states))


def run_replicate(cfg: ExperimentConfig, rep: int, model=None,
                  resume_from=None, checkpoint_path=None):
    """One replicate with stream (seed, rep); returns (trace, final grid).

    The run is chunked at the sample schedule; with a checkpoint path and
    interval, state is dumped at sample boundaries on that wall-time cadence
    and a resumed run reproduces the uninterrupted one exactly.
    """
    model = model or build_model_from_config(cfg)
    stream = RandomStream(cfg.seed, rep)
    times = cfg.sample_times()

    if isinstance(model, PrisonersDilemma):
        gen = stream.generator()
        grid = build_initial_grid(model, cfg, gen)
        res = run_count_model(model, grid, cfg.horizon, gen, times)
        trace = DensityTrace(times, res.samples,
                             ("hawks_per_site", "doves_per_site"))
        return trace, grid

    stirring = StirringSpec(cfg.stirring) if cfg.stirring else None
    samples: list[np.ndarray] = []
    start_idx = 0
    if resume_from is not None:
        grid, t, rng_state, extra = load_checkpoint(resume_from)
        samples = [np.array(s) for s in extra["samples"]]
        start_idx = len(samples)
    else:
        grid = build_initial_grid(model, cfg, stream.generator())
        rng_state = stream.kernel_state()
        t = 0.0
    absorbed = False
    last_wall = _time.monotonic()
    eps = stirring.epsilon if stirring else None
    for i in range(start_idx, len(times)):
        t_next = float(times[i])
        if not absorbed and t_next > t:
            t, absorbed, _, _ = kernels.run_fast(model, grid, t, t_next,
                                                 rng_state, eps)
        t = max(t, t_next)
        samples.append(grid.fractions())
        if checkpoint_path is not None and cfg.checkpoint_interval is not None:
            if _time.monotonic() - last_wall >= cfg.checkpoint_interval:
                save_checkpoint(checkpoint_path, grid, t, rng_state,
                                {"samples": [s.tolist() for s in samples]})
                last_wall = _time.monotonic()
    trace = DensityTrace(times, np.array(samples), _state_channels(model))
    return trace, grid


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[DensityTrace]
    verdicts: list[CoexistenceVerdict]
    grids: list
    csv_paths: list[str]
    snapshot_paths: list[str]


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """All replicates; outputs named by replicate index, written atomically."""
    model = build_model_from_config(cfg)
    results = [None] * cfg.replicates

    def work(rep):
        results[rep] = run_replicate(cfg, rep, model=model)

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            list(pool.map(work, range(cfg.replicates)))
    else:
        for rep in range(cfg.replicates):
            work(rep)

    traces = [r[0] for r in results]
    grids = [r[1] for r in results]
    verdicts = [detect_coexistence(tr, cfg.theta, cfg.window_span())
                for tr in traces]
    csv_paths, snap_paths = [], []
    if write:
        os.makedirs(cfg.out_dir, exist_ok=True)
        for rep, (trace, grid) in enumerate(zip(traces, grids)):
            path = os.path.join(cfg.out_dir, f"rep{rep:03d}.csv")
            emit_csv(trace, path)
            csv_paths.append(path)
            if cfg.snapshot and isinstance(grid, StateGrid):
                spath = os.path.join(cfg.out_dir, f"rep{rep:03d}.ppm")
                emit_snapshot(grid, cfg.palette or DEFAULT_PALETTE, spath)
                snap_paths.append(spath)
    return ExperimentResult(cfg, traces, verdicts, grids, csv_paths, snap_paths)


def sweep(cfg: ExperimentConfig, axis: str, values, write: bool = True):
    """One experiment per axis value; summary rows in input order.

    Each row: value, per-channel persistence fraction across replicates,
    per-channel mean final density.
    """
    rows = []
    for v in values:
        params = dict(cfg.params)
        params[axis] = v
        sub = replace(cfg, params=params,
                      out_dir=os.path.join(cfg.out_dir, f"{axis}={v:g}"))
        res = run_experiment(sub, write=write)
        n = len(res.traces)
        chans = res.traces[0].channels
        persist = np.mean([[verdict.persists[j] for j in range(len(chans))]
                           for verdict in res.verdicts], axis=0)
        final = np.mean([tr.values[-1] for tr in res.traces], axis=0)
        rows.append({"value": v,
                     **{f"persist_{c}": persist[j] for j, c in enumerate(chans)},
                     **{f"final_{c}": final[j] for j, c in enumerate(chans)}})
    if write and rows:
        os.makedirs(cfg.out_dir, exist_ok=True)
        path = os.path.join(cfg.out_dir, f"sweep_{axis}.csv")
        _atomic_write_text(path, _rows_to_csv(rows))
    return rows


def _rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def _atomic_write(path: str, data: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _atomic_write_text(path: str, text: str) -> None:
    _atomic_write(path, text.encode())


def emit_csv(trace: DensityTrace, path) -> None:
    """Full-precision trace CSV with LF line endings."""
    buf = io.StringIO()
    buf.write("t," + ",".join(trace.channels) + "\n")
    for t, row in zip(trace.times, trace.values):
        buf.write(repr(float(t)) + ","
                  + ",".join(repr(float(v)) for v in row) + "\n")
    _atomic_write_text(str(path), buf.getvalue())


def parse_trace_csv(path) -> DensityTrace:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    channels = tuple(rows[0][1:])
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    if data.size == 0:
        return DensityTrace(np.empty(0), np.empty((0, len(channels))), channels)
    return DensityTrace(data[:, 0], data[:, 1:], channels)


def emit_snapshot(grid: StateGrid, palette, path) -> None:
    """Binary PPM (P6), one pixel per site, byte-deterministic."""
    if len(palette) < grid.n_states:
        raise ValueError("palette does not cover the model alphabet")
    lut = np.array(palette[:max(grid.n_states, 1)], dtype=np.uint8)
    pixels = lut[grid.states]
    header = f"P6\n{grid.geometry.width} {grid.geometry.height}\n255\n"
    _atomic_write(str(path), header.encode() + pixels.tobytes())
