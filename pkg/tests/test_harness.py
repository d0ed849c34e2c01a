import os

import numpy as np
import pytest

from coexlab import harness
from coexlab.harness import (ConfigError, DensityTrace, ExperimentConfig,
                             detect_coexistence, parse_config, format_config,
                             run_experiment, run_replicate, sweep,
                             emit_csv, parse_trace_csv, emit_snapshot,
                             build_initial_grid, build_model_from_config,
                             DEFAULT_PALETTE)
from coexlab.lattice import TorusGeometry, StateGrid
from coexlab.models import build_model

CONFIG = """
# contact process on a small torus
[experiment]
model = competing-contact
width = 16
height = 16
init = random:0.5,0.5,0.0
horizon = 10
samples = 11
replicates = 2
seed = 9

[model]
beta1 = 4.0
beta2 = 0.0
delta1 = 1.0
delta2 = 1.0

[output]
directory = out
theta = 0.05
window = 0.2
"""


class TestConfig:
    def test_parse(self):
        cfg = parse_config(CONFIG)
        assert cfg.model == "competing-contact"
        assert cfg.width == 16 and cfg.height == 16
        assert cfg.params["beta1"] == 4.0
        assert cfg.replicates == 2
        assert cfg.sample_times().shape == (11,)
        assert cfg.window_span() == pytest.approx(2.0)

    def test_roundtrip(self):
        cfg = parse_config(CONFIG)
        assert parse_config(format_config(cfg)) == cfg

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[nonsense]\na = 1\n")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("[experiment]\nmodel = catalyst\nturbo = yes\n")

    def test_key_outside_section(self):
        with pytest.raises(ConfigError, match="outside any section"):
            parse_config("model = catalyst\n")

    def test_missing_model(self):
        with pytest.raises(ConfigError, match="model"):
            parse_config("[experiment]\nwidth = 8\n")

    def test_unknown_model(self):
        with pytest.raises(ConfigError, match="unknown model"):
            parse_config("[experiment]\nmodel = gremlins\n")

    def test_bad_number(self):
        with pytest.raises(ConfigError):
            parse_config("[experiment]\nmodel = catalyst\nwidth = soon\n")

    def test_bad_palette(self):
        with pytest.raises(ConfigError, match="palette"):
            parse_config("[experiment]\nmodel = catalyst\n"
                         "[output]\npalette = 1,2\n")

    def test_model_params_free_form(self):
        cfg = parse_config("[experiment]\nmodel = catalyst\n"
                           "[model]\np = 0.4\nq = 1.2\ndouble_o2_flux = true\n")
        assert cfg.params == {"p": 0.4, "q": 1.2, "double_o2_flux": True}

    def test_bad_model_params_flagged(self):
        cfg = parse_config("[experiment]\nmodel = catalyst\n"
                           "[model]\np = -1.0\nq = 1.0\n")
        with pytest.raises(ConfigError, match="bad model parameters"):
            build_model_from_config(cfg)


class TestDetectCoexistence:
    def test_constant_trace_both_persist(self):
        trace = DensityTrace(np.linspace(0, 10, 11),
                             np.full((11, 2), 0.5), ("a", "b"))
        v = detect_coexistence(trace, 0.05, 2.0)
        assert v.persists == (True, True)
        assert v.window == (8.0, 10.0)

    def test_dip_inside_window_kills_verdict(self):
        vals = np.full((11, 2), 0.5)
        vals[9, 1] = 0.0
        trace = DensityTrace(np.linspace(0, 10, 11), vals, ("a", "b"))
        assert detect_coexistence(trace, 0.05, 2.0).persists == (True, False)

    def test_dip_before_window_ignored(self):
        vals = np.full((11, 2), 0.5)
        vals[2, 1] = 0.0
        trace = DensityTrace(np.linspace(0, 10, 11), vals, ("a", "b"))
        assert detect_coexistence(trace, 0.05, 2.0).persists == (True, True)

    def test_window_longer_than_trace(self):
        trace = DensityTrace(np.linspace(0, 10, 11),
                             np.full((11, 1), 0.5), ("a",))
        with pytest.raises(ValueError):
            detect_coexistence(trace, 0.05, 20.0)


class TestInitialGrid:
    def test_all_state(self):
        cfg = ExperimentConfig("competing-contact", {}, width=8, height=8,
                               init="all:1")
        model = build_model("competing-contact", beta1=1, beta2=1,
                            delta1=1, delta2=1)
        grid = build_initial_grid(model, cfg, np.random.default_rng(0))
        assert np.all(grid.states == 1)

    def test_all_state_outside_alphabet(self):
        cfg = ExperimentConfig("competing-contact", {}, init="all:7")
        model = build_model("competing-contact", beta1=1, beta2=1,
                            delta1=1, delta2=1)
        with pytest.raises(ConfigError):
            build_initial_grid(model, cfg, np.random.default_rng(0))

    def test_random_distribution(self):
        cfg = ExperimentConfig("competing-contact", {}, width=50, height=50,
                               init="random:0.2,0.3,0.5")
        model = build_model("competing-contact", beta1=1, beta2=1,
                            delta1=1, delta2=1)
        grid = build_initial_grid(model, cfg, np.random.default_rng(0))
        f = grid.fractions()
        assert np.abs(f - [0.2, 0.3, 0.5]).max() < 0.05

    def test_random_needs_distribution(self):
        cfg = ExperimentConfig("competing-contact", {}, init="random:0.2,0.3")
        model = build_model("competing-contact", beta1=1, beta2=1,
                            delta1=1, delta2=1)
        with pytest.raises(ConfigError):
            build_initial_grid(model, cfg, np.random.default_rng(0))

    def test_count_model_poisson_seeding(self):
        cfg = ExperimentConfig("prisoners-dilemma", {}, width=30, height=30,
                               init="counts:2.0,1.0")
        model = build_model("prisoners-dilemma")
        grid = build_initial_grid(model, cfg, np.random.default_rng(0))
        assert abs(grid.hawks.mean() - 2.0) < 0.2
        assert abs(grid.doves.mean() - 1.0) < 0.2

    def test_count_model_needs_counts_init(self):
        cfg = ExperimentConfig("prisoners-dilemma", {}, init="all:0")
        with pytest.raises(ConfigError):
            build_initial_grid(build_model("prisoners-dilemma"), cfg,
                               np.random.default_rng(0))


class TestRunReplicate:
    def test_first_row_echoes_seeding(self):
        cfg = parse_config(CONFIG)
        trace, grid = run_replicate(cfg, 0)
        assert trace.times[0] == 0.0
        assert abs(trace.values[0, 1] - 0.5) < 0.1

    def test_deterministic(self):
        cfg = parse_config(CONFIG)
        t1, g1 = run_replicate(cfg, 0)
        t2, g2 = run_replicate(cfg, 0)
        t3, _ = run_replicate(cfg, 1)
        assert np.array_equal(t1.values, t2.values)
        assert np.array_equal(g1.states, g2.states)
        assert not np.array_equal(t1.values, t3.values)

    def test_checkpoint_resume_identical(self, tmp_path):
        cfg = parse_config(CONFIG)
        cfg = ExperimentConfig(**{**cfg.__dict__, "checkpoint_interval": 0.0})
        chk = tmp_path / "rep.chk"
        full_trace, full_grid = run_replicate(cfg, 0)
        run_replicate(cfg, 0, checkpoint_path=chk)
        assert chk.exists()
        resumed_trace, resumed_grid = run_replicate(cfg, 0, resume_from=chk)
        assert np.array_equal(resumed_trace.values, full_trace.values)
        assert np.array_equal(resumed_grid.states, full_grid.states)


class TestRunExperiment:
    def test_writes_traces(self, tmp_path):
        cfg = parse_config(CONFIG)
        cfg = ExperimentConfig(**{**cfg.__dict__,
                                  "out_dir": str(tmp_path / "out")})
        res = run_experiment(cfg)
        assert len(res.traces) == 2 and len(res.verdicts) == 2
        assert sorted(os.path.basename(p) for p in res.csv_paths) == \
            ["rep000.csv", "rep001.csv"]
        back = parse_trace_csv(res.csv_paths[0])
        assert np.array_equal(back.values, res.traces[0].values)

    def test_threads_match_serial(self, tmp_path):
        cfg = parse_config(CONFIG)
        serial = ExperimentConfig(**{**cfg.__dict__, "threads": 1})
        parallel = ExperimentConfig(**{**cfg.__dict__, "threads": 2})
        r1 = run_experiment(serial, write=False)
        r2 = run_experiment(parallel, write=False)
        for a, b in zip(r1.traces, r2.traces):
            assert np.array_equal(a.values, b.values)

    def test_rerun_byte_identical(self, tmp_path):
        cfg = parse_config(CONFIG)
        cfg = ExperimentConfig(**{**cfg.__dict__,
                                  "out_dir": str(tmp_path / "out"),
                                  "snapshot": True,
                                  "init": "random:0.5,0.3,0.2",
                                  "params": {"beta1": 4.0, "beta2": 2.0,
                                             "delta1": 1.0, "delta2": 1.0}})
        res1 = run_experiment(cfg)
        blobs1 = [open(p, "rb").read()
                  for p in res1.csv_paths + res1.snapshot_paths]
        res2 = run_experiment(cfg)
        blobs2 = [open(p, "rb").read()
                  for p in res2.csv_paths + res2.snapshot_paths]
        assert res1.snapshot_paths  # snapshots actually produced
        assert blobs1 == blobs2


class TestSweep:
    def test_empty_values(self, tmp_path):
        cfg = parse_config(CONFIG)
        assert sweep(cfg, "beta1", [], write=False) == []

    def test_survival_threshold_crossed(self, tmp_path):
        cfg = parse_config(CONFIG)
        cfg = ExperimentConfig(**{**cfg.__dict__, "horizon": 30.0,
                                  "samples": 16, "replicates": 3,
                                  "width": 32, "height": 32,
                                  "out_dir": str(tmp_path / "sw")})
        rows = sweep(cfg, "beta1", [0.5, 4.0])
        assert [r["value"] for r in rows] == [0.5, 4.0]
        assert rows[0]["persist_u_1"] == 0.0   # subcritical: extinct
        assert rows[1]["persist_u_1"] == 1.0   # supercritical: persists
        assert os.path.exists(tmp_path / "sw" / "sweep_beta1.csv")


class TestOutputs:
    def test_csv_empty_trace(self, tmp_path):
        trace = DensityTrace(np.empty(0), np.empty((0, 2)), ("a", "b"))
        path = tmp_path / "empty.csv"
        emit_csv(trace, path)
        assert path.read_text() == "t,a,b\n"
        back = parse_trace_csv(path)
        assert back.channels == ("a", "b") and back.values.size == 0

    def test_csv_roundtrip_full_precision(self, tmp_path):
        vals = np.random.default_rng(0).random((5, 3))
        trace = DensityTrace(np.linspace(0, 1, 5), vals, ("x", "y", "z"))
        path = tmp_path / "t.csv"
        emit_csv(trace, path)
        back = parse_trace_csv(path)
        assert np.array_equal(back.values, vals)
        assert np.array_equal(back.times, trace.times)

    def test_snapshot_pixel_bytes(self, tmp_path):
        grid = StateGrid(TorusGeometry(2, 2), 3,
                         np.array([[0, 1], [2, 0]]))
        path = tmp_path / "snap.ppm"
        emit_snapshot(grid, DEFAULT_PALETTE, path)
        data = path.read_bytes()
        assert data.startswith(b"P6\n2 2\n255\n")
        assert data[11:] == bytes([255, 255, 255, 0, 0, 0,
                                   128, 128, 128, 255, 255, 255])

    def test_snapshot_all_white(self, tmp_path):
        grid = StateGrid(TorusGeometry(3, 2), 2)
        path = tmp_path / "w.ppm"
        emit_snapshot(grid, DEFAULT_PALETTE, path)
        assert path.read_bytes()[11:] == bytes([255] * 18)

    def test_snapshot_reemit_identical(self, tmp_path):
        grid = StateGrid(TorusGeometry(4, 4), 3,
                         np.random.default_rng(1).integers(0, 3, (4, 4)))
        p1, p2 = tmp_path / "a.ppm", tmp_path / "b.ppm"
        emit_snapshot(grid, DEFAULT_PALETTE, p1)
        emit_snapshot(grid, DEFAULT_PALETTE, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_snapshot_palette_too_small(self, tmp_path):
        grid = StateGrid(TorusGeometry(2, 2), 3)
        with pytest.raises(ValueError):
            emit_snapshot(grid, [(0, 0, 0)], tmp_path / "x.ppm")

    def test_no_tmp_files_left(self, tmp_path):
        trace = DensityTrace(np.linspace(0, 1, 3), np.zeros((3, 1)), ("a",))
        emit_csv(trace, tmp_path / "t.csv")
        assert os.listdir(tmp_path) == ["t.csv"]


class TestAbsentTypeStaysAbsent:
    def test_competing_contact_monoculture(self):
        cfg = ExperimentConfig(
            "competing-contact",
            {"beta1": 4.0, "beta2": 4.0, "delta1": 1.0, "delta2": 1.0},
            width=16, height=16, init="all:1", horizon=10.0, samples=6,
            seed=4)
        trace, _ = run_replicate(cfg, 0)
        assert np.all(trace.values[:, 2] == 0.0)
