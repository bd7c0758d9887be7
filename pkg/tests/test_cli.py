import json
import subprocess
import sys

import numpy as np
import pytest

from qfpdft.cli import main, replay
from qfpdft.registry import load_solution, read_counts_csv, read_distribution_csv

TINY = ["--swarm-size", "10", "--iterations", "20", "--restarts", "1", "--no-polish"]


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "qfpdft.cli", *args],
                          capture_output=True, text=True)


def strip_volatile(record):
    record = dict(record)
    for key in ("created", "wall_time_s"):
        record.pop(key, None)
    return record


@pytest.fixture
def tables(tmp_path):
    """Ideal logical and Fourier count tables for |phi = 0>."""
    d = {}
    for name, gate in (("log", "identity:3"), ("dft", "ideal-dft:3")):
        dist = tmp_path / f"{name}_p.csv"
        assert main(["correlate", "--state", "phi:0", "--gate-i", gate, "--gate-s", gate,
                     "--out", str(dist)]) == 0
        counts = tmp_path / f"{name}_c.csv"
        assert main(["counts", str(dist), "--n", "1000", "--seed", "1",
                     "--out", str(counts)]) == 0
        d[name] = counts
    return d


def test_synth_writes_solution_tables_and_record(tmp_path):
    out = tmp_path / "sol.json"
    assert main(["synth", "--d", "2", "--B", "4", "--seed", "3", "--out", str(out), *TINY]) == 0
    sol = load_solution(out)
    assert sol.search_space.n_channels == 4 and sol.pso.seed == 3
    wave = (tmp_path / "sol.waveforms.csv").read_text().splitlines()
    assert wave[0] == "t_over_T,A,B" and len(wave) == 513
    shaper = (tmp_path / "sol.shaper.csv").read_text().splitlines()
    assert shaper[0] == "lattice_index,bin,phase,shaped" and len(shaper) == 65
    record = json.loads((tmp_path / "sol.run.json").read_text())
    assert record["command"] == "synth" and record["args"]["seed"] == 3


def test_synth_default_bandwidth_and_d1(tmp_path):
    out = tmp_path / "one.json"
    assert main(["synth", "--d", "1", "--seed", "0", "--out", str(out), *TINY]) == 0
    sol = load_solution(out)
    assert sol.search_space.n_channels == 4
    assert sol.metrics.fidelity == pytest.approx(1.0)
    assert sol.metrics.success_prob == pytest.approx(1.0)


def test_synth_same_seed_same_bytes_except_volatile(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--d", "2", "--B", "4", "--seed", "9",
                     "--out", str(tmp_path / f"{name}.json"), *TINY]) == 0
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert strip_volatile(a) == strip_volatile(b)
    assert (tmp_path / "a.waveforms.csv").read_bytes() == (tmp_path / "b.waveforms.csv").read_bytes()


def test_generated_seed_is_recorded(tmp_path):
    out = tmp_path / "c.csv"
    dist = tmp_path / "p.csv"
    main(["correlate", "--state", "maxent:2", "--gate-i", "identity:2", "--gate-s",
          "identity:2", "--out", str(dist)])
    assert main(["counts", str(dist), "--n", "50", "--out", str(out)]) == 0
    record = json.loads((tmp_path / "c.run.json").read_text())
    assert isinstance(record["args"]["seed"], int)


def test_correlate_builtin_gates(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["correlate", "--state", "maxent:10", "--gate-i", "ideal-dft:10",
                 "--gate-s", "ideal-dft:10", "--out", str(out)]) == 0
    np.testing.assert_allclose(read_distribution_csv(out).probs, np.eye(10) / 10, atol=1e-10)
    assert main(["correlate", "--state", "maxent:10", "--gate-i", "identity:10",
                 "--gate-s", "identity:10", "--out", str(out)]) == 0
    np.testing.assert_allclose(read_distribution_csv(out).probs,
                               np.fliplr(np.eye(10)) / 10, atol=1e-15)


def test_correlate_with_solution_file(tmp_path):
    sol = tmp_path / "sol.json"
    main(["synth", "--d", "2", "--B", "4", "--seed", "1", "--out", str(sol), *TINY])
    out = tmp_path / "p.csv"
    assert main(["correlate", "--state", "maxent:2", "--gate-i", f"solution:{sol}",
                 "--gate-s", "ideal-dft:2", "--out", str(out)]) == 0
    dist = read_distribution_csv(out)
    assert dist.probs.shape == (2, 2)


def test_counts_models(tmp_path, tables):
    assert read_counts_csv(tables["log"]).total == 1000
    out = tmp_path / "pc.csv"
    assert main(["counts", str(tmp_path / "dft_p.csv"), "--model", "poisson", "--rate", "300",
                 "--dwell", "2", "--seed", "4", "--out", str(out)]) == 0
    counts = read_counts_csv(out).counts
    assert np.all(counts[~np.eye(3, dtype=bool)] == 0)
    assert 450 < counts.trace() < 750


def test_bound_record(tmp_path, tables):
    out = tmp_path / "b.json"
    assert main(["bound", str(tables["log"]), str(tables["dft"]), "--seed", "2",
                 "--n-samples", "4096", "--out", str(out)]) == 0
    rec = json.loads(out.read_text())
    assert {"quantity", "mean", "std", "n_samples", "seed"} <= set(rec)
    assert rec["mean"] > 1.4 and rec["n_samples"] == 4096 and rec["seed"] == 2


def test_global_flags_before_subcommand(tmp_path, tables):
    out = tmp_path / "b.json"
    assert main(["--seed", "2", "--out", str(out), "bound", str(tables["log"]),
                 str(tables["dft"]), "--n-samples", "100"]) == 0
    rec = json.loads(out.read_text())
    assert rec["seed"] == 2


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"d": 2, "B": 4, "swarm-size": 10, "iterations": 20,
                               "restarts": 1, "polish": False, "seed": 4}))
    out = tmp_path / "s.json"
    assert main(["synth", "--config", str(cfg), "--seed", "6", "--out", str(out)]) == 0
    args = json.loads((tmp_path / "s.run.json").read_text())["args"]
    assert args["seed"] == 6 and args["swarm_size"] == 10 and args["polish"] is False


def test_sweep_single_point(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--d", "2", "--grid", "4", "--seed", "0", "--out", str(out),
                 *TINY]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "B,cost,fidelity,success_prob" and lines[1].startswith("4,")
    record = json.loads((tmp_path / "sweep.run.json").read_text())
    assert record["outputs"]["min_bandwidth"] == 4


def test_replay_reproduces_every_command(tmp_path, tables):
    sol = tmp_path / "sol.json"
    main(["synth", "--d", "2", "--B", "4", "--seed", "2", "--out", str(sol), *TINY])
    sweep = tmp_path / "sw.csv"
    main(["sweep", "--d", "2", "--grid", "4,8", "--seed", "2", "--out", str(sweep), *TINY])
    bound = tmp_path / "b.json"
    main(["bound", str(tables["log"]), str(tables["dft"]), "--seed", "5",
          "--n-samples", "500", "--out", str(bound)])
    for first in (sol, sweep, bound, tables["log"], tmp_path / "dft_p.csv"):
        record = first.with_name(first.stem + ".run.json")
        again = first.with_name("replayed" + first.suffix)
        replay(record, str(again))
        if first.suffix == ".json":
            assert strip_volatile(json.loads(first.read_text())) == \
                strip_volatile(json.loads(again.read_text()))
        else:
            assert first.read_bytes() == again.read_bytes()


def test_replay_command(tmp_path, tables):
    record = tables["dft"].with_name("dft_c.run.json")
    out = tmp_path / "again.csv"
    assert main(["replay", str(record), "--out", str(out)]) == 0
    assert out.read_bytes() == tables["dft"].read_bytes()


def test_validation_errors_exit_2(tmp_path):
    for args in (["synth", "--d", "0", "--out", str(tmp_path / "x.json")],
                 ["synth", "--d", "3", "--B", "2", "--out", str(tmp_path / "x.json")],
                 ["correlate", "--state", "maxent:3", "--gate-i", "bogus:3",
                  "--gate-s", "identity:3"],
                 ["counts", str(tmp_path / "missing.csv"), "--n", "3"],
                 ["bound"],
                 ["frobnicate"]):
        proc = run_cli(*args)
        assert proc.returncode == 2, args
        err = json.loads(proc.stderr.strip().splitlines()[-1])
        assert err["exit_code"] == 2 and err["error"] and err["message"]


def test_numerical_failure_exits_3(tmp_path):
    zero = tmp_path / "z.csv"
    zero.write_text("idler\\signal,0,1\n0,0,0\n1,0,0\n")
    proc = run_cli("counts", str(zero), "--n", "5", "--seed", "0",
                   "--out", str(tmp_path / "c.csv"))
    assert proc.returncode == 3
    err = json.loads(proc.stderr.strip())
    assert err["error"] == "DegenerateInputError" and err["exit_code"] == 3


def test_console_entry_point():
    proc = subprocess.run(["qfpdft", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip()
