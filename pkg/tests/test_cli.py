import json

import numpy as np
import pytest

from ajch.cli import main
from ajch.dynamics import QUANTITIES, Trajectory

NOISY = {
    "schema": 1, "experiment": "blockade", "n_sites": 2, "fock_cutoff": 2,
    "kappa_khz": 2.0, "g_b_khz": 7.5, "nbar": 0.04, "dephasing_rate_per_s": 200.0,
    "heating_rate_quanta_per_s": 5.0, "rabi_drift_fraction": 0.15, "drift_levels": 2,
    "t_start_s": 0.0, "t_stop_s": 1e-4, "t_step_s": 2.5e-5, "shots": 50, "seed": 3,
    "measurement_mode": "mapped_realistic",
}


def write_cfg(tmp_path, cfg, name="run.cfg"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def test_simulate_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "fig3a.csv"
    assert main(["simulate", "--config", "fig3a.cfg", "--out", str(out)]) == 0
    traj = Trajectory.read_csv(out)
    assert traj.records.shape[1:] == (2, len(QUANTITIES))
    header = out.read_text().splitlines()[0].split(",")
    assert len(header) == 1 + 2 * len(QUANTITIES)
    assert header[0] == "time_s" and header[1] == "ion1_up_0"
    manifest = json.loads((tmp_path / "fig3a.manifest.json").read_text())
    assert manifest["seed"] == 1
    assert "simulate" in manifest["command"]


def test_seed_changes_only_sampled_outputs(tmp_path):
    cfg = write_cfg(tmp_path, NOISY)
    outs = {}
    for seed in (3, 3, 4):
        out = tmp_path / f"s{seed}_{len(outs)}.csv"
        assert main(["simulate", "--config", cfg, "--out", str(out), "--seed", str(seed)]) == 0
        outs[len(outs)] = out.read_text()
    assert outs[0] == outs[1]
    assert outs[0] != outs[2]
    exact = dict(NOISY, shots=0)
    texts = []
    for seed in (3, 4):
        out = tmp_path / f"exact{seed}.csv"
        assert main(["simulate", "--config", write_cfg(tmp_path, exact, "exact.cfg"), "--out", str(out),
                     "--seed", str(seed)]) == 0
        texts.append(out.read_text())
    assert texts[0] == texts[1]


def test_mapped_columns_left_blank_when_unmeasured(tmp_path):
    out = tmp_path / "mapped.csv"
    assert main(["simulate", "--config", write_cfg(tmp_path, NOISY), "--out", str(out)]) == 0
    traj = Trajectory.read_csv(out)
    assert np.all(np.isnan(traj.series(0, "up_2")))
    assert np.all(np.isfinite(traj.series(0, "manifold_1")))


def test_eigen_sector_dimensions(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"schema": 1, "experiment": "eigen", "n_sites": 2, "fock_cutoff": 2,
                               "kappa_khz": 2.0, "g_b_khz": 7.5})
    out = tmp_path / "eigen.csv"
    assert main(["eigen", "--config", cfg, "--out", str(out)]) == 0
    rows = out.read_text().splitlines()[1:]
    sectors = [int(r.split(",")[0]) for r in rows]
    assert [sectors.count(L) for L in range(3)] == [1, 4, 8]
    assert main(["eigen", "--config", cfg]) == 0
    assert "sector" in capsys.readouterr().out


def test_map_check_and_leakage(capsys):
    assert main(["map-check"]) == 0
    assert "contract: OK" in capsys.readouterr().out
    assert main(["leakage", "--nbar", "0.04", "--ions", "2", "--heating", "5", "--duration", "840e-6"]) == 0
    assert float(capsys.readouterr().out) == pytest.approx(0.0842)


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, dict(NOISY, bogus=1))
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "x.csv")]) == 2
    assert "bogus" in capsys.readouterr().err
