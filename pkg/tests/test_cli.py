import json

import numpy as np
from multiflag import cli


def read_csv_states(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=2)
    return rows


class TestSimulate:
    def test_straight_run(self, tmp_path, capsys):
        out = tmp_path / "straight"
        rc = cli.main(["simulate", "--k", "1", "--n", "2",
                       "--preset", "straight", "--vn", "1", "--wn", "0",
                       "--T", "1", "--out", str(out)])
        assert rc == 0
        assert (tmp_path / "straight.csv").exists()
        assert (tmp_path / "straight.json").exists()
        data = json.loads((tmp_path / "straight.json").read_text())
        assert max(abs(d) for d in data["drift_post"]) < 1e-12
        # straight-line displacement of length T
        x0 = np.asarray(data["x0"])
        assert abs(np.linalg.norm(x0[-1] - x0[0]) - 1.0) < 1e-12

    def test_random_run_drift(self, tmp_path):
        out = tmp_path / "rnd"
        rc = cli.main(["simulate", "--k", "2", "--n", "2",
                       "--preset", "random", "--seed", "7",
                       "--controls", "sine", "--vn", "0.8", "--wn", "0.4,0.3",
                       "--T", "2", "--h", "1e-3", "--out", str(out)])
        assert rc == 0
        data = json.loads((tmp_path / "rnd.json").read_text())
        assert max(abs(d) for d in data["drift_post"]) < 1e-9

    def test_deterministic_outputs(self, tmp_path):
        blobs = []
        for run in range(2):
            out = tmp_path / f"d{run}"
            rc = cli.main(["simulate", "--k", "2", "--n", "1",
                           "--preset", "random", "--seed", "11",
                           "--T", "0.2", "--out", str(out)])
            assert rc == 0
            blobs.append(((tmp_path / f"d{run}.csv").read_bytes(),
                          (tmp_path / f"d{run}.json").read_bytes()))
        assert blobs[0] == blobs[1]

    def test_car_and_arm_agree(self, tmp_path):
        args = ["--k", "1", "--n", "2", "--preset", "random", "--seed", "3",
                "--controls", "sine", "--vn", "0.7", "--wn", "0.5",
                "--T", "1", "--h", "1e-3"]
        assert cli.main(["simulate", *args, "--mode", "car",
                         "--out", str(tmp_path / "car")]) == 0
        assert cli.main(["simulate", *args, "--mode", "arm",
                         "--out", str(tmp_path / "arm")]) == 0
        a = read_csv_states(tmp_path / "car.csv")
        b = read_csv_states(tmp_path / "arm.csv")
        assert a.shape == b.shape
        assert np.abs(a - b).max() < 1e-10

    def test_subarm_mode(self, tmp_path):
        rc = cli.main(["simulate", "--k", "2", "--n", "3", "--mode", "subarm",
                       "--p", "2", "--m", "3", "--preset", "random",
                       "--seed", "5", "--T", "0.5",
                       "--out", str(tmp_path / "sub")])
        assert rc == 0
        data = json.loads((tmp_path / "sub.json").read_text())
        assert data["mode"] == "subarm"
        assert data["n"] == 2  # m - p + 1 segments above the sub-base

    def test_cartesian_mode(self, tmp_path):
        rc = cli.main(["simulate", "--k", "2", "--n", "2",
                       "--mode", "cartesian", "--preset", "random",
                       "--seed", "9", "--T", "0.3",
                       "--out", str(tmp_path / "cart")])
        assert rc == 0
        data = json.loads((tmp_path / "cart.json").read_text())
        assert "points" in data

    def test_invalid_configuration_exit_code(self, tmp_path, capsys):
        rc = cli.main(["simulate", "--k", "2", "--n", "1", "--mode", "car",
                       "--out", str(tmp_path / "x")])
        assert rc == 2
        assert "invalid run configuration" in capsys.readouterr().err

    def test_config_file_round_trip(self, tmp_path):
        from multiflag import arm, sampling
        q = sampling.random_regular_config(arm.ArmDims(2, 2),
                                           np.random.default_rng(1),
                                           chart_margin=0.1)
        cfg = tmp_path / "cfg.json"
        arm.save_config(q, cfg)
        rc = cli.main(["simulate", "--k", "2", "--n", "2",
                       "--config", str(cfg), "--T", "0.1",
                       "--out", str(tmp_path / "fromfile")])
        assert rc == 0
        data = json.loads((tmp_path / "fromfile.json").read_text())
        assert np.abs(np.asarray(data["z"][0]) - q.z).max() < 1e-12

    def test_controls_file(self, tmp_path):
        table = "t,vn,w1\n0,1,0\n1,1,0\n"
        ctl = tmp_path / "controls.csv"
        ctl.write_text(table)
        rc = cli.main(["simulate", "--k", "1", "--n", "1",
                       "--preset", "straight", "--controls-file", str(ctl),
                       "--T", "0.5", "--out", str(tmp_path / "filectl")])
        assert rc == 0
        data = json.loads((tmp_path / "filectl.json").read_text())
        x0 = np.asarray(data["x0"])
        assert abs(np.linalg.norm(x0[-1] - x0[0]) - 0.5) < 1e-12


class TestVerify:
    def test_small_sweep_passes(self, tmp_path, capsys):
        rc = cli.main(["verify", "--k", "2", "--n", "2", "--samples", "5",
                       "--seed", "1", "--out", str(tmp_path / "v")])
        assert rc == 0
        out = capsys.readouterr().out
        assert "5/5 regular samples PASS" in out
        payload = json.loads((tmp_path / "v_reports.json").read_text())
        assert payload["seed"] == 1
        reports = payload["reports"]
        assert len(reports) == 5
        assert all(r["passed"] for r in reports)

    def test_injected_singular_does_not_gate(self, tmp_path, capsys):
        rc = cli.main(["verify", "--k", "2", "--n", "2", "--samples", "3",
                       "--singular-samples", "1", "--seed", "2"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "verdict=singular" in out

    def test_goursat_sweep(self, capsys):
        rc = cli.main(["verify", "--k", "1", "--n", "3", "--samples", "5",
                       "--seed", "4", "--render"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "D^4" in out and "E^4" in out

    def test_threads_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("MULTIFLAG_THREADS", "2")
        rc = cli.main(["verify", "--k", "1", "--n", "1", "--samples", "4",
                       "--seed", "6", "--out", str(tmp_path / "t")])
        assert rc == 0
        payload = json.loads((tmp_path / "t_reports.json").read_text())
        assert len(payload["reports"]) == 4


class TestSingularScan:
    def test_constructed_crossing_detected_within_one_step(self, capsys):
        # steering alone sweeps the heading difference through pi/2 at
        # t = pi/2 when it starts aligned and turns at unit rate
        h = 1e-3
        rc = cli.main(["singular-scan", "--k", "1", "--n", "1",
                       "--preset", "straight", "--vn", "0", "--wn", "1",
                       "--T", "2", "--h", str(h)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "A_1" in out
        t_detect = float(out.split("t=")[1].split()[0])
        assert abs(t_detect - np.pi / 2) <= h + 1e-12

    def test_straight_run_empty(self, capsys):
        rc = cli.main(["singular-scan", "--k", "1", "--n", "2",
                       "--preset", "straight", "--vn", "1", "--wn", "0",
                       "--T", "1"])
        assert rc == 0
        assert "no alignment degeneracies" in capsys.readouterr().out

    def test_zero_velocity_indices_listed(self, tmp_path, capsys):
        rc = cli.main(["singular-scan", "--k", "1", "--n", "2",
                       "--preset", "straight", "--vn", "0", "--wn", "1",
                       "--T", "2", "--out", str(tmp_path / "scan.json")])
        assert rc == 0
        report = json.loads((tmp_path / "scan.json").read_text())
        events = [e for e in report["events"] if e["index"] == 2]
        assert events and events[0]["zero_velocity_joints"] == [0, 1]

    def test_scan_from_trajectory_file(self, tmp_path, capsys):
        assert cli.main(["simulate", "--k", "1", "--n", "1",
                         "--preset", "straight", "--vn", "0", "--wn", "1",
                         "--T", "2", "--out", str(tmp_path / "tr")]) == 0
        capsys.readouterr()
        rc = cli.main(["singular-scan", "--k", "1", "--n", "1",
                       "--traj", str(tmp_path / "tr.json")])
        assert rc == 0
        assert "A_1" in capsys.readouterr().out
