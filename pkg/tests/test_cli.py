import csv

import pytest

from asev.cli import main
from asev.scenario import bundled_scenario

from scenario_files import SCHEDULE, write_small_scenario


@pytest.fixture
def small(tmp_path):
    d = tmp_path / "sc"
    d.mkdir()
    return write_small_scenario(d)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestValidate:
    def test_bundled_ok(self, capsys):
        assert main(["validate", str(bundled_scenario("bristol_summer"))]) == 0
        assert capsys.readouterr().out.startswith("ok: ")

    def test_short_profile(self, tmp_path, capsys):
        path = write_small_scenario(tmp_path)
        lines = (tmp_path / "pv.csv").read_text().splitlines()
        (tmp_path / "pv.csv").write_text("\n".join(lines[:-1]) + "\n")
        assert main(["validate", str(path)]) == 1
        assert "profile length 47 ≠ horizon 48" in capsys.readouterr().out

    def test_bundled_length_rule(self, tmp_path, capsys):
        import shutil
        src = bundled_scenario("bristol_summer").parent
        shutil.copytree(src, tmp_path / "s")
        pv = tmp_path / "s" / "renewable_kw.csv"
        pv.write_text("".join(pv.read_text().splitlines(keepends=True)[:-1]))
        assert main(["validate", str(tmp_path / "s")]) == 1
        assert "profile length 287 ≠ horizon 288" in capsys.readouterr().out

    def test_off_grid_time(self, tmp_path, capsys):
        path = write_small_scenario(tmp_path, schedule=SCHEDULE + "X9,arrival,01:57,12.5,0,10,15\n")
        assert main(["validate", str(path)]) == 1
        out = capsys.readouterr().out
        assert "time not stage-aligned" in out and "(fix:" in out


class TestRun:
    def test_outputs_and_summary(self, small, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["run", str(small), "--policy", "greedy", "--out", str(out)]) == 0
        fields = capsys.readouterr().out.split()
        assert fields[0] == "greedy" and fields[-1] == "true"
        assert all(len(x.split(".")[1]) == 2 for x in fields[1:5])
        assert {p.name for p in out.iterdir()} >= {"report.json", "load_curve.csv", "service_log.csv", "timeline_0.csv"}

    def test_env_out_dir(self, small, tmp_path, monkeypatch):
        monkeypatch.setenv("ASEV_OUT", str(tmp_path / "env"))
        assert main(["run", str(small), "--policy", "greedy"]) == 0
        assert (tmp_path / "env" / "report.json").exists()

    def test_renewable_infeasible_exit_2(self, tmp_path, capsys):
        code = main(["run", str(bundled_scenario("bristol_summer")), "--policy", "renewable",
                     "--out", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("infeasible at stage ") and "delay threshold violated" in err

    def test_seed_byte_identical(self, small, tmp_path):
        for k in "ab":
            assert main(["run", str(small), "--seed", "7", "--out", str(tmp_path / k)]) == 0
        names = sorted(p.name for p in (tmp_path / "a").iterdir())
        for name in names:
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_bad_scenario_exit_1(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "missing.yaml")]) == 1
        assert "error:" in capsys.readouterr().err


class TestCompare:
    def test_single_policy_no_deltas(self, small, tmp_path, capsys):
        assert main(["compare", str(small), "--policies", "greedy", "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "comparison.csv")
        assert len(rows) == 1 and "delta_total_pct" not in rows[0]
        assert "%" not in capsys.readouterr().out

    def test_deltas_relative_to_first(self, small, tmp_path, capsys):
        assert main(["compare", str(small), "--policies", "greedy,rollout", "--out", str(tmp_path)]) == 0
        g, r = read_csv(tmp_path / "comparison.csv")
        assert g["delta_total_pct"] == ""
        expected = (float(r["total"]) - float(g["total"])) / float(g["total"]) * 100
        assert float(r["delta_total_pct"]) == pytest.approx(expected, abs=0.1)
        assert "£" in capsys.readouterr().out

    def test_currency(self, small, tmp_path, capsys):
        main(["compare", str(small), "--policies", "greedy", "--out", str(tmp_path), "--currency", "$"])
        assert "$" in capsys.readouterr().out

    def test_bad_policy(self, small):
        with pytest.raises(SystemExit):
            main(["compare", str(small), "--policies", "greedy,magic"])


class TestSweep:
    def test_row_count(self, small, tmp_path):
        assert main(["sweep", str(small), "--param", "n_ev", "--values", "2,3,4", "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "sweep.csv")
        assert len(rows) == 3 * 2
        assert [r["value"] for r in rows] == ["2", "2", "3", "3", "4", "4"]

    def test_greedy_energy_increases_with_work_energy(self, small, tmp_path):
        args = ["sweep", str(small), "--param", "e_work", "--values", "1.5,2.0,2.5", "--policies", "greedy",
                "--out", str(tmp_path)]
        assert main(args) == 0
        energy = [float(r["energy"]) for r in read_csv(tmp_path / "sweep.csv")]
        assert energy[0] < energy[1] < energy[2]

    def test_empty_values(self, small, tmp_path, capsys):
        assert main(["sweep", str(small), "--param", "n_ev", "--values", " ,", "--out", str(tmp_path)]) == 1
        assert "at least one value" in capsys.readouterr().err

    def test_unknown_key_lists_keys(self, small, tmp_path, capsys):
        assert main(["sweep", str(small), "--param", "colour", "--values", "1", "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "n_ev" in err and "e_work" in err
