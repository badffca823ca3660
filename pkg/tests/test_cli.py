import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from repairable import __version__
from repairable.cli import main
from repairable.io import format_history_csv, read_event_log
from repairable.pointproc import HPP, Instantaneous, SimulationConfig, simulate_history


def config(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def run(*argv, out):
    return main([*map(str, argv), "--out", str(out), "--quiet"])


def files(path):
    return sorted(p.relative_to(path).as_posix() for p in path.rglob("*") if p.is_file())


def read_csv(path):
    lines = [line for line in path.read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


HPP_SIM = """\
[model]
kind = "hpp"
rate = 0.5

[sim]
horizon = 10.0
trajectories = 1000
"""


class TestSimulate:
    def test_summary_final_count(self, tmp_path):
        cfg = config(tmp_path, HPP_SIM)
        out = tmp_path / "out"
        assert run("simulate", "--config", cfg, "--set", "sim.trajectories=100000", out=out) == 0
        rows = read_csv(out / "summary.csv")
        assert len(rows) == 101
        final = rows[-1]
        assert float(final["t"]) == 10.0
        assert abs(float(final["expected_count"]) - 5.0) < 0.05
        assert float(final["analytic_count"]) == 5.0
        assert float(rows[0]["availability"]) == 1.0

    def test_histories_round_trip_through_fit(self, tmp_path):
        cfg = config(tmp_path, HPP_SIM)
        out = tmp_path / "out"
        assert run("simulate", "--config", cfg, "--set", "sim.mode=histories",
                   "--set", "sim.trajectories=3", out=out) == 0
        assert files(out) == [f"histories/trajectory_00000{i}.csv" for i in range(3)]
        log = out / "histories" / "trajectory_000001.csv"
        expected = simulate_history(HPP(0.5), Instantaneous(), SimulationConfig(10.0, 3), 1)
        assert read_event_log(log).to_history() == expected

        fit_cfg = config(tmp_path, f'[fit]\nevents = "{log}"\ncandidates = ["hpp"]\n', "fit.toml")
        assert run("fit", "--config", fit_cfg, out=tmp_path / "fit") == 0
        fit = json.loads((tmp_path / "fit" / "fit_hpp.json").read_text())
        assert fit["parameters"]["rate"] == len(expected) / 10.0

    def test_single_trajectory_is_byte_identical(self, tmp_path):
        cfg = config(tmp_path, HPP_SIM)
        for d in ("a", "b"):
            assert run("simulate", "--config", cfg, "--set", "sim.mode=histories",
                       "--set", "sim.trajectories=1", "--seed", "7", out=tmp_path / d) == 0
        a = (tmp_path / "a" / "histories" / "trajectory_000000.csv").read_bytes()
        assert a == (tmp_path / "b" / "histories" / "trajectory_000000.csv").read_bytes()

    def test_thread_count_does_not_change_output(self, tmp_path):
        cfg = config(tmp_path, HPP_SIM + 'mode = "summary"\n')
        for d, threads in (("a", 1), ("b", 4)):
            assert run("simulate", "--config", cfg, "--set", "sim.trajectories=20000",
                       "--threads", threads, out=tmp_path / d) == 0
        assert (tmp_path / "a" / "summary.csv").read_bytes() == (tmp_path / "b" / "summary.csv").read_bytes()

    @pytest.mark.parametrize("horizon", ["0", "-3"])
    def test_bad_horizon(self, tmp_path, horizon, capsys):
        cfg = config(tmp_path, HPP_SIM)
        out = tmp_path / "out"
        assert run("simulate", "--config", cfg, "--set", f"sim.horizon={horizon}", out=out) == 2
        assert not out.exists()
        assert "sim.horizon" in capsys.readouterr().err

    def test_line_anchored_message(self, tmp_path, capsys):
        cfg = config(tmp_path, HPP_SIM.replace("horizon = 10.0", "horizon = 0"))
        assert run("simulate", "--config", cfg, out=tmp_path / "out") == 2
        assert f"{cfg}:6: sim.horizon" in capsys.readouterr().err

    def test_model_validity(self, tmp_path):
        cfg = config(tmp_path, '[model]\nkind = "nhpp"\nrocof = "linear"\na = 1\nb = -1\n'
                     '[sim]\nhorizon = 10\n')
        assert run("simulate", "--config", cfg, out=tmp_path / "out") == 3
        assert not (tmp_path / "out").exists()

    def test_bad_distribution_parameter(self, tmp_path):
        cfg = config(tmp_path, '[model]\nkind = "rp"\n[dist]\nfamily = "gamma"\nshape = 0\nrate = 1\n'
                     '[sim]\nhorizon = 10\n')
        assert run("simulate", "--config", cfg, out=tmp_path / "out") == 3


def event_log(tmp_path, times, horizon, name="log.csv"):
    p = tmp_path / name
    p.write_text(f"# horizon={horizon}\nfail_time\n" + "".join(f"{t}\n" for t in times))
    return p


class TestFit:
    def test_hpp_rate(self, tmp_path):
        log = event_log(tmp_path, np.linspace(5, 95, 10), 100)
        cfg = config(tmp_path, f'[fit]\nevents = "{log.name}"\ncandidates = ["hpp"]\n')
        out = tmp_path / "out"
        assert run("fit", "--config", cfg, out=out) == 0
        fit = json.loads((out / "fit_hpp.json").read_text())
        assert fit["schema_version"] == "1"
        assert fit["parameters"]["rate"] == 0.1
        ranking = json.loads((out / "ranking.json").read_text())
        assert ranking["ranking"][0]["name"] == "hpp"

    def test_empty_log(self, tmp_path, capsys):
        log = event_log(tmp_path, [], 100)
        cfg = config(tmp_path, f'[fit]\nevents = "{log.name}"\n')
        assert run("fit", "--config", cfg, out=tmp_path / "out") == 4
        err = capsys.readouterr().err
        assert "grp:weibull >= 5" in err and "hpp >= 1" in err
        assert not (tmp_path / "out").exists()

    def test_too_few_for_every_candidate(self, tmp_path):
        log = event_log(tmp_path, [1.0, 2.0], 10)
        cfg = config(tmp_path, f'[fit]\nevents = "{log.name}"\ncandidates = ["crow_amsaa", "grp"]\n')
        assert run("fit", "--config", cfg, out=tmp_path / "out") == 4

    def test_partial_candidates(self, tmp_path):
        log = event_log(tmp_path, [1.0, 2.5, 4.0], 10)
        cfg = config(tmp_path, f'[fit]\nevents = "{log.name}"\n')
        out = tmp_path / "out"
        assert run("fit", "--config", cfg, out=out) == 0
        ranking = json.loads((out / "ranking.json").read_text())
        assert "grp:weibull" in ranking["failures"]
        assert {r["name"] for r in ranking["ranking"]} == {"hpp", "crow_amsaa", "renewal:weibull"}

    def test_hpp_ranked_first_on_hpp_data(self, tmp_path):
        first = 0
        for i in range(10):
            h = simulate_history(HPP(1.0), Instantaneous(), SimulationConfig(50.0, 10, 100 + i), i)
            log = tmp_path / f"log{i}.csv"
            log.write_text(format_history_csv(h))
            cfg = config(tmp_path, f'[fit]\nevents = "{log.name}"\ncandidates = ["hpp", "crow_amsaa"]\n')
            assert run("fit", "--config", cfg, out=tmp_path / f"o{i}") == 0
            ranking = json.loads((tmp_path / f"o{i}" / "ranking.json").read_text())
            first += ranking["ranking"][0]["name"] == "hpp"
        assert first >= 8

    def test_malformed_log(self, tmp_path, capsys):
        log = tmp_path / "log.csv"
        log.write_text("fail_time\n1\nabc\n")
        cfg = config(tmp_path, '[fit]\nevents = "log.csv"\nend = 10\n')
        assert run("fit", "--config", cfg, out=tmp_path / "out") == 2
        assert "log.csv:3:" in capsys.readouterr().err


RESILIENCY = """\
[mission]
t_mission = 100

[[event]]
t_fail = 40
t_res = 15
q_res = 0.2
"""


class TestResiliency:
    def test_worked_example(self, tmp_path):
        out = tmp_path / "out"
        assert run("resiliency", "--config", config(tmp_path, RESILIENCY), out=out) == 0
        body = json.loads((out / "resiliency.json").read_text())
        assert body["events"][0]["rho_r"] == 0.6
        assert body["mission_rho"] == 0.6

    def test_perfectly_resilient(self, tmp_path):
        cfg = config(tmp_path, RESILIENCY + '[dist]\nfamily = "exponential"\nrate = 0.01\n')
        out = tmp_path / "out"
        assert run("resiliency", "--config", cfg, "--set", "event.0.t_res=0",
                   "--set", "event.0.q_res=0", out=out) == 0
        event = json.loads((out / "resiliency.json").read_text())["events"][0]
        assert event["rho_r"] == 1.0 and event["degree"] == "GoodAsNew"

    def test_no_events(self, tmp_path):
        out = tmp_path / "out"
        assert run("resiliency", "--config", config(tmp_path, "[mission]\nt_mission = 5\n"), out=out) == 0
        body = json.loads((out / "resiliency.json").read_text())
        assert body["mission_rho"] == 1.0 and "no_events" in body["flags"]

    def test_overlap(self, tmp_path):
        cfg = config(tmp_path, RESILIENCY + "[[event]]\nt_fail = 50\nt_res = 1\nq_res = 0\n")
        assert run("resiliency", "--config", cfg, out=tmp_path / "out") == 5
        assert not (tmp_path / "out").exists()

    def test_invalid_event(self, tmp_path):
        cfg = config(tmp_path, RESILIENCY)
        assert run("resiliency", "--config", cfg, "--set", "event.0.q_res=1.5", out=tmp_path / "o") == 5


TRAJECTORY = RESILIENCY + """
[dist]
family = "weibull"
shape = 2.0
scale = 80.0
"""


class TestTrajectory:
    def test_default(self, tmp_path):
        out = tmp_path / "out"
        assert run("trajectory", "--config", config(tmp_path, TRAJECTORY), out=out) == 0
        text = (out / "trajectory.csv").read_text().splitlines()
        assert text[0] == "t,level,segment"
        assert text[1] == "0.0,1.0,nominal"
        rows = read_csv(out / "trajectory.csv")
        onset = next(r for r in rows if r["segment"] == "recovered")
        assert float(onset["t"]) == 55.0
        assert abs(float(onset["level"]) - 0.8) <= 1e-12
        outage = [r for r in rows if r["segment"] == "outage"]
        assert outage and all(float(r["level"]) == 0.0 for r in outage)

    def test_good_as_new_has_no_outage(self, tmp_path):
        out = tmp_path / "out"
        assert run("trajectory", "--config", config(tmp_path, TRAJECTORY),
                   "--set", "event.0.t_res=0", "--set", "event.0.q_res=0", out=out) == 0
        rows = read_csv(out / "trajectory.csv")
        assert all(r["segment"] != "outage" for r in rows)
        onset = next(r for r in rows if r["segment"] == "recovered")
        assert float(onset["level"]) == 1.0

    def test_needs_baseline(self, tmp_path):
        assert run("trajectory", "--config", config(tmp_path, RESILIENCY), out=tmp_path / "o") == 6

    def test_overlap(self, tmp_path):
        cfg = config(tmp_path, TRAJECTORY + "[[event]]\nt_fail = 50\nt_res = 1\nq_res = 0\n")
        assert run("trajectory", "--config", cfg, out=tmp_path / "o") == 5


PORTFOLIO = "id,description,consequence,probability\n"


class TestRisk:
    def portfolio(self, tmp_path, rows):
        (tmp_path / "p.csv").write_text(PORTFOLIO + rows)
        return config(tmp_path, '[risk]\nportfolio = "p.csv"\n')

    def test_sum(self, tmp_path):
        out = tmp_path / "out"
        cfg = self.portfolio(tmp_path, "a,pump,100,0.01\nb,valve,50,0.01\n")
        assert run("risk", "--config", cfg, out=out) == 0
        body = json.loads((out / "risk.json").read_text())
        assert [s["risk"] for s in body["scenarios"]] == [1.0, 0.5]
        assert body["system_risk"] == 1.5 and body["reliability_proxy"] is None

    def test_header_only(self, tmp_path):
        out = tmp_path / "out"
        assert run("risk", "--config", self.portfolio(tmp_path, ""), out=out) == 0
        assert json.loads((out / "risk.json").read_text())["system_risk"] == 0.0

    def test_proxy(self, tmp_path):
        out = tmp_path / "out"
        cfg = self.portfolio(tmp_path, "a,pump,1.0,0.1\n")
        assert run("risk", "--config", cfg, "--set", "risk.normalized=true", out=out) == 0
        proxy = json.loads((out / "risk.json").read_text())["reliability_proxy"]
        assert proxy["value"] == pytest.approx(0.9, abs=1e-15) and proxy["saturated"] is False

    def test_proxy_needs_normalization(self, tmp_path):
        cfg = self.portfolio(tmp_path, "a,pump,1.0,0.1\n")
        assert run("risk", "--config", cfg, "--set", "risk.proxy=true", out=tmp_path / "o") == 6

    def test_malformed_row(self, tmp_path, capsys):
        cfg = self.portfolio(tmp_path, "a,pump,1.0,0.1\nb,valve,lots,0.1\n")
        assert run("risk", "--config", cfg, out=tmp_path / "o") == 2
        assert "p.csv:3:" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()


class TestEntryPoint:
    def test_module_runs(self, tmp_path):
        res = subprocess.run([sys.executable, "-m", "repairable", "--version"],
                             capture_output=True, text=True, check=True)
        assert __version__ in res.stdout

    def test_exit_code_reaches_shell(self, tmp_path):
        cfg = config(tmp_path, "[sim]\nhorizon = 0\n")
        res = subprocess.run([sys.executable, "-m", "repairable", "simulate", "--config", str(cfg),
                              "--out", str(tmp_path / "o")], capture_output=True, text=True)
        assert res.returncode == 2
        assert res.stderr.startswith("error: ")

    def test_missing_config(self, tmp_path):
        assert run("risk", "--config", tmp_path / "nope.toml", out=tmp_path / "o") == 2
