import json
import subprocess
import sys

import numpy as np
import pytest

from asymclock import czdetect
from asymclock.asymmodel import MixtureModel, sample_T
from asymclock.cli import main


def _cfg(tmp_path, text):
    p = tmp_path / "c.yaml"
    p.write_text(text)
    return str(p)


SMALL = "n_clients: 40\nn_servers: 25\nplacements: 2\n"


def test_simulate_writes_outputs_and_is_deterministic(tmp_path):
    cfg = _cfg(tmp_path, SMALL)
    for d in ("a", "b"):
        assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path / d), "--workers", "1", "--seed", "5"]) == 0
    a, b = (tmp_path / d / "metrics.csv" for d in ("a", "b"))
    assert a.read_bytes() == b.read_bytes()
    man = json.loads((tmp_path / "a" / "simulate.manifest.json").read_text())
    assert man["status"] == "ok" and man["seed"] == 5 and man["config"]["n_clients"] == 40
    assert {"version", "wall_time_s", "outputs", "command"} <= set(man)


def test_unknown_key_exit_2(tmp_path, capsys):
    cfg = _cfg(tmp_path, "foo: 1\n")
    assert main(["simulate", "--config", cfg, "--out-dir", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error: config:") and "'foo'" in err
    man = json.loads((tmp_path / "simulate.manifest.json").read_text())
    assert man["status"] == "error" and "foo" in man["error"]


@pytest.mark.parametrize("text", ["n_clients: [1, 2]\n", "method: nope\n", "n_clients:\n  a: 1\n", "- 1\n"])
def test_bad_config_exit_2(tmp_path, text):
    assert main(["simulate", "--config", _cfg(tmp_path, text), "--out-dir", str(tmp_path)]) == 2


def test_preset_unknown_and_small(tmp_path, capsys):
    assert main(["preset", "nope", "--out-dir", str(tmp_path)]) == 2
    assert "available" in capsys.readouterr().err
    cfg = _cfg(tmp_path, "n_clients: 30\nn_servers: 25\n")
    assert main(["preset", "table1", "--config", cfg, "--placements", "2", "--out-dir", str(tmp_path),
                 "--workers", "1"]) == 0
    lines = (tmp_path / "table1.csv").read_text().splitlines()
    assert lines[0] == "x_name,x,series,method,metric,value,stderr"
    assert sum(",rmse," in ln for ln in lines) == 12


def test_help_exit_0():
    out = subprocess.run([sys.executable, "-m", "asymclock", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "preset" in out.stdout


def test_czdetect_command(tmp_path):
    tr = czdetect.synth_trace(czdetect.TraceSpec(n=30_000), np.random.default_rng(0))
    tr.flag_ok[:1000] = False
    trace = tmp_path / "trace.csv"
    czdetect.write_trace(trace, {"s1": tr})
    out = tmp_path / "zones.csv"
    assert main(["czdetect", str(trace), "--out", str(out), "--out-dir", str(tmp_path)]) == 0
    rows = czdetect.read_catalog(out)
    assert rows and sum(int(r["count"]) for r in rows) <= 29_000
    assert sum(int(r["end"]) - int(r["start"]) for r in rows) >= 0.9 * 30_000
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    assert main(["czdetect", str(empty), "--out-dir", str(tmp_path)]) == 1


def test_fitmodel(tmp_path, capsys):
    assert main(["fitmodel", "--paper-defaults", "--out-dir", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out) == {"w": 0.00136, "b": 0.045, "p": 0.274}
    t = sample_T(MixtureModel(), np.random.default_rng(1), 100_000)
    p = tmp_path / "t.csv"
    p.write_text("T\n" + "\n".join(map(repr, t.tolist())) + "\n")
    assert main(["fitmodel", str(p), "--out-dir", str(tmp_path)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert abs(fit["b"] - 0.045) <= 0.05 * 0.045 and abs(fit["p"] - 0.274) <= 0.05
    z = tmp_path / "z.csv"
    z.write_text("T\n" + "0\n" * 500)
    assert main(["fitmodel", str(z), "--out-dir", str(tmp_path)]) == 1
    assert main(["fitmodel", "--out-dir", str(tmp_path)]) == 2


def test_jitter_and_tighten(tmp_path):
    assert main(["jitter", "--r-star-ms", "5", "20", "--n-s", "2", "4", "--replications", "500",
                 "--out-dir", str(tmp_path)]) == 0
    assert main(["tighten", "--r-star-ms", "5", "--n-s", "2", "8", "--replications", "500",
                 "--out-dir", str(tmp_path)]) == 0
    assert len((tmp_path / "jitter.csv").read_text().splitlines()) == 5
    cat = tmp_path / "cat.csv"
    czdetect.write_catalog(cat, [{"server": "s", "start": 0, "end": 1, "count": 1, "r_hat": 0.005,
                                  "a_hat": 0.001 * i, "T_hat": 0.2 * i} for i in range(-2, 3)])
    assert main(["tighten", "--catalog", str(cat), "--r-star-ms", "5", "--n-s", "2", "8", "--replications", "50",
                 "--out-dir", str(tmp_path)]) == 0
    text = (tmp_path / "tighten.csv").read_text()
    assert "mean_rho_flagged" in text and ",data," in text
    assert main(["tighten", "--n-s", "0", "--out-dir", str(tmp_path)]) == 2
