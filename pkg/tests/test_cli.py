import io
import math

import pytest

from intloc import records
from intloc.cli import main
from intloc.rates import SweepConfig, sweep

CONFIG = """\
# refined sweep
dist = std_exponential
n_list = 16,32,64
delta = 0.5
oracle = fft
approx = refined
grid.m = 6
grid.s = 0.05
out = {out}
"""


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), out=buf)
    return code, buf.getvalue()


def _value(text, label):
    for line in text.splitlines():
        if line.startswith(label):
            return line.split()[1:]
    raise AssertionError(f"{label} not printed")


def test_approx_example():
    code, out = run("approx", "--dist", "std_exponential", "--n", "100", "--x", "0",
                    "--delta", "0.5")
    assert code == 0
    total, per = (float(t) for t in _value(out, "total"))
    assert total == pytest.approx(0.0199471140, abs=1e-10)
    assert per == pytest.approx(total / 0.5)
    assert _value(out, "v") == ["0"]
    assert _value(out, "seed") == ["0"]


def test_approx_uniform_skew_zero():
    code, out = run("approx", "--dist", "std_uniform", "--n", "16", "--x", "4", "--delta", "0.25")
    assert code == 0
    assert _value(out, "skew_term") == ["0", "0"]


def test_approx_clamp():
    argv = ["approx", "--dist", "std_exponential", "--n", "4", "--x", "-7", "--delta", "0.5"]
    _, raw = run(*argv)
    _, clamped = run(*argv, "--clamp")
    assert float(_value(raw, "total")[0]) < 0
    assert float(_value(clamped, "total")[0]) == 0
    assert "clamped from" in clamped


@pytest.mark.parametrize("argv", [
    ["approx", "--dist", "std_uniform", "--x", "1", "--delta", "1"],
    ["approx", "--dist", "std_uniform", "--n", "0", "--x", "1", "--delta", "1"],
    ["approx", "--dist", "std_uniform", "--n", "4", "--x", "1", "--delta", "-1"],
    ["approx", "--dist", "cauchy", "--n", "4", "--x", "1", "--delta", "1"],
    ["oracle", "--kind", "exact", "--dist", "std_uniform", "--n", "4", "--x", "1", "--delta", "1"],
    [],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_oracle_fft_example():
    code, out = run("oracle", "--kind", "fft", "--dist", "std_uniform", "--n", "2", "--x", "0",
                    "--delta", "0.1", "--h", "1e-4")
    assert code == 0
    assert float(_value(out, "value")[0]) == pytest.approx(0.02845085, abs=1e-6)


def test_oracle_mc_example_and_seed():
    argv = ["oracle", "--kind", "mc", "--dist", "std_uniform", "--n", "1", "--x", "0",
            "--delta", "1.7320508", "--samples", "1000000", "--seed", "7"]
    code, out = run(*argv)
    assert code == 0
    value = float(_value(out, "value")[0])
    half = float(_value(out, "certificate")[0])
    assert abs(value - 0.5) <= half
    assert _value(out, "seed") == ["7"]
    assert run(*argv)[1] == out
    # the global flag works before the subcommand too
    assert run("--seed", "7", *argv[:-2])[1] == out


def test_oracle_inversion_bracket():
    argv = ["oracle", "--kind", "inversion", "--dist", "std_exponential", "--n", "16", "--x",
            "0", "--delta", "0.5"]
    _, plain = run(*argv)
    code, out = run(*argv, "--bracket")
    assert code == 0
    assert "bracket" not in plain
    lo, hi = (float(t.strip("[],")) for t in _value(out, "bracket")[:2])
    assert lo <= float(_value(out, "value")[0]) <= hi


def test_oracle_infeasible_tolerance(capsys):
    code, _ = run("oracle", "--kind", "inversion", "--dist", "std_exponential", "--n", "16",
                  "--x", "0", "--delta", "0.5", "--tail-tol", "1e-300")
    assert code == 1
    assert "advisory: --tail-tol" in capsys.readouterr().err


def test_oracle_memory_budget(capsys):
    code, _ = run("oracle", "--kind", "fft", "--dist", "atomic_mix", "--n", "400", "--x", "0",
                  "--delta", "0.5", "--h", "1e-6")
    assert code == 1
    assert "advisory: --h" in capsys.readouterr().err


def test_sweep_and_ratefit_round_trip(tmp_path):
    out = tmp_path / "sweep.csv"
    cfg_path = tmp_path / "sweep.cfg"
    cfg_path.write_text(CONFIG.format(out=out))
    code, text = run("sweep", "--config", str(cfg_path))
    assert code == 0
    assert "seed 0" in text

    lines = out.read_text().splitlines()
    assert lines[0] == records.HEADER
    rows = records.read_csv(out)
    summary = [r for r in rows if r.is_summary]
    assert len(summary) == 3
    assert len(rows) == 3 * 241 + 3

    memory = sweep(SweepConfig("std_exponential", (16, 32, 64), 0.5))
    for r, m in zip(summary, memory):
        assert r.abs_err_per_delta == pytest.approx(m.sup, rel=1e-9)

    plot = tmp_path / "plot.dat"
    code, text = run("ratefit", "--in", str(out), "--plot-out", str(plot))
    assert code == 0
    assert -1.8 <= float(_value(text, "slope")[0]) <= -1.2
    data = plot.read_text().splitlines()
    assert data[0] == "log_n log_sup_err"
    assert float(data[1].split()[0]) == pytest.approx(math.log(16))


def test_sweep_deterministic_modulo_timestamp(tmp_path):
    texts = []
    for i in range(2):
        out = tmp_path / f"s{i}.csv"
        cfg = tmp_path / f"s{i}.cfg"
        cfg.write_text(CONFIG.format(out=out).replace("16,32,64", "4,8"))
        assert run("sweep", "--config", str(cfg), "--seed", "3")[0] == 0
        texts.append([line.rsplit(",", 1)[0] for line in out.read_text().splitlines()])
    assert texts[0] == texts[1]
    assert texts[0][1].endswith(",3")


@pytest.mark.parametrize("edit,key", [
    (("grid.s = 0.05", "grid.s = -1"), "grid.s"),
    (("delta = 0.5", "delta = half"), "delta"),
    (("n_list = 16,32,64", "n_list = 16,x"), "n_list"),
    (("oracle = fft", "oracle = exact"), "oracle"),
    (("dist = std_exponential", "dist = cauchy"), "dist"),
    (("grid.m = 6\n", ""), "grid.m"),
    (("approx = refined", "approx = refined\ncolour = blue"), "colour"),
    (("out = ", "out "), "out"),
])
def test_sweep_malformed_config_names_key(tmp_path, capsys, edit, key):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(CONFIG.format(out=tmp_path / "x.csv").replace(*edit))
    code, _ = run("sweep", "--config", str(cfg))
    assert code == 1
    assert f"'{key}'" in capsys.readouterr().err


def test_sweep_unwritable_output(tmp_path):
    cfg = tmp_path / "s.cfg"
    cfg.write_text(CONFIG.format(out=tmp_path / "missing" / "x.csv").replace("16,32,64", "4"))
    assert run("sweep", "--config", str(cfg))[0] == 1


def test_ratefit_synthetic_power_law(tmp_path):
    rows = []
    for n in (10, 100, 1000):
        rows.append(records.ExperimentRecord("std_uniform", n, 1.0, "sup", "stone", 1.0 / n,
                                             "fft", 0.0, 0.0, 1.0 / n, 0, "t"))
    path = tmp_path / "p.csv"
    records.write_csv(path, rows)
    code, out = run("ratefit", "--in", str(path))
    assert code == 0
    assert _value(out, "slope") == ["-1.0000"]


def test_ratefit_errors(tmp_path):
    assert run("ratefit", "--in", str(tmp_path / "nope.csv"))[0] == 1
    rows = [records.ExperimentRecord("std_uniform", n, 1.0, "sup", "stone", 1.0 / n,
                                     "fft", 0.0, 0.0, 1.0 / n, 0, "t") for n in (10, 100)]
    path = tmp_path / "two.csv"
    records.write_csv(path, rows)
    assert run("ratefit", "--in", str(path))[0] == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,2\n")
    assert run("ratefit", "--in", str(bad))[0] == 1


def test_record_invariants():
    r = records.ExperimentRecord("std_uniform", 4, 0.5, 1.25, "refined", 0.1, "fft", 0.2, 1e-6,
                                 0.2, 0, "2026-01-01T00:00:00+00:00")
    assert records.ExperimentRecord.from_cells(r.cells()) == r
    with pytest.raises(ValueError):
        records.ExperimentRecord("std_uniform", 4, 0.5, 1.25, "refined", 0.1, "fft", 0.2, 1e-6,
                                 0.3, 0, "t")
    with pytest.raises(ValueError):
        records.ExperimentRecord("", 4, 0.5, 1.25, "refined", 0.1, "fft", 0.2, 1e-6, 0.2, 0, "t")


def test_float_rendering_round_trips():
    for v in (0.1, 1 / 3, 2.0**-1074, 1e308, -7.25e-23):
        assert float(records.fmt(v)) == v
