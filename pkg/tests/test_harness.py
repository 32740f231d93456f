import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from occupancy_lclt.errors import InvalidArgument
from occupancy_lclt.harness import ExperimentConfig, fit_loglog, parse_config, run_rate_experiment
from occupancy_lclt.harness.cli import main
from occupancy_lclt.harness.rates import COLUMNS

SMALL = "model = ER\nlambda = 1\nd = 0\nn_list = 40, 80, 160\nreps = 2000\nmaster_seed = 11\n"


def test_parse_config():
    cfg = parse_config(SMALL + "# comment\nthreads = auto\n")
    assert cfg.model == "ER" and cfg.param == 1.0 and cfg.n_list == (40, 80, 160)
    assert cfg.threads == "auto" and cfg.n_threads >= 1


@pytest.mark.parametrize("bad", [
    SMALL.replace("40, 80, 160", "80, 40"),
    SMALL.replace("2000", "999"),
    SMALL.replace("ER", "XY"),
    SMALL.replace("d = 0\n", ""),
    SMALL + "threads = 0\n",
    "model ER\n",
])
def test_invalid_configs(bad):
    with pytest.raises((InvalidArgument, ValueError)):
        parse_config(bad)


def test_hash_ignores_threads_and_path():
    a = parse_config(SMALL)
    assert a.config_hash() == a.with_overrides(threads=8, output_path="/tmp/x.csv").config_hash()
    assert a.config_hash() != a.with_overrides(master_seed=12).config_hash()


def test_fit_exact_power():
    x = np.array([1.0, 2, 4, 8, 16])
    fit = fit_loglog(x, x ** 2, 0.1 * x ** 2)
    assert fit.slope == pytest.approx(2, abs=1e-12)
    assert fit.ci[1] - fit.ci[0] < 1e-10
    assert fit_loglog(x, 3 / x, 0.1 / x).slope == pytest.approx(-1, abs=1e-12)


def test_fit_errors():
    x = np.array([1.0, 2, 4])
    with pytest.raises(InvalidArgument):
        fit_loglog(x, np.array([1.0, 0.0, 1.0]), np.ones(3))
    with pytest.raises(InvalidArgument):
        fit_loglog(x[:2], x[:2], x[:2])
    with pytest.raises(InvalidArgument):
        fit_loglog(np.array([1.0, 1, 2]), x, x)


def test_fit_calibration():
    rng = np.random.default_rng(3)
    x = np.array([100.0, 200, 400, 800, 1600])
    se_rel = 0.05
    hits = 0
    for _ in range(200):
        y = 2.0 * x ** -1.0 * np.exp(rng.normal(0, se_rel, x.size))
        hits += fit_loglog(x, y, se_rel * y).contains(-1.0)
    assert hits >= 180


@given(st.floats(-3, 3), st.floats(0.1, 10))
def test_fit_recovers_slope(slope, scale):
    x = np.array([2.0, 3, 5, 7, 11])
    y = scale * x ** slope
    assert fit_loglog(x, y, 0.01 * y).slope == pytest.approx(slope, abs=1e-9)


def test_single_row_series():
    cfg = parse_config(SMALL.replace("40, 80, 160", "60"))
    series = run_rate_experiment(cfg)
    assert len(series.rows) == 1 and not series.fits


def test_csv_layout_and_thread_independence(tmp_path):
    cfg = parse_config(SMALL)
    one = run_rate_experiment(cfg.with_overrides(threads=1, block=300)).to_csv()
    four = run_rate_experiment(cfg.with_overrides(threads=4, block=300)).to_csv()
    assert one == four
    body = [ln for ln in one.splitlines() if not ln.startswith("#")]
    assert body[0] == ",".join(COLUMNS)
    assert len(body) == 4 and "\r" not in one
    assert any(ln.startswith("# config_hash=") for ln in one.splitlines())
    row = body[1].split(",")
    assert row[0] == "40" and float(row[3]) > 0


def test_gg_rates_small():
    cfg = ExperimentConfig(model="GG", param=1.0, d=1, n_list=(32, 64, 128), reps=1000, master_seed=2)
    series = run_rate_experiment(cfg)
    assert np.all(series.column("se_sigma") > 0)
    assert set(series.fits) == {"tv", "loc", "loc_normalized"}


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text(SMALL)
    out = tmp_path / "r.csv"
    assert main(["rates", "--config", str(cfg), "--threads", "2", "--out", str(out)]) == 0
    assert out.read_text().count("\n") > 5
    assert main(["oracle", "--n", "9", "--lam", "1", "--d", "0"]) == 3
    assert main(["oracle", "--n", "4", "--lam", "-1", "--d", "0"]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text(SMALL.replace("2000", "10"))
    assert main(["rates", "--config", str(bad)]) == 2
    assert main(["rates", "--config", str(cfg), "--out", str(tmp_path / "no" / "x.csv")]) == 1


def test_cli_simulate_and_oracle(tmp_path, capsys):
    from occupancy_lclt.distlib import Pmf
    assert main(["oracle", "--n", "4", "--lam", "2", "--d", "1"]) == 0
    pmf = Pmf.from_csv(capsys.readouterr().out)
    assert pmf.mean() == pytest.approx(2.5)
    out = tmp_path / "w.csv"
    assert main(["simulate", "--model", "ER", "--param", "1", "--d", "1", "--n", "50",
                 "--reps", "2000", "--seed", "1", "--out", str(out)]) == 0
    assert Pmf.from_csv(str(out)).weights.sum() == pytest.approx(1.0)


def test_cli_verify_with_dumps(tmp_path, capsys):
    from occupancy_lclt import sample_config, sample_graph
    g = tmp_path / "g.txt"
    g.write_text(sample_graph(25, 2.0, np.random.default_rng(0)).to_text())
    c = tmp_path / "c.csv"
    sample_config(50, 1.0, np.random.default_rng(0)).to_csv(str(c))
    assert main(["verify", "--graph", str(g), "--lam", "2", "--germs", str(c)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert all(ln.startswith("PASS") for ln in lines)
