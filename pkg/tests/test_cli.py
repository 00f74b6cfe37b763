import json
import shutil
from types import SimpleNamespace

import pytest

from ewmask.cli import (
    EXIT_ESTIMATION,
    EXIT_INPUT,
    EXIT_MISSING,
    EXIT_OK,
    RunConfig,
    build_config,
    build_parser,
    config_hash,
    main,
    read_config_file,
)
from ewmask.errors import InputError
from ewmask.var_engine import MODEL_TAGS


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, fixture_csv):
    out = tmp_path_factory.mktemp("run")
    base = ["--input", str(fixture_csv), "--output-dir", str(out)]
    codes = {cmd: main([cmd, *base]) for cmd in ("stats", "fit", "forecast", "backtest", "report")}
    return SimpleNamespace(out=out, base=base, codes=codes)


def _write(path, text):
    path.write_text(text)
    return path


def _hash_line(path):
    return path.read_text().splitlines()[0]


class TestStats:
    def test_three_prices(self, tmp_path, capsys):
        p = _write(tmp_path / "p.csv", "date,price\n2020-01-02,100\n2020-01-03,101\n2020-01-06,100.5\n")
        assert main(["stats", "--input", str(p), "--output-dir", str(tmp_path / "o")]) == EXIT_OK
        doc = json.loads((tmp_path / "o" / "stats.json").read_text())
        assert doc["stats"]["count"] == 2 and doc["stats"]["skewness"] is None
        assert "count" in capsys.readouterr().out

    def test_missing_file(self, tmp_path, capsys):
        missing = tmp_path / "absent.csv"
        assert main(["stats", "--input", str(missing), "--output-dir", str(tmp_path)]) == EXIT_INPUT
        assert "absent.csv" in capsys.readouterr().err

    def test_bad_row(self, tmp_path, capsys):
        lines = ["date,price"] + [f"2020-01-{d:02d},{100 + d}" for d in range(2, 17)] + ["2020-01-20,oops"]
        p = _write(tmp_path / "bad.csv", "\n".join(lines) + "\n")
        assert main(["stats", "--input", str(p), "--output-dir", str(tmp_path)]) == EXIT_INPUT
        assert "row 17" in capsys.readouterr().err

    def test_no_input(self, tmp_path, capsys):
        assert main(["stats", "--output-dir", str(tmp_path)]) == EXIT_INPUT


class TestFit:
    def test_constant_prices(self, tmp_path, capsys):
        rows = "".join(f"2020-{1 + d // 28:02d}-{1 + d % 28:02d},100\n" for d in range(300))
        p = _write(tmp_path / "flat.csv", "date,price\n" + rows)
        code = main(["fit", "--input", str(p), "--output-dir", str(tmp_path / "o"), "--out-of-sample", "50"])
        assert code == EXIT_ESTIMATION
        assert "zero variance" in capsys.readouterr().err

    def test_outputs(self, pipeline):
        assert pipeline.codes["fit"] == EXIT_OK
        ew = json.loads((pipeline.out / "ewma_sk.json").read_text())
        ga = json.loads((pipeline.out / "garch.json").read_text())
        assert ew["params"]["converged"] and ga["params"]["converged"]
        assert 0 < ga["params"]["alpha"] + ga["params"]["beta"] < 1
        assert ew["config_hash"] == ga["config_hash"]
        assert _hash_line(pipeline.out / "moment_path.csv") == f"# config_hash: {ew['config_hash']}"


class TestForecastAndBacktest:
    def test_forecast_before_fit(self, tmp_path, fixture_csv, capsys):
        code = main(["forecast", "--input", str(fixture_csv), "--output-dir", str(tmp_path)])
        assert code == EXIT_MISSING
        assert "ewma_sk.json" in capsys.readouterr().err

    def test_var_files(self, pipeline):
        assert pipeline.codes["forecast"] == EXIT_OK
        for m in MODEL_TAGS:
            one = (pipeline.out / f"var_{m.lower()}_1d.csv").read_text().splitlines()
            ten = (pipeline.out / f"var_{m.lower()}_10d.csv").read_text().splitlines()
            assert len(one) == 2 + 500 and len(ten) == 2 + 491
        nxt = json.loads((pipeline.out / "forecast.json").read_text())
        assert nxt["config_hash"]

    def test_backtest_report(self, pipeline):
        assert pipeline.codes["backtest"] == EXIT_OK
        doc = json.loads((pipeline.out / "backtest_report.json").read_text())
        text = json.dumps(doc)
        assert "NaN" not in text and "Infinity" not in text
        assert (pipeline.out / "backtest_table.txt").read_text().startswith("# config_hash:")


class TestReport:
    def test_outputs(self, pipeline):
        assert pipeline.codes["report"] == EXIT_OK
        rep = pipeline.out / "report"
        names = sorted(p.name for p in rep.iterdir())
        assert names == ["moments_in_sample.csv", "prices_returns.csv", "var_vs_returns_10d.csv",
                         "var_vs_returns_1d.csv", "volatility_in_sample.csv"]
        daily = (rep / "var_vs_returns_1d.csv").read_text().splitlines()
        assert len(daily) == 2 + 500
        assert daily[1].split(",")[:3] == ["date", "return", "var_hs"]

    def test_missing_prerequisite(self, pipeline, tmp_path, capsys):
        out = tmp_path / "copy"
        shutil.copytree(pipeline.out, out)
        (out / "moment_path.csv").unlink()
        args = [pipeline.base[0], pipeline.base[1], "--output-dir", str(out)]
        assert main(["report", *args]) == EXIT_MISSING
        assert "moment_path.csv" in capsys.readouterr().err


class TestConfig:
    def test_precedence(self, tmp_path, fixture_csv):
        cfg = _write(tmp_path / "run.cfg", f"input = {fixture_csv}\nalpha = 0.05  # level\nhorizons = 1\n"
                                           "ten_day_windows = non-overlapping\n")
        args = build_parser().parse_args(["stats", "--config", str(cfg), "--alpha", "0.025"])
        c = build_config(args)
        assert c.alpha == 0.025
        assert c.horizons == (1,)
        assert c.overlapping is False
        assert c.riskmetrics_lambda == RunConfig().riskmetrics_lambda

    def test_unknown_key(self, tmp_path):
        with pytest.raises(InputError, match="line 2"):
            read_config_file(_write(tmp_path / "c.cfg", "alpha = 0.01\nbogus = 1\n"))

    def test_bad_value(self, tmp_path):
        with pytest.raises(InputError, match="line 1"):
            read_config_file(_write(tmp_path / "c.cfg", "models = HS,NOPE\n"))

    def test_hash_ignores_output_dir_and_tracks_settings(self, fixture_csv):
        a = RunConfig(input_path=str(fixture_csv))
        assert config_hash(a) == config_hash(RunConfig(input_path=str(fixture_csv), output_dir="elsewhere"))
        assert config_hash(a) != config_hash(RunConfig(input_path=str(fixture_csv), alpha=0.05))
        assert len(config_hash(a)) == 16

    def test_hash_tracks_input_content(self, tmp_path, fixture_csv):
        p = tmp_path / "p.csv"
        shutil.copy(fixture_csv, p)
        h1 = config_hash(RunConfig(input_path=str(p)))
        p.write_text(p.read_text().replace(",", ", ", 1))
        assert config_hash(RunConfig(input_path=str(p))) != h1

    @pytest.mark.parametrize("kwargs", [dict(alpha=0.7), dict(horizons=()), dict(models=("XYZ",)),
                                        dict(riskmetrics_lambda=1.0), dict(rolling_window=0)])
    def test_validation(self, kwargs):
        with pytest.raises(InputError):
            RunConfig(input_path="x.csv", **kwargs).validate()

    def test_version(self, capsys):
        with pytest.raises(SystemExit):
            main(["--version"])
        assert "ewmask" in capsys.readouterr().out
