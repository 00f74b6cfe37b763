"""Command-line pipeline: stats, fit, forecast, backtest and report.

Exit codes: 0 success, 1 input error, 2 estimation failure, 3 missing
prerequisite artifact. Settings come from flags, then ``--config`` (a flat
``key = value`` file), then defaults. Every output carries the hash of the
effective settings; the output directory is not part of the hash.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .backtest import format_table, hit_sequence, run_backtest
from .errors import EstimationError, InputError, MissingArtifactError
from .ewma import (
    DecayParams,
    MomentState,
    estimate_ewma_sk,
    ewma_sk_filter,
    ewma_sk_step,
    riskmetrics_filter,
    riskmetrics_step,
)
from .garch import GarchParams, estimate_garch, garch_filter
from .gram_charlier import ShapePair
from .ingest import StatsSummary, compute_log_returns, descriptive_stats, read_price_csv, split_sample
from .var_engine import (
    MODEL_TAGS,
    CfOptions,
    ForecastState,
    VaRQuery,
    aggregate_returns,
    fhs_var_series,
    filtered_historical_simulation,
    forecast_dates,
    forecast_var,
    historical_simulation,
    hs_var_series,
    parametric_var_series,
    var_series_csv,
)

logger = logging.getLogger("ewmask")

EXIT_OK, EXIT_INPUT, EXIT_ESTIMATION, EXIT_MISSING = 0, 1, 2, 3


@dataclass(frozen=True)
class RunConfig:
    input_path: str = ""
    out_of_sample_count: int = 500
    alpha: float = 0.01
    horizons: tuple = (1, 10)
    models: tuple = MODEL_TAGS
    riskmetrics_lambda: float = 0.94
    cf_raw_kurtosis: bool = False
    cf_full: bool = False
    rolling_window: int | None = None
    overlapping: bool = True
    pin_mu: bool = False
    credit_addon: float = 0.0
    output_dir: str = "ewmask_out"

    def validate(self):
        if not self.input_path:
            raise InputError("no input CSV given (use --input or input_path in the config file)")
        if self.out_of_sample_count < 0:
            raise InputError("out_of_sample_count must be nonnegative")
        if not 0.0 < self.alpha <= 0.5:
            raise InputError(f"alpha must lie in (0, 0.5], got {self.alpha}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise InputError(f"horizons must be positive integers, got {self.horizons}")
        bad = [m for m in self.models if m not in MODEL_TAGS]
        if bad or not self.models:
            raise InputError(f"unknown models {bad}; choose from {', '.join(MODEL_TAGS)}")
        if not 0.0 < self.riskmetrics_lambda < 1.0:
            raise InputError("riskmetrics_lambda must lie in (0, 1)")
        if self.rolling_window is not None and self.rolling_window < 1:
            raise InputError("rolling_window must be a positive integer")
        return self

    @property
    def cf_options(self):
        return CfOptions(raw_kurtosis=self.cf_raw_kurtosis, full=self.cf_full)

    @property
    def out(self):
        return Path(self.output_dir)

    def hashed_fields(self):
        d = asdict(self)
        d.pop("output_dir")
        d["horizons"] = list(self.horizons)
        d["models"] = list(self.models)
        return d


def _parse_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int_list(text):
    return tuple(int(p) for p in str(text).replace(";", ",").split(",") if p.strip())


def _parse_models(text):
    lookup = {m.lower(): m for m in MODEL_TAGS}
    out = []
    for p in str(text).replace(";", ",").split(","):
        p = p.strip()
        if not p:
            continue
        if p.lower() not in lookup:
            raise ValueError(f"unknown model {p!r}")
        out.append(lookup[p.lower()])
    return tuple(out)


def _parse_optional_int(text):
    t = str(text).strip().lower()
    return None if t in ("", "none", "expanding") else int(t)


def _parse_windows(text):
    t = str(text).strip().lower()
    if t not in ("overlapping", "non-overlapping"):
        raise ValueError("ten_day_windows must be 'overlapping' or 'non-overlapping'")
    return t == "overlapping"


_PARSERS = {
    "input_path": str,
    "out_of_sample_count": int,
    "alpha": float,
    "horizons": _parse_int_list,
    "models": _parse_models,
    "riskmetrics_lambda": float,
    "cf_raw_kurtosis": _parse_bool,
    "cf_full": _parse_bool,
    "rolling_window": _parse_optional_int,
    "overlapping": _parse_bool,
    "pin_mu": _parse_bool,
    "credit_addon": float,
    "output_dir": str,
}
_ALIASES = {"input": "input_path", "out_of_sample": "out_of_sample_count", "ten_day_windows": "overlapping"}


def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment. Returns typed values."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    values = {}
    for n, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}: line {n}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_").lower()
        parse = _parse_windows if key == "ten_day_windows" else _PARSERS.get(_ALIASES.get(key, key))
        if parse is None:
            raise InputError(f"{path}: line {n}: unknown key {key!r}")
        try:
            values[_ALIASES.get(key, key)] = parse(value)
        except ValueError as exc:
            raise InputError(f"{path}: line {n}: {exc}") from None
    return values


def build_config(args) -> RunConfig:
    values = read_config_file(args.config) if args.config else {}
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = flag
    return RunConfig(**values).validate()


def config_hash(config: RunConfig) -> str:
    payload = dict(config.hashed_fields())
    src = Path(config.input_path)
    payload["input_sha256"] = hashlib.sha256(src.read_bytes()).hexdigest() if src.is_file() else None
    payload["version"] = __version__
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---- serialization ----------------------------------------------------------

def _round15(x):
    return float(f"{x:.15g}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round15(float(obj)) if math.isfinite(obj) else None
    return obj


def _num(x):
    return "" if x is None or not math.isfinite(x) else f"{x:.15g}"


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: Path, payload: dict, config: RunConfig, chash: str):
    doc = {"config_hash": chash, "config": config.hashed_fields(), **payload}
    write_atomic(path, json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n")


def write_csv(path: Path, header, rows, chash: str):
    buf = io.StringIO()
    buf.write(f"# config_hash: {chash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    write_atomic(path, buf.getvalue())


def read_csv_table(path: Path):
    """Read one of our CSVs back as (header, rows), skipping the hash comment."""
    if not path.is_file():
        raise MissingArtifactError(path)
    with path.open(newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, list(reader)


def _slug(model):
    return model.lower()


# ---- pipeline stages ---------------------------------------------------------

def load_returns(config: RunConfig):
    prices = read_price_csv(config.input_path)
    returns = compute_log_returns(prices)
    if config.out_of_sample_count >= len(returns):
        raise InputError(
            f"out_of_sample_count {config.out_of_sample_count} leaves no in-sample data "
            f"({len(returns)} returns)"
        )
    return prices, split_sample(returns, config.out_of_sample_count)


def _short_stats(x):
    # fewer than 4 returns: location and scale only, shape statistics undefined
    nan = float("nan")
    return StatsSummary(mean=float(np.mean(x)), std_dev=float(np.std(x)), minimum=float(np.min(x)),
                        maximum=float(np.max(x)), skewness=nan, kurtosis=nan, jarque_bera=nan,
                        jb_p_value=nan, count=int(x.shape[0]))


def cmd_stats(config: RunConfig, chash: str):
    # statistics cover the whole series, so the sample split is not applied
    returns = compute_log_returns(read_price_csv(config.input_path))
    st = descriptive_stats(returns) if len(returns) >= 4 else _short_stats(returns.returns)
    write_json(config.out / "stats.json", {"stats": st.to_dict()}, config, chash)
    cols = ("count", "mean", "std_dev", "minimum", "maximum", "skewness", "kurtosis", "jarque_bera", "jb_p_value")
    d = st.to_dict()
    print("  ".join(f"{c:>12}" for c in cols))
    print("  ".join(f"{d[c]:>12}" if c == "count" else f"{d[c]:>12.4f}" for c in cols))
    return EXIT_OK


def fit_models(config: RunConfig, returns):
    """Fit both parametric models on the in-sample period; raises EstimationError."""
    failures = []
    ewma = garch = None
    try:
        ewma = estimate_ewma_sk(returns, pin_mu=config.pin_mu)
    except EstimationError as exc:
        failures.append(("EWMA-SK", exc))
    try:
        garch = estimate_garch(returns)
    except EstimationError as exc:
        failures.append(("GARCH-N", exc))
    if failures:
        msg = "; ".join(f"{m}: {e} [{e.diagnostic}] best point {e.best_point}" for m, e in failures)
        raise EstimationError(msg)
    return ewma, garch


def cmd_fit(config: RunConfig, chash: str):
    _, returns = load_returns(config)
    (dparams, path), gparams = fit_models(config, returns)
    out = config.out
    write_json(out / "ewma_sk.json", {"params": dparams.to_dict()}, config, chash)
    write_json(out / "garch.json", {"params": gparams.to_dict()}, config, chash)
    write_csv(out / "moment_path.csv", ["date", "variance", "skew_state", "kurt_state", "std_residual"],
              path.rows(), chash)
    dates, var, _ = garch_filter(returns, gparams)
    write_csv(out / "garch_variance.csv", ["date", "variance"],
              ((str(d), float(v)) for d, v in zip(dates, var)), chash)
    print(f"EWMA-SK  lambda1={dparams.lambda1:.4f} lambda2={dparams.lambda2:.4f} "
          f"lambda3={dparams.lambda3:.4f} mu={dparams.mu:.4f} loglik={dparams.log_likelihood:.3f}")
    print(f"GARCH-N  mu={gparams.mu:.4f} omega={gparams.omega:.4f} alpha={gparams.alpha:.4f} "
          f"beta={gparams.beta:.4f} loglik={gparams.log_likelihood:.3f}")
    return EXIT_OK


def _load_json(path: Path):
    if not path.is_file():
        raise MissingArtifactError(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def load_fitted(config: RunConfig):
    e = _load_json(config.out / "ewma_sk.json")["params"]
    g = _load_json(config.out / "garch.json")["params"]
    init = e.get("init")
    dparams = DecayParams(
        e["lambda1"], e["lambda2"], e["lambda3"], e["mu"],
        init=MomentState(init["variance"], init["third"], init["fourth"]) if init else None,
    )
    gparams = GarchParams(g["mu"], g["omega"], g["alpha"], g["beta"], init_variance=g["init_variance"])
    return dparams, gparams


def compute_var_series(config: RunConfig, returns, dparams, gparams):
    """Out-of-sample VaR for every requested (model, horizon).

    Returns a list of (model, horizon, VaRSeries, realized returns over the horizon).
    """
    split = returns.split_index
    r = returns.returns
    oos = returns.out_of_sample
    oos_dates = returns.out_of_sample_dates
    if len(oos) < 50:
        raise InputError(f"backtesting needs at least 50 out-of-sample returns, got {len(oos)}")
    path = ewma_sk_filter(returns, dparams)
    rm = riskmetrics_filter(returns, config.riskmetrics_lambda, 0.0)
    _, gvar, gres = garch_filter(returns, gparams)
    results = []
    for h in config.horizons:
        pos = forecast_dates(oos_dates, h, config.overlapping)
        if pos.size == 0:
            raise InputError(f"horizon {h} exceeds the out-of-sample period")
        realized = aggregate_returns(oos, h, pos)
        idx = split + pos
        for model in config.models:
            q = VaRQuery(config.alpha, h, model)
            if model == "EWMA-SK":
                s = parametric_var_series(returns.dates, dparams.mu, path.variance, path.third, path.fourth,
                                          q, config.cf_options, idx)
            elif model == "RiskMetrics":
                s = parametric_var_series(returns.dates, 0.0, rm.variance, rm.third, rm.fourth,
                                          q, config.cf_options, idx)
            elif model == "GARCH-N":
                n = len(r)
                s = parametric_var_series(returns.dates, gparams.mu, gvar, np.zeros(n), np.full(n, 3.0),
                                          q, config.cf_options, idx)
            elif model == "HS":
                s = hs_var_series(r, returns.dates, split, q, pos, config.rolling_window)
            else:
                s = fhs_var_series(gres, gvar, returns.dates, split, q, pos, config.rolling_window)
                for w in s.warnings:
                    logger.warning(w)
            results.append((model, h, s, realized))
    return results


def next_day_forecasts(config: RunConfig, returns, dparams, gparams):
    """VaR for the day after the last observation, per requested model and horizon."""
    r = returns.returns
    eps = r[-1] - dparams.mu
    path = ewma_sk_filter(returns, dparams)
    last = path.state(-1)
    nxt = ewma_sk_step(last, eps, dparams.lambdas)
    rm = riskmetrics_filter(returns, config.riskmetrics_lambda, 0.0)
    rm_next = riskmetrics_step(rm.variance[-1], r[-1], config.riskmetrics_lambda)
    _, gvar, gres = garch_filter(returns, gparams)
    g_next = gparams.omega + gparams.alpha * (r[-1] - gparams.mu) ** 2 + gparams.beta * gvar[-1]
    window = slice(None) if config.rolling_window is None else slice(-config.rolling_window, None)
    out = []
    for h in config.horizons:
        for model in config.models:
            q = VaRQuery(config.alpha, h, model)
            if model == "EWMA-SK":
                v = forecast_var(ForecastState(dparams.mu, math.sqrt(nxt.variance),
                                               ShapePair(nxt.third, nxt.fourth)), q, config.cf_options)
            elif model == "RiskMetrics":
                v = forecast_var(ForecastState(0.0, math.sqrt(rm_next)), q, config.cf_options)
            elif model == "GARCH-N":
                v = forecast_var(ForecastState(gparams.mu, math.sqrt(g_next)), q, config.cf_options)
            elif model == "HS":
                v = math.sqrt(h) * historical_simulation(r[window], config.alpha)
            else:
                v = math.sqrt(h) * filtered_historical_simulation(gres[window], math.sqrt(g_next), config.alpha)
            out.append({"model": model, "horizon": h, "alpha": config.alpha, "var_loss": v})
    return out


def _write_var_files(config, chash, results):
    for model, h, s, _ in results:
        text = var_series_csv([s])
        write_atomic(config.out / f"var_{_slug(model)}_{h}d.csv", f"# config_hash: {chash}\n" + text)


def cmd_forecast(config: RunConfig, chash: str):
    _, returns = load_returns(config)
    dparams, gparams = load_fitted(config)
    results = compute_var_series(config, returns, dparams, gparams)
    _write_var_files(config, chash, results)
    nxt = next_day_forecasts(config, returns, dparams, gparams)
    write_json(config.out / "forecast.json",
               {"last_date": str(returns.dates[-1]), "next_day": nxt}, config, chash)
    for row in nxt:
        print(f"{row['model']:<12} {row['horizon']:>3}d  VaR {row['var_loss']:.4f}")
    return EXIT_OK


def cmd_backtest(config: RunConfig, chash: str):
    _, returns = load_returns(config)
    dparams, gparams = load_fitted(config)
    results = compute_var_series(config, returns, dparams, gparams)
    _write_var_files(config, chash, results)
    reports = []
    for model, h, s, realized in results:
        hs = hit_sequence(realized, s)
        write_csv(config.out / f"hits_{_slug(model)}_{h}d.csv", ["date", "return", "var_loss", "hit"],
                  ((str(d), float(x), float(v), int(b)) for d, x, v, b in zip(s.dates, realized, s.var_loss, hs.hits)),
                  chash)
        try:
            reports.append(run_backtest(realized, s, credit_addon=config.credit_addon))
        except InputError as exc:
            raise InputError(f"{model} {h}-day backtest: {exc}") from None
    write_json(config.out / "backtest_report.json",
               {"reports": [rep.to_dict() for rep in reports]}, config, chash)
    table = format_table(reports)
    write_atomic(config.out / "backtest_table.txt", f"# config_hash: {chash}\n" + table)
    print(table, end="")
    return EXIT_OK


def cmd_report(config: RunConfig, chash: str):
    out = config.out
    needed = [out / "moment_path.csv", out / "garch_variance.csv", out / "backtest_report.json"]
    needed += [out / f"var_{_slug(m)}_{h}d.csv" for h in config.horizons for m in config.models]
    for p in needed:
        if not p.is_file():
            raise MissingArtifactError(p)
    prices, returns = load_returns(config)
    _, mp = read_csv_table(out / "moment_path.csv")
    _, gv = read_csv_table(out / "garch_variance.csv")
    rm = riskmetrics_filter(returns, config.riskmetrics_lambda, 0.0)
    split = returns.split_index
    dates = [str(d) for d in returns.dates]
    rep = out / "report"

    write_csv(rep / "prices_returns.csv", ["date", "price", "return", "in_sample"],
              ((dates[i], float(prices.prices[i + 1]), float(returns.returns[i]), int(i < split))
               for i in range(len(dates))), chash)
    write_csv(rep / "volatility_in_sample.csv", ["date", "riskmetrics_vol", "ewma_sk_vol", "garch_vol"],
              ((dates[i], math.sqrt(rm.variance[i]), math.sqrt(float(mp[i][1])), math.sqrt(float(gv[i][1])))
               for i in range(split)), chash)
    write_csv(rep / "moments_in_sample.csv", ["date", "skew_state", "kurt_state", "std_residual"],
              ((mp[i][0], float(mp[i][2]), float(mp[i][3]), float(mp[i][4])) for i in range(split)), chash)
    for h in config.horizons:
        cols = {}
        var_dates = None
        for m in config.models:
            _, rows = read_csv_table(out / f"var_{_slug(m)}_{h}d.csv")
            cols[m] = [float(row[4]) for row in rows]
            var_dates = [row[0] for row in rows]
        pos = np.searchsorted(returns.out_of_sample_dates, np.array(var_dates, dtype="datetime64[D]"))
        realized = aggregate_returns(returns.out_of_sample, h, pos)
        write_csv(rep / f"var_vs_returns_{h}d.csv", ["date", "return", *[f"var_{_slug(m)}" for m in config.models]],
                  ((var_dates[j], float(realized[j]), *[cols[m][j] for m in config.models])
                   for j in range(len(var_dates))), chash)
    print(f"wrote report CSVs to {rep}")
    return EXIT_OK


COMMANDS = {
    "stats": cmd_stats,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--input", dest="input_path", help="price CSV with header date,price")
    common.add_argument("--output-dir", dest="output_dir")
    common.add_argument("--out-of-sample", dest="out_of_sample_count", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--horizons", type=_parse_int_list, help="comma-separated, e.g. 1,10")
    common.add_argument("--models", type=_parse_models, help=f"comma-separated subset of {','.join(MODEL_TAGS)}")
    common.add_argument("--riskmetrics-lambda", dest="riskmetrics_lambda", type=float)
    common.add_argument("--cf-raw-kurtosis", dest="cf_raw_kurtosis", action="store_true", default=None,
                        help="use raw instead of excess kurtosis in the Cornish-Fisher term")
    common.add_argument("--cf-full", dest="cf_full", action="store_true", default=None,
                        help="add the second-order skewness term to the Cornish-Fisher quantile")
    common.add_argument("--rolling-window", dest="rolling_window", type=_parse_optional_int,
                        help="HS/FHS window length (default: expanding)")
    common.add_argument("--ten-day-windows", dest="overlapping", type=_parse_windows,
                        help="overlapping (default) or non-overlapping multi-day windows")
    common.add_argument("--pin-mu", dest="pin_mu", action="store_true", default=None,
                        help="fix the EWMA-SK mean at the in-sample average")
    common.add_argument("--credit-addon", dest="credit_addon", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ewmask", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "stats": "descriptive statistics of the return series",
        "fit": "estimate EWMA-SK and GARCH(1,1) on the in-sample period",
        "forecast": "out-of-sample and next-day VaR from fitted parameters",
        "backtest": "coverage tests, Basel zones and capital for each model and horizon",
        "report": "tidy CSVs for plotting volatility, moments and VaR",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = build_config(args)
        chash = config_hash(config)
        return COMMANDS[args.command](config, chash)
    except MissingArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except EstimationError as exc:
        print(f"error: estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
