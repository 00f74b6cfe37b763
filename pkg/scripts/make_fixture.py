"""Regenerate the bundled synthetic price fixture.

A GARCH(1,1) path with Student-t(6) innovations scaled to unit variance,
dated on weekdays from 2000-01-03. Output is deterministic for a given seed.
"""

import argparse
from pathlib import Path

import numpy as np

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "ewmask" / "data" / "synthetic_prices.csv"


def simulate_prices(n_returns=2000, seed=20240601, omega=0.015, alpha=0.08, beta=0.90, dof=6.0, start=1000.0):
    rng = np.random.default_rng(seed)
    z = rng.standard_t(dof, size=n_returns) * np.sqrt((dof - 2.0) / dof)
    v = omega / (1.0 - alpha - beta)
    r = np.empty(n_returns)
    for t in range(n_returns):
        r[t] = 0.03 + np.sqrt(v) * z[t]
        v = omega + alpha * (r[t] - 0.03) ** 2 + beta * v
    prices = start * np.exp(np.concatenate([[0.0], np.cumsum(r) / 100.0]))
    dates = np.busday_offset("2000-01-03", np.arange(n_returns + 1), roll="forward")
    return dates, prices


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args(argv)
    dates, prices = simulate_prices(args.n, args.seed)
    with args.out.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("date,price\n")
        for d, p in zip(dates, prices):
            fh.write(f"{d},{p:.4f}\n")
    print(f"wrote {len(prices)} rows to {args.out}")


if __name__ == "__main__":
    main()
