#!/usr/bin/env python3
"""Regenerates the synthetic asset fixtures (coinmetrics column codes).

Run from anywhere; writes into tests/fixtures/assets next to this file.
"""
import csv
import datetime as dt
import pathlib

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent
START = dt.date(2019, 1, 1)
DAYS = 1100
EXTERNALS = ["AdrActCnt", "AdrBalCnt", "AdrBalUSD100Cnt", "AdrBalUSD10Cnt", "SER", "TxCnt", "VelCur1yr"]


def garch_returns(rng, n, omega, a, b, gamma=0.0, df=None):
    var = omega / (1.0 - a - b - 0.5 * gamma)
    r = np.empty(n + 500)
    prev = 0.0
    for t in range(n + 500):
        if t:
            var = omega + (a + gamma * (prev < 0)) * prev * prev + b * var
        z = rng.standard_t(df) * np.sqrt((df - 2) / df) if df else rng.standard_normal()
        prev = z * np.sqrt(var)
        r[t] = prev
    return r[500:]


def covariate_walk(rng, n, level, drift, vol):
    return level * np.exp(np.cumsum(drift + vol * rng.standard_normal(n)))


def externals(rng, n, scale, ser):
    users = covariate_walk(rng, n, scale, 4e-4, 0.01)
    total = covariate_walk(rng, n, 12 * scale, 6e-4, 0.003)
    return {
        "AdrActCnt": np.round(users),
        "AdrBalCnt": np.round(total),
        "AdrBalUSD100Cnt": np.round(0.2 * total * covariate_walk(rng, n, 1.0, 0.0, 0.004)),
        "AdrBalUSD10Cnt": np.round(0.45 * total * covariate_walk(rng, n, 1.0, 0.0, 0.004)),
        "SER": ser * covariate_walk(rng, n, 1.0, 0.0, 0.002),
        "TxCnt": np.round(1.4 * users * covariate_walk(rng, n, 1.0, 0.0, 0.01)),
        "VelCur1yr": covariate_walk(rng, n, 8.0, 0.0, 0.005),
    }


def write(name, prices, market_cap, ext, drop=()):
    path = HERE / "assets" / f"{name}.csv"
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["time", "PriceUSD", "CapMrktCurUSD"] + (EXTERNALS if ext else []))
        for i, p in enumerate(prices):
            day = (START + dt.timedelta(days=i)).isoformat()
            price = "" if i in drop else f"{p:.10g}"
            row = [day, price, f"{market_cap[i]:.6g}"]
            if ext:
                row += [f"{ext[c][i]:.10g}" for c in EXTERNALS]
            w.writerow(row)


def main():
    rng = np.random.default_rng(20190101)
    n = DAYS

    # btc-like: persistent GARCH with fat tails.
    r = garch_returns(rng, n - 1, 4e-5, 0.12, 0.86, df=4)
    p = 3800.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    write("btc", p, 18e6 * p, externals(rng, n, 7e5, 0.0021), drop={400})

    # eth-like: higher volatility.
    r = garch_returns(rng, n - 1, 8e-5, 0.1, 0.86, df=5)
    p = 140.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    write("eth", p, 1.1e8 * p, externals(rng, n, 4e5, 0.0009))

    # ltc-like: leverage effect.
    r = garch_returns(rng, n - 1, 6e-5, 0.05, 0.88, gamma=0.1, df=6)
    p = 31.0 * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    write("ltc", p, 6.2e7 * p, externals(rng, n, 2.5e5, 0.0011))

    # doge-like: price only, no on-chain covariates.
    r = garch_returns(rng, n - 1, 1e-4, 0.15, 0.8, df=4)
    p = 0.0024 * np.exp(np.concatenate([[0.0], np.cumsum(r)]))
    write("doge", p, 1.2e11 * p, None)

    # stablecoin-like: mean-reverting around the peg with tiny volatility.
    dev = np.zeros(n)
    for t in range(1, n):
        dev[t] = 0.6 * dev[t - 1] + 0.0015 * rng.standard_normal()
    p = 1.0 + dev
    write("usdt", p, 2e9 * np.ones(n) * covariate_walk(rng, n, 1.0, 2e-3, 0.002), externals(rng, n, 1.5e5, 0.012))


if __name__ == "__main__":
    main()
