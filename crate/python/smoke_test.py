"""Smoke test for the Python extension.

Build and install with `pip install --no-build-isolation -e crates/py`, then run
`python3 python/smoke_test.py`.
"""

import math

import homvol


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    bar = homvol.OhlcBar(0.0, 1.0, -1.0, 0.0)
    close(bar.rs_variance(), 2.0, 1e-12)
    close(bar.gk_variance(), 2.006, 1e-12)
    assert bar.horizon == 1.0

    try:
        homvol.OhlcBar(0.0, 1.0, -1.0, 2.0)
    except ValueError as e:
        assert "close <= high" in str(e)
    else:
        raise AssertionError("invalid bar accepted")

    ml = homvol.OhlcBar(0.0, 1.0, -1.0, 0.5).ml()
    doubled = homvol.OhlcBar(0.0, 2.0, -2.0, 1.0).ml()
    assert ml["mu_hat"] == 0.5
    assert doubled["sigma_hat"] == 2.0 * ml["sigma_hat"]

    bank = homvol.KernelBank(grid=32)
    close(bank.lower_bound_variance(0.0), 0.2583, 0.003)
    close(bank.moments("rs", 0.7)["mean"], 1.0, 5e-3)
    gk = bank.moments("gk", 0.0, volatility=True)
    close(1.0 - gk["mean"], 0.0309, 2e-3)

    eff = bank.efficient_diagram(0.0)
    assert eff.apply(bar) > 0.0

    q = bank.quasi(1, 1.0)
    assert q.nodes == [-1.0, 0.0, 1.0]
    assert q.weights[0] == q.weights[2]
    for g in q.nodes:
        close(q.expectation(g), 1.0, 1e-8)

    triples = homvol.simulate(1000, 200, gamma=0.5, seed=7)
    assert len(triples) == 200
    assert all(l <= c <= h and l <= 0.0 <= h for h, l, c in triples)
    assert triples == homvol.simulate(1000, 200, gamma=0.5, seed=7)
    assert all(math.isfinite(x) for t in triples for x in t)

    print("python smoke test passed")


if __name__ == "__main__":
    main()
