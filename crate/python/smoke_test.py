"""Smoke test for the tgarma extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`
(see README), then run `python python/smoke_test.py`.
"""

import math

import tgarma


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    assert close(tgarma.boxcox(2.0, 0.0), math.log(2.0))
    assert close(tgarma.inv_boxcox(tgarma.boxcox(3.7, 0.3), 0.3), 3.7)
    assert close(tgarma.gamma_logpdf(1.5, 2.0, 3.0),
                 3 * math.log(1.5) + 2 * math.log(1.5) - 2.25 - math.lgamma(3.0))
    assert math.isfinite(tgarma.invgauss_logpdf(2.0, 1.0, 1.0))
    try:
        tgarma.boxcox(-1.0, 0.5)
    except ValueError:
        pass
    else:
        raise AssertionError("negative input accepted")

    y = tgarma.simulate(beta0=0.5, phi=[0.4], theta=[], u=3.0, lam=0.5, n=120, seed=3)
    assert len(y) == 120 and min(y) > 0
    assert y == tgarma.simulate(beta0=0.5, phi=[0.4], theta=[], u=3.0, lam=0.5, n=120, seed=3)

    train, test = y[:114], y
    fit = tgarma.fit(train, p=1, q=0, draws=800, burn_in=400, thin=2, seed=5)
    print(fit)
    assert fit.names == ["beta0", "phi1", "nu", "lambda"]
    assert len(fit.draws()) == 800
    assert 0.0 < fit.acceptance_rate < 1.0
    summary = fit.summary()
    for name, row in summary.items():
        print(f"{name:8s} mean {row['mean']:.4f} sd {row['sd']:.4f}")
        assert row["hpd_lower"] <= row["mean"] <= row["hpd_upper"]

    crit = fit.criteria()
    assert crit["n_terms"] == 113
    print("DIC {dic:.4f} EBIC {ebic:.4f} CPO {cpo:.4f}".format(**crit))

    fc = fit.forecast(horizon=3)
    assert len(fc["point"]) == 3
    assert all(lo <= hi for lo, hi in zip(fc["lower"], fc["upper"]))
    one = fit.one_step(test)
    print(f"one-step MAPE {one['mape']:.2f}%")
    assert len(one["point"]) == 6
    assert close(tgarma.mape([10.0, 20.0], [11.0, 18.0]), 10.0)

    res = fit.residuals(maxlag=10)
    assert len(res["residuals"]) == 113 and res["acf"][0] == 1.0
    print("smoke test passed")


if __name__ == "__main__":
    main()
