"""Smoke test for the negbound Python extension.

Build and install it first:
    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import csv
import io
import json
import math

import negbound_py as nb


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    value, stderr, method = nb.coupon_probability(32, classes=10)
    assert close(value, 0.6909756, 1e-6), value
    assert stderr == 0.0 and method in ("dp", "inclusion_exclusion"), (stderr, method)

    mc, mc_se, _ = nb.coupon_probability(32, classes=10, method="mc", trials=200_000, seed=1)
    assert abs(mc - value) < 5 * mc_se, (mc, mc_se)

    assert nb.tau(0, classes=10) == 0.0
    assert close(nb.tau(31, classes=10), 1 - 0.9**31, 1e-12)
    assert close(nb.tau(3, probs=[0.5, 0.5]), 1 - 0.5 * 0.5**3 * 2, 1e-12)

    mean, ceil = nb.expected_draws(classes=100)
    assert close(mean, 100 * sum(1 / i for i in range(1, 101)), 1e-6) and ceil == 519

    try:
        nb.tau(1, classes=3, probs=[1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("conflicting class arguments accepted")

    train = json.dumps({"samples_per_class": 60, "epochs": 3, "k_negatives": 7})
    table = nb.toy_bounds_csv([7, 15], train_config=train)
    rows = list(csv.DictReader(io.StringIO(table)))
    assert [r["k_plus_1"] for r in rows] == ["8", "16"], rows
    for r in rows:
        assert math.isfinite(float(r["L_info"]))

    print("python smoke test passed (negbound_py %s)" % nb.__version__)


if __name__ == "__main__":
    main()
