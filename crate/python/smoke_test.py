"""Smoke test for the renorm extension module.

Build and run from the repository root:

    cargo build --release -p renorm-py --features extension-module
    cp target/release/librenorm_py.so python/renorm.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import renorm  # noqa: E402


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def main():
    assert close(renorm.gauge([[1.0, 1.0], [1.0, -1.0]], [0.5, -2.0]), 2.0)

    norm = renorm.SmoothNorm('{"kind": "pnorm", "p": 4}', 2)
    assert close(norm.value([1.0, 1.0]), 2.0 ** 0.25)
    pert = renorm.SmoothNorm.perturbed_euclidean(3, 0.1)
    assert pert.dim == 3 and pert.value([1.0, 0.0, 0.0]) > 1.0

    coords, point, residual = renorm.project(pert, [[1.0, 1.0, 0.0]], [1.0, 0.0, 2.0])
    assert len(coords) == 1 and len(point) == 3 and residual < 1e-10

    plane = renorm.PlaneNorm()
    assert plane.value(1.0, 0.5) == 1.0 and plane.value(1.0, 1.0) > 1.0

    schedule = renorm.Schedule(0.9)
    assert close(schedule.delta(1), 3.0 / 17.0, 1e-12)
    a, b, c = schedule.thresholds(3)
    assert a < b < c
    assert schedule.term(3, schedule.lam(3)) == 0.0

    config = {
        "dimension": 2,
        "target": "linf",
        "epsilon": 0.1,
        "lambda1": 0.9,
        "samples": {"convexity": 100, "sphere": 200, "fd": 10, "inclusions": 50, "paths": 1, "path_points": 16},
    }
    smoothed, report = renorm.approximate_norm(json.dumps(config))
    report = json.loads(report)
    bound = report["certificates"]["error"]["bound"]
    for k in range(16):
        t = 2.0 * math.pi * k / 16
        x = [math.cos(t), math.sin(t)]
        mu = smoothed.gauge(x)
        assert abs(mu / max(abs(x[0]), abs(x[1])) - 1.0) <= bound
        assert len(smoothed.gradient(x)) == 2
    print(f"renorm smoke test passed: {smoothed.num_slabs} slabs, sup error {report['sup_rel_error']:.4f}")


if __name__ == "__main__":
    main()
