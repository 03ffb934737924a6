#!/usr/bin/env python3
"""Smoke test for the ldpoly Python bindings.

Builds nothing itself: point it at a compiled extension with

    cargo build -p ldpoly-py            # or --release
    python3 python/smoke_test.py
"""

import json
import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / "release" / "libldpoly.so",
        ROOT / "target" / "debug" / "libldpoly.so",
    ]
    built = next((c for c in candidates if c.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p ldpoly-py")
    stage = Path(tempfile.mkdtemp(prefix="ldpoly-py-"))
    shutil.copy(built, stage / "ldpoly.so")
    sys.path.insert(0, str(stage))
    import ldpoly

    return ldpoly


def check(name, ok, detail=""):
    print(f"{'ok' if ok else 'FAIL'}  {name}  {detail}")
    if not ok:
        sys.exit(1)


def main():
    ldpoly = load_module()
    print(f"ldpoly {ldpoly.__version__}")

    # Bernstein basis and surrogate
    b = ldpoly.bernstein_basis(2, 3, 0.5)
    check("bernstein_basis(2,3,0.5) = 0.375", abs(b - 0.375) < 1e-15, f"{b}")

    k = 6
    values = [v / k for v in range(k + 1)]
    s = ldpoly.BernsteinSurrogate.fit(values, k, 2, 1)
    check(
        "surrogate reproduces linear function",
        all(abs(s.eval([x]) - x) < 1e-12 for x in (0.0, 0.25, 0.7, 1.0)),
    )
    check("surrogate gradient of identity = 1", abs(s.gradient([0.4])[0] - 1.0) < 1e-9)
    round_trip = ldpoly.BernsteinSurrogate.from_json(s.to_json())
    check("surrogate JSON round trip", round_trip.eval([0.3]) == s.eval([0.3]))

    # Chebyshev disjunction polynomial
    p = ldpoly.chebyshev_disjunction(4, 0.1)
    check("disjunction poly vanishes at 0", p.eval(0.0) == 0.0)
    worst = max(abs(p.eval(float(x)) - 1.0) for x in range(1, 5))
    check("disjunction poly gamma bound", worst <= 0.1, f"worst {worst:.4f}")

    # randomizers
    draw = ldpoly.laplace_sample(1.0, 7)
    check("laplace_sample deterministic", draw == ldpoly.laplace_sample(1.0, 7))
    avg = ldpoly.ldp_avg_1d([0.5] * 5000, 1.0, 1e9, 3)
    check("ldp_avg_1d noiseless limit", abs(avg - 0.5) < 1e-6, f"{avg:.6f}")
    prob = ldpoly.one_bit_probability(1.0, 1.0, math.log(2))
    check("one-bit boundary probability = 1", abs(prob - 1.0) < 1e-12)

    # private ERM on a planted linear model
    import random

    rng = random.Random(0)
    features, labels = [], []
    for _ in range(4000):
        x = rng.uniform(-1, 1)
        features.append([x])
        labels.append(max(-1.0, min(1.0, 0.7 * x + 0.05 * rng.uniform(-1, 1))))
    out = ldpoly.private_erm(features, labels, epsilon=2.0, seed=1, k=3, h=2)
    check(
        "private_erm sandwich bound",
        out.err_empirical <= 2.0 * out.sup_grid_error + 1e-6,
        f"err {out.err_empirical:.5f}, sup {out.sup_grid_error:.5f}",
    )
    check("private_erm total bits", out.total_bits == 4000 * 4 * 64)

    # marginal release
    records = [[rng.random() < 0.3 for _ in range(5)] for _ in range(20000)]
    summary = ldpoly.release_marginals(records, k=2, epsilon=2.0, alpha=0.3, seed=4)
    q = [True, False, False, False, False]
    truth = sum(any(a and b for a, b in zip(q, r)) for r in records) / len(records)
    ans = summary.answer_marginal(q)
    check("marginal answer near truth", abs(ans - truth) <= 0.3, f"{ans:.3f} vs {truth:.3f}")
    meta = json.loads(summary.to_json())["meta"]
    check("summary carries basis order", "graded-lex" in meta["basis_order"])

    # smooth release
    points = [[rng.uniform(-1, 1)] for _ in range(20000)]
    sm = ldpoly.release_smooth(points, t=8, epsilon=1e9, seed=5, noiseless=True)
    exact = sum(math.exp(-x[0] ** 2 / 0.5) for x in points) / len(points)
    ans = sm.answer_gauss(0.0, 0.5)
    check("smooth answer matches average", abs(ans - exact) <= 1e-3, f"{ans:.5f} vs {exact:.5f}")

    # projection, width, recovery
    phi = ldpoly.gen_projection(10, 50, seed=6)
    w0 = [0.0] * 50
    w0[17] = 0.8
    target = phi.apply(w0)
    rec = ldpoly.recover_l1(target, phi)
    err = math.sqrt(sum((a - b) ** 2 for a, b in zip(rec, w0)))
    check("basis pursuit recovers planted vector", err <= 1e-4, f"l2 err {err:.2e}")
    width, se = ldpoly.gaussian_width("l2-ball", 100, 4000, 8)
    check("gaussian width of the ball ~ sqrt(p)", abs(width - 10.0) <= 0.5, f"{width:.2f}")

    ok, distortion = ldpoly.jl_check(phi, [w0], 0.9)
    check("jl_check runs", isinstance(ok, bool), f"distortion {distortion:.3f}")

    # high-dimensional pipeline, noiseless
    feats, labs = [], []
    for _ in range(800):
        y = [rng.gauss(0, 1) for _ in range(30)]
        norm = math.sqrt(sum(v * v for v in y))
        y = [v / norm for v in y]
        margin = 0.6 * y[1] - 0.25 * y[7]
        feats.append(y)
        labs.append(max(-1.0, min(1.0, 6.0 * margin)))
    hd = ldpoly.dr_erm(feats, labs, epsilon=1e9, seed=9, m=3, k=2, h=1)
    check("dr_erm recovery feasible", hd.feasibility <= 1e-6, f"{hd.feasibility:.2e}")
    check("dr_erm returns full-dimension w", len(hd.w_priv) == 30)

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
