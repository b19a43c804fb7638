#!/usr/bin/env python3
"""Smoke test for the nadc extension module.

Build and stage the module first:

    cargo build --release -p nadc-py
    cp target/release/libnadc.so python/nadc.so

then run `python3 python/smoke_test.py` from the repository root.
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import nadc

US = 1e-6


def check(label, ok):
    status = "ok" if ok else "FAIL"
    print(f"  [{status}] {label}")
    if not ok:
        raise SystemExit(f"smoke test failed at: {label}")


def main():
    print("== block synthesis ==")
    net = nadc.synth_scaled(2, 2.0, -0.67, -0.67, 10 * US)
    check("T_01 ~ 29.9 uS", abs(net.t_matrix[0][1] - 29.9 * US) <= 0.1 * US)
    check("T_R0 ~ 12.5 uS", abs(net.t_ref[0] - 12.5 * US) <= 0.1 * US)
    check("T_In1 = 40.0 uS", abs(net.t_in[1] - 40.0 * US) <= 0.1 * US)
    check("logic high is the -670 mV rail", abs(net.logic_high + 0.67) < 1e-12)

    print("== settling ==")
    for v_in, want in [(0.1, 0), (0.7, 1), (1.1, 2), (1.8, 3)]:
        code, converged, steps = net.settle(v_in)
        check(f"settle({v_in} V) -> code {want} (got {code}, {steps} steps)",
              code == want and converged)

    print("== energy oracle ==")
    classic = nadc.synth_normalized(2, "classic_signed")
    check("global minimum at x=1.3 is code 1", classic.global_min_code(1.3) == 1)
    check("ideal_code(1.3) agrees", nadc.ideal_code(1.3, 2, 1.0) == 1)
    minima = classic.local_minima(1.7)
    check("x=1.7 has multiple local minima", len(minima) > 1)

    print("== level-shifted array ==")
    array = nadc.QuantizerArray(6, 0.1, "add", net, 0.0, 2.0)
    table = array.sweep(0.0, 2.0, 128)
    check("sweep yields >= 16 levels", table.n_levels() >= 16)
    check("staircase is monotone", table.is_monotone())
    metrics = nadc.inl_dnl(table.transitions(), 2.0 / 16.0)
    check(f"max |INL| <= 1.5 LSB (got {metrics['max_abs_inl']:.3f})",
          metrics["max_abs_inl"] <= 1.5)

    print("== encoder ==")
    encoder = nadc.Encoder([12, 11, 4], seed=42)
    report = encoder.train_on_table(table)
    check(f"encoder reaches 100% exact match in {report['epochs']} epochs",
          report["exact_match"] == 1.0)
    rows = table.rows()
    exact = all(
        encoder.encode_bits([int(b) for b in bits]) == level
        for (_, bits, level) in rows
    )
    check("encode(quantize(v)) reproduces every level code", exact)

    print("== waveform tracking ==")
    n = 128
    samples = [1.5 - 1.5 * math.cos(2 * math.pi * k / n) for k in range(n)]
    out = classic.simulate(samples, 1e-3)
    hits = sum(1 for (_, v, code) in out if code == nadc.ideal_code(v, 2, 1.0))
    rate = hits / n
    check(f"sine tracking {rate:.1%} >= 90%", rate >= 0.90)

    print("smoke test passed")


if __name__ == "__main__":
    main()
