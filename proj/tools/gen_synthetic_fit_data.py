#!/usr/bin/env python3
"""Synthetic fit datasets with known parameters.

damped: P0 + A exp(-t/t0) cos(2 pi f (t - tc)), A = 0.49, f = 0.625 MHz,
t0 = 28 us, P0 = 0.5, tc = 0, sigma = 0.015.
parity: 2 Re(C2) - 2 |C1| cos(2 phi + xi), Re(C2) = 0.02, |C1| = 0.16,
xi = 0, sigma = 0.08 (150 shots).
"""
import argparse
import math
import random
from pathlib import Path


def damped(rng, out):
    p0, a, t0, f, tc, sigma = 0.5, 0.49, 28e-6, 0.625e6, 0.0, 0.015
    with out.open("w") as fh:
        fh.write(f"# damped sinusoid P0={p0} A={a} t0={t0} f={f} tc={tc} sigma={sigma}\n")
        fh.write("t_s,p,sigma\n")
        for i in range(81):
            t = i * 0.25e-6
            y = p0 + a * math.exp(-t / t0) * math.cos(2 * math.pi * f * (t - tc))
            fh.write(f"{t:.9g},{y + rng.gauss(0.0, sigma):.6f},{sigma}\n")


def parity(rng, out):
    re_c2, c1, xi, sigma = 0.02, 0.16, 0.0, 0.08
    with out.open("w") as fh:
        fh.write(f"# parity ReC2={re_c2} absC1={c1} xi={xi} sigma={sigma}\n")
        fh.write("phi_rad,parity,sigma\n")
        for i in range(25):
            phi = math.pi * i / 24
            y = 2 * re_c2 - 2 * c1 * math.cos(2 * phi + xi)
            fh.write(f"{phi:.9g},{y + rng.gauss(0.0, sigma):.6f},{sigma}\n")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=20160623)
    args = ap.parse_args()
    out = Path(args.out)
    rng = random.Random(args.seed)
    damped(rng, out / "synthetic_damped_sinusoid.csv")
    parity(rng, out / "synthetic_parity.csv")


if __name__ == "__main__":
    main()
