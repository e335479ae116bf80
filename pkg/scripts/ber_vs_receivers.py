"""Optimized average BER against the number of receivers on jittered
default layouts (M=3)."""

import argparse
from pathlib import Path

import numpy as np

from whype.coding import ber_vs_n_sweep

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--rx", default="1,2,4,8,16")
p.add_argument("--seeds", type=int, default=5)
p.add_argument("--noise-psd", type=float, default=None, help="noise power (W); default thermal")
p.add_argument("--workers", type=int, default=1)
p.add_argument("--out", default="results/ber_vs_rx.csv")
args = p.parse_args()

ns = [int(n) for n in args.rx.split(",")]
ber = ber_vs_n_sweep(ns, M=3, seeds=tuple(range(args.seeds)), noise_psd=args.noise_psd, workers=args.workers)
lines = ["N,seed,avg_ber"]
for i, n in enumerate(ns):
    col = ber[:, i]  # one value per seed
    lines += [f"{n},{s},{float(b)!r}" for s, b in enumerate(col)]
    print(f"N={n:3d}  mean BER {np.mean(col):.3e}  worst {np.max(col):.3e}")
Path(args.out).parent.mkdir(parents=True, exist_ok=True)
Path(args.out).write_text("\n".join(lines) + "\n")
