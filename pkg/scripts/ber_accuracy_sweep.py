"""Single-query accuracy against the BER injected at every receiver."""

import argparse
from pathlib import Path

import numpy as np

from whype.experiments import EpisodeConfig, SyntheticClassSet, ber_accuracy_sweep

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--seeds", type=int, default=10)
p.add_argument("--episodes", type=int, default=100, help="per seed")
p.add_argument("--step", type=float, default=0.02)
p.add_argument("--out", default="results/ber_accuracy.csv")
args = p.parse_args()

bers = np.round(np.arange(0, 0.5 + 1e-9, args.step), 10)
acc = np.zeros((args.seeds, len(bers)))
for s in range(args.seeds):
    res = ber_accuracy_sweep(EpisodeConfig(episodes=args.episodes, seed=s), SyntheticClassSet(seed=s), bers)
    acc[s] = [r.accuracy for r in res]

lines = ["ber,accuracy,stderr"]
for b, col in zip(bers, acc.T):
    se = col.std(ddof=1) / np.sqrt(len(col)) if len(col) > 1 else 0.0
    lines.append(f"{float(b)!r},{float(col.mean())!r},{float(se)!r}")
    print(f"BER {b:5.2f}  accuracy {col.mean():.4f}")
Path(args.out).parent.mkdir(parents=True, exist_ok=True)
Path(args.out).write_text("\n".join(lines) + "\n")
