"""Accuracy over continual-learning sessions for several bundle sizes."""

import argparse
from pathlib import Path

from whype.experiments import SessionConfig, SyntheticClassSet, run_continual

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--sessions", type=int, default=10)
p.add_argument("--queries", type=int, default=300)
p.add_argument("--bundles", default="1,3,5")
p.add_argument("--seed", type=int, default=0)
p.add_argument("--out", default="results/continual.csv")
args = p.parse_args()

cs = SyntheticClassSet(seed=args.seed)
cfg = SessionConfig(sessions=args.sessions, queries_per_session=args.queries)
lines = ["bundle_size,session,classes,accuracy,stderr"]
for M in (int(m) for m in args.bundles.split(",")):
    for row in run_continual(cfg, cs, bundle=M, seed=args.seed):
        lines.append(f"{M},{row['session']},{row['classes']},{row['accuracy']!r},{row['stderr']!r}")
        print(f"M={M} session {row['session']:2d} ({row['classes']:3d} classes)  {row['accuracy']:.3f}")
Path(args.out).parent.mkdir(parents=True, exist_ok=True)
Path(args.out).write_text("\n".join(lines) + "\n")
