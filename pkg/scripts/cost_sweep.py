"""Wired vs wireless interconnect cost as the receiver count grows."""

import argparse
from pathlib import Path

from whype.cost import SystemConfig, compare, sweep_rx

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--tx", type=int, default=3)
p.add_argument("--rx", default="4,8,16,32,64")
p.add_argument("--out", default="results/cost_sweep.csv")
args = p.parse_args()

rows = sweep_rx(args.tx, [int(n) for n in args.rx.split(",")])
keys = list(rows[0])
lines = [",".join(keys)] + [",".join(repr(float(r[k])) if k != "N" else str(r[k]) for k in keys) for r in rows]
for r in rows:
    print(f"N={r['N']:3d}  area wired {r['wired_area_mm2']:7.2f}  wireless {r['wireless_area_mm2']:6.2f} mm^2")
ref = compare(SystemConfig(M=args.tx, N=8))
print(ref["wired"].pretty())
print(ref["wireless"].pretty())
Path(args.out).parent.mkdir(parents=True, exist_ok=True)
Path(args.out).write_text("\n".join(lines) + "\n")
