"""Watch merged/b_n settle down as n and N grow together.

    python3 demos/scaling_walkthrough.py [trials]

Runs the scaling study on the schedule (64,4), (128,8), (256,16) and
prints the mean normalized lengths with the coefficient of variation.
With the default 200 trials it finishes in a few seconds.
"""

import sys

from densetsp.experiments import ExperimentConfig, scaling_study

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 200
config = ExperimentConfig(study="scaling", r=0.08, s=0.15, M=0.05, trials=trials, seed=5,
                          schedule=((64, 4), (128, 8), (256, 16)), bootstrap=100)
rows, _ = scaling_study(config)
print("    n    N   V_n/b_n  merged/b_n      CV  (bootstrap SE)  relaxed merges")
for row in rows:
    print(f"{row.n:5d} {row.N:4d}   {row.v_ratio:7.4f}     {row.merged_ratio:7.4f}  {row.cv:.4f}"
          f"  ({row.cv_se:.4f})         {row.relaxed_rate:.3f}")
