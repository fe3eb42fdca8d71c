"""Idealized sleep-phase equalization, one sweep cell at a time.

N neurons share the same input stream. Each update pulls every neuron's
weight vector toward the population mean response while a small decay
anchors it to its initial value. The across-neuron spread, measured as
-log SNR, falls until it hits the decay-imposed floor 2*ln(gamma/(1+gamma)).
"""

import numpy as np

from sleepshare import (Schedule, SleepConfig, WeightBundle, neg_log_snr,
                        neg_log_snr_floor, sleep_run)
from sleepshare.mathcore import RngStream

for gamma in (1e-2, 1e-3):
    gen = RngStream(0, (7, 3, int(gamma * 1e9), 0)).generator()
    bundle = WeightBundle.from_rng(gen, n=100, d=9)
    config = SleepConfig(
        gamma=gamma,
        schedule=Schedule("inverse_time", a=0.5, b=1000.0),
        iterations=2000,
        momentum=0.95,
    )
    start = neg_log_snr(bundle.weights)
    result = sleep_run(bundle, config, gen)
    floor = neg_log_snr_floor(gamma)
    print(f"gamma={gamma:g}: start {start:+.2f} -> terminal "
          f"{result.terminal:+.2f} (floor {floor:+.2f})")

print()
print("Same protocol, run from the command line:")
print("  sleepshare sleep-ideal --out runs/sweep")
