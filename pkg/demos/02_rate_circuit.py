"""The same equalization produced by an actual rate circuit.

N excitatory units drive one inhibitory unit which feeds back to all of
them. At the settled state each unit's rate deviation from its bias
equals its input drive minus (almost) the population mean, so a plain
anti-Hebbian rule -(r - b) x implements the centering update. Finite
inhibition alpha leaves a bias: the run first approaches the floor,
then drifts back up toward the biased equilibrium, so the best point
sits in the middle of the run.
"""

import math

import numpy as np

from sleepshare import (RateCircuit, Schedule, SleepConfig, WeightBundle,
                        rate_fixed_point, rate_sleep_run)
from sleepshare.mathcore import RngStream

# settled rates match the closed form
circuit = RateCircuit(tau=30.0, alpha=10.0, b=1.0, dt=1.0, present_ms=900.0)
drive = np.array([2.0, -1.0, 0.5, 4.0])
circuit.reset(4)
from sleepshare import rate_step
for _ in range(circuit.steps_per_presentation):
    rate_step(circuit, drive)
print("settled rates:", np.round(circuit.r, 6))
print("closed form:  ", np.round(rate_fixed_point(circuit, drive), 6))
print()


def run(alpha, iterations=3000):
    gen = RngStream(0, (7, 3, 1_000_000, 0)).generator()
    bundle = WeightBundle.from_rng(gen, 100, 9)
    circ = RateCircuit(tau=30.0, alpha=alpha, b=1.0, dt=1.0, present_ms=150.0)
    cfg = SleepConfig(gamma=1e-3,
                      schedule=Schedule("inverse_sqrt", 3e-4, 2.0, warmup=50),
                      iterations=iterations, momentum=0.0, alpha=alpha)
    return rate_sleep_run(bundle, circ, cfg, gen, plasticity="continuous")


biased = run(10.0)
print(f"alpha=10: initial {biased.initial:+.2f}, best "
      f"{biased.trajectory.min():+.2f} at presentation "
      f"{int(biased.trajectory.argmin()) + 1}, terminal {biased.terminal:+.2f}")
print(f"          fraction of presentations with all rates >= 0: "
      f"{biased.frac_nonneg:.2f}")

ideal = run(math.inf)
print(f"alpha=inf: terminal {ideal.terminal:+.2f} (no bias, keeps falling)")
