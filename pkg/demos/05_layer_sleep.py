"""Equalizing a 2-D locally connected layer with periodic patterns.

Positions congruent mod k form a grid; a k-periodic input makes every
position in one grid see identical receptive content, so the grid
behaves like one bundle of neurons sharing an input. Cycling through
the k*k input grids equalizes all of them, after which the layer is
stride-k equivariant: shift the input by k, the output shifts by k.
"""

import numpy as np

from sleepshare import (Schedule, SleepConfig, instant_share,
                        kernel_grid_neg_log_snr, layer_sleep_run)
from sleepshare.mathcore import RngStream
from sleepshare.topology import LocalLayer, lc_forward

layer = LocalLayer.kaiming(np.random.default_rng(3), in_channels=1,
                           out_channels=4, height=9, width=9, kernel=3,
                           padding_mode="circular")
print(f"start spread: {kernel_grid_neg_log_snr(layer.weights, 3):+.2f}")

config = SleepConfig(gamma=1e-4,
                     schedule=Schedule("inverse_time", a=0.5, b=10.0),
                     iterations=600, momentum=0.9)
layer_sleep_run(layer, config, RngStream(0, (15,)))
print(f"after sleep:  {kernel_grid_neg_log_snr(layer.weights, 3):+.2f}")

instant_share(layer)  # snap the residue to the exact grid means
x = np.random.default_rng(4).normal(size=(1, 9, 9))
shifted = np.roll(x, (3, 0), axis=(1, 2))
err = np.abs(lc_forward(layer, shifted)
             - np.roll(lc_forward(layer, x), (3, 0), axis=(1, 2))).max()
print(f"stride-3 equivariance error after sharing: {err:.2e}")
