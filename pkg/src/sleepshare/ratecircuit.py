"""Excitatory/inhibitory rate dynamics realizing the equalization rule.

N excitatory units share one inhibitory unit:

    tau dr_i/dt    = -r_i + w_i . x - alpha * r_inh + b
    tau dr_inh/dt  = -r_inh + mean_j r_j - b

Integrated with forward Euler (dt <= tau/10). At the fixed point the
deviation r_i - b equals z_i - c * mean z with c = alpha/(1+alpha), so
anti-Hebbian plasticity -(r_i - b) x reproduces the finite-alpha
equalization update.

Plasticity modes:
    "continuous" (default): the weight update is applied at every Euler
    step with gain rate_const per ms, so one presentation does
    present_ms * rate_const small updates worth of work. This is what
    makes the published iteration counts reachable; see ledger notes.
    "terminal": a single update per presentation from the settled rates;
    equals the discrete finite-alpha rule once the ODE has settled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergenceError
from .mathcore import RngStream
from .sharing import (SleepConfig, SleepResult, WeightBundle, bias_coefficient,
                      neg_log_snr, sleep_run)

__all__ = [
    "RateCircuit",
    "rate_step",
    "rate_fixed_point",
    "rate_sleep_run",
    "RateSleepResult",
]


@dataclass
class RateCircuit:
    tau: float            # membrane time constant, ms
    alpha: float          # inhibition strength; ODE path needs it finite
    b: float              # shared bias rate
    dt: float             # Euler step, ms
    present_ms: float     # presentation duration per input
    r: Optional[np.ndarray] = None
    r_inh: float = 0.0
    t_ms: float = 0.0     # elapsed simulated time, for error context

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.dt <= 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.dt > self.tau / 10.0 + 1e-12:
            raise ValueError(f"dt must be <= tau/10 for stability, got dt={self.dt}, tau={self.tau}")
        steps = self.present_ms / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"present_ms ({self.present_ms}) must be a multiple of dt ({self.dt})")

    @property
    def steps_per_presentation(self) -> int:
        return int(round(self.present_ms / self.dt))

    def reset(self, n: int) -> None:
        self.r = np.full(n, self.b, dtype=np.float64)
        self.r_inh = 0.0


def rate_step(circuit: RateCircuit, drive: np.ndarray) -> np.ndarray:
    """One forward-Euler step of both populations, in place."""
    if math.isinf(circuit.alpha):
        raise ValueError("rate_step needs finite alpha; the inf limit bypasses the ODE")
    r = circuit.r
    if r is None or r.shape != drive.shape:
        raise ValueError("circuit state not initialized for this drive size")
    coef = circuit.dt / circuit.tau
    dr = (-r + drive - circuit.alpha * circuit.r_inh + circuit.b) * coef
    dri = (-circuit.r_inh + r.mean() - circuit.b) * coef
    r += dr
    circuit.r_inh += dri
    circuit.t_ms += circuit.dt
    if not np.all(np.isfinite(r)) or not math.isfinite(circuit.r_inh):
        raise DivergenceError("rate dynamics diverged",
                              f"t = {circuit.t_ms:.1f} ms")
    return r


def rate_fixed_point(circuit: RateCircuit, drive: np.ndarray) -> np.ndarray:
    """The unique stationary rates for a fixed drive:
    r_i* = b + drive_i - mean + mean / (1 + alpha)."""
    drive = np.asarray(drive, dtype=np.float64)
    m = drive.mean()
    if math.isinf(circuit.alpha):
        return circuit.b + drive - m
    return circuit.b + drive - m + m / (1.0 + circuit.alpha)


@dataclass
class RateSleepResult(SleepResult):
    frac_nonneg: float = 1.0   # presentations whose settled rates stayed >= 0


def rate_sleep_run(bundle: WeightBundle, circuit: RateCircuit, config: SleepConfig,
                   rng: RngStream, plasticity: str = "continuous",
                   rate_const: float = 2.0, reset_rates: bool = False,
                   mode: str = "ode") -> RateSleepResult:
    """Present config.iterations inputs through the circuit and adapt the
    bundle with the anti-Hebbian rule.

    mode "ode" integrates the rate equations (alpha = inf degenerates to
    the exactly-centered update applied at the same per-step gain, the
    settled limit of the circuit). mode "discrete" skips the ODE and
    applies the one-update-per-presentation finite-alpha rule, which is
    the same code path as the idealized runner.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if mode == "discrete":
        res = sleep_run(bundle, config, gen)
        return RateSleepResult(trajectory=res.trajectory, initial=res.initial,
                               bundle=res.bundle, frac_nonneg=1.0)
    if mode != "ode":
        raise ValueError(f"unknown mode {mode!r}")
    if plasticity not in ("continuous", "terminal"):
        raise ValueError(f"unknown plasticity {plasticity!r}")

    w = bundle.weights
    w0 = bundle.init
    n, d = bundle.n, bundle.d
    ideal = math.isinf(circuit.alpha)
    if not ideal:
        circuit.reset(n)
    steps = circuit.steps_per_presentation
    gain = rate_const * circuit.dt            # per-step plasticity gain
    traj = np.empty(config.iterations)
    initial = neg_log_snr(w)
    nonneg = 0
    for k in range(config.iterations):
        x = gen.normal(config.input_mean, config.input_std, size=d)
        eta = config.schedule(k)
        if ideal:
            # settled limit: exactly centered deviation, same step gain
            for _ in range(steps):
                if plasticity == "continuous":
                    z = w @ x
                    w -= eta * gain * ((z - z.mean())[:, None] * x[None, :] + config.gamma * (w - w0))
            if plasticity == "terminal":
                z = w @ x
                w -= eta * ((z - z.mean())[:, None] * x[None, :] + config.gamma * (w - w0))
            nonneg += 1
        else:
            if reset_rates:
                circuit.reset(n)
            for _ in range(steps):
                rate_step(circuit, w @ x)
                if plasticity == "continuous":
                    w -= eta * gain * ((circuit.r - circuit.b)[:, None] * x[None, :]
                                       + config.gamma * (w - w0))
            if plasticity == "terminal":
                w -= eta * ((circuit.r - circuit.b)[:, None] * x[None, :]
                            + config.gamma * (w - w0))
            if circuit.r.min() >= 0.0:
                nonneg += 1
        if not np.all(np.isfinite(w)):
            raise DivergenceError("non-finite weights in rate sleep run",
                                  f"presentation {k}")
        traj[k] = neg_log_snr(w)
    frac = nonneg / config.iterations if config.iterations else 1.0
    return RateSleepResult(trajectory=traj, initial=initial, bundle=bundle,
                           frac_nonneg=frac)
