import math

import numpy as np
import pytest

import sleepshare as ss
from sleepshare.errors import DivergenceError
from sleepshare.mathcore import RngStream


def make_circuit(**kw):
    args = dict(tau=30.0, alpha=10.0, b=1.0, dt=1.0, present_ms=150.0)
    args.update(kw)
    return ss.RateCircuit(**args)


def test_constructor_validation():
    with pytest.raises(ValueError):
        make_circuit(tau=0.0)
    with pytest.raises(ValueError):
        make_circuit(dt=-1.0)
    with pytest.raises(ValueError):
        make_circuit(dt=4.0)  # > tau/10
    with pytest.raises(ValueError):
        make_circuit(present_ms=151.5)


def test_steps_per_presentation():
    assert make_circuit().steps_per_presentation == 150
    assert make_circuit(dt=3.0, present_ms=150.0).steps_per_presentation == 50


def test_rate_step_rejects_infinite_alpha():
    c = make_circuit(alpha=math.inf)
    c.reset(4)
    with pytest.raises(ValueError):
        ss.rate_step(c, np.ones(4))


def test_fixed_point_formula():
    c = make_circuit(alpha=10.0, b=0.5)
    drive = np.array([3.0, 1.0, 2.0])
    m = 2.0
    expect = 0.5 + drive - m + m / 11.0
    assert np.abs(ss.rate_fixed_point(c, drive) - expect).max() < 1e-15
    c_inf = make_circuit(alpha=math.inf, b=0.5)
    assert np.abs(ss.rate_fixed_point(c_inf, drive) - (0.5 + drive - m)).max() < 1e-15


def test_fixed_point_is_stationary():
    c = make_circuit()
    drive = np.array([2.0, -1.0, 0.5, 4.0])
    c.reset(4)
    c.r = ss.rate_fixed_point(c, drive)
    c.r_inh = drive.mean() / (1.0 + c.alpha)
    before = c.r.copy()
    ss.rate_step(c, drive)
    assert np.abs(c.r - before).max() < 1e-12


def test_settles_from_reset():
    c = make_circuit(present_ms=900.0)  # 30 tau
    drive = np.array([2.0, -1.0, 0.5, 4.0])
    c.reset(4)
    for _ in range(c.steps_per_presentation):
        ss.rate_step(c, drive)
    assert np.abs(c.r - ss.rate_fixed_point(c, drive)).max() < 1e-9


def test_divergence_reports_sim_time():
    c = make_circuit()
    c.reset(3)
    with pytest.raises(DivergenceError) as exc:
        ss.rate_step(c, np.array([np.inf, 0.0, 0.0]))
    assert "ms" in str(exc.value)


def test_settled_deviation_matches_biased_update():
    # after a long presentation the settled rule equals one biased step
    gen = RngStream(0, (40,)).generator()
    bundle = ss.WeightBundle.from_rng(gen, 12, 9)
    twin = ss.WeightBundle(bundle.weights.copy(), bundle.init.copy())
    x = gen.normal(1.0, 1.0, 9)

    c = make_circuit(present_ms=900.0)
    cfg = ss.SleepConfig(gamma=1e-2, schedule=ss.Schedule("constant", 1e-3),
                         iterations=1, alpha=10.0)
    fixed_gen = FixedDraw(x)
    ss.rate_sleep_run(bundle, c, cfg, fixed_gen, plasticity="terminal")

    ss.sleep_step(twin, x, gamma=1e-2, eta=1e-3, alpha=10.0)
    assert np.abs(bundle.weights - twin.weights).max() < 1e-6


class FixedDraw:
    """Stands in for a Generator, returning a fixed vector once."""

    def __init__(self, x):
        self.x = x

    def normal(self, mean, std, size):
        assert size == self.x.shape[0]
        return self.x.copy()


def test_discrete_mode_matches_ideal_runner():
    def fresh():
        g = RngStream(7, (41,)).generator()
        return ss.WeightBundle.from_rng(g, 30, 9), g

    cfg = ss.SleepConfig(gamma=1e-2,
                         schedule=ss.Schedule("inverse_time", 0.5, 1000.0),
                         iterations=200, momentum=0.95, alpha=10.0)
    b1, g1 = fresh()
    res_rate = ss.rate_sleep_run(b1, make_circuit(), cfg, g1, mode="discrete")
    b2, g2 = fresh()
    res_ideal = ss.sleep_run(b2, cfg, g2)
    assert np.array_equal(res_rate.trajectory, res_ideal.trajectory)
    assert np.array_equal(b1.weights, b2.weights)
    assert res_rate.frac_nonneg == 1.0


def test_mode_and_plasticity_validation():
    gen = np.random.default_rng(0)
    bundle = ss.WeightBundle.from_rng(gen, 5, 4)
    cfg = ss.SleepConfig(gamma=1e-2, schedule=ss.Schedule("constant", 1e-4),
                         iterations=1)
    with pytest.raises(ValueError):
        ss.rate_sleep_run(bundle, make_circuit(), cfg, gen, mode="euler")
    with pytest.raises(ValueError):
        ss.rate_sleep_run(bundle, make_circuit(), cfg, gen, plasticity="batch")


def test_frac_nonneg_accounting():
    # equalized weights leave every settled rate at the bias, so the
    # nonnegative fraction is 1; a huge spread drives rates negative
    cfg = ss.SleepConfig(gamma=1e-3,
                         schedule=ss.Schedule("constant", 1e-6),
                         iterations=20, alpha=10.0)

    w = np.ones((40, 9))
    res = ss.rate_sleep_run(ss.WeightBundle(w.copy(), w.copy()),
                            make_circuit(b=1.0), cfg,
                            RngStream(0, (42,)).generator())
    assert res.frac_nonneg == 1.0
    assert len(res.trajectory) == 20

    gen = RngStream(0, (42,)).generator()
    wide = ss.WeightBundle.from_rng(gen, 40, 9, mean=0.0, std=50.0)
    res_wide = ss.rate_sleep_run(wide, make_circuit(b=1.0), cfg, gen)
    assert res_wide.frac_nonneg < 0.5


def test_reset_rates_changes_trajectory():
    def run(reset):
        g = RngStream(3, (43,)).generator()
        b = ss.WeightBundle.from_rng(g, 20, 9)
        cfg = ss.SleepConfig(gamma=1e-3,
                             schedule=ss.Schedule("constant", 1e-3),
                             iterations=15, alpha=10.0)
        return ss.rate_sleep_run(b, make_circuit(), cfg, g, reset_rates=reset)

    assert not np.array_equal(run(True).trajectory, run(False).trajectory)


def test_ideal_ode_tracks_discrete_shape():
    # alpha = inf ode path applies the centered update in micro-steps;
    # trajectory must fall toward the floor like the discrete rule does
    gen = RngStream(0, (44,)).generator()
    bundle = ss.WeightBundle.from_rng(gen, 60, 9)
    cfg = ss.SleepConfig(gamma=1e-2,
                         schedule=ss.Schedule("inverse_sqrt", 3e-4, 2.0, warmup=10),
                         iterations=300, alpha=math.inf)
    res = ss.rate_sleep_run(bundle, make_circuit(alpha=math.inf), cfg, gen)
    assert res.trajectory[-1] < res.initial - 2.0
