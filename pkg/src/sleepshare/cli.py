"""Command-line entry point: every experiment is a subcommand that emits
CSV files plus a manifest sufficient to reproduce the run.

Config precedence: built-in defaults < config file (flat key=value
lines) < command-line flags. The fully resolved config is echoed into
the manifest; --replay points at a previous manifest and reruns it.

Exit codes: 0 success, 2 usage error, 3 numerical divergence or
singularity, 4 tolerance breach.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import ratecircuit, sharing, trainer
from .errors import DivergenceError, SingularMatrixError, ToleranceError
from .mathcore import RngStream
from .sharing import Schedule, SleepConfig, WeightBundle

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3
EXIT_TOLERANCE = 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config plumbing


def _float_list(s):
    return [float(v) for v in str(s).split(",") if v != ""]


def _int_list(s):
    return [int(v) for v in str(s).split(",") if v != ""]


def _str_list(s):
    return [v for v in str(s).split(",") if v != ""]


def _bool(s):
    if isinstance(s, bool):
        return s
    if str(s).lower() in ("1", "true", "yes"):
        return True
    if str(s).lower() in ("0", "false", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


COMMON_SPEC = {
    "seed": (int, 0),
    "jobs": (int, 1),
}

SLEEP_IDEAL_SPEC = {
    **COMMON_SPEC,
    "n": (int, 100),
    "k": (_int_list, [3, 6, 9]),
    "gamma": (_float_list, [1e-2, 1e-3]),
    "iters": (int, 2000),
    "seeds": (int, 10),
    "schedule": (str, "inverse_time"),
    "eta_a": (float, 0.5),
    "eta_b": (float, 1000.0),
    "warmup": (int, 0),
    "momentum": (float, 0.95),
    "input_mean": (float, 1.0),
    "input_std": (float, 1.0),
    "init_mean": (float, 1.0),
    "init_std": (float, 1.0),
    "sigma": (float, 0.0),
    "alpha": (float, math.inf),
}

SLEEP_RATE_SPEC = {
    **SLEEP_IDEAL_SPEC,
    "alpha": (float, 10.0),
    "tau_ms": (float, 30.0),
    "dt_ms": (float, 1.0),
    "present_ms": (float, 150.0),
    "iters": (int, 10000),
    "mode": (str, "ode"),
    "plasticity": (str, "continuous"),
    "rate_const": (float, 2.0),
    "reset_rates": (_bool, False),
    "bias": (float, 1.0),
    "schedule": (str, "inverse_sqrt"),
    "eta_a": (float, 3e-4),
    "eta_b": (float, 2.0),
    "warmup": (int, 50),
    "momentum": (float, 0.0),
}

FIXED_POINT_SPEC = {
    **COMMON_SPEC,
    "instances": (int, 50),
    "n_max": (int, 20),
    "d_max": (int, 16),
    "m_factor": (int, 2),
    "gamma": (_float_list, [1e-1, 1e-3]),
    "alpha": (float, 10.0),
    "tol": (float, 1e-4),
}

NOISE_FLOOR_SPEC = {
    **COMMON_SPEC,
    "n": (int, 20),
    "d": (int, 9),
    "m": (int, 18),
    "gamma": (float, 10.0),
    "sigma": (_float_list, [0.1, 0.2, 0.4]),
    "seeds": (int, 10),
    "a": (float, 16.0),
    "b": (float, 200.0),
    "iters": (int, 300),
    "slope_a": (float, 0.034),
    "slope_b": (float, 50.0),
    "slope_iters": (int, 3000),
    "w_init_mean": (float, 0.0),
    "w_init_std": (float, 1.0),
    "input_mean": (float, 1.0),
    "input_std": (float, 1.0),
}

TRAIN_SPEC = {
    **COMMON_SPEC,
    "arm": (str, "lc"),
    "train_size": (int, 512),
    "test_size": (int, 2048),
    "image": (int, 16),
    "noise": (float, 0.15),
    "channels": (int, 8),
    "kernel": (int, 3),
    "epochs": (int, 60),
    "batch_size": (int, 64),
    "lr": (float, 3e-3),
    "weight_decay": (float, 1e-4),
    "reps": (int, 16),
    "ws_every": (int, 1),
    "pad": (int, 4),
    "optimizer": (str, "adamw"),
    "share_mode": (str, "instant"),
    "share_iters": (int, 180),
    "val_fraction": (float, 0.0),
    "idx_images": (str, ""),
    "idx_labels": (str, ""),
}

COMPARE_SPEC = {
    **TRAIN_SPEC,
    "arms": (_str_list, ["conv", "lc", "lc-reps:16", "lc-ws:1"]),
    "seeds": (int, 3),
    "full": (_bool, False),
}
COMPARE_SPEC.pop("arm")

SPECS = {
    "sleep-ideal": SLEEP_IDEAL_SPEC,
    "sleep-rate": SLEEP_RATE_SPEC,
    "fixed-point": FIXED_POINT_SPEC,
    "noise-floor": NOISE_FLOOR_SPEC,
    "train": TRAIN_SPEC,
    "compare": COMPARE_SPEC,
}

FULL_MATRIX = ["conv", "lc", "lc-reps:4", "lc-reps:8", "lc-reps:16",
               "lc-ws:1", "lc-ws:10", "lc-ws:100"]


def _parse_kv_file(path: str) -> Dict[str, str]:
    out: Dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"bad config line (need key=value): {line!r}")
        key, val = line.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _load_replay(path: str, subcommand: str) -> Dict[str, str]:
    raw = _parse_kv_file(path)
    if raw.get("subcommand", subcommand) != subcommand:
        raise UsageError(
            f"manifest is for {raw.get('subcommand')!r}, not {subcommand!r}")
    cfg = {k[4:]: v for k, v in raw.items() if k.startswith("cfg.")}
    if "seed" in raw:
        cfg["seed"] = raw["seed"]
    return cfg


def resolve_config(subcommand: str, cli_values: Dict[str, object],
                   config_file: Optional[str], replay: Optional[str]) -> Dict[str, object]:
    spec = SPECS[subcommand]
    if config_file and replay:
        raise UsageError("--config and --replay are mutually exclusive")
    resolved = {k: default for k, (_, default) in spec.items()}
    layered: Dict[str, str] = {}
    if config_file:
        layered = _parse_kv_file(config_file)
    elif replay:
        layered = _load_replay(replay, subcommand)
    for key, val in layered.items():
        if key not in spec:
            raise UsageError(f"unknown config key {key!r} for {subcommand}")
        try:
            resolved[key] = spec[key][0](val)
        except ValueError as e:
            raise UsageError(f"bad value for {key}: {e}")
    for key, val in cli_values.items():
        if val is not None:
            try:
                resolved[key] = spec[key][0](val)
            except ValueError as e:
                raise UsageError(f"bad value for --{key.replace('_', '-')}: {e}")
    return resolved


def _fmt_value(v) -> str:
    if isinstance(v, list):
        return ",".join(str(x) for x in v)
    return str(v)


class RunDir:
    """Owns a run's output directory, tracks artifacts, writes the manifest."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)
        self.artifacts: List[str] = []
        self.t0 = time.time()

    def write_csv(self, name: str, header: str, rows) -> Path:
        lines = [header]
        for row in rows:
            lines.append(",".join(_csv_cell(v) for v in row))
        return self.write_text(name, "\n".join(lines) + "\n")

    def write_text(self, name: str, text: str) -> Path:
        p = self.path / name
        p.write_text(text)
        if name not in self.artifacts:
            self.artifacts.append(name)
        return p

    def finish(self, subcommand: str, cfg: Dict[str, object]) -> Path:
        lines = [f"subcommand={subcommand}", f"seed={cfg.get('seed', 0)}"]
        for key in sorted(cfg):
            if key == "seed":
                continue
            lines.append(f"cfg.{key}={_fmt_value(cfg[key])}")
        lines.append(f"duration_s={time.time() - self.t0:.3f}")
        for name in sorted(self.artifacts):
            digest = hashlib.sha256((self.path / name).read_bytes()).hexdigest()
            lines.append(f"sha256.{name}={digest}")
        p = self.path / "manifest.txt"
        p.write_text("\n".join(lines) + "\n")
        return p


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _run_cells(cells, fn, jobs: int):
    if jobs <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, cells))


def _schedule_from_cfg(cfg) -> Schedule:
    return Schedule(kind=cfg["schedule"], a=cfg["eta_a"], b=cfg["eta_b"],
                    warmup=cfg["warmup"])


def _gamma_key(gamma: float) -> int:
    return int(round(gamma * 1e9))


# ---------------------------------------------------------------------------
# sleep-ideal and sleep-rate


def _sleep_cell(cfg, out: RunDir, k: int, gamma: float, seed_idx: int,
                rate: bool) -> Tuple[int, float, int, float]:
    """One (k, gamma, seed) run; returns the summary row."""
    stream = RngStream(cfg["seed"], (7, k, _gamma_key(gamma), seed_idx))
    gen = stream.generator()
    bundle = WeightBundle.from_rng(gen, cfg["n"], k * k,
                                   mean=cfg["init_mean"], std=cfg["init_std"])
    sleep_cfg = SleepConfig(
        gamma=gamma, schedule=_schedule_from_cfg(cfg), iterations=cfg["iters"],
        momentum=cfg["momentum"], input_mean=cfg["input_mean"],
        input_std=cfg["input_std"], sigma=cfg["sigma"], alpha=cfg["alpha"],
    )
    if not rate or cfg["mode"] == "discrete":
        if rate:
            result = ratecircuit.rate_sleep_run(
                bundle, _circuit(cfg), sleep_cfg, gen, mode="discrete")
        else:
            result = sharing.sleep_run(bundle, sleep_cfg, gen)
    else:
        result = ratecircuit.rate_sleep_run(
            bundle, _circuit(cfg), sleep_cfg, gen,
            plasticity=cfg["plasticity"], rate_const=cfg["rate_const"],
            reset_rates=cfg["reset_rates"], mode="ode")
    name = f"traj_k{k}_g{gamma:g}_s{seed_idx}.csv"
    if cfg["iters"] > 0:
        rows = [(i, float(v), -1) for i, v in enumerate(result.trajectory)]
        out.write_csv(name, "iteration,neg_log_snr,grid", rows)
        if rate:
            out.write_text(name.replace(".csv", ".meta"),
                           f"alpha={cfg['alpha']}\ntau_ms={cfg['tau_ms']}\ndt_ms={cfg['dt_ms']}\n")
    return (k, gamma, seed_idx, result.terminal)


def _circuit(cfg) -> ratecircuit.RateCircuit:
    return ratecircuit.RateCircuit(tau=cfg["tau_ms"], alpha=cfg["alpha"],
                                   b=cfg["bias"], dt=cfg["dt_ms"],
                                   present_ms=cfg["present_ms"])


def _cmd_sleep(cfg: Dict[str, object], out: RunDir, rate: bool) -> int:
    # a discrete-mode alpha=inf rate run takes the identical path (same
    # streams, same runner) as the idealized command, so the CSVs match
    cells = [(k, g, s) for k in cfg["k"] for g in cfg["gamma"]
             for s in range(cfg["seeds"])]

    def run(cell):
        k, g, s = cell
        return _sleep_cell(cfg, out, k, g, s, rate)

    rows = _run_cells(cells, run, cfg["jobs"])
    summary = [(k, g, s, term, sharing.neg_log_snr_floor(g))
               for (k, g, s, term) in rows]
    out.write_csv("summary.csv",
                  "k,gamma,seed,terminal_neg_log_snr,neg_log_snr_floor", summary)
    return EXIT_OK


def cmd_sleep_ideal(cfg, out: RunDir) -> int:
    return _cmd_sleep(cfg, out, rate=False)


def cmd_sleep_rate(cfg, out: RunDir) -> int:
    if cfg["mode"] not in ("ode", "discrete"):
        raise UsageError(f"mode must be ode or discrete, got {cfg['mode']!r}")
    # constructing a circuit validates dt <= tau/10 and present_ms/dt
    try:
        _circuit(cfg)
    except ValueError as e:
        raise UsageError(str(e))
    return _cmd_sleep(cfg, out, rate=True)


# ---------------------------------------------------------------------------
# fixed-point


def cmd_fixed_point(cfg, out: RunDir) -> int:
    gammas = cfg["gamma"]
    worst_plain = 0.0
    worst_biased = 0.0
    report: List[str] = []
    for i in range(cfg["instances"]):
        gen = RngStream(cfg["seed"], (13, i)).generator()
        n = int(gen.integers(2, cfg["n_max"] + 1))
        d = int(gen.integers(2, cfg["d_max"] + 1))
        m = cfg["m_factor"] * d
        gamma = gammas[i % len(gammas)]
        w0 = gen.normal(1.0, 1.0, size=(n, d))
        if gamma <= 0:
            # deliberately rank-deficient: fewer inputs than dimensions
            x_sing = gen.normal(1.0, 1.0, size=(max(1, d // 2), d))
            sharing.fixed_point(w0, x_sing, gamma)  # raises SingularMatrixError
            continue
        x = gen.normal(1.0, 1.0, size=(m, d))
        w_solve = sharing.fixed_point(w0, x, gamma)
        w_desc = sharing.full_batch_descent(w0, x, gamma)
        rel = float(np.linalg.norm(w_desc - w_solve) / np.linalg.norm(w_solve))
        worst_plain = max(worst_plain, rel)
        wb_solve = sharing.biased_fixed_point(w0, x, gamma, cfg["alpha"])
        wb_desc = sharing.full_batch_descent(w0, x, gamma, alpha=cfg["alpha"])
        relb = float(np.linalg.norm(wb_desc - wb_solve) / np.linalg.norm(wb_solve))
        worst_biased = max(worst_biased, relb)
    report.append(f"instances={cfg['instances']}")
    report.append(f"max_rel_error_descent_vs_solve={worst_plain:.3e}")
    report.append(f"max_rel_error_biased_alpha{cfg['alpha']:g}={worst_biased:.3e}")
    report.append(f"tol={cfg['tol']:g}")
    text = "\n".join(report)
    print(text)
    out.write_text("report.txt", text + "\n")
    if worst_plain > 1e-6 or worst_biased > cfg["tol"]:
        raise ToleranceError(
            f"fixed-point mismatch above tolerance (plain {worst_plain:.3e}, "
            f"biased {worst_biased:.3e})", max(worst_plain, worst_biased))
    return EXIT_OK


# ---------------------------------------------------------------------------
# noise-floor


def cmd_noise_floor(cfg, out: RunDir) -> int:
    slope_cells = list(range(cfg["seeds"]))

    def run_slope(s):
        stream = RngStream(cfg["seed"], (11, 0, s))
        res = sharing.noise_floor_run(
            cfg["n"], cfg["d"], cfg["m"], cfg["gamma"], 0.0,
            cfg["slope_a"], cfg["slope_b"], cfg["slope_iters"], stream,
            w_init_mean=cfg["w_init_mean"], w_init_std=cfg["w_init_std"],
            input_mean=cfg["input_mean"], input_std=cfg["input_std"])
        rows = [(i, float(v)) for i, v in enumerate(res.dist_sq)]
        out.write_csv(f"traj_sigma0_s{s}.csv", "iteration,dist_sq", rows)
        return sharing.loglog_slope(res.dist_sq)

    slopes = _run_cells(slope_cells, run_slope, cfg["jobs"])
    out.write_csv("slopes.csv", "seed,loglog_slope",
                  [(s, sl) for s, sl in enumerate(slopes)])

    plateau_cells = [(sig, s) for sig in cfg["sigma"] for s in range(cfg["seeds"])]

    def run_plateau(cell):
        sig, s = cell
        stream = RngStream(cfg["seed"], (11, _gamma_key(sig), s))
        res = sharing.noise_floor_run(
            cfg["n"], cfg["d"], cfg["m"], cfg["gamma"], sig,
            cfg["a"], cfg["b"], cfg["iters"], stream,
            w_init_mean=cfg["w_init_mean"], w_init_std=cfg["w_init_std"],
            input_mean=cfg["input_mean"], input_std=cfg["input_std"])
        rows = [(i, float(v)) for i, v in enumerate(res.dist_sq)]
        out.write_csv(f"traj_sigma{sig:g}_s{s}.csv", "iteration,dist_sq", rows)
        return res.plateau

    plateaus = _run_cells(plateau_cells, run_plateau, cfg["jobs"])
    by_sigma = {}
    for (sig, s), plat in zip(plateau_cells, plateaus):
        by_sigma.setdefault(sig, []).append(plat)
    summary = []
    report = [f"slope range over seeds: [{min(slopes):.3f}, {max(slopes):.3f}]"]
    prev = None
    for sig in cfg["sigma"]:
        mean_plat = float(np.mean(by_sigma[sig]))
        ratio = "" if prev is None else f"{mean_plat / prev:.6g}"
        summary.append((f"{sig:g}", f"{mean_plat:.12g}", ratio))
        if prev is not None:
            report.append(f"plateau ratio sigma {sig:g} vs previous: {mean_plat / prev:.3f}")
        prev = mean_plat
    out.write_csv("summary.csv", "sigma,plateau_mean,ratio_to_prev", summary)
    text = "\n".join(report)
    print(text)
    out.write_text("report.txt", text + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train and compare


def _write_history(out: RunDir, prefix: str, history: trainer.TrainHistory) -> None:
    out.write_csv(f"{prefix}metrics.csv", "epoch,split,accuracy_top1,loss",
                  [(e, s, a, l) for (e, s, a, l) in history.metrics])
    out.write_csv(f"{prefix}events.csv", "event,layer,neg_log_snr_pre,neg_log_snr_post",
                  [(b, n, pre, post) for (b, n, pre, post) in history.events])


def _experiment_kwargs(cfg) -> Dict[str, object]:
    return dict(
        train_size=cfg["train_size"], test_size=cfg["test_size"],
        image=cfg["image"], noise=cfg["noise"], channels=cfg["channels"],
        kernel=cfg["kernel"], epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        lr=cfg["lr"], weight_decay=cfg["weight_decay"], optimizer=cfg["optimizer"],
        share_mode=cfg["share_mode"], share_iters=cfg["share_iters"],
        val_fraction=cfg["val_fraction"],
        idx_images=cfg["idx_images"] or None, idx_labels=cfg["idx_labels"] or None,
    )


def _parse_arm(spec: str) -> Tuple[str, int]:
    if ":" in spec:
        arm, param = spec.split(":", 1)
        try:
            value = int(param)
        except ValueError:
            raise UsageError(f"bad arm parameter in {spec!r}")
    else:
        arm, value = spec, 0
    if arm not in ("conv", "lc", "lc-reps", "lc-ws"):
        raise UsageError(f"unknown arm {arm!r}")
    return arm, value


def cmd_train(cfg, out: RunDir) -> int:
    arm, param = _parse_arm(cfg["arm"])
    kwargs = _experiment_kwargs(cfg)
    kwargs["reps"] = param or cfg["reps"]
    kwargs["ws_every"] = param or cfg["ws_every"]
    kwargs["pad"] = cfg["pad"]
    history = trainer.run_experiment(arm, cfg["seed"], **kwargs)
    _write_history(out, "", history)
    print(f"{cfg['arm']} seed {cfg['seed']}: final test accuracy "
          f"{history.final_test_accuracy:.3f}")
    return EXIT_OK


def cmd_compare(cfg, out: RunDir) -> int:
    arms = FULL_MATRIX if cfg["full"] else cfg["arms"]
    cells = [(a, s) for a in arms for s in range(cfg["seeds"])]

    def run(cell):
        arm_spec, s = cell
        arm, param = _parse_arm(arm_spec)
        kwargs = _experiment_kwargs(cfg)
        kwargs["reps"] = param or cfg["reps"]
        kwargs["ws_every"] = param or cfg["ws_every"]
        kwargs["pad"] = cfg["pad"]
        history = trainer.run_experiment(arm, cfg["seed"] + s, **kwargs)
        tag = arm_spec.replace(":", "")
        _write_history(out, f"{tag}_s{s}_", history)
        return history.final_test_accuracy

    accs = _run_cells(cells, run, cfg["jobs"])
    acc_by_arm: Dict[str, List[float]] = {}
    rows = []
    for (arm_spec, s), acc in zip(cells, accs):
        rows.append((arm_spec, s, acc))
        acc_by_arm.setdefault(arm_spec, []).append(acc)
    out.write_csv("summary.csv", "arm,seed,test_accuracy_top1", rows)
    means = {a: float(np.mean(v)) for a, v in acc_by_arm.items()}
    report = [f"mean {a}: {m:.4f}" for a, m in means.items()]
    checks = _ordering_checks(means)
    report += checks
    text = "\n".join(report)
    print(text)
    out.write_text("report.txt", text + "\n")
    return EXIT_OK


def _ordering_checks(means: Dict[str, float]) -> List[str]:
    out = []

    def check(label: str, ok: Optional[bool]):
        if ok is None:
            return
        out.append(f"ordering {label}: {'PASS' if ok else 'FAIL'}")

    conv = means.get("conv")
    lc = means.get("lc")
    if conv is not None and lc is not None:
        check(f"conv ({conv:.3f}) > lc ({lc:.3f})", conv > lc)
        ws = next((v for a, v in means.items() if a.startswith("lc-ws")), None)
        if ws is not None:
            mid = lc + 0.5 * (conv - lc)
            check(f"lc-ws ({ws:.3f}) >= midpoint ({mid:.3f})", ws >= mid)
    reps = next((v for a, v in means.items() if a.startswith("lc-reps")), None)
    if reps is not None and lc is not None:
        check(f"lc-reps ({reps:.3f}) > lc ({lc:.3f})", reps > lc)
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _add_flags(p: argparse.ArgumentParser, spec) -> None:
    for key in spec:
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, default=None, metavar="V")
    p.add_argument("--out", default=None, metavar="DIR")
    p.add_argument("--config", default=None, metavar="FILE")
    p.add_argument("--replay", default=None, metavar="MANIFEST")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sleepshare",
        description="Weight-equalization experiments for locally connected layers.")
    sub = p.add_subparsers(dest="subcommand", required=True)
    helps = {
        "sleep-ideal": "idealized equalization sweeps over (k, gamma, seed)",
        "sleep-rate": "rate-circuit equalization (ODE or discrete updates)",
        "fixed-point": "closed-form vs simulated stationary weights",
        "noise-floor": "decay-rate and noise-plateau measurements",
        "train": "one desk-scale training arm",
        "compare": "the arm matrix with an ordering summary",
    }
    for name, spec in SPECS.items():
        _add_flags(sub.add_parser(name, help=helps[name]), spec)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else EXIT_OK
    sub = args.subcommand
    spec = SPECS[sub]
    cli_values = {k: getattr(args, k) for k in spec}
    try:
        cfg = resolve_config(sub, cli_values, args.config, args.replay)
    except (UsageError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    out = RunDir(Path(args.out) if args.out else Path("runs") / sub)
    handler = {
        "sleep-ideal": cmd_sleep_ideal,
        "sleep-rate": cmd_sleep_rate,
        "fixed-point": cmd_fixed_point,
        "noise-floor": cmd_noise_floor,
        "train": cmd_train,
        "compare": cmd_compare,
    }[sub]
    try:
        code = handler(cfg, out)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DivergenceError, SingularMatrixError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        out.finish(sub, cfg)
        return EXIT_DIVERGENCE
    except ToleranceError as e:
        print(f"tolerance breach: {e}", file=sys.stderr)
        out.finish(sub, cfg)
        return EXIT_TOLERANCE
    out.finish(sub, cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
