"""Batch experiment front-end.

Configs are flat ``key = value`` text files (``#`` starts a comment) whose
keys mirror the command-line flags one to one; flags override file entries.
Every subcommand validates the full configuration before computing anything,
writes its CSV artifacts plus a matplotlib plot script (never executed) under
the output directory, prints a machine-parsable final ``RESULT`` line, and
exits 0 only when the requested acceptance bands hold (2 on study failure).
"""

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import ConfigError, SldgError
from .lab import (
    LabConfig,
    cost_rate_study,
    moment_bound_check,
    holder_continuity_study,
    spatial_order_study,
    temporal_order_study,
    write_report_csv,
)
from .ldg import LdgSolver, SchemeConfig, write_snapshot_csv, write_trajectory_csv
from .mesh import build_mesh
from .noise import NoiseSpec, kappa, sample_path, truncation_tail_moment
from .profiles import initial_profile, potential_profile

COMMANDS = ("run", "charge", "temporal-order", "spatial-order", "cost-rate",
            "regularity", "noise-check")

_INT_KEYS = {"j", "k", "modes", "samples", "seed"}
_FLOAT_KEYS = {"left", "right", "dt", "t_final", "decay", "amplitude"}
_STR_KEYS = {"cmd", "q", "out"}


@dataclass(frozen=True)
class RunConfig:
    cmd: str
    left: float = 0.0
    right: float = 1.0
    j: int = 32
    k: int = 1
    dt: float = 1e-3
    t_final: float = 1.0
    q: str = None          # constant value or 'cos'; default depends on command
    modes: int = 32
    decay: float = 4.0
    amplitude: float = 1.0
    samples: int = 100
    seed: int = None
    out: str = "sldg-out"

    def noise_spec(self):
        return NoiseSpec(self.left, self.right, self.modes, self.decay, self.amplitude)

    def lab_config(self, u0="modulated"):
        try:
            q = float(self.q)
        except (TypeError, ValueError):
            q = self.q
        return LabConfig(self.left, self.right, self.t_final, self.k, q,
                         self.modes, self.decay, self.amplitude, u0=u0,
                         n_x=256, seed=self.seed)


def _coerce(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"key '{key}': cannot parse {raw!r}") from None


def read_config_file(path):
    """Flat key=value file; unknown keys are rejected by name."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, raw = (part.strip() for part in text.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        out[key] = _coerce(key, raw)
    return out


def _validate(cfg):
    if cfg.cmd not in COMMANDS:
        raise ConfigError(f"key 'cmd': unknown subcommand {cfg.cmd!r}")
    if not (cfg.left < cfg.right):
        raise ConfigError("key 'left'/'right': domain is empty")
    if cfg.j < 2:
        raise ConfigError(f"key 'j': need at least 2 cells, got {cfg.j}")
    if cfg.k < 1:
        raise ConfigError(f"key 'k': polynomial degree must be >= 1, got {cfg.k}")
    if not (0.0 < cfg.dt < 1.0):
        raise ConfigError(f"key 'dt': must lie in (0, 1) so the truncation level "
                          f"is defined, got {cfg.dt}")
    if cfg.t_final <= 0:
        raise ConfigError(f"key 't_final': must be positive, got {cfg.t_final}")
    steps = cfg.t_final / cfg.dt
    if cfg.cmd in ("run", "charge") and abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ConfigError(f"key 'dt': t_final/dt = {steps} is not an integer")
    if cfg.modes < 1:
        raise ConfigError(f"key 'modes': need at least 1, got {cfg.modes}")
    if cfg.decay < 3.0:
        raise ConfigError(f"key 'decay': must be >= 3, got {cfg.decay}")
    if cfg.amplitude < 0:
        raise ConfigError(f"key 'amplitude': must be >= 0, got {cfg.amplitude}")
    if cfg.samples < 1:
        raise ConfigError(f"key 'samples': must be >= 1, got {cfg.samples}")
    potential_profile(cfg.q, cfg.left, cfg.right)  # raises ConfigError on bad q
    if cfg.cmd == "temporal-order":
        try:
            float(cfg.q)
        except (TypeError, ValueError):
            raise ConfigError("key 'q': temporal-order needs a constant potential "
                              f"value, got {cfg.q!r}") from None
    return cfg


def parse_config(argv):
    parser = argparse.ArgumentParser(
        prog="sldg",
        description="Experiments for the stochastic Schrodinger LDG solver.",
        epilog="Flags override config-file entries; SLDG_SEED is the seed "
               "fallback. Defaults: domain [0,1], j=32, k=1, dt=1e-3, "
               "t_final=1.0, q=cos (temporal-order: q=1), 32 noise modes with "
               "decay 4 and amplitude 1, 100 samples.",
    )
    parser.add_argument("cmd", nargs="?", choices=COMMANDS,
                        help="experiment to run (may also come from the config file)")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--left", type=float, help="left domain endpoint")
    parser.add_argument("--right", type=float, help="right domain endpoint")
    parser.add_argument("--j", type=int, help="number of mesh cells")
    parser.add_argument("--k", type=int, help="polynomial degree")
    parser.add_argument("--dt", type=float, help="time step")
    parser.add_argument("--t-final", dest="t_final", type=float, help="final time")
    parser.add_argument("--q", help="potential: constant value or 'cos'")
    parser.add_argument("--modes", type=int, help="noise mode count")
    parser.add_argument("--decay", type=float, help="noise eigenvalue decay exponent")
    parser.add_argument("--amplitude", type=float, help="noise amplitude")
    parser.add_argument("--samples", type=int, help="Monte-Carlo sample count")
    parser.add_argument("--seed", type=int, help="RNG seed (fallback: SLDG_SEED)")
    parser.add_argument("--out", help="output directory")
    args = parser.parse_args(argv)

    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in (f.name for f in fields(RunConfig)):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if args.cmd:
        values["cmd"] = args.cmd
    if not values.get("cmd"):
        raise ConfigError("key 'cmd': no subcommand given on the command line "
                          "or in the config file")
    if values.get("seed") is None:
        env_seed = os.environ.get("SLDG_SEED")
        values["seed"] = _coerce("seed", env_seed) if env_seed else 12345
    cfg = RunConfig(**values)
    if cfg.q is None:
        cfg = replace(cfg, q=("1.0" if cfg.cmd == "temporal-order" else "cos"))
    return _validate(cfg)


# -- artifact helpers --------------------------------------------------------

_REPORT_PLOT = """\
#!/usr/bin/env python3
\"\"\"Log-log convergence plot for {csv}; run manually, needs matplotlib.\"\"\"
import csv
import math
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{csv}")))
scale = [float(r["{xcol}"]) for r in rows]
err = [float(r["ms_error"]) for r in rows]
slope = rows[0]["slope"]
plt.loglog(scale, err, "ko-", label="measured")
if slope:
    s = float(slope)
    ref = [err[0] * (x / scale[0]) ** s for x in scale]
    plt.loglog(scale, ref, "k--", lw=0.8, label=f"slope {{s:.3f}}")
plt.xlabel("{xcol}")
plt.ylabel("rms error")
plt.grid(True, which="both", lw=0.3)
plt.legend()
plt.savefig("{png}", bbox_inches="tight", dpi=150)
print("wrote {png}")
"""

_TRAJ_PLOT = """\
#!/usr/bin/env python3
\"\"\"Charge drift plot for {csv}; run manually, needs matplotlib.\"\"\"
import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("{csv}")))
n = [int(r["n"]) for r in rows]
charge = [float(r["charge"]) for r in rows]
drift = [abs(c - charge[0]) / charge[0] for c in charge]
plt.semilogy(n[1:], drift[1:], "k-")
plt.xlabel("step")
plt.ylabel("relative charge drift")
plt.grid(True, which="both", lw=0.3)
plt.savefig("{png}", bbox_inches="tight", dpi=150)
print("wrote {png}")
"""


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _emit_report(cfg, report, stem, xcol):
    csv_path = os.path.join(cfg.out, f"{stem}.csv")
    with open(csv_path, "w") as fh:
        write_report_csv(report, fh)
    _write(os.path.join(cfg.out, f"plot_{stem}.py"),
           _REPORT_PLOT.format(csv=f"{stem}.csv", xcol=xcol, png=f"{stem}.png"))
    return csv_path


def _result(cmd, ok, **kv):
    parts = [f"RESULT cmd={cmd}"] + [f"{k}={v}" for k, v in kv.items()]
    parts.append(f"pass={1 if ok else 0}")
    print(" ".join(parts))
    return 0 if ok else 1


# -- subcommands ---------------------------------------------------------------

def _single_run(cfg):
    mesh = build_mesh(cfg.left, cfg.right, cfg.j)
    spec = cfg.noise_spec()
    scheme = SchemeConfig(mesh, cfg.k, cfg.dt, cfg.t_final,
                          potential_profile(cfg.q, cfg.left, cfg.right), spec)
    solver = LdgSolver(scheme)
    path = sample_path(spec, cfg.dt, scheme.n_steps, cfg.seed)
    u0 = scheme.initial_field(initial_profile("modulated", cfg.left, cfg.right))
    return solver.run(path, u0)


def _cmd_run(cfg):
    traj = _single_run(cfg)
    with open(os.path.join(cfg.out, "trajectory.csv"), "w") as fh:
        write_trajectory_csv(traj, cfg.dt, fh)
    with open(os.path.join(cfg.out, "snapshot.csv"), "w") as fh:
        write_snapshot_csv(traj.states[-1], fh)
    _write(os.path.join(cfg.out, "plot_trajectory.py"),
           _TRAJ_PLOT.format(csv="trajectory.csv", png="trajectory.png"))
    drift = np.abs(traj.charges - traj.charges[0]).max() / traj.charges[0]
    return _result("run", True, steps=traj.n_steps, charge_drift=f"{drift:.3e}",
                   wall_s=f"{traj.wall_time:.2f}")


def _cmd_charge(cfg):
    traj = _single_run(cfg)
    with open(os.path.join(cfg.out, "charge.csv"), "w") as fh:
        write_trajectory_csv(traj, cfg.dt, fh)
    _write(os.path.join(cfg.out, "plot_charge.py"),
           _TRAJ_PLOT.format(csv="charge.csv", png="charge.png"))
    rel = traj.charges / traj.charges[0]
    step_drift = float(np.abs(np.diff(rel)).max())
    cum_drift = float(np.abs(rel - 1.0).max())
    ok = step_drift <= 1e-10 and cum_drift <= 1e-8
    return _result("charge", ok, steps=traj.n_steps,
                   max_step_drift=f"{step_drift:.3e}",
                   max_cumulative_drift=f"{cum_drift:.3e}")


def _band_ok(report, lo, hi):
    b_lo, b_hi = report.slope_band
    return not (b_hi < lo or b_lo > hi)


def _cmd_temporal(cfg):
    dts = [2.0**-j for j in range(4, 9)]
    report = temporal_order_study(cfg.lab_config(), dts, cfg.samples,
                                  mode="commuting", c=0.5 * cfg.amplitude)
    _emit_report(cfg, report, "temporal_order", "dt")
    ok = _band_ok(report, 0.75, 1.25)
    return _result("temporal-order", ok, slope=f"{report.slope:.4f}",
                   slope_lo=f"{report.slope_band[0]:.4f}",
                   slope_hi=f"{report.slope_band[1]:.4f}", samples=cfg.samples)


def _cmd_spatial(cfg):
    if cfg.j < 16:
        raise ConfigError("key 'j': spatial-order needs j >= 16 for its "
                          "three-halving ladder")
    j_list = [cfg.j // 8, cfg.j // 4, cfg.j // 2, cfg.j]
    report = spatial_order_study(cfg.lab_config(u0="plane"), j_list, 1,
                                 mode="deterministic", dt=min(cfg.dt, 2e-3))
    _emit_report(cfg, report, "spatial_order", "h")
    lo, hi = cfg.k + 0.7, cfg.k + 1.3
    ok = report.slope is not None and lo <= report.slope <= hi
    return _result("spatial-order", ok, k=cfg.k, slope=f"{report.slope:.4f}",
                   target=f"{cfg.k + 1}")


def _cmd_cost(cfg):
    costs = [2**10, 2**12, 2**14]
    report = cost_rate_study(cfg.lab_config(u0="constant"), costs, cfg.samples)
    _emit_report(cfg, report, "cost_rate", "dt")
    target = report.aux["target_slope"]
    in_band = -0.75 <= report.slope <= -0.40
    soft = _band_ok(report, target, target)
    if not in_band and soft:
        print(f"warning: cost-rate slope {report.slope:.3f} outside band but its "
              f"2-sigma interval still contains {target:.3f}")
    return _result("cost-rate", in_band or soft, slope=f"{report.slope:.4f}",
                   target=f"{target:.4f}", soft=1 if (not in_band and soft) else 0)


def _cmd_regularity(cfg):
    dts = [2.0**-j for j in range(5, 10)]
    holder = holder_continuity_study(cfg.lab_config(u0="constant"), dts, cfg.samples)
    moment = moment_bound_check(cfg.lab_config(), max(2, cfg.samples // 2))
    _emit_report(cfg, holder, "regularity_holder", "dt")
    _emit_report(cfg, moment, "regularity_moment", "dt")
    holder_ok = _band_ok(holder, 0.75, 1.25)
    ok = holder_ok and moment.aux["bounded"]
    return _result("regularity", ok, holder_slope=f"{holder.slope:.4f}",
                   moment_ratio=f"{moment.aux['ratio']:.3f}")


def _cmd_noise_check(cfg):
    dts = [1e-1, 1e-2, 1e-3, 1e-4]
    rows = []
    for dt in dts:
        level = kappa(dt)
        tail1 = truncation_tail_moment(level, power=1)
        tail2 = dt**2 * truncation_tail_moment(level, power=2)
        rows.append((dt, level, tail1, dt**2, tail2, tail2 / dt**4))
    path = os.path.join(cfg.out, "noise_check.csv")
    with open(path, "w") as fh:
        fh.write("dt,kappa,tail_moment,bound,tail_moment_sq,ratio_to_dt4\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    ok = all(r[2] <= r[3] for r in rows)
    worst = max(r[2] / r[3] for r in rows)
    return _result("noise-check", ok, worst_ratio=f"{worst:.3e}")


_DISPATCH = {
    "run": _cmd_run,
    "charge": _cmd_charge,
    "temporal-order": _cmd_temporal,
    "spatial-order": _cmd_spatial,
    "cost-rate": _cmd_cost,
    "regularity": _cmd_regularity,
    "noise-check": _cmd_noise_check,
}


def dispatch(cfg):
    os.makedirs(cfg.out, exist_ok=True)
    return _DISPATCH[cfg.cmd](cfg)


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return dispatch(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SldgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"RESULT cmd={cfg.cmd} error=1 pass=0")
        return 2


if __name__ == "__main__":
    sys.exit(main())
