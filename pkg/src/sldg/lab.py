"""Monte-Carlo estimation of mean-square errors and the convergence experiments.

Every stochastic estimate carries a standard error; order fits report a slope
with a 2-sigma band. Brownian paths are coupled across resolutions by
sampling a master path on the finest grid and aggregating it, so refinement
studies compare solutions driven by the same realisation of the noise.
Failed samples abort a study (silently dropping them would bias the
mean-square estimates).
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, SolverError
from .ldg import LdgSolver, SchemeConfig
from .mesh import build_mesh, l2_norm
from .noise import IncrementField, NoiseSpec, coarsen_path, sample_path
from .profiles import initial_profile, potential_profile
from .spectral import (
    SpectralSolver,
    commuting_exact,
    l2_error_to_reference,
    spectral_h1_norm,
    spectral_l2_norm,
    state_from_callable,
)


@dataclass(frozen=True)
class LabConfig:
    """Shared experiment parameters (per-study knobs are function arguments)."""

    left: float = 0.0
    right: float = 1.0
    t_final: float = 0.5
    degree: int = 1
    q: object = 1.0            # number (constant) or profile name, see profiles
    noise_modes: int = 32
    noise_decay: float = 4.0
    noise_amplitude: float = 1.0
    u0: str = "modulated"
    n_x: int = 256             # spectral reference resolution
    seed: int = 20240

    def noise_spec(self, amplitude=None):
        amp = self.noise_amplitude if amplitude is None else amplitude
        return NoiseSpec(self.left, self.right, self.noise_modes,
                         self.noise_decay, amp)

    def potential(self):
        return potential_profile(self.q, self.left, self.right)

    def initial(self, name=None):
        return initial_profile(name or self.u0, self.left, self.right)


@dataclass
class StudyRow:
    resolution: str
    h: float
    dt: float
    n_samples: int
    ms_error: float            # root of the mean-square error
    stderr: float              # delta-method stderr of the root (inf for M=1)
    extra: dict = field(default_factory=dict)


@dataclass
class ErrorReport:
    experiment: str
    rows: list
    slope: float = None
    slope_stderr: float = None
    fit_residual: float = None
    wall_time: float = 0.0
    aux: dict = field(default_factory=dict)

    @property
    def slope_band(self):
        """(lo, hi) of the 2-sigma slope band; (nan, nan) without a fit."""
        if self.slope is None:
            return (math.nan, math.nan)
        se = self.slope_stderr if self.slope_stderr is not None else 0.0
        return (self.slope - 2.0 * se, self.slope + 2.0 * se)


def write_report_csv(report, stream):
    stream.write("experiment,resolution,h,dt,M,ms_error,stderr,slope,slope_lo,slope_hi\n")
    lo, hi = report.slope_band
    slope = report.slope if report.slope is not None else math.nan

    def fmt(x):
        return f"{x:.17g}" if x == x else ""  # blank for nan

    for row in report.rows:
        stream.write(
            f"{report.experiment},{row.resolution},{fmt(row.h)},{fmt(row.dt)},"
            f"{row.n_samples},{fmt(row.ms_error)},{fmt(row.stderr)},"
            f"{fmt(slope)},{fmt(lo)},{fmt(hi)}\n"
        )


# -- estimators ---------------------------------------------------------------

def _rms_from_squares(squares):
    squares = np.asarray(squares, dtype=np.float64)
    if squares.size == 0:
        raise ParameterError("no samples")
    mean_sq = float(squares.mean())
    rms = math.sqrt(mean_sq)
    if squares.size < 2:
        return rms, math.inf
    se_mean = float(squares.std(ddof=1)) / math.sqrt(squares.size)
    se_rms = se_mean / (2.0 * rms) if rms > 0 else se_mean
    return rms, se_rms


def ms_error(pairs):
    """Root mean-square L2 distance over (approx, reference) DG field pairs."""
    if not pairs:
        raise ParameterError("ms_error needs at least one pair")
    return _rms_from_squares([l2_norm(a - b) ** 2 for a, b in pairs])


def fit_order(points):
    """Least-squares slope of log(error) against log(scale)."""
    if len(points) < 3:
        raise ParameterError(f"order fit needs >= 3 points, got {len(points)}")
    scales = np.array([p[0] for p in points], dtype=np.float64)
    errors = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(scales <= 0) or np.any(errors <= 0):
        raise ParameterError("order fit needs positive scales and errors")
    slope, _, _ = _fit_loglog(scales, errors)
    return slope


def _fit_loglog(scales, errors, stderrs=None):
    """Slope, its standard error and the rms fit residual on log-log axes."""
    x = np.log(np.asarray(scales, dtype=np.float64))
    y = np.log(np.asarray(errors, dtype=np.float64))
    sigma = None
    if stderrs is not None:
        rel = np.asarray(stderrs, dtype=np.float64) / np.asarray(errors, dtype=np.float64)
        if np.all(np.isfinite(rel)) and np.all(rel > 0):
            sigma = rel
    if sigma is not None:
        w = 1.0 / sigma**2
        xm, ym = np.average(x, weights=w), np.average(y, weights=w)
        sxx = np.sum(w * (x - xm) ** 2)
        slope = np.sum(w * (x - xm) * (y - ym)) / sxx
        intercept = ym - slope * xm
        se = math.sqrt(1.0 / sxx)
    else:
        slope, intercept = np.polyfit(x, y, 1)
        sxx = np.sum((x - x.mean()) ** 2)
        dof = max(len(x) - 2, 1)
        resid_var = np.sum((y - slope * x - intercept) ** 2) / dof
        se = math.sqrt(resid_var / sxx)
    residual = float(np.sqrt(np.mean((y - slope * x - intercept) ** 2)))
    return float(slope), float(se), residual


def _check_dyadic(dt_list):
    dts = sorted(float(d) for d in dt_list)
    base = dts[0]
    for d in dts:
        ratio = d / base
        if abs(ratio - round(ratio)) > 1e-9 or (int(round(ratio)) & (int(round(ratio)) - 1)):
            raise ParameterError(f"dt list is not dyadically nested: {dt_list}")
    return sorted(dts, reverse=True)


def _map_samples(worker, n_samples, workers):
    """Run one worker per sample; accumulate in sample order regardless of schedule."""
    if workers <= 1:
        return [worker(i) for i in range(n_samples)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, range(n_samples)))


# -- studies ------------------------------------------------------------------

def temporal_order_study(cfg, dt_list, n_samples, mode="commuting", c=0.5,
                         ref_refine=8, u0=None, workers=1):
    """Mean-square error at t_final per dt against a path-coupled reference.

    mode 'commuting' pits the midpoint stepper against the closed-form
    solution (needs a constant potential and a single constant noise mode of
    size ``c``); initial data defaults to the constant profile there, which
    keeps the order-2 dispersion error of the free flight out of the
    measurement. mode 'self' uses a run at the finest dt / ref_refine as
    path-wise reference and supports the full noise model.
    """
    t0 = time.perf_counter()
    dts = _check_dyadic(dt_list)
    dt_min = dts[-1]
    for d in dts:
        if abs(cfg.t_final / d - round(cfg.t_final / d)) > 1e-9:
            raise ParameterError(f"t_final/dt not integer for dt={d}")

    if mode == "commuting":
        if not isinstance(cfg.q, (int, float)):
            raise ParameterError("commuting mode needs a constant potential")
        q_const = float(cfg.q)
        spec = NoiseSpec.single_constant_mode(c, cfg.left, cfg.right)
        u0_func = cfg.initial(u0 or "constant")
    elif mode == "self":
        spec = cfg.noise_spec()
        u0_func = cfg.initial(u0)
    else:
        raise ParameterError(f"unknown temporal study mode {mode!r}")

    state0 = state_from_callable(u0_func, cfg.left, cfg.right, cfg.n_x)
    potential = cfg.potential()
    steppers = {d: SpectralSolver(cfg.left, cfg.right, cfg.n_x, d, potential, spec)
                for d in dts}
    fine_dt = dt_min / ref_refine
    ref_stepper = (SpectralSolver(cfg.left, cfg.right, cfg.n_x, fine_dt, potential, spec)
                   if mode == "self" else None)

    def one_sample(i):
        n_master = int(round(cfg.t_final / dt_min)) * (ref_refine if mode == "self" else 1)
        master_dt = fine_dt if mode == "self" else dt_min
        master = sample_path(spec, master_dt, n_master, cfg.seed, sample=i)
        if mode == "self":
            reference = ref_stepper.propagate(master, state0)
        else:
            beta_final = master.brownian(master.n_steps)
            reference = commuting_exact(state0, q_const, c, beta_final, cfg.t_final)
        sq = []
        for d in dts:
            factor = int(round(d / master_dt))
            path = master if factor == 1 else coarsen_path(master, factor)
            try:
                final = steppers[d].propagate(path, state0)
            except SolverError as exc:
                raise SolverError(f"sample {i}, dt={d}: {exc}") from exc
            diff = final.with_values(final.values - reference.values)
            sq.append(spectral_l2_norm(diff) ** 2)
        return sq

    squares = np.array(_map_samples(one_sample, n_samples, workers))
    rows = []
    for idx, d in enumerate(dts):
        rms, se = _rms_from_squares(squares[:, idx])
        rows.append(StudyRow(f"dt={d:g}", math.nan, d, n_samples, rms, se))
    return _finish_report(f"temporal-order-{mode}", rows,
                          [r.dt for r in rows], t0)


def _finish_report(name, rows, scales, t0):
    report = ErrorReport(name, rows)
    errs = [r.ms_error for r in rows]
    if len(rows) >= 3 and all(e > 0 for e in errs):
        ses = [r.stderr for r in rows]
        slope, se, resid = _fit_loglog(scales, errs,
                                       ses if all(np.isfinite(ses)) else None)
        report.slope, report.slope_stderr, report.fit_residual = slope, se, resid
    report.wall_time = time.perf_counter() - t0
    return report


def _reference_grid_size(j_max, spec=None, factor=8):
    n = 1
    target = factor * j_max
    if spec is not None:
        target = max(target, 2 * spec.max_frequency() + 2)
    while n < target:
        n *= 2
    return n


def spatial_order_study(cfg, j_list, n_samples, mode="deterministic", dt=2e-3,
                        workers=1):
    """LDG error against the spectral reference as the mesh refines.

    Both solvers take identical midpoint steps with the same increments, so
    the measured gap isolates the spatial discretisation error. Stochastic
    mode reuses one path per sample across every mesh (spatial refinement
    does not change the driving noise) and reports the dt^(-1/2) h^(k+1)
    prediction of the mean-square bound alongside the measurement.
    """
    t0 = time.perf_counter()
    j_list = sorted(int(j) for j in j_list)
    n_steps = int(round(cfg.t_final / dt))
    if abs(cfg.t_final / dt - n_steps) > 1e-9:
        raise ParameterError(f"t_final/dt not integer for dt={dt}")
    potential = cfg.potential()
    u0_func = cfg.initial()
    if mode == "deterministic":
        spec = cfg.noise_spec(amplitude=0.0)
        n_samples = 1
    elif mode == "stochastic":
        spec = cfg.noise_spec()
    else:
        raise ParameterError(f"unknown spatial study mode {mode!r}")

    n_x = _reference_grid_size(max(j_list), spec)
    ref_stepper = SpectralSolver(cfg.left, cfg.right, n_x, dt, potential, spec)
    state0 = state_from_callable(u0_func, cfg.left, cfg.right, n_x)
    solvers = {}
    for j in j_list:
        mesh = build_mesh(cfg.left, cfg.right, j)
        scheme = SchemeConfig(mesh, cfg.degree, dt, cfg.t_final, potential, spec)
        solvers[j] = (LdgSolver(scheme), scheme.initial_field(u0_func))

    def one_sample(i):
        path = sample_path(spec, dt, n_steps, cfg.seed, sample=i)
        reference = ref_stepper.propagate(path, state0)
        sq = []
        for j in j_list:
            solver, u0_field = solvers[j]
            try:
                u_final = solver.propagate(path, u0_field)
            except SolverError as exc:
                raise SolverError(f"sample {i}, J={j}: {exc}") from exc
            sq.append(l2_error_to_reference(u_final, reference) ** 2)
        return sq

    squares = np.array(_map_samples(one_sample, n_samples, workers))
    rows = []
    for idx, j in enumerate(j_list):
        h = (cfg.right - cfg.left) / j
        rms, se = _rms_from_squares(squares[:, idx])
        extra = {}
        if mode == "stochastic":
            prediction = h ** (cfg.degree + 1) / math.sqrt(dt)
            extra = {"prediction": prediction, "ratio": rms / prediction}
        rows.append(StudyRow(f"J={j}", h, dt, squares.shape[0], rms, se, extra))
    return _finish_report(f"spatial-order-{mode}", rows, [r.h for r in rows], t0)


def cost_resolution(m_cost, degree, t_final):
    """(N, J, dt) from the cost-balancing exponents of the combined error bound."""
    n_steps = int(round(m_cost ** ((2 * degree + 2) / (2 * degree + 5))))
    j_cells = int(round(m_cost ** (3 / (2 * degree + 5))))
    return n_steps, j_cells, t_final / n_steps


def cost_rate_study(cfg, m_cost_list, n_samples, ref_refine=8, workers=1):
    """Error at t_final versus computational cost M = N * J.

    Each cost level runs the scheme at the exponent-balanced (N, J) pair and
    measures against a spectral reference driven by the same Brownian path at
    dt / ref_refine. The expected log-log slope is -(2k+2)/(2k+5).
    """
    t0 = time.perf_counter()
    spec = cfg.noise_spec()
    potential = cfg.potential()
    u0_func = cfg.initial()
    levels = [cost_resolution(m, cfg.degree, cfg.t_final) for m in m_cost_list]
    n_x = _reference_grid_size(max(j for _, j, _ in levels), spec)
    state0 = state_from_callable(u0_func, cfg.left, cfg.right, n_x)

    prepared = []
    for (n_steps, j_cells, dt), m_cost in zip(levels, m_cost_list):
        mesh = build_mesh(cfg.left, cfg.right, j_cells)
        scheme = SchemeConfig(mesh, cfg.degree, dt, cfg.t_final, potential, spec)
        prepared.append({
            "m_cost": m_cost, "n_steps": n_steps, "j": j_cells, "dt": dt,
            "solver": LdgSolver(scheme), "u0": scheme.initial_field(u0_func),
            "ref": SpectralSolver(cfg.left, cfg.right, n_x, dt / ref_refine,
                                  potential, spec),
        })

    def one_sample(i):
        sq = []
        for lvl in prepared:
            master = sample_path(spec, lvl["dt"] / ref_refine,
                                 lvl["n_steps"] * ref_refine, cfg.seed, sample=i)
            reference = lvl["ref"].propagate(master, state0)
            path = coarsen_path(master, ref_refine)
            try:
                u_final = lvl["solver"].propagate(path, lvl["u0"])
            except SolverError as exc:
                raise SolverError(f"sample {i}, M_cost={lvl['m_cost']}: {exc}") from exc
            sq.append(l2_error_to_reference(u_final, reference) ** 2)
        return sq

    squares = np.array(_map_samples(one_sample, n_samples, workers))
    rows = []
    for idx, lvl in enumerate(prepared):
        rms, se = _rms_from_squares(squares[:, idx])
        rows.append(StudyRow(f"M={lvl['m_cost']}", (cfg.right - cfg.left) / lvl["j"],
                             lvl["dt"], n_samples, rms, se,
                             {"n_steps": lvl["n_steps"], "j": lvl["j"]}))
    report = _finish_report("cost-rate", rows, [lvl["m_cost"] for lvl in prepared], t0)
    report.aux["target_slope"] = -(2 * cfg.degree + 2) / (2 * cfg.degree + 5)
    return report


def moment_bound_check(cfg, n_samples, dt=1e-3, n_steps=1000, workers=1):
    """Running max of the sample-mean squared H1 norm against its initial window."""
    t0 = time.perf_counter()
    spec = cfg.noise_spec()
    n_x = max(128, _reference_grid_size(0, spec))
    stepper = SpectralSolver(cfg.left, cfg.right, n_x, dt, cfg.potential(), spec)
    state0 = state_from_callable(cfg.initial(), cfg.left, cfg.right, n_x)

    def one_sample(i):
        path = sample_path(spec, dt, n_steps, cfg.seed, sample=i)
        values = state0.values
        norms = np.empty(n_steps + 1)
        norms[0] = spectral_h1_norm(state0) ** 2
        for n in range(n_steps):
            values = stepper.step_values(values, IncrementField(path, n))
            norms[n + 1] = spectral_h1_norm(state0.with_values(values)) ** 2
        return norms

    norms = np.array(_map_samples(one_sample, n_samples, workers))
    mean_norms = norms.mean(axis=0)
    initial = float(mean_norms[: min(10, len(mean_norms))].mean())
    peak = float(mean_norms.max())
    report = ErrorReport("moment-bound", [
        StudyRow(f"n={n}", math.nan, dt, n_samples, float(v),
                 float(norms[:, n].std(ddof=1) / math.sqrt(n_samples))
                 if n_samples > 1 else math.inf)
        for n, v in enumerate(mean_norms)
        if n % max(1, n_steps // 20) == 0 or n == n_steps
    ])
    report.aux.update(initial_window=initial, peak=peak, ratio=peak / initial,
                      bounded=peak <= 2.0 * initial)
    report.wall_time = time.perf_counter() - t0
    return report


def holder_continuity_study(cfg, dt_list, n_samples, workers=1):
    """Slope of the mean squared one-step L2 increment against dt (target 1)."""
    t0 = time.perf_counter()
    dts = _check_dyadic(dt_list)
    spec = cfg.noise_spec()
    n_x = max(128, _reference_grid_size(0, spec))
    potential = cfg.potential()
    state0 = state_from_callable(cfg.initial(), cfg.left, cfg.right, n_x)
    steppers = {d: SpectralSolver(cfg.left, cfg.right, n_x, d, potential, spec)
                for d in dts}

    def one_sample(i):
        out = []
        for d in dts:
            n_steps = int(round(cfg.t_final / d))
            path = sample_path(spec, d, n_steps, cfg.seed, sample=i)
            values = state0.values
            acc = 0.0
            for n in range(n_steps):
                nxt = steppers[d].step_values(values, IncrementField(path, n))
                diff = state0.with_values(nxt - values)
                acc += spectral_l2_norm(diff) ** 2
                values = nxt
            out.append(acc / n_steps)
        return out

    means = np.array(_map_samples(one_sample, n_samples, workers))
    rows = []
    for idx, d in enumerate(dts):
        col = means[:, idx]
        value = float(col.mean())
        se = float(col.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else math.inf
        rows.append(StudyRow(f"dt={d:g}", math.nan, d, n_samples, value, se))
    return _finish_report("holder-continuity", rows, [r.dt for r in rows], t0)


def regularity_checks(cfg, n_samples, dt_list=None, moment_steps=1000,
                      moment_dt=1e-3, workers=1):
    """Moment boundedness plus temporal Holder continuity in one report."""
    dt_list = dt_list or [2.0**-j for j in range(5, 10)]
    holder = holder_continuity_study(cfg, dt_list, n_samples, workers=workers)
    moments = moment_bound_check(cfg, max(2, n_samples // 2), dt=moment_dt,
                                 n_steps=moment_steps, workers=workers)
    holder.aux.update({f"moment_{k}": v for k, v in moments.aux.items()})
    return holder
