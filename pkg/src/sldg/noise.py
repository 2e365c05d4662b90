"""Spectral Q-Wiener process on the periodic domain.

The driving noise is W(t, x) = sum_k beta_k(t) mu_k e_k(x) with independent
Brownian motions beta_k, a real Fourier basis e_k and eigenvalues
mu_k = amplitude * (1 + k)^(-decay). Time stepping consumes truncated
increments: each step-n increment is sqrt(dt) * zeta_{k,n} * mu_k * e_k(x)
where zeta is the standard normal xi clamped to [-kappa, kappa] and
kappa = sqrt(4 |ln dt|). Per-(seed, sample, mode) counter-based streams make
paths reproducible and refinable without communication.
"""

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from ._accel import fourier_mode_matrix
from .errors import ParameterError

HEADER_FORMAT = "<IIdq"  # little-endian: u32 n_modes, u32 n_steps, f64 dt, i64 seed


def kappa(dt):
    """Truncation level sqrt(4 |ln dt|); defined for 0 < dt < 1."""
    if not (0.0 < dt < 1.0):
        raise ParameterError(f"dt must lie in (0, 1) for truncation, got {dt}")
    return float(np.sqrt(4.0 * abs(np.log(dt))))


def truncate(xi, level):
    """Clamp to [-level, level]."""
    if level <= 0:
        raise ParameterError(f"truncation level must be positive, got {level}")
    return np.clip(xi, -level, level)


@dataclass(frozen=True)
class NoiseSpec:
    """Diagonal covariance in the real Fourier basis of ``[left, right]``."""

    left: float
    right: float
    n_modes: int = 32
    decay: float = 4.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.n_modes < 1:
            raise ParameterError("need at least one noise mode")
        if self.decay < 3.0:
            raise ParameterError(f"decay exponent must be >= 3, got {self.decay}")
        if self.amplitude < 0:
            raise ParameterError("noise amplitude must be >= 0")
        if not (self.left < self.right):
            raise ParameterError("noise domain is empty")

    @property
    def length(self):
        return self.right - self.left

    @property
    def eigenvalues(self):
        k = np.arange(self.n_modes)
        return self.amplitude * (1.0 + k) ** (-self.decay)

    @classmethod
    def single_constant_mode(cls, value, left, right):
        """One spatially constant mode with phi e_0 identically ``value``."""
        amp = value * np.sqrt(right - left)
        return cls(left, right, n_modes=1, decay=4.0, amplitude=amp)

    def mode_matrix(self, x):
        """Basis values e_k(x), shape (len(x), n_modes)."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return fourier_mode_matrix(x - self.left, self.length, self.n_modes)

    def max_frequency(self):
        """Highest integer Fourier frequency carried by the retained modes."""
        return (self.n_modes - 1 + 1) // 2

    def sobolev_proxy(self, order=3):
        """Partial sum of mu_k^2 (1 + k^2)^order (Hilbert-Schmidt surrogate)."""
        k = np.arange(self.n_modes)
        return float(np.sum(self.eigenvalues**2 * (1.0 + k**2) ** order))


@dataclass(frozen=True)
class NoisePath:
    """Sampled per-mode normals and their truncated counterparts for one run."""

    spec: NoiseSpec
    dt: float
    xi: np.ndarray  # (n_modes, n_steps) standard normals
    seed: int
    sample: int = 0
    kappa_level: float = field(init=False, default=0.0)
    zeta: np.ndarray = field(init=False, default=None)

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=np.float64)
        if xi.ndim != 2 or xi.shape[0] != self.spec.n_modes:
            raise ParameterError(f"xi must be (n_modes, n_steps), got {xi.shape}")
        level = kappa(self.dt)
        zeta = truncate(xi, level)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "kappa_level", level)
        object.__setattr__(self, "zeta", zeta)
        xi.setflags(write=False)
        zeta.setflags(write=False)

    @property
    def n_steps(self):
        return self.xi.shape[1]

    def increment_coefficients(self, n):
        """Per-mode weights sqrt(dt) * zeta_{k,n} * mu_k of step ``n``."""
        if not (0 <= n < self.n_steps):
            raise ParameterError(f"step index {n} out of range [0, {self.n_steps})")
        return np.sqrt(self.dt) * self.zeta[:, n] * self.spec.eigenvalues

    def brownian(self, n, mode=0):
        """Pre-truncation Brownian value sqrt(dt) * sum_{j<n} xi[mode, j]."""
        if not (0 <= n <= self.n_steps):
            raise ParameterError(f"step index {n} out of range [0, {self.n_steps}]")
        return float(np.sqrt(self.dt) * self.xi[mode, :n].sum())


def sample_path(spec, dt, n_steps, seed, sample=0):
    """Draw a truncated increment path from deterministic per-mode streams."""
    if n_steps < 0:
        raise ParameterError("n_steps must be >= 0")
    kappa(dt)  # validates dt
    xi = np.empty((spec.n_modes, n_steps))
    for k in range(spec.n_modes):
        seq = np.random.SeedSequence(entropy=seed, spawn_key=(sample, k))
        gen = np.random.Generator(np.random.Philox(seq))
        xi[k] = gen.standard_normal(n_steps)
    return NoisePath(spec, float(dt), xi, int(seed), int(sample))


def coarsen_path(fine, factor):
    """Aggregate a fine path to step size ``factor * dt`` (exact Brownian coupling).

    Underlying normals are summed and rescaled, so pre-truncation increments
    add exactly; truncation is then re-applied at the coarse kappa level.
    """
    if factor < 1 or fine.n_steps % factor != 0:
        raise ParameterError(
            f"coarsening factor {factor} does not divide {fine.n_steps} steps"
        )
    n_coarse = fine.n_steps // factor
    xi = fine.xi.reshape(fine.spec.n_modes, n_coarse, factor).sum(axis=2) / np.sqrt(factor)
    return NoisePath(fine.spec, fine.dt * factor, xi, fine.seed, fine.sample)


@dataclass(frozen=True)
class IncrementField:
    """Spatial evaluation of one truncated increment, x -> dW~_n(x)."""

    path: NoisePath
    step: int

    def values(self, x):
        coeff = self.path.increment_coefficients(self.step)
        return self.path.spec.mode_matrix(x) @ coeff

    def __call__(self, x):
        scalar = np.isscalar(x)
        out = self.values(x)
        return float(out[0]) if scalar else out


def eval_increment(path, n, x):
    """Value of the step-``n`` truncated increment field at ``x``."""
    return IncrementField(path, n)(x)


def truncation_tail_moment(level, power=1):
    """Gaussian-tail quadrature of the clamp defect.

    power=1 returns E[(zeta - xi)^2] = int_{|y|>level} (|y| - level)^2 phi(y) dy,
    power=2 returns E[(zeta^2 - xi^2)^2]. Both are computed by adaptive
    quadrature of the standard normal tail.
    """
    if level <= 0:
        raise ParameterError("truncation level must be positive")
    if power == 1:
        def integrand(y):
            return (y - level) ** 2 * np.exp(-0.5 * y * y) / np.sqrt(2.0 * np.pi)
    elif power == 2:
        def integrand(y):
            return (y * y - level * level) ** 2 * np.exp(-0.5 * y * y) / np.sqrt(2.0 * np.pi)
    else:
        raise ParameterError(f"power must be 1 or 2, got {power}")
    val, _ = integrate.quad(integrand, level, np.inf)
    return 2.0 * val


def dump_path(path, filename):
    """Binary dump: header {n_modes, n_steps, dt, seed} then row-major xi.

    Layout is little-endian (see HEADER_FORMAT); the stream/sample id and the
    noise spec are not serialised, so loading needs the matching spec.
    """
    with open(filename, "wb") as fh:
        fh.write(struct.pack(HEADER_FORMAT, path.spec.n_modes, path.n_steps,
                             path.dt, path.seed))
        fh.write(path.xi.astype("<f8").tobytes(order="C"))


def load_path(filename, spec, sample=0):
    """Load a path dumped by :func:`dump_path`; truncation is recomputed."""
    with open(filename, "rb") as fh:
        header = fh.read(struct.calcsize(HEADER_FORMAT))
        n_modes, n_steps, dt, seed = struct.unpack(HEADER_FORMAT, header)
        if n_modes != spec.n_modes:
            raise ParameterError(
                f"file has {n_modes} modes but spec declares {spec.n_modes}"
            )
        data = np.frombuffer(fh.read(8 * n_modes * n_steps), dtype="<f8")
    xi = data.reshape(n_modes, n_steps).copy()
    return NoisePath(spec, dt, xi, seed, sample)
