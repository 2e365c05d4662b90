"""Fourier-collocation reference solvers for the periodic Schrodinger dynamics.

The implicit midpoint step is solved in a trigonometric collocation space:
the Laplacian is exact on the retained frequencies and the potential / noise
multiplications act pointwise on the grid. The constant-coefficient part of
the step operator is diagonal in Fourier space, which both defines the free
Cayley propagator and preconditions the variable-coefficient solve.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SolverError
from .mesh import project_minus
from .noise import IncrementField


@dataclass(frozen=True)
class SpectralState:
    """Collocation values of u on a uniform periodic grid."""

    left: float
    right: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        n = values.size
        if n < 2 or (n & (n - 1)) != 0:
            raise ParameterError(f"grid size must be a power of two, got {n}")
        if not np.all(np.isfinite(values)):
            raise ValueError("non-finite collocation values")
        object.__setattr__(self, "values", values)
        values.setflags(write=False)

    @property
    def n_points(self):
        return self.values.size

    @property
    def length(self):
        return self.right - self.left

    @property
    def grid(self):
        n = self.n_points
        return self.left + self.length * np.arange(n) / n

    @property
    def frequencies(self):
        n = self.n_points
        return 2.0 * np.pi * np.fft.fftfreq(n, d=self.length / n)

    def with_values(self, values):
        return SpectralState(self.left, self.right, values)


def state_from_callable(func, left, right, n_points):
    grid = left + (right - left) * np.arange(n_points) / n_points
    return SpectralState(left, right, np.asarray(func(grid), dtype=np.complex128))


def spectral_l2_norm(state):
    """Discrete L2 norm, exact for band-limited fields (rectangle = Parseval)."""
    return float(np.sqrt(state.length * np.mean(np.abs(state.values) ** 2)))


def spectral_h1_norm(state):
    """Sobolev H1 norm from Fourier weights (1 + lambda^2)."""
    coeff = np.fft.fft(state.values) / state.n_points
    lam2 = state.frequencies**2
    return float(np.sqrt(state.length * np.sum((1.0 + lam2) * np.abs(coeff) ** 2)))


def spectral_charge(state):
    return spectral_l2_norm(state) ** 2


class SpectralSolver:
    """Midpoint stepper on a fixed grid with fixed dt, potential and noise spec."""

    def __init__(self, left, right, n_points, dt, q=None, noise=None,
                 tol=1e-12, max_iter=400):
        proto = SpectralState(left, right, np.zeros(n_points, dtype=np.complex128))
        self.left, self.right = left, right
        self.n_points, self.dt, self.tol, self.max_iter = n_points, dt, tol, max_iter
        self.grid = proto.grid
        lam2 = proto.frequencies**2
        # (I + i(dt/2) d_xx) has Fourier symbol 1 - i dt lam^2 / 2
        self.sym_plus = 1.0 - 0.5j * dt * lam2
        self.sym_minus = 1.0 + 0.5j * dt * lam2
        self.q_values = (np.asarray(q(self.grid), dtype=np.float64)
                         if q is not None else np.zeros(n_points))
        self.noise = noise
        if noise is not None:
            if n_points < 2 * noise.max_frequency() + 2:
                raise ParameterError(
                    f"{n_points} collocation points under-resolve noise frequency "
                    f"{noise.max_frequency()}"
                )
            self._mode_matrix = noise.mode_matrix(self.grid)
        else:
            self._mode_matrix = None

    def _increment_on_grid(self, incr):
        if incr is None:
            return np.zeros(self.n_points)
        if self._mode_matrix is not None and incr.path.spec == self.noise:
            return self._mode_matrix @ incr.path.increment_coefficients(incr.step)
        return incr.values(self.grid)

    def step_values(self, values, incr=None):
        """One midpoint step of the collocation system.

        The variable-coefficient resolvent is applied by fixed-point iteration
        preconditioned with the constant-coefficient one (diagonal in Fourier
        space); the iterate update equals the preconditioned residual, which
        is driven below ``tol`` relative to the preconditioned right-hand side.
        """
        v = 0.5j * self.dt * self.q_values + 0.5j * self._increment_on_grid(incr)
        rhs = np.fft.ifft(self.sym_minus * np.fft.fft(values)) - v * values
        pb = np.fft.ifft(np.fft.fft(rhs) / self.sym_plus)
        if not np.any(v):
            return pb
        scale = max(np.linalg.norm(pb), 1e-300)
        u = pb
        for _ in range(self.max_iter):
            u_new = pb - np.fft.ifft(np.fft.fft(v * u) / self.sym_plus)
            delta = np.linalg.norm(u_new - u)
            u = u_new
            if delta <= self.tol * scale:
                return u
        raise SolverError(
            f"reference midpoint solve stalled at preconditioned residual "
            f"{delta / scale:.3e}"
        )

    def step(self, state, incr=None):
        return state.with_values(self.step_values(state.values, incr))

    def propagate(self, path, state):
        u = state.values
        for n in range(path.n_steps):
            try:
                u = self.step_values(u, IncrementField(path, n))
            except SolverError as exc:
                raise SolverError(f"step {n}: {exc}") from exc
        return state.with_values(u)


def spectral_step(state, incr, dt, q=None):
    """One-off midpoint step (builds a throwaway solver)."""
    noise = incr.path.spec if incr is not None else None
    solver = SpectralSolver(state.left, state.right, state.n_points, dt, q, noise)
    return solver.step(state, incr)


def free_propagator_symbol(dt, lam2):
    """Fourier symbol of the one-step free Cayley propagator."""
    return (1.0 + 0.5j * dt * lam2) / (1.0 - 0.5j * dt * lam2)


def commuting_exact(state, q_const, c, beta, t):
    """Closed-form solution for constant potential and one constant noise mode.

    Moves u0 with the exact free group (Fourier phases e^{i lam^2 t}) and
    applies the scalar phase e^{-i (q t + c beta)} dictated by the chain rule
    of the Stratonovich product.
    """
    if not np.isscalar(q_const) or not np.isscalar(c):
        raise ParameterError("closed form needs a constant potential and a single "
                             "constant noise mode")
    coeff = np.fft.fft(state.values)
    lam2 = state.frequencies**2
    evolved = np.fft.ifft(coeff * np.exp(1j * lam2 * t))
    return state.with_values(evolved * np.exp(-1j * (q_const * t + c * beta)))


def interpolant(state):
    """Band-limited interpolant of the collocation values, callable at any x."""
    coeff = np.fft.fft(state.values) / state.n_points
    freqs = state.frequencies

    def evaluate(x):
        x = np.asarray(x, dtype=np.float64)
        phase = np.exp(1j * np.multiply.outer(x - state.left, freqs))
        return phase @ coeff

    return evaluate


def restrict_to_dg(state, mesh, degree):
    """Endpoint-matching projection of the band-limited interpolant onto V_h^k."""
    if abs(mesh.left - state.left) > 1e-12 or abs(mesh.right - state.right) > 1e-12:
        raise ParameterError("mesh and spectral state cover different domains")
    return project_minus(interpolant(state), mesh, degree)


def l2_error_to_reference(field, state, n_quad=None):
    """Dense-quadrature L2 distance between a DG field and a spectral state."""
    from .mesh import Quadrature, cell_quad_points, legendre_basis

    nq = n_quad or (field.degree + 8)
    quad = Quadrature.gauss(nq)
    pts = cell_quad_points(field.mesh, quad)
    approx = field.coeffs @ legendre_basis(field.degree, quad.nodes)
    exact = interpolant(state)(pts.ravel()).reshape(pts.shape)
    err2 = np.sum(np.abs(approx - exact) ** 2 * quad.weights[None, :], axis=1)
    return float(np.sqrt(np.sum(err2 * 0.5 * field.mesh.widths)))
