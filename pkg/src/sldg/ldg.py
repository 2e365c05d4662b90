"""Implicit-midpoint local DG scheme for the stochastic linear Schrodinger equation.

Working with the complex state u = r + i s and the auxiliary derivative
variable psi = q + i p, one time step reads

    i M (u_next - u_cur) = L (u_next + u_cur) / 2,
    L = dt * G M^{-1} K  +  dt * T_Q  +  T_W,

where K is the one-sided discrete derivative defined by the u-flux, G the one
defined by the psi-flux, M the (diagonal) Legendre mass matrix, and T_Q, T_W
the per-cell Gram matrices of the potential and of the truncated noise
increment. psi is eliminated cell-locally (its equation is block diagonal in
M), leaving a block-tridiagonal periodic system for u alone:

    (M + i L / 2) u_next = (M - i L / 2) u_cur.

For alternating (opposite-side) fluxes G equals -K^T, so L is real symmetric,
the step operator is a Cayley transform, and the discrete L2 norm of the state
is preserved to solver precision. Same-side flux pairings break the symmetry
and are provided only as a negative control.
"""

import time
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._accel import weighted_blocks
from .errors import MeshMismatchError, ParameterError, SizeGuardError, SolverError
from .mesh import DGField, Quadrature, cell_quad_points, legendre_basis, project_l2, project_minus
from .noise import IncrementField

FLUX_SIDES = {
    "minus-plus": ("-", "+"),   # u from the left cell, psi from the right (default)
    "plus-minus": ("+", "-"),   # mirrored orientation, equally conservative
    "minus-minus": ("-", "-"),  # same-side pairing: breaks charge conservation
    "plus-plus": ("+", "+"),    # same-side pairing: breaks charge conservation
}


def stiffness_pairs(degree):
    """S[m, l] = integral of P_m' P_l over [-1, 1]."""
    S = np.zeros((degree + 1, degree + 1))
    for m in range(degree + 1):
        for l in range(m):
            if (m - l) % 2 == 1:
                S[m, l] = 2.0
    return S


def one_sided_blocks(degree, side):
    """Cell blocks (diag, sub, super) of the flux-lifted derivative operator.

    Row block j of the operator maps coefficients of a field w to
    [ (w_hat v^-)_{j+1/2} - (w_hat v^+)_{j-1/2} - int_{I_j} w v_x dx ]
    for all local test functions v, with the trace w_hat taken from ``side``.
    """
    nb = degree + 1
    v_plus = np.ones(nb)
    v_minus = (-1.0) ** np.arange(nb)
    diag = -stiffness_pairs(degree)
    sub = np.zeros((nb, nb))
    sup = np.zeros((nb, nb))
    if side == "-":
        diag += np.outer(v_plus, v_plus)
        sub -= np.outer(v_minus, v_plus)
    elif side == "+":
        sup += np.outer(v_plus, v_minus)
        diag -= np.outer(v_minus, v_minus)
    else:
        raise ParameterError(f"trace side must be '-' or '+', got {side!r}")
    return diag, sub, sup


@dataclass(frozen=True)
class SchemeConfig:
    """Everything needed to advance the full-discrete scheme."""

    mesh: object
    degree: int
    dt: float
    t_final: float
    q: object = None          # potential callable, None means zero
    noise: object = None      # NoiseSpec used by run()/studies
    flux: str = "minus-plus"
    lin_tol: float = 1e-12
    direct_limit: int = 4096  # unknown count above which the solve is iterative
    init: str = "interp"      # 'interp' = endpoint-matching projection, 'l2' = plain L2

    def __post_init__(self):
        if self.degree < 1:
            raise ParameterError(f"scheme degree must be >= 1, got {self.degree}")
        if not (0.0 < self.dt < 1.0):
            raise ParameterError(f"dt must lie in (0, 1), got {self.dt}")
        if self.t_final < 0:
            raise ParameterError("t_final must be >= 0")
        steps = self.t_final / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ParameterError(f"t_final/dt = {steps} is not an integer step count")
        if self.flux not in FLUX_SIDES:
            raise ParameterError(f"unknown flux orientation {self.flux!r}")
        if self.lin_tol > 1e-10:
            raise ParameterError("linear solver tolerance must be <= 1e-10")
        if self.init not in ("interp", "l2"):
            raise ParameterError(f"init must be 'interp' or 'l2', got {self.init!r}")
        if self.noise is not None:
            if abs(self.noise.left - self.mesh.left) > 1e-12 or \
               abs(self.noise.right - self.mesh.right) > 1e-12:
                raise MeshMismatchError("noise spec domain differs from mesh domain")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    @property
    def conserving(self):
        a, b = FLUX_SIDES[self.flux]
        return a != b

    def initial_field(self, u0):
        proj = project_minus if self.init == "interp" else project_l2
        return proj(u0, self.mesh, self.degree)


@dataclass(frozen=True)
class StepSystem:
    """Assembled sparse system A u_next = b for one implicit midpoint step."""

    matrix: sp.csr_matrix
    rhs: np.ndarray


@dataclass
class Trajectory:
    """States, per-step charges and linear residuals of one run."""

    states: list
    charges: np.ndarray
    linres: np.ndarray
    iterations: np.ndarray
    wall_time: float = 0.0

    @property
    def n_steps(self):
        return len(self.states) - 1


def mass_vector(mesh, degree):
    """Diagonal of the Legendre mass matrix, flattened cell-major."""
    weights = mesh.widths[:, None] / (2.0 * np.arange(degree + 1) + 1.0)[None, :]
    return weights.ravel()


def discrete_charge(u):
    """Integral of |u_h|^2 over the domain, exact from the modal Gram identity."""
    mvec = mass_vector(u.mesh, u.degree)
    c = u.coeffs.ravel()
    return float(np.sum((c.real**2 + c.imag**2) * mvec))


def coeff_mass_norm(mesh, degree, vec):
    """L2 norm of the field represented by a flat coefficient vector."""
    mvec = mass_vector(mesh, degree)
    return float(np.sqrt(np.sum((vec.real**2 + vec.imag**2) * mvec)))


class LdgSolver:
    """Owns the assembled constant part and factorisation workspace of one config.

    Instances are single-threaded; run one per Monte-Carlo sample for
    parallelism.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        mesh, k = cfg.mesh, cfg.degree
        self.nb = k + 1
        self.n = mesh.n_cells * self.nb
        self.quad = Quadrature.gauss(k + 3)
        self.points = cell_quad_points(mesh, self.quad)
        self._flat_points = self.points.ravel()
        self.phi = legendre_basis(k, self.quad.nodes)
        self.mass = mass_vector(mesh, k)

        u_side, psi_side = FLUX_SIDES[cfg.flux]
        K = self._global_operator(*one_sided_blocks(k, u_side))
        G = self._global_operator(*one_sided_blocks(k, psi_side))
        F = (G @ sp.diags(1.0 / self.mass) @ K).tocsr()
        if cfg.conserving:
            F = 0.5 * (F + F.T).tocsr()
        self._flux_part = F

        if cfg.q is not None:
            qvals = np.asarray(cfg.q(self.points), dtype=np.float64)
            q_blocks = weighted_blocks(qvals, self.phi, self.quad.weights,
                                       0.5 * mesh.widths)
        else:
            q_blocks = np.zeros((mesh.n_cells, self.nb, self.nb))
        self._constant = sp.diags(self.mass).tocsr() + 0.5j * (
            cfg.dt * F + cfg.dt * self._block_diag(q_blocks)
        )
        self._constant_lu = None

        if cfg.noise is not None:
            self._mode_matrix = cfg.noise.mode_matrix(self._flat_points)
        else:
            self._mode_matrix = None

    # -- assembly ----------------------------------------------------------

    def _global_operator(self, diag, sub, sup):
        """Periodic block matrix from (diag, sub, super) cell blocks."""
        J, nb = self.cfg.mesh.n_cells, self.nb
        rows, cols, data = [], [], []
        cell_rows = np.repeat(np.arange(nb), nb)
        cell_cols = np.tile(np.arange(nb), nb)
        for j in range(J):
            for block, other in ((diag, j), (sub, (j - 1) % J), (sup, (j + 1) % J)):
                if not np.any(block):
                    continue
                rows.append(j * nb + cell_rows)
                cols.append(other * nb + cell_cols)
                data.append(block.ravel())
        mat = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.n),
        )
        return mat.tocsr()

    def _block_diag(self, blocks):
        J, nb = blocks.shape[0], self.nb
        indptr = np.arange(J * nb + 1) * nb
        indices = (np.arange(J)[:, None, None] * nb + np.arange(nb)[None, None, :])
        indices = np.broadcast_to(indices, (J, nb, nb)).ravel()
        return sp.csr_matrix((blocks.ravel(), indices, indptr), shape=(self.n, self.n))

    def increment_values(self, incr):
        """Noise increment at the quadrature grid, shape (n_cells, n_quad)."""
        if self._mode_matrix is not None and incr.path.spec == self.cfg.noise:
            vals = self._mode_matrix @ incr.path.increment_coefficients(incr.step)
        else:
            vals = incr.values(self._flat_points)
        return vals.reshape(self.points.shape)

    def assemble(self, u, incr=None):
        """Sparse system of one midpoint step from state ``u``."""
        A = self._constant
        if incr is not None:
            coeff = incr.path.increment_coefficients(incr.step)
            if np.any(coeff):
                w_blocks = weighted_blocks(self.increment_values(incr), self.phi,
                                           self.quad.weights, 0.5 * self.cfg.mesh.widths)
                A = A + 0.5j * self._block_diag(w_blocks)
        ucoef = u.coeffs.ravel()
        rhs = 2.0 * (self.mass * ucoef) - A @ ucoef
        return StepSystem(A, rhs)

    # -- solving -----------------------------------------------------------

    def _direct_solve(self, A, b, reuse_constant):
        if reuse_constant and self._constant_lu is not None:
            lu = self._constant_lu
        else:
            try:
                lu = spla.splu(A.tocsc())
            except RuntimeError as exc:
                raise SolverError(f"sparse factorisation failed: {exc}") from exc
            udiag = np.abs(lu.U.diagonal())
            if udiag.min() < 1e-12 * max(udiag.max(), 1.0):
                raise SolverError(
                    f"near-singular step matrix (pivot ratio {udiag.min() / udiag.max():.2e}); "
                    "reduce dt"
                )
            if reuse_constant:
                self._constant_lu = lu
        return lu.solve(b), 1

    def _iterative_solve(self, A, b):
        nb = self.nb
        diag_blocks = np.empty((self.cfg.mesh.n_cells, nb, nb), dtype=np.complex128)
        for j in range(self.cfg.mesh.n_cells):
            sl = slice(j * nb, (j + 1) * nb)
            diag_blocks[j] = A[sl, sl].toarray()
        inv_blocks = np.linalg.inv(diag_blocks)

        def precond(v):
            return np.einsum("jml,jl->jm", inv_blocks, v.reshape(-1, nb)).ravel()

        M = spla.LinearOperator(A.shape, matvec=precond, dtype=np.complex128)
        x, info = spla.gmres(A, b, rtol=0.1 * self.cfg.lin_tol, atol=0.0,
                             restart=50, maxiter=200, M=M)
        if info != 0:
            res = np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1e-300)
            raise SolverError(f"iterative solve did not converge (residual {res:.3e})")
        return x, max(info, 1)

    def step(self, u, incr=None):
        """One implicit midpoint step; returns (next state, rel. residual, iters)."""
        system = self.assemble(u, incr)
        A, b = system.matrix, system.rhs
        noiseless = A is self._constant
        if self.n <= self.cfg.direct_limit:
            x, iters = self._direct_solve(A, b, reuse_constant=noiseless)
        else:
            x, iters = self._iterative_solve(A, b)
        bnorm = np.linalg.norm(b)
        res = np.linalg.norm(A @ x - b) / bnorm if bnorm > 0 else 0.0
        if res > self.cfg.lin_tol and self.n <= self.cfg.direct_limit:
            x = x + self._direct_solve(A, b - A @ x, reuse_constant=noiseless)[0]
            res = np.linalg.norm(A @ x - b) / bnorm if bnorm > 0 else 0.0
        if res > self.cfg.lin_tol:
            raise SolverError(f"linear residual {res:.3e} above tolerance "
                              f"{self.cfg.lin_tol:.1e}")
        return u.with_coeffs(x.reshape(u.coeffs.shape)), res, iters

    def operator(self, incr=None):
        """Dense one-step matrix A with u_next-coeffs = A @ u_cur-coeffs."""
        if self.n > 1024:
            raise SizeGuardError(f"step operator limited to 1024 unknowns, got {self.n}")
        system = self.assemble(DGField.zeros(self.cfg.mesh, self.cfg.degree), incr)
        A = system.matrix.tocsc()
        lu = spla.splu(A)
        rhs = 2.0 * np.diag(self.mass).astype(np.complex128) - A.toarray()
        return lu.solve(rhs)

    def propagate(self, path, u0):
        """Final state after consuming the whole path (no trajectory storage)."""
        u = u0
        for n in range(path.n_steps):
            try:
                u, _, _ = self.step(u, IncrementField(path, n))
            except SolverError as exc:
                raise SolverError(f"step {n}: {exc}") from exc
        return u

    def run(self, path, u0):
        """Full trajectory with the per-step charge and residual log."""
        if abs(path.n_steps * self.cfg.dt - self.cfg.t_final) > 1e-9:
            raise ParameterError(
                f"path covers {path.n_steps * self.cfg.dt}, config wants {self.cfg.t_final}"
            )
        t0 = time.perf_counter()
        states = [u0]
        charges = np.empty(path.n_steps + 1)
        linres = np.zeros(path.n_steps)
        iters = np.zeros(path.n_steps, dtype=int)
        charges[0] = discrete_charge(u0)
        u = u0
        for n in range(path.n_steps):
            try:
                u, linres[n], iters[n] = self.step(u, IncrementField(path, n))
            except SolverError as exc:
                raise SolverError(f"step {n}: {exc}") from exc
            states.append(u)
            charges[n + 1] = discrete_charge(u)
        return Trajectory(states, charges, linres, iters, time.perf_counter() - t0)


# -- free-function API -------------------------------------------------------

def assemble_step(u_n, incr, cfg):
    return LdgSolver(cfg).assemble(u_n, incr)


def step(u_n, incr, cfg):
    return LdgSolver(cfg).step(u_n, incr)[0]


def step_operator(incr, cfg):
    return LdgSolver(cfg).operator(incr)


def run(cfg, path, u0):
    return LdgSolver(cfg).run(path, u0)


# -- CSV export ---------------------------------------------------------------

def write_trajectory_csv(traj, dt, stream):
    stream.write("n,t,charge,linres\n")
    for n, charge in enumerate(traj.charges):
        res = traj.linres[n - 1] if n > 0 else 0.0
        stream.write(f"{n},{n * dt:.17g},{charge:.17g},{res:.17g}\n")


def write_snapshot_csv(u, stream):
    stream.write("cell,mode,re,im\n")
    for j in range(u.mesh.n_cells):
        for m in range(u.degree + 1):
            c = u.coeffs[j, m]
            stream.write(f"{j},{m},{c.real:.17g},{c.imag:.17g}\n")
