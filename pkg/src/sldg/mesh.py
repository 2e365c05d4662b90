"""1-D periodic cell partitions, Legendre modal fields, quadrature and projections.

Fields are stored as per-cell Legendre coefficients: on cell ``I_j`` with
midpoint ``x_j`` and width ``dx_j`` the represented function is
``sum_m coeffs[j, m] * P_m(2 (x - x_j) / dx_j)``. The basis is orthogonal,
so mass matrices are diagonal and L2 quantities are exact coefficient sums.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MeshMismatchError, ParameterError


@dataclass(frozen=True)
class Mesh:
    """Partition of ``[left, right]`` into cells with periodic topology."""

    left: float
    right: float
    nodes: np.ndarray  # shape (n_cells + 1,), strictly increasing
    regularity: float = field(init=False, default=0.0)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 3:
            raise DomainError("mesh needs at least 2 cells (3 nodes)")
        if not (self.left < self.right):
            raise DomainError(f"empty domain: [{self.left}, {self.right}]")
        if nodes[0] != self.left or nodes[-1] != self.right:
            raise DomainError("node list must start/end at the domain endpoints")
        widths = np.diff(nodes)
        if np.any(widths <= 0):
            raise DomainError("mesh nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "regularity", float(widths.min() / widths.max()))
        nodes.setflags(write=False)

    @property
    def n_cells(self):
        return self.nodes.size - 1

    @property
    def h(self):
        """Maximum cell width."""
        return float(np.diff(self.nodes).max())

    @property
    def widths(self):
        return np.diff(self.nodes)

    @property
    def centers(self):
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @property
    def length(self):
        return self.right - self.left


def build_mesh(left, right, n_cells):
    """Uniform mesh of ``n_cells`` cells on ``[left, right]``."""
    if n_cells < 2:
        raise DomainError(f"need at least 2 cells, got {n_cells}")
    if not (left < right):
        raise DomainError(f"empty domain: [{left}, {right}]")
    nodes = np.linspace(left, right, n_cells + 1)
    nodes[0], nodes[-1] = left, right
    return Mesh(float(left), float(right), nodes)


def mesh_from_nodes(nodes):
    """Mesh from an explicit (possibly non-uniform) strictly increasing node list."""
    nodes = np.asarray(nodes, dtype=np.float64)
    return Mesh(float(nodes[0]), float(nodes[-1]), nodes)


@dataclass(frozen=True)
class Quadrature:
    """Gauss-Legendre rule on [-1, 1], exact for polynomials of degree 2*order - 1."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def gauss(cls, order):
        if order < 1:
            raise ParameterError("quadrature order must be >= 1")
        nodes, weights = np.polynomial.legendre.leggauss(order)
        return cls(order, nodes, weights)


def legendre_basis(degree, points):
    """Legendre values P_m(points) as a (degree + 1, len(points)) matrix."""
    points = np.atleast_1d(np.asarray(points, dtype=np.float64))
    return np.polynomial.legendre.legvander(points, degree).T


@dataclass(frozen=True)
class DGField:
    """Piecewise-polynomial complex field: per-cell Legendre modal coefficients."""

    mesh: Mesh
    degree: int
    coeffs: np.ndarray  # (n_cells, degree + 1) complex

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (self.mesh.n_cells, self.degree + 1):
            raise MeshMismatchError(
                f"coefficient shape {coeffs.shape} does not match "
                f"(cells={self.mesh.n_cells}, degree={self.degree})"
            )
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("non-finite DG coefficients")
        object.__setattr__(self, "coeffs", coeffs)
        coeffs.setflags(write=False)

    @classmethod
    def zeros(cls, mesh, degree):
        return cls(mesh, degree, np.zeros((mesh.n_cells, degree + 1), dtype=np.complex128))

    def with_coeffs(self, coeffs):
        return DGField(self.mesh, self.degree, coeffs)

    def _check_compatible(self, other):
        if self.mesh is not other.mesh and not np.array_equal(self.mesh.nodes, other.mesh.nodes):
            raise MeshMismatchError("fields live on different meshes")
        if self.degree != other.degree:
            raise MeshMismatchError("fields have different polynomial degrees")

    def __add__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._check_compatible(other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def left_traces(self):
        """Values at cell right endpoints, taken from inside each cell (xi = +1)."""
        return self.coeffs.sum(axis=1)

    def right_traces(self):
        """Values at cell left endpoints, taken from inside each cell (xi = -1)."""
        signs = (-1.0) ** np.arange(self.degree + 1)
        return self.coeffs @ signs


@dataclass(frozen=True)
class TraceValue:
    """One-sided limits at a mesh node (periodic wrap at the domain ends)."""

    node_index: int
    left: complex   # limit from the cell on the left
    right: complex  # limit from the cell on the right

    @property
    def gap(self):
        return self.left - self.right


def eval_field(f, x, side="left"):
    """Evaluate a DG field at ``x``; ``side`` matters only exactly at nodes."""
    mesh = f.mesh
    if x < mesh.left or x > mesh.right:
        raise DomainError(f"x={x} outside [{mesh.left}, {mesh.right}]")
    if side not in ("left", "right"):
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")
    if side == "left":
        j = int(np.searchsorted(mesh.nodes, x, side="left")) - 1
    else:
        j = int(np.searchsorted(mesh.nodes, x, side="right")) - 1
    if j < 0:  # left limit at the left endpoint wraps to the last cell
        j, xi = mesh.n_cells - 1, 1.0
    elif j >= mesh.n_cells:  # right limit at the right endpoint wraps to cell 0
        j, xi = 0, -1.0
    else:
        xi = 2.0 * (x - mesh.centers[j]) / mesh.widths[j]
        xi = min(1.0, max(-1.0, xi))
    return complex(np.polynomial.legendre.legval(xi, f.coeffs[j]))


def trace_values(f):
    """One-sided limits at the mesh interfaces, one entry per periodic node."""
    left = f.left_traces()
    right = np.roll(f.right_traces(), -1)  # node j+1/2 sees cell j+1 (wrap)
    return [TraceValue(j + 1, complex(left[j]), complex(right[j])) for j in range(f.mesh.n_cells)]


def _eval_callable(func, points):
    vals = np.asarray(func(points))
    if vals.shape != points.shape:
        vals = np.reshape([func(p) for p in points.ravel()], points.shape)
    return vals


def cell_quad_points(mesh, quad):
    """Physical quadrature points, shape (n_cells, order)."""
    return mesh.centers[:, None] + 0.5 * mesh.widths[:, None] * quad.nodes[None, :]


def project_l2(func, mesh, degree, quad=None):
    """Cell-wise L2 projection onto degree-``degree`` Legendre expansions."""
    quad = quad or Quadrature.gauss(degree + 3)
    pts = cell_quad_points(mesh, quad)
    vals = _eval_callable(func, pts)
    phi = legendre_basis(degree, quad.nodes)  # (k+1, nq)
    scale = (2.0 * np.arange(degree + 1) + 1.0) / 2.0
    coeffs = np.einsum("jq,mq,q->jm", vals, phi, quad.weights) * scale[None, :]
    return DGField(mesh, degree, coeffs)


def project_minus(func, mesh, degree, quad=None):
    """Projection matching moments against lower degrees plus the right endpoint.

    In the Legendre basis the moment conditions decouple: modes ``0..k-1``
    coincide with the plain L2 projection and the top mode is fixed by exact
    interpolation at each cell's right endpoint (P_m(1) = 1 for all m).
    """
    quad = quad or Quadrature.gauss(degree + 3)
    coeffs = np.zeros((mesh.n_cells, degree + 1), dtype=np.complex128)
    if degree > 0:
        low = project_l2(func, mesh, degree - 1, quad)
        coeffs[:, :degree] = low.coeffs
    right_nodes = mesh.nodes[1:]
    f_right = _eval_callable(func, right_nodes)
    coeffs[:, degree] = f_right - coeffs[:, :degree].sum(axis=1)
    return DGField(mesh, degree, coeffs)


def l2_inner(a, b):
    """Exact integral of ``a * conj(b)`` via Legendre orthogonality."""
    a._check_compatible(b)
    mode_weights = a.mesh.widths[:, None] / (2.0 * np.arange(a.degree + 1) + 1.0)[None, :]
    return complex(np.sum(a.coeffs * np.conj(b.coeffs) * mode_weights))


def l2_norm(a):
    mode_weights = a.mesh.widths[:, None] / (2.0 * np.arange(a.degree + 1) + 1.0)[None, :]
    return float(np.sqrt(np.sum((a.coeffs.real**2 + a.coeffs.imag**2) * mode_weights)))


def l2_error(f, func, n_quad=None):
    """Dense-quadrature L2 distance between a DG field and a callable."""
    nq = n_quad or (f.degree + 8)
    quad = Quadrature.gauss(nq)
    pts = cell_quad_points(f.mesh, quad)
    exact = _eval_callable(func, pts)
    phi = legendre_basis(f.degree, quad.nodes)
    approx = f.coeffs @ phi
    err2 = np.sum(np.abs(approx - exact) ** 2 * quad.weights[None, :], axis=1)
    return float(np.sqrt(np.sum(err2 * 0.5 * f.mesh.widths)))
