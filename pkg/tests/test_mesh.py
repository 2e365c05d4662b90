"""Mesh, quadrature, field evaluation, projections and L2 machinery."""

import numpy as np
import pytest

from sldg import (
    DGField,
    DomainError,
    MeshMismatchError,
    build_mesh,
    eval_field,
    l2_error,
    l2_inner,
    l2_norm,
    mesh_from_nodes,
    project_l2,
    project_minus,
    trace_values,
)
from sldg.lab import fit_order
from sldg.mesh import Quadrature, cell_quad_points, legendre_basis


def test_build_mesh_uniform():
    m = build_mesh(0.0, 1.0, 4)
    np.testing.assert_allclose(m.nodes, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert m.h == 0.25
    assert m.regularity == pytest.approx(1.0)


def test_build_mesh_negative_domain():
    m = build_mesh(-1.0, 1.0, 8)
    assert m.h == pytest.approx(0.25)
    assert m.nodes.size == 9


def test_build_mesh_rejects_bad_input():
    with pytest.raises(DomainError):
        build_mesh(0.0, 1.0, 1)
    with pytest.raises(DomainError):
        build_mesh(1.0, 0.0, 4)
    with pytest.raises(DomainError):
        mesh_from_nodes([0.0, 0.5, 0.25, 1.0])


def test_mesh_nonuniform_regularity():
    m = mesh_from_nodes([0.0, 0.1, 0.5, 1.0])
    assert m.h == pytest.approx(0.5)
    assert m.regularity == pytest.approx(0.2)


@pytest.mark.parametrize("order", [1, 2, 3, 5, 8])
def test_quadrature_exact_on_monomials(order):
    quad = Quadrature.gauss(order)
    for m in range(2 * order):
        exact = 0.0 if m % 2 else 2.0 / (m + 1)
        approx = float(np.sum(quad.weights * quad.nodes**m))
        assert approx == pytest.approx(exact, abs=1e-13)


def test_eval_field_constant():
    m = build_mesh(0.0, 1.0, 4)
    coeffs = np.zeros((4, 2), dtype=complex)
    coeffs[:, 0] = 1.0
    f = DGField(m, 1, coeffs)
    for x in (0.0, 0.3, 0.5, 1.0):
        assert eval_field(f, x) == pytest.approx(1.0)


def test_eval_field_continuous_interp_matches_both_sides():
    m = build_mesh(0.0, 1.0, 8)
    f = project_minus(lambda x: np.asarray(x) ** 1, m, 1)
    left = eval_field(f, 0.5, side="left")
    right = eval_field(f, 0.5, side="right")
    assert left == pytest.approx(right, abs=1e-14)
    assert left == pytest.approx(0.5, abs=1e-14)


def test_eval_field_step_function_two_sided():
    # projecting a discontinuity aligned with a node keeps distinct traces
    m = build_mesh(0.0, 1.0, 4)
    step = lambda x: np.where(np.asarray(x) < 0.5, 0.0, 1.0)
    f = project_l2(step, m, 2)
    left = eval_field(f, 0.5, side="left")
    right = eval_field(f, 0.5, side="right")
    # brute force: evaluate the two cell polynomials directly
    xi = np.array([1.0]), np.array([-1.0])
    expect_left = complex((f.coeffs[1] @ legendre_basis(2, xi[0])).item())
    expect_right = complex((f.coeffs[2] @ legendre_basis(2, xi[1])).item())
    assert left == pytest.approx(expect_left, abs=1e-14)
    assert right == pytest.approx(expect_right, abs=1e-14)
    assert abs(left - right) > 0.5


def test_eval_field_outside_domain():
    m = build_mesh(0.0, 1.0, 4)
    f = DGField.zeros(m, 1)
    with pytest.raises(DomainError):
        eval_field(f, 1.5)


def test_eval_field_periodic_wrap_at_endpoints():
    m = build_mesh(0.0, 1.0, 4)
    f = project_minus(lambda x: np.exp(2j * np.pi * np.asarray(x)), m, 2)
    assert eval_field(f, 0.0, side="left") == pytest.approx(
        eval_field(f, 1.0, side="left"), abs=1e-14)
    assert eval_field(f, 1.0, side="right") == pytest.approx(
        eval_field(f, 0.0, side="right"), abs=1e-14)


@pytest.mark.parametrize("proj", [project_l2, project_minus])
@pytest.mark.parametrize("degree", [1, 2, 3])
def test_projections_reproduce_polynomials(proj, degree):
    # any piecewise element of the space is a fixed point of both projections
    m = build_mesh(-1.0, 2.0, 5)
    rng = np.random.default_rng(degree)
    coeffs = rng.standard_normal((5, degree + 1)) + 1j * rng.standard_normal((5, degree + 1))
    target = DGField(m, degree, coeffs)

    def func(x):
        # left-side traces: interior quadrature points are unaffected and the
        # endpoint interpolation of the target's own right-endpoint values is
        # exactly what the projection reproduces
        flat = np.asarray(x, dtype=float).ravel()
        vals = np.array([eval_field(target, v, side="left") for v in flat])
        return vals.reshape(np.shape(x))

    again = proj(func, m, degree)
    np.testing.assert_allclose(again.coeffs, target.coeffs, atol=1e-12)


def test_project_constant_hits_mode_zero_only():
    m = build_mesh(0.0, 1.0, 6)
    f = project_l2(lambda x: np.full_like(np.asarray(x, dtype=float), 3.5), m, 3)
    np.testing.assert_allclose(f.coeffs[:, 0], 3.5, atol=1e-13)
    np.testing.assert_allclose(f.coeffs[:, 1:], 0.0, atol=1e-13)


def test_projection_linearity():
    m = build_mesh(0.0, 1.0, 8)
    f = lambda x: np.sin(2 * np.pi * np.asarray(x))
    g = lambda x: np.cos(4 * np.pi * np.asarray(x))
    combo = project_l2(lambda x: 2.0 * f(x) - 3.0 * g(x), m, 2)
    parts = 2.0 * project_l2(f, m, 2) - 3.0 * project_l2(g, m, 2)
    np.testing.assert_allclose(combo.coeffs, parts.coeffs, atol=1e-13)


def test_project_minus_interpolates_right_endpoints():
    m = build_mesh(0.0, 1.0, 8)
    f = lambda x: np.sin(2 * np.pi * np.asarray(x)) + 0.3
    pf = project_minus(f, m, 2)
    for j in range(m.n_cells):
        node = m.nodes[j + 1]
        assert eval_field(pf, node, side="left") == pytest.approx(f(node), abs=1e-13)


@pytest.mark.parametrize("proj", [project_l2, project_minus])
@pytest.mark.parametrize("degree", [1, 2, 3])
def test_projection_error_slope(proj, degree):
    f = lambda x: np.sin(2 * np.pi * np.asarray(x))
    points = []
    for n_cells in (8, 16, 32, 64):
        m = build_mesh(0.0, 1.0, n_cells)
        points.append((m.h, l2_error(proj(f, m, degree), f)))
    slope = fit_order(points)
    assert degree + 0.8 <= slope <= degree + 1.2


def test_trace_gap_rate_of_endpoint_projection():
    # root of the summed squared interface gaps of the endpoint-matching
    # projection decays like h^(k+1/2)
    f = lambda x: np.sin(2 * np.pi * np.asarray(x))
    for degree in (1, 2):
        points = []
        for n_cells in (8, 16, 32, 64):
            m = build_mesh(0.0, 1.0, n_cells)
            gaps = trace_values(project_minus(f, m, degree))
            points.append((m.h, np.sqrt(sum(abs(t.gap) ** 2 for t in gaps))))
        slope = fit_order(points)
        assert degree + 0.2 <= slope <= degree + 0.8


def test_l2_inner_and_norm():
    m = build_mesh(0.0, 1.0, 4)
    one = project_l2(lambda x: np.ones_like(np.asarray(x, dtype=float)), m, 2)
    assert l2_norm(one) == pytest.approx(1.0, abs=1e-14)
    # distinct Legendre modes are orthogonal
    a = DGField.zeros(m, 2).with_coeffs(np.eye(3, dtype=complex)[None, 0].repeat(4, 0))
    b = DGField.zeros(m, 2).with_coeffs(np.eye(3, dtype=complex)[None, 1].repeat(4, 0))
    assert l2_inner(a, b) == pytest.approx(0.0, abs=1e-15)


def test_l2_inner_matches_dense_quadrature():
    rng = np.random.default_rng(7)
    m = mesh_from_nodes(np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, 6)), [1.0]]))
    shape = (m.n_cells, 3)
    f = DGField(m, 2, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    g = DGField(m, 2, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    # independent oracle: 12-point Gauss rule per cell on the product
    quad = Quadrature.gauss(12)
    phi = legendre_basis(2, quad.nodes)
    fv = f.coeffs @ phi
    gv = g.coeffs @ phi
    oracle = np.sum((fv * np.conj(gv)) * quad.weights[None, :] * (0.5 * m.widths)[:, None])
    assert l2_inner(f, g) == pytest.approx(complex(oracle), abs=1e-12)


def test_l2_inner_rejects_mismatched_fields():
    f = DGField.zeros(build_mesh(0.0, 1.0, 4), 1)
    g = DGField.zeros(build_mesh(0.0, 1.0, 5), 1)
    with pytest.raises(MeshMismatchError):
        l2_inner(f, g)


def test_field_immutable_and_finite():
    m = build_mesh(0.0, 1.0, 4)
    f = DGField.zeros(m, 1)
    with pytest.raises(ValueError):
        f.coeffs[0, 0] = 1.0
    with pytest.raises(ValueError):
        DGField(m, 1, np.full((4, 2), np.nan))


def test_cell_quad_points_cover_cells():
    m = build_mesh(0.0, 1.0, 4)
    quad = Quadrature.gauss(3)
    pts = cell_quad_points(m, quad)
    assert pts.shape == (4, 3)
    assert np.all(pts[0] > 0.0) and np.all(pts[0] < 0.25)
