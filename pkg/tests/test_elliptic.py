import numpy as np
import pytest

from congested_euler.elliptic import (
    DiffusionOperator,
    EllipticProblem,
    NewtonError,
    _solve_cyclic_tridiagonal,
    solve_newton,
)
from congested_euler.grid import Dirichlet, Grid, OutflowWindow, Periodic, Wall, pad_field
from congested_euler.pressure import (
    PressureLaw,
    inverse_slope_floor,
    singular_pressure,
    singular_pressure_deriv,
    singular_pressure_inverse,
    singular_pressure_inverse_deriv,
)

LAW = PressureLaw(epsilon=1e-2, alpha=2.0, gamma=2.0)
RNG = np.random.default_rng(42)


def stride2_terms(grid, a, scale, a_boundary=None):
    """Face-coefficient stride-2 couplings, the pressure-form operator shape."""
    ap = pad_field(grid, a, 1, "scalar", a_boundary)
    if grid.ndim == 1:
        return [(+2, scale * ap[2:]), (-2, scale * ap[:-2])]
    return [
        ((0, +2), scale * ap[1:-1, 2:]),
        ((0, -2), scale * ap[1:-1, :-2]),
        ((+2, 0), scale * ap[2:, 1:-1]),
        ((-2, 0), scale * ap[:-2, 1:-1]),
    ]


def laplacian_terms(grid, scale):
    """Constant-coefficient stride-1 couplings, the density-form operator shape."""
    if grid.ndim == 1:
        w = np.full(grid.shape, scale)
        return [(+1, w), (-1, w.copy())]
    w = np.full(grid.shape, scale)
    return [((0, +1), w), ((0, -1), w.copy()), ((+1, 0), w.copy()), ((-1, 0), w.copy())]


def identity_problem(op, rhs):
    one = lambda u: np.ones_like(u)
    ident = lambda u: u
    return EllipticProblem(kind="pi", op=op, rhs=rhs, f=ident, fprime=one,
                           h=ident, hprime=one)


GRID_CASES = [
    Grid(nx=12),  # periodic, even cell count: two stride-2 chains
    Grid(nx=13),  # periodic, odd: one chain visiting every cell
    Grid(nx=10, bc_x=(Wall(), Wall())),
    Grid(nx=10, bc_x=(Dirichlet(rho=0.7, q1=0.8, Z=0.5), Wall())),
    Grid(nx=8, ny=6),
    Grid(nx=8, ny=6, bc_x=(Wall(), Wall()), bc_y=(OutflowWindow(0.3, 0.7), Wall())),
    Grid(nx=8, ny=6, bc_x=(Dirichlet(rho=1.0, q1=0.0, Z=0.5),) * 2),
]


def make_operator(grid, scale=0.3):
    a = 0.5 + RNG.random(grid.shape)
    a_boundary = np.full(4, 0.8) if grid.has_dirichlet else None
    g_boundary = np.full(4, 0.6) if grid.has_dirichlet else None
    return DiffusionOperator(
        grid, 2, stride2_terms(grid, a, scale, a_boundary), g_boundary
    )


@pytest.mark.parametrize("grid", GRID_CASES)
def test_matrix_agrees_with_padded_apply(grid):
    op = make_operator(grid)
    A, b = op.matrix()
    for _ in range(3):
        g = RNG.random(grid.shape)
        via_pad = op.apply(g).ravel()
        via_mat = A @ g.ravel() + b
        np.testing.assert_allclose(via_mat, via_pad, rtol=0, atol=1e-13)


@pytest.mark.parametrize("grid", GRID_CASES)
def test_operator_matrix_is_symmetric(grid):
    # face-shared coefficients make the coupling matrix symmetric, including
    # every kind of boundary folding
    A, _ = make_operator(grid).matrix()
    asym = abs(A - A.T).max()
    assert asym <= 1e-14


@pytest.mark.parametrize("grid", GRID_CASES)
def test_linear_solves_match_dense_oracle(grid):
    op = make_operator(grid, scale=0.2)
    A, b = op.matrix()
    u_exact = RNG.random(grid.size)
    rhs = u_exact - (A @ u_exact + b)
    u, report = solve_newton(identity_problem(op, rhs), np.zeros(grid.shape))
    assert report.converged and report.iterations == 1
    np.testing.assert_allclose(u.ravel(), u_exact, rtol=0, atol=1e-11)
    n = grid.size
    dense = np.linalg.solve(np.eye(n) - A.toarray(), rhs + b)
    np.testing.assert_allclose(u.ravel(), dense, rtol=0, atol=1e-11)


def test_laplacian_form_linear_solve():
    for grid in (Grid(nx=11), Grid(nx=9, bc_x=(Wall(), Wall())), Grid(nx=6, ny=5)):
        op = DiffusionOperator(grid, 1, laplacian_terms(grid, 0.7))
        A, b = op.matrix()
        u_exact = RNG.random(grid.size)
        rhs = u_exact - (A @ u_exact + b)
        u, report = solve_newton(identity_problem(op, rhs), np.zeros(grid.shape))
        assert report.converged
        np.testing.assert_allclose(u.ravel(), u_exact, rtol=0, atol=1e-11)


def test_cyclic_tridiagonal_matches_dense():
    for m in (2, 3, 4, 9, 17):
        d = 2.0 + RNG.random(m)
        lo = -RNG.random(m) * 0.5
        up = -RNG.random(m) * 0.5
        b = RNG.standard_normal(m)
        M = np.zeros((m, m))
        M[np.arange(m), np.arange(m)] = d
        for p in range(m):
            M[p, (p + 1) % m] += up[p]
            M[p, (p - 1) % m] += lo[p]
        x = _solve_cyclic_tridiagonal(d, lo, up, b)
        np.testing.assert_allclose(x, np.linalg.solve(M, b), rtol=0, atol=1e-12)


def pressure_problem(grid, op, rhs, law=LAW):
    floor = inverse_slope_floor(law)
    return EllipticProblem(
        kind="pi",
        op=op,
        rhs=rhs,
        f=lambda u: singular_pressure_inverse(u, law),
        fprime=lambda u: singular_pressure_inverse_deriv(np.maximum(u, floor), law),
        h=lambda u: u,
        hprime=lambda u: np.ones_like(u),
    )


def test_zero_coupling_reduces_to_analytic_inverse():
    grid = Grid(nx=16)
    op = DiffusionOperator(grid, 2, stride2_terms(grid, np.zeros(16), 1.0))
    target_Z = np.linspace(0.05, 0.9, 16)
    u, report = solve_newton(
        pressure_problem(grid, op, target_Z), np.full(16, 0.1), lower=0.0
    )
    assert report.converged
    np.testing.assert_allclose(u, singular_pressure(target_Z, LAW), rtol=1e-9)


@pytest.mark.parametrize(
    "grid",
    [Grid(nx=32), Grid(nx=33), Grid(nx=24, bc_x=(Wall(), Wall())), Grid(nx=12, ny=10)],
)
def test_nonlinear_manufactured_solution(grid, law=LAW):
    a = 0.5 + RNG.random(grid.shape)
    op = DiffusionOperator(grid, 2, stride2_terms(grid, a, 0.05))
    A, b = op.matrix()
    u_exact = (0.02 + 2.0 * RNG.random(grid.size)) ** 2
    rhs = singular_pressure_inverse(u_exact, law) - (A @ u_exact + b)
    problem = pressure_problem(grid, op, rhs, law)
    u, report = solve_newton(problem, np.full(grid.shape, 0.5), lower=0.0, debug=True)
    assert report.converged and report.iterations <= 30
    np.testing.assert_allclose(u.ravel(), u_exact, rtol=1e-7, atol=1e-9)
    assert np.max(np.abs(problem.residual(u.ravel()))) <= 1e-10


def test_density_form_manufactured_solution():
    # identity f, nonlinear h: the congestion pressure of rho / rho*
    rho_star = 1.2
    for grid in (Grid(nx=20), Grid(nx=8, ny=7, bc_x=(Wall(), Wall()))):
        op = DiffusionOperator(grid, 1, laplacian_terms(grid, 0.4))
        A, b = op.matrix()
        rho_exact = 0.3 + 0.6 * RNG.random(grid.size)
        rhs = rho_exact - (A @ singular_pressure(rho_exact / rho_star, LAW) + b)
        problem = EllipticProblem(
            kind="rho",
            op=op,
            rhs=rhs,
            f=lambda u: u,
            fprime=lambda u: np.ones_like(u),
            h=lambda u: singular_pressure(u / rho_star, LAW),
            hprime=lambda u: singular_pressure_deriv(u / rho_star, LAW) / rho_star,
        )
        u, report = solve_newton(
            problem, np.full(grid.shape, 0.5), lower=1e-10, upper=rho_star * (1 - 1e-10),
            debug=True,
        )
        assert report.converged and report.iterations <= 30
        np.testing.assert_allclose(u.ravel(), rho_exact, rtol=1e-8, atol=1e-10)


def test_jacobian_matches_directional_difference():
    grid = Grid(nx=18)
    a = 0.5 + RNG.random(18)
    op = DiffusionOperator(grid, 2, stride2_terms(grid, a, 0.1))
    problem = pressure_problem(grid, op, RNG.random(18))
    u = 0.1 + RNG.random(18)
    direction = RNG.standard_normal(18)
    h = 1e-7
    fd = (problem.residual(u + h * direction) - problem.residual(u - h * direction)) / (2 * h)
    A, _ = op.matrix()
    fp = singular_pressure_inverse_deriv(u, LAW)
    analytic = fp * direction - A @ direction
    np.testing.assert_allclose(fd, analytic, rtol=1e-6, atol=1e-8)


def test_projection_accepts_bound_solution():
    # slightly negative target: the root sits below the admissible range but
    # the clipped iterate already satisfies the tolerance
    grid = Grid(nx=8)
    op = DiffusionOperator(grid, 2, stride2_terms(grid, np.zeros(8), 1.0))
    rhs = np.zeros(8)
    rhs[3] = -1e-12
    u, report = solve_newton(pressure_problem(grid, op, rhs), np.full(8, 0.2), lower=0.0)
    assert report.converged
    assert u[3] == 0.0


def test_newton_error_carries_report():
    grid = Grid(nx=8)
    op = DiffusionOperator(grid, 2, stride2_terms(grid, np.zeros(8), 1.0))
    with pytest.raises(NewtonError) as err:
        solve_newton(pressure_problem(grid, op, -np.ones(8)), np.full(8, 0.2),
                     lower=0.0, max_iter=5)
    assert err.value.report.converged is False
    assert err.value.report.residual > 0.1


class Tripped(Exception):
    pass


def test_iterate_hook_sees_preclip_values():
    grid = Grid(nx=8)
    op = DiffusionOperator(grid, 2, stride2_terms(grid, np.zeros(8), 1.0))
    problem = identity_problem(op, np.full(8, -5.0))

    def hook(u_raw):
        if np.min(u_raw) < -1.0:
            raise Tripped

    with pytest.raises(Tripped):
        solve_newton(problem, np.zeros(8), iterate_hook=hook)


def test_dominance_check_flags_degenerate_diagonal():
    grid = Grid(nx=8)
    a = np.ones(8)
    op = DiffusionOperator(grid, 2, stride2_terms(grid, a, 0.3))
    problem = EllipticProblem(
        kind="pi", op=op, rhs=np.zeros(8),
        f=lambda u: u, fprime=lambda u: np.full_like(u, -0.5),  # wrong-signed slope
        h=lambda u: u, hprime=lambda u: np.ones_like(u),
    )
    with pytest.raises(AssertionError):
        solve_newton(problem, np.full(8, 0.5), debug=True)


def test_iteration_count_stays_flat_under_refinement():
    counts = []
    for n in (32, 128, 512):
        grid = Grid(nx=n)
        x = grid.centers_x
        a = 1.0 + 0.3 * np.sin(2 * np.pi * x)
        scale = 0.25 * 0.1**2  # dt = 0.1 dx makes the coupling mesh-free
        op = DiffusionOperator(grid, 2, stride2_terms(grid, a, scale))
        target_Z = 0.5 + 0.3 * np.sin(2 * np.pi * x + 1.0)
        A, b = op.matrix()
        u_exact = singular_pressure(target_Z, LAW)
        rhs = target_Z - (A @ u_exact + b)
        _, report = solve_newton(pressure_problem(grid, op, rhs),
                                 np.full(n, 0.05), lower=0.0)
        counts.append(report.iterations)
    assert max(counts) <= 12
    assert max(counts) - min(counts) <= 2
