import numpy as np
import pytest
from hypothesis import given, strategies as st

from congested_euler.grid import (
    BOTTOM,
    LEFT,
    RIGHT,
    TOP,
    Dirichlet,
    Grid,
    GridState,
    OutflowWindow,
    Periodic,
    Wall,
    dirichlet_values,
    interior,
    l1_error,
    pad_field,
    total_mass,
)


def test_periodic_pad_1d_hand_case():
    g = Grid(nx=5)
    f = np.arange(5.0)
    out = pad_field(g, f, 2)
    np.testing.assert_array_equal(out, [3, 4, 0, 1, 2, 3, 4, 0, 1])


def test_wall_pad_1d_hand_case():
    g = Grid(nx=4, bc_x=(Wall(), Wall()))
    f = np.arange(4.0) + 1.0
    # scalars mirror without sign: [2,1, 1,2,3,4, 4,3]
    np.testing.assert_array_equal(pad_field(g, f, 2), [2, 1, 1, 2, 3, 4, 4, 3])
    # normal momentum mirrors with flipped sign
    np.testing.assert_array_equal(
        pad_field(g, f, 2, kind="q1"), [-2, -1, 1, 2, 3, 4, -4, -3]
    )


def test_dirichlet_pad_1d():
    bcl = Dirichlet(rho=0.7, q1=0.8, Z=7.0 / 12.0)
    bcr = Dirichlet(rho=0.7, q1=-0.8, Z=0.7)
    g = Grid(nx=4, bc_x=(bcl, bcr))
    st8 = GridState.from_primitives(g, 1.0, 0.5, 2.0)
    padded_rho = st8.padded(g, "rho", 2)
    np.testing.assert_allclose(padded_rho, [0.7, 0.7, 1, 1, 1, 1, 0.7, 0.7])
    padded_q1 = st8.padded(g, "q1", 1)
    np.testing.assert_allclose(padded_q1, [0.8, 0.5, 0.5, 0.5, 0.5, -0.8])
    # exterior rho_star derives from the fixed state
    np.testing.assert_allclose(
        st8.padded(g, "rho_star", 1), [1.2, 2, 2, 2, 2, 1.0]
    )
    with pytest.raises(ValueError):
        pad_field(g, st8.rho, 1)  # no exterior values supplied


def test_outflow_window_splits_bottom_side():
    g = Grid(
        nx=10,
        bc_x=(Wall(), Wall()),
        ny=4,
        bc_y=(OutflowWindow(0.4, 0.6), Wall()),
    )
    gm = g.ghost_map(1)
    # bottom ghost row j=-1 sits at padded row 0; window spans centers 0.45, 0.55
    row_sign = gm.sign_q2[0, 1:-1]
    expected = np.where((g.centers_x >= 0.4) & (g.centers_x <= 0.6), 1.0, -1.0)
    np.testing.assert_array_equal(row_sign, expected)
    # either way the ghost aliases the first interior row
    np.testing.assert_array_equal(gm.src[0, 1:-1], np.arange(10))


def test_corner_ghosts_compose_both_rules():
    g = Grid(nx=3, bc_x=(Wall(), Wall()), ny=3, bc_y=(Wall(), Wall()))
    gm = g.ghost_map(1)
    # corner ghost (-1,-1) mirrors cell (0,0) and flips both components
    assert gm.src[0, 0] == 0
    assert gm.sign_q1[0, 0] == -1.0 and gm.sign_q2[0, 0] == -1.0
    # edge ghost left of (0, 1): flips q1 only
    assert gm.src[2, 0] == 3 and gm.sign_q1[2, 0] == -1.0 and gm.sign_q2[2, 0] == 1.0


def test_periodic_pad_2d_wraps_both_axes():
    g = Grid(nx=4, ny=3)
    f = np.arange(12.0).reshape(3, 4)
    out = pad_field(g, f, 1)
    assert out.shape == (5, 6)
    np.testing.assert_array_equal(interior(g, out, 1), f)
    np.testing.assert_array_equal(out[0, 1:-1], f[-1])
    np.testing.assert_array_equal(out[1:-1, 0], f[:, -1])
    assert out[0, 0] == f[-1, -1]


def test_dirichlet_x_periodic_y_2d():
    bcl = Dirichlet(rho=1.0, q1=2.0, Z=0.5)
    g = Grid(nx=3, bc_x=(bcl, bcl), ny=2)
    stt = GridState.from_primitives(g, 0.5, 0.0, 1.0, 0.0)
    padded = stt.padded(g, "q1", 1)
    np.testing.assert_array_equal(padded[1:-1, 0], [2.0, 2.0])
    np.testing.assert_array_equal(padded[1:-1, -1], [2.0, 2.0])
    vals = dirichlet_values(g, "rho_star")
    assert vals[LEFT] == pytest.approx(2.0) and vals[RIGHT] == pytest.approx(2.0)
    assert np.isnan(vals[BOTTOM]) and np.isnan(vals[TOP])


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(nx=0)
    with pytest.raises(ValueError):
        Grid(nx=4, bc_x=(Periodic(), Wall()))
    with pytest.raises(ValueError):
        Grid(nx=4, bc_y=(Wall(), Wall()))
    with pytest.raises(ValueError):
        Grid(nx=2, bc_x=(Wall(), Wall())).ghost_map(3)  # mirror leaves the grid


def test_mass_and_l1_weighting():
    g1 = Grid(nx=8)
    assert total_mass(g1, np.full(8, 2.0)) == pytest.approx(2.0)
    g2 = Grid(nx=4, ny=8)
    assert total_mass(g2, np.ones((8, 4))) == pytest.approx(1.0)
    assert l1_error(g2, np.ones((8, 4)), np.zeros((8, 4))) == pytest.approx(1.0)


def test_state_consistency_helpers():
    g = Grid(nx=6)
    stt = GridState.from_primitives(g, rho=0.7, v1=8.0 / 7.0, rho_star=1.2)
    np.testing.assert_allclose(stt.q1, 0.8)
    np.testing.assert_allclose(stt.Z, 0.7 / 1.2)
    other = stt.copy()
    other.rho[0] = 99.0
    assert stt.rho[0] == pytest.approx(0.7)


@given(st.integers(4, 12), st.integers(1, 3), st.data())
def test_padding_preserves_constants(n, w, data):
    bc = data.draw(st.sampled_from(["periodic", "wall", "outflow"]))
    bcs = {
        "periodic": (Periodic(), Periodic()),
        "wall": (Wall(), Wall()),
        "outflow": (OutflowWindow(0.0, 1.0), OutflowWindow(0.0, 1.0)),
    }[bc]
    if bc != "periodic" and w > n:
        w = n
    g = Grid(nx=n, bc_x=bcs)
    out = pad_field(g, np.full(n, 3.5), w)
    np.testing.assert_array_equal(out, 3.5)


@given(st.integers(4, 12), st.integers(1, 4))
def test_wall_pad_antisymmetric_momentum(n, w):
    w = min(w, n)
    g = Grid(nx=n, bc_x=(Wall(), Wall()))
    rng = np.random.default_rng(0)
    q = rng.standard_normal(n)
    out = pad_field(g, q, w, kind="q1")
    for k in range(w):
        assert out[w - 1 - k] == -out[w + k]
        assert out[w + n + k] == -out[w + n - 1 - k]
