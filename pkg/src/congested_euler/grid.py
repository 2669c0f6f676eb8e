"""Uniform grids, boundary conditions, and ghost-cell maps.

A :class:`Grid` covers [0, 1] in one dimension or [0, 1]^2 in two, with cell
centers at (i + 1/2) * dx.  Fields live on numpy arrays shaped ``(nx,)`` or
``(ny, nx)``; the flat index of cell (i, j) is ``j * nx + i``.

Boundaries are handled through ghost maps: for a padding width ``w``, every
ghost cell either aliases an interior cell (periodic wrap, or mirror for
reflecting and zero-gradient sides) together with a sign for each momentum
component, or holds a fixed exterior value.  Explicit stencils, the implicit
pressure systems, and characteristic-foot interpolation all read the same
map, so every part of a scheme sees identical boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEFT, RIGHT, BOTTOM, TOP = range(4)


@dataclass(frozen=True)
class Periodic:
    pass


@dataclass(frozen=True)
class Wall:
    """Reflecting side: normal momentum flips sign, everything else mirrors."""


@dataclass(frozen=True)
class Dirichlet:
    """Exterior state held fixed for all time."""

    rho: float
    q1: float
    Z: float
    q2: float = 0.0

    def value(self, name: str) -> float:
        if name == "rho_star":
            return self.rho / self.Z
        return getattr(self, name)


@dataclass(frozen=True)
class OutflowWindow:
    """Zero-gradient where the tangential coordinate lies in [lo, hi], wall outside."""

    lo: float
    hi: float


def _alias_1d(v, n, bcs, t):
    """Alias virtual index v (possibly outside [0, n)) along one axis.

    Returns (index, normal_sign, dirichlet_side) where exactly one of index
    (in [0, n)) or dirichlet_side (0 for the low side, 1 for the high side)
    is meaningful.  ``t`` is the tangential coordinate used by window tests;
    pass None on an axis with no tangential direction.
    """
    if 0 <= v < n:
        return v, 1.0, None
    side = 0 if v < 0 else 1
    bc = bcs[side]
    if isinstance(bc, Periodic):
        return v % n, 1.0, None
    if isinstance(bc, Dirichlet):
        return -1, 1.0, side
    mirror = -v - 1 if v < 0 else 2 * n - 1 - v
    if not 0 <= mirror < n:
        raise ValueError("ghost width exceeds grid size at a reflecting side")
    if isinstance(bc, Wall):
        return mirror, -1.0, None
    if isinstance(bc, OutflowWindow):
        if t is None or bc.lo <= t <= bc.hi:
            return mirror, 1.0, None
        return mirror, -1.0, None
    raise TypeError(f"unknown boundary condition {bc!r}")


@dataclass(frozen=True)
class GhostMap:
    """Padded-index resolution for one (grid, width) pair.

    ``src`` holds, per padded cell, the flat interior index it aliases, or
    ``-1 - side`` for cells carrying a fixed exterior value.  The sign arrays
    apply to the x and y momentum components respectively.
    """

    width: int
    src: np.ndarray
    sign_q1: np.ndarray
    sign_q2: np.ndarray


@dataclass(eq=False)
class Grid:
    nx: int
    bc_x: tuple = (Periodic(), Periodic())
    ny: int | None = None
    bc_y: tuple | None = None
    _ghost_maps: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.nx < 1:
            raise ValueError("nx must be at least 1")
        if self.ny is not None and self.ny < 1:
            raise ValueError("ny must be at least 1")
        if self.ny is not None and self.bc_y is None:
            self.bc_y = (Periodic(), Periodic())
        if self.ny is None and self.bc_y is not None:
            raise ValueError("bc_y given for a one-dimensional grid")
        for pair in (self.bc_x, self.bc_y) if self.ny else (self.bc_x,):
            if isinstance(pair[0], Periodic) != isinstance(pair[1], Periodic):
                raise ValueError("periodic sides must come in opposite pairs")

    @property
    def ndim(self) -> int:
        return 1 if self.ny is None else 2

    @property
    def dx(self) -> float:
        return 1.0 / self.nx

    @property
    def dy(self) -> float:
        return 1.0 / self.ny

    @property
    def shape(self):
        return (self.nx,) if self.ny is None else (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx if self.ny is None else self.nx * self.ny

    @property
    def cell_volume(self) -> float:
        return self.dx if self.ny is None else self.dx * self.dy

    @property
    def centers_x(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def centers_y(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    def cell_centers(self):
        """x array in 1D; (X, Y) arrays shaped like fields in 2D."""
        if self.ndim == 1:
            return self.centers_x
        return np.meshgrid(self.centers_x, self.centers_y)

    @property
    def boundaries(self) -> tuple:
        if self.ndim == 1:
            return (self.bc_x[0], self.bc_x[1])
        return (self.bc_x[0], self.bc_x[1], self.bc_y[0], self.bc_y[1])

    @property
    def has_dirichlet(self) -> bool:
        return any(isinstance(bc, Dirichlet) for bc in self.boundaries)

    def ghost_map(self, width: int) -> GhostMap:
        gm = self._ghost_maps.get(width)
        if gm is None:
            gm = self._build_ghost_map(width)
            self._ghost_maps[width] = gm
        return gm

    def _build_ghost_map(self, w: int) -> GhostMap:
        if self.ndim == 1:
            n = self.nx
            src = np.empty(n + 2 * w, dtype=np.int64)
            sq1 = np.ones(n + 2 * w)
            for k, v in enumerate(range(-w, n + w)):
                idx, sign, side = _alias_1d(v, n, self.bc_x, None)
                src[k] = idx if side is None else -1 - side
                sq1[k] = sign
            return GhostMap(w, src, sq1, np.ones_like(sq1))
        nx, ny = self.nx, self.ny
        shape = (ny + 2 * w, nx + 2 * w)
        src = np.empty(shape, dtype=np.int64)
        sq1 = np.ones(shape)
        sq2 = np.ones(shape)
        for kj, vj in enumerate(range(-w, ny + w)):
            y_t = (vj + 0.5) * self.dy
            for ki, vi in enumerate(range(-w, nx + w)):
                i_idx, sx, xside = _alias_1d(vi, nx, self.bc_x, y_t)
                if xside is not None:
                    src[kj, ki] = -1 - xside
                    continue
                x_t = (i_idx + 0.5) * self.dx
                j_idx, sy, yside = _alias_1d(vj, ny, self.bc_y, x_t)
                if yside is not None:
                    src[kj, ki] = -1 - (BOTTOM + yside)
                    continue
                src[kj, ki] = j_idx * nx + i_idx
                sq1[kj, ki] = sx
                sq2[kj, ki] = sy
        return GhostMap(w, src, sq1, sq2)


def pad_field(grid: Grid, values, width: int, kind: str = "scalar", dirichlet=None):
    """Extend a field by ``width`` ghost layers according to the grid's sides.

    ``kind`` selects the reflection sign ("q1", "q2", or "scalar").
    ``dirichlet`` supplies per-side exterior values (indexable by side
    constant) and is required when any side holds a fixed state.
    """
    gm = grid.ghost_map(width)
    flat = np.asarray(values, dtype=float).ravel()
    out = flat[np.maximum(gm.src, 0)]
    if kind == "q1":
        out = out * gm.sign_q1
    elif kind == "q2":
        out = out * gm.sign_q2
    elif kind != "scalar":
        raise ValueError(f"unknown field kind {kind!r}")
    fixed = gm.src < 0
    if fixed.any():
        if dirichlet is None:
            raise ValueError("fixed-state side present but no exterior values given")
        dvals = np.asarray(dirichlet, dtype=float)
        out[fixed] = dvals[-1 - gm.src[fixed]]
    return out


def interior(grid: Grid, padded, width: int):
    """View of the interior cells of a padded field."""
    if grid.ndim == 1:
        return padded[width:-width]
    return padded[width:-width, width:-width]


def dirichlet_values(grid: Grid, name: str) -> np.ndarray:
    """Per-side exterior values of a named state field (nan on other sides)."""
    vals = np.full(4, np.nan)
    for side, bc in enumerate(grid.boundaries):
        if isinstance(bc, Dirichlet):
            vals[side] = bc.value(name)
    return vals


_FIELD_KIND = {"rho": "scalar", "q1": "q1", "q2": "q2", "Z": "scalar", "rho_star": "scalar"}


@dataclass
class GridState:
    """Cell-averaged fields: density, momentum, congestion ratio Z = rho/rho_star."""

    rho: np.ndarray
    q1: np.ndarray
    Z: np.ndarray
    rho_star: np.ndarray
    q2: np.ndarray | None = None
    time: float = 0.0

    @classmethod
    def from_primitives(cls, grid: Grid, rho, v1, rho_star, v2=None):
        rho = np.broadcast_to(np.asarray(rho, float), grid.shape).copy()
        rho_star = np.broadcast_to(np.asarray(rho_star, float), grid.shape).copy()
        q1 = rho * np.broadcast_to(np.asarray(v1, float), grid.shape)
        q2 = None
        if grid.ndim == 2:
            v2 = 0.0 if v2 is None else v2
            q2 = rho * np.broadcast_to(np.asarray(v2, float), grid.shape)
        return cls(rho=rho, q1=q1, Z=rho / rho_star, rho_star=rho_star, q2=q2)

    def copy(self) -> "GridState":
        return GridState(
            rho=self.rho.copy(),
            q1=self.q1.copy(),
            Z=self.Z.copy(),
            rho_star=self.rho_star.copy(),
            q2=None if self.q2 is None else self.q2.copy(),
            time=self.time,
        )

    def padded(self, grid: Grid, name: str, width: int):
        dvals = dirichlet_values(grid, name) if grid.has_dirichlet else None
        return pad_field(grid, getattr(self, name), width, _FIELD_KIND[name], dvals)


def total_mass(grid: Grid, values) -> float:
    return float(np.sum(values) * grid.cell_volume)


def l1_error(grid: Grid, a, b) -> float:
    return float(np.sum(np.abs(np.asarray(a) - np.asarray(b))) * grid.cell_volume)
