"""Newton solver for the implicit pressure subsystems.

Each implicit substep of either scheme reduces to one nonlinear system over
the interior cells,

    f(u_c) - sum_k w_k(c) * (h(u)_{c+o_k} - h(u)_c) = rhs_c,

with f and h increasing pointwise maps and nonnegative weights w_k.  The
pressure-variable form has nonlinear f (pressure -> congestion ratio) and
h = identity; the density form has f = identity and nonlinear h (density ->
congestion pressure).  Neighbor values resolve through the grid's ghost
maps, so the implicit operator sees exactly the boundary treatment of the
explicit stencils.

Newton with projection onto box bounds and residual line search solves the
system; the linear stages are direct in one dimension (banded, or cyclic
tridiagonal chains under periodicity) and a Jacobi-preconditioned conjugate
gradient on a symmetrized form in two.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import cg, splu

from congested_euler.grid import Grid, Periodic, pad_field


@dataclass(frozen=True)
class NewtonReport:
    iterations: int
    residual: float
    converged: bool


class NewtonError(RuntimeError):
    def __init__(self, message: str, report: NewtonReport):
        super().__init__(
            f"{message} (iterations={report.iterations}, "
            f"residual={report.residual:.3e})"
        )
        self.report = report


def _shifted(grid: Grid, padded, width: int, offset):
    """Interior-shaped view of a padded array displaced by a stencil offset."""
    if grid.ndim == 1:
        return padded[width + offset : width + offset + grid.nx]
    dj, di = offset
    return padded[
        width + dj : width + dj + grid.ny, width + di : width + di + grid.nx
    ]


@dataclass(eq=False)
class DiffusionOperator:
    """Weighted-difference operator sum_k w_k (g_{c+o_k} - g_c).

    ``terms`` holds (offset, weight) pairs with field-shaped nonnegative
    weights; offsets are ints in 1D and (dj, di) pairs in 2D.  Ghost
    neighbors alias interior cells through the grid's ghost map; neighbors
    beyond a fixed-state side read the per-side values in ``g_boundary``.
    """

    grid: Grid
    width: int
    terms: list
    g_boundary: np.ndarray | None = None

    def __post_init__(self):
        self._built = None

    def apply(self, g):
        """Reference evaluation through ghost padding."""
        gp = pad_field(self.grid, g, self.width, "scalar", self.g_boundary)
        g = np.asarray(g, dtype=float).reshape(self.grid.shape)
        out = np.zeros(self.grid.shape)
        for off, w in self.terms:
            out += np.asarray(w) * (_shifted(self.grid, gp, self.width, off) - g)
        return out

    def matrix(self):
        """(A, b) with apply(g).ravel() == A @ g.ravel() + b."""
        if self._built is None:
            gm = self.grid.ghost_map(self.width)
            n = self.grid.size
            rows, cols, vals = [], [], []
            b = np.zeros(n)
            c = np.arange(n)
            for off, w in self.terms:
                wf = np.asarray(w, dtype=float).ravel()
                nb = np.asarray(_shifted(self.grid, gm.src, self.width, off)).ravel()
                inside = nb >= 0
                rows.append(c[inside])
                cols.append(nb[inside])
                vals.append(wf[inside])
                rows.append(c)
                cols.append(c)
                vals.append(-wf)
                if not inside.all():
                    if self.g_boundary is None:
                        raise ValueError(
                            "fixed-state side present but no boundary g given"
                        )
                    gb = np.asarray(self.g_boundary, dtype=float)
                    b[c[~inside]] += wf[~inside] * gb[-1 - nb[~inside]]
            A = sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(n, n),
            ).tocsr()
            self._built = (A, b)
        return self._built


@dataclass(eq=False)
class EllipticProblem:
    """f(u) - L h(u) = rhs over the interior cells.

    ``kind`` labels the variable: "pi" (pressure unknown, h = identity) or
    "rho" (density unknown, f = identity); it only steers diagnostics, the
    solve itself is generic.  All callables act elementwise on flat arrays.
    """

    kind: str
    op: DiffusionOperator
    rhs: np.ndarray
    f: Callable
    fprime: Callable
    h: Callable
    hprime: Callable

    def residual(self, u):
        A, b = self.op.matrix()
        return self.f(u) - (A @ self.h(u) + b) - np.asarray(self.rhs, float).ravel()


def _solve_cyclic_tridiagonal(d, lo, up, b):
    """Solve the cyclic tridiagonal system along one periodic chain.

    ``lo[p]`` couples to p-1 (wrapping at p = 0), ``up[p]`` to p+1 (wrapping
    at p = m-1).  Rank-one correction of an ordinary tridiagonal solve.
    """
    m = d.size
    if m <= 3:
        M = np.zeros((m, m))
        M[np.arange(m), np.arange(m)] = d
        for p in range(m):
            M[p, (p + 1) % m] += up[p]
            M[p, (p - 1) % m] += lo[p]
        return np.linalg.solve(M, b)
    beta, gamma = lo[0], up[-1]
    sigma = -d[0]
    dt = d.copy()
    dt[0] -= sigma
    dt[-1] -= gamma * beta / sigma
    ab = np.zeros((3, m))
    ab[0, 1:] = up[:-1]
    ab[1] = dt
    ab[2, :-1] = lo[1:]
    rhs = np.zeros((m, 2))
    rhs[:, 0] = b
    rhs[0, 1] = sigma
    rhs[-1, 1] = gamma
    sol = solve_banded((1, 1), ab, rhs)
    y, z = sol[:, 0], sol[:, 1]
    frac = beta / sigma
    return y - z * ((y[0] + frac * y[-1]) / (1.0 + z[0] + frac * z[-1]))


def _symmetrized(op: DiffusionOperator, fp, hp):
    """Matrix of [diag(fp/hp) - A]; x = that system's solution gives delta = x/hp."""
    A, _ = op.matrix()
    return sp.diags(fp / hp) - A


def _solve_linear(op: DiffusionOperator, fp, hp, b, cg_rtol: float):
    """Solve [diag(fp) - A diag(hp)] delta = b through the symmetrized form."""
    grid = op.grid
    n = grid.size
    if grid.ndim == 2:
        S = _symmetrized(op, fp, hp).tocsr()
        precond = sp.diags(1.0 / S.diagonal())
        x, info = cg(S, b, rtol=cg_rtol, atol=0.0, M=precond)
        if info != 0:
            raise RuntimeError(f"inner pressure solve stalled (cg info={info})")
        return x / hp

    periodic = all(isinstance(bc, Periodic) for bc in grid.bc_x)
    strides = {abs(int(off)) for off, _ in op.terms}
    if periodic and len(strides) == 1 and n >= 8:
        s = strides.pop()
        d = fp / hp
        up = np.zeros(n)
        lo = np.zeros(n)
        for off, w in op.terms:
            wf = np.asarray(w, dtype=float).ravel()
            d = d + wf
            if off > 0:
                up -= wf
            else:
                lo -= wf
        x = np.empty(n)
        for k in range(gcd(s, n)):
            idx = (k + s * np.arange(n // gcd(s, n))) % n
            x[idx] = _solve_cyclic_tridiagonal(d[idx], lo[idx], up[idx], b[idx])
        return x / hp

    S = _symmetrized(op, fp, hp).tocsr()
    if periodic:
        # mixed strides wrap outside any band; rare, handled directly
        return splu(S.tocsc()).solve(b) / hp
    bw = max(strides)
    ab = np.zeros((2 * bw + 1, n))
    for k in range(-bw, bw + 1):
        diagk = S.diagonal(k)
        if k >= 0:
            ab[bw - k, k:] = diagk
        else:
            ab[bw - k, : n + k] = diagk
    return solve_banded((bw, bw), ab, b) / hp


def _check_diagonal_dominance(problem: EllipticProblem, fp, hp):
    A, _ = problem.op.matrix()
    J = (sp.diags(fp) - A @ sp.diags(hp)).tocsr()
    M = J if problem.kind == "pi" else J.T.tocsr()
    diag = M.diagonal()
    offsum = np.asarray(abs(M).sum(axis=1)).ravel() - np.abs(diag)
    slack = 1e-12 * np.maximum(1.0, np.abs(diag))
    if np.any(diag <= 0.0) or np.any(offsum > diag + slack):
        worst = int(np.argmax(offsum - diag))
        raise AssertionError(
            f"lost diagonal dominance at cell {worst}: "
            f"diag={diag[worst]:.3e}, off-diagonal sum={offsum[worst]:.3e}"
        )


def solve_newton(
    problem: EllipticProblem,
    u0,
    *,
    tol_abs: float = 1e-10,
    tol_rel: float = 1e-12,
    max_iter: int = 100,
    lower=None,
    upper=None,
    iterate_hook=None,
    debug: bool = False,
    cg_rtol: float = 1e-13,
):
    """Projected Newton iteration on an :class:`EllipticProblem`.

    Converges when the max-norm residual falls below ``tol_abs`` or shrinks
    by ``tol_rel`` relative to the start.  After every update the iterate is
    clipped into [lower, upper] (either bound may be None, a scalar, or a
    field); ``iterate_hook`` sees each accepted iterate *before* clipping,
    which is where bound violations carry information.  Returns
    ``(u, NewtonReport)`` and raises :class:`NewtonError` when stuck.
    """
    grid = problem.op.grid
    lo = None if lower is None else np.asarray(lower, dtype=float).ravel()
    hi = None if upper is None else np.asarray(upper, dtype=float).ravel()

    def clip(u):
        if lo is not None:
            u = np.maximum(u, lo)
        if hi is not None:
            u = np.minimum(u, hi)
        return u

    u = clip(np.asarray(u0, dtype=float).ravel().copy())
    F = problem.residual(u)
    res = float(np.max(np.abs(F)))
    res0 = res
    if res <= tol_abs:
        return u.reshape(grid.shape), NewtonReport(0, res, True)

    stalls = 0
    recent = [res]
    for it in range(1, max_iter + 1):
        fp = np.asarray(problem.fprime(u), dtype=float).ravel()
        hp = np.asarray(problem.hprime(u), dtype=float).ravel()
        if debug:
            _check_diagonal_dominance(problem, fp, hp)
        delta = _solve_linear(problem.op, fp, hp, -F, cg_rtol)
        if not np.all(np.isfinite(delta)):
            raise NewtonError("non-finite Newton step", NewtonReport(it, res, False))
        step = 1.0
        accepted = None
        full_trial = None
        for _ in range(31):
            u_raw = u + step * delta
            u_try = clip(u_raw)
            F_try = problem.residual(u_try)
            res_try = float(np.max(np.abs(F_try)))
            if full_trial is None:
                full_trial = (u_raw, u_try, F_try, res_try)
            if res_try < res or res_try <= tol_abs:
                accepted = (u_raw, u_try, F_try, res_try)
                stalls = 0
                break
            step *= 0.5
        if accepted is None:
            # A cell pinned near a bound freezes the max norm for a few
            # iterations, and can even let it creep up while its neighbors
            # settle; accept full steps within a nonmonotone window so the
            # pinned cell keeps healing, but refuse genuine divergence.
            if full_trial[3] <= 1.5 * max(recent):
                accepted = full_trial
                stalls += 1
            if accepted is None or stalls > 50:
                raise NewtonError("line search stalled", NewtonReport(it, res, False))
        u_raw, u, F, res = accepted
        recent.append(res)
        del recent[:-10]
        if iterate_hook is not None:
            iterate_hook(u_raw.reshape(grid.shape))
        if res <= tol_abs or res <= tol_rel * res0:
            return u.reshape(grid.shape), NewtonReport(it, res, True)
    raise NewtonError("no convergence", NewtonReport(max_iter, res, False))
