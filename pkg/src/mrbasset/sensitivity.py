"""First-variation (sensitivity) system and its inverse evolution.

The derivative ``Dphi(t)`` of the discrete flow map with respect to the
initial state ``(y0, w0)`` solves the linearisation of the trajectory
equations along a base solution::

    Dy(t) = (I | O) + int [ Dw + M Dy ] ds
    Dw(t) = (O | I) + int [ (gradB - L) Dy - (mu I + M) Dw ] ds
                    - basset * int Dw(s) / sqrt(t - s) ds

where ``M``, ``L`` and ``gradB`` are evaluated along the base trajectory
(the drift gradient equals ``M``).  The same quadratures as the state solver
are used, so the computed ``Dphi`` is the exact Jacobian of the discrete
solution map up to the fixed-point tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flowfield import FlowField, Params, variational_coefficients
from .fractional import _UniformAbelCache, basset_weights
from .solver import State, Trajectory, solve

__all__ = [
    "SensitivityTrajectory",
    "solve_variational",
    "solve_inverse",
    "fd_jacobian",
    "separation_bounds",
    "spectral_norm",
]


@dataclass
class SensitivityTrajectory:
    """Base trajectory with the flow-map derivatives along it.

    ``Dphi[m]`` is the ``2n x 2n`` Jacobian of the state at ``t_m`` with
    respect to the initial state; ``Dphi_inv`` (when computed) holds the
    inverse evolution.
    """

    base: Trajectory
    Dphi: np.ndarray
    Dphi_inv: np.ndarray | None = None


def _coefficient_blocks(field: FlowField, p: Params, base: Trajectory):
    """``C[m]`` with blocks ``[[M, I], [gradB - L, -(mu I + M)]]`` per node."""
    pts = base.grid.points
    n = base.ys.shape[1]
    eye = np.eye(n)
    C = np.empty((len(pts), 2 * n, 2 * n))
    for m, t in enumerate(pts):
        M, L, gB = variational_coefficients(field, p, base.ys[m], t, base.ws[m])
        C[m, :n, :n] = M
        C[m, :n, n:] = eye
        C[m, n:, :n] = gB - L
        C[m, n:, n:] = -(p.mu * eye + M)
    return C


def solve_variational(field: FlowField, p: Params, base: Trajectory) -> SensitivityTrajectory:
    """March the linearised system along ``base``.

    Each step solves a small linear system for the implicit node directly,
    with full-memory history weights identical to the state solver's.
    """
    grid = base.grid
    pts = grid.points
    N = grid.n_steps
    n = base.ys.shape[1]
    dim = 2 * n
    c = p.basset
    cache = _UniformAbelCache(grid.step, N) if grid.step is not None else None
    C = _coefficient_blocks(field, p, base)
    J = np.zeros((dim, dim))
    J[n:, n:] = np.eye(n)

    X = np.empty((N + 1, dim, dim))
    X[0] = np.eye(dim)
    hist_prev = np.zeros((dim, dim))
    for m in range(1, N + 1):
        h = pts[m] - pts[m - 1]
        wts = cache.weights(m) if cache is not None else basset_weights(grid, m).weights
        # history only enters the lower (Dw) block
        hist_fixed = np.tensordot(wts[:m], X[:m], axes=(0, 0))
        hist_fixed[:n] = 0.0
        hp = hist_prev.copy()
        rhs = (X[m - 1] + 0.5 * h * (C[m - 1] @ X[m - 1])
               - c * (hist_fixed - hp))
        lhs = np.eye(dim) - 0.5 * h * C[m] + c * wts[m] * J
        X[m] = np.linalg.solve(lhs, rhs)
        hist_prev = hist_fixed + wts[m] * (J @ X[m])
    return SensitivityTrajectory(base=base, Dphi=X)


def solve_inverse(field: FlowField, p: Params, sens: SensitivityTrajectory,
                  tol: float = 1e-13) -> SensitivityTrajectory:
    """Evolve the inverse ``N(s)`` of the flow derivative, ``N Dphi = I``.

    Differentiating the inverse identity against the variational system
    gives the companion evolution

        dN = -N C ds + basset * N dG N,

    where ``G(s)`` is the history flux of the forward derivative,
    ``G(s) = int_{t0}^s J Dphi(r) (s - r)^-1/2 dr`` (``J`` projects on the
    ``Dw`` block).  ``G`` carries the square-root starting layer, so it is
    treated as a Stieltjes integrator: its increments are evaluated with the
    same product rule as the forward solve and the quadratic term uses the
    midpoint value of ``N``.  Implicit nodes are solved by fixed-point
    iteration.  The product ``N(s) Dphi(s)`` is the numerical check of the
    construction, not an assumption.

    Note the right-sided (backward-marching) formulation, with ``N(t) = I``
    and the kernel ``(r - s)^-1/2``, is *not* used: by reflection its
    solution reproduces the forward evolution rather than inverting it, and
    it fails the product check by an O(1) margin.
    """
    base = sens.base
    grid = base.grid
    pts = grid.points
    N_steps = grid.n_steps
    n = base.ys.shape[1]
    dim = 2 * n
    c = p.basset
    C = _coefficient_blocks(field, p, base)
    eye = np.eye(dim)
    cache = _UniformAbelCache(grid.step, N_steps) if grid.step is not None else None

    JD = sens.Dphi.copy()
    JD[:, :n, :] = 0.0  # J Dphi
    G = np.zeros_like(JD)
    for m in range(1, N_steps + 1):
        wts = cache.weights(m) if cache is not None else basset_weights(grid, m).weights
        G[m] = np.tensordot(wts, JD[: m + 1], axes=(0, 0))

    X = np.empty((N_steps + 1, dim, dim))
    X[0] = eye
    for m in range(1, N_steps + 1):
        h = pts[m] - pts[m - 1]
        dG = G[m] - G[m - 1]
        Xg = X[m - 1].copy()
        # strong memory coefficients slow the contraction to ~0.8/iter,
        # so the guard must sit well above the solver's 50
        for _ in range(600):
            mid = 0.5 * (X[m - 1] + Xg)
            Xn = (X[m - 1] - 0.5 * h * (X[m - 1] @ C[m - 1] + Xg @ C[m])
                  + c * (mid @ dG @ mid))
            delta = float(np.max(np.abs(Xn - Xg)))
            Xg = Xn
            if delta < tol:
                break
        else:
            raise RuntimeError(f"inverse-evolution node {m} did not converge")
        X[m] = Xg
    sens.Dphi_inv = X
    return sens


def fd_jacobian(field: FlowField, p: Params, ic: State, t0: float, T: float,
                N: int, h: float = 1e-6, scheme: str = "marching",
                tol: float = 1e-12) -> np.ndarray:
    """Central-difference Jacobian of the discrete flow map at time ``T``."""
    n = ic.y.size
    dim = 2 * n
    x0 = ic.packed()
    cols = []
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = h
        xp = x0 + e
        xm = x0 - e
        tp = solve(field, p, State(xp[:n], xp[n:]), t0, T, N, scheme=scheme, tol=tol)
        tm = solve(field, p, State(xm[:n], xm[n:]), t0, T, N, scheme=scheme, tol=tol)
        cols.append((tp.final_state().packed() - tm.final_state().packed()) / (2 * h))
    return np.stack(cols, axis=1)


def spectral_norm(A: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on ``A^T A``.

    Deterministic start vector; iterates until the Rayleigh quotient is
    stationary to ``tol`` (relative).
    """
    A = np.asarray(A, dtype=float)
    B = A.T @ A
    v = np.ones(B.shape[0]) / math.sqrt(B.shape[0])
    lam = 0.0
    for _ in range(max_iter):
        w = B @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        lam_new = float(v @ (B @ v))
        if abs(lam_new - lam) <= tol * max(1.0, abs(lam_new)):
            lam = lam_new
            break
        lam = lam_new
    return math.sqrt(max(lam, 0.0))


@dataclass
class SeparationBounds:
    """Two-sided trajectory-separation envelope from the flow derivatives."""

    expansion: float    # sup_t ||Dphi(t)||
    contraction: float  # sup_t ||Dphi(t)^-1||

    def ceiling(self, delta0: float) -> float:
        return self.expansion * delta0

    def floor(self, delta0: float) -> float:
        return delta0 / self.contraction


def separation_bounds(sens: SensitivityTrajectory) -> SeparationBounds:
    """Sup norms of the flow derivative and its inverse along the base.

    Initially nearby states stay within ``expansion * delta0`` and, by the
    inverse bound, at least ``delta0 / contraction`` apart (non-collision),
    to first order in the initial offset ``delta0``.
    """
    if sens.Dphi_inv is None:
        raise ValueError("inverse evolution not computed; run solve_inverse first")
    expansion = max(spectral_norm(M) for M in sens.Dphi)
    contraction = max(spectral_norm(M) for M in sens.Dphi_inv)
    return SeparationBounds(expansion=expansion, contraction=contraction)
