"""Trajectory solvers for the particle model with history drag.

The state is ``(y, w)`` where ``y`` is the particle position and ``w`` the
relative velocity against the (Faxen-corrected) carrier flow.  In integrated
form the dynamics read::

    y(t) = y0 + int_{t0}^t [ w + A(y, s) ] ds
    w(t) = w0 + int_{t0}^t [ -mu w - M(y, s) w + B(y, s) ] ds
              - basset * int_{t0}^t w(s) / sqrt(t - s) ds

with ``basset = kappa * sqrt(mu)``.  The history kernel depends on the
evaluation time ``t`` inside the integral, so every accepted step re-weights
the complete past; the marching scheme keeps full memory (O(N^2) work) and
solves the implicit final node by fixed-point iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flowfield import FlowField, Params, derived_coefficients
from .fractional import SampledPath, TimeGrid, _UniformAbelCache, basset_weights

__all__ = [
    "State",
    "Trajectory",
    "PicardBox",
    "SolverError",
    "solve",
    "picard_local",
    "picard_radius",
]

MAX_INNER_ITERATIONS = 50


class SolverError(RuntimeError):
    """Raised when an implicit node or a local map fails to converge."""


@dataclass(frozen=True)
class State:
    """Position and relative velocity at one instant."""

    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=float)))
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(self.w, dtype=float)))
        if self.y.shape != self.w.shape:
            raise ValueError("y and w must have matching shapes")

    def packed(self) -> np.ndarray:
        return np.concatenate([self.y, self.w])


@dataclass
class Trajectory:
    """Discrete solution on a grid.

    ``ys`` and ``ws`` have shape ``(len(grid), n)``.  ``residuals[m]``
    records the inner-iteration count that produced node ``m``;
    ``restarts`` lists the times at which the continuation was restarted.
    """

    grid: TimeGrid
    ys: np.ndarray
    ws: np.ndarray
    scheme: str
    residuals: np.ndarray
    restarts: list[float] = field(default_factory=list)

    @property
    def states(self) -> list[State]:
        return [State(self.ys[i], self.ws[i]) for i in range(len(self.grid))]

    def state(self, i: int) -> State:
        return State(self.ys[i], self.ws[i])

    def final_state(self) -> State:
        return self.state(len(self.grid) - 1)

    def w_path(self) -> SampledPath:
        return SampledPath(self.grid, self.ws)

    def y_path(self) -> SampledPath:
        return SampledPath(self.grid, self.ys)


@dataclass(frozen=True)
class PicardBox:
    """Domain certificate for the local fixed-point map.

    ``K`` bounds the sup-norm ball radius around the starting state and
    ``delta`` the window length; ``L_b``, ``L_c``, ``A0``, ``B0`` are the
    coefficient bounds the certificate was derived from.
    """

    K: float
    delta: float
    L_b: float
    L_c: float
    A0: float
    B0: float

    def conditions(self, p: Params) -> tuple[float, float, float]:
        """Left-hand sides of the three smallness conditions.

        Condition values must stay below ``(1/5, 1/4, K/4)`` respectively.
        """
        d = self.delta
        c1 = d + p.mu * d + 2.0 * p.basset * math.sqrt(d) + 3.0 * self.L_b * d
        c2 = (2.0 + self.K) * self.L_c * d
        c3 = (2.0 * self.L_b * d + self.A0 + self.B0) * d
        return c1, c2, c3

    def validate(self, p: Params) -> None:
        c1, c2, c3 = self.conditions(p)
        if not (c1 < 0.2 and c2 < 0.25 and c3 < self.K / 4.0):
            raise ValueError(
                f"picard box conditions violated: {c1:.4g} !< 1/5, "
                f"{c2:.4g} !< 1/4, {c3:.4g} !< K/4 = {self.K / 4.0:.4g}")


def picard_radius(p: Params, bounds, R_bound: float, t0: float, T: float) -> PicardBox:
    """Largest dyadic window certified by the contraction estimates.

    ``bounds = (L_b, L_c, A0, B0)``.  ``K = 4 max(R_bound,
    2 R_bound sqrt(T - t0))`` and ``delta`` is the largest ``2**-k``
    satisfying all three smallness conditions (the strictest constant, 1/5,
    is used for the first).
    """
    L_b, L_c, A0, B0 = bounds
    if T <= t0:
        raise ValueError("T must exceed t0")
    K = 4.0 * max(R_bound, 2.0 * R_bound * math.sqrt(T - t0))
    if K <= 0.0:
        K = 1.0
    for k in range(0, 61):
        delta = 2.0**-k
        box = PicardBox(K=K, delta=delta, L_b=L_b, L_c=L_c, A0=A0, B0=B0)
        c1, c2, c3 = box.conditions(p)
        if c1 < 0.2 and c2 < 0.25 and c3 < K / 4.0:
            return box
    raise ValueError("no dyadic window satisfies the contraction conditions")


def _regular_rhs(field: FlowField, p: Params, y, w, t):
    """Non-history integrands ``(y', w' - history term)`` at one node."""
    c = derived_coefficients(field, p, y, t)
    ry = w + c.A
    rw = -p.mu * w - c.M @ w + c.B
    return ry, rw


def _march(field: FlowField, p: Params, grid: TimeGrid, ys, ws, start: int,
           tol: float, residuals, stop: int | None = None) -> None:
    """Fill nodes ``start..stop`` of ``ys``/``ws`` in place.

    Nodes ``< start`` are trusted history (continuation restarts resume
    mid-grid); the discrete equations always integrate from the grid origin,
    so a restarted run reproduces the single-pass solution.
    """
    pts = grid.points
    N = grid.n_steps if stop is None else stop
    h_uniform = grid.step
    cache = _UniformAbelCache(h_uniform, N) if h_uniform is not None else None
    c = p.basset

    ry_prev, rw_prev = _regular_rhs(field, p, ys[start - 1], ws[start - 1], pts[start - 1])
    if start >= 2:
        wts_prev = (cache.weights(start - 1) if cache is not None
                    else basset_weights(grid, start - 1).weights)
        hist_prev = wts_prev @ ws[:start]
    else:
        hist_prev = np.zeros_like(ws[0])

    for m in range(start, N + 1):
        h = pts[m] - pts[m - 1]
        wts = cache.weights(m) if cache is not None else basset_weights(grid, m).weights
        hist_fixed = wts[:m] @ ws[:m]
        w_self = wts[m]
        y_g = ys[m - 1].copy()
        w_g = ws[m - 1].copy()
        iterations = 0
        for iterations in range(1, MAX_INNER_ITERATIONS + 1):
            ry, rw = _regular_rhs(field, p, y_g, w_g, pts[m])
            y_new = ys[m - 1] + 0.5 * h * (ry_prev + ry)
            w_new = (ws[m - 1] + 0.5 * h * (rw_prev + rw)
                     - c * (hist_fixed + w_self * w_g - hist_prev))
            delta = max(float(np.max(np.abs(y_new - y_g))),
                        float(np.max(np.abs(w_new - w_g))))
            y_g, w_g = y_new, w_new
            if not np.all(np.isfinite(y_g)) or not np.all(np.isfinite(w_g)):
                raise SolverError(
                    f"solution diverged at t = {pts[m]:.6g} (step {m}); "
                    "check the a-priori bound for this configuration")
            if delta < tol:
                break
        else:
            raise SolverError(
                f"implicit node at t = {pts[m]:.6g} did not converge within "
                f"{MAX_INNER_ITERATIONS} iterations (last update {delta:.3g})")
        ys[m] = y_g
        ws[m] = w_g
        residuals[m] = iterations
        ry_prev, rw_prev = _regular_rhs(field, p, y_g, w_g, pts[m])
        hist_prev = hist_fixed + w_self * w_g


def _picard_windows(field: FlowField, p: Params, grid: TimeGrid, ys, ws,
                    tol: float, residuals, window_steps: int, restarts) -> None:
    """Solve the same discrete system window-by-window by fixed-point sweeps.

    Every node of the current window is updated simultaneously from the
    previous sweep (the discrete analogue of iterating the local solution
    map), so the limit coincides with the node-by-node marching solution.
    """
    pts = grid.points
    N = grid.n_steps
    h_uniform = grid.step
    cache = _UniformAbelCache(h_uniform, N) if h_uniform is not None else None
    c = p.basset

    start = 1
    while start <= N:
        stop = min(start + window_steps - 1, N)  # window nodes start..stop
        if start > 1:
            restarts.append(float(pts[start - 1]))
        base_ry, base_rw = _regular_rhs(field, p, ys[start - 1], ws[start - 1], pts[start - 1])
        # seed: constant extension of the window-start state
        for m in range(start, stop + 1):
            ys[m] = ys[start - 1]
            ws[m] = ws[start - 1]
        wts_all = {m: (cache.weights(m) if cache is not None
                       else basset_weights(grid, m).weights)
                   for m in range(start, stop + 1)}
        sweeps = 0
        for sweeps in range(1, MAX_INNER_ITERATIONS + 1):
            delta = 0.0
            new_y = {}
            new_w = {}
            # regular integrand along the current iterate
            reg = [(base_ry, base_rw)]
            for m in range(start, stop + 1):
                reg.append(_regular_rhs(field, p, ys[m], ws[m], pts[m]))
            for m in range(start, stop + 1):
                wts = wts_all[m]
                hist = wts @ ws[: m + 1]
                ry_acc = ys[start - 1].copy()
                rw_acc = ws[start - 1].copy()
                for j in range(start, m + 1):
                    hj = pts[j] - pts[j - 1]
                    ry_acc = ry_acc + 0.5 * hj * (reg[j - start][0] + reg[j - start + 1][0])
                    rw_acc = rw_acc + 0.5 * hj * (reg[j - start][1] + reg[j - start + 1][1])
                if start >= 2:
                    wts_s = (cache.weights(start - 1) if cache is not None
                             else basset_weights(grid, start - 1).weights)
                    hist_start = wts_s @ ws[:start]
                else:
                    hist_start = np.zeros_like(ws[0])
                new_y[m] = ry_acc
                new_w[m] = rw_acc - c * (hist - hist_start)
            for m in range(start, stop + 1):
                delta = max(delta,
                            float(np.max(np.abs(new_y[m] - ys[m]))),
                            float(np.max(np.abs(new_w[m] - ws[m]))))
                ys[m] = new_y[m]
                ws[m] = new_w[m]
            if not np.all(np.isfinite(ws[stop])):
                raise SolverError(
                    f"solution diverged near t = {pts[stop]:.6g}; "
                    "check the a-priori bound for this configuration")
            if delta < tol:
                break
        else:
            raise SolverError(
                f"fixed-point window [{pts[start - 1]:.6g}, {pts[stop]:.6g}] "
                f"did not converge within {MAX_INNER_ITERATIONS} sweeps")
        for m in range(start, stop + 1):
            residuals[m] = sweeps
        start = stop + 1


def solve(field: FlowField, p: Params, ic: State, t0: float, T: float, N: int,
          scheme: str = "marching", tol: float = 1e-12,
          restart_at: float | None = None, window_steps: int = 32) -> Trajectory:
    """Integrate the particle model on a uniform grid of ``N`` steps.

    ``scheme`` is ``"marching"`` (implicit node-by-node) or ``"picard"``
    (windowed fixed-point sweeps); both solve the same discrete system.
    ``restart_at`` forces the marching scheme to stop at a grid time and
    resume with carried history, exercising the continuation bookkeeping.
    """
    if scheme not in ("marching", "picard"):
        raise ValueError(f"unknown scheme: {scheme!r}")
    if ic.y.size != field.dim:
        raise ValueError(
            f"initial condition has dimension {ic.y.size}, field expects {field.dim}")
    if p.g.size != field.dim:
        raise ValueError(
            f"gravity vector has dimension {p.g.size}, field expects {field.dim}")
    grid = TimeGrid.uniform(t0, T, N)
    n = ic.y.size
    ys = np.zeros((N + 1, n))
    ws = np.zeros((N + 1, n))
    residuals = np.zeros(N + 1, dtype=int)
    ys[0] = ic.y
    ws[0] = ic.w
    restarts: list[float] = []
    if scheme == "picard":
        _picard_windows(field, p, grid, ys, ws, tol, residuals, window_steps, restarts)
    elif restart_at is None:
        _march(field, p, grid, ys, ws, 1, tol, residuals)
    else:
        r = grid.index_of(restart_at)
        if not 0 < r < N:
            raise ValueError("restart time must be an interior grid point")
        _march(field, p, grid, ys, ws, 1, tol, residuals, stop=r)
        restarts.append(float(grid.points[r]))
        _march(field, p, grid, ys, ws, r + 1, tol, residuals)
    return Trajectory(grid=grid, ys=ys, ws=ws, scheme=scheme,
                      residuals=residuals, restarts=restarts)


def _cross_weights(hist_pts: np.ndarray, t: float) -> np.ndarray:
    """Weights for ``int f(s) (t - s)**-1/2 ds`` over a past grid, ``t`` beyond it.

    Same piecewise-linear product rule as :func:`basset_weights`, but the
    evaluation time lies at or beyond the last history point, so the kernel
    may be regular throughout.
    """
    a = t - hist_pts[:-1]
    b = t - hist_pts[1:]
    h = np.diff(hist_pts)
    sa = np.sqrt(a)
    sb = np.sqrt(np.maximum(b, 0.0))
    m0 = 2.0 * (sa - sb)
    m1 = a * m0 - (2.0 / 3.0) * (a * sa - b * sb)
    wr = m1 / h
    w = np.zeros(hist_pts.size)
    w[:-1] += m0 - wr
    w[1:] += wr
    return w


@dataclass
class PicardLocalResult:
    """Output of one certified local fixed-point solve."""

    trajectory: Trajectory
    iterations: int
    contraction_ratios: list[float]
    contraction_ok: bool


def picard_local(field: FlowField, p: Params, start: State, t1: float,
                 box: PicardBox, m: int = 33,
                 history: SampledPath | None = None,
                 tol: float = 1e-12) -> PicardLocalResult:
    """Iterate the local solution map on ``[t1, t1 + box.delta]``.

    ``history`` supplies ``w`` on ``[t0, t1]`` for the memory-correction
    term; omit it when ``t1`` is the initial time.  The iteration starts
    from the constant extension of ``start`` and records the ratio of
    successive update norms, flagging any ratio above the certified 1/2.
    """
    box.validate(p)
    grid = TimeGrid.uniform(t1, t1 + box.delta, m - 1)
    pts = grid.points
    n = start.y.size
    ys = np.tile(start.y, (m, 1))
    ws = np.tile(start.w, (m, 1))
    c = p.basset

    # memory correction: int_{t0}^{t1} w(s) [ (t1-s)^-1/2 - (t-s)^-1/2 ] ds
    mem_corr = np.zeros((m, n))
    if history is not None and history.grid.t_end < t1 + 1e-12 and len(history.grid) >= 2:
        hpts = history.grid.points
        hvals = history.values if history.values.ndim == 2 else history.values[:, None]
        w_t1 = _cross_weights(hpts, t1)
        base = w_t1 @ hvals
        for i in range(m):
            w_t = _cross_weights(hpts, pts[i])
            mem_corr[i] = base - w_t @ hvals

    wts_all = [None] + [basset_weights(grid, i).weights for i in range(1, m)]
    ratios: list[float] = []
    prev_update = None
    iterations = 0
    for iterations in range(1, MAX_INNER_ITERATIONS + 1):
        reg = [_regular_rhs(field, p, ys[i], ws[i], pts[i]) for i in range(m)]
        new_y = np.empty_like(ys)
        new_w = np.empty_like(ws)
        new_y[0] = start.y
        new_w[0] = start.w
        ry_acc = start.y.astype(float).copy()
        rw_acc = start.w.astype(float).copy()
        for i in range(1, m):
            h = pts[i] - pts[i - 1]
            ry_acc = ry_acc + 0.5 * h * (reg[i - 1][0] + reg[i][0])
            rw_acc = rw_acc + 0.5 * h * (reg[i - 1][1] + reg[i][1])
            new_y[i] = ry_acc
            new_w[i] = rw_acc - c * (wts_all[i] @ ws[: i + 1]) + c * mem_corr[i]
        update = max(float(np.max(np.abs(new_y - ys))), float(np.max(np.abs(new_w - ws))))
        ys, ws = new_y, new_w
        if prev_update is not None and prev_update > 0.0:
            ratios.append(update / prev_update)
        prev_update = update
        if update < tol:
            break
    else:
        raise SolverError("local fixed-point map did not converge")
    # ignore ratios once updates hit the roundoff floor
    meaningful = [r for r, u in zip(ratios, _update_trail(prev_update, ratios)) if u > 100 * tol]
    contraction_ok = all(r <= 0.5 + 1e-9 for r in meaningful) if meaningful else True
    traj = Trajectory(grid=grid, ys=ys, ws=ws, scheme="picard_local",
                      residuals=np.full(m, iterations, dtype=int))
    return PicardLocalResult(trajectory=traj, iterations=iterations,
                             contraction_ratios=ratios, contraction_ok=contraction_ok)


def _update_trail(last_update: float, ratios: list[float]) -> list[float]:
    """Reconstruct the update-size sequence backwards from the final one."""
    sizes = [last_update]
    for r in reversed(ratios):
        sizes.append(sizes[-1] / r if r > 0 else float("inf"))
    sizes.reverse()
    return sizes[1:]
