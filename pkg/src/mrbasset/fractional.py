"""Half-order fractional operators on sampled paths.

Everything here works on discrete samples of a function over a strictly
increasing time grid.  The singular integrals are evaluated with a product
trapezoidal rule: on each grid cell the integrand is replaced by its linear
interpolant and the moments against the ``(t - s)**-0.5`` kernel are computed
in closed form, so the quadrature is exact for piecewise-linear data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TimeGrid",
    "SampledPath",
    "AbelWeights",
    "basset_weights",
    "basset_integral",
    "caputo_half_derivative",
    "rl_half_derivative",
    "right_rl_half_derivative",
    "wallis",
]

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing sample times ``t_0 < t_1 < ... < t_N``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("grid needs at least two points")
        if not np.all(np.diff(pts) > 0.0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, t0: float, t1: float, n_steps: int) -> "TimeGrid":
        if n_steps < 1:
            raise ValueError("need at least one step")
        if not t1 > t0:
            raise ValueError("end time must exceed start time")
        return cls(np.linspace(float(t0), float(t1), n_steps + 1))

    @property
    def t0(self) -> float:
        return float(self.points[0])

    @property
    def t_end(self) -> float:
        return float(self.points[-1])

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def step(self) -> float | None:
        """Common step size, or None when the grid is not uniform."""
        d = np.diff(self.points)
        h = d[0]
        if np.allclose(d, h, rtol=1e-12, atol=1e-14 * max(1.0, abs(h))):
            return float(h)
        return None

    def __len__(self) -> int:
        return self.points.size

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        """Index of the grid point equal to ``t`` (within ``tol``)."""
        i = int(np.argmin(np.abs(self.points - t)))
        if abs(self.points[i] - t) > tol * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a grid point")
        return i


@dataclass(frozen=True)
class SampledPath:
    """Function samples ``values[j] ~ f(t_j)`` over a :class:`TimeGrid`.

    ``values`` has shape ``(len(grid),)`` for scalar paths or
    ``(len(grid), n)`` for vector paths.
    """

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[0] != len(self.grid):
            raise ValueError("values and grid length mismatch")
        if vals.ndim not in (1, 2):
            raise ValueError("values must be 1-D or 2-D")
        object.__setattr__(self, "values", vals)

    @property
    def is_scalar(self) -> bool:
        return self.values.ndim == 1


@dataclass(frozen=True)
class AbelWeights:
    """Quadrature weights for ``int_{t_0}^{t_n} f(s) (t_n - s)**-1/2 ds``.

    ``weights[j]`` multiplies ``f(t_j)``; the rule integrates the
    piecewise-linear interpolant of the samples exactly, including the
    square-root singularity at the upper limit.
    """

    target_index: int
    weights: np.ndarray


def _cell_moments(a: np.ndarray, b: np.ndarray):
    """Kernel moments over one cell, in shifted variable ``v = t_n - s``.

    With ``a = t_n - t_j`` and ``b = t_n - t_{j+1}`` (``a > b >= 0``):
    ``m0 = int_b^a v**-1/2 dv`` and ``m1 = int_b^a (a - v) v**-1/2 dv``
    (the weight of the growing linear hat on the cell).
    """
    sa = np.sqrt(a)
    sb = np.sqrt(b)
    # Factored forms: sqrt(a) - sqrt(b) = (a - b) / (sqrt(a) + sqrt(b)) and
    # 2a - sqrt(ab) - b = (a - b)(1 + sqrt(a) / (sqrt(a) + sqrt(b))).  The
    # naive differences cancel catastrophically when the cell is far from the
    # singularity (a ~ b), destroying piecewise-linear exactness on
    # nonuniform grids.
    d = a - b
    s = sa + sb
    m0 = 2.0 * d / s
    m1 = (2.0 / 3.0) * (d * d / s) * (1.0 + sa / s)
    return m0, m1


def basset_weights(grid: TimeGrid, n: int) -> AbelWeights:
    """Product-trapezoidal weights targeting grid index ``n >= 1``."""
    if not 1 <= n <= grid.n_steps:
        raise ValueError("target index out of range")
    pts = grid.points
    tn = pts[n]
    a = tn - pts[:n]
    b = tn - pts[1 : n + 1]
    h = pts[1 : n + 1] - pts[:n]
    m0, m1 = _cell_moments(a, b)
    wr = m1 / h
    weights = np.zeros(n + 1)
    weights[:n] += m0 - wr
    weights[1:] += wr
    return AbelWeights(target_index=n, weights=weights)


class _UniformAbelCache:
    """Lag-indexed weight tables for a uniform grid of step ``h``.

    On a uniform grid the cell moments depend only on the lag ``d = n - j``,
    so the per-target weight vector is assembled from two cached tables.
    """

    def __init__(self, h: float, n_max: int):
        self.h = h
        d = np.arange(1, n_max + 1, dtype=float)
        a = d * h
        b = (d - 1.0) * h
        m0, m1 = _cell_moments(a, b)
        self.right = m1 / h          # weight of node at lag d-1 from cell lag d
        self.left = m0 - self.right  # weight of node at lag d

    def weights(self, n: int) -> np.ndarray:
        w = np.zeros(n + 1)
        # node j (0 <= j < n) is the left node of the cell with lag n - j
        w[:n] += self.left[n - 1 :: -1]
        # node j (1 <= j <= n) is the right node of the cell with lag n - j + 1
        w[1:] += self.right[n - 1 :: -1]
        return w


def _weights_for(grid: TimeGrid, n: int, cache: _UniformAbelCache | None = None) -> np.ndarray:
    if cache is not None:
        return cache.weights(n)
    return basset_weights(grid, n).weights


def basset_integral(path: SampledPath, n: int) -> np.ndarray:
    """``int_{t_0}^{t_n} f(s) (t_n - s)**-1/2 ds`` from the samples."""
    w = basset_weights(path.grid, n).weights
    return w @ path.values[: n + 1]


def caputo_half_derivative(path: SampledPath, n: int) -> np.ndarray:
    """Caputo derivative of order 1/2 at ``t_n``.

    Abel integral of the derivative of the piecewise-linear interpolant,
    scaled by ``1/Gamma(1/2)``.
    """
    if not 1 <= n <= path.grid.n_steps:
        raise ValueError("target index out of range")
    pts = path.grid.points
    tn = pts[n]
    a = tn - pts[:n]
    b = tn - pts[1 : n + 1]
    h = (pts[1 : n + 1] - pts[:n])
    m0, _ = _cell_moments(a, b)
    slopes = np.diff(path.values[: n + 1], axis=0) / (h[:, None] if path.values.ndim == 2 else h)
    if path.values.ndim == 2:
        return (m0 @ slopes) / SQRT_PI
    return float(m0 @ slopes) / SQRT_PI


def rl_half_derivative(path: SampledPath, n: int) -> np.ndarray:
    """Riemann-Liouville derivative of order 1/2 at ``t_n``.

    Uses the boundary identity ``RL = Caputo + f(t_0) / sqrt(pi (t_n - t_0))``
    so the only quadrature needed is the Caputo one.
    """
    pts = path.grid.points
    dt = pts[n] - pts[0]
    boundary = path.values[0] / math.sqrt(math.pi * dt)
    return caputo_half_derivative(path, n) + boundary


def right_rl_half_derivative(path: SampledPath, n: int, b: float) -> np.ndarray:
    """Right-sided Riemann-Liouville derivative of order 1/2 at ``t_n``.

    The integral runs forward from ``t_n`` to the terminal time ``b``, which
    must coincide with a grid point.  Implemented by reflecting time
    (``s -> -s``) and delegating to the left-sided operator, under which the
    two definitions coincide.
    """
    m = path.grid.index_of(b)
    if m <= n:
        raise ValueError("terminal time must lie strictly beyond t_n")
    rev_pts = -path.grid.points[n : m + 1][::-1]
    rev_vals = path.values[n : m + 1][::-1]
    rev = SampledPath(TimeGrid(rev_pts.copy()), np.ascontiguousarray(rev_vals))
    return rl_half_derivative(rev, m - n)


def wallis(k: int) -> float:
    """``int_0^1 sqrt(x**k / (1 - x)) dx`` via the two-term recurrence.

    Seeds are the closed forms ``a_0 = 2`` and ``a_1 = pi/2``; thereafter
    ``a_k = k / (k + 1) * a_{k-2}``.  The sequence decays like ``1/sqrt(k)``.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    a = [2.0, math.pi / 2.0]
    if k < 2:
        return a[k]
    val = a[k % 2]
    for j in range(2 + (k % 2), k + 1, 2):
        val *= j / (j + 1.0)
    return val


def wallis_sequence(k_max: int) -> np.ndarray:
    """``[a_0, ..., a_k_max]`` in one sweep of the recurrence."""
    if k_max < 0:
        raise ValueError("k_max must be nonnegative")
    out = np.empty(k_max + 1)
    out[0] = 2.0
    if k_max >= 1:
        out[1] = math.pi / 2.0
    for k in range(2, k_max + 1):
        out[k] = k / (k + 1.0) * out[k - 2]
    return out
