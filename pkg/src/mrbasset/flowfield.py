"""Carrier flow fields, particle parameters and equation coefficients.

The particle model is written in terms of three coefficient maps built from
the carrier velocity field ``u`` and the parameter set:

* drift  ``A(x, t) = u + nu * lap(u)``
* drag matrix ``M(x, t) = grad(u) + nu * grad(lap(u))``
* forcing ``B(x, t)`` combining buoyancy, the material acceleration and the
  curvature (Faxen) corrections,

with ``nu = gamma / (6 mu)``.  Fields expose closed-form spatial derivatives
up to the orders these maps (and their own gradients) require.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Params",
    "derive_params",
    "FlowField",
    "ZeroField",
    "LinearField",
    "TaylorGreenField",
    "make_field",
    "Coefficients",
    "derived_coefficients",
    "variational_coefficients",
    "DerivativeReport",
    "verify_field_derivatives",
    "coefficient_constants",
]


@dataclass(frozen=True)
class Params:
    """Particle/fluid parameter set.

    ``R``, ``St`` and ``Re`` are the density ratio, Stokes and Reynolds
    numbers; ``mu``, ``kappa`` and ``gamma`` the rates derived from them.
    ``basset`` is the coefficient ``kappa * sqrt(mu)`` multiplying the
    history integral; it is stored explicitly so that time-reversed
    parameter sets (where ``mu`` is negated) remain representable.
    """

    mu: float
    kappa: float
    gamma: float
    g: np.ndarray
    basset: float
    R: float | None = None
    St: float | None = None
    Re: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float))

    @property
    def nu(self) -> float:
        """Faxen factor ``gamma / (6 mu)``."""
        if self.gamma == 0.0:
            return 0.0
        if self.mu == 0.0:
            raise ValueError("gamma > 0 with mu == 0 is singular")
        return self.gamma / (6.0 * self.mu)

    @property
    def gamma_over_mu(self) -> float:
        if self.gamma == 0.0:
            return 0.0
        return self.gamma / self.mu

    @property
    def density_ratio(self) -> float:
        """``R``, recovered from ``kappa`` when not given directly."""
        if self.R is not None:
            return self.R
        return 2.0 * math.pi * self.kappa**2 / 9.0

    def reversed(self) -> "Params":
        """Parameter set of the time-reversed problem.

        Negating the relaxation and history rates (and ``gamma``, so the
        Faxen ratios are preserved) turns the backward-in-time dynamics into
        a fresh forward problem for the reversed field.
        """
        return replace(self, mu=-self.mu, gamma=-self.gamma, basset=-self.basset)


def derive_params(R: float, St: float, Re: float, g=None, dim: int = 2) -> Params:
    """Build the rate parameters from ``(R, St, Re)``.

    ``mu = R / St``, ``kappa = sqrt(9 R / (2 pi))``, ``gamma = 9 R / (2 Re)``.
    """
    if not 0.0 < R <= 2.0:
        raise ValueError("density ratio R must lie in (0, 2]")
    if St <= 0.0 or Re <= 0.0:
        raise ValueError("St and Re must be positive")
    mu = R / St
    kappa = math.sqrt(9.0 * R / (2.0 * math.pi))
    gamma = 9.0 * R / (2.0 * Re)
    gv = np.zeros(dim) if g is None else np.asarray(g, dtype=float)
    return Params(mu=mu, kappa=kappa, gamma=gamma, g=gv,
                  basset=kappa * math.sqrt(mu), R=R, St=St, Re=Re)


def params_from_rates(mu: float, kappa: float, gamma: float, g=None, dim: int = 2) -> Params:
    """Build a parameter set directly from the rates ``(mu, kappa, gamma)``."""
    if mu < 0.0 or kappa < 0.0:
        raise ValueError("mu and kappa must be nonnegative")
    gv = np.zeros(dim) if g is None else np.asarray(g, dtype=float)
    return Params(mu=mu, kappa=kappa, gamma=gamma, g=gv,
                  basset=kappa * math.sqrt(mu))


class FlowField:
    """Base class: closed-form velocity field with spatial derivatives.

    Index conventions: ``grad_u[i, j] = d u_i / d x_j``,
    ``second_grad_u[i, j, l] = d^2 u_i / d x_j d x_l``; the ``lap_*``
    variants apply the same pattern to the componentwise Laplacian.
    """

    dim: int

    def u(self, x, t):
        raise NotImplementedError

    def grad_u(self, x, t):
        raise NotImplementedError

    def lap_u(self, x, t):
        raise NotImplementedError

    def grad_lap_u(self, x, t):
        raise NotImplementedError

    def second_grad_u(self, x, t):
        raise NotImplementedError

    def second_grad_lap_u(self, x, t):
        raise NotImplementedError

    def du_dt(self, x, t):
        return np.zeros(self.dim)

    def dlap_u_dt(self, x, t):
        return np.zeros(self.dim)

    def grad_du_dt(self, x, t):
        return np.zeros((self.dim, self.dim))

    def grad_dlap_u_dt(self, x, t):
        return np.zeros((self.dim, self.dim))

    def material_u(self, x, t):
        """``Du/Dt = du/dt + (u . grad) u``."""
        return self.du_dt(x, t) + self.grad_u(x, t) @ self.u(x, t)

    def material_lap_u(self, x, t):
        """``D(lap u)/Dt``."""
        return self.dlap_u_dt(x, t) + self.grad_lap_u(x, t) @ self.u(x, t)

    def reversed(self, t_end: float) -> "FlowField":
        """Field of the time-reversed problem: ``x, tau -> -u(x, t_end - tau)``."""
        return _ReversedField(self, t_end)


class ZeroField(FlowField):
    """Quiescent fluid."""

    def __init__(self, dim: int = 2):
        self.dim = dim

    def u(self, x, t):
        return np.zeros(self.dim)

    def grad_u(self, x, t):
        return np.zeros((self.dim, self.dim))

    def lap_u(self, x, t):
        return np.zeros(self.dim)

    def grad_lap_u(self, x, t):
        return np.zeros((self.dim, self.dim))

    def second_grad_u(self, x, t):
        return np.zeros((self.dim,) * 3)

    def second_grad_lap_u(self, x, t):
        return np.zeros((self.dim,) * 3)


class LinearField(FlowField):
    """``u(x, t) = A x + b0 + b1 t`` (affine in space, linear in time)."""

    def __init__(self, matrix, offset=None, offset_rate=None):
        self.A = np.asarray(matrix, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
            raise ValueError("matrix must be square")
        self.dim = self.A.shape[0]
        self.b0 = np.zeros(self.dim) if offset is None else np.asarray(offset, dtype=float)
        self.b1 = np.zeros(self.dim) if offset_rate is None else np.asarray(offset_rate, dtype=float)

    def u(self, x, t):
        return self.A @ np.asarray(x, dtype=float) + self.b0 + self.b1 * t

    def grad_u(self, x, t):
        return self.A.copy()

    def lap_u(self, x, t):
        return np.zeros(self.dim)

    def grad_lap_u(self, x, t):
        return np.zeros((self.dim, self.dim))

    def second_grad_u(self, x, t):
        return np.zeros((self.dim,) * 3)

    def second_grad_lap_u(self, x, t):
        return np.zeros((self.dim,) * 3)

    def du_dt(self, x, t):
        return self.b1.copy()


class TaylorGreenField(FlowField):
    """Steady cellular vortex field in the plane.

    ``u = (a sin(kx) cos(ky), -a cos(kx) sin(ky))`` with
    ``lap u = -2 k^2 u``, so every Laplacian derivative is proportional to
    the matching velocity derivative.
    """

    dim = 2

    def __init__(self, amplitude: float = 1.0, wavenumber: float = 1.0):
        self.a = float(amplitude)
        self.k = float(wavenumber)

    def _trig(self, x):
        kx, ky = self.k * x[0], self.k * x[1]
        return math.sin(kx), math.cos(kx), math.sin(ky), math.cos(ky)

    def u(self, x, t):
        sx, cx, sy, cy = self._trig(x)
        return self.a * np.array([sx * cy, -cx * sy])

    def grad_u(self, x, t):
        sx, cx, sy, cy = self._trig(x)
        ak = self.a * self.k
        return ak * np.array([[cx * cy, -sx * sy], [sx * sy, -cx * cy]])

    def lap_u(self, x, t):
        return -2.0 * self.k**2 * self.u(x, t)

    def grad_lap_u(self, x, t):
        return -2.0 * self.k**2 * self.grad_u(x, t)

    def second_grad_u(self, x, t):
        u1, u2 = self.u(x, t)
        k2 = self.k**2
        h1 = k2 * np.array([[-u1, u2], [u2, -u1]])
        h2 = k2 * np.array([[-u2, u1], [u1, -u2]])
        return np.stack([h1, h2])

    def second_grad_lap_u(self, x, t):
        return -2.0 * self.k**2 * self.second_grad_u(x, t)


class _ReversedField(FlowField):
    """View of ``base`` with time running backwards and velocity negated."""

    def __init__(self, base: FlowField, t_end: float):
        self.base = base
        self.t_end = float(t_end)
        self.dim = base.dim

    def _map(self, t):
        return self.t_end - t

    def u(self, x, t):
        return -self.base.u(x, self._map(t))

    def grad_u(self, x, t):
        return -self.base.grad_u(x, self._map(t))

    def lap_u(self, x, t):
        return -self.base.lap_u(x, self._map(t))

    def grad_lap_u(self, x, t):
        return -self.base.grad_lap_u(x, self._map(t))

    def second_grad_u(self, x, t):
        return -self.base.second_grad_u(x, self._map(t))

    def second_grad_lap_u(self, x, t):
        return -self.base.second_grad_lap_u(x, self._map(t))

    def du_dt(self, x, t):
        # d/dtau of -u(x, t_end - tau) = +du/dt evaluated at mapped time
        return self.base.du_dt(x, self._map(t))

    def dlap_u_dt(self, x, t):
        return self.base.dlap_u_dt(x, self._map(t))

    def grad_du_dt(self, x, t):
        return self.base.grad_du_dt(x, self._map(t))

    def grad_dlap_u_dt(self, x, t):
        return self.base.grad_dlap_u_dt(x, self._map(t))


def make_field(kind: str, **kwargs) -> FlowField:
    """Instantiate a built-in field by name.

    A flat ``matrix`` for the linear field is reshaped to the square array
    it enumerates row by row.
    """
    kind = kind.lower().replace("_", "-")
    if kind == "zero":
        field = ZeroField(dim=int(kwargs.pop("dim", 2)))
    elif kind == "linear":
        if "matrix" not in kwargs:
            raise ValueError("linear field requires a matrix")
        matrix = np.asarray(kwargs.pop("matrix"), dtype=float)
        if matrix.ndim == 1:
            n = math.isqrt(matrix.size)
            if n * n != matrix.size:
                raise ValueError("flat matrix length must be a perfect square")
            matrix = matrix.reshape(n, n)
        field = LinearField(matrix,
                            offset=kwargs.pop("offset", None),
                            offset_rate=kwargs.pop("offset_rate", None))
    elif kind == "taylor-green":
        field = TaylorGreenField(amplitude=float(kwargs.pop("amplitude", 1.0)),
                                 wavenumber=float(kwargs.pop("wavenumber", 1.0)))
    else:
        raise ValueError(f"unknown field kind: {kind!r}")
    if kwargs:
        raise ValueError(f"unknown field options: {', '.join(sorted(kwargs))}")
    return field


@dataclass(frozen=True)
class Coefficients:
    """Coefficient maps evaluated at one ``(x, t)``; ``L`` needs ``w`` too.

    ``L[i, j] = sum_k dM[i, k]/dx_j * w_k`` is the curvature of the drag
    matrix contracted with the relative velocity.
    """

    A: np.ndarray
    B: np.ndarray
    M: np.ndarray
    L: np.ndarray


def _dM_tensor(field: FlowField, p: Params, x, t):
    """``dM[i, k, j] = d M_{ik} / d x_j``."""
    return field.second_grad_u(x, t) + p.nu * field.second_grad_lap_u(x, t)


def derived_coefficients(field: FlowField, p: Params, x, t, w=None) -> Coefficients:
    """Evaluate ``A``, ``B``, ``M`` (and ``L`` when ``w`` is given)."""
    x = np.asarray(x, dtype=float)
    nu = p.nu
    u = field.u(x, t)
    lap = field.lap_u(x, t)
    grad = field.grad_u(x, t)
    grad_lap = field.grad_lap_u(x, t)
    A = u + nu * lap
    M = grad + nu * grad_lap
    buoy = 1.5 * p.density_ratio - 1.0
    faxen = (p.density_ratio / 20.0 - 1.0 / 6.0) * p.gamma_over_mu
    B = (buoy * (field.material_u(x, t) - p.g)
         + faxen * field.material_lap_u(x, t)
         - nu * (M @ lap))
    if w is None:
        L = np.zeros_like(M)
    else:
        dM = _dM_tensor(field, p, x, t)
        L = np.einsum("ikj,k->ij", dM, np.asarray(w, dtype=float))
    return Coefficients(A=A, B=B, M=M, L=L)


def variational_coefficients(field: FlowField, p: Params, x, t, w):
    """Coefficient data for the first-variation system at one base point.

    Returns ``(M, L, gradB)`` where ``gradB[i, j] = d B_i / d x_j`` is
    assembled from closed-form field derivatives (``grad A`` equals ``M``).
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    nu = p.nu
    u = field.u(x, t)
    lap = field.lap_u(x, t)
    grad = field.grad_u(x, t)
    grad_lap = field.grad_lap_u(x, t)
    sg = field.second_grad_u(x, t)
    sg_lap = field.second_grad_lap_u(x, t)
    M = grad + nu * grad_lap
    dM = sg + nu * sg_lap
    L = np.einsum("ikj,k->ij", dM, w)
    # grad of Du/Dt: d_j(d_t u_i) + (grad u . grad u)_{ij} + u_k d^2_{kj} u_i
    g_mat = (field.grad_du_dt(x, t) + grad @ grad
             + np.einsum("ikj,k->ij", sg, u))
    g_mat_lap = (field.grad_dlap_u_dt(x, t) + grad_lap @ grad
                 + np.einsum("ikj,k->ij", sg_lap, u))
    buoy = 1.5 * p.density_ratio - 1.0
    faxen = (p.density_ratio / 20.0 - 1.0 / 6.0) * p.gamma_over_mu
    grad_B = (buoy * g_mat + faxen * g_mat_lap
              - nu * (np.einsum("ikj,k->ij", dM, lap) + M @ grad_lap))
    return M, L, grad_B


@dataclass
class DerivativeReport:
    """Finite-difference cross-check of the closed-form derivatives."""

    discrepancies: dict
    max_discrepancy: float

    def ok(self, tol: float = 1e-6) -> bool:
        return self.max_discrepancy <= tol


def verify_field_derivatives(field: FlowField, points, times, h: float = 1e-5) -> DerivativeReport:
    """Compare every derivative evaluator against central differences."""
    n = field.dim
    worst: dict[str, float] = {}

    def cd_space(f, x, t):
        out = []
        for j in range(n):
            e = np.zeros(n)
            e[j] = h
            out.append((np.asarray(f(x + e, t)) - np.asarray(f(x - e, t))) / (2 * h))
        return np.stack(out, axis=-1)

    for x in points:
        x = np.asarray(x, dtype=float)
        for t in times:
            checks = {
                "grad_u": (field.grad_u(x, t), cd_space(field.u, x, t)),
                "grad_lap_u": (field.grad_lap_u(x, t), cd_space(field.lap_u, x, t)),
                "second_grad_u": (field.second_grad_u(x, t), cd_space(field.grad_u, x, t)),
                "second_grad_lap_u": (field.second_grad_lap_u(x, t),
                                      cd_space(field.grad_lap_u, x, t)),
                "lap_u": (field.lap_u(x, t),
                          np.einsum("ijj->i", cd_space(field.grad_u, x, t))),
                "du_dt": (field.du_dt(x, t),
                          (field.u(x, t + h) - field.u(x, t - h)) / (2 * h)),
                "dlap_u_dt": (field.dlap_u_dt(x, t),
                              (field.lap_u(x, t + h) - field.lap_u(x, t - h)) / (2 * h)),
            }
            for name, (exact, approx) in checks.items():
                err = float(np.max(np.abs(np.asarray(exact) - approx)))
                worst[name] = max(worst.get(name, 0.0), err)
    return DerivativeReport(discrepancies=worst, max_discrepancy=max(worst.values()))


def coefficient_constants(field: FlowField, p: Params, points, times):
    """Sampled bounds used by the local-existence and a-priori machinery.

    Returns ``(L_b, L_c, A0, B0)``: ``L_b`` bounds the first derivatives of
    the coefficient maps (Lipschitz rate), ``L_c`` bounds their second
    derivatives, and ``A0``, ``B0`` are ``|A|``, ``|B|`` at the origin at the
    initial time.
    """
    L_b = 0.0
    L_c = 0.0
    for x in points:
        for t in times:
            M, L1, grad_B = variational_coefficients(field, p, np.asarray(x, float),
                                                     t, np.zeros(field.dim))
            dM = _dM_tensor(field, p, np.asarray(x, float), t)
            L_b = max(L_b, float(np.max(np.abs(M))) * field.dim,
                      float(np.max(np.abs(grad_B))) * field.dim)
            L_c = max(L_c, float(np.max(np.abs(dM))) * field.dim**2)
    t0 = times[0]
    c0 = derived_coefficients(field, p, np.zeros(field.dim), t0)
    A0 = float(np.linalg.norm(c0.A))
    B0 = float(np.linalg.norm(c0.B))
    return L_b, L_c, A0, B0
