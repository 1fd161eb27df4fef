"""Fractional Gronwall series bound and the a-priori solution bound.

A scalar function obeying

    u(t) <= a + sum_i b_i * int_0^t (t - s)**(beta_i - 1) u(s) ds

is bounded by a convergent series: each order-k contribution sums, over
k-tuples of kernel indices, the quantity

    prod_j [ b_{i_j} Gamma(beta_{i_j}) ] / Gamma(S) * a * t**S / S,

with ``S`` the tuple's exponent total.  Tuples with the same multiset of
indices contribute equally, so the sum collapses to compositions weighted
by multinomial multiplicities, keeping the evaluation polynomial in k.
All accumulation happens in log space: Gamma(S) grows super-exponentially
and would overflow long before the series converges.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .flowfield import Params
from .solver import State

__all__ = [
    "GronwallProblem",
    "SeriesCapError",
    "gronwall_bound",
    "apriori_solution_bound",
]

ORDER_CAP = 100_000


def _supremum(value) -> float:
    # sampled nonnegative functions are reduced by their suprema; the bound
    # only ever uses the constant majorant
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else float(arr.max())


class SeriesCapError(RuntimeError):
    """Raised when the series has not met the tolerance at the order cap."""

    def __init__(self, partial_sum: float, last_term: float):
        self.partial_sum = partial_sum
        self.last_term = last_term
        super().__init__(
            f"series not below tolerance at order {ORDER_CAP}: "
            f"partial sum {partial_sum!r}, last term {last_term!r}"
        )


@dataclass(frozen=True)
class GronwallProblem:
    """Constant part ``a``, kernel terms ``(b_i, beta_i)``, and horizon."""

    a: float
    terms: tuple[tuple[float, float], ...]
    T: float

    def __post_init__(self):
        object.__setattr__(self, "a", _supremum(self.a))
        object.__setattr__(
            self, "terms",
            tuple((_supremum(b), float(beta)) for b, beta in self.terms),
        )
        if self.a < 0.0:
            raise ValueError("constant part must be nonnegative")
        if self.T <= 0.0:
            raise ValueError("horizon must be positive")
        for b, beta in self.terms:
            if b < 0.0:
                raise ValueError("kernel coefficients must be nonnegative")
            if beta <= 0.0:
                raise ValueError("kernel exponents must be positive")


def _log_order_total(terms, k: int, log_t: float) -> float:
    """log of the summed order-``k`` contribution over all k-tuples."""
    n = len(terms)
    lg_k = math.lgamma(k + 1)
    pieces = []
    for head in itertools.product(*(range(k + 1) for _ in range(n - 1))):
        rest = k - sum(head)
        if rest < 0:
            continue
        counts = head + (rest,)
        S = 0.0
        log_mult = lg_k
        log_prod = 0.0
        for c, (b, beta) in zip(counts, terms):
            S += c * beta
            log_mult -= math.lgamma(c + 1)
            log_prod += c * (math.log(b) + math.lgamma(beta))
        pieces.append(log_mult + log_prod - math.lgamma(S)
                      + S * log_t - math.log(S))
    if not pieces:
        return -math.inf
    m = max(pieces)
    return m + math.log(sum(math.exp(x - m) for x in pieces))


def gronwall_bound(prob: GronwallProblem, t: float, tol: float = 1e-14,
                   return_trace: bool = False):
    """Evaluate the series bound at time ``t`` (taken from the left origin).

    Truncates once the order exceeds ``2 / min(beta)`` and the current
    order's contribution drops below ``tol`` times the partial sum; past
    that crossover the terms decay faster than geometrically.
    """
    if not 0.0 <= t < prob.T:
        raise ValueError("evaluation time must lie in [0, T)")
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    active = tuple((b, beta) for b, beta in prob.terms if b > 0.0)
    if t == 0.0 or not active or prob.a == 0.0:
        return (prob.a, [prob.a]) if return_trace else prob.a
    log_t = math.log(t)
    k_floor = 2.0 / min(beta for _, beta in active)
    log_sum = 0.0  # log of (1 + series/a)
    trace = [prob.a]
    for k in range(1, ORDER_CAP + 1):
        lt = _log_order_total(active, k, log_t)
        trace.append(prob.a * math.exp(lt))
        log_sum = float(np.logaddexp(log_sum, lt))
        if k > k_floor and lt - log_sum < math.log(tol):
            break
    else:
        raise SeriesCapError(prob.a * math.exp(log_sum), trace[-1])
    total = prob.a * math.exp(log_sum)
    if return_trace:
        return total, trace
    return total


def apriori_solution_bound(p: Params, L_b: float, A0: float, B0: float,
                           ic: State, t0: float, T: float,
                           tol: float = 1e-14):
    """Global sup bound ``(C_Y, C_W)`` for ``|y|`` and ``|w|`` on ``[t0, T]``.

    ``a(t) = |y(t)| + |w(t)|`` satisfies a two-kernel inequality with
    constant part ``a(t0) + L_b (T^2 - t0^2) + (A0 + B0)(T - t0)``, a
    regular kernel with coefficient ``max(1, mu + L_b)`` and a half-order
    kernel with the history coefficient.
    """
    if T <= t0:
        raise ValueError("horizon must be positive")
    a0 = float(np.linalg.norm(ic.y) + np.linalg.norm(ic.w))
    const = a0 + L_b * (T**2 - t0**2) + (A0 + B0) * (T - t0)
    prob = GronwallProblem(
        a=const,
        terms=((max(1.0, p.mu + L_b), 1.0), (p.basset, 0.5)),
        T=(T - t0) * (1.0 + 1e-12) + 1e-300,
    )
    bound = gronwall_bound(prob, T - t0, tol)
    return bound, bound
