"""Composite Simpson quadrature with one Richardson refinement.

The integrands here are smooth on each free-precession segment, so a fixed
composite rule with the node count tied to the field period is enough; the
Richardson step cancels the h^4 error term of Simpson's rule.
"""

from collections.abc import Callable
import math

import numpy as np
from scipy import integrate

from acmagsim.errors import InvalidParameterError


def composite_simpson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      n: int) -> float:
    """Composite Simpson's rule on ``n`` (even) subintervals.

    Args:
        f: Vectorized integrand, called once on the full node array.
        a: Lower bound.
        b: Upper bound.
        n: Number of subintervals, even and >= 2.

    Returns:
        Approximation of the integral of f over [a, b].
    """
    if n < 2 or n % 2:
        raise InvalidParameterError(f"Simpson's rule needs an even number of intervals, got {n}")
    if a == b:
        return 0.0
    x = np.linspace(a, b, n + 1)
    y = np.asarray(f(x), dtype=float)
    return float(integrate.simpson(y, dx=(b - a) / n))


def simpson_richardson(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                       n: int) -> float:
    """Simpson on n and 2n intervals combined as (16 S_2n - S_n) / 15."""
    coarse = composite_simpson(f, a, b, n)
    fine = composite_simpson(f, a, b, 2 * n)
    return (16.0 * fine - coarse) / 15.0


def intervals_for(duration: float, frequency: float, nodes_per_half_period: int) -> int:
    """Even interval count giving ``nodes_per_half_period`` nodes per field half period."""
    half_periods = duration * 2.0 * frequency
    n = max(2, math.ceil(nodes_per_half_period * half_periods))
    return n + (n % 2)
