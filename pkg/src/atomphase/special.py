"""Scaled upper incomplete gamma function for real (including negative) order."""

import math

from scipy import special

_EPS = 1e-16
_TINY = 1e-300


def _scaled_cf(a, x, max_iter=500):
    """e^x x^-a Gamma(a, x) by modified Lentz evaluation of the Legendre continued fraction."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, max_iter + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"continued fraction for Gamma({a}, {x}) did not converge")


def upper_gamma_scaled(a, x):
    """Return e^x * Gamma(a, x) for real ``a`` and ``x > 0``.

    Large ``x`` uses the continued fraction, which holds for any real order.
    Small ``x`` uses scipy for positive order and steps negative orders up
    through Gamma(a, x) = (Gamma(a+1, x) - x^a e^-x) / a.
    """
    if not x > 0:
        raise ValueError("x must be > 0")
    if x >= 1.5:
        return math.exp(a * math.log(x)) * _scaled_cf(a, x)
    if a > 0:
        return math.exp(x) * special.gammaincc(a, x) * special.gamma(a)
    if a == int(a):
        raise ValueError("non-positive integer order not supported at small x")
    return (upper_gamma_scaled(a + 1.0, x) - x**a) / a


def upper_gamma(a, x):
    """Gamma(a, x); underflows to zero for very large x, use the scaled form there."""
    return math.exp(-x) * upper_gamma_scaled(a, x)
