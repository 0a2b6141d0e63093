"""Oscillatory Bessel integrals on the half line.

Evaluates

    I = int_0^L  k**p * J0(k d) * h(k c)  dk,      L = cutoff or infinity,

for the handful of kernels ``h`` that appear in the bath correlators:

    "1-cos"   1 - cos(x)
    "sin"     sin(x)
    "x-sin"   x - sin(x)
    "one"     1

The range is split at ``K0``.  Below it, adaptive Gauss-Kronrod runs over
sub-intervals about one oscillation long.  Above it, ``J0`` is written
through the Hankel function as ``Re[M(k) exp(ikd)]`` with a smooth,
slowly decaying envelope ``M``, and the products of trigonometric factors
are expanded into single-frequency Fourier integrals.  QUADPACK's QAWF
(cycle-by-cycle integration with epsilon-algorithm extrapolation) does the
tails.
"""

from __future__ import annotations

import math
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate, special

KERNELS = ("1-cos", "sin", "x-sin", "one")


class QuadratureError(RuntimeError):
    pass


class QuadResult(NamedTuple):
    value: float
    error: float


def _envelope(d: float) -> tuple[Callable[[float], float], Callable[[float], float]]:
    if d == 0.0:
        return (lambda k: 1.0), (lambda k: 0.0)

    def mr(k):
        return (special.hankel1(0, k * d) * np.exp(-1j * k * d)).real

    def mi(k):
        return (special.hankel1(0, k * d) * np.exp(-1j * k * d)).imag

    return mr, mi


def _kernel(kind: str, c: float) -> Callable[[float], float]:
    if kind == "1-cos":
        # 2 sin^2 avoids cancellation for small arguments
        return lambda k: 2.0 * math.sin(0.5 * k * c) ** 2
    if kind == "sin":
        return lambda k: math.sin(k * c)
    if kind == "x-sin":
        def f(k):
            x = k * c
            if abs(x) < 1e-3:
                return x**3 / 6 - x**5 / 120
            return x - math.sin(x)
        return f
    if kind == "one":
        return lambda k: 1.0
    raise ValueError(f"unknown kernel {kind!r}; expected one of {KERNELS}")


def _near(f, a: float, b: float, step: float, tol: float) -> QuadResult:
    edges = np.arange(a, b, step).tolist() + [b]
    vals, errs = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi <= lo:
            continue
        v, e = integrate.quad(f, lo, hi, epsabs=tol * 1e-2, epsrel=1e-13, limit=200)
        vals.append(v)
        errs.append(e)
    return QuadResult(math.fsum(vals), math.fsum(errs))


def _tail_terms(p: float, d: float, c: float, kind: str):
    """Expand k^p J0(kd) h(kc) for k >= K0 into (envelope, 'cos'|'sin', omega)."""
    mr, mi = _envelope(d)
    terms = []

    def add(env, trig, omega, coef, extra_power=0.0):
        if omega < 0:
            omega = -omega
            if trig == "sin":
                coef = -coef
        pw = p + extra_power
        terms.append((lambda k, env=env, coef=coef, pw=pw: coef * k**pw * env(k), trig, omega))

    # J0(kd) = Mr cos(kd) - Mi sin(kd)
    if kind in ("one", "1-cos"):
        add(mr, "cos", d, 1.0)
        add(mi, "sin", d, -1.0)
    if kind == "x-sin":
        add(mr, "cos", d, c, 1.0)
        add(mi, "sin", d, -c, 1.0)
    if kind == "1-cos":
        # -J0 cos(kc)
        add(mr, "cos", d - c, -0.5)
        add(mr, "cos", d + c, -0.5)
        add(mi, "sin", d + c, 0.5)
        add(mi, "sin", d - c, 0.5)
    if kind in ("sin", "x-sin"):
        s = 1.0 if kind == "sin" else -1.0
        # s * J0 sin(kc)
        add(mr, "sin", d + c, 0.5 * s)
        add(mr, "sin", c - d, 0.5 * s)
        add(mi, "cos", d - c, -0.5 * s)
        add(mi, "cos", d + c, 0.5 * s)
    return terms


def bessel_integral(
    p: float,
    d: float,
    c: float,
    kind: str,
    cutoff: float | None = None,
    tol: float = 1e-9,
) -> QuadResult:
    """Integrate ``k**p J0(k d) h(k c)`` over ``[0, cutoff]`` (``None`` = infinity).

    Raises :class:`QuadratureError` when the accumulated error estimate
    exceeds ``tol`` (absolute) plus ``tol`` relative to the result.
    """
    if d < 0 or c < 0:
        raise ValueError("d and c must be non-negative")
    h = _kernel(kind, c)

    def f(k):
        if k == 0.0:
            k = 1e-300
        j0 = 1.0 if d == 0.0 else special.j0(k * d)
        return k**p * j0 * h(k)

    fastest = max(d + c, 1e-12)
    step = math.pi / fastest
    if cutoff is not None:
        res = _near(f, 0.0, float(cutoff), step, tol)
        return _checked(res, tol)

    k0 = 30.0 / d if d > 0 else 30.0 / max(c, 1e-12)
    k0 = max(k0, 8 * step)
    near = _near(f, 0.0, k0, step, tol)
    vals, errs = [near.value], [near.error]
    for env, trig, omega in _tail_terms(p, d, c, kind):
        if omega < 1e-12:
            if trig == "sin":
                continue
            v, e = integrate.quad(env, k0, np.inf, epsabs=tol * 1e-2, epsrel=1e-12, limit=500)
        else:
            v, e = integrate.quad(
                env, k0, np.inf, weight=trig, wvar=omega,
                epsabs=tol * 1e-2, limlst=200, limit=500,
            )
        vals.append(v)
        errs.append(e)
    return _checked(QuadResult(math.fsum(vals), math.fsum(errs)), tol)


def _checked(res: QuadResult, tol: float) -> QuadResult:
    if not math.isfinite(res.value) or res.error > tol + tol * abs(res.value):
        raise QuadratureError(
            f"quadrature error estimate {res.error:.3g} exceeds tolerance {tol:.3g}"
        )
    return res
