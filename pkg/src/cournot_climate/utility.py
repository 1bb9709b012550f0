"""Symmetric interior equilibria under a general consumer utility.

With inverse demand ``u'(Q)`` in place of the linear ``A - Q``, every
interior equilibrium shares a common quantity ``q0`` solving

    phi(q0) = u''(n q0) q0 + u'(n q0) = c + d,

and the carbon block is unchanged: ``k_i = a_i - K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, DomainError
from .model import EconomyParams, FirmBelief

LOWER = 1e-12


class UtilitySpec:
    """Consumer utility through its first three derivatives.

    ``sup`` bounds the aggregate quantity where marginal utility is positive.
    """

    name = "utility"
    sup = math.inf

    def u1(self, x):
        raise NotImplementedError

    def u2(self, x):
        raise NotImplementedError

    def u3(self, x):
        raise NotImplementedError

    def rho(self, x):
        """Relative risk aversion ``-x u''(x) / u'(x)``."""
        return -x * self.u2(x) / self.u1(x)


@dataclass(frozen=True)
class Quadratic(UtilitySpec):
    """``u(x) = A x - x^2 / 2``, i.e. linear inverse demand."""

    A: float
    name = "quadratic"

    def __post_init__(self):
        if not self.A > 0:
            raise DomainError("A must be positive")

    @property
    def sup(self):
        return self.A

    def u1(self, x):
        return self.A - x

    def u2(self, x):
        return -1.0

    def u3(self, x):
        return 0.0


@dataclass(frozen=True)
class CRRA(UtilitySpec):
    """``u(x) = x^(1 - gamma) / (1 - gamma)``."""

    gamma: float
    name = "crra"

    def __post_init__(self):
        if not self.gamma > 0:
            raise DomainError("gamma must be positive")

    def u1(self, x):
        return x ** -self.gamma

    def u2(self, x):
        return -self.gamma * x ** (-self.gamma - 1)

    def u3(self, x):
        return self.gamma * (self.gamma + 1) * x ** (-self.gamma - 2)


class Log(UtilitySpec):
    name = "log"

    def u1(self, x):
        return 1.0 / x

    def u2(self, x):
        return -1.0 / x**2

    def u3(self, x):
        return 2.0 / x**3

    def __eq__(self, other):
        return isinstance(other, Log)

    def __hash__(self):
        return hash(Log)


@dataclass(frozen=True)
class Custom(UtilitySpec):
    d1: Callable[[float], float]
    d2: Callable[[float], float]
    d3: Callable[[float], float]
    name = "custom"

    def __post_init__(self):
        if not all(callable(f) for f in (self.d1, self.d2, self.d3)):
            raise DomainError("a custom utility needs u', u'' and u''' as callables")

    def u1(self, x):
        return self.d1(x)

    def u2(self, x):
        return self.d2(x)

    def u3(self, x):
        return self.d3(x)


def _phi(spec: UtilitySpec, n: int, x: float) -> float:
    y = n * x
    u1 = spec.u1(y)
    u2 = spec.u2(y)
    if not (u1 > 0 and u2 < 0):
        raise DomainError(f"{spec.name} utility needs u' > 0 and u'' < 0, violated at {y!r}")
    return u2 * x + u1


def symmetric_foc_residual(spec: UtilitySpec, params: EconomyParams, n: int, q0: float) -> float:
    if not q0 > 0:
        raise DomainError(f"q0 must be positive, got {q0!r}")
    if n < 1:
        raise DomainError("n must be >= 1")
    return _phi(spec, n, q0) - (params.c + params.d)


def uniqueness_holds(spec: UtilitySpec, n: int, lo: float, hi: float, samples: int = 256) -> bool:
    """``n u'''(n x) x + (n + 1) u''(n x) < 0`` on a log grid over [lo, hi]."""
    xs = np.geomspace(lo, hi, samples)
    return all(n * spec.u3(n * x) * x + (n + 1) * spec.u2(n * x) < 0 for x in xs)


def _expand_bracket(spec: UtilitySpec, params: EconomyParams, n: int, lo: float):
    """Double the upper end until the residual turns negative."""
    cap = spec.sup / n * (1 - 1e-12)
    hi = min(1.0, cap)
    hi = max(hi, 2 * lo)
    while True:
        if symmetric_foc_residual(spec, params, n, hi) < 0:
            return hi
        if hi >= cap or hi > 1e300:
            return None
        hi = min(2 * hi, cap)


def _shrink_lower(spec: UtilitySpec, params: EconomyParams, n: int, lo: float):
    """Step the lower end towards zero until the residual turns positive."""
    hi = lo
    while lo > 1e-300:
        lo /= 1e4
        if symmetric_foc_residual(spec, params, n, lo) > 0:
            return lo, hi
        hi = lo
    return LOWER, None


def solve_symmetric(spec: UtilitySpec, params: EconomyParams, n: int, bracket: tuple[float, float] | None = None,
                    tol: float = 1e-14) -> float | None:
    """Common interior quantity ``q0``, or None when the residual keeps one sign.

    The default bracket starts at ``1e-12`` and doubles its upper end.  A
    missing sign change raises :class:`BracketError` only when the
    relative risk aversion near zero is below ``n``, since then a root is
    guaranteed to exist.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    lo = LOWER if bracket is None else bracket[0]
    f_lo = symmetric_foc_residual(spec, params, n, lo)
    hi = None
    if f_lo > 0:
        if bracket is None:
            hi = _expand_bracket(spec, params, n, lo)
        elif symmetric_foc_residual(spec, params, n, bracket[1]) < 0:
            hi = bracket[1]
    elif f_lo == 0:
        return lo
    elif bracket is None and spec.rho(lo) < n:
        # phi grows without bound near zero, so the root sits below the default lower end
        lo, hi = _shrink_lower(spec, params, n, lo)
    if hi is None:
        if bracket is None and spec.rho(lo) < n and math.isinf(spec.sup):
            raise BracketError(f"no sign change found although rho({lo}) = {spec.rho(lo)} < n = {n}")
        return None
    root = brentq(lambda x: symmetric_foc_residual(spec, params, n, x), lo, hi, xtol=tol * min(1.0, hi), rtol=4 * np.finfo(float).eps)
    if uniqueness_holds(spec, n, lo, hi):
        # phi is strictly decreasing on the bracket, so the root is the only one
        assert symmetric_foc_residual(spec, params, n, lo) > 0 > symmetric_foc_residual(spec, params, n, hi)
    return float(root)


@dataclass(frozen=True)
class CarbonProfile:
    K: float
    k: tuple[float, ...]
    r: tuple[float, ...]
    feasible: bool
    violators: tuple[int, ...]


def interior_carbon_profile(spec: UtilitySpec, params: EconomyParams, beliefs: Sequence[FirmBelief], q0: float) -> CarbonProfile:
    """Carbon split ``k_i = a_i - K`` with ``K = K_ex + sum(k)``.

    Solving gives ``K = (sum(a) + K_ex) / (n + 1)``.  The profile is
    feasible when every ``k_i`` lies in ``[0, q0]``; otherwise the firms
    breaking interiority are listed.
    """
    if not q0 > 0:
        raise DomainError(f"q0 must be positive, got {q0!r}")
    a = np.array([bel.a(params) for bel in beliefs], dtype=float)
    if not np.isfinite(a).all():
        raise DomainError("interior carbon needs every firm to hold a finite belief coefficient")
    n = len(a)
    K = (math.fsum(a) + params.K_ex) / (n + 1)
    k = a - K
    r = k / q0
    bad = tuple(int(i) for i in np.flatnonzero((k < 0) | (k > q0)))
    return CarbonProfile(float(K), tuple(map(float, k)), tuple(map(float, r)), not bad, bad)
