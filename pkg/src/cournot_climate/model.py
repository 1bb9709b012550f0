"""Domain types, expected profit and the single-firm best response.

A firm facing aggregate quantity ``Q_minus`` and aggregate carbon ``K_minus``
from everybody else picks a production quantity ``q`` and an emission
intensity ``r`` in [0, 1].  The optimizer falls into one of four colors
(white: no production, green: r = 0, orange: 0 < r < 1, red: r = 1), and
within each color the response has a closed form.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError

INF = math.inf


@dataclass(frozen=True)
class EconomyParams:
    """Market and tax constants.

    A: maximal inverse demand, b: tax slope, c: business-as-usual unit
    cost, d: green unit cost premium, K_ex: exogenous carbon stock.
    """

    A: float
    b: float
    c: float
    d: float
    K_ex: float = 0.0

    def __post_init__(self):
        for name in ("A", "b", "c", "d", "K_ex"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite real, got {value!r}")
        if self.A <= 0 or self.c <= 0 or self.d <= 0:
            raise DomainError("A, c and d must be strictly positive")
        if self.b < 0 or self.K_ex < 0:
            raise DomainError("b and K_ex must be nonnegative")

    @property
    def z(self) -> float:
        return self.A - self.c - self.d

    def with_K_ex(self, K_ex: float) -> EconomyParams:
        return replace(self, K_ex=K_ex)


@dataclass(frozen=True)
class FirmBelief:
    """Second moment of the climate response under one firm's belief.

    ``alpha_sq = inf`` encodes a firm that fears unbounded climate impact
    (``a = 0``); ``alpha_sq = 0`` a firm that ignores carbon (``a = inf``).
    ``risk_weight`` replaces the economy-wide tax slope ``b`` for this firm.
    """

    alpha_sq: float
    risk_weight: float | None = None

    def __post_init__(self):
        if math.isnan(self.alpha_sq) or self.alpha_sq < 0:
            raise DomainError(f"alpha_sq must be >= 0, got {self.alpha_sq!r}")
        if self.risk_weight is not None:
            w = self.risk_weight
            if math.isnan(w) or w < 0 or math.isinf(w):
                raise DomainError(f"risk_weight must be finite and >= 0, got {w!r}")
            if w == 0 and math.isinf(self.alpha_sq):
                raise DomainError("infinite alpha_sq needs a positive risk weight")

    def weight(self, params: EconomyParams) -> float:
        return params.b if self.risk_weight is None else self.risk_weight

    def beta(self, params: EconomyParams) -> float:
        w = self.weight(params)
        if w == 0 or self.alpha_sq == 0:
            return 0.0
        if math.isinf(self.alpha_sq):
            return INF
        return w * self.alpha_sq

    def a(self, params: EconomyParams) -> float:
        beta = self.beta(params)
        if beta == 0:
            return INF
        return params.d / beta  # 0.0 when beta is infinite

    @classmethod
    def from_a(cls, a: float, params: EconomyParams, risk_weight: float | None = None) -> FirmBelief:
        """Belief whose coefficient ``a = d / beta`` equals the given value."""
        w = params.b if risk_weight is None else risk_weight
        if a < 0 or math.isnan(a):
            raise DomainError(f"a must be >= 0, got {a!r}")
        if math.isinf(a):
            return cls(0.0, risk_weight)
        if w <= 0:
            raise DomainError("a finite coefficient a needs a positive tax weight")
        if a == 0:
            return cls(INF, risk_weight)
        return cls(params.d / (w * a), risk_weight)


class Color(enum.Enum):
    WHITE = "white"
    GREEN = "green"
    ORANGE = "orange"
    RED = "red"

    @property
    def rank(self) -> int:
        return _COLOR_RANK[self]

    def __str__(self):
        return self.value


_COLOR_RANK = {Color.WHITE: 0, Color.GREEN: 1, Color.ORANGE: 2, Color.RED: 3}


@dataclass(frozen=True)
class Environment:
    """Aggregate quantity and carbon supplied by all other sources."""

    Q_minus: float
    K_minus: float

    def __post_init__(self):
        if not (self.Q_minus >= 0) or not (self.K_minus >= 0):
            raise DomainError("Q_minus and K_minus must be nonnegative")
        if math.isinf(self.Q_minus) or math.isinf(self.K_minus):
            raise DomainError("environment aggregates must be finite")


@dataclass(frozen=True)
class Strategy:
    """Quantity ``q`` and carbon ``k = r q``; ``r`` is derived.

    With ``q = 0`` the intensity is reported as 0.
    """

    q: float
    k: float

    def __post_init__(self):
        if not (self.q >= 0) or not (self.k >= 0):
            raise DomainError(f"q and k must be nonnegative, got q={self.q!r}, k={self.k!r}")
        if self.k > self.q * (1 + 1e-12) + 1e-300:
            raise DomainError(f"carbon k={self.k!r} exceeds quantity q={self.q!r}")

    @property
    def r(self) -> float:
        if self.q == 0:
            return 0.0
        return min(1.0, self.k / self.q)

    @classmethod
    def from_qr(cls, q: float, r: float) -> Strategy:
        if not 0 <= r <= 1:
            raise DomainError(f"r must lie in [0, 1], got {r!r}")
        if q == 0:
            return cls(0.0, 0.0)
        return cls(q, r * q)


ZERO = Strategy(0.0, 0.0)


def expected_profit(params: EconomyParams, belief: FirmBelief, env: Environment, s: Strategy) -> float:
    """Expected profit of one firm under its own belief.

    Only defined while total quantity stays within [0, A]; outside that
    range the linear inverse demand is no longer the right price.
    """
    q, k = s.q, s.k
    if q + env.Q_minus > params.A:
        raise DomainError(f"q + Q_minus = {q + env.Q_minus} exceeds A = {params.A}")
    beta = belief.beta(params)
    if k == 0:
        carbon = 0.0
    else:
        carbon = beta * (k + env.K_minus) * k
    return (params.A - q - env.Q_minus) * q - carbon - (params.c + params.d) * q + params.d * k


def classify_color(params: EconomyParams, belief: FirmBelief, env: Environment) -> Color:
    """Color of the firm's unique best response to ``env``.

    The four tests are evaluated with the exact strict and non-strict
    inequalities of the best-response characterization; ``beta * a`` is
    replaced by ``d`` so that skeptical firms (``beta = 0``) never form
    ``d / 0``.
    """
    z = params.z
    Qm, Km = env.Q_minus, env.K_minus
    beta = belief.beta(params)
    a = belief.a(params)
    if math.isinf(beta):
        # Any carbon is infinitely expensive: produce green or not at all.
        return Color.GREEN if Qm < z else Color.WHITE
    slack = z - Qm + params.d - beta * Km  # z - Q_minus + beta (a - K_minus)
    if slack <= 0 and Qm >= z:
        return Color.WHITE
    if Km >= a and Qm < z:
        return Color.GREEN
    if Km < a and Qm - Km < z - a:
        return Color.ORANGE
    return Color.RED


def best_response(params: EconomyParams, belief: FirmBelief, env: Environment) -> Strategy:
    color = classify_color(params, belief, env)
    return response_for_color(params, belief, env, color)


def response_for_color(params: EconomyParams, belief: FirmBelief, env: Environment, color: Color) -> Strategy:
    """Closed-form response assuming the firm has the given color."""
    z = params.z
    if color is Color.WHITE:
        return ZERO
    if color is Color.GREEN:
        return Strategy((z - env.Q_minus) / 2, 0.0)
    if color is Color.ORANGE:
        return Strategy((z - env.Q_minus) / 2, (belief.a(params) - env.K_minus) / 2)
    beta = belief.beta(params)
    q = (params.A - params.c - env.Q_minus - beta * env.K_minus) / (2 * (1 + beta))
    # nonnegative in exact arithmetic; rounding can leave a tiny negative at the white boundary
    q = max(q, 0.0)
    return Strategy(q, q)


def best_response_arrays(params: EconomyParams, beta, a, Q_minus, K_minus):
    """Vectorized best response.

    ``beta`` and ``a`` are per-firm arrays; ``Q_minus`` and ``K_minus``
    broadcast against them (e.g. shape ``(starts, n)``).  Returns
    ``(q, k, color_code)`` with codes 0..3 for white, green, orange, red.
    """
    beta = np.asarray(beta, dtype=float)
    a = np.asarray(a, dtype=float)
    Qm = np.asarray(Q_minus, dtype=float)
    Km = np.asarray(K_minus, dtype=float)
    z = params.z
    inf_beta = np.isinf(beta)
    finite_beta = np.where(inf_beta, 0.0, beta)
    # beta near the float limit overflows beta * K to inf, which is the correct limit
    with np.errstate(over="ignore"):
        slack = z - Qm + params.d - finite_beta * Km
    white = (slack <= 0) & (Qm >= z)
    green = (Km >= a) & (Qm < z) & ~white
    orange = (Km < a) & (Qm - Km < z - a) & ~white & ~green
    green = np.where(inf_beta, Qm < z, green)
    white = np.where(inf_beta, Qm >= z, white)
    orange = orange & ~inf_beta
    red = ~(white | green | orange)

    half_gap = (z - Qm) / 2
    with np.errstate(invalid="ignore", over="ignore"):
        red_q = np.maximum((params.A - params.c - Qm - finite_beta * Km) / (2 * (1 + finite_beta)), 0.0)
        orange_k = (a - Km) / 2
    q = np.where(white, 0.0, np.where(red, red_q, half_gap))
    k = np.where(orange, orange_k, np.where(red, red_q, 0.0))
    code = np.where(white, 0, np.where(green, 1, np.where(orange, 2, 3)))
    return q, k, code


COLOR_BY_CODE = (Color.WHITE, Color.GREEN, Color.ORANGE, Color.RED)
