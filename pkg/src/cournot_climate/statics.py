"""Comparative statics of an equilibrium with respect to beliefs.

Inside a fixed color partition the aggregates are rational functions of
two bucket sums: ``A_int``, the sum of ``a_j`` over orange firms, and
``B1``, the sum of ``b_j = 1 / (1 + beta_j)`` over red firms.  Moving an
orange firm's ``a_j`` moves ``A_int`` one for one; moving a red firm's
``b_j`` moves ``B1`` one for one.  Per-firm partials then follow from the
color feedback formulas:

=======  =====================  ===================================
color    quantity               carbon
=======  =====================  ===================================
green    q_i = z - Q            k_i = 0
orange   q_i = z - Q            k_i = a_i - K
red      q_i = b_i (A - c - Q + K) - K = k_i
=======  =====================  ===================================

Derivatives in the coordinates ``(a_j, b_j)`` are converted to the belief
coordinate ``alpha_sq_j`` with ``da_j = -(a_j / alpha_sq_j) dalpha_sq_j``
and ``db_j = -w_j b_j^2 dalpha_sq_j``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .equilibrium import Equilibrium, solve, solve_many
from .errors import DomainError, RegimeInstability, UndefinedDirection
from .model import Color, EconomyParams, FirmBelief

DEFAULT_STEP = 1e-5
MIN_STEP = 1e-8
UNAFFECTED_DELTA = 1e-10


@dataclass(frozen=True)
class AggregatePartials:
    """Partials of the aggregates; ``None`` marks an empty direction."""

    dK_dB1: float | None
    dQ_dB1: float | None
    dK_dA_int: float | None
    dQ_dA_int: float | None
    dK_dK_ex: float
    dQ_dK_ex: float
    dEmitted_dK_ex: float  # d(K - K_ex) / dK_ex

    def get(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise UndefinedDirection(f"{name} needs a nonempty bucket")
        return value


def _check_preconditions(params: EconomyParams, beliefs: Sequence[FirmBelief], eq: Equilibrium):
    if len(beliefs) != eq.n:
        raise DomainError("equilibrium and beliefs describe different numbers of firms")
    if Color.WHITE in eq.colors:
        raise DomainError("comparative statics need every firm to produce (no white firms)")
    for i, (bel, col) in enumerate(zip(beliefs, eq.colors)):
        if col is not Color.RED and not (0 < bel.alpha_sq < math.inf):
            raise DomainError(f"firm {i} must hold a finite positive belief")


def aggregate_partials(params: EconomyParams, beliefs: Sequence[FirmBelief], eq: Equilibrium) -> AggregatePartials:
    _check_preconditions(params, beliefs, eq)
    st = eq.stats
    n0, n_int, n1, m = st.n0_green, st.n_int, st.n1, st.m
    B1, A_int, N = st.B1, st.A_int, st.N
    n_tilde = n0 + n_int + n1
    X = (A_int + params.K_ex) * (n_tilde + 1) + (n_int + n1 + 1) * (params.z + (m + 1) * params.d)
    dK_dA = (m + 1 + B1) / N
    dQ_dA = (B1 - n1) / N
    return AggregatePartials(
        dK_dB1=(m + 1) * X / N**2 if n1 else None,
        dQ_dB1=(n_int + 1) * X / N**2 if n1 else None,
        dK_dA_int=dK_dA if n_int else None,
        dQ_dA_int=dQ_dA if n_int else None,
        dK_dK_ex=dK_dA,
        dQ_dK_ex=dQ_dA,
        dEmitted_dK_ex=(m + 1 + B1 - N) / N,
    )


def _coordinate(color: Color) -> str | None:
    return {Color.ORANGE: "a", Color.RED: "b"}.get(color)


def _b(params: EconomyParams, belief: FirmBelief) -> float:
    return 1.0 / (1.0 + belief.beta(params))


@dataclass(frozen=True)
class Partial:
    """One derivative ``d quantity_firm / d wrt_source`` with its check.

    ``firm`` is None for aggregates, ``source`` is None for bucket and
    parameter directions.
    """

    quantity: str
    firm: int | None
    wrt: str
    source: int | None
    analytic: float
    numeric: float = math.nan
    step: float = math.nan

    @property
    def abs_error(self) -> float:
        return abs(self.numeric - self.analytic)

    @property
    def rel_error(self) -> float:
        if self.analytic == 0:
            return math.inf if self.numeric != 0 else 0.0
        return self.abs_error / abs(self.analytic)

    def ok(self, rtol: float = 1e-4, atol_zero: float = 1e-8) -> bool:
        if self.analytic == 0:
            return self.abs_error < atol_zero
        return self.rel_error < rtol


def _firm_derivative(params, beliefs, eq, agg: AggregatePartials, i: int, j: int):
    """``(dq_i, dk_i, dr_i)`` with respect to firm j's coordinate."""
    ci, cj = eq.colors[i], eq.colors[j]
    if cj is Color.GREEN:
        return 0.0, 0.0, 0.0
    if cj is Color.ORANGE:
        dQ, dK = agg.get("dQ_dA_int"), agg.get("dK_dA_int")
    else:
        dQ, dK = agg.get("dQ_dB1"), agg.get("dK_dB1")
    s = eq.strategies[i]
    if ci is Color.GREEN:
        dq, dk = -dQ, 0.0
    elif ci is Color.ORANGE:
        dq = -dQ
        dk = -dK + (1.0 if i == j else 0.0)
    else:
        b_i = _b(params, beliefs[i])
        dq = b_i * (dK - dQ) - dK
        if i == j:
            dq += params.A - params.c - eq.Q + eq.K
        dk = dq
    dr = (dk - s.r * dq) / s.q
    if ci is not Color.ORANGE:
        dr = 0.0  # r is pinned at 0 (green) or 1 (red)
    return dq, dk, dr


def _alpha_chain(params: EconomyParams, belief: FirmBelief, color: Color) -> float:
    """d(coordinate) / d(alpha_sq) for the firm's own coordinate."""
    if color is Color.ORANGE:
        return -belief.a(params) / belief.alpha_sq
    if color is Color.RED:
        return -belief.weight(params) * _b(params, belief) ** 2
    return 0.0


def firm_partials(params: EconomyParams, beliefs: Sequence[FirmBelief], eq: Equilibrium) -> list[Partial]:
    """Analytic per-firm partials in the coordinates ``a_j`` / ``b_j``.

    Rows cover every firm i and every non-green source j.  Green sources
    leave everything unchanged and are reported only by :func:`sign_report`.
    """
    agg = aggregate_partials(params, beliefs, eq)
    rows = []
    for j, cj in enumerate(eq.colors):
        coord = _coordinate(cj)
        if coord is None:
            continue
        for i in range(eq.n):
            dq, dk, dr = _firm_derivative(params, beliefs, eq, agg, i, j)
            rows += [Partial("q", i, coord, j, dq), Partial("k", i, coord, j, dk), Partial("r", i, coord, j, dr)]
    return rows


def _aggregate_rows(agg: AggregatePartials) -> list[Partial]:
    rows = [Partial("K", None, "K_ex", None, agg.dK_dK_ex), Partial("Q", None, "K_ex", None, agg.dQ_dK_ex),
            Partial("K-K_ex", None, "K_ex", None, agg.dEmitted_dK_ex)]
    if agg.dK_dB1 is not None:
        rows += [Partial("K", None, "B1", None, agg.dK_dB1), Partial("Q", None, "B1", None, agg.dQ_dB1)]
    if agg.dK_dA_int is not None:
        rows += [Partial("K", None, "A_int", None, agg.dK_dA_int), Partial("Q", None, "A_int", None, agg.dQ_dA_int)]
    return rows


# --- finite differences ----------------------------------------------------


def _with_coordinate(params: EconomyParams, belief: FirmBelief, coord: str, value: float) -> FirmBelief:
    if coord == "a":
        return FirmBelief.from_a(value, params, belief.risk_weight)
    if coord == "b":
        if not 0 < value <= 1:
            raise DomainError(f"b must lie in (0, 1], got {value!r}")
        return FirmBelief((1.0 / value - 1.0) / belief.weight(params), belief.risk_weight) if value < 1 else FirmBelief(0.0, belief.risk_weight)
    if coord == "alpha_sq":
        return FirmBelief(value, belief.risk_weight)
    raise ValueError(coord)


def _coord_value(params: EconomyParams, belief: FirmBelief, coord: str) -> float:
    return {"a": belief.a(params), "b": _b(params, belief), "alpha_sq": belief.alpha_sq}[coord]


@dataclass(frozen=True)
class _Stencil:
    offsets: tuple[float, ...]  # multiples of h
    weights: tuple[float, ...]  # derivative = sum(w f) / h


CENTRAL = _Stencil((-1.0, 1.0), (-0.5, 0.5))
BACKWARD = _Stencil((-2.0, -1.0, 0.0), (0.5, -2.0, 1.5))
FORWARD = _Stencil((0.0, 1.0, 2.0), (-1.5, 2.0, -0.5))


def _stencil(x: float, h: float, lo: float, hi: float) -> _Stencil:
    if x - h >= lo and x + h <= hi:
        return CENTRAL
    return BACKWARD if x + h > hi else FORWARD


def _profile(eq: Equilibrium) -> np.ndarray:
    """Vector (K, Q, K - K_ex, q..., k..., r...) of a solved equilibrium."""
    emitted = sum(s.k for s in eq.strategies)
    return np.concatenate([[eq.K, eq.Q, emitted], eq.q, eq.k, eq.r])


@dataclass(frozen=True)
class _Direction:
    key: tuple  # (coord, source) or ("K_ex", None)
    stencil: _Stencil
    step: float
    profiles: np.ndarray  # (len(offsets), P)
    stable: bool

    def derivative(self) -> np.ndarray:
        w = np.asarray(self.stencil.weights)[:, None]
        return (w * self.profiles).sum(axis=0) / self.step


def _belief_directions(params, beliefs, eq, h: float, relative_alpha: bool):
    """Perturbed solves for every non-green firm coordinate (a or b) and every alpha_sq."""
    specs = []
    for j, cj in enumerate(eq.colors):
        coord = _coordinate(cj)
        if coord is not None:
            specs.append((coord, j))
        if beliefs[j].alpha_sq < math.inf:
            specs.append(("alpha_sq", j))
    instances, plan = [], []
    for coord, j in specs:
        x = _coord_value(params, beliefs[j], coord)
        if coord == "alpha_sq":
            step = h * x if (relative_alpha and x > 0) else h
            stencil = _stencil(x, step, 0.0, math.inf)
        elif coord == "b":
            step = h
            stencil = _stencil(x, step, 0.0, 1.0)
        else:
            step = h
            stencil = _stencil(x, step, 0.0, math.inf)
        start = len(instances)
        for off in stencil.offsets:
            row = list(beliefs)
            row[j] = _with_coordinate(params, beliefs[j], coord, x + off * step) if off else beliefs[j]
            instances.append(row)
        plan.append(((coord, j), stencil, step, start))
    solved = solve_many(params, instances) if instances else []
    out = {}
    for key, stencil, step, start in plan:
        eqs = solved[start:start + len(stencil.offsets)]
        stable = all(e.colors == eq.colors for e in eqs)
        out[key] = _Direction(key, stencil, step, np.array([_profile(e) for e in eqs]), stable)
    return out


def _K_ex_direction(params, beliefs, eq, h: float) -> _Direction:
    stencil = _stencil(params.K_ex, h, 0.0, math.inf)
    eqs = [solve(params.with_K_ex(params.K_ex + off * h), beliefs) for off in stencil.offsets]
    stable = all(e.colors == eq.colors for e in eqs)
    return _Direction(("K_ex", None), stencil, h, np.array([_profile(e) for e in eqs]), stable)


# --- qualitative signs -----------------------------------------------------


class Effect(enum.Enum):
    INCREASING = "strictly increasing"
    DECREASING = "strictly decreasing"
    UNAFFECTED = "unaffected"
    AMBIGUOUS = "ambiguous"

    @property
    def sign(self) -> int | None:
        return {Effect.INCREASING: 1, Effect.DECREASING: -1, Effect.UNAFFECTED: 0}.get(self)


@dataclass(frozen=True)
class SignRow:
    """Predicted effect of raising firm ``source``'s alpha_sq on a quantity.

    ``resolved`` is the sign of the analytic derivative; for ambiguous rows
    that is the sign a finite difference must reproduce.
    """

    quantity: str
    firm: int | None
    source: int
    effect: Effect
    analytic: float
    resolved: int
    delta: float = math.nan

    @property
    def expected_sign(self) -> int:
        return self.resolved if self.effect is Effect.AMBIGUOUS else self.effect.sign

    def agrees(self, threshold: float = UNAFFECTED_DELTA) -> bool:
        observed = 0 if abs(self.delta) < threshold else int(np.sign(self.delta))
        return observed == self.expected_sign


def _predict(quantity: str, firm: int | None, source: int, colors: Sequence[Color], has_red_effect: bool) -> Effect:
    """Qualitative effect of raising ``alpha_sq`` of ``source``.

    ``has_red_effect`` is true when some red firm has a positive belief,
    i.e. ``B1 < n1``; only then do orange beliefs reach the total quantity.
    """
    cj = colors[source]
    if cj is Color.GREEN:
        return Effect.UNAFFECTED
    strict_q = Effect.INCREASING if (cj is Color.RED or has_red_effect) else Effect.UNAFFECTED
    if quantity == "K":
        return Effect.DECREASING
    if quantity == "Q":
        return Effect.DECREASING if cj is Color.RED else strict_q
    ci = colors[firm]
    if firm == source:
        if quantity == "r":
            return Effect.DECREASING if ci is Color.ORANGE else Effect.UNAFFECTED
        if quantity == "k":
            return Effect.DECREASING
        # q: red always moves; orange only through Q
        if ci is Color.RED or has_red_effect:
            return Effect.DECREASING
        return Effect.UNAFFECTED
    if quantity == "r":
        return Effect.INCREASING if ci is Color.ORANGE else Effect.UNAFFECTED
    if ci is Color.RED and cj is Color.ORANGE:
        return Effect.AMBIGUOUS
    if ci is Color.RED:
        return Effect.INCREASING
    if quantity == "k":
        return Effect.INCREASING if ci is Color.ORANGE else Effect.UNAFFECTED
    # q of a green or orange firm moves against Q
    if cj is Color.RED:
        return Effect.INCREASING
    return Effect.DECREASING if has_red_effect else Effect.UNAFFECTED


def _alpha_derivatives(params, beliefs, eq, agg: AggregatePartials, j: int) -> dict:
    """Analytic d/dalpha_sq_j of K, Q and every firm's (q, k, r)."""
    cj = eq.colors[j]
    chain = _alpha_chain(params, beliefs[j], cj)
    if cj is Color.GREEN:
        dK = dQ = 0.0
    elif cj is Color.ORANGE:
        dK, dQ = agg.get("dK_dA_int") * chain, agg.get("dQ_dA_int") * chain
    else:
        dK, dQ = agg.get("dK_dB1") * chain, agg.get("dQ_dB1") * chain
    out = {("K", None): dK, ("Q", None): dQ}
    for i in range(eq.n):
        dq, dk, dr = _firm_derivative(params, beliefs, eq, agg, i, j)
        out[("q", i)], out[("k", i)], out[("r", i)] = dq * chain, dk * chain, dr * chain
    return out


def sign_report(params: EconomyParams, beliefs: Sequence[FirmBelief], eq: Equilibrium) -> list[SignRow]:
    """Predicted effect of each firm's belief on K, Q and every (q_i, k_i, r_i)."""
    agg = aggregate_partials(params, beliefs, eq)
    has_red_effect = eq.stats.B1 < eq.stats.n1
    rows = []
    for j in range(eq.n):
        derivs = _alpha_derivatives(params, beliefs, eq, agg, j)
        for (quantity, i), value in derivs.items():
            effect = _predict(quantity, i, j, eq.colors, has_red_effect)
            rows.append(SignRow(quantity, i, j, effect, value, int(np.sign(value))))
    return rows


# --- full report -----------------------------------------------------------


@dataclass(frozen=True)
class StaticsReport:
    colors: tuple[Color, ...]
    step: float
    aggregates: AggregatePartials
    partials: tuple[Partial, ...]
    signs: tuple[SignRow, ...]
    notes: tuple[str, ...] = field(default=())

    def failed_partials(self, rtol: float = 1e-4, atol_zero: float = 1e-8) -> list[Partial]:
        return [p for p in self.partials if not p.ok(rtol, atol_zero)]

    def failed_signs(self, threshold: float = UNAFFECTED_DELTA) -> list[SignRow]:
        return [s for s in self.signs if not s.agrees(threshold)]

    @property
    def max_rel_error(self) -> float:
        errs = [p.rel_error for p in self.partials if p.analytic != 0]
        return max(errs, default=0.0)


def _profile_index(n: int, quantity: str, firm: int | None) -> int:
    base = {"K": 0, "Q": 1, "K-K_ex": 2}
    if firm is None:
        return base[quantity]
    return 3 + {"q": 0, "k": 1, "r": 2}[quantity] * n + firm


def statics_report(params: EconomyParams, beliefs: Sequence[FirmBelief], eq: Equilibrium | None = None, *,
                   step: float = DEFAULT_STEP, min_step: float = MIN_STEP) -> StaticsReport:
    """Analytic partials paired with finite differences of re-solved equilibria.

    Starts from ``step`` and divides by ten until every perturbation keeps
    the color partition; raises :class:`RegimeInstability` once the step
    would drop below ``min_step``.
    """
    if eq is None:
        eq = solve(params, beliefs)
    agg = aggregate_partials(params, beliefs, eq)
    analytic_rows = _aggregate_rows(agg) + firm_partials(params, beliefs, eq)
    signs = sign_report(params, beliefs, eq)
    h = step
    while True:
        directions = _belief_directions(params, beliefs, eq, h, relative_alpha=True)
        directions[("K_ex", None)] = _K_ex_direction(params, beliefs, eq, h)
        if all(d.stable for d in directions.values()):
            break
        h /= 10
        if h < min_step * (1 - 1e-9):
            raise RegimeInstability(f"color partition {tuple(map(str, eq.colors))} changes for every step >= {min_step}")
    n = eq.n
    first = {}
    for j, cj in enumerate(eq.colors):
        first.setdefault(_coordinate(cj), j)
    partials = []
    for row in analytic_rows:
        if row.source is not None:
            key = (row.wrt, row.source)
        elif row.wrt == "K_ex":
            key = ("K_ex", None)
        else:
            # any firm in the bucket moves the bucket sum one for one
            coord = "a" if row.wrt == "A_int" else "b"
            key = (coord, first[coord])
        direction = directions[key]
        numeric = float(direction.derivative()[_profile_index(n, row.quantity, row.firm)])
        partials.append(Partial(row.quantity, row.firm, row.wrt, row.source, row.analytic, numeric, direction.step))
    sign_rows = []
    for srow in signs:
        key = ("alpha_sq", srow.source)
        if key not in directions:
            sign_rows.append(srow)
            continue
        d = directions[key]
        values = d.profiles[:, _profile_index(n, srow.quantity, srow.firm)]
        # raw change across the stencil, signed to match a rise in alpha_sq
        delta = float(values[-1] - values[0])
        sign_rows.append(SignRow(srow.quantity, srow.firm, srow.source, srow.effect, srow.analytic, srow.resolved, delta))
        # chain-rule coherence: analytic alpha derivative vs finite difference
        partials.append(Partial(srow.quantity, srow.firm, "alpha_sq", srow.source, srow.analytic,
                                float(d.derivative()[_profile_index(n, srow.quantity, srow.firm)]), d.step))
    return StaticsReport(eq.colors, h, agg, tuple(partials), tuple(sign_rows))
