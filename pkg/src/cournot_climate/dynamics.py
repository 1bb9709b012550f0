"""Repeated one-shot games with accumulating carbon.

Each round the firms play the static equilibrium with the carbon emitted
so far treated as exogenous, then that round's emissions are added to the
stock.  Beliefs come from an exogenous schedule; nothing is learned.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .equilibrium import Equilibrium, solve
from .errors import DomainError, HypothesisViolation, SolverError
from .model import EconomyParams, FirmBelief

CHECK_TOL = 1e-9


@dataclass(frozen=True)
class BeliefSchedule:
    """Beliefs ``alpha_sq(m, j)`` for rounds ``m = 1, 2, ...``.

    ``a_limit`` and ``beta_limit`` are the declared long-run bounds: every
    round must satisfy ``a_j <= a_limit`` (for the green-technology limit)
    or ``beta_j >= beta_limit`` (for the no-green limit).  When left as
    None they are taken from ``limit_alpha_sq``, the beliefs the schedule
    settles at.
    """

    n: int
    alpha_sq: Callable[[int, int], float]
    risk_weights: tuple[float | None, ...] | None = None
    limit_alpha_sq: tuple[float, ...] | None = None
    a_limit: float | None = None
    beta_limit: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("a schedule needs at least one firm")
        if self.risk_weights is not None and len(self.risk_weights) != self.n:
            raise DomainError("one risk weight per firm required")
        if self.limit_alpha_sq is not None and len(self.limit_alpha_sq) != self.n:
            raise DomainError("one limiting belief per firm required")

    def _weight(self, j):
        return None if self.risk_weights is None else self.risk_weights[j]

    def beliefs(self, m: int) -> list[FirmBelief]:
        return [FirmBelief(float(self.alpha_sq(m, j)), self._weight(j)) for j in range(self.n)]

    def _limit_beliefs(self) -> list[FirmBelief]:
        if self.limit_alpha_sq is None:
            raise DomainError("the schedule declares no limit; pass a_limit / beta_limit explicitly")
        return [FirmBelief(x, self._weight(j)) for j, x in enumerate(self.limit_alpha_sq)]

    def declared_a(self, params: EconomyParams) -> float:
        if self.a_limit is not None:
            return self.a_limit
        return max(bel.a(params) for bel in self._limit_beliefs())

    def declared_beta(self, params: EconomyParams) -> float:
        if self.beta_limit is not None:
            return self.beta_limit
        return min(bel.beta(params) for bel in self._limit_beliefs())

    @classmethod
    def constant(cls, alpha_sq: Sequence[float], risk_weights=None) -> BeliefSchedule:
        values = tuple(float(x) for x in alpha_sq)
        return cls(len(values), lambda m, j: values[j], _tuple(risk_weights), values)

    @classmethod
    def relaxing(cls, start: Sequence[float], target: Sequence[float], rate: float, risk_weights=None) -> BeliefSchedule:
        """``alpha_sq`` moves geometrically from ``start`` (round 1) to ``target``."""
        if not 0 <= rate < 1:
            raise DomainError("rate must lie in [0, 1)")
        s = tuple(float(x) for x in start)
        t = tuple(float(x) for x in target)
        if len(s) != len(t):
            raise DomainError("start and target need the same length")

        def alpha_sq(m, j):
            if math.isinf(t[j]) or math.isinf(s[j]):
                return t[j] if m > 1 else s[j]
            return t[j] + (s[j] - t[j]) * rate ** (m - 1)

        return cls(len(s), alpha_sq, _tuple(risk_weights), t)


def _tuple(x):
    return None if x is None else tuple(x)


@dataclass(frozen=True)
class DynamicsTrace:
    """Per-round equilibria with the carbon stock ``K[m]`` (``K[0] = K_ex``)."""

    equilibria: tuple[Equilibrium, ...]
    K: np.ndarray
    Q: np.ndarray
    temperature: np.ndarray | None = None
    diverged: bool = False

    @property
    def rounds(self) -> int:
        return len(self.equilibria)


def default_divergence_bound(params: EconomyParams, schedule: BeliefSchedule) -> float:
    scales = [1.0]
    bels = schedule.beliefs(1)
    scales += [bel.a(params) for bel in bels if math.isfinite(bel.a(params))]
    if params.A > params.c:
        scales += [(params.A - params.c) / bel.beta(params) for bel in bels if bel.beta(params) > 0]
    return 1e6 * max(x for x in scales if math.isfinite(x))


def simulate(params: EconomyParams, schedule: BeliefSchedule, rounds: int, *, alpha_true: float | None = None,
             divergence_bound: float | None = None, stop: Callable[[int, float], bool] | None = None,
             on_round: Callable[[int, Sequence[FirmBelief], Equilibrium], None] | None = None) -> DynamicsTrace:
    """Play ``rounds`` myopic rounds.

    ``stop(m, K_m)`` may end the run early; the run also ends once the
    stock exceeds ``divergence_bound``.  ``on_round`` sees each round's
    beliefs and equilibrium (used for per-round checks).
    """
    if rounds < 1:
        raise DomainError("rounds must be >= 1")
    if divergence_bound is None:
        divergence_bound = default_divergence_bound(params, schedule)
    K = [params.K_ex]
    Q = []
    eqs = []
    diverged = False
    for m in range(1, rounds + 1):
        beliefs = schedule.beliefs(m)
        try:
            eq = solve(params.with_K_ex(K[-1]), beliefs)
        except SolverError as err:
            raise SolverError(f"round {m}: {err}") from err
        if on_round is not None:
            on_round(m, beliefs, eq)
        eqs.append(eq)
        Q.append(eq.Q)
        K.append(eq.K)
        if eq.K > divergence_bound:
            diverged = True
            break
        if stop is not None and stop(m, eq.K):
            break
    K_arr = np.array(K)
    temperature = None if alpha_true is None else alpha_true * K_arr
    return DynamicsTrace(tuple(eqs), K_arr, np.array(Q), temperature, diverged)


class LimitStatus(enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    NOT_CONVERGED = "not converged"
    STALLED = "stalled"


@dataclass(frozen=True)
class LimitVerdict:
    status: LimitStatus
    limit: float
    final_K: float
    gap: float
    rounds: int
    trace: DynamicsTrace
    temperature: float | None = None
    temperature_limit: float | None = None
    violations: tuple[str, ...] = field(default=())

    @property
    def converged(self) -> bool:
        return self.status is LimitStatus.CONVERGED


def minimal_carbon_violation(params: EconomyParams, beliefs: Sequence[FirmBelief], eq: Equilibrium) -> float:
    """Largest shortfall in the minimal-carbon bound; 0 when ``Q >= z``.

    While ``Q < z`` every firm emits at least ``lam_i (a_i - K_minus_i)``
    with ``lam_i = beta_i / (2 (1 + beta_i))``.  A firm with ``beta_i = 0``
    has no finite ``a_i``; the same argument gives ``k_i >= d / 2`` instead.
    """
    if not eq.Q < params.z:
        return 0.0
    worst = 0.0
    for bel, s in zip(beliefs, eq.strategies):
        beta = bel.beta(params)
        if beta == 0:
            bound = params.d / 2
        elif math.isinf(beta):
            bound = 0.5 * (0.0 - (eq.K - s.k))
        else:
            bound = beta / (2 * (1 + beta)) * (bel.a(params) - (eq.K - s.k))
        worst = max(worst, bound - s.k)
    return worst


def check_limit_green(params: EconomyParams, schedule: BeliefSchedule, tol: float = 1e-6, max_rounds: int = 10**5, *,
                      alpha_true: float | None = None, divergence_bound: float | None = None) -> LimitVerdict:
    """Run until the carbon stock is within ``tol`` of the declared ``a``.

    With ``alpha_true`` the stock is driven to within
    ``tol / max(1, alpha_true)`` so that the temperature ``alpha_true * K``
    is resolved to ``tol`` as well.  The verdict reports it next to
    ``d / (b alpha_true)``, the value it approaches when the beliefs settle
    at ``alpha_true ** 2``.
    """
    if not params.c + params.d < params.A:
        raise DomainError("the green-technology limit needs c + d < A")
    a_bar = schedule.declared_a(params)
    violations: list[str] = []
    T_limit = None
    if alpha_true is not None:
        if not (alpha_true > 0 and params.b > 0):
            raise DomainError("a temperature limit needs alpha_true > 0 and b > 0")
        T_limit = params.d / (params.b * alpha_true)

    def on_round(m, beliefs, eq):
        for j, bel in enumerate(beliefs):
            if bel.a(params) > a_bar * (1 + 1e-15):
                raise HypothesisViolation(f"round {m}: firm {j} has a = {bel.a(params)!r} above the declared {a_bar!r}", m)
        shortfall = minimal_carbon_violation(params, beliefs, eq)
        if shortfall > CHECK_TOL:
            violations.append(f"round {m}: minimal-carbon bound missed by {shortfall:.3e}")
        if math.isfinite(a_bar) and eq.K > a_bar + CHECK_TOL * max(1.0, a_bar) and params.K_ex <= a_bar:
            violations.append(f"round {m}: carbon stock {eq.K!r} overshoots the limit {a_bar!r}")

    K_tol = tol if alpha_true is None else tol / max(1.0, alpha_true)

    def close(m, K):
        return math.isfinite(a_bar) and abs(K - a_bar) < K_tol

    trace = simulate(params, schedule, max_rounds, alpha_true=alpha_true, divergence_bound=divergence_bound,
                     stop=close, on_round=on_round)
    final = float(trace.K[-1])
    gap = abs(final - a_bar) if math.isfinite(a_bar) else math.inf
    if trace.diverged:
        status = LimitStatus.DIVERGED
    elif math.isfinite(a_bar) and close(trace.rounds, final):
        status = LimitStatus.CONVERGED
    else:
        status = LimitStatus.NOT_CONVERGED
    T = None if alpha_true is None else alpha_true * final
    return LimitVerdict(status, a_bar, final, gap, trace.rounds, trace, T, T_limit, tuple(violations))


def check_limit_no_green(params: EconomyParams, schedule: BeliefSchedule, tol: float = 1e-6, max_rounds: int = 10**5, *,
                         divergence_bound: float | None = None) -> LimitVerdict:
    """Run until the carbon stock is within ``tol`` of ``(A - c) / beta``.

    If the initial stock already reaches that level nobody produces and the
    verdict is ``STALLED``.
    """
    if not params.c < params.A <= params.c + params.d:
        raise DomainError("the no-green limit needs c < A <= c + d")
    beta_bar = schedule.declared_beta(params)
    limit = (params.A - params.c) / beta_bar if beta_bar > 0 else math.inf
    violations: list[str] = []
    below_start = params.K_ex < limit

    def on_round(m, beliefs, eq):
        for j, bel in enumerate(beliefs):
            if bel.beta(params) < beta_bar * (1 - 1e-15):
                raise HypothesisViolation(f"round {m}: firm {j} has beta = {bel.beta(params)!r} below the declared {beta_bar!r}", m)
        for j, (bel, s) in enumerate(zip(beliefs, eq.strategies)):
            beta = bel.beta(params)
            if s.q > 0 and beta > 0 and not eq.K < (params.A - params.c) / beta:
                violations.append(f"round {m}: producing firm {j} has K = {eq.K!r} >= (A - c)/beta_{j}")
        if below_start and not eq.K < limit:
            violations.append(f"round {m}: carbon stock {eq.K!r} reached the limit {limit!r}")

    def close(m, K):
        # from a stock at or above the limit nobody ever produces again
        return not below_start or (math.isfinite(limit) and abs(K - limit) < tol)

    trace = simulate(params, schedule, max_rounds, divergence_bound=divergence_bound, stop=close, on_round=on_round)
    final = float(trace.K[-1])
    gap = abs(final - limit) if math.isfinite(limit) else math.inf
    if trace.diverged:
        status = LimitStatus.DIVERGED
    elif not below_start:
        status = LimitStatus.STALLED
    elif close(trace.rounds, final):
        status = LimitStatus.CONVERGED
    else:
        status = LimitStatus.NOT_CONVERGED
    return LimitVerdict(status, limit, final, gap, trace.rounds, trace, violations=tuple(violations))
