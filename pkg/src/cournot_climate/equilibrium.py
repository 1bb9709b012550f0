"""n-firm equilibrium by enumeration of color partitions.

The equilibrium is unique, and its colors are ordered by belief: in a
partition with mitigating firms, sorting by ``a`` gives green, then orange,
then red; otherwise sorting by the red-branch demand coefficient ``xi``
gives white, then red.  That leaves O(n^2) candidate partitions, each with
closed-form aggregates ``(Q, K)``.  A candidate is accepted when every firm
passes the membership test of its assigned color.

Two independent cross-checks live here as well: damped simultaneous
best-response iteration, and an exhaustive 4^n search that validates
candidates through best responses instead of membership inequalities.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, InfeasibleCandidate, SolverError
from .model import (
    COLOR_BY_CODE,
    Color,
    EconomyParams,
    FirmBelief,
    Strategy,
    best_response_arrays,
)

DEFAULT_TOL = 1e-12
PROFILE_TOL = 1e-9

WHITE, GREEN, ORANGE, RED = 0, 1, 2, 3


@dataclass(frozen=True)
class BeliefArrays:
    beta: np.ndarray
    a: np.ndarray
    b: np.ndarray  # 1 / (1 + beta)
    xi: np.ndarray

    @property
    def n(self) -> int:
        return len(self.beta)


def belief_arrays(params: EconomyParams, beliefs: Sequence[FirmBelief]) -> BeliefArrays:
    beta = np.array([bel.beta(params) for bel in beliefs], dtype=float)
    a = np.array([bel.a(params) for bel in beliefs], dtype=float)
    inf = np.isinf(beta)
    fb = np.where(inf, 0.0, beta)
    b = np.where(inf, 0.0, 1.0 / (1.0 + fb))
    xi = np.where(inf, -params.K_ex, (params.A - params.c - fb * params.K_ex) / (1.0 + fb))
    return BeliefArrays(beta, a, b, xi)


@dataclass(frozen=True)
class PartitionStats:
    """Bucket counts and sums entering the closed-form aggregates."""

    colors: tuple[Color, ...]
    n_white: int
    n0_green: int
    n_int: int
    n1: int
    A_int: float
    B1: float

    @property
    def m(self) -> int:
        return self.n0_green + self.n_int

    @property
    def N(self) -> float:
        return (self.n_int + self.n1 + 1) * (self.m + 1) - self.B1 * self.n0_green

    @classmethod
    def from_colors(cls, params: EconomyParams, beliefs: Sequence[FirmBelief], colors: Sequence[Color]) -> PartitionStats:
        colors = tuple(colors)
        if len(colors) != len(beliefs):
            raise ValueError("one color per firm required")
        A_int = math.fsum(bel.a(params) for bel, col in zip(beliefs, colors) if col is Color.ORANGE)
        B1 = math.fsum(1.0 / (1.0 + bel.beta(params)) for bel, col in zip(beliefs, colors) if col is Color.RED)
        return cls(
            colors=colors,
            n_white=colors.count(Color.WHITE),
            n0_green=colors.count(Color.GREEN),
            n_int=colors.count(Color.ORANGE),
            n1=colors.count(Color.RED),
            A_int=A_int,
            B1=B1,
        )


@dataclass(frozen=True)
class Equilibrium:
    strategies: tuple[Strategy, ...]
    colors: tuple[Color, ...]
    Q: float
    K: float
    stats: PartitionStats
    residual: float = 0.0
    iterations: int = field(default=0, compare=False)

    @property
    def n(self) -> int:
        return len(self.strategies)

    @property
    def q(self) -> np.ndarray:
        return np.array([s.q for s in self.strategies])

    @property
    def k(self) -> np.ndarray:
        return np.array([s.k for s in self.strategies])

    @property
    def r(self) -> np.ndarray:
        return np.array([s.r for s in self.strategies])


def aggregates_for_partition(params: EconomyParams, beliefs: Sequence[FirmBelief], stats: PartitionStats) -> tuple[float, float]:
    """Total quantity and carbon for a green/orange/red partition."""
    if stats.n_white:
        raise ValueError("aggregates_for_partition covers partitions without white firms")
    if not math.isfinite(stats.A_int):
        raise ValueError("orange firms must have a finite belief coefficient")
    N = stats.N
    assert N > 0, f"denominator N={N} must be positive"
    A, c, d, z = params.A, params.c, params.d, params.z
    B1, m, n_int, n1 = stats.B1, stats.m, stats.n_int, stats.n1
    carbon = stats.A_int + params.K_ex
    K = (B1 * (A - c + m * d) + (B1 + m + 1) * carbon) / N
    Q = z + (B1 * (A - c + n_int * d) - (n_int + n1 + 1) * z + (B1 - n1) * carbon) / N
    return Q, K


def white_red_aggregates(params: EconomyParams, beliefs: Sequence[FirmBelief], n_white: int, tol: float = 0.0):
    """Aggregates when the ``n_white`` firms with smallest ``xi`` stay out.

    Returns ``(Q, K, q)`` with ``q`` in input order.  Raises
    :class:`InfeasibleCandidate` when a producing firm would get a negative
    quantity or a non-producing firm would want to enter.
    """
    arr = belief_arrays(params, beliefs)
    n = arr.n
    if not 0 <= n_white <= n:
        raise ValueError(f"n_white must lie in [0, {n}]")
    order = np.argsort(arr.xi, kind="stable")
    red = order[n_white:]
    white = order[:n_white]
    if np.isinf(arr.beta[red]).any():
        raise InfeasibleCandidate("a firm with infinite climate concern cannot emit")
    n1 = len(red)
    Q = math.fsum(arr.xi[red]) / (n1 + 1)
    K = Q + params.K_ex
    q = np.zeros(n)
    q[red] = arr.xi[red] - Q
    if (q[red] < -tol).any():
        raise InfeasibleCandidate(f"negative red quantity {q[red].min()!r}")
    if n_white:
        if Q < params.z - tol:
            raise InfeasibleCandidate("white firms need Q >= z")
        finite = ~np.isinf(arr.beta[white])
        if (arr.xi[white][finite] > Q + tol).any():
            raise InfeasibleCandidate("a white firm would profit from producing")
    return Q, K, tuple(float(x) for x in q)


# --- candidate enumeration -------------------------------------------------


def _stack(params: EconomyParams, rows: Sequence[Sequence[FirmBelief]]) -> BeliefArrays:
    """Belief arrays of shape ``(B, n)`` for a batch of equally sized economies."""
    arrs = [belief_arrays(params, row) for row in rows]
    if len({arr.n for arr in arrs}) != 1:
        raise ValueError("every instance in a batch needs the same number of firms")
    return BeliefArrays(*(np.stack([getattr(arr, f) for arr in arrs]) for f in ("beta", "a", "b", "xi")))


def _expand(arr: BeliefArrays) -> BeliefArrays:
    """Insert a candidate axis: ``(B, n)`` becomes ``(B, 1, n)``."""
    return BeliefArrays(arr.beta[:, None, :], arr.a[:, None, :], arr.b[:, None, :], arr.xi[:, None, :])


def _templates(n: int) -> np.ndarray:
    """Sorted-order color codes: green/orange/red splits, then white/red splits."""
    rows = []
    for g in range(n + 1):
        for o in range(n + 1 - g):
            rows.append([GREEN] * g + [ORANGE] * o + [RED] * (n - g - o))
    for w in range(1, n + 1):
        rows.append([WHITE] * w + [RED] * (n - w))
    return np.array(rows, dtype=int).reshape(-1, n)


def _ordered_codes(arr: BeliefArrays) -> np.ndarray:
    """Color codes of every ordered candidate, shape ``(B, C, n)``, input order."""
    B, n = arr.a.shape
    tmpl = _templates(n)
    n_mixed = len(tmpl) - n
    rank_a = np.argsort(np.argsort(arr.a, axis=1, kind="stable"), axis=1, kind="stable")
    rank_xi = np.argsort(np.argsort(arr.xi, axis=1, kind="stable"), axis=1, kind="stable")
    mixed = np.moveaxis(tmpl[:n_mixed][:, rank_a], 0, 1)
    white_red = np.moveaxis(tmpl[n_mixed:][:, rank_xi], 0, 1)
    return np.concatenate([mixed, white_red], axis=1)


def _inadmissible(arr: BeliefArrays, codes: np.ndarray) -> np.ndarray:
    # skeptical firms (a = inf) cannot mitigate; infinitely concerned firms cannot emit
    mitigates = (codes == GREEN) | (codes == ORANGE)
    bad = (mitigates & np.isinf(arr.a)) | ((codes == RED) & np.isinf(arr.beta))
    return bad.any(axis=-1)


def _partition_aggregates(params: EconomyParams, arr: BeliefArrays, codes: np.ndarray):
    """Closed-form (Q, K) per candidate; ``arr`` must broadcast against ``codes``."""
    A, c, d, z = params.A, params.c, params.d, params.z
    green = codes == GREEN
    orange = codes == ORANGE
    red = codes == RED
    n0 = green.sum(axis=-1)
    n_int = orange.sum(axis=-1)
    n1 = red.sum(axis=-1)
    m = n0 + n_int
    A_int = np.where(orange, np.where(np.isinf(arr.a), 0.0, arr.a), 0.0).sum(axis=-1)
    B1 = np.where(red, arr.b, 0.0).sum(axis=-1)
    N = (n_int + n1 + 1) * (m + 1) - B1 * n0
    carbon = A_int + params.K_ex
    K = (B1 * (A - c + m * d) + (B1 + m + 1) * carbon) / N
    Q = z + (B1 * (A - c + n_int * d) - (n_int + n1 + 1) * z + (B1 - n1) * carbon) / N
    # white/red candidates use the xi formulas instead
    wr = (codes == WHITE).any(axis=-1)
    Q_wr = np.where(red, arr.xi, 0.0).sum(axis=-1) / (n1 + 1)
    Q = np.where(wr, Q_wr, Q)
    K = np.where(wr, Q_wr + params.K_ex, K)
    return Q, K


def _feedback(params: EconomyParams, arr: BeliefArrays, codes: np.ndarray, Q: np.ndarray, K: np.ndarray):
    """Per-firm (q, k) from aggregates through the color feedback formulas."""
    Qc = Q[..., None]
    Kc = K[..., None]
    fb = np.where(np.isinf(arr.beta), 0.0, arr.beta)
    with np.errstate(invalid="ignore", over="ignore"):
        red_q = (params.A - params.c - Qc - fb * Kc) * arr.b
        orange_k = arr.a - Kc
    red = codes == RED
    q = np.where(codes == WHITE, 0.0, np.where(red, red_q, params.z - Qc))
    k = np.where(codes == ORANGE, orange_k, np.where(red, red_q, 0.0))
    return q, k


def _membership_violation(params: EconomyParams, arr: BeliefArrays, codes: np.ndarray, Q: np.ndarray, K: np.ndarray) -> np.ndarray:
    """Largest violation of the (Q, K)-form color tests, per firm."""
    z, d = params.z, params.d
    Qc = Q[..., None]
    Kc = K[..., None]
    inf_beta = np.isinf(arr.beta)
    fb = np.where(inf_beta, 0.0, arr.beta)
    with np.errstate(invalid="ignore", over="ignore"):
        slack = np.where(inf_beta, -np.inf, z - Qc + d - fb * Kc)  # z - Q + beta (a - K)
        white = np.maximum(slack, z - Qc)
        green = np.maximum(arr.a - Kc, Qc - z)
        orange = np.maximum(Kc - arr.a, (Qc - Kc) - (z - arr.a))
        red = np.maximum(-slack, (z - arr.a) - (Qc - Kc))
    v = np.where(codes == WHITE, white, np.where(codes == GREEN, green, np.where(codes == ORANGE, orange, red)))
    v = np.where(np.isnan(v), np.inf, v)
    return np.maximum(v, 0.0)


@dataclass(frozen=True)
class Candidate:
    codes: tuple[int, ...]
    q: np.ndarray
    k: np.ndarray
    Q: float
    K: float
    violation: float

    @property
    def colors(self) -> tuple[Color, ...]:
        return tuple(COLOR_BY_CODE[c] for c in self.codes)

    @property
    def n_red(self) -> int:
        return self.codes.count(RED)


def _scale(params: EconomyParams, K) -> np.ndarray:
    return np.maximum(1.0, np.maximum(params.A, np.abs(K)))


@dataclass(frozen=True)
class _Batch:
    codes: np.ndarray  # (B, C, n)
    q: np.ndarray  # (B, C, n)
    k: np.ndarray
    Q: np.ndarray  # (B, C)
    K: np.ndarray
    violation: np.ndarray  # (B, C), inf for inadmissible candidates
    ok: np.ndarray


def _evaluate(params: EconomyParams, arr: BeliefArrays, tol: float) -> _Batch:
    codes = _ordered_codes(arr)
    ex = _expand(arr)
    Q, K = _partition_aggregates(params, ex, codes)
    q, k = _feedback(params, ex, codes, Q, K)
    viol = _membership_violation(params, ex, codes, Q, K).max(axis=-1)
    consistency = np.maximum(np.abs(Q - q.sum(axis=-1)), np.abs(K - params.K_ex - k.sum(axis=-1)))
    viol = np.maximum(viol, np.where(np.isnan(consistency), np.inf, consistency))
    viol = np.where(_inadmissible(ex, codes), np.inf, viol)
    ok = viol <= tol * _scale(params, K)
    return _Batch(codes, q, k, Q, K, viol, ok)


def enumerate_equilibria(params: EconomyParams, beliefs: Sequence[FirmBelief], tol: float = DEFAULT_TOL) -> list[Candidate]:
    """Every ordered candidate partition that passes validation.

    ``tol`` is relative to ``max(1, A, K)`` and only absorbs rounding at
    regime boundaries.  Duplicate partitions (all-red appears in both
    families) are reported once.
    """
    if len(beliefs) == 0:
        raise ValueError("at least one firm is required")
    batch = _evaluate(params, _stack(params, [beliefs]), tol)
    seen = set()
    out = []
    for i in np.flatnonzero(batch.ok[0]):
        key = tuple(int(c) for c in batch.codes[0, i])
        if key in seen:
            continue
        seen.add(key)
        out.append(Candidate(key, batch.q[0, i], batch.k[0, i], float(batch.Q[0, i]), float(batch.K[0, i]),
                             float(batch.violation[0, i])))
    return out


def _pick(batch: _Batch) -> np.ndarray:
    """Index of the reported candidate per instance.

    Prefers exact validation, then fewer red firms, then smaller violation.
    Raises if nothing validates or validated profiles disagree.
    """
    B, C, n = batch.codes.shape
    if not batch.ok.any(axis=1).all():
        bad = int(np.flatnonzero(~batch.ok.any(axis=1))[0])
        raise SolverError(f"no candidate partition validated for instance {bad}; this indicates a bug")
    n_red = (batch.codes == RED).sum(axis=-1)
    bound = np.maximum(batch.violation.max(axis=1, where=batch.ok, initial=0.0), np.finfo(float).tiny)
    frac = np.where(batch.ok, batch.violation, 0.0) / bound[:, None]
    score = np.where(batch.ok, (batch.violation > 0) * (2 * n + 4) + 2 * n_red + frac, np.inf)
    best = score.argmin(axis=1)
    rows = np.arange(B)
    gap = np.maximum(np.abs(batch.q - batch.q[rows, best][:, None, :]),
                     np.abs(batch.k - batch.k[rows, best][:, None, :])).max(axis=-1)
    clash = batch.ok & (gap > PROFILE_TOL)
    if clash.any():
        b, i = map(int, np.argwhere(clash)[0])
        raise SolverError(
            f"two partitions validated with different profiles (gap {gap[b, i]:.3e}) for instance {b}: "
            f"{batch.codes[b, best[b]].tolist()} vs {batch.codes[b, i].tolist()}"
        )
    return best


def equilibrium_from_profile(params: EconomyParams, beliefs, colors, q, k, residual=None, iterations=0) -> Equilibrium:
    """Package a strategy profile; tiny negative rounding is clipped."""
    q = np.maximum(np.asarray(q, dtype=float), 0.0)
    k = np.clip(np.asarray(k, dtype=float), 0.0, q)
    strategies = tuple(Strategy(float(qi), float(ki)) for qi, ki in zip(q, k))
    Q = math.fsum(q)
    K = params.K_ex + math.fsum(k)
    stats = PartitionStats.from_colors(params, beliefs, colors)
    if residual is None:
        residual = best_response_gap(params, beliefs, q, k)
    return Equilibrium(strategies, tuple(colors), Q, K, stats, residual, iterations)


def _check_equal_beliefs(params: EconomyParams, beliefs, colors, q, k):
    a = [bel.a(params) for bel in beliefs]
    for i, j in itertools.combinations(range(len(beliefs)), 2):
        if a[i] == a[j] and colors[i] in (Color.GREEN, Color.ORANGE) and colors[i] is colors[j]:
            assert q[i] == q[j] and k[i] == k[j], "equal beliefs, unequal strategies"


def solve_many(params: EconomyParams, instances: Sequence[Sequence[FirmBelief]], *,
               tol: float = DEFAULT_TOL) -> list[Equilibrium]:
    """Solve a batch of economies that share ``params`` and firm count.

    Same result as calling :func:`solve` on each instance, but the
    candidate evaluation runs as one array computation.
    """
    if len(instances) == 0:
        return []
    if any(len(row) == 0 for row in instances):
        raise ValueError("at least one firm is required")
    arr = _stack(params, instances)
    batch = _evaluate(params, arr, tol)
    best = _pick(batch)
    rows = np.arange(len(instances))
    q = np.maximum(batch.q[rows, best], 0.0)
    k = np.clip(batch.k[rows, best], 0.0, q)
    residual = _br_gap_rows(params, arr, q, k)
    out = []
    for i, beliefs in enumerate(instances):
        colors = tuple(COLOR_BY_CODE[c] for c in batch.codes[i, best[i]])
        _check_equal_beliefs(params, beliefs, colors, q[i], k[i])
        out.append(equilibrium_from_profile(params, beliefs, colors, q[i], k[i], residual=float(residual[i])))
    return out


def solve(params: EconomyParams, beliefs: Sequence[FirmBelief], *, tol: float = DEFAULT_TOL) -> Equilibrium:
    """Unique Nash equilibrium of the n-firm game."""
    if len(beliefs) == 0:
        raise ValueError("at least one firm is required")
    return solve_many(params, [beliefs], tol=tol)[0]


# --- brute force -----------------------------------------------------------


def brute_force_equilibria(params: EconomyParams, beliefs: Sequence[FirmBelief], tol: float = 1e-10) -> list[Candidate]:
    """Validate all 4^n color assignments (test oracle, keep n small).

    Aggregates come from the 2x2 linear system implied by summing the color
    feedback formulas; acceptance requires every firm's strategy to equal its
    exact best response to the others.
    """
    n = len(beliefs)
    if n > 8:
        raise ValueError("brute force is limited to n <= 8")
    arr = belief_arrays(params, beliefs)
    codes = np.array(list(itertools.product(range(4), repeat=n)), dtype=int)
    codes = codes[~_inadmissible(arr, codes)]
    A, c, z = params.A, params.c, params.z
    mitig = (codes == GREEN) | (codes == ORANGE)
    orange = codes == ORANGE
    red = codes == RED
    m = mitig.sum(axis=1)
    n_o = orange.sum(axis=1)
    n1 = red.sum(axis=1)
    B1 = np.where(red, arr.b, 0.0).sum(axis=1)
    A_O = np.where(orange, np.where(np.isinf(arr.a), 0.0, arr.a), 0.0).sum(axis=1)
    # (1+m+B1) Q + (n1-B1) K = m z + B1 (A-c)
    # B1 Q + (1+n_o+n1-B1) K = K_ex + A_O + B1 (A-c)
    m11 = 1 + m + B1
    m12 = n1 - B1
    m21 = B1
    m22 = 1 + n_o + n1 - B1
    r1 = m * z + B1 * (A - c)
    r2 = params.K_ex + A_O + B1 * (A - c)
    det = m11 * m22 - m12 * m21
    Q = (r1 * m22 - m12 * r2) / det
    K = (m11 * r2 - m21 * r1) / det
    q, k = _feedback(params, arr, codes, Q, K)
    gap = _br_gap_rows(params, arr, q, k)
    ok = gap <= tol * _scale(params, K)
    return [
        Candidate(tuple(int(x) for x in codes[i]), q[i], k[i], float(Q[i]), float(K[i]), float(gap[i]))
        for i in np.flatnonzero(ok)
    ]


def _br_gap_rows(params: EconomyParams, arr: BeliefArrays, q: np.ndarray, k: np.ndarray) -> np.ndarray:
    Q = q.sum(axis=-1, keepdims=True)
    K = params.K_ex + k.sum(axis=-1, keepdims=True)
    Qm = np.clip(Q - q, 0.0, params.A)
    Km = np.maximum(K - k, 0.0)
    bq, bk, _ = best_response_arrays(params, arr.beta, arr.a, Qm, Km)
    gap = np.maximum(np.abs(bq - q), np.abs(bk - k)).max(axis=-1)
    bad = (q < 0).any(axis=-1) | (k < 0).any(axis=-1) | (k > q + 1e-12 * np.maximum(1.0, q)).any(axis=-1)
    return np.where(bad | np.isnan(gap), np.inf, gap)


def best_response_gap(params: EconomyParams, beliefs: Sequence[FirmBelief], q, k) -> float:
    """Sup-norm distance between a profile and everybody's best response to it."""
    arr = belief_arrays(params, beliefs)
    return float(_br_gap_rows(params, arr, np.asarray(q, dtype=float), np.asarray(k, dtype=float)))


# --- damped iteration ------------------------------------------------------


def default_damping(n: int) -> float:
    # Undamped Cournot updates oscillate for n >= 3; the quantity block of the
    # best-response map has eigenvalue -(n-1)/2, so keep 1 - lam (n+1)/2 near 0.
    return min(0.5, 2.0 / (n + 1))


def damped_iteration(params: EconomyParams, beliefs: Sequence[FirmBelief], q0, k0, *, damping: float | None = None,
                     max_iter: int = 10**6, tol: float = DEFAULT_TOL):
    """Simultaneous damped best-response updates, vectorized over starts.

    ``q0`` and ``k0`` have shape ``(..., n)``.  Iteration stops once every
    start satisfies ``max |BR(s) - s| < tol``.  Returns ``(q, k, residual,
    iterations)`` where ``residual`` has the leading shape of the starts.
    """
    arr = belief_arrays(params, beliefs)
    lam = default_damping(arr.n) if damping is None else damping
    if not 0 < lam <= 1:
        raise ValueError("damping must lie in (0, 1]")
    q = np.array(q0, dtype=float)
    k = np.array(k0, dtype=float)
    if q.shape != k.shape or q.shape[-1] != arr.n:
        raise ValueError("start arrays must have shape (..., n)")
    residual = np.full(q.shape[:-1], np.inf)
    for it in range(max_iter + 1):
        Q = q.sum(axis=-1, keepdims=True)
        K = params.K_ex + k.sum(axis=-1, keepdims=True)
        Qm = np.clip(Q - q, 0.0, params.A)
        Km = np.maximum(K - k, 0.0)
        bq, bk, _ = best_response_arrays(params, arr.beta, arr.a, Qm, Km)
        dq = bq - q
        dk = bk - k
        residual = np.maximum(np.abs(dq), np.abs(dk)).max(axis=-1)
        if (residual < tol).all():
            return q, k, residual, it
        if it == max_iter:
            break
        q += lam * dq
        k += lam * dk
    raise ConvergenceError(
        f"damped iteration did not converge in {max_iter} steps (residual {residual.max():.3e}); "
        f"try a smaller damping than {lam}",
        residual=float(residual.max()),
        iterations=max_iter,
    )


def iterate_best_response(params: EconomyParams, beliefs: Sequence[FirmBelief], start: Sequence[Strategy] | None = None,
                          damping: float | None = None, max_iter: int = 10**6, tol: float = DEFAULT_TOL) -> Equilibrium:
    """Equilibrium reached by damped best-response iteration from ``start``."""
    n = len(beliefs)
    if start is None:
        start = [Strategy(0.0, 0.0)] * n
    if len(start) != n:
        raise ValueError("one start strategy per firm required")
    bound = (params.A - params.c) / 2
    if any(s.q > max(bound, 0.0) + 1e-12 for s in start):
        raise ValueError(f"start quantities must not exceed (A - c)/2 = {bound}")
    q, k, residual, iterations = damped_iteration(
        params, beliefs, [s.q for s in start], [s.k for s in start], damping=damping, max_iter=max_iter, tol=tol
    )
    arr = belief_arrays(params, beliefs)
    Q = q.sum()
    K = params.K_ex + k.sum()
    _, _, code = best_response_arrays(params, arr.beta, arr.a, np.clip(Q - q, 0.0, params.A), np.maximum(K - k, 0.0))
    colors = tuple(COLOR_BY_CODE[c] for c in code)
    return equilibrium_from_profile(params, beliefs, colors, q, k, residual=float(residual), iterations=iterations)


# --- verification ----------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    """Largest violation per category; all should be ~0 for an equilibrium."""

    membership: float
    feedback: float
    best_response_gap: float
    aggregation: float
    exclusion: float
    market: float

    def as_dict(self) -> dict[str, float]:
        return {
            "membership": self.membership,
            "feedback": self.feedback,
            "best_response_gap": self.best_response_gap,
            "aggregation": self.aggregation,
            "exclusion": self.exclusion,
            "market": self.market,
        }

    @property
    def max_violation(self) -> float:
        return max(self.as_dict().values())

    def ok(self, tol: float = 1e-10) -> bool:
        return self.max_violation < tol


def verify_equilibrium(params: EconomyParams, beliefs: Sequence[FirmBelief], eq: Equilibrium) -> VerificationReport:
    """Re-check an equilibrium claim from scratch.

    Membership and feedback use the colors stored in ``eq``; the
    best-response gap ignores them entirely.
    """
    arr = belief_arrays(params, beliefs)
    q = eq.q
    k = eq.k
    if len(q) != arr.n:
        raise ValueError("equilibrium and beliefs describe different numbers of firms")
    codes = np.array([[c.rank for c in eq.colors]])
    Q = np.array([eq.Q])
    K = np.array([eq.K])
    membership = float(_membership_violation(params, arr, codes, Q, K).max())
    fq, fk = _feedback(params, arr, codes, Q, K)
    feedback = float(np.nan_to_num(np.maximum(np.abs(fq[0] - q), np.abs(fk[0] - k)).max(), nan=np.inf))
    gap = best_response_gap(params, beliefs, q, k)
    red = codes[0] == RED
    aggregation = max(
        abs(eq.Q - math.fsum(q)),
        abs(eq.K - params.K_ex - math.fsum(k)),
        abs(math.fsum(k[red]) - math.fsum(q[red])),
    )
    has_white = (codes[0] == WHITE).any()
    mitigating = ((codes[0] == GREEN) | (codes[0] == ORANGE)).any()
    exclusion = 1.0 if (has_white and mitigating) else 0.0
    market = 0.0 if eq.Q < params.A else max(eq.Q - params.A, np.finfo(float).tiny)
    return VerificationReport(membership, feedback, gap, aggregation, exclusion, market)
