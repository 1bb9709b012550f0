"""Closed-form regimes of the two-firm game without exogenous carbon.

Regimes are labeled by the colors of (firm 1, firm 2).  The inequality
systems are written for ``a_1 <= a_2``; the other half of the quadrant is
handled by mirroring.  Every inequality that would involve an infinite
``a`` is rewritten in terms of ``beta = d / a``.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .equilibrium import Equilibrium, equilibrium_from_profile
from .errors import DomainError, SolverError
from .model import Color, EconomyParams, FirmBelief


class TwoFirmRegime(enum.Enum):
    ORANGE_ORANGE = "orange-orange"
    GREEN_ORANGE = "green-orange"
    ORANGE_GREEN = "orange-green"
    GREEN_GREEN = "green-green"
    ORANGE_RED = "orange-red"
    RED_ORANGE = "red-orange"
    GREEN_RED = "green-red"
    RED_GREEN = "red-green"
    RED_RED = "red-red"
    WHITE_RED = "white-red"
    RED_WHITE = "red-white"
    ALL_WHITE = "white-white"

    @property
    def colors(self) -> tuple[Color, Color]:
        first, second = self.value.split("-")
        return Color(first), Color(second)

    @property
    def mirror(self) -> TwoFirmRegime:
        first, second = self.value.split("-")
        return TwoFirmRegime(f"{second}-{first}")

    def __str__(self):
        return self.value


# labels used when a_1 <= a_2, in tie-breaking order
SORTED_REGIMES = (
    TwoFirmRegime.ORANGE_ORANGE,
    TwoFirmRegime.GREEN_ORANGE,
    TwoFirmRegime.GREEN_GREEN,
    TwoFirmRegime.ORANGE_RED,
    TwoFirmRegime.GREEN_RED,
    TwoFirmRegime.RED_RED,
    TwoFirmRegime.WHITE_RED,
    TwoFirmRegime.ALL_WHITE,
)


def _check(params: EconomyParams, beliefs: Sequence[FirmBelief]):
    if len(beliefs) != 2:
        raise DomainError("the two-firm analysis needs exactly two firms")
    if params.K_ex != 0:
        raise DomainError("the two-firm closed forms assume K_ex = 0")


def _green_red_threshold(params: EconomyParams, a2: float) -> float:
    """Largest a_1 for which firm 1 stays green against a red firm 2."""
    z, d = params.z, params.d
    if math.isinf(a2):
        return (z + 2 * d) / 3
    return (z + 2 * d) * a2 / (3 * a2 + 4 * d)


def _sorted_conditions(params: EconomyParams, a1: float, a2: float, beta1: float, beta2: float):
    """Closure of each sorted regime's inequality system."""
    z, d = params.z, params.d
    if params.A <= params.c:
        return {TwoFirmRegime.ALL_WHITE: True}
    if math.isinf(beta1) and math.isinf(beta2):
        return {TwoFirmRegime.GREEN_GREEN: z > 0, TwoFirmRegime.ALL_WHITE: z <= 0}
    # d (a_2 - 2 a_1) >= a_1 a_2  <=>  beta_1 - 2 beta_2 >= 1
    white_red_split = beta1 - 2 * beta2
    if z <= 0:
        return {TwoFirmRegime.WHITE_RED: white_red_split >= 1, TwoFirmRegime.RED_RED: white_red_split <= 1}
    threshold = _green_red_threshold(params, a2)
    # (d - z) a_2 < 2 z d  <=>  d - z < 2 z beta_2
    green_survives = d - z <= 2 * z * beta2
    return {
        # with a_1 <= a_2 these imply a_2 <= z; the explicit bound keeps inf <= inf out
        TwoFirmRegime.ORANGE_ORANGE: 0 < a2 <= z and a1 >= a2 / 2 and a2 <= (z + a1) / 2,
        TwoFirmRegime.GREEN_ORANGE: a2 > 0 and a1 <= a2 / 2 and a2 <= 2 * z / 3,
        TwoFirmRegime.GREEN_GREEN: a2 == 0,
        TwoFirmRegime.ORANGE_RED: threshold <= a1 <= z and a2 >= (z + a1) / 2,
        TwoFirmRegime.GREEN_RED: a1 <= threshold and a2 >= 2 * z / 3 and green_survives,
        TwoFirmRegime.RED_RED: a1 >= z and white_red_split <= 1,
        TwoFirmRegime.WHITE_RED: d - z >= 2 * z * beta2 and white_red_split >= 1,
    }


def _sorted_pair(params: EconomyParams, beliefs: Sequence[FirmBelief]):
    a = [bel.a(params) for bel in beliefs]
    beta = [bel.beta(params) for bel in beliefs]
    swapped = a[0] > a[1]
    if swapped:
        a.reverse()
        beta.reverse()
    return swapped, a[0], a[1], beta[0], beta[1]


def classify_two_firm(params: EconomyParams, beliefs: Sequence[FirmBelief]) -> TwoFirmRegime:
    _check(params, beliefs)
    swapped, a1, a2, beta1, beta2 = _sorted_pair(params, beliefs)
    conditions = _sorted_conditions(params, a1, a2, beta1, beta2)
    for regime in SORTED_REGIMES:
        if conditions.get(regime, False):
            return regime.mirror if swapped else regime
    raise SolverError(f"no two-firm regime matched a=({a1}, {a2}); the regimes should tile the quadrant")


def _sorted_formula(regime: TwoFirmRegime, params: EconomyParams, a1, a2, beta1, beta2):
    z, d = params.z, params.d
    w = params.A - params.c
    if regime is TwoFirmRegime.ALL_WHITE:
        return 0.0, 0.0, 0.0, 0.0
    if regime is TwoFirmRegime.GREEN_GREEN:
        return z / 3, 0.0, z / 3, 0.0
    if regime is TwoFirmRegime.ORANGE_ORANGE:
        return z / 3, (2 * a1 - a2) / 3, z / 3, (2 * a2 - a1) / 3
    if regime is TwoFirmRegime.GREEN_ORANGE:
        return z / 3, 0.0, z / 3, a2 / 2
    if regime is TwoFirmRegime.RED_RED:
        b1, b2 = 1 / (1 + beta1), 1 / (1 + beta2)
        q1 = w / 3 * (2 * b1 - b2)
        q2 = w / 3 * (2 * b2 - b1)
        return q1, q1, q2, q2
    if regime is TwoFirmRegime.GREEN_RED:
        denom = 3 + 4 * beta2
        q2 = (z + 2 * d) / denom
        return ((1 + 2 * beta2) * z - d) / denom, 0.0, q2, q2
    if regime is TwoFirmRegime.ORANGE_RED:
        # d a_1 / (2 a_2) written as beta_2 a_1 / 2 so that a_2 = inf works
        Q = (w - beta2 * a1 / 2 - z / 2) / (3 * (1 + beta2)) + z / 2
        return z - Q, (a1 + z) / 2 - Q, 2 * Q - z, 2 * Q - z
    if regime is TwoFirmRegime.WHITE_RED:
        q2 = w / (2 * (1 + beta2))
        return 0.0, 0.0, q2, q2
    raise ValueError(f"{regime} is not a sorted regime label")


def regime_formula(regime: TwoFirmRegime, params: EconomyParams, beliefs: Sequence[FirmBelief]) -> tuple[float, float, float, float]:
    """Evaluate a regime's closed form at any point: ``(q1, k1, q2, k2)``.

    No membership check is made, so this also evaluates a formula on the
    far side of its boundary (used for continuity checks).
    """
    _check(params, beliefs)
    a = [bel.a(params) for bel in beliefs]
    beta = [bel.beta(params) for bel in beliefs]
    if regime in SORTED_REGIMES:
        return _sorted_formula(regime, params, a[0], a[1], beta[0], beta[1])
    q2, k2, q1, k1 = _sorted_formula(regime.mirror, params, a[1], a[0], beta[1], beta[0])
    return q1, k1, q2, k2


def two_firm_equilibrium(params: EconomyParams, beliefs: Sequence[FirmBelief]) -> Equilibrium:
    regime = classify_two_firm(params, beliefs)
    q1, k1, q2, k2 = regime_formula(regime, params, beliefs)
    return equilibrium_from_profile(params, beliefs, regime.colors, [q1, q2], [k1, k2])


@dataclass(frozen=True)
class GridSpec:
    a1_min: float
    a1_max: float
    a2_min: float
    a2_max: float
    resolution: int

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be at least 2 per axis")
        if not (0 <= self.a1_min < self.a1_max and 0 <= self.a2_min < self.a2_max):
            raise ValueError("grid ranges must be nonnegative and nonempty")

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.linspace(self.a1_min, self.a1_max, self.resolution),
                np.linspace(self.a2_min, self.a2_max, self.resolution))


@dataclass(frozen=True)
class RegimeCell:
    a1: float
    a2: float
    regime: TwoFirmRegime
    Q: float
    K: float
    q1: float
    q2: float
    k1: float
    k2: float


def _cell(params: EconomyParams, a1: float, a2: float) -> RegimeCell:
    beliefs = [FirmBelief.from_a(a1, params), FirmBelief.from_a(a2, params)]
    regime = classify_two_firm(params, beliefs)
    q1, k1, q2, k2 = regime_formula(regime, params, beliefs)
    return RegimeCell(float(a1), float(a2), regime, q1 + q2, k1 + k2, q1, q2, k1, k2)


def _row(args) -> list[RegimeCell]:
    params, a1, a2_axis = args
    return [_cell(params, a1, a2) for a2 in a2_axis]


def regime_map(params: EconomyParams, grid: GridSpec, workers: int | None = None) -> list[RegimeCell]:
    """Classify every point of an (a_1, a_2) grid, row-major in a_1.

    ``workers`` defaults to ``$COURNOT_THREADS`` (1 when unset).
    """
    if params.K_ex != 0:
        raise DomainError("the two-firm closed forms assume K_ex = 0")
    if params.b <= 0:
        raise DomainError("mapping over a needs b > 0")
    if workers is None:
        workers = int(os.environ.get("COURNOT_THREADS", "1"))
    a1_axis, a2_axis = grid.axes()
    jobs = [(params, float(a1), a2_axis) for a1 in a1_axis]
    if workers <= 1:
        rows = [_row(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row, jobs))
    return [cell for row in rows for cell in row]
