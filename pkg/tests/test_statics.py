import math

import numpy as np
import pytest
import sympy as sp

from conftest import beliefs_from_a
from oracles import symbolic_aggregates
from cournot_climate.equilibrium import solve
from cournot_climate.errors import DomainError, RegimeInstability, UndefinedDirection
from cournot_climate.model import Color, EconomyParams, FirmBelief
from cournot_climate.sampling import random_instance
from cournot_climate.statics import (
    Effect,
    aggregate_partials,
    firm_partials,
    sign_report,
    statics_report,
)


@pytest.fixture
def gor(base):
    """Green, orange and red firm (a = 0.5, 3, 20) in the z = 8 economy."""
    beliefs = beliefs_from_a(base, [0.5, 3.0, 20.0])
    return base, beliefs, solve(base, beliefs)


def test_frozen_equilibrium(gor):
    _, _, eq = gor
    assert eq.colors == (Color.GREEN, Color.ORANGE, Color.RED)
    assert eq.Q == pytest.approx(1045 / 169, abs=1e-12)
    assert eq.K == pytest.approx(469 / 169, abs=1e-12)


def test_report_matches_finite_differences(gor):
    params, beliefs, eq = gor
    report = statics_report(params, beliefs, eq)
    assert not report.failed_partials()
    assert not report.failed_signs()
    assert report.max_rel_error < 1e-4


def test_green_source_is_inert(gor):
    params, beliefs, eq = gor
    for row in sign_report(params, beliefs, eq):
        if row.source == 0:
            assert row.effect is Effect.UNAFFECTED and row.analytic == 0.0


def test_aggregate_signs(gor):
    params, beliefs, eq = gor
    effects = {(r.quantity, r.firm, r.source): r.effect for r in sign_report(params, beliefs, eq)}
    assert effects[("K", None, 1)] is Effect.DECREASING
    assert effects[("K", None, 2)] is Effect.DECREASING
    assert effects[("Q", None, 2)] is Effect.DECREASING
    # the red firm has a positive belief, so orange beliefs reach Q
    assert effects[("Q", None, 1)] is Effect.INCREASING
    assert effects[("k", 2, 1)] is Effect.AMBIGUOUS


def test_orange_belief_does_not_move_q_without_red_belief(base):
    # the only red firm is a skeptic, so B1 = n1
    beliefs = [FirmBelief.from_a(4.0, base), FirmBelief.from_a(5.0, base), FirmBelief(0.0)]
    eq = solve(base, beliefs)
    assert eq.colors == (Color.ORANGE, Color.ORANGE, Color.RED)
    rows = {(r.quantity, r.firm, r.source): r for r in sign_report(base, beliefs, eq)}
    assert rows[("Q", None, 0)].effect is Effect.UNAFFECTED
    assert rows[("Q", None, 0)].analytic == pytest.approx(0.0, abs=1e-15)
    report = statics_report(base, beliefs, eq)
    assert not report.failed_signs()


def test_ambiguous_red_response_takes_both_signs():
    """Orange belief shifts can raise or lower a red firm's carbon."""
    params = EconomyParams(A=10, b=1, c=1, d=1)
    beliefs = [FirmBelief.from_a(5.0, params), FirmBelief(0.0), FirmBelief.from_a(10.0, params)]
    eq = solve(params, beliefs)
    assert eq.colors == (Color.ORANGE, Color.RED, Color.RED)
    dk = {p.firm: p.analytic for p in firm_partials(params, beliefs, eq) if p.quantity == "k" and p.source == 0}
    assert dk[0] == pytest.approx(0.5114, abs=1e-4)
    assert dk[1] > 0 > dk[2]
    report = statics_report(params, beliefs, eq)
    assert not report.failed_partials() and not report.failed_signs()


def test_aggregates_match_symbolic_derivatives(rng):
    syms, Q_expr, K_expr = symbolic_aggregates()
    targets = {
        "dK_dB1": sp.diff(K_expr, syms["B1"]),
        "dQ_dB1": sp.diff(Q_expr, syms["B1"]),
        "dK_dA_int": sp.diff(K_expr, syms["A_int"]),
        "dQ_dA_int": sp.diff(Q_expr, syms["A_int"]),
        "dK_dK_ex": sp.diff(K_expr, syms["K_ex"]),
        "dQ_dK_ex": sp.diff(Q_expr, syms["K_ex"]),
        "dEmitted_dK_ex": sp.diff(K_expr - syms["K_ex"], syms["K_ex"]),
    }
    fns = {k: sp.lambdify(list(syms.values()), v) for k, v in targets.items()}
    checked = 0
    while checked < 40:
        params, beliefs = random_instance(rng, n_max=6, allow_skeptics=True, allow_no_market=False)
        eq = solve(params, beliefs)
        if Color.WHITE in eq.colors or any(
            c is not Color.RED and not 0 < b.alpha_sq < math.inf for c, b in zip(eq.colors, beliefs)
        ):
            continue
        st = eq.stats
        vals = dict(A=params.A, c=params.c, d=params.d, K_ex=params.K_ex, A_int=st.A_int, B1=st.B1,
                    n0=st.n0_green, n_int=st.n_int, n1=st.n1)
        agg = aggregate_partials(params, beliefs, eq)
        for name, fn in fns.items():
            value = getattr(agg, name)
            if value is None:
                continue
            assert value == pytest.approx(float(fn(**vals)), rel=1e-10, abs=1e-12), name
        checked += 1


def test_empty_bucket_is_undefined(base):
    beliefs = beliefs_from_a(base, [2.0, 2.5])
    eq = solve(base, beliefs)
    agg = aggregate_partials(base, beliefs, eq)
    assert agg.dK_dB1 is None
    with pytest.raises(UndefinedDirection):
        agg.get("dK_dB1")


def test_white_firms_rejected():
    params = EconomyParams(A=10, b=1, c=1, d=9)
    beliefs = [FirmBelief(0.5), FirmBelief(8.0), FirmBelief(1.0)]
    with pytest.raises(DomainError):
        statics_report(params, beliefs)


def test_regime_instability_on_boundary(base):
    # firm 1 sits exactly on the green/orange boundary a_1 = K
    beliefs = beliefs_from_a(base, [1.5, 3.0])
    eq = solve(base, beliefs)
    assert eq.K == pytest.approx(1.5)
    with pytest.raises(RegimeInstability):
        statics_report(base, beliefs, eq, step=1e-5, min_step=1e-8)


def test_random_instances(rng):
    checked = 0
    while checked < 40:
        params, beliefs = random_instance(rng, n_max=6, allow_skeptics=False, allow_no_market=False)
        eq = solve(params, beliefs)
        if Color.WHITE in eq.colors:
            continue
        try:
            report = statics_report(params, beliefs, eq, min_step=1e-5)
        except RegimeInstability:
            continue
        assert not report.failed_partials(), report.failed_partials()[:3]
        assert not report.failed_signs(), report.failed_signs()[:3]
        checked += 1


def _red_b(params, beliefs, eq):
    return {i: 1 / (1 + beliefs[i].beta(params)) for i, c in enumerate(eq.colors) if c is Color.RED}


def test_aggregate_partial_signs(rng):
    checked = 0
    while checked < 300:
        params, beliefs = random_instance(rng, n_max=8, allow_no_market=False)
        eq = solve(params, beliefs)
        if Color.WHITE in eq.colors:
            continue
        agg = aggregate_partials(params, beliefs, eq)
        if agg.dK_dB1 is not None:
            assert agg.dK_dB1 > 0 and agg.dQ_dB1 > 0
        if agg.dQ_dA_int is not None:
            assert agg.dQ_dA_int <= 0
        checked += 1


def test_green_pair_with_red_matches_finite_differences(base):
    # a = 2 sits below K here, so the middle firm is green rather than orange
    beliefs = beliefs_from_a(base, [0.5, 2.0, 20.0])
    eq = solve(base, beliefs)
    assert eq.colors == (Color.GREEN, Color.GREEN, Color.RED)
    assert aggregate_partials(base, beliefs, eq).dK_dA_int is None
    report = statics_report(base, beliefs, eq)
    assert not report.failed_partials()
    assert report.max_rel_error < 1e-5


def test_gor_partials_within_tight_tolerance(gor):
    params, beliefs, eq = gor
    assert statics_report(params, beliefs, eq).max_rel_error < 1e-5


def test_least_skeptical_red_cuts_carbon_after_orange_shift(rng):
    checked = 0
    while checked < 100:
        params, beliefs = random_instance(rng, n_max=8, allow_no_market=False)
        eq = solve(params, beliefs)
        if Color.WHITE in eq.colors or Color.ORANGE not in eq.colors:
            continue
        b = _red_b(params, beliefs, eq)
        if not b or min(b.values()) >= 1:
            continue
        i = min(b, key=b.get)
        j = eq.colors.index(Color.ORANGE)
        dk = next(p.analytic for p in firm_partials(params, beliefs, eq)
                  if p.quantity == "k" and p.firm == i and p.source == j)
        assert dk < 0
        checked += 1


def test_skeptic_red_gains_from_orange_shift():
    params = EconomyParams(A=10, b=1, c=1, d=1)
    beliefs = [FirmBelief.from_a(5.0, params), FirmBelief(0.0), FirmBelief.from_a(10.0, params)]
    eq = solve(params, beliefs)
    st = eq.stats
    dk = next(p.analytic for p in firm_partials(params, beliefs, eq)
              if p.quantity == "k" and p.firm == 1 and p.source == 0)
    assert dk == pytest.approx((st.n1 - st.B1) / st.N, rel=1e-12)
    assert dk > 0


def test_orange_cross_effect(base):
    beliefs = beliefs_from_a(base, [2.0, 2.2, 2.4])
    eq = solve(base, beliefs)
    assert eq.colors == (Color.ORANGE,) * 3
    st = eq.stats
    expected = -(st.m + 1 + st.B1) / st.N
    rows = [p for p in firm_partials(base, beliefs, eq) if p.quantity == "k" and p.firm != p.source]
    assert len(rows) == 6
    for p in rows:
        assert p.analytic == pytest.approx(expected, rel=1e-12)
    assert expected < 0
    assert not statics_report(base, beliefs, eq).failed_partials()


def test_total_output_ignores_beliefs_without_red_firms(base):
    beliefs = beliefs_from_a(base, [0.5, 3.0, 3.5])
    eq = solve(base, beliefs)
    assert Color.RED not in eq.colors and Color.ORANGE in eq.colors
    for row in sign_report(base, beliefs, eq):
        if row.quantity == "Q":
            assert row.effect is Effect.UNAFFECTED and row.analytic == 0.0
