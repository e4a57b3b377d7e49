"""End-to-end orbit searches: postdiction checks, shift handling, sweeps."""

import numpy as np
import pytest

from billiardflow import (
    CriterionInconclusive,
    FlowOptions,
    SearchRequest,
    expand_constraints,
    find_orbit,
    geometrically_equal,
    initial_perturbation,
    repeat_lift,
    subgroup_mode_parameters,
    sweep,
    symmetric_birkhoff,
)
from billiardflow.finder import _class_generators
from billiardflow.sequences import SymmetrySpec

LIMACON4 = {"family": "limacon", "n": 4, "alpha": 0.05}
LIMACON2_10 = {"family": "limacon", "n": 2, "alpha": 0.10}
LIMACON2_15 = {"family": "limacon", "n": 2, "alpha": 0.15}
LIMACON2_19 = {"family": "limacon", "n": 2, "alpha": 0.19}
LIMACON7 = {"family": "limacon", "n": 7, "alpha": 0.015}
CIRCLE4 = {"family": "circle", "radius": 1.0, "n": 4}


@pytest.fixture(scope="module")
def flagship_report():
    return find_orbit(SearchRequest(billiard=LIMACON4, n=4, m=1,
                                    kind="main", N=4, s=3))


def test_flagship_finds_the_predicted_orbit(flagship_report):
    rep = flagship_report
    assert rep.outcome == "non_birkhoff_found"
    assert not rep.is_birkhoff
    assert rep.minimal_period == 12
    assert rep.winding == 3
    assert rep.crossings_vs_reference == 8
    assert rep.action_gain > 0
    assert rep.residual < 1e-10
    assert rep.anomalies == []
    assert rep.criterion.margin == pytest.approx(0.13025651232383795, rel=1e-9)


def test_flagship_group_is_the_full_dihedral_group(flagship_report):
    g = flagship_report.group
    assert g.exponents("rotation", "preserving") == {0, 1, 2, 3}
    assert g.exponents("reflection", "reversing") == {0, 1, 2, 3}
    assert g.exponents("rotation", "reversing") == set()
    assert g.exponents("reflection", "preserving") == set()
    assert g.type_label == "I"


def test_type_one_search():
    rep = find_orbit(SearchRequest(billiard=LIMACON2_15, n=2, m=1,
                                   kind="typeI", s=7))
    assert rep.outcome == "non_birkhoff_found"
    assert rep.minimal_period == 14
    assert rep.winding == 7
    assert rep.crossings_vs_reference == 4
    assert rep.group.type_label == "I"
    assert rep.anomalies == []
    assert rep.residual < 1e-8


def test_type_two_search():
    rep = find_orbit(SearchRequest(billiard=LIMACON2_19, n=2, m=1,
                                   kind="typeII", s=4))
    assert rep.outcome == "non_birkhoff_found"
    assert rep.minimal_period == 8
    assert rep.crossings_vs_reference == 2
    g = rep.group
    assert g.type_label == "II"
    assert g.exponents("rotation", "preserving") == {0}
    assert g.exponents("rotation", "reversing") == {1}
    assert g.exponents("reflection", "preserving") == {1}
    assert g.exponents("reflection", "reversing") == {0}
    assert rep.anomalies == []
    assert rep.residual < 1e-8


def test_type_five_search():
    rep = find_orbit(SearchRequest(billiard=LIMACON2_10, n=2, m=1,
                                   kind="typeV", s=5))
    assert rep.outcome == "non_birkhoff_found"
    assert rep.minimal_period == 10
    assert rep.crossings_vs_reference == 2
    g = rep.group
    assert g.type_label == "V"
    assert g.exponents("reflection", "preserving") \
        == g.exponents("reflection", "reversing") == {0}
    assert 0 in g.exponents("rotation", "reversing")
    assert rep.anomalies == []
    assert rep.residual < 1e-8


def test_odd_order_dual_orbits_are_distinct():
    base = SearchRequest(billiard=LIMACON7, n=7, m=2, kind="main", N=1, s=2)
    params = subgroup_mode_parameters(7, 2, N=1, s=2, branch=1, reflection=0)
    assert (params.k, params.k_alternate) == (3, 10)
    first = find_orbit(base)
    second = find_orbit(SearchRequest(billiard=LIMACON7, n=7, m=2, kind="main",
                                      N=1, s=2, shift=10))
    for rep in (first, second):
        assert rep.outcome == "non_birkhoff_found"
        assert rep.minimal_period == 14
        assert rep.winding == 4
        assert rep.crossings_vs_reference == 2
        assert rep.group.type_label == "III"
        assert rep.anomalies == []
    assert not geometrically_equal(first.final_lift, second.final_lift)


def test_circle_margin_gates_the_run():
    req = SearchRequest(billiard=CIRCLE4, n=4, m=1, kind="main", N=4, s=3)
    with pytest.raises(CriterionInconclusive) as exc:
        find_orbit(req)
    assert exc.value.report.margin < 0
    forced = find_orbit(SearchRequest(billiard=CIRCLE4, n=4, m=1, kind="main",
                                      N=4, s=3, force=True))
    assert forced.outcome == "collapsed_to_birkhoff"
    assert forced.is_birkhoff
    assert np.allclose(forced.final_lift.increments(), 0.25, atol=1e-8)


def test_step_capped_run_reports_non_converged():
    rep = find_orbit(SearchRequest(billiard=LIMACON4, n=4, m=1, kind="main",
                                   N=4, s=3, options=FlowOptions(max_steps=5)))
    assert rep.outcome == "non_converged"
    assert rep.residual > 1e-4  # the basin gate must not polish this state


def test_epsilon_validation():
    with pytest.raises(ValueError, match="epsilon"):
        find_orbit(SearchRequest(billiard=LIMACON4, n=4, m=1, kind="main",
                                 N=4, s=3, epsilon=0.2))
    with pytest.raises(ValueError, match="epsilon"):
        find_orbit(SearchRequest(billiard=LIMACON4, n=4, m=1, kind="main",
                                 N=4, s=3, epsilon=0.0))


def test_degenerate_mode_is_rejected():
    ref = symmetric_birkhoff(4, 1)
    with pytest.raises(ValueError, match="K >= 3"):
        initial_perturbation("main", ref, K=2, k=1, epsilon=0.01)
    with pytest.raises(ValueError, match="unknown kind"):
        initial_perturbation("bogus", ref, K=3, k=1, epsilon=0.01)


def test_shift_override_validation():
    with pytest.raises(ValueError, match="odd"):
        find_orbit(SearchRequest(billiard=LIMACON2_19, n=2, m=1,
                                 kind="typeII", s=4, shift=2))
    with pytest.raises(ValueError, match="parity"):
        find_orbit(SearchRequest(billiard=LIMACON2_10, n=2, m=1,
                                 kind="typeV", s=5, shift=4))
    with pytest.raises(ValueError, match="mod"):
        find_orbit(SearchRequest(billiard=LIMACON4, n=4, m=1, kind="main",
                                 N=4, s=3, shift=4))


@pytest.mark.parametrize("kind,n,m,s,K,k", [
    ("main", 4, 1, 3, 3, 3),
    ("typeI", 2, 1, 7, 7, 1),
    ("typeII", 2, 1, 4, 1, 0),
    ("typeV", 2, 1, 5, 0, 5),
])
def test_seeded_modes_satisfy_their_class(kind, n, m, s, K, k):
    p, q = s * n, s * m
    reference = repeat_lift(symmetric_birkhoff(n, m), s)
    system = expand_constraints(
        SymmetrySpec(n, _class_generators(kind, n, m, 1, s, K, k)), p, q)
    start = initial_perturbation(kind, reference, K, k, epsilon=0.02)
    assert system.residual(start.coords) <= 1e-12


def test_sweep_records_success_failure_and_inconclusive():
    base = SearchRequest(billiard=LIMACON2_19, n=2, m=1, kind="typeII", s=4)
    entries = sweep(base, "alpha", [0.19, 0.25, 0.0], workers=2)
    by_value = {e.value: e for e in entries}

    good = by_value[0.19]
    assert good.error is None
    assert good.report.outcome == "non_birkhoff_found"
    assert good.criterion.margin > 0

    nonconvex = by_value[0.25]
    assert nonconvex.report is None
    assert "ValueError" in nonconvex.error
    assert "convex" in nonconvex.error

    circle_limit = by_value[0.0]
    assert circle_limit.report is None
    assert "inconclusive" in circle_limit.error
    assert circle_limit.criterion.margin <= 0


def test_sweep_serial_matches_parallel():
    base = SearchRequest(billiard=LIMACON2_19, n=2, m=1, kind="typeII", s=4)
    serial = sweep(base, "alpha", [0.15, 0.19], workers=1)
    parallel = sweep(base, "alpha", [0.15, 0.19], workers=2)
    for a, b in zip(serial, parallel):
        assert a.value == b.value
        assert a.error == b.error
        assert a.report.outcome == b.report.outcome
        assert np.allclose(a.report.final_lift.coords,
                           b.report.final_lift.coords, atol=1e-12)


def test_sweep_parameter_validation():
    base = SearchRequest(billiard=LIMACON4, n=4, m=1, kind="main", N=4, s=3)
    with pytest.raises(ValueError, match="sweep parameter"):
        sweep(base, "bogus", [1, 2])


def test_unknown_kind_is_rejected():
    with pytest.raises(ValueError, match="unknown kind"):
        find_orbit(SearchRequest(billiard=LIMACON4, n=4, m=1, kind="spiral"))
