"""Acceptance suite: one test per headline capability, each with a pinned
tolerance and a runtime budget.  Run with ``pytest -s`` to see the one-line
PASS reports."""

import math
import time

import numpy as np
import pytest

from billiardflow import (
    FlowOptions,
    SearchRequest,
    birkhoff_coefficients,
    criterion,
    expand_constraints,
    find_orbit,
    geometrically_equal,
    hessian,
    integrate,
    is_birkhoff,
    kappa_chord,
    periodic_action,
    repeat_lift,
    reparametrize_constant_speed,
    symmetric_birkhoff,
)
from billiardflow.finder import _class_generators
from billiardflow.geometry import (
    convexity_margin,
    limacon_convexity_threshold,
    make_circle,
    make_ellipse,
    make_limacon,
)
from billiardflow.sequences import PeriodicLift, SymmetrySpec
from billiardflow.spectral import CirculantHessian


def announce(num: int, name: str, t0: float, budget: float, detail: str):
    elapsed = time.monotonic() - t0
    print(f"\nACCEPTANCE {num} [{name}]: PASS — {detail} "
          f"({elapsed:.2f}s, budget {budget:.0f}s)")
    assert elapsed < budget, f"criterion {num} blew its {budget:.0f}s budget"


# ---------------------------------------------------------------------------
# 1. convexity threshold


def test_criterion_1_convexity_threshold():
    t0 = time.monotonic()

    def bisect_threshold(n: int) -> float:
        lo, hi = 0.0, 0.5
        assert convexity_margin(make_limacon(n, hi)) < 0
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if convexity_margin(make_limacon(n, mid)) > 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    worst = 0.0
    for n in range(2, 10):
        found = bisect_threshold(n)
        expected = 1.0 / (1.0 + n * n)
        assert found == pytest.approx(expected, abs=1e-6), f"n={n}"
        assert limacon_convexity_threshold(n) == pytest.approx(expected,
                                                               abs=1e-15)
        worst = max(worst, abs(found - expected))
    # the four tabulated bulge limits
    for n, table in ((2, 0.2), (3, 0.1), (4, 0.0588), (5, 0.0385)):
        assert bisect_threshold(n) == pytest.approx(table, abs=1e-4)

    announce(1, "convexity threshold", t0, 5.0,
             f"bisection matches 1/(1+n^2) for n=2..9, worst |err| = {worst:.2e}")


# ---------------------------------------------------------------------------
# 2. Hessian eigenpairs


def action_fd_hessian(boundary, lift, h=1e-5):
    """Second differences of the action itself (independent of the gradient)."""
    p = lift.p
    out = np.zeros((p, p))

    def w(delta):
        return periodic_action(boundary, lift.with_coords(lift.coords + delta))

    for i in range(p):
        for j in range(i, p):
            d = np.zeros(p)
            d[i] += h
            d[j] += h
            wpp = w(d)
            d[j] -= 2 * h
            wpm = w(d)
            d[i] -= 2 * h
            wmm = w(d)
            d[j] += 2 * h
            wmp = w(d)
            out[i, j] = out[j, i] = (wpp - wpm - wmp + wmm) / (4.0 * h * h)
    return out


def test_criterion_2_hessian_eigenpairs():
    t0 = time.monotonic()
    boundaries = {
        "circle": make_circle(1.0, 4),
        "bulged": reparametrize_constant_speed(make_limacon(4, 0.05)),
    }
    ref = repeat_lift(symmetric_birkhoff(4, 1), 3)
    details = []
    for name, boundary in boundaries.items():
        h = hessian(boundary, ref)
        co = birkhoff_coefficients(boundary, 4, 1)
        model = CirculantHessian(12, co.alpha, co.beta)
        dev = float(np.max(np.abs(h - model.matrix())))
        assert dev < 1e-8, f"{name}: circulant deviation {dev:.3e}"
        worst_eig = 0.0
        for mode in range(7):
            lam = model.eigenvalue(mode)
            i = np.arange(12)
            for vec in (np.sin(2 * np.pi * mode * i / 12),
                        np.cos(2 * np.pi * mode * i / 12)):
                if np.max(np.abs(vec)) == 0.0:
                    continue
                res = float(np.max(np.abs(h @ vec - lam * vec)))
                worst_eig = max(worst_eig, res)
                assert res < 1e-8, f"{name} mode {mode}: residual {res:.3e}"
        fd = action_fd_hessian(boundary, ref)
        rel = float(np.max(np.abs(h - fd)) / np.max(np.abs(h)))
        assert rel < 1e-4, f"{name}: FD mismatch {rel:.3e}"
        details.append(f"{name}: circulant {dev:.1e}, eig {worst_eig:.1e}, "
                       f"FD {rel:.1e}")
    announce(2, "Hessian eigenpairs", t0, 10.0, "; ".join(details))


# ---------------------------------------------------------------------------
# 3. criterion closed forms


def test_criterion_3_closed_forms():
    t0 = time.monotonic()
    main = criterion("main", 4, 1, 4, 3, 0.1, 1.0)
    target = 2.0 * math.sin(math.pi / 4) * math.cos(math.pi / 3) ** 2
    assert abs(main.rhs - target) < 1e-12
    assert main.rhs == pytest.approx(0.3535533906, abs=1e-9)

    t2 = criterion("typeII", 2, 1, None, 4, 0.1, 1.0)
    assert abs(t2.rhs - 2.0 * math.cos(math.pi / 8) ** 2) < 1e-12
    assert t2.rhs == pytest.approx(1.7071067812, abs=1e-9)

    rng = np.random.default_rng(2026)
    checked = 0
    while checked < 50:
        n = int(rng.integers(2, 10))
        m = int(rng.integers(1, n))
        if math.gcd(m, n) != 1:
            continue
        N = int(rng.choice([d for d in range(1, n + 1) if n % d == 0]))
        s = int(rng.integers(2, 9))
        if math.gcd(s, N) != 1:
            continue
        circle = make_circle(float(rng.uniform(0.3, 4.0)), n)
        rep = criterion("main", n, m, N, s, *kappa_chord(circle, n, m))
        assert rep.margin <= 0, f"(n,m,N,s)=({n},{m},{N},{s})"
        checked += 1

    announce(3, "criterion closed forms", t0, 1.0,
             f"main rhs {main.rhs:.10f}, typeII rhs {t2.rhs:.10f}, "
             f"{checked} circle margins all <= 0")


# ---------------------------------------------------------------------------
# 4. orbit reproduction, fourfold symmetry


def test_criterion_4_main_orbit_reproduction():
    t0 = time.monotonic()
    rep = find_orbit(SearchRequest(
        billiard={"family": "limacon", "n": 4, "alpha": 0.05},
        n=4, m=1, kind="main", N=4, s=3))
    assert rep.outcome == "non_birkhoff_found"
    assert rep.minimal_period == 12
    assert rep.winding == 3
    assert rep.crossings_vs_reference == 8
    assert rep.action_gain > 0
    assert rep.residual < 1e-10
    g = rep.group
    assert g.exponents("rotation", "preserving") == {0, 1, 2, 3}
    assert g.exponents("reflection", "reversing") == {0, 1, 2, 3}
    assert g.exponents("rotation", "reversing") == set()
    assert g.exponents("reflection", "preserving") == set()
    assert rep.anomalies == []
    announce(4, "main orbit reproduction", t0, 30.0,
             f"(12,3) orbit, full order-4 dihedral group, 8 crossings, "
             f"gain {rep.action_gain:.3e}, |F| {rep.residual:.1e}")


# ---------------------------------------------------------------------------
# 5. orbit reproduction, twofold types


def test_criterion_5_twofold_types():
    t0 = time.monotonic()
    two = find_orbit(SearchRequest(
        billiard={"family": "limacon", "n": 2, "alpha": 0.19},
        n=2, m=1, kind="typeII", s=4))
    assert two.outcome == "non_birkhoff_found"
    assert (two.final_lift.p, two.final_lift.q) == (8, 4)
    assert two.group.type_label == "II"
    assert two.residual < 1e-8
    rev_rot = [e for e in two.group.elements
               if e.kind == "rotation" and e.parity == "reversing"]
    assert rev_rot and all(e.shift % 2 == 1 for e in rev_rot)

    five = find_orbit(SearchRequest(
        billiard={"family": "limacon", "n": 2, "alpha": 0.10},
        n=2, m=1, kind="typeV", s=5))
    assert five.outcome == "non_birkhoff_found"
    assert (five.final_lift.p, five.final_lift.q) == (10, 5)
    assert five.group.type_label == "V"
    assert five.residual < 1e-8
    both_ways = five.group.exponents("reflection", "preserving") & \
        five.group.exponents("reflection", "reversing")
    assert both_ways, "expected a reflection acting with both parities"

    announce(5, "twofold orbit types", t0, 60.0,
             f"type II (8,4) with odd reversing shift; type V (10,5) with a "
             f"two-parity reflection; residuals {two.residual:.1e}, "
             f"{five.residual:.1e}")


# ---------------------------------------------------------------------------
# 6. flow laws on randomized starts


def random_class_start(rng, reference, system, amp=0.03):
    for _ in range(30):
        coords = system.project(reference.coords
                                + amp * rng.standard_normal(reference.p))
        inc = np.diff(coords, append=coords[0] + reference.q)
        if 0.0 < inc.min() and inc.max() < 1.0 and \
                np.max(np.abs(coords - reference.coords)) > 1e-4:
            return reference.with_coords(coords)
        amp *= 0.7
    raise AssertionError("could not draw an admissible class start")


def test_criterion_6_flow_laws():
    t0 = time.monotonic()
    setups = []
    cases = [
        ({"kind": "main", "n": 4, "m": 1, "s": 3, "K": 3, "k": 3},
         reparametrize_constant_speed(make_limacon(4, 0.05)), 7),
        ({"kind": "typeII", "n": 2, "m": 1, "s": 4, "K": 1, "k": 0},
         reparametrize_constant_speed(make_limacon(2, 0.19)), 7),
        ({"kind": "typeII", "n": 2, "m": 1, "s": 3, "K": 1, "k": 0},
         reparametrize_constant_speed(make_ellipse(2.0, 1.0)), 6),
    ]
    for params, boundary, runs in cases:
        n, m, s = params["n"], params["m"], params["s"]
        reference = repeat_lift(symmetric_birkhoff(n, m), s)
        system = expand_constraints(
            SymmetrySpec(n, _class_generators(params["kind"], n, m, 1, s,
                                              params["K"], params["k"])),
            s * n, s * m)
        setups.append((boundary, reference, system, runs))

    rng = np.random.default_rng(77)
    total = 0
    for boundary, reference, system, runs in setups:
        for _ in range(runs):
            start = random_class_start(rng, reference, system)
            run = integrate(boundary, start, system=system,
                            reference=reference,
                            options=FlowOptions(record_lifts=True))
            assert run.failure in (None, "plateau"), run.failure
            budget = 10.0 * (run.local_errors + 1e-15)
            assert np.all(np.diff(run.actions) >= -budget[1:])
            counts = [c for c in run.crossings if isinstance(c, int)]
            assert all(b <= a for a, b in zip(counts, counts[1:]))
            assert np.max(run.constraint_residuals) < 1e-12
            for snap in run.lifts:
                inc = np.diff(snap, append=snap[0] + reference.q)
                assert 0.0 < inc.min() and inc.max() < 1.0
            assert run.final_lift.q == reference.q
            total += 1
    assert total == 20
    announce(6, "flow laws", t0, 120.0,
             "20 randomized class starts over 3 billiards: action up, "
             "crossings down, constraints < 1e-12, winding fixed")


# ---------------------------------------------------------------------------
# 7. circle null result


def test_criterion_7_circle_collapse():
    t0 = time.monotonic()
    devs = []
    for eps in (0.02, 0.1):
        rep = find_orbit(SearchRequest(
            billiard={"family": "circle", "radius": 1.0, "n": 4},
            n=4, m=1, kind="main", N=4, s=3, epsilon=eps, force=True))
        assert rep.outcome == "collapsed_to_birkhoff"
        assert rep.is_birkhoff
        dev = float(np.max(np.abs(rep.final_lift.increments() - 0.25)))
        assert dev < 1e-8
        devs.append(dev)
    announce(7, "circle null result", t0, 10.0,
             f"both nudges collapse to equal increments "
             f"(deviations {devs[0]:.1e}, {devs[1]:.1e})")


# ---------------------------------------------------------------------------
# 8. geometric distinctness of the dual pair


def test_criterion_8_dual_pair_distinct():
    t0 = time.monotonic()
    base = {"billiard": {"family": "limacon", "n": 7, "alpha": 0.015},
            "n": 7, "m": 2, "kind": "main", "N": 1, "s": 2}
    odd = find_orbit(SearchRequest(**base, shift=3))
    even = find_orbit(SearchRequest(**base, shift=10))
    for rep in (odd, even):
        assert rep.outcome == "non_birkhoff_found"
        assert (rep.final_lift.p, rep.final_lift.q) == (14, 4)
        assert not rep.is_birkhoff
        assert rep.anomalies == []
    assert not geometrically_equal(odd.final_lift, even.final_lift)
    announce(8, "dual pair distinctness", t0, 60.0,
             "shift 3 and shift 10 both give (14,4) non-Birkhoff orbits, "
             "geometrically distinct")


# ---------------------------------------------------------------------------
# 9. Birkhoff oracle equivalence


def order_preserving_brute_force(lift: PeriodicLift) -> bool:
    """Direct check that integer shifts preserve the order relations:
    x_i <= x_j + l must imply x_{i+m} <= x_{j+m} + l for every i, j, l, m.
    For each pair (i, j) only the smallest admissible l can fail, so it
    suffices to test l = ceil(x_i - x_j) against all shifts m.
    """
    p = lift.p
    idx = np.arange(2 * p)
    vals = lift.value(idx)
    for i in range(p):
        for j in range(p):
            l0 = math.ceil(vals[i] - vals[j] - 1e-12)
            for m in range(p):
                if vals[i + m] - vals[j + m] > l0 + 1e-9:
                    return False
    return True


def test_criterion_9_birkhoff_oracle():
    t0 = time.monotonic()
    rng = np.random.default_rng(404)
    disagreements = 0
    for _ in range(200):
        p = int(rng.integers(2, 13))
        q = int(rng.integers(1, p))
        inc = rng.uniform(0.02, 0.98, p)
        inc *= q / inc.sum()
        if inc.max() >= 1.0:
            inc = np.full(p, q / p)  # fall back to an evenly spaced lift
        coords = rng.uniform(0, 1) + np.r_[0.0, np.cumsum(inc[:-1])]
        lift = PeriodicLift(p, q, coords)
        if is_birkhoff(lift) != order_preserving_brute_force(lift):
            disagreements += 1
    assert disagreements == 0
    announce(9, "Birkhoff oracle equivalence", t0, 10.0,
             "200 random lifts, order-preservation brute force agrees exactly")
