import math

import numpy as np
import pytest

from henonlab.chebfun import AnalyticFn1D
from henonlab.combinatorics import Word
from henonlab.errors import DegenerateVerticalPair, OverlapAbsent
from henonlab.logmag import LogMagnitude
from henonlab.overlap import (addressed_points, cantor_point, class_a_check, concavity_window, dagger_log,
                              detect_overlap, distortion_report, distortion_words, key_lemma_check,
                              predict_overlap, predictor_margin, upsilon_m, upsilon_star)
from henonlab.paramset import CoverConfig, choose_b_for_overlap

IDENTITY = AnalyticFn1D(np.array([0.0, 1.0]))
ZERO = AnalyticFn1D(np.array([0.0]))


def test_upsilon_examples():
    assert upsilon_star(IDENTITY, (0, 0), (1, 2)) == pytest.approx(0.5)
    with pytest.raises(DegenerateVerticalPair):
        upsilon_star(IDENTITY, (0, 0.3), (1, 0.3))
    assert upsilon_m(IDENTITY, 0.0, (0.2, 0.1), (0.7, 0.9)) == upsilon_star(IDENTITY, (0.2, 0.1), (0.7, 0.9))
    assert upsilon_m(ZERO, 1.0, (0, 0), (0, 1)) == pytest.approx(-1.0)


def test_upsilon_m_direct_formula():
    v = AnalyticFn1D.interpolate(np.sin, 20, (-2, 2))
    rng = np.random.default_rng(4)
    for _ in range(50):
        x, xt, y, yt, c = rng.uniform(-1, 1, 5)
        direct = (math.sin(xt) - math.sin(x)) / (yt - y) - c * (yt ** 2 - y ** 2) / (yt - y)
        assert upsilon_m(v, c, (x, y), (xt, yt)) == pytest.approx(direct, rel=1e-9, abs=1e-12)


def test_universal_data(universal, fp):
    assert universal.a_const > 0
    assert 0 < universal.rho_est < universal.sigma ** 2
    # sigma is read off the deepest coordinate change, so it carries the tower's truncation error
    assert universal.sigma == pytest.approx(fp.lam, rel=1e-5)
    # successive v profiles approach each other by about rho per level
    steps = universal.meta["v_steps"]
    assert all(abs(steps[i + 1] / steps[i] / universal.rho_est - 1) < 0.02 for i in range(1, 6))


def test_degenerate_universal_has_no_a(fp_tower):
    from henonlab.overlap import estimate_universal
    U = estimate_universal(fp_tower)
    assert U.a_fn is None and U.a_const is None
    assert U.v_star.degree > 0


def test_concavity_slopes_follow_curvature(universal, fstar, fp_tower):
    v = universal.v_star
    tip = fp_tower.tip(0)
    lo, hi, sign = concavity_window(v, fstar, tip[0])
    ys = np.linspace(lo, fstar.c0, 5)[1:-1]
    pts = [(float(fstar(y)) - tip[0], y - tip[1]) for y in ys]
    u01 = upsilon_star(v, pts[0], pts[1])
    u02 = upsilon_star(v, pts[0], pts[2])
    assert (u01 < u02) == (sign > 0)


def test_well_chosen_invariants(well_chosen):
    D = well_chosen
    (x0, y0), (x1, y1), (xt0, yt0), (xt1, yt1) = D.points
    assert x0 < x1 < xt0 < xt1 and y0 < y1 < yt0 < yt1
    assert D.upsilon["z0_zt0"] < D.upsilon["z0_z1"]
    assert 0 < D.kappa[1] < 1
    assert D.M[0] <= D.M_delta[0] < D.M_delta[1] <= D.M[1]
    assert 0 < D.A0 < D.A1
    assert len(D.w) == len(D.w_tilde) and D.w.prefix(len(D.w) - 1) == D.w_tilde.prefix(len(D.w) - 1)


def test_predictor_examples(well_chosen, universal):
    D, sigma = well_chosen, universal.sigma
    for m, n in [(1, 5), (2, 8), (3, 7)]:
        b = choose_b_for_overlap(CoverConfig(D.A0, D.A1, sigma), m, n)
        assert predict_overlap(LogMagnitude.of(b), m, n, D, sigma)
        assert predictor_margin(LogMagnitude.of(b), m, n, D, sigma) == pytest.approx(0.5)
        out = math.exp((math.log(D.A1) + 1 + (n - m) * math.log(sigma)) / 2 ** m)
        assert not predict_overlap(LogMagnitude.of(out), m, n, D, sigma)


def test_predictor_against_plain_arithmetic(well_chosen, universal):
    D, sigma = well_chosen, universal.sigma
    rng = np.random.default_rng(5)
    for m in (1, 2, 3):
        n = m + 4
        for b in rng.uniform(0.01, 0.99, 100):
            plain = D.A0 < b ** (2 ** m) / sigma ** (n - m) < D.A1
            assert predict_overlap(LogMagnitude.of(b), m, n, D, sigma) == plain


def test_dagger_log_survives_underflow():
    q = dagger_log(LogMagnitude.of(0.5), 12, 20, 0.4)
    assert math.isfinite(q) and q == pytest.approx(4096 * math.log(0.5) - 8 * math.log(0.4))


def test_detector_identical_words(well_chosen, fp_tower):
    from dataclasses import replace
    same = replace(well_chosen, w_tilde=well_chosen.w)
    assert detect_overlap(fp_tower, same, 1, 5)


def test_class_a_on_fixed_point(fp_tower, well_chosen, universal):
    rep = class_a_check(fp_tower, well_chosen, 1, 7, universal)
    assert rep.passed and rep.parity_even and rep.sign_consistent and rep.above_threshold
    assert sorted(rep.items) == [f"A{k}" for k in range(1, 8)]


def test_class_a_flags_odd_parity(thick_tower, well_chosen, universal):
    rep = class_a_check(thick_tower, well_chosen, 1, 4, universal)
    assert not rep.parity_even
    assert rep.sign_consistent
    ok, slack = rep.items["A7"]
    assert not ok and slack < 0


def test_sign_bookkeeping(thick_tower):
    from henonlab.henon import scope_decomposition
    per_level = [np.sign(scope_decomposition(thick_tower, k, k + 1, fit_degree=(2, 2)).s_mn) for k in range(1, 6)]
    for n in range(2, 7):
        s = scope_decomposition(thick_tower, 1, n, fit_degree=(2, 2)).s_mn
        assert np.sign(s) == np.prod(per_level[: n - 1])


def test_key_lemma_degenerate(fp_tower, well_chosen, universal):
    z0, z1, zt0, zt1 = addressed_points(fp_tower, well_chosen, 7)
    # a horizontal segment through x~ at the height of z0
    r = key_lemma_check(fp_tower, universal, 1, 7, (zt0[0] - 0.05, z0[1]), zt0, (zt0[0] + 0.05, z0[1]))
    assert r["term"] == 0.0 and r["contained"]
    assert r["upsilon"] < 1e-9


def test_distortion_needs_overlap(fp_tower, well_chosen):
    with pytest.raises(OverlapAbsent):
        distortion_report(fp_tower, well_chosen, 1, 5)


def test_distortion_words(well_chosen):
    w0, w1 = distortion_words(well_chosen, 2, 6)
    assert str(w0).startswith("0.0.1.0.0.0.") and len(w0) == 6 + len(well_chosen.w)
    assert w0.prefix(6) == w1.prefix(6)


def test_cantor_point_of_zero_address_is_tip(thick_tower):
    x, y = cantor_point(thick_tower, Word.zeros(3), 1)
    assert abs(x) < 1e-12 and abs(y) < 1e-12


@pytest.mark.slow
def test_key_lemma_thick(fstar, well_chosen, universal):
    from henonlab.henon import tuned_tower
    m, n = 2, 8
    b = choose_b_for_overlap(CoverConfig(well_chosen.A0, well_chosen.A1, universal.sigma), m, n)
    T = tuned_tower(fstar, b, n + 8)
    z0, z1, zt0, zt1 = addressed_points(T, well_chosen, n)
    r = key_lemma_check(T, universal, m, n, z0, zt0, z1)
    # |Upsilon| at the aligned pair reproduces the tilt of the scope map
    assert r["upsilon"] == pytest.approx(r["tilt"], rel=1e-3)
    assert r["term"] == pytest.approx(r["upsilon"], rel=0.05)
