"""Acceptance run: one check per criterion, each printing a PASS/FAIL line.

Run under pytest, or directly with ``python tests/test_acceptance.py``.
"""
import functools
import math
import sys
import time

import numpy as np
import pytest

from henonlab.errors import EmptyRange, HenonLabError
from henonlab.geometry import canonical_boxing
from henonlab.henon import (average_jacobian, build_tower, iota, renormalize_henon, scope_decomposition,
                            tuned_tower)
from henonlab.logmag import LogMagnitude
from henonlab.overlap import (detect_overlap, distortion_report, estimate_universal, find_well_chosen,
                              predict_overlap)
from henonlab.paramset import (CoverConfig, Regime, build_cover, covered_mask, covered_sum, d_range, diam,
                               dichotomy, fill_threshold, gap_between, gap_fill, interval, membership,
                               choose_b_for_overlap)
from henonlab.unimodal import (apriori_report, cylinders_1d, feigenbaum_scaling_oracle, quadratic_map,
                               renormalize_unimodal, solve_fixed_point)

GRID50 = np.meshgrid(np.linspace(-1, 1, 50), np.linspace(-1, 1, 50), indexing="ij")


@functools.lru_cache(maxsize=None)
def context():
    fp = solve_fixed_point(40, 1e-9)
    T0 = build_tower(iota(fp.fstar), 14)
    thick = tuned_tower(fp.fstar, 0.1, 6)
    U = estimate_universal(T0, thick)
    D = find_well_chosen(U, fp.fstar, max_depth=7, tower_fp=T0)
    return fp, T0, U, D


def _say(k, ok, detail):
    print(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)


# --- 1 -------------------------------------------------------------------------

def criterion_1():
    t0 = time.time()
    fp = solve_fixed_point(40, 1e-9)
    secs = time.time() - t0
    oracle, _ = feigenbaum_scaling_oracle()
    ok = fp.residual < 1e-9 and abs(fp.lam - oracle) < 1e-6 and secs < 60
    return ok, f"residual {fp.residual:.2e}, |lambda - oracle| {abs(fp.lam - oracle):.2e}, {secs:.2f} s"


# --- 2 -------------------------------------------------------------------------

def criterion_2():
    X, Y = GRID50
    worst = 0.0
    for a in (1.40, 1.42, 1.45, 1.48, 1.5):
        f = quadratic_map(a)
        G, _ = renormalize_henon(iota(f))
        H = iota(renormalize_unimodal(f))
        gx, gy = G(X, Y)
        hx, hy = H(X, Y)
        worst = max(worst, np.max(np.abs(gx - hx)), np.max(np.abs(gy - hy)))
    return worst < 1e-8, f"max commutation error {worst:.2e} over 5 maps"


# --- 3 -------------------------------------------------------------------------

def criterion_3():
    fstar = context()[0].fstar
    err, ratios = 0.0, []
    for b in (0.01, 0.05, 0.1):
        T = tuned_tower(fstar, b, 3)
        b0, b1 = average_jacobian(T), average_jacobian(T, level=1)
        err = max(err, abs(b0.value() - b))
        ratios.append(b1.log_value / b0.log_value)
    ok = err < 1e-10 and all(abs(r - 2) <= 0.05 for r in ratios)
    return ok, f"|b(F) - b_bar| <= {err:.1e}, log ratios {', '.join(f'{r:.4f}' for r in ratios)}"


# --- 4 -------------------------------------------------------------------------

def criterion_4():
    T0 = context()[1]
    X, Y = np.meshgrid(np.linspace(-1, 1, 20), np.linspace(-1, 1, 20))
    rec = rem = drem = 0.0
    for n in range(1, 9):
        for m in range(n):
            dec = scope_decomposition(T0, m, n)
            x1, y1 = T0.scope(m, n, X, Y)
            x2, y2 = dec.recompose(X, Y, fitted=True)
            rec = max(rec, np.max(np.abs(x1 - x2)), np.max(np.abs(y1 - y2)))
            rem = max(rem, abs(float(dec.remainder(0.0, 0.0))))
            drem = max(drem, abs(float(dec.remainder.dx()(0.0, 0.0))), abs(float(dec.remainder.dy()(0.0, 0.0))))
    ok = rec < 1e-10 and rem < 1e-10 and drem < 1e-10
    return ok, f"recomposition {rec:.1e}, remainder at tip {rem:.1e}, its gradient {drem:.1e}"


# --- 5 -------------------------------------------------------------------------

def criterion_5():
    fp, T0, _, _ = context()
    worst = 0.0
    for m in range(2, 6):
        for n in range(m + 4, 13):
            dec = scope_decomposition(T0, m, n, fit_degree=(4, 4))
            worst = max(worst, abs(abs(dec.sigma_mn) ** (1 / (n - m)) / fp.lam - 1))
    tmax = -math.inf
    for b in (0.05, 0.1):
        T = tuned_tower(fp.fstar, b, 10)
        for m in range(4):
            for n in range(m + 1, m + 7):
                dec = scope_decomposition(T, m, n, fit_degree=(4, 4))
                tmax = max(tmax, dec.t_mn)
                if m >= 2 and n - m >= 4:
                    worst = max(worst, abs(abs(dec.sigma_mn) ** (1 / (n - m)) / fp.lam - 1))
    ok = worst < 0.02 and tmax < 0
    return ok, f"worst |sigma_mn|^(1/(n-m)) deviation {100 * worst:.2f}%, largest tilt {tmax:.2e}"


# --- 6 -------------------------------------------------------------------------

def criterion_6():
    fp, T0, _, _ = context()
    worst = 0.0
    for T in (T0, tuned_tower(fp.fstar, 0.1, 12)):
        ax = canonical_boxing(T, 6).axioms
        worst = max(worst, ax["B1"])
    r5 = np.array(apriori_report(cylinders_1d(fp.fstar, 5)))
    r6 = np.array(apriori_report(cylinders_1d(fp.fstar, 6)))
    drift = float(np.max(np.abs(r6 / r5 - 1)))
    ok = worst < 1e-8 and drift < 0.1
    return ok, f"F(C^w) in B^(1+w) within {worst:.1e} for |w| <= 6, depth 5 to 6 ratio drift {100 * drift:.2f}%"


# --- 7 -------------------------------------------------------------------------

def overlap_row(m, n, offset_log10=0.0):
    """Tune b so that b^(2^m) / sigma^(n - m) sits at the log-midpoint (times 10^offset) and test."""
    fp, _, U, D = context()
    win = CoverConfig(D.A0, D.A1, U.sigma)
    b_bar = choose_b_for_overlap(win, m, n) * 10 ** (offset_log10 / 2 ** m)
    row = {"m": m, "n": n, "offset": offset_log10, "b_bar": b_bar}
    t0 = time.time()
    try:
        T = tuned_tower(fp.fstar, b_bar, n + len(D.w) + 2)
        b = average_jacobian(T)
        row["predicted"] = predict_overlap(b, m, n, D, U.sigma)
        row["detected"] = detect_overlap(T, D, m, n)
        if row["detected"]:
            row["ratio"] = distortion_report(T, D, m, n, b)["ratio"]
    except HenonLabError as exc:
        row["error"] = f"{type(exc).__name__}"
    row["seconds"] = time.time() - t0
    return row


def _fmt(r):
    if "error" in r:
        return f"({r['m']},{r['n']}) b={r['b_bar']:.4f} {r['error']}"
    s = f"({r['m']},{r['n']}) b={r['b_bar']:.4f} pred={int(r['predicted'])} det={int(r['detected'])}"
    return s + (f" dist/diam={r['ratio']:.3f}" if "ratio" in r else "")


def criterion_7():
    _, _, U, D = context()
    N = D.entry_threshold(U)
    sched = [(m, m + d) for m in (1, 2) for d in (N, N + 2)]
    mid = [overlap_row(m, n) for m, n in sched]
    off = [overlap_row(m, n, -1.0) for m, n in sched]
    centred_ok = all(r.get("predicted") and r.get("detected") for r in mid)
    off_ok = all("error" not in r and not r["detected"] for r in off)
    ratios = {(r["m"], r["n"] - r["m"]): r["ratio"] for r in mid if "ratio" in r}
    factors = [ratios[(2, d)] / ratios[(1, d)] for d in (N, N + 2) if (1, d) in ratios and (2, d) in ratios]
    decay_ok = bool(factors) and all(U.sigma / 2 <= f <= 2 * U.sigma for f in factors)
    slow = max(r["seconds"] for r in mid + off)
    ok = centred_ok and off_ok and decay_ok and slow < 600
    detail = ("midpoint: " + "; ".join(_fmt(r) for r in mid) + " | off by 10: "
              + "; ".join(_fmt(r) for r in off) + " | decay factors "
              + (", ".join(f"{f:.3f}" for f in factors) or "none") + f" in [{U.sigma / 2:.3f}, {2 * U.sigma:.3f}]"
              + f" | slowest {slow:.0f} s")
    return ok, detail


# --- 8 -------------------------------------------------------------------------

def criterion_8():
    rng = np.random.default_rng(8)
    checked = worst = 0
    while checked < 1000:
        sigma = rng.uniform(0.2, 0.8)
        A0 = rng.uniform(0.5, 3.0)
        cfg = CoverConfig(A0, A0 * rng.uniform(1.1, 5.0), sigma)
        a = (int(rng.integers(0, 13)), 2.0 ** -int(rng.integers(0, 6)))
        b = (int(rng.integers(0, 13)), 2.0 ** -int(rng.integers(0, 6)))
        Ia, Ib = interval(cfg, *a), interval(cfg, *b)
        plain = lambda d, dl, A: sigma ** (d * dl) * A ** dl
        worst = max(worst, abs(Ia.lo - plain(*a, cfg.A0)), abs(Ia.hi - plain(*a, cfg.A1)),
                    abs(diam(cfg, *a) - (plain(*a, cfg.A1) - plain(*a, cfg.A0))))
        if Ia.lo <= Ib.hi and Ib.lo <= Ia.hi:
            continue
        right, left = (a, b) if Ia.lo > Ib.hi else (b, a)
        g = gap_between(cfg, right, left)
        worst = max(worst, abs(g.length - (interval(cfg, *right).lo - interval(cfg, *left).hi)))
        dpp = min(a[1], b[1]) * 2.0 ** -int(rng.integers(1, 5))
        inside, d = [], 0
        while plain(d, dpp, cfg.A1) >= g.lo:
            if plain(d, dpp, cfg.A0) > g.lo and plain(d, dpp, cfg.A1) < g.hi:
                inside.append(d)
            d += 1
        try:
            lo, hi = d_range(cfg, g, dpp)
        except EmptyRange:
            lo, hi = 0, -1
        if inside != list(range(lo, hi + 1)):
            return False, f"d_range mismatch at {cfg}, gap {left}..{right}, delta'' {dpp}"
        if inside:
            direct = sum(plain(d, dpp, cfg.A1) - plain(d, dpp, cfg.A0) for d in inside)
            worst = max(worst, abs(covered_sum(cfg, lo, hi, dpp) - direct))
        checked += 1
    return worst < 1e-12, f"{checked} configurations, worst deviation {worst:.1e}"


# --- 9 -------------------------------------------------------------------------

def criterion_9():
    rng = np.random.default_rng(9)
    fails = total = 0
    for sigma in (0.3, 0.4, 0.5):
        for ratio in (1.5, 2.0, 4.0):
            cfg = CoverConfig(1.0, ratio, sigma)
            gaps = 0
            while gaps < 100:
                m1, m2 = rng.integers(1, 6, 2)
                d1, d2 = rng.integers(1, 15, 2)
                a, b = (int(d1), 2.0 ** -int(m1)), (int(d2), 2.0 ** -int(m2))
                Ia, Ib = interval(cfg, *a), interval(cfg, *b)
                if Ia.lo <= Ib.hi and Ib.lo <= Ia.hi:
                    continue
                right, left = (a, b) if Ia.lo > Ib.hi else (b, a)
                g = gap_between(cfg, right, left)
                gaps += 1
                mbar = fill_threshold(cfg, g, 40)
                for m in range(mbar, mbar + 9):
                    total += 1
                    fails += not gap_fill(cfg, g, 2.0 ** -m).covered_union > cfg.L * g.length
    return fails == 0, f"{total - fails}/{total} (gap, delta'') pairs cover more than L of the gap"


# --- 10 ------------------------------------------------------------------------

def criterion_10():
    _, _, U, D = context()
    rng = np.random.default_rng(10)
    notes, ok = [], True
    for cfg in (CoverConfig(D.A0, D.A1, U.sigma), CoverConfig(1.0, 1.5, 0.3), CoverConfig(1.0, 1.5, 0.5)):
        cover = build_cover(cfg, 2, 8)
        ok &= cover.regime is Regime.DISJOINT and dichotomy(cfg) is Regime.DISJOINT
        for s in cover.stages:
            ok &= len(s.refinements) == 9
            ok &= all(r.uncovered_bound <= (1 - cfg.L) ** k * s.measure * (1 + 1e-12)
                      for k, r in enumerate(s.refinements))
            xs = rng.uniform(s.T[0], s.T[1], 100_000)
            mc = float(covered_mask(xs, s).mean())
            ledger = 1 - s.refinements[-1].uncovered / s.measure
            ok &= abs(mc - ledger) <= 1e-2
            notes.append(f"{ledger:.3f}/{mc:.3f}")
    over = build_cover(CoverConfig(1.0, 2.0, 0.6))
    trivial = over.regime is Regime.OVERLAPPING and len(over.stages) == 1 \
        and over.stages[0].refinements[-1].uncovered == 0.0
    ok &= trivial
    return ok, (f"disjoint covers within (1-L)^k |T| for k <= 8, ledger/MC covered {' '.join(notes)}; "
                f"overlapping case trivial: {trivial}")


# --- 11 ------------------------------------------------------------------------

SHALLOW_N = 8


def criterion_11():
    fp, _, U, D = context()
    cfg = CoverConfig(D.A0, D.A1, U.sigma)
    cover = build_cover(cfg, 2, 8)
    rng = np.random.default_rng(11)
    hits = bad = 0
    for b in rng.uniform(*cfg.b_range, 200):
        lb = LogMagnitude.of(float(b))
        for h in membership(float(b), cover):
            hits += 1
            bad += not predict_overlap(lb, h.m, h.n, D, U.sigma)
    # shallow subset: every placed interval with m <= 2 and even n - m, probed at its log-midpoint
    shallow, odd = {}, []
    for s in cover.stages:
        for r in s.refinements:
            if r.m > 2:
                continue
            for d, lo, hi in zip(r.d, r.lo, r.hi):
                if r.m + d > SHALLOW_N:
                    continue
                if d % 2:
                    odd.append(f"({r.m},{r.m + int(d)})")
                    continue
                b = math.sqrt(lo * hi)
                assert any(h.m == r.m and h.d == d for h in membership(b, cover))
                shallow[r.m, r.m + int(d)] = b
    rows = []
    for (m, n), b in sorted(shallow.items()):
        row = {"m": m, "n": n, "b_bar": b}
        try:
            T = tuned_tower(fp.fstar, b, n + len(D.w) + 2)
            row["predicted"] = predict_overlap(average_jacobian(T), m, n, D, U.sigma)
            row["detected"] = detect_overlap(T, D, m, n)
        except HenonLabError as exc:
            row["error"] = type(exc).__name__
        rows.append(row)
    feasible = [r for r in rows if "error" not in r]
    ok = hits > 0 and bad == 0 and bool(feasible) and all(r["detected"] for r in feasible)
    return ok, (f"{hits - bad}/{hits} membership hits satisfy the window; shallow detector: "
                + ("; ".join(_fmt(r) for r in rows) or "no shallow intervals")
                + f" | odd n - m skipped: {' '.join(sorted(odd))}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7,
            criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("k", range(1, 12))
def test_criterion(k, capsys):
    ok, detail = CRITERIA[k - 1]()
    with capsys.disabled():
        print()
        _say(k, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for k, crit in enumerate(CRITERIA, 1):
        ok, detail = crit()
        _say(k, ok, detail)
        failed += not ok
    sys.exit(1 if failed else 0)
