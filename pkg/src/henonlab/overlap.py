"""Horizontal overlap of scope images and the distortion it causes.

Coordinates at every height are translated so that the tip sits at the
origin.  In those coordinates the x-component of Psi_{m,n} is, up to the
affine part, v_*(x) + c_m y^2 plus an error decaying like rho^(n-m).  Two
Cantor points at height n then end up on a common vertical line exactly when
the tilt ratio -t/s matches their slope Upsilon, which is the lever behind
every check in this module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq

from .chebfun import AnalyticFn1D, _to_ref
from .combinatorics import Word, all_words
from .errors import (AddressUnavailable, DegenerateVerticalPair, DepthExhausted, InsufficientDepth,
                     NoConcavityWindow, NoVerticalAlignment, OverlapAbsent)
from .geometry import canonical_pieces, horizontal_overlap
from .henon import RenormTower, average_jacobian, build_tower, iota, scope_decomposition
from .logmag import LogMagnitude
from .unimodal import UnimodalMap

V_DEGREE = 40


# --- universal data ----------------------------------------------------------

@dataclass
class UniversalData:
    v_star: AnalyticFn1D
    sigma: float
    rho_est: float
    C_est: float
    a_fn: AnalyticFn1D | None = None
    a_const: float | None = None
    meta: dict = field(default_factory=dict)


def v_profile(tower: RenormTower, m: int, n: int, degree: int = V_DEGREE) -> AnalyticFn1D:
    """x -> x + r_{m,n}(x, 0) in tip coordinates at height n.

    Built from the derivative of the scope map, which is a product of factors
    and keeps its relative accuracy when sigma s is tiny, then integrated
    from the tip.
    """
    tip = tower.tip(n)
    D0, _ = tower.scope_derivative(m, n, tip[0], tip[1])
    dom = (-1.0 - tip[0], 1.0 - tip[0])

    def slope(z):
        D, _ = tower.scope_derivative(m, n, tip[0] + z, tip[1] + 0 * z)
        return D[..., 0, 0] / D0[0, 0]

    dv = AnalyticFn1D.interpolate(slope, degree, dom)
    half = 0.5 * (dom[1] - dom[0])
    coef = C.chebint(dv.coefficients, lbnd=float(_to_ref(0.0, dom)), scl=half)
    return AnalyticFn1D(coef, dom)


def a_profile(tower: RenormTower, level: int, b: LogMagnitude, degree: int = 30) -> AnalyticFn1D:
    """a(x) ~ d eps_n / dy (x, 0) / b^(p^n) at one level of a thickened tower."""
    F = tower.level(level)
    scale = (b ** (tower.p ** level)).value()
    if F.is_degenerate or scale == 0.0:
        raise ValueError("a(x) needs a thickened level with representable b^(p^n)")
    return AnalyticFn1D.interpolate(lambda x: F.eps_y(x, 0 * x) / scale, degree)


def estimate_universal(tower_fp: RenormTower, thick: RenormTower | None = None, sigma: float | None = None,
                       a_level: int = 4, degree: int = V_DEGREE) -> UniversalData:
    """v_*, rho and an envelope constant from a fixed-point tower; a(x) from a thickened one.

    The tilt constant ``a_const`` is a(f_*(c_*)) * sigma: with Psi_{m,n} made of
    n - m factors the outermost factor carries the thickness without a
    matching factor of sigma.
    """
    if tower_fp.depth < 8:
        raise InsufficientDepth(f"need depth >= 8, tower has {tower_fp.depth}")
    if sigma is None:
        sigma = abs(tower_fp.coord_changes[-1].h.alpha)
    ds = list(range(1, tower_fp.depth + 1))
    profiles = [v_profile(tower_fp, 0, d, degree) for d in ds]
    xs = np.linspace(*profiles[0].domain, 801)
    steps = np.array([np.max(np.abs(profiles[i + 1](xs) - profiles[i](xs))) for i in range(len(profiles) - 1)])
    # deep levels of the degenerate tower drift off the (unstable) fixed point;
    # keep the leading run of steps that still shrink geometrically
    ratios = steps[1:] / steps[:-1]
    clean = 1
    while clean < len(ratios) and ratios[clean] < 0.5 and steps[clean + 1] > 1e-14:
        clean += 1
    rho = float(np.median(ratios[:clean])) if clean > 1 else sigma ** 2
    last = clean + 1                                  # index of the last trusted profile
    v_star = profiles[last]
    tail = steps[last - 1] * rho / (1 - rho)
    err = np.array([np.max(np.abs(profiles[i](xs) - v_star(xs))) for i in range(last)]) + tail
    C_est = float(np.max(err / rho ** np.array(ds[:last])))
    out = UniversalData(v_star, float(sigma), rho, C_est,
                        meta={"v_depth": ds[last], "v_steps": steps.tolist(), "v_tail": float(tail)})
    if thick is not None:
        b = average_jacobian(thick)
        level = min(a_level, thick.depth)
        a_fn = a_profile(thick, level, b)
        fstar_cv = 1.0  # f_*(c_*) under the normalization f(c) = 1
        out.a_fn = a_fn
        out.a_const = float(a_fn(fstar_cv)) * float(sigma)
        out.meta.update({"a_level": level, "b": b.value()})
    return out


# --- Upsilon -----------------------------------------------------------------

def upsilon_star(v: AnalyticFn1D, z, zt, tol: float = 1e-14) -> float:
    """(v(x~) - v(x)) / (y~ - y)."""
    dy = zt[1] - z[1]
    if abs(dy) < tol:
        raise DegenerateVerticalPair(f"vertical separation {dy:.2e} below {tol:.1e}")
    return float(v.diff(z[0], zt[0]) / dy)


def upsilon_m(v: AnalyticFn1D, c_m: float, z, zt, tol: float = 1e-14) -> float:
    return upsilon_star(v, z, zt, tol) - c_m * (zt[1] + z[1])


# --- Cantor points and well chosen words -------------------------------------

def cantor_point(tower: RenormTower, address: Word, height: int = 0, check_depth: bool = False):
    """The Cantor point with address ``address`` followed by zeros, in tip coordinates at ``height``."""
    top = height + len(address)
    if check_depth and top > tower.depth:
        raise AddressUnavailable(f"address {address} needs height {top}, tower depth is {tower.depth}")
    t = tower.tip(top)
    x, y = tower.word_map(address, t[0], t[1], height)
    tip = tower.tip(height)
    return float(x) - tip[0], float(y) - tip[1]


def _common_prefix(a: Word, b: Word) -> int:
    la = list(a.letters) + [0] * (len(b) + 1)
    lb = list(b.letters) + [0] * (len(a) + 1)
    k = 0
    while la[k] == lb[k]:
        k += 1
    return k


@dataclass
class WellChosenData:
    w: Word
    w_tilde: Word
    addresses: tuple            # of z0, z1, zt0, zt1
    points: tuple               # the starred points, tip coordinates
    kappa: tuple                # kappa_0 ... kappa_4
    delta: float
    M: tuple
    M_delta: tuple
    A0: float
    A1: float
    upsilon: dict
    side: str = "left"

    def entry_threshold(self, universal: UniversalData) -> int:
        """Smallest N with both 4 C rho^N bounds of the class-A entry condition."""
        k0, k1, k2, k3, k4 = self.kappa
        C, rho = universal.C_est, universal.rho_est
        if C <= 0:
            return 1
        bound = min(k2 / 2 * (1 - k1 / 2) * self.delta / 3, k0 / 8 / (1 / k3 + 1 / k4))
        return max(1, math.ceil(math.log(bound / (4 * C)) / math.log(rho)))

    def to_json(self) -> dict:
        return {"w": str(self.w), "w_tilde": str(self.w_tilde),
                "addresses": [str(a) for a in self.addresses],
                "points": [list(p) for p in self.points], "kappa": list(self.kappa),
                "delta": self.delta, "M": list(self.M), "M_delta": list(self.M_delta),
                "A0": self.A0, "A1": self.A1, "upsilon": self.upsilon, "side": self.side}


def concavity_window(v: AnalyticFn1D, fstar: UnimodalMap, tip_x: float = 1.0, grid: int = 4001):
    """Largest interval around c_* on which the second difference of y -> v(f_*(y) - tip_x) keeps the sign it has at c_*."""
    ys = np.linspace(-1.0, 1.0, grid)
    g = v(fstar(ys) - tip_x)
    h = ys[1] - ys[0]
    d2 = np.full_like(g, np.nan)
    d2[1:-1] = (g[2:] - 2 * g[1:-1] + g[:-2]) / h ** 2
    i0 = int(np.argmin(np.abs(ys - fstar.c0)))
    sign = np.sign(d2[i0])
    if sign == 0:
        raise NoConcavityWindow("second difference vanishes at the critical point")
    lo = i0
    while lo > 1 and np.sign(d2[lo - 1]) == sign:
        lo -= 1
    hi = i0
    while hi < grid - 2 and np.sign(d2[hi + 1]) == sign:
        hi += 1
    if hi - lo < 4:
        raise NoConcavityWindow("no neighbourhood of the critical point keeps one curvature sign")
    return float(ys[lo]), float(ys[hi]), int(sign)


def _window(U01, U0t, k1):
    """(M, delta, M_delta) for the overlap window in tilt units."""
    left = (U0t - k1 / 2 * U01) / (1 - k1 / 2)
    delta = (U0t - left) / 10
    lo = left + delta / 3 * (3 - k1 / 2) / (1 - k1 / 2)
    return (left, U0t), delta, (lo, U0t - delta)


def find_well_chosen(universal: UniversalData, fstar: UnimodalMap, max_depth: int = 7,
                     margin: float = 1e-4, tower_fp: RenormTower | None = None) -> WellChosenData:
    """Well placed Cantor points of the fixed point and the cylinders separating them.

    Candidate points are the Cantor points with addresses of length up to
    ``max_depth`` lying on one side of c_* inside its concavity window.  Among
    the admissible triples z0, z1, z~0 the one giving the widest overlap window
    (in log scale) is kept; z~1 is the next point of the same cylinder.
    """
    if max_depth < 3:
        raise ValueError("max_depth must be at least 3")
    if universal.a_const is None or universal.a_const <= 0:
        raise ValueError("universal data carries no tilt constant")
    if tower_fp is None:
        tower_fp = build_tower(iota(fstar), max_depth + 2)
    v = universal.v_star
    tip = tower_fp.tip(0)
    V_lo, V_hi, curv = concavity_window(v, fstar, tip[0])
    c = fstar.c0 - tip[1]
    addrs, pts = [], []
    for L in range(1, max_depth + 1):
        for a in all_words(L, tower_fp.p):
            if L > 1 and a.letters[-1] == 0:
                continue  # trailing zeros name the same point
            addrs.append(a)
            pts.append(cantor_point(tower_fp, a))
    pts = np.array(pts)
    for side in ("left", "right"):
        inside = (pts[:, 1] + tip[1] > V_lo) & (pts[:, 1] + tip[1] < V_hi)
        inside &= (pts[:, 1] < c - margin) if side == "left" else (pts[:, 1] > c + margin)
        idx = np.flatnonzero(inside)
        idx = idx[np.argsort(pts[idx, 1])]
        found = _best_triple(v, [addrs[i] for i in idx], pts[idx], universal.a_const)
        if found is not None:
            return _assemble(v, found, universal.a_const, side)
    raise DepthExhausted(f"no well placed triple among addresses of length <= {max_depth}")


def _best_triple(v, addrs, P, a_const):
    n = len(P)
    if n < 4:
        return None
    x, y = P[:, 0], P[:, 1]
    vx = v(x)
    best = None
    for i in range(n):
        for j in range(i + 1, n):
            lij = _common_prefix(addrs[i], addrs[j])
            if x[j] <= x[i]:
                continue
            U01 = (vx[j] - vx[i]) / (y[j] - y[i])
            for k in range(j + 1, n):
                if x[k] <= x[j] or _common_prefix(addrs[i], addrs[k]) >= lij:
                    continue
                U0t = (vx[k] - vx[i]) / (y[k] - y[i])
                if not U0t < U01:
                    continue
                k1 = (y[j] - y[i]) / (y[k] - y[i])
                M, delta, Md = _window(U01, U0t, k1)
                if Md[0] <= 0 or Md[0] >= Md[1]:
                    continue
                width = math.log(Md[1] / Md[0])
                # z~1: the next point above z~0 in the same cylinder
                depth = _common_prefix(addrs[i], addrs[k]) + 1
                later = [q for q in range(k + 1, n)
                         if _common_prefix(addrs[k], addrs[q]) >= depth and x[q] > x[k]]
                if not later:
                    continue
                if best is None or width > best[0]:
                    best = (width, (addrs[i], addrs[j], addrs[k], addrs[later[0]]),
                            (P[i], P[j], P[k], P[later[0]]), depth)
    return best


def _assemble(v, found, a_const, side) -> WellChosenData:
    _, addrs, pts, depth = found
    z0, z1, zt0, zt1 = (tuple(map(float, p)) for p in pts)
    U01 = upsilon_star(v, z0, z1)
    U0t = upsilon_star(v, z0, zt0)
    Ut = upsilon_star(v, zt0, zt1)
    k1 = (z1[1] - z0[1]) / (zt0[1] - z0[1])
    kappa = (abs(U01 - Ut), k1, abs(zt0[1] - z0[1]), abs(z1[1] - z0[1]), abs(zt1[1] - zt0[1]))
    M, delta, Md = _window(U01, U0t, k1)
    pad = lambda a: Word(a.letters + (0,) * max(0, depth - len(a)), a.alphabet)
    w, wt = pad(addrs[0]).prefix(depth), pad(addrs[2]).prefix(depth)
    return WellChosenData(w, wt, addrs, (z0, z1, zt0, zt1), kappa, delta, M, Md,
                          Md[0] / a_const, Md[1] / a_const,
                          {"z0_z1": U01, "z0_zt0": U0t, "zt0_zt1": Ut}, side)


# --- predictor ---------------------------------------------------------------

def dagger_log(b: LogMagnitude, m: int, n: int, sigma: float, p: int = 2) -> float:
    """log(b^(p^m) / sigma^(n - m))."""
    return (p ** m) * b.log_value - (n - m) * math.log(sigma)


def predict_overlap(b: LogMagnitude, m: int, n: int, data: WellChosenData, sigma: float, p: int = 2) -> bool:
    if not m < n:
        raise ValueError("need m < n")
    q = dagger_log(b, m, n, sigma, p)
    return math.log(data.A0) < q < math.log(data.A1)


def predictor_margin(b: LogMagnitude, m: int, n: int, data: WellChosenData, sigma: float, p: int = 2) -> float:
    """Distance to the nearer end of the log window, as a fraction of its width (negative outside)."""
    lo, hi = math.log(data.A0), math.log(data.A1)
    q = dagger_log(b, m, n, sigma, p)
    return min(q - lo, hi - q) / (hi - lo)


# --- detector ----------------------------------------------------------------

def overlap_pieces(tower: RenormTower, data: WellChosenData, m: int, n: int, samples: int = 256):
    """Psi_{m,n} images of the canonical pieces B^w_n and B^w~_n, seen at height m."""
    pre = Word.zeros(n - m, tower.p)
    words = [pre + data.w, pre + data.w_tilde]
    pieces = canonical_pieces(tower, words, samples, height=m)
    return pieces[words[0]], pieces[words[1]]


def detect_overlap(tower: RenormTower, data: WellChosenData, m: int, n: int, samples: int = 256) -> bool:
    if data.w == data.w_tilde:
        return True
    a, b = overlap_pieces(tower, data, m, n, samples)
    return horizontal_overlap(a, b)


# --- class A -----------------------------------------------------------------

@dataclass
class ClassAReport:
    m: int
    n: int
    items: dict                 # name -> (passed, slack)
    parity_even: bool
    sign_consistent: bool
    above_threshold: bool

    @property
    def passed(self) -> bool:
        return all(ok for ok, _ in self.items.values())

    def rows(self) -> list[dict]:
        return [{"m": self.m, "n": self.n, "property": k, "passed": ok, "slack": s}
                for k, (ok, s) in self.items.items()]


def addressed_points(tower: RenormTower, data: WellChosenData, n: int):
    return tuple(cantor_point(tower, a, n, check_depth=True) for a in data.addresses)


def fit_c_m(tower: RenormTower, m: int, n: int, v: AnalyticFn1D, dec=None, samples: int = 21) -> float:
    """Least-squares c in x + r(x, y) - v(x) ~ c y^2 over B at height n."""
    dec = dec or scope_decomposition(tower, m, n, fit_degree=(4, 4))
    tip = dec.tip_n
    zx, zy = np.meshgrid(np.linspace(-1 - tip[0], 1 - tip[0], samples),
                         np.linspace(-1 - tip[1], 1 - tip[1], samples), indexing="ij")
    resid = zx + dec.r(zx, zy) - v(zx)
    q = zy ** 2
    return float(np.sum(resid * q) / np.sum(q * q))


def class_a_check(tower: RenormTower, data: WellChosenData, m: int, n: int, universal: UniversalData,
                  b: LogMagnitude | None = None, samples: int = 21) -> ClassAReport:
    """Evaluate (A-1)...(A-7) at the addressed points of height n; slack > 0 means satisfied."""
    v = universal.v_star
    k0, k1, k2, k3, k4 = data.kappa
    dec = scope_decomposition(tower, m, n, fit_degree=(4, 4))
    c_m = fit_c_m(tower, m, n, v, dec, samples)
    z0, z1, zt0, zt1 = addressed_points(tower, data, n)
    s0, s1, st0, _ = data.points
    items = {}
    gaps = [z1[0] - z0[0], zt0[0] - z1[0], zt1[0] - zt0[0], z1[1] - z0[1], zt0[1] - z1[1], zt1[1] - zt0[1]]
    items["A1"] = (min(gaps) > 0, min(gaps))
    ratio = abs(z1[1] - z0[1]) / abs(zt0[1] - z0[1])
    slack = min(1 - ratio, ratio - k1 / 2)
    items["A2"] = (slack > 0, slack)
    slack = min(abs(zt0[1] - z0[1]) - k2 / 2, abs(z1[1] - z0[1]) - k3 / 2, abs(zt1[1] - zt0[1]) - k4 / 2)
    items["A3"] = (slack > 0, slack)
    U01 = upsilon_m(v, c_m, z0, z1)
    U0t = upsilon_m(v, c_m, z0, zt0)
    Ut = upsilon_m(v, c_m, zt0, zt1)
    slack = abs(U01 - Ut) - k0 / 2
    items["A4"] = (slack > 0, slack)
    tip = dec.tip_n
    zx, zy = np.meshgrid(np.linspace(-1 - tip[0], 1 - tip[0], samples),
                         np.linspace(-1 - tip[1], 1 - tip[1], samples), indexing="ij")
    dev = float(np.max(np.abs(zx + dec.r(zx, zy) - v(zx) - c_m * zy ** 2)))
    slack = universal.C_est * universal.rho_est ** (n - m) - dev
    items["A5"] = (slack > 0, slack)
    slack = data.delta / 3 - max(abs(U01 - upsilon_star(v, s0, s1)), abs(U0t - upsilon_star(v, s0, st0)))
    items["A6"] = (slack > 0, slack)
    ts = dec.t_mn / dec.s_mn
    if tower.level(0).is_degenerate:
        # b = 0: the tilt vanishes identically and so does its predicted value
        term, sign_ok = 0.0, True
    else:
        b = b or average_jacobian(tower)
        term, sign_ok = universal.a_const * math.exp(dagger_log(b, m, n, universal.sigma, tower.p)), ts < 0
    slack = data.delta / 3 - abs(ts + term)
    items["A7"] = (sign_ok and slack > 0, slack if sign_ok else -abs(ts))
    signs = 1
    for k in range(m, n):
        signs *= np.sign(scope_decomposition(tower, k, k + 1, fit_degree=(2, 2)).s_mn)
    N = data.entry_threshold(universal)
    return ClassAReport(m, n, items, (n - m) % 2 == 0, bool(np.sign(dec.s_mn) == signs), n - m > N)


# --- key lemma and distortion --------------------------------------------------

def key_lemma_check(tower: RenormTower, universal: UniversalData, m: int, n: int, z, zt, z_end,
                    b: LogMagnitude | None = None, C: float | None = None) -> dict:
    """Align a point of the segment z..z_end vertically with zt under Psi_{m,n} and compare slopes.

    Points are in tip coordinates at height n.  Returns |Upsilon_*| at the
    aligned pair, the measured a b^(p^m) / sigma^(n - m), the bracket half
    width C max(rho^m, rho^(n - m)) and whether the bracket contains it.
    """
    tip = tower.tip(n)
    xt = float(tower.scope(m, n, tip[0] + zt[0], tip[1] + zt[1])[0])

    def gap(s):
        px = z[0] + s * (z_end[0] - z[0])
        py = z[1] + s * (z_end[1] - z[1])
        return float(tower.scope(m, n, tip[0] + px, tip[1] + py)[0]) - xt

    g0, g1 = gap(0.0), gap(1.0)
    if g0 * g1 > 0:
        raise NoVerticalAlignment("segment image stays on one side of the target vertical line")
    s = brentq(gap, 0.0, 1.0, xtol=1e-15) if g0 != 0 else 0.0
    za = (z[0] + s * (z_end[0] - z[0]), z[1] + s * (z_end[1] - z[1]))
    U = abs(upsilon_star(universal.v_star, za, zt))
    if tower.level(0).is_degenerate:
        term = 0.0
    else:
        b = b or average_jacobian(tower)
        term = universal.a_const * math.exp(dagger_log(b, m, n, universal.sigma, tower.p))
    C = universal.C_est if C is None else C
    half = C * max(universal.rho_est ** m, universal.rho_est ** (n - m))
    # the measured tilt sits between the two: |Upsilon| ~ |t/s| up to C rho^(n-m) / |y~ - y|
    dec = scope_decomposition(tower, m, n, fit_degree=(4, 4))
    tilt = abs(dec.t_mn / dec.s_mn)
    tilt_half = C * universal.rho_est ** (n - m) / abs(zt[1] - za[1])
    return {"aligned": za, "upsilon": U, "term": term, "half_width": half,
            "contained": U - half <= term <= U + half, "gap": abs(U - term),
            "tilt": tilt, "tilt_half_width": tilt_half, "tilt_contained": abs(U - tilt) <= tilt_half}


def distortion_words(data: WellChosenData, m: int, n: int, p: int = 2):
    """0^m 1 0^(n-m-1) w and its sibling: Psi_{0,m} o F_m o Psi_{m,n} of B^w_n and B^w~_n."""
    stem = Word.zeros(m, p) + Word.of(1, p=p) + Word.zeros(n - m - 1, p)
    return stem + data.w, stem + data.w_tilde


def distortion_report(tower: RenormTower, data: WellChosenData, m: int, n: int, b: LogMagnitude | None = None,
                      samples: int = 512) -> dict:
    if tower.level(0).is_degenerate or not detect_overlap(tower, data, m, n):
        raise OverlapAbsent(f"no horizontal overlap at (m, n) = ({m}, {n})")
    b = b or average_jacobian(tower)
    sigma = abs(tower.coord_changes[-1].h.alpha)
    w0, w1 = distortion_words(data, m, n, tower.p)
    pieces = canonical_pieces(tower, [w0, w1], samples, height=0)
    d = pieces[w0].dist(pieces[w1])
    diam = max(pieces[w0].diam(), pieces[w1].diam())
    ls, lb = math.log(sigma), b.log_value * tower.p ** m
    dist_env = 2 * m * ls + lb + (n - m) * ls
    diam_env = m * ls + 2 * (n - m) * ls
    return {"m": m, "n": n, "dist": d, "diam": diam, "ratio": d / diam,
            "log_dist_envelope": dist_env, "log_diam_envelope": diam_env,
            "C0": math.exp(math.log(d) - dist_env) if d > 0 else 0.0,
            "C1": math.exp(math.log(diam) - diam_env),
            "words": (str(w0), str(w1))}
