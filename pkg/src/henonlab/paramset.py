"""Intervals of average Jacobians b with A0 < b^(p^m) / sigma^(n - m) < A1, and covers built from them.

With d = n - m and delta = p^(-m) the admissible set for one pair (m, n) is

    I_{d,delta} = [sigma^(d delta) A0^delta, sigma^(d delta) A1^delta].

Everything here is arithmetic on such intervals: gaps between two of them,
which finer intervals fit strictly inside a gap, how much of the gap they
cover, and an inductive cover of [b1, b0] whose uncovered part shrinks
geometrically.  Endpoints are evaluated as exp(delta (d log sigma + log A))
so that tiny delta does not cost precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, EmptyRange, NotDisjoint, ThresholdNotFound, WrongOrder


@dataclass(frozen=True)
class CoverConfig:
    A0: float
    A1: float
    sigma: float
    p: int = 2
    b_range: tuple = (0.05, 0.9)     # (b1, b0)

    def __post_init__(self):
        if not 0 < self.A0 < self.A1:
            raise ConfigError("need 0 < A0 < A1")
        if not 0 < self.sigma < 1:
            raise ConfigError("need 0 < sigma < 1")
        if self.p < 2:
            raise ConfigError("need p >= 2")
        b1, b0 = self.b_range
        if not 0 < b1 < b0 <= 1:
            raise ConfigError("need 0 < b1 < b0 <= 1")

    @property
    def alpha(self) -> tuple[float, float]:
        """log_sigma A0, log_sigma A1."""
        ls = math.log(self.sigma)
        return math.log(self.A0) / ls, math.log(self.A1) / ls

    @property
    def L(self) -> float:
        """Guaranteed covered fraction of a gap once delta'' is small enough."""
        return 0.25 / abs(math.log(self.sigma)) * (1 - self.A0 / self.A1)

    def delta(self, m: int) -> float:
        return float(self.p) ** (-m)

    def to_json(self) -> dict:
        return {"A0": self.A0, "A1": self.A1, "sigma": self.sigma, "p": self.p, "b_range": list(self.b_range)}


def _endpoint(cfg: CoverConfig, d, delta, A):
    return np.exp(delta * (d * math.log(cfg.sigma) + math.log(A)))


@dataclass(frozen=True)
class CoverInterval:
    d: int
    delta: float
    lo: float
    hi: float

    @property
    def diam(self) -> float:
        return self.hi - self.lo

    def contains(self, b: float) -> bool:
        return self.lo <= b <= self.hi


def interval(cfg: CoverConfig, d: int, delta: float) -> CoverInterval:
    if d < 0 or not 0 < delta <= 1:
        raise ValueError("need d >= 0 and 0 < delta <= 1")
    return CoverInterval(int(d), float(delta), float(_endpoint(cfg, d, delta, cfg.A0)),
                         float(_endpoint(cfg, d, delta, cfg.A1)))


def diam(cfg: CoverConfig, d: int, delta: float) -> float:
    """sigma^(d delta) (A1^delta - A0^delta), without the cancellation of subtracting endpoints."""
    return float(_endpoint(cfg, d, delta, cfg.A0) * np.expm1(delta * math.log(cfg.A1 / cfg.A0)))


class Regime(str, Enum):
    OVERLAPPING = "overlapping"
    DISJOINT = "disjoint"


def dichotomy(cfg: CoverConfig) -> Regime:
    """Consecutive I_{d+1,delta}, I_{d,delta} meet for every d and delta iff A1 sigma >= A0."""
    return Regime.OVERLAPPING if cfg.A1 * cfg.sigma >= cfg.A0 else Regime.DISJOINT


# --- gaps --------------------------------------------------------------------

@dataclass(frozen=True)
class Gap:
    """Open gap between I_{d',delta'} (left) and I_{d,delta} (right)."""
    left: tuple        # (d', delta')
    right: tuple       # (d, delta)
    lo: float
    hi: float
    length: float      # from the closed form; hi - lo is the subtraction check


def gap_length(cfg: CoverConfig, right: tuple, left: tuple) -> float:
    """sigma^(d delta) (A0^delta - sigma^(d' delta' - d delta) A1^delta')."""
    (d, dl), (dp, dlp) = right, left
    ls = math.log(cfg.sigma)
    return math.exp(d * dl * ls) * (cfg.A0 ** dl - math.exp((dp * dlp - d * dl) * ls) * cfg.A1 ** dlp)


def gap_between(cfg: CoverConfig, right: tuple, left: tuple) -> Gap:
    """Gap between I_right and I_left, the latter required to lie to the left."""
    I = interval(cfg, *right)
    Ip = interval(cfg, *left)
    if I.lo <= Ip.hi and Ip.lo <= I.hi:
        raise NotDisjoint(f"I{right} and I{left} intersect")
    if Ip.lo > I.hi:
        raise WrongOrder(f"I{left} lies to the right of I{right}")
    return Gap(tuple(left), tuple(right), Ip.hi, I.lo, gap_length(cfg, right, left))


def d_range(cfg: CoverConfig, gap: Gap, delta_pp: float) -> tuple[int, int]:
    """All d'' with I_{d'',delta''} strictly inside the gap."""
    (dp, dlp), (d, dl) = gap.left, gap.right
    if not delta_pp < min(dl, dlp):
        raise ValueError("delta'' must be below both deltas of the gap")
    a0, a1 = cfg.alpha
    d_max = math.floor(dlp / delta_pp * (dp + a1) - a0)
    d_min = max(0, math.ceil(dl / delta_pp * (d + a0) - a1))
    if d_min > d_max:
        raise EmptyRange(f"no I_(d'', {delta_pp:g}) fits between I{gap.left} and I{gap.right}")
    return d_min, d_max


def covered_sum(cfg: CoverConfig, d_min: int, d_max: int, delta_pp: float) -> float:
    """Sum of diam I_{d'',delta''} for d_min <= d'' <= d_max, summed as a geometric series."""
    ls = math.log(cfg.sigma)
    head = math.exp(d_min * delta_pp * ls) * cfg.A0 ** delta_pp * math.expm1(delta_pp * math.log(cfg.A1 / cfg.A0))
    return head * math.expm1((d_max - d_min + 1) * delta_pp * ls) / math.expm1(delta_pp * ls)


@dataclass
class GapFill:
    gap: Gap
    delta_pp: float
    d_min: int
    d_max: int
    lo: np.ndarray
    hi: np.ndarray
    covered_sum: float        # closed form
    covered_direct: float     # sum of the diameters one by one
    covered_union: float      # measure of the union (differs from the sums only when intervals overlap)
    L: float
    bound_ok: bool

    @property
    def intervals(self) -> list[CoverInterval]:
        return [CoverInterval(self.d_min + i, self.delta_pp, float(a), float(b))
                for i, (a, b) in enumerate(zip(self.lo, self.hi))]


def _union_length(lo: np.ndarray, hi: np.ndarray) -> float:
    order = np.argsort(lo)
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    # a new component starts wherever an interval begins past everything before it
    start = np.ones(len(lo), dtype=bool)
    start[1:] = lo[1:] > reach[:-1]
    idx = np.flatnonzero(start)
    ends = np.append(idx[1:] - 1, len(lo) - 1)
    return float(np.sum(reach[ends] - lo[idx]))


def gap_fill(cfg: CoverConfig, gap: Gap, delta_pp: float) -> GapFill:
    d_min, d_max = d_range(cfg, gap, delta_pp)
    ds = np.arange(d_min, d_max + 1)
    lo = _endpoint(cfg, ds, delta_pp, cfg.A0)
    hi = _endpoint(cfg, ds, delta_pp, cfg.A1)
    direct = float(np.sum(lo * np.expm1(delta_pp * math.log(cfg.A1 / cfg.A0))))
    union = _union_length(lo, hi)
    L = cfg.L
    return GapFill(gap, delta_pp, d_min, d_max, lo, hi,
                   covered_sum(cfg, d_min, d_max, delta_pp), direct, union, L,
                   union > L * gap.length)


def fill_threshold(cfg: CoverConfig, gap: Gap, m_limit: int = 60) -> int:
    """Smallest m'' such that delta'' = p^(-m'') fits under the gap and covers at least L of it."""
    dl = min(gap.left[1], gap.right[1])
    m0 = max(1, math.floor(-math.log(dl) / math.log(cfg.p)) + 1)
    for m in range(m0, m_limit + 1):
        delta_pp = cfg.delta(m)
        if not delta_pp < dl:
            continue
        try:
            if gap_fill(cfg, gap, delta_pp).bound_ok:
                return m
        except EmptyRange:
            continue
    raise ThresholdNotFound(f"no delta'' = {cfg.p}^-m with m <= {m_limit} fills I{gap.left}..I{gap.right}")


def quotient_threshold(sigma: float, P: float, Q: float) -> float:
    """Largest s_bar with 1/2 < (sigma^s P - sigma^(-s) Q) / (P - Q) for all 0 < s < s_bar.

    Taken with P > Q, the ordering in which the bound gets used.  The
    quotient decreases in s, so s_bar is where it equals 1/2: u = sigma^s
    solves P u^2 - (P - Q) u / 2 - Q = 0.
    """
    if not 0 < sigma <= 1 or not 0 < Q < P:
        raise ValueError("need 0 < sigma <= 1 and 0 < Q < P")
    if sigma == 1:
        return math.inf
    h = 0.5 * (P - Q)
    u = (h + math.sqrt(h * h + 4 * P * Q)) / (2 * P)
    return math.log(u) / math.log(sigma)


def quotient(sigma: float, P: float, Q: float, s):
    return (sigma ** s * P - sigma ** (-s) * Q) / (P - Q)


# --- the staged cover ----------------------------------------------------------

@dataclass
class Refinement:
    m: int
    delta: float
    d: np.ndarray            # placed intervals, sorted by lo
    lo: np.ndarray
    hi: np.ndarray
    parent: float            # uncovered measure before this refinement
    covered: float
    uncovered: float
    uncovered_bound: float   # gaps rounded outward
    n_gaps: int
    max_gap: float

    @property
    def contraction(self) -> float:
        return self.uncovered / self.parent if self.parent > 0 else 0.0

    def row(self) -> dict:
        return {"m": self.m, "delta": self.delta, "intervals": int(self.d.size), "parent": self.parent,
                "covered": self.covered, "uncovered": self.uncovered, "uncovered_bound": self.uncovered_bound,
                "gaps": self.n_gaps, "max_gap": self.max_gap, "contraction": self.contraction}


@dataclass
class CoverStage:
    index: int
    T: tuple                       # working interval, trimmed to interval endpoints
    trimmed: float                 # |[b1, b0]| - |T|
    refinements: list = field(default_factory=list)

    @property
    def deltas(self) -> list[float]:
        return [r.delta for r in self.refinements]

    @property
    def ms(self) -> list[int]:
        return [r.m for r in self.refinements]

    @property
    def measure(self) -> float:
        return self.T[1] - self.T[0]

    def uncovered_after(self, k: int) -> float:
        return self.refinements[k].uncovered


@dataclass
class Cover:
    cfg: CoverConfig
    regime: Regime
    stages: list
    L: float

    def ledger_rows(self) -> list[dict]:
        return [{"stage": s.index, "refinement": k, "T_lo": s.T[0], "T_hi": s.T[1], **r.row()}
                for s in self.stages for k, r in enumerate(s.refinements)]

    def to_json(self) -> dict:
        return {"config": self.cfg.to_json(), "regime": self.regime.value, "L": self.L,
                "stages": [{"index": s.index, "T": list(s.T), "trimmed": s.trimmed,
                            "refinements": [{**r.row(), "d": r.d.tolist(), "lo": r.lo.tolist(),
                                             "hi": r.hi.tolist()} for r in s.refinements]}
                           for s in self.stages]}


def _gap_arrays(left_d, left_m, right_d, right_m):
    return {"ld": np.asarray(left_d, dtype=np.int64), "lm": np.asarray(left_m, dtype=np.int64),
            "rd": np.asarray(right_d, dtype=np.int64), "rm": np.asarray(right_m, dtype=np.int64)}


def _gap_bounds(cfg, gaps):
    p = float(cfg.p)
    lo = _endpoint(cfg, gaps["ld"], p ** -gaps["lm"].astype(float), cfg.A1)
    hi = _endpoint(cfg, gaps["rd"], p ** -gaps["rm"].astype(float), cfg.A0)
    return lo, hi


def _fill_counts(cfg, gaps, m):
    """d''_min, d''_max per gap for delta'' = p^-m (vectorized d_range)."""
    a0, a1 = cfg.alpha
    p = float(cfg.p)
    d_max = np.floor(p ** (m - gaps["lm"]) * (gaps["ld"] + a1) - a0).astype(np.int64)
    d_min = np.ceil(p ** (m - gaps["rm"]) * (gaps["rd"] + a0) - a1).astype(np.int64)
    return np.maximum(d_min, 0), d_max


def _covered(cfg, d_min, d_max, delta):
    """covered_sum, vectorized; zero where the range is empty."""
    ls = math.log(cfg.sigma)
    k = np.maximum(d_max - d_min + 1, 0)
    head = np.exp(d_min * delta * ls) * cfg.A0 ** delta * math.expm1(delta * math.log(cfg.A1 / cfg.A0))
    return head * np.expm1(k * delta * ls) / math.expm1(delta * ls)


def _initial(cfg: CoverConfig, m: int):
    """All I_{d,delta} inside [b1, b0] for delta = p^-m, and the trimmed working interval."""
    b1, b0 = cfg.b_range
    delta = cfg.delta(m)
    ls = math.log(cfg.sigma)
    # hi(d) <= b0  <=>  d >= (log b0 / delta - log A1) / log sigma
    d_first = max(0, math.ceil((math.log(b0) / delta - math.log(cfg.A1)) / ls))
    d_last = math.floor((math.log(b1) / delta - math.log(cfg.A0)) / ls)
    ds = np.arange(d_first, d_last + 1, dtype=np.int64)
    lo = _endpoint(cfg, ds, delta, cfg.A0)
    hi = _endpoint(cfg, ds, delta, cfg.A1)
    keep = (lo >= b1) & (hi <= b0)
    ds, lo, hi = ds[keep], lo[keep], hi[keep]
    if ds.size == 0:
        raise EmptyRange(f"no I_(d, {delta:g}) fits inside [{b1}, {b0}]")
    return ds[::-1], lo[::-1], hi[::-1]


def build_cover(cfg: CoverConfig, stages: int = 2, refinements: int = 8, m_limit: int = 60,
                max_intervals: int = 2_000_000) -> Cover:
    """Stage k fills, refinement after refinement, the gaps left by its own deltas.

    Every stage starts from a fresh coarsest delta not used by earlier stages
    and walks m upward; each refinement covers at least L of the measure
    still uncovered, filling the widest gaps first.  In the overlapping regime one delta already
    covers everything and a single trivial stage is returned.
    """
    if stages < 1 or refinements < 0:
        raise ValueError("need stages >= 1 and refinements >= 0")
    regime = dichotomy(cfg)
    b1, b0 = cfg.b_range
    if regime is Regime.OVERLAPPING:
        m = 1
        delta = cfg.delta(m)
        ls = math.log(cfg.sigma)
        d_first = max(0, math.floor((math.log(b0) / delta - math.log(cfg.A1)) / ls))
        d_last = math.ceil((math.log(b1) / delta - math.log(cfg.A0)) / ls)
        ds = np.arange(d_last, d_first - 1, -1, dtype=np.int64)
        lo, hi = _endpoint(cfg, ds, delta, cfg.A0), _endpoint(cfg, ds, delta, cfg.A1)
        if lo[0] > b1 or hi[-1] < b0:
            raise EmptyRange("intervals at the coarsest delta do not reach across [b1, b0]")
        ref = Refinement(m, delta, ds, lo, hi, b0 - b1, b0 - b1, 0.0, 0.0, 0, 0.0)
        return Cover(cfg, regime, [CoverStage(0, (b1, b0), 0.0, [ref])], cfg.L)

    used: set[int] = set()
    out = []
    for k in range(stages):
        m = 1
        while m in used:
            m += 1
        ds, lo, hi = _initial(cfg, m)
        used.add(m)
        T = (float(lo[0]), float(hi[-1]))
        stage = CoverStage(k, T, (b0 - b1) - (T[1] - T[0]))
        gaps = _gap_arrays(ds[:-1], np.full(ds.size - 1, m), ds[1:], np.full(ds.size - 1, m))
        glo, ghi = _gap_bounds(cfg, gaps)
        covered = float(np.sum(hi - lo))
        stage.refinements.append(_refinement(m, cfg.delta(m), ds, lo, hi, T[1] - T[0], covered, glo, ghi))
        for _ in range(refinements):
            m, gaps, ref = _refine(cfg, gaps, stage.refinements[-1], m, used, m_limit, max_intervals)
            used.add(m)
            stage.refinements.append(ref)
        out.append(stage)
    return Cover(cfg, regime, out, cfg.L)


def _refinement(m, delta, ds, lo, hi, parent, covered, glo, ghi) -> Refinement:
    widths = ghi - glo
    outward = np.nextafter(ghi, np.inf) - np.nextafter(glo, -np.inf)
    return Refinement(m, delta, ds, lo, hi, parent, covered, float(np.sum(widths)), float(np.sum(outward)),
                      int(widths.size), float(widths.max()) if widths.size else 0.0)


def _refine(cfg, gaps, prev: Refinement, m_prev: int, used: set, m_limit: int, max_intervals: int):
    """One refinement: the first unused m whose fills of the widest gaps take L of what is left.

    A gap is filled only if its own fill covers more than L of it; gaps left
    alone carry over to the next refinement unchanged.
    """
    glo, ghi = _gap_bounds(cfg, gaps)
    width = ghi - glo
    need = cfg.L * float(width.sum())
    by_width = np.argsort(-width, kind="stable")
    m = m_prev + 1
    while True:
        if m > m_limit:
            raise ThresholdNotFound(f"no delta'' = {cfg.p}^-m with m <= {m_limit} covers L of the "
                                    f"{width.size} remaining gaps within {max_intervals} intervals")
        if m in used:
            m += 1
            continue
        delta = cfg.delta(m)
        d_min, d_max = _fill_counts(cfg, gaps, m)
        cov = _covered(cfg, d_min, d_max, delta)
        ok = (d_max >= d_min) & (cov > cfg.L * width)
        cand = by_width[ok[by_width]]
        # shortest widest-first prefix reaching the target
        reach = int(np.searchsorted(np.cumsum(cov[cand]), need)) + 1
        cand = cand[:reach]
        if reach <= ok.sum() and int(np.sum(d_max[cand] - d_min[cand] + 1)) <= max_intervals:
            break
        m += 1
    sel = np.zeros(width.size, dtype=bool)
    sel[cand] = True
    keep = {k: v[~sel] for k, v in gaps.items()}
    gaps = {k: v[sel] for k, v in gaps.items()}
    d_min, d_max, cov, width = d_min[sel], d_max[sel], cov[sel], width[sel]
    counts = d_max - d_min + 1
    total = int(counts.sum())
    # placed intervals, per gap in decreasing d'' so they run left to right
    owner = np.repeat(np.arange(width.size), counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    ds = d_max[owner] - offs
    lo = _endpoint(cfg, ds, delta, cfg.A0)
    hi = _endpoint(cfg, ds, delta, cfg.A1)
    # new gaps: left end of each old gap, between consecutive placed intervals, right end
    first = np.cumsum(counts) - counts
    last = first + counts - 1
    between = np.ones(total, dtype=bool)
    between[last] = False
    ld = np.concatenate([keep["ld"], gaps["ld"], ds[between], ds[last]])
    lm = np.concatenate([keep["lm"], gaps["lm"], np.full(between.sum(), m), np.full(last.size, m)])
    rd = np.concatenate([keep["rd"], ds[first], ds[np.flatnonzero(between) + 1], gaps["rd"]])
    rm = np.concatenate([keep["rm"], np.full(first.size, m), np.full(between.sum(), m), gaps["rm"]])
    new = _gap_arrays(ld, lm, rd, rm)
    nlo, nhi = _gap_bounds(cfg, new)
    order = np.argsort(nlo)
    new = {k: v[order] for k, v in new.items()}
    nlo, nhi = nlo[order], nhi[order]
    iorder = np.argsort(lo)
    covered = float(np.sum(cov))
    ref = _refinement(m, delta, ds[iorder], lo[iorder], hi[iorder], prev.uncovered, covered, nlo, nhi)
    return m, new, ref


# --- queries -------------------------------------------------------------------

@dataclass(frozen=True)
class Hit:
    d: int
    delta: float
    m: int
    stage: int
    refinement: int

    @property
    def n(self) -> int:
        return self.m + self.d


def membership(b: float, cover: Cover) -> list[Hit]:
    """Every placed I_{d,delta} containing b, found by binary search per refinement."""
    hits = []
    for s in cover.stages:
        for k, r in enumerate(s.refinements):
            # lo and hi are both increasing within a refinement
            i0 = int(np.searchsorted(r.hi, b, side="left"))
            i1 = int(np.searchsorted(r.lo, b, side="right"))
            hits.extend(Hit(int(r.d[i]), r.delta, r.m, s.index, k) for i in range(i0, i1))
    return hits


def covered_mask(xs: np.ndarray, stage: CoverStage, upto: int | None = None) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    mask = np.zeros(xs.shape, dtype=bool)
    refs = stage.refinements if upto is None else stage.refinements[:upto + 1]
    for r in refs:
        i = np.searchsorted(r.hi, xs, side="left")
        ok = i < r.lo.size
        mask[ok] |= r.lo[i[ok]] <= xs[ok]
    return mask


def stages_hit(b: float, cover: Cover) -> set[int]:
    return {h.stage for h in membership(b, cover)}


def choose_b_for_overlap(cfg: CoverConfig, m: int, n: int) -> float:
    """The log-midpoint of the admissible b for (m, n)."""
    if not m < n:
        raise ValueError("need m < n")
    return math.exp(((n - m) * math.log(cfg.sigma) + 0.5 * (math.log(cfg.A0) + math.log(cfg.A1))) / cfg.p ** m)
