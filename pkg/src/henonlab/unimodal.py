"""Unimodal maps of J = [-1, 1], period-doubling renormalization and its fixed point."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq

from .chebfun import AnalyticFn1D, cheb_nodes
from .combinatorics import Word, all_words, word_index
from .errors import DepthUnreachable, NoConvergence, NotRenormalizable

DEFAULT_DEGREE = 40
CRITICAL_GAP = 0.1


def critical_point(fn: AnalyticFn1D, kind: str = "max") -> float:
    """The interior maximum (or minimum, with kind="min") of fn."""
    sign = 1.0 if kind == "max" else -1.0
    d1 = fn.deriv()
    d2 = d1.deriv()
    a, b = fn.domain
    roots = C.chebroots(d1.coefficients)
    t = roots[np.abs(roots.imag) < 1e-8].real
    t = t[(t > -1) & (t < 1)]
    x = 0.5 * (b - a) * t + 0.5 * (a + b)
    x = x[sign * d2(x) < 0] if len(x) else x
    if len(x) == 0:
        raise NotRenormalizable(f"no interior {kind}imum")
    c = float(x[np.argmax(sign * fn(x))])
    for _ in range(5):
        c -= float(d1(c) / d2(c))
    return c


@dataclass(frozen=True)
class UnimodalMap:
    fn: AnalyticFn1D
    p: int = 2
    c0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "c0", critical_point(self.fn))

    def __call__(self, x):
        return self.fn(x)

    @property
    def degree(self) -> int:
        return self.fn.degree

    def deriv(self) -> AnalyticFn1D:
        return self.fn.deriv()

    def critical_orbit(self, n: int = 2) -> list[float]:
        orbit = [self.c0]
        for _ in range(n):
            orbit.append(float(self.fn(orbit[-1])))
        return orbit

    def iterate(self, x, k: int):
        for _ in range(k):
            x = self.fn(x)
        return x

    def fixed_point(self) -> float:
        """Interior fixed point right of the critical point."""
        return brentq(lambda x: self.fn(x) - x, self.c0, 1.0 + 1e-9, xtol=1e-15)

    def diagnostics(self, samples: int = 1001) -> dict:
        x = np.linspace(-1, 1, samples)
        d = self.deriv()(x)
        _, c1, c2 = self.critical_orbit(2)
        p = self.fixed_point()
        return {
            "c0": self.c0,
            "c1_error": abs(c1 - 1.0),
            "c2_error": abs(c2 + 1.0),
            "monotone_left": bool(np.all(d[x < self.c0 - 1e-9] > 0)),
            "monotone_right": bool(np.all(d[x > self.c0 + 1e-9] < 0)),
            "fixed_point": p,
            "fixed_point_multiplier": float(self.deriv()(p)),
        }

    def check(self, tol: float = 1e-8) -> None:
        d = self.diagnostics()
        if d["c1_error"] > tol or d["c2_error"] > tol:
            raise ValueError(f"map is not normalized: {d}")
        if not (d["monotone_left"] and d["monotone_right"]):
            raise ValueError("map is not unimodal on J")
        if d["fixed_point_multiplier"] >= -1.0:
            raise ValueError("interior fixed point is not expanding with negative multiplier")

    def to_json(self) -> dict:
        return {"p": self.p, **self.fn.to_json()}

    @classmethod
    def from_json(cls, data: dict) -> "UnimodalMap":
        return cls(AnalyticFn1D.from_json(data), data.get("p", 2))


def normalize(fn: AnalyticFn1D, degree: int | None = None) -> UnimodalMap:
    """Affinely conjugate a unimodal fn so that c1 = 1 and c2 = -1."""
    degree = fn.degree if degree is None else degree
    c = critical_point(fn)
    c1 = float(fn(c))
    c2 = float(fn(c1))
    scale = 0.5 * (c1 - c2)
    mid = 0.5 * (c1 + c2)
    new = AnalyticFn1D.interpolate(lambda x: (fn(scale * x + mid) - mid) / scale, degree)
    return UnimodalMap(new)


def quadratic_map(a: float, degree: int = DEFAULT_DEGREE) -> UnimodalMap:
    """The normalized form of x -> 1 - a x^2."""
    return normalize(AnalyticFn1D(C.poly2cheb([1.0, 0.0, -a])), degree)


@dataclass(frozen=True)
class Rescaling:
    """h(X) = alpha X + beta, the affine bijection J -> J^0."""

    alpha: float
    beta: float

    def __call__(self, X):
        return self.alpha * np.asarray(X) + self.beta

    def inverse(self, x):
        return (np.asarray(x) - self.beta) / self.alpha

    @property
    def scale(self) -> float:
        return abs(self.alpha)


def central_rescaling(f: UnimodalMap, gap: float = CRITICAL_GAP, grid: int = 1000) -> Rescaling:
    """Locate J^0 for period doubling and return the rescaling h with h(J) = J^0.

    J^0 lies inside [q, p] where p is the expanding fixed point and q its
    other preimage; the orientation of h is the one making R f a U-map.
    """
    c = f.c0
    c1 = float(f(c))
    if abs(c1 - c) <= gap:
        raise NotRenormalizable(f"critical value within {gap} of the critical point")
    try:
        p = f.fixed_point()
    except ValueError as exc:
        raise NotRenormalizable("no interior fixed point") from exc
    if float(f.deriv()(p)) >= -1.0:
        raise NotRenormalizable("interior fixed point is not expanding")
    g_c = float(f(c1))
    g2_c = float(f(f(g_c)))
    lo, hi = min(g_c, g2_c), max(g_c, g2_c)
    if not lo < c < hi:
        raise NotRenormalizable("candidate J^0 misses the critical point")
    if hi >= p:
        raise NotRenormalizable("J^0 and J^1 are not disjoint")
    x = np.linspace(lo, hi, grid)
    img = f(f(x))
    slack = 1e-10 * (hi - lo)
    if img.min() < lo - slack or img.max() > hi + slack:
        raise NotRenormalizable("f^2(J^0) is not contained in J^0")
    # h(1) = f^2(c) makes the rescaled critical value equal to 1.
    return Rescaling(0.5 * (g_c - g2_c), 0.5 * (g_c + g2_c))


def renormalize_unimodal(f: UnimodalMap, degree: int | None = None, gap: float = CRITICAL_GAP) -> UnimodalMap:
    """R f = h^{-1} o f^2 o h."""
    h = central_rescaling(f, gap)
    degree = f.degree if degree is None else degree
    fn = f.fn
    new = AnalyticFn1D.interpolate(lambda X: h.inverse(fn(fn(h(X)))), degree)
    return UnimodalMap(new, f.p)


def renormalization_residual(f: UnimodalMap, samples: int = 2001) -> float:
    g = renormalize_unimodal(f)
    x = np.linspace(-1, 1, samples)
    return float(np.max(np.abs(g(x) - f(x))))


# --- fixed point -----------------------------------------------------------

# Leading Taylor coefficients of the even period-doubling fixed point g(0) = 1.
_SEED = [1.0, 0.0, -1.5276330, 0.0, 0.1048152, 0.0, 0.0267057, 0.0, -0.0035274]


def _even_basis(K: int, x):
    """Columns T_2k(x), k = 0..K."""
    V = C.chebvander(x, 2 * K)
    return V[:, ::2]


def _cvitanovic_residual(a_tail: np.ndarray, x_nodes: np.ndarray) -> np.ndarray:
    K = len(a_tail)
    a = _full_even(a_tail)
    coef = np.zeros(2 * K + 1)
    coef[::2] = a
    g = lambda t: C.chebval(t, coef)
    g1 = g(1.0)
    return g1 * g(x_nodes) - g(g(g1 * x_nodes))


def _full_even(a_tail: np.ndarray) -> np.ndarray:
    # T_2k(0) = (-1)^k; impose g(0) = 1.
    k = np.arange(1, len(a_tail) + 1)
    a0 = 1.0 - np.sum(a_tail * (-1.0) ** k)
    return np.concatenate([[a0], a_tail])


@dataclass(frozen=True)
class FixedPointResult:
    fstar: UnimodalMap
    lam: float
    residual: float
    history: tuple[float, ...]
    even_coefficients: np.ndarray

    def to_json(self) -> dict:
        return {"fstar": self.fstar.to_json(), "lambda": self.lam, "residual": self.residual,
                "newton_history": list(self.history),
                "even_coefficients": [float(c) for c in self.even_coefficients]}


def solve_fixed_point(degree: int = DEFAULT_DEGREE, tol: float = 1e-9, fd_step: float = 1e-7,
                      max_iter: int = 40) -> FixedPointResult:
    """Newton solve of the period-doubling fixed point at a given Chebyshev degree.

    The even form g(x) = g(g(g(1) x)) / g(1), g(0) = 1, is solved on the
    positive Chebyshev nodes, then conjugated onto J with c1 = 1, c2 = -1.
    The Jacobian is a forward finite difference on the coefficients.
    """
    if degree < 10:
        raise ValueError("degree must be at least 10")
    K = degree // 2
    nodes = cheb_nodes(2 * K)[K:]
    seed = np.zeros(2 * K + 1)
    sc = C.poly2cheb(_SEED)
    seed[: min(len(sc), len(seed))] = sc[: len(seed)]
    a = seed[2::2].copy()
    history = []
    for _ in range(max_iter):
        r = _cvitanovic_residual(a, nodes)
        history.append(float(np.max(np.abs(r))))
        if history[-1] < 1e-15:
            break
        if len(history) > 4 and history[-1] >= 0.5 * history[-2] and history[-1] < 1e-12:
            break
        J = np.empty((K, K))
        for j in range(K):
            da = a.copy()
            step = fd_step * max(1.0, abs(a[j]))
            da[j] += step
            J[:, j] = (_cvitanovic_residual(da, nodes) - r) / step
        a = a - np.linalg.solve(J, r)
    coef = np.zeros(2 * K + 1)
    coef[::2] = _full_even(a)
    g = AnalyticFn1D(coef)
    fstar = normalize(g, degree)
    lam = abs(float(g(1.0)))
    residual = renormalization_residual(fstar)
    if not np.isfinite(residual) or residual >= tol:
        raise NoConvergence(f"fixed point residual {residual:.3e} above tolerance {tol:.1e}", history)
    return FixedPointResult(fstar, lam, residual, tuple(history), coef)


@lru_cache(maxsize=8)
def cached_fixed_point(degree: int = DEFAULT_DEGREE, tol: float = 1e-9) -> FixedPointResult:
    """Process-level memo of solve_fixed_point, backed by an optional disk cache.

    The disk cache lives in $HENONLAB_CACHE when that variable is set.
    """
    cache_dir = os.environ.get("HENONLAB_CACHE")
    path = Path(cache_dir) / f"fixed_point_p2_deg{degree}_tol{tol:.0e}.json" if cache_dir else None
    if path is not None and path.exists():
        data = json.loads(path.read_text())
        return FixedPointResult(UnimodalMap.from_json(data["fstar"]), data["lambda"], data["residual"],
                                tuple(data["newton_history"]), np.array(data["even_coefficients"]))
    result = solve_fixed_point(degree, tol)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(result.to_json(), sort_keys=True))
    return result


def feigenbaum_scaling_oracle(levels: int = 12) -> tuple[float, list[float]]:
    """Scaling ratio from superstable parameters of x -> 1 - a x^2.

    a_n solves f_a^(2^n)(0) = 0; d_n = f^(2^(n-1))(0) at a_n and the ratios
    |d_{n+1} / d_n| converge to the fixed-point rescaling factor.  Returns the
    last ratio and the whole sequence.
    """
    def orbit_value(a, k):
        x = 0.0
        for _ in range(k):
            x = 1.0 - a * x * x
        return x

    params = [0.0, 1.0]  # superstable periods 1 and 2
    delta = 4.669
    for n in range(2, levels + 1):
        guess = params[-1] + (params[-1] - params[-2]) / delta
        span = 0.3 * (params[-1] - params[-2]) / delta
        k = 2 ** n
        lo, hi = guess - span, guess + span
        if n == 2:
            lo, hi = 1.2, 1.36  # delta is not yet asymptotic
        while np.sign(orbit_value(lo, k)) == np.sign(orbit_value(hi, k)):
            span *= 0.7
            lo, hi = guess - span, guess + span
            if span < 1e-16:
                raise NoConvergence(f"lost superstable bracket at period 2^{n}")
        params.append(brentq(lambda a: orbit_value(a, k), lo, hi, xtol=1e-16, rtol=1e-15, maxiter=200))
        if n >= 3:
            delta = (params[-2] - params[-3]) / (params[-1] - params[-2])
    d = [orbit_value(params[n], 2 ** (n - 1)) for n in range(1, len(params))]
    ratios = [abs(d[i + 1] / d[i]) for i in range(len(d) - 1)]
    return ratios[-1], ratios


# --- cylinders -------------------------------------------------------------

@dataclass(frozen=True)
class CylinderFamily1D:
    intervals: dict
    depth: int
    f: UnimodalMap

    def __getitem__(self, w: Word) -> tuple[float, float]:
        return self.intervals[w]

    def words(self, length: int):
        return [w for w in self.intervals if len(w) == length]


def _image_interval(f: UnimodalMap, iv):
    a, b = iv
    vals = [float(f(a)), float(f(b))]
    if a < f.c0 < b:
        vals.append(float(f(f.c0)))
    return min(vals), max(vals)


def renormalization_chain(f: UnimodalMap, depth: int) -> list[Rescaling]:
    hs = []
    g = f
    for level in range(depth):
        try:
            hs.append(central_rescaling(g))
            if level < depth - 1:
                g = renormalize_unimodal(g)
        except NotRenormalizable as exc:
            raise DepthUnreachable(level, str(exc)) from exc
    return hs


def cylinders_1d(f: UnimodalMap, depth: int) -> CylinderFamily1D:
    """Intervals J^w, |w| <= depth, with J^{0^k} = h_0 o ... o h_{k-1}(J) and J^w = f^{index(w)}(J^{0^k})."""
    hs = renormalization_chain(f, depth)
    intervals = {}
    for k in range(1, depth + 1):
        ends = np.array([-1.0, 1.0])
        for h in reversed(hs[:k]):
            ends = h(ends)
        iv = (float(min(ends)), float(max(ends)))
        for i, w in enumerate(all_words(k, f.p)):
            assert word_index(w) == i
            intervals[w] = iv
            iv = _image_interval(f, iv)
    return CylinderFamily1D(intervals, depth, f)


def apriori_report(c: CylinderFamily1D) -> tuple[float, float, float]:
    """(L, k0, k1): extremes of sibling ratios |J^{ww}|/|J^{ww~}| and child ratios |J^{ww}|/|J^w|."""
    if c.depth < 2:
        raise ValueError("a priori report needs depth >= 2")
    L, k0, k1 = 1.0, 1.0, 0.0
    size = lambda iv: iv[1] - iv[0]
    for w, iv in c.intervals.items():
        if len(w) >= c.depth:
            continue
        children = [c.intervals[w.append(a)] for a in range(c.f.p)]
        for i, ch in enumerate(children):
            ratio = size(ch) / size(iv)
            k0, k1 = min(k0, ratio), max(k1, ratio)
            for j, other in enumerate(children):
                if i != j:
                    L = max(L, size(ch) / size(other))
    return L, k0, k1
