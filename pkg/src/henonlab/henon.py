"""Henon-like maps F(x, y) = (f(x) - eps(x, y), x) and their period-doubling renormalization.

R F = Psi^{-1} o F^2 o Psi with Psi = H^{-1} o Lambda^{-1}, where
H(x, y) = (phi(x, y), y) straightens F^2 and Lambda^{-1} = (h, h) is the
affine dilation onto the central square.  In H-coordinates
G = H o F^2 o H^{-1} reads G(u, v) = (phi(w, u), u) with w = phi(u, x) and
x the root of phi(x, v) = u on the decreasing branch of f.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C

from .chebfun import GL_NODES, GL_WEIGHTS, AnalyticFn1D, AnalyticFn2D
from .errors import (DepthUnreachable, InsufficientDepth, JacobianVanished, NotContracted,
                     NotRenormalizable, OutOfDomain, ThicknessTooLarge)
from .logmag import LogMagnitude
from .unimodal import CRITICAL_GAP, Rescaling, UnimodalMap, renormalize_unimodal

EPS_MAX = 0.5
EPS_DEGY = 12
DOMAIN_SLACK = 1e-6


def _segment_mean(g: Callable, x0, x1, y0, y1):
    """Mean of g along the segment (x0, y0) -> (x1, y1) by Gauss-Legendre quadrature."""
    x0, x1, y0, y1 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x0, x1, y0, y1)))
    s = GL_NODES.reshape((-1,) + (1,) * x0.ndim)
    vals = g(x0 + s * (x1 - x0), y0 + s * (y1 - y0))
    return np.tensordot(GL_WEIGHTS, vals, axes=1)


def _slope(d: AnalyticFn1D, a, b):
    """Mean of d on [a, b]; with d = f' this is the divided difference f[a, b]."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    s = GL_NODES.reshape((-1,) + (1,) * a.ndim)
    return np.tensordot(GL_WEIGHTS, d(a + s * (b - a)), axes=1)


@dataclass(frozen=True)
class HenonLikeMap:
    f: UnimodalMap
    eps: AnalyticFn2D
    eps_bound: float = field(default=None)

    def __post_init__(self):
        if self.eps_bound is None:
            object.__setattr__(self, "eps_bound", self.eps.sup_bound())

    @classmethod
    def degenerate(cls, f: UnimodalMap) -> "HenonLikeMap":
        return cls(f, AnalyticFn2D.zero())

    @classmethod
    def thickened(cls, f: UnimodalMap, eps: Callable, degx: int | None = None,
                  degy: int = EPS_DEGY) -> "HenonLikeMap":
        degx = f.degree if degx is None else degx
        return cls(f, AnalyticFn2D.interpolate(eps, degx, degy))

    @property
    def is_degenerate(self) -> bool:
        return self.eps.is_zero()

    @cached_property
    def df(self) -> AnalyticFn1D:
        return self.f.deriv()

    @cached_property
    def eps_x(self) -> AnalyticFn2D:
        return self.eps.dx()

    @cached_property
    def eps_y(self) -> AnalyticFn2D:
        return self.eps.dy()

    def phi(self, x, y):
        return self.f(x) - self.eps(x, y)

    def phi_x(self, x, y):
        return self.df(x) - self.eps_x(x, y)

    def phi_y(self, x, y):
        return -self.eps_y(x, y)

    def apply(self, x, y, check: bool = True):
        if check:
            xa, ya = np.asarray(x), np.asarray(y)
            if np.any(np.abs(xa) > 1 + DOMAIN_SLACK) or np.any(np.abs(ya) > 1 + DOMAIN_SLACK):
                raise OutOfDomain("point outside B = [-1, 1]^2")
        return self.phi(x, y), np.asarray(x, dtype=float) * 1.0

    def __call__(self, x, y):
        return self.apply(x, y, check=False)

    def jacobian(self, x, y):
        """|det DF| = |d eps / dy|."""
        return np.abs(self.eps_y(x, y))

    def derivative(self, x, y):
        """DF as an array of shape (..., 2, 2)."""
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.zeros(x.shape + (2, 2))
        out[..., 0, 0] = self.phi_x(x, y)
        out[..., 0, 1] = self.phi_y(x, y)
        out[..., 1, 0] = 1.0
        return out

    @cached_property
    def _right_inverse(self) -> AnalyticFn1D:
        """Initial guesses for solve_x: the inverse of f on [c0 + (1 - c0)/3, 1.25]."""
        a = self.f.c0 + (1.0 - self.f.c0) / 3.0
        dom = (float(self.f(1.25)), float(self.f(a)))
        return AnalyticFn1D.interpolate(lambda u: self._bisect(u, np.zeros_like(u), 60, degenerate=True), 60, dom)

    def _bisect(self, u, v, iters, degenerate=False):
        g = self.f if degenerate else (lambda x: self.phi(x, v))
        lo = np.full(np.shape(u), self.f.c0)
        hi = np.full(np.shape(u), 1.25)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            above = g(mid) > u
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return 0.5 * (lo + hi)

    def solve_x(self, u, v, max_newton: int = 8):
        """Root x >= c0 of phi(x, v) = u (decreasing branch).

        Newton from the inverse of the unimodal part, with a bisection
        fallback for points where it does not settle.
        """
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        x = self._right_inverse(u)
        for _ in range(max_newton):
            step = (self.phi(x, v) - u) / self.phi_x(x, v)
            x = x - step
            if np.all(np.abs(step) < 1e-15):
                break
        bad = ~(np.abs(step) < 1e-13) | (x < self.f.c0)
        if np.any(bad):
            xb = self._bisect(u[bad], v[bad], 50)
            for _ in range(3):
                xb = xb - (self.phi(xb, v[bad]) - u[bad]) / self.phi_x(xb, v[bad])
            x = np.where(bad, 0.0, x)
            x[bad] = xb
        return x

    def validate(self, tol: float = 1e-10, samples: int = 41) -> dict:
        """Check eps(x, 0) = 0 and the constant sign of d eps / dy on a grid."""
        t = np.linspace(-1, 1, samples)
        X, Y = np.meshgrid(t, t, indexing="ij")
        axis = float(np.max(np.abs(self.eps(t, 0.0 * t))))
        scale = max(self.eps_bound, 1e-300)
        if self.is_degenerate:
            return {"axis_error": 0.0, "eps_y_sign": 0, "grid_max": 0.0}
        ey = self.eps_y(X, Y)
        sign = int(np.sign(ey[0, 0]))
        if axis > tol * max(scale, 1.0) and axis > tol * scale * 1e3:
            raise ValueError(f"eps(x, 0) does not vanish: {axis:.3e}")
        if sign == 0 or np.any(np.sign(ey) != sign):
            raise ValueError("d eps / dy changes sign on B")
        grid_max = float(np.max(np.abs(self.eps(X, Y))))
        if grid_max > self.eps_bound * (1 + 1e-12):
            raise ValueError("eps_bound below the sampled sup of |eps|")
        return {"axis_error": axis, "eps_y_sign": sign, "grid_max": grid_max}

    def to_json(self) -> dict:
        return {"f": self.f.to_json(), "eps": self.eps.to_json(), "eps_bound": self.eps_bound}

    @classmethod
    def from_json(cls, data: dict) -> "HenonLikeMap":
        return cls(UnimodalMap.from_json(data["f"]), AnalyticFn2D.from_json(data["eps"]), data["eps_bound"])


def iota(f: UnimodalMap) -> HenonLikeMap:
    """Embed a unimodal map as the degenerate Henon-like map (f(x), x)."""
    return HenonLikeMap.degenerate(f)


@dataclass(frozen=True)
class CoordChange:
    """Psi(X, Y) = H^{-1}(h X, h Y) from height n+1 into the coordinates of F = F_n."""

    F: HenonLikeMap
    h: Rescaling

    def __call__(self, X, Y):
        u, v = self.h(X), self.h(Y)
        return self.F.solve_x(u, v), v

    def letter(self, a: int, X, Y):
        """Psi^0 = Psi, Psi^1 = F o Psi."""
        x, y = self(X, Y)
        return (x, y) if a == 0 else self.F(x, y)

    def inverse(self, x, y):
        return self.h.inverse(self.F.phi(x, y)), self.h.inverse(y)

    def derivative_at(self, X, Y):
        """(D Psi, Psi(X, Y)) with D Psi = [[h'/phi_x, -h' phi_y/phi_x], [0, h']]."""
        x, y = self(X, Y)
        px = self.F.phi_x(x, y)
        py = self.F.phi_y(x, y)
        a = self.h.alpha
        D = np.zeros(np.shape(x) + (2, 2))
        D[..., 0, 0] = a / px
        D[..., 0, 1] = -a * py / px
        D[..., 1, 1] = a
        return D, (x, y)


class _SquareMap:
    """G = H o F^2 o H^{-1} in the straightened coordinates."""

    def __init__(self, F: HenonLikeMap):
        self.F = F

    def x_component(self, u, v):
        F = self.F
        x = F.solve_x(u, v)
        w = F.phi(u, x)
        return F.phi(w, u)

    def x_slope(self, u, v):
        """d G_x / du by the chain rule."""
        F = self.F
        x = F.solve_x(u, v)
        dx = 1.0 / F.phi_x(x, v)
        w = F.phi(u, x)
        dw = F.phi_x(u, x) + F.phi_y(u, x) * dx
        return F.phi_x(w, u) * dw + F.phi_y(w, u)

    def x_difference(self, u, v_ref, v):
        """G_x(u, v_ref) - G_x(u, v), accurate relative to the size of eps."""
        F = self.F
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        x1 = F.solve_x(u, np.full(u.shape, v_ref))
        dx = np.zeros(u.shape)
        for _ in range(3):
            x2 = x1 - dx
            num = (v_ref - v) * _segment_mean(F.eps_y, x2, x2, v, np.full(u.shape, v_ref))
            den = _slope(F.df, x2, x1) - _segment_mean(F.eps_x, x2, x1, np.full(u.shape, v_ref), np.full(u.shape, v_ref))
            dx = num / den
        x2 = x1 - dx
        w1 = F.phi(u, x1)
        dw = -dx * _segment_mean(F.eps_y, u, u, x2, x1)
        w2 = w1 - dw
        return dw * (_slope(F.df, w2, w1) - _segment_mean(F.eps_x, w2, w1, u, u))


def _slice_rescaling(F: HenonLikeMap, G: _SquareMap, tol: float = 1e-14, max_iter: int = 50,
                     gap: float = CRITICAL_GAP, grid: int = 400) -> Rescaling:
    """h with h(1) = g(c), h(-1) = g(g(c)) for the slice g(u) = G_x(u, h(0)), c its critical point.

    Renormalizability is checked on the slice itself: c lies inside
    J^0 = h(J) and g(J^0) stays in J^0 on a grid.
    """
    f = F.f
    c = f.c0
    if abs(float(f(c)) - c) <= gap:
        raise NotRenormalizable(f"critical value within {gap} of the critical point")
    gc = float(f(f(c)))
    ggc = float(f(f(gc)))
    h = Rescaling(0.5 * (gc - ggc), 0.5 * (gc + ggc))
    for _ in range(max_iter):
        if not h.alpha < 0:
            raise NotRenormalizable("slice rescaling lost its orientation")
        beta = h.beta
        c = _slice_critical_point(G, beta, c, 0.25 * h.scale)
        gc = float(G.x_component(c, beta))
        ggc = float(G.x_component(gc, beta))
        new = Rescaling(0.5 * (gc - ggc), 0.5 * (gc + ggc))
        if abs(new.alpha - h.alpha) + abs(new.beta - h.beta) < tol:
            break
        h = new
    else:
        raise NotRenormalizable("slice normalization did not settle")
    lo, hi = gc, ggc
    if not lo < c < hi:
        raise NotRenormalizable("candidate J^0 misses the critical point")
    u = np.linspace(lo, hi, grid)
    img = G.x_component(u, np.full(u.shape, new.beta))
    slack = 1e-9 * (hi - lo)
    if img.min() < lo - slack or img.max() > hi + slack:
        raise NotRenormalizable("the square map does not preserve J^0")
    return new


def _slice_critical_point(G: _SquareMap, v: float, guess: float, radius: float) -> float:
    dom = (guess - radius, guess + radius)
    d = AnalyticFn1D.interpolate(lambda u: G.x_slope(u, np.full(np.shape(u), v)), 30, dom)
    t = C.chebroots(d.coefficients)
    t = t[(np.abs(t.imag) < 1e-8) & (np.abs(t.real) < 1)].real
    if len(t) == 0:
        raise NotRenormalizable("slice of the square map has no critical point near c0")
    x = 0.5 * (dom[1] - dom[0]) * t + 0.5 * (dom[0] + dom[1])
    c = float(x[np.argmin(np.abs(x - guess))])
    # secant polish on the exact slope
    c0, d0 = c + 1e-7, float(G.x_slope(c + 1e-7, v))
    for _ in range(3):
        d1 = float(G.x_slope(c, v))
        if d1 == d0 or d1 == 0.0:
            break
        c, c0, d0 = c - d1 * (c - c0) / (d1 - d0), c, d1
    return c


def renormalize_henon(F: HenonLikeMap, degy: int = EPS_DEGY, eps_max: float = EPS_MAX,
                      degree: int | None = None, thickening: bool = True) -> tuple[HenonLikeMap, CoordChange]:
    """(R F, Psi) with R F re-expressed as (f', eps'), f'(X) = phi'(X, 0)."""
    if F.eps_bound > eps_max:
        raise ThicknessTooLarge(F.eps_bound, eps_max)
    G = _SquareMap(F)
    h = _slice_rescaling(F, G)
    degree = F.f.degree if degree is None else degree
    beta, alpha = h.beta, h.alpha

    def fnew(X):
        u = h(X)
        return (G.x_component(u, np.full(np.shape(u), beta)) - beta) / alpha

    f1 = UnimodalMap(AnalyticFn1D.interpolate(fnew, degree), F.f.p)
    if F.is_degenerate or not thickening:
        eps1 = AnalyticFn2D.zero()
    else:
        X, Y = AnalyticFn2D.grid(degree, degy)
        vals = G.x_difference(h(X), beta, h(Y)) / alpha
        eps1 = AnalyticFn2D.from_values(vals)
        if not np.all(np.isfinite(eps1.coefficients)):
            raise NotRenormalizable("thickening of the renormalization is not finite")
    return HenonLikeMap(f1, eps1), CoordChange(F, h)


@dataclass
class RenormTower:
    """F_0, ..., F_N with Psi_n carrying height n+1 into height n."""

    levels: list
    coord_changes: list
    p: int = 2
    tip_depth: int = 40
    tip_tol: float = 1e-12
    _tips: dict = field(default_factory=dict, repr=False)

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def psi(self, k: int) -> CoordChange:
        """Psi_k, reusing the deepest one beyond the computed levels."""
        if not self.coord_changes:
            raise InsufficientDepth("tower has no coordinate changes")
        return self.coord_changes[min(k, len(self.coord_changes) - 1)]

    def deep_tip(self, n: int) -> tuple[float, float]:
        """tau_n from the nest Psi_n o ... o Psi_{n+K-1}(B)."""
        t = np.linspace(-1, 1, 5)
        bx = np.concatenate([t, np.ones(5), t, -np.ones(5), [0.0]])
        by = np.concatenate([-np.ones(5), t, np.ones(5), t, [0.0]])
        for K in range(1, self.tip_depth + 1):
            x, y = bx, by
            for k in reversed(range(n, n + K)):
                x, y = self.psi(k)(x, y)
            diam = max(np.ptp(x), np.ptp(y))
            if diam < self.tip_tol:
                return float(x[-1]), float(y[-1])
        raise NotContracted(f"nest diameter {diam:.2e} above {self.tip_tol:.1e} after {self.tip_depth} levels")

    def tip(self, n: int) -> tuple[float, float]:
        """tau_n, made consistent across heights by tau_k = Psi_k(tau_{k+1})."""
        if n in self._tips:
            return self._tips[n]
        top = max(self.depth, n)
        if top not in self._tips:
            self._tips[top] = self.deep_tip(top)
        for k in range(top - 1, n - 1, -1):
            if k not in self._tips:
                x, y = self.psi(k)(*self._tips[k + 1])
                self._tips[k] = (float(x), float(y))
        return self._tips[n]

    def scope(self, m: int, n: int, X, Y):
        """Psi_{m,n} = Psi_m o ... o Psi_{n-1}: height n into height m."""
        if not 0 <= m <= n:
            raise ValueError("need 0 <= m <= n")
        x, y = np.asarray(X, float), np.asarray(Y, float)
        for k in range(n - 1, m - 1, -1):
            x, y = self.psi(k)(x, y)
        return x, y

    def scope_derivative(self, m: int, n: int, X, Y):
        x, y = np.asarray(X, float), np.asarray(Y, float)
        D = np.broadcast_to(np.eye(2), np.shape(x) + (2, 2)).copy()
        for k in range(n - 1, m - 1, -1):
            Dk, (x, y) = self.psi(k).derivative_at(x, y)
            D = Dk @ D
        return D, (x, y)

    def word_map(self, word, X, Y, height: int = 0):
        """Psi^w = Psi^{w_0}_height o Psi^{w_1}_{height+1} o ..."""
        x, y = np.asarray(X, float), np.asarray(Y, float)
        letters = list(word)
        for i in range(len(letters) - 1, -1, -1):
            x, y = self.psi(height + i).letter(letters[i], x, y)
        return x, y

    def level(self, n: int) -> HenonLikeMap:
        return self.levels[min(n, self.depth)]

    def shifted(self, n: int) -> "RenormTower":
        return RenormTower(self.levels[n:], self.coord_changes[n:], self.p, self.tip_depth, self.tip_tol)

    def to_json(self) -> dict:
        return {"p": self.p,
                "levels": [F.to_json() for F in self.levels],
                "rescalings": [[c.h.alpha, c.h.beta] for c in self.coord_changes],
                "tips": {str(k): list(v) for k, v in sorted(self._tips.items())}}


def build_tower(F: HenonLikeMap, N: int, **opts) -> RenormTower:
    levels, changes = [F], []
    for n in range(N):
        try:
            Fn, psi = renormalize_henon(levels[-1], **opts)
        except (NotRenormalizable, ThicknessTooLarge) as exc:
            raise DepthUnreachable(n, str(exc)) from exc
        levels.append(Fn)
        changes.append(psi)
    return RenormTower(levels, changes, F.f.p)


def average_jacobian(tower: RenormTower, iters: int = 4096, level: int = 0) -> LogMagnitude:
    """b(F_level) as the Birkhoff average of log|Jac F| along the orbit of the tip."""
    if iters < 1000:
        raise ValueError("iters must be at least 1000")
    F = tower.level(level)
    if F.is_degenerate:
        raise JacobianVanished("thickening is identically zero")
    x, y = tower.tip(level)
    total = 0.0
    for _ in range(iters):
        jac = float(F.jacobian(x, y))
        if jac == 0.0 or not np.isfinite(jac):
            raise JacobianVanished(f"Jacobian underflows at {(x, y)}")
        total += np.log(jac)
        x, y = F(x, y)
        x, y = float(x), float(y)
    return LogMagnitude(total / iters, 1)


def derivative_bounds_report(tower: RenormTower, n: int, b: LogMagnitude | None = None,
                             samples: int = 41) -> dict:
    """Grid extrema of |d phi_n/dx| and |d phi_n/dy|, with |d phi_n/dy| / b^(p^n) in log form."""
    F = tower.level(n)
    t = np.linspace(-1, 1, samples)
    X, Y = np.meshgrid(t, t, indexing="ij")
    px = np.abs(F.phi_x(X, Y))
    py = np.abs(F.phi_y(X, Y))
    out = {"level": n, "max_phi_x": float(px.max()),
           "min_phi_y": float(py.min()), "max_phi_y": float(py.max())}
    if b is not None and py.min() > 0:
        scale = b ** (tower.p ** n)
        out["log_ratio_min"] = float(np.log(py.min()) - scale.log_value)
        out["log_ratio_max"] = float(np.log(py.max()) - scale.log_value)
    return out


# --- scope maps at the tip -------------------------------------------------

@dataclass
class ScopeDecomposition:
    """Psi_{m,n}(z) = tau_m + D (id + R)(z - tau_n) with D = sigma [[s, t], [0, 1]]."""

    m: int
    n: int
    tip_m: tuple
    tip_n: tuple
    D: np.ndarray
    sigma_mn: float
    s_mn: float
    t_mn: float
    tower: RenormTower = field(repr=False)
    remainder: AnalyticFn2D | None = None
    c_m: float = 0.0

    def r(self, zx, zy):
        """Remainder r(zeta) evaluated through the composition itself."""
        zx, zy = np.asarray(zx, float), np.asarray(zy, float)
        x, y = self.tower.scope(self.m, self.n, self.tip_n[0] + zx, self.tip_n[1] + zy)
        dx, dy = x - self.tip_m[0], y - self.tip_m[1]
        # first row of D^{-1} applied to (dx, dy)
        return (dx - self.t_mn * dy) / (self.sigma_mn * self.s_mn) - zx

    def r_gradient(self, zx, zy):
        D, _ = self.tower.scope_derivative(self.m, self.n, self.tip_n[0] + np.asarray(zx), self.tip_n[1] + np.asarray(zy))
        gx = (D[..., 0, 0] - self.t_mn * D[..., 1, 0]) / (self.sigma_mn * self.s_mn) - 1.0
        gy = (D[..., 0, 1] - self.t_mn * D[..., 1, 1]) / (self.sigma_mn * self.s_mn)
        return gx, gy

    def recompose(self, X, Y, fitted: bool = False):
        zx, zy = np.asarray(X) - self.tip_n[0], np.asarray(Y) - self.tip_n[1]
        r = self.remainder(zx, zy) if fitted else self.r(zx, zy)
        x = self.tip_m[0] + self.sigma_mn * (self.s_mn * (zx + r) + self.t_mn * zy)
        y = self.tip_m[1] + self.sigma_mn * zy
        return x, y

    def summary(self) -> dict:
        return {"m": self.m, "n": self.n, "sigma": self.sigma_mn, "s": self.s_mn, "t": self.t_mn,
                "tip_m": list(self.tip_m), "tip_n": list(self.tip_n), "c_m": self.c_m}


def scope_decomposition(tower: RenormTower, m: int, n: int, fit_degree: tuple[int, int] = (24, 12)) -> ScopeDecomposition:
    if not 0 <= m < n:
        raise ValueError("need 0 <= m < n")
    tip_n = tower.tip(n)
    tip_m = tower.tip(m)
    D, _ = tower.scope_derivative(m, n, tip_n[0], tip_n[1])
    sigma = float(D[1, 1])
    s = float(D[0, 0] / sigma)
    t = float(D[0, 1] / sigma)
    dec = ScopeDecomposition(m, n, tip_m, tip_n, D, sigma, s, t, tower)
    xdom = (-1.0 - tip_n[0], 1.0 - tip_n[0])
    ydom = (-1.0 - tip_n[1], 1.0 - tip_n[1])
    raw = AnalyticFn2D.interpolate(dec.r, fit_degree[0], fit_degree[1], xdom, ydom)
    # r and Dr vanish at the tip by definition; remove the affine part the fit picks up from rounding
    r0, gx, gy = float(raw(0.0, 0.0)), float(raw.dx()(0.0, 0.0)), float(raw.dy()(0.0, 0.0))
    dec.remainder = AnalyticFn2D.interpolate(lambda x, y: raw(x, y) - r0 - gx * x - gy * y,
                                             fit_degree[0], fit_degree[1], xdom, ydom)
    return dec


def semigroup_error(tower: RenormTower, m: int, n: int, k: int, samples: int = 11) -> float:
    """sup |Psi_{m,k} - Psi_{m,n} o Psi_{n,k}| on a grid."""
    t = np.linspace(-1, 1, samples)
    X, Y = np.meshgrid(t, t, indexing="ij")
    direct = tower.scope(m, k, X, Y)
    chained = tower.scope(m, n, *tower.scope(n, k, X, Y))
    return float(max(np.max(np.abs(direct[0] - chained[0])), np.max(np.abs(direct[1] - chained[1]))))


# --- tuning onto the renormalization stable manifold ----------------------

DELTA = 4.6692016


def _bent(fstar: UnimodalMap, t: float) -> UnimodalMap:
    """f_* + t (x - c)^2 (1 - x): c stays critical, f(c) = 1 and f(1) = -1 are untouched, f(-1) moves."""
    c = fstar.c0
    return UnimodalMap(AnalyticFn1D.interpolate(lambda x: fstar(x) + t * (x - c) ** 2 * (1 - x), fstar.degree))


def _drift(F: HenonLikeMap, fstar: UnimodalMap, k: int, negligible: float = 1e-15) -> float | None:
    """f_k(-1) - f_*(-1) along the tower of F, or None if a level fails.

    Once the thickening drops below ``negligible`` it cannot move f_k at double
    precision and the cheaper unimodal operator is used.
    """
    x0 = float(fstar(-1.0))
    G = F
    with np.errstate(all="ignore"):
        try:
            for level in range(k):
                if G.eps_bound < negligible:
                    G = iota(renormalize_unimodal(G.f))
                else:
                    G, _ = renormalize_henon(G, thickening=level < k - 1)
        except (NotRenormalizable, ThicknessTooLarge, ValueError, np.linalg.LinAlgError):
            return None
        val = float(G.f(-1.0)) - x0
    return val if np.isfinite(val) else None


def tune_thickening(fstar: UnimodalMap, eps: Callable, depth: int, degy: int = EPS_DEGY,
                    kappa_tol: float = 1e-3, max_steps: int = 12) -> tuple[HenonLikeMap, float]:
    """Bend f_* by t (see ``_bent``) so that (f_t(x) - eps(x, y), x) renormalizes ``depth`` times.

    The drift kappa_k(t) = f_k(-1) - f_*(-1) grows like DELTA^k (t - t_*); a
    secant step per level drives it to zero, the slope seeded from the
    previous level times DELTA.  The starting bend comes from continuation
    in the size of the thickening.
    """
    make = lambda t, s=1.0: HenonLikeMap.thickened(
        _bent(fstar, t), (lambda x, y: s * eps(x, y)), fstar.degree, degy)
    t, slope = _continue_shift(make, fstar)
    for k in range(1, depth + 1):
        kap = _drift(make(t), fstar, k)
        if kap is None:
            raise DepthUnreachable(k, "tuning lost the tower")
        if k > 1:
            slope *= DELTA
        t, kap, slope = _secant(lambda t: _drift(make(t), fstar, k), t, kap, slope, kappa_tol, max_steps)
        if abs(kap) >= kappa_tol:
            raise DepthUnreachable(k, f"drift {kap:.2e} above {kappa_tol:.1e}")
    return make(t), t


def _secant(func, t, val, slope, tol, max_steps):
    for _ in range(max_steps):
        if abs(val) < tol:
            break
        step = -val / slope
        new = func(t + step)
        while new is None and abs(step) > 1e-18:
            step *= 0.5
            new = func(t + step)
        if new is None:
            break
        if new != val:
            slope = (new - val) / step
        t, val = t + step, new
    return t, val, slope


def _continue_shift(make, fstar: UnimodalMap, steps: int = 4):
    """Zero of the first-level drift, followed from eps = 0 (where t = 0) up to the full thickening."""
    t, slope, s_done = 0.0, None, 0.0
    history = [(0.0, 0.0)]
    ds = 1.0 / steps
    while s_done < 1.0:
        s = min(1.0, s_done + ds)
        if len(history) >= 2:
            (s0, t0), (s1, t1) = history[-2:]
            guess = t1 + (t1 - t0) * (s - s1) / (s1 - s0)
        else:
            guess = t
        func = lambda t: _drift(make(t, s), fstar, 1)
        val = func(guess)
        if val is None:
            ds *= 0.5
            if ds < 1e-3:
                raise DepthUnreachable(1, f"continuation lost the first renormalization at scale {s:.3f}")
            continue
        if slope is None:
            h = 1e-6
            slope = (func(guess + h) - val) / h
        t_new, val, slope_new = _secant(func, guess, val, slope, 1e-10 if s == 1.0 else 1e-6, 20)
        if abs(val) > 1e-6:
            ds *= 0.5
            continue
        t, slope, s_done = t_new, slope_new, s
        history.append((s, t))
    return t, slope


# --- thickening shapes and tuned towers ---------------------------------------

SHAPES = {
    "y": lambda x, y: y,
    "y(1+x/10)": lambda x, y: y * (1 + x / 10),
    "y*exp(x/20)": lambda x, y: y * np.exp(x / 20),
}


def _tuning_cache() -> Path | None:
    cache_dir = os.environ.get("HENONLAB_CACHE")
    return Path(cache_dir) / "tuned_bends.json" if cache_dir else None


def tuned_map(fstar: UnimodalMap, b: float, shape: str = "y", tune_depth: int = 12,
              degy: int = EPS_DEGY) -> HenonLikeMap:
    """(f_t(x) - b eta(x, y), x) with the bend t tuned onto the stable manifold.

    Tuned bends are memoized in $HENONLAB_CACHE/tuned_bends.json when set.
    """
    if shape not in SHAPES:
        raise ValueError(f"unknown thickening shape {shape!r}; choose from {sorted(SHAPES)}")
    eta = SHAPES[shape]
    eps = lambda x, y: b * eta(x, y)
    key = f"{shape}|{b!r}|{tune_depth}|{fstar.degree}|{degy}"
    path = _tuning_cache()
    table = json.loads(path.read_text()) if path is not None and path.exists() else {}
    if key in table:
        return HenonLikeMap.thickened(_bent(fstar, table[key]), eps, fstar.degree, degy)
    F, t = tune_thickening(fstar, eps, tune_depth, degy)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        table = json.loads(path.read_text()) if path.exists() else {}
        table[key] = t
        path.write_text(json.dumps(table, sort_keys=True, indent=1))
    return F


def tuned_tower(fstar: UnimodalMap, b: float, depth: int, shape: str = "y", tune_depth: int = 12) -> RenormTower:
    return build_tower(tuned_map(fstar, b, shape, tune_depth), depth)
