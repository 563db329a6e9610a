"""Truncated Chebyshev representations of real-analytic maps on an interval or a rectangle."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C

# Gauss-Legendre nodes on [0, 1]; exact for polynomial integrands of degree < 2*_GL_N.
_GL_N = 32
_gl_x, _gl_w = np.polynomial.legendre.leggauss(_GL_N)
GL_NODES = 0.5 * (_gl_x + 1.0)
GL_WEIGHTS = 0.5 * _gl_w


def cheb_nodes(n: int) -> np.ndarray:
    """Chebyshev points of the first kind on [-1, 1], increasing."""
    k = np.arange(n)
    return np.sort(np.cos(np.pi * (k + 0.5) / n))


def _to_ref(x, domain):
    a, b = domain
    return (2.0 * np.asarray(x, dtype=float) - (a + b)) / (b - a)


def _from_ref(t, domain):
    a, b = domain
    return 0.5 * (b - a) * np.asarray(t) + 0.5 * (a + b)


@dataclass(frozen=True)
class AnalyticFn1D:
    """f(x) = sum_k c_k T_k(t), with t the affine image of x in [-1, 1].

    Evaluation slightly outside the domain uses the polynomial extension.
    """

    coefficients: np.ndarray
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.asarray(self.coefficients, dtype=float))
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @classmethod
    def interpolate(cls, func: Callable, degree: int, domain=(-1.0, 1.0)) -> "AnalyticFn1D":
        t = cheb_nodes(degree + 1)
        vals = np.asarray(func(_from_ref(t, domain)), dtype=float)
        coef = np.linalg.solve(C.chebvander(t, degree), vals)
        return cls(coef, domain)

    def __call__(self, x):
        return C.chebval(_to_ref(x, self.domain), self.coefficients)

    def deriv(self, m: int = 1) -> "AnalyticFn1D":
        a, b = self.domain
        coef = C.chebder(self.coefficients, m) * (2.0 / (b - a)) ** m
        if len(coef) == 0:
            coef = np.zeros(1)
        return AnalyticFn1D(coef, self.domain)

    def tail(self, k: int = 3) -> float:
        """Largest magnitude among the last k coefficients (truncation proxy)."""
        return float(np.max(np.abs(self.coefficients[-k:])))

    def diff(self, x0, x1):
        """f(x1) - f(x0) computed as (x1 - x0) * mean of f' on the segment."""
        x0 = np.asarray(x0, dtype=float)
        dx = np.asarray(x1, dtype=float) - x0
        d = self.deriv()
        acc = np.zeros(np.broadcast(x0, dx).shape)
        for s, w in zip(GL_NODES, GL_WEIGHTS):
            acc = acc + w * d(x0 + s * dx)
        return dx * acc

    def to_json(self) -> dict:
        return {"basis": "chebyshev", "domain": list(self.domain),
                "coefficients": [float(c) for c in self.coefficients]}

    @classmethod
    def from_json(cls, data: dict) -> "AnalyticFn1D":
        if data.get("basis", "chebyshev") != "chebyshev":
            raise ValueError(f"unsupported basis {data['basis']!r}")
        return cls(np.array(data["coefficients"], dtype=float), tuple(data["domain"]))


@dataclass(frozen=True)
class AnalyticFn2D:
    """g(x, y) = sum_ij c_ij T_i(s) T_j(t) on a rectangle."""

    coefficients: np.ndarray
    xdomain: tuple[float, float] = (-1.0, 1.0)
    ydomain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "coefficients", np.atleast_2d(np.asarray(self.coefficients, dtype=float)))
        object.__setattr__(self, "xdomain", tuple(map(float, self.xdomain)))
        object.__setattr__(self, "ydomain", tuple(map(float, self.ydomain)))

    @property
    def degrees(self) -> tuple[int, int]:
        nx, ny = self.coefficients.shape
        return nx - 1, ny - 1

    @classmethod
    def zero(cls, xdomain=(-1.0, 1.0), ydomain=(-1.0, 1.0)) -> "AnalyticFn2D":
        return cls(np.zeros((1, 1)), xdomain, ydomain)

    @classmethod
    def interpolate(cls, func: Callable, degx: int, degy: int,
                    xdomain=(-1.0, 1.0), ydomain=(-1.0, 1.0)) -> "AnalyticFn2D":
        s = cheb_nodes(degx + 1)
        t = cheb_nodes(degy + 1)
        X, Y = np.meshgrid(_from_ref(s, xdomain), _from_ref(t, ydomain), indexing="ij")
        vals = np.asarray(func(X, Y), dtype=float)
        return cls.from_values(vals, xdomain, ydomain)

    @classmethod
    def from_values(cls, vals, xdomain=(-1.0, 1.0), ydomain=(-1.0, 1.0)) -> "AnalyticFn2D":
        """Coefficients from values on the tensor grid of first-kind Chebyshev nodes."""
        nx, ny = vals.shape
        Vx = C.chebvander(cheb_nodes(nx), nx - 1)
        Vy = C.chebvander(cheb_nodes(ny), ny - 1)
        coef = np.linalg.solve(Vx, vals)
        coef = np.linalg.solve(Vy, coef.T).T
        return cls(coef, xdomain, ydomain)

    @classmethod
    def grid(cls, degx: int, degy: int, xdomain=(-1.0, 1.0), ydomain=(-1.0, 1.0)):
        s = cheb_nodes(degx + 1)
        t = cheb_nodes(degy + 1)
        return np.meshgrid(_from_ref(s, xdomain), _from_ref(t, ydomain), indexing="ij")

    def __call__(self, x, y):
        s, t = np.broadcast_arrays(_to_ref(x, self.xdomain), _to_ref(y, self.ydomain))
        nx, ny = self.coefficients.shape
        # Vandermonde products beat nested Clenshaw for the small degrees used here.
        Vs = C.chebvander(s.ravel(), nx - 1)
        Vt = C.chebvander(t.ravel(), ny - 1)
        return np.einsum("ij,ij->i", Vs @ self.coefficients, Vt).reshape(s.shape)

    def dx(self) -> "AnalyticFn2D":
        a, b = self.xdomain
        if self.coefficients.shape[0] == 1:
            return AnalyticFn2D(np.zeros((1, self.coefficients.shape[1])), self.xdomain, self.ydomain)
        coef = C.chebder(self.coefficients, 1, scl=2.0 / (b - a), axis=0)
        return AnalyticFn2D(coef, self.xdomain, self.ydomain)

    def dy(self) -> "AnalyticFn2D":
        a, b = self.ydomain
        if self.coefficients.shape[1] == 1:
            return AnalyticFn2D(np.zeros((self.coefficients.shape[0], 1)), self.xdomain, self.ydomain)
        coef = C.chebder(self.coefficients, 1, scl=2.0 / (b - a), axis=1)
        return AnalyticFn2D(coef, self.xdomain, self.ydomain)

    def is_zero(self) -> bool:
        return not np.any(self.coefficients)

    def sup_bound(self) -> float:
        """Sum of |c_ij|: a rigorous bound for sup |g| on the rectangle."""
        return float(np.sum(np.abs(self.coefficients)))

    def to_json(self) -> dict:
        return {"basis": "chebyshev2d", "xdomain": list(self.xdomain), "ydomain": list(self.ydomain),
                "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "AnalyticFn2D":
        return cls(np.array(data["coefficients"], dtype=float), tuple(data["xdomain"]), tuple(data["ydomain"]))
