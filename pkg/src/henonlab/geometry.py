"""Pieces, boxings and bounded-geometry metrics.

A piece is stored as samples of its boundary curve.  For a canonical boxing
these are images of the boundary of B = [-1, 1]^2 under Psi^w.  Distances and
diameters are taken over the samples, so ``dist`` over-estimates and ``diam``
under-estimates the true values; ``geometry_report`` can refine the sampling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from shapely.geometry import Polygon
from shapely.validation import make_valid

from .combinatorics import Word, all_words, successor
from .errors import EmptyIntersection

DEFAULT_SAMPLES = 256


def square_boundary(samples: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Counter-clockwise samples of the boundary of [-1, 1]^2, corners included."""
    k = max(samples // 4, 1)
    t = np.linspace(-1.0, 1.0, k + 1)[:-1]
    one = np.ones(k)
    x = np.concatenate([t, one, -t, -one])
    y = np.concatenate([-one, t, one, -t])
    return np.column_stack([x, y])


@dataclass(frozen=True)
class Piece:
    word: Word
    height: int
    boundary: np.ndarray = field(repr=False)

    @property
    def bounding_box(self) -> tuple[float, float, float, float]:
        lo, hi = self.boundary.min(axis=0), self.boundary.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @property
    def x_extent(self) -> tuple[float, float]:
        b = self.bounding_box
        return b[0], b[2]

    @property
    def y_extent(self) -> tuple[float, float]:
        b = self.bounding_box
        return b[1], b[3]

    def geometry(self):
        """Shapely view of the piece; collapsed pieces come back as curves."""
        return make_valid(Polygon(self.boundary))

    def diam(self) -> float:
        return float(pdist(self.boundary).max())

    def dist(self, other: "Piece") -> float:
        d, _ = cKDTree(other.boundary).query(self.boundary)
        return float(d.min())

    def scaled(self, factor: float) -> "Piece":
        c = self.boundary.mean(axis=0)
        return Piece(self.word, self.height, c + factor * (self.boundary - c))


def horizontal_overlap(a: Piece, b: Piece) -> bool:
    """True iff some vertical line meets both pieces (closed x-extents)."""
    a0, a1 = a.x_extent
    b0, b1 = b.x_extent
    return a0 <= b1 and b0 <= a1


def vertical_overlap(a: Piece, b: Piece) -> bool:
    a0, a1 = a.y_extent
    b0, b1 = b.y_extent
    return a0 <= b1 and b0 <= a1


@dataclass
class Boxing:
    pieces: dict
    depth: int
    kind: str = "custom"
    tower: object = field(default=None, repr=False)
    height: int = 0
    p: int = 2
    axioms: dict | None = None

    def __getitem__(self, word: Word) -> Piece:
        return self.pieces[word]

    def words(self, length: int) -> list[Word]:
        return [w for w in self.pieces if len(w) == length]

    def resample(self, samples: int) -> "Boxing":
        if self.tower is None:
            raise ValueError("only canonical boxings can be resampled")
        return canonical_boxing(self.tower, self.depth, samples, self.height, check=False)


def canonical_pieces(tower, words, samples: int = DEFAULT_SAMPLES, height: int = 0) -> dict:
    edge = square_boundary(samples)
    out = {}
    for w in words:
        x, y = tower.word_map(w, edge[:, 0], edge[:, 1], height)
        out[w] = Piece(w, height, np.column_stack([x, y]))
    return out


def canonical_boxing(tower, depth: int, samples: int = DEFAULT_SAMPLES, height: int = 0,
                     check: bool = True, tol: float = 1e-8) -> Boxing:
    """B^w = Psi^w(B) for every word of length 1..depth, seen from ``height``."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    words = [w for L in range(1, depth + 1) for w in all_words(L, tower.p)]
    box = Boxing(canonical_pieces(tower, words, samples, height), depth, "canonical", tower, height, tower.p)
    if check:
        box.axioms = boxing_axioms(box, tol=tol)
    return box


# --- axioms -----------------------------------------------------------------

def cantor_samples(tower, height: int, count: int = 16) -> np.ndarray:
    """Points of the renormalization Cantor set at ``height``: the orbit of its tip."""
    F = tower.level(height)
    x, y = tower.tip(height)
    pts = []
    for _ in range(count):
        pts.append((x, y))
        x, y = (float(v) for v in F(x, y))
    return np.array(pts)


def _outside_square(x, y) -> float:
    return float(max(np.max(np.abs(x)), np.max(np.abs(y))) - 1.0)


def dynamics_residual(tower, word: Word, height: int = 0, count: int = 16) -> tuple[float, float]:
    """Check F(C^w) in B^{1+w} through witnesses.

    For c in the Cantor set at depth |w| below, F(Psi^w(c)) = Psi^{1+w}(c')
    with c' = c, except for the all-top word where the carry wraps around and
    c' = F_L(c).  Returns (sup |F(Psi^w c) - Psi^{1+w} c'|, how far c' leaves B).
    """
    L = len(word)
    c = cantor_samples(tower, height + L, count)
    nxt = successor(word, wrap=True)
    if all(a == word.p - 1 for a in word):
        cx, cy = tower.level(height + L)(c[:, 0], c[:, 1])
    else:
        cx, cy = c[:, 0], c[:, 1]
    x, y = tower.word_map(word, c[:, 0], c[:, 1], height)
    lhs = tower.level(height)(x, y)
    rhs = tower.word_map(nxt, cx, cy, height)
    err = float(np.max(np.hypot(lhs[0] - rhs[0], lhs[1] - rhs[1])))
    return err, max(_outside_square(cx, cy), 0.0)


def boxing_axioms(box: Boxing, tol: float = 1e-8, count: int = 16) -> dict:
    """Sampled checks of (B1)-(B4) for a canonical boxing; each entry is a worst violation."""
    tower, h = box.tower, box.height
    b1 = 0.0
    for w in box.pieces:
        err, leak = dynamics_residual(tower, w, h, count)
        b1 = max(b1, err, leak)
    b2 = 0.0
    for L in range(1, box.depth + 1):
        ws = box.words(L)
        geoms = [box[w].geometry() for w in ws]
        for i in range(len(ws)):
            for j in range(i + 1, len(ws)):
                if geoms[i].intersects(geoms[j]):
                    b2 = max(b2, 1.0)
    # children sit inside parents iff Psi^a_k(B) stays in B at every level used
    edge = square_boundary(64)
    b3 = 0.0
    for k in range(h, h + box.depth):
        for a in range(box.p):
            x, y = tower.psi(k).letter(a, edge[:, 0], edge[:, 1])
            b3 = max(b3, _outside_square(x, y))
    b4 = 0.0
    for L in range(1, box.depth + 1):
        b4 = max(b4, _outside_square(*cantor_samples(tower, h + L, count).T))
    report = {"B1": b1, "B2": b2, "B3": max(b3, 0.0), "B4": max(b4, 0.0)}
    report["ok"] = all(report[k] <= tol for k in ("B1", "B2", "B3", "B4"))
    return report


# --- metrics ----------------------------------------------------------------

@dataclass
class GeometryReport:
    siblings: list      # rows: word, letter pair, diam, dist, ratio
    children: list      # rows: word, letter, diam ratio, y-extent ratio
    by_depth: dict      # depth -> extrema of the sibling and child ratios
    samples: int = DEFAULT_SAMPLES

    def rows(self) -> list[dict]:
        return self.siblings


def _metrics(box: Boxing) -> GeometryReport:
    siblings, children, by_depth = [], [], {}
    root = Word((), next(iter(box.pieces)).alphabet)
    parents = [root] + [w for w in box.pieces if len(w) < box.depth]
    for w in parents:
        kids = [w.append(a) for a in range(box.p)]
        L = len(w) + 1
        stats = by_depth.setdefault(L, {"min_ratio": np.inf, "max_ratio": 0.0,
                                        "min_child": np.inf, "max_child": 0.0})
        diams = {k: box[k].diam() for k in kids}
        for i, k in enumerate(kids):
            for kt in kids[i + 1:]:
                d = box[k].dist(box[kt])
                for a, bb in ((k, kt), (kt, k)):
                    ratio = diams[a] / d if d > 0 else np.inf
                    siblings.append({"word": str(a), "sibling": str(bb), "diam": diams[a],
                                     "dist": d, "ratio": ratio,
                                     "h_overlap": horizontal_overlap(box[a], box[bb])})
                    stats["min_ratio"] = min(stats["min_ratio"], ratio)
                    stats["max_ratio"] = max(stats["max_ratio"], ratio)
            if len(w):
                parent = box[w]
                py = np.ptp(parent.boundary[:, 1])
                child = {"word": str(k), "diam_ratio": diams[k] / parent.diam(),
                         "y_ratio": np.ptp(box[k].boundary[:, 1]) / py if py > 0 else np.nan}
                children.append(child)
                stats["min_child"] = min(stats["min_child"], child["diam_ratio"])
                stats["max_child"] = max(stats["max_child"], child["diam_ratio"])
    samples = len(next(iter(box.pieces.values())).boundary)
    return GeometryReport(siblings, children, by_depth, samples)


def geometry_report(box: Boxing, refine: bool = False, rel_change: float = 0.01,
                    max_samples: int = 4096) -> GeometryReport:
    """Sibling diam/dist ratios and child/parent diameter ratios for every housed word.

    With ``refine`` a canonical boxing is resampled at twice the density until
    no ratio moves by more than ``rel_change``.
    """
    if box.depth < 2:
        raise ValueError("geometry report needs depth >= 2")
    rep = _metrics(box)
    samples = rep.samples
    while refine and samples * 2 <= max_samples:
        samples *= 2
        new = _metrics(box.resample(samples))
        old_r = np.array([r["ratio"] for r in rep.siblings])
        new_r = np.array([r["ratio"] for r in new.siblings])
        rep = new
        if np.all(np.abs(new_r / old_r - 1) < rel_change):
            break
    return rep


def extent_apriori(box: Boxing) -> tuple[float, float, float]:
    """(L, k0, k1) of the y-extents, the planar counterpart of the 1-D a priori triple."""
    size = lambda w: np.ptp(box[w].boundary[:, 1])
    L, k0, k1 = 1.0, 1.0, 0.0
    for w in box.pieces:
        if len(w) >= box.depth:
            continue
        kids = [size(w.append(a)) for a in range(box.p)]
        for i, ch in enumerate(kids):
            ratio = ch / size(w)
            k0, k1 = min(k0, ratio), max(k1, ratio)
            L = max([L] + [ch / o for j, o in enumerate(kids) if j != i])
    return L, k0, k1


# --- trimming to the canonical boxing ----------------------------------------

def _boundary_of(geom) -> np.ndarray:
    if geom.geom_type == "Polygon":
        return np.asarray(geom.exterior.coords)[:-1]
    if geom.geom_type in ("MultiPolygon", "GeometryCollection"):
        parts = [g for g in geom.geoms if not g.is_empty]
        big = max(parts, key=lambda g: (g.area, g.length))
        return _boundary_of(big)
    return np.asarray(geom.coords)


def intersect_with_canonical(box: Boxing, canonical: Boxing) -> Boxing:
    """B-hat^{w a} = B^{w a} intersected with the canonical parent B_can^w.

    Depth-one pieces are clipped to the square itself.
    """
    if box.depth != canonical.depth:
        raise ValueError("boxings must have the same depth")
    square = Polygon(square_boundary(4))
    out = {}
    for w, piece in box.pieces.items():
        parent = square if len(w) == 1 else canonical[w.prefix(len(w) - 1)].geometry()
        cut = piece.geometry().intersection(parent)
        if cut.is_empty:
            raise EmptyIntersection(w)
        out[w] = Piece(w, piece.height, _boundary_of(cut))
    return Boxing(out, box.depth, "custom", box.tower, box.height, box.p)


def inflated(box: Boxing, factor: float = 1.2) -> Boxing:
    return Boxing({w: pc.scaled(factor) for w, pc in box.pieces.items()},
                  box.depth, "custom", box.tower, box.height, box.p)


# --- a self-similar toy -------------------------------------------------------

def cantor_toy_boxing(depth: int, ratio: float = 1 / 3, samples: int = 64) -> Boxing:
    """Squares over the middle-third layout: piece w is I^w x I^w."""
    edge = (square_boundary(samples) + 1) / 2
    pieces = {}
    for L in range(1, depth + 1):
        for w in all_words(L, 2):
            lo, size = 0.0, 1.0
            for a in w.letters:
                lo += a * (1 - ratio) * size
                size *= ratio
            pieces[w] = Piece(w, 0, lo + size * edge)
    return Boxing(pieces, depth, "custom", None, 0, 2)
