import numpy as np
import pytest

from henonlab.combinatorics import Word
from henonlab.errors import EmptyIntersection
from henonlab.geometry import (Boxing, Piece, canonical_boxing, cantor_toy_boxing, extent_apriori,
                               geometry_report, horizontal_overlap, inflated, intersect_with_canonical,
                               square_boundary, vertical_overlap)
from henonlab.unimodal import apriori_report, cylinders_1d


def rect(x0, x1, y0, y1, word=Word.of(0)):
    e = (square_boundary(16) + 1) / 2
    return Piece(word, 0, np.column_stack([x0 + (x1 - x0) * e[:, 0], y0 + (y1 - y0) * e[:, 1]]))


def test_horizontal_overlap_cases():
    a = rect(0, 1, 0, 1)
    assert horizontal_overlap(a, a)
    assert not horizontal_overlap(a, rect(2, 3, 0, 1))
    assert horizontal_overlap(a, rect(1, 2, 5, 6))
    b = rect(0.5, 0.7, 3, 4)
    assert horizontal_overlap(a, b) == horizontal_overlap(b, a)
    assert not vertical_overlap(a, b)


def test_depth_one_boxing(thick_tower):
    box = canonical_boxing(thick_tower, 1)
    assert len(box.pieces) == 2
    assert box.axioms["ok"]
    assert box[Word.of(0)].dist(box[Word.of(1)]) > 0


def test_canonical_axioms_thick(thick_tower):
    box = canonical_boxing(thick_tower, 4)
    assert len(box.words(4)) == 16
    assert box.axioms["ok"], box.axioms


def test_degenerate_pieces_follow_cylinders(fstar, fp_tower):
    box = canonical_boxing(fp_tower, 4, check=False)
    cyl = cylinders_1d(fstar, 4)
    for w, piece in box.pieces.items():
        lo, hi = cyl[w]
        assert piece.y_extent == pytest.approx((lo, hi), abs=1e-6)


def test_self_similar_toy():
    rep = geometry_report(cantor_toy_boxing(4))
    ratios = {round(r["ratio"], 12) for r in rep.siblings}
    assert len(ratios) == 1
    assert {round(v["min_child"], 12) for k, v in rep.by_depth.items() if k > 1} == {round(1 / 3, 12)}


def test_report_ranges(thick_tower):
    box = canonical_boxing(thick_tower, 3, check=False)
    rep = geometry_report(box)
    assert all(r["ratio"] >= 0 and r["dist"] >= 0 for r in rep.siblings)
    assert all(c["diam_ratio"] <= 1 + 1e-12 for c in rep.children)
    for r in rep.siblings:
        if r["h_overlap"]:
            a = box[Word.parse(r["word"])]
            b = box[Word.parse(r["sibling"])]
            assert max(a.x_extent[0], b.x_extent[0]) <= min(a.x_extent[1], b.x_extent[1])


def test_degenerate_extents_match_1d(fstar, fp_tower):
    box = canonical_boxing(fp_tower, 5, check=False)
    assert extent_apriori(box) == pytest.approx(apriori_report(cylinders_1d(fstar, 5)), abs=1e-6)


def test_refinement_converges(thick_tower):
    box = canonical_boxing(thick_tower, 2, samples=64, check=False)
    rep = geometry_report(box, refine=True)
    assert rep.samples >= 128


def test_intersections():
    toy = cantor_toy_boxing(3)
    same = intersect_with_canonical(toy, toy)
    for w in toy.pieces:
        assert same[w].diam() == pytest.approx(toy[w].diam(), rel=1e-9)
    big = inflated(toy, 1.2)
    hat = intersect_with_canonical(big, toy)
    for w in toy.pieces:
        assert hat[w].diam() <= big[w].diam() + 1e-12
    for L in (2, 3):
        ws = toy.words(L)
        for i, a in enumerate(ws):
            for b in ws[i + 1:]:
                assert hat[a].dist(hat[b]) >= big[a].dist(big[b]) - 1e-12


def test_disjoint_custom_piece():
    toy = cantor_toy_boxing(2)
    pieces = dict(toy.pieces)
    pieces[Word.of(0, 1)] = rect(5, 6, 5, 6, Word.of(0, 1))
    with pytest.raises(EmptyIntersection):
        intersect_with_canonical(Boxing(pieces, 2), toy)
