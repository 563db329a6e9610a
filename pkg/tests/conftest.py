import os
from pathlib import Path

import pytest

# tuned bends and the fixed point are expensive; keep them between runs
_CACHE = Path(os.environ.setdefault("HENONLAB_CACHE", str(Path(__file__).resolve().parent.parent / ".henonlab-cache")))
_CACHE.mkdir(parents=True, exist_ok=True)


@pytest.fixture(scope="session")
def fp():
    from henonlab.unimodal import cached_fixed_point
    return cached_fixed_point()


@pytest.fixture(scope="session")
def fstar(fp):
    return fp.fstar


@pytest.fixture(scope="session")
def fp_tower(fstar):
    from henonlab.henon import build_tower, iota
    return build_tower(iota(fstar), 14)


@pytest.fixture(scope="session")
def thick_tower(fstar):
    from henonlab.henon import tuned_tower
    return tuned_tower(fstar, 0.1, 12)


@pytest.fixture(scope="session")
def universal(fp_tower, thick_tower):
    from henonlab.overlap import estimate_universal
    return estimate_universal(fp_tower, thick_tower)


@pytest.fixture(scope="session")
def well_chosen(universal, fstar, fp_tower):
    from henonlab.overlap import find_well_chosen
    return find_well_chosen(universal, fstar, tower_fp=fp_tower)
