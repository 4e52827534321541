import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moran_dim.errors import BudgetExceeded, NonContracting, NotInvariant, SpecError, TooFewMaps
from moran_dim.ifs_core import (AmbientSet, IFSSpec, LevelSystem, Similarity, make_word, parent,
                                scale_le, scale_slice, stratify, validate_spec)

from conftest import S, random_periodic


def test_similarity_line_and_plane():
    f = S(0.5, 0.25, reflect=True)
    assert np.allclose(f([0.5]), [0.0])
    g = Similarity.plane(0.5, 90, [0.5, 0.0])
    assert np.allclose(g.orthogonal, [[0, -1], [1, 0]])
    assert np.allclose(g([1.0, 0.0]), [0.5, 0.5])


def test_similarity_rejects_non_orthogonal():
    with pytest.raises(SpecError):
        Similarity(0.5, np.array([[1.0, 0.1], [0.0, 1.0]]), np.zeros(2))


def test_level_ratio_groups_merge_equal_ratios():
    lv = LevelSystem.homogeneous_line(0.25, [0.0, 0.25, 0.5, 0.75])
    logr, logc = lv.ratio_groups
    assert logr.size == 1 and math.isclose(logc[0], math.log(4))
    assert lv.homogeneous


def test_validate_attaches_certificate(cantor):
    assert cantor.certificate and "1/3" not in cantor.certificate
    assert "0.333333333333" in cantor.certificate


@pytest.mark.parametrize("maps, err", [
    ([S(0.5, 0.0)], TooFewMaps),
    ([S(1.0, 0.0), S(0.5, 0.5)], NonContracting),
    ([S(0.5, 0.0), S(0.5, 0.75)], NotInvariant),
])
def test_validate_rejects(maps, err):
    with pytest.raises(err):
        validate_spec(IFSSpec.autonomous(maps))


def test_validate_exact_boundary_in_1d():
    # 2/3 + 1/3 lands exactly on 1 in rationals although floats are inexact
    validate_spec(IFSSpec.autonomous([S(1 / 3, 0.0), S(1 / 3, 2 / 3)]))


def test_validate_ball_ambient():
    amb = AmbientSet.ball([0.0, 0.0], 1.0)
    maps = [Similarity.plane(0.4, 0, [-0.5, 0.0]), Similarity.plane(0.4, 45, [0.5, 0.0])]
    validate_spec(IFSSpec.autonomous(maps, amb))
    with pytest.raises(NotInvariant):
        validate_spec(IFSSpec.autonomous([Similarity.plane(0.4, 0, [0.7, 0.0])] * 2, amb))


def test_levels_prefix_then_periodic():
    a = [S(0.5, 0.0), S(0.5, 0.5)]
    b = [S(0.25, 0.0), S(0.25, 0.75)]
    spec = IFSSpec.periodic([a, b], prefix=[b])
    assert [spec.level(n).ratios[0] for n in range(1, 6)] == [0.25, 0.5, 0.25, 0.5, 0.25]
    assert spec.fundamental_domain == 3
    sh = spec.shifted(2)
    assert sh.level(1).ratios[0] == 0.25 and sh.fundamental_domain == 2


def test_scale_slice_example(cantor):
    sl = scale_slice(cantor, 1 / 9)
    assert len(sl) == 4
    assert all(len(w) == 2 and math.isclose(w.rho, 1 / 9) for w in sl.words)
    sl.check(cantor)
    assert len(scale_slice(cantor, 0.5)) == 2


def test_scale_slice_word_example(cantor):
    # maps are 0-based: the spec-level word "2,1" is (1, 0)
    w = make_word(cantor, (1, 0))
    assert math.isclose(w.rho, 1 / 9)
    assert parent(cantor, w).indices == (1,)


def test_scale_slice_mixed_ratios():
    spec = IFSSpec.autonomous([S(0.5, 0.0), S(0.25, 0.75)])
    sl = scale_slice(spec, 0.25)
    assert sorted(w.indices for w in sl.words) == [(0, 0), (0, 1), (1,)]
    sl.check(spec)


def test_scale_slice_domain():
    spec = IFSSpec.autonomous([S(0.5, 0.0), S(0.5, 0.5)])
    with pytest.raises(ValueError):
        scale_slice(spec, 1.0)


def test_stratify_budget(cantor):
    with pytest.raises(BudgetExceeded):
        stratify(cantor, 1e-9, cap=1000)


def test_stratify_ties_at_exact_powers(cantor):
    # (1/3)^5 computed by repeated products is within 1e-12 relative of 3^-5
    cyl = stratify(cantor, 3.0 ** -5)
    assert set(cyl.depth.tolist()) == {5} and len(cyl) == 32


def test_scale_comparison_in_log_space_when_deep():
    # products below the float range are compared through their logarithms
    rho = np.array([0.0, 0.0])
    log_rho = np.array([-800.0, -600.0])
    depth = np.array([100, 100])
    assert scale_le(rho, log_rho, depth, 1e-300).tolist() == [True, False]


def test_stratify_within_prunes(cantor):
    cyl = stratify(cantor, 1 / 27, within=([0.1], 0.05))
    # only [2/27, 3/27] meets [0.05, 0.15] at depth 3
    assert cyl.words() == [(0, 0, 1)]


def test_extension_points_are_in_K(cantor):
    z0, s0 = cantor.extension(0, "first")
    z1, s1 = cantor.extension(0, "last")
    assert np.allclose(z0, [0.0]) and np.allclose(z1, [1.0])
    assert s0 < 1e-17 and s1 < 1e-17


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6), r=st.floats(0.005, 0.9))
def test_slice_is_a_stratification(seed, r):
    spec = random_periodic(seed)
    sl = scale_slice(spec, r, cap=10**6)
    sl.check(spec)
