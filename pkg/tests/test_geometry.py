import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from moran_dim.geometry import (bnc_verdict, branching_count, check_osc, coding_point, composite,
                                condition_report, cone_constant, cone_ratio, max_neighbourhood,
                                neighbourhood_count, render_points, sample_limit_set)
from moran_dim.ifs_core import AmbientSet, IFSSpec, LevelSystem, Similarity, stratify

from conftest import S, random_periodic


def test_composite_of_word(cantor):
    g = composite(cantor, (1, 0))
    assert math.isclose(g.scale, 1 / 9)
    assert np.allclose(g([0.0]), [2 / 3])
    assert np.allclose(composite(cantor, ())([0.3]), [0.3])


def test_coding_point_error_bound(cantor):
    cp = coding_point(cantor, (1,), depth_extension=5)
    # center 1/2 pushed through 1 then five 0s: 2/3 + 3^-6 / 2
    assert np.allclose(cp.point, [2 / 3 + 0.5 * 3 ** -6])
    assert math.isclose(cp.error_radius, 0.5 * 3 ** -6)


def test_render_points_depth_one_and_zero(cantor):
    pts, err = render_points(cantor, 1)
    assert np.allclose(pts[:, 0], [0.0, 2 / 3]) and np.allclose(err, 1 / 3)
    # the empty word: the first extension point of the whole set
    pts, err = render_points(cantor, 0)
    assert pts.shape == (1, 1) and np.allclose(pts, 0.0) and np.allclose(err, 1.0)


def test_render_points_are_left_endpoints(cantor):
    pts, _ = render_points(cantor, 6)
    x = pts[:, 0]
    assert x.size == 64 and np.all(np.diff(x) > 0)
    assert math.isclose(np.diff(x).min(), 2 * 3 ** -6)
    # left endpoints: ternary digits in {0, 2}
    k = np.rint(x * 3 ** 6).astype(int)
    digits = [(k // 3 ** i) % 3 for i in range(6)]
    assert all(np.all(d != 1) for d in digits)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_sample_points_lie_within_error_of_K(seed):
    spec = random_periodic(seed)
    pts, err = sample_limit_set(spec, 3)
    fine, ferr = sample_limit_set(spec, 7)
    # distance to a much finer sample is bounded by both errors
    d = np.abs(pts[:, 0][:, None] - fine[:, 0][None, :]).min(axis=1)
    assert np.all(d <= err + ferr.max() + 1e-12)
    assert np.all((pts >= -1e-12) & (pts <= 1 + 1e-12))


@pytest.mark.parametrize("x, r, want", [(0.0, 1 / 3, 1), (1 / 3, 1 / 3, 2), (0.0, 1 / 9, 1)])
def test_neighbourhood_count_examples(cantor, x, r, want):
    nc = neighbourhood_count(cantor, [x], r)
    assert nc.lower == nc.upper == want


def test_max_neighbourhood_cantor_is_two(cantor):
    for r in (1 / 3, 1 / 9, 0.05, 0.01):
        mn = max_neighbourhood(cantor, r)
        assert mn.M_lower <= mn.M_upper
        assert mn.M_upper == 2


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10**6), e=st.integers(1, 6))
def test_neighbourhood_sandwich(seed, e):
    spec = random_periodic(seed)
    r = 2.0 ** -e
    mn = max_neighbourhood(spec, r, refinement_depth=2)
    assert 1 <= mn.M_lower <= mn.M_upper <= len(stratify(spec, r, keep_codes=False))


def test_branching_counts():
    spec = IFSSpec.autonomous([S(0.5, 0.0), S(1 / 16, 15 / 16)])
    assert branching_count(spec, 0.25) == 3


def test_branching_cantor(cantor):
    assert all(branching_count(cantor, 3.0 ** -k) == 2 for k in range(1, 6))


def test_osc_pass_and_fail(cantor):
    assert check_osc(cantor).status == "pass"
    bad = IFSSpec.autonomous([S(0.5, 0.0), S(0.5, 0.25)])
    rep = check_osc(bad)
    assert rep.status == "fail"
    assert rep.witness["overlap"] == (0.25, 0.5)


def test_osc_touching_images_pass():
    spec = IFSSpec.autonomous([S(0.5, 0.0), S(0.5, 0.5)])
    assert check_osc(spec).status == "pass"


def test_osc_two_dimensional():
    box = AmbientSet.box([0, 0], [1, 1])
    quads = [Similarity.plane(0.5, 0, t) for t in ([0, 0], [0.5, 0], [0, 0.5], [0.5, 0.5])]
    assert check_osc(IFSSpec.autonomous(quads, box)).status == "pass"
    rot = [Similarity.plane(0.5, 90, [0.5, 0.0]), Similarity.plane(0.5, 0, [0.25, 0.0])]
    rep = check_osc(IFSSpec.autonomous(rot, box))
    assert rep.status == "fail" and rep.witness["maps"] == (0, 1)


def test_cone_constants():
    unit = IFSSpec.autonomous([S(0.5, 0.0), S(0.5, 0.5)])
    assert cone_constant(unit) == 1.0
    assert cone_constant(unit, "ball") == 0.5
    sq = IFSSpec.autonomous([Similarity.plane(0.5, 0, [0, 0]), Similarity.plane(0.5, 0, [0.5, 0.5])],
                            AmbientSet.box([0, 0], [1, 1]))
    assert math.isclose(cone_constant(sq), math.pi / 4)
    # the quarter disc at a corner is the worst case
    assert cone_ratio(sq, [0.0, 0.0], 0.999) >= cone_constant(sq) - 1e-3
    assert cone_ratio(sq, [0.5, 0.5], 0.3) > cone_constant(sq)


def test_bnc_verdict_cantor_lists_all_clauses(cantor):
    v = bnc_verdict(cantor)
    assert v.status == "verified"
    assert set(v.clauses) == {"a", "b", "c"}
    # (a) 2 N / c = 2 * 2 / 0.5; (b) N (2 diam)^1 * 2 / 1; (c) 3 * 2 * 2
    assert v.clauses == pytest.approx({"a": 8.0, "b": 8.0, "c": 12.0})


def test_bnc_unknown_without_osc():
    spec = IFSSpec.autonomous([S(0.5, 0.0), S(0.5, 0.25)])
    assert bnc_verdict(spec).status == "unknown"


def test_bnc_falsified_by_generator():
    from moran_dim.examples import build_arbitrary_values_example
    v = bnc_verdict(build_arbitrary_values_example(0.5, 1.0), cap=10**5)
    assert v.status == "falsified"
    assert v.branching_bounded is False


def test_condition_report(cantor):
    rep = condition_report(cantor)
    assert rep.osc.status == "pass" and rep.cone_constant == 1.0
    assert math.isclose(rep.r_min, 1 / 3)
