import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import all_words, cutset_by_enumeration, moran_bisection

from ssmf import (
    IfsSystem,
    Similitude,
    anchor_point,
    compose_word,
    cut_set,
    moran_dimension,
    sample_attractor,
    similitude_apply,
)
from ssmf.errors import InputError, ResourceError
from ssmf.ifs import load_ifs, normalize_ifs


def line_ifs(ratios, shifts=None):
    shifts = shifts or [0.0] * len(ratios)
    return IfsSystem(tuple(Similitude(r, None, [t]) for r, t in zip(ratios, shifts)))


CANTOR = load_ifs("cantor")
SEGMENT = load_ifs("segment")


# similitude_apply


def test_apply_fixed_points():
    assert similitude_apply(Similitude(1 / 3, None, [0.0]), 0.0)[0] == 0.0
    assert similitude_apply(CANTOR.maps[1], 1.0)[0] == pytest.approx(1.0, abs=1e-15)


def test_apply_arithmetic():
    assert similitude_apply(CANTOR.maps[0], 0.9)[0] == pytest.approx(0.3, abs=1e-15)


def test_apply_dimension_mismatch():
    with pytest.raises(InputError):
        similitude_apply(CANTOR.maps[0], [0.1, 0.2])


def test_non_orthogonal_rejected():
    with pytest.raises(InputError):
        Similitude(0.5, [[1.0, 0.1], [0.0, 1.0]], [0.0, 0.0])


# compose_word


def test_empty_word_identity():
    m = compose_word(CANTOR, ())
    assert m.ratio == 1.0
    assert m.apply([0.37])[0] == 0.37


def test_compose_cantor_12():
    m = compose_word(CANTOR, "12")
    assert m.ratio == pytest.approx(1 / 9)
    for x in (0.0, 0.5, 1.0):
        assert m.apply([x])[0] == pytest.approx(x / 9 + 2 / 9, abs=1e-15)


def test_compose_segment_21():
    m = compose_word(SEGMENT, "21")
    assert m.ratio == pytest.approx(0.25)
    for x in (0.0, 0.5, 1.0):
        assert m.apply([x])[0] == pytest.approx(x / 4 + 0.5, abs=1e-15)


def test_compose_letter_out_of_range():
    with pytest.raises(InputError):
        compose_word(CANTOR, "13")


# moran_dimension


@pytest.mark.parametrize(
    "ratios, expected",
    [
        ([1 / 3, 1 / 3], math.log(2) / math.log(3)),
        ([0.5, 0.5, 0.5], math.log(3) / math.log(2)),
        ([0.5, 0.25], -math.log2((math.sqrt(5) - 1) / 2)),
    ],
)
def test_moran_closed_forms(ratios, expected):
    assert moran_dimension(ratios) == pytest.approx(expected, abs=1e-12)
    assert moran_dimension(ratios) == pytest.approx(moran_bisection(ratios), abs=1e-12)


def test_moran_single_map():
    assert moran_dimension([0.3]) == 0.0


@pytest.mark.parametrize("bad", [[], [0.0], [1.0], [0.5, 1.2], [-0.1]])
def test_moran_rejects(bad):
    with pytest.raises(InputError):
        moran_dimension(bad)


ratio_lists = st.lists(st.floats(0.01, 0.95), min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(ratio_lists)
def test_moran_residual_and_oracle(ratios):
    s = moran_dimension(ratios)
    if len(ratios) > 1:
        assert abs(sum(r**s for r in ratios) - 1) <= 1e-12 * len(ratios)
    assert s == pytest.approx(moran_bisection(ratios), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 0.9), min_size=2, max_size=5), st.data())
def test_moran_monotone(ratios, data):
    k = data.draw(st.integers(0, len(ratios) - 1))
    bumped = list(ratios)
    bumped[k] = min(0.95, ratios[k] + 0.02)
    assert moran_dimension(bumped) > moran_dimension(ratios)


# cut_set


def test_cutset_examples():
    assert [str(w) for w in cut_set(CANTOR, 0.5).words] == ["1", "2"]
    assert [str(w) for w in cut_set(CANTOR, 0.2).words] == ["11", "12", "21", "22"]
    skew = line_ifs([0.5, 0.25], [0.0, 0.75])
    assert sorted(str(w) for w in cut_set(skew, 0.25).words) == ["11", "12", "2"]


def test_cutset_at_one_is_first_letters():
    assert [str(w) for w in cut_set(CANTOR, 1.0).words] == ["1", "2"]


@pytest.mark.parametrize("R", [0.0, -1.0, 1.5])
def test_cutset_bad_resolution(R):
    with pytest.raises(InputError):
        cut_set(CANTOR, R)


def test_cutset_cap():
    with pytest.raises(ResourceError):
        cut_set(CANTOR, 3.0**-20, cap=1000)


@pytest.mark.parametrize("m", range(1, 11))
def test_cantor_counts_and_unity(m):
    R = 3.0**-m
    cs = cut_set(CANTOR, R)
    assert len(cs) == 2 ** math.ceil(round(math.log(R) / math.log(1 / 3), 9))
    s = moran_dimension(CANTOR.ratios)
    assert abs(cs.unity_sum(s) - 1) <= 1e-9


def _prefix_free_and_covering(words, p):
    L = max(len(w) for w in words) + 1
    wset = set(words)
    for w in all_words(p, L):
        hits = sum(1 for k in range(1, L + 1) if w[:k] in wset)
        if hits != 1:
            return False
    return True


@pytest.mark.parametrize(
    "ratios, R",
    [([1 / 3, 1 / 3], 3.0**-6), ([0.5, 0.25], 0.01), ([0.4, 0.3, 0.2], 0.02), ([0.7, 0.2], 0.05)],
)
def test_cutset_matches_enumeration(ratios, R):
    ifs = line_ifs(ratios, list(np.linspace(0, 1 - ratios[-1], len(ratios))))
    cs = cut_set(ifs, R)
    words = [w.letters for w in cs.words]
    assert set(words) == cutset_by_enumeration(ratios, R)
    assert _prefix_free_and_covering(words, len(ratios))
    assert abs(cs.unity_sum(moran_dimension(ratios)) - 1) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.1, 0.8), min_size=2, max_size=3), st.floats(0.02, 1.0))
def test_cutset_properties(ratios, R):
    ifs = line_ifs(ratios)
    cs = cut_set(ifs, R)
    words = [w.letters for w in cs.words]
    if len(ratios) ** (max(map(len, words)) + 1) <= 10**5:
        assert _prefix_free_and_covering(words, len(ratios))
    assert abs(cs.unity_sum(moran_dimension(ratios)) - 1) <= 1e-9


def test_cardinality_constant_reported_not_asserted():
    ifs = line_ifs([0.5, 0.25], [0.0, 0.75])
    s = moran_dimension(ifs.ratios)
    consts = []
    for k in range(2, 12):
        R = 2.0**-k
        consts.append(len(cut_set(ifs, R)) * R**s)
    assert min(consts) > 0 and np.isfinite(max(consts))


# anchors and samples


def test_anchor_examples():
    assert anchor_point(CANTOR, "1", [0.0])[0] == 0.0
    assert anchor_point(CANTOR, "2", [0.0])[0] == pytest.approx(2 / 3)
    assert anchor_point(CANTOR, "21", [0.0])[0] == pytest.approx(2 / 3)


def test_sample_examples():
    np.testing.assert_allclose(sample_attractor(CANTOR, 0.5).ravel(), [0, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(sample_attractor(CANTOR, 1.0).ravel(), [0, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(sample_attractor(SEGMENT, 0.25).ravel(), [0, 0.25, 0.5, 0.75], atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(1, 3), min_size=0, max_size=12),
    st.lists(st.floats(-5, 5), min_size=4, max_size=4),
)
def test_scaling_exactness(letters, coords):
    ifs = load_ifs("sierpinski")
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    ifs = IfsSystem(ifs.maps + (Similitude(0.3, rot, [0.2, 0.1]),))
    m = compose_word(ifs, tuple(letters) + (4,))
    x, y = np.array(coords[:2]), np.array(coords[2:])
    d = np.linalg.norm(x - y)
    if d < 1e-6:
        return
    assert np.linalg.norm(m.apply(x) - m.apply(y)) / d == pytest.approx(m.ratio, rel=1e-9)


# loading and normalization


def test_load_rejects_unknown_keys():
    with pytest.raises(InputError):
        load_ifs({"maps": [{"ratio": 0.5, "translation": [0]}], "colour": "red"})


def test_roundtrip_dict():
    ifs = load_ifs("sierpinski")
    again = load_ifs(ifs.to_dict())
    assert again.to_dict() == ifs.to_dict()


def test_normalization_identity_in_unit_cube():
    ifs, norm = normalize_ifs(CANTOR)
    assert norm.is_identity
    assert ifs is CANTOR or ifs.to_dict() == CANTOR.to_dict()


def test_normalization_rescales():
    big = line_ifs([1 / 3, 1 / 3], [2.0, 2.0 + 2 * 3 * 2 / 3])  # attractor [3, 9]
    ifs, norm = normalize_ifs(big)
    pts = sample_attractor(ifs, 3.0**-6)
    assert pts.min() >= -1e-12 and pts.max() <= 1 + 1e-12
    np.testing.assert_allclose(norm.inverse(norm.forward([5.0])), [5.0])
