import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbsnn import (
    EncodingSaturationError,
    YinYangClass,
    YinYangPoint,
    encode_yinyang_sample,
    gen_binary_dataset,
    gen_yinyang_dataset,
    gen_yinyang_points,
    poisson_encode,
)
from fbsnn.encoding import poisson_encode_many, yinyang_class


def reference_class(x, y, r_big=0.5, r_small=0.1):
    """Independent transcription of the published Yin-Yang class rule.

    The published code returns ``int(is_yin)`` (yang = 0, yin = 1) and 2 for
    the dots; here it is mapped onto this package's enum order.
    """
    d_right = np.sqrt((x - 1.5 * r_big) ** 2 + (y - r_big) ** 2)
    d_left = np.sqrt((x - 0.5 * r_big) ** 2 + (y - r_big) ** 2)
    criterion1 = d_right <= r_small
    criterion2 = d_left > r_small and d_left <= 0.5 * r_big
    criterion3 = y > r_big and d_right > 0.5 * r_big
    is_yin = criterion1 or criterion2 or criterion3
    if d_right < r_small or d_left < r_small:
        return YinYangClass.DOT
    return YinYangClass.YIN if is_yin else YinYangClass.YANG


def test_yinyang_matches_reference_on_probe_grid():
    g = (np.arange(10) + 0.5) / 10
    xs, ys = np.meshgrid(g, g)
    got = yinyang_class(xs.ravel(), ys.ravel())
    want = [reference_class(x, y) for x, y in zip(xs.ravel(), ys.ravel())]
    assert len(want) == 100
    np.testing.assert_array_equal(got, want)
    assert len(set(want)) == 3


@settings(max_examples=500, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_yinyang_matches_reference_everywhere(x, y):
    assert int(yinyang_class(x, y)) == int(reference_class(x, y))


def test_yinyang_known_points():
    assert yinyang_class(0.25, 0.5) == YinYangClass.DOT
    assert yinyang_class(0.75, 0.5) == YinYangClass.DOT
    assert yinyang_class(0.5, 0.9) == YinYangClass.YIN
    assert yinyang_class(0.5, 0.1) == YinYangClass.YANG


def test_yinyang_points_balanced_and_in_disc():
    pts = gen_yinyang_points(3000, seed=7)
    cls = np.array([int(p.cls) for p in pts])
    assert np.bincount(cls).tolist() == [1000, 1000, 1000]
    xy = np.array([[p.x, p.y] for p in pts])
    assert np.all(np.hypot(xy[:, 0] - 0.5, xy[:, 1] - 0.5) <= 0.5)
    assert all(int(yinyang_class(p.x, p.y)) == int(p.cls) for p in pts)


def test_poisson_limits():
    assert poisson_encode([0.0], 100, 1e-3, 0).data.sum() == 0
    assert poisson_encode([1000.0], 100, 1e-3, 0).data.min() == 1
    with pytest.raises(EncodingSaturationError):
        poisson_encode([1001.0], 10, 1e-3, 0)


def test_poisson_rate_within_three_sigma():
    dt, T, r = 1e-3, 10000, 100.0
    p = r * dt
    sigma = np.sqrt(p * (1 - p) / T) / dt
    for seed in range(5):
        rate = poisson_encode([r], T, dt, seed).rates()[0]
        assert abs(rate - r) <= 3 * sigma


def test_poisson_deterministic():
    a = poisson_encode([30.0, 70.0], 500, 1e-3, 42).data
    b = poisson_encode([30.0, 70.0], 500, 1e-3, 42).data
    c = poisson_encode([30.0, 70.0], 500, 1e-3, 43).data
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    m1 = poisson_encode_many(np.full((5, 2), 40.0), 300, 1e-3, 9)
    m2 = poisson_encode_many(np.full((5, 2), 40.0), 300, 1e-3, 9)
    assert np.array_equal(m1, m2)


def test_binary_dataset_layout():
    tr, va, te = gen_binary_dataset(20, 10, 10, T=5000, seed=0)
    assert (len(tr), len(va), len(te)) == (20, 10, 10)
    assert tr.inputs.shape == (20, 2, 5000) and tr.targets.shape == (20, 1, 5000)
    assert np.bincount(tr.labels).tolist() == [10, 10]
    a, b = tr.inputs[:, 0].sum(1), tr.inputs[:, 1].sum(1)
    assert np.all((a > b) == (tr.labels == 0))
    np.testing.assert_array_equal(tr.class_target_rates(), [[100.0], [20.0]])
    s = tr[1]
    assert s.label == 1 and s.target_rates[0] == 20.0


def test_binary_high_target_class_switch():
    tr, _, _ = gen_binary_dataset(4, 2, 2, T=100, high_target_class=1)
    np.testing.assert_array_equal(tr.class_target_rates(), [[20.0], [100.0]])


def test_yinyang_sample_encoding():
    p = YinYangPoint(0.0, 1.0, YinYangClass.YIN)
    s = encode_yinyang_sample(p, T=1000, seed=3)
    np.testing.assert_allclose(s.input_rates, [10.0, 100.0, 100.0, 10.0])
    np.testing.assert_allclose(s.target_rates, [20.0, 2.0, 2.0])
    assert s.input.data.shape == (4, 1000) and s.target.data.shape == (3, 1000)
    mid = encode_yinyang_sample(YinYangPoint(0.5, 0.5, YinYangClass.DOT), seed=0)
    assert mid.input_rates[0] == pytest.approx(55.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_complementary_rates_sum(x, y):
    s = encode_yinyang_sample(YinYangPoint(x, y, YinYangClass(int(yinyang_class(x, y)))), T=10)
    assert s.input_rates[0] + s.input_rates[2] == pytest.approx(110.0, abs=1e-12)
    assert s.input_rates[1] + s.input_rates[3] == pytest.approx(110.0, abs=1e-12)
    assert np.sum(s.target_rates == 20.0) == 1


def test_yinyang_dataset_layout():
    tr, va, te = gen_yinyang_dataset(30, 9, 9, T=200, seed=1)
    assert tr.inputs.shape == (30, 4, 200) and tr.targets.shape == (30, 3, 200)
    assert np.bincount(tr.labels).tolist() == [10, 10, 10]
    np.testing.assert_allclose(tr.class_target_rates(), np.where(np.eye(3), 20.0, 2.0))
    again = gen_yinyang_dataset(30, 9, 9, T=200, seed=1)[0]
    assert np.array_equal(tr.inputs, again.inputs)
    redrawn = tr.redraw(5)
    assert np.array_equal(redrawn.input_rates, tr.input_rates)
    assert not np.array_equal(redrawn.inputs, tr.inputs)
