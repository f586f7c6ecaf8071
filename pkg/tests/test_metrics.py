import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wpcra.metrics import (
    MetricsReport,
    accuracy,
    certified_accuracy,
    certified_rate,
    emit_report,
    fnr,
    radius_grid,
    read_report,
)


def test_accuracy_examples():
    assert accuracy([1, 2, 3], [1, 2, 3]) == 1.0
    assert accuracy([0, 0], [1, 1]) == 0.0
    assert accuracy([1, 1, 1, 0], [1, 1, 1, 1]) == 0.75
    with pytest.raises(ValueError):
        accuracy([], [])


def test_grid_caps_at_largest_finite_radius():
    g = radius_grid([0.0, 2.0, math.inf], 4)
    np.testing.assert_allclose(g, [0, 0.5, 1.0, 1.5, 2.0])
    assert radius_grid([math.inf], 10).tolist() == [0.0] * 11


def test_certified_rate_examples():
    grid = np.linspace(0, 5, 101)
    assert certified_rate([math.inf, math.inf], grid) == 1.0
    assert certified_rate([0.0, 0.0, 0.0], grid) == pytest.approx(1 / 101)
    assert certified_rate([3.0], radius_grid([3.0])) == 1.0


def test_certified_accuracy_examples():
    grid = [0.0, 1.0, 2.0]
    assert certified_accuracy([5, 5], [0, 0], [1, 1], grid) == 0.0
    assert certified_accuracy([0.5, 2], [1, 1], [1, 1], grid) == certified_rate([0.5, 2], grid)
    # sample A: radius 1.5, correct; sample B: radius 0.5, wrong
    # thresholds 0, 1, 2 -> certified {A,B}, {A}, {} ; certified-and-correct {A}, {A}, {}
    assert certified_rate([1.5, 0.5], grid) == pytest.approx((1 + 0.5 + 0) / 3)
    assert certified_accuracy([1.5, 0.5], [0, 1], [0, 0], grid) == pytest.approx((0.5 + 0.5) / 3)


def test_fnr_examples():
    assert fnr([0.25, 0.25, 0.25, 0.25], [0, 1], 4) == 0.0
    assert fnr([0.4, 0.4, 0.1, 0.1], [0, 1], 4) == 1.0
    assert fnr([0.3, 0.2, 0.2, 0.2, 0.1], [0, 1, 2, 3], 5) == 0.25
    assert fnr([1.0], [], 1) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=20), st.integers(0, 2**31))
def test_ca_never_exceeds_cr(radii, seed):
    r = np.random.default_rng(seed)
    preds = r.integers(0, 3, len(radii))
    labels = r.integers(0, 3, len(radii))
    grid = radius_grid(radii)
    assert certified_accuracy(radii, preds, labels, grid) <= certified_rate(radii, grid)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=20), st.floats(0, 10), st.floats(0, 5))
def test_certified_fraction_drops_as_threshold_rises(radii, r0, step):
    a = certified_rate(radii, [r0])
    b = certified_rate(radii, [r0 + step])
    assert b <= a


def sample_report():
    return MetricsReport(
        acc=0.9, certified_rate=0.5, certified_accuracy=0.45, fnr=0.0,
        radius_M=math.inf, radius_prime_M=math.inf,
        curve=[(0.0, 1.0, 0.9), (0.5, 0.0, 0.0)], backdoor_success=None,
    )


def test_summary_lines():
    assert sample_report().summary_lines() == [
        "Radius inf", "Acc 0.9000", "CR 0.5000", "CA 0.4500", "FNR 0.0000",
    ]


def test_emit_and_read_back(tmp_path):
    rep = sample_report()
    paths = emit_report(rep, tmp_path, config_text="seed = 1\n", seed=1)
    back, doc = read_report(paths["metrics"])
    assert back == rep
    assert doc["seed"] == 1 and doc["config"] == "seed = 1\n"
    with open(paths["curves"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["r_j", "certified_fraction", "certified_correct_fraction"]
    cr = np.mean([float(r[1]) for r in rows[1:]])
    assert abs(cr - rep.certified_rate) <= 1e-12


def test_emit_is_byte_stable(tmp_path):
    emit_report(sample_report(), tmp_path / "a", config_text="x = 1\n", seed=3)
    emit_report(sample_report(), tmp_path / "b", config_text="x = 1\n", seed=3)
    for name in ("metrics.json", "curves.csv", "ledger.csv", "config.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
