import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from fedanomaly.errors import MetricError
from fedanomaly.metrics import (
    Confusion,
    aupr,
    auroc,
    confusion_at,
    evaluate_scores,
    optimal_threshold,
    percentile_window,
    roc_curve,
    threshold_candidates,
)


# brute-force oracles ------------------------------------------------------

def auroc_pairs(s, y):
    pos = [a for a, l in zip(s, y) if l == 1]
    neg = [b for b, l in zip(s, y) if l == 0]
    won = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return won / (len(pos) * len(neg))


def f1_loop(s, y, t):
    tp = sum(1 for a, l in zip(s, y) if a >= t and l == 1)
    fp = sum(1 for a, l in zip(s, y) if a >= t and l == 0)
    fn = sum(1 for a, l in zip(s, y) if a < t and l == 1)
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    return 2 * p * r / (p + r) if p + r else 0.0


def f1_table(s, y, cands):
    """F1 at every candidate via a dense (candidate x sample) flag matrix."""
    s, y, t = np.asarray(s), np.asarray(y), np.asarray(cands)
    flag = s[None, :] >= t[:, None]
    tp = (flag & (y == 1)).sum(axis=1)
    k = flag.sum(axis=1)
    p = np.where(k > 0, tp / np.maximum(k, 1), 0.0)
    r = tp / y.sum()
    return np.where(p + r > 0, 2 * p * r / np.where(p + r > 0, p + r, 1), 0.0)


def aupr_sweep(s, y):
    """Enumerate every distinct threshold from the top and accumulate step areas."""
    n_pos = sum(y)
    area, prev_r = 0.0, 0.0
    for t in sorted(set(s), reverse=True):
        tp = sum(1 for a, l in zip(s, y) if a >= t and l == 1)
        k = sum(1 for a in s if a >= t)
        r = tp / n_pos
        area += (r - prev_r) * (tp / k)
        prev_r = r
    return area


def best_threshold(cands, s, y):
    cands = np.sort(np.asarray(cands, dtype=float))
    f = f1_table(s, y, cands)
    i = int(np.flatnonzero(f == f.max())[0])  # first maximum = smallest threshold
    return float(cands[i]), float(f[i])


def grid_oracle(s, y):
    ratio = sum(y) / len(y)
    p0 = 100 * (1 - ratio)
    delta = min(p0, 100 - p0, 20)
    ps = [p0 - delta, p0 + delta]
    i = 0
    while 0.1 * i <= delta + 1e-9:
        ps += [p0 + 0.1 * i, p0 - 0.1 * i]
        i += 1
    return list(np.percentile(s, np.clip(ps, 0.0, 100.0)))


def midpoint_oracle(s, y):
    cands = grid_oracle(s, y)
    lo, hi = min(cands), max(cands)
    u = sorted(set(s))
    mids = [(a + b) / 2 for a, b in zip(u, u[1:]) if lo <= (a + b) / 2 <= hi]
    return [lo, hi, *mids]


def random_instance(rng, n_max=50, ties=False):
    n = int(rng.integers(2, n_max + 1))
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    s = rng.integers(0, 6, n).astype(float) if ties else rng.normal(size=n)
    return s, y


# examples -----------------------------------------------------------------

def test_confusion_examples():
    y = np.array([0, 0, 1, 1])
    s = np.array([1.0, 2.0, 3.0, 4.0])
    low = confusion_at(s, y, 0.0)
    assert low.recall == 1.0 and low.precision == 0.5
    high = confusion_at(s, y, 10.0)
    assert high.tp == high.fp == 0 and high.precision == high.recall == high.f1 == 0.0
    mid = confusion_at(s, y, 2.5)
    assert (mid.precision, mid.recall, mid.f1) == (1.0, 1.0, 1.0)


def test_threshold_is_inclusive():
    cm = confusion_at([1.0, 2.0], [0, 1], 2.0)
    assert cm.tp == 1 and cm.fp == 0


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_f1_identity(tp, fp, tn, fn):
    c = Confusion(tp, fp, tn, fn)
    p, r = c.precision, c.recall
    if p + r > 0:
        assert c.f1 == pytest.approx(2 * p * r / (p + r), abs=1e-15)
    else:
        assert c.f1 == 0.0


def test_auroc_examples():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.5] * 6, [0, 1, 0, 1, 0, 0]) == 0.5
    assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_aupr_examples():
    assert aupr([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert aupr([1.0] * 8, [1, 0, 0, 1, 0, 0, 0, 1]) == pytest.approx(3 / 8, abs=1e-15)
    s, y = [0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]
    assert aupr(s, y) == pytest.approx(aupr_sweep(s, y), abs=1e-15)
    assert aupr(s, y) == pytest.approx(0.5 * 1.0 + 0.5 * (2 / 3), abs=1e-15)


@pytest.mark.parametrize("fn", [auroc, aupr, optimal_threshold])
def test_single_class_is_an_error(fn):
    with pytest.raises(MetricError):
        fn([0.1, 0.2, 0.3], [0, 0, 0])
    with pytest.raises(MetricError):
        fn([0.1, 0.2], [1, 1])


def test_input_validation():
    with pytest.raises(MetricError):
        auroc([0.1, 0.2], [0, 1, 1])
    with pytest.raises(MetricError):
        auroc([0.1, np.nan], [0, 1])
    with pytest.raises(MetricError):
        auroc([0.1, 0.2], [0, 2])


def test_separable_threshold_has_f1_one():
    s = np.r_[np.linspace(0, 1, 40), np.linspace(2, 3, 10)]
    y = np.r_[np.zeros(40), np.ones(10)].astype(int)
    t = optimal_threshold(s, y)
    assert 1.0 < t <= 2.0
    assert confusion_at(s, y, t).f1 == 1.0


def test_percentile_window():
    p0, delta, grid = percentile_window(0.0246)
    assert p0 == pytest.approx(97.54) and delta == pytest.approx(2.46)
    assert grid[0] == pytest.approx(95.08) and grid[-1] == pytest.approx(100.0)
    assert np.any(np.isclose(grid, 97.54)) and np.any(np.isclose(grid, 95.14))
    p0, delta, grid = percentile_window(0.5)
    assert delta == 20 and grid.size == 401 and grid[0] == pytest.approx(30.0)


# oracle suites ------------------------------------------------------------

@pytest.mark.parametrize("ties", [False, True])
def test_against_oracles_500_instances(ties):
    rng = np.random.default_rng(2024 + ties)
    for _ in range(500):
        s, y = random_instance(rng, ties=ties)
        assert abs(auroc(s, y) - auroc_pairs(s, y)) <= 1e-10
        assert abs(aupr(s, y) - aupr_sweep(s, y)) <= 1e-10
        t_ref, f_ref = best_threshold(grid_oracle(s, y), s, y)
        t = optimal_threshold(s, y)
        assert abs(t - t_ref) <= 1e-10
        assert abs(f1_loop(s, y, t) - f_ref) <= 1e-10
        t_ref, f_ref = best_threshold(midpoint_oracle(s, y), s, y)
        t = optimal_threshold(s, y, exhaustive=True)
        assert abs(t - t_ref) <= 1e-10 and abs(f1_loop(s, y, t) - f_ref) <= 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_grid_reaches_midpoint_optimum_on_20_samples(seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=20)
    y = np.zeros(20, int)
    y[rng.choice(20, int(rng.integers(2, 9)), replace=False)] = 1
    _, f_mid = best_threshold(midpoint_oracle(s, y), s, y)
    assert abs(f1_loop(s, y, optimal_threshold(s, y)) - f_mid) <= 1e-10


@given(st.integers(0, 2**31 - 1))
def test_optimal_beats_candidates_and_p0(seed):
    rng = np.random.default_rng(seed)
    s, y = random_instance(rng, n_max=80)
    t = optimal_threshold(s, y)
    f = confusion_at(s, y, t).f1
    for c in threshold_candidates(s, y):
        assert f >= confusion_at(s, y, c).f1
    p0 = percentile_window(y.mean())[0]
    assert f >= confusion_at(s, y, np.percentile(s, p0)).f1


@pytest.mark.parametrize("transform", [np.exp, lambda v: 3 * v - 7, lambda v: v**3])
def test_monotone_invariance(transform):
    rng = np.random.default_rng(0)
    for _ in range(50):
        s, y = random_instance(rng, ties=True)
        assert auroc(transform(s), y) == pytest.approx(auroc(s, y), abs=1e-12)
        assert aupr(transform(s), y) == pytest.approx(aupr(s, y), abs=1e-12)


@given(st.integers(0, 2**31 - 1))
def test_negation_and_flip_symmetry(seed):
    rng = np.random.default_rng(seed)
    s, y = random_instance(rng)
    assume(len(set(s)) == len(s))
    a = auroc(s, y)
    assert a + auroc(-s, y) == pytest.approx(1.0, abs=1e-12)
    assert auroc(s, 1 - y) == pytest.approx(1.0 - a, abs=1e-12)


def test_mann_whitney_matches_trapezoid():
    rng = np.random.default_rng(5)
    for n in (2, 10, 100, 1000):
        for _ in range(5):
            s, y = random_instance(rng, n_max=n, ties=bool(rng.integers(0, 2)))
            fpr, tpr = roc_curve(s, y)
            trap = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
            assert abs(auroc(s, y) - trap) <= 1e-12


def test_matches_sklearn():
    sk = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(11)
    for _ in range(100):
        s, y = random_instance(rng, n_max=200, ties=bool(rng.integers(0, 2)))
        assert auroc(s, y) == pytest.approx(sk.roc_auc_score(y, s), abs=1e-12)
        assert aupr(s, y) == pytest.approx(sk.average_precision_score(y, s), abs=1e-12)


def test_evaluate_scores_perfect_and_constant():
    val_y = np.array([0] * 8 + [1] * 2)
    test_y = np.array([0] * 7 + [1] * 3)
    perfect = evaluate_scores(val_y * 1.0, val_y, test_y * 1.0, test_y)
    assert (perfect.precision, perfect.recall, perfect.f1, perfect.auroc, perfect.aupr) == (1, 1, 1, 1, 1)
    const = evaluate_scores(np.ones(10), val_y, np.ones(10), test_y)
    assert const.auroc == 0.5 and const.aupr == pytest.approx(0.3)
    assert const.tp + const.fp + const.tn + const.fn == 10


def test_threshold_uses_validation_only():
    val_s = np.array([0.1, 0.2, 0.3, 0.9])
    val_y = np.array([0, 0, 0, 1])
    a = evaluate_scores(val_s, val_y, np.array([0.0, 5.0]), np.array([0, 1]))
    b = evaluate_scores(val_s, val_y, np.array([0.5, 0.6]), np.array([0, 1]))
    assert a.threshold == b.threshold
