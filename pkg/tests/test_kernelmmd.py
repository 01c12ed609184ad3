import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairshift.domain import CellTable, Dataset, JointSpec, ZeroCell, cell_table
from fairshift.kernelmmd import (
    KernelConfig,
    SliceSkipped,
    balancing_weights,
    gram,
    mmd2_conditional,
    mmd2_v,
    mmd2_weighted,
    rbf_kernel,
)

from .oracles import mmd2_brute, mmd2_weighted_brute

K1 = KernelConfig(1.0)


def test_rbf_values():
    assert rbf_kernel([1.0, 2.0], [1.0, 2.0], K1) == 1.0
    # exp(-1), evaluated directly
    assert rbf_kernel([0.0], [1.0], K1) == pytest.approx(0.36787944117144233, abs=1e-15)
    with pytest.raises(ValueError):
        rbf_kernel([0.0], [1.0, 2.0], K1)


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.floats(0.1, 100))
def test_rbf_symmetric_bounded(a, b, g):
    k = KernelConfig(g)
    assert rbf_kernel(a, b, k) == rbf_kernel(b, a, k)
    assert 0 <= rbf_kernel(a, b, k) <= 1


def test_kernel_config_validates():
    with pytest.raises(ValueError):
        KernelConfig(0.0)


def test_mmd_identical_is_zero():
    a = np.random.default_rng(0).normal(size=(20, 3))
    assert abs(mmd2_v(a, a, KernelConfig(2.0))) < 1e-12


def test_mmd_two_points():
    # 1 + 1 - 2 exp(-1)
    assert mmd2_v([[0.0]], [[1.0]], K1) == pytest.approx(1.2642411176571153, abs=1e-12)


def test_mmd_empty_rejected():
    with pytest.raises(ValueError):
        mmd2_v(np.zeros((0, 2)), np.zeros((3, 2)), K1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_mmd_matches_brute(seed):
    rng = np.random.default_rng(seed)
    d = rng.integers(1, 5)
    a = rng.normal(size=(rng.integers(1, 12), d))
    b = rng.normal(loc=0.5, size=(rng.integers(1, 12), d))
    g = float(rng.uniform(0.5, 20))
    assert mmd2_v(a, b, KernelConfig(g)) == pytest.approx(mmd2_brute(a.tolist(), b.tolist(), g), abs=1e-10)
    assert mmd2_v(a, b, KernelConfig(g)) == pytest.approx(mmd2_v(b, a, KernelConfig(g)), abs=1e-12)
    assert mmd2_v(a, b, KernelConfig(g)) >= -1e-12


def test_weighted_equal_weights_reduces():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(9, 2)), rng.normal(size=(6, 2))
    k = KernelConfig(3.0)
    assert mmd2_weighted(a, np.full(9, 2.5), b, np.full(6, 0.3), k) == pytest.approx(mmd2_v(a, b, k), abs=1e-12)


def test_weighted_split_point_invariance():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(5, 2)), rng.normal(size=(4, 2))
    wa, wb = rng.uniform(0.1, 2, 5), rng.uniform(0.1, 2, 4)
    k = KernelConfig(2.0)
    base = mmd2_weighted(a, wa, b, wb, k)
    a2 = np.vstack([a, a[:1]])
    wa2 = np.concatenate([[wa[0] / 2], wa[1:], [wa[0] / 2]])
    assert mmd2_weighted(a2, wa2, b, wb, k) == pytest.approx(base, abs=1e-12)


def test_weighted_matches_brute():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.normal(size=(rng.integers(1, 10), 3)), rng.normal(size=(rng.integers(1, 10), 3))
        wa, wb = rng.uniform(0, 3, len(a)), rng.uniform(0, 3, len(b))
        wa[0] += 0.1
        wb[0] += 0.1
        g = float(rng.uniform(0.5, 10))
        ref = mmd2_weighted_brute(a.tolist(), wa.tolist(), b.tolist(), wb.tolist(), g)
        assert mmd2_weighted(a, wa, b, wb, KernelConfig(g)) == pytest.approx(ref, abs=1e-10)


def test_weighted_rejects_zero_weights():
    with pytest.raises(ValueError):
        mmd2_weighted([[0.0]], [0.0], [[1.0]], [1.0], K1)
    with pytest.raises(ValueError):
        mmd2_weighted([[0.0]], [-1.0], [[1.0]], [1.0], K1)


def _batch(rng, n=30):
    return Dataset(rng.normal(size=(n, 3)), rng.integers(0, 2, n), rng.integers(0, 2, n))


def test_conditional_zero_when_slices_identical():
    x = np.array([[0.0], [0.0], [1.0], [1.0]])
    d = Dataset(x, [0, 0, 1, 1], [0, 1, 0, 1])
    assert mmd2_conditional(d, lambda z: z, K1) == pytest.approx(0.0, abs=1e-15)


def test_conditional_skips_empty_slice():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(6, 2))
    d = Dataset(x, [0, 0, 0, 1, 1, 1], [0, 1, 1, 0, 0, 0])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        val = mmd2_conditional(d, lambda z: z, K1)
    assert sum(issubclass(r.category, SliceSkipped) for r in w) == 1
    assert val == pytest.approx(mmd2_brute(x[:1].tolist(), x[1:3].tolist(), 1.0), abs=1e-12)


def test_conditional_is_sum_of_slices():
    rng = np.random.default_rng(5)
    for _ in range(10):
        d = _batch(rng, 40)
        ref = 0.0
        for y in (0, 1):
            a = d.x[(d.y == y) & (d.v == 0)]
            b = d.x[(d.y == y) & (d.v == 1)]
            ref += mmd2_v(a, b, KernelConfig(2.0))
        assert mmd2_conditional(d, lambda z: z, KernelConfig(2.0)) == pytest.approx(ref, abs=1e-12)


def test_balancing_weights_training_table():
    u = balancing_weights(cell_table(JointSpec(0.3, 0.9)))
    # u(y,v) = P(y)P(v)/P(y,v) with P(Y=1)=0.3, P(V=1)=0.34
    assert u[1, 1] == pytest.approx(0.3 * 0.34 / 0.27, abs=1e-12)
    assert u[1, 1] == pytest.approx(0.37777777777777777, abs=1e-12)
    assert u[1, 0] == pytest.approx(6.6, abs=1e-12)
    assert u[0, 1] == pytest.approx(3.4, abs=1e-12)
    assert u[0, 0] == pytest.approx(0.7333333333333333, abs=1e-12)
    t = cell_table(JointSpec(0.3, 0.9))
    assert float((t.joint * u.table).sum()) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.01, 0.99))
def test_balancing_weights_vanish_when_independent(p):
    np.testing.assert_allclose(balancing_weights(cell_table(JointSpec(p, 0.5))).table, 1.0, atol=1e-12)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99),
       st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_reweighting_identity(p, mu, g):
    t = cell_table(JointSpec(p, mu))
    u = balancing_weights(t).table
    g = np.array(g).reshape(2, 2)
    ideal = np.outer(t.marginal_y, t.marginal_v)
    assert float((t.joint * u * g).sum()) == pytest.approx(float((ideal * g).sum()), abs=1e-12)


def test_balancing_weights_zero_cell():
    with pytest.raises(ZeroCell):
        balancing_weights(CellTable.from_joint([[0.5, 0.0], [0.2, 0.3]]))


def test_gram_psd():
    rng = np.random.default_rng(6)
    for g in (0.5, 5.0, 50.0):
        k = gram(rng.normal(size=(50, 4)), rng.normal(size=(50, 4)), g)
        z = rng.normal(size=(50, 4))
        assert np.linalg.eigvalsh(gram(z, z, g)).min() >= -1e-8
        assert k.shape == (50, 50)


def test_weighted_marginal_matches_idealized_resample():
    """Weighted MMD on a skewed sample agrees with plain MMD on an idealized resample."""
    rng = np.random.default_rng(7)
    src = cell_table(JointSpec(0.3, 0.8))
    u = balancing_weights(src)
    k = KernelConfig(4.0)
    flat = src.joint.ravel()
    ideal = np.outer(src.marginal_y, src.marginal_v).ravel()

    def draw(probs, n):
        cell = rng.choice(4, size=n, p=probs)
        y, v = cell // 2, cell % 2
        # representation depends on y and weakly on v
        z = np.c_[y + 0.5 * rng.normal(size=n), 0.3 * v + 0.5 * rng.normal(size=n)]
        return z, y, v

    w_vals, p_vals = [], []
    for _ in range(50):
        z, y, v = draw(flat, 400)
        ww = u(y, v)
        w_vals.append(mmd2_weighted(z[v == 0], ww[v == 0], z[v == 1], ww[v == 1], k))
        z2, y2, v2 = draw(ideal, 400)
        p_vals.append(mmd2_v(z2[v2 == 0], z2[v2 == 1], k))
    w_vals, p_vals = np.array(w_vals), np.array(p_vals)
    se = np.sqrt(w_vals.var(ddof=1) / 50 + p_vals.var(ddof=1) / 50)
    assert abs(w_vals.mean() - p_vals.mean()) < 3 * se
