import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fairshift.domain import CellTable, Dataset, Example, JointSpec, cell_table, shift_family

probs = st.floats(0.0, 1.0)


def test_cell_table_training_joint():
    t = cell_table(JointSpec(0.3, 0.9))
    # frozen from direct arithmetic: 0.3*0.9, 0.3*0.1, 0.7*0.1, 0.7*0.9
    assert t[1, 1] == pytest.approx(0.27, abs=1e-12)
    assert t[1, 0] == pytest.approx(0.03, abs=1e-12)
    assert t[0, 1] == pytest.approx(0.07, abs=1e-12)
    assert t[0, 0] == pytest.approx(0.63, abs=1e-12)
    assert t.marginal_v[1] == pytest.approx(0.34, abs=1e-12)
    assert t.marginal_y[1] == pytest.approx(0.3, abs=1e-12)


def test_cell_table_symmetric():
    np.testing.assert_allclose(cell_table(JointSpec(0.5, 0.5)).joint, 0.25, atol=1e-15)


def test_cell_table_idealized():
    t = cell_table(JointSpec(0.3, 0.5))
    assert t[1, 1] == pytest.approx(0.15) and t[1, 0] == pytest.approx(0.15)
    assert t[0, 0] == pytest.approx(0.35) and t[0, 1] == pytest.approx(0.35)


@given(probs, probs)
def test_cells_nonnegative_and_normalized(p, mu):
    t = cell_table(JointSpec(p, mu))
    assert (t.joint >= 0).all()
    assert abs(t.joint.sum() - 1) <= 1e-12
    np.testing.assert_allclose(t.marginal_y, t.joint.sum(1), atol=1e-12)
    np.testing.assert_allclose(t.marginal_v, t.joint.sum(0), atol=1e-12)


@given(probs)
def test_independence_at_idealized(p):
    t = cell_table(JointSpec(p, 0.5))
    np.testing.assert_allclose(t.joint, np.outer(t.marginal_y, t.marginal_v), atol=1e-12)


def test_general_conditionals():
    t = CellTable.from_conditionals(0.4, 0.2, 0.7)
    assert t[0, 1] == pytest.approx(0.6 * 0.2)
    assert t[1, 1] == pytest.approx(0.4 * 0.7)


def test_jointspec_rejects_out_of_range():
    with pytest.raises(ValueError):
        JointSpec(1.2, 0.5)
    with pytest.raises(ValueError):
        JointSpec(0.3, -0.1)


def test_overlap():
    assert JointSpec(0.3, 0.9).has_overlap
    assert not JointSpec(0.3, 1.0).has_overlap
    assert JointSpec(0.3, 0.9).idealized() == JointSpec(0.3, 0.5)


def test_example_invariants():
    with pytest.raises(ValueError):
        Example(np.zeros(2), 2, 0)
    with pytest.raises(ValueError):
        Example(np.array([np.inf, 0.0]), 1, 0)


def test_dataset_roundtrip_csv(tmp_path):
    rng = np.random.default_rng(0)
    d = Dataset(rng.normal(size=(7, 3)), rng.integers(0, 2, 7), rng.integers(0, 2, 7), rng.normal(size=(7, 2)))
    d.to_csv(tmp_path / "d.csv")
    header = (tmp_path / "d.csv").read_text().splitlines()[0]
    assert header == "x0,x1,x2,y,v,xs0,xs1"
    back = Dataset.from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.x, d.x)
    np.testing.assert_array_equal(back.xstar, d.xstar)
    np.testing.assert_array_equal(back.y, d.y)
    np.testing.assert_array_equal(back.v, d.v)


def test_dataset_examples_view():
    d = Dataset(np.eye(3), [0, 1, 1], [1, 0, 1])
    ex = list(d)
    assert [e.label for e in ex] == [0, 1, 1]
    assert Dataset.from_examples(ex).feature_dim == 3
    assert d.cell_counts() == {(1, 1): 1, (1, 0): 1, (0, 1): 1, (0, 0): 0}


def test_dataset_rejects_bad_shapes():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), [0, 1], [0, 1, 0])
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2)), [0, 3], [0, 1])


def test_shift_family_defaults():
    fam = shift_family(0.3)
    assert [s.mu for s in fam] == [0.1, 0.3, 0.5, 0.7, 0.9, 0.95]
    assert all(s.p_y1 == 0.3 for s in fam)
