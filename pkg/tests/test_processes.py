"""Tests for adapted processes, norms and pairings."""

import math
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from stochadjoint.core.errors import LevelError, ModelError, ParameterError, SpaceMismatchError
from stochadjoint.spaces import (
    MarkedProcess,
    MarkSet,
    Process,
    build_poisson_tree,
    build_wiener_tree,
    marked_pairing_weights,
    norm_DHp,
    norm_Hp,
    norm_Lp,
    norm_LpPi,
    norm_Np,
    pair_L2,
    pair_L2Pi,
    pairing_weights,
)

MARKS = MarkSet.of([("a", 1.0), ("b", 0.5)])


class TestProcess:
    """Test cases for Process construction and arithmetic."""

    def test_level_shapes_checked(self):
        """Test that each level must have one value per atom."""
        tree = build_wiener_tree(2)

        with pytest.raises(LevelError):
            Process(tree, [np.zeros(1), np.zeros(3)])
        with pytest.raises(LevelError):
            Process(tree, [np.zeros(1)])

    def test_non_finite_values_rejected(self):
        """Test that NaN entries are refused."""
        tree = build_wiener_tree(2)

        with pytest.raises(ParameterError):
            Process(tree, [np.zeros(1), np.array([0.0, np.nan])])

    def test_wiener_carries_terminal(self):
        """Test that the Wiener process has w(1) as terminal value."""
        tree = build_wiener_tree(3)
        w = Process.wiener(tree)

        np.testing.assert_array_equal(w[3], tree.wiener_path(3))
        np.testing.assert_array_equal(w[1], tree.wiener_path(1))

    def test_wiener_needs_wiener_driver(self):
        """Test that a pure Poisson tree has no Wiener process."""
        with pytest.raises(ModelError):
            Process.wiener(build_poisson_tree(3, MARKS))

    def test_compensated_count_is_centered(self):
        """Test E[N(t_k) - k q] = 0 at every level."""
        tree = build_poisson_tree(3, MARKS)
        count = Process.compensated_count(tree, 1)

        np.testing.assert_allclose(count.means(), 0.0, atol=1e-15)
        assert tree.expectation(count[3], 3) == pytest.approx(0.0, abs=1e-15)

    def test_compensated_count_needs_marks(self):
        """Test that a Wiener tree has no counting process."""
        with pytest.raises(ModelError):
            Process.compensated_count(build_wiener_tree(2))

    def test_missing_terminal(self):
        """Test that indexing level n without a terminal fails."""
        f = Process.constant(build_wiener_tree(2), 1.0)

        with pytest.raises(LevelError):
            f[2]

    def test_arithmetic_keeps_terminal_when_both_have_one(self):
        """Test terminal propagation through arithmetic."""
        tree = build_wiener_tree(3)
        w = Process.wiener(tree)

        shifted = w + 1.0
        doubled = 2 * w
        mixed = w + Process.constant(tree, 1.0)

        np.testing.assert_allclose(shifted[3], w[3] + 1.0)
        np.testing.assert_allclose(doubled[3], 2 * w[3])
        assert mixed.terminal is None
        assert (w - w).max_abs_difference(Process.zeros(tree).with_terminal(np.zeros(8))) == 0.0

    def test_vector_round_trip(self):
        """Test from_vector as the inverse of to_vector."""
        tree = build_poisson_tree(3, MARKS)
        f = Process.random(tree, np.random.default_rng(0))

        assert Process.from_vector(tree, f.to_vector()).allclose(f, atol=0.0)
        with pytest.raises(LevelError):
            Process.from_vector(tree, np.zeros(3))

    def test_different_trees_do_not_mix(self):
        """Test that arithmetic across trees is refused."""
        with pytest.raises(SpaceMismatchError):
            Process.zeros(build_wiener_tree(2)) + Process.zeros(build_wiener_tree(3))

    def test_along_sample(self):
        """Test that values along paths follow the visited atoms."""
        from stochadjoint.spaces import sample_paths

        tree = build_wiener_tree(4)
        sample = sample_paths(tree, 100, seed=5)
        w = Process.wiener(tree)

        np.testing.assert_allclose(w.along(sample), sample.wiener_path[:, :4])

    def test_csv_output(self):
        """Test the long table and its CRLF line endings."""
        tree = build_wiener_tree(2)
        w = Process.wiener(tree)

        frame = w.to_frame()
        assert list(frame.columns) == ["level", "t", "atom", "value"]
        assert len(frame) == 1 + 2 + 4

        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "w.csv"
            w.to_csv(path)
            content = path.read_bytes()

        assert content.startswith(b"level,t,atom,value\r\n")

    def test_dict_round_trip(self):
        """Test serialization with the space descriptor."""
        tree = build_wiener_tree(3)
        w = Process.wiener(tree)

        restored = Process.from_dict(tree, w.to_dict())

        assert restored.max_abs_difference(w) == 0.0
        with pytest.raises(SpaceMismatchError):
            Process.from_dict(build_wiener_tree(2), w.to_dict())


class TestMarkedProcess:
    """Test cases for MarkedProcess."""

    def test_shape_includes_marks(self):
        """Test the (atoms, marks) level shape."""
        tree = build_poisson_tree(3, MARKS)
        a = MarkedProcess.constant(tree, 2.0)

        assert a[2].shape == (16, 2)
        np.testing.assert_array_equal(a.mark(1)[2], np.full(16, 2.0))

    def test_vector_round_trip(self):
        """Test from_vector as the inverse of to_vector."""
        tree = build_poisson_tree(2, MARKS)
        a = MarkedProcess.random(tree, np.random.default_rng(1))

        assert MarkedProcess.from_vector(tree, a.to_vector()).allclose(a, atol=0.0)

    def test_frame_has_mark_column(self):
        """Test that the long table is keyed by mark label."""
        tree = build_poisson_tree(2, MARKS)

        frame = MarkedProcess.constant(tree, 1.0).to_frame()

        assert list(frame.columns) == ["level", "t", "atom", "mark", "value"]
        assert set(frame["mark"]) == {"a", "b"}
        assert len(frame) == 2 * (1 + 4)


class TestNorms:
    """Test cases for the process norms."""

    def test_constant_norms(self):
        """Test that every norm of a constant is its absolute value."""
        tree = build_wiener_tree(4)
        f = Process.constant(tree, -2.0)

        assert norm_Lp(f, 3) == pytest.approx(2.0)
        assert norm_Np(f, 4) == pytest.approx(2.0)
        assert norm_Hp(f, 2) == pytest.approx(2.0)
        assert norm_DHp(f, 1) == pytest.approx(2.0)

    def test_wiener_norms(self):
        """Test closed forms on the Wiener process."""
        tree = build_wiener_tree(4)
        w = Process.wiener(tree)

        # sum_k dt * t_k over k = 0..3
        assert norm_Lp(w, 2) ** 2 == pytest.approx(6 / 16)
        assert norm_Hp(w, 2) == pytest.approx(math.sqrt(3 / 4))
        assert norm_Np(w, 2) == pytest.approx(norm_Lp(w, 2))

    def test_running_max_dominates(self):
        """Test ||f||_DH >= ||f||_H."""
        tree = build_wiener_tree(5)
        w = Process.wiener(tree)

        assert norm_DHp(w, 2) >= norm_Hp(w, 2)

    def test_exponent_domain(self):
        """Test the allowed ranges of p."""
        f = Process.constant(build_wiener_tree(2), 1.0)
        a = MarkedProcess.constant(build_poisson_tree(2, MARKS), 1.0)

        with pytest.raises(ParameterError):
            norm_Lp(f, 0.5)
        with pytest.raises(ParameterError):
            norm_Np(f, 1.0)
        with pytest.raises(ParameterError):
            norm_LpPi(a, 1.5)

    def test_marked_norm_of_constant(self):
        """Test sum_i pi_i + sum_i pi_i = 2 * total intensity at p = 2."""
        tree = build_poisson_tree(3, MARKS)

        assert norm_LpPi(MarkedProcess.constant(tree, 1.0), 2) == pytest.approx(math.sqrt(3.0))


class TestPairings:
    """Test cases for the L2 pairings and their weights."""

    def test_pair_matches_norm(self):
        """Test <f, f> = ||f||_2^2."""
        tree = build_poisson_tree(3, MARKS)
        f = Process.random(tree, np.random.default_rng(2))

        assert pair_L2(f, f) == pytest.approx(norm_Lp(f, 2) ** 2)

    def test_weights_agree_with_pairing(self):
        """Test that the Gram weights reproduce the pairing."""
        tree = build_poisson_tree(3, MARKS)
        rng = np.random.default_rng(3)
        f, g = Process.random(tree, rng), Process.random(tree, rng)
        a, b = MarkedProcess.random(tree, rng), MarkedProcess.random(tree, rng)

        assert pairing_weights(tree).sum() == pytest.approx(1.0)
        assert marked_pairing_weights(tree).sum() == pytest.approx(1.5)
        scalar = np.sum(pairing_weights(tree) * f.to_vector() * g.to_vector())
        assert scalar == pytest.approx(pair_L2(f, g))
        marked = np.sum(marked_pairing_weights(tree) * a.to_vector() * b.to_vector())
        assert marked == pytest.approx(pair_L2Pi(a, b))

    def test_mismatched_trees(self):
        """Test that pairing across trees is refused."""
        with pytest.raises(SpaceMismatchError):
            pair_L2(Process.zeros(build_wiener_tree(2)), Process.zeros(build_wiener_tree(3)))
