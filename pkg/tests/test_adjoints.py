"""Tests for the closed-form adjoints and the decomposition of L* chi."""

import math

import numpy as np
import pytest

from stochadjoint.checks.convergence import fitted_order
from stochadjoint.core.errors import LevelError, ModelError
from stochadjoint.operators import (
    adjoint_J,
    adjoint_L,
    adjoint_L_decomposition,
    adjoint_P,
    diagonal_identity_check,
    is_martingale,
    lattice_diagonal_deviation,
    op_J,
    op_L,
    op_P,
    oracle_adjoint,
    theta_decomposition,
)
from stochadjoint.operators.adjoints import adjoint_norm_ratio
from stochadjoint.spaces import (
    BinaryLattice,
    MarkedProcess,
    MarkSet,
    Process,
    build_joint_tree,
    build_poisson_tree,
    build_wiener_tree,
    pair_L2,
    pair_L2Pi,
)

MARKS = MarkSet.of([("a", 1.0), ("b", 0.5)])


def _tail_times(tree):
    """1 - t_{j+1} as a deterministic process."""
    return Process.deterministic(tree, [1.0 - tree.grid.t(j + 1) for j in range(tree.n_steps)])


class TestClosedForms:
    """Test cases for the examples with known adjoints."""

    def test_adjoint_L_of_one(self):
        """Test L*(1)(t_j) = 1 - t_{j+1}."""
        tree = build_wiener_tree(5)

        assert adjoint_L(Process.constant(tree, 1.0)).max_abs_difference(_tail_times(tree)) < 1e-14

    def test_adjoint_J_of_wiener(self):
        """Test J*(w)(t_j) = 1 - t_{j+1}."""
        tree = build_wiener_tree(5)

        out = adjoint_J(Process.wiener(tree).with_terminal(None))

        assert out.max_abs_difference(_tail_times(tree)) < 1e-12

    def test_adjoint_P_of_compensated_count(self):
        """Test P*(N_a - t pi_a) = (1 - t_{j+1})(1 - q_a) on mark a and 0 on mark b."""
        tree = build_poisson_tree(4, MARKS)
        chi = Process.compensated_count(tree, 0).with_terminal(None)

        out = adjoint_P(chi)

        q = tree.branches.q[0]
        expected = _tail_times(tree) * (1.0 - q)
        assert out.mark(0).max_abs_difference(expected) < 1e-12
        assert out.mark(1).max_abs_difference(Process.zeros(tree)) < 1e-12

    def test_adjoint_J_ignores_jump_part(self):
        """Test that J* of a pure jump martingale vanishes on a joint tree."""
        tree = build_joint_tree(3, MARKS)
        chi = Process.compensated_count(tree, 1).with_terminal(None)

        assert adjoint_J(chi).max_abs_difference(Process.zeros(tree)) < 1e-12

    def test_adjoint_P_needs_marks(self):
        """Test that P* is undefined on a Wiener tree."""
        with pytest.raises(ModelError):
            adjoint_P(Process.constant(build_wiener_tree(3), 1.0))


class TestOracleAgreement:
    """Test cases comparing closed forms with the Gram-transposed matrices."""

    @pytest.mark.parametrize(
        "make_tree",
        [
            lambda: build_wiener_tree(5),
            lambda: build_poisson_tree(3, MARKS),
            lambda: build_joint_tree(3, MARKS),
        ],
    )
    def test_adjoint_L(self, make_tree):
        """Test L* against its oracle on every model."""
        tree = make_tree()
        chi = Process.random(tree, np.random.default_rng(0))

        assert adjoint_L(chi).max_abs_difference(oracle_adjoint("L", chi)) < 1e-12

    @pytest.mark.parametrize(
        "make_tree", [lambda: build_wiener_tree(5), lambda: build_joint_tree(3, MARKS)]
    )
    def test_adjoint_J(self, make_tree):
        """Test J* against its oracle."""
        tree = make_tree()
        chi = Process.random(tree, np.random.default_rng(1))

        assert adjoint_J(chi).max_abs_difference(oracle_adjoint("J", chi)) < 1e-12

    @pytest.mark.parametrize(
        "make_tree", [lambda: build_poisson_tree(3, MARKS), lambda: build_joint_tree(3, MARKS)]
    )
    def test_adjoint_P(self, make_tree):
        """Test P* against its oracle."""
        tree = make_tree()
        chi = Process.random(tree, np.random.default_rng(2))

        assert adjoint_P(chi).max_abs_difference(oracle_adjoint("P", chi)) < 1e-12

    def test_pairing_identities(self):
        """Test <A f, chi> = <f, A* chi> for L, J and P on a joint tree."""
        tree = build_joint_tree(3, MARKS)
        rng = np.random.default_rng(3)
        f, chi = Process.random(tree, rng), Process.random(tree, rng)
        a = MarkedProcess.random(tree, rng)

        assert pair_L2(op_L(f), chi) == pytest.approx(pair_L2(f, adjoint_L(chi)), rel=1e-10)
        assert pair_L2(op_J(f), chi) == pytest.approx(pair_L2(f, adjoint_J(chi)), rel=1e-10)
        assert pair_L2(op_P(a), chi) == pytest.approx(pair_L2Pi(a, adjoint_P(chi)), rel=1e-10)

    def test_workers_do_not_change_result(self):
        """Test that column-parallel kernels give the same adjoint."""
        tree = build_joint_tree(3, MARKS)
        chi = Process.random(tree, np.random.default_rng(4))

        assert adjoint_P(chi, workers=1).max_abs_difference(adjoint_P(chi, workers=3)) == 0.0


class TestAdjointBounds:
    """Test cases for norm bounds of the adjoints."""

    @pytest.mark.parametrize("seed", range(5))
    def test_J_star_contracts_centered_chi(self, seed):
        """Test ||J* chi|| <= ||chi - E chi|| on a joint tree."""
        tree = build_joint_tree(3, MARKS)

        assert adjoint_norm_ratio(Process.random(tree, np.random.default_rng(seed))) <= 1.0 + 1e-12

    def test_ratio_of_constant(self):
        """Test that a deterministic process has ratio 0."""
        assert adjoint_norm_ratio(Process.constant(build_wiener_tree(3), 2.0)) == 0.0


class TestThetaDecomposition:
    """Test cases for adjoint_L_decomposition and theta_decomposition."""

    def test_split_recombines(self):
        """Test L* chi = mu - integral up to the right end of the cell."""
        tree = build_joint_tree(3, MARKS)
        chi = Process.random(tree, np.random.default_rng(5))

        split = adjoint_L_decomposition(chi)

        assert split.combined().max_abs_difference(adjoint_L(chi)) < 1e-12
        assert is_martingale(split.mu)

    def test_wiener_residual_vanishes(self):
        """Test theta = -integral + J(kappa) + h with constant h on a Wiener tree."""
        tree = build_wiener_tree(5)
        chi = Process.random(tree, np.random.default_rng(6))

        decomposition = theta_decomposition(chi)

        assert decomposition.max_residual < 1e-11
        assert decomposition.h_norm < 1e-11

    def test_h_orthogonal_to_integrals(self):
        """Test that h is orthogonal to every J- and P-integral on a joint tree."""
        tree = build_joint_tree(3, MARKS)
        rng = np.random.default_rng(7)

        decomposition = theta_decomposition(Process.random(tree, rng))

        assert abs(decomposition.orthogonality_J(Process.random(tree, rng))) < 1e-12
        assert abs(decomposition.orthogonality_P(MarkedProcess.random(tree, rng))) < 1e-12
        assert is_martingale(decomposition.h)


class TestDiagonalIdentity:
    """Test cases for the near-diagonal kernel of L* chi."""

    @pytest.mark.parametrize("n", [4, 8])
    def test_wiener_gap_is_dt(self, n):
        """Test that the gap for chi = w equals dt."""
        tree = build_wiener_tree(n)

        deviation = diagonal_identity_check(Process.wiener(tree).with_terminal(None))

        assert deviation.wiener == pytest.approx(tree.dt, rel=1e-9)
        assert deviation.poisson is None

    def test_poisson_gap_closed_form(self):
        """Test the gap for the compensated count with pi = 0.5."""
        tree = build_poisson_tree(4, MarkSet.of([("y", 0.5)]))
        chi = Process.compensated_count(tree, 0).with_terminal(None)

        deviation = diagonal_identity_check(chi)

        dt = tree.dt
        expected = max(abs(dt - 0.5 * dt * (1.0 - (j + 1) * dt)) for j in range(3))
        assert deviation.poisson == pytest.approx(expected, rel=1e-9)
        assert deviation.wiener is None

    def test_nonlinear_wiener_gap(self):
        """Test chi = w^2: the maximum stalls near 2 dt (n - 2) sqrt(dt), the L2 gap is O(dt)."""
        for n in (4, 8):
            tree = build_wiener_tree(n)
            w = Process.wiener(tree).with_terminal(None)

            deviation = diagonal_identity_check(w * w)

            dt = tree.dt
            assert deviation.wiener == pytest.approx(2 * dt * (n - 2) * math.sqrt(dt), rel=1e-9)
            expected = 2 * dt * math.sqrt((n - 1) * (n - 2) / 2) / n
            assert deviation.wiener_l2 == pytest.approx(expected, rel=1e-9)

    @pytest.mark.parametrize("model", ["wiener", "poisson"])
    def test_lattice_matches_tree(self, model):
        """Test that the lattice reproduces the tree operators for chi = x^2 + x."""
        n = 6
        if model == "wiener":
            tree = build_wiener_tree(n)
            x = Process.wiener(tree).with_terminal(None)
            lattice = BinaryLattice.wiener(n)
        else:
            tree = build_poisson_tree(n, MarkSet.of([("y", 0.5)]))
            x = Process.compensated_count(tree, 0).with_terminal(None)
            lattice = BinaryLattice.poisson(n, 0.5)

        on_tree = diagonal_identity_check(x * x + x)
        on_lattice = lattice_diagonal_deviation(lattice, lattice.process(lambda t, s: s**2 + s))

        tree_l2 = on_tree.wiener_l2 if model == "wiener" else on_tree.poisson_l2
        tree_max = on_tree.wiener if model == "wiener" else on_tree.poisson
        assert on_lattice.l2 == pytest.approx(tree_l2, rel=1e-9)
        assert on_lattice.max == pytest.approx(tree_max, rel=1e-9)

    @pytest.mark.parametrize(
        "lattice_at, gaps",
        [
            (BinaryLattice.wiener, [0.184877, 0.100353, 0.0521525]),
            (lambda n: BinaryLattice.poisson(n, 0.5), [0.131428, 0.0713237, 0.0370911]),
        ],
    )
    def test_lattice_gap_is_first_order(self, lattice_at, gaps):
        """Test the L2 gap of chi = x^2 + x on n = 8, 16, 32."""
        measured = []
        for n in (8, 16, 32):
            lattice = lattice_at(n)
            measured.append(
                lattice_diagonal_deviation(lattice, lattice.process(lambda t, s: s**2 + s)).l2
            )

        assert measured == pytest.approx(gaps, rel=1e-5)
        assert 0.8 <= fitted_order([8, 16, 32], measured) <= 1.2

    def test_lattice_shape_is_checked(self):
        """Test that chi must have one value per lattice state."""
        with pytest.raises(LevelError):
            lattice_diagonal_deviation(
                BinaryLattice.wiener(3), [np.zeros(1), np.zeros(2), np.zeros(2)]
            )
