"""Tests for check entries, reports, property checks and the suite runner."""

import json
import math
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from stochadjoint.checks import (
    CheckEntry,
    CheckReport,
    Kind,
    Mode,
    SuiteCheck,
    check_bdg,
    check_decompositions,
    check_doob,
    check_marked_norm,
    check_norms,
    check_operator_bounds,
    check_poisson_isometry,
    check_polarization,
    known_checks,
    run_suite,
)
from stochadjoint.checks.report import error_entry, make_entry, worst_of
from stochadjoint.core.errors import ConfigError, MartingaleDefectError, ModelError, ParameterError
from stochadjoint.core.events import EventBus, EventType
from stochadjoint.core.settings import SuiteConfig
from stochadjoint.operators import op_L
from stochadjoint.spaces import (
    MarkedProcess,
    MarkSet,
    Process,
    build_joint_tree,
    build_poisson_tree,
    build_wiener_tree,
)

MARKS = MarkSet.of([("a", 1.0), ("b", 0.5)])


class TestCheckEntry:
    """Test cases for entry judging and serialization."""

    def test_equality_is_relative(self):
        """Test |lhs - rhs| <= tol (1 + |rhs|)."""
        assert make_entry("e", "r", 100.0 + 5e-9, 100.0, Kind.EQUALITY, 1e-10).passed
        assert not make_entry("e", "r", 100.0 + 2e-8, 100.0, Kind.EQUALITY, 1e-10).passed

    def test_inequality(self):
        """Test lhs <= rhs with slack."""
        assert make_entry("e", "r", 1.0, 2.0, Kind.INEQUALITY, 0.0).passed
        assert not make_entry("e", "r", 2.5, 2.0, Kind.INEQUALITY, 0.1).passed

    def test_gate_is_absolute(self):
        """Test that gate tolerances are in absolute units."""
        assert make_entry("e", "r", 1.05, 1.0, Kind.GATE, 0.1).passed
        assert not make_entry("e", "r", 1.2, 1.0, Kind.GATE, 0.1).passed

    def test_ratio_and_report_are_soft(self):
        """Test the default hard-fail class."""
        assert make_entry("e", "r", 1.0, 2.0, Kind.RATIO, 0.0).hard is False
        assert make_entry("e", "r", 1.0, 2.0, Kind.REPORT, 0.0).hard is False
        assert make_entry("e", "r", 1.0, 2.0, Kind.EQUALITY, 0.0).hard is True

    def test_convergence_uses_details(self):
        """Test order range, halving ratios and finest gap."""
        good = {"finest_gap": 0.03, "halving_ratios": [2.0, 2.0]}
        slow = {"finest_gap": 0.03, "halving_ratios": [1.4, 2.0]}

        assert make_entry("e", "r", 1.0, 1.0, Kind.CONVERGENCE, 0.1, details=good).passed
        assert not make_entry("e", "r", 1.0, 1.0, Kind.CONVERGENCE, 0.1, details=slow).passed
        assert not make_entry("e", "r", 0.5, 1.0, Kind.CONVERGENCE, 0.1, details=good).passed

    def test_convergence_ratio_margins(self):
        """Test that sampled ratios are judged within their own margins."""
        sampled = {"finest_gap": 0.03, "halving_ratios": [1.6, 2.0], "ratio_margins": [0.2, 0.2]}
        tight = {"finest_gap": 0.03, "halving_ratios": [1.6, 2.0], "ratio_margins": [0.05, 0.05]}

        assert make_entry("e", "r", 1.0, 1.0, Kind.CONVERGENCE, 0.1, details=sampled).passed
        assert not make_entry("e", "r", 1.0, 1.0, Kind.CONVERGENCE, 0.1, details=tight).passed

    def test_non_finite_fails(self):
        """Test that NaN never passes."""
        assert not make_entry("e", "r", math.nan, 0.0, Kind.REPORT, 0.0).passed

    def test_dict_round_trip_with_nan(self):
        """Test that NaN constants serialize as null and come back as NaN."""
        entry = make_entry(
            "e", "r", 1.0, 1.0, Kind.EQUALITY, 1e-10, mode=Mode.MC, details={"n": np.int64(3)}
        )

        data = entry.to_dict()
        restored = CheckEntry.from_dict(json.loads(json.dumps(data)))

        assert data["constant"] is None
        assert data["details"] == {"n": 3}
        assert math.isnan(restored.constant)
        assert restored.mode is Mode.MC
        assert restored.is_consistent

    def test_tampered_flag_is_inconsistent(self):
        """Test that a flipped pass flag is detected."""
        entry = make_entry("e", "r", 1.0, 1.0, Kind.EQUALITY, 1e-10)
        entry.passed = False

        assert not entry.is_consistent


class TestWorstOf:
    """Test cases for sweep summaries."""

    def test_picks_failing_member(self):
        """Test that a failure wins over any passing entry."""
        entries = [
            make_entry("x", "r", 1.0, 2.0, Kind.INEQUALITY, 0.0),
            make_entry("x", "r", 3.0, 2.0, Kind.INEQUALITY, 0.0),
        ]

        summary = worst_of("sweep", entries)

        assert summary.id == "sweep"
        assert not summary.passed
        assert summary.lhs == 3.0
        assert summary.details["violations"] == 1
        assert summary.details["inputs"] == 2

    def test_picks_tightest_member(self):
        """Test that among passes the smallest slack is reported."""
        entries = [
            make_entry("x", "r", 1.0, 2.0, Kind.INEQUALITY, 0.0),
            make_entry("x", "r", 1.9, 2.0, Kind.INEQUALITY, 0.0),
        ]

        assert worst_of("sweep", entries).lhs == 1.9

    def test_empty_sweep(self):
        """Test that an empty sweep cannot be summarised."""
        with pytest.raises(ValueError):
            worst_of("sweep", [])


class TestCheckReport:
    """Test cases for CheckReport."""

    def _report(self):
        return CheckReport.collect(
            [
                make_entry("b.one", "r", 1.0, 1.0, Kind.EQUALITY, 1e-10),
                make_entry("a.two", "r", 3.0, 2.0, Kind.INEQUALITY, 0.0),
                make_entry("a.three", "r", -1.0, 2.0, Kind.RATIO, 0.0),
            ],
            {"n_steps": 4},
            {"a": 0.5},
        )

    def test_sorted_and_exit_code(self):
        """Test id ordering and the hard-failure exit code."""
        report = self._report()

        assert [e.id for e in report.entries] == ["a.three", "a.two", "b.one"]
        assert len(report.failures) == 2
        assert [e.id for e in report.hard_failures] == ["a.two"]
        assert report.exit_code == 1
        assert "[FAIL] a.two" in report.summary()
        assert "[soft] a.three" in report.summary()

    def test_entry_lookup(self):
        """Test lookup by id."""
        report = self._report()

        assert report.entry("b.one").passed
        with pytest.raises(KeyError):
            report.entry("missing")

    def test_json_round_trip(self):
        """Test writing and reading the report."""
        report = self._report()

        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "report.json"
            report.to_json(path)
            loaded = CheckReport.from_json(path)

        assert [e.to_dict() for e in loaded.entries] == [e.to_dict() for e in report.entries]
        assert loaded.config == {"n_steps": 4}
        assert loaded.metadata["runtimes"] == {"a": 0.5}
        assert all(e.is_consistent for e in loaded.entries)

    def test_csv(self):
        """Test the CSV table and its CRLF line endings."""
        report = self._report()

        with TemporaryDirectory() as tmpdir:
            path = Path(tmpdir) / "report.csv"
            report.to_csv(path)
            content = path.read_bytes()

        assert content.startswith(
            b"id,reference,lhs,rhs,constant,tolerance,mode,kind,hard,passed\r\n"
        )
        assert content.count(b"\r\n") == 4

    def test_error_entry(self):
        """Test the stand-in entry of a check that raised."""
        entry = error_entry("doob", "Doob maximal inequality", ValueError("boom"))

        assert entry.id == "doob.error"
        assert not entry.passed
        assert entry.hard
        assert entry.details == {"error": "boom", "type": "ValueError"}


class TestPropertyChecks:
    """Test cases for the property check functions."""

    def test_doob_on_wiener(self):
        """Test Doob's inequality on the Wiener process."""
        tree = build_wiener_tree(6)

        entry = check_doob(Process.wiener(tree), 2.0)

        assert entry.passed
        assert entry.constant == pytest.approx(4.0)
        assert entry.rhs == pytest.approx(4.0)

    def test_doob_refuses_non_martingale(self):
        """Test that a drifting process is rejected."""
        tree = build_wiener_tree(4)

        with pytest.raises(MartingaleDefectError):
            check_doob(op_L(Process.constant(tree, 1.0)), 2.0)

    def test_doob_needs_p_above_one(self):
        """Test the exponent domain."""
        with pytest.raises(ParameterError):
            check_doob(Process.wiener(build_wiener_tree(2)), 1.0)

    def test_bdg_identity_at_two(self):
        """Test that p = 2 is an equality entry that passes."""
        tree = build_wiener_tree(5)
        phi = Process.random(tree, np.random.default_rng(0))

        entry = check_bdg(phi, 2.0)

        assert entry.kind is Kind.EQUALITY
        assert entry.passed

    def test_bdg_ratio_at_four(self):
        """Test that p = 4 only reports the ratio."""
        tree = build_wiener_tree(5)

        entry = check_bdg(Process.constant(tree, 1.0), 4.0)

        # E w(1)^4 = 3 - 2 dt against 1
        assert entry.kind is Kind.RATIO
        assert entry.details["ratio"] == pytest.approx(3.0 - 2.0 * tree.dt)

    def test_poisson_isometry(self):
        """Test the discrete identity and the dt gap bound."""
        tree = build_joint_tree(3, MARKS)
        a = MarkedProcess.random(tree, np.random.default_rng(1))

        discrete, gap = check_poisson_isometry(a)

        assert discrete.passed
        assert gap.passed
        assert gap.rhs == pytest.approx(1.0 / 3.0)

    def test_operator_bound_L(self):
        """Test ||L f||_DH <= ||f||_p."""
        tree = build_wiener_tree(4)
        rng = np.random.default_rng(2)
        inputs = [Process.random(tree, rng) for _ in range(5)]

        entry = check_operator_bounds("L", 2.0, inputs)

        assert entry.passed
        assert entry.details["inputs"] == 5

    def test_operator_bound_P(self):
        """Test ||P a||_DH2 <= 2 ||a||_L2(Pi)."""
        tree = build_poisson_tree(3, MARKS)
        rng = np.random.default_rng(3)

        entry = check_operator_bounds("P", 2.0, [MarkedProcess.random(tree, rng) for _ in range(5)])

        assert entry.passed

    def test_operator_bound_domains(self):
        """Test the exponent domains of J and P and the empty sweep."""
        tree = build_wiener_tree(3)

        with pytest.raises(ParameterError):
            check_operator_bounds("J", 1.5, [Process.constant(tree, 1.0)])
        with pytest.raises(ParameterError):
            check_operator_bounds("P", 3.0, [Process.constant(tree, 1.0)])
        with pytest.raises(ParameterError):
            check_operator_bounds("L", 2.0, [])

    def test_polarization(self):
        """Test the Ito cross-moment identity at every time index."""
        tree = build_joint_tree(3, MARKS)
        rng = np.random.default_rng(4)

        assert check_polarization(Process.random(tree, rng), Process.random(tree, rng)).passed

    def test_decompositions(self):
        """Test orthogonality and the three-way split on a joint tree."""
        tree = build_joint_tree(3, MARKS)
        rng = np.random.default_rng(5)

        entries = check_decompositions(tree, [Process.random(tree, rng) for _ in range(3)])

        assert [e.id for e in entries] == [
            "decompositions.cross_orthogonality",
            "decompositions.deterministic_orthogonality",
            "decompositions.pythagoras",
            "decompositions.oracle_w",
            "decompositions.oracle_nu",
        ]
        assert all(e.passed for e in entries)

    def test_decompositions_need_joint_tree(self):
        """Test that the three-way split is refused elsewhere."""
        with pytest.raises(ModelError):
            check_decompositions(build_wiener_tree(3), [])

    def test_norm_chain_and_axioms(self):
        """Test L_p <= H_p <= DH_p, the triangle inequality and homogeneity at p = 4."""
        tree = build_wiener_tree(4)
        rng = np.random.default_rng(6)

        entries = check_norms(Process.random(tree, rng), Process.random(tree, rng), 4.0)

        assert len(entries) == 2 + 4 * 2
        assert entries[0].id == "norms.chain_L_H"
        assert all(e.passed for e in entries)

    def test_norms_at_one_leave_out_N(self):
        """Test that N_p is only checked for p > 1."""
        tree = build_wiener_tree(3)
        f = Process.constant(tree, 1.0)

        entries = check_norms(f, f, 1.0)

        assert len(entries) == 2 + 3 * 2
        assert not any(e.id.endswith("_N") for e in entries)

    def test_marked_norm(self):
        """Test the triangle entry and the report-only homogeneity entry of L_p(Pi)."""
        tree = build_poisson_tree(3, MARKS)
        rng = np.random.default_rng(7)

        a, b = MarkedProcess.random(tree, rng), MarkedProcess.random(tree, rng)

        triangle, homogeneity = check_marked_norm(a, b, 4.0)

        assert triangle.passed and triangle.hard
        assert homogeneity.kind is Kind.REPORT
        assert not homogeneity.hard
        assert homogeneity.details["relative_defect"] < 1e-12

    def test_marked_norm_domain(self):
        """Test that L_p(Pi) needs p >= 2."""
        tree = build_poisson_tree(3, MARKS)
        a = MarkedProcess.constant(tree, 1.0)

        with pytest.raises(ParameterError):
            check_marked_norm(a, a, 1.5)


class _BrokenCheck(SuiteCheck):
    check_id = "broken"
    reference = "plumbing"

    def _run(self):
        raise RuntimeError("division by zero somewhere")


class TestRunSuite:
    """Test cases for the suite runner and check plumbing."""

    def setup_method(self):
        """Reset event bus before each test."""
        EventBus.reset_instance()

    def test_registry(self):
        """Test that every registered id is listed."""
        assert "doob" in known_checks()
        assert "mc_agreement" in known_checks()
        assert known_checks() == sorted(known_checks())

    def test_empty_selection(self):
        """Test that an empty check list gives an empty report."""
        bus = EventBus()

        report = run_suite(SuiteConfig(checks=[]), bus)

        assert report.entries == []
        assert report.exit_code == 0
        assert [e.type for e in bus.history()] == [
            EventType.SUITE_STARTED,
            EventType.SUITE_FINISHED,
        ]

    def test_unknown_check(self):
        """Test that unknown ids are refused before anything runs."""
        with pytest.raises(ConfigError):
            run_suite(SuiteConfig(checks=["nope"]))

    def test_small_run_passes(self):
        """Test a small exact run end to end."""
        bus = EventBus()
        config = SuiteConfig(
            checks=["doob", "poisson_convergence", "doob"], mc_paths=0, random_inputs=10
        )

        report = run_suite(config, bus)

        assert report.exit_code == 0, report.summary()
        assert report.entry("poisson_convergence.tree.n8").passed
        assert all(not e.id.startswith("poisson_convergence.mc") for e in report.entries)
        assert set(report.metadata["runtimes"]) == {"doob", "poisson_convergence"}
        assert bus.counts()["CHECK_PASSED"] == 2

    def test_norms_check(self):
        """Test the norm sweep on the default joint tree."""
        report = run_suite(SuiteConfig(checks=["norms"], mc_paths=0, random_inputs=5))

        assert report.exit_code == 0, report.summary()
        assert report.entry("norms.N2_equals_L2").passed
        assert report.entry("norms.p4.chain_H_DH").details["inputs"] == 5
        assert report.entry("norms.Pi.p4.homogeneity").kind is Kind.REPORT

    def test_adjoint_sweep_reaches_one_step_joint_trees(self):
        """Test that joint n = 1 is swept although the configured y1 has pi = 1."""
        report = run_suite(SuiteConfig(checks=["adjoint"], mc_paths=0, random_inputs=2))

        assert report.exit_code == 0, report.summary()
        trees = report.entry("adjoint.P.pairing").details["trees"]
        assert "ScenarioTree(joint, n_steps=1, marks=[u1=0.5])" in trees
        assert "ScenarioTree(joint, n_steps=1, marks=[u1=0.5, u2=0.25])" in trees
        assert "ScenarioTree(joint, n_steps=1, marks=[y1=1])" not in trees

    def test_poisson_convergence_is_sampled(self):
        """Test the order of the sampled Poisson isometry gap on n = 8, 16, 32."""
        report = run_suite(SuiteConfig(checks=["poisson_convergence"]))

        assert report.exit_code == 0, report.summary()
        fit = report.entry("poisson_convergence.mc")
        assert fit.mode is Mode.MC
        assert fit.details["resolutions"] == [8, 16, 32]
        assert len(fit.details["ratio_margins"]) == 2
        assert 0.8 <= fit.lhs <= 1.2
        for n in (8, 16, 32):
            assert report.entry(f"poisson_convergence.mc.n{n}").kind is Kind.GATE

    def test_diagonal_convergence_exact(self):
        """Test the lattice gaps and their agreement with enumerated trees."""
        report = run_suite(SuiteConfig(checks=["diagonal_convergence"], mc_paths=0))

        assert report.exit_code == 0, report.summary()
        wiener = report.entry("diagonal_convergence.wiener")
        assert wiener.details["gaps"] == pytest.approx([0.184877, 0.100353, 0.0521525], rel=1e-5)
        assert wiener.mode is Mode.EXACT
        for model in ("wiener", "poisson"):
            assert report.entry(f"diagonal_convergence.{model}.tree.n16").passed

    def test_diagonal_convergence_sampled(self):
        """Test the sampled diagonal gaps against the lattice values."""
        report = run_suite(SuiteConfig(checks=["diagonal_convergence"]))

        assert report.exit_code == 0, report.summary()
        for model in ("wiener", "poisson"):
            fit = report.entry(f"diagonal_convergence.{model}")
            assert fit.mode is Mode.MC
            assert 0.8 <= fit.lhs <= 1.2
            assert report.entry(f"diagonal_convergence.{model}.mc.n32").passed

    def test_sampling_agreement_is_plumbing(self):
        """Test that entries without a property of their own carry the plumbing tag."""
        report = run_suite(SuiteConfig(checks=["mc_agreement"], mc_paths=1000))

        assert {e.reference for e in report.entries} == {"plumbing"}

    def test_values_independent_of_workers(self):
        """Test that the thread count does not change any value."""
        one = run_suite(SuiteConfig(checks=["doob", "polarization"], mc_paths=0, random_inputs=10))
        four = run_suite(
            SuiteConfig(checks=["doob", "polarization"], mc_paths=0, random_inputs=10, workers=4)
        )

        assert [e.to_dict() for e in one.entries] == [e.to_dict() for e in four.entries]

    def test_input_rng_ignores_run_seed(self):
        """Test that exact-mode inputs do not depend on the seed, sampling seeds do."""
        first = _BrokenCheck(SuiteConfig(seed=1))
        second = _BrokenCheck(SuiteConfig(seed=2))

        assert first.input_rng("x").random() == second.input_rng("x").random()
        assert first.sample_seed("x") != second.sample_seed("x")

    def test_raising_check_becomes_error_entry(self):
        """Test that one broken check does not take the run down."""
        bus = EventBus()

        entries = _BrokenCheck(SuiteConfig(), bus).execute()

        assert [e.id for e in entries] == ["broken.error"]
        assert entries[0].details["type"] == "RuntimeError"
        assert len(bus.history(EventType.CHECK_ERROR)) == 1
        assert len(bus.history(EventType.CHECK_FAILED)) == 1
