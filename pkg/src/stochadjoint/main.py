"""
Command-line entry point.

Subcommands: space, check, kernel, adjoint, report. Command output goes to
stdout; logs go to stderr and, with --log-file, to a file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from stochadjoint import __version__
from stochadjoint.checks.report import CheckReport
from stochadjoint.checks.suite import known_checks, run_suite
from stochadjoint.core.errors import ConfigError, ModelError, ParameterError, WorkbenchError
from stochadjoint.core.events import Event, EventBus, EventType
from stochadjoint.core.settings import MarkSpec, SuiteConfig
from stochadjoint.operators.adjoints import adjoint_J, adjoint_L, adjoint_P, oracle_adjoint
from stochadjoint.operators.integrators import OperatorTag
from stochadjoint.operators.kernels import clark_kernel, extract_K
from stochadjoint.spaces.processes import MarkedProcess, Process
from stochadjoint.spaces.tree import (
    MarkSet,
    Model,
    RandomVariable,
    ScenarioTree,
    build_tree,
    tree_from_descriptor,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

logger = logging.getLogger(__name__)

Input = Union[RandomVariable, Process, MarkedProcess]

NAMED_VARIABLES: Dict[str, Callable[[ScenarioTree], RandomVariable]] = {
    "w1": lambda tree: RandomVariable(tree, tree.n_steps, tree.wiener_path(tree.n_steps)),
    "w1_squared": lambda tree: RandomVariable(
        tree, tree.n_steps, tree.wiener_path(tree.n_steps) ** 2
    ),
    "one": lambda tree: RandomVariable(tree, tree.n_steps, np.ones(tree.level_size(tree.n_steps))),
}

NAMED_PROCESSES: Dict[str, Callable[[ScenarioTree], Process]] = {
    "w": lambda tree: Process.wiener(tree).with_terminal(None),
    "w_squared": lambda tree: Process.from_function(tree, lambda k: tree.wiener_path(k) ** 2),
    "one": lambda tree: Process.constant(tree, 1.0),
    "time": lambda tree: Process.deterministic(tree, list(tree.grid.times[:-1])),
    "count": lambda tree: Process.compensated_count(tree, 0).with_terminal(None),
}

ADJOINTS: Dict[OperatorTag, Callable[[Process, int], Union[Process, MarkedProcess]]] = {
    OperatorTag.L: lambda chi, workers: adjoint_L(chi),
    OperatorTag.J: adjoint_J,
    OperatorTag.P: adjoint_P,
}


def configure_logging(verbose: bool = False, log_file: Optional[str] = None) -> None:
    """Send logs to stderr and optionally to a file; stdout stays reserved for command output."""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def _parse_pair(item: str, flag: str) -> tuple:
    key, sep, value = item.partition("=")
    if not sep or not key:
        raise ConfigError(flag, f"expected key=value, got '{item}'")
    try:
        return key, float(value)
    except ValueError:
        raise ConfigError(flag, f"'{value}' is not a number") from None


def load_config(args: argparse.Namespace) -> SuiteConfig:
    """
    Configuration file (or defaults) with command-line overrides applied.

    Raises:
        ConfigError: Naming the offending field or flag
    """
    config = SuiteConfig.load(Path(args.config) if args.config else None)
    overrides: Dict[str, Any] = {
        "model": args.model,
        "n_steps": args.n_steps,
        "seed": args.seed,
        "mc_paths": args.mc_paths,
        "max_atoms": args.max_atoms,
        "workers": args.workers,
    }
    if args.mark:
        overrides["marks"] = [MarkSpec(*_parse_pair(item, "--mark")) for item in args.mark]
    checks = getattr(args, "checks", None)
    if checks is not None:
        overrides["checks"] = [c.strip() for c in checks.split(",") if c.strip()]
    config.update(**overrides)
    for item in getattr(args, "tolerance", None) or []:
        key, value = _parse_pair(item, "--tolerance")
        config.tolerances.overrides[key] = value
    config.validate()
    return config


def config_tree(config: SuiteConfig) -> ScenarioTree:
    """Exact tree described by the configuration."""
    marks = None
    if Model(config.model).has_marks:
        marks = MarkSet.of((m.label, m.pi) for m in config.marks)
    return build_tree(config.model, config.n_steps, marks, max_atoms=config.max_atoms)


def write_json(data: Dict[str, Any], path: Optional[str]) -> None:
    """Write JSON to `path`, or to stdout without a path."""
    text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False)
    if path is None:
        print(text)
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text + "\n")
    logger.info(f"Wrote {path}")


class Workbench:
    """
    Runs one subcommand against a configuration.

    Every command method returns the process exit code.
    """

    def __init__(self, config: SuiteConfig, event_bus: Optional[EventBus] = None) -> None:
        self._config = config
        self._event_bus = event_bus or EventBus()

    @property
    def config(self) -> SuiteConfig:
        return self._config

    def read_input(
        self, args: argparse.Namespace, named: Dict[str, Callable[[ScenarioTree], Any]]
    ) -> Input:
        """
        Object named by --input (a JSON file) or --input-name.

        A file carrying a space descriptor is read on that space; otherwise the
        configured tree is used.
        """
        if args.input_name:
            if args.input_name not in named:
                raise ParameterError(
                    f"unknown input name '{args.input_name}'; "
                    f"choose from {', '.join(sorted(named))}"
                )
            return named[args.input_name](config_tree(self._config))
        if not args.input:
            raise ParameterError("give --input FILE or --input-name NAME")

        with open(args.input, "r", encoding="utf-8") as f:
            data = json.load(f)
        space = data.get("space")
        tree = (
            tree_from_descriptor(space, max_atoms=self._config.max_atoms)
            if space is not None
            else config_tree(self._config)
        )
        kind = data.get("kind")
        if kind == "random_variable":
            return RandomVariable.from_dict(tree, data)
        if kind == "process":
            return Process.from_dict(tree, data)
        if kind == "marked_process":
            return MarkedProcess.from_dict(tree, data)
        raise ParameterError(f"{args.input}: unsupported input kind '{kind}'")

    def space(self, args: argparse.Namespace) -> int:
        tree = config_tree(self._config)
        if args.output:
            write_json(tree.to_dict(), args.output)
        for k, size in enumerate(tree.level_sizes):
            print(f"level {k} (t={tree.grid.t(k):.6g}): {size} atoms")
        return EXIT_OK

    def check(self, args: argparse.Namespace) -> int:
        report = run_suite(self._config, self._event_bus)
        json_path = args.json or self._config.output.json_path
        csv_path = args.csv or self._config.output.csv_path
        if json_path:
            report.to_json(json_path)
        if csv_path:
            report.to_csv(csv_path)
        if json_path or csv_path:
            self._event_bus.emit(
                Event(
                    EventType.REPORT_WRITTEN,
                    data={"json_path": json_path, "csv_path": csv_path},
                    source="Workbench",
                )
            )
        print(report.summary())
        return report.exit_code

    def kernel(self, args: argparse.Namespace) -> int:
        # a terminal variable wins over the process of the same name
        item = self.read_input(args, {**NAMED_PROCESSES, **NAMED_VARIABLES})
        if isinstance(item, RandomVariable):
            decomposition = clark_kernel(item)
            write_json(decomposition.to_dict(), args.output)
            if args.csv:
                decomposition.kernel.to_csv(args.csv)
            print(
                f"mean {decomposition.mean:.12g}, reconstruction error "
                f"{decomposition.reconstruction_error(item):.3e}",
                file=sys.stderr if args.output is None else sys.stdout,
            )
            return EXIT_OK
        if isinstance(item, MarkedProcess):
            raise ModelError("kernel extraction takes a random variable or a scalar process")

        extraction = extract_K(item, self._config.workers)
        write_json({**extraction.kernel.to_dict(), "mean": extraction.mean.tolist()}, args.output)
        if args.csv:
            extraction.kernel.to_csv(args.csv)
        print(
            f"reconstruction error {extraction.reconstruction_error:.3e}",
            file=sys.stderr if args.output is None else sys.stdout,
        )
        return EXIT_OK

    def adjoint(self, args: argparse.Namespace) -> int:
        tag = OperatorTag(args.which)
        chi = self.read_input(args, NAMED_PROCESSES)
        if not isinstance(chi, Process):
            raise ParameterError("adjoints take a scalar process as input")
        image = ADJOINTS[tag](chi, self._config.workers)
        write_json(image.to_dict(), args.output)
        if args.csv:
            image.to_csv(args.csv)
        if args.compare_oracle:
            delta = float(np.max(np.abs(oracle_adjoint(tag, chi).to_vector() - image.to_vector())))
            print(
                f"max oracle delta: {delta:.3e}",
                file=sys.stderr if args.output is None else sys.stdout,
            )
        return EXIT_OK

    def report(self, args: argparse.Namespace) -> int:
        report = CheckReport.from_json(args.report)
        if args.csv:
            report.to_csv(args.csv)
        print(report.summary())
        inconsistent = [e.id for e in report.entries if not e.is_consistent]
        if inconsistent:
            print(f"pass flags disagree with the stored values: {', '.join(inconsistent)}")
            return EXIT_FAILED
        return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument(
        "--model", choices=[m.value for m in Model], help="driver of the primary tree"
    )
    common.add_argument("--n-steps", type=int, help="time steps of the primary tree")
    common.add_argument(
        "--mark", action="append", metavar="LABEL=PI", help="mark with intensity (repeatable)"
    )
    common.add_argument("--seed", type=int, help="root seed of Monte-Carlo sampling")
    common.add_argument("--mc-paths", type=int, help="paths per Monte-Carlo check (0 disables)")
    common.add_argument("--max-atoms", type=int, help="exact-mode atom cap")
    common.add_argument("--workers", type=int, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--log-file", help="also write logs to this file")

    parser = argparse.ArgumentParser(
        prog="stochadjoint",
        description="Discrete stochastic integrals, their adjoints and the classical inequalities",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    space = commands.add_parser("space", parents=[common], help="build a scenario tree")
    space.add_argument("--output", help="tree JSON file")

    check = commands.add_parser("check", parents=[common], help="run the verification suite")
    check.add_argument("--checks", help=f"comma-separated ids out of: {', '.join(known_checks())}")
    check.add_argument(
        "--tolerance", action="append", metavar="ID=VALUE", help="per-check tolerance"
    )
    check.add_argument("--json", help="report JSON file")
    check.add_argument("--csv", help="report CSV file")

    for name, help_text in (
        ("kernel", "representation kernel of an input"),
        ("adjoint", "apply L*, J* or P*"),
    ):
        sub = commands.add_parser(name, parents=[common], help=help_text)
        source = sub.add_mutually_exclusive_group()
        source.add_argument("--input", help="JSON file of a random variable or process")
        source.add_argument(
            "--input-name", help="named standard input, e.g. w1, w1_squared, one, w"
        )
        sub.add_argument("--output", help="result JSON file (stdout if omitted)")
        sub.add_argument("--csv", help="plot-ready CSV table")
        if name == "adjoint":
            sub.add_argument("--which", required=True, choices=[t.value for t in OperatorTag])
            sub.add_argument(
                "--compare-oracle",
                action="store_true",
                help="print the distance to the matrix oracle",
            )

    report = commands.add_parser("report", parents=[common], help="re-render a report JSON")
    report.add_argument("report", help="report JSON written by `check`")
    report.add_argument("--csv", help="CSV file")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.log_file)
    try:
        workbench = Workbench(load_config(args))
        return getattr(workbench, args.command)(args)
    except (WorkbenchError, OSError, json.JSONDecodeError) as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
