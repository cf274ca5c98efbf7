"""
Finite filtered probability spaces.

A scenario tree discretizes [0, 1] into n_steps cells. Every atom at level k
branches into the same `b` children, so atoms are addressed by their index in a
level array: the children of atom `a` are `a*b .. a*b + b-1`, its parent is
`a // b` and the branch that led to it is `a % b`. All level quantities are flat
numpy arrays in that order, which turns conditional expectation into a reshape
followed by a contraction with branch probabilities.

Drivers:
    wiener  - symmetric +-sqrt(dt) moves, b = 2
    poisson - one Bernoulli(pi_i * dt) jump flag per mark, b = 2**m
    joint   - product of both, b = 2 * 2**m
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from threading import Lock
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from stochadjoint.core.errors import (
    IntensityError,
    LevelError,
    ParameterError,
    SpaceMismatchError,
    TreeSizeError,
)
from stochadjoint.core.settings import DEFAULT_MAX_ATOMS

logger = logging.getLogger(__name__)

PATH_CHUNK = 8192
# largest level that can still be indexed with int64 atom numbers
INDEX_LIMIT = 2**62


class Model(str, Enum):
    """Driver carried by a scenario tree."""

    WIENER = "wiener"
    POISSON = "poisson"
    JOINT = "joint"

    @property
    def has_wiener(self) -> bool:
        return self in (Model.WIENER, Model.JOINT)

    @property
    def has_marks(self) -> bool:
        return self in (Model.POISSON, Model.JOINT)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * dt on [0, 1]."""

    n_steps: int

    def __post_init__(self) -> None:
        if isinstance(self.n_steps, bool) or not isinstance(self.n_steps, int) or self.n_steps < 1:
            raise ParameterError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps

    @property
    def times(self) -> np.ndarray:
        """Grid points t_0 = 0, ..., t_n = 1."""
        return np.linspace(0.0, 1.0, self.n_steps + 1)

    def t(self, k: int) -> float:
        return k / self.n_steps


@dataclass(frozen=True)
class Mark:
    """A point y_i of the finite mark space with intensity pi_i."""

    label: str
    pi: float


@dataclass(frozen=True)
class MarkSet:
    """
    Finite support of the intensity measure.

    Attributes:
        marks: Marks in a fixed order; mark i is column i of every marked array
    """

    marks: Tuple[Mark, ...] = ()

    def __post_init__(self) -> None:
        labels = [m.label for m in self.marks]
        if len(set(labels)) != len(labels):
            raise ParameterError(f"mark labels must be unique, got {labels}")
        for mark in self.marks:
            if not math.isfinite(mark.pi) or mark.pi < 0:
                raise IntensityError(mark.label, mark.pi)

    @classmethod
    def of(cls, marks: Union[Iterable[Tuple[str, float]], Dict[str, float], None]) -> MarkSet:
        """Build from (label, pi) pairs or a {label: pi} mapping."""
        if marks is None:
            return cls()
        items = marks.items() if isinstance(marks, dict) else marks
        return cls(tuple(Mark(str(label), float(pi)) for label, pi in items))

    def __len__(self) -> int:
        return len(self.marks)

    def __iter__(self) -> Iterator[Mark]:
        return iter(self.marks)

    @property
    def labels(self) -> List[str]:
        return [m.label for m in self.marks]

    @property
    def intensities(self) -> np.ndarray:
        return np.array([m.pi for m in self.marks], dtype=float)

    @property
    def total(self) -> float:
        return float(self.intensities.sum())

    def jump_probabilities(self, dt: float) -> np.ndarray:
        """
        Per-step jump probability q_i = pi_i * dt of every mark.

        Raises:
            IntensityError: If some q_i is not strictly inside (0, 1)
        """
        q = self.intensities * dt
        for mark, qi in zip(self.marks, q):
            if not 0.0 < qi < 1.0:
                raise IntensityError(mark.label, float(qi))
        return q


@dataclass(frozen=True)
class BranchTable:
    """
    What happens on one step, per branch code.

    Attributes:
        probabilities: Branch probabilities, shape (b,)
        wiener: Wiener increment of each branch, shape (b,); zeros without a Wiener driver
        flags: Jump indicator per branch and mark, shape (b, m)
        q: Jump probability per mark, shape (m,)
    """

    probabilities: np.ndarray
    wiener: np.ndarray
    flags: np.ndarray
    q: np.ndarray

    @property
    def size(self) -> int:
        return int(self.probabilities.shape[0])

    @property
    def compensated(self) -> np.ndarray:
        """Compensated jump increments flag - q, shape (b, m)."""
        return self.flags - self.q

    @classmethod
    def build(cls, model: Model, marks: MarkSet, dt: float) -> BranchTable:
        sqrt_dt = math.sqrt(dt)
        if model is Model.WIENER:
            return cls(
                probabilities=np.array([0.5, 0.5]),
                wiener=np.array([sqrt_dt, -sqrt_dt]),
                flags=np.zeros((2, 0)),
                q=np.zeros(0),
            )

        q = marks.jump_probabilities(dt)
        m = len(marks)
        codes = np.arange(2**m)
        shifts = m - 1 - np.arange(m)
        # code 0 jumps on every mark
        flags = 1.0 - ((codes[:, None] >> shifts[None, :]) & 1)
        probabilities = np.prod(np.where(flags > 0, q, 1.0 - q), axis=1)

        if model is Model.POISSON:
            return cls(probabilities, np.zeros(2**m), flags, q)

        return cls(
            probabilities=0.5 * np.tile(probabilities, 2),
            wiener=np.repeat([sqrt_dt, -sqrt_dt], 2**m),
            flags=np.tile(flags, (2, 1)),
            q=q,
        )


@dataclass(frozen=True)
class Atom:
    """
    One cell of the partition generating F_{t_k}.

    Attributes:
        level: Time index k
        index: Position in the level array
        parent: Index of the parent atom at level k-1 (None at the root)
        probability: Mass of the cell
        wiener_increment: Wiener move of the step into this atom
        jump_flags: Per-mark jump indicators of the step into this atom
        wiener_value: w(t_k) on this atom
    """

    level: int
    index: int
    parent: Optional[int]
    probability: float
    wiener_increment: float
    jump_flags: Tuple[int, ...]
    wiener_value: float


class ScenarioTree:
    """
    Immutable scenario tree with exact conditional expectation.

    Level arrays are computed on first use and cached read-only, so a tree can be
    shared by concurrent readers. A tree built with `exact=False` only supports
    sampling; any level larger than the atom cap raises TreeSizeError.

    Example:
        >>> tree = build_wiener_tree(3)
        >>> [tree.level_size(k) for k in range(4)]
        [1, 2, 4, 8]
    """

    def __init__(
        self,
        n_steps: int,
        model: Union[Model, str] = Model.WIENER,
        marks: Optional[MarkSet] = None,
        max_atoms: int = DEFAULT_MAX_ATOMS,
        exact: bool = True,
    ) -> None:
        self._grid = TimeGrid(n_steps)
        self._model = Model(model)
        self._marks = marks if (marks is not None and self._model.has_marks) else MarkSet()
        if self._model.has_marks and len(self._marks) == 0:
            raise ParameterError(f"model '{self._model.value}' needs at least one mark")
        self._max_atoms = max_atoms
        self._exact = exact
        self._branches = BranchTable.build(self._model, self._marks, self._grid.dt)
        self._cache: Dict[Tuple[str, int], np.ndarray] = {}
        self._lock = Lock()

        terminal = self.branching**n_steps
        if exact and terminal > max_atoms:
            raise TreeSizeError(terminal, max_atoms)

        logger.debug(
            f"Built {self._model.value} tree: n_steps={n_steps}, branching={self.branching}, "
            f"terminal atoms={terminal}, exact={exact}"
        )

    def __repr__(self) -> str:
        marks = ", ".join(f"{m.label}={m.pi:g}" for m in self._marks)
        return f"ScenarioTree({self._model.value}, n_steps={self.n_steps}, marks=[{marks}])"

    # -- descriptors -------------------------------------------------------

    @property
    def grid(self) -> TimeGrid:
        return self._grid

    @property
    def model(self) -> Model:
        return self._model

    @property
    def marks(self) -> MarkSet:
        return self._marks

    @property
    def branches(self) -> BranchTable:
        return self._branches

    @property
    def n_steps(self) -> int:
        return self._grid.n_steps

    @property
    def dt(self) -> float:
        return self._grid.dt

    @property
    def branching(self) -> int:
        return self._branches.size

    @property
    def n_marks(self) -> int:
        return len(self._marks)

    @property
    def exact(self) -> bool:
        return self._exact

    @property
    def max_atoms(self) -> int:
        return self._max_atoms

    @property
    def has_wiener(self) -> bool:
        return self._model.has_wiener

    @property
    def has_marks(self) -> bool:
        return self._model.has_marks

    @property
    def signature(self) -> Tuple[Any, ...]:
        """Identifies the probability space; equal signatures mean interchangeable trees."""
        return (
            self._model.value,
            self.n_steps,
            tuple((m.label, m.pi) for m in self._marks),
        )

    def require_same(self, other: ScenarioTree) -> None:
        """
        Raises:
            SpaceMismatchError: If `other` is a different probability space
        """
        if other is not self and other.signature != self.signature:
            raise SpaceMismatchError(f"objects live on different trees: {self!r} and {other!r}")

    def level_size(self, k: int) -> int:
        self._check_level(k)
        return self.branching**k

    @property
    def level_sizes(self) -> List[int]:
        return [self.branching**k for k in range(self.n_steps + 1)]

    # -- level arrays ------------------------------------------------------

    def _check_level(self, k: int) -> None:
        if not 0 <= k <= self.n_steps:
            raise LevelError(f"level {k} outside 0..{self.n_steps}")

    def _require_exact(self, k: int) -> None:
        size = self.branching**k
        if size > self._max_atoms:
            raise TreeSizeError(size, self._max_atoms)

    def _cached(self, name: str, k: int, build: Any) -> np.ndarray:
        key = (name, k)
        value = self._cache.get(key)
        if value is None:
            self._check_level(k)
            self._require_exact(k)
            value = np.asarray(build())
            value.flags.writeable = False
            with self._lock:
                value = self._cache.setdefault(key, value)
        return value

    def probabilities(self, k: int) -> np.ndarray:
        """Atom probabilities at level k."""

        def build() -> np.ndarray:
            if k == 0:
                return np.ones(1)
            return np.outer(self.probabilities(k - 1), self._branches.probabilities).ravel()

        return self._cached("probabilities", k, build)

    def branch_codes(self, k: int) -> np.ndarray:
        """Branch taken on the step from level k-1 into each level-k atom."""
        if k == 0:
            raise LevelError("the root has no incoming branch")
        return self._cached(
            "codes", k, lambda: np.tile(np.arange(self.branching), self.branching ** (k - 1))
        )

    def parents(self, k: int) -> np.ndarray:
        if k == 0:
            raise LevelError("the root has no parent")
        return self._cached("parents", k, lambda: np.arange(self.branching**k) // self.branching)

    def wiener_increments(self, k: int) -> np.ndarray:
        """Delta w of the step t_{k-1} -> t_k on each level-k atom."""
        return self._cached("dw", k, lambda: self._branches.wiener[self.branch_codes(k)])

    def jump_flags(self, k: int) -> np.ndarray:
        """Jump indicators of the step into each level-k atom, shape (b**k, m)."""
        return self._cached("flags", k, lambda: self._branches.flags[self.branch_codes(k)])

    def compensated_increments(self, k: int) -> np.ndarray:
        """flag - q of the step into each level-k atom, shape (b**k, m)."""
        return self._cached("dnu", k, lambda: self._branches.compensated[self.branch_codes(k)])

    def wiener_path(self, k: int) -> np.ndarray:
        """w(t_k) on each level-k atom: the sum of increments along the ancestor chain."""

        def build() -> np.ndarray:
            if k == 0:
                return np.zeros(1)
            return self.lift(self.wiener_path(k - 1), k - 1, k) + self.wiener_increments(k)

        return self._cached("w", k, build)

    def jump_counts(self, k: int) -> np.ndarray:
        """Number of jumps per mark up to t_k on each level-k atom, shape (b**k, m)."""

        def build() -> np.ndarray:
            if k == 0:
                return np.zeros((1, self.n_marks))
            return self.lift(self.jump_counts(k - 1), k - 1, k) + self.jump_flags(k)

        return self._cached("counts", k, build)

    # -- algebra -----------------------------------------------------------

    def lift(self, values: np.ndarray, from_level: int, to_level: int) -> np.ndarray:
        """
        View a level-`from_level` array as a level-`to_level` array.

        Every descendant inherits the value of its ancestor. Trailing axes are kept.
        """
        if to_level < from_level:
            raise LevelError(f"cannot lift from level {from_level} down to level {to_level}")
        self._check_level(to_level)
        self._require_exact(to_level)
        if to_level == from_level:
            return values
        return np.repeat(values, self.branching ** (to_level - from_level), axis=0)

    def conditional_expectation(
        self, values: np.ndarray, from_level: int, to_level: int
    ) -> np.ndarray:
        """
        E[x | F_{t_k}] of a level-m array x, as a level-k array.

        The conditional law of the m-k steps below a level-k atom does not depend on
        the atom, so the expectation is a contraction with the level-(m-k) probabilities.
        Trailing axes are kept.

        Raises:
            LevelError: If to_level > from_level
        """
        if to_level > from_level:
            raise LevelError(
                f"conditioning target level {to_level} is after the variable's level {from_level}"
            )
        self._check_level(from_level)
        self._check_level(to_level)
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.branching**from_level:
            raise LevelError(
                f"array of length {values.shape[0]} is not a level-{from_level} array "
                f"({self.branching ** from_level} atoms)"
            )
        if to_level == from_level:
            return values
        depth = from_level - to_level
        blocks = values.reshape(self.branching**to_level, self.branching**depth, *values.shape[1:])
        return np.tensordot(self.probabilities(depth), blocks, axes=([0], [1]))

    def expectation(self, values: np.ndarray, level: int) -> Union[float, np.ndarray]:
        """E[x] of a level array; trailing axes are kept."""
        result = self.conditional_expectation(values, level, 0)[0]
        return float(result) if np.ndim(result) == 0 else result

    # -- views & serialization --------------------------------------------

    def atom(self, level: int, index: int) -> Atom:
        size = self.level_size(level)
        if not 0 <= index < size:
            raise LevelError(f"atom {index} outside level {level} of size {size}")
        if level == 0:
            return Atom(0, 0, None, 1.0, 0.0, (0,) * self.n_marks, 0.0)
        return Atom(
            level=level,
            index=index,
            parent=index // self.branching,
            probability=float(self.probabilities(level)[index]),
            wiener_increment=float(self.wiener_increments(level)[index]),
            jump_flags=tuple(int(f) for f in self.jump_flags(level)[index]),
            wiener_value=float(self.wiener_path(level)[index]),
        )

    def level_atoms(self, level: int) -> List[Atom]:
        return [self.atom(level, i) for i in range(self.level_size(level))]

    def to_dict(self) -> Dict[str, Any]:
        """
        Documented JSON form: the space descriptor plus, per level, parents,
        probabilities, Wiener increments and jump flags.
        """
        levels = []
        for k in range(self.n_steps + 1):
            entry: Dict[str, Any] = {
                "level": k,
                "t": self._grid.t(k),
                "probabilities": self.probabilities(k).tolist(),
            }
            if k > 0:
                entry["parents"] = self.parents(k).tolist()
                if self.has_wiener:
                    entry["wiener_increments"] = self.wiener_increments(k).tolist()
                if self.has_marks:
                    entry["jump_flags"] = self.jump_flags(k).astype(int).tolist()
            levels.append(entry)
        return {
            "space": space_descriptor(self),
            "branching": self.branching,
            "levels": levels,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], max_atoms: int = DEFAULT_MAX_ATOMS) -> ScenarioTree:
        """Rebuild a tree from `to_dict` output or from a bare space descriptor."""
        space = data.get("space", data)
        tree = tree_from_descriptor(space, max_atoms=max_atoms)
        for entry in data.get("levels", []):
            stored = np.asarray(entry["probabilities"], dtype=float)
            if not np.allclose(stored, tree.probabilities(int(entry["level"])), rtol=0, atol=1e-12):
                raise SpaceMismatchError(
                    f"level {entry['level']} probabilities do not match the model"
                )
        return tree


def space_descriptor(tree: ScenarioTree) -> Dict[str, Any]:
    """JSON descriptor identifying the probability space of an object."""
    return {
        "model": tree.model.value,
        "n_steps": tree.n_steps,
        "marks": [{"label": m.label, "pi": m.pi} for m in tree.marks],
    }


def tree_from_descriptor(space: Dict[str, Any], max_atoms: int = DEFAULT_MAX_ATOMS) -> ScenarioTree:
    marks = MarkSet.of((m["label"], m["pi"]) for m in space.get("marks", []))
    return build_tree(space["model"], int(space["n_steps"]), marks, max_atoms=max_atoms)


@dataclass(frozen=True)
class RandomVariable:
    """
    An F_{t_k}-measurable random variable: one value per level-k atom.

    Attributes:
        tree: Probability space
        level: Time index k
        values: Values on the level-k atoms
    """

    tree: ScenarioTree
    level: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        expected = self.tree.level_size(self.level)
        if values.shape != (expected,):
            raise LevelError(
                f"level-{self.level} variable needs {expected} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ParameterError("random variable values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def mean(self) -> float:
        return float(self.tree.expectation(self.values, self.level))

    def condition(self, level: int) -> RandomVariable:
        return conditional_expectation(self, level)

    def lift(self, level: int) -> RandomVariable:
        return RandomVariable(self.tree, level, self.tree.lift(self.values, self.level, level))

    def moment(self, p: float) -> float:
        return float(self.tree.expectation(np.abs(self.values) ** p, self.level))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "random_variable",
            "space": space_descriptor(self.tree),
            "level": self.level,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, tree: ScenarioTree, data: Dict[str, Any]) -> RandomVariable:
        _check_descriptor(tree, data)
        level = int(data.get("level", tree.n_steps))
        return cls(tree, level, np.asarray(data["values"], dtype=float))


def _check_descriptor(tree: ScenarioTree, data: Dict[str, Any]) -> None:
    space = data.get("space")
    if space is not None and space != space_descriptor(tree):
        raise SpaceMismatchError(f"input was written for {space}, not for {space_descriptor(tree)}")


def build_wiener_tree(
    n_steps: int, max_atoms: int = DEFAULT_MAX_ATOMS, exact: bool = True
) -> ScenarioTree:
    """
    Binary tree of +-sqrt(dt) moves with probability 1/2 each.

    Raises:
        TreeSizeError: If exact and 2**n_steps exceeds max_atoms
    """
    return ScenarioTree(n_steps, Model.WIENER, None, max_atoms=max_atoms, exact=exact)


def build_poisson_tree(
    n_steps: int, marks: MarkSet, max_atoms: int = DEFAULT_MAX_ATOMS, exact: bool = True
) -> ScenarioTree:
    """
    Independent Bernoulli(pi_i * dt) jumps per mark and step.

    Raises:
        IntensityError: If some pi_i * dt is not inside (0, 1)
        TreeSizeError: If exact and the terminal level exceeds max_atoms
    """
    return ScenarioTree(n_steps, Model.POISSON, marks, max_atoms=max_atoms, exact=exact)


def build_joint_tree(
    n_steps: int, marks: MarkSet, max_atoms: int = DEFAULT_MAX_ATOMS, exact: bool = True
) -> ScenarioTree:
    """Product branching of the Wiener sign and every mark flag."""
    return ScenarioTree(n_steps, Model.JOINT, marks, max_atoms=max_atoms, exact=exact)


def build_tree(
    model: Union[Model, str],
    n_steps: int,
    marks: Optional[MarkSet] = None,
    max_atoms: int = DEFAULT_MAX_ATOMS,
    exact: bool = True,
) -> ScenarioTree:
    model = Model(model)
    if model is Model.WIENER:
        return build_wiener_tree(n_steps, max_atoms=max_atoms, exact=exact)
    if marks is None:
        raise ParameterError(f"model '{model.value}' needs a mark set")
    if model is Model.POISSON:
        return build_poisson_tree(n_steps, marks, max_atoms=max_atoms, exact=exact)
    return build_joint_tree(n_steps, marks, max_atoms=max_atoms, exact=exact)


def conditional_expectation(x: RandomVariable, target_level: int) -> RandomVariable:
    """
    E[x | F_{t_k}] for k = target_level.

    Raises:
        LevelError: If target_level > x.level
    """
    values = x.tree.conditional_expectation(x.values, x.level, target_level)
    return RandomVariable(x.tree, target_level, values)


@dataclass(frozen=True)
class PathSample:
    """
    Root-to-leaf paths drawn with the branch probabilities.

    Attributes:
        tree: Tree the paths were drawn from
        codes: Branch code per path and step, shape (n_paths, n_steps)
        seed: Seed the sample was drawn with
    """

    tree: ScenarioTree
    codes: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def n_paths(self) -> int:
        return int(self.codes.shape[0])

    @property
    def wiener_increments(self) -> np.ndarray:
        """Shape (n_paths, n_steps)."""
        return self.tree.branches.wiener[self.codes]

    @property
    def wiener_path(self) -> np.ndarray:
        """w(t_k) along each path, shape (n_paths, n_steps + 1)."""
        w = np.zeros((self.n_paths, self.tree.n_steps + 1))
        np.cumsum(self.wiener_increments, axis=1, out=w[:, 1:])
        return w

    @property
    def jump_flags(self) -> np.ndarray:
        """Shape (n_paths, n_steps, m)."""
        return self.tree.branches.flags[self.codes]

    @property
    def compensated_increments(self) -> np.ndarray:
        """Shape (n_paths, n_steps, m)."""
        return self.tree.branches.compensated[self.codes]

    def atoms(self, level: int) -> np.ndarray:
        """Index of the level-k atom each path passes through."""
        self.tree._check_level(level)
        if self.tree.branching**level > INDEX_LIMIT:
            raise TreeSizeError(self.tree.branching**level, INDEX_LIMIT)
        index = np.zeros(self.n_paths, dtype=np.int64)
        for j in range(level):
            index = index * self.tree.branching + self.codes[:, j]
        return index

    def frequencies(self, level: int) -> np.ndarray:
        """Empirical probability of every level-k atom."""
        size = self.tree.level_size(level)
        if size > self.tree.max_atoms:
            raise TreeSizeError(size, self.tree.max_atoms)
        return np.bincount(self.atoms(level), minlength=size) / self.n_paths


def sample_paths(tree: ScenarioTree, n_paths: int, seed: int, workers: int = 1) -> PathSample:
    """
    Draw paths in fixed-size chunks.

    Chunk c uses its own stream SeedSequence(seed, spawn_key=(c,)), so the result
    depends on (seed, n_paths) only and not on the number of workers.

    Raises:
        ParameterError: If n_paths < 1
    """
    if n_paths < 1:
        raise ParameterError(f"n_paths must be at least 1, got {n_paths}")

    probabilities = tree.branches.probabilities
    n_chunks = -(-n_paths // PATH_CHUNK)

    def draw(chunk: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))
        size = min(PATH_CHUNK, n_paths - chunk * PATH_CHUNK)
        return rng.choice(tree.branching, size=(size, tree.n_steps), p=probabilities)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts: Sequence[np.ndarray] = list(pool.map(draw, range(n_chunks)))

    codes = np.concatenate(parts).astype(np.int64)
    logger.debug(f"Sampled {n_paths} paths on {tree!r} with seed {seed} in {n_chunks} chunks")
    return PathSample(tree, codes, seed)
