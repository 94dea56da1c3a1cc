"""Semialgebraic sets, spatio-temporal partitions and their adjacency data.

Continuous state spaces are split into interval-box grids; lattice state
spaces are split into singleton cells plus one tail cell. Grid partitions
record every shared facet between cells, lattice partitions record the jump
neighbourhoods between cells.
"""

import logging
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.config import CONTROL_GRID_STEP
from src.polynomials import Polynomial, Variable

logger = logging.getLogger(__name__)

Point = Tuple[float, ...]


class RegionError(ValueError):
    """Raised for invalid boxes, partitions or neighbourhood queries."""


@dataclass(frozen=True)
class IntervalBox:
    """Axis-aligned box with one (possibly infinite) interval per variable."""

    variables: Tuple[Variable, ...]
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if not (len(self.variables) == len(self.lower) == len(self.upper)):
            raise RegionError(
                f"Box has {len(self.variables)} variables but {len(self.lower)} lower and {len(self.upper)} upper bounds"
            )
        if len(set(self.variables)) != len(self.variables):
            raise RegionError(f"Box variables must be distinct: {[v.name for v in self.variables]}")
        for var, lo, hi in zip(self.variables, self.lower, self.upper):
            if math.isnan(lo) or math.isnan(hi) or lo > hi:
                raise RegionError(f"Invalid interval [{lo}, {hi}] for {var.name}")
            if lo == math.inf or hi == -math.inf:
                raise RegionError(f"Empty interval [{lo}, {hi}] for {var.name}")

    @classmethod
    def from_bounds(cls, bounds: Mapping[Variable, Tuple[float, float]]) -> "IntervalBox":
        variables = tuple(bounds)
        return cls(variables, tuple(bounds[v][0] for v in variables), tuple(bounds[v][1] for v in variables))

    @property
    def dimension(self) -> int:
        return len(self.variables)

    def bounds(self, variable: Variable) -> Tuple[float, float]:
        i = self.index(variable)
        return self.lower[i], self.upper[i]

    def index(self, variable: Variable) -> int:
        try:
            return self.variables.index(variable)
        except ValueError:
            raise RegionError(f"Variable {variable.name} is not a dimension of this box") from None

    def is_degenerate(self, variable: Variable) -> bool:
        lo, hi = self.bounds(variable)
        return lo == hi

    @property
    def bounded(self) -> bool:
        return all(math.isfinite(v) for v in self.lower + self.upper)

    @property
    def volume_positive(self) -> bool:
        return all(hi > lo for lo, hi in zip(self.lower, self.upper))

    def product(self, other: "IntervalBox") -> "IntervalBox":
        overlap = set(self.variables) & set(other.variables)
        if overlap:
            raise RegionError(f"Cannot take product of boxes sharing {[v.name for v in overlap]}")
        return IntervalBox(self.variables + other.variables, self.lower + other.lower, self.upper + other.upper)

    def restrict(self, variables: Iterable[Variable]) -> "IntervalBox":
        keep = [v for v in self.variables if v in set(variables)]
        return IntervalBox(tuple(keep), tuple(self.bounds(v)[0] for v in keep), tuple(self.bounds(v)[1] for v in keep))

    def with_bounds(self, variable: Variable, lower: float, upper: float) -> "IntervalBox":
        i = self.index(variable)
        lo = list(self.lower)
        hi = list(self.upper)
        lo[i], hi[i] = lower, upper
        return IntervalBox(self.variables, tuple(lo), tuple(hi))

    def contains(self, point: Sequence[float], tol: float = 0.0) -> bool:
        """Closed membership test."""
        return all(lo - tol <= x <= hi + tol for x, lo, hi in zip(point, self.lower, self.upper))

    def contains_half_open(self, point: Sequence[float], domain: Optional["IntervalBox"] = None) -> bool:
        """Lower-closed, upper-open membership; the domain's own upper face stays closed."""
        for i, (x, lo, hi) in enumerate(zip(point, self.lower, self.upper)):
            if x < lo:
                return False
            closed_top = lo == hi or (domain is not None and hi == domain.upper[i])
            if x > hi or (x == hi and not closed_top):
                return False
        return True

    def distance(self, point: Sequence[float]) -> float:
        gaps = [max(lo - x, 0.0, x - hi) for x, lo, hi in zip(point, self.lower, self.upper)]
        return float(np.linalg.norm(gaps))

    def to_set(self) -> "SemialgebraicSet":
        return SemialgebraicSet(self)

    def grid(self, step: float = CONTROL_GRID_STEP) -> np.ndarray:
        """Cartesian grid with spacing ``step`` including both endpoints.

        Returns an array of shape (points, dimension); a zero-dimensional box
        yields a single empty point.
        """
        if not self.bounded:
            raise RegionError("Cannot grid an unbounded box")
        axes = []
        for lo, hi in zip(self.lower, self.upper):
            count = int(round((hi - lo) / step)) + 1 if hi > lo else 1
            axes.append(np.linspace(lo, hi, max(count, 1)))
        if not axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def __str__(self) -> str:
        parts = []
        for var, lo, hi in zip(self.variables, self.lower, self.upper):
            left = "(" if lo == -math.inf else "["
            right = ")" if hi == math.inf else "]"
            parts.append(f"{var.name}∈{left}{lo:g},{hi:g}{right}")
        return " × ".join(parts)


@dataclass(frozen=True)
class SemialgebraicSet:
    """Basic closed semialgebraic set: a box plus extra polynomial constraints.

    Box bounds are implicit constraints; ``inequalities`` (p >= 0) and
    ``equalities`` (p = 0) list the additional ones.
    """

    box: IntervalBox
    inequalities: Tuple[Polynomial, ...] = ()
    equalities: Tuple[Polynomial, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "inequalities", tuple(self.inequalities))
        object.__setattr__(self, "equalities", tuple(self.equalities))
        declared = set(self.box.variables)
        for poly in self.inequalities + self.equalities:
            stray = [v.name for v in poly.variables() if v not in declared]
            if stray:
                raise RegionError(f"Constraint {poly} uses undeclared variables {stray}")

    @property
    def variables(self) -> Tuple[Variable, ...]:
        return self.box.variables

    @property
    def bounded(self) -> bool:
        return self.box.bounded

    def all_inequalities(self) -> List[Polynomial]:
        """One inequality per finite bound of every non-degenerate dimension, then the extras."""
        result = []
        for var, lo, hi in zip(self.box.variables, self.box.lower, self.box.upper):
            if lo == hi:
                continue
            x = Polynomial.variable(var)
            if math.isfinite(lo):
                result.append(x - lo)
            if math.isfinite(hi):
                result.append(hi - x)
        return result + list(self.inequalities)

    def all_equalities(self) -> List[Polynomial]:
        result = [
            Polynomial.variable(var) - lo
            for var, lo, hi in zip(self.box.variables, self.box.lower, self.box.upper)
            if lo == hi
        ]
        return result + list(self.equalities)

    def contains(self, values: Mapping[Variable, float], tol: float = 1e-9) -> bool:
        point = [values[v] for v in self.box.variables]
        if not self.box.contains(point, tol):
            return False
        return all(p.evaluate(values) >= -tol for p in self.inequalities) and all(
            abs(p.evaluate(values)) <= tol for p in self.equalities
        )

    def product(self, other: "SemialgebraicSet") -> "SemialgebraicSet":
        return SemialgebraicSet(
            self.box.product(other.box),
            self.inequalities + other.inequalities,
            self.equalities + other.equalities,
        )


@dataclass(frozen=True)
class Facet:
    """Shared face of two adjacent grid cells.

    ``normal`` is the unit vector along ``axis`` pointing from the first cell
    into the second.
    """

    axis: Variable
    value: float
    box: IntervalBox
    normal: Tuple[float, ...]

    def as_set(self) -> SemialgebraicSet:
        return SemialgebraicSet(self.box)

    def reversed(self) -> "Facet":
        return Facet(self.axis, self.value, self.box, tuple(-n for n in self.normal))


def facet(cell_j: IntervalBox, cell_k: IntervalBox) -> Optional[Facet]:
    """Shared facet of two boxes over the same variables, or None.

    Only full facets count: boxes that meet in a set of dimension below n - 1
    (corners, edges in 3-D) have no facet.
    """
    if cell_j.variables != cell_k.variables:
        raise RegionError("Cells must be boxes over the same variables")
    touching = []
    lower, upper = [], []
    for i, var in enumerate(cell_j.variables):
        lo = max(cell_j.lower[i], cell_k.lower[i])
        hi = min(cell_j.upper[i], cell_k.upper[i])
        if lo > hi:
            return None
        if lo == hi:
            touching.append(i)
        lower.append(lo)
        upper.append(hi)
    if len(touching) != 1:
        return None
    axis = touching[0]
    value = lower[axis]
    if cell_j.upper[axis] == value and cell_k.lower[axis] == value:
        direction = 1.0
    elif cell_j.lower[axis] == value and cell_k.upper[axis] == value:
        direction = -1.0
    else:
        return None
    normal = tuple(direction if i == axis else 0.0 for i in range(cell_j.dimension))
    return Facet(cell_j.variables[axis], value, IntervalBox(cell_j.variables, tuple(lower), tuple(upper)), normal)


@dataclass(frozen=True)
class DiscreteCell:
    """Set of lattice states: explicit points, or a tail (lattice ∩ box).

    Tail cells contain every integer point of ``box`` whose coordinates along
    the axes listed in ``levels`` take one of the listed values.
    """

    variables: Tuple[Variable, ...]
    points: Optional[Tuple[Point, ...]] = None
    box: Optional[IntervalBox] = None
    levels: Mapping[int, Tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self):
        if (self.points is None) == (self.box is None):
            raise RegionError("A discrete cell is either an explicit point list or a tail box")
        if self.points is not None:
            object.__setattr__(self, "points", tuple(tuple(float(x) for x in p) for p in self.points))
            if not self.points:
                raise RegionError("Finite discrete cells need at least one point")

    @property
    def is_finite(self) -> bool:
        return self.points is not None

    @property
    def is_singleton(self) -> bool:
        return self.is_finite and len(self.points) == 1

    def contains(self, point: Sequence[float]) -> bool:
        point = tuple(float(x) for x in point)
        if self.is_finite:
            return point in self.points
        if any(x != round(x) for x in point) or not self.box.contains(point):
            return False
        return all(point[axis] in values for axis, values in self.levels.items())

    def enumerate(self, limit: Optional[Sequence[float]] = None) -> List[Point]:
        """List member states, truncating unbounded axes at ``limit``."""
        if self.is_finite:
            return list(self.points)
        axes = []
        for i, (lo, hi) in enumerate(zip(self.box.lower, self.box.upper)):
            if i in self.levels:
                axes.append([v for v in self.levels[i] if lo <= v <= hi])
                continue
            top = hi if math.isfinite(hi) else (limit[i] if limit is not None else None)
            if top is None or not math.isfinite(lo):
                raise RegionError("Cannot enumerate an unbounded tail cell without a limit")
            axes.append(np.arange(math.ceil(lo), math.floor(top) + 1, dtype=float).tolist())
        return [tuple(p) for p in product(*axes)]

    def region(self) -> SemialgebraicSet:
        """Closed set used for constraint generation."""
        if self.is_singleton:
            point = self.points[0]
            return SemialgebraicSet(IntervalBox(self.variables, point, point))
        return overapproximate_tail(self)

    def distance(self, point: Sequence[float]) -> float:
        if self.is_finite:
            return min(float(np.linalg.norm(np.subtract(p, point))) for p in self.points)
        return self.box.distance(point)


def overapproximate_tail(cell: DiscreteCell) -> SemialgebraicSet:
    """Box superset of a discrete cell.

    Tail cells keep their box, so level restrictions such as x2 ∈ {0, 1}
    relax to 0 <= x2 <= 1. Finite cells get their bounding box, which is a
    point (pure equalities) for singletons.
    """
    if cell.is_finite:
        coords = np.array(cell.points)
        return SemialgebraicSet(IntervalBox(cell.variables, tuple(coords.min(axis=0)), tuple(coords.max(axis=0))))
    box = cell.box
    lower, upper = list(box.lower), list(box.upper)
    for axis, values in cell.levels.items():
        inside = [v for v in values if box.lower[axis] <= v <= box.upper[axis]]
        lower[axis], upper[axis] = min(inside), max(inside)
    return SemialgebraicSet(IntervalBox(cell.variables, tuple(lower), tuple(upper)))


@dataclass(frozen=True)
class JumpNeighborhood:
    """States of cell ``source`` that can jump into cell ``target``.

    ``landings`` lists the states of ``target`` those jumps reach.
    """

    target: int
    source: int
    states: Tuple[Point, ...]
    landings: Tuple[Point, ...]


Cell = Union[IntervalBox, DiscreteCell]


@dataclass(frozen=True)
class Partition:
    """Spatial cells, optional time grid, and coupling data between cells."""

    cells: Tuple[Cell, ...]
    domain: IntervalBox
    time_grid: Optional[Tuple[float, ...]] = None
    adjacency: Tuple[Tuple[int, int, Facet], ...] = ()
    neighborhoods: Tuple[JumpNeighborhood, ...] = ()
    grid_edges: Optional[Tuple[Tuple[float, ...], ...]] = None

    def __post_init__(self):
        if not self.cells:
            raise RegionError("A partition needs at least one cell")
        if self.time_grid is not None:
            grid = tuple(float(t) for t in self.time_grid)
            if len(grid) < 2 or grid[0] != 0.0 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise RegionError(f"Time grid must start at 0 and increase strictly, got {list(grid)}")
            object.__setattr__(self, "time_grid", grid)

    @property
    def variables(self) -> Tuple[Variable, ...]:
        return self.domain.variables

    @property
    def n_x(self) -> int:
        return len(self.cells)

    @property
    def n_t(self) -> int:
        return 1 if self.time_grid is None else len(self.time_grid) - 1

    @property
    def is_lattice(self) -> bool:
        return isinstance(self.cells[0], DiscreteCell)

    def interval(self, i: int) -> Tuple[float, float]:
        """Bounds of the i-th time interval, counted from 1."""
        if self.time_grid is None:
            raise RegionError("Partition has no time grid")
        return self.time_grid[i - 1], self.time_grid[i]

    def time_interval(self, t: float) -> int:
        """Interval index (from 1) used at time t; breakpoints belong to the later interval."""
        if self.time_grid is None:
            return 1
        i = int(np.searchsorted(self.time_grid, t, side="right"))
        return min(max(i, 1), self.n_t)

    def time_intervals(self, times: np.ndarray) -> np.ndarray:
        if self.time_grid is None:
            return np.ones(np.shape(times), dtype=int)
        idx = np.searchsorted(self.time_grid, times, side="right")
        return np.clip(idx, 1, self.n_t)

    def locate(self, point: Sequence[float]) -> Optional[int]:
        """Index of the cell containing ``point`` (half-open cells), or None."""
        for k, cell in enumerate(self.cells):
            if isinstance(cell, IntervalBox):
                if cell.contains_half_open(point, self.domain):
                    return k
            elif cell.contains(point):
                return k
        return None

    def nearest(self, point: Sequence[float]) -> int:
        distances = [cell.distance(point) for cell in self.cells]
        return int(np.argmin(distances))

    def locate_batch(self, points: np.ndarray) -> np.ndarray:
        """Cell index per row of ``points``; -1 marks points outside every cell."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.grid_edges is not None:
            index = np.zeros(len(points), dtype=int)
            inside = np.ones(len(points), dtype=bool)
            stride = 1
            for axis, edges in enumerate(self.grid_edges):
                coord = points[:, axis]
                pos = np.searchsorted(edges, coord, side="right") - 1
                top = coord == edges[-1]
                pos = np.where(top, len(edges) - 2, pos)
                inside &= (pos >= 0) & (pos <= len(edges) - 2)
                index += np.clip(pos, 0, len(edges) - 2) * stride
                stride *= len(edges) - 1
            return np.where(inside, index, -1)
        if self.is_lattice:
            return self._locate_lattice(points)
        located = [self.locate(p) for p in points]
        return np.array([-1 if k is None else k for k in located], dtype=int)

    def _locate_lattice(self, points: np.ndarray) -> np.ndarray:
        singletons = {}
        for k, cell in enumerate(self.cells):
            if cell.is_finite:
                for p in cell.points:
                    singletons.setdefault(p, k)
        index = np.array([singletons.get(tuple(p), -1) for p in points.tolist()], dtype=int)
        for k, cell in enumerate(self.cells):
            if cell.is_finite:
                continue
            rest = np.flatnonzero(index < 0)
            if not rest.size:
                break
            sub = points[rest]
            inside = np.all(sub == np.round(sub), axis=1)
            inside &= np.all((sub >= np.array(cell.box.lower)) & (sub <= np.array(cell.box.upper)), axis=1)
            for axis, values in cell.levels.items():
                inside &= np.isin(sub[:, axis], values)
            index[rest[inside]] = k
        return index

    def neighbors_of(self, k: int) -> List[Tuple[int, Facet]]:
        """Adjacent cells of k with the facet oriented from k outward."""
        result = []
        for a, b, fct in self.adjacency:
            if a == k:
                result.append((b, fct))
            elif b == k:
                result.append((a, fct.reversed()))
        return result


def uniform_time_grid(n_t: int, horizon: float) -> Tuple[float, ...]:
    """n_t equal subintervals of [0, horizon]."""
    if n_t < 1:
        raise RegionError(f"Number of time intervals must be at least 1, got {n_t}")
    if not horizon > 0 or not math.isfinite(horizon):
        raise RegionError(f"Horizon must be positive and finite, got {horizon}")
    grid = np.linspace(0.0, horizon, n_t + 1)
    grid[-1] = horizon
    return tuple(float(t) for t in grid)


def _adjacency(cells: Sequence[IntervalBox]) -> Tuple[Tuple[int, int, Facet], ...]:
    pairs = []
    for j in range(len(cells)):
        for k in range(j + 1, len(cells)):
            shared = facet(cells[j], cells[k])
            if shared is not None:
                pairs.append((j, k, shared))
    return tuple(pairs)


def grid_partition(
    counts: Sequence[int],
    box: IntervalBox,
    time_grid: Optional[Sequence[float]] = None,
    domain: Optional[IntervalBox] = None,
) -> Partition:
    """Grid of counts[a] cells per axis.

    Each axis gets ``counts[a]`` breakpoints spread uniformly over the box;
    the first cell reaches down to the domain's lower bound and the last cell
    reaches up to the domain's upper bound. Cells are ordered with the first
    axis varying fastest.
    """
    if domain is None:
        domain = IntervalBox(box.variables, (0.0,) * box.dimension, (math.inf,) * box.dimension)
    if domain.variables != box.variables:
        raise RegionError("Grid box and domain must share variables")
    if len(counts) != box.dimension:
        raise RegionError(f"Expected {box.dimension} cell counts, got {len(counts)}")
    if not box.volume_positive or not box.bounded:
        raise RegionError(f"Grid box must be bounded with positive width along every axis, got {box}")
    edges_per_axis = []
    for n, lo, hi, dom_lo, dom_hi in zip(counts, box.lower, box.upper, domain.lower, domain.upper):
        if n < 1:
            raise RegionError(f"Cell counts must be at least 1, got {n}")
        if lo < dom_lo or hi > dom_hi:
            raise RegionError(f"Grid box {box} is not inside domain {domain}")
        if dom_hi > hi:
            edges = list(np.linspace(lo, hi, n)) + [dom_hi]
        else:
            edges = list(np.linspace(lo, hi, n + 1))
        edges[0] = dom_lo
        edges_per_axis.append(tuple(float(e) for e in edges))
    cells = []
    for combo in product(*[range(len(e) - 1) for e in reversed(edges_per_axis)]):
        idx = tuple(reversed(combo))
        lower = tuple(edges_per_axis[a][i] for a, i in enumerate(idx))
        upper = tuple(edges_per_axis[a][i + 1] for a, i in enumerate(idx))
        cells.append(IntervalBox(box.variables, lower, upper))
    partition = Partition(
        cells=tuple(cells),
        domain=domain,
        time_grid=None if time_grid is None else tuple(time_grid),
        adjacency=_adjacency(cells),
        grid_edges=tuple(edges_per_axis),
    )
    logger.debug("Grid partition with %d cells and %d facets", partition.n_x, len(partition.adjacency))
    return partition


def build_grid_partition(
    n1: int,
    n2: int,
    box: IntervalBox,
    n_t: int,
    horizon: float,
    domain: Optional[IntervalBox] = None,
) -> Partition:
    """Two-dimensional grid partition with a uniform time grid.

    Args:
        n1: Breakpoints along the first axis
        n2: Breakpoints along the second axis
        box: Finite box carrying the breakpoints
        n_t: Number of time subintervals
        horizon: Final time T
        domain: State domain, the nonnegative orthant by default

    Returns:
        Partition with n1 * n2 spatial cells and n_t time intervals
    """
    if box.dimension != 2:
        raise RegionError(f"build_grid_partition needs a 2-D box, got dimension {box.dimension}")
    return grid_partition((n1, n2), box, uniform_time_grid(n_t, horizon), domain)


def single_cell_partition(domain: IntervalBox, time_grid: Optional[Sequence[float]] = None) -> Partition:
    return Partition(cells=(domain,), domain=domain, time_grid=None if time_grid is None else tuple(time_grid))


def _translation(reaction, states: Sequence[Variable]) -> Optional[Tuple[float, ...]]:
    shifts = []
    for var, image in zip(states, reaction.jump):
        delta = image - Polynomial.variable(var)
        if delta.variables():
            return None
        shifts.append(delta.constant_term())
    return tuple(shifts)


def _transitions(target: DiscreteCell, source: DiscreteCell, model) -> List[Tuple[Point, Point]]:
    """Pairs (x, h(x, u)) with x in source, h(x, u) in target and positive propensity."""
    states = model.states
    controls = model.controls
    grid = model.control_set.grid(CONTROL_GRID_STEP)
    if source.is_finite:
        candidates = source.enumerate()
    elif target.is_finite:
        candidates = set()
        for reaction in model.reactions:
            shift = _translation(reaction, states)
            if shift is None:
                raise RegionError(
                    f"Reaction '{reaction.name}' is not a translation, so the neighbourhood inside a tail cell is unbounded"
                )
            for y in target.points:
                x = tuple(a - b for a, b in zip(y, shift))
                if source.contains(x):
                    candidates.add(x)
        candidates = sorted(candidates)
    else:
        raise RegionError("Neighbourhoods between two tail cells are unbounded")
    pairs = []
    for x in candidates:
        values = dict(zip(states, x))
        for reaction in model.reactions:
            for u in grid:
                values.update(zip(controls, u))
                if reaction.propensity.evaluate(values) <= 0.0:
                    continue
                y = tuple(float(h.evaluate(values)) for h in reaction.jump)
                if target.contains(y):
                    pairs.append((x, y))
    return pairs


def jump_neighborhood(target: DiscreteCell, source: DiscreteCell, model) -> List[Point]:
    """States of ``source`` with a positive-rate jump into ``target``.

    A state qualifies when some reaction and some control on the control grid
    give a positive propensity and a jump landing in ``target``.
    """
    return sorted({x for x, _ in _transitions(target, source, model)})


def build_lattice_partition(
    n_x: int,
    x2_levels: Sequence[float],
    states: Optional[Sequence[Variable]] = None,
    time_grid: Optional[Sequence[float]] = None,
    model=None,
) -> Partition:
    """Singletons (i, level) for i < n_x, level-major, plus the tail {x1 >= n_x}.

    When ``model`` is given the jump neighbourhoods between all cell pairs are
    computed and stored on the partition.
    """
    if n_x < 0:
        raise RegionError(f"n_x must be nonnegative, got {n_x}")
    levels = tuple(sorted(float(v) for v in x2_levels))
    if not levels:
        raise RegionError("At least one x2 level is required")
    if states is None:
        states = model.states if model is not None else (Variable("x1"), Variable("x2"))
    states = tuple(states)
    if len(states) != 2:
        raise RegionError(f"Lattice partitions are two-dimensional, got {len(states)} states")
    cells: List[DiscreteCell] = [
        DiscreteCell(states, points=((float(i), level),)) for level in levels for i in range(n_x)
    ]
    tail_box = IntervalBox(states, (float(n_x), levels[0]), (math.inf, levels[-1]))
    cells.append(DiscreteCell(states, box=tail_box, levels={1: levels}))
    domain = IntervalBox(states, (0.0, levels[0]), (math.inf, levels[-1]))
    neighborhoods = []
    if model is not None:
        for k, target in enumerate(cells):
            for j, source in enumerate(cells):
                if j == k:
                    continue
                pairs = _transitions(target, source, model)
                if pairs:
                    neighborhoods.append(
                        JumpNeighborhood(
                            target=k,
                            source=j,
                            states=tuple(sorted({x for x, _ in pairs})),
                            landings=tuple(sorted({y for _, y in pairs})),
                        )
                    )
    logger.debug("Lattice partition with %d cells and %d neighbourhoods", len(cells), len(neighborhoods))
    return Partition(
        cells=tuple(cells),
        domain=domain,
        time_grid=None if time_grid is None else tuple(time_grid),
        neighborhoods=tuple(neighborhoods),
    )
