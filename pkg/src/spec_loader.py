"""Problem-spec, sweep-spec and policy file ingestion.

Problem specs are YAML documents with the sections ``model``, ``cost``,
``init``, ``partition`` and ``solve``. Polynomials are written as term lists
``[coefficient, exponents]`` whose exponent vectors run over the declared
states followed by the declared controls, e.g. ``[[-2.0, [1, 1, 0]]]`` for
-2 x1 x2 in states (x1, x2) and control u. Unbounded set limits are written
``.inf``.

Validation errors raise SpecError carrying the offending field path (for
example ``model.drift[1]``) and the source line when it is known.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import yaml

from src.config import (
    DEFAULT_BACKEND,
    DEFAULT_TOLERANCE,
    POLICY_SCHEMA_VERSION,
    SPEC_SCHEMA_VERSION,
    SWEEP_GRID_KEYS,
    SWEEP_LATTICE_KEYS,
)
from src.models import (
    CostSpec,
    DiffusionModel,
    DiscountedHorizon,
    FiniteHorizon,
    InitialCondition,
    JumpModel,
    ModelError,
    ProcessModel,
    Reaction,
)
from src.polynomials import Polynomial, Variable
from src.regions import (
    IntervalBox,
    Partition,
    RegionError,
    build_lattice_partition,
    grid_partition,
    uniform_time_grid,
)
from src.relax import RelaxationOptions

logger = logging.getLogger(__name__)


class SpecError(ValueError):
    """Invalid problem, sweep or policy file."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if path:
            where.append(path)
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


def _line_index(node: yaml.Node, path: str = "", index: Optional[Dict[str, int]] = None) -> Dict[str, int]:
    """Map field paths to 1-based source lines."""
    index = {} if index is None else index
    index[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, value in node.value:
            name = str(key.value)
            _line_index(value, f"{path}.{name}" if path else name, index)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_index(item, f"{path}[{i}]", index)
    return index


class _Reader:
    """Typed access to a parsed document with path-aware errors."""

    def __init__(self, text: str, source: str = "<string>"):
        self.source = source
        try:
            node = yaml.compose(text, Loader=yaml.SafeLoader)
            self.data = yaml.safe_load(text)
        except yaml.MarkedYAMLError as exc:
            line = exc.problem_mark.line + 1 if exc.problem_mark is not None else None
            raise SpecError(f"YAML syntax error: {exc.problem}", line=line) from exc
        if not isinstance(self.data, dict):
            raise SpecError("Document must be a mapping", line=1)
        self.lines = _line_index(node) if node is not None else {}

    def line(self, path: str) -> Optional[int]:
        while path:
            if path in self.lines:
                return self.lines[path]
            cut = max(path.rfind("."), path.rfind("["))
            path = path[:cut] if cut > 0 else ""
        return self.lines.get("")

    def fail(self, path: str, message: str) -> SpecError:
        return SpecError(message, path=path, line=self.line(path))

    def get(self, path: str, required: bool = True, default: Any = None) -> Any:
        value: Any = self.data
        for part in _split(path):
            if isinstance(part, int):
                if not isinstance(value, list) or part >= len(value):
                    value = None
                    break
                value = value[part]
            else:
                if not isinstance(value, dict) or part not in value:
                    value = None
                    break
                value = value[part]
        if value is None:
            if required:
                raise self.fail(path, "missing required field")
            return default
        return value

    def number(self, path: str, required: bool = True, default: Optional[float] = None) -> Optional[float]:
        value = self.get(path, required, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.fail(path, f"expected a number, got {value!r}")
        return float(value)

    def integer(self, path: str, required: bool = True, default: Optional[int] = None) -> Optional[int]:
        value = self.get(path, required, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.fail(path, f"expected an integer, got {value!r}")
        return value

    def sequence(self, path: str, required: bool = True) -> List:
        value = self.get(path, required, [])
        if not isinstance(value, list):
            raise self.fail(path, f"expected a list, got {value!r}")
        return value

    def numbers(self, path: str, length: Optional[int] = None) -> Tuple[float, ...]:
        values = self.sequence(path)
        if length is not None and len(values) != length:
            raise self.fail(path, f"expected {length} numbers, got {len(values)}")
        for i in range(len(values)):
            self.number(f"{path}[{i}]")
        return tuple(float(v) for v in values)


def _split(path: str) -> List[Union[str, int]]:
    parts: List[Union[str, int]] = []
    for chunk in path.split("."):
        name, _, rest = chunk.partition("[")
        if name:
            parts.append(name)
        if rest:
            parts.extend(int(i) for i in ("[" + rest).replace("]", "").split("[")[1:])
    return parts


@dataclass(frozen=True)
class PartitionSpec:
    kind: str
    n_t: int = 1
    counts: Tuple[int, ...] = ()
    box: Optional[IntervalBox] = None
    n_x: int = 0
    levels: Tuple[float, ...] = ()


@dataclass(frozen=True)
class SolveSpec:
    degree: int
    backend: str = DEFAULT_BACKEND
    tolerance: float = DEFAULT_TOLERANCE
    time_limit: Optional[float] = None
    directional_boundary: bool = False
    time_invariant: bool = True

    @property
    def options(self) -> RelaxationOptions:
        return RelaxationOptions(self.directional_boundary, self.time_invariant)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    model: ProcessModel
    cost: CostSpec
    initial: InitialCondition
    partition: PartitionSpec
    solve: SolveSpec
    source: Optional[Path] = field(default=None, compare=False)

    @property
    def is_discounted(self) -> bool:
        return self.cost.is_discounted

    def with_partition(self, **changes) -> "ProblemSpec":
        return replace(self, partition=replace(self.partition, **changes))

    def with_solve(self, **changes) -> "ProblemSpec":
        return replace(self, solve=replace(self.solve, **{k: v for k, v in changes.items() if v is not None}))

    def with_horizon(self, horizon: float) -> "ProblemSpec":
        if self.is_discounted:
            raise SpecError("Cannot set a finite horizon on a discounted problem", path="cost.horizon")
        return replace(self, cost=replace(self.cost, horizon=FiniteHorizon(float(horizon))))

    def build_partition(self) -> Partition:
        """Partition described by the ``partition`` section."""
        spec = self.partition
        time_grid = None if self.is_discounted else uniform_time_grid(spec.n_t, self.cost.horizon.T)
        try:
            if spec.kind == "grid":
                return grid_partition(spec.counts, spec.box, time_grid, domain=self.model.state_set)
            return build_lattice_partition(spec.n_x, spec.levels, self.model.states, time_grid, model=self.model)
        except RegionError as exc:
            raise SpecError(str(exc), path="partition") from exc


def _polynomial(reader: _Reader, path: str, variables: Sequence[Variable]) -> Polynomial:
    terms = reader.get(path, required=False, default=[])
    if not isinstance(terms, list):
        raise reader.fail(path, "polynomials are lists of [coefficient, exponents] terms")
    parsed = []
    for i, term in enumerate(terms):
        here = f"{path}[{i}]"
        if not isinstance(term, list) or len(term) != 2 or not isinstance(term[1], list):
            raise reader.fail(here, "expected a [coefficient, exponents] term")
        coefficient = reader.number(f"{here}[0]")
        exponents = term[1]
        if len(exponents) != len(variables):
            raise reader.fail(
                here, f"exponent vector has {len(exponents)} entries for variables {[v.name for v in variables]}"
            )
        if any(isinstance(e, bool) or not isinstance(e, int) or e < 0 for e in exponents):
            raise reader.fail(here, f"exponents must be nonnegative integers, got {exponents}")
        parsed.append((coefficient, exponents))
    try:
        return Polynomial.from_exponents(variables, parsed)
    except ValueError as exc:
        raise reader.fail(path, str(exc)) from exc


def _names(reader: _Reader, path: str, required: bool = True) -> List[str]:
    names = reader.sequence(path, required)
    for i, name in enumerate(names):
        if not isinstance(name, str) or not name:
            raise reader.fail(f"{path}[{i}]", f"expected a variable name, got {name!r}")
    return names


def _box(reader: _Reader, path: str, variables: Sequence[Variable]) -> IntervalBox:
    lower = reader.numbers(f"{path}.lower", len(variables))
    upper = reader.numbers(f"{path}.upper", len(variables))
    try:
        return IntervalBox(tuple(variables), lower, upper)
    except RegionError as exc:
        raise reader.fail(path, str(exc)) from exc


def _model(reader: _Reader, name: str) -> ProcessModel:
    kind = reader.get("model.type")
    time_name = reader.get("model.variables.time", required=False, default="t")
    state_names = _names(reader, "model.variables.states")
    control_names = _names(reader, "model.variables.controls", required=False)
    declared = [time_name] + state_names + control_names
    duplicates = sorted({n for n in declared if declared.count(n) > 1})
    if duplicates:
        raise reader.fail("model.variables", f"duplicate variable names {duplicates}")
    if not state_names:
        raise reader.fail("model.variables.states", "at least one state is required")
    t = Variable(time_name, "time")
    states = tuple(Variable(n, "state") for n in state_names)
    controls = tuple(Variable(n, "control") for n in control_names)
    term_vars = states + controls
    n = len(states)
    control_set = _box(reader, "model.control_set", controls)
    try:
        if kind == "diffusion":
            drift_terms = reader.sequence("model.drift")
            if len(drift_terms) != n:
                raise reader.fail("model.drift", f"expected {n} components, got {len(drift_terms)}")
            drift = tuple(_polynomial(reader, f"model.drift[{i}]", term_vars) for i in range(n))
            matrix = tuple(
                tuple(_polynomial(reader, f"model.diffusion_matrix[{i}][{j}]", term_vars) for j in range(n))
                for i in range(n)
            )
            factor = None
            raw_factor = reader.get("model.diffusion_factor", required=False)
            if raw_factor is not None:
                width = len(raw_factor[0]) if raw_factor else 0
                factor = tuple(
                    tuple(_polynomial(reader, f"model.diffusion_factor[{i}][{c}]", term_vars) for c in range(width))
                    for i in range(len(raw_factor))
                )
            return DiffusionModel(
                time=t,
                states=states,
                controls=controls,
                drift=drift,
                diffusion_matrix=matrix,
                state_set=_box(reader, "model.state_set", states),
                control_set=control_set,
                diffusion_factor=factor,
                name=name,
            )
        if kind == "jump":
            reactions = []
            for i, _ in enumerate(reader.sequence("model.reactions")):
                here = f"model.reactions[{i}]"
                jump_terms = reader.sequence(f"{here}.jump")
                if len(jump_terms) != n:
                    raise reader.fail(f"{here}.jump", f"expected {n} components, got {len(jump_terms)}")
                reactions.append(
                    Reaction(
                        name=str(reader.get(f"{here}.name", required=False, default=f"r{i + 1}")),
                        jump=tuple(_polynomial(reader, f"{here}.jump[{j}]", term_vars) for j in range(n)),
                        propensity=_polynomial(reader, f"{here}.propensity", term_vars),
                    )
                )
            return JumpModel(
                time=t,
                states=states,
                controls=controls,
                reactions=tuple(reactions),
                lattice=_box(reader, "model.lattice", states),
                control_set=control_set,
                name=name,
            )
    except ModelError as exc:
        raise reader.fail("model", str(exc)) from exc
    raise reader.fail("model.type", f"unknown model type {kind!r}, expected 'diffusion' or 'jump'")


def _cost(reader: _Reader, model: ProcessModel) -> CostSpec:
    term_vars = model.states + model.controls
    stage = _polynomial(reader, "cost.stage", term_vars)
    terminal = _polynomial(reader, "cost.terminal", term_vars)
    kind = reader.get("cost.horizon.type")
    try:
        if kind == "finite":
            horizon = FiniteHorizon(reader.number("cost.horizon.T"))
        elif kind == "discounted":
            points = reader.sequence("cost.horizon.rest_points", required=False)
            rest = tuple(
                reader.numbers(f"cost.horizon.rest_points[{i}]", len(model.states)) for i in range(len(points))
            )
            horizon = DiscountedHorizon(reader.number("cost.horizon.rho"), rest)
        else:
            raise reader.fail("cost.horizon.type", f"unknown horizon type {kind!r}, expected 'finite' or 'discounted'")
        cost = CostSpec(stage, terminal, horizon)
        cost.check_against(model)
    except ModelError as exc:
        raise reader.fail("cost", str(exc)) from exc
    return cost


def _initial(reader: _Reader, model: ProcessModel) -> InitialCondition:
    atoms = reader.sequence("init.atoms")
    points = tuple(reader.numbers(f"init.atoms[{i}]", len(model.states)) for i in range(len(atoms)))
    weights = reader.numbers("init.weights", len(points)) if reader.get("init.weights", required=False) else (1.0,) * len(points)
    try:
        return InitialCondition(points, weights)
    except ModelError as exc:
        raise reader.fail("init", str(exc)) from exc


def _partition(reader: _Reader, model: ProcessModel, discounted: bool) -> PartitionSpec:
    n_t = reader.integer("partition.time.nT", required=False, default=1)
    if n_t < 1:
        raise reader.fail("partition.time.nT", f"nT must be at least 1, got {n_t}")
    if discounted and n_t != 1:
        raise reader.fail("partition.time.nT", "discounted problems take no time subdivisions")
    if reader.get("partition.grid", required=False) is not None:
        if not isinstance(model, DiffusionModel):
            raise reader.fail("partition.grid", "grid partitions are for diffusion models")
        counts = reader.sequence("partition.grid.counts")
        if len(counts) != len(model.states):
            raise reader.fail("partition.grid.counts", f"expected {len(model.states)} counts, got {len(counts)}")
        counts = tuple(reader.integer(f"partition.grid.counts[{i}]") for i in range(len(counts)))
        if any(c < 1 for c in counts):
            raise reader.fail("partition.grid.counts", f"cell counts must be at least 1, got {list(counts)}")
        return PartitionSpec("grid", n_t=n_t, counts=counts, box=_box(reader, "partition.grid.box", model.states))
    if reader.get("partition.lattice", required=False) is not None:
        if not isinstance(model, JumpModel):
            raise reader.fail("partition.lattice", "lattice partitions are for jump models")
        n_x = reader.integer("partition.lattice.nX")
        if n_x < 0:
            raise reader.fail("partition.lattice.nX", f"nX must be nonnegative, got {n_x}")
        levels = reader.numbers("partition.lattice.levels")
        return PartitionSpec("lattice", n_t=n_t, n_x=n_x, levels=levels)
    raise reader.fail("partition", "expected a 'grid' or 'lattice' section")


def _solve(reader: _Reader) -> SolveSpec:
    degree = reader.integer("solve.degree")
    if degree < 1:
        raise reader.fail("solve.degree", f"degree must be positive, got {degree}")
    tolerance = reader.number("solve.tolerance", required=False, default=DEFAULT_TOLERANCE)
    if not tolerance > 0:
        raise reader.fail("solve.tolerance", f"tolerance must be positive, got {tolerance}")
    options = reader.get("solve.options", required=False, default={})
    for key in options:
        if key not in ("directional_boundary", "time_invariant"):
            raise reader.fail(f"solve.options.{key}", "unknown option")
    return SolveSpec(
        degree=degree,
        backend=str(reader.get("solve.backend", required=False, default=DEFAULT_BACKEND)),
        tolerance=tolerance,
        time_limit=reader.number("solve.time_limit", required=False),
        directional_boundary=bool(options.get("directional_boundary", False)),
        time_invariant=bool(options.get("time_invariant", True)),
    )


def parse_problem_spec(text: str, source: Optional[Path] = None) -> ProblemSpec:
    """Parse and validate a problem spec document."""
    reader = _Reader(text, str(source) if source else "<string>")
    version = reader.integer("schema_version")
    if version != SPEC_SCHEMA_VERSION:
        raise reader.fail("schema_version", f"unsupported schema version {version}, expected {SPEC_SCHEMA_VERSION}")
    name = str(reader.get("name", required=False, default=Path(source).stem if source else "problem"))
    model = _model(reader, name)
    cost = _cost(reader, model)
    initial = _initial(reader, model)
    partition = _partition(reader, model, cost.is_discounted)
    solve = _solve(reader)
    return ProblemSpec(name, model, cost, initial, partition, solve, Path(source) if source else None)


def load_problem_spec(path: Union[str, Path]) -> ProblemSpec:
    """Load a problem spec from a YAML file.

    Args:
        path: Path to the spec file

    Returns:
        The validated ProblemSpec

    Raises:
        SpecError: If the file is missing or invalid
    """
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"Spec file not found: {path}")
    spec = parse_problem_spec(path.read_text(), path)
    logger.info("Loaded spec '%s' (%s model) from %s", spec.name, type(spec.model).__name__, path)
    return spec


# serialisation


def _terms(poly: Polynomial, variables: Sequence[Variable]) -> List:
    extra = [v.name for v in poly.variables() if v not in variables]
    if extra:
        raise SpecError(f"Polynomial uses undeclared variables {extra}")
    return [[coef, [mono.exponent(v) for v in variables]] for mono, coef in poly.terms]


def _box_dict(box: IntervalBox) -> Dict:
    return {"lower": [float(v) for v in box.lower], "upper": [float(v) for v in box.upper]}


def problem_spec_to_dict(spec: ProblemSpec) -> Dict:
    model = spec.model
    term_vars = model.states + model.controls
    section: Dict[str, Any] = {
        "type": "diffusion" if isinstance(model, DiffusionModel) else "jump",
        "variables": {
            "time": model.time.name,
            "states": [v.name for v in model.states],
            "controls": [v.name for v in model.controls],
        },
    }
    if isinstance(model, DiffusionModel):
        section["drift"] = [_terms(f, term_vars) for f in model.drift]
        section["diffusion_matrix"] = [[_terms(e, term_vars) for e in row] for row in model.diffusion_matrix]
        if model.diffusion_factor is not None:
            section["diffusion_factor"] = [[_terms(e, term_vars) for e in row] for row in model.diffusion_factor]
        section["state_set"] = _box_dict(model.state_set)
    else:
        section["reactions"] = [
            {
                "name": r.name,
                "jump": [_terms(h, term_vars) for h in r.jump],
                "propensity": _terms(r.propensity, term_vars),
            }
            for r in model.reactions
        ]
        section["lattice"] = _box_dict(model.lattice)
    section["control_set"] = _box_dict(model.control_set)
    horizon = spec.cost.horizon
    if spec.cost.is_discounted:
        horizon_dict = {
            "type": "discounted",
            "rho": horizon.rho,
            "rest_points": [list(p) for p in horizon.rest_points],
        }
    else:
        horizon_dict = {"type": "finite", "T": horizon.T}
    part = spec.partition
    partition: Dict[str, Any] = {"time": {"nT": part.n_t}}
    if part.kind == "grid":
        partition["grid"] = {"counts": list(part.counts), "box": _box_dict(part.box)}
    else:
        partition["lattice"] = {"nX": part.n_x, "levels": list(part.levels)}
    solve: Dict[str, Any] = {
        "degree": spec.solve.degree,
        "backend": spec.solve.backend,
        "tolerance": spec.solve.tolerance,
        "options": {
            "directional_boundary": spec.solve.directional_boundary,
            "time_invariant": spec.solve.time_invariant,
        },
    }
    if spec.solve.time_limit is not None:
        solve["time_limit"] = spec.solve.time_limit
    return {
        "schema_version": SPEC_SCHEMA_VERSION,
        "name": spec.name,
        "model": section,
        "cost": {
            "stage": _terms(spec.cost.stage, term_vars),
            "terminal": _terms(spec.cost.terminal, term_vars),
            "horizon": horizon_dict,
        },
        "init": {"atoms": [list(a) for a in spec.initial.atoms], "weights": list(spec.initial.weights)},
        "partition": partition,
        "solve": solve,
    }


def dump_problem_spec(spec: ProblemSpec) -> str:
    return yaml.safe_dump(problem_spec_to_dict(spec), sort_keys=False, default_flow_style=None)


def save_problem_spec(spec: ProblemSpec, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(dump_problem_spec(spec))
    return path


# sweeps


@dataclass(frozen=True)
class SweepSpec:
    """Instances of one problem over partitions, degrees and repetitions."""

    problem: ProblemSpec
    partitions: Tuple[Tuple[int, ...], ...]
    degrees: Tuple[int, ...]
    repetitions: int = 1
    source: Optional[Path] = field(default=None, compare=False)

    @property
    def is_lattice(self) -> bool:
        return self.problem.partition.kind == "lattice"

    @property
    def keys(self) -> List[str]:
        return list(SWEEP_LATTICE_KEYS if self.is_lattice else SWEEP_GRID_KEYS)

    def instances(self) -> Iterator[Dict[str, int]]:
        names = ["nX", "nT"] if self.is_lattice else ["n1", "n2", "nT"]
        for parts in self.partitions:
            for degree in self.degrees:
                for repetition in range(1, self.repetitions + 1):
                    row = dict(zip(names, parts))
                    row.update(d=degree, repetition=repetition)
                    yield row

    def instance_spec(self, row: Dict[str, int]) -> ProblemSpec:
        spec = self.problem.with_solve(degree=row["d"])
        if self.is_lattice:
            return spec.with_partition(n_x=row["nX"], n_t=row["nT"])
        return spec.with_partition(counts=(row["n1"], row["n2"]), n_t=row["nT"])


def _positive_list(reader: _Reader, path: str, minimum: int = 1) -> List[int]:
    values = reader.sequence(path)
    if not values:
        raise reader.fail(path, "list must not be empty")
    result = []
    for i in range(len(values)):
        value = reader.integer(f"{path}[{i}]")
        if value < minimum:
            raise reader.fail(f"{path}[{i}]", f"expected an integer >= {minimum}, got {value}")
        result.append(value)
    return result


def parse_sweep_spec(text: str, source: Optional[Path] = None) -> SweepSpec:
    reader = _Reader(text, str(source) if source else "<string>")
    version = reader.integer("schema_version")
    if version != SPEC_SCHEMA_VERSION:
        raise reader.fail("schema_version", f"unsupported schema version {version}, expected {SPEC_SCHEMA_VERSION}")
    problem_path = Path(str(reader.get("problem")))
    if not problem_path.is_absolute() and source is not None:
        problem_path = Path(source).parent / problem_path
    try:
        problem = load_problem_spec(problem_path)
    except SpecError as exc:
        raise SpecError(f"in problem file {problem_path}: {exc}", path="problem", line=reader.line("problem")) from exc
    horizon = reader.number("horizon", required=False)
    if horizon is not None:
        problem = problem.with_horizon(horizon)
    lattice = problem.partition.kind == "lattice"
    width = 2 if lattice else 3
    partitions: List[Tuple[int, ...]] = []
    if reader.get("partitions", required=False) is not None:
        for i, entry in enumerate(reader.sequence("partitions")):
            if not isinstance(entry, list) or len(entry) != width:
                raise reader.fail(f"partitions[{i}]", f"expected {width} integers per partition")
            values = tuple(reader.integer(f"partitions[{i}][{j}]") for j in range(width))
            floor = [0, 1] if lattice else [1, 1, 1]
            if any(v < lo for v, lo in zip(values, floor)):
                raise reader.fail(f"partitions[{i}]", f"partition sizes out of range: {list(values)}")
            partitions.append(values)
    elif lattice:
        partitions = list(product(_positive_list(reader, "lattice.nX", 0), _positive_list(reader, "lattice.nT")))
    else:
        partitions = list(
            product(
                _positive_list(reader, "grid.n1"),
                _positive_list(reader, "grid.n2"),
                _positive_list(reader, "grid.nT"),
            )
        )
    if problem.is_discounted and any(p[-1] != 1 for p in partitions):
        raise reader.fail("partitions", "discounted problems take nT = 1 only")
    degrees = tuple(_positive_list(reader, "degrees"))
    repetitions = reader.integer("repetitions", required=False, default=1)
    if repetitions < 1:
        raise reader.fail("repetitions", f"repetitions must be at least 1, got {repetitions}")
    return SweepSpec(problem, tuple(partitions), degrees, repetitions, Path(source) if source else None)


def load_sweep_spec(path: Union[str, Path]) -> SweepSpec:
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"Sweep file not found: {path}")
    return parse_sweep_spec(path.read_text(), path)


# policies


@dataclass
class PolicyFile:
    spec_name: str
    lower_bound: Optional[float]
    degree: int
    pieces: Dict[Tuple[int, int], Polynomial]


def save_policy(
    path: Union[str, Path],
    spec: ProblemSpec,
    lower_bound: Optional[float],
    pieces: Dict[Tuple[int, int], Polynomial],
) -> Path:
    """Write recovered pieces as JSON term lists over (time, states)."""
    variables = (spec.model.time,) + spec.model.states
    document = {
        "schema_version": POLICY_SCHEMA_VERSION,
        "spec_name": spec.name,
        "lower_bound": lower_bound,
        "degree": spec.solve.degree,
        "variables": [v.name for v in variables],
        "pieces": [
            {"interval": i, "cell": k, "terms": _terms(poly, variables)} for (i, k), poly in sorted(pieces.items())
        ],
    }
    path = Path(path)
    path.write_text(json.dumps(document, indent=2))
    logger.info("Wrote %d policy pieces to %s", len(pieces), path)
    return path


def load_policy(path: Union[str, Path], spec: ProblemSpec) -> PolicyFile:
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"Policy file not found: {path}")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SpecError(f"Invalid policy JSON: {exc.msg}", line=exc.lineno) from exc
    if document.get("schema_version") != POLICY_SCHEMA_VERSION:
        raise SpecError(f"Unsupported policy schema version {document.get('schema_version')}", path="schema_version")
    variables = (spec.model.time,) + spec.model.states
    if document.get("variables") != [v.name for v in variables]:
        raise SpecError(
            f"Policy variables {document.get('variables')} do not match the problem variables {[v.name for v in variables]}",
            path="variables",
        )
    if document.get("spec_name") != spec.name:
        logger.warning("Policy was computed for '%s', not '%s'", document.get("spec_name"), spec.name)
    pieces = {}
    for n, entry in enumerate(document.get("pieces", [])):
        try:
            key = (int(entry["interval"]), int(entry["cell"]))
            pieces[key] = Polynomial.from_exponents(variables, [(c, e) for c, e in entry["terms"]])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpecError(f"Malformed piece: {exc}", path=f"pieces[{n}]") from exc
    return PolicyFile(document.get("spec_name", ""), document.get("lower_bound"), int(document.get("degree", 0)), pieces)
