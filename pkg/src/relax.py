"""Sum-of-squares restrictions of the discretised subsolution problem.

One polynomial piece w_{i,k} is attached to every pair of time interval i and
spatial cell k. The pieces are coupled by constraints that keep the glued
function below the value function:

- path: A w_{i,k} + l >= 0 on [t_{i-1}, t_i] x X_k x U
- time_interface: w_{i,k}(t_{i-1}, x) >= w_{i-1,k}(t_{i-1}, x) on X_k
- boundary_continuity: w_{i,j} = w_{i,k} on each shared facet
- boundary_directional: (w_{i,k} - w_{i,j}) n_{j,k}.f >= 0 for deterministic models
- neighborhood_equality: w_{i,j} = w_{i,k} at lattice states linking two cells
- terminal: w_{nT,k}(T, x) <= phi(x) on X_k
- discounted_path: A w - rho w + l >= 0 for discounted problems
- rest_point: w(z) <= 0 at declared rest points of undiscounted problems

Each nonnegativity constraint is lowered to a Putinar certificate whose SOS
multipliers become Gram blocks of a ConicProblem.
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.conic import BlockKind, ConicBuilder, ConicProblem, ConicSolution
from src.models import (
    CostSpec,
    DiffusionModel,
    InitialCondition,
    JumpModel,
    ProcessModel,
    generator,
    generator_discounted,
)
from src.polynomials import (
    AffineMap,
    Monomial,
    Polynomial,
    Variable,
    affine_change_of_basis,
    monomial_basis,
    sort_variables,
    substitute,
)
from src.regions import DiscreteCell, IntervalBox, Partition, SemialgebraicSet

logger = logging.getLogger(__name__)

CONSTRAINT_KINDS = (
    "path",
    "time_interface",
    "boundary_continuity",
    "boundary_directional",
    "terminal",
    "neighborhood_equality",
    "discounted_path",
    "rest_point",
)
EQUALITY_KINDS = frozenset({"boundary_continuity", "neighborhood_equality"})


class RelaxationError(ValueError):
    """Raised when a relaxation cannot be assembled for the given inputs."""


@dataclass(frozen=True)
class RelaxationOptions:
    directional_boundary: bool = False
    time_invariant: bool = True


@dataclass(frozen=True)
class AffineForm:
    """Polynomial expression affine in the unknown piece coefficients.

    Represents constant + sum_v c_v * terms[v] where the c_v are unknowns.
    """

    constant: Polynomial = field(default_factory=Polynomial)
    terms: Tuple[Tuple[int, Polynomial], ...] = ()

    @classmethod
    def from_terms(cls, constant: Polynomial, terms: Mapping[int, Polynomial]) -> "AffineForm":
        kept = tuple(sorted((uid, q) for uid, q in terms.items() if not q.is_zero))
        return cls(Polynomial.coerce(constant), kept)

    def term_dict(self) -> Dict[int, Polynomial]:
        return dict(self.terms)

    def unknowns(self) -> Tuple[int, ...]:
        return tuple(uid for uid, _ in self.terms)

    def _combine(self, other: "AffineForm", sign: float) -> "AffineForm":
        merged = self.term_dict()
        for uid, q in other.terms:
            merged[uid] = merged[uid] + q.scale(sign) if uid in merged else q.scale(sign)
        return AffineForm.from_terms(self.constant + other.constant.scale(sign), merged)

    def __add__(self, other: Union["AffineForm", Polynomial, float]) -> "AffineForm":
        if not isinstance(other, AffineForm):
            return AffineForm(self.constant + Polynomial.coerce(other), self.terms)
        return self._combine(other, 1.0)

    def __sub__(self, other: Union["AffineForm", Polynomial, float]) -> "AffineForm":
        if not isinstance(other, AffineForm):
            return AffineForm(self.constant - Polynomial.coerce(other), self.terms)
        return self._combine(other, -1.0)

    def __neg__(self) -> "AffineForm":
        return self.scale(-1.0)

    def scale(self, factor: float) -> "AffineForm":
        return self.map(lambda q: q.scale(factor))

    def multiply(self, poly: Polynomial) -> "AffineForm":
        return self.map(lambda q: q * poly)

    def map(self, operator: Callable[[Polynomial], Polynomial]) -> "AffineForm":
        """Apply a linear polynomial operator to every part of the form."""
        constant = operator(self.constant) if not self.constant.is_zero else self.constant
        return AffineForm.from_terms(constant, {uid: operator(q) for uid, q in self.terms})

    def substitute(self, bindings: Mapping[Variable, Union[Polynomial, float]]) -> "AffineForm":
        return self.map(lambda q: substitute(q, bindings))

    def change_of_basis(self, maps: Mapping[Variable, AffineMap]) -> "AffineForm":
        return self.map(lambda q: affine_change_of_basis(q, maps))

    def degree(self) -> int:
        return max([self.constant.degree()] + [q.degree() for _, q in self.terms])

    def variables(self) -> Tuple[Variable, ...]:
        found = list(self.constant.variables())
        for _, q in self.terms:
            found.extend(q.variables())
        return sort_variables(found)

    def evaluate(self, coefficients: np.ndarray) -> Polynomial:
        result = self.constant
        for uid, q in self.terms:
            result = result + q.scale(float(coefficients[uid]))
        return result


def _cell_map(lower: float, upper: float) -> AffineMap:
    if math.isfinite(lower) and math.isfinite(upper):
        if upper > lower:
            return AffineMap.interval_to_unit(lower, upper)
        return AffineMap(1.0, lower)
    if math.isfinite(lower):
        return AffineMap(1.0, lower)
    if math.isfinite(upper):
        return AffineMap(1.0, upper)
    return AffineMap()


def local_maps(box: IntervalBox) -> Dict[Variable, AffineMap]:
    """Maps from cell-local to global coordinates (global = scale * local + shift).

    Finite intervals map from [-1, 1], semi-infinite and degenerate intervals
    are shifted to start at 0, doubly infinite intervals are left alone.
    """
    return {var: _cell_map(lo, hi) for var, lo, hi in zip(box.variables, box.lower, box.upper)}


@dataclass(frozen=True)
class PiecePolynomial:
    """Piece w_{i,k}: coefficients over a monomial basis in cell-local coordinates.

    ``offset`` is the position of the first coefficient in the program's
    unknown vector.
    """

    index: Tuple[int, int]
    variables: Tuple[Variable, ...]
    degree: int
    maps: Tuple[Tuple[Variable, AffineMap], ...]
    offset: int
    coefficients: Optional[Tuple[float, ...]] = None

    @cached_property
    def basis(self) -> List[Monomial]:
        return monomial_basis(self.variables, self.degree)

    @property
    def size(self) -> int:
        return len(self.basis)

    @property
    def map_dict(self) -> Dict[Variable, AffineMap]:
        return dict(self.maps)

    @cached_property
    def basis_polynomials(self) -> List[Polynomial]:
        """Basis elements expressed in global coordinates."""
        to_local = {var: amap.inverse() for var, amap in self.maps}
        return [affine_change_of_basis(Polynomial.from_monomial(m), to_local) for m in self.basis]

    def as_form(self) -> AffineForm:
        return AffineForm.from_terms(
            Polynomial(), {self.offset + j: poly for j, poly in enumerate(self.basis_polynomials)}
        )

    def basis_values(self, values: Mapping[Variable, float]) -> np.ndarray:
        return np.array([poly.evaluate(values) for poly in self.basis_polynomials])

    def with_coefficients(self, coefficients: Sequence[float]) -> "PiecePolynomial":
        if len(coefficients) != self.size:
            raise RelaxationError(f"Piece {self.index} has {self.size} coefficients, got {len(coefficients)}")
        return replace(self, coefficients=tuple(float(c) for c in coefficients))

    def to_polynomial(self) -> Polynomial:
        """The piece in global coordinates."""
        if self.coefficients is None:
            raise RelaxationError(f"Piece {self.index} has no recovered coefficients")
        result = Polynomial()
        for coef, poly in zip(self.coefficients, self.basis_polynomials):
            if coef != 0.0:
                result = result + poly.scale(coef)
        return result


@dataclass(frozen=True)
class SOSConstraint:
    kind: str
    region: SemialgebraicSet
    expression: AffineForm
    pieces: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        if self.kind not in CONSTRAINT_KINDS:
            raise RelaxationError(f"Unknown constraint kind '{self.kind}'")

    @property
    def is_equality(self) -> bool:
        return self.kind in EQUALITY_KINDS


@dataclass(frozen=True)
class SOSProgram:
    pieces: Tuple[PiecePolynomial, ...]
    constraints: Tuple[SOSConstraint, ...]
    objective: Tuple[Tuple[int, float], ...]
    objective_offset: float = 0.0
    metadata: Mapping = field(default_factory=dict, compare=False)

    @property
    def num_unknowns(self) -> int:
        return sum(piece.size for piece in self.pieces)

    def count(self, kind: str) -> int:
        return sum(1 for constraint in self.constraints if constraint.kind == kind)

    def counts(self) -> Dict[str, int]:
        return {kind: self.count(kind) for kind in CONSTRAINT_KINDS if self.count(kind)}

    def piece(self, i: int, k: int) -> PiecePolynomial:
        for piece in self.pieces:
            if piece.index == (i, k):
                return piece
        raise KeyError(f"No piece ({i}, {k})")


@dataclass(frozen=True)
class Certificate:
    """Putinar certificate layout of one constraint in local coordinates.

    The identity p = sigma_0 + sum_g sigma_g g + sum_h lambda_h h is imposed
    coefficient-wise, with sigma_g SOS over ``sos_bases[g]`` and lambda_h free
    over ``free_bases[h]``.
    """

    expression: AffineForm
    variables: Tuple[Variable, ...]
    degree: int
    inequalities: Tuple[Polynomial, ...]
    equalities: Tuple[Polynomial, ...]
    sos_bases: Tuple[Tuple[Polynomial, Tuple[Monomial, ...]], ...]
    free_bases: Tuple[Tuple[Polynomial, Tuple[Monomial, ...]], ...]


def certificate_layout(constraint: SOSConstraint) -> Certificate:
    """Localise a constraint and choose its multiplier bases.

    Degenerate region dimensions are substituted, dimensions the expression
    does not use are dropped, and the rest are mapped to cell-local
    coordinates. With D the expression degree rounded up to even, sigma_0
    uses monomials up to D/2 and a multiplier of g uses monomials up to
    floor((D - deg g) / 2), so every product stays within degree D.
    """
    region = constraint.region
    box = region.box
    fixed = {var: lo for var, lo, hi in zip(box.variables, box.lower, box.upper) if lo == hi}
    expression = constraint.expression.substitute(fixed) if fixed else constraint.expression
    extra_ineqs = [substitute(p, fixed) for p in region.inequalities]
    extra_eqs = [substitute(p, fixed) for p in region.equalities]
    used = set(expression.variables())
    for poly in extra_ineqs + extra_eqs:
        used.update(poly.variables())
    maps: Dict[Variable, AffineMap] = {}
    inequalities: List[Polynomial] = []
    for var, lo, hi in zip(box.variables, box.lower, box.upper):
        if lo == hi or var not in used:
            continue
        maps[var] = _cell_map(lo, hi)
        s = Polynomial.variable(var)
        if math.isfinite(lo) and math.isfinite(hi):
            inequalities.extend([1.0 + s, 1.0 - s])
        elif math.isfinite(lo):
            inequalities.append(s)
        elif math.isfinite(hi):
            inequalities.append(-s)
    expression = expression.change_of_basis(maps)
    inequalities.extend(affine_change_of_basis(p, maps) for p in extra_ineqs)
    equalities = tuple(affine_change_of_basis(p, maps) for p in extra_eqs if not p.is_zero)
    variables = sort_variables(used)
    degree = expression.degree()
    degree += degree % 2
    sos_bases = [(Polynomial.constant(1.0), tuple(monomial_basis(variables, degree // 2)))]
    if not constraint.is_equality:
        for g in inequalities:
            if g.degree() <= degree:
                sos_bases.append((g, tuple(monomial_basis(variables, (degree - g.degree()) // 2))))
    free_bases = [
        (h, tuple(monomial_basis(variables, degree - h.degree()))) for h in equalities if h.degree() <= degree
    ]
    return Certificate(
        expression=expression,
        variables=variables,
        degree=degree,
        inequalities=tuple(inequalities),
        equalities=equalities,
        sos_bases=tuple(sos_bases) if not constraint.is_equality else (),
        free_bases=tuple(free_bases) if not constraint.is_equality else (),
    )


# assembly helpers


def _check_degree(cost: CostSpec, degree: int):
    needed = max(cost.stage.degree(), cost.terminal.degree(), 2)
    if degree < needed:
        raise RelaxationError(f"Degree {degree} is too small, need at least {needed}")


def _cell_set(partition: Partition, k: int) -> SemialgebraicSet:
    cell = partition.cells[k]
    if isinstance(cell, DiscreteCell):
        return cell.region()
    return SemialgebraicSet(cell)


def _time_box(time_var: Variable, lower: float, upper: float) -> IntervalBox:
    return IntervalBox((time_var,), (lower,), (upper,))


def _region(*parts: Union[IntervalBox, SemialgebraicSet]) -> SemialgebraicSet:
    result = None
    for part in parts:
        part = part if isinstance(part, SemialgebraicSet) else SemialgebraicSet(part)
        result = part if result is None else result.product(part)
    return result


def _make_piece(index, variables, degree, box: IntervalBox, offset: int) -> PiecePolynomial:
    maps = local_maps(box)
    return PiecePolynomial(index, tuple(variables), degree, tuple((v, maps[v]) for v in variables), offset)


def _check_partition(model: ProcessModel, partition: Partition):
    if isinstance(model, JumpModel) and not partition.is_lattice:
        raise RelaxationError("Jump models need a lattice partition")
    if isinstance(model, DiffusionModel) and partition.is_lattice:
        raise RelaxationError("Diffusion models need a grid partition")
    if partition.variables != model.states:
        raise RelaxationError("Partition variables must match the model states")


def _locate_atom(partition: Partition, atom: Sequence[float]) -> int:
    k = partition.locate(atom)
    if k is None:
        raise RelaxationError(f"Initial atom {list(atom)} lies outside every cell")
    if not partition.is_lattice:
        touching = [j for j, cell in enumerate(partition.cells) if cell.contains(atom)]
        if len(touching) > 1:
            raise RelaxationError(
                f"Initial atom {list(atom)} lies on the boundary of cells {touching}; the starting piece is ambiguous"
            )
    return k


def _objective(
    pieces: Mapping[Tuple[int, int], PiecePolynomial],
    partition: Partition,
    initial: InitialCondition,
    model: ProcessModel,
) -> Tuple[Tuple[int, float], ...]:
    weights: Dict[int, float] = {}
    for atom, weight in zip(initial.atoms, initial.weights):
        if len(atom) != len(model.states):
            raise RelaxationError(f"Initial atom {list(atom)} does not match {len(model.states)} states")
        k = _locate_atom(partition, atom)
        piece = pieces[(1, k)]
        values = dict(zip(model.states, atom))
        values[model.time] = 0.0
        for j, value in enumerate(piece.basis_values(values)):
            weights[piece.offset + j] = weights.get(piece.offset + j, 0.0) + weight * value
    return tuple(sorted((uid, coef) for uid, coef in weights.items() if coef != 0.0))


def _spatial_couplings(
    model: ProcessModel,
    partition: Partition,
    forms: Mapping[int, AffineForm],
    index_of: Callable[[int], Tuple[int, int]],
    time_region: Optional[IntervalBox],
    options: RelaxationOptions,
) -> List[SOSConstraint]:
    """Facet or neighbourhood constraints between the pieces of one time interval."""
    constraints = []
    extra = [time_region] if time_region is not None else []
    if isinstance(model, DiffusionModel):
        if options.directional_boundary and not model.is_deterministic:
            raise RelaxationError("The directional boundary relaxation requires a deterministic model")
        for j, k, fct in partition.adjacency:
            pieces = (index_of(j), index_of(k))
            if options.directional_boundary:
                flux = Polynomial()
                for n_a, f_a in zip(fct.normal, model.drift):
                    if n_a:
                        flux = flux + f_a.scale(n_a)
                expression = (forms[k] - forms[j]).multiply(flux)
                region = _region(*extra, fct.box, model.control_set)
                constraints.append(SOSConstraint("boundary_directional", region, expression, pieces))
            else:
                region = _region(*extra, fct.box)
                constraints.append(SOSConstraint("boundary_continuity", region, forms[j] - forms[k], pieces))
        return constraints
    points: Dict[Tuple[int, int], set] = {}
    for nbhd in partition.neighborhoods:
        pair = (min(nbhd.source, nbhd.target), max(nbhd.source, nbhd.target))
        points.setdefault(pair, set()).update(nbhd.states + nbhd.landings)
    for (j, k), states in sorted(points.items()):
        for state in sorted(states):
            region = _region(*extra, IntervalBox(model.states, state, state))
            constraints.append(
                SOSConstraint("neighborhood_equality", region, forms[j] - forms[k], (index_of(j), index_of(k)))
            )
    return constraints


def _metadata(model, cost, partition, degree, options, **extra) -> Dict:
    data = {
        "model": model.name,
        "degree": degree,
        "n_x": partition.n_x if partition is not None else 1,
        "n_t": partition.n_t if partition is not None else 1,
        "horizon": "discounted" if cost.is_discounted else "finite",
        "directional_boundary": options.directional_boundary,
        "time_invariant": options.time_invariant,
    }
    data.update(extra)
    return data


def assemble_finite_horizon(
    model: ProcessModel,
    cost: CostSpec,
    partition: Partition,
    initial: InitialCondition,
    degree: int,
    options: Optional[RelaxationOptions] = None,
) -> SOSProgram:
    """Discretised subsolution restriction for a finite horizon [0, T].

    Args:
        model: Diffusion (grid partition) or jump model (lattice partition)
        cost: Finite-horizon cost
        partition: Spatial cells with a time grid ending at T
        initial: Dirac mixture of initial states
        degree: Degree d of every piece
        options: Boundary and time-invariance switches

    Returns:
        The symbolic program with one piece per (interval, cell)
    """
    options = options or RelaxationOptions()
    started = time.perf_counter()
    if cost.is_discounted:
        raise RelaxationError("Use assemble_discounted for discounted costs")
    if partition.time_grid is None:
        raise RelaxationError("Finite-horizon problems need a partition with a time grid")
    horizon = cost.horizon.T
    if not math.isclose(partition.time_grid[-1], horizon, rel_tol=1e-12):
        raise RelaxationError(f"Time grid ends at {partition.time_grid[-1]} but the horizon is {horizon}")
    _check_degree(cost, degree)
    _check_partition(model, partition)
    cost.check_against(model)
    t = model.time
    variables = (t,) + model.states
    n_t, n_x = partition.n_t, partition.n_x
    cell_sets = [_cell_set(partition, k) for k in range(n_x)]
    pieces: Dict[Tuple[int, int], PiecePolynomial] = {}
    offset = 0
    for i in range(1, n_t + 1):
        lo, hi = partition.interval(i)
        for k in range(n_x):
            piece = _make_piece((i, k), variables, degree, _time_box(t, lo, hi).product(cell_sets[k].box), offset)
            pieces[(i, k)] = piece
            offset += piece.size
    forms = {key: piece.as_form() for key, piece in pieces.items()}
    constraints: List[SOSConstraint] = []
    for i in range(1, n_t + 1):
        lo, hi = partition.interval(i)
        interval = _time_box(t, lo, hi)
        for k in range(n_x):
            path = forms[(i, k)].map(lambda q: generator(q, model)) + cost.stage
            region = _region(interval, cell_sets[k], model.control_set)
            constraints.append(SOSConstraint("path", region, path, ((i, k),)))
            if i >= 2:
                region = _region(_time_box(t, lo, lo), cell_sets[k])
                expression = forms[(i, k)] - forms[(i - 1, k)]
                constraints.append(SOSConstraint("time_interface", region, expression, ((i - 1, k), (i, k))))
        constraints.extend(
            _spatial_couplings(
                model,
                partition,
                {k: forms[(i, k)] for k in range(n_x)},
                lambda k, i=i: (i, k),
                interval,
                options,
            )
        )
    for k in range(n_x):
        region = _region(_time_box(t, horizon, horizon), cell_sets[k])
        expression = -forms[(n_t, k)] + cost.terminal
        constraints.append(SOSConstraint("terminal", region, expression, ((n_t, k),)))
    program = SOSProgram(
        pieces=tuple(pieces.values()),
        constraints=tuple(constraints),
        objective=_objective(pieces, partition, initial, model),
        metadata=_metadata(model, cost, partition, degree, options),
    )
    logger.info(
        "Assembled %d pieces and %d constraints %s in %.3fs",
        len(program.pieces),
        len(program.constraints),
        program.counts(),
        time.perf_counter() - started,
    )
    return program


def assemble_discounted(
    model: ProcessModel,
    cost: CostSpec,
    partition: Partition,
    initial: InitialCondition,
    degree: int,
    options: Optional[RelaxationOptions] = None,
) -> SOSProgram:
    """Discounted infinite-horizon restriction on a spatial partition.

    Pieces depend on x only unless ``options.time_invariant`` is False, in
    which case they depend on t in [0, inf) as well.
    """
    options = options or RelaxationOptions()
    started = time.perf_counter()
    if not cost.is_discounted:
        raise RelaxationError("Use assemble_finite_horizon for finite-horizon costs")
    if partition.n_t != 1:
        raise RelaxationError("Discounted problems take a spatial partition without time subdivisions")
    _check_degree(cost, degree)
    _check_partition(model, partition)
    cost.check_against(model)
    rho = cost.horizon.rho
    t = model.time
    time_region = None if options.time_invariant else _time_box(t, 0.0, math.inf)
    variables = model.states if options.time_invariant else (t,) + model.states
    cell_sets = [_cell_set(partition, k) for k in range(partition.n_x)]
    pieces: Dict[Tuple[int, int], PiecePolynomial] = {}
    offset = 0
    for k in range(partition.n_x):
        box = cell_sets[k].box if time_region is None else time_region.product(cell_sets[k].box)
        piece = _make_piece((1, k), variables, degree, box, offset)
        pieces[(1, k)] = piece
        offset += piece.size
    forms = {key: piece.as_form() for key, piece in pieces.items()}
    constraints: List[SOSConstraint] = []
    prefix = [time_region] if time_region is not None else []
    for k in range(partition.n_x):
        path = forms[(1, k)].map(lambda q: generator_discounted(q, model, rho)) + cost.stage
        region = _region(*prefix, cell_sets[k], model.control_set)
        constraints.append(SOSConstraint("discounted_path", region, path, ((1, k),)))
    constraints.extend(
        _spatial_couplings(
            model,
            partition,
            {k: forms[(1, k)] for k in range(partition.n_x)},
            lambda k: (1, k),
            time_region,
            options,
        )
    )
    for point in cost.horizon.rest_points:
        k = partition.locate(point)
        if k is None:
            raise RelaxationError(f"Rest point {list(point)} lies outside every cell")
        region = _region(*prefix, IntervalBox(model.states, point, point))
        constraints.append(SOSConstraint("rest_point", region, -forms[(1, k)], ((1, k),)))
    program = SOSProgram(
        pieces=tuple(pieces.values()),
        constraints=tuple(constraints),
        objective=_objective(pieces, partition, initial, model),
        metadata=_metadata(model, cost, partition, degree, options, rho=rho),
    )
    logger.info(
        "Assembled discounted program: %d pieces, %d constraints %s in %.3fs",
        len(program.pieces),
        len(program.constraints),
        program.counts(),
        time.perf_counter() - started,
    )
    return program


def assemble_classical(model: ProcessModel, cost: CostSpec, initial: InitialCondition, degree: int) -> SOSProgram:
    """Undiscretised restriction: a single piece in raw coordinates on the whole domain.

    Jump models use the box hull of their lattice as the state region.
    """
    _check_degree(cost, degree)
    cost.check_against(model)
    t = model.time
    state_box = model.state_set if isinstance(model, DiffusionModel) else model.lattice
    discounted = cost.is_discounted
    variables = model.states if discounted else (t,) + model.states
    identity = tuple((v, AffineMap()) for v in variables)
    piece = PiecePolynomial((1, 0), variables, degree, identity, 0)
    form = piece.as_form()
    constraints = []
    if discounted:
        rho = cost.horizon.rho
        path = form.map(lambda q: generator_discounted(q, model, rho)) + cost.stage
        constraints.append(SOSConstraint("discounted_path", _region(state_box, model.control_set), path, ((1, 0),)))
        for point in cost.horizon.rest_points:
            region = _region(IntervalBox(model.states, point, point))
            constraints.append(SOSConstraint("rest_point", region, -form, ((1, 0),)))
    else:
        horizon = cost.horizon.T
        path = form.map(lambda q: generator(q, model)) + cost.stage
        region = _region(_time_box(t, 0.0, horizon), state_box, model.control_set)
        constraints.append(SOSConstraint("path", region, path, ((1, 0),)))
        region = _region(_time_box(t, horizon, horizon), state_box)
        constraints.append(SOSConstraint("terminal", region, -form + cost.terminal, ((1, 0),)))
    objective: Dict[int, float] = {}
    for atom, weight in zip(initial.atoms, initial.weights):
        values = dict(zip(model.states, atom))
        values[t] = 0.0
        for j, value in enumerate(piece.basis_values(values)):
            objective[j] = objective.get(j, 0.0) + weight * value
    return SOSProgram(
        pieces=(piece,),
        constraints=tuple(constraints),
        objective=tuple(sorted((j, v) for j, v in objective.items() if v != 0.0)),
        metadata={"model": model.name, "degree": degree, "n_x": 1, "n_t": 1, "classical": True},
    )


def assemble(
    model: ProcessModel,
    cost: CostSpec,
    partition: Partition,
    initial: InitialCondition,
    degree: int,
    options: Optional[RelaxationOptions] = None,
) -> SOSProgram:
    """Dispatch on the horizon type."""
    if cost.is_discounted:
        return assemble_discounted(model, cost, partition, initial, degree, options)
    return assemble_finite_horizon(model, cost, partition, initial, degree, options)


# lowering


def _lower_constraint(builder: ConicBuilder, constraint: SOSConstraint, label: str):
    layout = certificate_layout(constraint)
    rows: Dict[Monomial, Dict[int, float]] = {}
    rhs: Dict[Monomial, float] = {}

    def accumulate(mono: Monomial, column: int, value: float):
        row = rows.setdefault(mono, {})
        row[column] = row.get(column, 0.0) + value

    for uid, q in layout.expression.terms:
        for mono, coef in q.terms:
            accumulate(mono, uid, coef)
    for mono, coef in layout.expression.constant.terms:
        rhs[mono] = rhs.get(mono, 0.0) - coef
        rows.setdefault(mono, {})

    scalar = [(g, basis) for g, basis in layout.sos_bases if len(basis) == 1]
    gram = [(g, basis) for g, basis in layout.sos_bases if len(basis) > 1]
    if scalar:
        block = builder.add_block(BlockKind.NONNEG, len(scalar), f"{label}:scalar", constraint.pieces)
        for slot, (g, basis) in enumerate(scalar):
            column = builder.column(block, slot)
            square = basis[0] * basis[0]
            for mono, coef in g.terms:
                accumulate(square * mono, column, -coef)
    for number, (g, basis) in enumerate(gram):
        block = builder.add_block(BlockKind.PSD, len(basis), f"{label}:sos{number}", constraint.pieces)
        for a in range(len(basis)):
            for b in range(a, len(basis)):
                column = builder.column(block, a, b)
                product = basis[a] * basis[b]
                factor = 1.0 if a == b else 2.0
                for mono, coef in g.terms:
                    accumulate(product * mono, column, -factor * coef)
    free_slots = [(h, mono) for h, basis in layout.free_bases for mono in basis]
    if free_slots:
        block = builder.add_block(BlockKind.FREE, len(free_slots), f"{label}:eq", constraint.pieces)
        for slot, (h, multiplier) in enumerate(free_slots):
            column = builder.column(block, slot)
            for mono, coef in h.terms:
                accumulate(multiplier * mono, column, -coef)
    for mono in sorted(rows, key=lambda m: m.grlex_key):
        coefficients = {col: val for col, val in rows[mono].items() if val != 0.0}
        value = rhs.get(mono, 0.0)
        if not coefficients and value == 0.0:
            continue
        builder.add_row(coefficients, value)


def lower_to_conic(program: SOSProgram) -> ConicProblem:
    """Flatten the program into a ConicProblem.

    Piece coefficients become one free block per piece, placed first and in
    piece order so that unknown ids coincide with columns.
    """
    started = time.perf_counter()
    builder = ConicBuilder()
    for piece in program.pieces:
        block = builder.add_block(BlockKind.FREE, piece.size, f"w{piece.index}", (piece.index,))
        if builder.column(block, 0) != piece.offset:
            raise RelaxationError(f"Piece {piece.index} offset {piece.offset} does not match its column")
    for uid, coef in program.objective:
        builder.add_objective(uid, coef)
    builder.add_offset(program.objective_offset)
    for number, constraint in enumerate(program.constraints):
        _lower_constraint(builder, constraint, f"{constraint.kind}{number}")
    problem = builder.build()
    logger.info(
        "Lowered to %d blocks, %d variables, %d rows in %.3fs",
        len(problem.blocks),
        problem.num_variables,
        problem.num_rows,
        time.perf_counter() - started,
    )
    return problem


@dataclass
class RecoveredBound:
    status: str
    lower_bound: Optional[float]
    pieces: Tuple[PiecePolynomial, ...]
    residuals: Dict[str, float]
    solve_time: float
    backend: str = ""
    message: str = ""
    duality_gap: Optional[float] = None

    @property
    def has_bound(self) -> bool:
        return self.lower_bound is not None


def recover_solution(program: SOSProgram, solution: ConicSolution) -> RecoveredBound:
    """Read the bound and the piece coefficients off a conic solution.

    Statuses other than optimal and near-optimal yield no bound.
    """
    if not solution.accepted or solution.primal is None:
        logger.warning("No bound: solver status %s (%s)", solution.status, solution.message)
        return RecoveredBound(
            solution.status, None, program.pieces, solution.residuals, solution.wall_time, solution.backend, solution.message
        )
    pieces = tuple(
        piece.with_coefficients(solution.primal[piece.offset : piece.offset + piece.size]) for piece in program.pieces
    )
    gap = solution.residuals.get("gap")
    if solution.status == "near_optimal":
        logger.warning("Near-optimal solve; duality gap estimate %s", gap)
    return RecoveredBound(
        solution.status,
        float(solution.objective),
        pieces,
        solution.residuals,
        solution.wall_time,
        solution.backend,
        solution.message,
        gap,
    )
