"""Controlled process models, costs, initial conditions and generators.

A model is either a controlled diffusion (drift f and diffusion matrix gg^T)
or a controlled jump process (jump maps h_i with propensities a_i). The
extended infinitesimal generator maps polynomials in (t, x) to polynomials in
(t, x, u) for both classes.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from src.config import (
    ADMISSIBILITY_SAMPLES,
    ADMISSIBILITY_SEED,
    ADMISSIBILITY_TOLERANCE,
    LATTICE_SAMPLE_EXTENT,
)
from src.polynomials import Polynomial, Variable, differentiate, substitute
from src.regions import IntervalBox

logger = logging.getLogger(__name__)


class ModelError(ValueError):
    """Raised for inconsistent or inadmissible model definitions."""


def _check_variables(poly: Polynomial, allowed, what: str):
    stray = [v.name for v in poly.variables() if v not in allowed]
    if stray:
        raise ModelError(f"{what} uses undeclared variables {stray}")


def _check_kinds(time: Variable, states, controls):
    if time.kind != "time":
        raise ModelError(f"Time variable {time.name} must have kind 'time'")
    for var in states:
        if var.kind != "state":
            raise ModelError(f"State variable {var.name} must have kind 'state'")
    for var in controls:
        if var.kind != "control":
            raise ModelError(f"Control variable {var.name} must have kind 'control'")
    names = [time.name] + [v.name for v in states] + [v.name for v in controls]
    if len(set(names)) != len(names):
        raise ModelError(f"Variable names must be unique, got {names}")


def _control_samples(control_set: IntervalBox, rng: np.random.Generator, count: int) -> np.ndarray:
    if control_set.dimension == 0:
        return np.zeros((1, 0))
    if not control_set.bounded:
        raise ModelError("Control sets must be bounded boxes")
    lower = np.array(control_set.lower)
    upper = np.array(control_set.upper)
    corners = np.array(np.meshgrid(*zip(lower, upper), indexing="ij")).reshape(control_set.dimension, -1).T
    samples = rng.uniform(lower, upper, size=(count, control_set.dimension))
    return np.vstack([corners, samples])


@dataclass(frozen=True)
class DiffusionModel:
    """Controlled diffusion dx = f(x, u) dt + g(x, u) db.

    Only gg^T enters the generator. ``diffusion_factor`` (g) is optional and
    only needed for path simulation; when given it must reproduce gg^T.
    """

    time: Variable
    states: Tuple[Variable, ...]
    controls: Tuple[Variable, ...]
    drift: Tuple[Polynomial, ...]
    diffusion_matrix: Tuple[Tuple[Polynomial, ...], ...]
    state_set: IntervalBox
    control_set: IntervalBox
    diffusion_factor: Optional[Tuple[Tuple[Polynomial, ...], ...]] = None
    name: str = "diffusion"

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "drift", tuple(Polynomial.coerce(p) for p in self.drift))
        object.__setattr__(
            self, "diffusion_matrix", tuple(tuple(Polynomial.coerce(p) for p in row) for row in self.diffusion_matrix)
        )
        if self.diffusion_factor is not None:
            object.__setattr__(
                self,
                "diffusion_factor",
                tuple(tuple(Polynomial.coerce(p) for p in row) for row in self.diffusion_factor),
            )
        _check_kinds(self.time, self.states, self.controls)
        n = len(self.states)
        if len(self.drift) != n:
            raise ModelError(f"Drift has {len(self.drift)} components for {n} states")
        if len(self.diffusion_matrix) != n or any(len(row) != n for row in self.diffusion_matrix):
            raise ModelError(f"Diffusion matrix must be {n}x{n}")
        if self.state_set.variables != self.states:
            raise ModelError("State set must be a box over the state variables in declaration order")
        if self.control_set.variables != self.controls:
            raise ModelError("Control set must be a box over the control variables in declaration order")
        allowed = set(self.states) | set(self.controls)
        for i, f in enumerate(self.drift):
            _check_variables(f, allowed, f"drift[{i}]")
        for i in range(n):
            for j in range(n):
                _check_variables(self.diffusion_matrix[i][j], allowed, f"diffusion_matrix[{i}][{j}]")
                if not self.diffusion_matrix[i][j].isclose(self.diffusion_matrix[j][i], rel_tol=1e-12):
                    raise ModelError(f"Diffusion matrix is not symmetric at ({i}, {j})")
        if self.diffusion_factor is not None:
            self._check_factor()
        if not self.control_set.bounded:
            raise ModelError("Control sets must be bounded boxes")

    def _check_factor(self):
        g = self.diffusion_factor
        n = len(self.states)
        if len(g) != n:
            raise ModelError(f"Diffusion factor must have {n} rows, got {len(g)}")
        width = len(g[0]) if g else 0
        if any(len(row) != width for row in g):
            raise ModelError("Diffusion factor rows must have equal length")
        for i in range(n):
            for j in range(n):
                ggt = Polynomial.zero()
                for c in range(width):
                    ggt = ggt + g[i][c] * g[j][c]
                if not ggt.isclose(self.diffusion_matrix[i][j], rel_tol=1e-9, abs_tol=1e-15):
                    raise ModelError(f"Diffusion factor does not reproduce diffusion_matrix[{i}][{j}]")

    @property
    def is_deterministic(self) -> bool:
        return all(entry.is_zero for row in self.diffusion_matrix for entry in row)

    @property
    def state_dimension(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class Reaction:
    """One jump channel: x -> jump(x, u) at rate propensity(x, u)."""

    name: str
    jump: Tuple[Polynomial, ...]
    propensity: Polynomial

    def __post_init__(self):
        object.__setattr__(self, "jump", tuple(Polynomial.coerce(p) for p in self.jump))
        object.__setattr__(self, "propensity", Polynomial.coerce(self.propensity))


@dataclass(frozen=True)
class JumpModel:
    """Controlled jump process on the integer points of ``lattice``.

    Admissibility is checked by sampling on construction: propensities must
    be nonnegative, and every jump with positive propensity must land on the
    lattice.
    """

    time: Variable
    states: Tuple[Variable, ...]
    controls: Tuple[Variable, ...]
    reactions: Tuple[Reaction, ...]
    lattice: IntervalBox
    control_set: IntervalBox
    name: str = "jump"
    check_admissibility: bool = field(default=True, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        _check_kinds(self.time, self.states, self.controls)
        if not self.reactions:
            raise ModelError("A jump model needs at least one reaction")
        if self.lattice.variables != self.states:
            raise ModelError("Lattice must be a box over the state variables in declaration order")
        if self.control_set.variables != self.controls:
            raise ModelError("Control set must be a box over the control variables in declaration order")
        allowed = set(self.states) | set(self.controls)
        for reaction in self.reactions:
            if len(reaction.jump) != len(self.states):
                raise ModelError(f"Reaction '{reaction.name}' jump has {len(reaction.jump)} components")
            _check_variables(reaction.propensity, allowed, f"propensity of '{reaction.name}'")
            for i, h in enumerate(reaction.jump):
                _check_variables(h, allowed, f"jump[{i}] of '{reaction.name}'")
        if self.check_admissibility:
            self._check_samples()

    def contains(self, point: Sequence[float]) -> bool:
        return all(float(x) == round(x) for x in point) and self.lattice.contains(point)

    def lattice_samples(self, rng: np.random.Generator, count: int) -> np.ndarray:
        axes = []
        for lo, hi in zip(self.lattice.lower, self.lattice.upper):
            if not math.isfinite(lo):
                lo = (hi if math.isfinite(hi) else 0.0) - LATTICE_SAMPLE_EXTENT
            if not math.isfinite(hi):
                hi = lo + LATTICE_SAMPLE_EXTENT
            axes.append(rng.integers(math.ceil(lo), math.floor(hi) + 1, size=count))
        return np.stack(axes, axis=1).astype(float)

    def _check_samples(self):
        rng = np.random.default_rng(ADMISSIBILITY_SEED)
        xs = self.lattice_samples(rng, ADMISSIBILITY_SAMPLES)
        us = _control_samples(self.control_set, rng, ADMISSIBILITY_SAMPLES)
        picks = rng.integers(0, len(us), size=len(xs))
        variables = self.states + self.controls
        for reaction in self.reactions:
            rate = reaction.propensity.compile(variables)
            images = [h.compile(variables) for h in reaction.jump]
            columns = [xs[:, i] for i in range(xs.shape[1])] + [us[picks, i] for i in range(us.shape[1])]
            rates = np.broadcast_to(rate(*columns), (len(xs),))
            if np.any(rates < -ADMISSIBILITY_TOLERANCE):
                bad = xs[np.argmin(rates)]
                raise ModelError(f"Propensity of '{reaction.name}' is negative at state {bad.tolist()}")
            landed = np.stack([np.broadcast_to(h(*columns), (len(xs),)) for h in images], axis=1)
            active = rates > ADMISSIBILITY_TOLERANCE
            for x, y in zip(xs[active], landed[active]):
                if not self.contains(y):
                    raise ModelError(f"Reaction '{reaction.name}' jumps from {x.tolist()} to {y.tolist()} outside the lattice")


ProcessModel = Union[DiffusionModel, JumpModel]


@dataclass(frozen=True)
class FiniteHorizon:
    T: float

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ModelError(f"Horizon T must be positive and finite, got {self.T}")


@dataclass(frozen=True)
class DiscountedHorizon:
    """Infinite horizon with discount rate rho.

    ``rest_points`` lists states where the process comes to rest at zero
    cost; they allow rho = 0 by pinning the value there to at most zero.
    """

    rho: float
    rest_points: Tuple[Tuple[float, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rest_points", tuple(tuple(float(x) for x in p) for p in self.rest_points))
        if self.rho < 0 or not math.isfinite(self.rho):
            raise ModelError(f"Discount rate must be finite and nonnegative, got {self.rho}")
        if self.rho == 0 and not self.rest_points:
            raise ModelError("A zero discount rate needs at least one rest point")


@dataclass(frozen=True)
class CostSpec:
    stage: Polynomial
    terminal: Polynomial
    horizon: Union[FiniteHorizon, DiscountedHorizon]

    def __post_init__(self):
        object.__setattr__(self, "stage", Polynomial.coerce(self.stage))
        object.__setattr__(self, "terminal", Polynomial.coerce(self.terminal))
        if self.is_discounted and not self.terminal.is_zero:
            raise ModelError("Discounted problems have no terminal cost")
        for var in self.terminal.variables():
            if var.kind != "state":
                raise ModelError(f"Terminal cost may only depend on states, found {var.name}")

    @property
    def is_discounted(self) -> bool:
        return isinstance(self.horizon, DiscountedHorizon)

    def check_against(self, model: ProcessModel):
        allowed = set(model.states) | set(model.controls)
        _check_variables(self.stage, allowed, "stage cost")
        _check_variables(self.terminal, set(model.states), "terminal cost")
        if self.is_discounted:
            for point in self.horizon.rest_points:
                if len(point) != len(model.states):
                    raise ModelError(f"Rest point {list(point)} does not match {len(model.states)} states")


@dataclass(frozen=True)
class InitialCondition:
    """Finite mixture of Dirac atoms."""

    atoms: Tuple[Tuple[float, ...], ...]
    weights: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(tuple(float(x) for x in a) for a in self.atoms))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.atoms:
            raise ModelError("Initial condition needs at least one atom")
        if len(self.atoms) != len(self.weights):
            raise ModelError(f"{len(self.atoms)} atoms but {len(self.weights)} weights")
        if any(w < 0 for w in self.weights):
            raise ModelError(f"Initial weights must be nonnegative, got {list(self.weights)}")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ModelError(f"Initial weights must sum to 1, got {sum(self.weights)}")
        if len({len(a) for a in self.atoms}) != 1:
            raise ModelError("All initial atoms must have the same dimension")

    @classmethod
    def dirac(cls, point: Sequence[float]) -> "InitialCondition":
        return cls((tuple(point),), (1.0,))


def _check_argument(w: Polynomial, model: ProcessModel):
    allowed = {model.time, *model.states}
    stray = [v.name for v in w.variables() if v not in allowed]
    if stray:
        raise ModelError(f"Generator argument must be a polynomial in (t, x); found variables {stray}")


def generator_diffusion(w: Polynomial, model: DiffusionModel) -> Polynomial:
    """A w = dw/dt + f . grad w + 1/2 Tr(gg^T Hess w)."""
    _check_argument(w, model)
    result = differentiate(w, model.time) if model.time in w.variables() else Polynomial.zero()
    gradient = [differentiate(w, x) for x in model.states]
    for f, dw in zip(model.drift, gradient):
        if not dw.is_zero:
            result = result + f * dw
    for i, xi in enumerate(model.states):
        if gradient[i].is_zero:
            continue
        for j, xj in enumerate(model.states):
            entry = model.diffusion_matrix[i][j]
            if entry.is_zero:
                continue
            second = differentiate(gradient[i], xj)
            if not second.is_zero:
                result = result + (entry * second).scale(0.5)
    return result


def generator_jump(w: Polynomial, model: JumpModel) -> Polynomial:
    """A w = dw/dt + sum_i a_i (w(t, h_i(x, u)) - w(t, x))."""
    _check_argument(w, model)
    result = differentiate(w, model.time) if model.time in w.variables() else Polynomial.zero()
    for reaction in model.reactions:
        shifted = substitute(w, dict(zip(model.states, reaction.jump)))
        change = shifted - w
        if not change.is_zero:
            result = result + reaction.propensity * change
    return result


def generator(w: Polynomial, model: ProcessModel) -> Polynomial:
    if isinstance(model, DiffusionModel):
        return generator_diffusion(w, model)
    if isinstance(model, JumpModel):
        return generator_jump(w, model)
    raise ModelError(f"Unsupported model type {type(model).__name__}")


def generator_discounted(w: Polynomial, model: ProcessModel, rho: float) -> Polynomial:
    """A w - rho w."""
    if rho < 0:
        raise ModelError(f"Discount rate must be nonnegative, got {rho}")
    return generator(w, model) - w.scale(rho)


@dataclass(frozen=True)
class DynkinResidual:
    residual: float
    stderr: float
    paths: int
    diverged: int


def verify_dynkin_mc(
    w: Polynomial,
    model: ProcessModel,
    t: float,
    trials: int,
    x0: Sequence[float],
    control: Optional[Sequence[float]] = None,
    seed: int = 0,
    dt: float = 1e-3,
) -> DynkinResidual:
    """Monte Carlo check of E[w(t, x(t))] - w(0, x0) - E[int_0^t A w ds].

    Diffusions use the left-point rule on the Euler-Maruyama grid; jump paths
    integrate A w exactly between events.

    Args:
        w: Test function in (t, x)
        model: Process model
        t: Test horizon
        trials: Number of simulated paths
        x0: Initial state
        control: Constant admissible control, lower corner of U by default
        seed: Base seed of the per-path random streams
        dt: Euler-Maruyama step

    Returns:
        Residual estimate with its standard error
    """
    from src.simulate import ConstantControl, run_ensemble

    if control is None:
        control = model.control_set.lower
    controller = ConstantControl(tuple(control), model.control_set)
    values = dict(zip(model.states, x0))
    values[model.time] = 0.0
    start = w.evaluate(values)
    aw = generator(w, model)
    result = run_ensemble(
        model,
        controller,
        np.tile(np.asarray(x0, dtype=float), (trials, 1)),
        horizon=t,
        seed=seed,
        dt=dt,
        running=aw,
        terminal=w,
        rule="left",
        quadrature_nodes=aw.degree_in(model.time) // 2 + 1,
    )
    keep = ~result.diverged
    if not keep.any():
        raise ModelError("Every Dynkin test path diverged")
    samples = result.terminal_values[keep] - result.running_integrals[keep] - start
    stderr = float(np.std(samples, ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else 0.0
    return DynkinResidual(float(np.mean(samples)), stderr, trials, int(result.diverged.sum()))


def lotka_volterra(
    gamma: Sequence[float] = (1.0, 2.0, 1.0, 2.0, 0.025),
    horizon: float = 10.0,
    x0: Sequence[float] = (1.0, 0.25),
) -> Tuple[DiffusionModel, CostSpec, InitialCondition]:
    """Controlled stochastic predator-prey model with harvesting control u."""
    t = Variable("t", "time")
    x1, x2 = Variable("x1"), Variable("x2")
    u = Variable("u", "control")
    X1, X2, U = (Polynomial.variable(v) for v in (x1, x2, u))
    g1, g2, g3, g4, g5 = gamma
    drift = (g1 * X1 - g2 * X1 * X2, g4 * X1 * X2 - g3 * X2 - X2 * U)
    factor = ((g5 * X1,), (Polynomial.zero(),))
    matrix = ((factor[0][0] * factor[0][0], Polynomial.zero()), (Polynomial.zero(), Polynomial.zero()))
    model = DiffusionModel(
        time=t,
        states=(x1, x2),
        controls=(u,),
        drift=drift,
        diffusion_matrix=matrix,
        state_set=IntervalBox((x1, x2), (0.0, 0.0), (math.inf, math.inf)),
        control_set=IntervalBox((u,), (0.0,), (1.0,)),
        diffusion_factor=factor,
        name="lotka_volterra",
    )
    stage = (X1 - 0.75) ** 2 + (X2 - 0.5) ** 2 / 10 + (U - 0.5) ** 2 / 10
    cost = CostSpec(stage, Polynomial.zero(), FiniteHorizon(horizon))
    return model, cost, InitialCondition.dirac(x0)


def biocircuit(horizon: float = 10.0, x0: Sequence[float] = (0.0, 1.0)) -> Tuple[JumpModel, CostSpec, InitialCondition]:
    """Gene expression with a controlled promoter; the inactive promoter state is eliminated as 1 - x2."""
    t = Variable("t", "time")
    x1, x2 = Variable("x1"), Variable("x2")
    u = Variable("u", "control")
    X1, X2, U = (Polynomial.variable(v) for v in (x1, x2, u))
    reactions = (
        Reaction("expression", (X1 + 1, X2), 10 * X2),
        Reaction("degradation", (X1 - 1, X2), 0.1 * X1),
        Reaction("repression", (X1, X2 - 1), 0.1 * X1 * X2),
        Reaction("activation", (X1, X2 + 1), 10 * (1 - U) * (1 - X2)),
        Reaction("deactivation", (X1, X2 - 1), 10 * U * X2),
    )
    model = JumpModel(
        time=t,
        states=(x1, x2),
        controls=(u,),
        reactions=reactions,
        lattice=IntervalBox((x1, x2), (0.0, 0.0), (math.inf, 1.0)),
        control_set=IntervalBox((u,), (0.0,), (1.0,)),
        name="biocircuit",
    )
    stage = (X1 - 10) ** 2 + 10 * (U - 0.5) ** 2
    cost = CostSpec(stage, Polynomial.zero(), FiniteHorizon(horizon))
    return model, cost, InitialCondition.dirac(x0)
