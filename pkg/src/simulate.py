"""Path simulation, policy extraction and Monte Carlo upper bounds.

Diffusions are integrated with Euler-Maruyama and clipped to their state
box; jump processes use a next-event (Gillespie) scheme whose control is
refreshed at every event and at least every ``max_hold`` time units. Both
engines advance a whole ensemble in lockstep while every path draws from
its own random stream seeded by (seed, path index), so a path's outcome
does not depend on which other paths share the batch.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.config import (
    CONTROL_GRID_STEP,
    DEFAULT_DT,
    DEFAULT_MAX_HOLD,
    DISCOUNT_TRUNCATION,
    DIVERGENCE_WARN_FRACTION,
    ENSEMBLE_COLUMNS,
    NOISE_BUFFER_STEPS,
    SUMMARY_COLUMNS,
    TIE_TOLERANCE,
)
from src.models import CostSpec, DiffusionModel, InitialCondition, JumpModel, ModelError, ProcessModel, generator
from src.polynomials import Polynomial
from src.regions import IntervalBox, Partition

logger = logging.getLogger(__name__)


class Controller(Protocol):
    def evaluate_batch(self, times: np.ndarray, states: np.ndarray) -> np.ndarray:
        ...


def control_grid(control_set: IntervalBox, step: float = CONTROL_GRID_STEP) -> np.ndarray:
    """Grid dU of admissible controls in lexicographic order.

    Examples:
        >>> from src.polynomials import Variable
        >>> u = Variable("u", "control")
        >>> len(control_grid(IntervalBox((u,), (0.0,), (1.0,))))
        21
    """
    if step <= 0:
        raise ValueError(f"Control grid step must be positive, got {step}")
    return control_set.grid(step)


@dataclass(frozen=True)
class ConstantControl:
    """Controller that always applies the same admissible control."""

    control: Tuple[float, ...]
    control_set: IntervalBox

    def __post_init__(self):
        object.__setattr__(self, "control", tuple(float(v) for v in self.control))
        if len(self.control) != self.control_set.dimension:
            raise ValueError(f"Control {list(self.control)} does not match {self.control_set.dimension} control variables")
        if not self.control_set.contains(self.control):
            raise ValueError(f"Control {list(self.control)} lies outside the control set {self.control_set}")

    def evaluate(self, t: float, x: Sequence[float]) -> Tuple[float, ...]:
        return self.control

    def evaluate_batch(self, times: np.ndarray, states: np.ndarray) -> np.ndarray:
        count = np.atleast_2d(states).shape[0]
        return np.tile(np.asarray(self.control, dtype=float), (count, 1))


class Policy:
    """Argmin feedback law built from a piecewise underestimator.

    At (t, x) the piece of the cell containing x on the interval containing t
    is used, and the control on the grid minimising A w(t, x, u) + l(x, u)
    is returned. Ties go to the lexicographically smallest control.
    """

    def __init__(
        self,
        model: ProcessModel,
        stage: Polynomial,
        partition: Partition,
        pieces: Mapping[Tuple[int, int], Polynomial],
        grid: Optional[np.ndarray] = None,
    ):
        self.model = model
        self.partition = partition
        self.grid = control_grid(model.control_set) if grid is None else np.atleast_2d(np.asarray(grid, dtype=float))
        if self.grid.shape[0] == 0:
            raise ValueError("Control grid must not be empty")
        if self.grid.shape[1] != len(model.controls):
            raise ValueError(f"Control grid has {self.grid.shape[1]} columns for {len(model.controls)} controls")
        outside = [u for u in self.grid if not model.control_set.contains(u, tol=1e-12)]
        if outside:
            raise ValueError(f"Control grid points {outside[0].tolist()} lie outside the control set")
        self.pieces = dict(pieces)
        expected = {(i, k) for i in range(1, partition.n_t + 1) for k in range(partition.n_x)}
        missing = sorted(expected - set(self.pieces))
        if missing:
            raise ValueError(f"Policy is missing pieces {missing}")
        point_vars = (model.time,) + model.states
        control_columns = [self.grid[:, j] for j in range(self.grid.shape[1])]
        self._tables = {}
        for key, w in self.pieces.items():
            hamiltonian = generator(w, model) + stage
            groups = hamiltonian.collect(model.controls)
            coefficient_fns = [coef.compile(point_vars) for coef in groups.values()]
            monomial_values = np.stack(
                [np.broadcast_to(Polynomial.from_monomial(m).compile(model.controls)(*control_columns), (len(self.grid),)) for m in groups],
                axis=1,
            )
            self._tables[key] = (coefficient_fns, monomial_values)

    @classmethod
    def from_bound(cls, model: ProcessModel, cost: CostSpec, partition: Partition, bound, grid=None) -> "Policy":
        if bound.lower_bound is None:
            raise ValueError(f"Cannot build a policy from a failed solve (status {bound.status})")
        return cls(model, cost.stage, partition, {p.index: p.to_polynomial() for p in bound.pieces}, grid)

    def locate(self, states: np.ndarray) -> np.ndarray:
        cells = self.partition.locate_batch(states)
        outside = np.flatnonzero(cells < 0)
        if outside.size:
            logger.warning("%d states lie outside every cell; using the nearest cell", outside.size)
            cells[outside] = [self.partition.nearest(states[r]) for r in outside]
        return cells

    def evaluate_batch(self, times: np.ndarray, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        times = np.broadcast_to(np.asarray(times, dtype=float), (states.shape[0],))
        cells = self.locate(states)
        intervals = self.partition.time_intervals(times)
        result = np.empty((states.shape[0], self.grid.shape[1]))
        keys = np.stack([intervals, cells], axis=1)
        for i, k in np.unique(keys, axis=0):
            rows = np.flatnonzero((intervals == i) & (cells == k))
            coefficient_fns, monomial_values = self._tables[(int(i), int(k))]
            columns = [times[rows]] + [states[rows, j] for j in range(states.shape[1])]
            coefficients = np.stack([np.broadcast_to(fn(*columns), (rows.size,)) for fn in coefficient_fns], axis=1)
            scores = coefficients @ monomial_values.T
            best = scores.min(axis=1, keepdims=True)
            threshold = best + TIE_TOLERANCE * np.maximum(1.0, np.abs(best))
            result[rows] = self.grid[np.argmax(scores <= threshold, axis=1)]
        return result

    def evaluate(self, t: float, x: Sequence[float]) -> Tuple[float, ...]:
        return tuple(float(v) for v in self.evaluate_batch(np.array([t]), np.asarray([x], dtype=float))[0])


def evaluate_policy(policy: Policy, t: float, x: Sequence[float]) -> Tuple[float, ...]:
    """Control chosen by ``policy`` at time t and state x."""
    return policy.evaluate(t, x)


class _PathStreams:
    """One numpy Generator per path with buffered draws."""

    def __init__(self, seed: int, path_ids: np.ndarray, width: int, kind: str, buffer_steps: int = NOISE_BUFFER_STEPS):
        self.generators = [np.random.default_rng([int(seed), int(p)]) for p in path_ids]
        self.width = width
        self.kind = kind
        self.buffer = np.empty((len(path_ids), buffer_steps, width))
        self.cursor = np.full(len(path_ids), buffer_steps)

    def _refill(self, row: int):
        shape = self.buffer.shape[1:]
        rng = self.generators[row]
        self.buffer[row] = rng.standard_normal(shape) if self.kind == "normal" else rng.random(shape)
        self.cursor[row] = 0

    def draw(self, rows: np.ndarray) -> np.ndarray:
        for row in rows[self.cursor[rows] >= self.buffer.shape[1]]:
            self._refill(row)
        values = self.buffer[rows, self.cursor[rows]]
        self.cursor[rows] += 1
        return values


class _MeanRecorder:
    """Running sums of the state at fixed times, for the ensemble mean path."""

    def __init__(self, horizon: float, points: int, paths: int, dimension: int):
        self.times = np.linspace(0.0, horizon, points) if points > 0 else np.zeros(0)
        self.sums = np.zeros((len(self.times), dimension))
        self.counts = np.zeros(len(self.times))
        self.pointer = np.zeros(paths, dtype=int)

    def advance(self, rows: np.ndarray, t_end: np.ndarray, states: np.ndarray):
        """Record ``states`` (held until ``t_end``) at every pending time before ``t_end``."""
        if not len(self.times):
            return
        t_end = np.broadcast_to(t_end, rows.shape)
        while True:
            ptr = self.pointer[rows]
            pending = ptr < len(self.times)
            pending[pending] = self.times[ptr[pending]] < t_end[pending]
            if not pending.any():
                return
            np.add.at(self.sums, ptr[pending], states[pending])
            np.add.at(self.counts, ptr[pending], 1.0)
            self.pointer[rows[pending]] += 1

    def finish(self, rows: np.ndarray, states: np.ndarray):
        self.advance(rows, np.full(rows.shape, np.inf), states)

    def mean(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sums / self.counts[:, None]


@dataclass
class TrajectoryEnsemble:
    """Per-path costs and end states of a simulated ensemble.

    ``values`` is NaN for diverged paths; they are excluded from every
    statistic and counted separately.
    """

    running_integrals: np.ndarray
    terminal_values: np.ndarray
    terminal_states: np.ndarray
    diverged: np.ndarray
    events: np.ndarray
    seed: int
    horizon: float
    dt: Optional[float] = None
    mean_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mean_path: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def paths(self) -> int:
        return len(self.diverged)

    @property
    def values(self) -> np.ndarray:
        return np.where(self.diverged, np.nan, self.running_integrals + self.terminal_values)

    def finite_values(self) -> np.ndarray:
        return self.values[~self.diverged]

    def mean(self) -> float:
        return float(np.mean(self.finite_values()))

    def stderr(self) -> float:
        values = self.finite_values()
        if len(values) < 2:
            return 0.0
        return float(np.std(values, ddof=1) / math.sqrt(len(values)))

    def summary(self) -> Dict[str, float]:
        used = int((~self.diverged).sum())
        return {
            "paths": self.paths,
            "used": used,
            "diverged": int(self.diverged.sum()),
            "mean": self.mean() if used else float("nan"),
            "stderr": self.stderr(),
            "seed": self.seed,
            "dt": self.dt,
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "path": np.arange(self.paths),
                "cost": self.values,
                "diverged": self.diverged,
                "events": self.events,
            },
            columns=ENSEMBLE_COLUMNS,
        )

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame([self.summary()], columns=SUMMARY_COLUMNS)


@dataclass
class Trajectory:
    """A single simulated path."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    cost: float
    diverged: bool
    reactions: List[str] = field(default_factory=list)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _columns(*arrays: np.ndarray) -> List[np.ndarray]:
    columns = []
    for arr in arrays:
        columns.extend(arr[:, j] for j in range(arr.shape[1]))
    return columns


def _compiled(poly: Optional[Polynomial], variables) -> callable:
    poly = Polynomial.zero() if poly is None else poly
    fn = poly.compile(variables)
    return lambda count, *columns: np.broadcast_to(fn(*columns), (count,)).astype(float)


def _check_trace(trace, paths: int):
    if trace is not None and paths != 1:
        raise ValueError(f"A traced run follows exactly one path, got {paths}")


def _run_diffusion(model, controller, x0s, horizon, seed, dt, running, terminal, rule, discount, recorder, path_ids, trace):
    if not model.is_deterministic and model.diffusion_factor is None:
        raise ModelError(f"Simulating '{model.name}' needs a diffusion factor g alongside gg^T")
    paths, n = x0s.shape
    _check_trace(trace, paths)
    variables = model.states + model.controls
    drift = [_compiled(f, variables) for f in model.drift]
    factor = None
    width = 0
    if not model.is_deterministic:
        width = len(model.diffusion_factor[0])
        factor = [[_compiled(g, variables) for g in row] for row in model.diffusion_factor]
    lower, upper = np.array(model.state_set.lower), np.array(model.state_set.upper)
    point_vars = (model.time,) + model.states + model.controls
    running_fn = _compiled(running, point_vars)
    terminal_fn = _compiled(terminal, (model.time,) + model.states)
    streams = _PathStreams(seed, path_ids, width, "normal") if width else None
    steps = max(1, math.ceil(horizon / dt - 1e-9))
    grid = np.minimum(np.arange(steps + 1) * dt, horizon)
    grid[-1] = horizon
    x = np.clip(x0s.astype(float), lower, upper)
    diverged = np.zeros(paths, dtype=bool)
    rows = np.arange(paths)
    integral = np.zeros(paths)
    u = controller.evaluate_batch(np.zeros(paths), x)
    left = running_fn(paths, np.zeros(paths), *_columns(x, u))
    for k in range(steps):
        t, t_next = grid[k], grid[k + 1]
        h = t_next - t
        if recorder is not None:
            alive = rows[~diverged]
            recorder.advance(alive, np.full(alive.shape, t_next), x[alive])
        if trace is not None:
            trace.append((t, x[0].copy(), u[0].copy(), None))
        cols = _columns(x, u)
        step = np.stack([f(paths, *cols) for f in drift], axis=1) * h
        if factor is not None:
            noise = streams.draw(rows) * math.sqrt(h)
            g = np.stack([np.stack([gij(paths, *cols) for gij in row], axis=1) for row in factor], axis=1)
            step = step + np.einsum("pij,pj->pi", g, noise)
        with np.errstate(over="ignore", invalid="ignore"):
            x_next = np.clip(x + step, lower, upper)
        bad = ~np.isfinite(x_next).all(axis=1) & ~diverged
        diverged |= bad
        x_next[diverged] = x[diverged]
        x = x_next
        u = controller.evaluate_batch(np.full(paths, t_next), x)
        right = running_fn(paths, np.full(paths, t_next), *_columns(x, u))
        if rule == "trapezoid":
            integral += 0.5 * h * (math.exp(-discount * t) * left + math.exp(-discount * t_next) * right)
        else:
            integral += h * math.exp(-discount * t) * left
        left = right
        diverged |= ~np.isfinite(integral)
    if trace is not None:
        trace.append((horizon, x[0].copy(), u[0].copy(), None))
    if recorder is not None:
        alive = rows[~diverged]
        recorder.finish(alive, x[alive])
    final = terminal_fn(paths, np.full(paths, horizon), *_columns(x)) * math.exp(-discount * horizon)
    diverged |= ~np.isfinite(final)
    return integral, final, x, diverged, np.zeros(paths, dtype=int)


def _run_jump(model, controller, x0s, horizon, seed, max_hold, running, terminal, nodes, discount, recorder, path_ids, trace):
    if max_hold <= 0:
        raise ValueError(f"max_hold must be positive, got {max_hold}")
    paths, n = x0s.shape
    _check_trace(trace, paths)
    variables = model.states + model.controls
    rates = [_compiled(r.propensity, variables) for r in model.reactions]
    jumps = [[_compiled(h, variables) for h in r.jump] for r in model.reactions]
    point_vars = (model.time,) + model.states + model.controls
    running_fn = _compiled(running, point_vars)
    terminal_fn = _compiled(terminal, (model.time,) + model.states)
    quad_nodes, quad_weights = np.polynomial.legendre.leggauss(nodes)
    streams = _PathStreams(seed, path_ids, 2, "uniform")
    t = np.zeros(paths)
    x = x0s.astype(float).copy()
    integral = np.zeros(paths)
    events = np.zeros(paths, dtype=int)
    diverged = np.zeros(paths, dtype=bool)
    active = t < horizon
    u = controller.evaluate_batch(t, x)
    while active.any():
        idx = np.flatnonzero(active)
        xs = x[idx]
        us = controller.evaluate_batch(t[idx], xs)
        u[idx] = us
        cols = _columns(xs, us)
        count = idx.size
        a = np.maximum(np.stack([rate(count, *cols) for rate in rates], axis=1), 0.0)
        total = a.sum(axis=1)
        draws = streams.draw(idx)
        with np.errstate(divide="ignore"):
            tau = np.where(total > 0, -np.log1p(-draws[:, 0]) / np.where(total > 0, total, 1.0), np.inf)
        refresh_at = np.minimum(t[idx] + max_hold, horizon)
        fire = t[idx] + tau < refresh_at
        t_next = np.where(fire, t[idx] + tau, refresh_at)
        half, mid = 0.5 * (t_next - t[idx]), 0.5 * (t_next + t[idx])
        acc = np.zeros(count)
        for node, weight in zip(quad_nodes, quad_weights):
            s = mid + half * node
            acc += weight * running_fn(count, s, *cols) * np.exp(-discount * s)
        integral[idx] += half * acc
        if recorder is not None:
            recorder.advance(idx, t_next, xs)
        fired_rows = np.flatnonzero(fire)
        chosen = np.zeros(0, dtype=int)
        if fired_rows.size:
            cumulative = np.cumsum(a[fired_rows], axis=1)
            target = draws[fired_rows, 1] * total[fired_rows]
            chosen = np.minimum((cumulative <= target[:, None]).sum(axis=1), len(rates) - 1)
            for r in np.unique(chosen):
                local = fired_rows[chosen == r]
                sub = [c[local] for c in cols]
                x[idx[local]] = np.stack([h(local.size, *sub) for h in jumps[r]], axis=1)
            events[idx[fired_rows]] += 1
        if trace is not None:
            fired = model.reactions[int(chosen[0])].name if fire[0] else None
            trace.append((float(t[0]), xs[0].copy(), us[0].copy(), fired))
        t[idx] = t_next
        bad = ~np.isfinite(x[idx]).all(axis=1) | ~np.isfinite(integral[idx])
        diverged[idx[bad]] = True
        active = (t < horizon) & ~diverged
    if trace is not None:
        trace.append((horizon, x[0].copy(), u[0].copy(), None))
    rows = np.arange(paths)
    if recorder is not None:
        alive = rows[~diverged]
        recorder.finish(alive, x[alive])
    final = terminal_fn(paths, np.full(paths, horizon), *_columns(x)) * math.exp(-discount * horizon)
    diverged |= ~np.isfinite(final)
    return integral, final, x, diverged, events


def run_ensemble(
    model: ProcessModel,
    controller: Controller,
    x0s: np.ndarray,
    horizon: float,
    seed: int = 0,
    dt: float = DEFAULT_DT,
    max_hold: float = DEFAULT_MAX_HOLD,
    running: Optional[Polynomial] = None,
    terminal: Optional[Polynomial] = None,
    rule: str = "trapezoid",
    quadrature_nodes: Optional[int] = None,
    discount: float = 0.0,
    record_points: int = 0,
    path_offset: int = 0,
) -> TrajectoryEnsemble:
    """Simulate one path per row of ``x0s`` and accumulate path functionals.

    Args:
        model: Diffusion or jump model
        controller: Object with ``evaluate_batch(times, states)``
        x0s: Initial states, shape (paths, states)
        horizon: Final time
        seed: Base seed; path p uses the stream seeded by (seed, path_offset + p)
        dt: Euler-Maruyama step (diffusions only)
        max_hold: Longest time a control is held (jump processes only)
        running: Integrand in (t, x, u), zero by default
        terminal: Terminal functional in (t, x), evaluated at the horizon
        rule: "trapezoid" or "left" accumulation on the diffusion grid
        quadrature_nodes: Gauss-Legendre nodes between jump events; exact
            for polynomial time dependence by default
        discount: Rate rho of the weight exp(-rho t) on both functionals
        record_points: Number of equally spaced times of the recorded mean path
        path_offset: Index of the first path, for splitting runs into chunks

    Returns:
        The ensemble of per-path integrals and terminal values
    """
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    if x0s.shape[1] != len(model.states):
        raise ValueError(f"Initial states have {x0s.shape[1]} columns for {len(model.states)} states")
    if not horizon > 0 or not math.isfinite(horizon):
        raise ValueError(f"Simulation horizon must be positive and finite, got {horizon}")
    if discount < 0:
        raise ValueError(f"Discount rate must be nonnegative, got {discount}")
    paths = x0s.shape[0]
    path_ids = np.arange(path_offset, path_offset + paths)
    recorder = _MeanRecorder(horizon, record_points, paths, x0s.shape[1]) if record_points else None
    if isinstance(model, DiffusionModel):
        if dt <= 0:
            raise ValueError(f"Step size must be positive, got {dt}")
        if rule not in ("trapezoid", "left"):
            raise ValueError(f"Unknown accumulation rule '{rule}'")
        outcome = _run_diffusion(
            model, controller, x0s, horizon, seed, dt, running, terminal, rule, discount, recorder, path_ids, None
        )
        step = dt
    elif isinstance(model, JumpModel):
        if quadrature_nodes is None:
            quadrature_nodes = (running.degree_in(model.time) // 2 + 1) if running is not None else 1
        outcome = _run_jump(
            model, controller, x0s, horizon, seed, max_hold, running, terminal, quadrature_nodes, discount, recorder, path_ids, None
        )
        step = None
    else:
        raise ModelError(f"Unsupported model type {type(model).__name__}")
    integral, final, states, diverged, events = outcome
    ensemble = TrajectoryEnsemble(
        running_integrals=integral,
        terminal_values=final,
        terminal_states=states,
        diverged=diverged,
        events=events,
        seed=seed,
        horizon=horizon,
        dt=step,
    )
    if recorder is not None:
        ensemble.mean_times = recorder.times
        ensemble.mean_path = recorder.mean()
    logger.debug("Simulated %d paths of '%s' to t=%g (%d diverged)", paths, model.name, horizon, int(diverged.sum()))
    return ensemble


def _trajectory(trace, integral, final, diverged, reactions=None) -> Trajectory:
    return Trajectory(
        times=np.array([entry[0] for entry in trace]),
        states=np.array([entry[1] for entry in trace]),
        controls=np.array([entry[2] for entry in trace]),
        cost=float(integral[0] + final[0]),
        diverged=bool(diverged[0]),
        reactions=[entry[3] for entry in trace if entry[3] is not None],
    )


def simulate_diffusion(
    model: DiffusionModel,
    controller: Controller,
    x0: Sequence[float],
    horizon: float,
    dt: float = DEFAULT_DT,
    seed: int = 0,
    running: Optional[Polynomial] = None,
    terminal: Optional[Polynomial] = None,
) -> Trajectory:
    """Single Euler-Maruyama path with the control re-evaluated every step."""
    if dt <= 0:
        raise ValueError(f"Step size must be positive, got {dt}")
    trace = []
    x0s = np.asarray([x0], dtype=float)
    integral, final, _, diverged, _ = _run_diffusion(
        model, controller, x0s, horizon, seed, dt, running, terminal, "trapezoid", 0.0, None, np.array([0]), trace
    )
    return _trajectory(trace, integral, final, diverged)


def simulate_jump(
    model: JumpModel,
    controller: Controller,
    x0: Sequence[float],
    horizon: float,
    seed: int = 0,
    max_hold: float = DEFAULT_MAX_HOLD,
    running: Optional[Polynomial] = None,
    terminal: Optional[Polynomial] = None,
) -> Trajectory:
    """Single next-event path; ``reactions`` lists the fired channels in order."""
    trace = []
    x0s = np.asarray([x0], dtype=float)
    nodes = (running.degree_in(model.time) // 2 + 1) if running is not None else 1
    integral, final, _, diverged, _ = _run_jump(
        model, controller, x0s, horizon, seed, max_hold, running, terminal, nodes, 0.0, None, np.array([0]), trace
    )
    return _trajectory(trace, integral, final, diverged)


@dataclass
class UpperBoundEstimate:
    upper_bound: float
    stderr: float
    ensemble: TrajectoryEnsemble


def _initial_states(initial: InitialCondition, n_paths: int, seed: int) -> np.ndarray:
    atoms = np.asarray(initial.atoms, dtype=float)
    if len(atoms) == 1:
        return np.tile(atoms[0], (n_paths, 1))
    rng = np.random.default_rng([int(seed), n_paths])
    picks = rng.choice(len(atoms), size=n_paths, p=np.asarray(initial.weights) / np.sum(initial.weights))
    return atoms[picks]


def estimate_ub(
    model: ProcessModel,
    cost: CostSpec,
    controller: Controller,
    initial: InitialCondition,
    n_paths: int,
    seed: int = 0,
    dt: float = DEFAULT_DT,
    max_hold: float = DEFAULT_MAX_HOLD,
    horizon: Optional[float] = None,
    record_points: int = 0,
) -> UpperBoundEstimate:
    """Ensemble-average cost of ``controller``, an upper bound on the optimal value.

    Finite-horizon costs integrate over [0, T]. Discounted costs with rho > 0
    integrate until the discount weight falls to DISCOUNT_TRUNCATION unless a
    horizon is given; undiscounted rest-point problems need an explicit
    horizon.
    """
    if n_paths < 2:
        raise ValueError(f"Upper-bound estimation needs at least 2 paths, got {n_paths}")
    discount = 0.0
    terminal = cost.terminal
    if cost.is_discounted:
        discount = cost.horizon.rho
        terminal = None
        if horizon is None:
            if discount == 0.0:
                raise ValueError("Undiscounted infinite-horizon costs need an explicit simulation horizon")
            horizon = math.log(1.0 / DISCOUNT_TRUNCATION) / discount
    elif horizon is None:
        horizon = cost.horizon.T
    ensemble = run_ensemble(
        model,
        controller,
        _initial_states(initial, n_paths, seed),
        horizon,
        seed=seed,
        dt=dt,
        max_hold=max_hold,
        running=cost.stage,
        terminal=terminal,
        discount=discount,
        record_points=record_points,
    )
    diverged = int(ensemble.diverged.sum())
    if diverged > DIVERGENCE_WARN_FRACTION * n_paths:
        logger.warning("%d of %d paths diverged and were excluded", diverged, n_paths)
    if diverged == n_paths:
        raise ModelError("Every simulated path diverged")
    estimate = UpperBoundEstimate(ensemble.mean(), ensemble.stderr(), ensemble)
    logger.info("UB = %.6g ± %.2g from %d paths", estimate.upper_bound, estimate.stderr, n_paths - diverged)
    return estimate


def gap(lower_bound: float, upper_bound: float) -> Optional[float]:
    """Relative optimality gap (UB - LB) / UB, or None when UB <= 0.

    Examples:
        >>> gap(3.0, 4.0)
        0.25
        >>> gap(1.0, 0.0) is None
        True
    """
    if upper_bound is None or lower_bound is None or not upper_bound > 0:
        return None
    return (upper_bound - lower_bound) / upper_bound


def format_gap(value: Optional[float]) -> str:
    return "N/A" if value is None else f"{value:.4f}"


@dataclass
class BoundReport:
    """Certified lower bound with an optional simulated upper bound."""

    name: str
    lower_bound: Optional[float]
    status: str
    upper_bound: Optional[float] = None
    upper_stderr: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)
    metadata: Dict[str, Union[int, float, str]] = field(default_factory=dict)
    flagged: bool = False

    def __post_init__(self):
        if self.lower_bound is not None and self.upper_bound is not None:
            slack = 3.0 * (self.upper_stderr or 0.0)
            if self.lower_bound > self.upper_bound + slack:
                self.flagged = True
                logger.warning(
                    "Lower bound %.6g exceeds the simulated upper bound %.6g by more than 3 standard errors",
                    self.lower_bound,
                    self.upper_bound,
                )

    @property
    def gap(self) -> Optional[float]:
        return gap(self.lower_bound, self.upper_bound)

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "status": self.status,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "upper_stderr": self.upper_stderr,
            "gap": self.gap,
            "flagged": self.flagged,
            "timings": dict(self.timings),
            "metadata": dict(self.metadata),
        }

    def lines(self) -> List[str]:
        lines = [f"instance: {self.name}", f"status: {self.status}"]
        lines.append(f"LB: {self.lower_bound:.10g}" if self.lower_bound is not None else "LB: none")
        if self.upper_bound is not None:
            lines.append(f"UB: {self.upper_bound:.10g} ± {self.upper_stderr or 0.0:.3g}")
            lines.append(f"gap: {format_gap(self.gap)}")
        for key, value in self.timings.items():
            lines.append(f"{key}: {value:.3f}s")
        return lines
