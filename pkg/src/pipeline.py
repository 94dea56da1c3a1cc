"""End-to-end bound computation for a problem spec."""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, Optional

from src.conic import ConicProblem, ConicSolution, SolverSettings, solve, structure_report
from src.regions import Partition
from src.relax import RecoveredBound, SOSProgram, assemble, lower_to_conic, recover_solution
from src.simulate import BoundReport, ConstantControl, Policy, UpperBoundEstimate, estimate_ub
from src.spec_loader import ProblemSpec

logger = logging.getLogger(__name__)


@dataclass
class BoundRun:
    spec: ProblemSpec
    partition: Partition
    program: SOSProgram
    problem: ConicProblem
    solution: ConicSolution
    bound: RecoveredBound
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def structure(self) -> Dict[str, int]:
        return structure_report(self.problem)

    def policy(self) -> Policy:
        return Policy.from_bound(self.spec.model, self.spec.cost, self.partition, self.bound)

    def report(self, upper: Optional[UpperBoundEstimate] = None) -> BoundReport:
        metadata = dict(self.program.metadata)
        metadata.update(self.structure)
        metadata["backend"] = self.solution.backend
        return BoundReport(
            name=self.spec.name,
            lower_bound=self.bound.lower_bound,
            status=self.bound.status,
            upper_bound=None if upper is None else upper.upper_bound,
            upper_stderr=None if upper is None else upper.stderr,
            timings=dict(self.timings),
            metadata=metadata,
        )


def build_program(spec: ProblemSpec):
    """Partition, SOS program and conic problem of ``spec``, with assembly time."""
    started = time.perf_counter()
    partition = spec.build_partition()
    program = assemble(spec.model, spec.cost, partition, spec.initial, spec.solve.degree, spec.solve.options)
    problem = lower_to_conic(program)
    return partition, program, problem, time.perf_counter() - started


def run_bound(
    spec: ProblemSpec,
    backend: Optional[str] = None,
    tolerance: Optional[float] = None,
    time_limit: Optional[float] = None,
) -> BoundRun:
    """Assemble, lower, solve and recover the bound of one instance.

    Backend and tolerance default to the problem spec's ``solve`` section.
    """
    partition, program, problem, assembly_time = build_program(spec)
    settings = SolverSettings(
        tolerance=tolerance or spec.solve.tolerance,
        time_limit=time_limit if time_limit is not None else spec.solve.time_limit,
    )
    solution = solve(problem, backend or spec.solve.backend, settings)
    bound = recover_solution(program, solution)
    timings = {"assembly_time": assembly_time, "solve_time": solution.wall_time}
    logger.info("Instance '%s': status %s, LB %s", spec.name, bound.status, bound.lower_bound)
    return BoundRun(spec, partition, program, problem, solution, bound, timings)


def simulate_upper_bound(
    spec: ProblemSpec,
    policy,
    n_paths: int,
    seed: int,
    dt: float,
    record_points: int = 0,
    horizon: Optional[float] = None,
) -> UpperBoundEstimate:
    started = time.perf_counter()
    estimate = estimate_ub(
        spec.model,
        spec.cost,
        policy,
        spec.initial,
        n_paths,
        seed=seed,
        dt=dt,
        horizon=horizon,
        record_points=record_points,
    )
    logger.debug("Simulation took %.3fs", time.perf_counter() - started)
    return estimate


def uncontrolled(spec: ProblemSpec, control=None) -> ConstantControl:
    """Constant-control policy, the lower corner of U unless ``control`` is given."""
    value = spec.model.control_set.lower if control is None else control
    return ConstantControl(tuple(value), spec.model.control_set)
