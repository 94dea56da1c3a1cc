"""Unit tests for relax module."""

import math

import numpy as np
import pytest

from src.conic import BlockKind, ConicSolution, solve, structure_report
from src.models import CostSpec, InitialCondition, lotka_volterra
from src.polynomials import AffineMap, Polynomial
from src.regions import (
    IntervalBox,
    build_grid_partition,
    build_lattice_partition,
    grid_partition,
    single_cell_partition,
    uniform_time_grid,
)
from src.relax import (
    RelaxationError,
    RelaxationOptions,
    assemble,
    assemble_classical,
    assemble_discounted,
    assemble_finite_horizon,
    certificate_layout,
    local_maps,
    lower_to_conic,
    recover_solution,
)
from src.utils import is_nondecreasing, r_squared

LV_BOX_BOUNDS = ((0.0, 0.0), (1.5, 1.5))


def lv_partition(model, n1, n2, n_t, horizon=10.0):
    box = IntervalBox(model.states, *LV_BOX_BOUNDS)
    return build_grid_partition(n1, n2, box, n_t=n_t, horizon=horizon, domain=model.state_set)


def line_partition(model, count=1, n_t=None, horizon=None):
    box = IntervalBox(model.states, (-1.0,), (1.0,))
    time_grid = None if n_t is None else uniform_time_grid(n_t, horizon)
    return grid_partition((count,), box, time_grid, domain=model.state_set)


def solve_bound(program, backend="clarabel"):
    return recover_solution(program, solve(lower_to_conic(program), backend))


class TestLocalMaps:
    def test_finite_interval_maps_to_unit(self):
        model, _, _ = lotka_volterra()
        box = IntervalBox(model.states, (0.0, 0.5), (1.5, 2.5))
        maps = local_maps(box)
        x1, x2 = model.states
        assert maps[x1].apply(-1.0) == 0.0 and maps[x1].apply(1.0) == 1.5
        assert maps[x2].apply(1.0) == 2.5

    def test_half_line_is_shifted(self):
        """A lower-bounded interval keeps unit scale and starts at its bound."""
        model, _, _ = lotka_volterra()
        box = IntervalBox(model.states, (0.75, 0.0), (math.inf, math.inf))
        x1, x2 = model.states
        maps = local_maps(box)
        assert maps[x1] == AffineMap(1.0, 0.75)
        assert maps[x2].is_identity


class TestAssembly:
    def test_lotka_volterra_constraint_counts(self, lv_problem):
        """2x2 cells and 3 intervals: 4 facets per interval, 3 interfaces per cell."""
        model, cost, initial = lv_problem
        partition = lv_partition(model, 2, 2, 3)
        program = assemble_finite_horizon(model, cost, partition, initial, 2)
        assert len(program.pieces) == 12
        assert program.counts() == {
            "path": 12,
            "time_interface": 8,
            "boundary_continuity": 12,
            "terminal": 4,
        }
        assert program.num_unknowns == 12 * math.comb(3 + 2, 2)

    def test_pieces_are_laid_out_contiguously(self, lv_problem):
        model, cost, initial = lv_problem
        program = assemble(model, cost, lv_partition(model, 2, 1, 2), initial, 2)
        offsets = [piece.offset for piece in program.pieces]
        sizes = [piece.size for piece in program.pieces]
        assert offsets == list(np.cumsum([0] + sizes[:-1]))
        assert program.piece(2, 1).index == (2, 1)

    def test_objective_reads_the_starting_piece(self, lv_problem):
        """x0 = (1, 0.25) lies in the first cell, so only piece (1, 0) is weighted."""
        model, cost, initial = lv_problem
        program = assemble(model, cost, lv_partition(model, 2, 2, 2), initial, 2)
        first = program.piece(1, 0)
        uids = [uid for uid, _ in program.objective]
        assert all(first.offset <= uid < first.offset + first.size for uid in uids)

    def test_degree_too_small(self, lv_problem):
        model, cost, initial = lv_problem
        with pytest.raises(RelaxationError, match="too small"):
            assemble(model, cost, lv_partition(model, 1, 1, 1), initial, 1)

    def test_time_grid_must_end_at_horizon(self, lv_problem):
        model, cost, initial = lv_problem
        with pytest.raises(RelaxationError, match="horizon"):
            assemble(model, cost, lv_partition(model, 1, 1, 2, horizon=5.0), initial, 2)

    def test_finite_horizon_needs_time_grid(self, integrator_problem):
        model, cost, initial = integrator_problem
        with pytest.raises(RelaxationError, match="time grid"):
            assemble_finite_horizon(model, cost, line_partition(model), initial, 2)

    def test_discounted_rejects_finite_cost(self, integrator_problem):
        model, cost, initial = integrator_problem
        with pytest.raises(RelaxationError):
            assemble_discounted(model, cost, line_partition(model), initial, 2)

    def test_jump_model_needs_lattice(self, bio_problem):
        model, cost, initial = bio_problem
        box = IntervalBox(model.states, (0.0, 0.0), (4.0, 1.0))
        partition = grid_partition((2, 1), box, uniform_time_grid(1, 2.0), domain=model.lattice)
        with pytest.raises(RelaxationError, match="lattice"):
            assemble(model, cost, partition, initial, 2)

    def test_initial_atom_outside_cells(self, integrator_factory):
        model, cost, _ = integrator_factory()
        box = IntervalBox(model.states, (-1.0,), (1.0,))
        domain = IntervalBox(model.states, (-2.0,), (2.0,))
        partition = grid_partition((1,), box, uniform_time_grid(1, 1.0), domain)
        with pytest.raises(RelaxationError, match="outside every cell"):
            assemble(model, cost, partition, InitialCondition.dirac((3.0,)), 2)

    def test_initial_atom_on_shared_face_is_ambiguous(self, lv_problem):
        """With two columns on [0, 1.5] the cells meet at x1 = 1.5."""
        model, cost, _ = lv_problem
        partition = lv_partition(model, 2, 2, 1)
        with pytest.raises(RelaxationError, match="boundary"):
            assemble_finite_horizon(model, cost, partition, InitialCondition.dirac((1.5, 0.25)), 2)

    def test_initial_atom_on_domain_face_is_accepted(self, lv_problem):
        """x1 = 0 bounds the state set and touches a single cell."""
        model, cost, _ = lv_problem
        program = assemble(model, cost, lv_partition(model, 2, 2, 1), InitialCondition.dirac((0.0, 0.25)), 2)
        assert program.objective

    def test_lattice_program_uses_neighborhood_equalities(self, bio_problem):
        model, cost, initial = bio_problem
        partition = build_lattice_partition(2, (0.0, 1.0), time_grid=uniform_time_grid(2, 2.0), model=model)
        program = assemble(model, cost, partition, initial, 2)
        counts = program.counts()
        assert counts["path"] == 2 * partition.n_x
        assert counts["time_interface"] == partition.n_x
        assert counts["terminal"] == partition.n_x
        assert counts["neighborhood_equality"] > 0
        assert "boundary_continuity" not in counts

    def test_discounted_rest_point_constraint(self, scalar_problem):
        model, cost, initial = scalar_problem
        program = assemble(model, cost, line_partition(model), initial, 2)
        assert program.counts() == {"discounted_path": 1, "rest_point": 1}

    def test_directional_boundary_for_deterministic_model(self, integrator_problem):
        model, cost, initial = integrator_problem
        partition = line_partition(model, count=2, n_t=1, horizon=1.0)
        options = RelaxationOptions(directional_boundary=True)
        program = assemble(model, cost, partition, initial, 2, options)
        assert program.count("boundary_directional") == 1
        assert program.count("boundary_continuity") == 0

    def test_directional_boundary_rejects_stochastic_model(self, lv_problem):
        model, cost, initial = lv_problem
        options = RelaxationOptions(directional_boundary=True)
        with pytest.raises(RelaxationError, match="deterministic"):
            assemble(model, cost, lv_partition(model, 2, 1, 1), initial, 2, options)


class TestCertificateLayout:
    def test_path_constraint_degrees(self, integrator_problem):
        """Degree-2 path expression in (t, x, u): sigma_0 over 4 monomials, constant box multipliers."""
        model, cost, initial = integrator_problem
        program = assemble(model, cost, line_partition(model, n_t=1, horizon=1.0), initial, 2)
        path = next(c for c in program.constraints if c.kind == "path")
        layout = certificate_layout(path)
        assert layout.degree == 2
        assert [len(basis) for _, basis in layout.sos_bases] == [4, 1, 1, 1, 1]
        assert layout.free_bases == ()

    def test_degree_rounded_up_to_even(self, lv_problem):
        """The LV path expression has degree 3 at d = 2."""
        model, cost, initial = lv_problem
        program = assemble(model, cost, lv_partition(model, 1, 1, 1), initial, 2)
        path = next(c for c in program.constraints if c.kind == "path")
        layout = certificate_layout(path)
        assert layout.degree == 4
        assert len(layout.sos_bases[0][1]) == math.comb(4 + 2, 2)

    def test_fixed_dimensions_are_substituted(self, lv_problem):
        """The terminal region fixes t, leaving (x1, x2)."""
        model, cost, initial = lv_problem
        program = assemble(model, cost, lv_partition(model, 1, 1, 1), initial, 2)
        terminal = next(c for c in program.constraints if c.kind == "terminal")
        layout = certificate_layout(terminal)
        assert layout.variables == model.states
        assert len(layout.inequalities) == 2

    def test_equality_kinds_get_no_sos_multipliers(self, lv_problem):
        model, cost, initial = lv_problem
        program = assemble(model, cost, lv_partition(model, 2, 1, 1), initial, 2)
        coupling = next(c for c in program.constraints if c.kind == "boundary_continuity")
        assert coupling.is_equality
        assert certificate_layout(coupling).sos_bases == ()


class TestLowering:
    def test_piece_blocks_come_first(self, lv_problem):
        model, cost, initial = lv_problem
        program = assemble(model, cost, lv_partition(model, 2, 1, 2), initial, 2)
        problem = lower_to_conic(program)
        head = problem.blocks[: len(program.pieces)]
        assert all(block.kind is BlockKind.FREE for block in head)
        assert [block.size for block in head] == [piece.size for piece in program.pieces]

    @pytest.mark.parametrize(
        "degree,expected",
        [
            (2, 15),
            (4, 35),
            pytest.param(6, 70, marks=pytest.mark.slow),
            pytest.param(8, 126, marks=pytest.mark.slow),
        ],
    )
    def test_lotka_volterra_largest_block(self, lv_problem, degree, expected):
        """The path Gram over (t, x1, x2, u) has C(4 + d/2 + 1, 4) rows."""
        model, cost, initial = lv_problem
        program = assemble(model, cost, lv_partition(model, 1, 1, 1), initial, degree)
        assert structure_report(lower_to_conic(program))["max_block_dim"] == expected

    def test_blocks_grow_linearly_in_time_intervals(self, lv_problem):
        """Block count is linear in nT while the largest block stays put."""
        model, cost, initial = lv_problem
        time_counts = [1, 2, 4, 8, 16]
        blocks = []
        for n_t in time_counts:
            program = assemble(model, cost, lv_partition(model, 1, 1, n_t), initial, 2)
            report = structure_report(lower_to_conic(program))
            assert report["max_block_dim"] == 15
            blocks.append(report["num_blocks"])
        assert np.all(np.diff(blocks) > 0)
        assert r_squared(time_counts, blocks) >= 0.99


class TestClosedForms:
    def test_discounted_scalar_decay(self, scalar_factory):
        """dx = -x dt, cost x^2, rho = 1: V(x) = x^2 / 3."""
        model, cost, initial = scalar_factory(rho=1.0, x0=1.0)
        bound = solve_bound(assemble(model, cost, line_partition(model), initial, 2))
        assert bound.status in ("optimal", "near_optimal")
        assert bound.lower_bound == pytest.approx(1.0 / 3.0, rel=1e-5)

    def test_undiscounted_scalar_decay(self, scalar_factory):
        """rho = 0 with the rest point at the origin: V(x) = x^2 / 2."""
        model, cost, initial = scalar_factory(rho=0.0, x0=1.0)
        bound = solve_bound(assemble(model, cost, line_partition(model), initial, 2))
        assert bound.lower_bound == pytest.approx(0.5, rel=1e-4)

    def test_scaled_initial_state(self, scalar_factory):
        model, cost, initial = scalar_factory(rho=1.0, x0=2.0)
        bound = solve_bound(assemble(model, cost, line_partition(model), initial, 2))
        assert bound.lower_bound == pytest.approx(4.0 / 3.0, rel=1e-5)

    def test_recovered_piece_is_the_value_function(self, scalar_factory):
        model, cost, initial = scalar_factory(rho=1.0, x0=1.0)
        bound = solve_bound(assemble(model, cost, line_partition(model), initial, 2))
        (x,) = model.states
        w = bound.pieces[0].to_polynomial()
        assert w.evaluate({x: 0.5}) == pytest.approx(0.25 / 3.0, abs=1e-5)

    def test_zero_cost_gives_zero_bound(self, integrator_problem):

        model, cost, initial = integrator_problem
        free = CostSpec(Polynomial.zero(), Polynomial.zero(), cost.horizon)
        bound = solve_bound(assemble(model, free, line_partition(model, n_t=2, horizon=1.0), initial, 2))
        assert bound.lower_bound == pytest.approx(0.0, abs=1e-6)


class TestRefinement:
    def test_matches_classical_on_a_single_piece(self, integrator_problem):
        model, cost, initial = integrator_problem
        partition = single_cell_partition(model.state_set, uniform_time_grid(1, cost.horizon.T))
        discretised = solve_bound(assemble(model, cost, partition, initial, 4))
        classical = solve_bound(assemble_classical(model, cost, initial, 4))
        assert discretised.lower_bound == pytest.approx(classical.lower_bound, rel=1e-5)

    def test_time_refinement_does_not_lower_the_bound(self, integrator_problem):
        model, cost, initial = integrator_problem
        coarse = solve_bound(assemble(model, cost, line_partition(model, n_t=1, horizon=1.0), initial, 2))
        fine = solve_bound(assemble(model, cost, line_partition(model, n_t=2, horizon=1.0), initial, 2))
        assert fine.lower_bound >= coarse.lower_bound - 1e-6 * (1 + abs(coarse.lower_bound))

    def test_degree_refinement_does_not_lower_the_bound(self, integrator_problem):
        model, cost, initial = integrator_problem
        partition = line_partition(model, n_t=1, horizon=1.0)
        low = solve_bound(assemble(model, cost, partition, initial, 2))
        high = solve_bound(assemble(model, cost, partition, initial, 4))
        assert high.lower_bound >= low.lower_bound - 1e-6 * (1 + abs(low.lower_bound))

    def test_bound_below_constant_control_cost(self, integrator_problem):
        """u = 0 costs x0^2 T; no lower bound may exceed that."""
        model, cost, initial = integrator_problem
        bound = solve_bound(assemble(model, cost, line_partition(model, count=2, n_t=2, horizon=1.0), initial, 2))
        assert bound.lower_bound <= 0.25 + 1e-6

    @pytest.mark.slow
    @pytest.mark.parametrize("degree", [2, 4])
    def test_lotka_volterra_matches_classical(self, lv_problem, degree):
        model, cost, initial = lv_problem
        discretised = solve_bound(assemble(model, cost, lv_partition(model, 1, 1, 1), initial, degree))
        classical = solve_bound(assemble_classical(model, cost, initial, degree))
        assert discretised.lower_bound == pytest.approx(classical.lower_bound, rel=1e-6)

    @pytest.mark.slow
    def test_lotka_volterra_degree_refinement(self, lv_problem):
        """d = 2, 4, 6 on a 2 x 2 x 4 partition."""
        model, cost, initial = lv_problem
        partition = lv_partition(model, 2, 2, 4)
        bounds = [solve_bound(assemble(model, cost, partition, initial, d)).lower_bound for d in (2, 4, 6)]
        assert is_nondecreasing(bounds, rel_tol=1e-6)

    @pytest.mark.slow
    def test_lotka_volterra_time_refinement(self, lv_problem):
        """nT = 1, 2, 4, 8 on a single cell at d = 4."""
        model, cost, initial = lv_problem
        bounds = [
            solve_bound(assemble(model, cost, lv_partition(model, 1, 1, n_t), initial, 4)).lower_bound
            for n_t in (1, 2, 4, 8)
        ]
        assert is_nondecreasing(bounds, rel_tol=1e-6)


class TestRecovery:
    def test_failed_solve_yields_no_bound(self, scalar_problem):

        model, cost, initial = scalar_problem
        program = assemble(model, cost, line_partition(model), initial, 2)
        bound = recover_solution(program, ConicSolution("infeasible", None, message="primal infeasible"))
        assert not bound.has_bound
        assert bound.lower_bound is None
        assert bound.status == "infeasible"
