"""Unit tests for conic module."""

import numpy as np
import pytest
import scipy.sparse as sp

from src.conic import (
    Block,
    BlockKind,
    BackendError,
    ConicBuilder,
    ConicProblem,
    SDPAFormatError,
    SolverSettings,
    available_backends,
    dual_bound,
    export_sdpa,
    import_sdpa,
    psd_entry_index,
    psd_entry_pairs,
    solve,
    structure_report,
    structurally_equal,
)
from src.config import BIOCIRCUIT_SPEC, LOTKA_VOLTERRA_SPEC, SCALAR_DISCOUNTED_SPEC
from src.pipeline import build_program
from src.regions import IntervalBox, grid_partition
from src.relax import assemble, lower_to_conic
from src.spec_loader import load_problem_spec


def free_and_slack():
    """max x subject to x + s = 1 with s >= 0."""
    builder = ConicBuilder()
    x = builder.add_block(BlockKind.FREE, 1, "x")
    s = builder.add_block(BlockKind.NONNEG, 1, "s")
    builder.add_row({builder.column(x, 0): 1.0, builder.column(s, 0): 1.0}, 1.0)
    builder.add_objective(builder.column(x, 0), 1.0)
    return builder.build()


def min_trace_with_unit_offdiagonal():
    """max -(X00 + X11) subject to X01 = 1 and X PSD; optimum -2."""
    builder = ConicBuilder()
    block = builder.add_block(BlockKind.PSD, 2, "X")
    builder.add_row({builder.column(block, 0, 1): 1.0}, 1.0)
    builder.add_objective(builder.column(block, 0), -1.0)
    builder.add_objective(builder.column(block, 1), -1.0)
    return builder.build()


def scalar_program_problem(scalar_problem):
    model, cost, initial = scalar_problem
    partition = grid_partition((1,), IntervalBox(model.states, (-1.0,), (1.0,)), domain=model.state_set)
    return lower_to_conic(assemble(model, cost, partition, initial, 2))


BUNDLED_SPECS = {
    "scalar_discounted": SCALAR_DISCOUNTED_SPEC,
    "lotka_volterra": LOTKA_VOLTERRA_SPEC,
    "biocircuit": BIOCIRCUIT_SPEC,
}


def bundled_problem(name):
    """Lowered program of a bundled spec at degree 2 on a coarse partition."""
    spec = load_problem_spec(BUNDLED_SPECS[name]).with_solve(degree=2)
    if spec.partition.kind == "lattice":
        spec = spec.with_partition(n_x=2, n_t=1)
    _, _, problem, _ = build_program(spec)
    return problem


def unit_diagonal_max_offdiagonal():
    """max y subject to [[1, y], [y, 1]] PSD; optimum 1."""
    builder = ConicBuilder()
    block = builder.add_block(BlockKind.PSD, 2, "X")
    builder.add_row({builder.column(block, 0): 1.0}, 1.0)
    builder.add_row({builder.column(block, 1): 1.0}, 1.0)
    builder.add_objective(builder.column(block, 0, 1), 1.0)
    return builder.build()


class TestBlocks:
    def test_psd_entry_index_row_major_upper(self):
        assert [psd_entry_index(3, i, j) for i, j in psd_entry_pairs(3)] == list(range(6))
        assert psd_entry_index(3, 2, 1) == psd_entry_index(3, 1, 2)

    def test_psd_entry_out_of_range(self):
        with pytest.raises(IndexError):
            psd_entry_index(2, 0, 2)

    def test_entries_per_kind(self):
        assert Block(BlockKind.PSD, 4).entries == 10
        assert Block(BlockKind.NONNEG, 4).entries == 4
        assert Block("free", 3).kind is BlockKind.FREE

    def test_empty_block_rejected(self):
        with pytest.raises(ValueError, match="positive"):
            Block(BlockKind.FREE, 0)


class TestProblem:
    def test_column_count_checked(self):
        with pytest.raises(ValueError, match="columns"):
            ConicProblem((Block(BlockKind.FREE, 2),), sp.csr_matrix(np.ones((1, 3))), np.zeros(1), np.zeros(2))

    def test_non_finite_data_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            ConicProblem((Block(BlockKind.FREE, 1),), sp.csr_matrix(np.ones((1, 1))), np.array([np.nan]), np.zeros(1))

    def test_builder_layout(self):
        problem = min_trace_with_unit_offdiagonal()
        assert problem.num_variables == 3
        assert problem.num_rows == 1
        assert problem.a.toarray().tolist() == [[0.0, 1.0, 0.0]]

    def test_scalar_block_has_no_off_diagonal(self):
        builder = ConicBuilder()
        block = builder.add_block(BlockKind.NONNEG, 2)
        with pytest.raises(IndexError):
            builder.column(block, 0, 1)

    def test_structure_report(self):
        report = structure_report(min_trace_with_unit_offdiagonal())
        assert report == {"num_variables": 3, "num_blocks": 1, "max_block_dim": 2, "rows": 1}

    def test_free_columns(self):
        assert free_and_slack().free_columns().tolist() == [0]


class TestSolve:
    def test_backends_registered(self):
        assert {"clarabel", "scs"} <= set(available_backends())

    def test_unknown_backend(self):
        with pytest.raises(BackendError, match="Unknown backend"):
            solve(free_and_slack(), "mosek-free")

    def test_linear_problem(self):
        solution = solve(free_and_slack(), "clarabel")
        assert solution.status == "optimal"
        assert solution.objective == pytest.approx(1.0, abs=1e-7)
        assert solution.primal[1] == pytest.approx(0.0, abs=1e-7)

    def test_psd_problem(self):
        solution = solve(min_trace_with_unit_offdiagonal(), "clarabel")
        assert solution.accepted
        assert solution.objective == pytest.approx(-2.0, abs=1e-6)
        assert solution.block_values[0] == pytest.approx(np.ones((2, 2)), abs=1e-5)

    def test_dual_bound_matches_objective(self):
        problem = min_trace_with_unit_offdiagonal()
        solution = solve(problem, "clarabel")
        assert dual_bound(problem, solution) == pytest.approx(solution.objective, abs=1e-6)

    def test_infeasible_status(self):
        """x >= 0 with x = -1 has no feasible point and reports no objective."""
        builder = ConicBuilder()
        block = builder.add_block(BlockKind.NONNEG, 1)
        builder.add_row({builder.column(block, 0): 1.0}, -1.0)
        builder.add_objective(builder.column(block, 0), 1.0)
        solution = solve(builder.build(), "clarabel")
        assert solution.status == "infeasible"
        assert solution.objective is None
        assert not solution.accepted

    def test_unbounded_status(self):
        builder = ConicBuilder()
        block = builder.add_block(BlockKind.FREE, 2)
        builder.add_row({builder.column(block, 0): 1.0, builder.column(block, 1): -1.0}, 0.0)
        builder.add_objective(builder.column(block, 0), 1.0)
        solution = solve(builder.build(), "clarabel")
        assert solution.status == "unbounded"
        assert solution.objective is None

    def test_problem_without_variables(self):
        problem = ConicProblem((), sp.csr_matrix((0, 0)), np.zeros(0), np.zeros(0), offset=2.5)
        solution = solve(problem, "clarabel")
        assert solution.status == "optimal"
        assert solution.objective == 2.5

    @pytest.mark.parametrize("name", sorted(BUNDLED_SPECS))
    def test_backends_agree(self, name):
        problem = bundled_problem(name)
        reference = solve(problem, "clarabel")
        other = solve(problem, "scs", SolverSettings(tolerance=1e-7))
        assert reference.accepted
        assert other.accepted
        assert other.objective == pytest.approx(reference.objective, rel=1e-3, abs=1e-6)

    def test_backends_agree_on_lowered_program(self, scalar_problem):
        problem = scalar_program_problem(scalar_problem)
        reference = solve(problem, "clarabel")
        other = solve(problem, "scs", SolverSettings(tolerance=1e-7))
        assert reference.status == "optimal"
        assert other.objective == pytest.approx(reference.objective, rel=1e-3)

    @pytest.mark.parametrize("backend", ["clarabel", "scs"])
    def test_unit_diagonal_bounds_offdiagonal(self, backend):
        solution = solve(unit_diagonal_max_offdiagonal(), backend, SolverSettings(tolerance=1e-7))
        assert solution.accepted
        assert solution.objective == pytest.approx(1.0, abs=1e-4)
        assert solution.block_values[0] == pytest.approx(np.ones((2, 2)), abs=1e-3)

    def test_dual_sign_follows_maximisation(self):
        """max 2 z0 + z1 with z0 + z1 = 1, z >= 0 has the single multiplier y = 2."""
        builder = ConicBuilder()
        block = builder.add_block(BlockKind.NONNEG, 2)
        builder.add_row({builder.column(block, 0): 1.0, builder.column(block, 1): 1.0}, 1.0)
        builder.add_objective(builder.column(block, 0), 2.0)
        builder.add_objective(builder.column(block, 1), 1.0)
        problem = builder.build()
        solution = solve(problem, "clarabel")
        assert solution.dual[0] == pytest.approx(2.0, abs=1e-6)
        assert dual_bound(problem, solution) == pytest.approx(2.0, abs=1e-6)

    def test_free_column_dual_is_stationary(self):
        """A^T y = c on the free column of free_and_slack gives y = 1."""
        solution = solve(free_and_slack(), "clarabel")
        assert solution.dual[0] == pytest.approx(1.0, abs=1e-6)
        assert solution.residuals["dual"] < 1e-6


class TestSDPA:
    @pytest.mark.parametrize("name", sorted(BUNDLED_SPECS))
    def test_round_trip_of_bundled_programs(self, name, tmp_path):
        problem = bundled_problem(name)
        path = export_sdpa(problem, tmp_path / f"{name}.dat-s")
        assert structurally_equal(problem, import_sdpa(path))

    def test_round_trip_of_lowered_program(self, scalar_problem, tmp_path):
        problem = scalar_program_problem(scalar_problem)
        path = export_sdpa(problem, tmp_path / "scalar.dat-s")
        assert structurally_equal(problem, import_sdpa(path))

    def test_round_trip_keeps_offset_and_psd_entries(self, tmp_path):
        builder = ConicBuilder()
        block = builder.add_block(BlockKind.PSD, 2)
        free = builder.add_block(BlockKind.FREE, 1)
        builder.add_row({builder.column(block, 0, 1): 1.0, builder.column(free, 0): -3.0}, 1.0)
        builder.add_objective(builder.column(block, 1, 1), -1.0)
        builder.add_offset(0.5)
        problem = builder.build()
        loaded = import_sdpa(export_sdpa(problem, tmp_path / "small.dat-s"))
        assert loaded.offset == 0.5
        assert [blk.kind for blk in loaded.blocks] == [BlockKind.PSD, BlockKind.FREE]
        assert structurally_equal(problem, loaded)

    def test_free_blocks_are_split(self, tmp_path):
        path = export_sdpa(free_and_slack(), tmp_path / "lp.dat-s")
        lines = path.read_text().splitlines()
        assert lines[0] == "*free-split 1"
        assert lines[3] == "-2 -1"

    def test_structural_difference_detected(self):
        assert not structurally_equal(free_and_slack(), min_trace_with_unit_offdiagonal())

    def test_malformed_file_reports_line(self, tmp_path):
        path = tmp_path / "bad.dat-s"
        path.write_text("1\n1\n2\nabc\n")
        with pytest.raises(SDPAFormatError, match="line 4") as info:
            import_sdpa(path)
        assert info.value.line == 4

    def test_entry_outside_block(self, tmp_path):
        path = tmp_path / "bad.dat-s"
        path.write_text("1\n1\n2\n1.0\n1 1 3 3 1.0\n")
        with pytest.raises(SDPAFormatError, match="outside block"):
            import_sdpa(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "short.dat-s"
        path.write_text("1\n")
        with pytest.raises(SDPAFormatError, match="header"):
            import_sdpa(path)
