"""Conic problems in PSD standard form, solver backends and SDPA files.

A ConicProblem maximises c.z + offset subject to A z = b, where z stacks the
entries of its variable blocks: upper triangles (row-major) of PSD blocks,
nonnegative scalars and free scalars. A row coefficient on a PSD entry
applies to the entry value itself, so an off-diagonal Gram entry that
appears twice in a symmetric product carries a doubled coefficient.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.config import DEFAULT_BACKEND, DEFAULT_TIME_LIMIT, DEFAULT_TOLERANCE, SCS_MAX_ITERS

logger = logging.getLogger(__name__)

STATUSES = ("optimal", "near_optimal", "infeasible", "unbounded", "numerical_error")


class BackendError(ValueError):
    """Raised when an unknown backend is requested."""


class SDPAFormatError(ValueError):
    """Raised for malformed SDPA files; carries the offending line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class BlockKind(str, Enum):
    PSD = "psd"
    NONNEG = "nonneg"
    FREE = "free"


@dataclass(frozen=True)
class Block:
    kind: BlockKind
    size: int
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", BlockKind(self.kind))
        if self.size < 1:
            raise ValueError(f"Block size must be positive, got {self.size}")

    @property
    def entries(self) -> int:
        if self.kind is BlockKind.PSD:
            return self.size * (self.size + 1) // 2
        return self.size


def psd_entry_index(size: int, i: int, j: int) -> int:
    """Position of entry (i, j) in the row-major upper triangle of a size x size block."""
    if i > j:
        i, j = j, i
    if not 0 <= i <= j < size:
        raise IndexError(f"Entry ({i}, {j}) outside a {size}x{size} block")
    return i * size - i * (i - 1) // 2 + (j - i)


def psd_entry_pairs(size: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(size) for j in range(i, size)]


@dataclass(frozen=True, eq=False)
class ConicProblem:
    """Maximise c.z + offset subject to A z = b and z in the block cones."""

    blocks: Tuple[Block, ...]
    a: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    offset: float = 0.0
    block_pieces: Tuple[Tuple, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        n = sum(block.entries for block in self.blocks)
        a = sp.csr_matrix(self.a, dtype=float)
        if a.shape[1] != n and not (a.shape[0] == 0 and n == 0):
            raise ValueError(f"Constraint matrix has {a.shape[1]} columns for {n} block entries")
        a = sp.csr_matrix(a, shape=(a.shape[0], n))
        b = np.array(self.b, dtype=float).reshape(-1)
        c = np.array(self.c, dtype=float).reshape(-1)
        if len(b) != a.shape[0]:
            raise ValueError(f"Right-hand side has {len(b)} entries for {a.shape[0]} rows")
        if len(c) != n:
            raise ValueError(f"Objective has {len(c)} entries for {n} block entries")
        if not (np.all(np.isfinite(a.data)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("Conic problem data must be finite")
        if self.block_pieces and len(self.block_pieces) != len(self.blocks):
            raise ValueError("block_pieces must list one entry per block")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "offset", float(self.offset))
        starts = np.concatenate([[0], np.cumsum([block.entries for block in self.blocks])]).astype(int)
        object.__setattr__(self, "block_starts", tuple(int(s) for s in starts))

    @property
    def num_variables(self) -> int:
        return self.block_starts[-1]

    @property
    def num_rows(self) -> int:
        return self.a.shape[0]

    def block_slice(self, index: int) -> slice:
        return slice(self.block_starts[index], self.block_starts[index + 1])

    def block_of_column(self) -> np.ndarray:
        owner = np.zeros(self.num_variables, dtype=int)
        for index in range(len(self.blocks)):
            owner[self.block_slice(index)] = index
        return owner

    def free_columns(self) -> np.ndarray:
        columns = [np.arange(self.block_starts[i], self.block_starts[i + 1]) for i, blk in enumerate(self.blocks) if blk.kind is BlockKind.FREE]
        return np.concatenate(columns) if columns else np.zeros(0, dtype=int)


class ConicBuilder:
    """Incremental assembly of a ConicProblem."""

    def __init__(self):
        self._blocks: List[Block] = []
        self._pieces: List[Tuple] = []
        self._starts: List[int] = []
        self._size = 0
        self._rows: List[int] = []
        self._cols: List[int] = []
        self._vals: List[float] = []
        self._rhs: List[float] = []
        self._objective: Dict[int, float] = {}
        self._offset = 0.0

    @property
    def num_rows(self) -> int:
        return len(self._rhs)

    def add_block(self, kind: Union[BlockKind, str], size: int, label: str = "", pieces: Sequence = ()) -> int:
        block = Block(BlockKind(kind), size, label)
        self._blocks.append(block)
        self._pieces.append(tuple(pieces))
        self._starts.append(self._size)
        self._size += block.entries
        return len(self._blocks) - 1

    def column(self, block: int, i: int, j: Optional[int] = None) -> int:
        blk = self._blocks[block]
        if blk.kind is BlockKind.PSD:
            return self._starts[block] + psd_entry_index(blk.size, i, i if j is None else j)
        if j is not None and j != i:
            raise IndexError(f"Scalar block {blk.label or block} has no off-diagonal entries")
        if not 0 <= i < blk.size:
            raise IndexError(f"Entry {i} outside block {blk.label or block} of size {blk.size}")
        return self._starts[block] + i

    def add_row(self, coefficients: Dict[int, float], rhs: float = 0.0) -> int:
        row = len(self._rhs)
        for col, val in coefficients.items():
            if val != 0.0:
                self._rows.append(row)
                self._cols.append(col)
                self._vals.append(float(val))
        self._rhs.append(float(rhs))
        return row

    def add_objective(self, column: int, value: float):
        self._objective[column] = self._objective.get(column, 0.0) + float(value)

    def add_offset(self, value: float):
        self._offset += float(value)

    def build(self) -> ConicProblem:
        a = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(len(self._rhs), self._size))
        a.sum_duplicates()
        c = np.zeros(self._size)
        for col, val in self._objective.items():
            c[col] = val
        return ConicProblem(tuple(self._blocks), a, np.array(self._rhs), c, self._offset, tuple(self._pieces))


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = DEFAULT_TOLERANCE
    time_limit: Optional[float] = DEFAULT_TIME_LIMIT
    verbose: bool = False
    max_iters: Optional[int] = None


@dataclass
class ConicSolution:
    status: str
    objective: Optional[float]
    primal: Optional[np.ndarray] = None
    block_values: List[np.ndarray] = field(default_factory=list)
    dual: Optional[np.ndarray] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    wall_time: float = 0.0
    backend: str = ""
    message: str = ""

    @property
    def accepted(self) -> bool:
        return self.status in ("optimal", "near_optimal")


Backend = Callable[[ConicProblem, SolverSettings], ConicSolution]
_BACKENDS: Dict[str, Backend] = {}


def register_backend(name: str):
    """Decorator registering a solve function under ``name``."""

    def decorator(func: Backend) -> Backend:
        _BACKENDS[name] = func
        return func

    return decorator


def available_backends() -> List[str]:
    return sorted(_BACKENDS)


def dual_bound(problem: ConicProblem, solution: ConicSolution) -> Optional[float]:
    """b.y + offset for the solution's dual rows (an upper bound when y is dual feasible)."""
    if solution.dual is None:
        return None
    return float(problem.b @ solution.dual) + problem.offset


def _residuals(problem: ConicProblem, z: np.ndarray, y: Optional[np.ndarray], objective: float) -> Dict[str, float]:
    scale_b = 1.0 + (np.abs(problem.b).max() if problem.num_rows else 0.0)
    primal = float(np.abs(problem.a @ z - problem.b).max() / scale_b) if problem.num_rows else 0.0
    result = {"primal": primal}
    if y is not None:
        free = problem.free_columns()
        scale_c = 1.0 + (np.abs(problem.c).max() if len(problem.c) else 0.0)
        dual = problem.a.T @ y - problem.c
        result["dual"] = float(np.abs(dual[free]).max() / scale_c) if len(free) else 0.0
        bound = float(problem.b @ y) + problem.offset
        result["gap"] = abs(objective - bound) / (1.0 + abs(objective) + abs(bound))
    return result


def _orient_dual(equality_dual) -> np.ndarray:
    """Row multipliers y with A^T y - c in the dual cone.

    CVXPY reports an equality multiplier y with grad(f) = A^T y for the
    minimised objective f. A maximisation is handed over as f = -(c.z), so
    the reported vector is the negation of ours.
    """
    return -np.asarray(equality_dual, dtype=float).reshape(-1)


def _trivial_solution(problem: ConicProblem) -> ConicSolution:
    if problem.num_rows and np.any(problem.b != 0):
        return ConicSolution("infeasible", None, message="constraints without variables have a nonzero right-hand side")
    return ConicSolution("optimal", problem.offset, primal=np.zeros(0), dual=np.zeros(problem.num_rows))


def _solve_with_cvxpy(problem: ConicProblem, solver: str, options: Dict, settings: SolverSettings) -> ConicSolution:
    import cvxpy as cp

    parts = []
    block_vars = []
    constraints = []
    for block in problem.blocks:
        if block.kind is BlockKind.PSD:
            m = block.size
            X = cp.Variable((m, m), symmetric=True)
            pairs = psd_entry_pairs(m)
            select = sp.csr_matrix(
                (np.ones(len(pairs)), (np.arange(len(pairs)), [i + j * m for i, j in pairs])),
                shape=(len(pairs), m * m),
            )
            parts.append(select @ cp.reshape(X, (m * m,), order="F"))
            constraints.append(X >> 0)
            block_vars.append(X)
        elif block.kind is BlockKind.NONNEG:
            v = cp.Variable(block.size, nonneg=True)
            parts.append(v)
            block_vars.append(v)
        else:
            v = cp.Variable(block.size)
            parts.append(v)
            block_vars.append(v)
    z = cp.hstack(parts) if len(parts) > 1 else parts[0]
    equality = None
    if problem.num_rows:
        equality = problem.a @ z == problem.b
        constraints.append(equality)
    objective = cp.Maximize(problem.c @ z + problem.offset)
    prob = cp.Problem(objective, constraints)
    start = time.perf_counter()
    try:
        prob.solve(solver=solver, verbose=settings.verbose, **options)
    except cp.error.SolverError as exc:
        return ConicSolution("numerical_error", None, wall_time=time.perf_counter() - start, message=str(exc))
    elapsed = time.perf_counter() - start
    status = {
        cp.OPTIMAL: "optimal",
        cp.OPTIMAL_INACCURATE: "near_optimal",
        cp.INFEASIBLE: "infeasible",
        cp.INFEASIBLE_INACCURATE: "infeasible",
        cp.UNBOUNDED: "unbounded",
        cp.UNBOUNDED_INACCURATE: "unbounded",
    }.get(prob.status, "numerical_error")
    if status not in ("optimal", "near_optimal") or z.value is None:
        return ConicSolution(
            status if status != "optimal" else "numerical_error",
            None,
            wall_time=elapsed,
            message=f"solver status {prob.status}",
        )
    values = np.asarray(z.value, dtype=float).reshape(-1)
    value = float(prob.value)
    dual = None
    if equality is not None and equality.dual_value is not None:
        dual = _orient_dual(equality.dual_value)
    residuals = _residuals(problem, values, dual, value)
    message = f"solver status {prob.status}"
    if status == "optimal" and residuals["primal"] > math.sqrt(settings.tolerance):
        status = "near_optimal"
        message += f"; primal residual {residuals['primal']:.2e} above tolerance"
    return ConicSolution(
        status,
        value,
        primal=values,
        block_values=[np.asarray(v.value, dtype=float) for v in block_vars],
        dual=dual,
        residuals=residuals,
        wall_time=elapsed,
        message=message,
    )


@register_backend("clarabel")
def solve_clarabel(problem: ConicProblem, settings: SolverSettings) -> ConicSolution:
    options = {
        "tol_gap_abs": settings.tolerance,
        "tol_gap_rel": settings.tolerance,
        "tol_feas": settings.tolerance,
    }
    if settings.time_limit is not None:
        options["time_limit"] = float(settings.time_limit)
    if settings.max_iters is not None:
        options["max_iter"] = int(settings.max_iters)
    return _solve_with_cvxpy(problem, "CLARABEL", options, settings)


@register_backend("scs")
def solve_scs(problem: ConicProblem, settings: SolverSettings) -> ConicSolution:
    options = {
        "eps_abs": settings.tolerance,
        "eps_rel": settings.tolerance,
        "max_iters": settings.max_iters or SCS_MAX_ITERS,
    }
    if settings.time_limit is not None:
        options["time_limit_secs"] = float(settings.time_limit)
    return _solve_with_cvxpy(problem, "SCS", options, settings)


def solve(problem: ConicProblem, backend: str = DEFAULT_BACKEND, settings: Optional[SolverSettings] = None) -> ConicSolution:
    """Solve with a registered backend.

    Backend failures come back as ``numerical_error`` solutions carrying a
    diagnostic message; no objective value is reported for them.
    """
    if backend not in _BACKENDS:
        raise BackendError(f"Unknown backend '{backend}', available: {available_backends()}")
    settings = settings or SolverSettings()
    start = time.perf_counter()
    if problem.num_variables == 0:
        solution = _trivial_solution(problem)
    else:
        try:
            solution = _BACKENDS[backend](problem, settings)
        except Exception as exc:  # backend crashes must not produce a bound
            logger.exception("Backend %s failed", backend)
            solution = ConicSolution("numerical_error", None, message=f"{type(exc).__name__}: {exc}")
    solution.backend = backend
    solution.wall_time = solution.wall_time or (time.perf_counter() - start)
    logger.info(
        "Backend %s finished with status %s in %.3fs (objective %s)",
        backend,
        solution.status,
        solution.wall_time,
        solution.objective,
    )
    return solution


def structure_report(problem: ConicProblem) -> Dict[str, int]:
    """Size counts: variables, blocks, largest cone dimension and rows."""
    cone_dims = [block.size for block in problem.blocks if block.kind is BlockKind.PSD]
    cone_dims += [1 for block in problem.blocks if block.kind is BlockKind.NONNEG]
    return {
        "num_variables": problem.num_variables,
        "num_blocks": len(problem.blocks),
        "max_block_dim": max(cone_dims, default=0),
        "rows": problem.num_rows,
    }


# SDPA sparse format


def _sdpa_entries(problem: ConicProblem, vector: np.ndarray, free_layout: Dict[int, int]):
    """Yield (block, i, j, value) SDPA entries of one linear functional over z."""
    owner = problem.block_of_column()
    for col in np.flatnonzero(vector):
        value = float(vector[col])
        index = int(owner[col])
        block = problem.blocks[index]
        local = int(col) - problem.block_starts[index]
        if block.kind is BlockKind.PSD:
            i, j = psd_entry_pairs(block.size)[local]
            yield index, i, j, value if i == j else value / 2.0
        elif block.kind is BlockKind.NONNEG:
            yield index, local, local, value
        else:
            yield index, local, local, value
            yield index, local + free_layout[index], local + free_layout[index], -value


def export_sdpa(problem: ConicProblem, path: Union[str, Path]) -> Path:
    """Write the problem in SDPA sparse format (.dat-s).

    Rows become the constraint matrices F_1..F_m with c_i = b_i, the
    objective becomes F_0. Free blocks are split into differences of
    nonnegative variables inside a diagonal block of twice the size; a
    ``*free-split`` comment lists those blocks so that import can merge them
    back.
    """
    path = Path(path)
    free_layout = {i: blk.size for i, blk in enumerate(problem.blocks) if blk.kind is BlockKind.FREE}
    lines = []
    if free_layout:
        lines.append("*free-split " + " ".join(str(i + 1) for i in sorted(free_layout)))
    if problem.offset != 0.0:
        lines.append(f"*offset {problem.offset!r}")
    sizes = []
    for block in problem.blocks:
        if block.kind is BlockKind.PSD:
            sizes.append(str(block.size))
        elif block.kind is BlockKind.NONNEG:
            sizes.append(str(-block.size))
        else:
            sizes.append(str(-2 * block.size))
    lines.append(str(problem.num_rows))
    lines.append(str(len(problem.blocks)))
    lines.append(" ".join(sizes))
    lines.append(" ".join(repr(float(v)) for v in problem.b) if problem.num_rows else "")
    for blk, i, j, value in _sdpa_entries(problem, problem.c, free_layout):
        lines.append(f"0 {blk + 1} {i + 1} {j + 1} {value!r}")
    csc = problem.a.tocsr()
    for row in range(problem.num_rows):
        start, stop = csc.indptr[row], csc.indptr[row + 1]
        vector = np.zeros(problem.num_variables)
        vector[csc.indices[start:stop]] = csc.data[start:stop]
        for blk, i, j, value in _sdpa_entries(problem, vector, free_layout):
            lines.append(f"{row + 1} {blk + 1} {i + 1} {j + 1} {value!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info("Wrote SDPA file %s (%d rows, %d blocks)", path, problem.num_rows, len(problem.blocks))
    return path


def _numbers(tokens: List[str], line: int, kind=float) -> List:
    try:
        return [kind(tok) for tok in tokens]
    except ValueError:
        raise SDPAFormatError(f"expected numbers, got {' '.join(tokens)!r}", line) from None


def import_sdpa(path: Union[str, Path]) -> ConicProblem:
    """Read an SDPA sparse file written by ``export_sdpa`` or another tool."""
    text = Path(path).read_text(encoding="utf-8")
    free_blocks: List[int] = []
    offset = 0.0
    content: List[Tuple[int, List[str]]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("*free-split"):
            free_blocks = _numbers(stripped.split()[1:], number, int)
            continue
        if stripped.startswith("*offset"):
            values = _numbers(stripped.split()[1:], number)
            if len(values) != 1:
                raise SDPAFormatError("offset comment needs exactly one value", number)
            offset = values[0]
            continue
        if stripped.startswith("*") or stripped.startswith('"'):
            continue
        for ch in "{}(),":
            stripped = stripped.replace(ch, " ")
        tokens = stripped.split()
        if tokens or len(content) == 3:
            content.append((number, tokens))
    if len(content) < 3:
        raise SDPAFormatError("file ends before the header is complete", len(text.splitlines()))
    line, tokens = content[0]
    if not tokens:
        raise SDPAFormatError("missing number of constraints", line)
    m = _numbers(tokens[:1], line, int)[0]
    line, tokens = content[1]
    nblocks = _numbers(tokens[:1], line, int)[0]
    position = 2
    sizes: List[int] = []
    while len(sizes) < nblocks:
        if position >= len(content):
            raise SDPAFormatError("missing block sizes", line)
        line, tokens = content[position]
        sizes.extend(_numbers(tokens, line, int))
        position += 1
    if len(sizes) != nblocks:
        raise SDPAFormatError(f"expected {nblocks} block sizes, got {len(sizes)}", line)
    rhs: List[float] = []
    while len(rhs) < m:
        if position >= len(content):
            raise SDPAFormatError(f"expected {m} right-hand side values", line)
        line, tokens = content[position]
        rhs.extend(_numbers(tokens, line))
        position += 1
    if len(rhs) != m:
        raise SDPAFormatError(f"expected {m} right-hand side values, got {len(rhs)}", line)
    if m == 0 and position < len(content) and not content[position][1]:
        position += 1
    free_set = {b - 1 for b in free_blocks}
    blocks = []
    for index, size in enumerate(sizes):
        if size == 0:
            raise SDPAFormatError("block sizes must be nonzero", content[2][0])
        if index in free_set:
            if size > 0 or size % 2:
                raise SDPAFormatError(f"free-split block {index + 1} must be diagonal with even size", content[2][0])
            blocks.append(Block(BlockKind.FREE, -size // 2, f"block{index + 1}"))
        elif size > 0:
            blocks.append(Block(BlockKind.PSD, size, f"block{index + 1}"))
        else:
            blocks.append(Block(BlockKind.NONNEG, -size, f"block{index + 1}"))
    starts = np.concatenate([[0], np.cumsum([blk.entries for blk in blocks])]).astype(int)
    objective: Dict[int, float] = {}
    entries: Dict[Tuple[int, int], float] = {}
    for line, tokens in content[position:]:
        if not tokens:
            continue
        if len(tokens) != 5:
            raise SDPAFormatError(f"expected 5 fields per entry, got {len(tokens)}", line)
        k, blk, i, j = _numbers(tokens[:4], line, int)
        value = _numbers(tokens[4:], line)[0]
        if not 0 <= k <= m:
            raise SDPAFormatError(f"constraint index {k} outside 0..{m}", line)
        if not 1 <= blk <= nblocks:
            raise SDPAFormatError(f"block index {blk} outside 1..{nblocks}", line)
        block = blocks[blk - 1]
        i, j = i - 1, j - 1
        if block.kind is BlockKind.PSD:
            if not (0 <= i < block.size and 0 <= j < block.size):
                raise SDPAFormatError(f"entry ({i + 1}, {j + 1}) outside block {blk}", line)
            col = starts[blk - 1] + psd_entry_index(block.size, i, j)
            coefficient = value if i == j else 2.0 * value
            minus = False
        else:
            width = block.size if block.kind is BlockKind.NONNEG else 2 * block.size
            if i != j or not 0 <= i < width:
                raise SDPAFormatError(f"diagonal block {blk} has invalid entry ({i + 1}, {j + 1})", line)
            minus = block.kind is BlockKind.FREE and i >= block.size
            local = i - block.size if minus else i
            col = starts[blk - 1] + local
            coefficient = -value if minus else value
        target = objective if k == 0 else entries
        key = col if k == 0 else (k - 1, col)
        if minus and key in target:
            continue
        target[key] = coefficient
    n = int(starts[-1])
    c = np.zeros(n)
    for col, value in objective.items():
        c[col] = value
    if entries:
        keys = list(entries)
        a = sp.csr_matrix(
            ([entries[key] for key in keys], ([key[0] for key in keys], [key[1] for key in keys])), shape=(m, n)
        )
    else:
        a = sp.csr_matrix((m, n))
    return ConicProblem(tuple(blocks), a, np.array(rhs), c, offset)


def _row_signatures(problem: ConicProblem) -> List[Tuple]:
    csr = problem.a.copy()
    csr.sort_indices()
    rows = []
    for r in range(problem.num_rows):
        start, stop = csr.indptr[r], csr.indptr[r + 1]
        rows.append((tuple(csr.indices[start:stop]), tuple(csr.data[start:stop]), float(problem.b[r])))
    return rows


def structurally_equal(p: ConicProblem, q: ConicProblem, tol: float = 1e-12) -> bool:
    """Same blocks, objective and constraint rows up to row ordering, to relative ``tol``."""
    if [(blk.kind, blk.size) for blk in p.blocks] != [(blk.kind, blk.size) for blk in q.blocks]:
        return False
    if p.a.shape != q.a.shape:
        return False
    scale = 1.0 + max(np.abs(p.c).max(initial=0.0), np.abs(p.b).max(initial=0.0), np.abs(p.a.data).max(initial=0.0))
    if abs(p.offset - q.offset) > tol * scale or np.abs(p.c - q.c).max(initial=0.0) > tol * scale:
        return False
    diff = p.a - q.a
    a_gap = abs(diff).max() if diff.nnz else 0.0
    if np.abs(p.b - q.b).max(initial=0.0) <= tol * scale and a_gap <= tol * scale:
        return True
    left = sorted(_row_signatures(p), key=lambda row: (row[0], row[1], row[2]))
    right = sorted(_row_signatures(q), key=lambda row: (row[0], row[1], row[2]))
    for (ci, vi, bi), (cj, vj, bj) in zip(left, right):
        if ci != cj or abs(bi - bj) > tol * scale:
            return False
        if np.abs(np.subtract(vi, vj)).max(initial=0.0) > tol * scale:
            return False
    return True
