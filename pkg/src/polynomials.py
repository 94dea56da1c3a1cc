"""Sparse multivariate polynomials over named variables.

Polynomials are immutable mappings from monomials to float coefficients. Terms
are kept in graded-lexicographic order, so equality is coefficient-wise and
every coefficient-matching constraint built from them is deterministic.
Variables carry a kind (time, state or control) which fixes their position in
the ordering: time first, then states, then controls.
"""

import math
import re
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations_with_replacement
from numbers import Real
from typing import Callable, Dict, Iterable, List, Mapping, Sequence, Tuple, Union

import numpy as np

from src.config import COEFFICIENT_DROP_TOLERANCE

VARIABLE_KINDS = ("time", "state", "control")
_KIND_RANK = {kind: rank for rank, kind in enumerate(VARIABLE_KINDS)}


def _natural_key(name: str) -> Tuple:
    """Split a name into text and integer chunks so that x2 sorts before x10."""
    parts = re.split(r"(\d+)", name)
    return tuple(int(part) if part.isdigit() else part for part in parts)


@dataclass(frozen=True)
class Variable:
    """A named indeterminate with a fixed kind."""

    name: str
    kind: str = "state"

    def __post_init__(self):
        if self.kind not in _KIND_RANK:
            raise ValueError(f"Unknown variable kind '{self.kind}', expected one of {VARIABLE_KINDS}")
        if not self.name:
            raise ValueError("Variable name must be non-empty")

    @property
    def sort_key(self) -> Tuple:
        return (_KIND_RANK[self.kind], _natural_key(self.name), self.name)

    def __str__(self) -> str:
        return self.name


def sort_variables(variables: Iterable[Variable]) -> Tuple[Variable, ...]:
    """Return the variables deduplicated and in canonical order."""
    return tuple(sorted(set(variables), key=lambda v: v.sort_key))


@dataclass(frozen=True)
class Monomial:
    """Product of variable powers; zero exponents are never stored."""

    powers: Tuple[Tuple[Variable, int], ...] = ()

    @classmethod
    def from_mapping(cls, exponents: Mapping[Variable, int]) -> "Monomial":
        items = []
        for var, exp in exponents.items():
            if exp < 0 or int(exp) != exp:
                raise ValueError(f"Exponent of {var} must be a nonnegative integer, got {exp}")
            if exp:
                items.append((var, int(exp)))
        items.sort(key=lambda item: item[0].sort_key)
        return cls(tuple(items))

    @classmethod
    def of(cls, variable: Variable, exponent: int = 1) -> "Monomial":
        return cls.from_mapping({variable: exponent})

    @property
    def degree(self) -> int:
        return sum(exp for _, exp in self.powers)

    @property
    def variables(self) -> Tuple[Variable, ...]:
        return tuple(var for var, _ in self.powers)

    def exponent(self, variable: Variable) -> int:
        for var, exp in self.powers:
            if var == variable:
                return exp
        return 0

    def as_dict(self) -> Dict[Variable, int]:
        return dict(self.powers)

    @cached_property
    def grlex_key(self) -> Tuple:
        return (self.degree, tuple((var.sort_key, -exp) for var, exp in self.powers))

    def __mul__(self, other: "Monomial") -> "Monomial":
        if not other.powers:
            return self
        if not self.powers:
            return other
        merged = dict(self.powers)
        for var, exp in other.powers:
            merged[var] = merged.get(var, 0) + exp
        return Monomial.from_mapping(merged)

    def restrict(self, variables: Iterable[Variable]) -> Tuple["Monomial", "Monomial"]:
        """Split into the part over ``variables`` and the remaining part."""
        keep = set(variables)
        inside = tuple(item for item in self.powers if item[0] in keep)
        outside = tuple(item for item in self.powers if item[0] not in keep)
        return Monomial(inside), Monomial(outside)

    def __str__(self) -> str:
        if not self.powers:
            return "1"
        return "*".join(var.name if exp == 1 else f"{var.name}^{exp}" for var, exp in self.powers)


ONE = Monomial()
Scalar = Union[int, float, np.floating]


class Polynomial:
    """Immutable sparse polynomial with float coefficients.

    Coefficients whose magnitude falls below ``COEFFICIENT_DROP_TOLERANCE``
    times the largest magnitude are dropped on construction.

    Examples:
        >>> x = Polynomial.variable(Variable("x"))
        >>> (x + 1) * (x - 1) == x ** 2 - 1
        True
    """

    def __init__(self, terms: Mapping[Monomial, float] = None):
        coeffs: Dict[Monomial, float] = {}
        if terms:
            scale = max((abs(float(c)) for c in terms.values()), default=0.0)
            cutoff = COEFFICIENT_DROP_TOLERANCE * scale
            for mono, coef in terms.items():
                value = float(coef)
                if not math.isfinite(value):
                    raise ValueError(f"Non-finite coefficient {value} for monomial {mono}")
                if value != 0.0 and abs(value) >= cutoff:
                    coeffs[mono] = value
        ordered = sorted(coeffs.items(), key=lambda item: item[0].grlex_key)
        self._coeffs = dict(ordered)

    # construction helpers

    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls({ONE: value})

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls()

    @classmethod
    def variable(cls, variable: Variable) -> "Polynomial":
        return cls({Monomial.of(variable): 1.0})

    @classmethod
    def from_monomial(cls, monomial: Monomial, coefficient: float = 1.0) -> "Polynomial":
        return cls({monomial: coefficient})

    @classmethod
    def from_exponents(cls, variables: Sequence[Variable], terms: Iterable[Tuple[float, Sequence[int]]]) -> "Polynomial":
        """Build from ``(coefficient, exponent-vector)`` pairs over ``variables``."""
        variables = tuple(variables)
        accumulated: Dict[Monomial, float] = {}
        for coef, exps in terms:
            exps = tuple(exps)
            if len(exps) != len(variables):
                raise ValueError(f"Exponent vector {list(exps)} does not match {len(variables)} variables")
            mono = Monomial.from_mapping(dict(zip(variables, exps)))
            accumulated[mono] = accumulated.get(mono, 0.0) + float(coef)
        return cls(accumulated)

    @staticmethod
    def coerce(value: Union["Polynomial", Scalar]) -> "Polynomial":
        if isinstance(value, Polynomial):
            return value
        if isinstance(value, (Real, np.floating, np.integer)):
            return Polynomial.constant(float(value))
        raise TypeError(f"Cannot interpret {type(value).__name__} as a polynomial")

    # inspection

    @property
    def terms(self) -> Tuple[Tuple[Monomial, float], ...]:
        return tuple(self._coeffs.items())

    def monomials(self) -> Tuple[Monomial, ...]:
        return tuple(self._coeffs)

    def coefficient(self, monomial: Monomial) -> float:
        return self._coeffs.get(monomial, 0.0)

    @property
    def is_zero(self) -> bool:
        return not self._coeffs

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0."""
        return max((mono.degree for mono in self._coeffs), default=0)

    def degree_in(self, variable: Variable) -> int:
        return max((mono.exponent(variable) for mono in self._coeffs), default=0)

    def variables(self) -> Tuple[Variable, ...]:
        return sort_variables(var for mono in self._coeffs for var in mono.variables)

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._coeffs.values()), default=0.0)

    def constant_term(self) -> float:
        return self._coeffs.get(ONE, 0.0)

    def __len__(self) -> int:
        return len(self._coeffs)

    # arithmetic

    def __add__(self, other):
        other = Polynomial.coerce(other)
        merged = dict(self._coeffs)
        for mono, coef in other._coeffs.items():
            merged[mono] = merged.get(mono, 0.0) + coef
        return Polynomial(merged)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({mono: -coef for mono, coef in self._coeffs.items()})

    def __sub__(self, other):
        return self + (-Polynomial.coerce(other))

    def __rsub__(self, other):
        return Polynomial.coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, (Real, np.floating, np.integer)):
            return self.scale(float(other))
        other = Polynomial.coerce(other)
        product: Dict[Monomial, float] = {}
        for m1, c1 in self._coeffs.items():
            for m2, c2 in other._coeffs.items():
                mono = m1 * m2
                product[mono] = product.get(mono, 0.0) + c1 * c2
        return Polynomial(product)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, (Real, np.floating, np.integer)):
            raise TypeError("Polynomials can only be divided by scalars")
        return self.scale(1.0 / float(other))

    def __pow__(self, exponent: int):
        if int(exponent) != exponent or exponent < 0:
            raise ValueError(f"Polynomial powers need a nonnegative integer exponent, got {exponent}")
        result = Polynomial.constant(1.0)
        base = self
        exponent = int(exponent)
        while exponent:
            if exponent & 1:
                result = result * base
            exponent >>= 1
            if exponent:
                base = base * base
        return result

    def scale(self, factor: float) -> "Polynomial":
        factor = float(factor)
        if factor == 0.0:
            return Polynomial()
        return Polynomial({mono: coef * factor for mono, coef in self._coeffs.items()})

    # comparison

    def __eq__(self, other):
        if isinstance(other, (Real, np.floating, np.integer)):
            other = Polynomial.constant(float(other))
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._coeffs == other._coeffs

    def __hash__(self):
        return hash(frozenset(self._coeffs.items()))

    def isclose(self, other, rel_tol: float = 1e-12, abs_tol: float = 0.0) -> bool:
        """Coefficient-wise closeness relative to the largest coefficient of either side."""
        other = Polynomial.coerce(other)
        scale = max(self.max_abs_coefficient(), other.max_abs_coefficient())
        bound = max(rel_tol * scale, abs_tol)
        keys = set(self._coeffs) | set(other._coeffs)
        return all(abs(self.coefficient(m) - other.coefficient(m)) <= bound for m in keys)

    # calculus and composition

    def differentiate(self, variable: Variable, order: int = 1) -> "Polynomial":
        return differentiate(self, variable, order)

    def substitute(self, bindings: Mapping[Variable, Union["Polynomial", Scalar]]) -> "Polynomial":
        return substitute(self, bindings)

    def integrate(self, variable: Variable) -> "Polynomial":
        """Antiderivative in ``variable`` with zero constant of integration."""
        result: Dict[Monomial, float] = {}
        for mono, coef in self._coeffs.items():
            exps = mono.as_dict()
            power = exps.get(variable, 0) + 1
            exps[variable] = power
            result[Monomial.from_mapping(exps)] = coef / power
        return Polynomial(result)

    def collect(self, variables: Iterable[Variable]) -> Dict[Monomial, "Polynomial"]:
        """Group terms by their monomial in ``variables``.

        Returns a mapping from monomials in ``variables`` to coefficient
        polynomials in the remaining variables.
        """
        variables = tuple(variables)
        grouped: Dict[Monomial, Dict[Monomial, float]] = {}
        for mono, coef in self._coeffs.items():
            inside, outside = mono.restrict(variables)
            bucket = grouped.setdefault(inside, {})
            bucket[outside] = bucket.get(outside, 0.0) + coef
        ordered = sorted(grouped.items(), key=lambda item: item[0].grlex_key)
        return {mono: Polynomial(terms) for mono, terms in ordered}

    def evaluate(self, values: Mapping[Variable, float]) -> float:
        """Evaluate at a point given as a variable -> value mapping."""
        total = 0.0
        for mono, coef in self._coeffs.items():
            term = coef
            for var, exp in mono.powers:
                if var not in values:
                    raise ValueError(f"No value supplied for variable {var.name}")
                term *= float(values[var]) ** exp
            total += term
        return total

    def compile(self, variables: Sequence[Variable]) -> Callable[..., np.ndarray]:
        """Vectorised evaluator taking one broadcastable array per variable."""
        variables = tuple(variables)
        index = {var: i for i, var in enumerate(variables)}
        missing = [var.name for var in self.variables() if var not in index]
        if missing:
            raise ValueError(f"Cannot compile polynomial: variables {missing} not among {[v.name for v in variables]}")
        rows = [([(index[var], exp) for var, exp in mono.powers], coef) for mono, coef in self._coeffs.items()]
        max_exp = [0] * len(variables)
        for powers, _ in rows:
            for i, exp in powers:
                max_exp[i] = max(max_exp[i], exp)

        def evaluate(*arrays):
            if len(arrays) != len(variables):
                raise ValueError(f"Expected {len(variables)} arrays, got {len(arrays)}")
            arrays = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays]) if arrays else []
            shape = arrays[0].shape if arrays else ()
            tables = []
            for i, arr in enumerate(arrays):
                table = [None, arr]
                for _ in range(2, max_exp[i] + 1):
                    table.append(table[-1] * arr)
                tables.append(table)
            total = np.zeros(shape)
            for powers, coef in rows:
                term = coef
                for i, exp in powers:
                    term = term * tables[i][exp]
                total = total + term
            return total

        return evaluate

    # display

    def __repr__(self) -> str:
        return f"Polynomial({self})"

    def __str__(self) -> str:
        if not self._coeffs:
            return "0"
        parts = []
        for mono, coef in self._coeffs.items():
            if mono == ONE:
                parts.append(f"{coef:g}")
            elif coef == 1.0:
                parts.append(str(mono))
            else:
                parts.append(f"{coef:g}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")


PolyLike = Union[Polynomial, Scalar]


def add(p: PolyLike, q: PolyLike) -> Polynomial:
    return Polynomial.coerce(p) + q


def mul(p: PolyLike, q: PolyLike) -> Polynomial:
    return Polynomial.coerce(p) * q


def scale(p: PolyLike, factor: float) -> Polynomial:
    return Polynomial.coerce(p).scale(factor)


def differentiate(p: Polynomial, variable: Variable, order: int = 1) -> Polynomial:
    """Partial derivative of ``p`` with respect to ``variable``.

    Args:
        p: Polynomial to differentiate
        variable: Differentiation variable
        order: Number of times to differentiate, at least 1

    Returns:
        The ``order``-th partial derivative

    Examples:
        >>> x = Polynomial.variable(Variable("x"))
        >>> differentiate(x ** 3, Variable("x")) == 3 * x ** 2
        True
    """
    if order < 1 or int(order) != order:
        raise ValueError(f"Derivative order must be a positive integer, got {order}")
    result: Dict[Monomial, float] = {}
    for mono, coef in p.terms:
        exps = mono.as_dict()
        power = exps.get(variable, 0)
        if power < order:
            continue
        factor = math.perm(power, order)
        exps[variable] = power - order
        new_mono = Monomial.from_mapping(exps)
        result[new_mono] = result.get(new_mono, 0.0) + coef * factor
    return Polynomial(result)


def substitute(p: Polynomial, bindings: Mapping[Variable, PolyLike]) -> Polynomial:
    """Compose ``p`` with polynomial replacements for some of its variables.

    Variables without a binding are left in place.
    """
    if not bindings:
        return p
    bound = {var: Polynomial.coerce(value) for var, value in bindings.items()}
    power_cache: Dict[Tuple[Variable, int], Polynomial] = {}

    def power(var: Variable, exp: int) -> Polynomial:
        key = (var, exp)
        if key not in power_cache:
            power_cache[key] = bound[var] if exp == 1 else power(var, exp - 1) * bound[var]
        return power_cache[key]

    accumulated: Dict[Monomial, float] = {}
    for mono, coef in p.terms:
        kept = {}
        factor = None
        for var, exp in mono.powers:
            if var in bound:
                factor = power(var, exp) if factor is None else factor * power(var, exp)
            else:
                kept[var] = exp
        kept_mono = Monomial.from_mapping(kept)
        if factor is None:
            accumulated[kept_mono] = accumulated.get(kept_mono, 0.0) + coef
            continue
        for fmono, fcoef in factor.terms:
            mono_out = kept_mono * fmono
            accumulated[mono_out] = accumulated.get(mono_out, 0.0) + coef * fcoef
    return Polynomial(accumulated)


def monomial_basis(variables: Sequence[Variable], degree: int) -> List[Monomial]:
    """All monomials of total degree at most ``degree`` in graded-lex order.

    The count is C(len(variables) + degree, degree).
    """
    if degree < 0:
        raise ValueError(f"Basis degree must be nonnegative, got {degree}")
    ordered = sort_variables(variables)
    basis: List[Monomial] = []
    for total in range(degree + 1):
        chunk = []
        for combo in combinations_with_replacement(ordered, total):
            exps: Dict[Variable, int] = {}
            for var in combo:
                exps[var] = exps.get(var, 0) + 1
            chunk.append(Monomial.from_mapping(exps))
        chunk.sort(key=lambda m: m.grlex_key)
        basis.extend(chunk)
    return basis


@dataclass(frozen=True)
class AffineMap:
    """Per-variable substitution ``var <- scale * var + shift``."""

    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        if self.scale == 0.0 or not math.isfinite(self.scale):
            raise ValueError(f"Affine map needs a finite nonzero scale, got {self.scale}")
        if not math.isfinite(self.shift):
            raise ValueError(f"Affine map needs a finite shift, got {self.shift}")

    @classmethod
    def interval_to_unit(cls, lower: float, upper: float) -> "AffineMap":
        """Map taking local coordinates on [-1, 1] to [lower, upper]."""
        return cls((upper - lower) / 2.0, (upper + lower) / 2.0)

    def inverse(self) -> "AffineMap":
        return AffineMap(1.0 / self.scale, -self.shift / self.scale)

    def apply(self, value):
        return self.scale * value + self.shift

    def polynomial(self, variable: Variable) -> Polynomial:
        return Polynomial({Monomial.of(variable): self.scale, ONE: self.shift})

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and self.shift == 0.0


def affine_change_of_basis(p: Polynomial, maps: Mapping[Variable, AffineMap]) -> Polynomial:
    """Return ``p`` composed with the per-variable affine maps."""
    bindings = {var: amap.polynomial(var) for var, amap in maps.items() if not amap.is_identity}
    return substitute(p, bindings)
