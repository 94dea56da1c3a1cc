"""Unit tests for models module."""

import math

import pytest

from src.models import (
    CostSpec,
    DiffusionModel,
    DiscountedHorizon,
    FiniteHorizon,
    InitialCondition,
    JumpModel,
    ModelError,
    Reaction,
    generator,
    generator_diffusion,
    generator_discounted,
    generator_jump,
    verify_dynkin_mc,
)
from src.polynomials import Polynomial, Variable
from src.regions import IntervalBox


def var(v):
    return Polynomial.variable(v)


class TestGenerators:
    def test_lotka_volterra_generator_of_prey_square(self, lv_problem):
        """A x1^2 = 2 x1 f1 + gg^T_11 with gg^T_11 = 0.000625 x1^2."""
        model, _, _ = lv_problem
        x1, x2 = model.states
        result = generator_diffusion(var(x1) ** 2, model)
        expected = 2 * var(x1) * (var(x1) - 2 * var(x1) * var(x2)) + 0.000625 * var(x1) ** 2
        assert result.isclose(expected)

    def test_time_derivative_included(self, lv_problem):
        """A t = 1 for any model."""
        model, _, _ = lv_problem
        assert generator(var(model.time), model) == Polynomial.constant(1.0)

    def test_control_enters_through_drift(self, lv_problem):
        """A x2 = 2 x1 x2 - x2 - x2 u depends on the control."""
        model, _, _ = lv_problem
        x1, x2 = model.states
        (u,) = model.controls
        result = generator(var(x2), model)
        assert result == 2 * var(x1) * var(x2) - var(x2) - var(x2) * var(u)

    def test_jump_generator_of_protein_count(self, bio_problem):
        """A x1 = 10 x2 - 0.1 x1 for the biocircuit."""
        model, _, _ = bio_problem
        x1, x2 = model.states
        assert generator_jump(var(x1), model).isclose(10 * var(x2) - 0.1 * var(x1))

    def test_jump_generator_of_constant_is_zero(self, bio_problem):
        model, _, _ = bio_problem
        assert generator_jump(Polynomial.constant(3.0), model).is_zero

    def test_discounted_generator(self, scalar_problem):
        """A x^2 - rho x^2 = -2x^2 - x^2 for dx = -x dt and rho = 1."""
        model, _, _ = scalar_problem
        (x,) = model.states
        assert generator_discounted(var(x) ** 2, model, 1.0) == -3 * var(x) ** 2

    def test_generator_rejects_control_dependent_argument(self, lv_problem):
        """w must be a polynomial in (t, x) only."""
        model, _, _ = lv_problem
        with pytest.raises(ModelError, match="polynomial in"):
            generator(var(model.controls[0]), model)


class TestDiffusionValidation:
    def _parts(self):
        t, x = Variable("t", "time"), Variable("x")
        return t, x, IntervalBox((x,), (0.0,), (math.inf,)), IntervalBox((), (), ())

    def test_drift_dimension_mismatch(self):
        t, x, box, controls = self._parts()
        with pytest.raises(ModelError, match="Drift has 2 components"):
            DiffusionModel(t, (x,), (), (var(x), var(x)), ((Polynomial.zero(),),), box, controls)

    def test_undeclared_variable_in_drift(self):
        t, x, box, controls = self._parts()
        y = Variable("y")
        with pytest.raises(ModelError, match="undeclared"):
            DiffusionModel(t, (x,), (), (var(y),), ((Polynomial.zero(),),), box, controls)

    def test_factor_must_reproduce_matrix(self):
        """g g^T has to equal the declared diffusion matrix."""
        t, x, box, controls = self._parts()
        with pytest.raises(ModelError, match="does not reproduce"):
            DiffusionModel(
                t,
                (x,),
                (),
                (-var(x),),
                ((Polynomial.constant(1.0),),),
                box,
                controls,
                diffusion_factor=((Polynomial.constant(2.0),),),
            )

    def test_unbounded_control_set_rejected(self):
        t, x, box, _ = self._parts()
        u = Variable("u", "control")
        with pytest.raises(ModelError, match="bounded"):
            DiffusionModel(t, (x,), (u,), (var(u),), ((Polynomial.zero(),),), box, IntervalBox((u,), (0.0,), (math.inf,)))

    def test_kind_checked(self):
        """A state declared with the control kind is rejected."""
        t, _, _, controls = self._parts()
        z = Variable("z", "control")
        with pytest.raises(ModelError, match="kind 'state'"):
            DiffusionModel(t, (z,), (), (var(z),), ((Polynomial.zero(),),), IntervalBox((z,), (0.0,), (1.0,)), controls)

    def test_deterministic_flag(self, scalar_problem, lv_problem):
        assert scalar_problem[0].is_deterministic
        assert not lv_problem[0].is_deterministic


class TestJumpValidation:
    def _parts(self):
        t, x = Variable("t", "time"), Variable("x")
        return t, x, IntervalBox((x,), (0.0,), (math.inf,)), IntervalBox((), (), ())

    def test_negative_propensity_rejected(self):
        """Propensities must be nonnegative on the lattice."""
        t, x, lattice, controls = self._parts()
        reaction = Reaction("bad", (var(x) + 1,), 1 - var(x))
        with pytest.raises(ModelError, match="negative"):
            JumpModel(t, (x,), (), (reaction,), lattice, controls)

    def test_jump_leaving_lattice_rejected(self):
        """Degradation at rate 1 would leave the lattice from x = 0."""
        t, x, lattice, controls = self._parts()
        reaction = Reaction("decay", (var(x) - 1,), Polynomial.constant(1.0))
        with pytest.raises(ModelError, match="outside the lattice"):
            JumpModel(t, (x,), (), (reaction,), lattice, controls)

    def test_zero_rate_jump_out_is_allowed(self):
        """x -> x - 1 at rate x never fires at x = 0."""
        t, x, lattice, controls = self._parts()
        model = JumpModel(t, (x,), (), (Reaction("decay", (var(x) - 1,), var(x)),), lattice, controls)
        assert model.contains((0.0,))
        assert not model.contains((0.5,))

    def test_needs_a_reaction(self):
        t, x, lattice, controls = self._parts()
        with pytest.raises(ModelError, match="at least one reaction"):
            JumpModel(t, (x,), (), (), lattice, controls)

    def test_biocircuit_is_admissible(self, bio_problem):
        """All five channels are valid on N x {0, 1} for u in [0, 1]."""
        model, cost, initial = bio_problem
        assert [r.name for r in model.reactions] == [
            "expression",
            "degradation",
            "repression",
            "activation",
            "deactivation",
        ]
        assert initial.atoms == ((0.0, 1.0),)
        assert cost.horizon.T == 2.0


class TestCostAndInitial:
    def test_horizon_must_be_positive(self):
        with pytest.raises(ModelError):
            FiniteHorizon(0.0)

    def test_zero_discount_needs_rest_point(self):
        """rho = 0 without rest points is rejected."""
        with pytest.raises(ModelError, match="rest point"):
            DiscountedHorizon(0.0)
        assert DiscountedHorizon(0.0, ((0.0,),)).rho == 0.0

    def test_negative_discount_rejected(self):
        with pytest.raises(ModelError):
            DiscountedHorizon(-1.0)

    def test_discounted_terminal_cost_rejected(self):
        x = Variable("x")
        with pytest.raises(ModelError, match="no terminal cost"):
            CostSpec(var(x), var(x), DiscountedHorizon(1.0))

    def test_terminal_cost_must_not_use_controls(self):
        u = Variable("u", "control")
        with pytest.raises(ModelError, match="only depend on states"):
            CostSpec(Polynomial.zero(), var(u), FiniteHorizon(1.0))

    def test_stage_cost_checked_against_model(self, lv_problem):
        model, _, _ = lv_problem
        stray = Variable("z")
        cost = CostSpec(var(stray), Polynomial.zero(), FiniteHorizon(1.0))
        with pytest.raises(ModelError, match="undeclared"):
            cost.check_against(model)

    def test_weights_must_sum_to_one(self):
        """Weights of the Dirac mixture form a probability vector."""
        with pytest.raises(ModelError, match="sum to 1"):
            InitialCondition(((0.0,), (1.0,)), (0.5, 0.6))
        mixture = InitialCondition(((0.0,), (1.0,)), (0.25, 0.75))
        assert mixture.weights == (0.25, 0.75)

    def test_atom_weight_count(self):
        with pytest.raises(ModelError):
            InitialCondition(((0.0,),), (0.5, 0.5))


class TestCaseStudies:
    def test_lotka_volterra_constants(self, lv_problem):
        """gamma = (1, 2, 1, 2, 0.025), x0 = (1, 0.25), U = [0, 1], T = 10."""
        model, cost, initial = lv_problem
        x1, x2 = model.states
        (u,) = model.controls
        assert initial.atoms == ((1.0, 0.25),)
        assert model.control_set.lower == (0.0,) and model.control_set.upper == (1.0,)
        assert cost.horizon.T == 10.0
        assert cost.terminal.is_zero
        expected = (var(x1) - 0.75) ** 2 + (var(x2) - 0.5) ** 2 / 10 + (var(u) - 0.5) ** 2 / 10
        assert cost.stage.isclose(expected)

    def test_biocircuit_stage_cost(self, bio_problem):
        model, cost, _ = bio_problem
        x1, _ = model.states
        (u,) = model.controls
        assert cost.stage.isclose((var(x1) - 10) ** 2 + 10 * (var(u) - 0.5) ** 2)


class TestDynkin:
    def test_jump_dynkin_residual(self, bio_problem):
        """E[w(t, x_t)] - w(0, x0) - E[int A w] vanishes for w = x1."""
        model, _, _ = bio_problem
        x1, _ = model.states
        result = verify_dynkin_mc(var(x1), model, t=0.5, trials=2000, x0=(0.0, 1.0), seed=7)
        assert result.diverged == 0
        assert abs(result.residual) <= 4 * result.stderr + 1e-9, f"residual {result.residual} ± {result.stderr}"

    def test_deterministic_diffusion_dynkin(self, scalar_problem):
        """For dx = -x dt the Euler residual of w = x^2 is O(dt)."""
        model, _, _ = scalar_problem
        (x,) = model.states
        result = verify_dynkin_mc(var(x) ** 2, model, t=1.0, trials=4, x0=(1.0,), dt=1e-3)
        assert abs(result.residual) < 1e-3
