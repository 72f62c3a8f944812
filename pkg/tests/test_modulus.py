import math

import numpy as np
import pytest

from modrecip import (
    ConnectingFamily,
    Density,
    MeasureConstraint,
    MetricGrid,
    OracleCut,
    SeparatingFamily,
    SolverConfig,
    lagrangian_lower_bound,
    solve_modulus,
    verify_reciprocity,
)


class SingleConstraintFamily:
    """Fixed one-member family: admissibility on a single weighted edge."""

    def __init__(self, grid, constraint):
        self.grid = grid
        self.constraint = constraint

    def most_violated(self, rho):
        rho = np.asarray(rho, dtype=float)
        return OracleCut(self.constraint.mass(rho), self.constraint, None)

    def degenerate_status(self):
        return "ok"


class ScaledWeightFamily:
    """Wraps a family, scaling every returned constraint's weights."""

    def __init__(self, family, factor):
        self.family = family
        self.grid = family.grid
        self.factor = factor

    def most_violated(self, rho):
        cut = self.family.most_violated(rho)
        if cut.constraint is None:
            return cut
        scaled = MeasureConstraint(
            support=cut.constraint.support,
            weights=self.factor(cut.constraint.support) * cut.constraint.weights,
            total=float(
                (self.factor(cut.constraint.support) * cut.constraint.weights).sum()
            ),
        )
        value = scaled.mass(np.asarray(rho, dtype=float))
        return OracleCut(value, scaled, cut.curve)

    def degenerate_status(self):
        return self.family.degenerate_status()


def edge_family(grid):
    # horizontal edge between the two bottom nodes of the 2x2 grid, with
    # trapezoid length shares
    length = grid.distance(0, 1)
    constraint = MeasureConstraint(
        support=np.array([0, 1]), weights=np.array([length / 2, length / 2]), total=length
    )
    return SingleConstraintFamily(grid, constraint)


def closed_form_edge_value(grid, p):
    # minimize m (r0^p + r1^p) st (l/2)(r0 + r1) >= 1; symmetry gives
    # r0 = r1 = 1/l
    m = grid.cell_measure(0)
    length = grid.distance(0, 1)
    return 2.0 * m * (1.0 / length) ** p


class TestSolverConfig:
    def test_rejects_p_near_one(self):
        with pytest.raises(ValueError):
            SolverConfig(p=1.04).validate()
        with pytest.raises(ValueError):
            SolverConfig(p=1.0).validate()
        SolverConfig(p=1.05).validate()

    def test_rejects_bad_tolerances(self):
        with pytest.raises(ValueError):
            SolverConfig(tol_gap=0.0).validate()
        with pytest.raises(ValueError):
            SolverConfig(max_outer_iters=0).validate()

    def test_dual_exponent(self):
        assert SolverConfig(p=3.0).q == pytest.approx(1.5)


class TestHandSolvedInstance:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_matches_closed_form(self, p):
        grid = MetricGrid(2, norm="l2")
        family = edge_family(grid)
        cfg = SolverConfig(p=p, tol_gap=1e-10, max_inner_iters=20000)
        result = solve_modulus(family, cfg)
        assert result.converged
        assert result.value == pytest.approx(closed_form_edge_value(grid, p), rel=1e-6)

    def test_density_supported_on_edge(self):
        grid = MetricGrid(2, norm="l2")
        result = solve_modulus(edge_family(grid), SolverConfig(tol_gap=1e-10))
        rho = result.rho_star.values
        assert rho[0] == pytest.approx(rho[1], rel=1e-4)
        assert rho[2] < 1e-6 and rho[3] < 1e-6


class TestLagrangianLowerBound:
    def test_zero_multipliers(self):
        grid = MetricGrid(2)
        family = edge_family(grid)
        bound = lagrangian_lower_bound([family.constraint], [0.0], 2.0, grid.cell_measures())
        assert bound == 0.0

    def test_optimal_multiplier_closes_gap(self):
        grid = MetricGrid(2, norm="l2")
        family = edge_family(grid)
        m = grid.cell_measure(0)
        w = family.constraint.weights
        lam_star = 2.0 * m / float(w @ w)
        bound = lagrangian_lower_bound([family.constraint], [lam_star], 2.0, grid.cell_measures())
        assert bound == pytest.approx(closed_form_edge_value(grid, 2.0), abs=1e-9)

    def test_any_multiplier_stays_below_primal(self):
        grid = MetricGrid(2, norm="l2")
        family = edge_family(grid)
        primal = closed_form_edge_value(grid, 2.0)
        rng = np.random.default_rng(2)
        for _ in range(50):
            lam = rng.uniform(0.0, 5.0)
            bound = lagrangian_lower_bound(
                [family.constraint], [lam], 2.0, grid.cell_measures()
            )
            assert bound <= primal + 1e-12

    def test_sharp_square_ceiling(self, linf64):
        # any feasible multiplier vector is dominated by the sharp value
        # plus the discretization allowance
        grid, result = linf64
        constraints = [a.constraint for a in result.active_constraints]
        lam = [a.multiplier for a in result.active_constraints]
        bound = lagrangian_lower_bound(constraints, lam, 2.0, grid.cell_measures())
        assert bound <= (math.pi / 4) * 1.05
        assert bound <= result.value + 1e-9

    def test_rejects_negative_multipliers(self):
        grid = MetricGrid(2)
        family = edge_family(grid)
        with pytest.raises(ValueError):
            lagrangian_lower_bound([family.constraint], [-1.0], 2.0, grid.cell_measures())


class TestSolveModulus:
    def test_sharp_square_small(self):
        grid = MetricGrid(16, norm="linf")
        result = solve_modulus(ConnectingFamily(grid))
        assert result.converged
        # discrete modulus sits above pi/4 and under the constant-density cap
        assert math.pi / 4 < result.value <= (16 / 15) ** 2 * math.pi / 4 + 1e-6

    def test_weak_duality_every_iteration(self):
        grid = MetricGrid(8, norm="l2")
        result = solve_modulus(ConnectingFamily(grid))
        assert result.history
        for entry in result.history:
            if math.isfinite(entry["upper"]):
                assert entry["lower"] <= entry["upper"] + 1e-12

    @pytest.mark.parametrize("norm", ["l1", "l2", "linf"])
    def test_admissibility_at_termination(self, norm):
        grid = MetricGrid(8, norm=norm)
        result = solve_modulus(ConnectingFamily(grid))
        assert result.violation >= -1e-4
        assert result.lower_bound <= result.value + 1e-12

    def test_uniqueness_across_initializations(self):
        grid = MetricGrid(8, norm="linf")
        family = ConnectingFamily(grid)
        cfg = SolverConfig(p=2.0, tol_gap=1e-4, max_inner_iters=20000)
        r_zero = solve_modulus(family, cfg, rho0=0.0)
        r_ones = solve_modulus(family, cfg, rho0=1.0)
        a, b = r_zero.rho_star.values, r_ones.rho_star.values
        m = grid.cell_measures()
        dist = float((m * np.abs(a - b) ** 2).sum()) ** 0.5
        scale = float((m * a**2).sum()) ** 0.5
        assert dist / scale <= 10 * cfg.tol_gap

    def test_measure_scaling_exact(self):
        grid = MetricGrid(4, norm="l2")
        family = ConnectingFamily(grid)
        cfg = SolverConfig(tol_gap=1e-7, max_inner_iters=5000)
        base = solve_modulus(family, cfg)
        scaled = solve_modulus(family, cfg, measures=2.0 * grid.cell_measures())
        assert scaled.value == pytest.approx(2.0 * base.value, rel=1e-6)

    def test_measure_scaling_closed_form(self):
        grid = MetricGrid(2, norm="l2")
        family = edge_family(grid)
        cfg = SolverConfig(tol_gap=1e-10)
        base = solve_modulus(family, cfg)
        scaled = solve_modulus(family, cfg, measures=3.0 * grid.cell_measures())
        assert scaled.value == pytest.approx(3.0 * base.value, rel=1e-9)

    @pytest.mark.parametrize("p", [1.5, 2.0])
    def test_length_scaling_exact(self, p):
        grid = MetricGrid(4, norm="l2")
        cfg = SolverConfig(p=p, tol_gap=1e-7, max_inner_iters=5000)
        base = solve_modulus(ConnectingFamily(grid), cfg)
        doubled = ScaledWeightFamily(
            ConnectingFamily(grid), lambda support: 2.0
        )
        scaled = solve_modulus(doubled, cfg)
        assert scaled.value == pytest.approx(base.value * 2.0 ** (-p), rel=1e-6)

    def test_enlarging_constraints_never_increases_modulus(self):
        grid = MetricGrid(8, norm="l2")
        cfg = SolverConfig(tol_gap=1e-5, max_inner_iters=20000)
        base = solve_modulus(ConnectingFamily(grid), cfg)
        bump = 1.0 + 0.25 * (np.sin(np.arange(grid.num_nodes)) + 1.0) / 2.0
        enlarged = ScaledWeightFamily(
            ConnectingFamily(grid), lambda support: bump[support]
        )
        perturbed = solve_modulus(enlarged, cfg)
        assert perturbed.value <= base.value * (1.0 + 5 * cfg.tol_gap)

    def test_max_iters_is_flagged_not_raised(self):
        grid = MetricGrid(16, norm="linf")
        cfg = SolverConfig(max_outer_iters=3)
        result = solve_modulus(ConnectingFamily(grid), cfg)
        assert result.status == "max_iters"
        assert not result.converged
        assert result.lower_bound <= result.value

    def test_multipliers_nonnegative(self):
        grid = MetricGrid(8, norm="l2")
        result = solve_modulus(ConnectingFamily(grid))
        assert all(a.multiplier >= 0.0 for a in result.active_constraints)

    def test_density_floor_applied(self):
        grid = MetricGrid(8, norm="l2")
        result = solve_modulus(ConnectingFamily(grid))
        assert (result.rho_star.values >= SolverConfig().epsilon_floor).all()


class TestDegenerateClause:
    def test_disconnected_connecting_family_is_zero(self):
        grid = MetricGrid(16, norm="l2", weight="slit")
        result = solve_modulus(ConnectingFamily(grid))
        assert result.value == 0.0
        assert result.status == "no_curves"
        assert result.active_constraints == []

    def test_disconnected_separating_family_is_infinite(self):
        grid = MetricGrid(16, norm="l2", weight="slit")
        result = solve_modulus(SeparatingFamily(grid))
        assert math.isinf(result.value)
        assert result.status == "infinite"

    def test_reciprocity_reports_consistent_pair(self):
        grid = MetricGrid(16, norm="l2", weight="slit")
        report = verify_reciprocity(grid, 2.0)
        assert report.mod_p_gamma == 0.0
        assert math.isinf(report.mod_q_sigma)
        assert report.passed


class TestConformalWeight:
    def test_p2_invariant_under_constant_rescaling(self):
        # at p = 2 the objective is conformally invariant: lengths pick up
        # the factor and measures its square, which cancel exactly
        cfg = SolverConfig(p=2.0, tol_gap=1e-6, max_inner_iters=10000)
        base = solve_modulus(ConnectingFamily(MetricGrid(8, norm="linf")), cfg)
        scaled = solve_modulus(
            ConnectingFamily(MetricGrid(8, norm="linf", weight=3.0)), cfg
        )
        assert scaled.value == pytest.approx(base.value, rel=1e-5)

    def test_p2_sensitive_for_other_exponents(self):
        cfg = SolverConfig(p=3.0, tol_gap=1e-5, max_inner_iters=10000)
        base = solve_modulus(ConnectingFamily(MetricGrid(8, norm="linf")), cfg)
        scaled = solve_modulus(
            ConnectingFamily(MetricGrid(8, norm="linf", weight=2.0)), cfg
        )
        # lengths x2 and measures x4 combine to 2^(2-p) = 1/2
        assert scaled.value == pytest.approx(base.value / 2.0, rel=1e-4)

    def test_reciprocity_bound_on_bump_metric(self):
        # the product bound holds on any conformal deformation, not just
        # flat squares
        grid = MetricGrid(16, norm="l2", weight="bump")
        report = verify_reciprocity(grid, 2.0)
        assert report.gamma_result.converged and report.sigma_result.converged
        assert report.passed
        assert report.product >= math.pi / 4 * 0.9


class TestReciprocity:
    def test_sharp_square(self):
        grid = MetricGrid(16, norm="linf")
        report = verify_reciprocity(grid, 2.0)
        assert report.passed
        assert report.product >= report.threshold
        assert report.product == pytest.approx(math.pi / 4, rel=0.15)

    def test_other_side_pair(self):
        grid = MetricGrid(12, norm="linf")
        report = verify_reciprocity(grid, 2.0, labels=("B", "D"))
        assert report.passed

    def test_wide_euclidean_rectangle(self):
        grid = MetricGrid(32, width=2.0, height=1.0, norm="l2")
        report = verify_reciprocity(grid, 2.0)
        assert report.mod_p_gamma == pytest.approx(0.5, rel=0.1)
        assert report.mod_q_sigma == pytest.approx(2.0, rel=0.1)
        assert report.product == pytest.approx(1.0, rel=0.1)
        assert report.passed

    def test_dual_exponent_used(self):
        grid = MetricGrid(12, norm="l2")
        report = verify_reciprocity(grid, 3.0)
        assert report.q == pytest.approx(1.5)


class TestDensityType:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            Density(np.array([-1.0, 0.0]))

    def test_constant_and_zeros(self):
        grid = MetricGrid(3)
        assert Density.constant(grid, 2.0).values.sum() == pytest.approx(18.0)
        assert Density.zeros(grid).values.sum() == 0.0

    def test_immutable(self):
        grid = MetricGrid(3)
        d = Density.constant(grid, 1.0)
        with pytest.raises(ValueError):
            d.values[0] = 5.0
