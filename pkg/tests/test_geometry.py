import math

import numpy as np
import pytest
from scipy.integrate import quad

from modrecip.geometry import (
    Displacement,
    HausdorffConstants,
    MetricGrid,
    NormTag,
    ball_volume,
    cell_measure,
    hausdorff_density_2d,
    norm_length,
    step_length,
)

from bruteforce import isodiametric_search

NORMS = [NormTag.L1, NormTag.L2, NormTag.LINF]


class TestBallVolume:
    def test_known_values(self):
        assert ball_volume(2) == pytest.approx(math.pi, rel=1e-12)
        assert ball_volume(1) == pytest.approx(2.0, rel=1e-12)
        assert ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0, rel=1e-12)

    def test_half_integer_accuracy(self):
        # Gamma(k/2 + 1) has closed forms at integer and half-integer k,
        # pinning the accuracy on [1, 4]
        sqrtpi = math.sqrt(math.pi)
        closed_form = {
            1.0: sqrtpi / 2,  # Gamma(3/2)
            2.0: 1.0,  # Gamma(2)
            3.0: 3 * sqrtpi / 4,  # Gamma(5/2)
            4.0: 2.0,  # Gamma(3)
        }
        for k, gamma_val in closed_form.items():
            expected = math.pi ** (k / 2) / gamma_val
            assert ball_volume(k) == pytest.approx(expected, rel=1e-12)

    def test_quadrature_crosscheck(self):
        # Gamma(5/2) as the integral of x^{3/2} e^{-x}
        gamma_52, _ = quad(lambda x: x**1.5 * math.exp(-x), 0, np.inf)
        assert ball_volume(3) == pytest.approx(math.pi**1.5 / gamma_52, rel=1e-9)

    def test_domain_error(self):
        with pytest.raises(ValueError):
            ball_volume(0.5)


class TestHausdorffDensity:
    def test_values(self):
        assert hausdorff_density_2d(NormTag.LINF) == pytest.approx(math.pi / 4, rel=1e-12)
        assert hausdorff_density_2d(NormTag.L2) == 1.0
        assert hausdorff_density_2d(NormTag.L1) == pytest.approx(math.pi / 2, rel=1e-12)

    def test_l1_isodiametric_oracle(self):
        # the hard-coded pi/2 must agree with an independent isodiametric
        # search to 1%
        rng = np.random.default_rng(20240517)
        ratio = isodiametric_search(rng)
        oracle_density = (math.pi / 4) / ratio
        assert oracle_density == pytest.approx(math.pi / 2, rel=0.01)

    def test_constants_bundle(self):
        c = HausdorffConstants.for_norm("linf")
        assert c.v1 == pytest.approx(2.0, rel=1e-12)
        assert c.v2 == pytest.approx(math.pi, rel=1e-12)
        assert c.coarea_const == pytest.approx(4.0 / math.pi, rel=1e-12)
        assert c.density2d == pytest.approx(math.pi / 4, rel=1e-12)


class TestStepLength:
    def test_examples(self):
        assert step_length("l2", (3.0, 4.0)) == pytest.approx(5.0)
        h = 0.125
        assert step_length("linf", Displacement(h, h)) == pytest.approx(h)
        assert step_length("l1", (1.0, 1.0), weight_at_source=2.0) == pytest.approx(4.0)

    def test_rejects_bad_weight(self):
        with pytest.raises(ValueError):
            step_length("l2", (1.0, 0.0), weight_at_source=0.0)

    @pytest.mark.parametrize("norm", NORMS)
    def test_norm_axioms(self, norm):
        rng = np.random.default_rng(hash(norm.value) % 2**32)
        for _ in range(1000):
            ax, ay, bx, by = rng.normal(size=4)
            lam = rng.uniform(0.1, 5.0)
            la = norm_length(norm, ax, ay)
            lb = norm_length(norm, bx, by)
            lab = norm_length(norm, ax + bx, ay + by)
            if (ax, ay) != (0.0, 0.0):
                assert la > 0
            assert norm_length(norm, lam * ax, lam * ay) == pytest.approx(lam * la, rel=1e-12)
            assert lab <= la + lb + 1e-12


class TestMetricGrid:
    def test_total_measures(self):
        assert MetricGrid(16, norm="linf").total_measure() == pytest.approx(
            math.pi / 4, abs=1e-12
        )
        assert MetricGrid(16, norm="l2").total_measure() == pytest.approx(1.0, abs=1e-12)
        assert MetricGrid(16, norm="l2", weight=2.0).total_measure() == pytest.approx(
            4.0, abs=1e-12
        )

    def test_cell_measure_and_errors(self):
        grid = MetricGrid(8, norm="linf")
        expected = (math.pi / 4) / 64
        assert cell_measure(grid, 0) == pytest.approx(expected, rel=1e-12)
        with pytest.raises(IndexError):
            cell_measure(grid, 64)
        with pytest.raises(IndexError):
            grid.cell_measure(-1)

    def test_partition_additivity(self):
        grid = MetricGrid(10, norm="l1", weight="bump")
        rng = np.random.default_rng(3)
        split = rng.integers(0, 3, grid.num_nodes)
        parts = sum(
            grid.cell_measures()[split == k].sum() for k in range(3)
        )
        assert parts == pytest.approx(grid.total_measure(), abs=1e-12)

    def test_refinement_invariance(self):
        for norm in NORMS:
            a = MetricGrid(12, width=1.5, height=0.75, norm=norm).total_measure()
            b = MetricGrid(24, width=1.5, height=0.75, norm=norm).total_measure()
            assert a == pytest.approx(b, abs=1e-12)

    def test_side_labels_disjoint_cover(self):
        grid = MetricGrid(9)
        labels = grid.side_labels
        assert set(labels) == {"A", "B", "C", "D"}
        all_nodes = np.concatenate([labels[k] for k in "ABCD"])
        assert len(all_nodes) == len(set(all_nodes.tolist()))
        # boundary nodes minus the four corners are covered
        i, j = grid._i, grid._j
        boundary = (i == 0) | (i == grid.n - 1) | (j == 0) | (j == grid.n - 1)
        corners = ((i == 0) | (i == grid.n - 1)) & ((j == 0) | (j == grid.n - 1))
        assert set(all_nodes.tolist()) == set(np.nonzero(boundary & ~corners)[0].tolist())
        for k in "ABCD":
            assert len(labels[k]) == grid.n - 2

    def test_side_labels_diagonal_symmetry(self):
        # reflecting across the main diagonal swaps A with B and C with D
        grid = MetricGrid(7)
        reflect = lambda idx: grid.node_index(grid._j[idx], grid._i[idx])
        assert set(reflect(grid.label_nodes("A")).tolist()) == set(
            grid.label_nodes("B").tolist()
        )
        assert set(reflect(grid.label_nodes("C")).tolist()) == set(
            grid.label_nodes("D").tolist()
        )

    def test_closed_side_includes_corners(self):
        grid = MetricGrid(5)
        assert len(grid.closed_side("A")) == 5
        assert grid.node_index(0, 0) in grid.closed_side("A")

    def test_small_grid_has_no_labels(self):
        grid = MetricGrid(2)
        assert grid.side_labels == {}
        with pytest.raises(KeyError):
            grid.label_nodes("A")

    def test_slit_preset_removes_column(self):
        grid = MetricGrid(9, weight="slit")
        assert (~grid.active).sum() == 9
        assert grid.cell_measures()[~grid.active].sum() == 0.0
        removed = set(np.nonzero(~grid.active)[0].tolist())
        assert all(grid._i[v] == 4 for v in removed)

    def test_immutable_after_construction(self):
        grid = MetricGrid(4)
        with pytest.raises(ValueError):
            grid.weight[0] = 2.0
        with pytest.raises(ValueError):
            grid.x[0] = 0.5

    def test_constructor_validation(self):
        with pytest.raises(ValueError):
            MetricGrid(1)
        with pytest.raises(ValueError):
            MetricGrid(4, width=-1.0)
        with pytest.raises(ValueError):
            MetricGrid(4, norm="l3")
        with pytest.raises(ValueError):
            MetricGrid(4, weight="mystery")
        with pytest.raises(ValueError):
            MetricGrid(4, weight=np.ones(5))

    def test_weight_callable_and_distance(self):
        grid = MetricGrid(4, norm="l2", weight=lambda x, y: 1.0 + x)
        a = grid.node_index(0, 0)
        b = grid.node_index(1, 1)
        h = 0.25
        assert grid.distance(a, b) == pytest.approx(grid.weight[a] * h * math.sqrt(2))
