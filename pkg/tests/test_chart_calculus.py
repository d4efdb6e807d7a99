"""Tests for chart-level calculus: finite differences, Levi-Civita, curvature,
torsion, and moving-frame connections, pinned against symbolic oracles."""

import numpy as np
import pytest

from ambrose.chart_calculus import (
    Chart,
    ConnectionCoeffs,
    TensorFieldSpec,
    christoffel,
    christoffel_partial,
    covariant_derivative,
    covariant_derivative_field,
    curvature,
    fd_array,
    frame_connection_field,
    frame_structure_functions,
    frame_to_coordinate,
    levi_civita,
    ortho_frame,
    ortho_frame_partial,
    sample_interior,
    torsion,
)
from ambrose.errors import BadParameters, OutOfDomain
from ambrose.fixtures import instantiate
from ambrose.tensor_core import DOWN, UP, DenseTensor

from oracles import symbolic_geometry, transport_holonomy_angle

ORACLE_CASES = [
    ("round_sphere2", {"radius": 1.0}, ("round_sphere2", (1.0,))),
    ("round_sphere2", {"radius": 2.0}, ("round_sphere2", (2.0,))),
    ("hyperbolic_plane", {}, ("hyperbolic_plane", ())),
    ("berger_sphere", {"lam": 2.0}, ("berger_sphere", (2.0,))),
]


class TestChart:
    def test_box_validation(self):
        with pytest.raises(BadParameters):
            Chart(dim=2, box=np.array([[0.0, 1.0], [1.0, 1.0]]), margin=0.1)
        with pytest.raises(BadParameters):
            Chart(dim=2, box=np.array([[0.0, 1.0], [0.0, 1.0]]), margin=0.0)

    def test_require_inside_with_stencil_radius(self):
        chart = Chart(dim=1, box=np.array([[0.0, 1.0]]), margin=0.05)
        chart.require_inside(np.array([0.5]), radius=0.1)
        with pytest.raises(OutOfDomain):
            chart.require_inside(np.array([0.05]), radius=0.1)
        with pytest.raises(OutOfDomain):
            chart.require_inside(np.array([0.5, 0.5]))

    def test_sample_interior_deterministic_and_inside(self):
        chart = Chart(dim=2, box=np.array([[0.0, 2.0], [4.0, 8.0]]), margin=0.25)
        pts = sample_interior(chart, 32, seed=3)
        same = sample_interior(chart, 32, seed=3)
        other = sample_interior(chart, 32, seed=4)
        assert np.array_equal(pts, same)
        assert not np.array_equal(pts, other)
        assert (pts >= chart.box[:, 0] + chart.margin).all()
        assert (pts <= chart.box[:, 1] - chart.margin).all()


class TestFiniteDifferences:
    def field(self, x):
        return np.array(
            [np.sin(3 * x[0]) * np.cos(x[1]), np.exp(0.3 * x[0] * x[1])]
        )

    def grad(self, x, mu):
        if mu == 0:
            return np.array(
                [
                    3 * np.cos(3 * x[0]) * np.cos(x[1]),
                    0.3 * x[1] * np.exp(0.3 * x[0] * x[1]),
                ]
            )
        return np.array(
            [
                -np.sin(3 * x[0]) * np.sin(x[1]),
                0.3 * x[0] * np.exp(0.3 * x[0] * x[1]),
            ]
        )

    def test_richardson_accuracy(self):
        chart = Chart(dim=2, box=np.array([[-2.0, 2.0], [-2.0, 2.0]]), margin=0.1)
        x = np.array([0.4, -0.7])
        for mu in range(2):
            d = fd_array(self.field, chart, x, mu)
            assert np.abs(d - self.grad(x, mu)).max() < 1e-9

    def test_halving_ratio_is_second_order(self):
        """Pre-Richardson central differences gain a factor ~4 per halving."""
        chart = Chart(dim=2, box=np.array([[-2.0, 2.0], [-2.0, 2.0]]), margin=0.1)
        x = np.array([0.4, -0.7])
        e1 = np.abs(
            fd_array(self.field, chart, x, 0, richardson=False, step_scale=1e-2)
            - self.grad(x, 0)
        ).max()
        e2 = np.abs(
            fd_array(self.field, chart, x, 0, richardson=False, step_scale=5e-3)
            - self.grad(x, 0)
        ).max()
        assert 3.5 < e1 / e2 < 4.5

    def test_direction_out_of_range(self):
        chart = Chart(dim=1, box=np.array([[0.0, 1.0]]), margin=0.05)
        with pytest.raises(Exception):
            fd_array(lambda x: x, chart, np.array([0.5]), 3)


class TestLeviCivitaAgainstOracle:
    @pytest.mark.parametrize("name,params,oracle_key", ORACLE_CASES)
    def test_christoffel(self, name, params, oracle_key):
        fix = instantiate(name, params)
        gam_oracle, _ = symbolic_geometry(*oracle_key)
        for x in sample_interior(fix.chart, 6, seed=5):
            assert np.abs(christoffel(fix.g, x) - gam_oracle(x)).max() < 1e-11

    @pytest.mark.parametrize("name,params,oracle_key", ORACLE_CASES)
    def test_curvature(self, name, params, oracle_key):
        fix = instantiate(name, params)
        _, rie_oracle = symbolic_geometry(*oracle_key)
        for x in sample_interior(fix.chart, 6, seed=6):
            assert np.abs(curvature(fix.gamma, x).data - rie_oracle(x)).max() < 1e-10

    def test_christoffel_partial_matches_fd(self):
        fix = instantiate("round_sphere2", {})
        x = np.array([1.1, 2.0])
        for mu in range(2):
            d = christoffel_partial(fix.g, x, mu)
            fd = fd_array(lambda p: christoffel(fix.g, p), fix.chart, x, mu)
            assert np.abs(d - fd).max() < 1e-9

    def test_lowered_sphere_curvature_sign(self):
        """R_theta-phi-theta-phi = +sin^2(theta) on the unit sphere."""
        fix = instantiate("round_sphere2", {})
        x = np.array([1.0, 0.5])
        r = curvature(fix.gamma, x).data
        lowered = np.einsum("al,lkij->akij", fix.g.at(x), r)
        assert lowered[0, 1, 0, 1] == pytest.approx(np.sin(1.0) ** 2, abs=1e-12)

    def test_transport_holonomy_around_latitude(self):
        """Transport around a latitude loop rotates by -2 pi cos(theta0)."""
        fix = instantiate("round_sphere2", {})
        gam_oracle, _ = symbolic_geometry("round_sphere2", (1.0,))
        theta0 = 1.1
        loop = (
            lambda t: np.array([theta0, 2 * np.pi * t]),
            lambda t: np.array([0.0, 2 * np.pi]),
        )
        angle = transport_holonomy_angle(
            lambda x: christoffel(fix.g, x), fix.g.at, loop
        )
        expected = -2 * np.pi * np.cos(theta0)
        expected = np.mod(expected + np.pi, 2 * np.pi) - np.pi
        assert angle == pytest.approx(expected, abs=1e-8)


class TestCovariantDerivative:
    def test_metric_is_parallel(self):
        for name in ("round_sphere2", "hyperbolic_plane", "berger_sphere"):
            fix = instantiate(name, {})
            g_field = TensorFieldSpec(
                chart=fix.chart,
                markers=(DOWN, DOWN),
                evaluator=lambda x, g=fix.g: DenseTensor((DOWN, DOWN), g.at(x)),
                partial_evaluator=lambda x, mu, g=fix.g: DenseTensor(
                    (DOWN, DOWN), g.partial_at(x, mu)
                ),
            )
            for x in sample_interior(fix.chart, 4, seed=8):
                dg = covariant_derivative(fix.gamma, g_field, x)
                assert dg.norm() < 1e-12

    def test_product_rule_on_scaled_vector(self):
        fix = instantiate("round_sphere2", {})

        def f(x):
            return np.sin(x[0]) * np.cos(x[1])

        def v(x):
            return np.array([np.cos(x[1]), np.sin(x[0])])

        vf = TensorFieldSpec(
            chart=fix.chart,
            markers=(UP,),
            evaluator=lambda x: DenseTensor((UP,), v(x)),
        )
        fvf = TensorFieldSpec(
            chart=fix.chart,
            markers=(UP,),
            evaluator=lambda x: DenseTensor((UP,), f(x) * v(x)),
        )
        x = np.array([1.2, 3.0])
        lhs = covariant_derivative(fix.gamma, fvf, x).data
        df = np.array(
            [np.cos(x[0]) * np.cos(x[1]), -np.sin(x[0]) * np.sin(x[1])]
        )
        rhs = np.outer(df, v(x)) + f(x) * covariant_derivative(fix.gamma, vf, x).data
        assert np.abs(lhs - rhs).max() < 1e-9

    def test_second_derivative_commutator_is_curvature(self):
        """(del_i del_j - del_j del_i) v = R(e_i, e_j) v for torsion-free gamma."""
        fix = instantiate("hyperbolic_plane", {})

        def v(x):
            return np.array([np.sin(x[0] + x[1]), x[1] ** 2])

        vf = TensorFieldSpec(
            chart=fix.chart,
            markers=(UP,),
            evaluator=lambda x: DenseTensor((UP,), v(x)),
        )
        ddv_field = covariant_derivative_field(
            fix.gamma, covariant_derivative_field(fix.gamma, vf)
        )
        x = np.array([0.2, 1.3])
        ddv = ddv_field.at(x).data  # axes (i, j, k): del_i del_j v^k
        comm = ddv - ddv.swapaxes(0, 1)
        r = curvature(fix.gamma, x).data
        expect = np.einsum("lkij,k->ijl", r, v(x))
        assert np.abs(comm - expect).max() < 1e-7


class TestTorsionAndFrames:
    def test_levi_civita_torsion_free(self):
        fix = instantiate("berger_sphere", {})
        for x in sample_interior(fix.chart, 4, seed=9):
            assert torsion(fix.gamma, x).norm() < 1e-12

    def test_su2_frame_structure_functions(self):
        """[e_i, e_j] = 2 eps_ijk e_k for the left-invariant frame."""
        fix = instantiate("su2_canonical", {})
        eps = np.zeros((3, 3, 3))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            eps[k, i, j] = 1.0
            eps[k, j, i] = -1.0
        for x in sample_interior(fix.chart, 4, seed=10):
            c = frame_structure_functions(fix.frame_conn, x)
            assert np.abs(c - 2.0 * eps).max() < 1e-12

    def test_canonical_torsion_pins_minus_bracket(self):
        """T(e_1, e_2) = -2 e_3 for the canonical left-invariant connection."""
        fix = instantiate("su2_canonical", {})
        x = np.array([1.0, 1.2, 2.5])
        t = torsion(fix.frame_conn, x).data
        assert t[2, 0, 1] == pytest.approx(-2.0, abs=1e-12)
        assert t[2, 1, 0] == pytest.approx(2.0, abs=1e-12)

    def test_canonical_connection_parallelizes_the_frame(self):
        """Coordinate coefficients of the frame connection transport the
        frame vectors to zero derivative."""
        fix = instantiate("su2_canonical", {})
        gamma_c = fix.gamma_canonical
        x = np.array([2.0, 1.0, 0.7])
        G = gamma_c.at(x)
        E = fix.frame_conn.frame_at(x)
        for mu in range(3):
            dE = fd_array(
                lambda p: fix.frame_conn.frame_at(p), fix.chart, x, mu
            )
            resid = dE + G[:, mu, :] @ E
            assert np.abs(resid).max() < 1e-10

    def test_frame_to_coordinate_matches_fd_in_partial(self):
        fix = instantiate("berger_sphere", {})
        gamma_c = fix.gamma_canonical
        x = np.array([1.5, 1.3, 3.1])
        for mu in range(3):
            fd = fd_array(lambda p: frame_to_coordinate(fix.frame_conn, p),
                          fix.chart, x, mu)
            assert np.abs(gamma_c.partial_at(x, mu) - fd).max() < 1e-8

    def test_ortho_frame_partial_matches_fd(self):
        fix = instantiate("berger_sphere", {})
        x = np.array([1.5, 1.3, 3.1])
        for mu in range(3):
            dframe, dcoframe = ortho_frame_partial(fix.g, x, mu)
            fd_frame = fd_array(
                lambda p: ortho_frame(fix.g, p).frame, fix.chart, x, mu
            )
            fd_coframe = fd_array(
                lambda p: ortho_frame(fix.g, p).coframe, fix.chart, x, mu
            )
            assert np.abs(dframe - fd_frame).max() < 1e-9
            assert np.abs(dcoframe - fd_coframe).max() < 1e-9

    def test_symmetric_flag_enforced(self):
        chart = Chart(dim=2, box=np.array([[-1.0, 1.0]] * 2), margin=0.05)
        bad = np.zeros((2, 2, 2))
        bad[0, 0, 1] = 1.0
        conn = ConnectionCoeffs(
            chart=chart, evaluator=lambda x: bad, symmetric_flag=True
        )
        with pytest.raises(BadParameters):
            conn.at(np.zeros(2))
