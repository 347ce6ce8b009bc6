"""
单元测试 - 内置问题与抬升

测试各内置问题的预言机、近端算子、构造器参数校验以及两种抬升。
"""

import math

import numpy as np
import pytest

from growthlift import (
    CapabilityError,
    LiftedProblem,
    MaxAffineProblem,
    ParameterError,
    ProblemKind,
    ProblemRegistry,
    ProblemSpec,
    StateError,
    evaluate,
    from_spec,
    lift_general,
    lift_higher,
    make_builtin,
)
from growthlift.problems import HingeNormProblem, HolderNormProblem, QuadraticNormProblem


class TestRegistry:
    """问题注册表测试"""

    def test_all_kinds_registered(self):
        """测试所有内置类型都已注册"""
        for kind in ProblemKind:
            assert kind in ProblemRegistry.list_kinds()

    def test_unknown_kind(self):
        with pytest.raises(ParameterError) as excinfo:
            make_builtin("banana", 1)
        assert excinfo.value.field == "kind"

    def test_invalid_param_reports_field(self):
        """测试无效参数报告出错字段"""
        with pytest.raises(ParameterError) as excinfo:
            make_builtin("sharp_norm", 1, {"alpha": -1.0})
        assert excinfo.value.field == "params.alpha"

    def test_unknown_param(self):
        """测试未知参数被拒绝"""
        with pytest.raises(ParameterError):
            make_builtin("quadratic_norm", 1, {"beta": 1.0})

    def test_from_spec(self):
        spec = ProblemSpec(kind="quadratic_norm", n=2, params={"alpha": 1.0})
        problem = from_spec(spec)
        assert isinstance(problem, QuadraticNormProblem)
        assert problem.n == 2


class TestSharpNorm:
    """F(x) = |x| 测试"""

    def setup_method(self):
        self.problem = make_builtin("sharp_norm", 1, {"alpha": 1.0})

    def test_oracles(self):
        """测试函数值与次梯度"""
        value, g = evaluate(self.problem, [0.5])
        assert value == 0.5
        assert g[0] == 1.0

    def test_kink_subgradient(self):
        """测试 x* 处返回零次梯度"""
        value, g = evaluate(self.problem, [0.0])
        assert value == 0.0
        assert g[0] == 0.0

    def test_prox_soft_threshold(self):
        """测试软阈值近端 prox(1, 0.1) = 0.9"""
        z = self.problem.prox(np.array([1.0]), 0.1)
        assert z[0] == pytest.approx(0.9, abs=1e-15)

    def test_prox_reaches_minimizer(self):
        z = self.problem.prox(np.array([0.05]), 0.1)
        assert z[0] == 0.0

    def test_prox_rounding_lands_on_minimizer(self):
        """测试舍入使 ‖x‖ 比 αρ 多出几个 ulp 时近端点恰为 x*"""
        z = self.problem.prox(np.array([0.10000000000000014]), 0.1)
        assert z[0] == 0.0

    def test_repeated_prox_exact_zero(self):
        """测试从 1 出发连续 10 次近端步精确到达 0"""
        x = np.array([1.0])
        for _ in range(10):
            x = self.problem.prox(x, 0.1)
        assert x[0] == 0.0
        assert self.problem.value(x) == 0.0

    def test_certificate(self):
        assert self.problem.growth.p == 1
        assert self.problem.growth.alpha == 1.0
        assert self.problem.lipschitz == 1.0

    def test_dimension_mismatch(self):
        """测试维度不符"""
        with pytest.raises(ParameterError):
            evaluate(self.problem, [1.0, 2.0])

    def test_prox_invalid_rho(self):
        with pytest.raises(ParameterError):
            self.problem.prox(np.array([1.0]), 0.0)


class TestQuadraticNorm:
    """F(x) = ‖x‖² 测试"""

    def setup_method(self):
        self.problem = make_builtin("quadratic_norm", 2, {"alpha": 1.0})

    def test_value(self):
        """测试 F(1,1) = 2"""
        assert self.problem.value(np.array([1.0, 1.0])) == 2.0

    def test_certificate(self):
        assert self.problem.growth.p == 2
        assert self.problem.growth.alpha == 1.0

    def test_prox_closed_form(self):
        """测试 prox(x) = x/(1 + 2αρ)"""
        z = self.problem.prox(np.array([1.0, -2.0]), 0.5)
        np.testing.assert_allclose(z, [0.5, -1.0])

    def test_shifted_minimizer(self):
        problem = make_builtin("quadratic_norm", 2, {"x_star": [1.0, 2.0], "f_star": 3.0})
        assert problem.value(problem.x_star) == 3.0
        assert problem.gap(problem.value(np.array([2.0, 2.0]))) == pytest.approx(1.0)


class TestHolderNorm:
    """F(x) = α‖x−x*‖ᵖ 测试"""

    def setup_method(self):
        self.problem = make_builtin("holder_norm", 2, {"alpha": 1.0, "p": 1.5})

    def test_prox_optimality(self):
        """测试二分近端满足 (x − z)/ρ = ∇F(z)"""
        x = np.array([2.0, -1.0])
        rho = 0.3
        z = self.problem.prox(x, rho)
        np.testing.assert_allclose((x - z) / rho, self.problem.subgradient(z), atol=1e-9)

    def test_prox_inside_segment(self):
        """测试近端点位于 x* 与 x 的连线上"""
        x = np.array([3.0, 4.0])
        z = self.problem.prox(x, 1.0)
        ratio = z / x
        assert ratio[0] == pytest.approx(ratio[1])
        assert 0.0 < ratio[0] < 1.0

    def test_lipschitz_from_radius(self):
        problem = HolderNormProblem(1, 2.0, 3.0, np.zeros(1), radius=2.0)
        assert problem.lipschitz == pytest.approx(3.0 * 2.0 * 4.0)


class TestMaxAffine:
    """max_affine 测试"""

    def setup_method(self):
        self.problem = make_builtin("max_affine", 2, {"m": 6}, seed=7)

    def test_minimizer_by_construction(self):
        """测试 F(x*) = F*"""
        assert self.problem.value(self.problem.x_star) == pytest.approx(self.problem.f_star)

    def test_grid_minimum_agrees(self):
        """测试网格搜索最小值与 F* 一致"""
        axis = np.linspace(-2.0, 2.0, 401)
        xx, yy = np.meshgrid(axis, axis)
        points = self.problem.x_star + np.stack([xx.ravel(), yy.ravel()], axis=1)
        values = np.max(
            self.problem.offsets + (points - self.problem.x_star) @ self.problem.gradients.T,
            axis=1,
        )
        assert abs(float(np.min(values)) - self.problem.f_star) <= 1e-2

    def test_sharpness_certificate(self):
        """测试尖锐证书 F(x) ≥ F* + (α/√n)‖x − x*‖"""
        rng = np.random.default_rng(0)
        growth = self.problem.growth
        for _ in range(200):
            x = self.problem.x_star + rng.uniform(-3.0, 3.0, 2)
            gap = self.problem.value(x) - self.problem.f_star
            assert gap >= growth.alpha * self.problem.distance(x) - 1e-12

    def test_subgradient_is_active_piece(self):
        """测试次梯度为活跃段的梯度"""
        x = self.problem.x_star + np.array([0.7, -0.2])
        g = self.problem.subgradient(x)
        index = int(np.argmax(self.problem.piece_values(x)))
        np.testing.assert_array_equal(g, self.problem.gradients[index])

    def test_seed_determinism(self):
        other = make_builtin("max_affine", 2, {"m": 6}, seed=7)
        np.testing.assert_array_equal(other.gradients, self.problem.gradients)
        np.testing.assert_array_equal(other.x_star, self.problem.x_star)

    def test_prox_stationarity(self):
        """测试近端点满足 (x − z)/ρ ∈ ∂F(z)"""
        x = self.problem.x_star + np.array([1.5, -0.5])
        rho = 0.5
        z = self.problem.prox(x, rho)
        s = (x - z) / rho
        rng = np.random.default_rng(1)
        for _ in range(100):
            y = z + rng.standard_normal(2)
            assert self.problem.value(y) >= self.problem.value(z) + s @ (y - z) - 1e-8

    def test_too_few_pieces(self):
        with pytest.raises(ParameterError) as excinfo:
            make_builtin("max_affine", 3, {"m": 4})
        assert excinfo.value.field == "params.m"

    def test_explicit_pieces(self):
        """测试直接给定仿射段，F(x) = |x|"""
        problem = MaxAffineProblem([[1.0], [-1.0]], [0.0, 0.0], [0.0], 0.0)
        assert problem.value(np.array([-2.0])) == 2.0
        assert problem.m == 2
        assert problem.lipschitz == 1.0


class TestHinge:
    """带平坦区的铰链函数测试"""

    def test_flat_region(self):
        problem = HingeNormProblem(1, 1.0, 1.0, np.zeros(1))
        assert problem.value(np.array([0.5])) == 0.0
        assert problem.value(np.array([3.0])) == 2.0
        assert problem.growth is None

    def test_kink_subgradient(self):
        """测试折点处取零斜率"""
        problem = HingeNormProblem(1, 1.0, 1.0, np.zeros(1))
        assert problem.subgradient(np.array([1.0]))[0] == 0.0

    def test_lifted_hinge_builtin(self):
        """测试抬升后的铰链带有增长证书 (p, c)"""
        problem = make_builtin("lifted_hinge", 1, {"width": 1.0, "c": 0.1, "p": 2.0})
        assert isinstance(problem, LiftedProblem)
        assert problem.growth.p == 2.0
        assert problem.growth.alpha == 0.1
        assert problem.value(np.array([0.5])) == pytest.approx(0.025)
        assert problem.value(np.array([4.0])) == pytest.approx(3.0)


class TestLiftGeneral:
    """一般情形抬升测试"""

    def test_floor_dominated(self):
        """测试 x² 在 c = 0.01 时下界处处被支配"""
        base = make_builtin("quadratic_norm", 1)
        lifted = lift_general(base, 0.01, 1.0, 2.0)
        assert lifted.c == pytest.approx(0.01)
        for x in [-3.0, -0.5, 0.1, 2.0]:
            point = np.array([x])
            assert lifted.value(point) == base.value(point)
            np.testing.assert_array_equal(lifted.subgradient(point), base.subgradient(point))

    def test_cubic_with_sharp_floor(self):
        """测试 G(x) = max{|x|³, |x|}，G(0.5) = 0.5, G(2) = 8"""
        base = make_builtin("holder_norm", 1, {"p": 3.0})
        lifted = lift_general(base, 1.0, 1.0, 1.0)
        assert lifted.value(np.array([0.5])) == pytest.approx(0.5)
        assert lifted.value(np.array([2.0])) == pytest.approx(8.0)
        assert lifted.subgradient(np.array([0.5]))[0] == pytest.approx(1.0)
        assert lifted.subgradient(np.array([2.0]))[0] == pytest.approx(12.0)

    def test_value_at_minimizer(self):
        """测试 G(x*) = F*"""
        base = make_builtin("max_affine", 2, seed=3)
        lifted = lift_general(base, 0.1, 2.0, 1.5)
        assert lifted.value(base.x_star) == pytest.approx(base.f_star)

    def test_matches_base_where_dominant(self):
        """测试 F > 下界处值与次梯度与 F 完全相同"""
        base = make_builtin("max_affine", 2, seed=3)
        lifted = lift_general(base, 0.01, 5.0, 2.0)
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = base.x_star + rng.uniform(-2.0, 2.0, 2)
            if lifted.base_dominates(x):
                assert lifted.value(x) == base.value(x)
                np.testing.assert_array_equal(lifted.subgradient(x), base.subgradient(x))

    @pytest.mark.parametrize("epsilon,D", [(0.0, 1.0), (1.0, 0.0), (-1.0, 1.0)])
    def test_invalid(self, epsilon, D):
        base = make_builtin("sharp_norm", 1)
        with pytest.raises(ParameterError):
            lift_general(base, epsilon, D, 1.0)


class TestLiftHigher:
    """高阶增长抬升测试"""

    def test_coefficient(self):
        """测试 x²、ε = 0.04、p = 1 时 c = 0.2"""
        base = make_builtin("quadratic_norm", 1)
        lifted = lift_higher(base, 0.04, 1.0)
        assert lifted.c == pytest.approx(0.2)
        assert lifted.value(np.array([0.1])) == pytest.approx(0.02)
        assert lifted.value(np.array([1.0])) == pytest.approx(1.0)

    def test_unit_distance_collapses(self):
        """测试 ε = α 且距离为 1 时下界等于 F* + α"""
        base = make_builtin("holder_norm", 1, {"alpha": 0.5, "p": 3.0})
        lifted = lift_higher(base, 0.5, 2.0)
        assert lifted.floor(np.array([1.0])) == pytest.approx(0.5)

    def test_p_not_below_q(self):
        base = make_builtin("quadratic_norm", 1)
        with pytest.raises(ParameterError):
            lift_higher(base, 0.04, 2.0)

    def test_missing_certificate(self):
        """测试没有增长证书时报状态错误"""
        base = HingeNormProblem(1, 1.0, 1.0, np.zeros(1))
        with pytest.raises(StateError):
            lift_higher(base, 0.1, 1.0)


class TestLiftedProx:
    """抬升函数的近端算子测试"""

    def test_radial_prox_stationarity(self):
        """测试径向抬升问题的近端最优性"""
        base = make_builtin("holder_norm", 1, {"p": 3.0})
        lifted = lift_general(base, 1.0, 1.0, 1.0)
        x = np.array([0.8])
        rho = 0.2
        z = lifted.prox(x, rho)
        s = (x - z) / rho
        for y in np.linspace(-2.0, 2.0, 81):
            point = np.array([y])
            assert lifted.value(point) >= lifted.value(z) + s @ (point - z) - 1e-9

    def test_max_affine_prox_stationarity(self):
        """测试 max_affine 抬升的割平面近端"""
        base = make_builtin("max_affine", 2, seed=5)
        lifted = lift_general(base, 1.0, 1.0, 2.0)
        x = base.x_star + np.array([0.3, 0.2])
        rho = 1.0
        z = lifted.prox(x, rho)
        s = (x - z) / rho
        rng = np.random.default_rng(2)
        for _ in range(100):
            y = z + rng.standard_normal(2)
            assert lifted.value(y) >= lifted.value(z) + s @ (y - z) - 1e-8

    def test_no_prox_capability(self):
        """测试 base 无近端时抬升也无近端"""
        base = LiftedProblem(make_builtin("quadratic_norm", 1), 0.1, 1.0)
        nested = LiftedProblem(base, 0.01, 1.0)
        assert nested.has_prox

        class Opaque(QuadraticNormProblem):
            @property
            def is_radial(self) -> bool:
                return False

        lifted = LiftedProblem(Opaque(1, 1.0, np.zeros(1)), 0.1, 1.0)
        assert not lifted.has_prox
        with pytest.raises(CapabilityError):
            lifted.prox(np.array([1.0]), 1.0)

    def test_invalid_coefficient(self):
        with pytest.raises(ParameterError):
            LiftedProblem(make_builtin("sharp_norm", 1), 0.0, 1.0)
        assert math.isfinite(LiftedProblem(make_builtin("sharp_norm", 1), 0.5, 1.0).lipschitz)


def _invariant_cases():
    cases = [(kind.value, make_builtin(kind, 3, seed=5)) for kind in ProblemRegistry.list_kinds()]
    cases.append(
        ("lift_general_p1", lift_general(make_builtin("max_affine", 3, seed=5), 0.1, 2.0, 1.0))
    )
    cases.append(
        ("lift_general_p2", lift_general(make_builtin("holder_norm", 3, {"p": 1.5}), 0.5, 2.0, 2.0))
    )
    cases.append(("lift_higher", lift_higher(make_builtin("quadratic_norm", 3), 0.1, 1.0)))
    return cases


INVARIANT_CASES = _invariant_cases()


class TestOracleInvariants:
    """所有内置问题与抬升问题的预言机不变量"""

    @pytest.mark.parametrize(
        "problem", [p for _, p in INVARIANT_CASES], ids=[name for name, _ in INVARIANT_CASES]
    )
    def test_subgradient_inequality(self, problem):
        """测试 1000 对随机点上 F(y) ≥ F(x) + ⟨g, y − x⟩"""
        rng = np.random.default_rng(0)
        for i in range(1000):
            # 每 50 对取一次 x*，覆盖折点
            x = problem.x_star + rng.uniform(-3.0, 3.0, 3)
            if i % 50 == 0:
                x = problem.x_star.copy()
            y = problem.x_star + rng.uniform(-3.0, 3.0, 3)
            value_x, g = problem.evaluate(x)
            value_y = problem.value(y)
            linear = value_x + float(g @ (y - x))
            assert value_y >= linear - 1e-9 * max(1.0, abs(value_y)), (x, y)

    @pytest.mark.parametrize(
        "problem", [p for _, p in INVARIANT_CASES], ids=[name for name, _ in INVARIANT_CASES]
    )
    def test_certificate_sound(self, problem):
        """测试 F(x) − F* ≥ α‖x − x*‖ᵖ"""
        assert problem.growth is not None
        rng = np.random.default_rng(1)
        for _ in range(1000):
            x = problem.x_star + rng.uniform(-3.0, 3.0, 3) * rng.uniform(0.0, 1.0)
            floor = problem.growth.floor(float(np.linalg.norm(x - problem.x_star)))
            assert problem.value(x) - problem.f_star >= floor - 1e-12 * max(1.0, floor), x

    def test_lifted_tie_returns_base_subgradient(self):
        """测试 F 与下界相等处返回 F 的次梯度，且仍是 G 的次梯度"""
        base = make_builtin("quadratic_norm", 1)
        lifted = LiftedProblem(base, 0.5, 1.0)
        x = np.array([0.5])
        assert base.value(x) == lifted.floor(x) == 0.25
        g = lifted.subgradient(x)
        np.testing.assert_array_equal(g, base.subgradient(x))
        for y in np.linspace(-3.0, 3.0, 601):
            assert lifted.value(np.array([y])) >= 0.25 + g[0] * (y - 0.5) - 1e-12
