"""
单元测试 - 速率界

测试各速率界公式的数值、缺失参数处理以及两种抬升变换。
"""

import math

import numpy as np
import pytest

from growthlift import BoundParams, ParameterError, get_bound, lift_general_bound, lift_higher_bound
from growthlift.bounds import BoundRegistry, RateBound


class TestRegistry:
    """速率界注册表测试"""

    def test_list_bounds(self):
        names = BoundRegistry.list_names()
        assert names == sorted(names)
        for name in ("k_prox_quadratic", "k_prox_sharp", "k_prox_general_halving",
                     "k_subgrad_quadratic", "k_subgrad_sharp", "k_bundle_quadratic",
                     "k_bundle_general"):
            assert name in names

    def test_unknown(self):
        with pytest.raises(ParameterError) as excinfo:
            get_bound("k_newton")
        assert excinfo.value.field == "name"

    def test_missing_parameter(self):
        """测试缺少必需字段时报告字段名"""
        with pytest.raises(ParameterError) as excinfo:
            get_bound("k_prox_sharp")(BoundParams(gap0=1.0, rho=0.1))
        assert excinfo.value.field == "alpha"


class TestProxBounds:
    """近端点法速率界测试"""

    def test_quadratic(self):
        """测试 α=2, ρ=1, gap0=1, ε=10⁻³ → log(1000)/log(2)"""
        value = get_bound("k_prox_quadratic")(
            BoundParams(alpha=2.0, rho=1.0, gap0=1.0, epsilon=1e-3)
        )
        assert value == pytest.approx(9.966, abs=1e-3)

    def test_quadratic_already_reached(self):
        value = get_bound("k_prox_quadratic")(
            BoundParams(alpha=2.0, rho=1.0, gap0=1e-3, epsilon=1e-3)
        )
        assert value == 0.0

    def test_sharp(self):
        """测试 gap0=1, ρ=0.1, α=1 → 20"""
        bound = get_bound("k_prox_sharp")
        assert bound(BoundParams(gap0=1.0, rho=0.1, alpha=1.0)) == pytest.approx(20.0)
        assert bound(BoundParams(gap0=0.0, rho=0.1, alpha=1.0)) == 0.0

    def test_general_halving(self):
        """测试 D₀=1, ρ=1, ε=0.1 → 160"""
        value = get_bound("k_prox_general_halving")(BoundParams(dist0=1.0, rho=1.0, epsilon=0.1))
        assert value == pytest.approx(160.0)

    def test_halving_sum_below_closed_form(self):
        """测试分阶段减半求和不超过 16D₀²/(ρε)"""
        params = BoundParams(gap0=1.0, dist0=1.0, rho=1.0, epsilon=0.1)
        summed = get_bound("prox_halving_sum")(params)
        closed = get_bound("k_prox_general_halving")(params)
        # N = 4: 8·(1 + 2 + 4 + 8) = 120
        assert summed == pytest.approx(120.0)
        assert summed <= closed

    def test_quad_from_sharp(self):
        """测试 ρ=1, α=2, gap0=1, ε=10⁻³ → 2·log(1000)"""
        value = get_bound("k_prox_quad_from_sharp")(
            BoundParams(gap0=1.0, rho=1.0, alpha=2.0, epsilon=1e-3)
        )
        assert value == pytest.approx(2.0 * math.log(1000.0))

    def test_general_direct(self):
        params = BoundParams(gap0=1.0, dist0=1.0, rho=0.1, epsilon=0.1)
        assert get_bound("k_prox_general_direct")(params) == pytest.approx(2000.0)


class TestSubgradientBounds:
    """次梯度法速率界测试"""

    def test_quadratic(self):
        """测试 L=1, α=1, D₀=1, ε=10⁻³ → 2000·log(1000)"""
        value = get_bound("k_subgrad_quadratic")(
            BoundParams(L=1.0, alpha=1.0, dist0=1.0, epsilon=1e-3)
        )
        assert value == pytest.approx(2000.0 * math.log(1000.0))
        assert value == pytest.approx(13815.5, abs=0.1)

    def test_sharp(self):
        value = get_bound("k_subgrad_sharp")(
            BoundParams(L=1.0, alpha=1.0, dist0=1.0, epsilon=1e-3)
        )
        assert value == pytest.approx(13.8155, abs=1e-4)

    def test_log_argument_below_one(self):
        """测试 ε ≥ L·D₀ 时为 0"""
        bound = get_bound("k_subgrad_sharp")
        assert bound(BoundParams(L=1.0, alpha=1.0, dist0=1.0, epsilon=1.0)) == 0.0
        assert bound(BoundParams(L=1.0, alpha=1.0, dist0=1.0, epsilon=2.0)) == 0.0


class TestBundleBounds:
    """束方法速率界测试"""

    def setup_method(self):
        self.params = BoundParams(L=1.0, rho=1.0, beta=0.5, alpha=1.0, gap0=1.0, epsilon=1e-2)

    def test_quadratic_by_hand(self):
        """测试化简形式与逐项手算一致"""
        # ᾱ = 1, ε_stop = 0.01
        null_steps = 8.0 / (0.25 * 0.01)
        expected = (
            null_steps * math.log(1.0 / 0.02)
            + math.log(1.0 / 0.005) * (null_steps / 0.5 * math.log(9.0 / 0.5) + 4.0)
            + 2.0
        )
        value = get_bound("k_bundle_quadratic")(self.params)
        assert value == pytest.approx(expected, rel=1e-12)

    def test_beta_pole(self):
        """测试 β → 1 时界发散"""
        bound = get_bound("k_bundle_quadratic")
        values = [bound(self.params.with_values(beta=b)) for b in (0.9, 0.99, 0.999)]
        assert values[0] < values[1] < values[2]
        assert values[2] > 1e3 * values[0]

    def test_general_uses_distance(self):
        """测试一般情形取 α = ε/D²"""
        params = BoundParams(L=1.0, rho=1.0, beta=0.5, D=2.0, gap0=1.0, epsilon=1e-2)
        general = get_bound("k_bundle_general")(params)
        quadratic = get_bound("k_bundle_quadratic")(
            params.with_values(alpha=1e-2 / 4.0)
        )
        assert general == pytest.approx(quadratic, rel=1e-12)

    def test_full_form_positive(self):
        """测试含 η₀ 与 M 的原始形式为正且有限"""
        value = get_bound("k_bundle_full")(self.params)
        assert math.isfinite(value)
        assert value > 0.0
        with_measured = get_bound("k_bundle_full")(
            self.params.with_values(f0=1.0, eta0=0.5, M=2.0)
        )
        assert math.isfinite(with_measured)


class TestLiftGeneralBound:
    """一般情形抬升测试"""

    def test_prox_sharp(self):
        """测试 k_prox_sharp 经抬升后为 2·gap0·D²/(ρε²)"""
        lifted = lift_general_bound(get_bound("k_prox_sharp"), p=1)
        assert "alpha" not in lifted.required
        assert "D" in lifted.required
        value = lifted(BoundParams(gap0=1.0, rho=0.1, epsilon=0.1, D=1.0))
        assert value == pytest.approx(2000.0)

    def test_random_tuples_match_direct_formula(self):
        """测试随机参数下与直接公式一致"""
        lifted = lift_general_bound(get_bound("k_prox_sharp"))
        direct = get_bound("k_prox_general_direct")
        rng = np.random.default_rng(0)
        for _ in range(20):
            gap0, D, rho, eps = rng.uniform(0.1, 10.0, 4)
            params = BoundParams(gap0=gap0, dist0=D, D=D, rho=rho, epsilon=eps)
            assert lifted(params) == pytest.approx(direct(params), rel=1e-12)

    def test_subgrad_sharp(self):
        """测试 k_subgrad_sharp 经抬升后为 (2L²D²/ε²)·log(LD₀/ε)"""
        lifted = lift_general_bound(get_bound("k_subgrad_sharp"), p=1)
        params = BoundParams(L=2.0, dist0=1.5, D=1.5, epsilon=0.01)
        assert lifted(params) == pytest.approx(get_bound("k_subgrad_general")(params), rel=1e-12)

    def test_exponent_mismatch(self):
        with pytest.raises(ParameterError):
            lift_general_bound(get_bound("k_prox_sharp"), p=2)

    def test_growth_free_base_unchanged(self):
        """测试不依赖 α 的界经抬升后不变"""
        base = get_bound("k_prox_general_halving")
        lifted = lift_general_bound(base, p=1)
        params = BoundParams(dist0=1.0, rho=1.0, epsilon=0.1, D=3.0)
        assert lifted(params) == base(params)


class TestLiftHigherBound:
    """高阶增长抬升测试"""

    def test_prox_sharp_to_quadratic(self):
        """测试 p=1, q=2 时为 2·gap0/(ραε)"""
        lifted = lift_higher_bound(get_bound("k_prox_sharp"), q=2)
        direct = get_bound("k_prox_quad_direct")
        params = BoundParams(gap0=1.5, rho=0.3, alpha=2.0, epsilon=1e-3)
        assert lifted(params) == pytest.approx(direct(params), rel=1e-12)

    def test_subgrad_sharp_to_quadratic(self):
        """测试 p=1, q=2 时为 (2L²/(αε))·log(LD₀/ε)"""
        lifted = lift_higher_bound(get_bound("k_subgrad_sharp"), q=2)
        params = BoundParams(L=1.0, alpha=0.5, dist0=2.0, epsilon=1e-3)
        expected = get_bound("k_subgrad_quad_from_sharp")(params)
        assert lifted(params) == pytest.approx(expected, rel=1e-12)

    def test_p_not_below_q(self):
        with pytest.raises(ParameterError):
            lift_higher_bound(get_bound("k_prox_sharp"), q=1)

    def test_eps_equals_alpha(self):
        """测试 ε = α 时抬升后的系数等于 α"""
        base = get_bound("k_prox_sharp")
        lifted = lift_higher_bound(base, q=3, p=1)
        params = BoundParams(gap0=1.0, rho=1.0, alpha=0.7, epsilon=0.7)
        assert lifted(params) == pytest.approx(base(params), rel=1e-12)

    def test_is_rate_bound(self):
        lifted = lift_higher_bound(get_bound("k_prox_sharp"), q=2)
        assert isinstance(lifted, RateBound)
        assert lifted.name.startswith("lift_higher(k_prox_sharp")
