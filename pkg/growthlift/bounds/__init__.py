"""
迭代次数上界

每个速率界都是 BoundParams → 实数 的纯函数，按名称注册在 BoundRegistry 中。
lift_general_bound / lift_higher_bound 把依赖增长系数 α 的界变换为一般情形
或高阶增长情形下的界。

使用示例:
    from growthlift.bounds import get_bound, lift_general_bound
    from growthlift.models import BoundParams

    sharp = get_bound("k_prox_sharp")
    sharp(BoundParams(gap0=1.0, rho=0.1, alpha=1.0))           # 20.0
    lifted = lift_general_bound(sharp, p=1)
    lifted(BoundParams(gap0=1.0, rho=0.1, epsilon=0.1, D=1.0))  # 2000.0
"""

from typing import Callable, Dict, Iterable, List, Optional
import logging
import math

from ..exceptions import ParameterError
from ..models import BoundParams


logger = logging.getLogger(__name__)


def _log_plus(x: float) -> float:
    """ln(x)，x ≤ 1 时取 0（目标在第 0 步已达到）"""
    return math.log(x) if x > 1.0 else 0.0


class RateBound:
    """
    命名速率界 K(x₀, ε, α)

    Attributes:
        name: 界的名称
        required: 求值所需的 BoundParams 字段
        growth_exponent: 该界假设的增长指数 p，不依赖增长时为 None
    """

    def __init__(
        self,
        name: str,
        formula: Callable[[BoundParams], float],
        required: Iterable[str],
        growth_exponent: Optional[float] = None,
        description: str = "",
    ):
        self.name = name
        self.formula = formula
        self.required = tuple(required)
        self.growth_exponent = growth_exponent
        self.description = description

    def __repr__(self) -> str:
        return f"RateBound({self.name!r}, required={self.required})"

    def __call__(self, params: BoundParams) -> float:
        """
        求值

        Raises:
            ParameterError: 缺少必需字段
        """
        params.require(*self.required)
        return float(self.formula(params))

    evaluate = __call__


class BoundRegistry:
    """速率界注册表"""

    _registry: Dict[str, RateBound] = {}

    @classmethod
    def register(
        cls,
        name: str,
        required: Iterable[str],
        growth_exponent: Optional[float] = None,
    ) -> Callable[[Callable[[BoundParams], float]], RateBound]:
        """
        注册速率界公式的装饰器，被装饰的函数替换为 RateBound 实例

        Usage:
            @BoundRegistry.register("k_prox_sharp", ("gap0", "rho", "alpha"), growth_exponent=1)
            def k_prox_sharp(params: BoundParams) -> float:
                ...
        """
        def decorator(formula: Callable[[BoundParams], float]) -> RateBound:
            summary = (formula.__doc__ or "").strip().split("\n")[0]
            bound = RateBound(name, formula, required, growth_exponent, description=summary)
            cls._registry[name] = bound
            return bound
        return decorator

    @classmethod
    def get(cls, name: str) -> RateBound:
        """
        Raises:
            ParameterError: 未知的界名称
        """
        if name not in cls._registry:
            raise ParameterError("name", f"未知速率界 {name!r}. 可用: {sorted(cls._registry)}")
        return cls._registry[name]

    @classmethod
    def list_names(cls) -> List[str]:
        return sorted(cls._registry)


# ==================== 近端点法 ====================

@BoundRegistry.register("k_prox_quadratic", ("alpha", "rho", "epsilon", "gap0"), growth_exponent=2)
def k_prox_quadratic(params: BoundParams) -> float:
    """二次增长下近端点法: log(gap0/ε)/log(1 + αρ/2)"""
    if params.gap0 <= params.epsilon:
        return 0.0
    return math.log(params.gap0 / params.epsilon) / math.log1p(params.alpha * params.rho / 2.0)


@BoundRegistry.register("k_prox_sharp", ("gap0", "rho", "alpha"), growth_exponent=1)
def k_prox_sharp(params: BoundParams) -> float:
    """尖锐增长下近端点法: 2·gap0/(ρα²)"""
    return 2.0 * params.gap0 / (params.rho * params.alpha ** 2)


@BoundRegistry.register("k_prox_general_halving", ("dist0", "rho", "epsilon"))
def k_prox_general_halving(params: BoundParams) -> float:
    """无增长假设、分阶段减半: 16·D₀²/(ρε)"""
    return 16.0 * params.dist0 ** 2 / (params.rho * params.epsilon)


@BoundRegistry.register("k_prox_quad_from_sharp", ("gap0", "rho", "alpha", "epsilon"))
def k_prox_quad_from_sharp(params: BoundParams) -> float:
    """二次增长经尖锐界高阶抬升并分阶段减半: (4/(ρα))·log(gap0/ε)"""
    return 4.0 / (params.rho * params.alpha) * _log_plus(params.gap0 / params.epsilon)


@BoundRegistry.register("k_prox_general_log", ("dist0", "gap0", "rho", "epsilon"))
def k_prox_general_log(params: BoundParams) -> float:
    """一般情形（经二次界抬升）: log(gap0/ε)/log(1 + ρε/(2D₀²))"""
    if params.gap0 <= params.epsilon:
        return 0.0
    return math.log(params.gap0 / params.epsilon) / math.log1p(
        params.rho * params.epsilon / (2.0 * params.dist0 ** 2)
    )


@BoundRegistry.register("k_prox_general_direct", ("gap0", "dist0", "rho", "epsilon"))
def k_prox_general_direct(params: BoundParams) -> float:
    """一般情形（经尖锐界抬升）: 2·gap0·D₀²/(ρε²)"""
    return 2.0 * params.gap0 * params.dist0 ** 2 / (params.rho * params.epsilon ** 2)


@BoundRegistry.register("k_prox_quad_direct", ("gap0", "rho", "alpha", "epsilon"))
def k_prox_quad_direct(params: BoundParams) -> float:
    """二次增长经尖锐界高阶抬升: 2·gap0/(ραε)"""
    return 2.0 * params.gap0 / (params.rho * params.alpha * params.epsilon)


@BoundRegistry.register("prox_halving_sum", ("gap0", "dist0", "rho", "epsilon"))
def prox_halving_sum(params: BoundParams) -> float:
    """
    分阶段减半的显式求和: (8D₀²/ρ)·Σ_{i<N} 2ⁱ/gap0

    N 为使 gap0/2ᴺ ≤ ε 的最小整数；结果不超过 16D₀²/(ρε)。
    """
    if params.gap0 <= params.epsilon:
        return 0.0
    phases = 0
    while params.gap0 / 2.0 ** phases > params.epsilon:
        phases += 1
    coefficient = 8.0 * params.dist0 ** 2 / params.rho
    return math.fsum(coefficient * 2.0 ** i / params.gap0 for i in range(phases))


# ==================== 次梯度法 ====================

@BoundRegistry.register("k_subgrad_quadratic", ("L", "alpha", "epsilon", "dist0"), growth_exponent=2)
def k_subgrad_quadratic(params: BoundParams) -> float:
    """二次增长下 Polyak 次梯度法: (2L²/(αε))·log(L·D₀/ε)"""
    return (
        2.0 * params.L ** 2 / (params.alpha * params.epsilon)
        * _log_plus(params.L * params.dist0 / params.epsilon)
    )


@BoundRegistry.register("k_subgrad_sharp", ("L", "alpha", "epsilon", "dist0"), growth_exponent=1)
def k_subgrad_sharp(params: BoundParams) -> float:
    """尖锐增长下 Polyak 次梯度法: (2L²/α²)·log(L·D₀/ε)"""
    return 2.0 * params.L ** 2 / params.alpha ** 2 * _log_plus(params.L * params.dist0 / params.epsilon)


@BoundRegistry.register("k_subgrad_general", ("L", "dist0", "epsilon"))
def k_subgrad_general(params: BoundParams) -> float:
    """一般情形: (2L²D₀²/ε²)·log(L·D₀/ε)"""
    return (
        2.0 * params.L ** 2 * params.dist0 ** 2 / params.epsilon ** 2
        * _log_plus(params.L * params.dist0 / params.epsilon)
    )


@BoundRegistry.register("k_subgrad_quad_from_sharp", ("L", "alpha", "epsilon", "dist0"))
def k_subgrad_quad_from_sharp(params: BoundParams) -> float:
    """二次增长经尖锐界高阶抬升: (2L²/(αε))·log(L·D₀/ε)"""
    return (
        2.0 * params.L ** 2 / (params.alpha * params.epsilon)
        * _log_plus(params.L * params.dist0 / params.epsilon)
    )


# ==================== 束方法 ====================

def _bundle_simplified(L: float, rho: float, beta: float, alpha_bar: float,
                       epsilon: float, gap0: float) -> float:
    eps_stop = alpha_bar * epsilon
    null_steps = 8.0 * L ** 2 / (rho * (1.0 - beta) ** 2 * eps_stop)
    first = null_steps * _log_plus(L ** 2 / (2.0 * rho * eps_stop))
    per_phase = (
        null_steps / (beta * alpha_bar) * _log_plus(9.0 / (2.0 * alpha_bar ** 2 * beta ** 2))
        + 2.0 / (alpha_bar * beta)
    )
    return first + _log_plus(gap0 / (beta * eps_stop)) * per_phase + 2.0


@BoundRegistry.register(
    "k_bundle_quadratic", ("alpha", "rho", "beta", "L", "epsilon", "gap0"), growth_exponent=2
)
def k_bundle_quadratic(params: BoundParams) -> float:
    """二次增长下束方法（化简形式，在 ε_stop = ᾱε 处求值）"""
    return _bundle_simplified(
        params.L, params.rho, params.beta, params.alpha_bar, params.epsilon, params.gap0
    )


@BoundRegistry.register("k_bundle_general", ("D", "rho", "beta", "L", "epsilon", "gap0"))
def k_bundle_general(params: BoundParams) -> float:
    """一般情形束方法: k_bundle_quadratic 中取 α = ε/D²"""
    alpha = params.epsilon / params.D ** 2
    alpha_bar = min(1.0, alpha / params.rho)
    return _bundle_simplified(
        params.L, params.rho, params.beta, alpha_bar, params.epsilon, params.gap0
    )


@BoundRegistry.register(
    "k_bundle_full", ("alpha", "rho", "beta", "L", "epsilon", "gap0"), growth_exponent=2
)
def k_bundle_full(params: BoundParams) -> float:
    """
    二次增长下束方法（含 η₀ 与 M 的原始形式，在 ε_s = ᾱε 处求值）

        2M/((1−β)²ε_s)·ln((F(x₀)−η₀)/ε_s)
        + ln(gap0/(βε_s))/ln(1−ᾱβ)·[2M/((1−β)²ε_s)·ln(2ᾱ²β²/9) − 2] + 2

    η₀ 未给出时 F(x₀) − η₀ 取 L²/(2ρ)；M 未给出时取 4L²/ρ。
    ln(1−ᾱβ) 与 ln(2ᾱ²β²/9) 恒为负，不做截断。

    仅供参考：select_bound 与 bound 检查使用化简形式 k_bundle_quadratic，
    本形式不参与对实测轨迹的判定。可用 params_from_trace 的实测 η₀、M 求值。
    """
    alpha_bar = params.alpha_bar
    beta = params.beta
    eps_stop = alpha_bar * params.epsilon
    if params.eta0 is None:
        initial_gap = params.L ** 2 / (2.0 * params.rho)
    else:
        params.require("f0")
        initial_gap = params.f0 - params.eta0
    M = params.M if params.M is not None else 4.0 * params.L ** 2 / params.rho

    null_steps = 2.0 * M / ((1.0 - beta) ** 2 * eps_stop)
    first = null_steps * _log_plus(initial_gap / eps_stop)
    per_phase = null_steps * math.log(2.0 * alpha_bar ** 2 * beta ** 2 / 9.0) - 2.0
    phases = _log_plus(params.gap0 / (beta * eps_stop)) / math.log(1.0 - alpha_bar * beta)
    return first + phases * per_phase + 2.0


# ==================== 抬升变换 ====================

def _resolve_exponent(base: RateBound, p: Optional[float]) -> float:
    if p is None:
        if base.growth_exponent is None:
            raise ParameterError("p", f"{base.name} 未声明增长指数，必须显式给出 p")
        return base.growth_exponent
    if not p >= 1:
        raise ParameterError("p", "必须 ≥ 1")
    if base.growth_exponent is not None and p != base.growth_exponent:
        raise ParameterError(
            "p", f"{base.name} 假设增长指数 {base.growth_exponent}，与 p={p} 不符"
        )
    return p


def lift_general_bound(base: RateBound, p: Optional[float] = None) -> RateBound:
    """
    一般情形的抬升: 以 α := ε/Dᵖ 求值 base

    Args:
        base: 依赖增长系数 α 的速率界
        p: 增长指数，默认取 base 声明的指数

    Returns:
        RateBound: 需要 ε 与 D、不再需要 α 的新界
    """
    exponent = _resolve_exponent(base, p)

    def formula(params: BoundParams) -> float:
        return base(params.with_values(alpha=params.epsilon / params.D ** exponent))

    required = [name for name in base.required if name != "alpha"]
    required += [name for name in ("epsilon", "D") if name not in required]
    return RateBound(
        f"lift_general({base.name}, p={exponent:g})", formula, required,
        description=f"{base.name} 中取 α = ε/D^{exponent:g}",
    )


def lift_higher_bound(base: RateBound, q: float, p: Optional[float] = None) -> RateBound:
    """
    高阶增长的抬升: 以 α := α^{p/q}·ε^{1−p/q} 求值 base

    Args:
        base: 假设 p 阶增长的速率界
        q: 问题实际的增长指数，须 q > p
        p: base 的增长指数，默认取 base 声明的指数

    Raises:
        ParameterError: p ≥ q
    """
    exponent = _resolve_exponent(base, p)
    if not exponent < q:
        raise ParameterError("p", f"需要 p < q，实际 p={exponent:g}, q={q:g}")
    ratio = exponent / q

    def formula(params: BoundParams) -> float:
        params.require("alpha", "epsilon")
        lifted = params.alpha ** ratio * params.epsilon ** (1.0 - ratio)
        return base(params.with_values(alpha=lifted))

    required = list(base.required)
    if "epsilon" not in required:
        required.append("epsilon")
    return RateBound(
        f"lift_higher({base.name}, p={exponent:g}, q={q:g})", formula, required,
        description=f"{base.name} 中取 α = α^(p/q)·ε^(1−p/q)",
    )


# ==================== 便捷函数 ====================

def get_bound(name: str) -> RateBound:
    """便捷函数：按名称获取速率界"""
    return BoundRegistry.get(name)


def list_bounds() -> List[str]:
    """便捷函数：列出所有已注册的速率界"""
    return BoundRegistry.list_names()


__all__ = [
    "RateBound",
    "BoundRegistry",
    "get_bound",
    "list_bounds",
    "lift_general_bound",
    "lift_higher_bound",
    "k_prox_quadratic",
    "k_prox_sharp",
    "k_prox_general_halving",
    "k_prox_quad_from_sharp",
    "k_prox_general_log",
    "k_prox_general_direct",
    "k_prox_quad_direct",
    "prox_halving_sum",
    "k_subgrad_quadratic",
    "k_subgrad_sharp",
    "k_subgrad_general",
    "k_subgrad_quad_from_sharp",
    "k_bundle_quadratic",
    "k_bundle_general",
    "k_bundle_full",
]
