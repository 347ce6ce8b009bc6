"""
内置测试问题与抬升辅助函数

包含:
- SharpNormProblem: α‖x−x*‖（软阈值近端）
- QuadraticNormProblem: α‖x−x*‖²（闭式近端）
- HolderNormProblem: α‖x−x*‖ᵖ（一维二分近端）
- MaxAffineProblem: max_j ℓ_j(x)，坐标方向嵌入 ±α 斜率保证尖锐性
- HingeNormProblem: α·max(0, ‖x−x*‖ − w)，无增长的平坦铰链
- LiftedProblem: G(x) = max{F(x), F* + c‖x−x*‖ᵖ}

lift_general 与 lift_higher 分别构造两个抬升定理证明中的辅助函数。
"""

from typing import Any, List, Optional
import logging
import math

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import bisect

from ..base import DEFAULT_RADIUS, BaseProblem, ProblemBuilder, ProblemRegistry
from ..exceptions import CapabilityError, NumericalError, ParameterError, StateError
from ..models import Cut, GrowthCertificate, ProblemKind, as_point
from ..solvers.subproblems import solve_multicut_subproblem


logger = logging.getLogger(__name__)


# 径向近端一维二分
BISECTION_XTOL = 1e-13
BISECTION_MAX_ITER = 200

# 软阈值余量不超过 αρ 的该比例时取 x*
SOFT_THRESHOLD_SNAP = 1e-12

# 抬升 max_affine 近端的自适应割平面
LIFTED_PROX_TOL = 1e-12
LIFTED_PROX_MAX_ITER = 200


# ==================== 径向问题 ====================

class RadialProblem(BaseProblem):
    """
    径向问题基类: F(x) = F* + φ(‖x − x*‖)

    子类实现 profile_value 与 profile_slope（右导数）。
    x* 处次梯度取零向量。
    """

    @property
    def is_radial(self) -> bool:
        return True

    def profile_subslope(self, r: float) -> float:
        """次梯度预言机使用的径向斜率，默认取右导数"""
        return self.profile_slope(r)

    def value(self, x: np.ndarray) -> float:
        return self.f_star + self.profile_value(self.distance(x))

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        d = x - self.x_star
        r = float(np.linalg.norm(d))
        if r == 0.0:
            return np.zeros(self.n)
        return self.profile_subslope(r) * (d / r)

    def prox(self, x: np.ndarray, rho: float) -> np.ndarray:
        return radial_prox(self, x, rho)


def radial_prox(problem: BaseProblem, x: np.ndarray, rho: float) -> np.ndarray:
    """
    径向问题的近端算子

    沿 x − x* 方向把问题化为一维强凸问题
        min_{t∈[0,r0]} φ(t) + (t − r0)²/(2ρ)
    对最优性条件 φ'₊(t) + (t − r0)/ρ = 0 做二分。

    Args:
        problem: 径向问题（is_radial 为 True）
        x: 近端中心
        rho: 步长 ρ > 0

    Returns:
        np.ndarray: prox_{ρ,F}(x)
    """
    if rho <= 0:
        raise ParameterError("rho", "必须为正")
    d = x - problem.x_star
    r0 = float(np.linalg.norm(d))
    if r0 == 0.0:
        return problem.x_star.copy()

    def optimality(t: float) -> float:
        return problem.profile_slope(t) + (t - r0) / rho

    if optimality(0.0) >= 0.0:
        return problem.x_star.copy()
    if optimality(r0) <= 0.0:
        return x.copy()

    t, info = bisect(
        optimality, 0.0, r0,
        xtol=BISECTION_XTOL, maxiter=BISECTION_MAX_ITER,
        full_output=True, disp=False,
    )
    if not info.converged:
        logger.warning(f"[{problem.name}] 近端二分达到 {BISECTION_MAX_ITER} 次上限, t={t!r}")
    return problem.x_star + (t / r0) * d


class SharpNormProblem(RadialProblem):
    """F(x) = F* + α‖x − x*‖，近端为软阈值"""

    def __init__(self, n: int, alpha: float, x_star: np.ndarray, f_star: float = 0.0,
                 radius: float = DEFAULT_RADIUS):
        self.alpha = alpha
        super().__init__(
            n, x_star, f_star, lipschitz=alpha,
            growth=GrowthCertificate(p=1, alpha=alpha), radius=radius, name="sharp_norm",
        )

    def profile_value(self, r: float) -> float:
        return self.alpha * r

    def profile_slope(self, r: float) -> float:
        return self.alpha

    def prox(self, x: np.ndarray, rho: float) -> np.ndarray:
        if rho <= 0:
            raise ParameterError("rho", "必须为正")
        d = x - self.x_star
        r = float(np.linalg.norm(d))
        shrink = self.alpha * rho
        # 累积舍入使 r 比 αρ 多出几个 ulp 时同样落在 x*
        if r - shrink <= SOFT_THRESHOLD_SNAP * shrink:
            return self.x_star.copy()
        # 一维时 d/r = ±1，结果与逐步减去 αρ 完全一致
        return self.x_star + (d - shrink * (d / r))


class QuadraticNormProblem(RadialProblem):
    """F(x) = F* + α‖x − x*‖²，近端为 x* + (x − x*)/(1 + 2αρ)"""

    def __init__(self, n: int, alpha: float, x_star: np.ndarray, f_star: float = 0.0,
                 radius: float = DEFAULT_RADIUS):
        self.alpha = alpha
        super().__init__(
            n, x_star, f_star, lipschitz=2.0 * alpha * radius,
            growth=GrowthCertificate(p=2, alpha=alpha), radius=radius, name="quadratic_norm",
        )

    def profile_value(self, r: float) -> float:
        return self.alpha * r * r

    def profile_slope(self, r: float) -> float:
        return 2.0 * self.alpha * r

    def value(self, x: np.ndarray) -> float:
        d = x - self.x_star
        return self.f_star + self.alpha * float(d @ d)

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * self.alpha * (x - self.x_star)

    def prox(self, x: np.ndarray, rho: float) -> np.ndarray:
        if rho <= 0:
            raise ParameterError("rho", "必须为正")
        return self.x_star + (x - self.x_star) / (1.0 + 2.0 * self.alpha * rho)


class HolderNormProblem(RadialProblem):
    """F(x) = F* + α‖x − x*‖ᵖ，近端走一维二分"""

    def __init__(self, n: int, alpha: float, p: float, x_star: np.ndarray, f_star: float = 0.0,
                 radius: float = DEFAULT_RADIUS):
        self.alpha = alpha
        self.p = p
        super().__init__(
            n, x_star, f_star, lipschitz=p * alpha * radius ** (p - 1),
            growth=GrowthCertificate(p=p, alpha=alpha), radius=radius, name="holder_norm",
        )

    def profile_value(self, r: float) -> float:
        return self.alpha * r ** self.p

    def profile_slope(self, r: float) -> float:
        return self.p * self.alpha * r ** (self.p - 1)


class HingeNormProblem(RadialProblem):
    """
    F(x) = F* + α·max(0, ‖x − x*‖ − w)

    半径 w 的球内全是极小点，没有 Hölder 增长；x* 取球心。
    """

    def __init__(self, n: int, alpha: float, width: float, x_star: np.ndarray,
                 f_star: float = 0.0, radius: float = DEFAULT_RADIUS):
        self.alpha = alpha
        self.width = width
        super().__init__(n, x_star, f_star, lipschitz=alpha, radius=radius, name="hinge_norm")

    def profile_value(self, r: float) -> float:
        return self.alpha * max(0.0, r - self.width)

    def profile_slope(self, r: float) -> float:
        return self.alpha if r >= self.width else 0.0

    def profile_subslope(self, r: float) -> float:
        # 折点处两段同时活跃，取下标最小的零斜率段
        return self.alpha if r > self.width else 0.0


# ==================== 仿射函数最大值 ====================

class MaxAffineProblem(BaseProblem):
    """
    F(x) = max_j { c_j + ⟨a_j, x − x*⟩ }

    各段以 x* 为锚点存储，c_j = ℓ_j(x*) ≤ F*。
    折点处返回下标最小的活跃段的梯度。
    """

    def __init__(
        self,
        gradients: np.ndarray,
        offsets: np.ndarray,
        x_star: np.ndarray,
        f_star: float,
        growth: Optional[GrowthCertificate] = None,
        radius: float = DEFAULT_RADIUS,
    ):
        gradients = np.array(gradients, dtype=np.float64)
        offsets = np.array(offsets, dtype=np.float64).reshape(-1)
        if gradients.ndim != 2 or gradients.shape[0] != offsets.size:
            raise ParameterError("gradients", "形状必须为 (m, n) 且与 offsets 对应")
        n = gradients.shape[1]
        lipschitz = float(np.max(np.linalg.norm(gradients, axis=1)))
        super().__init__(
            n, x_star, f_star, lipschitz=lipschitz, growth=growth, radius=radius,
            name="max_affine",
        )
        self.gradients = gradients
        self.offsets = offsets
        self.gradients.setflags(write=False)
        self.offsets.setflags(write=False)

    @property
    def m(self) -> int:
        return self.offsets.size

    @property
    def cuts(self) -> List[Cut]:
        """各仿射段，以 x* 为锚点的割平面形式"""
        return [
            Cut(z=self.x_star, fz=float(c), g=a)
            for a, c in zip(self.gradients, self.offsets)
        ]

    def piece_values(self, x: np.ndarray) -> np.ndarray:
        return self.offsets + self.gradients @ (x - self.x_star)

    def value(self, x: np.ndarray) -> float:
        return float(np.max(self.piece_values(x)))

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        return self.gradients[int(np.argmax(self.piece_values(x)))].copy()

    def prox(self, x: np.ndarray, rho: float) -> np.ndarray:
        """近端子问题即全部段构成的多割子问题，权重 1/ρ"""
        if rho <= 0:
            raise ParameterError("rho", "必须为正")
        z, _, _ = solve_multicut_subproblem(self.cuts, x, 1.0 / rho)
        return z


# ==================== 抬升辅助函数 ====================

class LiftedProblem(BaseProblem):
    """
    抬升辅助函数 G(x) = max{F(x), F* + c‖x − x*‖ᵖ}

    base 严格高于下界时 G 的值与次梯度与 base 完全相同；
    相等时同样返回 base 的次梯度。G 自带增长证书 (p, c)。
    """

    def __init__(self, base: BaseProblem, c: float, p: float):
        if not c > 0:
            raise ParameterError("c", "下界系数必须为正")
        if not p >= 1:
            raise ParameterError("p", "下界指数必须 ≥ 1")
        self.base = base
        self.c = float(c)
        self.p = float(p)
        super().__init__(
            base.n, base.x_star, base.f_star,
            lipschitz=max(base.lipschitz, self.c * self.p * base.radius ** (self.p - 1)),
            growth=GrowthCertificate(p=self.p, alpha=self.c),
            radius=base.radius,
            name=f"lifted({base.name})",
        )

    def floor(self, x: np.ndarray) -> float:
        """F* + c‖x − x*‖ᵖ"""
        return self.f_star + self.c * self.distance(x) ** self.p

    def floor_gradient(self, x: np.ndarray) -> np.ndarray:
        d = x - self.x_star
        r = float(np.linalg.norm(d))
        if r == 0.0:
            return np.zeros(self.n)
        return self.c * self.p * r ** (self.p - 1) * (d / r)

    def floor_cut(self, y: np.ndarray) -> Cut:
        """下界在 y 处的线性化"""
        return Cut(z=y, fz=self.floor(y), g=self.floor_gradient(y))

    def base_dominates(self, x: np.ndarray) -> bool:
        """F(x) > 下界(x) 严格成立时 G 在 x 附近与 F 相同"""
        return self.base.value(x) > self.floor(x)

    def value(self, x: np.ndarray) -> float:
        return max(self.base.value(x), self.floor(x))

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        if self.floor(x) > self.base.value(x):
            return self.floor_gradient(x)
        return self.base.subgradient(x)

    # ==================== 径向结构 ====================

    @property
    def is_radial(self) -> bool:
        return self.base.is_radial

    def profile_value(self, r: float) -> float:
        return max(self.base.profile_value(r), self.c * r ** self.p)

    def profile_slope(self, r: float) -> float:
        base_value = self.base.profile_value(r)
        floor_value = self.c * r ** self.p
        base_slope = self.base.profile_slope(r)
        floor_slope = self.c * self.p * r ** (self.p - 1)
        if base_value > floor_value:
            return base_slope
        if floor_value > base_value:
            return floor_slope
        return max(base_slope, floor_slope)

    # ==================== 近端算子 ====================

    @property
    def has_prox(self) -> bool:
        return self.base.has_prox and (
            self.base.is_radial or isinstance(self.base, MaxAffineProblem)
        )

    def prox(self, x: np.ndarray, rho: float) -> np.ndarray:
        """
        先求 base 的近端点 z；若 F(z) 严格高于下界，则 G 在 z 附近等于 F，
        z 同样满足 G 的最优性条件，直接返回。否则径向问题走一维二分，
        max_affine 走自适应线性化下界的割平面子问题。

        Raises:
            CapabilityError: base 既非径向也非 max_affine
        """
        if not self.has_prox:
            raise CapabilityError(f"{self.name} 不提供近端算子")
        z = self.base.prox(x, rho)
        if self.base_dominates(z):
            return z
        if self.is_radial:
            return radial_prox(self, x, rho)
        return self._cutting_plane_prox(x, rho)

    def _cutting_plane_prox(self, x: np.ndarray, rho: float) -> np.ndarray:
        cuts = list(self.base.cuts) + [self.floor_cut(x)]
        residual = math.inf
        for _ in range(LIFTED_PROX_MAX_ITER):
            z, _, model_value = solve_multicut_subproblem(cuts, x, 1.0 / rho)
            true_value = self.value(z)
            residual = true_value - model_value
            if residual <= LIFTED_PROX_TOL * max(1.0, abs(true_value)):
                return z
            cuts.append(self.floor_cut(z))
        raise NumericalError(f"[{self.name}] 抬升近端子问题未收敛", residual=residual)


def lift_general(base: BaseProblem, epsilon: float, D: float, p: float) -> LiftedProblem:
    """
    一般情形的抬升: c = ε/Dᵖ

    Args:
        base: 已知 x*、F* 的问题
        epsilon: 目标精度 ε > 0
        D: 迭代点到 x* 的距离上界 D > 0
        p: 下界指数 p ≥ 1

    Returns:
        LiftedProblem: 增长证书为 (p, ε/Dᵖ)
    """
    if not epsilon > 0:
        raise ParameterError("epsilon", "必须为正")
    if not D > 0:
        raise ParameterError("D", "必须为正")
    if not p >= 1:
        raise ParameterError("p", "必须 ≥ 1")
    return LiftedProblem(base, epsilon / D ** p, p)


def lift_higher(base: BaseProblem, epsilon: float, p: float) -> LiftedProblem:
    """
    高阶增长的抬升: c = α^{p/q}·ε^{1−p/q}

    Args:
        base: 带增长证书 (q, α) 的问题
        epsilon: 目标精度 ε > 0
        p: 下界指数，1 ≤ p < q

    Raises:
        StateError: base 没有增长证书
        ParameterError: p ≥ q 或 ε ≤ 0
    """
    if base.growth is None:
        raise StateError(f"{base.name} 没有增长证书，无法做高阶抬升")
    if not epsilon > 0:
        raise ParameterError("epsilon", "必须为正")
    q = base.growth.p
    if not 1 <= p < q:
        raise ParameterError("p", f"需要 1 ≤ p < q = {q}")
    alpha = base.growth.alpha
    return LiftedProblem(base, alpha ** (p / q) * epsilon ** (1.0 - p / q), p)


# ==================== 构造器 ====================

class RadialParams(BaseModel):
    """径向问题参数"""
    alpha: float = Field(default=1.0, gt=0)
    x_star: Optional[List[float]] = None
    f_star: float = 0.0
    radius: float = Field(default=DEFAULT_RADIUS, gt=0, description="关注区域半径")

    class Config:
        extra = "forbid"


class HolderParams(RadialParams):
    p: float = Field(default=1.5, ge=1)


class LiftedHingeParams(RadialParams):
    width: float = Field(default=1.0, ge=0, description="平坦区半径")
    c: float = Field(default=0.1, gt=0, description="下界系数")
    p: float = Field(default=2.0, ge=1, description="下界指数")


class MaxAffineParams(BaseModel):
    alpha: float = Field(default=1.0, gt=0, description="坐标方向斜率")
    m: Optional[int] = Field(default=None, ge=1, description="仿射段数，默认 2n+2")
    scale: float = Field(default=1.0, gt=0, description="随机段梯度尺度")
    x_star: Optional[List[float]] = None
    f_star: Optional[float] = None
    radius: float = Field(default=DEFAULT_RADIUS, gt=0)

    class Config:
        extra = "forbid"


def _center(n: int, params: Any) -> np.ndarray:
    if params.x_star is None:
        return np.zeros(n)
    return as_point(params.x_star, n, field="params.x_star")


@ProblemRegistry.register(ProblemKind.SHARP_NORM)
class SharpNormBuilder(ProblemBuilder):
    PARAMS = RadialParams

    @classmethod
    def build(cls, n: int, params: Any, rng: np.random.Generator) -> BaseProblem:
        return SharpNormProblem(n, params.alpha, _center(n, params), params.f_star, params.radius)


@ProblemRegistry.register(ProblemKind.QUADRATIC_NORM)
class QuadraticNormBuilder(ProblemBuilder):
    PARAMS = RadialParams

    @classmethod
    def build(cls, n: int, params: Any, rng: np.random.Generator) -> BaseProblem:
        return QuadraticNormProblem(
            n, params.alpha, _center(n, params), params.f_star, params.radius
        )


@ProblemRegistry.register(ProblemKind.HOLDER_NORM)
class HolderNormBuilder(ProblemBuilder):
    PARAMS = HolderParams

    @classmethod
    def build(cls, n: int, params: Any, rng: np.random.Generator) -> BaseProblem:
        return HolderNormProblem(
            n, params.alpha, params.p, _center(n, params), params.f_star, params.radius
        )


@ProblemRegistry.register(ProblemKind.LIFTED_HINGE)
class LiftedHingeBuilder(ProblemBuilder):
    PARAMS = LiftedHingeParams

    @classmethod
    def build(cls, n: int, params: Any, rng: np.random.Generator) -> BaseProblem:
        hinge = HingeNormProblem(
            n, params.alpha, params.width, _center(n, params), params.f_star, params.radius
        )
        return LiftedProblem(hinge, params.c, params.p)


@ProblemRegistry.register(ProblemKind.MAX_AFFINE)
class MaxAffineBuilder(ProblemBuilder):
    """
    随机 max_affine 构造

    前 2n 段为过 (x*, F*) 的 ±α·e_i 方向段，保证 F ≥ F* + α‖x−x*‖∞，
    即欧氏范数下的尖锐证书 (1, α/√n)。其余段在 x* 处严格低于 F*。
    """
    PARAMS = MaxAffineParams

    @classmethod
    def build(cls, n: int, params: Any, rng: np.random.Generator) -> BaseProblem:
        m = params.m if params.m is not None else 2 * n + 2
        if m < 2 * n:
            raise ParameterError("params.m", f"至少需要 2n = {2 * n} 段")

        x_star = (
            as_point(params.x_star, n, field="params.x_star")
            if params.x_star is not None
            else rng.uniform(-1.0, 1.0, n)
        )
        f_star = params.f_star if params.f_star is not None else float(rng.uniform(-1.0, 1.0))

        coordinate = np.zeros((2 * n, n))
        for i in range(n):
            coordinate[2 * i, i] = params.alpha
            coordinate[2 * i + 1, i] = -params.alpha
        extra = rng.normal(size=(m - 2 * n, n)) * params.scale
        shifts = rng.uniform(0.1, 1.0, m - 2 * n)

        gradients = np.vstack([coordinate, extra])
        offsets = np.concatenate([np.full(2 * n, f_star), f_star - shifts])
        growth = GrowthCertificate(p=1, alpha=params.alpha / math.sqrt(n))
        return MaxAffineProblem(gradients, offsets, x_star, f_star, growth, params.radius)


__all__ = [
    "RadialProblem",
    "SharpNormProblem",
    "QuadraticNormProblem",
    "HolderNormProblem",
    "HingeNormProblem",
    "MaxAffineProblem",
    "LiftedProblem",
    "radial_prox",
    "lift_general",
    "lift_higher",
]
