"""
问题实例基类

提供预言机抽象（函数值、次梯度、可选近端算子）与内置问题注册表。
所有具体问题都继承自 BaseProblem，并通过 ProblemRegistry 注册构造器。
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, List, Optional, Tuple, Type
import logging

import numpy as np

from .exceptions import CapabilityError, ParameterError
from .models import GrowthCertificate, ProblemKind, ProblemSpec, as_point, pydantic_error_field


logger = logging.getLogger(__name__)


# 默认关注区域半径，用于由构造计算 Lipschitz 常数
DEFAULT_RADIUS = 10.0


class BaseProblem(ABC):
    """
    凸问题预言机基类

    子类需要实现:
    - value: 函数值 F(x)
    - subgradient: ∂F(x) 中的一个元素

    可选覆盖:
    - prox: 近端算子 argmin F(·) + (1/2ρ)‖· − x‖²
    - profile_value / profile_slope: 径向问题的一维轮廓

    实例构造后不可变，预言机是输入的纯函数，可以被多线程并发调用。
    """

    def __init__(
        self,
        n: int,
        x_star: np.ndarray,
        f_star: float,
        lipschitz: float,
        growth: Optional[GrowthCertificate] = None,
        radius: float = DEFAULT_RADIUS,
        name: str = "",
    ):
        if n < 1:
            raise ParameterError("n", "维度必须 ≥ 1")
        if lipschitz <= 0:
            raise ParameterError("lipschitz", "必须为正")
        self.n = n
        self.x_star = as_point(x_star, n, field="x_star")
        self.x_star.setflags(write=False)
        self.f_star = float(f_star)
        self.lipschitz = float(lipschitz)
        self.growth = growth
        self.radius = float(radius)
        self.name = name or type(self).__name__

    def __repr__(self) -> str:
        return f"{self.name}(n={self.n}, f_star={self.f_star}, growth={self.growth})"

    @abstractmethod
    def value(self, x: np.ndarray) -> float:
        """函数值 F(x)"""
        pass

    @abstractmethod
    def subgradient(self, x: np.ndarray) -> np.ndarray:
        """
        次梯度预言机

        Returns:
            np.ndarray: ∂F(x) 中确定性选取的一个元素
        """
        pass

    @property
    def has_prox(self) -> bool:
        return type(self).prox is not BaseProblem.prox

    def prox(self, x: np.ndarray, rho: float) -> np.ndarray:
        """
        近端算子 prox_{ρ,F}(x)

        Raises:
            CapabilityError: 问题不提供近端算子
        """
        raise CapabilityError(f"{self.name} 不提供近端算子")

    # ==================== 径向结构 ====================

    @property
    def is_radial(self) -> bool:
        """F(x) = F* + φ(‖x − x*‖) 形式时为 True"""
        return False

    def profile_value(self, r: float) -> float:
        """径向轮廓 φ(r)"""
        raise CapabilityError(f"{self.name} 不是径向问题")

    def profile_slope(self, r: float) -> float:
        """径向轮廓的右导数 φ'₊(r)"""
        raise CapabilityError(f"{self.name} 不是径向问题")

    # ==================== 辅助方法 ====================

    def check_point(self, x: Any, field: str = "x") -> np.ndarray:
        """转换并校验输入点的维度与有限性"""
        return as_point(x, self.n, field=field)

    def evaluate(self, x: Any) -> Tuple[float, np.ndarray]:
        """
        同时返回函数值与次梯度

        Raises:
            ParameterError: 维度不符
        """
        point = self.check_point(x)
        return self.value(point), self.subgradient(point)

    def distance(self, x: np.ndarray) -> float:
        """‖x − x*‖"""
        return float(np.linalg.norm(x - self.x_star))

    def gap(self, value: float) -> float:
        """目标差 F(x) − F*，舍入造成的微小负值截断为 0"""
        return max(value - self.f_star, 0.0)


class ProblemBuilder(ABC):
    """
    内置问题构造器基类

    子类声明 PARAMS 参数模型并实现 build。
    """

    # pydantic 参数模型，子类覆盖
    PARAMS: Type[Any]

    @classmethod
    def parse_params(cls, params: Dict[str, Any]) -> Any:
        """校验参数，出错时报告出错字段"""
        try:
            return cls.PARAMS(**params)
        except ParameterError:
            raise
        except ValueError as e:
            field = pydantic_error_field(e)
            raise ParameterError(f"params.{field}", str(e).splitlines()[-1].strip())

    @classmethod
    @abstractmethod
    def build(cls, n: int, params: Any, rng: np.random.Generator) -> BaseProblem:
        """根据已校验的参数构造问题实例"""
        pass


class ProblemRegistry:
    """
    内置问题注册表

    用于管理各类内置问题的构造器。
    """

    _registry: Dict[ProblemKind, Type[ProblemBuilder]] = {}

    @classmethod
    def register(cls, kind: ProblemKind) -> Callable:
        """
        注册构造器的装饰器

        Usage:
            @ProblemRegistry.register(ProblemKind.SHARP_NORM)
            class SharpNormBuilder(ProblemBuilder):
                ...
        """
        def decorator(builder_class: Type[ProblemBuilder]) -> Type[ProblemBuilder]:
            cls._registry[kind] = builder_class
            return builder_class
        return decorator

    @classmethod
    def get(cls, kind: ProblemKind) -> Type[ProblemBuilder]:
        """
        获取构造器

        Raises:
            ParameterError: 不支持的问题类型
        """
        if kind not in cls._registry:
            raise ParameterError(
                "kind",
                f"不支持的问题类型: {kind}. 支持的类型: {[k.value for k in cls._registry]}",
            )
        return cls._registry[kind]

    @classmethod
    def list_kinds(cls) -> List[ProblemKind]:
        """获取所有已注册的问题类型"""
        return list(cls._registry.keys())


def make_builtin(
    kind: Any,
    n: int,
    params: Optional[Dict[str, Any]] = None,
    seed: int = 0,
) -> BaseProblem:
    """
    便捷函数：构造内置问题

    Args:
        kind: 问题类型（枚举或字符串）
        n: 维度
        params: 该类型的参数
        seed: 随机种子（仅随机构造的问题使用）

    Returns:
        BaseProblem: 带有 x*、F*、增长证书和 L 的问题实例

    Raises:
        ParameterError: 参数无效，field 指明出错字段
    """
    try:
        kind = ProblemKind(kind)
    except ValueError:
        raise ParameterError("kind", f"未知问题类型 {kind!r}")
    if n < 1:
        raise ParameterError("n", "维度必须 ≥ 1")

    builder = ProblemRegistry.get(kind)
    parsed = builder.parse_params(params or {})
    problem = builder.build(n, parsed, np.random.default_rng(seed))
    logger.debug(f"[{kind.value}] 构造问题 n={n} seed={seed}: {problem!r}")
    return problem


def from_spec(spec: ProblemSpec) -> BaseProblem:
    """便捷函数：由问题规格构造实例"""
    return make_builtin(spec.kind, spec.n, spec.params, spec.seed)


def evaluate(problem: BaseProblem, x: Any) -> Tuple[float, np.ndarray]:
    """
    便捷函数：计算 (F(x), g)，g ∈ ∂F(x)

    Raises:
        ParameterError: 维度不符
    """
    return problem.evaluate(x)
