"""
异常定义

所有库内错误都继承自 GrowthLiftError。参数类错误同时继承 ValueError，
调用方可以像处理普通参数错误一样捕获它们。
"""

from typing import Optional


class GrowthLiftError(Exception):
    """growthlift 异常基类"""


class ParameterError(GrowthLiftError, ValueError):
    """
    参数错误

    Attributes:
        field: 出错的参数名
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"参数 {field} 无效: {message}")


class CapabilityError(GrowthLiftError):
    """问题实例缺少求解器所需的能力（如近端算子）"""


class StateError(GrowthLiftError):
    """对象状态不满足操作前提（如缺少增长证书）"""


class NumericalError(GrowthLiftError, ArithmeticError):
    """
    数值求解未收敛

    Attributes:
        residual: 放弃时的残差
    """

    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (残差 {residual:.3e})"
        super().__init__(message)


class OracleInconsistencyError(GrowthLiftError):
    """预言机返回值与凸性或已知最优值矛盾"""
