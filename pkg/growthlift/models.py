"""
growthlift - 统一数据模型

定义问题规格、求解器配置、割平面、迭代轨迹以及检查报告等数据结构。
所有模型都基于 pydantic，字段约束直接表达各参数的取值范围。

使用示例:
    from growthlift import ProblemSpec, SolverConfig

    spec = ProblemSpec(kind="sharp_norm", n=1, params={"alpha": 1.0})
    config = SolverConfig(rho=0.1, target_eps=1e-6)
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union
import json
import math

import numpy as np
from pydantic import BaseModel, Field, validator

from .exceptions import ParameterError


class ProblemKind(str, Enum):
    """
    内置测试问题类型

    - SHARP_NORM: α‖x−x*‖，p=1 的尖锐增长
    - QUADRATIC_NORM: α‖x−x*‖²，二次增长
    - HOLDER_NORM: α‖x−x*‖ᵖ，一般 Hölder 增长
    - MAX_AFFINE: 有限个仿射函数的最大值，构造时内嵌尖锐性
    - LIFTED_HINGE: 带平坦区的铰链函数经下界抬升后的辅助函数
    """
    SHARP_NORM = "sharp_norm"
    QUADRATIC_NORM = "quadratic_norm"
    HOLDER_NORM = "holder_norm"
    MAX_AFFINE = "max_affine"
    LIFTED_HINGE = "lifted_hinge"

    @classmethod
    def list_all(cls) -> List[str]:
        """获取所有内置问题类型"""
        return [k.value for k in cls]


class SolverKind(str, Enum):
    """求解方法"""
    PROX = "prox"
    POLYAK = "polyak"
    BUNDLE_MC = "bundle_mc"
    BUNDLE_AGG = "bundle_agg"

    @classmethod
    def from_cli(cls, name: str) -> "SolverKind":
        """命令行写法 bundle-mc / bundle-agg 转换为枚举"""
        return cls(name.replace("-", "_"))

    @property
    def is_bundle(self) -> bool:
        return self in (SolverKind.BUNDLE_MC, SolverKind.BUNDLE_AGG)


class StepKind(str, Enum):
    """迭代步类型，START 标记初始点"""
    START = "start"
    PROX = "prox"
    SUBGRAD = "subgrad"
    DESCENT = "descent"
    NULL = "null"


class TerminationReason(str, Enum):
    """终止原因"""
    EPS_REACHED = "eps_reached"
    EPS_STOP_TRIGGERED = "eps_stop_triggered"
    MAX_ITER = "max_iter"


# ==================== 工具函数 ====================

def as_point(values: Any, n: Optional[int] = None, field: str = "x") -> np.ndarray:
    """
    转换为有限实向量

    Args:
        values: 标量、列表或数组
        n: 期望维度，None 表示不检查
        field: 出错时报告的参数名

    Returns:
        np.ndarray: float64 一维数组（新拷贝）

    Raises:
        ParameterError: 维度不符或包含 NaN/Inf
    """
    point = np.array(values, dtype=np.float64).reshape(-1)
    if point.size == 0:
        raise ParameterError(field, "维度必须 ≥ 1")
    if n is not None and point.size != n:
        raise ParameterError(field, f"维度 {point.size} 与问题维度 {n} 不一致")
    if not np.all(np.isfinite(point)):
        raise ParameterError(field, "包含 NaN 或 Inf")
    return point


def parse_point(text: str, field: str = "x0") -> np.ndarray:
    """解析逗号分隔的坐标字符串，如 "1,0.5" """
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ParameterError(field, f"无法解析坐标 {text!r}: {e}")
    return as_point(values, field=field)


# ==================== 问题相关模型 ====================

class GrowthCertificate(BaseModel):
    """
    Hölder 增长证书: F(x) ≥ F* + α‖x−x*‖ᵖ

    p=1 为尖锐增长，p=2 为二次增长。
    """
    p: float = Field(..., ge=1, description="增长指数")
    alpha: float = Field(..., gt=0, description="增长系数")

    def floor(self, dist: float) -> float:
        """增长下界 α·distᵖ（不含 F*）"""
        return self.alpha * dist ** self.p


class ProblemSpec(BaseModel):
    """
    问题规格文件 {kind, n, params, seed}

    to_json 输出规范格式（键排序、两空格缩进、末尾换行），
    规范格式的文本经 from_json/to_json 往返后逐字节不变。
    """
    kind: ProblemKind
    n: int = Field(..., ge=1, description="维度")
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = Field(default=0, description="随机种子")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "n": self.n,
            "params": self.params,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ProblemSpec":
        return cls(**data)

    @classmethod
    def from_json(cls, json_str: str) -> "ProblemSpec":
        return cls.from_dict(json.loads(json_str))


# ==================== 求解器相关模型 ====================

class SolverConfig(BaseModel):
    """
    求解器配置

    字段说明:
    - rho: 近端步长 ρ（近端点法、束方法）；Polyak 方法不使用
    - beta: 束方法下降参数 β ∈ (0,1)
    - eps_stop: 束方法停止准则 ε_stop，0 表示从不触发
    - max_iter: 最大迭代次数
    - target_eps: 轨迹截断精度，首次 gap ≤ target_eps 时终止
    """
    rho: float = Field(default=1.0, gt=0)
    beta: float = Field(default=0.5, gt=0, lt=1)
    eps_stop: float = Field(default=0.0, ge=0)
    max_iter: int = Field(default=1000, ge=1)
    target_eps: float = Field(default=1e-6, gt=0)

    class Config:
        extra = "forbid"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rho": self.rho,
            "beta": self.beta,
            "eps_stop": self.eps_stop,
            "max_iter": self.max_iter,
            "target_eps": self.target_eps,
        }


class AffinePlane(BaseModel):
    """仿射函数 ℓ(x) = intercept + ⟨gradient, x⟩"""
    gradient: np.ndarray
    intercept: float

    class Config:
        arbitrary_types_allowed = True

    @validator("gradient", pre=True)
    def validate_gradient(cls, v: Any) -> np.ndarray:
        return as_point(v, field="gradient")

    def value(self, x: np.ndarray) -> float:
        return float(self.intercept + self.gradient @ x)

    def combine(self, other: "AffinePlane", theta: float) -> "AffinePlane":
        """凸组合 θ·self + (1−θ)·other"""
        return AffinePlane(
            gradient=theta * self.gradient + (1.0 - theta) * other.gradient,
            intercept=theta * self.intercept + (1.0 - theta) * other.intercept,
        )


class Cut(BaseModel):
    """
    割平面 ℓ_j(x) = F(z_j) + ⟨g_j, x − z_j⟩

    由凸性，ℓ_j 处处不超过 F。
    """
    z: np.ndarray
    fz: float
    g: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @validator("z", "g", pre=True)
    def validate_vector(cls, v: Any) -> np.ndarray:
        return as_point(v, field="cut")

    @property
    def gradient(self) -> np.ndarray:
        return self.g

    def value(self, x: np.ndarray) -> float:
        return float(self.fz + self.g @ (x - self.z))

    def as_plane(self) -> AffinePlane:
        return AffinePlane(gradient=self.g, intercept=self.fz - float(self.g @ self.z))


# 割平面与仿射面都提供 gradient / value(x)
Plane = Union[Cut, AffinePlane]


class TraceRecord(BaseModel):
    """
    单次迭代记录

    query 为决定本条记录的新预言机查询点:
    近端点法为 x_k 自身，Polyak 方法为 x_{k−1}，束方法为 z_k。
    """
    k: int
    step_kind: StepKind
    x: np.ndarray
    z: Optional[np.ndarray] = None
    value: float
    gap: float
    dist: float
    z_dist: Optional[float] = None
    z_value: Optional[float] = None
    stepsize: Optional[float] = None
    model_gap: Optional[float] = None
    grad_norm: Optional[float] = None
    query: Optional[np.ndarray] = None
    planes: Optional[List[AffinePlane]] = None
    weights: Optional[np.ndarray] = None
    aggregate_residual: Optional[float] = None
    null_step_m: Optional[float] = None

    class Config:
        arbitrary_types_allowed = True
        protected_namespaces = ()

    def csv_row(self) -> List[str]:
        """CSV 行: k,step_kind,value,gap,dist,stepsize,model_gap"""
        return [
            str(self.k),
            self.step_kind.value,
            repr(self.value),
            repr(self.gap),
            repr(self.dist),
            "" if self.stepsize is None else repr(self.stepsize),
            "" if self.model_gap is None else repr(self.model_gap),
        ]


CSV_COLUMNS = ["k", "step_kind", "value", "gap", "dist", "stepsize", "model_gap"]


class Trace(BaseModel):
    """
    求解器运行轨迹

    records[k] 对应第 k 次迭代后的状态，records[0] 为初始点。
    """
    method: SolverKind
    records: List[TraceRecord] = Field(default_factory=list)
    termination: Optional[TerminationReason] = None
    x_star: np.ndarray
    f_star: float
    eta0: Optional[float] = None

    class Config:
        arbitrary_types_allowed = True

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    @property
    def x0(self) -> np.ndarray:
        return self.records[0].x

    def iterates(self) -> np.ndarray:
        """所有 x_k 组成的矩阵"""
        return np.array([r.x for r in self.records])

    def first_eps_index(self, epsilon: float) -> Optional[int]:
        """首个 ε-极小点 x_k 的下标，未达到时返回 None"""
        for record in self.records:
            if record.gap <= epsilon:
                return record.k
        return None

    def max_dist(self) -> float:
        """max_k ‖x_k − x*‖"""
        return max(r.dist for r in self.records)

    def max_query_dist(self) -> float:
        """束方法取 max_k ‖z_k − x*‖，其余方法取 max_k ‖x_k − x*‖"""
        if self.method.is_bundle:
            return max(r.z_dist for r in self.records if r.z_dist is not None)
        return self.max_dist()

    def sup_grad_norm(self) -> float:
        """轨迹中用到的次梯度范数上确界 L = sup ‖g_k‖"""
        norms = [r.grad_norm for r in self.records if r.grad_norm is not None]
        return max(norms) if norms else 0.0

    def measured_m(self) -> Optional[float]:
        """零步常数 M 的实测值 max ‖g_{k+1} − ρ(z_{k+1} − x_k)‖²/ρ"""
        values = [r.null_step_m for r in self.records if r.null_step_m is not None]
        return max(values) if values else None

    def csv_rows(self) -> List[List[str]]:
        return [CSV_COLUMNS] + [r.csv_row() for r in self.records]

    def summary(self) -> Dict[str, Any]:
        return {
            "method": self.method.value,
            "iterations": self.final.k,
            "termination": self.termination.value if self.termination else None,
            "final_gap": self.final.gap,
            "final_dist": self.final.dist,
        }


# ==================== 速率界参数 ====================

class BoundParams(BaseModel):
    """
    速率界参数记录

    字段按公式需要选填，缺失字段在求值时报错。
    alpha_bar = min{1, α/ρ} 每次现算，从不存储。
    """
    dist0: Optional[float] = Field(default=None, ge=0, description="‖x0 − x*‖")
    gap0: Optional[float] = Field(default=None, ge=0, description="F(x0) − F*")
    f0: Optional[float] = Field(default=None, description="F(x0)")
    rho: Optional[float] = Field(default=None, gt=0)
    beta: Optional[float] = Field(default=None, gt=0, lt=1)
    L: Optional[float] = Field(default=None, gt=0, description="次梯度范数上界")
    alpha: Optional[float] = Field(default=None, gt=0)
    p: Optional[float] = Field(default=None, ge=1)
    q: Optional[float] = Field(default=None, ge=1)
    epsilon: Optional[float] = Field(default=None, gt=0)
    D: Optional[float] = Field(default=None, gt=0, description="(A2) 距离常数")
    eta0: Optional[float] = Field(default=None, description="束方法 η₀")
    M: Optional[float] = Field(default=None, gt=0, description="束方法零步常数")

    class Config:
        extra = "forbid"

    @property
    def alpha_bar(self) -> float:
        self.require("alpha", "rho")
        return min(1.0, self.alpha / self.rho)

    def require(self, *names: str) -> None:
        """检查字段已设置"""
        for name in names:
            if getattr(self, name) is None:
                raise ParameterError(name, "该速率界需要此参数")

    def with_values(self, **updates: Any) -> "BoundParams":
        """返回替换部分字段后的副本"""
        data = self.to_dict()
        data.update(updates)
        return BoundParams(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            name: getattr(self, name)
            for name in (
                "dist0", "gap0", "f0", "rho", "beta", "L", "alpha",
                "p", "q", "epsilon", "D", "eta0", "M",
            )
            if getattr(self, name) is not None
        }


# ==================== 实验与报告 ====================

class CheckReport(BaseModel):
    """
    不变量检查结果

    passed 为 False 时 residual 必然超过 tolerance。
    location 为最差残差所在的迭代下标。
    """
    name: str
    passed: bool
    residual: float = 0.0
    tolerance: float = 0.0
    location: Optional[int] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "residual": _json_float(self.residual),
            "tolerance": self.tolerance,
            "location": self.location,
            "detail": self.detail,
        }


class ExperimentSpec(BaseModel):
    """
    实验规格

    eps_list 必须严格递减且全为正；checks 为空时使用该方法的默认检查集。
    """
    problem: ProblemSpec
    solver: SolverKind
    config: SolverConfig = Field(default_factory=SolverConfig)
    x0: Optional[List[float]] = None
    eps_list: List[float] = Field(default_factory=lambda: [1e-2, 1e-4, 1e-6])
    checks: List[str] = Field(default_factory=list)

    @validator("eps_list")
    def validate_eps_list(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("eps_list 不能为空")
        if any(e <= 0 for e in v):
            raise ValueError("eps_list 必须全部为正")
        if any(a <= b for a, b in zip(v, v[1:])):
            raise ValueError("eps_list 必须严格递减")
        return v

    @classmethod
    def from_json(cls, json_str: str) -> "ExperimentSpec":
        return cls(**json.loads(json_str))


def _json_float(value: float) -> Union[float, str]:
    """JSON 不支持 inf/nan，转为字符串"""
    if math.isfinite(value):
        return value
    return repr(value)


def pydantic_error_field(error: Exception) -> str:
    """从 pydantic ValidationError 中提取首个出错字段名"""
    errors = getattr(error, "errors", None)
    if callable(errors):
        try:
            loc: Sequence[Any] = errors()[0].get("loc", ())
            return ".".join(str(part) for part in loc) or "unknown"
        except (IndexError, AttributeError, TypeError):
            pass
    return "unknown"
