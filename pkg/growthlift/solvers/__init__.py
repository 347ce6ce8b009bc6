"""
一阶求解器

包含:
- ProximalPointSolver: 常步长近端点法
- PolyakSolver: Polyak 步长次梯度法
- MulticutBundleSolver: 多割近端束方法
- AggregateBundleSolver: 割平面聚合的近端束方法

所有求解器输出完整的 Trace，第 k 条记录对应 x_k。
"""

from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, List, Optional, Type
import logging

import numpy as np

from ..base import BaseProblem
from ..exceptions import CapabilityError, OracleInconsistencyError, ParameterError
from ..models import (
    Cut,
    SolverConfig,
    SolverKind,
    StepKind,
    TerminationReason,
    Trace,
    TraceRecord,
)
from .subproblems import solve_multicut_subproblem, solve_two_cut_subproblem


logger = logging.getLogger(__name__)


# ‖g‖ 低于此值且目标差为正时视为预言机不一致
ZERO_SUBGRADIENT_TOL = 1e-14
# 多割方法保留割平面的对偶权重阈值
CUT_RETENTION_TOL = 1e-12


class BaseSolver(ABC):
    """
    求解器基类

    子类需要:
    - 设置 KIND 与 DEFAULT_CHECKS
    - 实现 _iterate 方法
    """

    KIND: SolverKind
    # harness 默认执行的检查项
    DEFAULT_CHECKS: List[str] = ["distance", "bound"]

    def __init__(self, config: Optional[SolverConfig] = None):
        self.config = config or SolverConfig()

    def run(self, problem: BaseProblem, x0: Any) -> Trace:
        """
        从 x0 出发运行求解器

        Raises:
            ParameterError: x0 维度不符
            CapabilityError: 问题缺少所需预言机
        """
        start = problem.check_point(x0, field="x0")
        self.check_capability(problem)
        trace = Trace(method=self.KIND, x_star=problem.x_star.copy(), f_star=problem.f_star)
        self._iterate(problem, start, trace)
        logger.info(
            f"[{self.KIND.value}] {problem.name}: {trace.termination.value}, "
            f"迭代 {trace.final.k} 次, gap={trace.final.gap!r}"
        )
        return trace

    def check_capability(self, problem: BaseProblem) -> None:
        """检查问题是否具备所需预言机，默认只需函数值与次梯度"""
        pass

    @abstractmethod
    def _iterate(self, problem: BaseProblem, x0: np.ndarray, trace: Trace) -> None:
        """执行迭代，把记录与终止原因写入 trace"""
        pass

    def _should_stop(self, trace: Trace, k: int) -> bool:
        if trace.final.gap <= self.config.target_eps:
            trace.termination = TerminationReason.EPS_REACHED
            return True
        if k >= self.config.max_iter:
            trace.termination = TerminationReason.MAX_ITER
            return True
        return False

    @staticmethod
    def _state(problem: BaseProblem, k: int, step_kind: StepKind, x: np.ndarray,
               value: float, **fields: Any) -> TraceRecord:
        return TraceRecord(
            k=k,
            step_kind=step_kind,
            x=x,
            value=value,
            gap=problem.gap(value),
            dist=problem.distance(x),
            **fields,
        )


class SolverRegistry:
    """
    求解器注册表

    用于管理各求解方法的实现类。
    """

    _registry: Dict[SolverKind, Type[BaseSolver]] = {}

    @classmethod
    def register(cls, kind: SolverKind) -> Callable:
        """
        注册求解器的装饰器

        Usage:
            @SolverRegistry.register(SolverKind.PROX)
            class ProximalPointSolver(BaseSolver):
                ...
        """
        def decorator(solver_class: Type[BaseSolver]) -> Type[BaseSolver]:
            solver_class.KIND = kind
            cls._registry[kind] = solver_class
            return solver_class
        return decorator

    @classmethod
    def get(cls, kind: SolverKind) -> Type[BaseSolver]:
        if kind not in cls._registry:
            raise ParameterError("solver", f"不支持的求解方法: {kind}")
        return cls._registry[kind]

    @classmethod
    def list_kinds(cls) -> List[SolverKind]:
        return list(cls._registry.keys())


@SolverRegistry.register(SolverKind.PROX)
class ProximalPointSolver(BaseSolver):
    """
    近端点法 x_{k+1} = prox_{ρ,F}(x_k)

    记录中的 grad_norm 为隐式次梯度 (x_k − x_{k+1})/ρ 的范数。
    """

    DEFAULT_CHECKS = ["distance", "bound", "prox_descent", "prox_optimality"]

    def check_capability(self, problem: BaseProblem) -> None:
        if not problem.has_prox:
            raise CapabilityError(f"{problem.name} 不提供近端算子，无法运行近端点法")

    def _iterate(self, problem: BaseProblem, x0: np.ndarray, trace: Trace) -> None:
        rho = self.config.rho
        x = x0
        trace.records.append(
            self._state(problem, 0, StepKind.START, x, problem.value(x), query=x)
        )
        k = 0
        while not self._should_stop(trace, k):
            k += 1
            x_next = problem.prox(x, rho)
            implicit = float(np.linalg.norm(x - x_next)) / rho
            x = x_next
            trace.records.append(
                self._state(
                    problem, k, StepKind.PROX, x, problem.value(x),
                    stepsize=rho, grad_norm=implicit, query=x,
                )
            )
            logger.debug(f"[prox] k={k} gap={trace.final.gap!r} dist={trace.final.dist!r}")


@SolverRegistry.register(SolverKind.POLYAK)
class PolyakSolver(BaseSolver):
    """
    Polyak 步长次梯度法

        ρ_k = (F(x_k) − F*)/‖g_k‖²,  x_{k+1} = x_k − ρ_k g_k

    第 k 条记录的 grad_norm 与 stepsize 是产生 x_k 的那一步所用的量。
    """

    DEFAULT_CHECKS = ["distance", "bound", "recurrence"]

    def _iterate(self, problem: BaseProblem, x0: np.ndarray, trace: Trace) -> None:
        x = x0
        value = problem.value(x)
        trace.records.append(self._state(problem, 0, StepKind.START, x, value, query=x))
        k = 0
        while not self._should_stop(trace, k):
            g = problem.subgradient(x)
            g_norm = float(np.linalg.norm(g))
            gap = value - problem.f_star
            if g_norm < ZERO_SUBGRADIENT_TOL:
                raise OracleInconsistencyError(
                    f"[polyak] k={k}: 次梯度为零但目标差 {gap!r} > 0"
                )
            step = gap / (g_norm * g_norm)
            query = x
            x = x - step * g
            value = problem.value(x)
            k += 1
            trace.records.append(
                self._state(
                    problem, k, StepKind.SUBGRAD, x, value,
                    stepsize=step, grad_norm=g_norm, query=query,
                )
            )
            logger.debug(f"[polyak] k={k} step={step!r} gap={trace.final.gap!r}")


class BundleSolver(BaseSolver):
    """
    近端束方法公共部分

    第 k 条记录保存 x_k 与 z_k（z_0 = x_0），以及模型 F̃^k 的
    割平面、对偶权重和 model_gap = F(x_k) − F̃^k(z_{k+1})。
    """

    DEFAULT_CHECKS = ["distance", "bound", "model_lower_bound", "incumbent_monotone"]

    def _start(self, problem: BaseProblem, x0: np.ndarray, trace: Trace) -> Cut:
        value = problem.value(x0)
        g = problem.subgradient(x0)
        trace.records.append(
            self._state(
                problem, 0, StepKind.START, x0, value,
                z=x0, z_dist=problem.distance(x0), z_value=value,
                grad_norm=float(np.linalg.norm(g)), query=x0,
            )
        )
        return Cut(z=x0, fz=value, g=g)

    def _step(
        self,
        problem: BaseProblem,
        trace: Trace,
        k: int,
        z: np.ndarray,
        model_value: float,
    ) -> Cut:
        """
        在 z 处查询预言机并执行下降测试，追加第 k+1 条记录

        Returns:
            Cut: z 处的新割平面
        """
        rho = self.config.rho
        current = trace.final
        x, fx = current.x, current.value
        model_gap = fx - model_value
        fz = problem.value(z)
        gz = problem.subgradient(z)

        descent = fz <= fx - self.config.beta * model_gap
        null_step_m = None
        if descent:
            x_next, f_next = z, fz
        else:
            x_next, f_next = x, fx
            null_step_m = float(np.sum((gz - rho * (z - x)) ** 2)) / rho

        if k == 0:
            trace.eta0 = model_value + 0.5 * rho * float(np.sum((trace.x0 - x_next) ** 2))

        trace.records.append(
            self._state(
                problem, k + 1, StepKind.DESCENT if descent else StepKind.NULL,
                x_next, f_next,
                z=z, z_dist=problem.distance(z), z_value=fz, stepsize=rho,
                grad_norm=float(np.linalg.norm(gz)), query=z, null_step_m=null_step_m,
            )
        )
        logger.debug(
            f"[{self.KIND.value}] k={k + 1} {trace.final.step_kind.value} "
            f"model_gap={model_gap!r} gap={trace.final.gap!r}"
        )
        return Cut(z=z, fz=fz, g=gz)

    def _stop_on_model_gap(self, trace: Trace) -> bool:
        if trace.final.model_gap <= self.config.eps_stop:
            trace.termination = TerminationReason.EPS_STOP_TRIGGERED
            return True
        return False


@SolverRegistry.register(SolverKind.BUNDLE_MC)
class MulticutBundleSolver(BundleSolver):
    """
    多割束方法

    保留集合 J_{k+1} = {j ∈ J_k : λ_j > 1e-12} ∪ {k+1}。
    """

    DEFAULT_CHECKS = BundleSolver.DEFAULT_CHECKS + ["subproblem_duals"]

    def _iterate(self, problem: BaseProblem, x0: np.ndarray, trace: Trace) -> None:
        cuts = [self._start(problem, x0, trace)]
        k = 0
        while not self._should_stop(trace, k):
            current = trace.final
            z, weights, model_value = solve_multicut_subproblem(
                cuts, current.x, self.config.rho
            )
            current.model_gap = current.value - model_value
            current.planes = [cut.as_plane() for cut in cuts]
            current.weights = weights
            if self._stop_on_model_gap(trace):
                break

            new_cut = self._step(problem, trace, k, z, model_value)
            cuts = [
                cut for cut, weight in zip(cuts, weights) if weight > CUT_RETENTION_TOL
            ] + [new_cut]
            k += 1


@SolverRegistry.register(SolverKind.BUNDLE_AGG)
class AggregateBundleSolver(BundleSolver):
    """
    割平面聚合束方法

    模型只含最新割平面与聚合面 F̄^k。F̄^0 = −∞ 用 None 表示。
    聚合更新 F̄^{k+1} = θ_k·F̄^k + (1−θ_k)·ℓ_k，θ_k 为两割子问题中聚合面的对偶权重。
    """

    DEFAULT_CHECKS = BundleSolver.DEFAULT_CHECKS + ["aggregation_identity"]

    def _iterate(self, problem: BaseProblem, x0: np.ndarray, trace: Trace) -> None:
        rho = self.config.rho
        newest = self._start(problem, x0, trace)
        aggregate = None
        k = 0
        while not self._should_stop(trace, k):
            current = trace.final
            z, theta, model_value = solve_two_cut_subproblem(newest, aggregate, current.x, rho)
            newest_plane = newest.as_plane()
            current.model_gap = current.value - model_value
            if aggregate is None:
                current.planes = [newest_plane]
                current.weights = np.array([1.0])
            else:
                current.planes = [newest_plane, aggregate]
                current.weights = np.array([1.0 - theta, theta])
            if self._stop_on_model_gap(trace):
                break

            if aggregate is None:
                aggregate = newest_plane
            else:
                aggregate = aggregate.combine(newest_plane, theta)
            residual = float(np.linalg.norm(aggregate.gradient - rho * (current.x - z)))

            newest = self._step(problem, trace, k, z, model_value)
            trace.final.aggregate_residual = residual
            k += 1


# ==================== 便捷函数 ====================

def get_solver(kind: Any, config: Optional[SolverConfig] = None) -> BaseSolver:
    """
    便捷函数：按名称获取求解器实例

    Args:
        kind: SolverKind 或其字符串（接受 bundle-mc 写法）
        config: 求解器配置
    """
    if not isinstance(kind, SolverKind):
        try:
            kind = SolverKind.from_cli(str(kind))
        except ValueError:
            raise ParameterError("solver", f"未知求解方法 {kind!r}")
    return SolverRegistry.get(kind)(config)


def proximal_point(problem: BaseProblem, config: SolverConfig, x0: Any) -> Trace:
    """便捷函数：近端点法"""
    return ProximalPointSolver(config).run(problem, x0)


def subgradient_polyak(problem: BaseProblem, config: SolverConfig, x0: Any) -> Trace:
    """便捷函数：Polyak 步长次梯度法"""
    return PolyakSolver(config).run(problem, x0)


def bundle_multicut(problem: BaseProblem, config: SolverConfig, x0: Any) -> Trace:
    """便捷函数：多割束方法"""
    return MulticutBundleSolver(config).run(problem, x0)


def bundle_aggregate(problem: BaseProblem, config: SolverConfig, x0: Any) -> Trace:
    """便捷函数：聚合束方法"""
    return AggregateBundleSolver(config).run(problem, x0)


__all__ = [
    "BaseSolver",
    "BundleSolver",
    "SolverRegistry",
    "ProximalPointSolver",
    "PolyakSolver",
    "MulticutBundleSolver",
    "AggregateBundleSolver",
    "get_solver",
    "proximal_point",
    "subgradient_polyak",
    "bundle_multicut",
    "bundle_aggregate",
    "solve_multicut_subproblem",
    "solve_two_cut_subproblem",
]
