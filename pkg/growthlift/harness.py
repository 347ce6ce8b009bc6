"""
实验与不变量检查

功能:
1. run: 按 ExperimentSpec 构造问题、运行求解器并执行检查
2. CheckRegistry: 各引理/定理结论的运行时检查
3. check_equivalence / check_higher_equivalence: 在 F 与抬升函数 G 上
   运行同一求解器，比较两条轨迹
4. 轨迹 CSV 与检查报告 JSON 的输出
"""

from typing import Any, Callable, Dict, IO, List, Optional, Tuple, Union
import csv
import json
import logging
import math
from pathlib import Path

import numpy as np

from .base import BaseProblem, from_spec
from .bounds import RateBound, get_bound
from .exceptions import ParameterError, StateError
from .models import (
    BoundParams,
    CheckReport,
    ExperimentSpec,
    SolverConfig,
    SolverKind,
    StepKind,
    Trace,
)
from .problems import LiftedProblem, lift_general, lift_higher
from .solvers import get_solver


logger = logging.getLogger(__name__)


# 轨迹比较: |a − b| ≤ rtol·max(|a|,|b|) + atol
EQUIVALENCE_RTOL = 1e-9
EQUIVALENCE_ATOL = 1e-12

DISTANCE_TOL = 1e-9
BUNDLE_DISTANCE_TOL = 1e-6
RECURRENCE_TOL = 1e-9
PROX_DESCENT_TOL = 1e-9
PROX_OPTIMALITY_TOL = 1e-8
MODEL_TOL = 1e-10
AGGREGATION_TOL = 1e-10
COMPLEMENTARITY_TOL = 1e-8
RECOVERY_TOL = 1e-10
CASE_SPLIT_TOL = 1e-12

# model_lower_bound 每次运行的采样点数
MODEL_SAMPLES = 1000
# prox_optimality 每个迭代点的采样点数
OPTIMALITY_SAMPLES = 16


# ==================== 运行上下文 ====================

class RunContext:
    """
    一次求解器运行的检查上下文

    Attributes:
        problem: 问题实例
        trace: 运行轨迹
        config: 实际使用的求解器配置
        eps_list: 检查速率界时使用的精度列表
        seed: 采样类检查的随机种子
    """

    def __init__(
        self,
        problem: BaseProblem,
        trace: Trace,
        config: SolverConfig,
        eps_list: List[float],
        seed: int = 0,
    ):
        self.problem = problem
        self.trace = trace
        self.config = config
        self.eps_list = eps_list
        self.seed = seed
        self._params: Optional[BoundParams] = None

    @property
    def solver(self) -> SolverKind:
        return self.trace.method

    @property
    def params(self) -> BoundParams:
        if self._params is None:
            self._params = params_from_trace(self.trace, self.problem, self.config)
        return self._params


def default_start(problem: BaseProblem) -> np.ndarray:
    """默认初始点 x* + (1, …, 1)"""
    return problem.x_star + 1.0


def params_from_trace(
    trace: Trace,
    problem: BaseProblem,
    config: SolverConfig,
    epsilon: Optional[float] = None,
) -> BoundParams:
    """
    由运行轨迹整理速率界参数

    L 取轨迹中次梯度范数的上确界（轨迹为空时退回问题的 L），
    D 取实测的最大查询距离（为 0 时取 1），η₀ 与非零的 M 取实测值。
    """
    start = trace.records[0]
    measured_l = trace.sup_grad_norm()
    measured_d = trace.max_query_dist()
    measured_m = trace.measured_m()
    values: Dict[str, Any] = {
        "dist0": start.dist,
        "gap0": start.gap,
        "f0": start.value,
        "rho": config.rho,
        "beta": config.beta,
        "L": measured_l if measured_l > 0 else problem.lipschitz,
        "D": measured_d if measured_d > 0 else 1.0,
        "eta0": trace.eta0,
        "M": measured_m if measured_m else None,
        "epsilon": epsilon,
    }
    if problem.growth is not None:
        values["alpha"] = problem.growth.alpha
        values["p"] = problem.growth.p
    return BoundParams(**{k: v for k, v in values.items() if v is not None})


# ==================== 检查注册表 ====================

class CheckRegistry:
    """
    不变量检查注册表

    每个检查是 RunContext → CheckReport 的函数。
    """

    _registry: Dict[str, Callable[[RunContext], CheckReport]] = {}

    @classmethod
    def register(cls, name: str) -> Callable:
        """
        注册检查函数的装饰器

        Usage:
            @CheckRegistry.register("distance")
            def _distance(ctx: RunContext) -> CheckReport:
                ...
        """
        def decorator(check: Callable[[RunContext], CheckReport]) -> Callable[[RunContext], CheckReport]:
            cls._registry[name] = check
            return check
        return decorator

    @classmethod
    def get(cls, name: str) -> Callable[[RunContext], CheckReport]:
        if name not in cls._registry:
            raise ParameterError("checks", f"未知检查 {name!r}. 可用: {sorted(cls._registry)}")
        return cls._registry[name]

    @classmethod
    def list_names(cls) -> List[str]:
        return sorted(cls._registry)


def _report(name: str, residuals: List[Tuple[int, float]], tolerance: float,
            detail: str = "") -> CheckReport:
    """由 (下标, 残差) 列表生成报告，残差为空视为通过"""
    if not residuals:
        return CheckReport(name=name, passed=True, tolerance=tolerance, detail=detail)
    location, worst = max(residuals, key=lambda item: item[1])
    return CheckReport(
        name=name,
        passed=worst <= tolerance,
        residual=worst,
        tolerance=tolerance,
        location=location,
        detail=detail,
    )


@CheckRegistry.register("distance")
def _distance(ctx: RunContext) -> CheckReport:
    return check_distance(ctx.trace, ctx.solver, ctx.params)


@CheckRegistry.register("bound")
def _bound(ctx: RunContext) -> CheckReport:
    bound = select_bound(ctx.solver, ctx.problem)
    if bound is None:
        return CheckReport(name="bound", passed=True, detail="not applicable")
    return check_bound(ctx.trace, bound, ctx.params, ctx.eps_list)


@CheckRegistry.register("prox_descent")
def _prox_descent(ctx: RunContext) -> CheckReport:
    """F(x_{k+1}) ≤ F(x_k) − ‖x_{k+1} − x_k‖²/(2ρ)"""
    rho = ctx.config.rho
    records = ctx.trace.records
    residuals = []
    for prev, curr in zip(records, records[1:]):
        step = float(np.sum((curr.x - prev.x) ** 2))
        residuals.append((curr.k, curr.value - prev.value + step / (2.0 * rho)))
    return _report("prox_descent", residuals, PROX_DESCENT_TOL)


@CheckRegistry.register("prox_optimality")
def _prox_optimality(ctx: RunContext) -> CheckReport:
    """
    (x_k − x_{k+1})/ρ ∈ ∂F(x_{k+1})

    在 x* 及 x_{k+1} 附近的随机点上检验次梯度不等式。
    """
    problem = ctx.problem
    rho = ctx.config.rho
    rng = np.random.default_rng(ctx.seed)
    records = ctx.trace.records
    residuals = []
    for prev, curr in zip(records, records[1:]):
        s = (prev.x - curr.x) / rho
        scale = max(curr.dist, 1e-3)
        samples = [problem.x_star] + [
            curr.x + scale * rng.standard_normal(problem.n) for _ in range(OPTIMALITY_SAMPLES)
        ]
        worst = max(
            curr.value + float(s @ (y - curr.x)) - problem.value(y) for y in samples
        )
        residuals.append((curr.k, worst / max(1.0, abs(curr.value))))
    return _report("prox_optimality", residuals, PROX_OPTIMALITY_TOL)


@CheckRegistry.register("recurrence")
def _recurrence(ctx: RunContext) -> CheckReport:
    """‖x_{k+1}−x*‖² ≤ ‖x_k−x*‖² − (F(x_k)−F*)²/L²"""
    L = ctx.params.L
    records = ctx.trace.records
    residuals = [
        (curr.k, curr.dist ** 2 - prev.dist ** 2 + prev.gap ** 2 / L ** 2)
        for prev, curr in zip(records, records[1:])
    ]
    return _report("recurrence", residuals, RECURRENCE_TOL, detail=f"L={L!r}")


@CheckRegistry.register("model_lower_bound")
def _model_lower_bound(ctx: RunContext) -> CheckReport:
    """每个模型 F̃^k 在采样点上不超过 F"""
    problem = ctx.problem
    trace = ctx.trace
    rng = np.random.default_rng(ctx.seed)
    radius = 2.0 * max(trace.max_query_dist(), 1.0)
    samples = problem.x_star + rng.uniform(-radius, radius, size=(MODEL_SAMPLES, problem.n))
    queries = [r.z for r in trace.records if r.z is not None]
    if queries:
        samples = np.vstack([samples, queries])
    true_values = np.array([problem.value(y) for y in samples])
    scale = np.maximum(1.0, np.abs(true_values))

    residuals = []
    for record in trace.records:
        if not record.planes:
            continue
        gradients = np.array([plane.gradient for plane in record.planes])
        intercepts = np.array([plane.intercept for plane in record.planes])
        model = np.max(samples @ gradients.T + intercepts, axis=1)
        residuals.append((record.k, float(np.max((model - true_values) / scale))))
    return _report("model_lower_bound", residuals, MODEL_TOL)


@CheckRegistry.register("incumbent_monotone")
def _incumbent_monotone(ctx: RunContext) -> CheckReport:
    """
    中心点函数值单调不增，且步类型与下降测试一致

    步类型不符记为无穷大残差。
    """
    beta = ctx.config.beta
    records = ctx.trace.records
    residuals = []
    for prev, curr in zip(records, records[1:]):
        residuals.append((curr.k, curr.value - prev.value))
        if curr.z_value is None or prev.model_gap is None:
            continue
        descent = curr.z_value <= prev.value - beta * prev.model_gap
        expected = StepKind.DESCENT if descent else StepKind.NULL
        moved_to_z = curr.z is not None and np.array_equal(curr.x, curr.z)
        if curr.step_kind != expected or (descent and not moved_to_z):
            residuals.append((curr.k, math.inf))
    return _report("incumbent_monotone", residuals, 0.0)


@CheckRegistry.register("aggregation_identity")
def _aggregation_identity(ctx: RunContext) -> CheckReport:
    """‖∇F̄^{k+1} − ρ(x_k − z_{k+1})‖"""
    residuals = [
        (r.k, r.aggregate_residual)
        for r in ctx.trace.records
        if r.aggregate_residual is not None
    ]
    return _report("aggregation_identity", residuals, AGGREGATION_TOL)


@CheckRegistry.register("subproblem_duals")
def _subproblem_duals(ctx: RunContext) -> CheckReport:
    """
    子问题对偶解: λ 在单纯形上、互补松弛、z = x_k − Σλ_j g_j/ρ

    三类残差按各自容差归一化后合并。
    """
    rho = ctx.config.rho
    records = ctx.trace.records
    residuals = []
    for curr, nxt in zip(records, records[1:]):
        if curr.weights is None or not curr.planes or nxt.z is None:
            continue
        weights = curr.weights
        gradients = np.array([plane.gradient for plane in curr.planes])
        simplex = max(float(-np.min(weights)), abs(float(np.sum(weights)) - 1.0))
        recovered = curr.x - (weights @ gradients) / rho
        recovery = float(np.linalg.norm(nxt.z - recovered))
        plane_values = np.array([plane.value(nxt.z) for plane in curr.planes])
        active = weights > 1e-12
        slack = float(np.max(plane_values) - np.min(plane_values[active]))
        scale = max(1.0, float(np.max(np.abs(plane_values))))
        residuals.append((
            nxt.k,
            max(simplex / RECOVERY_TOL, recovery / RECOVERY_TOL,
                slack / scale / COMPLEMENTARITY_TOL),
        ))
    return _report("subproblem_duals", residuals, 1.0, detail="残差以各自容差为单位")


# ==================== 速率界与距离检查 ====================

def select_bound(solver: SolverKind, problem: BaseProblem) -> Optional[RateBound]:
    """按求解方法与增长指数选择匹配的速率界，无匹配时返回 None"""
    if problem.growth is None:
        return None
    names = {
        (SolverKind.PROX, 1.0): "k_prox_sharp",
        (SolverKind.PROX, 2.0): "k_prox_quadratic",
        (SolverKind.POLYAK, 1.0): "k_subgrad_sharp",
        (SolverKind.POLYAK, 2.0): "k_subgrad_quadratic",
        (SolverKind.BUNDLE_MC, 2.0): "k_bundle_quadratic",
        (SolverKind.BUNDLE_AGG, 2.0): "k_bundle_quadratic",
    }
    name = names.get((solver, float(problem.growth.p)))
    return get_bound(name) if name else None


def check_bound(
    trace: Trace,
    bound: RateBound,
    params: BoundParams,
    eps_list: List[float],
) -> CheckReport:
    """
    首个 ε-极小点下标 ≤ ceil(K) 对每个 ε 成立

    轨迹未达到某个 ε 时，只有在已执行的迭代数不少于 ceil(K) 时才判失败。
    """
    residuals = []
    notes = []
    for epsilon in eps_list:
        value = bound(params.with_values(epsilon=epsilon))
        limit = math.ceil(value) if math.isfinite(value) else math.inf
        observed = trace.first_eps_index(epsilon)
        if observed is None:
            performed = trace.final.k
            notes.append(f"ε={epsilon:g}: not reached after {performed} (K={value:.6g})")
            if performed >= limit:
                residuals.append((performed, float(performed - limit)))
            continue
        notes.append(f"ε={epsilon:g}: k={observed} ≤ K={value:.6g}")
        residuals.append((observed, float(observed - limit)))
    return _report(f"bound:{bound.name}", residuals, 0.0, detail="; ".join(notes))


def check_distance(trace: Trace, solver: SolverKind, params: BoundParams) -> CheckReport:
    """
    迭代点距离上界

    近端点法与 Polyak 方法: max_k ‖x_k − x*‖ ≤ ‖x0 − x*‖
    束方法: max_k ‖z_k − x*‖² ≤ 2(1 + (1−β)/β)(‖x0 − x*‖² + L²/ρ²)
    """
    dist0 = trace.records[0].dist
    if solver.is_bundle:
        params.require("beta", "L", "rho")
        beta = params.beta
        limit = 2.0 * (1.0 + (1.0 - beta) / beta) * (dist0 ** 2 + params.L ** 2 / params.rho ** 2)
        residuals = [
            (r.k, r.z_dist ** 2 - limit) for r in trace.records if r.z_dist is not None
        ]
        return _report("distance", residuals, BUNDLE_DISTANCE_TOL, detail=f"limit={limit!r}")
    residuals = [(r.k, r.dist - dist0) for r in trace.records]
    return _report("distance", residuals, DISTANCE_TOL, detail=f"dist0={dist0!r}")


# ==================== 运行 ====================

def _with_target(config: SolverConfig, target_eps: float) -> SolverConfig:
    return SolverConfig(**{**config.to_dict(), "target_eps": target_eps})


def run(spec: ExperimentSpec, seed: int = 0) -> Tuple[Trace, List[CheckReport]]:
    """
    运行实验

    Args:
        spec: 实验规格；轨迹在最小 ε 处截断
        seed: 采样类检查的随机种子

    Returns:
        Tuple[Trace, List[CheckReport]]: 轨迹与各检查报告

    Raises:
        CapabilityError: 问题缺少求解器所需预言机
    """
    problem = from_spec(spec.problem)
    config = _with_target(spec.config, min(spec.eps_list))
    x0 = spec.x0 if spec.x0 is not None else default_start(problem)
    solver = get_solver(spec.solver, config)
    trace = solver.run(problem, x0)

    ctx = RunContext(problem, trace, config, spec.eps_list, seed=seed)
    names = spec.checks or solver.DEFAULT_CHECKS
    reports = [CheckRegistry.get(name)(ctx) for name in names]
    for report in reports:
        if not report.passed:
            logger.error(
                f"[{spec.solver.value}] 检查 {report.name} 失败: "
                f"残差 {report.residual!r} > {report.tolerance!r} (k={report.location})"
            )
    return trace, reports


# ==================== 抬升等价性 ====================

def _divergence(a: np.ndarray, b: np.ndarray) -> float:
    """超出相对容差的最大坐标差"""
    return float(np.max(np.abs(a - b) - EQUIVALENCE_RTOL * np.maximum(np.abs(a), np.abs(b))))


def compare_traces(
    lifted: LiftedProblem,
    trace_f: Trace,
    trace_g: Trace,
    epsilon: float,
    name: str = "equivalence",
    detail: str = "",
) -> CheckReport:
    """
    比较 F 与 G 上的迭代点序列

    比较到 F 的首个 ε-极小点为止。查询点处下界不低于 F 的记录之后不再
    受证明保证，其后的差异只作说明，不判失败。
    """
    T = trace_f.first_eps_index(epsilon)
    last = T if T is not None else len(trace_f) - 1
    base = lifted.base

    worst = -math.inf
    bitwise = True
    horizon = last
    notes = [detail] if detail else []
    for k in range(last + 1):
        record_f = trace_f.records[k]
        if not lifted.base_dominates(record_f.query):
            horizon = k - 1
            break
        if k >= len(trace_g):
            return CheckReport(
                name=name, passed=False, residual=math.inf, tolerance=EQUIVALENCE_ATOL,
                location=k, detail="; ".join(notes + ["G 的轨迹提前终止"]),
            )
        a, b = record_f.x, trace_g.records[k].x
        bitwise = bitwise and np.array_equal(a, b)
        excess = _divergence(a, b)
        worst = max(worst, excess)
        if excess > EQUIVALENCE_ATOL:
            return CheckReport(
                name=name, passed=False, residual=excess, tolerance=EQUIVALENCE_ATOL,
                location=k, detail="; ".join(notes + [f"首个分歧下标 {k}"]),
            )

    notes.append(f"T={T}" if T is not None else f"未达到 ε，比较到 {last}")
    if horizon < last:
        beyond = [
            k for k in range(horizon + 1, min(last, len(trace_g) - 1) + 1)
            if _divergence(trace_f.records[k].x, trace_g.records[k].x) > EQUIVALENCE_ATOL
        ]
        notes.append(f"保证范围截至 {horizon}" + (f"，其后分歧于 {beyond[0]}" if beyond else ""))
    notes.append("bitwise identical" if bitwise else "agree within tolerance")
    logger.debug(f"[{name}] {base.name}: {'; '.join(notes)}")
    return CheckReport(
        name=name,
        passed=True,
        residual=max(worst, 0.0) if math.isfinite(worst) else 0.0,
        tolerance=EQUIVALENCE_ATOL,
        location=None,
        detail="; ".join(notes),
    )


def check_equivalence(
    problem: BaseProblem,
    solver: Any,
    config: SolverConfig,
    x0: Any,
    epsilon: float,
    p: float,
) -> CheckReport:
    """
    一般情形抬升的等价性检查

    先在 F 上运行得到实测 D，再以 G = lift_general(F, ε, D, p) 重新运行，
    要求两条迭代序列在 F 的首个 ε-极小点之前一致。
    """
    config = _with_target(config, epsilon)
    runner = get_solver(solver, config)
    trace_f = runner.run(problem, x0)
    measured = trace_f.max_query_dist()
    D = measured if measured > 0 else 1.0
    lifted = lift_general(problem, epsilon, D, p)
    trace_g = runner.run(lifted, x0)
    return compare_traces(
        lifted, trace_f, trace_g, epsilon,
        name="equivalence", detail=f"D={D!r}, c={lifted.c!r}",
    )


def check_higher_equivalence(
    problem: BaseProblem,
    solver: Any,
    config: SolverConfig,
    x0: Any,
    epsilon: float,
    p: float,
) -> CheckReport:
    """
    高阶增长抬升的等价性检查

    除轨迹比较外，在 F 轨迹中每个非 ε-极小点 x_k 上验证两种情形:
    ‖x_k−x*‖ > (ε/α)^{1/q} 时 下界 ≤ F* + α‖x_k−x*‖^q ≤ F(x_k)；
    否则 下界 ≤ F* + ε < F(x_k)。

    Raises:
        StateError: 问题没有增长证书
        ParameterError: p ≥ q
    """
    if problem.growth is None:
        raise StateError(f"{problem.name} 没有增长证书")
    lifted = lift_higher(problem, epsilon, p)
    config = _with_target(config, epsilon)
    runner = get_solver(solver, config)
    trace_f = runner.run(problem, x0)
    trace_g = runner.run(lifted, x0)
    report = compare_traces(
        lifted, trace_f, trace_g, epsilon,
        name="higher_equivalence", detail=f"c={lifted.c!r}",
    )
    if not report.passed:
        return report

    q, alpha = problem.growth.p, problem.growth.alpha
    threshold = (epsilon / alpha) ** (1.0 / q)
    f_star = problem.f_star
    for record in trace_f.records:
        if record.gap <= epsilon:
            continue
        floor = lifted.floor(record.x)
        scale = max(1.0, abs(record.value))
        if record.dist > threshold:
            growth = f_star + alpha * record.dist ** q
            violation = max(floor - growth, growth - record.value)
        else:
            violation = max(floor - (f_star + epsilon), f_star + epsilon - record.value)
        if violation > CASE_SPLIT_TOL * scale:
            return CheckReport(
                name="higher_equivalence", passed=False, residual=violation,
                tolerance=CASE_SPLIT_TOL, location=record.k,
                detail=f"两种情形不等式在 k={record.k} 不成立",
            )
    report.detail += "; case split verified"
    return report


# ==================== 输出 ====================

def write_trace_csv(trace: Trace, target: Union[str, Path, IO[str]]) -> None:
    """写出轨迹 CSV，列为 k,step_kind,value,gap,dist,stepsize,model_gap"""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as f:
            csv.writer(f, lineterminator="\n").writerows(trace.csv_rows())
        return
    csv.writer(target, lineterminator="\n").writerows(trace.csv_rows())


def reports_to_json(reports: List[CheckReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def write_reports_json(reports: List[CheckReport], path: Union[str, Path]) -> None:
    Path(path).write_text(reports_to_json(reports), encoding="utf-8")
