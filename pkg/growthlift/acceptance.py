"""
验收测试集

每条验收准则注册为一个编号函数，返回 (检查数, 失败描述列表)。
AcceptanceSuite 用线程池并发执行各准则，结果按编号排序。

使用示例:
    from growthlift.acceptance import run_suite

    results = run_suite(only=["1", "7"])
    all(r.passed for r in results)
"""

from concurrent.futures import ThreadPoolExecutor
from itertools import combinations
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import asyncio
import json
import logging
import math
import time

import numpy as np
from pydantic import BaseModel, Field

from .base import BaseProblem, make_builtin
from .bounds import get_bound, lift_general_bound, lift_higher_bound
from .exceptions import ParameterError
from .harness import (
    CheckRegistry,
    RunContext,
    check_equivalence,
    check_higher_equivalence,
    default_start,
    run,
)
from .models import (
    BoundParams,
    Cut,
    ExperimentSpec,
    ProblemSpec,
    SolverConfig,
    SolverKind,
)
from .problems import lift_higher
from .solvers import get_solver, solve_multicut_subproblem


logger = logging.getLogger(__name__)


# 并发线程数
DEFAULT_MAX_WORKERS = 4
# 双实现对比的相对容差
ALGEBRA_RTOL = 1e-12

Outcome = Tuple[int, List[str]]


class CriterionResult(BaseModel):
    """单条准则的执行结果"""
    id: str
    title: str
    passed: bool
    checked: int = 0
    failures: List[str] = Field(default_factory=list)
    seconds: float = 0.0

    def to_dict(self) -> Dict[str, object]:
        return {
            "id": self.id,
            "title": self.title,
            "passed": self.passed,
            "checked": self.checked,
            "failures": self.failures,
            "seconds": round(self.seconds, 3),
        }


class AcceptanceRegistry:
    """验收准则注册表"""

    _registry: Dict[str, Tuple[str, Callable[[int], Outcome]]] = {}

    @classmethod
    def register(cls, criterion_id: str, title: str) -> Callable:
        def decorator(func: Callable[[int], Outcome]) -> Callable[[int], Outcome]:
            cls._registry[criterion_id] = (title, func)
            return func
        return decorator

    @classmethod
    def get(cls, criterion_id: str) -> Tuple[str, Callable[[int], Outcome]]:
        if criterion_id not in cls._registry:
            raise ParameterError("only", f"未知验收准则 {criterion_id!r}. 可用: {cls.list_ids()}")
        return cls._registry[criterion_id]

    @classmethod
    def list_ids(cls) -> List[str]:
        return sorted(cls._registry, key=int)


def _close(a: float, b: float, rtol: float = ALGEBRA_RTOL) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def _config(**overrides: float) -> SolverConfig:
    values = {"rho": 1.0, "beta": 0.5, "max_iter": 500, "target_eps": 1e-6}
    values.update(overrides)
    return SolverConfig(**values)


# ==================== 1-3: 近端点法与 Polyak 方法 ====================

@AcceptanceRegistry.register("1", "近端点法在 |x| 上的闭式轨迹")
def closed_form_prox(seed: int) -> Outcome:
    problem = make_builtin("sharp_norm", 1)
    trace = get_solver("prox", _config(rho=0.1, target_eps=1e-12)).run(problem, [1.0])
    failures = []
    for record in trace.records:
        expected = max(0.0, 1.0 - 0.1 * record.k)
        if abs(record.x[0] - expected) > 1e-12:
            failures.append(f"x_{record.k}={record.x[0]!r}, 期望 {expected!r}")
    reached = trace.first_eps_index(1e-12)
    bound = get_bound("k_prox_sharp")(BoundParams(gap0=1.0, rho=0.1, alpha=1.0))
    if reached != 10:
        failures.append(f"首个极小点下标 {reached}，期望 10")
    if reached is not None and reached > bound:
        failures.append(f"下标 {reached} 超过速率界 {bound!r}")
    return len(trace.records) + 1, failures


@AcceptanceRegistry.register("2", "Polyak 方法在 x² 上的几何衰减")
def polyak_geometric(seed: int) -> Outcome:
    problem = make_builtin("quadratic_norm", 1)
    trace = get_solver("polyak", _config()).run(problem, [1.0])
    failures = []
    for record in trace.records:
        expected = 2.0 ** -record.k
        if abs(record.x[0] - expected) > 1e-12 * expected:
            failures.append(f"x_{record.k}={record.x[0]!r}, 期望 {expected!r}")
    for prev, curr in zip(trace.records, trace.records[1:]):
        if not curr.dist < prev.dist:
            failures.append(f"距离在 k={curr.k} 未严格下降")
    return len(trace.records), failures


@AcceptanceRegistry.register("3", "次梯度递推不等式")
def subgradient_recurrence(seed: int) -> Outcome:
    failures = []
    for i in range(20):
        n = 1 + i % 5
        problem = make_builtin("max_affine", n, {"m": 2 * n + 3}, seed=seed + i)
        config = _config(max_iter=300)
        trace = get_solver("polyak", config).run(problem, default_start(problem))
        report = CheckRegistry.get("recurrence")(RunContext(problem, trace, config, [1e-6]))
        if not report.passed:
            failures.append(f"seed={seed + i}: 残差 {report.residual!r} (k={report.location})")
    return 20, failures


# ==================== 4-5: 抬升等价性 ====================

EquivalenceCase = Tuple[str, BaseProblem, np.ndarray, Tuple[float, ...]]

SHORT_EPS = (1e-2, 1e-4)
LONG_EPS = (1e-2, 1e-4, 1e-6)


def _equivalence_cases() -> List[EquivalenceCase]:
    cases: List[EquivalenceCase] = []

    def add(
        solver: str,
        problem: BaseProblem,
        x0: Optional[Sequence[float]] = None,
        eps: Tuple[float, ...] = SHORT_EPS,
    ) -> None:
        start = default_start(problem) if x0 is None else problem.x_star + np.asarray(x0)
        cases.append((solver, problem, start, eps))

    for solver in ("polyak", "bundle_mc", "bundle_agg"):
        add(solver, make_builtin("sharp_norm", 2))
        add(solver, make_builtin("quadratic_norm", 2))
        add(solver, make_builtin("max_affine", 2, seed=7))
        # 长轨迹：非坐标段的梯度尺度大于 α
        long_problem = make_builtin("max_affine", 5, {"m": 15, "scale": 2.0}, seed=13)
        add(solver, long_problem, [3.0, -2.0, 1.5, -1.0, 2.5], LONG_EPS)
    add("prox", make_builtin("sharp_norm", 1))
    add("prox", make_builtin("quadratic_norm", 2))
    add("prox", make_builtin("holder_norm", 1, {"p": 1.5}))
    return cases


@AcceptanceRegistry.register("4", "一般情形抬升的轨迹等价")
def lifting_equivalence(seed: int) -> Outcome:
    failures = []
    checked = 0
    for solver, problem, x0, eps_list in _equivalence_cases():
        rho = 0.1 if solver == "prox" else 1.0
        for epsilon in eps_list:
            for p in (1.0, 2.0):
                checked += 1
                report = check_equivalence(problem, solver, _config(rho=rho), x0, epsilon, p)
                if not report.passed:
                    failures.append(
                        f"{solver}/{problem.name} ε={epsilon:g} p={p:g}: "
                        f"分歧于 k={report.location} ({report.detail})"
                    )
    return checked, failures


@AcceptanceRegistry.register("5", "高阶增长抬升的轨迹等价")
def higher_lifting_equivalence(seed: int) -> Outcome:
    failures = []
    checked = 0
    problem = make_builtin("quadratic_norm", 2)
    for solver in ("prox", "polyak", "bundle_mc", "bundle_agg"):
        for epsilon in (1e-2, 1e-4):
            checked += 1
            lifted = lift_higher(problem, epsilon, 1.0)
            if not _close(lifted.c, math.sqrt(epsilon), 1e-15):
                failures.append(f"ε={epsilon:g}: 系数 {lifted.c!r} ≠ √(αε)")
            report = check_higher_equivalence(
                problem, solver, _config(), default_start(problem), epsilon, 1.0
            )
            if not report.passed:
                failures.append(f"{solver} ε={epsilon:g}: {report.detail} (k={report.location})")
    return checked, failures


# ==================== 6-7: 速率界 ====================

@AcceptanceRegistry.register("6", "速率界符合性")
def bound_compliance(seed: int) -> Outcome:
    cases = [
        ("prox", "sharp_norm", {}, 0.1),
        ("prox", "quadratic_norm", {}, 1.0),
        ("polyak", "sharp_norm", {}, 1.0),
        ("polyak", "quadratic_norm", {}, 1.0),
        ("polyak", "max_affine", {"m": 7}, 1.0),
        ("bundle_mc", "quadratic_norm", {}, 1.0),
        ("bundle_agg", "quadratic_norm", {}, 1.0),
    ]
    failures = []
    for solver, kind, params, rho in cases:
        spec = ExperimentSpec(
            problem=ProblemSpec(kind=kind, n=2, params=params, seed=seed),
            solver=solver,
            config=_config(rho=rho, max_iter=1000),
            eps_list=[1e-2, 1e-4, 1e-6],
            checks=["bound"],
        )
        _, reports = run(spec, seed=seed)
        for report in reports:
            if not report.passed:
                failures.append(f"{solver}/{kind}: {report.detail}")
    return len(cases), failures


def _random_params(rng: np.random.Generator) -> BoundParams:
    return BoundParams(
        gap0=float(rng.uniform(0.1, 10.0)),
        dist0=float(rng.uniform(0.1, 10.0)),
        rho=float(rng.uniform(0.1, 10.0)),
        beta=float(rng.uniform(0.1, 0.9)),
        L=float(rng.uniform(0.5, 5.0)),
        alpha=float(rng.uniform(0.1, 5.0)),
        epsilon=float(10.0 ** rng.uniform(-6.0, -1.0)),
    )


@AcceptanceRegistry.register("7", "抬升后速率界的代数恒等式")
def lifted_bound_algebra(seed: int) -> Outcome:
    identities = [
        (lift_general_bound(get_bound("k_prox_sharp"), 1), get_bound("k_prox_general_direct")),
        (lift_general_bound(get_bound("k_prox_quadratic"), 2), get_bound("k_prox_general_log")),
        (lift_higher_bound(get_bound("k_prox_sharp"), q=2), get_bound("k_prox_quad_direct")),
        (lift_general_bound(get_bound("k_subgrad_sharp"), 1), get_bound("k_subgrad_general")),
        (lift_general_bound(get_bound("k_subgrad_quadratic"), 2), get_bound("k_subgrad_general")),
        (lift_higher_bound(get_bound("k_subgrad_sharp"), q=2), get_bound("k_subgrad_quad_from_sharp")),
        (lift_general_bound(get_bound("k_bundle_quadratic"), 2), get_bound("k_bundle_general")),
    ]
    halving = get_bound("prox_halving_sum")
    direct_halving = get_bound("k_prox_general_halving")

    rng = np.random.default_rng(seed)
    failures = []
    checked = 0
    for _ in range(100):
        params = _random_params(rng)
        # 直接公式中的 D 即 ‖x0 − x*‖
        params = params.with_values(D=params.dist0)
        for lifted, direct in identities:
            checked += 1
            a, b = lifted(params), direct(params)
            if not _close(a, b):
                failures.append(f"{lifted.name} = {a!r} ≠ {direct.name} = {b!r}")
        checked += 1
        if halving(params) > direct_halving(params):
            failures.append(f"分阶段求和 {halving(params)!r} 超过 {direct_halving(params)!r}")
    return checked, failures


# ==================== 8: 多割子问题 ====================

def _subproblem_objective(cuts: Sequence[Cut], center: np.ndarray, rho: float,
                          points: np.ndarray) -> np.ndarray:
    values = np.max(
        np.stack([c.fz + (points - c.z) @ c.g for c in cuts], axis=1), axis=1
    )
    return values + 0.5 * rho * np.sum((points - center) ** 2, axis=1)


def _enumerate_subproblem(cuts: Sequence[Cut], center: np.ndarray, rho: float) -> np.ndarray:
    """
    穷举活跃集: 对每个非空子集 S 求令 S 中割平面相等的近端点，
    取真实目标值最小者
    """
    gradients = np.array([c.g for c in cuts])
    values = np.array([c.value(center) for c in cuts])
    best, best_value = None, math.inf
    for size in range(1, len(cuts) + 1):
        for subset in combinations(range(len(cuts)), size):
            index = list(subset)
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = gradients[index] @ gradients[index].T / rho
            kkt[:size, size] = 1.0
            kkt[size, :size] = 1.0
            rhs = np.concatenate([values[index], [1.0]])
            solution, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            candidate = center - solution[:size] @ gradients[index] / rho
            value = float(_subproblem_objective(cuts, center, rho, candidate[None, :])[0])
            if value < best_value:
                best, best_value = candidate, value
    return best


def _grid_minimum(cuts: Sequence[Cut], center: np.ndarray, rho: float) -> float:
    """以 x_c 为中心、半径 max‖g‖/ρ 的网格上的最小目标值，逐级加密"""
    n = center.size
    radius = max(float(np.linalg.norm(c.g)) for c in cuts) / rho + 1e-3
    points_per_axis = 2001 if n == 1 else 201
    middle = center.copy()
    best = math.inf
    while radius > 1e-10:
        axes = [np.linspace(m - radius, m + radius, points_per_axis) for m in middle]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        objective = _subproblem_objective(cuts, center, rho, grid)
        index = int(np.argmin(objective))
        best = min(best, float(objective[index]))
        middle = grid[index]
        radius *= 0.1
    return best


@AcceptanceRegistry.register("8", "多割子问题与暴力求解一致")
def subproblem_oracle(seed: int) -> Outcome:
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(50):
        n = 1 + i % 2
        m = 1 + i % 3
        cuts = [
            Cut(z=rng.normal(size=n), fz=float(rng.normal()), g=rng.normal(size=n))
            for _ in range(m)
        ]
        center = rng.normal(size=n)
        rho = float(rng.uniform(0.5, 2.0))
        z, weights, model_value = solve_multicut_subproblem(cuts, center, rho)

        gradients = np.array([c.g for c in cuts])
        recovery = float(np.linalg.norm(z - (center - weights @ gradients / rho)))
        if recovery > 1e-10:
            failures.append(f"#{i}: 恢复恒等式残差 {recovery!r}")

        exact = _enumerate_subproblem(cuts, center, rho)
        if float(np.max(np.abs(z - exact))) > 1e-5:
            failures.append(f"#{i}: z={z.tolist()} 与穷举解 {exact.tolist()} 不一致")

        value = float(_subproblem_objective(cuts, center, rho, z[None, :])[0])
        grid_value = _grid_minimum(cuts, center, rho)
        if value > grid_value + 1e-8 * max(1.0, abs(grid_value)):
            failures.append(f"#{i}: 目标值 {value!r} 高于网格最小值 {grid_value!r}")
    return 50, failures


# ==================== 9-11: 束方法运行 ====================

def _bundle_runs(seed: int) -> List[RunContext]:
    problems = [
        make_builtin("sharp_norm", 2),
        make_builtin("quadratic_norm", 2),
        make_builtin("holder_norm", 2, {"p": 1.5}),
        make_builtin("max_affine", 2, seed=7),
        make_builtin("max_affine", 3, seed=seed + 11),
        make_builtin("lifted_hinge", 2),
    ]
    contexts = []
    config = _config(max_iter=200)
    for solver in (SolverKind.BUNDLE_MC, SolverKind.BUNDLE_AGG):
        for problem in problems:
            trace = get_solver(solver, config).run(problem, default_start(problem))
            contexts.append(RunContext(problem, trace, config, [1e-6], seed=seed))
    return contexts


def _run_checks(contexts: List[RunContext], names: Sequence[str]) -> Outcome:
    failures = []
    checked = 0
    for ctx in contexts:
        for name in names:
            checked += 1
            report = CheckRegistry.get(name)(ctx)
            if not report.passed:
                failures.append(
                    f"{ctx.solver.value}/{ctx.problem.name} {name}: "
                    f"残差 {report.residual!r} (k={report.location})"
                )
    return checked, failures


@AcceptanceRegistry.register("9", "聚合恒等式")
def aggregation_identity(seed: int) -> Outcome:
    contexts = [c for c in _bundle_runs(seed) if c.solver == SolverKind.BUNDLE_AGG]
    return _run_checks(contexts, ["aggregation_identity"])


@AcceptanceRegistry.register("10", "束方法距离上界")
def bundle_distance(seed: int) -> Outcome:
    return _run_checks(_bundle_runs(seed), ["distance"])


@AcceptanceRegistry.register("11", "模型下界与中心点单调性")
def model_lower_bound(seed: int) -> Outcome:
    return _run_checks(_bundle_runs(seed), ["model_lower_bound", "incumbent_monotone"])


# ==================== 执行 ====================

class AcceptanceSuite:
    """
    验收测试集执行器

    各准则相互独立，在线程池中并发执行。

    使用示例:
        suite = AcceptanceSuite(seed=0)
        results = asyncio.run(suite.run(only=["4", "5"]))
    """

    def __init__(self, seed: int = 0, max_workers: int = DEFAULT_MAX_WORKERS):
        self.seed = seed
        self.max_workers = max_workers

    def _run_one(self, criterion_id: str) -> CriterionResult:
        title, criterion = AcceptanceRegistry.get(criterion_id)
        started = time.perf_counter()
        try:
            checked, failures = criterion(self.seed)
        except Exception as e:
            logger.error(f"[{criterion_id}] 执行出错: {e}")
            checked, failures = 0, [f"{type(e).__name__}: {e}"]
        elapsed = time.perf_counter() - started
        passed = not failures
        if passed:
            logger.info(f"[{criterion_id}] {title}: 通过 ({checked} 项, {elapsed:.2f}s)")
        else:
            logger.error(f"[{criterion_id}] {title}: {len(failures)} 项失败")
        return CriterionResult(
            id=criterion_id, title=title, passed=passed,
            checked=checked, failures=failures, seconds=elapsed,
        )

    async def run(self, only: Optional[Sequence[str]] = None) -> List[CriterionResult]:
        """
        并发执行验收准则

        Args:
            only: 只执行这些编号，None 表示全部

        Returns:
            List[CriterionResult]: 按编号排序的结果
        """
        ids = list(only) if only else AcceptanceRegistry.list_ids()
        for criterion_id in ids:
            AcceptanceRegistry.get(criterion_id)

        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
            results = await asyncio.gather(
                *(loop.run_in_executor(pool, self._run_one, cid) for cid in ids)
            )
        return sorted(results, key=lambda r: int(r.id))


def run_suite(
    only: Optional[Sequence[str]] = None,
    seed: int = 0,
    max_workers: int = DEFAULT_MAX_WORKERS,
) -> List[CriterionResult]:
    """便捷函数：同步执行验收测试集"""
    return asyncio.run(AcceptanceSuite(seed, max_workers).run(only))


def summary_json(results: List[CriterionResult]) -> str:
    """机器可读的汇总，键排序、按编号排序"""
    payload = {
        "passed": all(r.passed for r in results),
        "criteria": [r.to_dict() for r in results],
    }
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
