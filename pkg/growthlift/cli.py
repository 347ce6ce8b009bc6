"""
命令行入口

子命令:
- solve: 运行单个求解器并写出轨迹 CSV
- bounds: 计算命名速率界，可选抬升变换
- lift-check: 抬升等价性检查
- bench: 按实验规格运行并输出检查报告
- validate: 运行验收测试集

退出码: 0 成功，1 参数或运行错误，2 达到迭代上限。
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional, Sequence
import argparse
import json
import logging
import os
import sys

from .acceptance import AcceptanceRegistry, run_suite, summary_json
from .base import BaseProblem, from_spec
from .bounds import get_bound, lift_general_bound, lift_higher_bound, list_bounds
from .exceptions import GrowthLiftError, ParameterError
from .harness import (
    check_equivalence,
    check_higher_equivalence,
    default_start,
    reports_to_json,
    run,
    write_trace_csv,
)
from .models import (
    BoundParams,
    ExperimentSpec,
    ProblemSpec,
    SolverConfig,
    SolverKind,
    TerminationReason,
    parse_point,
)
from .solvers import get_solver


logger = logging.getLogger(__name__)


EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITER = 2

SEED_ENV = "GROWTHLIFT_SEED"
METHODS = ["prox", "polyak", "bundle-mc", "bundle-agg"]


class CliArgumentParser(argparse.ArgumentParser):
    """参数错误时以退出码 1 退出"""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: 错误: {message}\n")


def env_seed() -> int:
    """GROWTHLIFT_SEED 环境变量，未设置时为 0"""
    raw = os.environ.get(SEED_ENV, "")
    if not raw.strip():
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ParameterError(SEED_ENV, f"不是整数: {raw!r}")


def load_problem_spec(path: str) -> ProblemSpec:
    """读取问题规格；文件未给出 seed 时使用 GROWTHLIFT_SEED"""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict) and "seed" not in data:
        data["seed"] = env_seed()
        logger.debug(f"[cli] {path} 未给出 seed，使用 {SEED_ENV}={data['seed']}")
    return ProblemSpec.from_dict(data)


def _load_problem(args: argparse.Namespace) -> BaseProblem:
    """构造问题；给出 --spec-out 时写出规范格式的问题规格"""
    spec = load_problem_spec(args.problem)
    if args.spec_out:
        Path(args.spec_out).write_text(spec.to_json(), encoding="utf-8")
    return from_spec(spec)


def _start_point(problem: BaseProblem, text: Optional[str]):
    if text is None:
        return default_start(problem)
    return parse_point(text)


def _solver_config(args: argparse.Namespace) -> SolverConfig:
    method = SolverKind.from_cli(args.method)
    if args.rho is None and method != SolverKind.POLYAK:
        raise ParameterError("rho", f"--method {args.method} 需要 --rho")
    return SolverConfig(
        rho=args.rho if args.rho is not None else 1.0,
        beta=args.beta,
        eps_stop=getattr(args, "eps_stop", 0.0),
        max_iter=args.max_iter,
        target_eps=args.eps,
    )


def _emit(lines: Sequence[str], args: argparse.Namespace) -> None:
    if args.timestamp:
        print(f"# {datetime.now(timezone.utc).isoformat()}")
    for line in lines:
        print(line)


# ==================== 子命令 ====================

def cmd_solve(args: argparse.Namespace) -> int:
    config = _solver_config(args)
    problem = _load_problem(args)
    x0 = _start_point(problem, args.x0)
    trace = get_solver(args.method, config).run(problem, x0)
    write_trace_csv(trace, args.out)
    _emit([
        f"termination: {trace.termination.value}",
        f"iterations: {trace.final.k}",
        f"final_gap: {trace.final.gap!r}",
    ], args)
    if trace.termination == TerminationReason.MAX_ITER:
        return EXIT_MAX_ITER
    return EXIT_OK


def _parse_lift(text: str):
    """解析 general:p 或 higher:p,q"""
    kind, _, spec = text.partition(":")
    try:
        values = [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise ParameterError("lift", f"无法解析 {text!r}")
    if kind == "general" and len(values) == 1:
        return lambda base: lift_general_bound(base, p=values[0])
    if kind == "higher" and len(values) == 2:
        return lambda base: lift_higher_bound(base, q=values[1], p=values[0])
    raise ParameterError("lift", f"格式应为 general:p 或 higher:p,q，实际 {text!r}")


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.list:
        _emit(list_bounds(), args)
        return EXIT_OK
    if not args.name:
        raise ParameterError("name", "需要 --name")
    bound = get_bound(args.name)
    data = json.loads(Path(args.params).read_text(encoding="utf-8")) if args.params else {}
    params = BoundParams(**data)

    lines = []
    if args.lift:
        lifted = _parse_lift(args.lift)(bound)
        lines.append(f"{lifted.name}: {lifted(params)!r}")
    else:
        lines.append(f"{bound.name}: {bound(params)!r}")
    _emit(lines, args)
    return EXIT_OK


def cmd_lift_check(args: argparse.Namespace) -> int:
    config = _solver_config(args)
    problem = _load_problem(args)
    x0 = _start_point(problem, args.x0)
    if args.q is None:
        report = check_equivalence(problem, args.method, config, x0, args.eps, args.p)
    else:
        if not args.p < args.q:
            raise ParameterError("p", f"需要 p < q，实际 p={args.p:g}, q={args.q:g}")
        if problem.growth is None or problem.growth.p != args.q:
            raise ParameterError("q", f"与问题的增长证书 {problem.growth} 不一致")
        report = check_higher_equivalence(problem, args.method, config, x0, args.eps, args.p)

    lines = [
        "PASS" if report.passed else "FAIL",
        f"detail: {report.detail}",
    ]
    if not report.passed:
        lines.append(f"first_divergence: {report.location}")
    _emit(lines, args)
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_bench(args: argparse.Namespace) -> int:
    data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    spec = ExperimentSpec(**data)
    trace, reports = run(spec, seed=env_seed())
    if args.out:
        write_trace_csv(trace, args.out)
    payload = reports_to_json(reports)
    if args.report:
        Path(args.report).write_text(payload, encoding="utf-8")
        _emit([
            f"termination: {trace.termination.value}",
            f"checks: {sum(r.passed for r in reports)}/{len(reports)} passed",
        ], args)
    else:
        _emit([payload.rstrip("\n")], args)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_ERROR


def cmd_validate(args: argparse.Namespace) -> int:
    only = args.only or None
    if only:
        for criterion_id in only:
            AcceptanceRegistry.get(criterion_id)
    results = run_suite(only=only, seed=env_seed(), max_workers=args.workers)
    text = summary_json(results)
    if args.timestamp:
        print(f"# {datetime.now(timezone.utc).isoformat()}")
    sys.stdout.write(text)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


# ==================== 参数解析 ====================

def _add_solver_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--problem", required=True, help="问题规格 JSON {kind, n, params, seed}")
    sub.add_argument("--method", required=True, choices=METHODS)
    sub.add_argument("--rho", type=float, help="步长 ρ（prox 与束方法必需）")
    sub.add_argument("--beta", type=float, default=0.5, help="束方法下降参数 β")
    sub.add_argument("--max-iter", type=int, default=1000)
    sub.add_argument("--x0", help="初始点，逗号分隔；默认 x* + 1")
    sub.add_argument("--spec-out", help="写出规范格式的问题规格 JSON（含实际使用的 seed）")


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(prog="growthlift", description="非光滑凸优化速率验证工具")
    parser.add_argument("--verbose", action="store_true", help="输出 DEBUG 日志")
    parser.add_argument("--timestamp", action="store_true", help="输出首行附加时间戳")
    subparsers = parser.add_subparsers(dest="command", parser_class=CliArgumentParser)
    subparsers.required = True

    solve = subparsers.add_parser("solve", help="运行求解器并写出轨迹 CSV")
    _add_solver_flags(solve)
    solve.add_argument("--eps", type=float, default=1e-6, help="轨迹截断精度 ε")
    solve.add_argument("--eps-stop", type=float, default=0.0, help="束方法停止准则 ε_stop")
    solve.add_argument("--out", required=True, help="轨迹 CSV 路径")
    solve.set_defaults(handler=cmd_solve)

    bounds = subparsers.add_parser("bounds", help="计算速率界")
    bounds.add_argument("--name", help="速率界名称")
    bounds.add_argument("--params", help="BoundParams JSON")
    bounds.add_argument("--lift", help="general:p 或 higher:p,q")
    bounds.add_argument("--list", action="store_true", help="列出所有速率界")
    bounds.set_defaults(handler=cmd_bounds)

    lift = subparsers.add_parser("lift-check", help="抬升等价性检查")
    _add_solver_flags(lift)
    lift.add_argument("--eps", type=float, required=True)
    lift.add_argument("--p", type=float, required=True, help="下界指数")
    lift.add_argument("--q", type=float, help="问题增长指数（高阶抬升）")
    lift.set_defaults(handler=cmd_lift_check)

    bench = subparsers.add_parser("bench", help="按实验规格运行")
    bench.add_argument("--spec", required=True, help="ExperimentSpec JSON")
    bench.add_argument("--out", help="轨迹 CSV 路径")
    bench.add_argument("--report", help="检查报告 JSON 路径，缺省时输出到标准输出")
    bench.set_defaults(handler=cmd_bench)

    validate = subparsers.add_parser("validate", help="运行验收测试集")
    validate.add_argument("--only", action="append", help="只运行指定编号，可重复")
    validate.add_argument("--workers", type=int, default=4)
    validate.set_defaults(handler=cmd_validate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (GrowthLiftError, ValueError, OSError) as e:
        print(f"错误: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
