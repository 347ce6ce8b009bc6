"""
增长条件与速率抬升 (growthlift)

一个用于在小规模问题上经验验证非光滑凸优化速率定理的 Python 模块。

功能特点:
- 近端点法、Polyak 次梯度法、多割与聚合两种近端束方法
- 带增长证书的内置测试问题（尖锐、二次、Hölder、max-affine）
- 抬升辅助函数 G(x) = max{F(x), F* + c‖x−x*‖ᵖ}
- 全部速率界公式及一般情形/高阶增长两种抬升变换
- 运行时不变量检查与 F/G 轨迹等价性检查
- 并发执行的验收测试集

快速开始:
    from growthlift import SolverConfig, make_builtin, proximal_point

    # 在 F(x) = |x| 上运行近端点法
    problem = make_builtin("sharp_norm", n=1)
    trace = proximal_point(problem, SolverConfig(rho=0.1), [1.0])
    print(trace.final.k, trace.final.gap)

    # 速率界
    from growthlift import BoundParams, get_bound
    get_bound("k_prox_sharp")(BoundParams(gap0=1.0, rho=0.1, alpha=1.0))

    # 抬升等价性检查
    from growthlift import check_equivalence
    report = check_equivalence(problem, "polyak", SolverConfig(), [1.0], 1e-3, 1)

License: MIT
"""

__version__ = "1.0.0"
__license__ = "MIT"

# 异常
from .exceptions import (
    GrowthLiftError,
    ParameterError,
    CapabilityError,
    StateError,
    NumericalError,
    OracleInconsistencyError,
)

# 核心模型
from .models import (
    ProblemKind,
    SolverKind,
    StepKind,
    TerminationReason,
    GrowthCertificate,
    ProblemSpec,
    SolverConfig,
    AffinePlane,
    Cut,
    TraceRecord,
    Trace,
    BoundParams,
    CheckReport,
    ExperimentSpec,
    CSV_COLUMNS,
)

# 问题基类与注册表
from .base import (
    BaseProblem,
    ProblemBuilder,
    ProblemRegistry,
    make_builtin,
    from_spec,
    evaluate,
)

# 内置问题与抬升
from .problems import (
    SharpNormProblem,
    QuadraticNormProblem,
    HolderNormProblem,
    HingeNormProblem,
    MaxAffineProblem,
    LiftedProblem,
    lift_general,
    lift_higher,
)

# 求解器
from .solvers import (
    BaseSolver,
    SolverRegistry,
    get_solver,
    proximal_point,
    subgradient_polyak,
    bundle_multicut,
    bundle_aggregate,
    solve_multicut_subproblem,
    solve_two_cut_subproblem,
)

# 速率界
from .bounds import (
    RateBound,
    BoundRegistry,
    get_bound,
    list_bounds,
    lift_general_bound,
    lift_higher_bound,
)

# 实验与检查
from .harness import (
    CheckRegistry,
    run,
    check_equivalence,
    check_higher_equivalence,
    check_bound,
    check_distance,
    write_trace_csv,
)


__all__ = [
    # 版本信息
    "__version__",
    "__license__",
    # 异常
    "GrowthLiftError",
    "ParameterError",
    "CapabilityError",
    "StateError",
    "NumericalError",
    "OracleInconsistencyError",
    # 核心模型
    "ProblemKind",
    "SolverKind",
    "StepKind",
    "TerminationReason",
    "GrowthCertificate",
    "ProblemSpec",
    "SolverConfig",
    "AffinePlane",
    "Cut",
    "TraceRecord",
    "Trace",
    "BoundParams",
    "CheckReport",
    "ExperimentSpec",
    "CSV_COLUMNS",
    # 问题
    "BaseProblem",
    "ProblemBuilder",
    "ProblemRegistry",
    "SharpNormProblem",
    "QuadraticNormProblem",
    "HolderNormProblem",
    "HingeNormProblem",
    "MaxAffineProblem",
    "LiftedProblem",
    # 便捷函数
    "make_builtin",
    "from_spec",
    "evaluate",
    "lift_general",
    "lift_higher",
    # 求解器
    "BaseSolver",
    "SolverRegistry",
    "get_solver",
    "proximal_point",
    "subgradient_polyak",
    "bundle_multicut",
    "bundle_aggregate",
    "solve_multicut_subproblem",
    "solve_two_cut_subproblem",
    # 速率界
    "RateBound",
    "BoundRegistry",
    "get_bound",
    "list_bounds",
    "lift_general_bound",
    "lift_higher_bound",
    # 实验与检查
    "CheckRegistry",
    "run",
    "check_equivalence",
    "check_higher_equivalence",
    "check_bound",
    "check_distance",
    "write_trace_csv",
]
