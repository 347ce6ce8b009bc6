"""
束方法子问题

    min_x  max_j ℓ_j(x) + (ρ/2)‖x − x_c‖²

通过单纯形上的对偶二次规划求解:

    min_{λ∈Δ}  (1/2ρ) λᵀQλ − vᵀλ,   Q = GGᵀ,  v_j = ℓ_j(x_c)

原始解由 z = x_c − Gᵀλ/ρ 恢复。最优性等价于 λ 的支撑集上 ℓ_j(z) 取到
max_j ℓ_j(z)，据此计算对偶间隙作为收敛判据。
"""

from typing import List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from ..exceptions import NumericalError, ParameterError
from ..models import Plane


logger = logging.getLogger(__name__)


# 积极集迭代上限（每次迭代至多加入一个割平面）
ACTIVE_SET_MAX_ITER = 500
# 加权最小二乘 KKT 残差容差
KKT_RESIDUAL_TOL = 1e-9
# 对偶间隙容差（相对于割平面值的量级）
DUAL_GAP_TOL = 1e-10
# 投影梯度回退的迭代上限
PG_MAX_ITER = 20000
# 权重视为零的阈值
WEIGHT_EPS = 1e-15


def project_simplex(y: np.ndarray) -> np.ndarray:
    """欧氏投影到概率单纯形（排序法）"""
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    index = np.arange(1, y.size + 1)
    positive = u - css / index > 0
    r = index[positive][-1]
    tau = css[positive][-1] / r
    return np.maximum(y - tau, 0.0)


def _plane_values(planes: Sequence[Plane], x: np.ndarray) -> np.ndarray:
    return np.array([plane.value(x) for plane in planes])


def _dual_gap(planes: Sequence[Plane], z: np.ndarray, weights: np.ndarray) -> Tuple[float, float]:
    """返回 (max_j ℓ_j(z) − Σλ_j ℓ_j(z), max_j ℓ_j(z))"""
    values = _plane_values(planes, z)
    model_value = float(np.max(values))
    return model_value - float(weights @ values), model_value


def _recover_primal(gradients: np.ndarray, weights: np.ndarray, center: np.ndarray,
                    rho: float) -> np.ndarray:
    return center - (weights @ gradients) / rho


def _solve_equality_qp(Q: np.ndarray, v: np.ndarray, support: List[int],
                       rho: float) -> Optional[np.ndarray]:
    """
    支撑集上的等式约束二次规划

        [Q_SS/ρ  1] [λ_S]   [v_S]
        [1ᵀ      0] [ μ ] = [ 1 ]

    Q_SS 可能奇异，用最小二乘求解；方程不相容时返回 None。
    """
    s = len(support)
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = Q[np.ix_(support, support)] / rho
    kkt[:s, s] = 1.0
    kkt[s, :s] = 1.0
    rhs = np.concatenate([v[support], [1.0]])
    solution, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    residual = float(np.linalg.norm(kkt @ solution - rhs))
    if residual > KKT_RESIDUAL_TOL * max(1.0, float(np.max(np.abs(rhs)))):
        return None
    return solution[:s]


def _active_set(Q: np.ndarray, v: np.ndarray, rho: float) -> Optional[np.ndarray]:
    """
    单纯形上的原始积极集法

    从 argmax v 的顶点出发，每轮加入 ℓ_j(z) 最大且高于当前水平的割平面，
    解等式子问题；出现负权重时沿连线做比值检验并移出阻塞下标。
    """
    m = v.size
    weights = np.zeros(m)
    start = int(np.argmax(v))
    weights[start] = 1.0
    support = [start]
    scale = max(1.0, float(np.max(np.abs(v))))

    for _ in range(ACTIVE_SET_MAX_ITER):
        values = v - (Q @ weights) / rho
        level = float(weights @ values)
        candidates = [j for j in range(m) if j not in support]
        if not candidates:
            return weights
        entering = max(candidates, key=lambda j: values[j])
        if values[entering] <= level + 1e-13 * scale:
            return weights
        support.append(entering)

        while True:
            target = _solve_equality_qp(Q, v, support, rho)
            if target is None:
                return None
            current = weights[support]
            if np.all(target >= -WEIGHT_EPS):
                target = np.maximum(target, 0.0)
                weights = np.zeros(m)
                weights[support] = target / target.sum()
                support = [j for j in support if weights[j] > 0.0]
                break
            # 比值检验: 沿 current → target 前进到第一个分量为零
            blocking = [
                (current[i] / (current[i] - target[i]), i)
                for i in range(len(support))
                if target[i] < 0.0
            ]
            step, leaving = min(blocking)
            moved = current + step * (target - current)
            moved[leaving] = 0.0
            moved[moved <= WEIGHT_EPS] = 0.0
            weights = np.zeros(m)
            weights[support] = moved
            weights /= weights.sum()
            support = [j for j in support if weights[j] > 0.0]
    return None


def _projected_gradient(Q: np.ndarray, v: np.ndarray, rho: float, start: np.ndarray,
                        planes: Sequence[Plane], gradients: np.ndarray,
                        center: np.ndarray, tol: float) -> np.ndarray:
    """FISTA 加速投影梯度，作为积极集失败时的回退"""
    curvature = float(np.linalg.eigvalsh(Q)[-1]) / rho
    if curvature <= 0.0:
        weights = np.zeros(v.size)
        weights[int(np.argmax(v))] = 1.0
        return weights
    step = 1.0 / curvature
    weights = start.copy()
    extrapolated = start.copy()
    momentum = 1.0
    for _ in range(PG_MAX_ITER):
        gradient = (Q @ extrapolated) / rho - v
        updated = project_simplex(extrapolated - step * gradient)
        next_momentum = (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum)) / 2.0
        extrapolated = updated + ((momentum - 1.0) / next_momentum) * (updated - weights)
        weights, momentum = updated, next_momentum
        gap, _ = _dual_gap(planes, _recover_primal(gradients, weights, center, rho), weights)
        if gap <= tol:
            break
    return weights


def solve_multicut_subproblem(
    planes: Sequence[Plane],
    center: np.ndarray,
    rho: float,
) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    求解多割束子问题

    Args:
        planes: 割平面或仿射面，至少一个
        center: 稳定中心 x_c
        rho: 近端权重 ρ > 0

    Returns:
        Tuple: (z, λ, max_j ℓ_j(z))，λ 在单纯形上

    Raises:
        ParameterError: 割平面为空或 ρ ≤ 0
        NumericalError: 积极集与投影梯度都未能把对偶间隙压到容差以下
    """
    if not planes:
        raise ParameterError("planes", "至少需要一个割平面")
    if rho <= 0:
        raise ParameterError("rho", "必须为正")

    gradients = np.array([plane.gradient for plane in planes])
    v = _plane_values(planes, center)
    Q = gradients @ gradients.T
    tol = DUAL_GAP_TOL * max(1.0, float(np.max(np.abs(v))))

    weights = _active_set(Q, v, rho)
    if weights is not None:
        z = _recover_primal(gradients, weights, center, rho)
        gap, model_value = _dual_gap(planes, z, weights)
        if gap <= tol:
            return z, weights, model_value
        logger.debug(f"积极集对偶间隙 {gap:.3e} 超过容差，改用投影梯度")
        start = weights
    else:
        logger.debug(f"积极集 KKT 系统不相容 (m={len(planes)})，改用投影梯度")
        start = np.full(v.size, 1.0 / v.size)

    weights = _projected_gradient(Q, v, rho, start, planes, gradients, center, tol)
    z = _recover_primal(gradients, weights, center, rho)
    gap, model_value = _dual_gap(planes, z, weights)
    if gap > tol:
        raise NumericalError(f"多割子问题未收敛 (m={len(planes)})", residual=gap)
    return z, weights, model_value


def solve_two_cut_subproblem(
    newest: Plane,
    aggregate: Optional[Plane],
    center: np.ndarray,
    rho: float,
) -> Tuple[np.ndarray, float, float]:
    """
    两割子问题的闭式解

    模型为 max{ℓ_new, ℓ_agg}；aggregate 为 None 表示聚合面为 −∞。
    对偶变量 θ 是聚合面的权重:

        θ = clip((ρ(v_agg − v_new) − ⟨g, d⟩)/‖d‖², 0, 1),  d = a − g

    Returns:
        Tuple: (z, θ, 模型在 z 处的值)
    """
    if rho <= 0:
        raise ParameterError("rho", "必须为正")
    g = newest.gradient
    if aggregate is None:
        theta = 0.0
    else:
        a = aggregate.gradient
        d = a - g
        dd = float(d @ d)
        v_new = newest.value(center)
        v_agg = aggregate.value(center)
        if dd == 0.0:
            theta = 1.0 if v_agg > v_new else 0.0
        else:
            theta = min(1.0, max(0.0, (rho * (v_agg - v_new) - float(g @ d)) / dd))

    if theta == 0.0:
        direction = g
    else:
        direction = theta * aggregate.gradient + (1.0 - theta) * g
    z = center - direction / rho
    model_value = newest.value(z)
    if aggregate is not None:
        model_value = max(model_value, aggregate.value(z))
    return z, theta, model_value
