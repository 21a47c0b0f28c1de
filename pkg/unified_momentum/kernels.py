"""差分矩阵与微分核

负责：
- θ 序列、OGM / OGM-G 差分矩阵、由二序列动量参数构造的差分矩阵
- 闭式微分核 H(t, τ) 与由 (b, c) 数值求积得到的核
- 离散 / 连续反转置关系检查、差分矩阵到微分核的极限检查
- 沿积分轨迹的积分-微分方程残差
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.integrate import IntegrationWarning, quad, simpson

from .algorithms import DIVERGENCE_FACTOR, SchemeId, scheme_sequences, to_two_sequence
from .config import section
from .errors import DivergenceError, DomainError, ToleranceNotReachedError, UnsupportedDiagnosticError
from .hyperbolic import log_cosh, log_sinhc
from .problems import Objective

logger = logging.getLogger(__name__)

_CFG = section("kernels")
QUAD_TOL = float(_CFG.get("quad_tol", 1e-10))

Vector = np.ndarray


class MatrixOrigin(str, Enum):
    OGM = "OGM"
    OGM_G = "OGM_G"
    FROM_TWO_SEQ = "FROM_TWO_SEQ"


class KernelId(str, Enum):
    NAG_C = "NAG_C"
    NAG_SC = "NAG_SC"
    OGM = "OGM"
    OGM_G = "OGM_G"
    UNIFIED_NAG = "UNIFIED_NAG"
    UNIFIED_NAG_G = "UNIFIED_NAG_G"
    FROM_BC = "FROM_BC"


# ---------- 差分矩阵 ----------
@dataclass
class DifferenceMatrix:
    """下三角 N×N 差分矩阵，对角线含 Kronecker δ 项。"""

    origin: MatrixOrigin
    entries: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2 or self.entries.shape[0] != self.entries.shape[1]:
            raise DomainError("差分矩阵必须是方阵")
        if not np.all(np.isfinite(self.entries)):
            raise DomainError("差分矩阵含非有限元素")
        if np.any(np.triu(self.entries, k=1) != 0.0):
            raise DomainError("差分矩阵必须是下三角的")

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def anti_transpose(self) -> np.ndarray:
        """关于反对角线的反射：A_ij = h_{N−1−j, N−1−i}。"""
        return self.entries[::-1, ::-1].T

    def to_frame(self) -> pd.DataFrame:
        rows = [(i, j, self.entries[i, j]) for i in range(self.N) for j in range(i + 1)]
        return pd.DataFrame(rows, columns=["i", "j", "h_ij"])

    def write(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path


def theta_sequence(N: int) -> np.ndarray:
    """θ_0 = 1；1 ≤ k ≤ N−1 时 θ_k = (1 + √(4θ²+1))/2；θ_N = (1 + √(8θ²+1))/2。"""
    if int(N) != N or N < 1:
        raise DomainError(f"迭代次数 N 必须是正整数，收到 {N}")
    theta = np.empty(N + 1)
    theta[0] = 1.0
    for k in range(1, N + 1):
        factor = 8.0 if k == N else 4.0
        theta[k] = (1.0 + math.sqrt(factor * theta[k - 1] ** 2 + 1.0)) / 2.0
    return theta


def build_HF(N: int) -> DifferenceMatrix:
    """OGM 的差分矩阵。"""
    theta = theta_sequence(N)
    h = np.zeros((N, N))
    for i in range(N):
        h[i, i] = 1.0 + (2.0 * theta[i] - 1.0) / theta[i + 1]
        if i == 0:
            continue
        ratio = (theta[i] - 1.0) / theta[i + 1]
        h[i, i - 1] = ratio * (h[i - 1, i - 1] - 1.0)
        h[i, : i - 1] = ratio * h[i - 1, : i - 1]
    return DifferenceMatrix(MatrixOrigin.OGM, h, label=f"OGM(N={N})")


def build_HG(N: int) -> DifferenceMatrix:
    """OGM-G 的差分矩阵，次对角及以下的递推因子按列下标 j 取 (θ_{N−j−1} − 1)/θ_{N−j}。"""
    theta = theta_sequence(N)
    h = np.zeros((N, N))
    for i in range(N):
        h[i, i] = 1.0 + (2.0 * theta[N - i - 1] - 1.0) / theta[N - i]
        for j in range(i - 1, -1, -1):
            ratio = (theta[N - j - 1] - 1.0) / theta[N - j]
            h[i, j] = ratio * (h[i, i] - 1.0) if j == i - 1 else ratio * h[i, j + 1]
    return DifferenceMatrix(MatrixOrigin.OGM_G, h, label=f"OGM_G(N={N})")


def anti_transpose_defect(first: DifferenceMatrix, second: DifferenceMatrix) -> float:
    """max |h¹_ij − h²_{N−1−j, N−1−i}|。"""
    if first.N != second.N:
        raise DomainError("两个差分矩阵的阶数不同")
    return float(np.max(np.abs(first.entries - second.anti_transpose())))


def matrix_from_two_sequence(betas: Sequence[float], gammas: Sequence[float], N: int,
                             label: str = "") -> DifferenceMatrix:
    """h_ij = (β_j + γ_j)·Π_{ν=j+1..i} β_ν + [i = j]。"""
    b = np.asarray(betas, dtype=float)
    g = np.asarray(gammas, dtype=float)
    if len(b) < N or len(g) < N:
        raise DomainError(f"β、γ 序列长度至少为 N = {N}")
    h = np.zeros((N, N))
    for j in range(N):
        value = b[j] + g[j]
        h[j, j] = value + 1.0
        for i in range(j + 1, N):
            value *= b[i]
            h[i, j] = value
    return DifferenceMatrix(MatrixOrigin.FROM_TWO_SEQ, h, label=label)


def nag_c_matrix(N: int, s: float = 1.0) -> DifferenceMatrix:
    """NAG-C 的差分矩阵（β_k = (k−1)/(k+2)，γ_k = 0，与 s 无关）。"""
    taus, deltas, _ = scheme_sequences(SchemeId.NAG_C, 0.0, s, N + 1)
    betas, gammas = to_two_sequence(taus, deltas, 0.0, s)
    return matrix_from_two_sequence(betas, gammas, N, label=f"NAG_C(N={N})")


def nag_sc_matrix(N: int, mu: float, s: float) -> DifferenceMatrix:
    """NAG-SC 的差分矩阵，h_ij = ρ^(i−j+1) + [i = j]，ρ = (1−√(μs))/(1+√(μs))。"""
    taus, deltas, _ = scheme_sequences(SchemeId.NAG_SC, mu, s, N + 1)
    betas, gammas = to_two_sequence(taus, deltas, mu, s)
    return matrix_from_two_sequence(betas, gammas, N, label=f"NAG_SC(N={N}, mu={mu:g}, s={s:g})")


def matrix_by_origin(origin: str, N: int, mu: float = 0.0, s: float = 1.0) -> DifferenceMatrix:
    """命令行使用的矩阵目录：OGM、OGM_G、NAG_C、NAG_SC。"""
    key = origin.upper()
    if key == "OGM":
        return build_HF(N)
    if key == "OGM_G":
        return build_HG(N)
    if key == "NAG_C":
        return nag_c_matrix(N, s)
    if key == "NAG_SC":
        return nag_sc_matrix(N, mu, s)
    raise DomainError(f"未知的差分矩阵来源: {origin}")


def run_fsfo(matrix: DifferenceMatrix, obj: Objective, s: float, y0: Vector,
             steps: Optional[int] = None) -> np.ndarray:
    """y_{i+1} = y_i − sΣ_{j≤i} h_ij∇f(y_j)，返回 y_0..y_steps。"""
    if not s > 0:
        raise DomainError(f"步长必须为正，收到 s={s}")
    steps = matrix.N if steps is None else steps
    if steps > matrix.N:
        raise DomainError(f"步数 {steps} 超过矩阵阶数 {matrix.N}")
    y = np.asarray(y0, dtype=float).copy()
    limit = DIVERGENCE_FACTOR * max(abs(obj.value(y)), 1.0)
    ys = [y.copy()]
    grads = np.empty((steps, y.size))
    for i in range(steps):
        grads[i] = obj.gradient(y)
        y = y - s * (matrix.entries[i, : i + 1] @ grads[: i + 1])
        fy = obj.value(y)
        if not math.isfinite(fy) or abs(fy) > limit:
            raise DivergenceError(f"固定步长格式第 {i + 1} 步发散（f = {fy}）", partial=np.array(ys))
        ys.append(y.copy())
    return np.array(ys)


# ---------- 微分核 ----------
@dataclass(frozen=True)
class DifferentialKernel:
    """H(t, τ)，定义在 0 ≤ τ ≤ t（有终止时刻 T 时还要求 t < T）上。

    b(t) 是 ∂H/∂t = −b(t)H 中的系数，c(t) 满足 H(t, t) = 1 + c(t)。
    """

    kernel_id: KernelId
    function: Callable[[np.ndarray, np.ndarray], np.ndarray]
    b: Optional[Callable[[float], float]] = None
    c: Optional[Callable[[float], float]] = None
    T: Optional[float] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, t, tau):
        t_arr = np.asarray(t, dtype=float)
        tau_arr = np.asarray(tau, dtype=float)
        if np.any(tau_arr < 0) or np.any(tau_arr > t_arr + 1e-12):
            raise DomainError("微分核只在 0 ≤ τ ≤ t 上定义")
        if self.T is not None and np.any(t_arr >= self.T):
            raise DomainError(f"微分核只在 t < T = {self.T} 上定义")
        out = self.function(t_arr, tau_arr)
        return float(out) if np.ndim(out) == 0 else out


def _log_unified(t: np.ndarray, a: float) -> np.ndarray:
    """log(sinh³(at)cosh(at)/a³)，减去 a³ 后在 a → 0 时仍有意义。"""
    t = np.asarray(t, dtype=float)
    ls = np.vectorize(log_sinhc, otypes=[float])(a * t)
    lc = np.vectorize(log_cosh, otypes=[float])(a * t)
    with np.errstate(divide="ignore"):
        return 3.0 * np.log(t) + 3.0 * ls + lc


def kernel_closed_form(kernel_id, mu: float = 0.0, T: Optional[float] = None) -> DifferentialKernel:
    """闭式微分核。

    NAG-C τ³/t³；NAG-SC e^(−2√μ(t−τ))；OGM 2τ³/t³；OGM-G 2(T−t)³/(T−τ)³；
    统一 NAG sinh³(aτ)cosh(aτ)/(sinh³(at)cosh(at))，a = √μ/2；统一 NAG-G 为其在 T − · 下的对应形式。
    """
    kid = KernelId(kernel_id)
    if not mu >= 0:
        raise DomainError(f"mu 必须非负，收到 {mu}")
    r = math.sqrt(mu)
    a = r / 2.0
    if kid in (KernelId.OGM_G, KernelId.UNIFIED_NAG_G) and (T is None or not T > 0):
        raise DomainError(f"{kid.value} 需要正的终止时刻 T")

    if kid == KernelId.NAG_C:
        return DifferentialKernel(kid, lambda t, tau: (tau / t) ** 3,
                                  b=lambda t: 3.0 / t, c=lambda t: 0.0)
    if kid == KernelId.NAG_SC:
        return DifferentialKernel(kid, lambda t, tau: np.exp(-2.0 * r * (t - tau)),
                                  b=lambda t: 2.0 * r, c=lambda t: 0.0, params={"mu": mu})
    if kid == KernelId.OGM:
        return DifferentialKernel(kid, lambda t, tau: 2.0 * (tau / t) ** 3,
                                  b=lambda t: 3.0 / t, c=lambda t: 1.0)
    if kid == KernelId.OGM_G:
        return DifferentialKernel(kid, lambda t, tau: 2.0 * ((T - t) / (T - tau)) ** 3,
                                  b=lambda t: 3.0 / (T - t), c=lambda t: 1.0, T=T)

    def b_unified(u: float) -> float:
        return r / 2.0 * math.tanh(a * u) + 3.0 / u * (1.0 if a * u == 0.0 else a * u / math.tanh(a * u))

    if kid == KernelId.UNIFIED_NAG:
        return DifferentialKernel(
            kid, lambda t, tau: np.exp(_log_unified(tau, a) - _log_unified(t, a)),
            b=b_unified, c=lambda t: 0.0, params={"mu": mu},
        )
    if kid == KernelId.UNIFIED_NAG_G:
        return DifferentialKernel(
            kid, lambda t, tau: np.exp(_log_unified(T - t, a) - _log_unified(T - tau, a)),
            b=lambda t: b_unified(T - t), c=lambda t: 0.0, T=T, params={"mu": mu},
        )
    raise DomainError("FROM_BC 核请使用 kernel_from_bc 构造")


def kernel_from_bc(b: Callable[[float], float], c: Callable[[float], float],
                   tol: float = QUAD_TOL) -> DifferentialKernel:
    """H(t, τ) = (1 + c(τ))·exp(−∫_τ^t b(s) ds)，积分用自适应求积，精度 tol。"""

    def single(t: float, tau: float) -> float:
        if t == tau:
            return 1.0 + c(tau)
        with warnings.catch_warnings():
            warnings.simplefilter("error", IntegrationWarning)
            try:
                value, err = quad(b, tau, t, epsabs=tol, epsrel=tol, limit=200)
            except IntegrationWarning as exc:
                raise ToleranceNotReachedError(f"∫b 在 [{tau}, {t}] 上求积失败: {exc}") from exc
        if err > max(tol, tol * abs(value)) * 10.0:
            raise ToleranceNotReachedError(f"∫b 在 [{tau}, {t}] 上的误差估计 {err:.2e} 超过 {tol:.0e}", best=value)
        return (1.0 + c(tau)) * math.exp(-value)

    vec = np.vectorize(single, otypes=[float])
    return DifferentialKernel(KernelId.FROM_BC, lambda t, tau: vec(t, tau), b=b, c=c, params={"tol": tol})


def _grid_points(T: float, n: int) -> np.ndarray:
    return T * np.arange(1, n + 1) / (n + 1)


def check_anti_transpose(first: DifferentialKernel, second: DifferentialKernel, T: float, grid: int = 100) -> float:
    """max |H₁(t, τ) − H₂(T − τ, T − t)|，网格取 (0, T) 内 grid 个等距点中的 τ ≤ t 对。"""
    pts = _grid_points(T, grid)
    t, tau = np.meshgrid(pts, pts, indexing="ij")
    mask = tau <= t
    t, tau = t[mask], tau[mask]
    deviation = float(np.max(np.abs(first(t, tau) - second(T - tau, T - t))))
    logger.info(f"反转置检查 {first.kernel_id.value} ↔ {second.kernel_id.value}: 最大偏差 {deviation:.3e}")
    return deviation


def kernel_grid(kernel: DifferentialKernel, T: float, n: int) -> pd.DataFrame:
    """(0, T) 内 n 个等距点上所有 τ ≤ t 的 (t, tau, H)。"""
    pts = _grid_points(T, n)
    t, tau = np.meshgrid(pts, pts, indexing="ij")
    mask = tau <= t
    return pd.DataFrame({"t": t[mask], "tau": tau[mask], "H": kernel(t[mask], tau[mask])})


def write_kernel_grid(kernel: DifferentialKernel, T: float, n: int, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kernel_grid(kernel, T, n).to_csv(path, index=False, float_format="%.17g")
    return path


def kernel_time_derivative_residual(kernel: DifferentialKernel, t: float, tau: float, h: float = 1e-5) -> float:
    """|∂H/∂t + b(t)H|，∂H/∂t 取中心差分。"""
    if kernel.b is None:
        raise UnsupportedDiagnosticError(f"{kernel.kernel_id.value} 没有系数 b(t)")
    if not tau < t - h:
        raise DomainError("需要 τ < t − h")
    dH = (kernel(t + h, tau) - kernel(t - h, tau)) / (2.0 * h)
    return abs(dH + kernel.b(t) * kernel(t, tau))


def kernel_limit_convergence(family: Callable[[float, int], DifferenceMatrix], kernel: DifferentialKernel,
                             t: float, tau: float,
                             stepsizes: Sequence[float] = (1e-2, 1e-3, 1e-4)) -> List[float]:
    """对每个 s 取 i = ⌊t/√s⌋、j = ⌊τ/√s⌋，返回 |h_ij − H(t, τ)|。family(s, N) 生成 N 阶矩阵。"""
    if not 0 < tau < t:
        raise DomainError("需要 0 < τ < t（对角元含 δ 项，不参与比较）")
    target = kernel(t, tau)
    out: List[float] = []
    for s in stepsizes:
        if not s > 0:
            raise DomainError(f"步长必须为正，收到 {s}")
        i = int(math.floor(t / math.sqrt(s)))
        j = int(math.floor(tau / math.sqrt(s)))
        matrix = family(s, i + 1)
        out.append(abs(float(matrix.entries[i, j]) - target))
    logger.info(f"核极限检查 {kernel.kernel_id.value} at ({t}, {tau}): {', '.join(f'{d:.3e}' for d in out)}")
    return out


def integro_residual(trajectory, kernel: DifferentialKernel, obj: Objective, t: float) -> float:
    """‖Ẋ(t) + ∫_0^t H(t, τ)∇f(X(τ)) dτ‖，积分在轨迹节点上用 Simpson 公式。"""
    times = trajectory.times
    idx = int(np.argmin(np.abs(times - t)))
    if abs(times[idx] - t) > 1e-9 * max(1.0, t):
        raise DomainError(f"t = {t} 不是轨迹节点")
    if idx < 2:
        raise DomainError("积分区间内节点过少")
    nodes = times[: idx + 1]
    weights = kernel(np.full_like(nodes, times[idx]), nodes)
    grads = np.array([obj.gradient(x) for x in trajectory.X[: idx + 1]])
    integral = simpson(weights[:, None] * grads, x=nodes, axis=0)
    return float(np.linalg.norm(trajectory.dX[idx] + integral))
