"""统一加速张量方法 - p 范数镜像映射、张量更新子问题、A_k 序列与能量。

约定：
- 镜像映射 h(x) = (σ/p)‖x‖^p，σ 默认取 2^(p−2)，此时 h 是 p 阶 1-一致凸的
  （σ = 1 的 (1/p)‖x‖^p 只有 2^(2−p) 的一致凸常数）
- 只支持 p ∈ {2, 3}；p = 3 的子问题用 Hessian 的特征分解加割线函数二分
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import bisect, brentq

from .algorithms import RunTrace
from .config import section
from .errors import (
    CapabilityError,
    DivergenceError,
    DomainError,
    InvalidOrderError,
    SubsolverError,
    UnsupportedDiagnosticError,
)
from .hyperbolic import eval_sinh_p, get_table, higher_variants, sinhc
from .problems import Objective

logger = logging.getLogger(__name__)

_CFG = section("tensor")
DEFAULT_N: Dict[int, float] = {int(k): float(v) for k, v in (_CFG.get("default_N") or {2: 1.0, 3: 2.0}).items()}
DEFAULT_M: Dict[int, float] = {int(k): float(v) for k, v in (_CFG.get("default_M") or {2: 0.5, 3: 0.5}).items()}
SUBSOLVER_RTOL = float(_CFG.get("subsolver_rtol", 1e-12))
AK_RTOL = float(_CFG.get("ak_rtol", 1e-12))

SUPPORTED_ORDERS = (2, 3)
Vector = np.ndarray


def _check_order(p: int) -> int:
    if int(p) != p or int(p) not in SUPPORTED_ORDERS:
        raise InvalidOrderError(f"张量方法只支持 p ∈ {SUPPORTED_ORDERS}，收到 {p}")
    return int(p)


@dataclass
class MirrorMap:
    """h(x) = (σ/p)‖x‖^p 及其梯度、共轭梯度和 Bregman 散度。"""

    p: int
    scale: Optional[float] = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise InvalidOrderError(f"镜像映射阶数必须是 ≥ 2 的整数，收到 {self.p}")
        self.p = int(self.p)
        if self.scale is None:
            self.scale = 2.0 ** (self.p - 2)
        if not self.scale > 0:
            raise DomainError("镜像映射的尺度必须为正")

    def h(self, x: Vector) -> float:
        return self.scale / self.p * float(np.linalg.norm(x)) ** self.p

    def grad_h(self, x: Vector) -> Vector:
        x = np.asarray(x, dtype=float)
        return self.scale * float(np.linalg.norm(x)) ** (self.p - 2) * x

    def grad_h_star(self, w: Vector) -> Vector:
        """grad_h 的逆：‖x‖ = (‖w‖/σ)^(1/(p−1))，x = w/(σ‖x‖^(p−2))。"""
        w = np.asarray(w, dtype=float)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return np.zeros_like(w)
        r = (nw / self.scale) ** (1.0 / (self.p - 1))
        return w / (self.scale * r ** (self.p - 2))

    def bregman(self, y: Vector, x: Vector) -> float:
        """D_h(y, x) = h(y) − h(x) − ⟨∇h(x), y − x⟩。"""
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        return self.h(y) - self.h(x) - float(self.grad_h(x) @ (y - x))


def tensor_constant(p: int, M: float) -> float:
    """C = (1/p)(M/(p−1))^(p−1)。"""
    return (M / (p - 1)) ** (p - 1) / p


def relative_modulus(obj: Objective, mirror: MirrorMap, radius: float) -> float:
    """半径 radius 的球上，目标相对镜像映射的一致凸模的安全下界。

    ∇²h 在球上的范数不超过 (p−1)σR^(p−2)，因此 μ_rel = μ/((p−1)σR^(p−2))。
    """
    if not radius > 0:
        raise DomainError("半径必须为正")
    return obj.mu / ((mirror.p - 1) * mirror.scale * radius ** (mirror.p - 2))


# ---------- 张量更新 ----------
def tensor_update(obj: Objective, y: Vector, p: int, s: float, N: float) -> Vector:
    """G_{p,s,N}(y)：(p−1) 阶 Taylor 模型加 (N/(ps))‖x−y‖^p 的极小点。"""
    p = _check_order(p)
    if not N > 0 or not s > 0:
        raise DomainError(f"N 与 s 必须为正，收到 N={N}, s={s}")
    y = np.asarray(y, dtype=float)
    g = obj.gradient(y)
    if p == 2:
        return y - (s / N) * g
    if obj.hessian is None:
        raise CapabilityError(f"{obj.name} 没有 Hessian，无法执行 p = 3 的张量更新")
    if not np.any(g):
        return y.copy()
    lam, Q = eigh(obj.hessian(y))
    gh = Q.T @ g
    k = N / s

    def step_norm(r: float) -> float:
        return float(np.sqrt(np.sum((gh / (lam + k * r)) ** 2)))

    # (H + (N r/s)I) 在 r > r_lo 时正定
    r_lo = max(0.0, -float(lam[0]) / k) * (1.0 + 1e-12)
    if r_lo == 0.0 and lam[0] <= 0.0:
        r_lo = np.finfo(float).tiny

    def secular(r: float) -> float:
        return step_norm(r) - r

    r_hi = max(math.sqrt(float(np.linalg.norm(g)) / k), r_lo * 2.0, np.finfo(float).tiny)
    for _ in range(200):
        if secular(r_hi) < 0.0:
            break
        r_hi *= 2.0
    else:
        raise SubsolverError("三次正则子问题无法括住根")
    if secular(r_lo) <= 0.0:
        r = r_lo
    else:
        r = bisect(secular, r_lo, r_hi, xtol=1e-300, rtol=SUBSOLVER_RTOL, maxiter=2000)
    d = -Q @ (gh / (lam + k * r))
    return y + d


def check_M_ineq(obj: Objective, x: Vector, y: Vector, p: int, s: float, M: float) -> float:
    """⟨∇f(x), y−x⟩ − M·s^(1/(p−1))·‖∇f(x)‖^(p/(p−1))，非负表示不等式成立。"""
    gx = obj.gradient(np.asarray(x, dtype=float))
    gn = float(np.linalg.norm(gx))
    if gn == 0.0:
        return 0.0
    lhs = float(gx @ (np.asarray(y, dtype=float) - x))
    return lhs - M * s ** (1.0 / (p - 1)) * gn ** (p / (p - 1))


def certified_M(obj: Objective, x: Vector, y: Vector, p: int, s: float) -> float:
    """该步能保证的最大 M。"""
    gx = obj.gradient(np.asarray(x, dtype=float))
    gn = float(np.linalg.norm(gx))
    if gn == 0.0:
        return math.inf
    return float(gx @ (np.asarray(y, dtype=float) - x)) / (s ** (1.0 / (p - 1)) * gn ** (p / (p - 1)))


# ---------- A_k 序列 ----------
def next_Ak(A_k: float, p: int, s: float, mu: float, C: float) -> float:
    """(A − A_k)^p = C p^p s A^(p−1)(1 + μA_k) 的最大根。

    除以 A^(p−1) 后左边在 A > A_k 上严格递增，先倍增括住再二分。
    """
    if not A_k >= 0:
        raise DomainError(f"A_k 必须非负，收到 {A_k}")
    rhs = C * p ** p * s * (1.0 + mu * A_k)
    if A_k == 0.0:
        return rhs

    def residual(A: float) -> float:
        return (A - A_k) ** p / A ** (p - 1) - rhs

    width = max(rhs, A_k * 1e-12)
    for _ in range(2000):
        if residual(A_k + width) > 0.0:
            break
        width *= 2.0
    else:
        raise SubsolverError("A_{k+1} 无法括住根")
    if residual(A_k) >= 0.0:
        raise SubsolverError("A = A_k 处残差非负，括号不成立")
    return bisect(residual, A_k, A_k + width, xtol=1e-300, rtol=AK_RTOL, maxiter=2000)


def polynomial_Ak(k: int, p: int, s: float, C: float) -> float:
    """A_k = C s k(k+1)⋯(k+p−1)，即 t_k = (s k(k+1)⋯(k+p−1))^(1/p)。"""
    return C * s * math.prod(k + i for i in range(p))


def lower_bound_polynomial(k: int, p: int, s: float, C: float) -> float:
    return polynomial_Ak(k, p, s, C)


def lower_bound_geometric(k: int, p: int, s: float, mu: float, C: float) -> float:
    """C p^p s (1 + C^(1/p) p μ^(1/p) s^(1/p))^(k−1)，k ≥ 1。"""
    if k < 1:
        return 0.0
    rate = 1.0 + C ** (1.0 / p) * p * mu ** (1.0 / p) * s ** (1.0 / p)
    return C * p ** p * s * rate ** (k - 1)


def A_of_t(t: float, p: int, C: float, mu: float) -> float:
    """A(t) = C t^p sinhc_p^p(C^(1/p) μ^(1/p) t)。"""
    if t < 0:
        raise DomainError("t 必须非负")
    u = (C * mu) ** (1.0 / p) * t
    if p == 2:
        sc = sinhc(u)
    else:
        sc = higher_variants(p, u)["sinhc_p"]
    return C * t ** p * sc ** p


def t_of_A(A: float, p: int, C: float, mu: float) -> float:
    """A_of_t 的反函数。"""
    if A < 0:
        raise DomainError("A 必须非负")
    if A == 0.0:
        return 0.0
    if mu == 0.0:
        return (A / C) ** (1.0 / p)
    target = (mu * A) ** (1.0 / p)
    scale = (C * mu) ** (1.0 / p)
    if p == 2:
        return math.asinh(target) / scale
    if target < 1e-8:
        return target / scale
    table = get_table(p)
    u = brentq(lambda v: eval_sinh_p(table, v)[0] - target, 0.0, target, xtol=1e-300, rtol=4e-16)
    return u / scale


# ---------- 迭代 ----------
@dataclass
class TensorRunState:
    k: int
    x: Vector
    y: Vector
    z: Vector
    A: float
    t: float
    C: float
    M: float
    N: float
    p: int
    s: float
    mu: float
    m_residual: float = math.nan


def step_unified_tensor(state: TensorRunState, obj: Objective, mirror: MirrorMap,
                        A_next: Optional[float] = None) -> TensorRunState:
    """一步统一加速张量方法。

    y_k = x_k + ((A_{k+1}−A_k)/A_{k+1})(z_k − x_k)，x_{k+1} = G(y_k)，
    (1+μc)∇h(z_{k+1}) = ∇h(z_k) + c(μ∇h(x_{k+1}) − ∇f(x_{k+1}))，c = (A_{k+1}−A_k)/(1+μA_k)。
    """
    if mirror.p != state.p:
        raise InvalidOrderError(f"镜像映射阶数 {mirror.p} 与状态阶数 {state.p} 不一致")
    if A_next is None:
        A_next = next_Ak(state.A, state.p, state.s, state.mu, state.C)
    if not A_next > state.A:
        raise DomainError("A_{k+1} 必须大于 A_k")
    y = state.x + (A_next - state.A) / A_next * (state.z - state.x)
    x_next = tensor_update(obj, y, state.p, state.s, state.N)
    c = (A_next - state.A) / (1.0 + state.mu * state.A)
    w = (mirror.grad_h(state.z) + c * (state.mu * mirror.grad_h(x_next) - obj.gradient(x_next))) / (1.0 + state.mu * c)
    z_next = mirror.grad_h_star(w)
    return TensorRunState(
        k=state.k + 1, x=x_next, y=y, z=z_next, A=A_next, t=state.t,
        C=state.C, M=state.M, N=state.N, p=state.p, s=state.s, mu=state.mu,
        m_residual=check_M_ineq(obj, x_next, y, state.p, state.s, state.M),
    )


def energy_tensor(state: TensorRunState, obj: Objective, mirror: MirrorMap) -> float:
    """E_k = (1+μA_k)D_h(x*, z_k) + A_k(f(x_k) − f*)。"""
    if not obj.has_solution:
        raise UnsupportedDiagnosticError(f"{obj.name} 缺少极小点，无法计算张量能量")
    e = (1.0 + state.mu * state.A) * mirror.bregman(obj.minimizer, state.z)
    if state.A > 0.0:
        e += state.A * obj.gap(state.x)
    return e


def run_unified_tensor(obj: Objective, x0: Vector, p: int, s: float, iterations: int,
                       mu: Optional[float] = None, N: Optional[float] = None, M: Optional[float] = None,
                       sequence: str = "specific", mirror: Optional[MirrorMap] = None) -> RunTrace:
    """运行统一加速张量方法，记录 A_k、M 不等式残差、能量和 E_0/A_k 界。

    sequence="specific" 取满足 A_k 条件的最大根；"polynomial" 取 A_k = C s k(k+1)⋯(k+p−1)（μ = 0 的经典形式）。
    mu 缺省时 p = 2 用目标的 μ，p = 3 用 relative_modulus 在半径 2‖x_0−x*‖ + ‖x*‖ 上的值。
    """
    p = _check_order(p)
    if not s > 0:
        raise DomainError("步长必须为正")
    if sequence not in ("specific", "polynomial"):
        raise DomainError(f"未知的 A_k 序列: {sequence}")
    mirror = mirror or MirrorMap(p)
    N = DEFAULT_N[p] if N is None else N
    M = DEFAULT_M[p] if M is None else M
    C = tensor_constant(p, M)
    x0 = np.asarray(x0, dtype=float)
    if mu is None:
        if p == 2 or not obj.has_solution:
            mu = obj.mu if p == 2 else 0.0
        else:
            radius = 2.0 * obj.distance(x0) + float(np.linalg.norm(obj.minimizer))
            mu = relative_modulus(obj, mirror, radius) if radius > 0 else 0.0
    if sequence == "polynomial":
        mu = 0.0

    state = TensorRunState(k=0, x=x0.copy(), y=x0.copy(), z=x0.copy(), A=0.0, t=0.0,
                           C=C, M=M, N=N, p=p, s=s, mu=mu)
    trace = RunTrace(scheme_id=f"TENSOR_p{p}", problem=obj.name, s=s, mu=mu, seed=obj.info.get("seed"),
                     metadata={"p": p, "N": N, "M": M, "C": C, "sequence": sequence, "mirror_scale": mirror.scale})
    diagnostics = obj.has_solution
    e0 = energy_tensor(state, obj, mirror) if diagnostics else math.nan
    limit = 1e12 * max(abs(obj.value(x0)), 1.0)
    worst_m = math.inf
    logger.info(f"开始运行张量方法: p={p}, {obj.name}, s={s:g}, μ={mu:g}, N={N:g}, M={M:g}, K={iterations}")

    for k in range(iterations):
        if sequence == "polynomial":
            A_next = polynomial_Ak(k + 1, p, s, C)
        else:
            A_next = next_Ak(state.A, p, s, mu, C)
        new = step_unified_tensor(state, obj, mirror, A_next=A_next)
        new.t = t_of_A(A_next, p, C, mu)
        row = {"k": k, "t_k": state.t, "f_gap": math.nan, "grad_norm": float(np.linalg.norm(obj.gradient(new.y))),
               "energy": math.nan, "bound": math.nan, "A_k": state.A, "M_residual": new.m_residual}
        if diagnostics:
            row["f_gap"] = obj.gap(state.x)
            row["energy"] = energy_tensor(state, obj, mirror)
            row["bound"] = e0 / state.A if state.A > 0 else math.inf
        trace.records.append(row)
        worst_m = min(worst_m, certified_M(obj, new.x, new.y, p, s))
        fx = obj.value(new.x)
        if not math.isfinite(fx) or abs(fx) > limit:
            raise DivergenceError(f"张量方法第 {k + 1} 步发散（f = {fx}）", partial=trace)
        state = new

    trace.final_state = state
    trace.metadata["certified_M"] = worst_m
    trace.metadata["min_M_residual"] = min((r["M_residual"] for r in trace.records), default=math.nan)
    logger.info(f"张量方法结束: 可保证的 M = {worst_m:.4g}")
    return trace
