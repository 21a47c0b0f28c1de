"""离散动量算法 - 三序列格式、NAG-C、NAG-SC、统一 NAG（常数/自适应时间步）、原始 NAG

负责：
- 各格式的 (τ_k, δ_k, t_{k+1}) 系数生成
- 三序列迭代引擎与二序列（动量）形式
- Lyapunov 能量与理论收敛界
- t_k 序列条件检查、共线性检查
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .config import section
from .errors import (
    ConsistencyError,
    DivergenceError,
    DomainError,
    StepsizeTooLargeError,
    UnsupportedDiagnosticError,
)
from .hyperbolic import cothc, log_cosh, log_sinhc, tanhc
from .problems import Objective

logger = logging.getLogger(__name__)

_CFG = section("algorithms")
DIVERGENCE_FACTOR = float(_CFG.get("divergence_factor", 1e12))
ENERGY_SLACK = float(_CFG.get("energy_slack", 1e-10))

Vector = np.ndarray


class SchemeId(str, Enum):
    NAG_C = "NAG_C"
    NAG_SC = "NAG_SC"
    UNIFIED_CONSTANT = "UNIFIED_CONSTANT"
    UNIFIED_ADAPTIVE = "UNIFIED_ADAPTIVE"
    ORIGINAL_NAG = "ORIGINAL_NAG"


UNIFIED_SCHEMES = (SchemeId.NAG_C, SchemeId.UNIFIED_CONSTANT, SchemeId.UNIFIED_ADAPTIVE)


def _check_stepsize(mu: float, s: float) -> None:
    if not s > 0:
        raise DomainError(f"步长必须为正，收到 s={s}")
    if not mu >= 0:
        raise DomainError(f"mu 必须非负，收到 {mu}")
    if mu * s >= 1.0:
        raise StepsizeTooLargeError(f"需要 μs < 1，收到 μs = {mu * s:g}")


# ---------- 时间步与 α 的换算 ----------
def iota(mu: float, s: float) -> float:
    """常数时间步因子 ι = −log(1−√(μs))/√(μs)，μ = 0 时为 1。"""
    _check_stepsize(mu, s)
    q = math.sqrt(mu * s)
    if q == 0.0:
        return 1.0
    return -math.log1p(-q) / q


def alpha_of_t(t: float, mu: float, s: float) -> float:
    """α(t) = (2√s/t)·cothc(√μ t/2)，从 (0, ∞) 单调映到 (√(μs), ∞)。"""
    if t <= 0:
        return math.inf
    return 2.0 * math.sqrt(s) / t * cothc(math.sqrt(mu) * t / 2.0)


def t_of_alpha(alpha: float, mu: float, s: float) -> float:
    """α(t) 的反函数。

    α(t) = √(μs)·coth(√μ t/2)，故 t = (2√s/α)·artanh(r)/r，r = √(μs)/α。
    """
    floor = math.sqrt(mu * s)
    if not alpha > floor:
        raise DomainError(f"需要 α > √(μs) = {floor:g}，收到 {alpha}")
    lo = 2.0 * math.sqrt(s) / alpha
    r = floor / alpha
    if r == 0.0:
        return lo
    return lo * math.atanh(r) / r


def timestep_adaptive_next(alpha_prev: float, mu: float, s: float) -> float:
    """α_k² = (1−α_k)α_{k−1}² + μsα_k 在 (√(μs), ∞) 中的唯一根（q 形式求根公式）。"""
    if not alpha_prev > math.sqrt(mu * s):
        raise DomainError(f"需要 α_prev > √(μs)，收到 α_prev={alpha_prev}, μs={mu * s:g}")
    a2 = alpha_prev * alpha_prev
    b = a2 - mu * s
    return 2.0 * a2 / (b + math.sqrt(b * b + 4.0 * a2))


def _original_alpha(gamma: float, mu: float, s: float) -> float:
    """(1/s)α² = (1−α)γ + μα 的正根。"""
    b = s * (gamma - mu)
    c = s * gamma
    disc = math.sqrt(b * b + 4.0 * c)
    if b >= 0:
        return 2.0 * c / (b + disc)
    return (-b + disc) / 2.0


def gamma0_of_t0(t0: float, mu: float) -> float:
    """γ_0 = (4/t_0²)·cothc²(√μ t_0/2)。"""
    if not t0 > 0:
        raise DomainError(f"t_0 必须为正，收到 {t0}")
    return 4.0 / (t0 * t0) * cothc(math.sqrt(mu) * t0 / 2.0) ** 2


def t0_of_gamma0(gamma0: float, mu: float, s: float) -> float:
    """gamma0_of_t0 的反函数，要求 γ_0 > μ。"""
    if not gamma0 > mu:
        raise DomainError(f"需要 γ_0 > μ，收到 γ_0={gamma0}, μ={mu}")
    return t_of_alpha(math.sqrt(s * gamma0), mu, s)


def coeffs_unified_constant(mu: float, s: float, k: int) -> Tuple[float, float, float]:
    """统一 NAG 的 (τ_k, δ_k, t_{k+1})，t_k = k·ι√s。"""
    _check_stepsize(mu, s)
    io = iota(mu, s)
    arg = (k + 1) * io * math.sqrt(mu * s) / 2.0
    tau = (2.0 / (io * (k + 1)) * cothc(arg) - mu * s) / (1.0 - mu * s)
    delta = io * s * (k + 1) / 2.0 * tanhc(arg)
    return tau, delta, (k + 1) * io * math.sqrt(s)


@dataclass
class SchemeCoefficients:
    """按迭代生成 (τ_k, δ_k, t_{k+1}) 的系数发生器。

    NAG_C 在 z 更新中不使用 μ（update_mu 为 0）；NAG_SC 需要 μ > 0；
    UNIFIED_ADAPTIVE 从 α_{−1} = α(t_0) 出发；ORIGINAL_NAG 维护 γ_k。
    """

    scheme_id: SchemeId
    mu: float
    s: float
    t0: Optional[float] = None
    gamma0: Optional[float] = None
    k: int = 0
    t_k: float = 0.0
    alpha_prev: Optional[float] = None
    gamma_k: Optional[float] = None

    def __post_init__(self):
        self.scheme_id = SchemeId(self.scheme_id)
        if self.scheme_id == SchemeId.NAG_C:
            _check_stepsize(0.0, self.s)
        else:
            _check_stepsize(self.mu, self.s)
        if self.scheme_id == SchemeId.NAG_SC and not self.mu > 0:
            raise DomainError("NAG-SC 需要 μ > 0")
        if self.scheme_id == SchemeId.UNIFIED_ADAPTIVE:
            if self.t0 is None:
                self.t0 = math.sqrt(self.s)
            if not self.t0 > 0:
                raise DomainError(f"自适应时间步需要 t_0 > 0，收到 {self.t0}")
            self.t_k = float(self.t0)
            self.alpha_prev = alpha_of_t(self.t0, self.mu, self.s)
        if self.scheme_id == SchemeId.ORIGINAL_NAG:
            if self.gamma0 is None or not self.gamma0 > 0:
                raise DomainError(f"原始 NAG 需要 γ_0 > 0，收到 {self.gamma0}")
            self.gamma_k = float(self.gamma0)

    @classmethod
    def for_scheme(cls, scheme_id, mu: float, s: float, t0: Optional[float] = None,
                   gamma0: Optional[float] = None) -> "SchemeCoefficients":
        return cls(scheme_id=SchemeId(scheme_id), mu=mu, s=s, t0=t0, gamma0=gamma0)

    @property
    def update_mu(self) -> float:
        """z 更新中使用的 μ。"""
        return 0.0 if self.scheme_id == SchemeId.NAG_C else self.mu

    def next(self) -> Tuple[float, float, float]:
        """返回 (τ_k, δ_k, t_{k+1}) 并前进一步。"""
        k, mu, s = self.k, self.mu, self.s
        sid = self.scheme_id
        if sid == SchemeId.NAG_C:
            tau, delta, t_next = 2.0 / (k + 1), s * (k + 1) / 2.0, (k + 1) * math.sqrt(s)
        elif sid == SchemeId.NAG_SC:
            q = math.sqrt(mu * s)
            tau, delta = q / (1.0 + q), math.sqrt(s / mu)
            t_next = (k + 1) * iota(mu, s) * math.sqrt(s)
        elif sid == SchemeId.UNIFIED_CONSTANT:
            tau, delta, t_next = coeffs_unified_constant(mu, s, k)
        elif sid == SchemeId.UNIFIED_ADAPTIVE:
            alpha = timestep_adaptive_next(self.alpha_prev, mu, s)
            tau = (alpha - mu * s) / (1.0 - mu * s)
            delta = s / alpha
            t_next = t_of_alpha(alpha, mu, s)
            self.alpha_prev = alpha
        else:
            gamma = self.gamma_k
            alpha = _original_alpha(gamma, mu, s)
            if not 0.0 < alpha < 1.0:
                raise ConsistencyError(f"第 {k} 步 α = {alpha} 不在 (0, 1) 内")
            gamma_next = (1.0 - alpha) * gamma + mu * alpha
            tau = alpha * gamma / (gamma + mu * alpha)
            delta = alpha / gamma_next
            if gamma_next > mu * (1.0 + 1e-12):
                t_next = t_of_alpha(math.sqrt(s * gamma_next), mu, s)
            else:
                t_next = (k + 1) * iota(mu, s) * math.sqrt(s)
            self.gamma_k = gamma_next
        self.k = k + 1
        self.t_k = t_next
        return tau, delta, t_next


def collinearity_residual(tau: float, delta: float, mu: float, s: float) -> float:
    """1 − μδ − (1/s − μ)τδ。"""
    return 1.0 - mu * delta - (1.0 / s - mu) * tau * delta


def collinearity_defect(x_k: Vector, x_next: Vector, z_next: Vector) -> float:
    """n×2 差分矩阵 [x_{k+1}−x_k, z_{k+1}−x_k] 的 σ_2/σ_1，共线时为 0。"""
    M = np.column_stack([np.asarray(x_next) - x_k, np.asarray(z_next) - x_k])
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size < 2 or sv[0] == 0.0:
        return 0.0
    return float(sv[1] / sv[0])


# ---------- 迭代状态与轨迹 ----------
@dataclass
class IterateState:
    k: int
    x: Vector
    y: Vector
    z: Vector
    t: float = 0.0
    grad_norm: float = math.nan


def step_three_sequence(state: IterateState, tau: float, delta: float, obj: Objective, s: float,
                        mu: Optional[float] = None) -> IterateState:
    """一步三序列格式；每步只在 y_k 处计算一次梯度。"""
    mu = obj.mu if mu is None else mu
    y = state.x + tau * (state.z - state.x)
    g = obj.gradient(y)
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"第 {state.k} 步梯度非有限")
    x_next = y - s * g
    z_next = state.z + delta * (mu * (y - state.z) - g)
    return IterateState(k=state.k + 1, x=x_next, y=y, z=z_next, grad_norm=float(np.linalg.norm(g)))


@dataclass
class RunTrace:
    """一次运行的逐步记录（k = 0..K−1，每行是 x_k 的诊断和 ‖∇f(y_k)‖）。"""

    scheme_id: str
    problem: str
    s: float
    mu: float
    seed: Optional[int] = None
    records: List[Dict[str, float]] = field(default_factory=list)
    final_state: Optional[IterateState] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    COLUMNS = ("k", "t_k", "f_gap", "grad_norm", "energy", "bound")

    def to_frame(self) -> pd.DataFrame:
        extra = [c for c in (self.records[0].keys() if self.records else []) if c not in self.COLUMNS]
        return pd.DataFrame(self.records, columns=list(self.COLUMNS) + extra)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.records], dtype=float)

    def max_energy_increase(self) -> float:
        """max_k (E_{k+1} − E_k)，能量缺失时为 nan。"""
        e = self.column("energy")
        if e.size < 2 or np.isnan(e).all():
            return math.nan
        return float(np.max(np.diff(e)))

    def energy_monotone(self, slack: float = ENERGY_SLACK) -> bool:
        e = self.column("energy")
        if e.size < 2:
            return True
        if np.isnan(e).any():
            return False
        return bool(np.all(np.diff(e) <= slack * max(1.0, e[0])))

    def bound_violations(self, rtol: float = 1e-9) -> int:
        gap = self.column("f_gap")
        bound = self.column("bound")
        ok = np.isfinite(gap) & ~np.isnan(bound)
        return int(np.sum(gap[ok] > bound[ok] * (1.0 + rtol)))

    def write(self, path: Path) -> Path:
        """CSV 加同名 JSON 元数据。"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        meta = {"scheme_id": self.scheme_id, "problem": self.problem, "s": self.s, "mu": self.mu,
                "seed": self.seed, "iterations": len(self.records), **self.metadata}
        with open(path.with_suffix(".json"), "w", encoding="utf-8") as f:
            json.dump(meta, f, indent=2, ensure_ascii=False, default=str)
        return path


# ---------- 能量与界 ----------
def _require_solution(obj: Objective) -> None:
    if not obj.has_solution:
        raise UnsupportedDiagnosticError(f"{obj.name} 缺少极小点或最优值，无法计算能量")


def _log_scale(t: float, mu: float) -> float:
    """log((t²/4)·sinhc²(√μ t/2))。"""
    return 2.0 * math.log(t / 2.0) + 2.0 * log_sinhc(math.sqrt(mu) * t / 2.0)


def energy_discrete_unified(x_k: Vector, z_k: Vector, t_k: float, obj: Objective, mu: float) -> float:
    """E_k = ½cosh²(√μt_k/2)‖z_k−x*‖² + (t_k²/4)sinhc²(√μt_k/2)(f(x_k)−f*)。"""
    _require_solution(obj)
    a = math.sqrt(mu) * t_k / 2.0
    dist2 = float(np.sum((np.asarray(z_k) - obj.minimizer) ** 2))
    first = 0.5 * math.exp(2.0 * log_cosh(a)) * dist2
    if t_k == 0.0:
        return first
    return first + math.exp(_log_scale(t_k, mu)) * obj.gap(x_k)


def bound_unified(t_k: float, t_0: float, x_0: Vector, obj: Objective, mu: float,
                  e0: Optional[float] = None) -> float:
    """B_k = (4/t_k²)cschc²(√μt_k/2)·E_0，t_k = 0 时为 inf；e0 已知时直接使用。"""
    if e0 is None:
        e0 = energy_discrete_unified(x_0, x_0, t_0, obj, mu)
    if t_k == 0.0:
        return math.inf
    return math.exp(-_log_scale(t_k, mu)) * e0


def energy_estimate_sequence(x_k: Vector, z_k: Vector, gamma_k: float, log_prod: float, obj: Objective) -> float:
    """(f(x_k)−f* + (γ_k/2)‖z_k−x*‖²)/Π(1−α_i)，log_prod = Σ log(1−α_i)。"""
    _require_solution(obj)
    phi = obj.gap(x_k) + 0.5 * gamma_k * float(np.sum((np.asarray(z_k) - obj.minimizer) ** 2))
    if phi <= 0.0:
        return phi
    return math.exp(math.log(phi) - log_prod)


def bound_estimate_sequence(log_prod: float, gamma0: float, x_0: Vector, obj: Objective,
                            phi0: Optional[float] = None) -> float:
    """Π(1−α_i)·(f(x_0)−f* + (γ_0/2)‖x_0−x*‖²)。"""
    if phi0 is None:
        _require_solution(obj)
        phi0 = obj.gap(x_0) + 0.5 * gamma0 * float(np.sum((np.asarray(x_0) - obj.minimizer) ** 2))
    return math.exp(log_prod) * phi0


# ---------- 运行 ----------
class _Guard:
    """发散检测：|f| 超过 divergence_factor·max(|f(x_0)|, 1) 或出现非有限值。"""

    def __init__(self, obj: Objective, x0: Vector):
        self.obj = obj
        self.limit = DIVERGENCE_FACTOR * max(abs(obj.value(x0)), 1.0)

    def check(self, x: Vector, k: int, trace: Any) -> float:
        fx = self.obj.value(x)
        if not math.isfinite(fx) or abs(fx) > self.limit:
            logger.error(f"第 {k} 步发散: f = {fx}")
            raise DivergenceError(f"第 {k} 步发散（f = {fx}）", partial=trace)
        return fx


def _new_trace(obj: Objective, scheme_id: SchemeId, s: float, mu: float) -> RunTrace:
    return RunTrace(
        scheme_id=scheme_id.value,
        problem=obj.name,
        s=s,
        mu=mu,
        seed=obj.info.get("seed"),
        metadata={"L": obj.L, "s_le_inverse_L": bool(s <= 1.0 / obj.L) if obj.L > 0 else True},
    )


def run_scheme(obj: Objective, scheme_id, s: float, x0: Vector, iterations: int,
               t0: Optional[float] = None, gamma0: Optional[float] = None,
               grad_tol: Optional[float] = None) -> RunTrace:
    """运行一个三序列格式，记录 t_k、f−f*、‖∇f(y_k)‖、能量和理论界。

    NAG-C 与统一 NAG 使用统一能量；NAG-SC 与原始 NAG 使用估计序列势函数。
    缺少极小点时能量、界和 f−f* 记为 nan。
    """
    scheme_id = SchemeId(scheme_id)
    if scheme_id == SchemeId.ORIGINAL_NAG:
        return run_original_nag(obj, s, gamma0, x0, iterations, grad_tol=grad_tol)
    mu = obj.mu
    coeffs = SchemeCoefficients.for_scheme(scheme_id, mu, s, t0=t0)
    mu_e = coeffs.update_mu
    x0 = np.asarray(x0, dtype=float)
    state = IterateState(k=0, x=x0.copy(), y=x0.copy(), z=x0.copy(), t=coeffs.t_k)
    t_start = coeffs.t_k
    trace = _new_trace(obj, scheme_id, s, mu)
    trace.metadata["t0"] = t_start
    guard = _Guard(obj, x0)
    diagnostics = obj.has_solution
    q = math.sqrt(mu * s)
    log_step = math.log1p(-q) if scheme_id == SchemeId.NAG_SC else 0.0
    e0 = phi0 = math.nan
    if diagnostics:
        if scheme_id == SchemeId.NAG_SC:
            phi0 = bound_estimate_sequence(0.0, mu, x0, obj)
        else:
            e0 = energy_discrete_unified(x0, x0, t_start, obj, mu_e)
    logger.info(f"开始运行 {scheme_id.value}: {obj.name}, s={s:g}, K={iterations}")

    for k in range(iterations):
        tau, delta, t_next = coeffs.next()
        new = step_three_sequence(state, tau, delta, obj, s, mu=mu_e)
        row = {"k": k, "t_k": state.t, "f_gap": math.nan, "grad_norm": new.grad_norm,
               "energy": math.nan, "bound": math.nan}
        if diagnostics:
            row["f_gap"] = obj.gap(state.x)
            if scheme_id == SchemeId.NAG_SC:
                row["energy"] = energy_estimate_sequence(state.x, state.z, mu, k * log_step, obj)
                row["bound"] = bound_estimate_sequence(k * log_step, mu, x0, obj, phi0=phi0)
            else:
                row["energy"] = energy_discrete_unified(state.x, state.z, state.t, obj, mu_e)
                row["bound"] = bound_unified(state.t, t_start, x0, obj, mu_e, e0=e0)
        trace.records.append(row)
        new.t = t_next
        guard.check(new.x, k + 1, trace)
        state = new
        if grad_tol is not None and new.grad_norm <= grad_tol:
            logger.info(f"{scheme_id.value} 在第 {k} 步达到梯度容差 {grad_tol:g}")
            break

    trace.final_state = state
    logger.info(f"{scheme_id.value} 运行结束: {len(trace.records)} 步")
    return trace


def run_original_nag(obj: Objective, s: float, gamma0: float, x0: Vector, iterations: int,
                     grad_tol: Optional[float] = None) -> RunTrace:
    """按 γ/α 递推的原始 NAG；记录 Π(1−α_i) 以及估计序列势函数。"""
    mu = obj.mu
    _check_stepsize(mu, s)
    if gamma0 is None or not gamma0 > 0:
        raise DomainError(f"原始 NAG 需要 γ_0 > 0，收到 {gamma0}")
    x = np.asarray(x0, dtype=float).copy()
    z = x.copy()
    gamma = float(gamma0)
    log_prod = 0.0
    trace = _new_trace(obj, SchemeId.ORIGINAL_NAG, s, mu)
    trace.metadata["gamma0"] = gamma
    guard = _Guard(obj, x)
    diagnostics = obj.has_solution
    const_dt = iota(mu, s) * math.sqrt(s)
    phi0 = bound_estimate_sequence(0.0, gamma, x, obj) if diagnostics else math.nan
    logger.info(f"开始运行 ORIGINAL_NAG: {obj.name}, s={s:g}, γ0={gamma:g}, K={iterations}")

    def report_t(g: float, k: int) -> float:
        return t_of_alpha(math.sqrt(s * g), mu, s) if g > mu * (1.0 + 1e-12) else k * const_dt

    t = report_t(gamma, 0)
    state = IterateState(k=0, x=x, y=x.copy(), z=z, t=t)
    for k in range(iterations):
        alpha = _original_alpha(gamma, mu, s)
        if not 0.0 < alpha < 1.0:
            raise ConsistencyError(f"第 {k} 步 α = {alpha} 不在 (0, 1) 内（检查 μs 与 γ_0）")
        gamma_next = (1.0 - alpha) * gamma + mu * alpha
        y = (alpha * gamma * state.z + gamma_next * state.x) / (gamma + mu * alpha)
        g = obj.gradient(y)
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"第 {k} 步梯度非有限", partial=trace)
        x_next = y - s * g
        z_next = ((1.0 - alpha) * gamma * state.z + mu * alpha * y - alpha * g) / gamma_next
        row = {"k": k, "t_k": state.t, "f_gap": math.nan, "grad_norm": float(np.linalg.norm(g)),
               "energy": math.nan, "bound": math.nan, "alpha": alpha, "gamma": gamma}
        if diagnostics:
            row["f_gap"] = obj.gap(state.x)
            row["energy"] = energy_estimate_sequence(state.x, state.z, gamma, log_prod, obj)
            row["bound"] = bound_estimate_sequence(log_prod, gamma0, x0, obj, phi0=phi0)
        trace.records.append(row)
        log_prod += math.log1p(-alpha)
        gamma = gamma_next
        guard.check(x_next, k + 1, trace)
        state = IterateState(k=k + 1, x=x_next, y=y, z=z_next, t=report_t(gamma, k + 1),
                             grad_norm=row["grad_norm"])
        if grad_tol is not None and state.grad_norm <= grad_tol:
            break

    trace.final_state = state
    trace.metadata["log_prod"] = log_prod
    return trace


def minimize_nag_sc(gradient: Callable[[Vector], Vector], x0: Vector, s: float, mu: float,
                    max_iter: int, grad_tol: float) -> Tuple[Vector, int, float]:
    """不记录诊断的 NAG-SC（动量形式），在 ‖∇f(y_k)‖ ≤ grad_tol 时返回 y_k。"""
    _check_stepsize(mu, s)
    q = math.sqrt(mu * s)
    beta = (1.0 - q) / (1.0 + q)
    x = np.asarray(x0, dtype=float).copy()
    y = x.copy()
    grad_norm = math.inf
    for k in range(max_iter):
        g = gradient(y)
        grad_norm = float(np.linalg.norm(g))
        if grad_norm <= grad_tol:
            return y, k, grad_norm
        x_next = y - s * g
        y = x_next + beta * (x_next - x)
        x = x_next
    return y, max_iter, grad_norm


# ---------- 二序列形式 ----------
def to_two_sequence(taus: Sequence[float], deltas: Sequence[float], mu: float, s: float) -> Tuple[np.ndarray, np.ndarray]:
    """三序列参数转为二序列动量参数 (β_k, γ_k)，长度为 len(taus) − 1。"""
    tau = np.asarray(taus, dtype=float)
    delta = np.asarray(deltas, dtype=float)
    if np.any(tau[:-1] <= 0):
        raise DomainError("τ_k 必须为正")
    t0, t1, d0 = tau[:-1], tau[1:], delta[:-1]
    betas = (1.0 - t0) * t1 * (1.0 - mu * d0) / t0
    gammas = t1 * ((1.0 / s - mu) * d0 * t0 - 1.0 + mu * d0) / t0
    return betas, gammas


def scheme_sequences(scheme_id, mu: float, s: float, count: int, t0: Optional[float] = None,
                     gamma0: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """前 count 个 (τ_k, δ_k, t_{k+1})。"""
    coeffs = SchemeCoefficients.for_scheme(scheme_id, mu, s, t0=t0, gamma0=gamma0)
    rows = np.array([coeffs.next() for _ in range(count)])
    return rows[:, 0], rows[:, 1], rows[:, 2]


def run_two_sequence(obj: Objective, betas: Sequence[float], gammas: Sequence[float], s: float,
                     x0: Vector, steps: Optional[int] = None) -> np.ndarray:
    """执行 x_{k+1} = y_k − s∇f(y_k), y_{k+1} = x_{k+1} + β_k(x_{k+1}−x_k) + γ_k(x_{k+1}−y_k)。

    y_0 = x_0，返回 x_0..x_steps 组成的数组。
    """
    steps = len(betas) + 1 if steps is None else steps
    if steps > len(betas) + 1 or len(gammas) < len(betas):
        raise DomainError("β、γ 序列长度不足")
    x = np.asarray(x0, dtype=float).copy()
    y = x.copy()
    out = [x.copy()]
    for k in range(steps):
        x_next = y - s * obj.gradient(y)
        if k < steps - 1:
            y = x_next + betas[k] * (x_next - x) + gammas[k] * (x_next - y)
        x = x_next
        out.append(x.copy())
    return np.array(out)


# ---------- t_k 条件 ----------
def check_tk_conditions(t_seq: Sequence[float], mu: float, s: float, tol: float = 1e-12) -> Dict[str, Any]:
    """检查两个 t_k 条件。

    条件一（k ≥ 2）：α(t_k) ≤ 1；条件二（k ≥ 0）：(1 − α(t_{k+1}))·A(t_{k+1}) ≤ A(t_k)，
    A(t) = (t²/4)sinhc²(√μt/2)，以比值形式 (1 − α(t_{k+1})) − A(t_k)/A(t_{k+1}) ≤ 0 计算。
    """
    t = np.asarray(t_seq, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise DomainError("t_k 序列必须严格递增")
    cond1_res: List[float] = [alpha_of_t(t[k], mu, s) - 1.0 for k in range(2, len(t))]
    cond2_res: List[float] = []
    for k in range(len(t) - 1):
        ratio = 0.0 if t[k] == 0.0 else math.exp(_log_scale(t[k], mu) - _log_scale(t[k + 1], mu))
        cond2_res.append((1.0 - alpha_of_t(t[k + 1], mu, s)) - ratio)
    cond1_ok = [r <= tol for r in cond1_res]
    cond2_ok = [r <= tol for r in cond2_res]
    return {
        "alpha_condition_residual": cond1_res,
        "alpha_condition_ok": cond1_ok,
        "ratio_condition_residual": cond2_res,
        "ratio_condition_ok": cond2_ok,
        "all_ok": all(cond1_ok) and all(cond2_ok),
    }
