"""双曲函数变体与高阶双曲函数。

负责：
- sinhc / tanhc / cothc / cschc：x→0 的可去奇点用截断泰勒级数，大自变量用指数形式防止溢出
- sinh_p / cosh_p：初值问题 sinh_p' = (1 + sinh_p^p)^(1/p), sinh_p(0) = 0 的数值解，
  固定步长四阶 Runge-Kutta，三次 Hermite 稠密输出，表格按需向右延伸
- 由 sinh_p 派生的 tanh_p、coth_p、sinhc_p、tanhc_p、cothc_p、cschc_p
- C_p = lim sinh_p(t)·e^(-t) 的平台检测估计
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .config import section
from .errors import DomainError, InvalidOrderError, ToleranceNotReachedError

logger = logging.getLogger(__name__)

_CFG = section("hyperbolic")
SERIES_THRESHOLD = float(_CFG.get("series_threshold", 1e-4))
OVERFLOW_GUARD = float(_CFG.get("overflow_guard", 350.0))
GRID_STEP = float(_CFG.get("grid_step", 1e-4))
INITIAL_HORIZON = float(_CFG.get("initial_horizon", 10.0))
CP_PLATEAU_TOL = float(_CFG.get("cp_plateau_tol", 1e-6))
CP_HORIZON = float(_CFG.get("cp_horizon", 40.0))

ArrayLike = Union[float, np.ndarray]


def _prepare(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.isnan(arr).any():
        raise DomainError("双曲函数输入包含 NaN")
    return arr


def _finish(out: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(out)
    return out


# ---------- sinhc 一族 ----------
def sinhc(x: ArrayLike) -> ArrayLike:
    """sinh(x)/x，x = 0 处取 1。"""
    ax = np.abs(_prepare(x))
    small = ax < SERIES_THRESHOLD
    big = ax > OVERFLOW_GUARD
    mid = np.where(small | big, 1.0, ax)
    big_x = np.where(big, ax, 1.0)
    x2 = ax * ax
    with np.errstate(over="ignore"):
        out = np.sinh(mid) / mid
        out = np.where(small, 1.0 + x2 / 6.0 + x2 * x2 / 120.0, out)
        # sinh(x)/x = exp(x - log 2x)·(1 - e^(-2x))，x > 350 时后一因子为 1
        out = np.where(big, np.exp(big_x - np.log(2.0 * big_x)), out)
    return _finish(out, x)


def tanhc(x: ArrayLike) -> ArrayLike:
    """tanh(x)/x，x = 0 处取 1。"""
    ax = np.abs(_prepare(x))
    small = ax < SERIES_THRESHOLD
    mid = np.where(small, 1.0, ax)
    x2 = ax * ax
    out = np.where(small, 1.0 - x2 / 3.0 + 2.0 * x2 * x2 / 15.0, np.tanh(mid) / mid)
    return _finish(out, x)


def cothc(x: ArrayLike) -> ArrayLike:
    """x·coth(x)，x = 0 处取 1；x → ∞ 时与 x 同阶。"""
    ax = np.abs(_prepare(x))
    small = ax < SERIES_THRESHOLD
    big = ax > OVERFLOW_GUARD
    mid = np.where(small | big, 1.0, ax)
    x2 = ax * ax
    out = mid / np.tanh(mid)
    out = np.where(small, 1.0 + x2 / 3.0 - x2 * x2 / 45.0, out)
    out = np.where(big, ax, out)
    return _finish(out, x)


def cschc(x: ArrayLike) -> ArrayLike:
    """x/sinh(x)，x = 0 处取 1。"""
    ax = np.abs(_prepare(x))
    small = ax < SERIES_THRESHOLD
    big = ax > OVERFLOW_GUARD
    mid = np.where(small | big, 1.0, ax)
    x2 = ax * ax
    with np.errstate(under="ignore"):
        out = mid / np.sinh(mid)
        out = np.where(small, 1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0, out)
        out = np.where(big, 2.0 * ax * np.exp(-np.where(big, ax, 0.0)), out)
    return _finish(out, x)


def log_sinh(x: float) -> float:
    """log sinh(x)，x > 0，不溢出。"""
    if math.isnan(x) or x < 0:
        raise DomainError(f"log_sinh 需要 x ≥ 0，收到 {x}")
    if x == 0.0:
        return -math.inf
    return x + math.log(-math.expm1(-2.0 * x)) - math.log(2.0)


def log_cosh(x: float) -> float:
    """log cosh(x)，不溢出。"""
    if math.isnan(x):
        raise DomainError("log_cosh 输入为 NaN")
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def log_sinhc(x: float) -> float:
    """log(sinh(x)/x)。"""
    if math.isnan(x):
        raise DomainError("log_sinhc 输入为 NaN")
    ax = abs(x)
    if ax < SERIES_THRESHOLD:
        x2 = ax * ax
        return math.log1p(x2 / 6.0 + x2 * x2 / 120.0)
    return log_sinh(ax) - math.log(ax)


def hyperbolic_identity_residual(x: ArrayLike) -> ArrayLike:
    """tanh x − coth x + sech x·csch x 乘以 x 后的残差。

    乘以 x 之后各项都有界（x·coth x = cothc x），x 很小时不会因 coth 的量级丢失精度。
    """
    arr = _prepare(x)
    out = arr * np.tanh(arr) - cothc(arr) + cschc(arr) / np.cosh(arr)
    return _finish(np.asarray(out), x)


# ---------- 高阶双曲函数 sinh_p ----------
def _cosh_from_sinh(y: float, p: int) -> float:
    """cosh_p = (1 + sinh_p^p)^(1/p)，y > 1 时提出 y 避免 y^p 溢出。"""
    if y <= 1.0:
        return (1.0 + y ** p) ** (1.0 / p)
    return y * (1.0 + y ** (-p)) ** (1.0 / p)


def _rk4_chunk(y0: float, n_steps: int, h: float, p: int) -> np.ndarray:
    out = np.empty(n_steps)
    y = y0
    for i in range(n_steps):
        k1 = _cosh_from_sinh(y, p)
        k2 = _cosh_from_sinh(y + 0.5 * h * k1, p)
        k3 = _cosh_from_sinh(y + 0.5 * h * k2, p)
        k4 = _cosh_from_sinh(y + h * k3, p)
        y = y + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i] = y
    return out


@dataclass
class HigherHyperbolicTable:
    """sinh_p 在等距网格 t_i = i·grid_step 上的取值表。

    表格只会向右延伸；延伸在内部锁保护下进行，读取已覆盖区间是无锁的。
    """

    p: int
    grid_step: float = GRID_STEP
    c_p_estimate: Optional[float] = None
    c_p_tolerance: Optional[float] = None
    _sinh: np.ndarray = field(default_factory=lambda: np.zeros(1), repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise InvalidOrderError(f"高阶双曲函数的阶数必须是 ≥ 2 的整数，收到 {self.p}")
        self.p = int(self.p)
        if not self.grid_step > 0:
            raise DomainError("网格步长必须为正")

    @property
    def horizon(self) -> float:
        return (len(self._sinh) - 1) * self.grid_step

    @property
    def samples(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(t, sinh_p, cosh_p) 三列。"""
        s = self._sinh.copy()
        t = np.arange(len(s)) * self.grid_step
        c = np.array([_cosh_from_sinh(float(v), self.p) for v in s])
        return t, s, c

    def ensure(self, t: float) -> None:
        """把表格延伸到至少覆盖 t。"""
        if t <= self.horizon:
            return
        with self._lock:
            if t <= self.horizon:
                return
            target = max(t + 1.0, 2.0 * self.horizon, INITIAL_HORIZON)
            n_new = int(math.ceil(target / self.grid_step)) - (len(self._sinh) - 1)
            chunk = _rk4_chunk(float(self._sinh[-1]), n_new, self.grid_step, self.p)
            self._sinh = np.concatenate([self._sinh, chunk])
            logger.info(f"sinh_{self.p} 表格延伸到 t = {self.horizon:.4g}（{len(self._sinh)} 个节点）")

    def value(self, t: float) -> Tuple[float, float]:
        """Hermite 插值得到 (sinh_p(t), cosh_p(t))。"""
        self.ensure(t)
        h = self.grid_step
        i = min(int(t / h), len(self._sinh) - 2)
        s0, s1 = float(self._sinh[i]), float(self._sinh[i + 1])
        d0, d1 = _cosh_from_sinh(s0, self.p), _cosh_from_sinh(s1, self.p)
        u = (t - i * h) / h
        h00 = (1 + 2 * u) * (1 - u) ** 2
        h10 = u * (1 - u) ** 2
        h01 = u * u * (3 - 2 * u)
        h11 = u * u * (u - 1)
        s = h00 * s0 + h10 * h * d0 + h01 * s1 + h11 * h * d1
        return s, _cosh_from_sinh(s, self.p)


_TABLES: Dict[int, HigherHyperbolicTable] = {}
_TABLES_LOCK = threading.Lock()


def get_table(p: int) -> HigherHyperbolicTable:
    """进程内共享的 sinh_p 表格。"""
    with _TABLES_LOCK:
        table = _TABLES.get(p)
        if table is None:
            table = HigherHyperbolicTable(p=p)
            _TABLES[p] = table
        return table


def eval_sinh_p(table: HigherHyperbolicTable, t: float) -> Tuple[float, float]:
    """返回 (sinh_p(t), cosh_p(t))。"""
    if table.p < 2:
        raise InvalidOrderError(f"阶数必须 ≥ 2，收到 {table.p}")
    if math.isnan(t) or t < 0:
        raise DomainError(f"sinh_p 只在 t ≥ 0 上定义，收到 {t}")
    if t == 0.0:
        return 0.0, 1.0
    return table.value(float(t))


def higher_variants(p: int, t: float, table: Optional[HigherHyperbolicTable] = None) -> Dict[str, float]:
    """由 sinh_p, cosh_p 派生的全部比值函数。

    t 小于级数阈值时用 sinh_p(t) = t + t^(p+1)/(p(p+1)) + … 计算 sinhc_p，避免 0/0。
    coth_p 在 t = 0 处是真正的极点，返回 inf。
    """
    table = table or get_table(p)
    if math.isnan(t) or t < 0:
        raise DomainError(f"高阶双曲函数只在 t ≥ 0 上定义，收到 {t}")
    if t < SERIES_THRESHOLD:
        sc = 1.0 + t ** p / (p * (p + 1))
        s = t * sc
        c = _cosh_from_sinh(s, p)
    else:
        s, c = eval_sinh_p(table, t)
        sc = s / t
    return {
        "sinh_p": s,
        "cosh_p": c,
        "tanh_p": s / c,
        "coth_p": c / s if s > 0 else math.inf,
        "sinhc_p": sc,
        "tanhc_p": sc / c,
        "cothc_p": c / sc,
        "cschc_p": 1.0 / sc,
    }


def sinhc_p(p: int, t: float) -> float:
    return higher_variants(p, t)["sinhc_p"]


def cp_estimate_at(table: HigherHyperbolicTable, t: float) -> float:
    """sinh_p(t)·e^(-t)。"""
    s, _ = eval_sinh_p(table, t)
    return math.exp(math.log(s) - t)


def estimate_Cp(p: int, table: Optional[HigherHyperbolicTable] = None,
                tol: float = CP_PLATEAU_TOL, horizon: float = CP_HORIZON) -> float:
    """估计 C_p = lim_{t→∞} sinh_p(t)·e^(-t)。

    在 t, t+1, t+2 处连续三个估计两两相差不超过 tol 时接受最后一个；
    到 horizon 仍未出现平台则抛出 ToleranceNotReachedError，并附带最好的估计。
    """
    table = table or get_table(p)
    if table.p != p:
        raise InvalidOrderError(f"表格阶数 {table.p} 与请求阶数 {p} 不一致")
    t = 1.0
    best = None
    while t + 2.0 <= horizon:
        e0, e1, e2 = (cp_estimate_at(table, t + d) for d in (0.0, 1.0, 2.0))
        spread = max(abs(e1 - e0), abs(e2 - e1))
        best = e2
        if spread <= tol:
            table.c_p_estimate = e2
            table.c_p_tolerance = spread
            logger.info(f"C_{p} ≈ {e2:.10f}（t = {t + 2.0:g} 处平台，相邻差 {spread:.2e}）")
            return e2
        t += 1.0
    raise ToleranceNotReachedError(f"C_{p} 在 t ≤ {horizon} 内未收敛到 {tol}", best=best)
