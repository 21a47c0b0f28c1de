"""连续时间动力学 - 流目录、固定步长 RK4 积分、奇异端点处理与 Lyapunov 能量监控

流的两种写法：
- lagrangian：Ẋ = τ(t)(Z − X)，d/dt ∇h(Z) = m(t)(∇h(X) − ∇h(Z)) − δ(t)∇f(X)，状态 (X, W = ∇h(Z))
- damped：Ẋ = V，V̇ = −b(t)V − c(t)∇f(X)，状态 (X, V)；Z = X + V/τ(t)
NAG-SC 系统用 damped 写法，μ = 0 时退化为 Ẍ + ∇f(X) = 0 仍然有定义。

系数函数都接受 numpy 数组：积分前在全部 RK4 级时刻上一次性求值。
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from .config import section
from .errors import DivergenceError, DomainError, InvalidOrderError, UnsupportedDiagnosticError
from .hyperbolic import cothc, cschc, higher_variants, sinhc, tanhc
from .problems import Objective
from .tensor import MirrorMap

logger = logging.getLogger(__name__)

_CFG = section("dynamics")
DT = float(_CFG.get("dt", 1e-3))
START_BUFFER_STEPS = int(_CFG.get("start_buffer_steps", 10))
END_BUFFER_STEPS = int(_CFG.get("end_buffer_steps", 10))
ENERGY_SLACK = float(_CFG.get("energy_slack", 1e-8))

Vector = np.ndarray
Coefficient = Callable[[np.ndarray], np.ndarray]
Scales = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]


class FlowId(str, Enum):
    NAG_C_SYS = "NAG_C_SYS"
    NAG_SC_SYS = "NAG_SC_SYS"
    UNIFIED_NAG_SYS = "UNIFIED_NAG_SYS"
    UNIFIED_LAGRANGIAN = "UNIFIED_LAGRANGIAN"
    TENSOR_FLOW = "TENSOR_FLOW"
    ORIGINAL_NAG_FLOW = "ORIGINAL_NAG_FLOW"
    NAG_G = "NAG_G"
    DILATED = "DILATED"


def _arr(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


def _const(c: float) -> Coefficient:
    return lambda t: np.full_like(_arr(t), c)


@dataclass(frozen=True)
class TimeMap:
    """单调时间重参数化 T(t) 及其一、二阶导数。"""

    name: str
    forward: Coefficient
    speed: Coefficient
    accel: Coefficient = field(default=_const(0.0))


def identity_time_map() -> TimeMap:
    return TimeMap("identity", lambda t: _arr(t).copy(), _const(1.0))


def linear_time_map(c: float) -> TimeMap:
    if not c > 0:
        raise DomainError(f"线性时间伸缩系数必须为正，收到 {c}")
    return TimeMap(f"linear({c:g})", lambda t: c * _arr(t), _const(c))


def tensor_time_map(C: float) -> TimeMap:
    """p = 2 时统一 NAG 系统到张量流 (C, μ) 的时间映射 T = β₁⁻¹∘β₂ = 2√C·t。"""
    if not C > 0:
        raise DomainError("张量常数 C 必须为正")
    return linear_time_map(2.0 * math.sqrt(C))


@dataclass(frozen=True)
class FlowSpec:
    """一条连续时间流。

    series = (a0, κ, q) 描述 t → 0 的奇异行为 τ ≈ a0/t, δ ≈ κ t^q；
    energy_scales(t) 返回 Lyapunov 函数中 D_h(x*, Z) 与 f − f* 的系数。
    """

    flow_id: FlowId
    name: str
    mu: float
    form: str = "lagrangian"
    tau: Coefficient = _const(1.0)
    delta: Coefficient = _const(1.0)
    coupling: Coefficient = _const(0.0)
    damping: Optional[Coefficient] = None
    grad_factor: Optional[Coefficient] = None
    mirror: Optional[MirrorMap] = None
    singular_start: bool = False
    series: Optional[Tuple[float, float, float]] = None
    singular_end: Optional[float] = None
    collinear_limit: bool = False
    energy_scales: Optional[Scales] = None
    base: Optional["FlowSpec"] = None
    time_map: Optional[TimeMap] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def coefficients(self, t: np.ndarray) -> List[np.ndarray]:
        """积分所需的系数：lagrangian 为 (τ, m, δ)，damped 为 (b, c)。"""
        t = _arr(t)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.form == "lagrangian":
                return [self.tau(t), self.coupling(t), self.delta(t)]
            return [self.damping(t), self.grad_factor(t)]


# ---------- 目录 ----------
def nag_c_system() -> FlowSpec:
    """Ẋ = (2/t)(Z − X)，Ż = −(t/2)∇f(X)。"""
    return FlowSpec(
        flow_id=FlowId.NAG_C_SYS, name="NAG_C_SYS", mu=0.0,
        tau=lambda t: 2.0 / _arr(t), delta=lambda t: _arr(t) / 2.0, coupling=_const(0.0),
        damping=lambda t: 3.0 / _arr(t),
        singular_start=True, series=(2.0, 0.5, 1.0), collinear_limit=True,
        energy_scales=lambda t: (np.ones_like(_arr(t)), _arr(t) ** 2 / 4.0),
    )


def unified_nag_system(mu: float) -> FlowSpec:
    """Ẋ = (2/t)cothc(√μt/2)(Z − X)，Ż = (t/2)tanhc(√μt/2)(μX − μZ − ∇f(X))。"""
    if not mu >= 0:
        raise DomainError(f"mu 必须非负，收到 {mu}")
    r = math.sqrt(mu)

    def delta(t):
        t = _arr(t)
        return t / 2.0 * tanhc(r * t / 2.0)

    def scales(t):
        t = _arr(t)
        a = r * t / 2.0
        return np.cosh(a) ** 2, t ** 2 / 4.0 * sinhc(a) ** 2

    def damping(t):
        t = _arr(t)
        a = r * t / 2.0
        return r / 2.0 * np.tanh(a) + 3.0 / t * cothc(a)

    return FlowSpec(
        flow_id=FlowId.UNIFIED_NAG_SYS, name="UNIFIED_NAG_SYS", mu=mu,
        tau=lambda t: 2.0 / _arr(t) * cothc(r * _arr(t) / 2.0),
        delta=delta, coupling=lambda t: mu * delta(t), damping=damping,
        singular_start=True, series=(2.0, 0.5, 1.0), collinear_limit=True,
        energy_scales=scales,
    )


def nag_sc_system(mu: float) -> FlowSpec:
    """Ẍ + 2√μẊ + ∇f(X) = 0，Z = X + Ẋ/√μ。"""
    if not mu >= 0:
        raise DomainError(f"mu 必须非负，收到 {mu}")
    r = math.sqrt(mu)

    def scales(t):
        if mu == 0.0:
            raise UnsupportedDiagnosticError("μ = 0 的 NAG-SC 系统没有 Lyapunov 能量")
        e = np.exp(r * _arr(t))
        return mu * e, e

    return FlowSpec(
        flow_id=FlowId.NAG_SC_SYS, name="NAG_SC_SYS", mu=mu, form="damped",
        tau=_const(r), delta=_const(1.0 / r if r > 0 else math.inf), coupling=_const(r),
        damping=_const(2.0 * r), grad_factor=_const(1.0),
        collinear_limit=mu > 0, energy_scales=scales,
    )


def tensor_flow(p: int, C: float, mu: float) -> FlowSpec:
    """Ẋ = (p/t)cothc_p(u)(Z − X)，d/dt ∇h(Z) = Cpt^(p−1)tanhc_p^(p−1)(u)(μ∇h(X) − μ∇h(Z) − ∇f(X))，u = (Cμ)^(1/p)t。

    p = 2 时 h = ½‖x‖²，按欧氏情形积分。
    """
    if int(p) != p or p < 2:
        raise InvalidOrderError(f"张量流阶数必须是 ≥ 2 的整数，收到 {p}")
    p = int(p)
    if not C > 0 or not mu >= 0:
        raise DomainError(f"需要 C > 0, μ ≥ 0，收到 C={C}, μ={mu}")
    w = (C * mu) ** (1.0 / p)

    if p == 2:
        f_cothc, f_tanhc, f_sinhc = cothc, tanhc, sinhc

        def f_cosh(u):
            return np.cosh(u)
        mirror = None
    else:
        def _variant(name):
            vec = np.vectorize(lambda v: higher_variants(p, float(v))[name], otypes=[float])
            return lambda u: vec(_arr(u))
        f_cothc, f_tanhc, f_sinhc, f_cosh = (_variant(n) for n in ("cothc_p", "tanhc_p", "sinhc_p", "cosh_p"))
        mirror = MirrorMap(p)

    def delta(t):
        t = _arr(t)
        return C * p * t ** (p - 1) * f_tanhc(w * t) ** (p - 1)

    def scales(t):
        t = _arr(t)
        return f_cosh(w * t) ** p, C * t ** p * f_sinhc(w * t) ** p

    return FlowSpec(
        flow_id=FlowId.TENSOR_FLOW, name=f"TENSOR_FLOW_p{p}", mu=mu,
        tau=lambda t: p / _arr(t) * f_cothc(w * _arr(t)),
        delta=delta, coupling=lambda t: mu * delta(t), mirror=mirror,
        singular_start=True, series=(float(p), C * p, float(p - 1)),
        collinear_limit=(p == 2 and abs(C - 0.25) < 1e-15),
        energy_scales=scales, params={"p": p, "C": C},
    )


def original_nag_flow(gamma0: float, mu: float) -> FlowSpec:
    """γ(t) = μ + (γ0 − μ)e^(−t)，Ẋ = Z − X，Ż = (μX − μZ − ∇f(X))/γ。

    能量 e^t(f − f* + γ(t)·½‖Z − x*‖²)。
    """
    if not gamma0 > 0 or not mu >= 0:
        raise DomainError(f"需要 γ0 > 0, μ ≥ 0，收到 γ0={gamma0}, μ={mu}")

    def gamma(t):
        return mu + (gamma0 - mu) * np.exp(-_arr(t))

    return FlowSpec(
        flow_id=FlowId.ORIGINAL_NAG_FLOW, name="ORIGINAL_NAG_FLOW", mu=mu,
        tau=_const(1.0), delta=lambda t: 1.0 / gamma(t), coupling=lambda t: mu / gamma(t),
        energy_scales=lambda t: (np.exp(_arr(t)) * gamma(t), np.exp(_arr(t))),
        params={"gamma0": gamma0},
    )


def lagrangian_flow(name: str, mu: float, alpha: Coefficient, beta: Coefficient,
                    beta_dot: Optional[Coefficient] = None, mirror: Optional[MirrorMap] = None,
                    series: Optional[Tuple[float, float, float]] = None) -> FlowSpec:
    """由参数函数 (α, β) 给出的统一 Bregman Lagrangian 流。

    τ = e^α，m = μβ̇e^β/(1 + μe^β)，δ = e^(α+β)/(1 + μe^β)；β̇ 缺省时取 e^α（理想尺度条件取等号）。
    """
    beta_dot = beta_dot or (lambda t: np.exp(alpha(t)))

    def coupling(t):
        return mu * beta_dot(t) / (np.exp(-beta(t)) + mu)

    def delta(t):
        return np.exp(alpha(t)) / (np.exp(-beta(t)) + mu)

    def scales(t):
        with np.errstate(divide="ignore"):
            eb = np.exp(beta(_arr(t)))
        return 1.0 + mu * eb, eb

    return FlowSpec(
        flow_id=FlowId.UNIFIED_LAGRANGIAN, name=f"LAGRANGIAN_{name}", mu=mu,
        tau=lambda t: np.exp(alpha(t)), delta=delta, coupling=coupling, mirror=mirror,
        singular_start=series is not None, series=series, energy_scales=scales,
        params={"entry": name},
    )


LAGRANGIAN_ENTRIES = ("NAG_C", "UNIFIED_NAG", "TENSOR", "ORIGINAL_NAG")


def lagrangian_entry(entry: str, mu: float = 0.0, p: int = 2, C: float = 0.25,
                     gamma0: Optional[float] = None) -> FlowSpec:
    """目录中的 (α, β) 参数对。"""
    r = math.sqrt(mu)
    if entry == "NAG_C":
        return lagrangian_flow(entry, mu, lambda t: np.log(2.0 / _arr(t)),
                               lambda t: 2.0 * np.log(_arr(t) / 2.0), series=(2.0, 0.5, 1.0))
    if entry == "UNIFIED_NAG":
        return lagrangian_flow(
            entry, mu,
            lambda t: np.log(2.0 / _arr(t) * cothc(r * _arr(t) / 2.0)),
            lambda t: 2.0 * np.log(_arr(t) / 2.0) + 2.0 * np.log(sinhc(r * _arr(t) / 2.0)),
            series=(2.0, 0.5, 1.0),
        )
    if entry == "TENSOR":
        base = tensor_flow(p, C, mu)
        return lagrangian_flow(
            entry, mu,
            lambda t: np.log(base.tau(t)),
            lambda t: np.log(base.energy_scales(t)[1]),
            mirror=base.mirror, series=base.series,
        )
    if entry == "ORIGINAL_NAG":
        if gamma0 is None or not gamma0 > mu:
            raise DomainError(f"ORIGINAL_NAG 参数对需要 γ0 > μ，收到 γ0={gamma0}, μ={mu}")
        shift = math.log(gamma0 - mu)
        return lagrangian_flow(entry, mu, _const(0.0), lambda t: _arr(t) - shift)
    raise DomainError(f"未知的 Lagrangian 目录项: {entry}")


def nag_g_flow(mu: float, T: float) -> FlowSpec:
    """Z = X + q(T−t)Ẋ，q(u) = (u/2)tanhc(√μu/2)：Ẋ = (Z − X)/q，Ż = (X − Z)/q − q∇f(X)。"""
    if not T > 0:
        raise DomainError(f"终止时刻 T 必须为正，收到 {T}")
    if not mu >= 0:
        raise DomainError(f"mu 必须非负，收到 {mu}")
    r = math.sqrt(mu)

    def q(t):
        u = T - _arr(t)
        return u / 2.0 * tanhc(r * u / 2.0)

    def damping(t):
        u = T - _arr(t)
        a = r * u / 2.0
        return r / 2.0 * np.tanh(a) + 3.0 / u * cothc(a)

    return FlowSpec(
        flow_id=FlowId.NAG_G, name="NAG_G", mu=mu,
        tau=lambda t: 1.0 / q(t), coupling=lambda t: 1.0 / q(t), delta=q, damping=damping,
        singular_end=T, collinear_limit=True, params={"T": T},
    )


def dilated(spec: FlowSpec, time_map: TimeMap) -> FlowSpec:
    """时间伸缩 X̃(t) = X(T(t))：对 (α, β) 即 (α∘T + log Ṫ, β∘T)。"""
    T, Td, Ta = time_map.forward, time_map.speed, time_map.accel
    scales = None
    if spec.energy_scales is not None:
        scales = lambda t: spec.energy_scales(T(t))  # noqa: E731
    common = dict(
        flow_id=FlowId.DILATED, name=f"{spec.name}@{time_map.name}", base=spec, time_map=time_map,
        tau=lambda t: Td(t) * spec.tau(T(t)),
        singular_start=spec.singular_start, series=spec.series, collinear_limit=False,
        energy_scales=scales, params=dict(spec.params),
    )
    if spec.singular_end is not None:
        common["singular_end"] = None
        logger.warning("伸缩后的流不再标记终点奇异，终点需由调用方换算")
    if spec.form == "damped":
        return replace(
            spec, **common,
            damping=lambda t: Td(t) * spec.damping(T(t)) - Ta(t) / Td(t),
            grad_factor=lambda t: Td(t) ** 2 * spec.grad_factor(T(t)),
        )
    return replace(
        spec, **common,
        delta=lambda t: Td(t) * spec.delta(T(t)),
        coupling=lambda t: Td(t) * spec.coupling(T(t)),
        damping=None,
    )


def flow_spec(flow_id, mu: float = 0.0, **params) -> FlowSpec:
    """按标识构造目录中的流。"""
    fid = FlowId(flow_id)
    if fid == FlowId.NAG_C_SYS:
        return nag_c_system()
    if fid == FlowId.NAG_SC_SYS:
        return nag_sc_system(mu)
    if fid == FlowId.UNIFIED_NAG_SYS:
        return unified_nag_system(mu)
    if fid == FlowId.TENSOR_FLOW:
        return tensor_flow(int(params.get("p", 2)), float(params.get("C", 0.25)), mu)
    if fid == FlowId.ORIGINAL_NAG_FLOW:
        if "gamma0" not in params:
            raise DomainError("ORIGINAL_NAG_FLOW 需要参数 gamma0")
        return original_nag_flow(float(params["gamma0"]), mu)
    if fid == FlowId.UNIFIED_LAGRANGIAN:
        return lagrangian_entry(str(params.get("entry", "UNIFIED_NAG")), mu,
                                p=int(params.get("p", 2)), C=float(params.get("C", 0.25)),
                                gamma0=params.get("gamma0"))
    if fid == FlowId.NAG_G:
        if "T" not in params:
            raise DomainError("NAG_G 需要参数 T")
        return nag_g_flow(mu, float(params["T"]))
    raise DomainError(f"{fid.value} 需要通过 dilated() 构造")


# ---------- 系数诊断 ----------
def damping_coefficient(spec: FlowSpec, t: float) -> float:
    """单方程形式 Ẍ + b(t)Ẋ + c(t)∇f(X) = 0 中的 b(t)。

    没有解析式的欧氏 lagrangian 流用 b = τ + m − τ̇/τ，τ̇ 取中心差分。
    """
    if spec.damping is not None:
        return float(spec.damping(_arr(t)))
    if spec.mirror is not None:
        raise UnsupportedDiagnosticError(f"{spec.name} 使用非欧氏镜像映射，没有单方程形式")
    h = 1e-6 * max(abs(t), 1.0)
    tau = float(spec.tau(_arr(t)))
    tau_dot = float(spec.tau(_arr(t + h)) - spec.tau(_arr(t - h))) / (2.0 * h)
    return tau + float(spec.coupling(_arr(t))) - tau_dot / tau


def gradient_factor(spec: FlowSpec, t: float) -> float:
    """单方程形式中 ∇f 的系数 c(t)，lagrangian 写法下为 τδ。"""
    if spec.form == "damped":
        return float(spec.grad_factor(_arr(t)))
    return float(spec.tau(_arr(t)) * spec.delta(_arr(t)))


def collinear_defect(spec: FlowSpec, times: np.ndarray) -> float:
    """max |τ(t)δ(t) − 1|，共线极限流应为舍入误差量级。"""
    times = _arr(times)
    with np.errstate(divide="ignore", invalid="ignore"):
        prod = spec.tau(times) * spec.delta(times)
    return float(np.max(np.abs(prod - 1.0)))


# ---------- 轨迹 ----------
class TrajectoryNode(NamedTuple):
    t: float
    x: Vector
    z: Vector
    xdot: Vector


def _hermite(t: float, times: np.ndarray, values: np.ndarray, derivs: np.ndarray) -> Vector:
    i = int(np.searchsorted(times, t, side="right")) - 1
    i = min(max(i, 0), len(times) - 2)
    h = times[i + 1] - times[i]
    u = (t - times[i]) / h
    h00 = (1 + 2 * u) * (1 - u) ** 2
    h10 = u * (1 - u) ** 2
    h01 = u * u * (3 - 2 * u)
    h11 = u * u * (u - 1)
    return h00 * values[i] + h10 * h * derivs[i] + h01 * values[i + 1] + h11 * h * derivs[i + 1]


@dataclass
class Trajectory:
    """积分节点上的 (X, W, Ẋ, Ẇ, Z) 与诊断列。W 是积分用的第二个状态分量。"""

    flow: str
    times: np.ndarray
    X: np.ndarray
    W: np.ndarray
    dX: np.ndarray
    dW: np.ndarray
    Z: np.ndarray
    f_gap: np.ndarray
    energy: np.ndarray
    bound: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)
    z_map: Optional[Callable[[float, Vector, Vector], Vector]] = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    def node(self, i: int) -> TrajectoryNode:
        return TrajectoryNode(float(self.times[i]), self.X[i], self.Z[i], self.dX[i])

    def _check_range(self, t: float) -> None:
        if not self.times[0] - 1e-12 <= t <= self.times[-1] + 1e-12:
            raise DomainError(f"t = {t} 超出轨迹区间 [{self.times[0]}, {self.times[-1]}]")

    def x_at(self, t: float) -> Vector:
        """三次 Hermite 稠密输出。"""
        self._check_range(t)
        return _hermite(t, self.times, self.X, self.dX)

    def z_at(self, t: float) -> Vector:
        self._check_range(t)
        x = _hermite(t, self.times, self.X, self.dX)
        w = _hermite(t, self.times, self.W, self.dW)
        return self.z_map(t, x, w) if self.z_map is not None else w

    def energy_monotone(self, slack: float = ENERGY_SLACK) -> bool:
        e = self.energy
        if e.size < 2:
            return True
        if np.isnan(e).any():
            return False
        return bool(np.all(np.diff(e) <= slack * max(1.0, e[0])))

    def bound_violations(self, rtol: float = 1e-9) -> int:
        ok = np.isfinite(self.f_gap) & ~np.isnan(self.bound)
        return int(np.sum(self.f_gap[ok] > self.bound[ok] * (1.0 + rtol)))

    def to_frame(self) -> pd.DataFrame:
        n = self.X.shape[1]
        data = {"t": self.times}
        data.update({f"x_{j + 1}": self.X[:, j] for j in range(n)})
        data.update({f"z_{j + 1}": self.Z[:, j] for j in range(n)})
        data.update({"f_gap": self.f_gap, "energy": self.energy, "bound": self.bound})
        return pd.DataFrame(data)

    def write(self, path: Path) -> Path:
        """CSV `t,x_1..x_n,z_1..z_n,f_gap,energy,bound` 加同名 JSON 元数据。"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        with open(path.with_suffix(".json"), "w", encoding="utf-8") as f:
            json.dump({"flow": self.flow, "nodes": len(self), **self.metadata}, f,
                      indent=2, ensure_ascii=False, default=str)
        return path


# ---------- 积分 ----------
def _vector_field(spec: FlowSpec, obj: Objective):
    mirror = spec.mirror
    grad = obj.gradient

    if spec.form == "damped":
        def rhs(X, V, b, c):
            return V, -b * V - c * grad(X)
        return rhs

    if mirror is None:
        def rhs(X, W, tau, m, delta):
            return tau * (W - X), m * (X - W) - delta * grad(X)
        return rhs

    def rhs(X, W, tau, m, delta):
        return tau * (mirror.grad_h_star(W) - X), m * (mirror.grad_h(X) - W) - delta * grad(X)
    return rhs


def _z_map(spec: FlowSpec) -> Callable[[float, Vector, Vector], Vector]:
    if spec.form == "damped":
        def z_of(t, x, v):
            tau = float(spec.tau(_arr(t)))
            return x + v / tau if tau > 0 else np.full_like(x, np.nan)
        return z_of
    if spec.mirror is not None:
        return lambda t, x, w: spec.mirror.grad_h_star(w)
    return lambda t, x, w: w


def _initial_dual(spec: FlowSpec, x0: Vector) -> Vector:
    if spec.form == "damped":
        return np.zeros_like(x0)
    return spec.mirror.grad_h(x0) if spec.mirror is not None else x0.copy()


def _start_state(spec: FlowSpec, x0: Vector, g0: Vector, eps: float) -> Tuple[Vector, Vector]:
    """奇异起点的级数状态。

    τ ≈ a0/t, δ ≈ κt^q 时 ∇h(Z(ε)) = ∇h(x0) − κε^(q+1)/(q+1)·∇f(x0)，
    X(ε) = x0 + a0/(q+1+a0)·(Z(ε) − x0)；欧氏 NAG-C 即 X = x0 − ε²∇f/8。
    """
    if spec.base is not None and spec.time_map is not None:
        s = float(spec.time_map.forward(_arr(eps)))
        X, W = _start_state(spec.base, x0, g0, s)
        if spec.form == "damped":
            W = float(spec.time_map.speed(_arr(eps))) * W
        return X, W
    if spec.series is None:
        raise DomainError(f"{spec.name} 没有奇异起点的级数展开")
    a0, kappa, q = spec.series
    W = _initial_dual(spec, x0) - kappa * eps ** (q + 1.0) / (q + 1.0) * g0
    Z = spec.mirror.grad_h_star(W) if spec.mirror is not None else W
    X = x0 + a0 / (q + 1.0 + a0) * (Z - x0)
    return X, W


def _time_grid(t_start: float, horizon: float, dt: float) -> np.ndarray:
    n = int(math.floor((horizon - t_start) / dt + 1e-9))
    grid = t_start + dt * np.arange(n + 1)
    if horizon - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, horizon)
    else:
        grid[-1] = horizon
    return grid


def integrate_flow(spec: FlowSpec, obj: Objective, x0: Vector, horizon: float, dt: float = DT,
                   start_offset: Optional[float] = None, diagnostics: bool = True) -> Trajectory:
    """固定步长经典四阶 Runge-Kutta 积分一阶系统。

    起点奇异的流从 ε = start_offset（缺省 10·dt）处的级数状态出发，轨迹第一个节点仍是 t = 0 的 (x0, x0)。
    """
    if not dt > 0:
        raise DomainError(f"积分步长必须为正，收到 {dt}")
    x0 = np.asarray(x0, dtype=float).copy()
    g0 = obj.gradient(x0)
    eps = START_BUFFER_STEPS * dt if start_offset is None else start_offset
    if spec.singular_start and not 0 < eps < horizon:
        raise DomainError(f"积分区间 {horizon} 必须大于起点偏移 {eps}")
    if not horizon > 0:
        raise DomainError(f"积分区间必须为正，收到 {horizon}")
    if spec.singular_end is not None and horizon >= spec.singular_end:
        raise DomainError(f"{spec.name} 在 t = {spec.singular_end} 处奇异，只能积分到它之前")

    if spec.singular_start:
        X, W = _start_state(spec, x0, g0, eps)
        grid = _time_grid(eps, horizon, dt)
    else:
        X, W = x0.copy(), _initial_dual(spec, x0)
        grid = _time_grid(0.0, horizon, dt)
    steps = len(grid) - 1
    mids = 0.5 * (grid[:-1] + grid[1:])
    at_nodes = list(zip(*(c.tolist() for c in spec.coefficients(grid))))
    at_mids = list(zip(*(c.tolist() for c in spec.coefficients(mids))))
    for table in (at_nodes, at_mids):
        if not np.all(np.isfinite(np.asarray(table))):
            raise DomainError(f"{spec.name} 的系数在积分区间内非有限")
    rhs = _vector_field(spec, obj)
    logger.info(f"开始积分 {spec.name}: μ={spec.mu:g}, 区间 [{grid[0]:.4g}, {horizon:g}], dt={dt:g}, {steps} 步")

    n = x0.size
    xs = np.empty((steps + 1, n))
    ws = np.empty((steps + 1, n))
    dxs = np.empty((steps + 1, n))
    dws = np.empty((steps + 1, n))
    tl = grid.tolist()
    for i in range(steps):
        h = tl[i + 1] - tl[i]
        k1x, k1w = rhs(X, W, *at_nodes[i])
        xs[i], ws[i], dxs[i], dws[i] = X, W, k1x, k1w
        k2x, k2w = rhs(X + 0.5 * h * k1x, W + 0.5 * h * k1w, *at_mids[i])
        k3x, k3w = rhs(X + 0.5 * h * k2x, W + 0.5 * h * k2w, *at_mids[i])
        k4x, k4w = rhs(X + h * k3x, W + h * k3w, *at_nodes[i + 1])
        X = X + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        W = W + h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(W))):
            logger.error(f"{spec.name} 在 t = {tl[i + 1]:.6g} 处发散")
            partial = _assemble(spec, obj, x0, grid[: i + 1], xs[: i + 1], ws[: i + 1],
                                dxs[: i + 1], dws[: i + 1], dt, diagnostics=False)
            raise DivergenceError(f"{spec.name} 在 t = {tl[i + 1]:.6g} 处状态非有限", partial=partial)
    xs[steps], ws[steps] = X, W
    dxs[steps], dws[steps] = rhs(X, W, *at_nodes[steps])

    if spec.singular_start:
        grid = np.concatenate([[0.0], grid])
        xs = np.vstack([x0, xs])
        ws = np.vstack([_initial_dual(spec, x0), ws])
        dxs = np.vstack([np.zeros(n), dxs])
        dws = np.vstack([np.zeros(n), dws])
    traj = _assemble(spec, obj, x0, grid, xs, ws, dxs, dws, dt, diagnostics)
    traj.metadata["start_offset"] = eps if spec.singular_start else 0.0
    return traj


def _assemble(spec: FlowSpec, obj: Objective, x0: Vector, grid, xs, ws, dxs, dws, dt: float,
              diagnostics: bool) -> Trajectory:
    z_of = _z_map(spec)
    with np.errstate(divide="ignore", invalid="ignore"):
        zs = np.array([z_of(t, x, w) for t, x, w in zip(grid.tolist(), xs, ws)]).reshape(xs.shape)
    m = len(grid)
    gap = np.full(m, np.nan)
    energy = np.full(m, np.nan)
    bound = np.full(m, np.nan)
    if diagnostics and obj.has_solution:
        gap = np.array([obj.gap(x) for x in xs])
        if spec.energy_scales is not None and not (spec.form == "damped" and spec.mu == 0.0):
            sz, sf = spec.energy_scales(grid)
            dist = np.array([_divergence(spec, obj.minimizer, z) for z in zs])
            energy = sz * dist + np.where(sf > 0, sf * gap, 0.0)
            bound = continuous_bound(spec, grid, x0, obj)
    return Trajectory(
        flow=spec.name, times=grid, X=xs, W=ws, dX=dxs, dW=dws, Z=zs,
        f_gap=gap, energy=energy, bound=bound,
        metadata={"mu": spec.mu, "dt": dt, "problem": obj.name, **spec.params},
        z_map=z_of,
    )


# ---------- 能量与界 ----------
def _divergence(spec: FlowSpec, target: Vector, z: Vector) -> float:
    if spec.mirror is not None:
        return spec.mirror.bregman(target, z)
    return 0.5 * float(np.sum((np.asarray(z) - target) ** 2))


def energy_continuous(spec: FlowSpec, node: TrajectoryNode, obj: Objective) -> float:
    """E(t) = s_z(t)·D_h(x*, Z) + s_f(t)·(f(X) − f*)。"""
    if spec.energy_scales is None:
        raise UnsupportedDiagnosticError(f"{spec.name} 没有目录中的 Lyapunov 函数")
    if not obj.has_solution:
        raise UnsupportedDiagnosticError(f"{obj.name} 缺少极小点，无法计算能量")
    sz, sf = (float(v) for v in spec.energy_scales(_arr(node.t)))
    e = sz * _divergence(spec, obj.minimizer, node.z)
    if sf > 0.0:
        e += sf * obj.gap(node.x)
    return e


def continuous_bound(spec: FlowSpec, t, x0: Vector, obj: Objective):
    """f(X(t)) − f* ≤ E(0)/s_f(t)；s_f(t) = 0 处为 inf。"""
    x0 = np.asarray(x0, dtype=float)
    e0 = energy_continuous(spec, TrajectoryNode(0.0, x0, x0, np.zeros_like(x0)), obj)
    _, sf = spec.energy_scales(_arr(t))
    with np.errstate(divide="ignore"):
        out = np.where(sf > 0, e0 / np.where(sf > 0, sf, 1.0), np.inf)
    return float(out) if np.ndim(t) == 0 else out


# ---------- NAG-G ----------
def _extrapolate_endpoint(obj: Objective, x_far: Vector, x_near: Vector, eps: float) -> Vector:
    """由 X(T−2ε)、X(T−ε) 外推 X(T)。

    终点附近 X(T−u) = X(T) + ¼u²∇f(X(T)) + b u⁴ + …，b 由两个节点确定，
    ∇f(X(T)) 先取 ∇f(X(T−ε))，再做一次不动点更新。
    """
    g = obj.gradient(x_near)
    x_T = x_near
    for _ in range(2):
        b = (x_far - x_near - 0.75 * eps ** 2 * g) / (15.0 * eps ** 4)
        x_T = x_near - 0.25 * eps ** 2 * g - b * eps ** 4
        g = obj.gradient(x_T)
    return x_T


def integrate_nag_g(obj: Objective, x0: Vector, T: float, dt: float = DT,
                    mu: Optional[float] = None) -> Trajectory:
    """积分 NAG-G 系统到 T − ε_end（ε_end = 10·dt），再外推终点 X(T)。

    终点处 Ẋ(T) = 0，元数据记录 ‖∇f(X(T))‖² 及其理论上界。
    """
    mu = obj.mu if mu is None else mu
    spec = nag_g_flow(mu, T)
    eps = END_BUFFER_STEPS * dt
    if not T > 2.0 * eps:
        raise DomainError(f"T = {T} 过小，至少需要 2·ε_end = {2.0 * eps}")
    traj = integrate_flow(spec, obj, x0, T - eps, dt, diagnostics=False)
    x_T = _extrapolate_endpoint(obj, traj.x_at(T - 2.0 * eps), traj.X[-1], eps)
    g_T = obj.gradient(x_T)
    n = x_T.size

    traj.times = np.append(traj.times, T)
    traj.X = np.vstack([traj.X, x_T])
    traj.W = np.vstack([traj.W, x_T])
    traj.Z = np.vstack([traj.Z, x_T])
    traj.dX = np.vstack([traj.dX, np.zeros(n)])
    traj.dW = np.vstack([traj.dW, np.zeros(n)])
    if obj.has_solution:
        traj.f_gap = np.array([obj.gap(x) for x in traj.X])
    else:
        traj.f_gap = np.full(len(traj.times), np.nan)
    traj.energy = np.full(len(traj.times), np.nan)
    traj.bound = np.full(len(traj.times), np.nan)

    grad_sq = float(g_T @ g_T)
    traj.metadata.update({"T": T, "end_offset": eps, "x_T": x_T.tolist(), "grad_norm_sq": grad_sq})
    if obj.has_solution:
        traj.metadata["grad_bound"] = nag_g_bound(obj, x0, x_T, T, mu)
        traj.energy[:-1] = energy_nag_g(traj, obj, mu)
    logger.info(f"NAG-G 积分完成: T={T:g}, ‖∇f(X(T))‖² = {grad_sq:.4e}")
    return traj


def nag_g_bound(obj: Objective, x0: Vector, x_T: Vector, T: float, mu: float) -> float:
    """(8/T²)cschc²(√μT/2)(f(x0) − f* + (μ/2)‖x0 − X(T)‖²)。"""
    x0 = np.asarray(x0, dtype=float)
    d2 = float(np.sum((x0 - x_T) ** 2))
    return 8.0 / T ** 2 * float(cschc(math.sqrt(mu) * T / 2.0)) ** 2 * (obj.gap(x0) + 0.5 * mu * d2)


def energy_nag_g(trajectory: Trajectory, obj: Objective, mu: Optional[float] = None) -> np.ndarray:
    """NAG-G 轨迹的事后能量，用已算出的 X(T) 在 t < T 的节点上求值。

    E = (4/u²)cschc²(a)(f(X) − f(X_T)) − (8/u⁴)cschc⁴(a)‖X − X_T‖² + (8/u⁴)cschc²(a)cothc²(a)‖Z − X_T‖²，
    u = T − t，a = √μu/2，Z = X + (u/2)tanhc(a)Ẋ。
    """
    mu = float(trajectory.metadata.get("mu", 0.0)) if mu is None else mu
    T = float(trajectory.times[-1])
    x_T = trajectory.X[-1]
    f_T = obj.value(x_T)
    u = T - trajectory.times[:-1]
    a = math.sqrt(mu) * u / 2.0
    cs = cschc(a) ** 2
    ct = cothc(a) ** 2
    f_diff = np.array([obj.value(x) - f_T for x in trajectory.X[:-1]])
    dx = np.sum((trajectory.X[:-1] - x_T) ** 2, axis=1)
    dz = np.sum((trajectory.Z[:-1] - x_T) ** 2, axis=1)
    return 4.0 / u ** 2 * cs * f_diff - 8.0 / u ** 4 * cs ** 2 * dx + 8.0 / u ** 4 * cs * ct * dz


# ---------- 校验 ----------
def verify_time_dilation(spec: FlowSpec, time_map: TimeMap, obj: Objective, x0: Vector, horizon: float,
                         dt: float = DT, target: Optional[FlowSpec] = None) -> float:
    """比较流 2（缺省为 dilated(spec, T)）的轨迹与流 1 轨迹在 T(t) 处的取值，返回最大偏差。"""
    other = target or dilated(spec, time_map)
    traj2 = integrate_flow(other, obj, x0, horizon, dt, diagnostics=False)
    end = float(time_map.forward(_arr(horizon)))
    traj1 = integrate_flow(spec, obj, x0, end, dt, diagnostics=False)
    mapped = time_map.forward(traj2.times)
    deviation = 0.0
    for t_map, x2 in zip(mapped.tolist(), traj2.X):
        x1 = traj1.x_at(min(t_map, traj1.times[-1]))
        deviation = max(deviation, float(np.max(np.abs(x1 - x2))))
    logger.info(f"时间伸缩校验 {spec.name} → {other.name}: 最大偏差 {deviation:.3e}")
    return deviation


def ode_residual(spec: FlowSpec, trajectory: Trajectory, obj: Objective,
                 start_buffer: int = START_BUFFER_STEPS, end_buffer: int = END_BUFFER_STEPS) -> float:
    """把中心差分二阶导代入 Ẍ + b(t)Ẋ + c(t)∇f(X) = 0，返回内部节点上的最大残差范数。"""
    times = trajectory.times
    if len(times) < 5:
        raise DomainError("至少需要 5 个节点")
    first = 1 + start_buffer + (1 if spec.singular_start else 0)
    last = len(times) - 1 - end_buffer
    worst = 0.0
    for i in range(first, last):
        h0 = times[i] - times[i - 1]
        h1 = times[i + 1] - times[i]
        if abs(h1 - h0) > 1e-9 * h0:
            continue
        acc = (trajectory.X[i + 1] - 2.0 * trajectory.X[i] + trajectory.X[i - 1]) / (h0 * h1)
        t = float(times[i])
        res = acc + damping_coefficient(spec, t) * trajectory.dX[i] + gradient_factor(spec, t) * obj.gradient(trajectory.X[i])
        worst = max(worst, float(np.linalg.norm(res)))
    return worst
