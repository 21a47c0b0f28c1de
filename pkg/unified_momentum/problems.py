"""目标函数目录 - 解析梯度/Hessian、光滑性常数、合成数据与导数检查"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import numpy as np
import pandas as pd
from scipy.linalg import eigh, solve
from scipy.special import expit

from .config import section
from .errors import CapabilityError, DomainError, UnsupportedDiagnosticError

logger = logging.getLogger(__name__)

_CFG = section("problems")
REFERENCE_MAX_ITER = int(_CFG.get("reference_max_iter", 100000))
REFERENCE_GRAD_TOL = float(_CFG.get("reference_grad_tol", 1e-12))
NEWTON_POLISH_STEPS = int(_CFG.get("newton_polish_steps", 8))
FD_STEP = float(_CFG.get("fd_step", 1e-6))

Vector = np.ndarray


@dataclass(frozen=True, eq=False)
class Objective:
    """光滑凸目标函数：值、梯度、可选 Hessian 以及 L、μ、极小点信息。"""

    name: str
    dimension: int
    value: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector]
    L: float
    mu: float
    hessian: Optional[Callable[[Vector], np.ndarray]] = None
    minimizer: Optional[Vector] = None
    min_value: Optional[float] = None
    data: Dict[str, Any] = field(default_factory=dict, repr=False, compare=False)
    info: Dict[str, Any] = field(default_factory=dict, compare=False)

    def gap(self, x: Vector) -> float:
        """f(x) − f*。"""
        if self.min_value is None:
            raise UnsupportedDiagnosticError(f"{self.name} 没有已知的最优值")
        return float(self.value(x) - self.min_value)

    def distance(self, x: Vector) -> float:
        """‖x − x*‖。"""
        if self.minimizer is None:
            raise UnsupportedDiagnosticError(f"{self.name} 没有已知的极小点")
        return float(np.linalg.norm(np.asarray(x) - self.minimizer))

    @property
    def has_solution(self) -> bool:
        return self.minimizer is not None and self.min_value is not None


@dataclass
class LogisticDataset:
    """正则化逻辑回归的数据：特征 m×n、0/1 标签、正则权重 λ、随机种子。"""

    features: np.ndarray
    labels: np.ndarray
    lam: float
    seed: Optional[int] = None
    truth: Optional[np.ndarray] = None

    @property
    def m(self) -> int:
        return int(self.features.shape[0])

    @property
    def n(self) -> int:
        return int(self.features.shape[1])


# ---------- 二次函数 ----------
def make_quadratic(matrix: np.ndarray, center: Optional[Vector] = None, name: str = "quadratic") -> Objective:
    """f(x) = ½(x−c)ᵀA(x−c)，L、μ 取 A 的最大、最小特征值。"""
    A = np.atleast_2d(np.asarray(matrix, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise DomainError(f"二次型矩阵必须是方阵，收到 {A.shape}")
    if not np.allclose(A, A.T, atol=1e-12):
        raise DomainError("二次型矩阵必须对称")
    eig = eigh(A, eigvals_only=True)
    if eig[0] < -1e-12:
        raise DomainError(f"二次型矩阵不是半正定的（最小特征值 {eig[0]:.3e}）")
    n = A.shape[0]
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    def value(x: Vector) -> float:
        d = np.asarray(x, dtype=float) - c
        return 0.5 * float(d @ A @ d)

    def gradient(x: Vector) -> Vector:
        return A @ (np.asarray(x, dtype=float) - c)

    def hessian(x: Vector) -> np.ndarray:
        return A.copy()

    return Objective(
        name=name,
        dimension=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        L=float(eig[-1]),
        mu=float(max(eig[0], 0.0)),
        minimizer=c.copy(),
        min_value=0.0,
        data={"matrix": A, "center": c},
        info={"kind": "quadratic"},
    )


def make_toy_quadratic(mu: float) -> Objective:
    """二维玩具问题 f(x, y) = (μ/2)x² + 0.005y²。"""
    if not mu >= 0:
        raise DomainError(f"mu 必须非负，收到 {mu}")
    obj = make_quadratic(np.diag([mu, 0.01]), name=f"toy(mu={mu:g})")
    # 强凸参数与光滑常数按两个对角元取 min / max
    return replace(obj, L=max(mu, 0.01), mu=min(mu, 0.01), info={"kind": "toy", "mu_param": mu})


# ---------- 逻辑回归 ----------
def synth_logistic(m: int, n: int, lam: float, seed: int, zero_truth: bool = False) -> LogisticDataset:
    """高斯特征与 Bernoulli 标签的合成数据。

    抽样顺序固定：特征 a_i ~ N(0, I)，真值 x⁰ ~ N(0, 0.01·I)（zero_truth 时为 0），
    再逐行抽 u_i ~ U(0, 1)，标签 y_i = [u_i < σ(a_iᵀx⁰)]。同一种子得到逐位相同的数据。
    """
    if m < 1 or n < 1:
        raise DomainError(f"m、n 必须至少为 1，收到 m={m}, n={n}")
    if not lam > 0:
        raise DomainError(f"lambda 必须为正，收到 {lam}")
    rng = np.random.default_rng(seed)
    features = rng.standard_normal((m, n))
    truth = rng.normal(0.0, 0.1, size=n)
    if zero_truth:
        truth = np.zeros(n)
    u = rng.random(m)
    labels = (u < expit(features @ truth)).astype(np.int64)
    logger.info(f"合成逻辑回归数据: m={m}, n={n}, lambda={lam:g}, seed={seed}, 正例比例={labels.mean():.3f}")
    return LogisticDataset(features=features, labels=labels, lam=float(lam), seed=seed, truth=truth)


def _logistic_parts(ds: LogisticDataset):
    A = np.asarray(ds.features, dtype=float)
    y = np.asarray(ds.labels, dtype=float)
    m, n = A.shape
    lam = float(ds.lam)

    def value(x: Vector) -> float:
        z = A @ x
        return float((np.sum(np.logaddexp(0.0, z) - y * z) + lam * float(x @ x)) / m)

    def gradient(x: Vector) -> Vector:
        return (A.T @ (expit(A @ x) - y) + 2.0 * lam * x) / m

    def hessian(x: Vector) -> np.ndarray:
        sig = expit(A @ x)
        w = sig * (1.0 - sig)
        return ((A.T * w) @ A + 2.0 * lam * np.eye(n)) / m

    return value, gradient, hessian


def make_logistic(ds: LogisticDataset, solve_reference: bool = True) -> Objective:
    """f(x) = (1/m)(Σ(−y_i a_iᵀx + log(1 + e^{a_iᵀx})) + λ‖x‖²)。

    L 用逻辑函数曲率上界 1/4 估计；f* 由参考求解（NAG-SC 加 Newton 修正）得到。
    参考求解未达到梯度容差时 min_value 为空，info["min_status"] 记为 "warning"。
    """
    A = np.asarray(ds.features, dtype=float)
    y = np.asarray(ds.labels)
    if A.ndim != 2 or y.shape != (A.shape[0],):
        raise DomainError("特征矩阵与标签长度不一致")
    if not np.isin(y, (0, 1)).all():
        raise DomainError("标签必须取 0 或 1")
    if not ds.lam > 0:
        raise DomainError(f"lambda 必须为正，收到 {ds.lam}")
    m, n = A.shape
    value, gradient, hessian = _logistic_parts(ds)
    L = float((np.sum(A * A) / 4.0 + 2.0 * ds.lam) / m)
    mu = 2.0 * ds.lam / m
    info: Dict[str, Any] = {"kind": "logistic", "m": m, "n": n, "lambda": ds.lam, "seed": ds.seed}
    minimizer = None
    min_value = None
    if solve_reference:
        minimizer, status = _reference_minimum(gradient, hessian, n, L, mu)
        info.update(status)
        if minimizer is not None:
            min_value = value(minimizer)
    return Objective(
        name=f"logistic(m={m}, n={n}, lambda={ds.lam:g})",
        dimension=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        L=L,
        mu=mu,
        minimizer=minimizer,
        min_value=min_value,
        data={"features": A, "labels": y.astype(float), "lam": float(ds.lam)},
        info=info,
    )


def _reference_minimum(gradient, hessian, n: int, L: float, mu: float):
    """NAG-SC（s = 1/L）求近似极小点，再做若干步 Newton 修正。"""
    from .algorithms import minimize_nag_sc

    x, iterations, _ = minimize_nag_sc(gradient, np.zeros(n), 1.0 / L, mu, REFERENCE_MAX_ITER, REFERENCE_GRAD_TOL)
    grad_norm = float(np.linalg.norm(gradient(x)))
    for _ in range(NEWTON_POLISH_STEPS):
        if grad_norm <= REFERENCE_GRAD_TOL:
            break
        candidate = x - solve(hessian(x), gradient(x), assume_a="pos")
        cand_norm = float(np.linalg.norm(gradient(candidate)))
        if not cand_norm < grad_norm:
            break
        x, grad_norm = candidate, cand_norm
    status = {"min_iterations": iterations, "min_grad_norm": grad_norm}
    if grad_norm <= REFERENCE_GRAD_TOL:
        status["min_status"] = "ok"
        logger.info(f"参考求解完成: {iterations} 次迭代, ‖∇f‖ = {grad_norm:.2e}")
        return x, status
    status["min_status"] = "warning"
    logger.warning(f"参考求解未达到梯度容差 {REFERENCE_GRAD_TOL:g}（‖∇f‖ = {grad_norm:.2e}），f* 置空")
    return None, status


def _logistic_bregman_terms(z_star: np.ndarray, d: np.ndarray) -> np.ndarray:
    """softplus(z*+d) − softplus(z*) − σ(z*)d，逐样本。"""
    sig = expit(z_star)
    ad = np.abs(d)
    out = np.empty_like(d)

    small = ad < 1e-3
    k2 = sig * (1.0 - sig)
    k3 = k2 * (1.0 - 2.0 * sig)
    k4 = k2 * (1.0 - 6.0 * k2)
    ds_ = d[small]
    out[small] = (k2[small] * ds_ ** 2 / 2.0 + k3[small] * ds_ ** 3 / 6.0 + k4[small] * ds_ ** 4 / 24.0)

    mid = (~small) & (ad <= 1.0)
    out[mid] = np.log1p(sig[mid] * np.expm1(d[mid])) - sig[mid] * d[mid]

    big = ad > 1.0
    out[big] = np.logaddexp(0.0, z_star[big] + d[big]) - np.logaddexp(0.0, z_star[big]) - sig[big] * d[big]
    return out


def _sigmoid_difference(z_star: np.ndarray, d: np.ndarray) -> np.ndarray:
    """σ(z*+d) − σ(z*)，小 d 时用 σ(1−σ)·expm1(d)/(1 + σ·expm1(d))。"""
    sig = expit(z_star)
    out = expit(z_star + d) - sig
    near = np.abs(d) <= 1.0
    e = np.expm1(d[near])
    s = sig[near]
    out[near] = s * (1.0 - s) * e / (1.0 + s * e)
    return out


def recentre(obj: Objective) -> Objective:
    """以极小点为原点的 Bregman 平移：g(u) = f(x*+u) − f* − ⟨∇f(x*), u⟩。

    g 的极小点为 0、最小值为 0。逻辑回归按样本用无抵消的形式计算，
    长时间运行时 f − f* 接近舍入精度也能保持能量单调性检查有意义。
    """
    if not obj.has_solution:
        raise UnsupportedDiagnosticError(f"{obj.name} 没有已知的极小点，无法平移")
    x_star = np.asarray(obj.minimizer, dtype=float)
    kind = obj.info.get("kind")
    n = obj.dimension

    if kind in ("quadratic", "toy"):
        A = obj.data["matrix"]
        shifted = make_quadratic(A, name=f"{obj.name}@x*")
        return replace(shifted, L=obj.L, mu=obj.mu, info={**obj.info, "recentred": True, "offset": obj.min_value})

    if kind == "logistic":
        A = obj.data["features"]
        lam = obj.data["lam"]
        m = A.shape[0]
        z_star = A @ x_star

        def value(u: Vector) -> float:
            d = A @ u
            return float((np.sum(_logistic_bregman_terms(z_star, d)) + lam * float(u @ u)) / m)

        def gradient(u: Vector) -> Vector:
            return (A.T @ _sigmoid_difference(z_star, A @ u) + 2.0 * lam * u) / m

        def hessian(u: Vector) -> np.ndarray:
            sig = expit(z_star + A @ u)
            w = sig * (1.0 - sig)
            return ((A.T * w) @ A + 2.0 * lam * np.eye(n)) / m

    else:
        grad_star = obj.gradient(x_star)
        f_star = float(obj.min_value)

        def value(u: Vector) -> float:
            return float(obj.value(x_star + u) - f_star - grad_star @ u)

        def gradient(u: Vector) -> Vector:
            return obj.gradient(x_star + u) - grad_star

        hessian = None
        if obj.hessian is not None:
            def hessian(u: Vector) -> np.ndarray:
                return obj.hessian(x_star + u)

    return Objective(
        name=f"{obj.name}@x*",
        dimension=n,
        value=value,
        gradient=gradient,
        hessian=hessian,
        L=obj.L,
        mu=obj.mu,
        minimizer=np.zeros(n),
        min_value=0.0,
        data={**obj.data, "shift": x_star},
        info={**obj.info, "recentred": True, "offset": obj.min_value},
    )


# ---------- 导数检查 ----------
def grad_check(obj: Objective, point: Vector, step: float = FD_STEP) -> float:
    """中心差分梯度与解析梯度的最大相对误差 ‖fd − g‖∞ / max(1, ‖g‖∞)。"""
    if not step > 0:
        raise DomainError(f"差分步长必须为正，收到 {step}")
    x = np.asarray(point, dtype=float)
    g = obj.gradient(x)
    fd = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        fd[i] = (obj.value(x + e) - obj.value(x - e)) / (2.0 * step)
    return float(np.max(np.abs(fd - g)) / max(1.0, float(np.max(np.abs(g)))))


def hess_check(obj: Objective, point: Vector, step: float = FD_STEP) -> float:
    """梯度的中心差分与解析 Hessian 的最大相对误差。"""
    if obj.hessian is None:
        raise CapabilityError(f"{obj.name} 没有 Hessian")
    if not step > 0:
        raise DomainError(f"差分步长必须为正，收到 {step}")
    x = np.asarray(point, dtype=float)
    H = obj.hessian(x)
    fd = np.empty_like(H)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = step
        fd[:, j] = (obj.gradient(x + e) - obj.gradient(x - e)) / (2.0 * step)
    return float(np.max(np.abs(fd - H)) / max(1.0, float(np.max(np.abs(H)))))


def convexity_violations(obj: Objective, rng: np.random.Generator, pairs: int = 1000,
                         scale: float = 1.0) -> Dict[str, float]:
    """随机点对上 μ-强凸下界与 L-光滑上界的最大违反量。"""
    centre = obj.minimizer if obj.minimizer is not None else np.zeros(obj.dimension)
    worst_lower = 0.0
    worst_upper = 0.0
    for _ in range(pairs):
        x = centre + scale * rng.standard_normal(obj.dimension)
        y = centre + scale * rng.standard_normal(obj.dimension)
        d = y - x
        linear = obj.value(x) + float(obj.gradient(x) @ d)
        sq = float(d @ d)
        fy = obj.value(y)
        worst_lower = max(worst_lower, linear + 0.5 * obj.mu * sq - fy)
        worst_upper = max(worst_upper, fy - linear - 0.5 * obj.L * sq)
    return {"strong_convexity": worst_lower, "smoothness": worst_upper}


# ---------- 数据集读写 ----------
def save_dataset(ds: LogisticDataset, path: Path) -> Path:
    """写出 `row,label,a_1..a_n` CSV 和同名 JSON 附注。"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(ds.features, columns=[f"a_{i + 1}" for i in range(ds.n)])
    df.insert(0, "label", np.asarray(ds.labels, dtype=np.int64))
    df.insert(0, "row", np.arange(ds.m))
    df.to_csv(path, index=False, float_format="%.17g")
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump({"m": ds.m, "n": ds.n, "lambda": ds.lam, "seed": ds.seed}, f, indent=2)
    logger.info(f"数据集已写出: {path}")
    return path


def load_dataset(path: Path) -> LogisticDataset:
    path = Path(path)
    df = pd.read_csv(path)
    with open(path.with_suffix(".json"), "r", encoding="utf-8") as f:
        meta = json.load(f)
    cols = [f"a_{i + 1}" for i in range(int(meta["n"]))]
    missing = [c for c in ["row", "label", *cols] if c not in df.columns]
    if missing:
        raise DomainError(f"数据集缺少列: {missing}")
    if len(df) != int(meta["m"]):
        raise DomainError(f"数据集行数 {len(df)} 与附注 m={meta['m']} 不一致")
    df = df.sort_values("row")
    return LogisticDataset(
        features=df[cols].to_numpy(dtype=float),
        labels=df["label"].to_numpy(dtype=np.int64),
        lam=float(meta["lambda"]),
        seed=meta.get("seed"),
    )
