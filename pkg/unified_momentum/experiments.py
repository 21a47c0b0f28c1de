"""实验编排 - 读取 JSON 配置，并行执行各个运行器，写出 CSV、SVG 与汇总 JSON"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
try:
    from pydantic.v1 import BaseModel, Field, ValidationError, root_validator, validator
except ImportError:
    from pydantic import BaseModel, Field, ValidationError, root_validator, validator

from .algorithms import ENERGY_SLACK as DISCRETE_SLACK
from .algorithms import SchemeId, gamma0_of_t0, run_scheme
from .dynamics import (
    DT,
    ENERGY_SLACK as CONTINUOUS_SLACK,
    FlowId,
    dilated,
    flow_spec,
    integrate_flow,
    integrate_nag_g,
    linear_time_map,
    tensor_time_map,
)
from .errors import ConfigError, DivergenceError
from .plotting import Series, render_convergence_svg
from .problems import Objective, make_logistic, make_toy_quadratic, recentre, save_dataset, synth_logistic
from .settings import get_settings
from .tensor import run_unified_tensor

logger = logging.getLogger(__name__)

TENSOR_SLACK = 1e-9
NAG_G_SLACK = 1e-7
KNOWN_CHECKS = ("energy", "bound")


# ---------- 配置模型 ----------
class ProblemConfig(BaseModel):
    """toy(mu) 或 logistic(m, n, lambda, seed)。"""

    kind: str
    mu: Optional[float] = None
    m: int = 100
    n: int = 20
    lam: Optional[float] = Field(default=None, alias="lambda")
    seed: int = 0
    recenter: bool = True

    class Config:
        allow_population_by_field_name = True
        extra = "forbid"

    @validator("kind")
    def validate_kind(cls, v):
        if v not in ("toy", "logistic"):
            raise ValueError(f"未知问题类型: {v}")
        return v

    @root_validator(skip_on_failure=True)
    def validate_parameters(cls, values):
        if values["kind"] == "toy":
            mu = values.get("mu")
            if mu is None or not mu >= 0:
                raise ValueError("toy 问题需要 mu ≥ 0")
        else:
            lam = values.get("lam")
            if lam is None or not lam > 0:
                raise ValueError("logistic 问题需要 lambda > 0")
            if values["m"] < 1 or values["n"] < 1:
                raise ValueError("logistic 问题需要 m, n ≥ 1")
        return values


class RunnerConfig(BaseModel):
    """一个运行器：scheme、flow、tensor_order 三者恰好给一个。"""

    name: Optional[str] = None
    scheme: Optional[SchemeId] = None
    flow: Optional[FlowId] = None
    tensor_order: Optional[int] = None
    params: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def validate_kind(cls, values):
        given = [k for k in ("scheme", "flow", "tensor_order") if values.get(k) is not None]
        if len(given) != 1:
            raise ValueError(f"scheme / flow / tensor_order 必须恰好给出一个，收到 {given or '无'}")
        return values

    @property
    def kind(self) -> str:
        if self.scheme is not None:
            return "scheme"
        if self.flow is not None:
            return "flow"
        return "tensor"

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.scheme is not None:
            return self.scheme.value
        if self.flow is not None:
            return self.flow.value
        return f"TENSOR_p{self.tensor_order}"


class ExperimentConfig(BaseModel):
    """实验配置；JSON 顶层字段与此一一对应。"""

    name: str = "experiment"
    problem: ProblemConfig
    runners: List[RunnerConfig]
    s: float = Field(default=1.0, gt=0)
    iterations: Optional[int] = Field(default=None, ge=1)
    horizon: Optional[float] = Field(default=None, gt=0)
    dt: float = Field(default=DT, gt=0)
    x0: Optional[List[float]] = None
    output_dir: Optional[Path] = None
    checks: List[str] = Field(default_factory=lambda: list(KNOWN_CHECKS))
    plot_axis: str = "k"

    class Config:
        extra = "forbid"

    @validator("runners")
    def validate_runners(cls, v):
        if not v:
            raise ValueError("至少需要一个运行器")
        labels = [r.label for r in v]
        duplicated = sorted({x for x in labels if labels.count(x) > 1})
        if duplicated:
            raise ValueError(f"运行器名称重复: {duplicated}，请用 name 区分")
        return v

    @validator("checks", each_item=True)
    def validate_checks(cls, v):
        if v not in KNOWN_CHECKS:
            raise ValueError(f"未知检查项: {v}（可选 {KNOWN_CHECKS}）")
        return v

    @validator("plot_axis")
    def validate_axis(cls, v):
        if v not in ("k", "t"):
            raise ValueError("plot_axis 只能是 k 或 t")
        return v

    @root_validator(skip_on_failure=True)
    def validate_run_length(cls, values):
        runners: List[RunnerConfig] = values["runners"]
        if any(r.kind != "flow" for r in runners) and values.get("iterations") is None:
            raise ValueError("离散运行器需要 iterations")
        needs_horizon = [r for r in runners if r.kind == "flow" and not (r.flow == FlowId.NAG_G and "T" in r.params)]
        if needs_horizon and values.get("horizon") is None:
            raise ValueError("连续运行器需要 horizon")
        return values


def load_experiment_config(path: Path) -> ExperimentConfig:
    """读取并校验实验配置，失败时抛出 ConfigError（details 为 pydantic 错误列表）。"""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"配置文件不存在: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"配置文件不是合法 JSON: {e}", details=[{"msg": str(e)}])
    return parse_experiment_config(raw)


def parse_experiment_config(raw: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.parse_obj(raw)
    except ValidationError as e:
        raise ConfigError("实验配置校验失败", details=e.errors())


# ---------- 运行结果 ----------
@dataclass
class RunnerResult:
    label: str
    kind: str
    status: str = "ok"
    csv_path: Optional[Path] = None
    frame: Optional[pd.DataFrame] = None
    energy_ok: Optional[bool] = None
    bound_ok: Optional[bool] = None
    bound_violations: Optional[int] = None
    final_gap: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    error: Optional[str] = None

    def summary(self) -> Dict[str, Any]:
        return {
            "status": self.status,
            "kind": self.kind,
            "csv": str(self.csv_path) if self.csv_path else None,
            "rows": None if self.frame is None else len(self.frame),
            "final_gap": self.final_gap,
            "energy_monotone": self.energy_ok,
            "bound_satisfied": self.bound_ok,
            "bound_violations": self.bound_violations,
            "error": self.error,
            **self.metadata,
        }


@dataclass
class ExperimentOutcome:
    config: ExperimentConfig
    output_dir: Path
    results: List[RunnerResult]
    summary: Dict[str, Any]
    passed: bool
    plot_path: Optional[Path] = None

    @property
    def diverged(self) -> List[str]:
        return [r.label for r in self.results if r.status == "diverged"]


# ---------- 问题构造 ----------
def build_problem(cfg: ProblemConfig, output_dir: Optional[Path] = None) -> Tuple[Objective, np.ndarray, Dict[str, Any]]:
    """构造目标函数；recenter 时返回平移后的目标和极小点偏移量。"""
    info: Dict[str, Any] = {"kind": cfg.kind}
    if cfg.kind == "toy":
        obj = make_toy_quadratic(cfg.mu)
        info["mu_param"] = cfg.mu
    else:
        ds = synth_logistic(cfg.m, cfg.n, cfg.lam, cfg.seed)
        if output_dir is not None:
            save_dataset(ds, Path(output_dir) / "dataset.csv")
        obj = make_logistic(ds)
        info.update({"m": cfg.m, "n": cfg.n, "lambda": cfg.lam, "seed": cfg.seed,
                     "mu_note": f"μ = 2λ/m = {obj.mu:g}",
                     "reference": obj.info.get("min_status")})
    info["mu"] = obj.mu
    info["L"] = obj.L
    shift = np.zeros(obj.dimension)
    if cfg.recenter:
        if obj.has_solution:
            shift = np.asarray(obj.minimizer, dtype=float)
            obj = recentre(obj)
        else:
            logger.warning(f"{obj.name} 缺少参考解，跳过平移，能量与界将缺失")
    info["recentred"] = bool(obj.info.get("recentred", False))
    return obj, shift, info


def default_x0(cfg: ProblemConfig, n: int) -> np.ndarray:
    """toy 问题从 (1, 1) 出发，逻辑回归从原点出发。"""
    return np.ones(n) if cfg.kind == "toy" else np.zeros(n)


# ---------- 单个运行器 ----------
def _final_gap(gaps: np.ndarray) -> Optional[float]:
    finite = gaps[np.isfinite(gaps)]
    return float(finite[-1]) if finite.size else None


def _run_scheme(runner: RunnerConfig, obj: Objective, exp: ExperimentConfig, x0: np.ndarray):
    params = dict(runner.params)
    gamma0 = params.get("gamma0")
    if runner.scheme == SchemeId.ORIGINAL_NAG and gamma0 is None and "t0" in params:
        gamma0 = gamma0_of_t0(float(params["t0"]), obj.mu)
    s = float(params.get("s", exp.s))
    trace = run_scheme(obj, runner.scheme, s, x0, exp.iterations, t0=params.get("t0"), gamma0=gamma0)
    return trace, float(params.get("energy_slack", DISCRETE_SLACK))


def _run_tensor(runner: RunnerConfig, obj: Objective, exp: ExperimentConfig, x0: np.ndarray):
    params = dict(runner.params)
    trace = run_unified_tensor(
        obj, x0, runner.tensor_order, float(params.get("s", exp.s)), exp.iterations,
        mu=params.get("mu"), N=params.get("N"), M=params.get("M"),
        sequence=params.get("sequence", "specific"),
    )
    return trace, float(params.get("energy_slack", TENSOR_SLACK))


def _flow_for(runner: RunnerConfig, mu: float):
    params = dict(runner.params)
    params.pop("mu", None)
    params.pop("energy_slack", None)
    if runner.flow != FlowId.DILATED:
        return flow_spec(runner.flow, mu, **params)
    base = flow_spec(params.pop("base", FlowId.UNIFIED_NAG_SYS.value), mu, **params)
    if "c" in params:
        time_map = linear_time_map(float(params["c"]))
    elif "C" in params:
        time_map = tensor_time_map(float(params["C"]))
    else:
        raise ConfigError(f"{runner.label}: DILATED 需要参数 c（线性时间映射）或 C（张量时间映射）")
    return dilated(base, time_map)


def _run_flow(runner: RunnerConfig, obj: Objective, exp: ExperimentConfig, x0: np.ndarray):
    params = runner.params
    mu = float(params.get("mu", obj.mu))
    dt = float(params.get("dt", exp.dt))
    if runner.flow == FlowId.NAG_G:
        T = float(params.get("T", exp.horizon))
        traj = integrate_nag_g(obj, x0, T, dt, mu=mu)
        return traj, float(params.get("energy_slack", NAG_G_SLACK))
    spec = _flow_for(runner, mu)
    traj = integrate_flow(spec, obj, x0, exp.horizon, dt)
    return traj, float(params.get("energy_slack", CONTINUOUS_SLACK))


def _verdicts(result: RunnerResult, runner: RunnerConfig, artifact, slack: float, has_solution: bool) -> None:
    if not has_solution:
        return
    if runner.flow == FlowId.NAG_G:
        energy = artifact.energy[:-1]
        e = energy[np.isfinite(energy)]
        if e.size >= 2:
            result.energy_ok = bool(np.all(np.diff(e) <= slack * max(1.0, abs(e[0]))))
        grad_sq = artifact.metadata.get("grad_norm_sq")
        bound = artifact.metadata.get("grad_bound")
        if grad_sq is not None and bound is not None:
            result.bound_ok = bool(grad_sq <= bound * (1.0 + 1e-9))
            result.bound_violations = int(not result.bound_ok)
        return
    energy = artifact.energy if hasattr(artifact, "times") else artifact.column("energy")
    if np.isnan(energy).all():
        # 没有能量的流（μ = 0 的 NAG-SC 系统）
        return
    result.energy_ok = artifact.energy_monotone(slack)
    if hasattr(artifact, "max_energy_increase"):
        increase = artifact.max_energy_increase()
        result.metadata["max_energy_increase"] = None if np.isnan(increase) else increase
    result.bound_violations = artifact.bound_violations()
    result.bound_ok = result.bound_violations == 0


def execute_runner(runner: RunnerConfig, obj: Objective, exp: ExperimentConfig, x0: np.ndarray,
                   output_dir: Path) -> RunnerResult:
    """执行一个运行器并写出 CSV；发散时写出已得到的部分并标记 diverged。"""
    result = RunnerResult(label=runner.label, kind=runner.kind)
    path = Path(output_dir) / f"{runner.label}.csv"
    logger.info(f"运行器开始: {runner.label}")
    try:
        if runner.kind == "scheme":
            artifact, slack = _run_scheme(runner, obj, exp, x0)
        elif runner.kind == "tensor":
            artifact, slack = _run_tensor(runner, obj, exp, x0)
        else:
            artifact, slack = _run_flow(runner, obj, exp, x0)
    except DivergenceError as e:
        logger.error(f"运行器 {runner.label} 发散: {e.message}")
        result.status = "diverged"
        result.error = e.message
        if e.partial is not None:
            result.csv_path = e.partial.write(path)
            result.frame = e.partial.to_frame()
        return result

    result.csv_path = artifact.write(path)
    result.frame = artifact.to_frame()
    result.final_gap = _final_gap(result.frame["f_gap"].to_numpy(dtype=float))
    _verdicts(result, runner, artifact, slack, obj.has_solution)
    if runner.flow == FlowId.NAG_G:
        result.metadata["grad_norm_sq"] = artifact.metadata.get("grad_norm_sq")
        result.metadata["grad_bound"] = artifact.metadata.get("grad_bound")
    if runner.kind == "tensor":
        result.metadata["certified_M"] = artifact.metadata.get("certified_M")
        result.metadata["min_M_residual"] = artifact.metadata.get("min_M_residual")
    logger.info(f"运行器结束: {runner.label}, 能量单调={result.energy_ok}, 界满足={result.bound_ok}")
    return result


# ---------- 汇总 ----------
def _series(result: RunnerResult, axis: str) -> Optional[Series]:
    df = result.frame
    if df is None or df.empty:
        return None
    if result.kind == "flow":
        x = df["t"]
    else:
        x = df["k"] if axis == "k" else df["t_k"]
    return Series(result.label, x.to_numpy(dtype=float), df["f_gap"].to_numpy(dtype=float))


def _first(results: Dict[str, RunnerResult], *schemes: SchemeId) -> Optional[RunnerResult]:
    for sid in schemes:
        r = results.get(sid.value)
        if r is not None and r.frame is not None and r.status == "ok":
            return r
    return None


def soft_checks(results: List[RunnerResult], exp: ExperimentConfig) -> Dict[str, Any]:
    """与数值实验定性结论的对照，不参与退出码。"""
    by_scheme = {}
    for res, runner in zip(results, exp.runners):
        if runner.scheme is not None:
            by_scheme.setdefault(runner.scheme.value, res)
    unified = _first(by_scheme, SchemeId.UNIFIED_CONSTANT, SchemeId.UNIFIED_ADAPTIVE)
    nag_c = _first(by_scheme, SchemeId.NAG_C)
    nag_sc = _first(by_scheme, SchemeId.NAG_SC)
    checks: Dict[str, Any] = {}
    if unified is None:
        return checks

    if nag_sc is not None and unified.final_gap is not None and nag_sc.final_gap is not None:
        ratio = unified.final_gap / nag_sc.final_gap if nag_sc.final_gap > 0 else math.inf
        checks["unified_within_10x_of_nag_sc"] = {
            "passed": bool(unified.final_gap <= 10.0 * max(nag_sc.final_gap, 0.0) or unified.final_gap == 0.0),
            "ratio": ratio,
        }
    if nag_c is not None:
        gap = unified.frame["f_gap"].to_numpy(dtype=float)
        bound = nag_c.frame["bound"].to_numpy(dtype=float)
        n = min(gap.size, bound.size)
        ok = np.isfinite(gap[:n]) & np.isfinite(bound[:n])
        if ok.any():
            excess = gap[:n][ok] - bound[:n][ok]
            checks["unified_below_nag_c_bound"] = {
                "passed": bool(np.all(excess <= 0.0)),
                "violations": int(np.sum(excess > 0.0)),
            }
        if unified.final_gap is not None and nag_c.final_gap is not None:
            checks["unified_final_le_nag_c_final"] = {
                "passed": bool(unified.final_gap <= nag_c.final_gap),
                "unified": unified.final_gap,
                "nag_c": nag_c.final_gap,
            }
    for name, item in checks.items():
        if not item["passed"]:
            logger.warning(f"定性对照未通过: {name} {item}")
    return checks


def _passed(results: List[RunnerResult], checks: List[str]) -> bool:
    for r in results:
        if r.status != "ok":
            return False
        if "energy" in checks and r.energy_ok is False:
            return False
        if "bound" in checks and r.bound_ok is False:
            return False
    return True


def resolve_output_dir(exp: ExperimentConfig) -> Path:
    if exp.output_dir is not None:
        return Path(exp.output_dir)
    return Path(get_settings().output_dir) / exp.name


def run_experiment(exp: ExperimentConfig, output_dir: Optional[Path] = None) -> ExperimentOutcome:
    """执行全部运行器，写出每个运行器的 CSV、合并的收敛图和 summary.json。"""
    out = Path(output_dir) if output_dir is not None else resolve_output_dir(exp)
    out.mkdir(parents=True, exist_ok=True)
    obj, shift, problem_info = build_problem(exp.problem, out)
    x0 = np.asarray(exp.x0, dtype=float) if exp.x0 is not None else default_x0(exp.problem, obj.dimension)
    if x0.shape != (obj.dimension,):
        raise ConfigError(f"x0 维数 {x0.size} 与问题维数 {obj.dimension} 不一致")
    x0_run = x0 - shift

    n_jobs = max(1, min(get_settings().threads, len(exp.runners)))
    logger.info(f"实验 {exp.name}: {len(exp.runners)} 个运行器, {n_jobs} 个线程, 输出到 {out}")
    results: List[RunnerResult] = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(execute_runner)(runner, obj, exp, x0_run, out) for runner in exp.runners
    )

    series = [s for s in (_series(r, exp.plot_axis) for r in results) if s is not None]
    plot_path = None
    if series:
        x_label = "k" if exp.plot_axis == "k" and all(r.kind != "flow" for r in results) else "t"
        plot_path = render_convergence_svg(series, out / "convergence.svg", x_label=x_label,
                                           title=f"{exp.name}: f − f*")

    passed = _passed(results, exp.checks)
    summary = {
        "name": exp.name,
        "problem": problem_info,
        "s": exp.s,
        "iterations": exp.iterations,
        "horizon": exp.horizon,
        "dt": exp.dt,
        "x0": x0.tolist(),
        "checks": exp.checks,
        "passed": passed,
        "runners": {r.label: r.summary() for r in results},
        "soft_checks": soft_checks(results, exp),
        "plot": str(plot_path) if plot_path else None,
    }
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, ensure_ascii=False, default=str)
    outcome = ExperimentOutcome(config=exp, output_dir=out, results=results, summary=summary,
                                passed=passed, plot_path=plot_path)
    if outcome.diverged:
        raise DivergenceError(f"运行器发散: {outcome.diverged}", partial=outcome)
    logger.info(f"实验 {exp.name} 结束: {'通过' if passed else '未通过'}")
    return outcome
