"""性质校验 - 把各模块的不变量作为可执行检查运行，输出 JSON 报告"""

import json
import logging
import math
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from .algorithms import (
    SchemeId,
    check_tk_conditions,
    collinearity_residual,
    gamma0_of_t0,
    run_original_nag,
    run_scheme,
    scheme_sequences,
)
from .dynamics import (
    damping_coefficient,
    flow_spec,
    FlowId,
    identity_time_map,
    integrate_flow,
    integrate_nag_g,
    verify_time_dilation,
)
from .errors import ConfigError, DomainError
from .hyperbolic import cothc, cschc, estimate_Cp, eval_sinh_p, get_table, hyperbolic_identity_residual, sinhc, tanhc
from .kernels import (
    anti_transpose_defect,
    build_HF,
    build_HG,
    check_anti_transpose,
    kernel_closed_form,
    kernel_from_bc,
    kernel_limit_convergence,
    kernel_time_derivative_residual,
    nag_c_matrix,
    theta_sequence,
)
from .problems import make_logistic, make_quadratic, make_toy_quadratic, recentre, synth_logistic
from .settings import get_settings
from .tensor import lower_bound_geometric, lower_bound_polynomial, run_unified_tensor

logger = logging.getLogger(__name__)

SUITES = ("hyperbolic", "discrete", "tensor", "dynamics", "kernels")

CheckResult = Tuple[bool, Dict[str, Any]]
Check = Callable[[], CheckResult]


# ---------- hyperbolic ----------
def check_removable_singularities() -> CheckResult:
    values = {name: float(f(0.0)) for name, f in
              (("sinhc", sinhc), ("tanhc", tanhc), ("cothc", cothc), ("cschc", cschc))}
    return all(v == 1.0 for v in values.values()), values


def check_hyperbolic_identity() -> CheckResult:
    x = np.linspace(-20.0, 20.0, 4001)
    worst = float(np.max(np.abs(hyperbolic_identity_residual(x))))
    return worst <= 1e-12, {"max_residual": worst}


def check_nan_rejected() -> CheckResult:
    try:
        sinhc(math.nan)
    except DomainError:
        return True, {}
    return False, {"reason": "NaN 输入未被拒绝"}


def check_c2_constant() -> CheckResult:
    c2 = estimate_Cp(2)
    return abs(c2 - 0.5) <= 1e-4, {"C_2": c2}


def check_sinh2_matches_sinh() -> CheckResult:
    table = get_table(2)
    ts = np.linspace(0.0, 10.0, 201)
    worst = max(abs(eval_sinh_p(table, t)[0] - math.sinh(t)) / max(1.0, math.sinh(t)) for t in ts.tolist())
    return worst <= 1e-9, {"max_relative_deviation": worst}


# ---------- discrete ----------
def check_mu_zero_exactness() -> CheckResult:
    s, K = 1.0, 1000
    tau_u, delta_u, _ = scheme_sequences(SchemeId.UNIFIED_CONSTANT, 0.0, s, K)
    k = np.arange(K)
    worst = max(float(np.max(np.abs(tau_u - 2.0 / (k + 1)))), float(np.max(np.abs(delta_u - s * (k + 1) / 2.0))))
    return worst <= 1e-14, {"max_deviation": worst}


def check_collinearity() -> CheckResult:
    mu, s = 1e-3, 1.0
    tau, delta, _ = scheme_sequences(SchemeId.UNIFIED_CONSTANT, mu, s, 1000)
    worst = max(abs(collinearity_residual(a, b, mu, s)) for a, b in zip(tau.tolist(), delta.tolist()))
    return worst <= 1e-9, {"max_residual": worst}


def _logistic(lam: float):
    return recentre(make_logistic(synth_logistic(100, 20, lam, seed=0)))


def check_unified_energy_and_bound() -> CheckResult:
    cases = [(f"toy(mu={mu:g})", recentre(make_toy_quadratic(mu)), 1.0, np.ones(2), 10000) for mu in (0.0, 1e-4, 1e-3)]
    for lam in (5.0, 5e-2, 5e-4):
        obj = _logistic(lam)
        cases.append((f"logistic(lambda={lam:g})", obj, 0.01, -obj.data["shift"], 2000))
    detail: Dict[str, Any] = {}
    ok = True
    start = time.perf_counter()
    for name, obj, s, x0, K in cases:
        for sid in (SchemeId.UNIFIED_CONSTANT, SchemeId.UNIFIED_ADAPTIVE):
            trace = run_scheme(obj, sid, s, x0, K)
            monotone, violations = trace.energy_monotone(), trace.bound_violations()
            detail[f"{sid.value}:{name}"] = {"energy_monotone": monotone, "bound_violations": violations}
            ok = ok and monotone and violations == 0
    detail["elapsed_s"] = time.perf_counter() - start
    return ok and detail["elapsed_s"] < 10.0, detail


def check_adaptive_tk_conditions() -> CheckResult:
    mu, s = 1e-3, 1.0
    _, _, t_next = scheme_sequences(SchemeId.UNIFIED_ADAPTIVE, mu, s, 500)
    report = check_tk_conditions(np.concatenate([[math.sqrt(s)], t_next]), mu, s)
    worst = max(report["ratio_condition_residual"] + report["alpha_condition_residual"])
    return report["all_ok"], {"max_residual": worst}


def check_original_nag_equivalence() -> CheckResult:
    ds = synth_logistic(100, 20, 5e-2, seed=0)
    obj = make_logistic(ds, solve_reference=False)
    s = 0.01
    t0 = math.sqrt(s)
    adaptive = run_scheme(obj, SchemeId.UNIFIED_ADAPTIVE, s, np.zeros(20), 200, t0=t0)
    original = run_original_nag(obj, s, gamma0_of_t0(t0, obj.mu), np.zeros(20), 200)
    deviation = float(np.max(np.abs(adaptive.final_state.x - original.final_state.x)))
    return deviation <= 1e-8, {"max_deviation": deviation}


# ---------- tensor ----------
def check_tensor_p3_toy() -> CheckResult:
    obj = recentre(make_toy_quadratic(1e-3))
    s = 1.0
    trace = run_unified_tensor(obj, np.ones(2), 3, s, 200)
    C, mu = trace.metadata["C"], trace.mu
    A = trace.column("A_k")
    k = np.arange(len(A))
    poly = np.array([lower_bound_polynomial(int(i), 3, s, C) for i in k])
    geo = np.array([lower_bound_geometric(int(i), 3, s, mu, C) for i in k])
    lower_ok = bool(np.all(A >= np.maximum(poly, geo) * (1.0 - 1e-9)))
    e = trace.column("energy")
    monotone = trace.energy_monotone(1e-9 * e[0] / max(1.0, e[0]))
    detail = {
        "energy_monotone": monotone,
        "bound_violations": trace.bound_violations(),
        "min_M_residual": trace.metadata["min_M_residual"],
        "A_lower_bounds": lower_ok,
    }
    ok = monotone and detail["bound_violations"] == 0 and detail["min_M_residual"] >= -1e-10 and lower_ok
    return ok, detail


# ---------- dynamics ----------
def check_nag_sc_cosine() -> CheckResult:
    obj = make_quadratic(np.array([[1.0]]), name="x²/2")
    traj = integrate_flow(flow_spec(FlowId.NAG_SC_SYS, 0.0), obj, np.array([1.0]), 10.0, dt=1e-3)
    worst = float(np.max(np.abs(traj.X[:, 0] - np.cos(traj.times))))
    return worst <= 1e-6, {"max_deviation": worst}


def check_unified_flow_energy() -> CheckResult:
    obj = recentre(make_toy_quadratic(1e-3))
    traj = integrate_flow(flow_spec(FlowId.UNIFIED_NAG_SYS, 1e-3), obj, np.ones(2), 40.0, dt=1e-3)
    monotone, violations = traj.energy_monotone(), traj.bound_violations()
    return monotone and violations == 0, {"energy_monotone": monotone, "bound_violations": violations}


def check_identity_dilation() -> CheckResult:
    obj = recentre(make_toy_quadratic(1e-3))
    deviation = verify_time_dilation(flow_spec(FlowId.UNIFIED_NAG_SYS, 1e-3), identity_time_map(),
                                     obj, np.ones(2), 5.0)
    return deviation <= 1e-8, {"max_deviation": deviation}


def check_damping_asymptote() -> CheckResult:
    b = damping_coefficient(flow_spec(FlowId.UNIFIED_NAG_SYS, 1.0), 200.0)
    return abs(b - 2.0) <= 1e-12, {"b(200)": b}


def check_nag_g_bound() -> CheckResult:
    logistic = _logistic(5e-2)
    problems = [("toy", recentre(make_toy_quadratic(1e-3)), np.ones(2)), ("logistic", logistic, -logistic.data["shift"])]
    detail: Dict[str, Any] = {}
    ok = True
    for name, obj, x0 in problems:
        for T in (5.0, 20.0):
            traj = integrate_nag_g(obj, x0, T)
            grad_sq, bound = traj.metadata["grad_norm_sq"], traj.metadata["grad_bound"]
            e = traj.energy[:-1]
            increase = float(np.max(np.diff(e)))
            monotone = bool(increase <= 1e-7 * max(1.0, abs(e[0])))
            detail[f"{name}:T={T:g}"] = {"grad_norm_sq": grad_sq, "bound": bound, "max_energy_increase": increase}
            ok = ok and grad_sq <= bound and monotone
    return ok, detail


# ---------- kernels ----------
def check_theta_sequence() -> CheckResult:
    theta = theta_sequence(2)
    expected = [1.0, (1.0 + math.sqrt(5.0)) / 2.0, (1.0 + math.sqrt(8.0 * ((1.0 + math.sqrt(5.0)) / 2.0) ** 2 + 1.0)) / 2.0]
    worst = float(np.max(np.abs(theta - expected)))
    return worst <= 1e-15 and build_HF(1).entries[0, 0] == 1.0 + 1.0 / theta_sequence(1)[1], {"max_deviation": worst}


def check_discrete_anti_transpose() -> CheckResult:
    worst = max(anti_transpose_defect(build_HF(N), build_HG(N)) for N in range(1, 51))
    return worst <= 1e-12, {"max_defect": worst}


def check_continuous_anti_transpose() -> CheckResult:
    T = 10.0
    detail = {"OGM↔OGM_G": check_anti_transpose(kernel_closed_form("OGM"), kernel_closed_form("OGM_G", T=T), T)}
    for mu in (0.0, 0.5):
        detail[f"UNIFIED(mu={mu:g})"] = check_anti_transpose(
            kernel_closed_form("UNIFIED_NAG", mu=mu), kernel_closed_form("UNIFIED_NAG_G", mu=mu, T=T), T)
    return all(v <= 1e-10 for v in detail.values()), detail


def check_nag_c_kernel_limit() -> CheckResult:
    deviations = kernel_limit_convergence(lambda s, N: nag_c_matrix(N, s), kernel_closed_form("NAG_C"), 2.0, 1.0)
    decreasing = all(b < a for a, b in zip(deviations, deviations[1:]))
    return decreasing and deviations[-1] <= 1e-2, {"deviations": deviations}


def check_kernel_ode() -> CheckResult:
    kernel = kernel_closed_form("UNIFIED_NAG", mu=0.5)
    residual = kernel_time_derivative_residual(kernel, 2.0, 1.0)
    from_bc = kernel_from_bc(lambda t: 3.0 / t, lambda t: 0.0)
    quad_dev = abs(from_bc(2.0, 1.0) - 0.125)
    return residual <= 1e-6 and quad_dev <= 1e-9, {"dH_residual": residual, "from_bc_deviation": quad_dev}


SUITE_CHECKS: Dict[str, List[Tuple[str, Check]]] = {
    "hyperbolic": [
        ("可去奇点取值", check_removable_singularities),
        ("双曲恒等式", check_hyperbolic_identity),
        ("NaN 输入拒绝", check_nan_rejected),
        ("C_2 常数", check_c2_constant),
        ("sinh_2 与 sinh 一致", check_sinh2_matches_sinh),
    ],
    "discrete": [
        ("μ = 0 退化为 NAG-C", check_mu_zero_exactness),
        ("共线条件", check_collinearity),
        ("统一 NAG 能量与界", check_unified_energy_and_bound),
        ("自适应 t_k 条件", check_adaptive_tk_conditions),
        ("原始 NAG 等价", check_original_nag_equivalence),
    ],
    "tensor": [
        ("p = 3 玩具问题", check_tensor_p3_toy),
    ],
    "dynamics": [
        ("μ = 0 NAG-SC 解 cos t", check_nag_sc_cosine),
        ("统一 NAG 系统能量与界", check_unified_flow_energy),
        ("恒等时间伸缩", check_identity_dilation),
        ("阻尼系数渐近值", check_damping_asymptote),
        ("NAG-G 梯度范数界与能量", check_nag_g_bound),
    ],
    "kernels": [
        ("θ 序列", check_theta_sequence),
        ("差分矩阵反转置", check_discrete_anti_transpose),
        ("微分核反转置", check_continuous_anti_transpose),
        ("NAG-C 核极限", check_nag_c_kernel_limit),
        ("核的时间导数与求积", check_kernel_ode),
    ],
}


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value)
    return value


class InvariantVerifier:
    """按套件运行性质检查"""

    def __init__(self, reports_dir: Optional[Path] = None):
        self.reports_dir = Path(reports_dir) if reports_dir is not None else Path(get_settings().reports_dir)
        self.results: Dict[str, Dict[str, Any]] = {}

    @staticmethod
    def resolve(suite: str) -> List[str]:
        if suite == "all":
            return list(SUITES)
        if suite not in SUITES:
            raise ConfigError(f"未知的校验套件: {suite}（可选 {', '.join(SUITES)}, all）")
        return [suite]

    def run_suite(self, suite: str) -> Dict[str, Any]:
        """运行一个套件的全部检查"""
        logger.info(f"开始校验套件 {suite}...")
        checks: Dict[str, Any] = {}
        for check_name, check_func in SUITE_CHECKS[suite]:
            started = time.perf_counter()
            try:
                logger.info(f"运行 {check_name}...")
                ok, detail = check_func()
            except Exception as e:
                logger.error(f"{check_name} 出错: {e}")
                ok, detail = False, {"error": f"{type(e).__name__}: {e}"}
            status = "✅ 通过" if ok else "❌ 失败"
            logger.info(f"{check_name}: {status}")
            checks[check_name] = {"passed": bool(ok), "seconds": time.perf_counter() - started, **detail}
        self.results[suite] = checks
        return checks

    def run(self, suite: str) -> Dict[str, Any]:
        names = self.resolve(suite)
        for name in names:
            self.run_suite(name)
        failures = [f"{s}/{c}" for s in names for c, r in self.results[s].items() if not r["passed"]]
        return _jsonable({
            "suite": suite,
            "passed": not failures,
            "failures": failures,
            "suites": {s: self.results[s] for s in names},
        })

    def save_report(self, report: Dict[str, Any]) -> Path:
        self.reports_dir.mkdir(parents=True, exist_ok=True)
        path = self.reports_dir / f"verify_{report['suite']}.json"
        with open(path, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, ensure_ascii=False)
        logger.info(f"校验报告已保存到: {path}")
        return path
