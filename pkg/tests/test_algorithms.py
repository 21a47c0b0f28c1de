"""离散动量格式测试"""

import json
import math
import time

import numpy as np
import pytest

from unified_momentum.algorithms import (
    IterateState,
    SchemeCoefficients,
    SchemeId,
    alpha_of_t,
    check_tk_conditions,
    collinearity_defect,
    collinearity_residual,
    gamma0_of_t0,
    iota,
    run_original_nag,
    run_scheme,
    run_two_sequence,
    scheme_sequences,
    step_three_sequence,
    t0_of_gamma0,
    t_of_alpha,
    to_two_sequence,
)
from unified_momentum.errors import DivergenceError, DomainError, StepsizeTooLargeError
from unified_momentum.problems import make_logistic, make_quadratic, make_toy_quadratic, recentre, synth_logistic


class TestCoefficients:
    """系数发生器"""

    def test_mu_zero_reduces_to_nag_c(self):
        """μ = 0 时统一 NAG 的系数与 NAG-C 完全一致"""
        s, K = 0.5, 1000
        tau, delta, _ = scheme_sequences(SchemeId.UNIFIED_CONSTANT, 0.0, s, K)
        k = np.arange(K)
        assert np.max(np.abs(tau - 2.0 / (k + 1))) <= 1e-14
        assert np.max(np.abs(delta - s * (k + 1) / 2.0)) <= 1e-14 * s * K

    def test_first_nag_c_coefficients(self):
        coeffs = SchemeCoefficients.for_scheme(SchemeId.NAG_C, 0.0, 1.0)
        assert coeffs.next() == pytest.approx((2.0, 0.5, 1.0))
        assert coeffs.next() == pytest.approx((1.0, 1.0, 2.0))

    def test_nag_sc_constant(self):
        mu, s = 1e-2, 1.0
        tau, delta, _ = scheme_sequences(SchemeId.NAG_SC, mu, s, 5)
        assert np.allclose(tau, 0.1 / 1.1)
        assert np.allclose(delta, 10.0)

    def test_single_nag_c_step(self):
        """f = x²/2, s = 0.1, x0 = z0 = 1 时 x_1 = 0.9, z_1 = 0.95"""
        obj = make_quadratic(np.array([[1.0]]))
        state = IterateState(k=0, x=np.ones(1), y=np.ones(1), z=np.ones(1))
        new = step_three_sequence(state, 2.0, 0.05, obj, 0.1, mu=0.0)
        assert new.x[0] == pytest.approx(0.9)
        assert new.z[0] == pytest.approx(0.95)

    def test_collinearity(self):
        """统一 NAG 的 (τ_k, δ_k) 满足共线条件"""
        mu, s = 1e-3, 1.0
        for sid in (SchemeId.UNIFIED_CONSTANT, SchemeId.UNIFIED_ADAPTIVE, SchemeId.NAG_SC):
            tau, delta, _ = scheme_sequences(sid, mu, s, 500)
            res = [collinearity_residual(a, b, mu, s) for a, b in zip(tau, delta)]
            assert max(abs(r) for r in res) <= 1e-9

    def test_iota(self):
        assert iota(0.0, 1.0) == 1.0
        q = math.sqrt(0.01)
        assert iota(0.01, 1.0) == pytest.approx(-math.log(1 - q) / q)

    def test_stepsize_guards(self):
        with pytest.raises(StepsizeTooLargeError):
            SchemeCoefficients.for_scheme(SchemeId.UNIFIED_CONSTANT, 1.0, 1.0)
        with pytest.raises(DomainError):
            SchemeCoefficients.for_scheme(SchemeId.NAG_SC, 0.0, 1.0)
        with pytest.raises(DomainError):
            SchemeCoefficients.for_scheme(SchemeId.NAG_C, 0.0, -1.0)


class TestTimeConversions:
    """t ↔ α 与 t_0 ↔ γ_0"""

    def test_alpha_roundtrip(self):
        mu, s = 1e-3, 1.0
        for t in (0.5, 3.0, 40.0, 400.0):
            assert t_of_alpha(alpha_of_t(t, mu, s), mu, s) == pytest.approx(t, rel=1e-10)

    def test_t_of_alpha_closed_form(self):
        """α(t) = √(μs)·coth(√μt/2) 的显式反函数"""
        mu, s = 1e-2, 0.25
        alpha = 0.3
        expected = 2.0 / math.sqrt(mu) * math.atanh(math.sqrt(mu * s) / alpha)
        assert t_of_alpha(alpha, mu, s) == pytest.approx(expected, rel=1e-14)
        assert t_of_alpha(2.0, 0.0, 1.0) == 1.0
        assert t_of_alpha(2.0, 1e-300, 1.0) == pytest.approx(1.0, rel=1e-15)

    def test_alpha_near_floor(self):
        mu, s = 1e-3, 1.0
        t = t_of_alpha(math.sqrt(mu * s) * (1.0 + 1e-10), mu, s)
        assert math.isfinite(t)
        assert alpha_of_t(t, mu, s) == pytest.approx(math.sqrt(mu * s) * (1.0 + 1e-10), rel=1e-9)

    def test_alpha_floor(self):
        with pytest.raises(DomainError):
            t_of_alpha(0.01, 1e-2, 1.0)

    def test_gamma0_roundtrip(self):
        mu, s = 1e-3, 0.01
        t0 = math.sqrt(s)
        assert t0_of_gamma0(gamma0_of_t0(t0, mu), mu, s) == pytest.approx(t0, rel=1e-10)

    def test_adaptive_tk_conditions(self):
        """自适应时间步满足两个 t_k 条件"""
        mu, s = 1e-3, 1.0
        _, _, t_next = scheme_sequences(SchemeId.UNIFIED_ADAPTIVE, mu, s, 300)
        report = check_tk_conditions(np.concatenate([[math.sqrt(s)], t_next]), mu, s)
        assert report["all_ok"]

    def test_constant_tk_conditions(self):
        _, _, t_next = scheme_sequences(SchemeId.UNIFIED_CONSTANT, 1e-3, 1.0, 10000)
        assert check_tk_conditions(t_next, 1e-3, 1.0)["all_ok"]

    def test_too_dense_sequence_fails(self):
        """t_k = 0.1k 时 α(t_k) = 20/k > 1"""
        report = check_tk_conditions(0.1 * np.arange(30), 0.0, 1.0)
        assert not report["all_ok"]
        assert not report["alpha_condition_ok"][0]

    def test_report_order(self):
        """先报告 α(t_k) ≤ 1，再报告 A(t) 比值条件"""
        report = check_tk_conditions(np.arange(1.0, 6.0), 0.0, 1.0)
        assert list(report)[:4] == ["alpha_condition_residual", "alpha_condition_ok",
                                    "ratio_condition_residual", "ratio_condition_ok"]
        assert len(report["alpha_condition_residual"]) == 3
        assert len(report["ratio_condition_residual"]) == 4

    def test_non_increasing_rejected(self):
        with pytest.raises(DomainError):
            check_tk_conditions([1.0, 0.5], 0.0, 1.0)


UNIFIED_SCHEMES = (SchemeId.UNIFIED_CONSTANT, SchemeId.UNIFIED_ADAPTIVE)


class TestUnifiedSweep:
    """统一 NAG 整组运行：玩具问题 10⁴ 步，逻辑回归 2000 步"""

    @pytest.fixture(scope="class")
    def sweep(self, logistic_for):
        problems = [(f"toy(mu={mu:g})", recentre(make_toy_quadratic(mu)), 1.0, np.ones(2), 10000)
                    for mu in (0.0, 1e-4, 1e-3)]
        for lam in (5.0, 5e-2, 5e-4):
            obj = logistic_for(lam)
            problems.append((f"logistic(lambda={lam:g})", obj, 0.01, -obj.data["shift"], 2000))
        traces = {}
        start = time.perf_counter()
        for name, obj, s, x0, K in problems:
            for scheme in UNIFIED_SCHEMES:
                traces[(name, scheme.value)] = run_scheme(obj, scheme, s, x0, K)
        return traces, time.perf_counter() - start

    def test_all_runs_complete(self, sweep):
        traces, _ = sweep
        assert len(traces) == 12
        assert len(traces[("toy(mu=0)", "UNIFIED_ADAPTIVE")].records) == 10000
        assert len(traces[("logistic(lambda=5)", "UNIFIED_CONSTANT")].records) == 2000

    def test_energy_monotone(self, sweep):
        traces, _ = sweep
        failed = [key for key, trace in traces.items() if not trace.energy_monotone()]
        assert not failed

    def test_bound_never_violated(self, sweep):
        traces, _ = sweep
        failed = {key: trace.bound_violations() for key, trace in traces.items() if trace.bound_violations()}
        assert not failed

    def test_runtime(self, sweep):
        """整组运行在 10 秒内完成"""
        _, elapsed = sweep
        assert elapsed < 10.0


class TestLyapunov:
    """能量单调性与收敛界"""

    def test_logistic_nag_c(self, logistic):
        trace = run_scheme(logistic, SchemeId.NAG_C, 0.01, -logistic.data["shift"], 2000)
        assert trace.energy_monotone()
        assert trace.bound_violations() == 0

    def test_max_energy_increase(self, toy):
        trace = run_scheme(toy, SchemeId.UNIFIED_CONSTANT, 1.0, np.ones(2), 200)
        assert trace.max_energy_increase() <= 1e-10 * max(1.0, trace.column("energy")[0])
        single = run_scheme(toy, SchemeId.UNIFIED_CONSTANT, 1.0, np.ones(2), 1)
        assert math.isnan(single.max_energy_increase())

    def test_nag_sc_estimate_sequence(self, toy):
        trace = run_scheme(toy, SchemeId.NAG_SC, 1.0, np.ones(2), 2000)
        assert trace.energy_monotone()
        assert trace.bound_violations() == 0

    def test_energy_columns(self, toy):
        trace = run_scheme(toy, SchemeId.UNIFIED_CONSTANT, 1.0, np.ones(2), 20)
        df = trace.to_frame()
        assert list(df.columns[:6]) == ["k", "t_k", "f_gap", "grad_norm", "energy", "bound"]
        assert len(df) == 20
        assert df["bound"].iloc[0] == math.inf


class TestEquivalences:
    """不同写法之间的等价性"""

    def test_original_nag_matches_adaptive(self, logistic_raw):
        """γ_0 = (4/t_0²)cothc²(√μt_0/2) 时原始 NAG 与自适应格式迭代一致"""
        s = 0.01
        t0 = math.sqrt(s)
        x0 = np.zeros(20)
        adaptive = run_scheme(logistic_raw, SchemeId.UNIFIED_ADAPTIVE, s, x0, 200, t0=t0)
        original = run_original_nag(logistic_raw, s, gamma0_of_t0(t0, logistic_raw.mu), x0, 200)
        assert np.max(np.abs(adaptive.final_state.x - original.final_state.x)) <= 1e-8

    def test_two_sequence_matches_three_sequence(self, toy):
        s, K = 1.0, 50
        tau, delta, _ = scheme_sequences(SchemeId.NAG_C, 0.0, s, K + 1)
        betas, gammas = to_two_sequence(tau, delta, 0.0, s)
        xs = run_two_sequence(toy, betas, gammas, s, np.ones(2), steps=K)
        trace = run_scheme(toy, SchemeId.NAG_C, s, np.ones(2), K)
        assert np.allclose(xs[-1], trace.final_state.x, atol=1e-12)

    def test_nag_c_momentum(self):
        """NAG-C 的二序列参数为 β_k = (k−1)/(k+2)，γ_k = 0"""
        tau, delta, _ = scheme_sequences(SchemeId.NAG_C, 0.0, 1.0, 10)
        betas, gammas = to_two_sequence(tau, delta, 0.0, 1.0)
        k = np.arange(9)
        assert np.allclose(betas, (k - 1) / (k + 2))
        assert np.allclose(gammas, 0.0, atol=1e-14)

    def test_unified_constant_has_no_gradient_correction(self):
        mu, s = 1e-3, 1.0
        tau, delta, _ = scheme_sequences(SchemeId.UNIFIED_CONSTANT, mu, s, 101)
        _, gammas = to_two_sequence(tau, delta, mu, s)
        assert np.max(np.abs(gammas)) <= 1e-12

    def test_collinearity_defect(self):
        x = np.zeros(3)
        assert collinearity_defect(x, np.ones(3), 2.0 * np.ones(3)) == pytest.approx(0.0, abs=1e-15)
        assert collinearity_defect(x, np.array([1.0, 0, 0]), np.array([0, 1.0, 0])) == pytest.approx(1.0)


class TestRunTrace:
    """运行记录"""

    def test_write(self, toy, tmp_path):
        trace = run_scheme(toy, SchemeId.UNIFIED_CONSTANT, 1.0, np.ones(2), 30)
        path = trace.write(tmp_path / "run.csv")
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert len(lines) == 31
        meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        assert meta["scheme_id"] == "UNIFIED_CONSTANT"
        assert meta["iterations"] == 30

    def test_divergence_keeps_partial(self, toy):
        with pytest.raises(DivergenceError) as exc:
            run_scheme(toy, SchemeId.NAG_C, 1000.0, np.ones(2), 200)
        assert exc.value.exit_code == 3
        assert len(exc.value.partial.records) > 0

    def test_missing_solution_gives_nan(self):
        obj = make_logistic(synth_logistic(30, 3, 1.0, seed=0), solve_reference=False)
        trace = run_scheme(obj, SchemeId.NAG_C, 0.1, np.zeros(3), 5)
        assert np.isnan(trace.column("energy")).all()
