"""统一加速张量方法测试"""

import math
from dataclasses import replace

import numpy as np
import pytest

from unified_momentum.errors import CapabilityError, DomainError, InvalidOrderError
from unified_momentum.problems import make_toy_quadratic, recentre
from unified_momentum.tensor import (
    A_of_t,
    MirrorMap,
    check_M_ineq,
    lower_bound_geometric,
    lower_bound_polynomial,
    next_Ak,
    polynomial_Ak,
    run_unified_tensor,
    t_of_A,
    tensor_constant,
    tensor_update,
)


class TestMirrorMap:
    """p 范数镜像映射"""

    def test_default_scale(self):
        assert MirrorMap(2).scale == 1.0
        assert MirrorMap(3).scale == 2.0

    def test_gradient_inverse(self, rng):
        mirror = MirrorMap(3)
        x = rng.standard_normal(4)
        assert np.allclose(mirror.grad_h_star(mirror.grad_h(x)), x, rtol=1e-13)
        assert np.all(mirror.grad_h_star(np.zeros(4)) == 0.0)

    def test_bregman_nonnegative(self, rng):
        mirror = MirrorMap(3)
        for _ in range(20):
            x, y = rng.standard_normal(3), rng.standard_normal(3)
            assert mirror.bregman(y, x) >= -1e-14
        assert mirror.bregman(x, x) == pytest.approx(0.0, abs=1e-14)

    def test_euclidean_case(self):
        mirror = MirrorMap(2)
        assert mirror.bregman(np.array([1.0, 0.0]), np.zeros(2)) == pytest.approx(0.5)

    def test_invalid_order(self):
        with pytest.raises(InvalidOrderError):
            MirrorMap(1)


class TestTensorUpdate:
    """张量更新算子"""

    def test_p2_is_gradient_step(self, toy):
        y = np.array([1.0, -2.0])
        assert np.allclose(tensor_update(toy, y, 2, 0.5, 1.0), y - 0.5 * toy.gradient(y))

    def test_p3_optimality(self, toy):
        """∇f(y) + H d + (N/s)‖d‖d = 0"""
        y = np.array([3.0, -1.0])
        s, N = 0.7, 2.0
        d = tensor_update(toy, y, 3, s, N) - y
        residual = toy.gradient(y) + toy.hessian(y) @ d + (N / s) * np.linalg.norm(d) * d
        assert np.linalg.norm(residual) <= 1e-12 * max(1.0, np.linalg.norm(toy.gradient(y)))

    def test_p3_on_logistic(self, logistic):
        y = 0.5 * np.ones(20)
        d = tensor_update(logistic, y, 3, 0.01, 2.0) - y
        residual = logistic.gradient(y) + logistic.hessian(y) @ d + 200.0 * np.linalg.norm(d) * d
        assert np.linalg.norm(residual) <= 1e-10

    def test_m_inequality_on_quadratic(self, toy):
        """二次函数上 N = 2, M = 1/2 时不等式总成立"""
        y = np.array([2.0, 5.0])
        x = tensor_update(toy, y, 3, 1.0, 2.0)
        assert check_M_ineq(toy, x, y, 3, 1.0, 0.5) >= -1e-12

    def test_requires_hessian(self, toy):
        with pytest.raises(CapabilityError):
            tensor_update(replace(toy, hessian=None), np.ones(2), 3, 1.0, 2.0)

    def test_unsupported_order(self, toy):
        with pytest.raises(InvalidOrderError):
            tensor_update(toy, np.ones(2), 4, 1.0, 1.0)


class TestAkSequence:
    """A_k 序列"""

    def test_first_step(self):
        C = tensor_constant(3, 0.5)
        assert next_Ak(0.0, 3, 1.0, 0.0, C) == pytest.approx(C * 27.0)

    def test_root_equation(self):
        p, s, mu = 3, 0.5, 1e-2
        C = tensor_constant(p, 0.5)
        A = next_Ak(0.0, p, s, mu, C)
        for _ in range(10):
            A_next = next_Ak(A, p, s, mu, C)
            lhs = (A_next - A) ** p
            rhs = C * p ** p * s * A_next ** (p - 1) * (1.0 + mu * A)
            assert lhs == pytest.approx(rhs, rel=1e-10)
            A = A_next

    def test_monotone_in_mu(self):
        C = tensor_constant(3, 0.5)
        assert next_Ak(2.0, 3, 1.0, 0.1, C) >= next_Ak(2.0, 3, 1.0, 0.0, C)

    def test_tensor_constant(self):
        assert tensor_constant(2, 0.5) == pytest.approx(0.25)
        assert tensor_constant(3, 0.5) == pytest.approx(1.0 / 48.0)

    def test_polynomial(self):
        C = tensor_constant(3, 0.5)
        assert polynomial_Ak(2, 3, 1.0, C) == pytest.approx(C * 24.0)

    @pytest.mark.parametrize("p", [2, 3])
    def test_time_roundtrip(self, p):
        C, mu = tensor_constant(p, 0.5), 1e-2
        for t in (0.1, 1.0, 20.0):
            assert t_of_A(A_of_t(t, p, C, mu), p, C, mu) == pytest.approx(t, rel=1e-8)
        assert t_of_A(0.0, p, C, mu) == 0.0

    def test_negative_A(self):
        with pytest.raises(DomainError):
            next_Ak(-1.0, 3, 1.0, 0.0, 1.0)


class TestUnifiedTensorMethod:
    """p = 3 的统一加速张量方法"""

    @pytest.fixture(scope="class")
    def trace(self):
        return run_unified_tensor(recentre(make_toy_quadratic(1e-3)), np.ones(2), 3, 1.0, 200)

    def test_energy_nonincreasing(self, trace):
        e = trace.column("energy")
        assert np.all(np.diff(e) <= 1e-9 * e[0])

    def test_bound(self, trace):
        assert trace.bound_violations() == 0

    def test_m_residual(self, trace):
        assert trace.metadata["min_M_residual"] >= -1e-10
        assert trace.metadata["certified_M"] >= 0.5 - 1e-10

    def test_A_lower_bounds(self, trace):
        C, mu, s = trace.metadata["C"], trace.mu, trace.s
        A = trace.column("A_k")
        for k in range(1, len(A)):
            assert A[k] >= lower_bound_polynomial(k, 3, s, C) * (1.0 - 1e-9)
            assert A[k] >= lower_bound_geometric(k, 3, s, mu, C) * (1.0 - 1e-9)

    def test_polynomial_sequence(self, toy):
        trace = run_unified_tensor(toy, np.ones(2), 3, 1.0, 20, sequence="polynomial")
        C = trace.metadata["C"]
        A = trace.column("A_k")
        assert A[5] == pytest.approx(C * 5 * 6 * 7)
        assert trace.mu == 0.0
        assert trace.bound_violations() == 0

    def test_p2_run(self, toy):
        trace = run_unified_tensor(toy, np.ones(2), 2, 1.0, 200)
        assert trace.energy_monotone()
        assert trace.bound_violations() == 0

    def test_logistic_progress(self, logistic):
        """逻辑回归上 s = 0.01 的 p = 3 运行"""
        x0 = -logistic.data["shift"]
        trace = run_unified_tensor(logistic, x0, 3, 0.01, 50)
        gaps = trace.column("f_gap")
        assert gaps[-1] < gaps[0]
        assert trace.metadata["certified_M"] > 0.0

    def test_unknown_sequence(self, toy):
        with pytest.raises(DomainError):
            run_unified_tensor(toy, np.ones(2), 3, 1.0, 5, sequence="fast")

    def test_trace_columns(self, trace):
        df = trace.to_frame()
        assert {"A_k", "M_residual"}.issubset(df.columns)
        assert len(df) == 200
        assert math.isinf(df["bound"].iloc[0])
