"""差分矩阵与微分核测试"""

import math

import numpy as np
import pytest

from unified_momentum.algorithms import IterateState, SchemeCoefficients, SchemeId, step_three_sequence
from unified_momentum.dynamics import integrate_flow, nag_c_system, unified_nag_system
from unified_momentum.errors import DomainError
from unified_momentum.kernels import (
    DifferenceMatrix,
    KernelId,
    MatrixOrigin,
    anti_transpose_defect,
    build_HF,
    build_HG,
    check_anti_transpose,
    integro_residual,
    kernel_closed_form,
    kernel_from_bc,
    kernel_grid,
    kernel_limit_convergence,
    kernel_time_derivative_residual,
    matrix_by_origin,
    nag_c_matrix,
    nag_sc_matrix,
    run_fsfo,
    theta_sequence,
)


class TestDifferenceMatrices:
    """OGM / OGM-G / 二序列差分矩阵"""

    def test_theta(self):
        theta = theta_sequence(3)
        assert theta[0] == 1.0
        assert theta[1] == pytest.approx((1.0 + math.sqrt(5.0)) / 2.0)
        assert theta[3] == pytest.approx((1.0 + math.sqrt(8.0 * theta[2] ** 2 + 1.0)) / 2.0)

    def test_single_step_ogm(self):
        assert build_HF(1).entries[0, 0] == pytest.approx(1.5)

    def test_lower_triangular(self):
        for N in (2, 7):
            assert np.all(np.triu(build_HF(N).entries, k=1) == 0.0)
            assert np.all(np.triu(build_HG(N).entries, k=1) == 0.0)

    def test_ogm_entries_nonnegative(self):
        assert all(np.all(build_HF(N).entries >= 0.0) for N in range(1, 51))

    def test_discrete_anti_transpose(self):
        """H_G 是 H_F 的反转置"""
        worst = max(anti_transpose_defect(build_HF(N), build_HG(N)) for N in range(1, 51))
        assert worst <= 1e-12

    def test_nag_c_entries(self):
        """h_ij = (j−1)j(j+1)/(i(i+1)(i+2))，i > j"""
        h = nag_c_matrix(30).entries
        assert h[20, 10] == pytest.approx(9 * 10 * 11 / (20 * 21 * 22), rel=1e-12)
        assert np.allclose(nag_c_matrix(10, s=0.5).entries, nag_c_matrix(10, s=1.0).entries)

    def test_nag_sc_entries(self):
        mu, s = 1e-2, 1.0
        rho = (1.0 - math.sqrt(mu * s)) / (1.0 + math.sqrt(mu * s))
        h = nag_sc_matrix(6, mu, s).entries
        assert h[3, 1] == pytest.approx(rho ** 3, rel=1e-12)
        assert h[2, 2] == pytest.approx(1.0 + rho, rel=1e-12)

    def test_rejects_upper_entries(self):
        with pytest.raises(DomainError):
            DifferenceMatrix(MatrixOrigin.OGM, np.array([[1.0, 1.0], [0.0, 1.0]]))
        with pytest.raises(DomainError):
            DifferenceMatrix(MatrixOrigin.OGM, np.ones((2, 3)))

    def test_invalid_order(self):
        with pytest.raises(DomainError):
            theta_sequence(0)
        with pytest.raises(DomainError):
            anti_transpose_defect(build_HF(2), build_HG(3))
        with pytest.raises(DomainError):
            matrix_by_origin("HEAVY_BALL", 3)

    def test_csv(self, tmp_path):
        path = build_HF(4).write(tmp_path / "hf.csv")
        lines = path.read_text(encoding="utf-8").strip().splitlines()
        assert lines[0] == "i,j,h_ij"
        assert len(lines) == 1 + 10

    def test_zero_matrix_keeps_iterate(self, toy):
        ys = run_fsfo(DifferenceMatrix(MatrixOrigin.FROM_TWO_SEQ, np.zeros((5, 5))), toy, 1.0, np.ones(2))
        assert np.all(ys == 1.0)

    def test_fsfo_decreases(self, toy):
        ys = run_fsfo(build_HF(50), toy, 1.0 / toy.L, np.ones(2))
        assert len(ys) == 51
        assert toy.value(ys[-1]) < toy.value(ys[0])
        with pytest.raises(DomainError):
            run_fsfo(build_HF(5), toy, 1.0, np.ones(2), steps=6)

    def test_fsfo_reproduces_nag_c(self, toy):
        """NAG-C 差分矩阵的固定步长格式在 50 步内复现 NAG-C 的 y 迭代"""
        s, N = 1.0, 50
        ys = run_fsfo(nag_c_matrix(N, s), toy, s, np.ones(2))
        coeffs = SchemeCoefficients.for_scheme(SchemeId.NAG_C, 0.0, s)
        state = IterateState(k=0, x=np.ones(2), y=np.ones(2), z=np.ones(2))
        nag_ys = []
        for _ in range(N + 1):
            tau, delta, _ = coeffs.next()
            state = step_three_sequence(state, tau, delta, toy, s, mu=0.0)
            nag_ys.append(state.y)
        assert np.max(np.abs(ys - np.array(nag_ys))) <= 1e-10


class TestClosedFormKernels:
    """闭式微分核"""

    def test_values(self):
        assert kernel_closed_form("NAG_C")(2.0, 1.0) == pytest.approx(0.125)
        assert kernel_closed_form("OGM")(2.0, 1.0) == pytest.approx(0.25)
        assert kernel_closed_form("OGM_G", T=4.0)(2.0, 1.0) == pytest.approx(2.0 * 8.0 / 27.0)
        assert kernel_closed_form("NAG_SC", mu=0.25)(3.0, 1.0) == pytest.approx(math.exp(-2.0))

    def test_unified_reduces_to_nag_c(self):
        t = np.array([0.5, 2.0, 9.0])
        tau = np.array([0.1, 1.0, 3.0])
        a = kernel_closed_form("UNIFIED_NAG", mu=0.0)(t, tau)
        b = kernel_closed_form("NAG_C")(t, tau)
        assert np.allclose(a, b, rtol=1e-14)

    def test_ogm_is_twice_nag_c(self):
        t = np.array([0.5, 2.0, 9.0, 4.0])
        tau = np.array([0.1, 1.0, 3.0, 4.0])
        ogm = kernel_closed_form("OGM")(t, tau)
        nag_c = kernel_closed_form("NAG_C")(t, tau)
        assert np.allclose(ogm, 2.0 * nag_c, rtol=1e-14, atol=0.0)

    def test_unified_small_mu(self):
        a = kernel_closed_form("UNIFIED_NAG", mu=1e-12)(3.0, 1.5)
        assert a == pytest.approx(0.125, abs=1e-8)

    def test_continuous_anti_transpose(self):
        T = 10.0
        assert check_anti_transpose(kernel_closed_form("OGM"), kernel_closed_form("OGM_G", T=T), T) <= 1e-10
        for mu in (0.0, 0.5):
            first = kernel_closed_form("UNIFIED_NAG", mu=mu)
            second = kernel_closed_form("UNIFIED_NAG_G", mu=mu, T=T)
            assert check_anti_transpose(first, second, T) <= 1e-10

    @pytest.mark.parametrize("kid", ["NAG_C", "NAG_SC", "OGM", "UNIFIED_NAG"])
    def test_time_derivative(self, kid):
        """∂H/∂t = −b(t)H"""
        kernel = kernel_closed_form(kid, mu=0.5)
        assert kernel_time_derivative_residual(kernel, 2.0, 1.0) <= 1e-6

    def test_domain(self):
        with pytest.raises(DomainError):
            kernel_closed_form("NAG_C")(1.0, 2.0)
        with pytest.raises(DomainError):
            kernel_closed_form("OGM_G", T=4.0)(4.0, 1.0)
        with pytest.raises(DomainError):
            kernel_closed_form("OGM_G")
        with pytest.raises(DomainError):
            kernel_closed_form(KernelId.FROM_BC)
        with pytest.raises(DomainError):
            kernel_closed_form("NAG_SC", mu=-1.0)

    def test_grid(self):
        df = kernel_grid(kernel_closed_form("NAG_C"), 10.0, 10)
        assert len(df) == 55
        assert list(df.columns) == ["t", "tau", "H"]
        assert np.all(df["H"] <= 1.0 + 1e-15)


class TestKernelFromBC:
    """由 (b, c) 求积构造的核"""

    def test_matches_closed_forms(self):
        cases = [
            (kernel_from_bc(lambda t: 3.0 / t, lambda t: 1.0), kernel_closed_form("OGM")),
            (kernel_from_bc(lambda t: 1.0, lambda t: 0.0), kernel_closed_form("NAG_SC", mu=0.25)),
        ]
        for numeric, exact in cases:
            assert numeric(2.0, 1.0) == pytest.approx(exact(2.0, 1.0), rel=1e-9)

    def test_unified(self):
        exact = kernel_closed_form("UNIFIED_NAG", mu=0.5)
        numeric = kernel_from_bc(exact.b, exact.c)
        assert numeric(3.0, 0.5) == pytest.approx(exact(3.0, 0.5), rel=1e-8)

    def test_zero_coefficients(self):
        kernel = kernel_from_bc(lambda t: 0.0, lambda t: 0.0)
        assert np.allclose(kernel(np.array([1.0, 5.0]), np.array([0.5, 0.0])), 1.0)

    def test_diagonal(self):
        kernel = kernel_from_bc(lambda t: 3.0 / t, lambda t: 1.0)
        assert kernel(2.0, 2.0) == 2.0


class TestKernelLimit:
    """差分矩阵到微分核的极限"""

    def test_nag_c(self):
        deviations = kernel_limit_convergence(lambda s, N: nag_c_matrix(N, s), kernel_closed_form("NAG_C"), 2.0, 1.0)
        assert deviations == pytest.approx([0.017857, 0.011447, 0.001866], abs=1e-5)
        assert deviations[-1] < deviations[0]

    def test_requires_off_diagonal(self):
        with pytest.raises(DomainError):
            kernel_limit_convergence(lambda s, N: nag_c_matrix(N, s), kernel_closed_form("NAG_C"), 1.0, 1.0)

    def test_integro_form(self, toy):
        """NAG-C 轨迹满足 Ẋ(t) + ∫_0^t H(t, τ)∇f(X(τ))dτ = 0"""
        traj = integrate_flow(nag_c_system(), toy, np.ones(2), 3.0)
        t = float(traj.times[np.argmin(np.abs(traj.times - 2.0))])
        assert integro_residual(traj, kernel_closed_form("NAG_C"), toy, t) <= 1e-6
        with pytest.raises(DomainError):
            integro_residual(traj, kernel_closed_form("NAG_C"), toy, 2.00005)

    def test_integro_form_unified(self, toy):
        """统一 NAG 轨迹在 t ∈ {1, 5, 10} 满足积分-微分形式"""
        mu = toy.mu
        traj = integrate_flow(unified_nag_system(mu), toy, np.ones(2), 10.5)
        kernel = kernel_closed_form("UNIFIED_NAG", mu=mu)
        for target in (1.0, 5.0, 10.0):
            t = float(traj.times[np.argmin(np.abs(traj.times - target))])
            assert integro_residual(traj, kernel, toy, t) <= 1e-6
